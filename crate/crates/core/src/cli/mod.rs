//! Command-line front end.

pub mod config;
pub mod oracle_check;
pub mod output;
pub mod presets;
pub mod run;
pub mod sweep;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use output::TimeSeries;
pub use run::{simulate, simulate_oracle, simulate_oracle_with, simulate_with};

use crate::error::{Error, Result};
use output::{render_svg, write_atomic};

#[derive(Debug, Parser)]
#[command(
    name = "ntpjcm",
    version,
    about = "Dissipative nondegenerate two-photon Jaynes-Cummings simulator",
    long_about = "Dissipative nondegenerate two-photon Jaynes-Cummings simulator.\n\n\
                  All rates and times are in units of the coupling g; delta is the \
                  two-photon detuning Delta/g and tmax is the final g*t."
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configuration and write `<out>/<name>.csv`.
    Run(RunArgs),
    /// Reproduce a figure's curve family (`fig1` .. `fig16`).
    Preset {
        #[arg(value_name = "FIGURE")]
        figure: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// List the figure presets.
    Presets,
    /// Cartesian parameter sweep; writes one CSV per point and a manifest.
    Sweep {
        /// `key=start:stop:count` or `key=v1,v2,...`; repeatable.
        #[arg(long = "range", value_name = "KEY=SPEC")]
        ranges: Vec<String>,
        #[command(flatten)]
        args: RunArgs,
    },
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` file with the same keys as the long flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Sets both mean photon numbers; `--nbar1`/`--nbar2` override it.
    #[arg(long)]
    pub nbar: Option<f64>,
    #[arg(long)]
    pub nbar1: Option<f64>,
    #[arg(long)]
    pub nbar2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, visible_alias = "k")]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Photon cutoffs `N1,N2`.
    #[arg(long, value_name = "N1,N2")]
    pub cutoff: Option<String>,
    /// Comma-separated: N1,N2,Re,Rg,G2_1,G2_2,S1,S2,F1,F2,sigma3.
    #[arg(long, value_name = "LIST")]
    pub observables: Option<String>,
    /// full-coherence | block-diagonal.
    #[arg(long)]
    pub init_mode: Option<String>,
    /// full | paper3.
    #[arg(long)]
    pub manifold: Option<String>,
    /// near-resonant | none.
    #[arg(long)]
    pub feeding: Option<String>,
    /// Also run the master-equation oracle and write a comparison report.
    #[arg(long)]
    pub oracle_check: bool,
    /// Also write an SVG plot.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Output file stem for `run`.
    #[arg(long, default_value = "run")]
    pub name: String,
    /// Allow sweeps beyond the size guard.
    #[arg(long)]
    pub force: bool,
}

impl RunArgs {
    fn flag_settings(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut num = |k: &'static str, x: Option<f64>| {
            if let Some(x) = x {
                v.push((k, x.to_string()));
            }
        };
        num("nbar", self.nbar);
        num("nbar1", self.nbar1);
        num("nbar2", self.nbar2);
        num("delta", self.delta);
        num("kappa", self.kappa);
        num("tmax", self.tmax);
        if let Some(s) = self.samples {
            v.push(("samples", s.to_string()));
        }
        let text = [
            ("cutoff", &self.cutoff),
            ("observables", &self.observables),
            ("init-mode", &self.init_mode),
            ("manifold", &self.manifold),
            ("feeding", &self.feeding),
        ];
        for (k, s) in text {
            if let Some(s) = s {
                v.push((k, s.clone()));
            }
        }
        v
    }

    /// `base`, then the config file, then explicit flags.
    pub fn resolve(&self, mut base: RunConfig) -> Result<RunConfig> {
        if let Some(path) = &self.config {
            for (k, v) in config::read_settings(path)? {
                base.set(&k, &v)?;
            }
        }
        for (k, v) in self.flag_settings() {
            base.set(k, &v)?;
        }
        base.validate()?;
        Ok(base)
    }
}

fn write_run(config: &RunConfig, ts: &TimeSeries, out: &Path, stem: &str, svg: bool) -> Result<()> {
    let csv = out.join(format!("{stem}.csv"));
    write_atomic(&csv, ts.to_csv().as_bytes())?;
    println!("{}", csv.display());
    if svg {
        for &o in &config.observables {
            let path = out.join(format!("{stem}_{o}.svg"));
            let series = vec![(o.to_string(), ts.values(o).unwrap_or_default())];
            write_atomic(&path, render_svg(o.name(), &ts.t, &series).as_bytes())?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let config = args.resolve(RunConfig::default())?;
    if args.oracle_check {
        let (secular, oracle, report) = oracle_check::oracle_check(&config)?;
        write_run(&config, &secular, &args.out, &args.name, args.svg)?;
        let path = args.out.join(format!("{}_oracle.csv", args.name));
        write_atomic(&path, oracle.to_csv().as_bytes())?;
        println!("{}", path.display());
        let text = report.render();
        let path = args.out.join(format!("{}_oracle.tsv", args.name));
        write_atomic(&path, text.as_bytes())?;
        print!("{text}");
        if !report.passed() {
            let failed: Vec<String> = report
                .comparisons
                .iter()
                .filter(|c| !c.passed())
                .map(|c| c.observable.to_string())
                .collect();
            return Err(Error::OracleMismatch(failed.join(",")));
        }
        return Ok(());
    }
    let ts = simulate(&config)?;
    write_run(&config, &ts, &args.out, &args.name, args.svg)
}

fn cmd_preset(name: &str, args: &RunArgs) -> Result<()> {
    let preset = presets::find(name)
        .ok_or_else(|| Error::InvalidParams(format!("unknown preset '{name}' (fig1 .. fig16)")))?;
    let pinned = match preset.varied {
        presets::Varied::Kappa => args.kappa,
        presets::Varied::Delta => args.delta,
    };
    let mut points = Vec::new();
    for (i, curve) in preset.curves().into_iter().enumerate() {
        let value = match preset.varied {
            presets::Varied::Kappa => curve.kappa,
            presets::Varied::Delta => curve.delta,
        };
        if pinned.is_some_and(|p| p != value) {
            continue;
        }
        let config = args.resolve(curve)?;
        points.push(sweep::SweepPoint {
            file: format!("{}_curve{}.csv", preset.name, i + 1),
            settings: vec![(preset.varied.key().to_string(), value)],
            config,
        });
    }
    if points.is_empty() {
        // A flag outside the caption's family: run it as a single curve.
        let base = preset.curves().remove(0);
        points.push(sweep::SweepPoint {
            file: format!("{}_custom.csv", preset.name),
            settings: vec![(preset.varied.key().to_string(), pinned.unwrap_or_default())],
            config: args.resolve(base)?,
        });
    }
    let files = sweep::run_sweep(&points, &args.out)?;
    for f in &files {
        println!("{}", f.display());
    }
    if args.svg {
        let mut series = Vec::new();
        let mut t = Vec::new();
        for p in &points {
            let text = std::fs::read_to_string(args.out.join(&p.file))?;
            let (ts, ys) = read_csv_column(&text, p.config.observables[0].name())?;
            let label = format!("{}={}", p.settings[0].0, p.settings[0].1);
            series.push((label, ys));
            t = ts;
        }
        let path = args.out.join(format!("{}.svg", preset.name));
        write_atomic(&path, render_svg(preset.title, &t, &series).as_bytes())?;
        println!("{}", path.display());
    }
    Ok(())
}

/// Time column and one named column of a CSV written by this tool.
pub fn read_csv_column(text: &str, name: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let j = header
        .iter()
        .position(|h| *h == name)
        .ok_or_else(|| Error::UnknownObservable(name.to_string()))?;
    let mut t = Vec::new();
    let mut y = Vec::new();
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Config(format!("bad CSV value '{s}'")));
        t.push(num(cols[0])?);
        y.push(num(cols[j])?);
    }
    Ok((t, y))
}

fn cmd_sweep(ranges: &[String], args: &RunArgs) -> Result<()> {
    let base = args.resolve(RunConfig::default())?;
    let ranges = ranges
        .iter()
        .map(|r| r.parse())
        .collect::<Result<Vec<sweep::SweepRange>>>()?;
    let points = sweep::expand(&base, &ranges, args.force)?;
    for f in sweep::run_sweep(&points, &args.out)? {
        println!("{}", f.display());
    }
    println!("{}", args.out.join(sweep::MANIFEST_NAME).display());
    Ok(())
}

/// Execute a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Preset { figure, args } => cmd_preset(figure, args),
        Command::Presets => {
            for p in &presets::PRESETS {
                let values: Vec<String> = p.values.iter().map(|v| v.to_string()).collect();
                println!(
                    "{}\t{}\tnbar=({}, {})\t{}\t{}={{{}}}",
                    p.name,
                    p.observable,
                    p.nbar1,
                    p.nbar2,
                    match p.varied {
                        presets::Varied::Kappa => format!("delta={}", p.delta),
                        presets::Varied::Delta => format!("kappa={}", p.kappa),
                    },
                    p.varied.key(),
                    values.join(", ")
                );
            }
            Ok(())
        }
        Command::Sweep { ranges, args } => cmd_sweep(ranges, args),
    }
}
