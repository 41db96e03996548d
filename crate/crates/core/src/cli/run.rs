//! Single runs with the secular solver or the oracle.

use crate::cli::config::RunConfig;
use crate::cli::output::TimeSeries;
use crate::density::{Cutoff, DressedDensity};
use crate::dressed_basis::ModelParams;
use crate::error::Result;
use crate::initial_state::{coherent_excited, default_cutoff, InitMode};
use crate::lindblad_oracle::{self, BareDensity};
use crate::observables::{Observable, ObservableSample};
use crate::secular_solver::SecularEvolution;

pub fn model_params(config: &RunConfig) -> Result<ModelParams> {
    ModelParams::new(config.delta, config.kappa)
}

/// Cutoff used for `config`: the override or the Poisson default.
pub fn effective_cutoff(config: &RunConfig) -> Cutoff {
    config
        .cutoff
        .unwrap_or_else(|| Cutoff::new(default_cutoff(config.nbar1), default_cutoff(config.nbar2)))
}

/// Secular-solver time series for `config`.
pub fn simulate(config: &RunConfig) -> Result<TimeSeries> {
    simulate_with(config, |_, _, _| Ok(()))
}

/// [`simulate`], also handing every sampled density to `inspect`.
pub fn simulate_with<F>(config: &RunConfig, mut inspect: F) -> Result<TimeSeries>
where
    F: FnMut(usize, f64, &DressedDensity) -> Result<()>,
{
    config.validate()?;
    let p = model_params(config)?;
    if config.init_mode == InitMode::BlockDiagonal
        && config.observables.iter().any(|o| {
            matches!(o, Observable::S1 | Observable::S2 | Observable::F1 | Observable::F2)
        })
    {
        log::warn!("block-diagonal initial state has no cross-block coherences: S and F are trivial");
    }
    let w0 = coherent_excited(&p, config.nbar1, config.nbar2, config.cutoff, config.init_mode)?;
    let ev = SecularEvolution::with_feeding(w0, config.manifold, config.feeding)?;
    let t = config.time_grid();
    let mut rows = Vec::with_capacity(t.len());
    ev.for_each_sample(&t, |i, ti, w| {
        inspect(i, ti, w)?;
        let s = ObservableSample::evaluate(w, ti, &config.observables)?;
        rows.push(s.values.into_iter().map(|(_, v)| v).collect());
        Ok(())
    })?;
    Ok(TimeSeries {
        observables: config.observables.clone(),
        t,
        rows,
    })
}

/// Full master-equation time series for `config` (coherent initial state,
/// renormalized over the cutoff).
pub fn simulate_oracle(config: &RunConfig) -> Result<TimeSeries> {
    simulate_oracle_with(config, |_, _, _| Ok(()))
}

/// [`simulate_oracle`], also handing every sampled density to `inspect`.
pub fn simulate_oracle_with<F>(config: &RunConfig, mut inspect: F) -> Result<TimeSeries>
where
    F: FnMut(usize, f64, &BareDensity) -> Result<()>,
{
    config.validate()?;
    let p = model_params(config)?;
    let cut = effective_cutoff(config);
    let rho0 = BareDensity::coherent_excited(config.nbar1, config.nbar2, cut)?;
    let t = config.time_grid();
    let dt = lindblad_oracle::advisory_dt(&p, cut);
    let mut rows = Vec::with_capacity(t.len());
    lindblad_oracle::integrate_with(&rho0, &p, &t, dt, |i, rho| {
        inspect(i, t[i], rho)?;
        rows.push(
            config
                .observables
                .iter()
                .map(|&o| lindblad_oracle::observable_value(rho, &p, t[i], o))
                .collect(),
        );
        Ok(())
    })?;
    Ok(TimeSeries {
        observables: config.observables.clone(),
        t,
        rows,
    })
}
