"""Smoke test for the ntpjcm_py extension.

Build and run from the repository root:

    cargo build -p ntpjcm-python --features extension-module --release
    cp target/release/libntpjcm_py.so python/ntpjcm_py.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import ntpjcm_py as m


def main():
    p = m.ModelParams(delta=10.0, kappa=0.01)
    assert math.isclose(p.rabi_frequency(0, 0), math.sqrt(26.0))

    # Lossless Fock-like start: Re + Rg = 1 throughout.
    cfg = m.RunConfig(nbar1=2.0, nbar2=2.0, tmax=5.0, samples=51, observables=["Re", "Rg", "N1"])
    ts = m.simulate(cfg)
    assert len(ts) == 51
    d = ts.as_dict()
    assert d["t"][-1] == 5.0
    for re, rg in zip(d["Re"], d["Rg"]):
        assert abs(re + rg - 1.0) < 1e-9
    assert ts.to_csv().splitlines()[0].startswith("t,")

    small = m.RunConfig(nbar1=0.5, nbar2=0.5, kappa=0.05, tmax=2.0, samples=11,
                        cutoff=(8, 8), observables=["Re", "N1"])
    secular, oracle, report = m.compare_with_oracle(small)
    assert report["Re"]["passed"], report
    assert len(m.simulate_oracle(small)) == 11

    try:
        m.RunConfig(kappa=-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative kappa accepted")

    try:
        m.simulate_oracle(m.RunConfig(nbar1=30.0, nbar2=30.0))
    except m.SimulationError:
        pass
    else:
        raise AssertionError("oversized oracle run accepted")

    names = m.preset_names()
    assert "fig1" in names
    curves = m.preset("fig1")
    assert curves and all(c.nbar1 == 5.0 for c in curves)

    print("smoke test passed:", len(names), "presets,", "Re deviation",
          f"{report['Re']['max_deviation']:.2e}")


if __name__ == "__main__":
    main()
