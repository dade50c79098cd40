"""Grid-refinement stability of P_T(150) for one full-size case.

Uses the acceptance cache; a cold cache costs about an hour of CPU.
"""

import os
from pathlib import Path

import pytest

from composite_tunneling.config import ExperimentConfig
from composite_tunneling.experiments import case_label, load_trace, run_time_traces

CACHE = Path(os.environ.get("COMPOSITE_TUNNELING_CACHE", Path(__file__).resolve().parents[1] / ".acceptance_cache"))

CASE = {"experiment": "traces", "channels": [2], "alphas": [-3.0]}
VARIANTS = {
    "base": {},
    "half_dt": {"propagation": {"dt": 0.01}},
    "double_points": {"grid": {"R": [-130.0, 90.0, 4096], "rho": [-24.0, 24.0, 512]}},
}


def final_p_t(name):
    out = CACHE / "refinement" / name
    run_time_traces(ExperimentConfig.from_dict({**CASE, **VARIANTS[name]}), out)
    return load_trace(out / f"trace_{case_label(2, -3.0)}.csv").last()["P_T"]


@pytest.fixture(scope="module")
def base():
    return final_p_t("base")


@pytest.mark.xfail(strict=True, reason="Strang splitting: halving dt moves P_T(150) by ~4.5e-4")
def test_halving_dt(base):
    assert abs(final_p_t("half_dt") - base) < 1e-4


def test_doubling_points(base):
    assert abs(final_p_t("double_points") - base) < 1e-3
