"""Row-finite spin systems on quenched geometric graphs.

Thin wrapper over the C++ core: configuration generators, weighted scale
norms, the nonnegative comparison operator with its truncated series solver,
the four interaction models, cutoff integration and the bound checks.
"""

import json as _json

from rowfinite._core import (  # noqa: F401
    ConfigError,
    Configuration,
    InfluenceSpec,
    KernelSpec,
    MajorantParams,
    ModelSpec,
    Normalization,
    PotentialSpec,
    ResourceLimitError,
    RowFiniteOperator,
    Trajectory,
    Volume,
    WeightFunction,
    WeightPair,
    admissibility_margin,
    build_A,
    calibrate_C,
    calibrate_front_factor,
    check_comparison,
    check_growth,
    closed_form_C,
    comparison_series,
    comparison_trajectory,
    constant_weight,
    cutoff,
    d_mu,
    dissipativity_residual,
    empirical_op_norm,
    empirical_order,
    exp_weight,
    gen_lattice,
    gen_poisson,
    grad_norm,
    integrate_cutoff,
    jacobian_block,
    lemma_majorant_params,
    linear_weight,
    log_majorant,
    log_weight,
    loglog_of,
    loglog_pair,
    loglog_weight,
    lyapunov,
    measure_D,
    norm_growth_check,
    order_and_type,
    ovsyannikov_series,
    rhs,
    scale_norm,
    shift_ratio_sup,
)
from rowfinite._core import run_scenario as _run_scenario_raw


def run_scenario(name, out_dir=None):
    """Run a canned scenario and return its report as a dict."""
    return _json.loads(_run_scenario_raw(name, out_dir))


__all__ = [n for n in dir() if not n.startswith("_")]
