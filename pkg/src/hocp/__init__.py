"""Higher-order cutting-plane trust-region bundle method for nonsmooth minimization."""

from .backend import FLOAT64, BigFloatBackend, Float64Backend, make_backend
from .bundle_loop import BundleInit, BundleLoopResult, OracleCache, build_bundle
from .diagnostics import (
    RateReport,
    cauchy_constant,
    criticality_measure,
    estimate_r_order,
    min_norm_convex_hull,
)
from .drivers import (
    EpsSchedule,
    GlobalConfig,
    GlobalRunResult,
    LocalRunResult,
    run_global,
    run_local,
)
from .model import Bundle, Cut, TrustRegion, bundle_dump, model_eval, model_gap, remainder_probe
from .problems import (
    Problem,
    finite_difference_check,
    generate_maxeig_instance,
    generate_sumabs_instance,
    list_problems,
    load_instance,
    problem_from_instance,
    problem_halfhalf,
    problem_maxeig,
    problem_maxroot,
    problem_sumabs,
    problem_threebranch,
    save_instance,
)
from .subproblem import (
    IncompatibleStrategyError,
    SubproblemSolution,
    solve,
    solve_exact_1d,
    solve_lp_q1,
    solve_smoothed_multistart,
)
from .tensors import TaylorJet, jet_from_derivatives

__version__ = "0.1.0"
