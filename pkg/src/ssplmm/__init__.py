"""Variable step-size strong-stability-preserving linear multistep methods."""
from .errors import *  # noqa: F401,F403
from .formulas import (
    UNBOUNDED,
    FormulaCoefficients,
    RatioHistory,
    ThirdOrderCertificate,
    build_ratio_history,
    cubic_root,
    make_second_order,
    make_third_order,
    optimal_third_order,
    ratio_history_from_Omegas,
    ssp_coefficient,
    third_order_certificate,
    upper_bound,
    verify_order,
)
from .stepsize import (
    ControllerParams,
    asymptotic_step,
    check_fe_ratio,
    check_h_bound,
    greedy_step,
    greedy_step_second,
    greedy_step_third,
    mu_n,
    tau_recursion,
)
from .config import RunConfig, parse_method
from .integrator import (
    ODEProblem,
    Trajectory,
    integrate,
    lmm_step,
    run_second_order,
    run_ssprk2,
    run_third_order,
    ssprk2_step,
)
from .diagnostics import ConvergenceTable, efficiency_ratio, l1_error, total_variation
from .spatial import make_problem

__version__ = "0.1.0"
