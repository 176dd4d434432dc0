"""Exact-rational toolkit for private retrieval of several messages from replicated servers."""

from .compiler import (
    AllocationError,
    QueryPlan,
    SelfCheckError,
    SubpacketRef,
    build_plan,
    census,
    classify,
    parse,
    self_check,
    serialize,
    type_counts,
)
from .exact import Rational, binom, is_integral, parse_rat, rat_decimal, rat_str
from .params import (
    Comparison,
    ParamSet,
    ProblemInstance,
    SchemeError,
    bu_baseline,
    compare_schemes,
    compute_fg,
    compute_v,
    lower_bound,
    paramset_to_dict,
    recovery_counts,
    solve_scheme,
    upper_bound,
)
from .protocol import (
    SYMBOLIC,
    DecodeError,
    DecodeTrace,
    FieldSpec,
    MessageStore,
    SimulationResult,
    answer_all,
    decode,
    gen_messages,
    measure_rate,
    simulate,
)
from .validation import InvalidInstanceError, check_demand_set, check_instance
from .verification import (
    LPInfeasibleError,
    PrivacyReport,
    RecoverabilityReport,
    lp_oracle,
    verify_privacy,
    verify_recoverability,
)

__version__ = "0.1.0"


def __getattr__(name):
    # scikit-learn is slow to import, so the estimator loads on first use
    if name == "ABPIRScheme":
        from .estimator import ABPIRScheme

        return ABPIRScheme
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
