"""Dirac operators on periodic metric graphs.

Assembles the Kirchhoff-coupled Dirac operator on finite closures of
periodic graphs, computes Floquet band structures with an exact
transfer-matrix oracle, verifies the spectral and norm inequalities the
variational theory rests on, and computes nonlinear bound states by a
deflated, gauge-fixed Newton iteration.
"""

from .fields import (
    GraphGrid,
    SpinorField,
    check_gagliardo_nirenberg,
    inner,
    load_field_csv,
    norm_h1,
    norm_lp,
    orbit_translate,
    random_smooth_field,
    save_field_csv,
)
from .graphs import (
    BlochCell,
    GraphError,
    MetricGraph,
    PeriodicClosure,
    PeriodicGraph,
    build_example,
    close_periodically,
    quotient_cell,
)
from .nonlinearity import (
    HypothesisError,
    Nonlinearity,
    THEOREM_11_SET,
    THEOREM_12_SET,
    check_hypotheses,
    hessian_consistency,
    make_asym_linear,
    make_power,
    theorem_mode_hypotheses,
)
from .operator import (
    DiracOperator,
    PhysicalScaling,
    Potential,
    ProblemParameters,
    apply_operator,
    assemble,
    check_vertex_conditions,
    export_operator,
    reduce_scaling,
)
from .spectra import (
    BandStructure,
    SpectralDecomposition,
    SplitParameters,
    band_sweep,
    check_norm_inequalities,
    check_window_inequality,
    cutoff_test_functions,
    decompose,
    estimate_band_tol,
    fractional_apply,
    interpolation_identity_check,
    secular_bands,
    verify_gap,
)
from .variational import (
    ActionContext,
    BoundState,
    ConvergedToZero,
    DeflationExhausted,
    MaxIterationsExceeded,
    SolverError,
    default_deflation_inits,
    linking_diagnostics,
    orbit_distance,
    residual_report,
    solve_bound_state,
    solve_distinct_states,
)

__version__ = "0.1.0"
