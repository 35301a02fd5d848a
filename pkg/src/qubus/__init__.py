"""Coherent-bus entangling gates and cluster-chain growth analysis."""

from .core import (
    DegenerateOutcomeError,
    GateConfig,
    JointState,
    apply_conditional_rotation,
    coherent_overlap,
    condition_on_outcome,
    fidelity,
    homodyne_pdf,
    quadrature_amplitude,
    reduced_density_matrix,
    sample_homodyne,
    theta_from_physics,
)
from .gates import (
    Label,
    classify_outcome,
    decision_thresholds,
    exact_misclassification,
    expected_conditional_fidelity,
    p_err,
    peak_spectrum,
    run_gate_3q,
    run_gate_trials,
    run_parity_gate_2q,
)
from .growth import (
    BASELINES,
    Strategy,
    StrategyConfig,
    analytic_ops,
    analytic_time,
    compare_strategies,
    critical_length,
    heralded_join_model,
    mc_divide_conquer,
    mc_sequential,
)

__version__ = "0.1.0"
