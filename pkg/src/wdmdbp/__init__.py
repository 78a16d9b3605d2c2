"""Coherent WDM transmission simulation and coupled-channel digital
backpropagation."""

from .signals import (
    ConfigurationError,
    DualPolSignal,
    SpectralFilter,
    WdmSignal,
    apply_spectral_filter,
    brickwall_response,
    dispersion_response,
    frequency_shift,
    overlap_save_filter,
    resample,
    rrc_response,
)
from .txrx import (
    QAM64_BITS,
    QAM64_POINTS,
    SymbolFrame,
    TxConfig,
    bits_to_symbols,
    demux_channel,
    generate_frame,
    matched_filter_and_sample,
    remove_mpr,
    shape_and_mux,
)
from .channel import (
    AmpConfig,
    FiberSpan,
    Link,
    StepPlan,
    amplify_with_ase,
    propagate_link,
    propagate_span,
)
from .dbp import (
    CoefficientSet,
    DbpConfig,
    DbpMethod,
    NonlinearStepParams,
    complexity,
    linear_step,
    nonlinear_step_cc_essfm,
    nonlinear_step_essfm,
    nonlinear_step_ssfm,
    parse_method,
    run_dbp,
)
from .optimizer import (
    ObjectiveReport,
    TrainingConfig,
    load_coefficients,
    mse,
    optimize_coefficients,
    optimize_nl_scale,
    save_coefficients,
)
from .metrics import MetricsReport, estimate_gmi, nmse, sweep_launch_power
from .pipeline import (
    DataFileError,
    ExperimentConfig,
    NumericalError,
    dbp_config_for,
    dbp_input,
    derived_seed,
    evaluate_field,
    evaluate_point,
    load_experiment_config,
    load_signal,
    run_sweep,
    save_signal,
    simulate_field,
    train_method,
    write_metrics_csv,
)

__version__ = "0.1.0"
