"""Joint transmit-waveform and receive-filter design for an ISAC base station
under interrupted-sampling repeater jamming, plus the simulation chain
(channel, echo, combiner bank, CFAR detection, Monte-Carlo sweeps) used to
evaluate the designs."""

from .comms import CommFrame, MuiReport, gen_channel, gen_symbols, mui, simulate_comm_rx
from .config import ConfigError, ExperimentConfig, config_from_dict, load_config
from .optimizer import (
    AdmmState,
    DegenerateVectorError,
    DesignConfig,
    ModelOutputs,
    default_thresholds,
    matched_filter,
    model_outputs,
    project_mainlobe_floor,
    project_modulus_cap,
    project_sidelobe_caps,
    project_unit_sphere,
    solve_v_subproblem,
    solve_x_subproblem,
)
from .radar import (
    DetectionReport,
    EchoFrame,
    apply_filter_bank,
    cfar_detect,
    combine,
    estimate_targets,
    simulate_echo,
)
from .schemes import (
    ConstraintReport,
    DesignResult,
    SolverDivergenceError,
    evaluate_constraints,
    lagrangian_value,
    run_jtmd,
    run_jtmmd,
)
from .signals import (
    JammerProfile,
    LobeMetrics,
    Scenario,
    apply_isrj,
    convolve_full,
    isrj_mask,
    lfm_waveform,
    lobe_metrics,
    pulse_compress,
    steering_vector,
)

__version__ = "0.1.0"
