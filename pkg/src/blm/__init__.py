"""Benford's-law conformity metrics for model weights and numeric datasets."""

from .benford import (
    BenfordPmf,
    DigitHistogram,
    MlhScore,
    benford_pmf,
    benford_probs,
    digit_histogram,
    jsd_benford,
    leading_digit,
    mlh,
    pearson_against_benford,
)
from .criteria import (
    RunRecord,
    ScalingConstants,
    aic,
    bic,
    correlation_table,
    eic,
    eic_scaled,
    eic_sr,
    pearson_r,
    spearman_r,
)
from .earlystop import Decision, StopConfig, StopMonitor
from .errors import (
    BlmError,
    EmptyInputError,
    IllConditionedError,
    IngestError,
    ManifestError,
    MonitorStoppedError,
    NpyFormatError,
    UndefinedCorrelationError,
)
from .gpr import GprRegressor, fit_gpr, gpr_correlation_rows
from .ingest import (
    LayerReport,
    ModelManifest,
    TensorSource,
    layerwise_report,
    load_manifest,
    model_mlh,
    parse_npy,
    write_npy,
)
from .thermo import (
    ThermoConfig,
    ThermoCurve,
    analytic_mlh,
    exp_digit_pmf,
    sample_energies,
    sweep,
)

__version__ = "0.1.0"
