from .binding import (
    correlation_summary,
    eic,
    eic_scaled,
    make_monitor,
    make_record,
    mlh_of_buffer,
)
from .experiment import (
    ExperimentConfig,
    RunResult,
    SmallCnn,
    collect_records,
    run_one,
    run_sweep,
    weight_buffer,
)

__version__ = "0.1.0"
