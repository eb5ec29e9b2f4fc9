"""emslab sweep and verification pipeline."""

from emslab.pipeline.export import write_sweep_outputs
from emslab.pipeline.sweep import SweepDumps, SweepResult, SweepRow, compute_row, run_sweep
from emslab.pipeline.validation import validate_sweep_json
from emslab.pipeline.verify import CheckResult, VerifyReport

__all__ = [
    "CheckResult",
    "SweepDumps",
    "SweepResult",
    "SweepRow",
    "VerifyReport",
    "compute_row",
    "run_sweep",
    "validate_sweep_json",
    "write_sweep_outputs",
]
