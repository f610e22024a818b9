"""Mini VM: executes call sequences and records edge coverage and oracle events."""
from .coverage import BUCKET_FLOORS, CoverageMap, bucket, is_interesting
from .interpreter import STEP_CAP, HarnessError, MiniVM
from .model import (
    ADDRESS_POOL,
    MAX_ARG,
    MAX_CALLS,
    Call,
    ExecResult,
    Location,
    OracleEvent,
    TestCase,
    VmState,
)

__all__ = [
    "ADDRESS_POOL", "BUCKET_FLOORS", "Call", "CoverageMap", "ExecResult",
    "HarnessError", "Location", "MAX_ARG", "MAX_CALLS", "MiniVM", "OracleEvent",
    "STEP_CAP", "TestCase", "VmState", "bucket", "is_interesting",
]
