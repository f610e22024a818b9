"""Coverage-guided stateful fuzzing driven by externally produced static metrics."""

__version__ = "0.1.0"
