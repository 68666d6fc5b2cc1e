"""Exception hierarchy shared by all analysis stages.

The CLI maps these onto process exit codes (see ``windscale.cli``):
configuration problems exit 2, ingestion problems 3, numerical stage
failures 4, anything unexpected 5.
"""


class WindscaleError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(WindscaleError):
    """Invalid or missing configuration (bad file, bad parameter combination)."""


class IngestionError(WindscaleError):
    """CSV ingestion failed: missing columns, bad timestamps, gaps under `fail`."""


class NumericalError(WindscaleError):
    """A numerical stage could not produce a valid result (degenerate input,
    eigensolver failure, too few points in a fit window, ...)."""


class FitConvergenceError(NumericalError):
    """A maximum-likelihood fit did not converge within its iteration budget."""


class StageError(WindscaleError):
    """A pipeline stage failed; carries the stage name, series label and cause."""

    def __init__(self, stage, label, cause):
        super().__init__(f"stage {stage!r} failed for series {label!r}: {cause}")
        self.stage = stage
        self.label = label
        self.cause = cause
