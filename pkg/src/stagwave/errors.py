"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: configuration problems
exit 2, a numerical blow-up exits 3 and a failed time-step estimation
exits 4.
"""

from __future__ import annotations


class StagwaveError(Exception):
    """Base class for all package errors."""


class ConfigError(StagwaveError):
    """Invalid scenario configuration or mismatched operator dimensions."""


class FlowRuleError(StagwaveError):
    """A local flow-rule solve failed to produce an admissible state."""


class BlowUpError(StagwaveError):
    """A field left the admissible range during time stepping.

    Carries the failing step index and, when raised from a driver loop,
    the partial energy ledger accumulated up to the failure.
    """

    def __init__(self, step_index, detail="", ledger=None, state=None):
        super().__init__(
            f"numerical blow-up at step {step_index}"
            + (f": {detail}" if detail else "")
        )
        self.step_index = step_index
        self.detail = detail
        self.ledger = ledger if ledger is not None else []
        self.state = state


class EstimationError(StagwaveError):
    """The stable-step estimator did not converge."""

    def __init__(self, message, last_quotient=None, last_delta=None):
        super().__init__(message)
        self.last_quotient = last_quotient
        self.last_delta = last_delta
