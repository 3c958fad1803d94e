"""Exception hierarchy shared by the solvers and the harness.

The harness records the class name of any :class:`SolverFailure` as the
trial's failure class, so the names here are part of the CSV contract.
"""


class SolverFailure(RuntimeError):
    """Base class for recoverable solver failures."""


class UnconstrainableBudgetError(SolverFailure):
    """No tree/matching can meet the budget, or the dual bracket never closed."""


class RepairError(SolverFailure):
    """The threshold subgraph could not reconnect the repair forest."""


class AugmentationError(SolverFailure):
    """No augmenting path exists in the cheap graph, even after escalation."""


class PatchError(SolverFailure):
    """Budget patching after augmentation ran out of rounds."""


class ContractViolation(ValueError):
    """An input violated a documented precondition."""


class InstanceFormatError(ValueError):
    """Malformed instance file."""
