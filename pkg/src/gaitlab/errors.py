"""Exception types raised across gaitlab."""


class GaitlabError(Exception):
    """Base class for all gaitlab errors."""


class CollisionError(GaitlabError):
    """Two modules of a body tree map onto the same lattice cell."""


class GenerationError(GaitlabError):
    """Random body generation gave up after its retry budget."""


class DuplicateError(GaitlabError):
    """A robot population contains the same name twice."""


class NoJointsError(GaitlabError):
    """A controller was requested for a body without active hinges."""


class DimensionError(GaitlabError, ValueError):
    """A weight vector does not match the network dimension."""


class SingularError(GaitlabError):
    """The body-motion normal matrix is rank deficient."""


class NumericalError(GaitlabError):
    """A kernel system could not be factorised even with escalated jitter."""


class DegenerateError(GaitlabError):
    """A statistical or CMA-ES quantity degenerated (zero variance, lost PD)."""


class InsufficientData(GaitlabError, ValueError):
    """Too few observations for the requested statistic."""


class IncompleteGridError(GaitlabError):
    """Run traces are missing for part of the robot x learner x repetition grid."""

    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join(str(m) for m in self.missing[:10])
        more = "" if len(self.missing) <= 10 else f" (+{len(self.missing) - 10} more)"
        super().__init__(f"{len(self.missing)} run(s) missing: {shown}{more}")
