"""Exception types shared across the toolkit."""


class DwlabError(Exception):
    """Base class for all toolkit errors."""


class CertificationError(DwlabError):
    """A potential violates one of the double-well axioms."""


class NonConvergence(DwlabError):
    """An iterative solve hit its iteration cap above tolerance."""


class DomainTooSmall(DwlabError):
    """The support of a radial minimizer touches the grid boundary."""


class EmptySupport(DwlabError):
    """A profile has too few interior support nodes for the requested operation."""


class SweepExhausted(DwlabError):
    """No parameter on a sweep satisfied the qualification predicate."""


class ResolutionTooCoarse(DwlabError):
    """A domain feature spans too few grid cells to be meaningful."""


class UnknownFamily(DwlabError):
    """Topology was requested for a mask not generated by a tabulated family."""


class NegativeValues(DwlabError):
    """An operation requiring nonnegative data received negative values."""


class ZeroField(DwlabError):
    """An operation requiring a nonzero field received the zero field."""


class BumpOverflowsDomain(DwlabError):
    """A transplanted bump would stick out of the target domain."""


class MissingRadialData(DwlabError):
    """No radial solve is available at the requested mass parameter."""


class SingularJacobian(DwlabError):
    """The Newton system is numerically singular (degenerate critical point)."""


class Diverged(DwlabError):
    """Newton iteration left its basin of attraction."""


class VolumeDrift(Warning):
    """Accumulated volume drift exceeded tolerance and was re-projected."""


class EigSolverStall(DwlabError):
    """The iterative eigensolver failed to reach the requested residual."""


class DegenerateInput(DwlabError):
    """A Morse-theoretic check received a record flagged as degenerate."""


class ConfigError(DwlabError):
    """An experiment configuration failed validation."""
