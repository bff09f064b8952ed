"""Exception hierarchy shared by every module of the package."""


class CascadeRiskError(Exception):
    """Base class for all errors raised by cascade_risk."""


class InvalidSpec(CascadeRiskError, ValueError):
    pass


class DisconnectedGraph(CascadeRiskError):
    pass


class EigSolverFailure(CascadeRiskError):
    pass


class RetryExhausted(CascadeRiskError):
    pass


class StabilityViolation(CascadeRiskError):
    """The delay violates tau < pi / (2 lambda_n), or sits too close to it."""


class DomainError(CascadeRiskError, ValueError):
    pass


class DomainViolation(CascadeRiskError):
    """Some lambda_k * tau falls outside the uniform interval S-bar."""


class SingularBlock(CascadeRiskError):
    """The covariance block of the observed agents is numerically singular."""


class TargetObserved(CascadeRiskError, ValueError):
    pass


class InvalidCount(CascadeRiskError, ValueError):
    pass


class InvalidCase(CascadeRiskError, ValueError):
    pass


class DegenerateUpdate(CascadeRiskError):
    """The new observation is (numerically) determined by the existing ones."""


class QuadratureFailure(CascadeRiskError):
    pass


class DegenerateCorrelation(CascadeRiskError):
    pass


class InvalidSign(CascadeRiskError, ValueError):
    pass


class NumericalBlowup(CascadeRiskError):
    """Simulated trajectories diverged (unstable delay or too coarse a step)."""


class InsufficientSamples(CascadeRiskError):
    pass


class EmptyConditioningSet(CascadeRiskError):
    pass
