"""Error hierarchy shared by every layer of the toolkit."""


class SampledClfError(Exception):
    """Base class for all toolkit errors."""


# --- Linear algebra ---
class SingularMatrix(SampledClfError):
    pass


class NotSymmetric(SampledClfError):
    pass


class NotPositiveDefinite(SampledClfError):
    pass


# --- Design ---
class NotHurwitz(SampledClfError):
    """A closed-loop or zero-dynamics matrix failed the Lyapunov certificate."""


class BadParameter(SampledClfError):
    pass


class CertificateFailed(SampledClfError):
    """Omega_sigma(h) was not positive-definite at some sampled period."""


# --- Evaluation ---
class DomainViolation(SampledClfError):
    """The state left the admissible norm ball (or a callback returned non-finite values)."""


class DegenerateData(SampledClfError):
    pass


class InconsistentLinearization(SampledClfError):
    """The feedback-linearizing match g_eta u = rhs has no exact solution at the state."""


class IterationLimit(SampledClfError):
    pass


class ConfigError(SampledClfError):
    pass
