"""Exception hierarchy shared by all modules."""


class PQSLError(Exception):
    """Base class for every error raised by this package."""


class InvalidHermitian(PQSLError, ValueError):
    """A matrix expected to be Hermitian is not, beyond tolerance."""


class NotPositiveSemidefinite(PQSLError, ValueError):
    """An eigenvalue lies below the allowed negative floor."""


class DimensionMismatch(PQSLError, ValueError):
    """Operands have incompatible dimensions."""


class IntegrationUnstable(PQSLError, RuntimeError):
    """The integrated state left the physical set; use a smaller step."""


class RequiresFullRank(PQSLError, ValueError):
    """The quantity is only defined for strictly positive states."""


class AmbiguousClustering(PQSLError, ValueError):
    """Bohr frequencies cannot be grouped unambiguously at the given tolerance."""


class UnphysicalBath(PQSLError, ValueError):
    """A bath rate matrix has a negative eigenvalue."""


class NearDegenerate(PQSLError, ValueError):
    """A spectral gap is too small for first-order perturbation theory."""


class DegeneracyBroken(PQSLError, ValueError):
    """The perturbation splits a degenerate Bohr frequency cluster.

    ``pairs`` lists the offending ``(omega, delta_omega_a, delta_omega_b)``
    tuples so callers can report which transitions separated.
    """

    def __init__(self, message, pairs=()):
        super().__init__(message)
        self.pairs = list(pairs)


class NotStationary(PQSLError, ValueError):
    """A state expected to be a fixed point of a generator is not."""


class DegenerateWitness(PQSLError, ValueError):
    """The witness statistic is undefined at t = 0 or v = 0."""
