"""Exception hierarchy shared by all quadforge modules."""


class QuadForgeError(Exception):
    """Base class for every error raised by quadforge."""


class DuplicateNodes(QuadForgeError, ValueError):
    pass


# Raised by single-node operations when the new node already belongs to the rule.
DuplicateNode = DuplicateNodes


class DimensionMismatch(QuadForgeError, ValueError):
    pass


class ZeroPolynomial(QuadForgeError, ValueError):
    pass


class DuplicateAbscissae(QuadForgeError, ValueError):
    pass


class IndexOutOfRange(QuadForgeError, IndexError):
    pass


class InvalidSpec(QuadForgeError, ValueError):
    pass


class MomentUnavailable(QuadForgeError, LookupError):
    pass


class ParseError(QuadForgeError, ValueError):
    pass


class ChecksumMismatch(QuadForgeError, ValueError):
    pass


class EvaluationFailure(QuadForgeError, RuntimeError):
    pass


class SingleNode(QuadForgeError, ValueError):
    pass


class ZeroWeight(QuadForgeError, ValueError):
    pass


class AtInfinity(QuadForgeError, ValueError):
    pass


class ComplexRoots(QuadForgeError, ValueError):
    pass


class DegenerateWeight(QuadForgeError, ValueError):
    pass


class NotFound(QuadForgeError, LookupError):
    """No feasible extension exists up to ``m_max`` added nodes."""

    def __init__(self, m_max: int, message: str | None = None):
        self.m_max = m_max
        super().__init__(message or f"no feasible extension with at most {m_max} nodes")


class UnboundedDomain(QuadForgeError, ValueError):
    pass
