"""Exception hierarchy shared by the chansynth modules."""


class ChansynthError(Exception):
    pass


class NonStochastic(ChansynthError, ValueError):
    pass


class NegativeEntry(ChansynthError, ValueError):
    pass


class EmptyAlphabet(ChansynthError, ValueError):
    pass


class BinBoundaryAmbiguity(ChansynthError, ArithmeticError):
    """A value sits numerically on a quantizer edge; pick a different step."""


class ZeroProbabilityConditioning(ChansynthError, ValueError):
    pass


class CeilingViolation(ChansynthError, ArithmeticError):
    """A likelihood ratio exceeded its declared ceiling (a derivation bug)."""


class IterationLimit(ChansynthError, RuntimeError):
    pass


class DomainError(ChansynthError, ValueError):
    pass


class MalformedBitstream(ChansynthError, ValueError):
    pass


class UnexpectedEndOfStream(MalformedBitstream, EOFError):
    pass


class EmptySupport(ChansynthError, ValueError):
    pass


class CellCountTooLarge(ChansynthError, ValueError):
    pass
