"""Exception hierarchy shared by all modules."""


class SelfAffineError(Exception):
    """Base class for every error raised by this package."""


class Indeterminate(SelfAffineError):
    """An eigenvalue modulus sits too close to 1 to decide expansiveness."""


class NonExpansive(SelfAffineError):
    pass


class NotSimpleDigitSet(SelfAffineError):
    pass


class BudgetExceeded(SelfAffineError):
    pass


class Unsupported(SelfAffineError):
    pass


class DimensionNot1(SelfAffineError):
    pass


class SizeMismatch(SelfAffineError):
    pass


class NotRealHadamard(SelfAffineError):
    pass


class NotHadamard(SelfAffineError):
    pass


class CollisionDetected(SelfAffineError):
    pass


class ObstructionFound(SelfAffineError):
    """Some sample point admits no frequency shift with non-vanishing transform."""

    def __init__(self, x, value):
        self.x = x
        self.value = value
        super().__init__(f"no admissible k found at x={x} (max |mu_hat| = {value:.3e})")


class StageTooShallow(SelfAffineError):
    pass


class NotOrthogonal(SelfAffineError):
    def __init__(self, pair, value):
        self.pair = pair
        self.value = value
        super().__init__(f"|mu_hat(l - l')| = {value:.3e} for pair {pair}")


class LevelTooDeep(SelfAffineError):
    pass


class ParseError(SelfAffineError):
    pass


class ShapeError(SelfAffineError):
    pass


class UnknownCommand(SelfAffineError):
    pass
