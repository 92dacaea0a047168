"""Exception types raised across the package."""


class MdpHitError(Exception):
    """Base class for all package errors."""


class ParseError(MdpHitError):
    """A document could not be read into a raw MDP description."""


class ValidationError(MdpHitError):
    """The MDP description violates a model invariant."""

    location = None


class NonStochasticRow(ValidationError):
    def __init__(self, location, deficit):
        self.location = location
        self.deficit = deficit
        super().__init__(f"{location}: row sums to {1.0 - deficit!r} (deficit {deficit!r})")


class NegativeEntry(ValidationError):
    def __init__(self, location, value):
        self.location = location
        self.value = value
        super().__init__(f"{location}: negative probability {value!r}")


class GammaOutOfRange(ValidationError):
    def __init__(self, gamma):
        self.location = "gamma"
        self.gamma = gamma
        super().__init__(f"gamma must lie in [0, 1), got {gamma!r}")


class EmptyStateOrActionSet(ValidationError):
    def __init__(self, which):
        self.location = which
        super().__init__(f"{which} must be non-empty")


class SolveFailed(MdpHitError):
    """A linear solve that should be well posed failed (internal error)."""


class NoConvergence(MdpHitError):
    """An iterative method hit its iteration cap before reaching tolerance."""


class EmptySupport(MdpHitError):
    pass


class DenominatorNotPositive(MdpHitError):
    def __init__(self, row, value):
        self.row = row
        self.value = value
        super().__init__(f"ratio denominator for row {row} is {value!r} (must be > 0)")


class AllCensored(MdpHitError):
    """Every episode reached the step cap without hitting the target."""


class InfeasibleCoupling(MdpHitError):
    def __init__(self, gap, mass_x=None, mass_y=None):
        self.gap = gap
        self.mass_x = mass_x
        self.mass_y = mass_y
        if mass_x is not None and mass_x != mass_y:
            msg = f"no coupling exists: total masses differ ({mass_x!r} vs {mass_y!r})"
        else:
            msg = f"coupling violates marginals by {gap!r}"
        super().__init__(msg)


class TooLarge(MdpHitError):
    pass


class SizeMismatch(MdpHitError):
    pass
