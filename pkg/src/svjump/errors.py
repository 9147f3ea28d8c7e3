"""Exception types shared across the package."""


class SvJumpError(Exception):
    """Base class for all svjump errors."""


class ParamError(SvJumpError):
    """A model parameter violates one of its invariants."""


class CurveError(SvJumpError):
    """A discount curve is not positive/decreasing or fails P(0,0)=1."""


class GridError(SvJumpError):
    """The space grid is inconsistent (e.g. too narrow for the jump grid)."""


class TolError(SvJumpError):
    """A requested quadrature tolerance is unreachable at the given step."""


class ShapeError(SvJumpError):
    """An array argument has the wrong length/shape."""


class SingularError(SvJumpError):
    """A tridiagonal pivot underflowed; the system is (numerically) singular."""


class ReductionError(SvJumpError):
    """The deterministic-rate reduction was requested with sigma_r != 0."""


class StyleError(SvJumpError):
    """Operation requires an American (or European) run and got the other."""


class ScopeError(SvJumpError):
    """Operation called outside its supported model regime."""


class DomainError(SvJumpError):
    """Complex argument outside the supported half-plane / regime."""


class ArbError(SvJumpError):
    """Option price violates static no-arbitrage bounds."""


class DegenerateError(SvJumpError):
    """Convergence-ratio denominator is numerically zero."""


class RegressionError(SvJumpError):
    """Least-squares regression has fewer samples than basis functions."""
