"""Smooth step, scaled windows and signed log-domain scalars.

The smooth step is ``theta(t) = 1 - G(tan(pi (t - 1/2)))`` with ``G`` the
Gaussian distribution function ``(1 + erf(x)) / 2``.  It equals 1 for
``t <= 0`` and 0 for ``t >= 1`` and all of its derivatives vanish at both
ends, which is what makes every glued construction in this package C^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

# Inside this distance from 0 or 1 the exact limits are returned.  The
# closed form evaluates tan() next to its pole there.
GUARD = 1e-9

SQRT_PI = math.sqrt(math.pi)
_PI32 = math.pi * SQRT_PI


def _as_array(t):
    return np.asarray(t, dtype=float)


def _interior(t: np.ndarray) -> np.ndarray:
    return (t > GUARD) & (t < 1.0 - GUARD)


def theta(t):
    """Canonical smooth step, vectorised over ``t``."""
    t = _as_array(t)
    v0 = theta_derivs(t)[0]
    return float(v0[0]) if t.ndim == 0 else v0


def theta_deriv(t, order: int):
    """Closed-form ``d^order theta / dt^order`` for order in {1, 2, 3}.

    With ``x = tan(pi (t - 1/2))``:

    * ``theta'   = -sqrt(pi) (1 + x^2) e^{-x^2}``
    * ``theta''  = 2 pi^{3/2} x^3 (1 + x^2) e^{-x^2}``
    * ``theta''' = 2 pi^{5/2} (1 + x^2) (3x^2 + 3x^4 - 2x^6) e^{-x^2}``

    Returns exactly 0 outside the guard band.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    t = _as_array(t)
    scalar = t.ndim == 0
    t1 = np.atleast_1d(t)
    out = np.zeros_like(t1)
    mask = _interior(t1)
    if np.any(mask):
        x = np.tan(math.pi * (t1[mask] - 0.5))
        x2 = x * x
        g = np.exp(-x2)
        if order == 1:
            vals = -SQRT_PI * (1.0 + x2) * g
        elif order == 2:
            vals = 2.0 * _PI32 * x2 * x * (1.0 + x2) * g
        else:
            vals = 2.0 * _PI32 * math.pi * (1.0 + x2) * (3.0 * x2 + 3.0 * x2 * x2 - 2.0 * x2 ** 3) * g
        out[mask] = vals
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class WindowFn:
    """``theta((t - t_start)/width)``, or ``1 - theta(...)`` when ascending."""

    t_start: float
    width: float
    descending: bool = True

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("window width must be positive")

    @property
    def t_end(self) -> float:
        return self.t_start + self.width


def window(w: WindowFn, t, order: int = 0):
    """Window value (order 0) or its t-derivatives up to order 3."""
    tau = (_as_array(t) - w.t_start) / w.width
    if order == 0:
        val = theta(tau)
        return val if w.descending else 1.0 - val
    val = theta_deriv(tau, order) / w.width ** order
    return val if w.descending else -val


def theta_derivs(tau, width: float = 1.0):
    """Value and first three derivatives of ``theta(tau)`` in one pass.

    Derivatives are taken with respect to ``t = tau * width``, i.e. scaled by
    ``width**-n``.  This is the hot path of every segment evaluator.
    """
    tau = np.atleast_1d(_as_array(tau))
    v0 = np.where(tau < 0.5, 1.0, 0.0)
    v1 = np.zeros_like(tau)
    v2 = np.zeros_like(tau)
    v3 = np.zeros_like(tau)
    mask = _interior(tau)
    if np.any(mask):
        x = np.tan(math.pi * (tau[mask] - 0.5))
        x2 = x * x
        g = np.exp(-x2)
        p = 1.0 + x2
        v0[mask] = 0.5 * erfc(x)
        v1[mask] = -SQRT_PI * p * g / width
        v2[mask] = 2.0 * _PI32 * x2 * x * p * g / width ** 2
        v3[mask] = 2.0 * _PI32 * math.pi * p * (3.0 * x2 + 3.0 * x2 * x2 - 2.0 * x2 ** 3) * g / width ** 3
    return v0, v1, v2, v3


# ---------------------------------------------------------------------------
# Signed log-domain scalars


@dataclass(frozen=True)
class LogScalar:
    """Real number stored as ``sign * exp(logmag)``.

    Zero is ``sign == 0`` with ``logmag == -inf``.  Amplitudes in this package
    routinely reach ``exp(+-1e9)``, far outside float range.
    """

    sign: int
    logmag: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or +1")
        if (self.sign == 0) != (self.logmag == -math.inf):
            raise ValueError("sign 0 must pair with logmag -inf")
        if math.isnan(self.logmag) or self.logmag == math.inf:
            raise ValueError("logmag must be finite or -inf")

    @classmethod
    def zero(cls) -> "LogScalar":
        return cls(0, -math.inf)

    @classmethod
    def one(cls) -> "LogScalar":
        return cls(1, 0.0)

    @classmethod
    def from_log(cls, logmag: float, sign: int = 1) -> "LogScalar":
        return cls(sign, float(logmag)) if sign else cls.zero()

    @classmethod
    def from_native(cls, v: float) -> "LogScalar":
        if v == 0:
            return cls.zero()
        return cls(1 if v > 0 else -1, math.log(abs(v)))

    def to_native(self) -> float:
        """Float value; overflows to +-inf and underflows to 0 silently."""
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.logmag)
        except OverflowError:
            return self.sign * math.inf

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def __neg__(self) -> "LogScalar":
        return LogScalar(-self.sign, self.logmag)

    def __mul__(self, other: "LogScalar") -> "LogScalar":
        return log_mul(self, other)

    def __add__(self, other: "LogScalar") -> "LogScalar":
        return log_add(self, other)

    def scale_log(self, dlog: float) -> "LogScalar":
        """Multiply by ``exp(dlog)``."""
        if self.sign == 0:
            return self
        return LogScalar(self.sign, self.logmag + dlog)

    def to_json(self) -> list:
        return [self.sign, None if self.sign == 0 else repr(self.logmag)]

    @classmethod
    def from_json(cls, obj) -> "LogScalar":
        sign, logmag = obj
        if sign == 0:
            return cls.zero()
        return cls(int(sign), float(logmag))


def log_mul(a: LogScalar, b: LogScalar) -> LogScalar:
    if a.sign == 0 or b.sign == 0:
        return LogScalar.zero()
    return LogScalar(a.sign * b.sign, a.logmag + b.logmag)


def log_add(a: LogScalar, b: LogScalar) -> LogScalar:
    """Signed sum via the max-shift formula."""
    if a.sign == 0:
        return b
    if b.sign == 0:
        return a
    hi, lo = (a, b) if a.logmag >= b.logmag else (b, a)
    diff = lo.logmag - hi.logmag
    if hi.sign == lo.sign:
        return LogScalar(hi.sign, hi.logmag + math.log1p(math.exp(diff)))
    if a.logmag == b.logmag:
        return LogScalar.zero()
    return LogScalar(hi.sign, hi.logmag + math.log(-math.expm1(diff)))


def logaddexp_signed(la, sa, lb, sb):
    """Array version of :func:`log_add` on (logmag, sign) pairs."""
    la = np.asarray(la, dtype=float)
    lb = np.asarray(lb, dtype=float)
    sa = np.asarray(sa, dtype=float)
    sb = np.asarray(sb, dtype=float)
    hi = np.maximum(la, lb)
    safe_hi = np.where(np.isfinite(hi), hi, 0.0)
    total = sa * np.exp(la - safe_hi) + sb * np.exp(lb - safe_hi)
    with np.errstate(divide="ignore"):
        lm = safe_hi + np.log(np.abs(total))
    lm = np.where(np.isfinite(hi), lm, -np.inf)
    return lm, np.sign(total)
