"""Transformation segments: exact ``(u, A)`` pairs on a time slab.

Every segment is evaluated in its own local time ``tau = t - t_a``.  The
solution is a sum of at most two cosine modes, one per spatial axis, and
each mode reports its time profile as ``sign * exp(ell) * (p0, p1, p2)``
where ``ell`` carries the (possibly enormous) log-magnitude and
``p0, p1, p2`` are native floats for the value and first two derivatives.

Evaluation returns a :class:`Bundle` whose ``u``-quantities are divided by
``exp(log_scale)``.  Residuals are linear in ``u``, so this common scale
never has to be undone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .ode import DenseSolution, OdeToleranceError, integrate_linear
from .planarlemma import ParameterDomainError, entries
from .scalarcore import SQRT_PI, LogScalar, theta_derivs

__all__ = [
    "Bundle",
    "DegenerateMatchError",
    "IncompatibleFieldError",
    "ModeEval",
    "OdeToleranceError",
    "OutOfIntervalError",
    "ParameterDomainError",
    "RegularityClass",
    "Segment",
]


class IncompatibleFieldError(ValueError):
    """A field does not solve the constant-coefficient equation it is paired with."""


class DegenerateMatchError(ArithmeticError):
    """The oscillatory match in the symmetrisation head has zero amplitude."""


class OutOfIntervalError(ValueError):
    """Evaluation requested outside the segment's time interval."""


@dataclass(frozen=True)
class RegularityClass:
    """Ellipticity bound ``Lambda`` and bound on first derivatives of the coefficient."""

    Lambda: float
    C1bound: float

    def __post_init__(self):
        if not self.Lambda >= 1:
            raise ValueError("Lambda must be >= 1")
        if not self.C1bound >= 0:
            raise ValueError("C1bound must be >= 0")


@dataclass
class ModeEval:
    axis: int  # 0 -> cos(k x), 1 -> cos(k y)
    k: float
    sign: int
    ell: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    p2: np.ndarray


U_FIELDS = ("u", "ut", "utt", "ux", "uy", "uxx", "uyy", "uxy")


@dataclass
class Bundle:
    """Field derivatives (scaled by ``exp(-log_scale)``) and coefficient data.

    ``A``, ``Ax``, ``Ay``, ``At`` have shape ``(3, n)`` holding the entries
    ``(a11, a12, a22)`` and their x, y and t partials.
    """

    log_scale: np.ndarray
    sup: np.ndarray
    kmax: float
    u: np.ndarray
    ut: np.ndarray
    utt: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    uxx: np.ndarray
    uyy: np.ndarray
    uxy: np.ndarray
    A: np.ndarray
    Ax: np.ndarray
    Ay: np.ndarray
    At: np.ndarray
    mu: float = 0.0

    def swapped(self) -> "Bundle":
        """Bundle of ``u(y, x)`` with the coefficient conjugated by the axis swap."""
        p = [2, 1, 0]
        return replace(
            self,
            ux=self.uy, uy=self.ux, uxx=self.uyy, uyy=self.uxx,
            A=self.A[p], Ax=self.Ay[p], Ay=self.Ax[p], At=self.At[p],
        )

    def time_reversed(self) -> "Bundle":
        """Bundle of ``u(x, y, -t)``."""
        return replace(self, ut=-self.ut, At=-self.At)

    def rescaled(self, new_log) -> "Bundle":
        f = np.exp(self.log_scale - new_log)
        kw = {name: getattr(self, name) * f for name in U_FIELDS}
        return replace(self, log_scale=np.broadcast_to(new_log, self.log_scale.shape).copy(), sup=self.sup * f, **kw)

    def residual(self) -> np.ndarray:
        """``u_tt + div(A grad u) + mu u`` in the bundle's scaled units."""
        A, Ax, Ay = self.A, self.Ax, self.Ay
        return (
            self.utt
            + Ax[0] * self.ux + A[0] * self.uxx
            + Ax[1] * self.uy + 2.0 * A[1] * self.uxy + Ay[1] * self.ux
            + Ay[2] * self.uy + A[2] * self.uyy
            + self.mu * self.u
        )

    def relative_residual(self) -> np.ndarray:
        return np.abs(self.residual()) / (self.sup * (1.0 + self.kmax ** 2))

    def eigenvalues(self) -> tuple[np.ndarray, np.ndarray]:
        a, b, c = self.A
        mean = 0.5 * (a + c)
        rad = np.hypot(0.5 * (a - c), b)
        return mean - rad, mean + rad

    def flux(self) -> tuple[np.ndarray, np.ndarray]:
        a, b, c = self.A
        return a * self.ux + b * self.uy, b * self.ux + c * self.uy


def _arrays(*vals):
    return np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=float)) for v in vals))


def _const(v, like):
    return np.full(like.shape, float(v))


def _diag_coeff(d1, d2, like, d2_t=None):
    z = np.zeros_like(like)
    A = np.stack([d1 + z, z, d2 + z])
    At = np.stack([z, z, (d2_t if d2_t is not None else 0.0) + z])
    return A, np.zeros_like(A), np.zeros_like(A), At


class Segment:
    """Base class.  Subclasses set ``kind``, ``duration``, ``t_a``, ``declared``."""

    kind: str = "Segment"
    duration: float
    t_a: float
    declared: RegularityClass

    @property
    def t_b(self) -> float:
        return self.t_a + self.duration

    @property
    def wavenumbers(self) -> tuple[float, ...]:
        raise NotImplementedError

    @property
    def kmax(self) -> float:
        return float(max(self.wavenumbers))

    def modes(self, tau: np.ndarray) -> list[ModeEval]:
        raise NotImplementedError

    def coeff(self, x, y, tau):
        raise NotImplementedError

    def scaled(self, dlog: float) -> "Segment":
        """Copy with every amplitude multiplied by ``exp(dlog)``."""
        return replace(self, amp=self.amp.scale_log(dlog))

    def leaves(self) -> list[tuple[float, "Segment"]]:
        return [(0.0, self)]

    def params(self) -> dict:
        raise NotImplementedError

    def _check(self, tau):
        tol = 1e-12 * max(1.0, self.duration)
        if np.any(tau < -tol) or np.any(tau > self.duration + tol):
            raise OutOfIntervalError(f"{self.kind}: local time outside [0, {self.duration}]")

    def evaluate(self, x, y, tau, ref_log=None, side: str = "right") -> Bundle:
        x, y, tau = _arrays(x, y, tau)
        self._check(tau)
        ms = self.modes(tau)
        zero = np.zeros_like(tau)
        ells = [m.ell + zero for m in ms]
        if ref_log is None:
            L = np.max(np.stack(ells), axis=0)
        else:
            L = np.asarray(ref_log, dtype=float) + zero
        out = {name: zero.copy() for name in U_FIELDS}
        sup = zero.copy()
        for m, ell in zip(ms, ells):
            w = m.sign * np.exp(ell - L)
            coord = x if m.axis == 0 else y
            c = np.cos(m.k * coord)
            s = np.sin(m.k * coord)
            wp0 = w * m.p0
            out["u"] += wp0 * c
            out["ut"] += w * m.p1 * c
            out["utt"] += w * m.p2 * c
            d1, d2 = ("ux", "uxx") if m.axis == 0 else ("uy", "uyy")
            out[d1] += -m.k * s * wp0
            out[d2] += -m.k * m.k * c * wp0
            sup += np.abs(wp0)
        A, Ax, Ay, At = self.coeff(x, y, tau)
        return Bundle(L, sup, self.kmax, A=A, Ax=Ax, Ay=Ay, At=At, mu=getattr(self, "mu", 0.0), **out)

    def log_sup(self, tau) -> np.ndarray:
        """``log sup_{T^2} |u(., ., tau)|``, which is ``log(|f| + |g|)``."""
        (tau,) = _arrays(tau)
        self._check(tau)
        terms = []
        for m in self.modes(tau):
            with np.errstate(divide="ignore"):
                terms.append(m.ell + np.log(np.abs(m.p0)) + np.zeros_like(tau))
        return np.logaddexp.reduce(np.stack(terms), axis=0)

    def mode_amplitudes(self, tau: float) -> dict[int, LogScalar]:
        """Signed amplitude of each axis mode at a single local time."""
        out = {}
        for m in self.modes(np.atleast_1d(float(tau))):
            p0 = float(np.broadcast_to(m.p0, (1,))[0])
            ell = float(np.broadcast_to(m.ell, (1,))[0])
            if p0 == 0:
                out[m.axis] = LogScalar.zero()
            else:
                out[m.axis] = LogScalar(m.sign * (1 if p0 > 0 else -1), ell + math.log(abs(p0)))
        return out


def segment_eval(seg: Segment, x, y, t, what: Sequence[str] | None = None) -> dict:
    """Evaluate selected quantities at global time ``t``.

    ``u``-quantities are returned scaled together with ``log_scale``.
    """
    b = seg.evaluate(x, y, np.asarray(t, dtype=float) - seg.t_a)
    names = what or (U_FIELDS + ("A", "Ax", "Ay", "At"))
    out = {"log_scale": b.log_scale}
    for n in names:
        out[n] = getattr(b, n)
    return out


# ---------------------------------------------------------------------------
# Constant-coefficient segments


@dataclass
class ModeSpec:
    axis: int
    k: float
    rate: float
    amp: LogScalar


@dataclass
class WaitSegment(Segment):
    """Pure exponential modes under a constant diagonal coefficient."""

    mode_specs: list
    diag: tuple
    duration: float
    t_a: float = 0.0
    kind: str = "Wait"

    def __post_init__(self):
        if not self.duration > 0:
            raise ParameterDomainError("duration must be positive")
        for m in self.mode_specs:
            target = m.k * m.k * self.diag[m.axis]
            if not math.isclose(m.rate * m.rate, target, rel_tol=1e-12):
                raise IncompatibleFieldError(
                    f"rate {m.rate} does not match k^2 A = {target} on axis {m.axis}"
                )
        d = [float(v) for v in self.diag]
        self.declared = RegularityClass(max(max(d), 1 / min(d), 1.0), 0.0)

    @property
    def wavenumbers(self):
        return tuple(m.k for m in self.mode_specs)

    def modes(self, tau):
        return [
            ModeEval(m.axis, m.k, m.amp.sign, m.amp.logmag - m.rate * tau, 1.0, -m.rate, m.rate * m.rate)
            for m in self.mode_specs
        ]

    def coeff(self, x, y, tau):
        return _diag_coeff(self.diag[0], self.diag[1], tau)

    def scaled(self, dlog):
        return replace(self, mode_specs=[replace(m, amp=m.amp.scale_log(dlog)) for m in self.mode_specs])

    def params(self):
        return {
            "modes": [[m.axis, m.k, m.rate, m.amp.to_json()] for m in self.mode_specs],
            "diag": list(self.diag),
            "duration": self.duration,
            "t_a": self.t_a,
        }


def wait_segment(modes: Sequence[ModeSpec], A: tuple, t_a: float, duration: float) -> WaitSegment:
    return WaitSegment(list(modes), tuple(A), duration, t_a)


def _check_unit_range(*vals):
    for v in vals:
        if not (0.1 < v < 10):
            raise ParameterDomainError(f"diagonal coefficient {v} outside (1/10, 10)")


@dataclass
class ChangeCoeffSegment(Segment):
    """``A = diag(a, c(tau))`` with ``c`` moving from ``a`` to ``b``; ``u = cos(kx) e^{-k sqrt(a) tau}``."""

    a: float
    b: float
    k: float
    duration: float
    t_a: float = 0.0
    amp: LogScalar = field(default_factory=LogScalar.one)
    kind: str = "ChangeCoeff"

    def __post_init__(self):
        _check_unit_range(self.a, self.b)
        if not self.duration > 0:
            raise ParameterDomainError("duration must be positive")
        self.declared = RegularityClass(10.0, 10 * SQRT_PI / self.duration)

    @property
    def wavenumbers(self):
        return (self.k,)

    def modes(self, tau):
        r = self.k * math.sqrt(self.a)
        return [ModeEval(0, self.k, self.amp.sign, self.amp.logmag - r * tau, 1.0, -r, r * r)]

    def c_profile(self, tau):
        v0, v1, _, _ = theta_derivs(tau / self.duration, self.duration)
        return (self.a - self.b) * v0 + self.b, (self.a - self.b) * v1

    def coeff(self, x, y, tau):
        c, cdot = self.c_profile(tau)
        return _diag_coeff(self.a, c, tau, cdot)

    def params(self):
        return {"a": self.a, "b": self.b, "k": self.k, "duration": self.duration, "t_a": self.t_a,
                "amp": self.amp.to_json()}


def change_coeff_segment(a, b, k, t_a, C, amp: LogScalar | None = None) -> ChangeCoeffSegment:
    return ChangeCoeffSegment(a, b, k, C, t_a, amp or LogScalar.one())


# ---------------------------------------------------------------------------
# Mode transfer through the planar matrices


@dataclass
class MixPhase(Segment):
    """Add or remove a second mode with the planar-lemma matrix.

    ``add``:    u = amp [e^{-k sqrt(a) tau} cos kx + eps (1-alpha) e^{-k' sqrt(b) tau} cos k'y]
    ``remove``: u = amp [eps alpha e^{-k sqrt(a) tau} cos kx + e^{-k' sqrt(b) tau} cos k'y]

    with ``alpha = theta(tau / width)``.  In both cases
    ``A = diag(a, b) + beta E M(s)``, ``M`` the planar matrix of the variant.
    """

    variant: str
    k: float
    kp: float
    a: float
    b: float
    eps: float
    width: float
    t_a: float = 0.0
    amp: LogScalar = field(default_factory=LogScalar.one)
    kind: str = "Mix"
    declared: RegularityClass = field(default_factory=lambda: RegularityClass(20.0, 10.0))

    def __post_init__(self):
        if self.variant not in ("add", "remove"):
            raise ValueError("variant must be 'add' or 'remove'")
        if not (self.width > 0 and self.eps > 0):
            raise ParameterDomainError("width and eps must be positive")
        self.duration = self.width
        self.ra = self.k * math.sqrt(self.a)
        self.rb = self.kp * math.sqrt(self.b)
        # exponent of E = e^{rho tau}
        self.rho = self.ra - self.rb if self.variant == "add" else self.rb - self.ra
        self.log_eps = math.log(self.eps)

    @property
    def wavenumbers(self):
        return (self.k, self.kp)

    def _alpha(self, tau):
        return theta_derivs(tau / self.width, self.width)

    def modes(self, tau):
        al, a1, a2, _ = self._alpha(tau)
        sg, lm = self.amp.sign, self.amp.logmag
        ra, rb = self.ra, self.rb
        if self.variant == "add":
            q = 1.0 - al
            return [
                ModeEval(0, self.k, sg, lm - ra * tau, 1.0, -ra, ra * ra),
                ModeEval(1, self.kp, sg, lm + self.log_eps - rb * tau,
                         q, -a1 - q * rb, -a2 + 2.0 * a1 * rb + q * rb * rb),
            ]
        return [
            ModeEval(0, self.k, sg, lm + self.log_eps - ra * tau,
                     al, a1 - al * ra, a2 - 2.0 * a1 * ra + al * ra * ra),
            ModeEval(1, self.kp, sg, lm - rb * tau, 1.0, -rb, rb * rb),
        ]

    def schedule(self, tau):
        """``beta, beta_dot, E, s, s_dot`` at local times ``tau``."""
        al, a1, a2, a3 = self._alpha(tau)
        eps, E = self.eps, np.exp(self.rho * tau)
        if self.variant == "add":
            beta = eps * (a2 - 2.0 * a1 * self.rb)
            beta_dot = eps * (a3 - 2.0 * a2 * self.rb)
            s = eps * (1.0 - al) * E
            s_dot = eps * (-a1 + (1.0 - al) * self.rho) * E
        else:
            beta = eps * (2.0 * self.ra * a1 - a2)
            beta_dot = eps * (2.0 * self.ra * a2 - a3)
            s = eps * al * E
            s_dot = eps * (a1 + al * self.rho) * E
        return beta, beta_dot, E, s, s_dot

    def coeff(self, x, y, tau):
        beta, beta_dot, E, s, s_dot = self.schedule(tau)
        pe = entries(self.variant, self.k, self.kp, s, x, y)
        g = beta * E
        gt = (beta_dot + beta * self.rho) * E
        z = np.zeros_like(tau)
        A = np.stack([self.a + g * pe.m.a, g * pe.m.b, self.b + g * pe.m.c])
        Ax = np.stack([g * pe.dx.a, g * pe.dx.b, g * pe.dx.c]) + z
        Ay = np.stack([g * pe.dy.a, g * pe.dy.b, g * pe.dy.c]) + z
        At = np.stack([
            gt * pe.m.a + g * pe.ds.a * s_dot,
            gt * pe.m.b + g * pe.ds.b * s_dot,
            gt * pe.m.c + g * pe.ds.c * s_dot,
        ])
        return A, Ax, Ay, At

    def params(self):
        return {"variant": self.variant, "k": self.k, "kp": self.kp, "a": self.a, "b": self.b,
                "eps": self.eps, "width": self.width, "t_a": self.t_a, "amp": self.amp.to_json(),
                "kind": self.kind}


def _check_mix_params(k, kp, a, b, eps):
    _check_unit_range(a, b)
    if not (1 <= k <= kp <= 2 * k):
        raise ParameterDomainError(f"need 1 <= k <= k' <= 2k, got k={k}, k'={kp}")
    if not 0 < eps < 1:
        raise ParameterDomainError("eps must lie in (0, 1)")
    lo, hi = eps ** -0.25, eps ** (-1.0 / 3.0)
    slack = 1 + 1e-12
    for kk in (k, kp):
        if not (lo / slack <= kk <= hi * slack):
            raise ParameterDomainError(f"wavenumber {kk} outside [eps^-1/4, eps^-1/3] = [{lo}, {hi}]")


def perturb_add_segment(k, kp, a, b, eps, t_a=0.0, amp: LogScalar | None = None) -> MixPhase:
    """Turn ``u1`` into ``u1 + eps u2`` over a window of width ``eps^(1/3)``."""
    _check_mix_params(k, kp, a, b, eps)
    return MixPhase("add", k, kp, a, b, eps, eps ** (1.0 / 3.0), t_a, amp or LogScalar.one(), "PerturbAdd")


def perturb_remove_segment(k, kp, a, b, eps, t_a=0.0, amp: LogScalar | None = None) -> MixPhase:
    """Turn ``eps u1 + u2`` into ``u2``; ``amp`` is the amplitude of ``u2``."""
    _check_mix_params(k, kp, a, b, eps)
    return MixPhase("remove", k, kp, a, b, eps, eps ** (1.0 / 3.0), t_a, amp or LogScalar.one(),
                    "PerturbRemove")


@dataclass
class CompositeSegment(Segment):
    """Contiguous phases presented as one segment."""

    parts: list
    kind: str = "Composite"
    declared: RegularityClass = field(default_factory=lambda: RegularityClass(2.0, 100.0))

    def __post_init__(self):
        self.t_a = self.parts[0].t_a
        self.offsets = np.cumsum([0.0] + [p.duration for p in self.parts[:-1]])
        self.duration = float(sum(p.duration for p in self.parts))

    @property
    def wavenumbers(self):
        return tuple(sorted({k for p in self.parts for k in p.wavenumbers}))

    def leaves(self):
        return [(float(o) + oo, leaf) for o, p in zip(self.offsets, self.parts) for oo, leaf in p.leaves()]

    def _index(self, tau, side):
        idx = np.searchsorted(self.offsets, tau, side=side) - 1
        return np.clip(idx, 0, len(self.parts) - 1)

    def evaluate(self, x, y, tau, ref_log=None, side="right"):
        x, y, tau = _arrays(x, y, tau)
        self._check(tau)
        idx = self._index(tau, side)
        ref = None if ref_log is None else np.asarray(ref_log, dtype=float) + np.zeros_like(tau)
        pieces = []
        for i in np.unique(idx):
            m = idx == i
            loc = np.clip(tau[m] - self.offsets[i], 0.0, self.parts[i].duration)
            b = self.parts[i].evaluate(x[m], y[m], loc, None if ref is None else ref[m])
            pieces.append((m, b))
        return _merge(pieces, tau.shape, self.kmax)

    def modes(self, tau):
        raise NotImplementedError("composite segments dispatch per phase")

    def log_sup(self, tau):
        (tau,) = _arrays(tau)
        idx = self._index(tau, "right")
        out = np.empty_like(tau)
        for i in np.unique(idx):
            m = idx == i
            out[m] = self.parts[i].log_sup(np.clip(tau[m] - self.offsets[i], 0.0, self.parts[i].duration))
        return out

    def mode_amplitudes(self, tau):
        i = int(self._index(np.atleast_1d(float(tau)), "right")[0])
        return self.parts[i].mode_amplitudes(min(max(tau - self.offsets[i], 0.0), self.parts[i].duration))

    def scaled(self, dlog):
        return replace(self, parts=[p.scaled(dlog) for p in self.parts])

    def params(self):
        return {"parts": [[p.kind, p.params()] for p in self.parts]}


def _merge(pieces, shape, kmax):
    """Scatter per-piece bundles (of any bundle dataclass) back into one."""
    from dataclasses import fields

    first = pieces[0][1]
    out = {}
    for f in fields(first):
        v0 = getattr(first, f.name)
        if isinstance(v0, np.ndarray):
            arr = np.empty(v0.shape[:-1] + shape, dtype=v0.dtype)
            for m, b in pieces:
                arr[..., m] = getattr(b, f.name)
            out[f.name] = arr
        else:
            out[f.name] = v0
    out["kmax"] = kmax
    return type(first)(**out)


def pml_segment(k, kp, w, amp: LogScalar | None = None, t_a: float = 0.0, spread: float = 1.0) -> CompositeSegment:
    """Two-phase transfer ``cos(kx) e^{-kt}`` -> ``cos(k'y) e^{-k't}`` over ``[0, 2w]``.

    ``spread`` is the constant in ``k' - k <= spread / w <= spread * k``.
    """
    if not (1 <= k < kp <= 2 * k):
        raise ParameterDomainError(f"need 1 <= k < k' <= 2k, got k={k}, k'={kp}")
    if not w > 0:
        raise ParameterDomainError("width must be positive")
    if kp - k > spread / w * (1 + 1e-12) or 1.0 / w > spread * k * (1 + 1e-12):
        raise ParameterDomainError(
            f"need 0 < k'-k <= {spread}/w <= {spread}k; got k'-k={kp - k}, 1/w={1 / w}, k={k}"
        )
    amp = amp or LogScalar.one()
    first = MixPhase("add", k, kp, 1.0, 1.0, 1.0, w, t_a, amp, "PMLAdd")
    # at local w both modes carry their own exponential; rescale to the remove form
    second = MixPhase("remove", k, kp, 1.0, 1.0, math.exp((kp - k) * w), w, t_a + w,
                      amp.scale_log(-kp * w), "PMLRemove")
    seg = CompositeSegment([first, second], "PML")
    bound = 8.0 * math.exp(4 * (kp - k) * w)
    seg.declared = RegularityClass(2.0, bound * 10.0 / w)
    return seg


# ---------------------------------------------------------------------------
# Single-mode segments with a time-dependent diagonal entry


@dataclass
class RemoveConstantSegment(Segment):
    """``u = amp cos(k'y) e^{h}`` with ``h = -k' sqrt(b) tau + F alpha(tau)``.

    The entry value is ``amp e^F``; the factor ``e^F`` is removed smoothly.
    ``A = diag(a, b~)`` with ``b~ = h''/k'^2 + (h'/k')^2``.
    """

    kp: float
    a: float
    b: float
    factor_log: float
    t_a: float = 0.0
    amp: LogScalar = field(default_factory=LogScalar.one)
    kind: str = "RemoveConstant"
    declared: RegularityClass = field(default_factory=lambda: RegularityClass(20.0, 1.0))

    def __post_init__(self):
        _check_unit_range(self.a, self.b)
        if not self.factor_log < 0:
            raise ParameterDomainError("factor_log must be negative")
        self.width = math.sqrt(-self.factor_log) / self.kp ** (1.0 / 3.0)
        self.duration = self.width
        self.rb = self.kp * math.sqrt(self.b)

    @property
    def wavenumbers(self):
        return (self.kp,)

    def h_derivs(self, tau):
        al, a1, a2, a3 = theta_derivs(tau / self.width, self.width)
        F = self.factor_log
        return -self.rb * tau + F * al, -self.rb + F * a1, F * a2, F * a3

    def btilde(self, tau):
        _, h1, h2, h3 = self.h_derivs(tau)
        k2 = self.kp * self.kp
        return (h2 + h1 * h1) / k2, (h3 + 2.0 * h1 * h2) / k2

    def modes(self, tau):
        h0, h1, h2, _ = self.h_derivs(tau)
        return [ModeEval(1, self.kp, self.amp.sign, self.amp.logmag + h0, 1.0, h1, h2 + h1 * h1)]

    def coeff(self, x, y, tau):
        bt, bt1 = self.btilde(tau)
        return _diag_coeff(self.a, bt, tau, bt1)

    def params(self):
        return {"kp": self.kp, "a": self.a, "b": self.b, "factor_log": self.factor_log,
                "t_a": self.t_a, "amp": self.amp.to_json()}


def remove_constant_segment(kp, a, b, factor_log, t_a=0.0, amp: LogScalar | None = None,
                            strict: bool = True) -> RemoveConstantSegment:
    if strict and -factor_log / 4.0 < 12 * math.log(2) - 1e-12:
        raise ParameterDomainError("strict mode needs k = e^{-F/4} >= 2^12")
    return RemoveConstantSegment(kp, a, b, factor_log, t_a, amp or LogScalar.one())


@dataclass
class AccelerateSegment(Segment):
    """``u = amp cos(ky) e^{-g}``, ``g = (sqrt(b') + (sqrt(b) - sqrt(b')) alpha) k tau``.

    ``A = diag(a, b~)`` with ``b~ = -g''/k^2 + (g'/k)^2``.
    """

    k: float
    a: float
    b: float
    bp: float
    t_a: float = 0.0
    amp: LogScalar = field(default_factory=LogScalar.one)
    width: float = 400.0
    kind: str = "Accelerate"
    declared: RegularityClass = field(default_factory=lambda: RegularityClass(80.0, 10.0))

    def __post_init__(self):
        _check_unit_range(self.a, self.b, self.bp)
        if not self.b <= self.bp:
            raise ParameterDomainError("need b <= b'")
        self.duration = self.width
        self.sb, self.sbp = math.sqrt(self.b), math.sqrt(self.bp)

    @property
    def wavenumbers(self):
        return (self.k,)

    def g_derivs(self, tau):
        al, a1, a2, a3 = theta_derivs(tau / self.width, self.width)
        d, k = self.sb - self.sbp, self.k
        g0 = (self.sbp + d * al) * k * tau
        g1 = d * a1 * k * tau + (self.sbp + d * al) * k
        g2 = d * (a2 * k * tau + 2.0 * a1 * k)
        g3 = d * (a3 * k * tau + 3.0 * a2 * k)
        return g0, g1, g2, g3

    def btilde(self, tau):
        _, g1, g2, g3 = self.g_derivs(tau)
        k2 = self.k * self.k
        return (-g2 + g1 * g1) / k2, (-g3 + 2.0 * g1 * g2) / k2

    def modes(self, tau):
        g0, g1, g2, _ = self.g_derivs(tau)
        return [ModeEval(1, self.k, self.amp.sign, self.amp.logmag - g0, 1.0, -g1, -g2 + g1 * g1)]

    def coeff(self, x, y, tau):
        bt, bt1 = self.btilde(tau)
        return _diag_coeff(self.a, bt, tau, bt1)

    def params(self):
        return {"k": self.k, "a": self.a, "b": self.b, "bp": self.bp, "t_a": self.t_a,
                "amp": self.amp.to_json(), "width": self.width}


def accelerate_segment(k, a, b, bp, t_a=0.0, amp: LogScalar | None = None) -> AccelerateSegment:
    return AccelerateSegment(k, a, b, bp, t_a, amp or LogScalar.one())


# ---------------------------------------------------------------------------
# Symmetrisation head


def _theta_scalar(t: float) -> float:
    if t <= 1e-9:
        return 1.0
    if t >= 1 - 1e-9:
        return 0.0
    return 0.5 * math.erfc(math.tan(math.pi * (t - 0.5)))


@dataclass
class SymmetrizeHead(Segment):
    """Head of the full-cylinder eigenfunction on ``[0, t0]``.

    ``u = f(s) cos(kx)`` with ``f(s) = g(s + sigma)`` where ``g`` solves
    ``g'' = (k^2 a(t) - mu) g``, ``g(t2) = 1``, ``g'(t2) = -k``.  Before
    ``t1`` the coefficient is ``mu/(2k^2)`` and ``g`` is a pure oscillation of
    frequency ``sqrt(mu/2)``; the shift ``sigma`` puts its trough at ``s = 0``
    so ``f'(0) = 0``.
    """

    mu: float
    k: float
    t1: float = 0.01
    rtol: float = 1e-13
    atol: float = 1e-15
    kind: str = "SymmetrizeHead"

    def __post_init__(self):
        mu, k = self.mu, self.k
        if not mu > 0:
            raise ParameterDomainError("mu must be positive")
        if not k * k >= 100 * mu:
            raise ParameterDomainError("need k^2 >= 100 mu")
        if not self.t1 > 0:
            raise ParameterDomainError("t1 must be positive")
        self.C = SQRT_PI * (1 + mu / (2 * k * k)) / 10.0
        self.t2 = self.t1 + self.C
        self.omega = math.sqrt(mu / 2.0)
        self.a_lo = mu / (2 * k * k)
        self.a_hi = 1 + mu / (k * k)
        k2 = k * k

        def rhs(t, y):
            return (y[1], (k2 * self.a_of(t) - mu) * y[0])

        self.sol: DenseSolution = integrate_linear(
            rhs, self.t2, self.t1, [1.0, -k], h0=0.1 / k, rtol=self.rtol, atol=self.atol
        )
        log1, y1, _ = self.sol.eval(self.t1)
        w, t1 = self.omega, self.t1
        g1, gd1 = y1
        al = g1 * math.cos(w * t1) - gd1 / w * math.sin(w * t1)
        be = g1 * math.sin(w * t1) + gd1 / w * math.cos(w * t1)
        R = math.hypot(al, be)
        if R == 0 or not math.isfinite(R):
            raise DegenerateMatchError("oscillatory amplitude vanished")
        self.log_R = log1 + math.log(R)
        self.phi = math.atan2(be, al)
        self.sigma = (-math.pi + self.phi) / w
        self.t0 = self.t2 - self.sigma
        self.duration = self.t0
        self.t_a = 0.0
        self.a22 = 1 + mu / (4 * k2)
        self.declared = RegularityClass(max(5 * k2 / mu, 1.0), 10.0)

    @property
    def wavenumbers(self):
        return (self.k,)

    def a_of(self, t: float) -> float:
        return self.a_hi - (self.a_lo + 1.0) * _theta_scalar((t - self.t1) / self.C)

    def a_derivs(self, t):
        v0, v1, _, _ = theta_derivs((t - self.t1) / self.C, self.C)
        return self.a_hi - (self.a_lo + 1.0) * v0, -(self.a_lo + 1.0) * v1

    def modes(self, tau):
        t = np.asarray(tau) + self.sigma
        ell = np.empty_like(t)
        p0 = np.empty_like(t)
        p1 = np.empty_like(t)
        p2 = np.empty_like(t)
        osc = t <= self.t1
        w = self.omega
        ph = w * t[osc] - self.phi
        ell[osc] = self.log_R
        p0[osc] = np.cos(ph)
        p1[osc] = -w * np.sin(ph)
        p2[osc] = -w * w * np.cos(ph)
        for i in np.flatnonzero(~osc):
            ti = min(float(t[i]), self.t2)
            lo, yv, dy = self.sol.eval(ti)
            ell[i], p0[i], p1[i], p2[i] = lo, yv[0], yv[1], dy[1]
        return [ModeEval(0, self.k, 1, ell, p0, p1, p2)]

    def coeff(self, x, y, tau):
        a, ad = self.a_derivs(np.asarray(tau) + self.sigma)
        A, Ax, Ay, At = _diag_coeff(a, self.a22, tau)
        At[0] = ad
        return A, Ax, Ay, At

    def scaled(self, dlog):
        raise NotImplementedError("the head is normalised by f(t0) = 1")

    def params(self):
        return {"mu": self.mu, "k": self.k, "t1": self.t1, "rtol": self.rtol, "atol": self.atol}


def symmetrize_head_segment(mu, k, t1=0.01) -> tuple[SymmetrizeHead, float]:
    head = SymmetrizeHead(mu, k, t1)
    return head, head.t0
