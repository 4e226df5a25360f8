"""Complex drifted heat blocks ``u_t = Lap u + B . grad u`` and their chain.

Within a block of length ``7/(2k)`` (local time ``tau``)

* ``f(tau) = theta(k tau - 2) e^{-k^2 tau}`` multiplies ``e^{ikx}``
* ``g(tau) = (1 - theta(k tau - 1/2)) e^{-k'^2 tau}`` multiplies ``e^{ik'y}``

The growth of ``g`` is paid for by ``B = (B1, 0)`` and the decay of ``f`` by
``B = (0, B2)``.  Dividing by ``d_x u1 = i k u1`` is exact because a complex
exponential never vanishes, which is why the construction is complex valued.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .planarlemma import ParameterDomainError
from .scalarcore import SQRT_PI, LogScalar, theta_derivs
from .segments import OutOfIntervalError, RegularityClass, Segment, _arrays

P_FIELDS = ("u", "ut", "utt", "ux", "uy", "uxx", "uyy")


@dataclass
class ParabolicBundle:
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
    B1: np.ndarray
    B2: np.ndarray

    def swapped(self) -> "ParabolicBundle":
        return replace(self, ux=self.uy, uy=self.ux, uxx=self.uyy, uyy=self.uxx, B1=self.B2, B2=self.B1)

    def rescaled(self, new_log) -> "ParabolicBundle":
        f = np.exp(self.log_scale - new_log)
        kw = {n: getattr(self, n) * f for n in P_FIELDS}
        return replace(self, log_scale=np.broadcast_to(new_log, self.log_scale.shape).copy(), sup=self.sup * f, **kw)

    def residual(self) -> np.ndarray:
        return self.ut - (self.uxx + self.uyy) - (self.B1 * self.ux + self.B2 * self.uy)

    def relative_residual(self) -> np.ndarray:
        return np.abs(self.residual()) / (self.sup * (1.0 + self.kmax ** 2))


def drift_envelope(k: float, kp: float) -> float:
    """``sqrt(pi) e^{3 (k'^2 - k^2) / k}``."""
    return SQRT_PI * math.exp(3.0 * (kp * kp - k * k) / k)


@dataclass
class ParabolicPhase(Segment):
    """One of the five phases of a block; evaluates the block formula on its slice."""

    k: float
    kp: float
    tau0: float
    duration: float
    t_a: float = 0.0
    amp: LogScalar = field(default_factory=LogScalar.one)
    kind: str = "Heat"
    declared: RegularityClass = field(default_factory=lambda: RegularityClass(1.0, 0.0))

    @property
    def wavenumbers(self):
        return (self.k, self.kp)

    def _profiles(self, tb):
        k, kp = self.k, self.kp
        r1, r2 = k * k, kp * kp
        add = theta_derivs(k * tb - 0.5)
        rem = theta_derivs(k * tb - 2.0)
        a0, a1, a2 = add[0], k * add[1], k * k * add[2]
        b0, b1, b2 = rem[0], k * rem[1], k * k * rem[2]
        q = 1.0 - a0
        lm = self.amp.logmag
        f = (lm - r1 * tb, b0, b1 - b0 * r1, b2 - 2.0 * b1 * r1 + b0 * r1 * r1)
        g = (lm - r2 * tb, q, -a1 - q * r2, -a2 + 2.0 * a1 * r2 + q * r2 * r2)
        return f, g, a1, b1

    def modes(self, tau):
        f, g, _, _ = self._profiles(self.tau0 + np.asarray(tau))
        return [(0, self.k) + f, (1, self.kp) + g]

    def log_sup(self, tau):
        (tau,) = _arrays(tau)
        self._check(tau)
        terms = []
        for _, _, ell, p0, _, _ in self.modes(tau):
            with np.errstate(divide="ignore"):
                terms.append(ell + np.log(np.abs(p0)) + np.zeros_like(tau))
        return np.logaddexp.reduce(np.stack(terms), axis=0)

    def mode_amplitudes(self, tau):
        out = {}
        for axis, _, ell, p0, _, _ in self.modes(np.atleast_1d(float(tau))):
            p0 = float(np.broadcast_to(p0, (1,))[0])
            out[axis] = LogScalar.zero() if p0 == 0 else LogScalar(1 if p0 > 0 else -1,
                                                                   float(np.broadcast_to(ell, (1,))[0]) + math.log(abs(p0)))
        return out

    def drift(self, x, y, tau):
        tb = self.tau0 + np.asarray(tau)
        _, _, a1, b1 = self._profiles(tb)
        k, kp = self.k, self.kp
        dk = kp * kp - k * k
        B1 = (1j * a1 / k) * np.exp(1j * (kp * y - k * x)) * np.exp(-dk * tb)
        B2 = (-1j * b1 / kp) * np.exp(1j * (k * x - kp * y)) * np.exp(dk * tb)
        return B1, B2

    def evaluate(self, x, y, tau, ref_log=None, side="right") -> ParabolicBundle:
        x, y, tau = _arrays(x, y, tau)
        self._check(tau)
        ms = self.modes(tau)
        zero = np.zeros_like(tau)
        ells = [m[2] + zero for m in ms]
        L = np.max(np.stack(ells), axis=0) if ref_log is None else np.asarray(ref_log, float) + zero
        out = {n: np.zeros(tau.shape, complex) for n in P_FIELDS}
        sup = zero.copy()
        for (axis, k, _, p0, p1, p2), ell in zip(ms, ells):
            w = np.exp(ell - L)
            e = np.exp(1j * k * (x if axis == 0 else y))
            wp0 = w * p0
            out["u"] += wp0 * e
            out["ut"] += w * p1 * e
            out["utt"] += w * p2 * e
            d1, d2 = ("ux", "uxx") if axis == 0 else ("uy", "uyy")
            out[d1] += 1j * k * wp0 * e
            out[d2] += -k * k * wp0 * e
            sup += np.abs(wp0)
        B1, B2 = self.drift(x, y, tau)
        return ParabolicBundle(L, sup, max(self.k, self.kp), B1=B1, B2=B2, **out)

    def scaled(self, dlog):
        return replace(self, amp=self.amp.scale_log(dlog))

    def params(self):
        return {"k": self.k, "kp": self.kp, "tau0": self.tau0, "duration": self.duration,
                "t_a": self.t_a, "amp": self.amp.to_json(), "kind": self.kind}


PHASES = (
    ("Heat", 0.0, 0.5),
    ("ParabolicAdd", 0.5, 1.5),
    ("Heat", 1.5, 2.0),
    ("ParabolicRemove", 2.0, 3.0),
    ("Heat", 3.0, 3.5),
)


def parabolic_block(k, kp, c1: LogScalar | None = None, t1: float = 0.0, entry: LogScalar | None = None):
    """Phases carrying ``c1 e^{ikx} e^{-k^2 t}`` to ``c2 e^{ik'y} e^{-k'^2 t}``.

    Returns ``(phases, c2)``; ``c2`` is read off the last phase.  ``entry``
    overrides the amplitude ``c1 e^{-k^2 t1}`` at ``t1``.
    """
    if not (1 <= k <= kp <= k + 10):
        raise ParameterDomainError(f"need 1 <= k <= k' <= k+10, got k={k}, k'={kp}")
    c1 = c1 or LogScalar.one()
    entry = entry if entry is not None else c1.scale_log(-k * k * t1)
    phases = []
    for kind, lo, hi in PHASES:
        phases.append(ParabolicPhase(float(k), float(kp), lo / k, (hi - lo) / k, t1 + lo / k, entry, kind,
                                     RegularityClass(1.0, 0.0)))
    last = phases[-1]
    exit_amp = last.mode_amplitudes(last.duration)[1]
    c2 = exit_amp.scale_log(kp * kp * (t1 + 3.5 / k))
    return phases, c2


def parabolic_chain(N: int):
    from .assembly import Placement, Timeline

    if N < 1:
        raise ParameterDomainError("need N >= 1")
    placements, times, amps = [], [], []
    t = 0.0
    c = LogScalar.one()
    entry = None
    for n in range(1, N + 1):
        phases, c_next = parabolic_block(n, n + 1, c, t, entry)
        entry = phases[-1].mode_amplitudes(phases[-1].duration)[1]
        off = 0.0
        for ph in phases:
            placements.append(Placement(ph.t_a, ph, swap=(n % 2 == 0), block=n, offset_in_block=off))
            off += ph.duration
        times.append(t)
        amps.append(c)
        t = t + 3.5 / n
        c = c_next
    times.append(t)
    amps.append(c)
    return Timeline("Parabolic", placements, times, [float(n) for n in range(1, N + 2)], amps,
                    build_args={"N": N}, declared=None,
                    meta={"envelopes": [drift_envelope(n, n + 1) for n in range(1, N + 1)]})


def recursion_log_C(N: int) -> list[float]:
    """``log C_n`` for ``C_n = c_n e^{-k_n^2 t_n}``, ``k_n = n``."""
    out = [0.0]
    for n in range(1, N):
        out.append(out[-1] - 3.5 * (n + 1) ** 2 / n)
    return out


def parabolic_residual(T, x, y, t) -> np.ndarray:
    """Relative residual ``|u_t - Lap u - B grad u| / (sup|u| (1 + k^2))`` at global times."""
    from .assembly import timeline_eval

    return timeline_eval(T, x, y, t).relative_residual()
