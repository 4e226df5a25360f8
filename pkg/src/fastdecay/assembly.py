"""Chaining segments into global solutions on the cylinder.

A :class:`Timeline` is a contiguous list of placed leaf segments.  Each
placement knows its global start, whether the block template is mirrored
through ``x <-> y`` and, for eigenfunctions, the diagonal lift that turns an
``A``-harmonic field into a ``-mu`` eigenfunction of ``A + B``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import zeta

from .planarlemma import ParameterDomainError
from .scalarcore import LogScalar, theta_derivs
from .segments import (
    Bundle,
    ModeSpec,
    RegularityClass,
    Segment,
    SymmetrizeHead,
    WaitSegment,
    _merge,
    accelerate_segment,
    change_coeff_segment,
    perturb_add_segment,
    perturb_remove_segment,
    pml_segment,
    remove_constant_segment,
)

FORMAT_NAME = "fastdecay-timeline"
FORMAT_VERSION = 1
BLOCK_LENGTH = 402.0
STRICT_N0 = 12


class PackingViolationError(ParameterDomainError):
    """The slow-down phase does not fit in its slot of the building block."""


class FrequencyFloorError(ParameterDomainError):
    """The starting frequency is too small for the requested eigenvalue."""


class OutOfRangeError(ValueError):
    """Evaluation requested outside the time range covered by a timeline."""


class SchemaError(ValueError):
    """A serialised timeline is malformed or inconsistent with its rebuild."""


@dataclass(frozen=True)
class LiftSpec:
    """Diagonal lift ``diag(l(tau_b), mu/k1^2)`` in template axes for one block.

    ``l`` equals ``mu/k0^2`` until the last 1/100 of the block and then moves
    smoothly to ``mu/k2^2``.
    """

    mu: float
    k0: float
    k1: float
    k2: float
    block_len: float

    def first(self, tau_b):
        hi, lo = self.mu / self.k0 ** 2, self.mu / self.k2 ** 2
        v0, v1, _, _ = theta_derivs(100.0 * (tau_b - self.block_len) + 1.0, 0.01)
        return (hi - lo) * v0 + lo, (hi - lo) * v1

    @property
    def second(self) -> float:
        return self.mu / self.k1 ** 2


@dataclass
class Placement:
    t_start: float
    seg: Segment
    swap: bool = False
    block: int = 0
    offset_in_block: float = 0.0
    lift: LiftSpec | None = None

    @property
    def duration(self) -> float:
        return self.seg.duration

    @property
    def t_end(self) -> float:
        return self.t_start + self.seg.duration


@dataclass
class Timeline:
    kind: str
    placements: list
    block_times: list
    wavenumbers: list
    amplitudes: list
    n0: int | None = None
    mu: float = 0.0
    mode: str = "strict"
    reflect: bool = False
    build_args: dict = field(default_factory=dict)
    declared: RegularityClass | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._starts = np.array([p.t_start for p in self.placements])

    @property
    def t_begin(self) -> float:
        return -self.t_end if self.reflect else self.placements[0].t_start

    @property
    def t_end(self) -> float:
        return self.placements[-1].t_end

    def evaluate_local(self, i: int, x, y, tau, ref_log=None) -> Bundle:
        """Bundle of placement ``i`` at local time ``tau``, in global axes."""
        p = self.placements[i]
        if p.swap:
            b = p.seg.evaluate(y, x, tau, ref_log)
        else:
            b = p.seg.evaluate(x, y, tau, ref_log)
        if p.lift is not None:
            lf, lfd = p.lift.first(p.offset_in_block + np.asarray(tau, dtype=float))
            b.A = b.A.copy()
            b.At = b.At.copy()
            b.A[0] = b.A[0] + lf
            b.A[2] = b.A[2] + p.lift.second
            b.At[0] = b.At[0] + lfd
            b.mu = p.lift.mu
        return b.swapped() if p.swap else b

    def locate(self, t: np.ndarray, side: str = "right") -> np.ndarray:
        idx = np.searchsorted(self._starts, t, side=side) - 1
        return np.clip(idx, 0, len(self.placements) - 1)

    def log_sup_at(self, t: float) -> float:
        """``log sup_{T^2} |u(., ., t)|`` at a global time."""
        tt = abs(t) if self.reflect else t
        i = int(self.locate(np.array([tt]))[0])
        p = self.placements[i]
        return float(p.seg.log_sup(np.clip(tt - p.t_start, 0.0, p.duration))[0])


def timeline_eval(T: Timeline, x, y, t, side: str = "right") -> Bundle:
    """Dispatch global samples to their owning segments.

    ``side`` selects the left or right one-sided value at a junction.
    """
    x, y, t = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=float)) for v in (x, y, t)))
    tol = 1e-9 * max(1.0, abs(T.t_end))
    if np.any(t < T.t_begin - tol) or np.any(t > T.t_end + tol):
        raise OutOfRangeError(f"t outside [{T.t_begin}, {T.t_end}]")
    neg = t < 0 if T.reflect else np.zeros(t.shape, bool)
    tt = np.where(neg, -t, t)
    if T.reflect:
        side_arr = np.where(neg, "right" if side == "left" else "left", side)
    else:
        side_arr = np.full(t.shape, side)
    pieces = []
    for sd in ("left", "right"):
        sel = side_arr == sd
        if not np.any(sel):
            continue
        idx = T.locate(tt[sel], sd)
        for i in np.unique(idx):
            m = np.zeros(t.shape, bool)
            m[np.flatnonzero(sel)[idx == i]] = True
            p = T.placements[i]
            b = T.evaluate_local(i, x[m], y[m], np.clip(tt[m] - p.t_start, 0.0, p.duration))
            if T.reflect:
                nm = neg[m]
                b.ut = np.where(nm, -b.ut, b.ut)
                b.At = np.where(nm, -b.At, b.At)
            pieces.append((m, b))
    out = _merge(pieces, t.shape, max(T.wavenumbers))
    if hasattr(out, "mu"):
        out.mu = T.mu
    return out


# ---------------------------------------------------------------------------
# Building block


def slowdown_duration(k: float, kp: float) -> float:
    """Total length of the slow-down phase for ``a = 1, b = 1/9``."""
    return k ** (-4.0 / 3.0) + 8 * math.log(k) / (k - kp / 3.0) + math.sqrt(4 * math.log(k)) / kp ** (1.0 / 3.0) + 0.01


def block_constant_log(k: float, kp: float) -> float:
    """``log c`` with ``c = e^{-k/2 + 5k'/6}``."""
    return -k / 2.0 + 5.0 * kp / 6.0


def _exit(seg: Segment, axis: int) -> LogScalar:
    return seg.mode_amplitudes(seg.duration)[axis]


def building_block(k, kp, t1: float = 0.0, c1: LogScalar | None = None, mode: str = "strict",
                   entry: LogScalar | None = None):
    """Segments carrying ``c1 cos(kx) e^{-kt}`` to ``c2 cos(k'y) e^{-k't}``.

    Returns ``(segments, c2, info)`` with segments in template axes and global
    start times.  ``c2`` is read off the chained segments, not the formula.
    ``entry``, the amplitude at ``t1``, overrides ``c1 e^{-k t1}``; chains pass
    the previous exit so that late blocks do not add and remove ``k t``.
    """
    if mode not in ("strict", "flexible"):
        raise ValueError("mode must be 'strict' or 'flexible'")
    if not (1 < k < kp <= 2 * k):
        raise ParameterDomainError(f"need 1 < k < k' <= 2k, got k={k}, k'={kp}")
    strict = mode == "strict"
    if strict and k < 2 ** STRICT_N0:
        raise ParameterDomainError(f"strict mode needs k >= 2^{STRICT_N0}")
    c1 = c1 or LogScalar.one()
    a, b = 1.0, 1.0 / 9.0
    eps = float(k) ** -4
    slow = slowdown_duration(k, kp)
    if strict and slow > 0.5:
        raise PackingViolationError(f"slow-down duration {slow} exceeds 1/2")
    acc_start = max(1.0, 0.5 + slow + 0.01) if not strict else 1.0

    segs: list[Segment] = []
    t = t1

    def push(seg):
        nonlocal t
        segs.append(seg)
        t = t + seg.duration
        return seg

    entry = entry if entry is not None else c1.scale_log(-k * t1)
    s = push(WaitSegment([ModeSpec(0, k, k, entry)], (1.0, 1.0), 0.01, t))
    s = push(change_coeff_segment(a, b, k, t, 1.0 / 3.0 - 0.01, _exit(s, 0)))
    s = push(WaitSegment([ModeSpec(0, k, k, _exit(s, 0))], (a, b), 0.5 - 1.0 / 3.0, t))
    slow_start = t
    add = push(perturb_add_segment(k, kp, a, b, eps, t, _exit(s, 0)))
    t0 = 8 * math.log(k) / (k - kp / 3.0)
    amps = add.mode_amplitudes(add.duration)
    w2 = push(WaitSegment([ModeSpec(0, k, k, amps[0]), ModeSpec(1, kp, kp / 3.0, amps[1])], (a, b),
                          t0 - add.duration, t))
    rem = push(perturb_remove_segment(k, kp, a, b, eps, t, _exit(w2, 1)))
    s = push(WaitSegment([ModeSpec(1, kp, kp / 3.0, _exit(rem, 1))], (a, b), 0.01, t))
    F = -4 * math.log(k)
    s = push(remove_constant_segment(kp, a, b, F, t, _exit(s, 1).scale_log(-F), strict=strict))
    slow_end = t
    s = push(WaitSegment([ModeSpec(1, kp, kp / 3.0, _exit(s, 1))], (a, b), t1 + acc_start - t, t))
    s = push(accelerate_segment(kp, a, b, 1.0, t, _exit(s, 1)))
    s = push(WaitSegment([ModeSpec(1, kp, kp, _exit(s, 1))], (1.0, 1.0), 1.0, t))
    block_len = acc_start + 401.0
    exit_amp = _exit(s, 1)
    c2 = exit_amp.scale_log(kp * (t1 + block_len))
    info = {
        "block_len": block_len,
        "slowdown": slow_end - slow_start,
        "slowdown_formula": slow,
        "entry": entry,
        "exit": exit_amp,
        "t0": t0,
    }
    return segs, c2, info


# ---------------------------------------------------------------------------
# Half-cylinder chains


def _place_blocks(ks, mode, lift_mu=None, t_origin=0.0, first_block=1):
    placements, block_times, amps = [], [], []
    c = LogScalar.one()
    t = 0.0
    infos = []
    entry = None
    for j in range(len(ks) - 2 if lift_mu is not None else len(ks) - 1):
        n = first_block + j
        k, kp = ks[j], ks[j + 1]
        segs, c_next, info = building_block(k, kp, t, c, mode, entry)
        entry = info["exit"]
        lift = None
        if lift_mu is not None:
            lift = LiftSpec(lift_mu, k, kp, ks[j + 2], info["block_len"])
        off = 0.0
        for s in segs:
            placements.append(Placement(t_origin + s.t_a, s, swap=(n % 2 == 0), block=n,
                                        offset_in_block=off, lift=lift))
            off += s.duration
        block_times.append(t_origin + t)
        amps.append(c)
        infos.append(info)
        t = t + info["block_len"]
        c = c_next
    block_times.append(t_origin + t)
    amps.append(c)
    return placements, block_times, amps, infos


def _dyadic(n0, count):
    return [float(2 ** (n + n0 - 1)) for n in range(1, count + 1)]


def harmonic_half_cylinder(n0: int, N: int, mode: str = "strict") -> Timeline:
    if N < 1:
        raise ParameterDomainError("need at least one block")
    if mode == "strict" and n0 < STRICT_N0:
        raise ParameterDomainError(f"strict mode needs n0 >= {STRICT_N0}")
    ks = _dyadic(n0, N + 1)
    pl, bt, amps, infos = _place_blocks(ks, mode)
    return Timeline("Harmonic", pl, bt, ks, amps, n0=n0, mode=mode,
                    build_args={"n0": n0, "N": N, "mode": mode},
                    declared=RegularityClass(80.0, 60.0),
                    meta={"block_len": [i["block_len"] for i in infos]})


def _check_mu(mu, n0):
    if not mu > 0:
        raise ParameterDomainError("mu must be positive")
    k1 = 2.0 ** n0
    if k1 < 10 * math.sqrt(mu):
        raise FrequencyFloorError(f"need 2^n0 >= 10 sqrt(mu), got 2^{n0} < {10 * math.sqrt(mu)}")
    margin = 10 * math.sqrt(mu) * math.sqrt(100 * math.sqrt(math.pi) * 3)
    if k1 < margin:
        raise FrequencyFloorError(f"lift derivative bound needs 2^n0 >= {margin:.4g}")


def eigen_half_cylinder(mu: float, n0: int, N: int, mode: str = "strict") -> Timeline:
    _check_mu(mu, n0)
    if mode == "strict" and n0 < STRICT_N0:
        raise ParameterDomainError(f"strict mode needs n0 >= {STRICT_N0}")
    ks = _dyadic(n0, N + 2)
    pl, bt, amps, infos = _place_blocks(ks, mode, lift_mu=mu)
    return Timeline("EigenHalf", pl, bt, ks, amps, n0=n0, mu=mu, mode=mode,
                    build_args={"mu": mu, "n0": n0, "N": N, "mode": mode},
                    declared=RegularityClass(100.0, 61.0),
                    meta={"block_len": [i["block_len"] for i in infos]})


def eigen_full_cylinder(mu: float, n0: int, N: int, mode: str = "strict", t1: float = 0.01) -> Timeline:
    """Symmetrisation head on ``[0, t0]``, shifted half-cylinder after, even in ``t``."""
    _check_mu(mu, n0)
    if mode == "strict" and n0 < STRICT_N0:
        raise ParameterDomainError(f"strict mode needs n0 >= {STRICT_N0}")
    ks = _dyadic(n0, N + 2)
    head = SymmetrizeHead(mu, ks[0], t1)
    t0 = head.t0
    pl, bt, amps, infos = _place_blocks(ks, mode, lift_mu=mu, t_origin=t0)
    placements = [Placement(0.0, head, block=0)] + pl
    return Timeline("EigenFull", placements, bt, ks, amps, n0=n0, mu=mu, mode=mode, reflect=True,
                    build_args={"mu": mu, "n0": n0, "N": N, "mode": mode, "t1": t1},
                    declared=RegularityClass(max(100.0, 5 * ks[0] ** 2 / mu), 61.0),
                    meta={"t0": t0, "sigma": head.sigma, "t2": head.t2, "t1": head.t1,
                          "head_err_estimate": head.sol.err_sum,
                          "block_len": [i["block_len"] for i in infos]})


def recursion_log_c(ks, block_len=BLOCK_LENGTH) -> list[float]:
    """``log c_n`` from ``c_{n+1} e^{-k_{n+1} t_n} = c_n d_n e^{-k_n t_n}``."""
    out = [0.0]
    for n in range(len(ks) - 1):
        t_n = block_len * n
        d = block_constant_log(ks[n], ks[n + 1])
        out.append(out[-1] + d + (ks[n + 1] - ks[n]) * t_n)
    return out


def closed_form_log_C(k1: float, kn: float, C: float = BLOCK_LENGTH) -> float:
    """``log C_n = k_1 (2C - 7/6) - (2C - 14/6) k_n``."""
    return k1 * (2 * C - 7.0 / 6.0) - (2 * C - 14.0 / 6.0) * kn


# ---------------------------------------------------------------------------
# PML chains


def _pml_chain(kind, ks, ws, spread, build_args, extra_meta):
    placements, times, amps = [], [], []
    a = 0.0
    c = LogScalar.one()
    entry = c
    c1_bound = 0.0
    for n in range(len(ws)):
        k, kp, w = ks[n], ks[n + 1], ws[n]
        seg = pml_segment(k, kp, w, entry, a, spread=spread)
        c1_bound = max(c1_bound, seg.declared.C1bound)
        off = 0.0
        for o, leaf in seg.leaves():
            placements.append(Placement(a + o, leaf, swap=((n + 1) % 2 == 0), block=n + 1, offset_in_block=o))
            off = o
        times.append(a)
        amps.append(c)
        exit_amp = seg.parts[-1].mode_amplitudes(seg.parts[-1].duration)[1]
        entry = exit_amp
        a = a + 2 * w
        c = exit_amp.scale_log(kp * a)
    times.append(a)
    amps.append(c)
    return Timeline(kind, placements, times, ks, amps, build_args=build_args, meta=extra_meta,
                    declared=RegularityClass(2.0, c1_bound))


def holder_sequences(alpha: float, n0: int, N: int):
    idx = np.arange(1, N + 2) + n0
    ks_exact = idx ** (1.0 / alpha)
    ks = np.round(ks_exact)
    ws = idx[:-1] ** ((alpha - 1.0) / alpha)
    return ks, ws, float(np.max(np.abs(ks - ks_exact)))


def plis_miller_chain(alpha: float, n0: int, N: int) -> Timeline:
    """Finite-time chain ``k_n = (n+n0)^{1/alpha}``, ``w_n = (n+n0)^{(alpha-1)/alpha}``."""
    if not 0 < alpha < 0.5:
        raise ParameterDomainError(f"alpha={alpha} violates the constraint alpha<1/2 (0 < alpha < 1/2)")
    if N < 1 or n0 < 1:
        raise ParameterDomainError("need N >= 1 and n0 >= 1")
    ks, ws, rounding = holder_sequences(alpha, n0, N)
    gaps = (ks[1:] - ks[:-1]) * ws
    inv = 1.0 / (ws * ks[:-1])
    spread = float(max(gaps.max(), inv.max())) * (1 + 1e-9)
    s_exp = (1.0 - alpha) / alpha
    T = 2.0 * float(zeta(s_exp, n0 + 1))
    meta = {
        "alpha": alpha,
        "spread": spread,
        "gap_times_w": gaps.tolist(),
        "inv_wk": inv.tolist(),
        "holder_ratio": (1.0 / (ws * ks[:-1] ** (1 - alpha))).tolist(),
        "margin_first": float(inv[0]),
        "T": T,
        "k_rounding": rounding,
        "extension": "u, A grad u extended by zero for t >= T",
    }
    return _pml_chain("PlisMiller", ks.tolist(), ws.tolist(), spread,
                      {"alpha": alpha, "n0": n0, "N": N}, meta)


def gaussian_chain(n0: int, N: int) -> Timeline:
    """``k_n = n + n0`` with unit-width transfers and block length 2."""
    if N < 1 or n0 < 1:
        raise ParameterDomainError("need N >= 1 and n0 >= 1")
    ks = [float(n + n0) for n in range(1, N + 2)]
    ws = [1.0] * N
    return _pml_chain("Gaussian", ks, ws, 1.0, {"n0": n0, "N": N}, {"block_len": 2.0})


# ---------------------------------------------------------------------------
# Serialisation


BUILDERS = {
    "Harmonic": harmonic_half_cylinder,
    "EigenHalf": eigen_half_cylinder,
    "EigenFull": eigen_full_cylinder,
    "PlisMiller": plis_miller_chain,
    "Gaussian": gaussian_chain,
}


def _tables(T: Timeline) -> dict:
    return {
        "block_times": [repr(float(v)) for v in T.block_times],
        "wavenumbers": [repr(float(v)) for v in T.wavenumbers],
        "amplitudes": [a.to_json() for a in T.amplitudes],
    }


def timeline_to_json(T: Timeline) -> dict[str, Any]:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": T.kind,
        "build_args": T.build_args,
        **_tables(T),
        "segments": [
            {"t_start": repr(p.t_start), "block": p.block, "swap": p.swap, "kind": p.seg.kind,
             "params": p.seg.params()}
            for p in T.placements
        ],
    }


def build_from_args(kind: str, args: dict) -> Timeline:
    if kind == "Parabolic":
        from .parabolic import parabolic_chain

        return parabolic_chain(**args)
    if kind not in BUILDERS:
        raise SchemaError(f"unknown timeline kind {kind!r}")
    return BUILDERS[kind](**args)


def timeline_from_json(obj: dict) -> Timeline:
    """Rebuild from the recorded arguments and check the stored tables match exactly."""
    try:
        if obj.get("format") != FORMAT_NAME:
            raise SchemaError("not a timeline file")
        if obj.get("version") != FORMAT_VERSION:
            raise SchemaError(f"unsupported version {obj.get('version')}")
        kind, args = obj["kind"], dict(obj["build_args"])
        stored = {key: obj[key] for key in ("block_times", "wavenumbers", "amplitudes")}
        n_segments = len(obj["segments"])
    except (KeyError, TypeError, AttributeError) as exc:
        raise SchemaError(f"malformed timeline: {exc}") from exc
    try:
        T = build_from_args(kind, args)
    except TypeError as exc:
        raise SchemaError(f"bad build arguments: {exc}") from exc
    if _tables(T) != stored or len(T.placements) != n_segments:
        raise SchemaError("stored tables do not match the rebuilt timeline")
    return T


def save_timeline(T: Timeline, path) -> None:
    with open(path, "w") as fh:
        json.dump(timeline_to_json(T), fh, indent=1)


def load_timeline(path) -> Timeline:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return timeline_from_json(obj)
