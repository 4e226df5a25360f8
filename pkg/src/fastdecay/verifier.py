"""Measured pass/fail checks over constructed timelines.

Every check returns a plain dict with ``name``, ``passed`` and the tolerance
it used, so a report serialises to JSON without adapters.  Sampling is
quasi-random (scrambled Halton) and seeded per placement, which keeps the
results independent of the worker count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.stats import qmc

from .assembly import BLOCK_LENGTH, Timeline, closed_form_log_C, recursion_log_c, timeline_eval
from .parabolic import P_FIELDS, ParabolicBundle, drift_envelope, recursion_log_C
from .segments import U_FIELDS

REPORT_FORMAT = "fastdecay-report"
REPORT_VERSION = 1
TWO_PI = 2.0 * math.pi
JUNCTION_GAP = 1e-9
MARGIN_SLACK = 0.01

HALF_CYLINDER = ("Harmonic", "EigenHalf", "EigenFull")
PML_KINDS = ("PlisMiller", "Gaussian")
# (spatial order, time order) of each field
ORDER = {"u": (0, 0), "ut": (0, 1), "ux": (1, 0), "uy": (1, 0), "utt": (0, 2), "uxx": (2, 0),
         "uyy": (2, 0), "uxy": (2, 0)}


class WrongKindError(ValueError):
    """A check was asked of a timeline kind it does not apply to."""


@dataclass(frozen=True)
class Tolerances:
    residual: float = 1e-9
    head_residual: float = 1e-8
    junction_u: float = 1e-8
    junction_A: float = 1e-8
    drift_continuity: float = 1e-10
    fd_relative: float = 1e-5
    fd_ratio_low: float = 3.0
    fd_ratio_high: float = 5.0
    decay_slope_fraction: float = 0.1
    recursion_relative: float = 1e-12
    monotone_relative: float = 1e-12
    holder_factor: float = 2.0
    holder_uniform: float = 2.0
    extension_logmag: float = -69.0
    fit_r2: float = 0.99
    gaussian_r2: float = 0.999

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "Tolerances":
        d = d or {}
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown tolerance keys: {sorted(bad)}")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class SampleCounts:
    residual: int = 1000
    ellipticity: int = 10000
    junction_probes: int = 64
    holder_pairs: int = 4000
    fd_points: int = 16
    fd_order_points: int = 100
    drift: int = 1000

    @classmethod
    def from_dict(cls, d: dict | None) -> "SampleCounts":
        d = d or {}
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown sample keys: {sorted(bad)}")
        return cls(**{k: int(v) for k, v in d.items()})


def halton(n: int, d: int, seed: int, stream: int = 0) -> np.ndarray:
    """``n`` scrambled Halton points in ``[0, 1)^d``; ``stream`` decorrelates callers."""
    return qmc.Halton(d=d, scramble=True, seed=np.random.default_rng([seed, stream])).random(n)


def _pmap(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def clean(obj):
    """Recursively turn numpy scalars and arrays into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _is_parabolic(T: Timeline) -> bool:
    return T.kind == "Parabolic"


def _interior_tau(duration: float, u: np.ndarray, margin: float) -> np.ndarray:
    margin = min(margin, duration / 4)
    return margin + (duration - 2 * margin) * u


def _seg_kmin(seg) -> float:
    return float(min(seg.wavenumbers))


# ---------------------------------------------------------------------------
# Residual


def verify_residual(T: Timeline, samples_per_segment: int = 1000, seed: int = 0,
                    tol: Tolerances | None = None, workers: int = 1) -> dict:
    tol = tol or Tolerances()

    def one(i):
        p = T.placements[i]
        h = halton(samples_per_segment, 3, seed, i)
        tau = _interior_tau(p.duration, h[:, 2], JUNCTION_GAP)
        r = T.evaluate_local(i, TWO_PI * h[:, 0], TWO_PI * h[:, 1], tau).relative_residual()
        lim = tol.head_residual if p.seg.kind == "SymmetrizeHead" else tol.residual
        return {"index": i, "kind": p.seg.kind, "block": p.block, "t_start": p.t_start,
                "max": float(r.max()), "mean": float(r.mean()), "count": int(r.size),
                "tolerance": lim, "passed": bool(r.max() <= lim)}

    rows = _pmap(one, range(len(T.placements)), workers)
    by_kind: dict = {}
    for r in rows:
        by_kind[r["kind"]] = max(by_kind.get(r["kind"], 0.0), r["max"])
    return {"name": "residual", "passed": all(r["passed"] for r in rows),
            "max": max(r["max"] for r in rows), "tolerance": tol.residual,
            "by_kind": by_kind, "segments": rows}


# ---------------------------------------------------------------------------
# Coefficient scans


def coefficient_scan(T: Timeline, samples: int = 10000, seed: int = 0, workers: int = 1) -> list[dict]:
    """Per placement: eigenvalue range, largest first partial, largest ``|A - Id|`` entry."""
    if _is_parabolic(T):
        raise WrongKindError("parabolic timelines have no elliptic coefficient")

    def one(i):
        p = T.placements[i]
        h = halton(samples, 3, seed, 1000 + i)
        tau = p.duration * h[:, 2]
        b = T.evaluate_local(i, TWO_PI * h[:, 0], TWO_PI * h[:, 1], tau)
        lo, hi = b.eigenvalues()
        grad = np.abs(np.concatenate([b.Ax, b.Ay, b.At]))
        dev = np.abs(b.A - np.array([[1.0], [0.0], [1.0]]))
        d = p.seg.declared
        return {"index": i, "kind": p.seg.kind, "block": p.block,
                "lam_min": float(lo.min()), "lam_max": float(hi.max()),
                "grad_max": float(grad.max()), "dev_max": float(dev.max()),
                "grad_norm_max": float(np.sqrt(b.Ax ** 2 + b.Ay ** 2 + b.At ** 2).max()),
                "declared_Lambda": d.Lambda, "declared_C1": d.C1bound,
                "lambda_margin": float(min(lo.min() * d.Lambda, d.Lambda / hi.max())),
                "c1_margin": float(d.C1bound / grad.max()) if grad.max() > 0 else math.inf}

    return _pmap(one, range(len(T.placements)), workers)


def verify_ellipticity(T: Timeline, samples: int = 10000, seed: int = 0, Lambda: float | None = None,
                       workers: int = 1, scan: list | None = None) -> dict:
    scan = scan or coefficient_scan(T, samples, seed, workers)
    Lam = Lambda or T.declared.Lambda
    lo = min(r["lam_min"] for r in scan)
    hi = max(r["lam_max"] for r in scan)
    return {"name": "ellipticity", "passed": bool(lo >= 1.0 / Lam and hi <= Lam),
            "lam_min": lo, "lam_max": hi, "Lambda": Lam, "tolerance": [1.0 / Lam, Lam],
            "margin": min(lo * Lam, Lam / hi),
            "segments": [{k: r[k] for k in ("index", "kind", "lam_min", "lam_max", "declared_Lambda",
                                             "lambda_margin")} for r in scan]}


def verify_c1(T: Timeline, samples: int = 10000, seed: int = 0, bound: float | None = None,
              workers: int = 1, scan: list | None = None) -> dict:
    scan = scan or coefficient_scan(T, samples, seed, workers)
    C = bound or T.declared.C1bound
    g = max(r["grad_max"] for r in scan)
    return {"name": "c1", "passed": bool(g <= C), "grad_max": g, "bound": C, "tolerance": C,
            "segments": [{k: r[k] for k in ("index", "kind", "grad_max", "declared_C1", "c1_margin")}
                         for r in scan]}


# ---------------------------------------------------------------------------
# Junctions


def _u_fields(b) -> tuple:
    return P_FIELDS if isinstance(b, ParabolicBundle) else U_FIELDS


def _field_scale(n: str, k: float, rt: float) -> float:
    s, t = ORDER[n]
    return k ** s * rt ** t


def junction_defects(left, right) -> dict:
    """One-sided defects of ``right - left``; both bundles must share ``log_scale``."""
    sup = np.maximum(left.sup, right.sup)
    k = max(left.kmax, right.kmax)
    rt = k * k if isinstance(left, ParabolicBundle) else k
    out = {}
    for n in _u_fields(left):
        d = np.abs(getattr(right, n) - getattr(left, n)) / (sup * _field_scale(n, k, rt))
        out[n] = float(d.max())
    if isinstance(left, ParabolicBundle):
        for n in ("B1", "B2"):
            out[n] = float(np.abs(getattr(right, n) - getattr(left, n)).max())
    else:
        for n in ("A", "Ax", "Ay", "At"):
            out[n] = float(np.abs(getattr(right, n) - getattr(left, n)).max())
    return out


def verify_junctions(T: Timeline, probes: int = 64, seed: int = 0, tol: Tolerances | None = None) -> dict:
    tol = tol or Tolerances()
    h = halton(probes, 2, seed, 10 ** 6)
    x, y = TWO_PI * h[:, 0], TWO_PI * h[:, 1]
    zero = np.zeros(probes)
    rows = []
    coeff_names = ("B1", "B2") if _is_parabolic(T) else ("A", "Ax", "Ay", "At")
    coeff_tol = tol.drift_continuity if _is_parabolic(T) else tol.junction_A
    for i in range(len(T.placements) - 1):
        p, q = T.placements[i], T.placements[i + 1]
        L = T.evaluate_local(i, x, y, zero + p.duration)
        R = T.evaluate_local(i + 1, x, y, zero, ref_log=L.log_scale)
        d = junction_defects(L, R)
        u_def = max(d[n] for n in _u_fields(L))
        c_def = max(d[n] for n in coeff_names)
        rows.append({"t": q.t_start, "left": p.seg.kind, "right": q.seg.kind, "block": q.block,
                     "u_defect": u_def, "coeff_defect": c_def, "defects": d,
                     "passed": bool(u_def <= tol.junction_u and c_def <= coeff_tol)})
    if T.reflect:
        # mirror junction at t = 0: only the odd t-derivatives can jump
        b = T.evaluate_local(0, x, y, zero)
        u_def = float((2 * np.abs(b.ut) / (b.sup * b.kmax)).max())
        c_def = float((2 * np.abs(b.At)).max())
        rows.insert(0, {"t": 0.0, "left": "mirror", "right": T.placements[0].seg.kind, "block": 0,
                        "u_defect": u_def, "coeff_defect": c_def, "defects": {"ut": u_def, "At": c_def},
                        "passed": bool(u_def <= tol.junction_u and c_def <= coeff_tol)})
    return {"name": "junctions", "passed": all(r["passed"] for r in rows),
            "max_u_defect": max((r["u_defect"] for r in rows), default=0.0),
            "max_coeff_defect": max((r["coeff_defect"] for r in rows), default=0.0),
            "tolerance": {"u": tol.junction_u, "coeff": coeff_tol}, "count": len(rows), "junctions": rows}


# ---------------------------------------------------------------------------
# Decay


@dataclass
class DecayFit:
    times: list
    log_sup: list
    model: str
    slope: float
    intercept: float
    r2: float
    fit_residual: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return clean(asdict(self))


def _linfit(X: np.ndarray, y: np.ndarray):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    pred = X @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef, r2, math.sqrt(ss_res / len(y))


def _time_origin(T: Timeline) -> float:
    return float(T.meta.get("t0", 0.0)) if T.kind == "EigenFull" else 0.0


def decay_fit(T: Timeline) -> DecayFit:
    """Log-sup table at block times and the kind's decay model fit."""
    times = np.array(T.block_times, dtype=float)
    ls = np.array([T.log_sup_at(t) for t in times])
    if T.kind in HALF_CYLINDER or T.kind == "Parabolic":
        sel = slice(2, None) if len(times) > 4 else slice(1, None)
        t, v = times[sel], np.log(-ls[sel])
        (b, a), r2, res = _linfit(np.stack([np.ones_like(t), t], 1), v)
        return DecayFit(times.tolist(), ls.tolist(), "log(-log sup) ~ t", a, b, r2, res)
    if T.kind == "Gaussian":
        (b, a), r2, res = _linfit(np.stack([np.ones_like(times), times ** 2], 1), -ls)
        return DecayFit(times.tolist(), ls.tolist(), "-log sup ~ t^2", a, b, r2, res)
    n = np.arange(1, len(times) + 1, dtype=float)
    (f, e, d), r2, res = _linfit(np.stack([np.ones_like(n), n, n * n], 1), -ls)
    return DecayFit(times.tolist(), ls.tolist(), "-log sup ~ d n^2 + e n + f", d, f, r2, res,
                    extra={"linear": e, "n": n.tolist()})


def _sampled_log_sup(T: Timeline, per_segment: int = 16) -> tuple[np.ndarray, np.ndarray]:
    ts, ls = [], []
    for p in T.placements:
        tau = np.linspace(0.0, p.duration, per_segment)
        ts.append(p.t_start + tau)
        ls.append(p.seg.log_sup(tau))
    return np.concatenate(ts), np.concatenate(ls)


def verify_decay(T: Timeline, tol: Tolerances | None = None) -> tuple[dict, DecayFit]:
    tol = tol or Tolerances()
    fit = decay_fit(T)
    ks = np.array(T.wavenumbers, dtype=float)
    ls = np.array(fit.log_sup)
    times = np.array(fit.times)
    c = np.array([a.logmag for a in T.amplitudes])
    origin = _time_origin(T)
    power = 2 if _is_parabolic(T) else 1
    n_b = len(times)
    # sup = c_n e^{-k_n^p (t_n - origin)} with c_n read off the chain
    pred = c[:n_b] - ks[:n_b] ** power * (times - origin)
    scale = np.maximum(1.0, np.abs(pred))
    consistency = float(np.max(np.abs(ls - pred) / scale))
    checks = {"amplitude_consistency": consistency <= tol.recursion_relative}
    out = {"name": "decay", "model": fit.model, "slope": fit.slope, "r2": fit.r2,
           "amplitude_consistency": consistency,
           "tolerance": {"relative": tol.recursion_relative, "slope_fraction": tol.decay_slope_fraction,
                         "r2": tol.gaussian_r2 if T.kind == "Gaussian" else tol.fit_r2,
                         "monotone": tol.monotone_relative}}

    if T.kind in HALF_CYLINDER:
        blens = T.meta.get("block_len", [BLOCK_LENGTH] * (n_b - 1))
        strict = all(b == BLOCK_LENGTH for b in blens)
        rec = np.array(recursion_log_c(ks[:n_b].tolist()))
        out["recursion_error"] = float(np.max(np.abs(c[:n_b] - rec) / np.maximum(1.0, np.abs(rec))))
        # C_n = c_n e^{-k_n (t_n - 7/6)} with t_n measured from the chain origin
        C_meas = c[:n_b] - ks[:n_b] * (times - origin - 7.0 / 6.0)
        C_closed = np.array([closed_form_log_C(ks[0], k) for k in ks[:n_b]])
        out["closed_form_error"] = float(np.max(np.abs(C_meas - C_closed) / np.maximum(1.0, np.abs(C_closed))))
        target = math.log(2.0) / (blens[-1] if blens else BLOCK_LENGTH)
        out["slope_target"] = target
        out["slope_relative_error"] = abs(fit.slope - target) / target
        if strict:
            checks["recursion"] = out["recursion_error"] <= tol.recursion_relative
            checks["closed_form"] = out["closed_form_error"] <= tol.recursion_relative
        if n_b >= 3:
            checks["slope"] = fit.slope >= (1.0 - tol.decay_slope_fraction) * target
    elif _is_parabolic(T):
        rec = np.array(recursion_log_C(n_b))
        out["recursion_error"] = float(np.max(np.abs(ls - rec) / np.maximum(1.0, np.abs(rec))))
        n = np.arange(1, n_b + 1)
        out["bound_gap"] = (-(7.0 / 4.0) * n * (n - 1) - ls).tolist()
        checks["recursion"] = out["recursion_error"] <= tol.recursion_relative
        checks["claim_bound"] = bool(np.all(ls <= -(7.0 / 4.0) * n * (n - 1) + 1e-9))
    elif T.kind == "Gaussian":
        checks["fit"] = fit.r2 >= tol.gaussian_r2 and fit.slope > 0
    else:
        n = np.arange(1, n_b + 1)
        checks["fit"] = fit.r2 >= tol.fit_r2 and fit.slope > 0
        checks["quadratic_lower_bound"] = bool(np.all(-ls[1:] >= fit.slope * n[1:] ** 2))

    if T.kind in HALF_CYLINDER or _is_parabolic(T):
        ts, lsm = _sampled_log_sup(T)
        jumps = np.diff(lsm) / np.maximum(1.0, np.abs(lsm[:-1]))
        out["max_increase"] = float(jumps.max())
        # the maximum principle only covers the mu = 0 and heat chains
        if T.kind in ("Harmonic", "Parabolic"):
            checks["monotone"] = bool(jumps.max() <= tol.monotone_relative)
    out["checks"] = checks
    out["passed"] = all(checks.values())
    out["fit"] = fit.to_dict()
    return out, fit


# ---------------------------------------------------------------------------
# Hoelder chains


def _require(T: Timeline, kinds, what: str):
    if T.kind not in kinds:
        raise WrongKindError(f"{what} applies to {kinds}, not {T.kind}")


def verify_holder(T: Timeline, alpha: float | None = None, pair_samples: int = 4000, seed: int = 0,
                  tol: Tolerances | None = None, scan: list | None = None) -> dict:
    """Pairwise estimate of ``|A - Id|_{C^{0,alpha}}`` per block against ``a^alpha (2b)^{1-alpha}``.

    ``a`` and ``b`` are the sampled sups of ``|grad A|`` and ``|A - Id|`` from
    a dense per-placement scan joined with the pair end points.
    """
    _require(T, ("PlisMiller",), "verify_holder")
    tol = tol or Tolerances()
    alpha = alpha if alpha is not None else T.meta["alpha"]
    ks = T.wavenumbers
    scan = scan or coefficient_scan(T, 10000, seed)
    rows = []
    for n in range(len(T.block_times) - 1):
        a0, a1 = T.block_times[n], T.block_times[n + 1]
        k = ks[n + 1]
        h = halton(pair_samples, 6, seed, 2000 + n)
        p = np.stack([TWO_PI * h[:, 0], TWO_PI * h[:, 1], a0 + (a1 - a0) * h[:, 2]])
        r = 10.0 ** (-3 + 4 * h[:, 3]) / k
        phi, cz = TWO_PI * h[:, 4], 2 * h[:, 5] - 1
        sz = np.sqrt(1 - cz * cz)
        d = r * np.stack([sz * np.cos(phi), sz * np.sin(phi), cz])
        q = p + d
        q[2] = np.clip(q[2], a0, a1)
        dist = np.linalg.norm(q - p, axis=0)
        keep = dist > 0
        bp = timeline_eval(T, *p)
        bq = timeline_eval(T, *q)
        diff = np.max(np.abs(bp.A - bq.A), axis=0)
        est = float(np.max(diff[keep] / dist[keep] ** alpha))
        mine = [r for r in scan if r["block"] == n + 1]
        grad = max([float(np.max(np.sqrt(b.Ax ** 2 + b.Ay ** 2 + b.At ** 2))) for b in (bp, bq)]
                   + [r["grad_norm_max"] for r in mine])
        dev = max([float(np.max(np.abs(b.A - np.array([[1.0], [0.0], [1.0]])))) for b in (bp, bq)]
                  + [r["dev_max"] for r in mine])
        bound = grad ** alpha * (2 * dev) ** (1 - alpha)
        rows.append({"block": n + 1, "k": k, "estimate": est, "grad": grad, "dev": dev, "bound": bound,
                     "passed": bool(est <= tol.holder_factor * bound)})
    est = np.array([r["estimate"] for r in rows])
    dev = np.array([r["dev"] for r in rows])
    uniform = float(est.max() / est.min())
    checks = {
        "claim_bound": all(r["passed"] for r in rows),
        "uniform": uniform <= tol.holder_uniform,
        "ellipticity_margin": bool(dev[0] <= 0.01),
        # sampled sups jitter by a fraction of a percent between neighbours
        "margin_decreasing": bool(np.all(np.diff(dev) <= MARGIN_SLACK * dev[:-1])),
    }
    return {"name": "holder", "alpha": alpha, "passed": all(checks.values()), "checks": checks,
            "global_estimate": float(est.max()), "uniform_ratio": uniform, "dev_first": float(dev[0]),
            "tolerance": {"factor": tol.holder_factor, "uniform": tol.holder_uniform, "margin": 0.01},
            "blocks": rows}


def verify_extension_zero(T: Timeline, probes: int = 256, seed: int = 0, tol: Tolerances | None = None) -> dict:
    """Log-magnitudes of ``u``, ``grad u``, ``A grad u`` and its derivative at the last block boundary."""
    _require(T, ("PlisMiller",), "verify_extension_zero")
    tol = tol or Tolerances()
    i = len(T.placements) - 1
    p = T.placements[i]
    h = halton(probes, 2, seed, 3000)
    b = T.evaluate_local(i, TWO_PI * h[:, 0], TWO_PI * h[:, 1], np.full(probes, p.duration))
    L = float(b.log_scale[0])
    k = b.kmax
    grad_u = np.sqrt(b.ux ** 2 + b.uy ** 2 + b.ut ** 2)
    f1, f2 = b.flux()
    A_norm = float(np.abs(b.A).max())
    dA = float(np.abs(np.concatenate([b.Ax, b.Ay, b.At])).max())
    log_u = T.log_sup_at(T.t_end)
    mags = {
        "u": log_u,
        "grad_u": L + math.log(float(grad_u.max())),
        "flux": L + math.log(float(np.hypot(f1, f2).max())),
        # derivative of the flux bounded through the mode structure
        "flux_derivative": log_u + math.log(4 * k * (dA + A_norm * k)),
    }
    # polynomial growth of |dA| towards the horizon
    scan = coefficient_scan(T, 400, seed)
    per_block: dict = {}
    for r in scan:
        per_block[r["block"]] = max(per_block.get(r["block"], 0.0), r["grad_max"])
    Tn = T.meta.get("T", T.t_end)
    gaps = np.array([Tn - T.block_times[n - 1] for n in sorted(per_block)])
    g = np.array([per_block[n] for n in sorted(per_block)])
    (c0, d), r2, _ = _linfit(np.stack([np.ones_like(gaps), -np.log(gaps)], 1), np.log(g))
    return {"name": "extension", "passed": all(v <= tol.extension_logmag for v in mags.values()),
            "logmags": mags, "tolerance": tol.extension_logmag,
            "growth_exponent": float(d), "growth_r2": float(r2), "horizon": Tn}


# ---------------------------------------------------------------------------
# Parabolic drift


def verify_drift_bounds(T: Timeline, samples: int = 1000, seed: int = 0, tol: Tolerances | None = None) -> dict:
    _require(T, ("Parabolic",), "verify_drift_bounds")
    tol = tol or Tolerances()
    per_block: dict = {}
    quiet = 0.0
    for i, p in enumerate(T.placements):
        h = halton(samples, 3, seed, 4000 + i)
        B1, B2 = p.seg.drift(TWO_PI * h[:, 0], TWO_PI * h[:, 1], p.duration * h[:, 2])
        m = float(np.max(np.maximum(np.abs(B1), np.abs(B2))))
        per_block[p.block] = max(per_block.get(p.block, 0.0), m)
        if p.offset_in_block == 0.0:
            quiet = max(quiet, m)
    rows = []
    for n, m in sorted(per_block.items()):
        env = drift_envelope(T.wavenumbers[n - 1], T.wavenumbers[n])
        rows.append({"block": n, "sup_B": m, "envelope": env, "passed": bool(m <= env)})
    # continuity at window edges inside each block
    edge_def = 0.0
    hh = halton(64, 2, seed, 5000)
    x, y = TWO_PI * hh[:, 0], TWO_PI * hh[:, 1]
    for p in T.placements:
        k = p.seg.k
        for e in (0.5, 1.5, 2.0, 3.0):
            tb = e / k - p.seg.tau0
            if JUNCTION_GAP < tb < p.duration - JUNCTION_GAP:
                lo = p.seg.drift(x, y, tb - JUNCTION_GAP)
                hi = p.seg.drift(x, y, tb + JUNCTION_GAP)
                edge_def = max(edge_def, float(np.max(np.abs(np.subtract(hi, lo)))))
    checks = {"envelope": all(r["passed"] for r in rows), "continuity": edge_def <= tol.drift_continuity,
              "quiet_start": quiet == 0.0}
    return {"name": "drift", "passed": all(checks.values()), "checks": checks, "blocks": rows,
            "sup_B": max(per_block.values()), "edge_defect": edge_def, "quiet_start_sup": quiet,
            "tolerance": tol.drift_continuity}


# ---------------------------------------------------------------------------
# Finite-difference hygiene


def _time_rate(seg) -> float:
    """Inverse time scale: ``k`` for harmonic carriers, ``k^2`` for heat carriers."""
    k = seg.kmax
    rate = k * k if getattr(seg, "kind", "") in ("Heat", "ParabolicAdd", "ParabolicRemove") else k
    return max(rate, 1.0 / seg.duration)


FD_PAIRS_T = (("ut", "u"), ("utt", "ut"))
FD_PAIRS_X = (("ux", "u"), ("uxx", "ux"))
FD_PAIRS_Y = (("uy", "u"), ("uyy", "uy"), ("uxy", "ux"))
# fourth-order central first derivative
STENCIL = ((2, -1.0 / 12), (1, 8.0 / 12), (-1, -8.0 / 12), (-2, 1.0 / 12))


def verify_fd_derivatives(T: Timeline, points_per_segment: int = 16, seed: int = 0, step: float = 1e-3,
                          tol: Tolerances | None = None, workers: int = 1) -> dict:
    """Central differences of evaluated values against every analytic derivative the checks consume.

    Spatial samples sit in the first period of the slowest carrier, where the
    arguments ``k x`` are small enough that rounding stays below the FD step.
    The five-point stencil keeps truncation far below the tolerance so the
    step can be large enough to swamp log-domain rounding.
    """
    tol = tol or Tolerances()
    parabolic = _is_parabolic(T)

    def one(i):
        p = T.placements[i]
        seg = p.seg
        k = seg.kmax
        rt = _time_rate(seg)
        hs, ht = step / k, step / rt
        h = halton(points_per_segment, 3, seed, 6000 + i)
        per = TWO_PI / _seg_kmin(seg)
        x, y = per * h[:, 0], per * h[:, 1]
        tau = 3 * ht + (p.duration - 6 * ht) * h[:, 2]
        c = T.evaluate_local(i, x, y, tau)
        L = c.log_scale
        errs = {}
        axes = [(FD_PAIRS_T, 2, ht, rt, "At"), (FD_PAIRS_X, 0, hs, k, "Ax"), (FD_PAIRS_Y, 1, hs, k, "Ay")]
        for plist, axis, hh, rate, aname in axes:
            shifted = []
            for m, wgt in STENCIL:
                d = [0.0, 0.0, 0.0]
                d[axis] = m * hh
                shifted.append((wgt, T.evaluate_local(i, x + d[0], y + d[1], tau + d[2], ref_log=L)))

            def deriv(name):
                return sum(wgt * getattr(b, name) for wgt, b in shifted) / hh

            for target, src in plist:
                if parabolic and target == "uxy":
                    continue
                ref = c.sup * _field_scale(target, k, rt)
                errs[f"{target}<-{src}"] = float(np.max(np.abs(getattr(c, target) - deriv(src)) / ref))
            if not parabolic:
                an = getattr(c, aname)
                floor = 1e-3 * np.abs(c.A).max() * rate
                errs[f"{aname}<-A"] = float(np.max(np.abs(an - deriv("A")) / np.maximum(np.abs(an), floor)))
        worst = max(errs.values())
        return {"index": i, "kind": seg.kind, "max": worst, "errors": errs,
                "passed": bool(worst <= tol.fd_relative)}

    rows = _pmap(one, range(len(T.placements)), workers)
    return {"name": "fd", "passed": all(r["passed"] for r in rows), "max": max(r["max"] for r in rows),
            "tolerance": tol.fd_relative, "segments": rows}


def fd_residual(T: Timeline, i: int, x, y, tau, hs: float, ht: float, ref_log) -> np.ndarray:
    """Second-order finite-difference residual in the bundle's scaled units.

    Elliptic kinds use the flux form ``D_tt u + D_x F1 + D_y F2 + mu u`` with
    ``F = A grad_h u``; parabolic uses ``D_t u - Lap_h u - B grad_h u``.
    """

    def ev(dx=0.0, dy=0.0, dt=0.0):
        return T.evaluate_local(i, x + dx, y + dy, tau + dt, ref_log=ref_log)

    c = ev()
    U = lambda dx=0.0, dy=0.0, dt=0.0: ev(dx, dy, dt).u  # noqa: E731
    if isinstance(c, ParabolicBundle):
        ut = (U(dt=ht) - U(dt=-ht)) / (2 * ht)
        ex, wx, ny, sy = U(dx=hs), U(dx=-hs), U(dy=hs), U(dy=-hs)
        lap = (ex - 2 * c.u + wx + ny - 2 * c.u + sy) / hs ** 2
        gx, gy = (ex - wx) / (2 * hs), (ny - sy) / (2 * hs)
        return ut - lap - c.B1 * gx - c.B2 * gy
    utt = (U(dt=ht) - 2 * c.u + U(dt=-ht)) / ht ** 2
    u0 = c.u

    def flux(sx, sy_):
        b = ev(sx, sy_)
        gx = (U(sx + hs, sy_) - U(sx - hs, sy_)) / (2 * hs)
        gy = (U(sx, sy_ + hs) - U(sx, sy_ - hs)) / (2 * hs)
        return b.A[0] * gx + b.A[1] * gy, b.A[1] * gx + b.A[2] * gy

    fe, fw = flux(hs, 0.0)[0], flux(-hs, 0.0)[0]
    fn, fs = flux(0.0, hs)[1], flux(0.0, -hs)[1]
    return utt + (fe - fw) / (2 * hs) + (fn - fs) / (2 * hs) + c.mu * u0


def verify_fd_convergence(T: Timeline, points: int = 100, seed: int = 0, step: float = 0.05,
                          tol: Tolerances | None = None) -> dict:
    """RMS of the FD residual at ``h`` and ``h/2``; second order means a ratio near 4."""
    tol = tol or Tolerances()
    h = halton(points, 4, seed, 7000)
    idx = np.minimum((h[:, 0] * len(T.placements)).astype(int), len(T.placements) - 1)
    r1, r2 = np.empty(points), np.empty(points)
    for i in np.unique(idx):
        m = idx == i
        p = T.placements[i]
        seg = p.seg
        hs, ht = step / seg.kmax, step / _time_rate(seg)
        per = TWO_PI / _seg_kmin(seg)
        x, y = per * h[m, 1], per * h[m, 2]
        tau = 2 * ht + (p.duration - 4 * ht) * h[m, 3]
        c = T.evaluate_local(i, x, y, tau)
        norm = c.sup * (1.0 + seg.kmax ** 2)
        r1[m] = np.abs(fd_residual(T, i, x, y, tau, hs, ht, c.log_scale)) / norm
        r2[m] = np.abs(fd_residual(T, i, x, y, tau, hs / 2, ht / 2, c.log_scale)) / norm
    rms1, rms2 = float(np.sqrt(np.mean(r1 ** 2))), float(np.sqrt(np.mean(r2 ** 2)))
    ratio = rms1 / rms2
    pointwise = r1 / np.where(r2 > 0, r2, np.nan)
    inside = float(np.mean((pointwise >= tol.fd_ratio_low) & (pointwise <= tol.fd_ratio_high)))
    return {"name": "fd_order", "passed": bool(tol.fd_ratio_low <= ratio <= tol.fd_ratio_high),
            "ratio": ratio, "rms_h": rms1, "rms_h2": rms2, "points": points,
            "pointwise_fraction_in_range": inside,
            "tolerance": [tol.fd_ratio_low, tol.fd_ratio_high]}


# ---------------------------------------------------------------------------
# Suites and reports

SUITES = ("residual", "ellipticity", "c1", "junctions", "decay", "holder", "extension", "drift",
          "fd", "fd_order")


def applicable_suites(T: Timeline) -> tuple[str, ...]:
    if _is_parabolic(T):
        return ("residual", "junctions", "decay", "drift", "fd", "fd_order")
    base = ("residual", "ellipticity", "c1", "junctions", "decay", "fd", "fd_order")
    if T.kind == "PlisMiller":
        return base + ("holder", "extension")
    return base


@dataclass
class VerificationReport:
    timeline: dict
    seed: int
    tolerances: dict
    samples: dict
    checks: dict
    skipped: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    decay_table: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def to_json(self) -> dict:
        return clean({"format": REPORT_FORMAT, "version": REPORT_VERSION, "passed": self.passed,
                      **asdict(self)})

    def summary_lines(self) -> list[str]:
        lines = [f"timeline {self.timeline['kind']}: {self.timeline['segments']} segments, "
                 f"t in [{self.timeline['t_begin']:.6g}, {self.timeline['t_end']:.6g}]"]
        for name, c in self.checks.items():
            lines.append(f"{'PASS' if c['passed'] else 'FAIL'} {name}: {_headline(c)}")
        for name, why in self.skipped.items():
            lines.append(f"SKIP {name}: {why}")
        return lines


def _headline(c: dict) -> str:
    for key in ("max", "ratio", "slope", "global_estimate", "sup_B", "lam_min", "grad_max", "max_u_defect"):
        if key in c:
            return f"{key}={c[key]:.6g} tolerance={c.get('tolerance')}"
    return f"tolerance={c.get('tolerance')}"


def timeline_summary(T: Timeline) -> dict:
    return {"kind": T.kind, "build_args": T.build_args, "segments": len(T.placements),
            "blocks": len(T.block_times) - 1, "t_begin": T.t_begin, "t_end": T.t_end,
            "mode": T.mode, "wavenumbers": list(map(float, T.wavenumbers)),
            "log_amplitudes": [a.logmag for a in T.amplitudes]}


def run_suite(T: Timeline, suites=("all",), seed: int = 0, tol: Tolerances | None = None,
              samples: SampleCounts | None = None, workers: int = 1, config: dict | None = None
              ) -> VerificationReport:
    tol = tol or Tolerances()
    samples = samples or SampleCounts()
    ok = applicable_suites(T)
    wanted = list(ok) if "all" in suites else list(suites)
    unknown = set(wanted) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites: {sorted(unknown)}")
    checks, skipped = {}, {}
    scan = None
    table = []
    for name in wanted:
        if name not in ok:
            skipped[name] = f"not applicable to {T.kind}"
            continue
        if name == "residual":
            checks[name] = verify_residual(T, samples.residual, seed, tol, workers)
        elif name in ("ellipticity", "c1"):
            scan = scan or coefficient_scan(T, samples.ellipticity, seed, workers)
            fn = verify_ellipticity if name == "ellipticity" else verify_c1
            checks[name] = fn(T, scan=scan)
        elif name == "junctions":
            checks[name] = verify_junctions(T, samples.junction_probes, seed, tol)
        elif name == "decay":
            checks[name], fit = verify_decay(T, tol)
            table = [[t, v] for t, v in zip(fit.times, fit.log_sup)]
        elif name == "holder":
            scan = scan or coefficient_scan(T, samples.ellipticity, seed, workers)
            checks[name] = verify_holder(T, None, samples.holder_pairs, seed, tol, scan=scan)
        elif name == "extension":
            checks[name] = verify_extension_zero(T, seed=seed, tol=tol)
        elif name == "drift":
            checks[name] = verify_drift_bounds(T, samples.drift, seed, tol)
        elif name == "fd":
            checks[name] = verify_fd_derivatives(T, samples.fd_points, seed, tol=tol, workers=workers)
        elif name == "fd_order":
            checks[name] = verify_fd_convergence(T, samples.fd_order_points, seed, tol=tol)
    return VerificationReport(timeline_summary(T), seed, tol.to_dict(), asdict(samples), clean(checks),
                              skipped, clean(config or {}), clean(table))


# ---------------------------------------------------------------------------
# CSV


def fmt(v: float) -> str:
    """Round-trip decimal text for a native float."""
    return format(float(v), ".17g")


def write_decay_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "logmag_sup"])
        for t, v in rows:
            w.writerow([fmt(t), repr(float(v))])
