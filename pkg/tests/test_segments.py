import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from fastdecay.planarlemma import ParameterDomainError
from fastdecay.scalarcore import SQRT_PI, LogScalar
from fastdecay.segments import (
    IncompatibleFieldError,
    ModeSpec,
    OutOfIntervalError,
    SymmetrizeHead,
    WaitSegment,
    accelerate_segment,
    change_coeff_segment,
    perturb_add_segment,
    perturb_remove_segment,
    pml_segment,
    remove_constant_segment,
    segment_eval,
    symmetrize_head_segment,
)

TWO_PI = 2 * math.pi
rng = np.random.default_rng(7)


def _points(seg, n=400, margin=1e-6):
    x, y = TWO_PI * rng.random(n), TWO_PI * rng.random(n)
    tau = margin + (seg.duration - 2 * margin) * rng.random(n)
    return x, y, tau


FACTORIES = {
    "change_coeff": lambda: change_coeff_segment(1.0, 1 / 9, 16.0, 0.0, 1 / 3 - 0.01),
    "perturb_add": lambda: perturb_add_segment(16.0, 32.0, 1.0, 1 / 9, 16.0 ** -4),
    "perturb_remove": lambda: perturb_remove_segment(16.0, 32.0, 1.0, 1 / 9, 16.0 ** -4),
    "pml": lambda: pml_segment(16.0, 17.0, 1 / 16),
    "remove_constant": lambda: remove_constant_segment(32.0, 1.0, 1 / 9, -4 * math.log(16.0), strict=False),
    "accelerate": lambda: accelerate_segment(32.0, 1.0, 1 / 9, 1.0),
    "head": lambda: SymmetrizeHead(1.0, 64.0),
}


def fd_operator(seg, x, y, tau, mu=0.0, h=1e-3):
    """``u_tt + div(A grad u) + mu u`` from evaluated values of ``u`` and ``A`` only."""
    k = seg.kmax
    hs, ht = h / k, h / k
    L = seg.evaluate(x, y, tau).log_scale

    def u(dx=0.0, dy=0.0, dt=0.0):
        return seg.evaluate(x + dx, y + dy, np.clip(tau + dt, 0, seg.duration), ref_log=L).u

    def A(dx=0.0, dy=0.0):
        return seg.evaluate(x + dx, y + dy, tau, ref_log=L).A

    def flux(dx, dy):
        gx = (u(dx + hs, dy) - u(dx - hs, dy)) / (2 * hs)
        gy = (u(dx, dy + hs) - u(dx, dy - hs)) / (2 * hs)
        a = A(dx, dy)
        return a[0] * gx + a[1] * gy, a[1] * gx + a[2] * gy

    u0 = u()
    utt = (u(dt=ht) - 2 * u0 + u(dt=-ht)) / ht ** 2
    div = (flux(hs, 0)[0] - flux(-hs, 0)[0]) / (2 * hs) + (flux(0, hs)[1] - flux(0, -hs)[1]) / (2 * hs)
    b = seg.evaluate(x, y, tau, ref_log=L)
    return (utt + div + mu * u0) / (b.sup * (1 + k * k))


@pytest.mark.parametrize("name", sorted(FACTORIES))
def test_analytic_residual_vanishes(name):
    seg = FACTORIES[name]()
    b = seg.evaluate(*_points(seg))
    lim = 1e-8 if name == "head" else 1e-9
    assert b.relative_residual().max() <= lim


@pytest.mark.parametrize("name", sorted(FACTORIES))
def test_finite_difference_operator_vanishes(name):
    seg = FACTORIES[name]()
    x, y, tau = _points(seg, 60, margin=1e-2 * seg.duration)
    # the PML windows are 1/k wide, so their steep edges need a finer step
    h = 5e-5 if name == "pml" else 1e-3
    r = fd_operator(seg, x, y, tau, mu=getattr(seg, "mu", 0.0), h=h)
    assert np.abs(r).max() <= 1e-5


@pytest.mark.parametrize("name", sorted(FACTORIES))
def test_coefficient_is_diagonal_constant_at_both_ends(name):
    seg = FACTORIES[name]()
    if name == "head":
        pytest.skip("the head starts at the mirror plane")
    x, y = TWO_PI * rng.random(20), TWO_PI * rng.random(20)
    for tau in (0.0, seg.duration):
        b = seg.evaluate(x, y, np.full(20, tau))
        assert np.all(b.A[1] == 0.0)
        assert np.ptp(b.A[0]) == 0.0 and np.ptp(b.A[2]) == 0.0
        assert np.all(b.Ax == 0) and np.all(b.Ay == 0)
        assert np.abs(b.At).max() <= 1e-12


def test_wait_segment_closed_form():
    seg = WaitSegment([ModeSpec(0, 3.0, 3.0, LogScalar.from_log(2.0, -1))], (1.0, 1.0), 0.5, 0.0)
    x = np.array([0.1, 1.0])
    tau = np.array([0.0, 0.4])
    b = seg.evaluate(x, x, tau)
    want = -math.e ** 2 * np.cos(3 * x) * np.exp(-3 * tau)
    assert np.allclose(b.u * np.exp(b.log_scale), want, rtol=1e-14)
    assert seg.declared.Lambda == 1 and seg.declared.C1bound == 0
    assert b.relative_residual().max() == pytest.approx(0.0, abs=1e-16)


def test_wait_segment_rate_must_match():
    with pytest.raises(IncompatibleFieldError):
        WaitSegment([ModeSpec(1, 9.0, 9.0, LogScalar.one())], (1.0, 1 / 9), 1.0)
    with pytest.raises(ParameterDomainError):
        WaitSegment([ModeSpec(1, 9.0, 3.0, LogScalar.one())], (1.0, 1 / 9), 0.0)


def test_change_coeff_declared_class_and_sup():
    seg = FACTORIES["change_coeff"]()
    assert seg.declared.C1bound == pytest.approx(10 * SQRT_PI / seg.duration)
    tau = np.linspace(0, seg.duration, 2001)
    c, cdot = seg.c_profile(tau)
    assert c[0] == 1.0 and c[-1] == pytest.approx(1 / 9)
    assert np.abs(cdot).max() <= seg.declared.C1bound


@settings(max_examples=30, deadline=None)
@given(st.integers(8, 64), st.data(), st.sampled_from(["add", "remove"]))
def test_mix_phase_residual_over_admissible_parameters(k, data, variant):
    kp = data.draw(st.integers(k, 2 * k))
    lo, hi = math.log(float(k) ** -4), math.log(float(kp) ** -3)
    eps = math.exp(data.draw(st.floats(lo, hi)))
    make = perturb_add_segment if variant == "add" else perturb_remove_segment
    seg = make(float(k), float(kp), 1.0, 1 / 9, eps)
    b = seg.evaluate(*_points(seg, 200))
    assert b.relative_residual().max() <= 1e-9


def test_mix_phase_moves_the_second_mode():
    add = FACTORIES["perturb_add"]()
    start, end = add.mode_amplitudes(0.0), add.mode_amplitudes(add.duration)
    eps = 16.0 ** -4
    assert start[1].is_zero
    assert end[1].logmag == pytest.approx(math.log(eps) - add.rb * add.duration, rel=1e-14)
    rem = FACTORIES["perturb_remove"]()
    assert rem.mode_amplitudes(0.0)[0].logmag == pytest.approx(math.log(eps), rel=1e-15)
    assert rem.mode_amplitudes(rem.duration)[0].is_zero


def test_pml_transfers_mode_with_exponential_weights():
    seg = FACTORIES["pml"]()
    w = 1 / 16
    assert seg.duration == pytest.approx(2 * w)
    first, last = seg.mode_amplitudes(0.0), seg.mode_amplitudes(seg.duration)
    assert first[0].logmag == 0.0 and first[1].is_zero
    assert last[0].is_zero
    assert last[1].logmag == pytest.approx(-17.0 * 2 * w, abs=1e-13)


@pytest.mark.parametrize("args", [(16.0, 16.0, 0.1), (16.0, 40.0, 0.1), (16.0, 20.0, 0.5), (16.0, 17.0, 0.01)])
def test_pml_domain(args):
    with pytest.raises(ParameterDomainError):
        pml_segment(*args)


def test_remove_constant_removes_the_factor():
    F = -4 * math.log(16.0)
    seg = remove_constant_segment(32.0, 1.0, 1 / 9, F, strict=False, amp=LogScalar.one())
    start, end = seg.mode_amplitudes(0.0)[1], seg.mode_amplitudes(seg.duration)[1]
    assert start.logmag == pytest.approx(F, abs=1e-15)
    assert end.logmag == pytest.approx(-seg.rb * seg.duration, abs=1e-12)
    assert seg.width == pytest.approx(math.sqrt(-F) / 32.0 ** (1 / 3))
    with pytest.raises(ParameterDomainError):
        remove_constant_segment(32.0, 1.0, 1 / 9, F)
    with pytest.raises(ParameterDomainError):
        remove_constant_segment(32.0, 1.0, 1 / 9, 1.0, strict=False)


def test_accelerate_reaches_unit_rate():
    seg = FACTORIES["accelerate"]()
    bt, _ = seg.btilde(np.array([0.0, seg.duration]))
    assert bt[0] == pytest.approx(1 / 9, rel=1e-14)
    assert bt[1] == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ParameterDomainError):
        accelerate_segment(32.0, 1.0, 1.0, 1 / 9)


@pytest.mark.parametrize("bad", [(0.05, 1.0), (1.0, 12.0)])
def test_diagonal_range_is_enforced(bad):
    with pytest.raises(ParameterDomainError):
        change_coeff_segment(*bad, 16.0, 0.0, 0.3)


@pytest.mark.parametrize("eps", [1e-9, 0.5, 1.5])
def test_mix_eps_window(eps):
    with pytest.raises(ParameterDomainError):
        perturb_add_segment(16.0, 32.0, 1.0, 1 / 9, eps)


def test_out_of_interval():
    seg = FACTORIES["change_coeff"]()
    with pytest.raises(OutOfIntervalError):
        seg.evaluate(0.0, 0.0, seg.duration + 1e-3)


@given(st.floats(0, TWO_PI), st.floats(0, TWO_PI), st.floats(0.01, 0.99))
def test_swapped_bundle_keeps_residual(x, y, frac):
    seg = FACTORIES["perturb_add"]()
    b = seg.evaluate(x, y, frac * seg.duration)
    assert b.swapped().residual() == pytest.approx(b.residual(), abs=1e-12 * b.sup[0] * seg.kmax ** 2)
    assert b.time_reversed().ut == -b.ut


def test_segment_eval_uses_global_time():
    seg = change_coeff_segment(1.0, 1 / 9, 16.0, 5.0, 0.3)
    out = segment_eval(seg, 0.2, 0.3, 5.1, what=("u", "A"))
    direct = seg.evaluate(0.2, 0.3, 0.1)
    assert set(out) == {"log_scale", "u", "A"}
    assert np.array_equal(out["u"], direct.u)


# symmetrisation head


@pytest.mark.parametrize("mu,k", [(1.0, 64.0), (4.0, 256.0), (0.5, 4096.0)])
def test_head_time_span_formula(mu, k):
    head, t0 = symmetrize_head_segment(mu, k, 0.01)
    want = SQRT_PI / 10 * (1 + mu / (2 * k * k))
    assert head.t2 - head.t1 == pytest.approx(want, rel=1e-15)
    assert head.t2 - head.t1 <= 0.4
    assert t0 > head.t2


@pytest.mark.parametrize("mu,k", [(1.0, 64.0), (4.0, 256.0), (1.0, 4096.0)])
def test_head_is_flat_at_mirror_plane(mu, k):
    head = SymmetrizeHead(mu, k)
    m = head.modes(np.array([0.0]))[0]
    assert abs(m.p1[0]) <= 1e-8 * k * abs(m.p0[0])


@pytest.mark.parametrize("mu,k", [(1.0, 64.0), (1.0, 4096.0)])
def test_head_ends_on_unit_exponential(mu, k):
    head = SymmetrizeHead(mu, k)
    m = head.modes(np.array([head.t0]))[0]
    f0 = math.exp(m.ell[0])
    assert f0 * m.p0[0] == pytest.approx(1.0, rel=1e-14)
    assert f0 * m.p1[0] == pytest.approx(-k, rel=1e-14)
    assert f0 * m.p2[0] == pytest.approx(k * k, rel=1e-10)


def test_head_against_scipy_oracle():
    mu, k = 1.0, 64.0
    head = SymmetrizeHead(mu, k)
    ref = solve_ivp(lambda t, y: [y[1], (k * k * head.a_of(t) - mu) * y[0]], (head.t2, head.sigma - 0.1), [1.0, -k],
                    method="DOP853", rtol=1e-13, atol=1e-300, dense_output=True)
    for t in np.linspace(head.t1, head.t2, 9):
        lo, yv, _ = head.sol.eval(t)
        want = ref.sol(t)[0]
        assert math.exp(lo) * yv[0] == pytest.approx(want, rel=1e-8)
    # the oscillatory continuation matches the ODE below t1
    for s in np.linspace(0.0, head.t1 - head.sigma, 5):
        m = head.modes(np.array([s]))[0]
        t = s + head.sigma
        assert math.exp(m.ell[0]) * m.p0[0] == pytest.approx(ref.sol(t)[0], rel=1e-7, abs=1e-10)


def test_head_coefficient_derivative_bound():
    head = SymmetrizeHead(1.0, 4096.0)
    t = np.linspace(0, head.t0, 20001)
    a, ad = head.a_derivs(t)
    assert np.abs(ad).max() <= 10.0
    assert a.min() == pytest.approx(1.0 / (2 * 4096.0 ** 2), rel=1e-12)
    assert a.max() == pytest.approx(1 + 1.0 / 4096.0 ** 2, rel=1e-15)


@pytest.mark.parametrize("mu,k", [(0.0, 64.0), (1.0, 5.0)])
def test_head_domain(mu, k):
    with pytest.raises(ParameterDomainError):
        SymmetrizeHead(mu, k)
