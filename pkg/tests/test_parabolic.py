import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastdecay.assembly import timeline_eval
from fastdecay.parabolic import (
    PHASES,
    drift_envelope,
    parabolic_block,
    parabolic_chain,
    parabolic_residual,
    recursion_log_C,
)
from fastdecay.planarlemma import ParameterDomainError
from fastdecay.scalarcore import SQRT_PI

TWO_PI = 2 * math.pi
rng = np.random.default_rng(11)


@pytest.fixture(scope="module")
def chain():
    return parabolic_chain(12)


def test_block_length():
    phases, _ = parabolic_block(1, 2)
    assert sum(p.duration for p in phases) == pytest.approx(3.5, rel=1e-15)
    assert [p.kind for p in phases] == [name for name, _, _ in PHASES]
    phases, _ = parabolic_block(4, 9, t1=1.0)
    assert phases[-1].t_a + phases[-1].duration == pytest.approx(1.0 + 3.5 / 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(0, 10))
def test_block_residual(k, gap):
    phases, _ = parabolic_block(k, k + gap)
    for p in phases:
        n = 100
        b = p.evaluate(TWO_PI * rng.random(n), TWO_PI * rng.random(n), p.duration * rng.random(n))
        assert b.relative_residual().max() <= 1e-9


def test_drift_free_first_window():
    phases, _ = parabolic_block(3, 4)
    first = phases[0]
    assert first.duration == pytest.approx(1 / 6)
    B1, B2 = first.drift(TWO_PI * rng.random(50), TWO_PI * rng.random(50), first.duration * rng.random(50))
    assert np.all(B1 == 0) and np.all(B2 == 0)


def test_drift_envelope_for_first_block():
    assert drift_envelope(1, 2) == pytest.approx(SQRT_PI * math.exp(9), rel=1e-15)
    phases, _ = parabolic_block(1, 2)
    sup = 0.0
    for p in phases:
        B1, B2 = p.drift(TWO_PI * rng.random(2000), TWO_PI * rng.random(2000), p.duration * rng.random(2000))
        sup = max(sup, np.abs(B1).max(), np.abs(B2).max())
    assert 0 < sup <= drift_envelope(1, 2)


def test_phases_glue_to_second_order():
    phases, _ = parabolic_block(5, 7)
    x, y = TWO_PI * rng.random(32), TWO_PI * rng.random(32)
    for p, q in zip(phases, phases[1:]):
        L = p.evaluate(x, y, np.full(32, p.duration))
        R = q.evaluate(x, y, np.zeros(32), ref_log=L.log_scale)
        for name in ("u", "ut", "utt", "ux", "uy", "uxx", "uyy", "B1", "B2"):
            scale = L.sup * 7.0 ** 4
            assert np.all(np.abs(getattr(L, name) - getattr(R, name)) <= 1e-12 * scale)


def test_time_derivatives_against_differences():
    phases, _ = parabolic_block(2, 3)
    p = phases[1]
    x, y = TWO_PI * rng.random(20), TWO_PI * rng.random(20)
    tau = 0.1 * p.duration + 0.8 * p.duration * rng.random(20)
    h = 1e-5
    c = p.evaluate(x, y, tau)
    hi = p.evaluate(x, y, tau + h, ref_log=c.log_scale)
    lo = p.evaluate(x, y, tau - h, ref_log=c.log_scale)
    assert np.allclose((hi.u - lo.u) / (2 * h), c.ut, rtol=0, atol=1e-7 * c.sup.max() * 9)
    assert np.allclose((hi.ut - lo.ut) / (2 * h), c.utt, rtol=0, atol=1e-6 * c.sup.max() * 81)


def test_block_domain():
    with pytest.raises(ParameterDomainError):
        parabolic_block(3, 14)
    with pytest.raises(ParameterDomainError):
        parabolic_block(3, 2)
    with pytest.raises(ParameterDomainError):
        parabolic_chain(0)


def test_chain_layout(chain):
    starts = [p.t_start for p in chain.placements]
    assert starts == sorted(starts)
    assert chain.block_times[1] == pytest.approx(3.5)
    assert chain.block_times[2] == pytest.approx(3.5 + 1.75)
    assert [p.swap for p in chain.placements[::5]] == [n % 2 == 0 for n in range(1, 13)]


def test_chain_recursion_and_claim_bound(chain):
    rec = recursion_log_C(13)
    got = [a.logmag - k * k * t for a, k, t in zip(chain.amplitudes, chain.wavenumbers, chain.block_times)]
    assert np.allclose(got, rec, rtol=1e-12, atol=1e-12)
    n = np.arange(1, 14)
    assert np.all(np.array(rec) <= -1.75 * n * (n - 1))


def test_chain_log_sup_matches_C(chain):
    rec = recursion_log_C(13)
    for t, c in zip(chain.block_times, rec):
        assert chain.log_sup_at(t) == pytest.approx(c, rel=1e-12, abs=1e-12)


def test_chain_residual_and_parity(chain):
    t = chain.t_end * rng.random(500)
    r = parabolic_residual(chain, TWO_PI * rng.random(500), TWO_PI * rng.random(500), t)
    assert r.max() <= 1e-9
    i = 5  # first phase of block 2
    p = chain.placements[i]
    b = chain.evaluate_local(i, np.array([0.4]), np.array([1.7]), np.array([0.01]))
    raw = p.seg.evaluate(np.array([1.7]), np.array([0.4]), np.array([0.01]))
    assert b.u == raw.u and b.ux == raw.uy and b.B1 == raw.B2


def test_chain_drift_continuous_across_blocks(chain):
    x, y = TWO_PI * rng.random(16), TWO_PI * rng.random(16)
    for t in chain.block_times[1:-1]:
        L = timeline_eval(chain, x, y, np.full(16, t), side="left")
        R = timeline_eval(chain, x, y, np.full(16, t), side="right")
        assert np.abs(L.B1 - R.B1).max() == 0 and np.abs(L.B2 - R.B2).max() == 0
