import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from helpers import EXAMPLE, random_symmetric_below_threshold
from quditkd import der_map as dm
from quditkd.errors import PrecisionLoss, PreconditionViolation
from quditkd.pauli_channel import (
    disturbance,
    from_depolarizing,
    from_isotropic,
    make_distribution,
    perfect_channel,
    symmetrize,
    to_isotropic,
    IsotropicParams,
)

# frozen from the loop oracle (oracles.dstep) on the d=2 example
DSTEP_EXAMPLE = [[0.6879194630872483, 0.28187919463087246], [0.0302013422818792, 0.0]]


def test_dstep_example(example_dist):
    out, keep = dm.dstep(example_dist)
    assert keep == pytest.approx(0.745, abs=1e-15)
    np.testing.assert_allclose(out.p, DSTEP_EXAMPLE, atol=1e-15)
    ref, ref_keep = oracles.dstep(EXAMPLE)
    np.testing.assert_allclose(out.p, ref, atol=1e-15)
    assert keep == pytest.approx(ref_keep, abs=1e-15)


def test_dstep_fixed_points():
    uniform = make_distribution(3, np.full((3, 3), 1 / 9))
    out, keep = dm.dstep(uniform)
    assert out.allclose(uniform) and keep == pytest.approx(1 / 3)
    out, keep = dm.dstep(perfect_channel(5))
    assert out.allclose(perfect_channel(5)) and keep == 1.0


@pytest.mark.parametrize("d", [2, 3])
def test_dstep_brute_force_oracle(d):
    rng = np.random.default_rng(d)
    for _ in range(50):
        p = rng.dirichlet(np.ones(d * d)).reshape(d, d)
        dist = make_distribution(d, p)
        ref, _ = oracles.dstep(dist.p.tolist())
        assert np.max(np.abs(dm.dstep(dist)[0].p - np.array(ref))) < 1e-14


def test_closed_form_examples(example_dist):
    assert dm.dstep_closed_form(example_dist, 0) is example_dist
    np.testing.assert_allclose(dm.dstep_closed_form(example_dist, 1).p, dm.dstep(example_dist)[0].p, atol=1e-12)
    rng = np.random.default_rng(3)
    dist = random_symmetric_below_threshold(3, rng)
    np.testing.assert_allclose(dm.dstep_closed_form(dist, 3).p, dm.iterate_dstep(dist, 3)[0].p, atol=1e-10)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_closed_form_against_cmath_oracle(d):
    rng = np.random.default_rng(30 + d)
    for _ in range(10):
        dist = make_distribution(d, rng.dirichlet(np.ones(d * d)).reshape(d, d))
        for k in range(4):
            ref = np.array(oracles.closed_form(dist.p.tolist(), k))
            np.testing.assert_allclose(dm.dstep_closed_form(dist, k).p, ref, atol=1e-12)


def test_closed_form_flags_precision_loss():
    # row masses differ by a relative 1e-15: (1 - 1e-15)**(2**40) is O(1) but
    # every input rounding error is blown up by 2**40
    delta = 5e-16
    dist = make_distribution(2, [[0.5 + delta, 0.0], [0.5 - delta, 0.0]])
    with pytest.raises(PrecisionLoss):
        dm.dstep_closed_form(dist, 40)
    # the iterated map still works
    dm.iterate_dstep(dist, 40)


def test_closed_form_underflow_is_not_precision_loss():
    p = np.array([[0.25, 0.25], [0.25, 0.25]])
    p[0] += [1e-9, -1e-9]
    dist = make_distribution(2, p)
    np.testing.assert_allclose(dm.dstep_closed_form(dist, 40).p, dm.iterate_dstep(dist, 40)[0].p, atol=1e-12)


def test_ac_table_examples(example_dist):
    table = dm.ac_table(perfect_channel(3))
    np.testing.assert_allclose(table.A[0], 1)
    np.testing.assert_allclose(table.A[1:], 0)
    np.testing.assert_allclose(table.C, [1, 0, 0])
    table = dm.ac_table(example_dist)
    assert table.A[0, 1].real == pytest.approx(0.55 / 0.85, abs=1e-12)
    assert table.C[1] == pytest.approx(0.15 / 0.85, abs=1e-12)
    table = dm.ac_table(make_distribution(3, np.full((3, 3), 1 / 9)))
    np.testing.assert_allclose(table.A[:, 1:], 0, atol=1e-15)
    np.testing.assert_allclose(table.C, 1)


@pytest.mark.parametrize("d", [2, 3, 5, 7])
def test_ac_table_invariants(d):
    rng = np.random.default_rng(40 + d)
    for _ in range(100):
        table = dm.ac_table(random_symmetric_below_threshold(d, rng))
        assert table.C[0] == pytest.approx(1.0)
        assert np.all((table.C[1:] >= 0) & (table.C[1:] < 1))
        assert np.all(np.abs(table.A) <= table.C[:, None] + 1e-12)


def test_diagnostics_examples(example_dist):
    evo = dm.der_diagnostics(example_dist, 0)
    np.testing.assert_allclose(evo.q, [0.85, 0.15], atol=1e-15)
    evo = dm.der_diagnostics(example_dist, 1)
    np.testing.assert_allclose(evo.q, [0.7181208053691275, 0.28187919463087246], atol=1e-12)
    for k in (0, 3, 10):
        evo = dm.der_diagnostics(perfect_channel(3), k)
        np.testing.assert_allclose(evo.q, [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(evo.xi, [2, -1, -1], atol=1e-12)
        assert evo.chi == 0.0


@pytest.mark.parametrize("d", [2, 3, 5])
def test_diagnostics_phase_marginal_identity(d):
    rng = np.random.default_rng(50 + d)
    for _ in range(30):
        dist = random_symmetric_below_threshold(d, rng)
        for k in (0, 1, 3, 5):
            evo = dm.der_diagnostics(dist, k)
            assert abs(evo.q.sum() - 1) < 1e-12
            np.testing.assert_allclose(evo.q, 1 / d + evo.xi / (d * (1 + evo.chi)), atol=1e-9)
            assert not evo.xi_complex


def test_survival_is_product_of_keeps(example_dist):
    evo = dm.der_diagnostics(example_dist, 2)
    first, keep1 = dm.dstep(example_dist)
    _, keep2 = dm.dstep(first)
    assert evo.survival == pytest.approx(keep1 * keep2)


def test_q0_dominance_examples(example_dist):
    for k in range(4):
        assert dm.check_observation1(example_dist, k).holds
    assert dm.check_observation1(from_depolarizing(3, 0.3), 2).holds
    with pytest.raises(PreconditionViolation):
        dm.check_observation1(make_distribution(2, [[0.7, 0.2], [0.1, 0]]), 1)
    with pytest.raises(PreconditionViolation):
        dm.check_observation1(from_depolarizing(2, 0.45), 1)


def test_q0_dominance_d5_at_fixed_disturbance():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        s = symmetrize(make_distribution(5, rng.dirichlet(np.ones(25)).reshape(5, 5)))
        if disturbance(s) < 0.35:
            continue
        t = 0.35 / disturbance(s)
        p = t * s.p
        p[0, 0] += 1 - t
        dist = make_distribution(5, p, require_symmetry=True)
        assert dm.check_observation1(dist, 4).holds


@pytest.mark.parametrize("d", [2, 3, 5])
def test_monotone_convergence(d):
    rng = np.random.default_rng(60 + d)
    checked = 0
    for _ in range(200):
        dist = random_symmetric_below_threshold(d, rng)
        if disturbance(dist) == 0:
            continue
        assert disturbance(dm.iterate_dstep(dist, 5)[0]) < disturbance(dist)
        # q_0 - 1/d decays like max_l |A(0, l)|**(2**k); the k = 10 check is only
        # meaningful when row 0 carries some phase noise
        slack = 1.0 - np.abs(dm.ac_table(dist).A[0, 1:]).max()
        if slack < 0.01:
            continue
        q10 = dm.iterate_dstep(dist, 10)[0].phase_marginals()
        assert abs(q10[0] - 1 / d) < 0.05
        checked += 1
    assert checked > 50


def test_phase_marginal_need_not_approach_uniform():
    # all errors on (1, 1): DER cancels the phases pairwise and q_0 -> 1
    dist = make_distribution(2, [[0.9, 0.0], [0.0, 0.1]], require_symmetry=True)
    q = dm.iterate_dstep(dist, 10)[0].phase_marginals()
    assert q[0] > 0.999


def test_disturbance_is_round_zero_dit_flip_rate(example_dist):
    assert dm.der_diagnostics(example_dist, 0).dit_flip_rate == disturbance(example_dist)


@pytest.mark.parametrize("d", [2, 3, 5, 7])
def test_isotropic_shape_is_invariant(d):
    rng = np.random.default_rng(70 + d)
    for _ in range(50):
        w = rng.dirichlet(np.ones(4))
        scale = np.array([1, d - 1, d - 1, (d - 1) ** 2])
        params = IsotropicParams(d, *(w / scale))
        out, _ = dm.dstep(from_isotropic(params))
        to_isotropic(out, tol=1e-12)


def test_symmetry_preservation_is_measured_not_asserted():
    # recorded as data: the largest symmetry spread after one step on random symmetric inputs
    rng = np.random.default_rng(80)
    worst = 0.0
    for _ in range(200):
        from quditkd.pauli_channel import symmetry_deviation

        dist = random_symmetric_below_threshold(5, rng)
        worst = max(worst, symmetry_deviation(dm.dstep(dist)[0].p)[1])
    print(f"max symmetry spread after one D-step (d=5): {worst:.3e}")


@given(
    st.sampled_from([2, 3, 5]).flatmap(
        lambda d: arrays(float, (d, d), elements=st.floats(0.0, 1.0)).filter(lambda a: a.sum() > 1e-3)
    ),
    st.integers(0, 4),
)
def test_closed_form_equals_iteration_property(raw, k):
    d = raw.shape[0]
    dist = make_distribution(d, raw / raw.sum())
    if dist.p.sum(axis=1).max() <= 0:
        return
    try:
        closed = dm.dstep_closed_form(dist, k)
    except PrecisionLoss:
        return
    np.testing.assert_allclose(closed.p, dm.iterate_dstep(dist, k)[0].p, atol=1e-10)


@given(st.sampled_from([2, 3, 5]), st.integers(0, 2**32 - 1))
def test_dstep_output_is_a_distribution(d, seed):
    rng = np.random.default_rng(seed)
    dist = make_distribution(d, rng.dirichlet(np.full(d * d, 0.5)).reshape(d, d))
    out, keep = dm.dstep(dist)
    assert 1 / d - 1e-12 <= keep <= 1 + 1e-12
    assert abs(out.p.sum() - 1) < 1e-12 and np.all(out.p >= 0)
