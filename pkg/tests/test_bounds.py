import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molcap.bounds import (
    BoundParams,
    MacBoundParams,
    binary_entropy,
    binary_input_optimum,
    entropy_ratio,
    equal_rate_derivative,
    equal_rate_objective,
    kl_upper_bound,
    lemma2_individual_capacities,
    lemma3_equal_rate_point,
    lemma3_noise_inner,
    lemma8_smsr_inner,
    lower_bound_binary,
    smsr_interfered_objective,
    symmetrized_kl_covariance,
    time_division_frontier,
    z_channel_information,
)
from molcap.capacity import InputConstraint, blahut_arimoto, exhaustive_binary_capacity, mutual_information
from molcap.channels import ScenarioSpec, build_bic, build_channel, build_dlsr, build_smsr
from molcap.errors import DomainError, UnsupportedError
from molcap.kinetics import Kinetics

from .oracles import best_on_off_rate, binding, mutual_information_direct, z_channel_capacity

LOW = Kinetics.from_rates(2, 0.0004, 0.1, 0.0003, 0.15)
HIGH = Kinetics.from_rates(2, 0.0004, 0.1, 0.0005, 0.01)


# scalar helpers -----------------------------------------------------------


def test_entropy_values():
    assert binary_entropy(0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert entropy_ratio(0.0) == 0.0


@pytest.mark.parametrize("bad", [-0.1, 1.1, math.nan])
def test_helpers_reject_out_of_range(bad):
    with pytest.raises(DomainError):
        binary_entropy(bad)
    with pytest.raises(DomainError):
        z_channel_information(0.5, bad)
    with pytest.raises(DomainError):
        z_channel_information(bad, 0.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.floats(1.0, 400.0), st.floats(0.0, 1.0))
def test_z_information_is_on_off_mutual_information(n_prime, peak, alpha):
    ch = build_bic(n_prime, peak, 0.0, 250.0, 2)
    p_c = (250.0 / (peak + 250.0)) ** n_prime
    assert z_channel_information(alpha, p_c) == pytest.approx(
        mutual_information(ch, [1 - alpha, alpha]), abs=1e-12
    )


# upper bound --------------------------------------------------------------


def test_kl_zero_peak():
    assert kl_upper_bound(BoundParams(160, 0.0, 0.5, 5.0)).value == 0.0


def test_kl_full_average_uses_quarter_case():
    bp = BoundParams(160, 80.0, 1.0, 5.0)
    f = lambda x: binding(x, 5.0, 250.0)  # noqa: E731
    spread = math.log(f(80) * (1 - f(0)) / (f(0) * (1 - f(80))))
    assert kl_upper_bound(bp).value == pytest.approx(160 * f(80) / 4 * spread, rel=1e-14)


def test_kl_small_average_case():
    bp = BoundParams(160, 80.0, 0.1, 5.0)
    f = lambda x: binding(x, 5.0, 250.0)  # noqa: E731
    assert f(8.0) < f(80.0) / 2
    spread = math.log(f(80) * (1 - f(0)) / (f(0) * (1 - f(80))))
    expect = 160 * f(8) / f(80) * (f(80) - f(8)) * spread
    assert kl_upper_bound(bp).value == pytest.approx(expect, rel=1e-14)


def test_kl_without_noise_is_flagged_vacuous():
    ub = kl_upper_bound(BoundParams(160, 80.0, 0.5, 0.0))
    assert ub.vacuous and math.isinf(ub.value)


@pytest.mark.parametrize("a_ne", [1.0, 5.0, 20.0, 50.0])
@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0])
def test_kl_dominates_capacity(a_ne, alpha):
    res = blahut_arimoto(build_bic(160, 80.0, a_ne, 250.0, 101), InputConstraint.from_ratio(80.0, alpha))
    assert kl_upper_bound(BoundParams(160, 80.0, alpha, a_ne)).value >= res.capacity


def test_covariance_point_mass_is_zero():
    ch = build_bic(50, 80.0, 5.0, 250.0, 11)
    pmf = np.zeros(11)
    pmf[4] = 1.0
    assert symmetrized_kl_covariance(ch, pmf) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.5, 40.0), st.integers(1, 80))
def test_covariance_dominates_information(seed, a_ne, n_prime):
    ch = build_bic(n_prime, 80.0, a_ne, 250.0, 9)
    pmf = np.random.default_rng(seed).dirichlet(np.ones(9))
    assert symmetrized_kl_covariance(ch, pmf) >= mutual_information_direct(ch.prob, pmf) - 1e-12


def test_covariance_rejects_non_binomial():
    spec = ScenarioSpec("DLSR", 1, 4, 2, 50.0, grid_size=3)
    with pytest.raises(UnsupportedError):
        symmetrized_kl_covariance(build_dlsr(spec), np.full(9, 1 / 9))


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 1.0])
@pytest.mark.parametrize("a_ne", [1.0, 5.0, 50.0])
def test_two_point_optimiser_reproduces_bound_up_to_idle_term(alpha, a_ne):
    # mass on {0, A'} with P(A') = f(alpha A' + Ane) / f(A' + Ane), or 1/2 when that exceeds 1/2;
    # the covariance equals the closed form times (1 - f(Ane) / f(A' + Ane))
    bp = BoundParams(160, 80.0, alpha, a_ne)
    f0, fa, fp = binding(0.0, a_ne, 250.0), binding(alpha * 80.0, a_ne, 250.0), binding(80.0, a_ne, 250.0)
    q = fa / fp if fa < fp / 2 else 0.5
    ch = build_bic(160, 80.0, a_ne, 250.0, 2)
    cov = symmetrized_kl_covariance(ch, [1 - q, q])
    assert cov == pytest.approx(kl_upper_bound(bp).value * (1 - f0 / fp), rel=1e-12)


def test_two_point_optimiser_matches_bound_as_noise_vanishes():
    bp = BoundParams(160, 80.0, 0.5, 1e-9)
    fa, fp = binding(40.0, 1e-9, 250.0), binding(80.0, 1e-9, 250.0)
    ch = build_bic(160, 80.0, 1e-9, 250.0, 2)
    q = fa / fp if fa < fp / 2 else 0.5
    assert symmetrized_kl_covariance(ch, [1 - q, q]) == pytest.approx(kl_upper_bound(bp).value, rel=1e-9)


# on/off lower bound -------------------------------------------------------


def test_lower_bound_vanishes_with_peak():
    assert lower_bound_binary(BoundParams(20, 0.0, 0.5)) == 0.0
    assert lower_bound_binary(BoundParams(20, 1e-9, 0.5)) < 1e-9


@pytest.mark.parametrize("peak", [5.0, 80.0, 1000.0])
def test_lower_bound_single_receptor_is_z_channel(peak):
    q = 250.0 / (peak + 250.0)
    assert lower_bound_binary(BoundParams(1, peak, 1.0)) == pytest.approx(z_channel_capacity(q), abs=1e-13)


def test_lower_bound_needs_noise_free_channel():
    with pytest.raises(UnsupportedError):
        lower_bound_binary(BoundParams(20, 80.0, 0.5, 1.0))


def test_lower_bound_threshold_branch():
    p_c = BoundParams(20, 80.0, 0.5).p_zero
    a_star = binary_input_optimum(p_c)
    below = BoundParams(20, 80.0, a_star / 2)
    assert lower_bound_binary(below) == pytest.approx(z_channel_information(a_star / 2, p_c), abs=1e-15)
    above = BoundParams(20, 80.0, min(1.0, a_star * 1.5))
    assert lower_bound_binary(above) == pytest.approx(z_channel_information(a_star, p_c), abs=1e-14)


@pytest.mark.parametrize("peak", [10.0, 50.0, 120.0, 200.0])
def test_lower_bound_equals_exhaustive(peak):
    v, _ = exhaustive_binary_capacity(build_bic(20, peak, 0.0, 250.0, 2), 0.5)
    assert lower_bound_binary(BoundParams(20, peak, 0.5)) == pytest.approx(v, abs=1e-9)


# two-user bounds ----------------------------------------------------------


def _pinned_rows(spec, user, other_on):
    ch = build_channel(spec)
    pts = ch.inputs.points
    rows = []
    for on in (0, 1):
        x = [0.0, 0.0]
        x[user] = spec.peak[user] * on
        x[1 - user] = spec.peak[1 - user] * other_on
        rows.append(ch.prob[int(np.flatnonzero(np.all(pts == x, axis=1))[0])])
    return rows


def test_individual_capacities_symmetric():
    c1, c2 = lemma2_individual_capacities(MacBoundParams(6, 10, 100.0, 0.5), "DLSR")
    assert c1 == c2


@pytest.mark.parametrize("kind,kin", [("DLSR", Kinetics.uniform(2, 250.0)), ("DMDR_BLOCK", LOW), ("DMDR_BLOCK", HIGH)])
def test_individual_capacities_match_pinned_search(kind, kin):
    bp = MacBoundParams(6, 10, (100.0, 60.0), (0.5, 0.3), kinetics=kin)
    caps = lemma2_individual_capacities(bp, kind)
    for i in range(2):
        off, on = _pinned_rows(bp.spec(kind), i, 0)
        assert caps[i] == pytest.approx(best_on_off_rate(off, on, bp.alpha_s[i]), abs=1e-9)


def test_dmdr_individual_capacities_ignore_blocking():
    a = lemma2_individual_capacities(MacBoundParams(6, 10, 100.0, 0.5, kinetics=LOW), "DMDR_BLOCK")
    b = lemma2_individual_capacities(MacBoundParams(6, 10, 100.0, 0.5, kinetics=HIGH), "DMDR_BLOCK")
    assert a == b


def test_individual_capacities_reject_smsr():
    with pytest.raises(DomainError):
        lemma2_individual_capacities(MacBoundParams(6, 10, 100.0, 0.5), "SMSR")


def test_time_division_is_linear():
    pts = time_division_frontier(0.8, 0.5, 5)
    assert [p.params["k"] for p in pts] == [0.0, 0.25, 0.5, 0.75, 1.0]
    for p in pts:
        k = p.params["k"]
        assert p.r1 == pytest.approx(k * 0.8) and p.r2 == pytest.approx((1 - k) * 0.5)


def test_noise_inner_without_interferer():
    bp = MacBoundParams(6, 10, 100.0, 0.5)
    p = lemma3_noise_inner(bp, "DLSR", 0.3, 0.0)
    p_c = (250.0 / 350.0) ** 60
    assert p.r1 == pytest.approx(z_channel_information(0.3, p_c), abs=1e-15)


@pytest.mark.parametrize("a1,a2", [(0.1, 0.4), (0.5, 0.5), (0.25, 0.05)])
def test_noise_inner_matches_marginal_information(a1, a2):
    spec = ScenarioSpec("DLSR", 1, 8, 2, (100.0, 70.0), alpha_s=0.5, grid_size=2)
    ch = build_dlsr(spec)
    n = spec.receptors
    bp = MacBoundParams(1, 8, (100.0, 70.0), 0.5)
    point = lemma3_noise_inner(bp, "DLSR", a1, a2)
    # grid order (0,0), (0,A2), (A1,0), (A1,A2)
    px = [(1 - a1) * (1 - a2), (1 - a1) * a2, a1 * (1 - a2), a1 * a2]
    for user, rate, a_self in ((0, point.r1, a1), (1, point.r2, a2)):
        marg = np.zeros((4, n + 1))
        for g in range(4):
            np.add.at(marg[g], ch.outputs[:, user], ch.prob[g])
        rows = {}
        for on in (0, 1):
            idx = [g for g in range(4) if (g // 2 if user == 0 else g % 2) == on]
            w = np.array([px[g] for g in idx])
            rows[on] = (w[:, None] * marg[idx]).sum(axis=0) / w.sum()
        ref = mutual_information_direct(np.vstack([rows[0], rows[1]]), [1 - a_self, a_self])
        assert rate == pytest.approx(ref, abs=1e-9)


def test_noise_inner_symmetric_rates():
    p = lemma3_noise_inner(MacBoundParams(6, 10, 100.0, 0.5), "DMDR_BLOCK", 0.3, 0.3)
    assert p.r1 == pytest.approx(p.r2, abs=1e-15)


def test_noise_inner_checks_range():
    with pytest.raises(DomainError):
        lemma3_noise_inner(MacBoundParams(6, 10, 100.0, 0.5), "DLSR", 0.6, 0.1)


@pytest.mark.parametrize("kind,kin", [("DLSR", Kinetics.uniform(2, 250.0)), ("DMDR_BLOCK", LOW), ("DMDR_BLOCK", HIGH)])
@pytest.mark.parametrize("peak", [5.0, 100.0, 1000.0])
def test_equal_rate_point_beats_grid(kind, kin, peak):
    bp = MacBoundParams(6, 10, peak, 1.0, kinetics=kin)
    point, root = lemma3_equal_rate_point(bp, kind)
    grid = np.arange(1, 10000) * 1e-4
    p0 = (250.0 / (peak + 250.0)) ** (60 if kind == "DLSR" else 30)
    p1 = lemma3_equal_rate_point.__globals__["_p_zero_interfered"](bp, kind, 0)
    vals = np.array([z_channel_information(a, (1 - a) * p0 + a * p1) for a in grid])
    assert point.r1 >= vals.max() - 1e-12
    if root.interior:
        assert abs(root.residual) < 1e-8


def test_equal_rate_without_interference_is_single_user_optimum():
    p = 0.3
    grid = np.linspace(1e-6, 1 - 1e-6, 20001)
    d = np.array([equal_rate_derivative(a, p, p) for a in grid])
    crossing = grid[np.argmax(d < 0)]
    assert crossing == pytest.approx(binary_input_optimum(p), abs=1e-4)


def test_equal_rate_clamps_to_average_limit():
    bp = MacBoundParams(6, 10, 100.0, 0.05)
    point, root = lemma3_equal_rate_point(bp, "DLSR")
    assert root.alpha > 0.05 and point.params["alpha"] == 0.05


def test_equal_rate_levels_off_for_large_peaks():
    rates = [lemma3_equal_rate_point(MacBoundParams(6, 10, a, 0.5), "DLSR")[0].r1 for a in (1e3, 1e4, 1e5)]
    assert abs(rates[2] - rates[1]) < abs(rates[1] - rates[0]) + 1e-15
    assert abs(rates[2] - rates[1]) < 1e-6


def test_equal_rate_needs_symmetry():
    with pytest.raises(DomainError):
        lemma3_equal_rate_point(MacBoundParams(6, 10, (100.0, 50.0), 0.5), "DLSR")


def test_equal_rate_objective_vectorised():
    vals = equal_rate_objective(np.array([0.1, 0.2]), 0.3, 0.5)
    assert vals.shape == (2,)


@pytest.mark.parametrize("peaks,alphas", [((100.0, 100.0), (0.5, 0.5)), ((30.0, 200.0), (0.4, 1.0)),
                                          ((5.0, 5.0), (1.0, 1.0))])
def test_smsr_interfered_rate_matches_pinned_search(peaks, alphas):
    bp = MacBoundParams(6, 10, peaks, alphas)
    (c1, c2), _, details = lemma8_smsr_inner(bp)
    spec = bp.spec("SMSR")
    for i, key in enumerate(("user1", "user2")):
        off, on = _pinned_rows(spec, i, 1)
        assert details[key]["interfered"] == pytest.approx(best_on_off_rate(off, on, alphas[i]), abs=1e-9)
        off0, on0 = _pinned_rows(spec, i, 0)
        assert details[key]["silent"] == pytest.approx(best_on_off_rate(off0, on0, alphas[i]), abs=1e-9)
        root = details[key]["root"]
        if root.interior:
            assert abs(root.residual) < 1e-8
            grid = np.arange(1, 10000) * 1e-4
            assert smsr_interfered_objective(root.alpha, off, on) >= smsr_interfered_objective(grid, off, on).max() - 1e-12


def test_smsr_silent_interferer():
    bp = MacBoundParams(6, 10, (100.0, 0.0), (0.5, 0.5))
    _, _, details = lemma8_smsr_inner(bp)
    assert details["user1"]["interfered"] == pytest.approx(details["user1"]["silent"], abs=1e-12)


def test_smsr_symmetric_users_and_linear_frontier():
    (c1, c2), frontier, _ = lemma8_smsr_inner(MacBoundParams(6, 10, 100.0, 0.5), points=3)
    assert c1 == c2
    assert frontier[0].r2 == c2 and frontier[-1].r1 == c1
    assert frontier[1].r1 == pytest.approx(c1 / 2) and frontier[1].r2 == pytest.approx(c2 / 2)


def test_two_user_bounds_need_noise_free_channel():
    bp = MacBoundParams(6, 10, 100.0, 0.5, a_ne=5.0)
    with pytest.raises(UnsupportedError):
        lemma2_individual_capacities(bp, "DLSR")
    with pytest.raises(UnsupportedError):
        lemma8_smsr_inner(bp)


def test_smsr_channel_is_the_source_of_rows():
    bp = MacBoundParams(2, 5, 100.0, 0.5)
    ch = build_smsr(bp.spec("SMSR"))
    assert ch.num_inputs == 4
