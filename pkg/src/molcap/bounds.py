"""Closed-form capacity bounds for binomial receptor channels.

Point-to-point: an upper bound from the symmetrized KL divergence and an
exact on/off-keying rate.  Two-user channels: time-division and
interference-as-noise inner bounds with on/off inputs, including the
equal-rate operating point and the individual rates of the shared-receptor
channel, whose optimal on-probabilities solve transcendental equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import bisect
from scipy.special import xlogy

from .channels import DiscreteChannel, ScenarioSpec, build_smsr
from .errors import DomainError, UnsupportedError
from .kinetics import Kinetics, binding_probability

__all__ = [
    "binary_entropy",
    "entropy_ratio",
    "z_channel_information",
    "binary_input_optimum",
    "BoundParams",
    "MacBoundParams",
    "RatePoint",
    "UpperBound",
    "RootSolution",
    "kl_upper_bound",
    "symmetrized_kl_covariance",
    "lower_bound_binary",
    "lemma2_individual_capacities",
    "time_division_frontier",
    "lemma3_noise_inner",
    "equal_rate_objective",
    "equal_rate_derivative",
    "lemma3_equal_rate_point",
    "lemma8_smsr_inner",
    "smsr_interfered_objective",
    "smsr_interfered_derivative",
]

ROOT_BRACKET = (1e-12, 1.0 - 1e-12)
ROOT_XTOL = 1e-13


def _check_unit(name, v):
    arr = np.asarray(v, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise DomainError(f"{name} must lie in [0, 1], got {v!r}")
    return arr


def binary_entropy(p):
    """``-p log p - (1-p) log(1-p)`` in nats."""
    p = _check_unit("p", p)
    out = -xlogy(p, p) - xlogy(1.0 - p, 1.0 - p)
    return out[()] if out.ndim == 0 else out


def entropy_ratio(p):
    """``H(p) / (1 - p)``, extended by its limit ``+inf`` at ``p = 1``."""
    p = _check_unit("p", p)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(p < 1.0, binary_entropy(p) / (1.0 - p), np.inf)
    return out[()] if out.ndim == 0 else out


def z_channel_information(alpha, p):
    """Mutual information of on/off keying through a binomial channel.

    ``alpha`` is the probability of sending the peak, ``p`` the probability
    that the peak still yields zero bound receptors.  Only the zero output is
    shared between the two inputs, so the channel acts like a Z-channel.
    """
    a = _check_unit("alpha", alpha)
    p = _check_unit("p", p)
    r = 1.0 - a + a * p
    out = -a * (1.0 - p) * _safe_log(a) + a * xlogy(p, p) - xlogy(r, r) + 0.0  # no -0.0
    return out[()] if out.ndim == 0 else out


def _safe_log(x):
    # alpha * log(alpha) style terms: the prefactor vanishes wherever x does
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), 0.0)


def binary_input_optimum(p_zero: float) -> float:
    """Unconstrained maximiser of :func:`z_channel_information` in ``alpha``."""
    p = float(_check_unit("p_zero", p_zero))
    if p >= 1.0:
        return 0.0
    if p == 0.0:
        return 0.5
    return 1.0 / (1.0 - p + math.exp(-p * math.log(p) / (1.0 - p)))


def _binary_capacity(p_zero: float, alpha_s: float) -> float:
    """Best on/off rate with ``P(on) <= alpha_s`` (closed form)."""
    if p_zero >= 1.0:
        return 0.0
    if alpha_s >= binary_input_optimum(p_zero):
        g = float(entropy_ratio(p_zero))
        w = 1.0 / (1.0 + math.exp(g))
        return float(binary_entropy(w)) - g * w
    return float(z_channel_information(alpha_s, p_zero))


@dataclass(frozen=True)
class BoundParams:
    """Single binomial channel: ``n_prime`` receptors, inputs in ``[0, peak]``."""

    n_prime: int
    peak: float
    alpha_s: float
    a_ne: float = 0.0
    kd: float = 250.0

    def __post_init__(self):
        if int(self.n_prime) != self.n_prime or self.n_prime < 1:
            raise DomainError("n_prime must be a positive integer")
        if not (math.isfinite(self.peak) and self.peak >= 0):
            raise DomainError("peak must be finite and non-negative")
        if not (0 < self.alpha_s <= 1):
            raise DomainError("alpha_s must lie in (0, 1]")
        if not (math.isfinite(self.a_ne) and self.a_ne >= 0):
            raise DomainError("a_ne must be finite and non-negative")
        if not (math.isfinite(self.kd) and self.kd > 0):
            raise DomainError("kd must be positive")

    def f(self, x):
        return binding_probability(x, self.a_ne, self.kd)

    @property
    def p_zero(self) -> float:
        """Probability that the peak input leaves every receptor empty."""
        return (self.kd / (self.peak + self.kd)) ** self.n_prime


@dataclass(frozen=True)
class MacBoundParams:
    """Two transmitters, ``n`` bacteria with ``cap_n`` receptors each."""

    n: int
    cap_n: int
    peaks: tuple
    alpha_s: tuple
    kinetics: Kinetics = field(default_factory=lambda: Kinetics.uniform(2, 250.0))
    a_ne: float = 0.0

    def __post_init__(self):
        peaks = tuple(float(v) for v in np.broadcast_to(self.peaks, (2,)))
        alphas = tuple(float(v) for v in np.broadcast_to(self.alpha_s, (2,)))
        object.__setattr__(self, "peaks", peaks)
        object.__setattr__(self, "alpha_s", alphas)
        if self.n < 1 or self.cap_n < 1:
            raise DomainError("n and cap_n must be positive")
        if any(p < 0 or not math.isfinite(p) for p in peaks):
            raise DomainError("peaks must be finite and non-negative")
        if any(not (0 < a <= 1) for a in alphas):
            raise DomainError("alpha_s must lie in (0, 1]")
        if self.kinetics.m != 2:
            raise DomainError("two-user bounds need kinetics for two types")

    @property
    def receptors(self) -> int:
        return self.n * self.cap_n

    def spec(self, kind: str, grid_size: int = 2) -> ScenarioSpec:
        return ScenarioSpec(
            kind, self.n, self.cap_n, 2, self.peaks, alpha_s=self.alpha_s,
            a_ne=self.a_ne, kinetics=self.kinetics, grid_size=grid_size,
        )


@dataclass(frozen=True)
class RatePoint:
    r1: float
    r2: float
    label: str
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.r1 < 0 or self.r2 < 0:
            raise DomainError(f"rates must be non-negative, got ({self.r1}, {self.r2})")

    @property
    def total(self) -> float:
        return self.r1 + self.r2


class UpperBound(NamedTuple):
    value: float
    vacuous: bool


class RootSolution(NamedTuple):
    """Stationary point of a concave objective on ``(0, 1)``.

    ``alpha`` is the root (or the bracket end the derivative points to when
    there is no sign change, with ``interior=False``); ``residual`` is the
    derivative there.
    """

    alpha: float
    residual: float
    interior: bool


def kl_upper_bound(bp: BoundParams) -> UpperBound:
    """Symmetrized-KL upper bound on the binomial channel capacity (nats).

    Without environment noise the log-odds of the idle input is infinite and
    the bound is vacuous: ``UpperBound(inf, True)``.
    """
    f_peak = float(bp.f(bp.peak))
    f_avg = float(bp.f(bp.alpha_s * bp.peak))
    f_idle = float(bp.f(0.0))
    if bp.peak == 0:
        return UpperBound(0.0, False)
    if f_idle == 0.0:
        return UpperBound(math.inf, True)
    spread = math.log(f_peak) - math.log1p(-f_peak) - math.log(f_idle) + math.log1p(-f_idle)
    if f_avg < f_peak / 2:
        value = bp.n_prime * (f_avg / f_peak) * (f_peak - f_avg) * spread
    else:
        value = bp.n_prime * f_peak / 4 * spread
    return UpperBound(value, False)


def symmetrized_kl_covariance(channel: DiscreteChannel, pmf) -> float:
    """``N' Cov(f(X), log(f(X) / (1 - f(X))))`` for a single binomial channel.

    This is the symmetrized KL divergence between the joint law and the
    product of marginals for the given input pmf.  Infinite when the pmf
    mixes a saturated (``f`` in {0, 1}) input with any other.
    """
    if channel.success_prob is None or channel.inputs.dim != 1 or channel.outputs.shape[1] != 1:
        raise UnsupportedError("symmetrized KL covariance needs a single binomial channel")
    p = np.asarray(pmf, dtype=float)
    if p.shape != (channel.num_inputs,):
        raise DomainError("pmf does not match the channel inputs")
    f = np.asarray(channel.success_prob, dtype=float)
    n_prime = channel.num_outputs - 1
    live = p > 0
    fl = f[live]
    if np.ptp(fl) == 0:
        return 0.0
    if np.any((fl == 0) | (fl == 1)):
        return math.inf
    logit = np.log(fl) - np.log1p(-fl)
    pl = p[live]
    mean_f = pl @ fl
    return float(n_prime * (pl @ ((fl - mean_f) * logit)))


def lower_bound_binary(bp: BoundParams) -> float:
    """Exact capacity with inputs restricted to ``{0, peak}`` (noise-free)."""
    if bp.a_ne != 0:
        raise UnsupportedError("the on/off closed form assumes no environment noise")
    return _binary_capacity(bp.p_zero, bp.alpha_s)


def _p_zero_alone(bp: MacBoundParams, scenario: str, i: int) -> float:
    """P(no receptor of user ``i`` bound | user ``i`` on, the other off)."""
    kd = float(bp.kinetics.kd[i])
    if scenario in ("DLSR", "SMSR"):
        return (kd / (bp.peaks[i] + kd)) ** bp.receptors
    if scenario == "DMDR_BLOCK":
        return (kd / (bp.peaks[i] + kd)) ** (bp.receptors / 2)
    raise DomainError(f"no two-user bound for scenario {scenario!r}")


def _p_zero_interfered(bp: MacBoundParams, scenario: str, i: int) -> float:
    """Same as :func:`_p_zero_alone` but with the other user at its peak."""
    j = 1 - i
    kd = float(bp.kinetics.kd[i])
    if scenario == "DLSR":
        base = (bp.peaks[j] + kd) / (bp.peaks[i] + bp.peaks[j] + kd)
        return base ** bp.receptors
    if scenario == "DMDR_BLOCK":
        foreign = bp.kinetics.block_ratio[i, j] * bp.peaks[j] + 1.0
        return (foreign / (bp.peaks[i] / kd + foreign)) ** (bp.receptors / 2)
    raise DomainError(f"no interference-as-noise bound for scenario {scenario!r}")


def _require_noise_free(bp):
    if bp.a_ne != 0:
        raise UnsupportedError("two-user on/off bounds assume no environment noise")


def lemma2_individual_capacities(bp: MacBoundParams, scenario: str):
    """Best single-user on/off rates ``(C1, C2)`` with the other user silent."""
    _require_noise_free(bp)
    if scenario not in ("DLSR", "DMDR_BLOCK"):
        raise DomainError("use lemma8_smsr_inner for the shared-molecule channel")
    return tuple(
        _binary_capacity(_p_zero_alone(bp, scenario, i), bp.alpha_s[i]) for i in range(2)
    )


def time_division_frontier(c1: float, c2: float, points: int = 11, label="time-division"):
    """Rate pairs ``(k c1, (1 - k) c2)`` for ``k`` uniform on ``[0, 1]``."""
    if points < 2:
        raise DomainError("need at least two frontier points")
    return [
        RatePoint(k * c1, (1.0 - k) * c2, label, {"k": float(k)})
        for k in np.linspace(0.0, 1.0, points)
    ]


def lemma3_noise_inner(bp: MacBoundParams, scenario: str, alpha1: float, alpha2: float):
    """Rates of on/off keying when each receiver treats the other user as noise."""
    _require_noise_free(bp)
    alphas = (float(alpha1), float(alpha2))
    for a, cap in zip(alphas, bp.alpha_s):
        if not (0.0 <= a <= cap):
            raise DomainError(f"on-probability {a} outside [0, {cap}]")
    rates = []
    for i in range(2):
        mix = (1 - alphas[1 - i]) * _p_zero_alone(bp, scenario, i)
        mix += alphas[1 - i] * _p_zero_interfered(bp, scenario, i)
        rates.append(float(z_channel_information(alphas[i], mix)))
    return RatePoint(
        rates[0], rates[1], "interference-as-noise",
        {"scenario": scenario, "alpha1": alphas[0], "alpha2": alphas[1]},
    )


def equal_rate_objective(alpha, p0: float, p1: float):
    """Per-user rate when both users switch on with probability ``alpha``."""
    a = np.asarray(alpha, dtype=float)
    return z_channel_information(a, (1 - a) * p0 + a * p1)


def equal_rate_derivative(alpha: float, p0: float, p1: float) -> float:
    """Derivative of :func:`equal_rate_objective` in ``alpha`` (open interval)."""
    u = (1 - alpha) * p0 + alpha * p1
    slope = (1 - 2 * alpha) * p0 + 2 * alpha * p1
    w = (1 - alpha) / alpha + u
    return float(xlogy(slope, u) - (slope - 1) * math.log(w))


def _stationary_point(deriv) -> RootSolution:
    lo, hi = ROOT_BRACKET
    d_lo, d_hi = deriv(lo), deriv(hi)
    if d_lo > 0 and d_hi < 0:
        a = bisect(deriv, lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)
        return RootSolution(a, deriv(a), True)
    a = hi if d_hi >= 0 else lo
    return RootSolution(a, deriv(a), False)


def lemma3_equal_rate_point(bp: MacBoundParams, scenario: str):
    """Largest equal rate pair on the interference-as-noise region.

    Returns ``(point, root)``: the :class:`RatePoint` at ``k = 1`` (scale it
    by ``k`` for time sharing) and the :class:`RootSolution` of the
    stationarity equation before clamping to ``alpha_s``.
    """
    _require_noise_free(bp)
    if bp.peaks[0] != bp.peaks[1] or bp.alpha_s[0] != bp.alpha_s[1]:
        raise DomainError("equal-rate point needs symmetric peaks and average ratios")
    if bp.kinetics.kd[0] != bp.kinetics.kd[1] or (
        scenario == "DMDR_BLOCK" and bp.kinetics.block_ratio[0, 1] != bp.kinetics.block_ratio[1, 0]
    ):
        raise DomainError("equal-rate point needs symmetric kinetics")
    p0 = _p_zero_alone(bp, scenario, 0)
    p1 = _p_zero_interfered(bp, scenario, 0)
    if p0 >= 1.0:
        root = RootSolution(bp.alpha_s[0], 0.0, False)
    else:
        root = _stationary_point(lambda a: equal_rate_derivative(a, p0, p1))
    alpha = min(root.alpha, bp.alpha_s[0])
    rate = float(equal_rate_objective(alpha, p0, p1))
    point = RatePoint(
        rate, rate, "equal-rate",
        {"scenario": scenario, "alpha": alpha, "root": root.alpha, "interior": root.interior},
    )
    return point, root


def smsr_interfered_objective(alpha, p_off, p_on):
    """``I(X_i; Y)`` with the other user fixed; rows ``p_off``/``p_on`` are ``P(y | x_i)``."""
    a = np.asarray(alpha, dtype=float)[..., None]
    mix = (1 - a) * p_off + a * p_on
    with np.errstate(divide="ignore", invalid="ignore"):
        t_off = np.where(p_off > 0, p_off * np.log(mix / np.where(p_off > 0, p_off, 1.0)), 0.0)
        t_on = np.where(p_on > 0, p_on * np.log(mix / np.where(p_on > 0, p_on, 1.0)), 0.0)
    return -((1 - a) * t_off + a * t_on).sum(axis=-1)


def smsr_interfered_derivative(alpha: float, p_off, p_on) -> float:
    mix = (1 - alpha) * p_off + alpha * p_on
    with np.errstate(divide="ignore", invalid="ignore"):
        t_off = np.where(p_off > 0, p_off * np.log(mix / np.where(p_off > 0, p_off, 1.0)), 0.0)
        t_on = np.where(p_on > 0, p_on * np.log(mix / np.where(p_on > 0, p_on, 1.0)), 0.0)
    return float(np.sum(t_off - t_on))


def lemma8_smsr_inner(bp: MacBoundParams, points: int = 11):
    """Time-division inner bound for the shared-molecule, shared-receptor channel.

    Each user's rate is the better of two on/off rates: with the other user
    silent (closed form) or with the other user at its peak (stationary
    point found by bisection, then clamped to ``alpha_s``).

    Returns
    -------
    (c1, c2) : individual rates
    frontier : list of RatePoint
    details : dict
        Both candidate rates per user and the root solutions.
    """
    _require_noise_free(bp)
    channel = build_smsr(bp.spec("SMSR"))
    pts = channel.inputs.points

    def row(on1, on2):
        target = np.array([bp.peaks[0] * on1, bp.peaks[1] * on2])
        return channel.prob[int(np.flatnonzero(np.all(pts == target, axis=1))[0])]

    rows = {(0, 1): row(0, 1), (1, 0): row(1, 0), (1, 1): row(1, 1)}
    caps, details = [], {}
    for i in range(2):
        c_alone = _binary_capacity(_p_zero_alone(bp, "SMSR", i), bp.alpha_s[i])
        p_off = rows[(0, 1)] if i == 0 else rows[(1, 0)]
        p_on = rows[(1, 1)]
        if np.allclose(p_off, p_on, rtol=0, atol=0):
            root = RootSolution(0.0, 0.0, False)
            c_int = 0.0
        else:
            root = _stationary_point(lambda a: smsr_interfered_derivative(a, p_off, p_on))
            alpha = min(root.alpha, bp.alpha_s[i])
            c_int = max(float(smsr_interfered_objective(alpha, p_off, p_on)), 0.0)
        caps.append(max(c_alone, c_int))
        details[f"user{i + 1}"] = {"silent": c_alone, "interfered": c_int, "root": root}
    frontier = time_division_frontier(caps[0], caps[1], points)
    return tuple(caps), frontier, details
