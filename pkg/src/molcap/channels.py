"""Finite transition matrices for every receptor scenario.

A continuous concentration input is replaced by a uniform grid on
``[0, peak]`` (both endpoints included, one axis per transmitter or colony,
points in lexicographic order).  Channel laws are assembled as
log-probabilities and checked for row-stochasticity once at the end.

Vector outputs ``(y_1, ..., y_m)`` are flattened to a single output index
by enumerating the admissible tuples in lexicographic order; the tuple of
each index is kept on :attr:`DiscreteChannel.outputs`.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

from .errors import ConfigError, DomainError
from .kinetics import Kinetics, binding_probability, blocking_binding, labeling_binding

log = logging.getLogger(__name__)

__all__ = [
    "KINDS",
    "MAX_OUTCOMES",
    "output_alphabet_size",
    "InputGrid",
    "DiscreteChannel",
    "ScenarioSpec",
    "log_binomial_pmf",
    "binomial_log_pmf_matrix",
    "build_bic",
    "build_bic_from_probabilities",
    "build_ts_blocking",
    "build_dlsr",
    "build_dmdr",
    "build_smsr",
    "joint_channel",
    "build_channel",
]

KINDS = ("LS", "TS", "TS_BLOCK", "DLSR", "DMDR", "DMDR_BLOCK", "SMSR")
MAC_KINDS = ("DLSR", "DMDR", "DMDR_BLOCK", "SMSR")
COLONY_KINDS = ("TS", "TS_BLOCK", "DMDR", "DMDR_BLOCK")
MAX_OUTCOMES = 10**7

# residual above which a row is renormalised, and above which that is reported
_RENORM_TOL = 1e-12
_WARN_TOL = 1e-9


@dataclass(frozen=True)
class InputGrid:
    """Sorted grid of input tuples, one coordinate per transmitter.

    Attributes
    ----------
    points : ndarray, shape (G, d)
    peak : ndarray, shape (d,)
    axes : tuple of ndarray
        Per-coordinate values; ``points`` is their Cartesian product.
    """

    points: np.ndarray
    peak: np.ndarray
    axes: tuple = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        peak = np.atleast_1d(np.asarray(self.peak, dtype=float))
        if peak.shape != (pts.shape[1],):
            raise DomainError("peak must have one entry per input coordinate")
        if np.any(pts < 0) or np.any(pts > peak):
            raise DomainError("grid coordinates must lie in [0, peak]")
        if not np.any(np.all(pts == 0, axis=1)) or not np.any(np.all(pts == peak, axis=1)):
            raise DomainError("grid must contain the all-zero and all-peak tuples")
        for a, b in zip(pts[:-1], pts[1:]):
            if tuple(a) >= tuple(b):
                raise DomainError("grid points must be strictly increasing lexicographically")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "peak", peak)
        if self.axes is not None:
            object.__setattr__(self, "axes", tuple(np.asarray(a, dtype=float) for a in self.axes))

    @classmethod
    def uniform(cls, peaks, size) -> "InputGrid":
        """Product of uniform axes ``linspace(0, peak, size)``.

        ``size`` is a per-axis count (scalar or sequence).  A zero peak
        collapses that axis to the single point 0, and a peak too small to
        resolve ``size`` distinct values keeps only the distinct ones.
        """
        peaks = np.atleast_1d(np.asarray(peaks, dtype=float))
        sizes = np.broadcast_to(np.asarray(size, dtype=int), peaks.shape)
        if np.any(sizes < 2):
            raise DomainError("grid_size must be at least 2")
        axes = tuple(
            np.unique(np.linspace(0.0, p, int(s))) if p > 0 else np.zeros(1)
            for p, s in zip(peaks, sizes)
        )
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        return cls(pts, peaks, axes)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def shape(self) -> tuple:
        if self.axes is None:
            return (self.size,)
        return tuple(a.size for a in self.axes)

    def __len__(self):
        return self.size


@dataclass(frozen=True)
class DiscreteChannel:
    """Transition matrix ``P(y | x)`` on a finite input grid, stored as logs.

    Attributes
    ----------
    inputs : InputGrid
    log_p : ndarray, shape (len(inputs), num_outputs)
        Natural-log transition probabilities.
    outputs : ndarray, shape (num_outputs, k)
        Output tuple of every flattened output index.
    success_prob : ndarray or None
        Per-input success probability when the channel is a single binomial.
    meta : dict
        Construction parameters (kind, receptor count, kd, noise, grid size).
    """

    inputs: InputGrid
    log_p: np.ndarray
    outputs: np.ndarray = None
    success_prob: np.ndarray = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lp = np.asarray(self.log_p, dtype=float)
        if lp.ndim != 2 or lp.shape[0] != self.inputs.size:
            raise DomainError("log_p must have one row per grid point")
        if np.any(lp > 0):
            raise DomainError("log-probabilities must be <= 0")
        resid = np.abs(logsumexp(lp, axis=1))
        if np.any(resid > 1e-10):
            raise DomainError(f"rows are not stochastic (max residual {resid.max():.3g})")
        lp.setflags(write=False)
        object.__setattr__(self, "log_p", lp)
        if self.outputs is None:
            object.__setattr__(self, "outputs", np.arange(lp.shape[1])[:, None])

    @property
    def num_inputs(self) -> int:
        return self.log_p.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.log_p.shape[1]

    @cached_property
    def prob(self) -> np.ndarray:
        p = np.exp(self.log_p)
        p.setflags(write=False)
        return p

    @cached_property
    def row_neg_entropy(self) -> np.ndarray:
        """``sum_y P(y|x) log P(y|x)`` for every input row."""
        with np.errstate(invalid="ignore"):
            t = np.where(np.isneginf(self.log_p), 0.0, self.prob * self.log_p)
        return t.sum(axis=1)

    def output_mean(self) -> np.ndarray:
        """Conditional mean output tuple ``E[Y | x]`` per input row."""
        return self.prob @ self.outputs


def _finalize(log_p, label):
    """Renormalise rows whose log-sum drifts from 0 (see module constants)."""
    lse = logsumexp(log_p, axis=1)
    resid = np.abs(lse)
    if np.any(resid > _RENORM_TOL):
        worst = float(resid.max())
        if worst > _WARN_TOL:
            log.warning("%s: renormalising rows, max log-residual %.3g", label, worst)
        else:
            log.debug("%s: renormalising rows, max log-residual %.3g", label, worst)
        log_p = log_p - lse[:, None]
        log_p = np.minimum(log_p, 0.0)
    return log_p


def log_binomial_pmf(trials, success_p, successes):
    """Log of the binomial pmf, stable for large ``trials``.

    Uses ``0 * log 0 = 0``; a degenerate ``success_p`` of 0 or 1 yields
    ``-inf`` away from its single supported point.
    """
    n = np.asarray(trials)
    k = np.asarray(successes)
    p = np.asarray(success_p, dtype=float)
    if np.any(k < 0) or np.any(k > n):
        raise DomainError("successes must lie in [0, trials]")
    if np.any(p < 0) or np.any(p > 1) or np.any(np.isnan(p)):
        raise DomainError("success probability must lie in [0, 1]")
    out = (
        gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
        + xlogy(k, p) + xlog1py(n - k, -p)
    )
    return out[()] if np.ndim(out) == 0 else out


def binomial_log_pmf_matrix(trials: int, probs) -> np.ndarray:
    """Rows ``log Binomial(trials, p)`` for each ``p`` in ``probs``."""
    probs = np.asarray(probs, dtype=float)
    k = np.arange(trials + 1, dtype=float)
    return log_binomial_pmf(trials, probs[:, None], k[None, :])


def build_bic_from_probabilities(n_prime: int, probs, inputs: InputGrid = None, meta=None):
    """Binomial channel whose rows are indexed by success probability.

    Without ``inputs`` the grid is the probability values themselves
    (peak 1), which must then be sorted, unique, and include 0 and 1.
    """
    probs = np.asarray(probs, dtype=float)
    if inputs is None:
        inputs = InputGrid(probs[:, None], [1.0])
    log_p = _finalize(binomial_log_pmf_matrix(n_prime, probs), "BIC")
    info = {"kind": "BIC", "n_prime": int(n_prime)}
    info.update(meta or {})
    return DiscreteChannel(inputs, log_p, success_prob=probs, meta=info)


def build_bic(n_prime: int, peak: float, a_ne: float, kd: float, grid_size: int = 101):
    """Single binomial channel with ``n_prime`` receptors on ``[0, peak]``."""
    if n_prime < 1:
        raise DomainError("receptor count must be positive")
    grid = InputGrid.uniform([peak], grid_size)
    probs = binding_probability(grid.points[:, 0], a_ne, kd)
    meta = {"peak": float(peak), "a_ne": float(a_ne), "kd": float(kd), "grid_size": int(grid_size)}
    return build_bic_from_probabilities(n_prime, probs, grid, meta)


def _as_tuple(value, m, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(m, arr[0])
    if arr.size != m:
        raise ConfigError(f"{name} must have 1 or {m} entries, got {arr.size}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class ScenarioSpec:
    """Full description of one channel experiment.

    ``peak`` and ``alpha_s`` are the transmitter-side limits: for LS/TS kinds
    a single ``A_s`` split evenly over ``m`` colonies, for MAC kinds one
    value per user (a scalar is broadcast).  ``cap_n`` is the receptor count
    per bacterium.
    """

    kind: str
    n: int
    cap_n: int
    m: int
    peak: object
    alpha_s: object = 1.0
    a_ne: float = 0.0
    kinetics: Kinetics = None
    grid_size: int = None

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ConfigError(problems)
        kin = self.kinetics if self.kinetics is not None else Kinetics.uniform(self.m, 250.0)
        if kin.m == 1 and self.m > 1:
            kin = Kinetics.uniform(self.m, kin.kd[0])
        object.__setattr__(self, "kinetics", kin)
        users = self.m if self.kind in MAC_KINDS else 1
        object.__setattr__(self, "peak", _as_tuple(self.peak, users, "peak"))
        object.__setattr__(self, "alpha_s", _as_tuple(self.alpha_s, users, "alpha_s"))
        if self.grid_size is None:
            joint = self.kind in MAC_KINDS or self.kind == "TS_BLOCK"
            object.__setattr__(self, "grid_size", 41 if joint else 101)

    def violations(self) -> list:
        """Every inconsistency in this description (empty when valid)."""
        out = []
        if self.kind not in KINDS:
            out.append(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        for name in ("n", "cap_n", "m"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                out.append(f"{name} must be a positive integer, got {v!r}")
        if not out:
            if self.kind in COLONY_KINDS and self.n % self.m != 0:
                out.append(f"m must divide n for {self.kind} (n={self.n}, m={self.m})")
            if self.kind == "LS" and self.m != 1:
                out.append("LS uses a single molecule type (m=1)")
            if self.kind in MAC_KINDS and self.m < 2:
                out.append(f"{self.kind} needs at least two transmitters")
        alphas = np.atleast_1d(np.asarray(self.alpha_s, dtype=float))
        if np.any(~(alphas > 0)) or np.any(alphas > 1):
            out.append(f"alpha_s must lie in (0, 1], got {self.alpha_s!r}")
        peaks = np.atleast_1d(np.asarray(self.peak, dtype=float))
        if np.any(~np.isfinite(peaks)) or np.any(peaks < 0):
            out.append(f"peak must be finite and non-negative, got {self.peak!r}")
        if not (np.isfinite(self.a_ne) and self.a_ne >= 0):
            out.append(f"a_ne must be finite and non-negative, got {self.a_ne!r}")
        if self.grid_size is not None and self.grid_size < 2:
            out.append("grid_size must be at least 2")
        if self.kinetics is not None and self.kinetics.m not in (1, getattr(self, "m", 1)):
            out.append(f"kinetics describe {self.kinetics.m} types, scenario has m={self.m}")
        return out

    @property
    def receptors(self) -> int:
        """Receptors per output colony."""
        total = self.n * self.cap_n
        return total // self.m if self.kind in COLONY_KINDS else total

    @property
    def input_peaks(self) -> tuple:
        """Peak of every input coordinate of the joint grid."""
        if self.kind in MAC_KINDS:
            return self.peak
        if self.kind == "LS":
            return self.peak
        per = self.peak[0] / self.m
        return (per,) * (self.m if self.kind == "TS_BLOCK" else 1)

    @property
    def input_averages(self) -> tuple:
        """Average-concentration budget of every input coordinate."""
        peaks = self.input_peaks
        alphas = self.alpha_s if len(self.alpha_s) == len(peaks) else self.alpha_s * len(peaks)
        return tuple(a * p for a, p in zip(alphas, peaks))

    def replace(self, **changes) -> "ScenarioSpec":
        return dataclasses.replace(self, **changes)

    def grid(self) -> InputGrid:
        return InputGrid.uniform(self.input_peaks, self.grid_size)


def _meta(spec: ScenarioSpec, **extra):
    out = {
        "kind": spec.kind,
        "n": spec.n,
        "cap_n": spec.cap_n,
        "m": spec.m,
        "a_ne": spec.a_ne,
        "grid_size": spec.grid_size,
        "receptors": spec.receptors,
    }
    out.update(extra)
    return out


def _require(spec, kinds):
    if spec.kind not in kinds:
        raise ConfigError(f"expected scenario kind in {kinds}, got {spec.kind}")


def build_ts_blocking(spec: ScenarioSpec) -> list:
    """One binomial channel per colony, all driven by the joint input tuple."""
    _require(spec, ("TS_BLOCK",))
    grid = spec.grid()
    totals = grid.points + spec.a_ne
    p_bind, _ = blocking_binding(totals, spec.kinetics)
    out = []
    for i in range(spec.m):
        lp = _finalize(binomial_log_pmf_matrix(spec.receptors, p_bind[:, i]), f"TS_BLOCK[{i}]")
        out.append(
            DiscreteChannel(grid, lp, success_prob=p_bind[:, i], meta=_meta(spec, colony=i))
        )
    return out


def _composition_tuples(total: int, m: int) -> np.ndarray:
    """All ``(y_1..y_m)`` with non-negative entries summing to at most ``total``."""
    return np.asarray(list(_compositions(total, m)), dtype=int).reshape(-1, m)


def _compositions(total, m):
    if m == 0:
        yield ()
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, m - 1):
            yield (first,) + rest


def output_alphabet_size(spec: ScenarioSpec) -> int:
    """Number of output symbols of the matrix :func:`build_channel` returns."""
    if spec.kind == "DLSR":
        return math.comb(spec.receptors + spec.m, spec.m)
    if spec.kind in ("TS_BLOCK", "DMDR", "DMDR_BLOCK"):
        return (spec.receptors + 1) ** spec.m
    return spec.receptors + 1


def _check_outcomes(count, label, max_outcomes):
    if max_outcomes is not None and count > max_outcomes:
        raise ConfigError(f"{label} output alphabet has {count} outcomes (> {max_outcomes})")


def build_dlsr(spec: ScenarioSpec, max_outcomes=MAX_OUTCOMES) -> DiscreteChannel:
    """Labelled transmitters sharing one receptor colony (multinomial output).

    ``max_outcomes=None`` lifts the alphabet-size guard.
    """
    _require(spec, ("DLSR",))
    trials = spec.receptors
    _check_outcomes(math.comb(trials + spec.m, spec.m), "DLSR", max_outcomes)
    grid = spec.grid()
    kd = float(spec.kinetics.kd[0])
    totals = grid.points + spec.a_ne
    p = labeling_binding(totals, kd)  # (G, m)
    p_empty = kd / (totals.sum(axis=1) + kd)  # (G,)
    ys = _composition_tuples(trials, spec.m)  # (Y, m)
    rest = trials - ys.sum(axis=1)
    coef = gammaln(trials + 1.0) - gammaln(ys + 1.0).sum(axis=1) - gammaln(rest + 1.0)
    lp = coef[None, :] + xlogy(rest[None, :], p_empty[:, None])
    for i in range(spec.m):
        lp = lp + xlogy(ys[None, :, i], p[:, i][:, None])
    lp = _finalize(lp, "DLSR")
    return DiscreteChannel(grid, lp, outputs=ys, meta=_meta(spec, kd=kd))


def build_dmdr(spec: ScenarioSpec, blocking: bool = None) -> list:
    """Separate molecule/receptor pairs per transmitter, one channel each.

    Without blocking, channel ``i`` depends on ``x_i`` alone.  ``blocking``
    defaults to ``spec.kind == "DMDR_BLOCK"``.
    """
    _require(spec, ("DMDR", "DMDR_BLOCK"))
    if blocking is None:
        blocking = spec.kind == "DMDR_BLOCK"
    grid = spec.grid()
    totals = grid.points + spec.a_ne
    if blocking:
        p_bind, _ = blocking_binding(totals, spec.kinetics)
    else:
        p_bind = binding_probability(totals, 0.0, spec.kinetics.kd[None, :])
    out = []
    for i in range(spec.m):
        lp = _finalize(binomial_log_pmf_matrix(spec.receptors, p_bind[:, i]), f"DMDR[{i}]")
        out.append(
            DiscreteChannel(
                grid, lp, success_prob=p_bind[:, i], meta=_meta(spec, user=i, blocking=blocking)
            )
        )
    return out


def build_smsr(spec: ScenarioSpec) -> DiscreteChannel:
    """All transmitters share one molecule type; the receiver sees the sum."""
    _require(spec, ("SMSR",))
    grid = spec.grid()
    kd = float(spec.kinetics.kd[0])
    p = binding_probability(grid.points.sum(axis=1), spec.a_ne, kd)
    lp = _finalize(binomial_log_pmf_matrix(spec.receptors, p), "SMSR")
    return DiscreteChannel(grid, lp, success_prob=p, meta=_meta(spec, kd=kd))


def joint_channel(channels, max_outcomes=MAX_OUTCOMES) -> DiscreteChannel:
    """Combine conditionally independent outputs on a shared grid.

    The joint output ``(y_1, ..., y_m)`` is flattened lexicographically.
    """
    channels = list(channels)
    grid = channels[0].inputs
    if any(c.inputs is not grid and not np.array_equal(c.inputs.points, grid.points) for c in channels):
        raise DomainError("channels must share one input grid")
    shape = tuple(c.num_outputs for c in channels)
    _check_outcomes(math.prod(shape), "joint", max_outcomes)
    lp = channels[0].log_p
    for c in channels[1:]:
        lp = (lp[:, :, None] + c.log_p[:, None, :]).reshape(lp.shape[0], -1)
    outs = np.stack([a.ravel() for a in np.indices(shape)], axis=1)
    meta = dict(channels[0].meta)
    meta.pop("colony", None)
    meta.pop("user", None)
    return DiscreteChannel(grid, _finalize(lp, "joint"), outputs=outs, meta=meta)


def build_channel(spec: ScenarioSpec, max_outcomes=MAX_OUTCOMES) -> DiscreteChannel:
    """The single matrix whose capacity defines the scenario.

    For ``TS`` this is one colony's channel; the scenario capacity is ``m``
    times its capacity.  ``max_outcomes=None`` lifts the alphabet-size guard.
    """
    kd = float(spec.kinetics.kd[0])
    if spec.kind in ("LS", "TS"):
        ch = build_bic(spec.receptors, spec.input_peaks[0], spec.a_ne, kd, spec.grid_size)
        ch.meta.update(_meta(spec, kd=kd))
        return ch
    if spec.kind == "TS_BLOCK":
        return joint_channel(build_ts_blocking(spec), max_outcomes)
    if spec.kind == "DLSR":
        return build_dlsr(spec, max_outcomes)
    if spec.kind in ("DMDR", "DMDR_BLOCK"):
        return joint_channel(build_dmdr(spec), max_outcomes)
    return build_smsr(spec)
