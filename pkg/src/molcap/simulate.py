"""Gillespie simulation of a single receptor, as an oracle for steady states.

A receptor is either empty or in one of several occupied states (bound by
its own molecule, blocked by a foreign one, or bound by a labelled
molecule).  Every occupied state is entered from and left to the empty
state only, so the chain is a star: a sojourn in the hub with total exit
rate ``R`` followed by a sojourn in spoke ``s`` chosen with probability
``r_s / R``.  Whole cycles are drawn in vectorised batches, which is exact
and fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .kinetics import ConcentrationVector, Kinetics

__all__ = [
    "ChainModel",
    "OccupancyEstimate",
    "gillespie_occupancy",
    "combine_estimates",
    "RNG_NAME",
]

RNG_NAME = f"numpy.random.PCG64 (numpy {np.__version__})"
DEFAULT_TRANSITIONS = 1_000_000


@dataclass(frozen=True)
class ChainModel:
    """Structure and time scale of a receptor chain.

    Parameters
    ----------
    kind : {"blocking", "labeling"}
        ``"blocking"``: receptor of type ``receptor`` that binds its own
        molecule and can be blocked by every other type.  ``"labeling"``:
        a receptor shared by ``m`` labels.
    receptor : int
        Receptor type for the blocking chain (zero-based).
    kappa : float or array_like
        Unbinding rates (1/min), per molecule type.
    kappa_block : float or array_like
        Unblocking rates (1/min); scalar or ``(m, m)``.

    Association rates follow from the kinetics ratios:
    ``gamma = kappa / kd`` and ``gamma_block = block_ratio * kappa_block``.
    """

    kind: str = "blocking"
    receptor: int = 0
    kappa: object = 0.1
    kappa_block: object = 0.15

    def __post_init__(self):
        if self.kind not in ("blocking", "labeling"):
            raise DomainError(f"unknown chain kind {self.kind!r}")
        if np.any(np.asarray(self.kappa, dtype=float) <= 0):
            raise DomainError("unbinding rates must be positive")
        if np.any(np.asarray(self.kappa_block, dtype=float) <= 0):
            raise DomainError("unblocking rates must be positive")

    def scaled(self, factor: float) -> "ChainModel":
        """Same chain with every rate multiplied by ``factor``."""
        return ChainModel(
            self.kind,
            self.receptor,
            np.asarray(self.kappa, dtype=float) * factor,
            np.asarray(self.kappa_block, dtype=float) * factor,
        )

    def spokes(self, c: ConcentrationVector, k: Kinetics):
        """State labels and (entry, exit) rates of the occupied states.

        Returns
        -------
        labels : list of str
            ``labels[0]`` is ``"empty"``; the rest name the spokes.
        entry, exit : ndarray
            Rates empty -> spoke and spoke -> empty.
        """
        m = k.m
        if c.m != m:
            raise DomainError(f"concentration vector has {c.m} types, kinetics has {m}")
        kappa = np.broadcast_to(np.asarray(self.kappa, dtype=float), (m,))
        gamma = kappa / k.kd
        total = c.total
        if self.kind == "labeling":
            labels = ["empty"] + [f"label{j}" for j in range(m)]
            return labels, gamma * total, kappa.copy()
        i = self.receptor
        if not (0 <= i < m):
            raise DomainError(f"receptor index {i} out of range for m={m}")
        kb = np.broadcast_to(np.asarray(self.kappa_block, dtype=float), (m, m))
        others = [j for j in range(m) if j != i]
        labels = ["empty", "full"] + [f"blocked{j}" for j in others]
        entry = [gamma[i] * total[i]] + [k.block_ratio[i, j] * kb[i, j] * total[j] for j in others]
        exits = [kappa[i]] + [kb[i, j] for j in others]
        return labels, np.array(entry), np.array(exits)


@dataclass(frozen=True)
class OccupancyEstimate:
    """Time-averaged state occupancy with batch-means standard errors."""

    labels: tuple
    fractions: np.ndarray
    std_errors: np.ndarray
    total_time: float
    transitions: int
    seed: int
    generator: str = RNG_NAME
    batches: int = 0

    def __getitem__(self, label):
        return float(self.fractions[self.labels.index(label)])

    def std_error(self, label) -> float:
        return float(self.std_errors[self.labels.index(label)])


def _expected_cycle(entry, exits):
    rate = entry.sum()
    return 1.0 / rate + float(entry @ (1.0 / exits)) / rate


def gillespie_occupancy(
    model: ChainModel,
    c: ConcentrationVector,
    k: Kinetics,
    horizon: float = None,
    burn_in: float = None,
    seed: int = 0,
    batches: int = 100,
    chunk: int = 200_000,
) -> OccupancyEstimate:
    """Simulate one receptor and return its state occupancy after burn-in.

    ``horizon`` and ``burn_in`` are in minutes.  By default the horizon
    covers about a million expected transitions and the burn-in is a tenth
    of it.  Standard errors come from ``batches`` equal-length batch means.

    Raises
    ------
    DomainError
        If no occupied state can be entered (all association rates zero) or
        the time arguments are inconsistent.
    """
    labels, entry, exits = model.spokes(c, k)
    rate = float(entry.sum())
    if rate <= 0:
        raise DomainError("degenerate chain: every association rate is zero")
    if horizon is None:
        horizon = DEFAULT_TRANSITIONS / 2 * _expected_cycle(entry, exits)
    if burn_in is None:
        burn_in = 0.1 * horizon
    if not (horizon > burn_in > 0):
        raise DomainError("need horizon > burn_in > 0")
    if batches < 20:
        raise DomainError("batch means need at least 20 batches")

    rng = np.random.Generator(np.random.PCG64(seed))
    pick = entry / rate
    n_states = len(labels)
    # segment end times and states, empty (0) and spoke (1..) alternating
    ends, states = [], []
    clock = 0.0
    while clock < horizon:
        hub = rng.exponential(1.0 / rate, chunk)
        spoke = rng.choice(len(entry), size=chunk, p=pick)
        stay = rng.exponential(1.0, chunk) / exits[spoke]
        dur = np.empty(2 * chunk)
        dur[0::2] = hub
        dur[1::2] = stay
        st = np.empty(2 * chunk, dtype=np.int64)
        st[0::2] = 0
        st[1::2] = spoke + 1
        end = clock + np.cumsum(dur)
        ends.append(end)
        states.append(st)
        clock = float(end[-1])
    ends = np.concatenate(ends)
    states = np.concatenate(states)
    starts = np.concatenate(([0.0], ends[:-1]))
    last = int(np.searchsorted(ends, horizon, side="left"))
    ends, states, starts = ends[: last + 1], states[: last + 1], starts[: last + 1]

    # cumulative time in each state before the end of each segment
    dur = ends - starts
    onehot = states[:, None] == np.arange(n_states)[None, :]
    cum = np.cumsum(dur[:, None] * onehot, axis=0)

    def occupied_until(t):
        idx = np.searchsorted(ends, t, side="left")
        before = cum[idx - 1] if idx > 0 else np.zeros(n_states)
        part = np.zeros(n_states)
        part[states[idx]] = t - starts[idx]
        return before + part

    edges = np.linspace(burn_in, horizon, batches + 1)
    marks = np.array([occupied_until(t) for t in edges])
    per_batch = np.diff(marks, axis=0) / np.diff(edges)[:, None]
    window = horizon - burn_in
    fractions = (marks[-1] - marks[0]) / window
    fractions = fractions / fractions.sum()
    se = per_batch.std(axis=0, ddof=1) / math.sqrt(batches)
    in_window = int(np.searchsorted(ends, horizon) - np.searchsorted(ends, burn_in))
    return OccupancyEstimate(
        tuple(labels), fractions, se, float(window), in_window, int(seed), RNG_NAME, batches
    )


def combine_estimates(estimates) -> OccupancyEstimate:
    """Pool independent replicas: mean of means, errors added in quadrature.

    The result does not depend on the order of ``estimates``.
    """
    estimates = sorted(estimates, key=lambda e: e.seed)
    if not estimates:
        raise DomainError("nothing to combine")
    labels = estimates[0].labels
    if any(e.labels != labels for e in estimates):
        raise DomainError("replicas simulate different chains")
    r = len(estimates)
    frac = np.mean([e.fractions for e in estimates], axis=0)
    se = np.sqrt(np.sum([e.std_errors**2 for e in estimates], axis=0)) / r
    return OccupancyEstimate(
        labels,
        frac,
        se,
        float(sum(e.total_time for e in estimates)),
        int(sum(e.transitions for e in estimates)),
        estimates[0].seed,
        RNG_NAME,
        sum(e.batches for e in estimates),
    )
