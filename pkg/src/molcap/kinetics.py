"""Steady-state occupancy of ligand receptors.

Every closed form here depends on the rate constants only through two kinds
of ratio: the dissociation constant ``kd = kappa / gamma`` of each molecule
type (nM), and the blocking affinity ``gamma_block / kappa_block`` of receptor
type ``i`` towards molecules of type ``j`` (1/nM).  :class:`Kinetics` stores
exactly those ratios.

Type indices are zero-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "Kinetics",
    "ConcentrationVector",
    "binding_probability",
    "blocking_steady_state",
    "blocking_binding",
    "labeling_steady_state",
    "labeling_binding",
    "smsr_binding",
]


def _check_concentration(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be finite and non-negative, got {value!r}")
    return arr


@dataclass(frozen=True)
class Kinetics:
    """Association/dissociation and blocking ratios for ``m`` molecule types.

    Parameters
    ----------
    kd : array_like, shape (m,)
        Dissociation constants ``kappa_i / gamma_i`` in nM.
    block_ratio : array_like, shape (m, m), optional
        ``block_ratio[i, j] = gamma_i^{Block,j} / kappa_i^{Block,j}`` in 1/nM.
        The diagonal is ignored.  Defaults to no blocking.
    """

    kd: np.ndarray
    block_ratio: np.ndarray = None

    def __post_init__(self):
        kd = np.atleast_1d(np.asarray(self.kd, dtype=float))
        if kd.ndim != 1 or kd.size == 0:
            raise DomainError("kd must be a non-empty vector")
        if not np.all(np.isfinite(kd)) or np.any(kd <= 0):
            raise DomainError(f"kd entries must be strictly positive, got {kd}")
        m = kd.size
        if self.block_ratio is None:
            br = np.zeros((m, m))
        else:
            br = np.asarray(self.block_ratio, dtype=float)
            if br.ndim == 0:
                br = np.full((m, m), float(br))
            if br.shape != (m, m):
                raise DomainError(f"block_ratio must have shape {(m, m)}, got {br.shape}")
        if not np.all(np.isfinite(br)) or np.any(br < 0):
            raise DomainError("block_ratio entries must be finite and non-negative")
        br = br.copy()
        np.fill_diagonal(br, 0.0)
        kd.setflags(write=False)
        br.setflags(write=False)
        object.__setattr__(self, "kd", kd)
        object.__setattr__(self, "block_ratio", br)

    @property
    def m(self) -> int:
        return self.kd.size

    @classmethod
    def uniform(cls, m: int, kd: float, block_ratio: float = 0.0) -> "Kinetics":
        """Identical types with one shared cross-blocking ratio."""
        return cls(np.full(m, float(kd)), np.full((m, m), float(block_ratio)))

    @classmethod
    def from_rates(cls, m, gamma, kappa, gamma_block=0.0, kappa_block=1.0) -> "Kinetics":
        """Reduce raw rate constants (scalars or per-type arrays) to ratios.

        ``gamma`` is in 1/(nM min), ``kappa`` in 1/min.  ``gamma_block`` and
        ``kappa_block`` may be scalars or ``(m, m)`` matrices.
        """
        gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (m,))
        kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (m,))
        if np.any(gamma <= 0) or np.any(kappa <= 0):
            raise DomainError("association and dissociation rates must be positive")
        gb = np.broadcast_to(np.asarray(gamma_block, dtype=float), (m, m))
        kb = np.broadcast_to(np.asarray(kappa_block, dtype=float), (m, m))
        if np.any(kb <= 0):
            raise DomainError("unblocking rates must be positive")
        return cls(kappa / gamma, gb / kb)


@dataclass(frozen=True)
class ConcentrationVector:
    """Received concentrations ``x`` and environment noise ``a_ne`` (nM)."""

    x: np.ndarray
    a_ne: np.ndarray = None

    def __post_init__(self):
        x = np.atleast_1d(_check_concentration("x", self.x)).astype(float)
        if self.a_ne is None:
            a = np.zeros_like(x)
        else:
            a = np.atleast_1d(_check_concentration("a_ne", self.a_ne)).astype(float)
            if a.size == 1:
                a = np.full(x.shape, a[0])
            elif a.shape != x.shape:
                raise DomainError(f"a_ne has {a.size} entries, x has {x.size}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a_ne", a)

    @property
    def m(self) -> int:
        return self.x.size

    @property
    def total(self) -> np.ndarray:
        return self.x + self.a_ne


def binding_probability(x, a_ne, kd):
    """Fraction of time a receptor is bound: ``(x + a_ne) / (x + a_ne + kd)``.

    Works elementwise on arrays.
    """
    x = np.asarray(x, dtype=float)
    a_ne = np.asarray(a_ne, dtype=float)
    kd = np.asarray(kd, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise DomainError(f"x must be finite and non-negative, got {x}")
    if not np.all(np.isfinite(a_ne)) or np.any(a_ne < 0):
        raise DomainError(f"a_ne must be finite and non-negative, got {a_ne}")
    if not np.all(np.isfinite(kd)) or np.any(kd <= 0):
        raise DomainError(f"kd must be strictly positive, got {kd}")
    s = x + a_ne
    out = s / (s + kd)
    return out[()] if out.ndim == 0 else out


def _check_index(i, m):
    if not (0 <= i < m):
        raise DomainError(f"type index {i} out of range for m={m}")


def blocking_binding(totals, kinetics: Kinetics):
    """Binding and blocking probabilities of every receptor type at once.

    Parameters
    ----------
    totals : array_like, shape (..., m)
        Signal plus noise concentration of each molecule type.

    Returns
    -------
    p_bind, p_block : ndarray, shape (..., m)
    """
    t = np.asarray(totals, dtype=float)
    # foreign[..., i] = sum_j block_ratio[i, j] * t[..., j]
    foreign = t @ kinetics.block_ratio.T
    # scaled by kd so that zero blocking reproduces t / (t + kd) bit for bit
    denom = t + kinetics.kd * (foreign + 1.0)
    return t / denom, kinetics.kd * foreign / denom


def blocking_steady_state(i: int, c: ConcentrationVector, k: Kinetics):
    """Steady state of receptor type ``i`` in the empty/full/blocked chain.

    Returns
    -------
    (p_bind, p_block) : tuple of float
    """
    if c.m != k.m:
        raise DomainError(f"concentration vector has {c.m} types, kinetics has {k.m}")
    _check_index(i, k.m)
    p_bind, p_block = blocking_binding(c.total, k)
    return float(p_bind[i]), float(p_block[i])


def labeling_binding(totals, kd):
    """Per-label binding probabilities for receptors shared by all labels.

    ``totals`` has shape ``(..., m)``; the result has the same shape and sums
    over the last axis to ``sum(t) / (sum(t) + kd)``.
    """
    t = np.asarray(totals, dtype=float)
    return t / (t.sum(axis=-1, keepdims=True) + kd)


def labeling_steady_state(i: int, c: ConcentrationVector, kd: float) -> float:
    """Probability that a shared receptor is bound by a molecule with label ``i``."""
    if kd <= 0:
        raise DomainError("kd must be strictly positive")
    _check_index(i, c.m)
    return float(labeling_binding(c.total, kd)[i])


def smsr_binding(c: ConcentrationVector, kd: float) -> float:
    """Binding probability when all transmitters share one molecule type.

    There is one molecule type, so the noise is counted once:
    ``(sum(x) + a_ne) / (sum(x) + a_ne + kd)``.  ``c.a_ne`` must therefore
    hold the same value in every entry.
    """
    if np.ptp(c.a_ne) != 0:
        raise DomainError("SMSR noise must be identical across transmitters")
    s = float(c.x.sum() + c.a_ne[0])
    return float(binding_probability(s, 0.0, kd))
