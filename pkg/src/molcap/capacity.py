"""Numerical capacity of discrete memoryless channels under input-cost limits.

The single-user solver is Blahut-Arimoto with linear cost constraints
``E[x_k] <= average_k``.  Each iteration is an exact alternating maximisation
step: the multiplicative update ``p(x) * exp(D(x))`` is exponentially tilted
by ``exp(-s . x)``, with the multipliers ``s >= 0`` chosen so that the new
distribution meets every average constraint.  At any ``(p, s)`` the pair

    lower = I(p)                         (p feasible)
    upper = max_x [D(x) - s . x] + s . average

brackets the constrained capacity, and the solver stops once
``upper - lower < tol``.

Multiple-access sum rates are maximised over product input distributions
by cycling through the users.  With the other users fixed, the sum rate as
a function of user ``i``'s distribution is the mutual information of the
induced channel ``P(y | x_i)`` plus a linear term ``I(X_{-i}; Y | X_i = x)``,
so each block step is the same tilted Blahut-Arimoto solve with an extra
per-input reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import MAC_KINDS, MAX_OUTCOMES, DiscreteChannel, ScenarioSpec, build_channel
from .errors import ConvergenceError, DomainError

__all__ = [
    "InputConstraint",
    "CapacityResult",
    "mutual_information",
    "blahut_arimoto",
    "mac_total_capacity",
    "exhaustive_binary_capacity",
    "golden_section_max",
    "scenario_capacity",
]

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 100_000
_TINY = 1e-300


@dataclass(frozen=True)
class InputConstraint:
    """Peak and average limits on one input coordinate (nM)."""

    peak: float
    average: float

    def __post_init__(self):
        if not (self.peak >= 0 and np.isfinite(self.peak)):
            raise DomainError(f"peak must be finite and non-negative, got {self.peak}")
        if self.peak > 0 and not (0 < self.average <= self.peak * (1 + 1e-12)):
            raise DomainError(f"need 0 < average <= peak, got {self.average} vs {self.peak}")

    @classmethod
    def from_ratio(cls, peak: float, alpha_s: float) -> "InputConstraint":
        return cls(float(peak), float(alpha_s) * float(peak))


@dataclass
class CapacityResult:
    """Outcome of a capacity computation.

    ``capacity`` is the certified lower end of the final bracket and
    ``gap`` its width.  For multiple-access runs ``input_pmf`` is a list of
    per-user distributions and ``gap`` certifies only that every user's
    distribution is optimal given the others.
    """

    capacity: float
    input_pmf: object
    iterations: int
    gap: float
    constraint_slack: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def upper(self) -> float:
        return self.capacity + self.gap


def _as_constraints(constraint, dim):
    if constraint is None:
        return []
    if isinstance(constraint, InputConstraint):
        constraint = [constraint]
    constraint = list(constraint)
    if len(constraint) == 1 and dim > 1:
        constraint = constraint * dim
    if len(constraint) != dim:
        raise DomainError(f"need one constraint per input coordinate ({dim}), got {len(constraint)}")
    return constraint


def mutual_information(channel: DiscreteChannel, pmf) -> float:
    """``I(X; Y)`` in nats for input distribution ``pmf`` over the grid."""
    p = np.asarray(pmf, dtype=float).ravel()
    if p.shape != (channel.num_inputs,):
        raise DomainError(
            f"pmf has {p.size} entries but the channel has {channel.num_inputs} inputs"
        )
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise DomainError("pmf must be a probability vector")
    q = p @ channel.prob
    logq = np.log(np.maximum(q, _TINY))
    d = channel.row_neg_entropy - channel.prob @ logq
    return float(p[p > 0] @ d[p > 0])


def _softmax(t):
    z = np.exp(t - t.max())
    return z / z.sum()


def _tilt_1d(t, c, b, s0):
    """Smallest ``s >= 0`` with ``E[c] <= b`` under ``p ~ exp(t - s c)``.

    ``c`` is scaled to ``[0, 1]``.  Safeguarded Newton on the (decreasing)
    tilted mean, finishing on the feasible side of the bracket.
    """
    p = _softmax(t)
    mean = p @ c
    if mean <= b:
        return 0.0
    lo, hi = 0.0, max(s0, 1.0)
    while _softmax(t - hi * c) @ c > b:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            break
    s = s0 if lo < s0 < hi else 0.5 * (lo + hi)
    for _ in range(200):
        p = _softmax(t - s * c)
        mean = p @ c
        if mean > b:
            lo = s
        else:
            hi = s
            if b - mean <= 1e-14:
                return s
        var = p @ (c - mean) ** 2
        step = s + (mean - b) / var if var > 0 else 0.5 * (lo + hi)
        s = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(hi, 1.0):
            break
    return hi


def _project(t, cost, budget, s):
    """Tilt logits ``t`` so every cost constraint holds; returns (logp, s)."""
    if cost is None:
        logp = t - t.max()
        return logp - np.log(np.exp(logp).sum()), s
    s = s.copy()
    k = cost.shape[1]
    for _ in range(500):
        for j in range(k):
            others = cost @ s - cost[:, j] * s[j]
            s[j] = _tilt_1d(t - others, cost[:, j], budget[j], s[j])
        if k == 1:
            break
        p = _softmax(t - cost @ s)
        mean = p @ cost
        viol = mean - budget
        slack_ok = np.all((s == 0) | (np.abs(viol) <= 1e-12))
        if np.all(viol <= 1e-13) and slack_ok:
            break
    u = t - cost @ s
    u = u - u.max()
    return u - np.log(np.exp(u).sum()), s


def _scores(prob, neg_ent, bonus, p):
    q = p @ prob
    logq = np.log(np.maximum(q, _TINY))
    score = neg_ent - prob @ logq
    if bonus is not None:
        score = score + bonus
    return score, q


def _bracket(score, p, cost, budget, s):
    lower = float(p @ score)
    if cost is None:
        return lower, float(score.max())
    return lower, float((score - cost @ s).max() + s @ budget)


def _objective(prob, neg_ent, bonus, p):
    score, _ = _scores(prob, neg_ent, bonus, p)
    return float(p @ score)


def _mixing_step(prob, neg_ent, bonus, cost, budget, p, j, iters=30):
    """Move mass from ``p`` towards input ``j`` by exact line search.

    The target is ``w e_j + (1 - w) e_0`` with the largest ``w`` that keeps
    it within budget (input 0 costs nothing), so the whole segment is
    feasible.  Returns the new pmf, or ``None`` if no progress is possible.
    Needed when ``e_j`` reaches outputs the current ``p`` never produces: the
    Newton model has unbounded curvature there and would not move.
    """
    target = np.zeros_like(p)
    w = 1.0
    if cost is not None:
        pos = cost[j] > 0
        if np.any(pos):
            w = min(1.0, float(np.min(budget[pos] / cost[j][pos])))
    target[j] += w
    target[0] += 1.0 - w
    step = target - p

    def slope(t):
        score, _ = _scores(prob, neg_ent, bonus, p + t * step)
        with np.errstate(invalid="ignore"):
            return score @ step

    if not slope(0.0) > 0:
        return None
    if not slope(1.0) < 0:
        return target
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    return p + lo * step


def _newton_polish(
    prob, neg_ent, cost, budget, bonus, p, tol, s0=None, max_steps=400, max_support=120, seed_support=16
):
    """Primal active-set Newton method for the constrained maximisation.

    Works on the face ``{p_x = 0 for x outside A}`` of the simplex with the
    binding average constraints held as equalities; each step solves the
    equality-constrained Newton system (Hessian ``-P_A diag(1/q) P_A^T``),
    moves to the first blocking bound, and grows or shrinks ``A`` or the set
    of binding constraints.  Returns a feasible ``(p, s)``.
    """
    g = p.size
    k = 0 if cost is None else cost.shape[1]
    p = p.copy()
    keep = p > 1e-8 * p.max()
    if keep.sum() > max_support:
        # mass still spread out: seed with the best tilted scores and let
        # the active set grow from there
        score, _ = _scores(prob, neg_ent, bonus, p)
        if k and s0 is not None:
            score = score - cost @ s0
        keep[:] = False
        keep[np.argsort(score)[-seed_support:]] = True
    keep[0] = True  # the all-zero input, free under every cost
    p[~keep] = 0.0
    p /= p.sum()
    if k:
        # truncation can push the mean past a budget; mixing in the
        # zero input lowers every cost coordinate
        used = p @ cost
        over = used > budget
        if np.any(over):
            t = np.max((used[over] - budget[over]) / used[over])
            p *= 1.0 - t
            p[0] += t
    support = np.flatnonzero(p > 0)
    active = [j for j in range(k) if p @ cost[:, j] >= budget[j] - 1e-12]
    s = np.zeros(k)
    fval = _objective(prob, neg_ent, bonus, p)
    for _ in range(max_steps):
        score, q = _scores(prob, neg_ent, bonus, p)
        pr = prob[support]
        na, nc = support.size, len(active)
        ca = cost[np.ix_(support, active)] if nc else np.zeros((na, 0))
        kkt = np.zeros((na + nc + 1, na + nc + 1))
        kkt[:na, :na] = (pr / np.maximum(q, _TINY)) @ pr.T
        kkt[:na, na:na + nc] = ca
        kkt[:na, -1] = 1.0
        kkt[na:na + nc, :na] = ca.T
        kkt[-1, :na] = 1.0
        rhs = np.zeros(na + nc + 1)
        rhs[:na] = score[support]
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        d, mu, lam = sol[:na], sol[na:na + nc], sol[-1]
        s[:] = 0.0
        if nc:
            s[active] = mu
        resid = score[support] - lam - (ca @ mu if nc else 0.0)
        stationary = np.abs(resid).max() < 1e-2 * tol
        if stationary and nc and mu.min() < 0:
            active.pop(int(np.argmin(mu)))
            continue
        if stationary or np.abs(d).max() < 1e-10:
            tilt = score - (cost @ s if k else 0.0)
            outside = np.setdiff1d(np.arange(g), support)
            if stationary:
                if outside.size == 0:
                    break
                j = outside[np.argmax(tilt[outside])]
                if tilt[j] <= lam + 1e-2 * tol:
                    break
                support = np.union1d(support, [j])
                continue
            # stalled: the Newton model cannot move mass, take a line search
            j = int(np.argmax(tilt))
            moved = _mixing_step(prob, neg_ent, bonus, cost, budget, p, j)
            if moved is None or np.abs(moved - p).max() < 1e-14:
                break
            p = moved
            support = np.flatnonzero(p > 0)
            active = [i for i in range(k) if p @ cost[:, i] >= budget[i] - 1e-12]
            fval = _objective(prob, neg_ent, bonus, p)
            continue
        # longest step keeping p >= 0 and the slack constraints satisfied
        t, block, cblock = 1.0, None, None
        pa = p[support]
        neg = d < 0
        if np.any(neg):
            ratios = -pa[neg] / d[neg]
            i = int(np.argmin(ratios))
            if ratios[i] < t:
                t, block = float(ratios[i]), np.flatnonzero(neg)[i]
        for j in range(k):
            if j in active:
                continue
            rate = cost[support, j] @ d
            if rate > 0:
                room = (budget[j] - p @ cost[:, j]) / rate
                if room < t:
                    t, block, cblock = max(room, 0.0), None, j
        trial = p.copy()
        trial[support] = np.maximum(pa + t * d, 0.0)
        ftrial = _objective(prob, neg_ent, bonus, trial / trial.sum())
        while ftrial < fval - 1e-15 and t > 1e-10 and block is None and cblock is None:
            t *= 0.5
            trial[support] = np.maximum(pa + t * d, 0.0)
            ftrial = _objective(prob, neg_ent, bonus, trial / trial.sum())
        if block is not None:
            trial[support[block]] = 0.0
            support = np.delete(support, block)
        if cblock is not None:
            active.append(cblock)
        p = trial / trial.sum()
        fval = _objective(prob, neg_ent, bonus, p)
    if k:
        s = np.maximum(s, 0.0)
        if np.any(p @ cost > budget):
            logp, s = _project(np.log(np.maximum(p, _TINY)), cost, budget, s)
            p = np.exp(logp)
    return p, s


def _ba_core(prob, neg_ent, cost, budget, bonus, tol, max_iter, logp0, s0=None):
    """Tilted Blahut-Arimoto iterations with periodic Newton polishing.

    Returns ``(p, lower, upper, iterations, s)``.
    """
    k = 0 if cost is None else cost.shape[1]
    s = np.zeros(k) if s0 is None else np.asarray(s0, dtype=float).copy()
    logp, s = _project(logp0, cost, budget, s)
    lower = upper = math.nan
    p = np.exp(logp)
    next_polish = 20
    for it in range(1, max_iter + 1):
        p = np.exp(logp)
        score, _ = _scores(prob, neg_ent, bonus, p)
        new_logp, s = _project(logp + score, cost, budget, s)
        lower, upper = _bracket(score, p, cost, budget, s)
        if upper - lower < tol:
            return p, lower, upper, it, s
        logp = new_logp
        if it == next_polish:
            next_polish = it + max(20, it // 2)
            pp, ss = _newton_polish(prob, neg_ent, cost, budget, bonus, np.exp(logp), tol, s)
            if True:
                sc, _ = _scores(prob, neg_ent, bonus, pp)
                lo2, up2 = _bracket(sc, pp, cost, budget, ss)
                if up2 - lo2 < tol:
                    return pp, lo2, up2, it, ss
                if lo2 > lower:
                    logp = np.maximum(np.log(np.maximum(pp, _TINY)), -700.0)
                    logp, s = _project(logp, cost, budget, ss)
    raise ConvergenceError(
        f"Blahut-Arimoto did not reach gap {tol:g} in {max_iter} iterations "
        f"(bracket [{lower:.10g}, {upper:.10g}])",
        best=(p, lower, upper, max_iter, s),
    )


def _cost_setup(points, constraints):
    """Scaled cost matrix and budgets; None when no average is binding."""
    if not constraints:
        return None, None, None
    peaks = np.array([c.peak for c in constraints], dtype=float)
    avgs = np.array([c.average for c in constraints], dtype=float)
    if np.any(points > peaks * (1 + 1e-12)):
        raise DomainError("input grid exceeds the peak constraint")
    scale = np.where(peaks > 0, peaks, 1.0)
    cost = points / scale
    budget = np.where(peaks > 0, avgs / scale, 1.0)
    active = budget < cost.max(axis=0)
    if not np.any(active):
        return None, None, scale
    # inactive coordinates stay in the matrix with zero multiplier
    return cost, np.where(active, budget, np.inf), scale


def _result(p, lower, upper, it, s, points, constraints, meta):
    slack = np.array([c.average for c in constraints]) - p @ points if constraints else np.array([])
    meta = dict(meta)
    meta["multipliers"] = [float(v) for v in np.atleast_1d(s)]
    return CapacityResult(float(lower), p, it, max(float(upper - lower), 0.0), slack, meta)


def blahut_arimoto(
    channel: DiscreteChannel,
    constraint=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    init=None,
    bonus=None,
) -> CapacityResult:
    """Capacity of ``channel`` subject to average input constraints.

    Parameters
    ----------
    channel : DiscreteChannel
    constraint : InputConstraint or sequence of them, optional
        One per input coordinate (a single one is broadcast).  Peaks are
        enforced by the grid and only checked here.
    tol : float
        Stop once the certified capacity bracket is narrower than this.
    init : array_like, optional
        Starting input distribution (default uniform).
    bonus : array_like, optional
        Extra reward per input added to the objective, ``I(p) + p . bonus``.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations; ``best`` holds the last bracket.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    points = channel.inputs.points
    constraints = _as_constraints(constraint, channel.inputs.dim)
    cost, budget, _ = _cost_setup(points, constraints)
    if cost is not None:
        budget = np.where(np.isinf(budget), cost.max(axis=0) + 1.0, budget)
    g = channel.num_inputs
    if init is None:
        logp0 = np.full(g, -math.log(g))
    else:
        with np.errstate(divide="ignore"):
            logp0 = np.log(np.asarray(init, dtype=float))
        logp0 = np.maximum(logp0, -700.0)
    bonus = None if bonus is None else np.asarray(bonus, dtype=float)
    try:
        p, lo, up, it, s = _ba_core(
            channel.prob, channel.row_neg_entropy, cost, budget, bonus, tol, max_iter, logp0
        )
    except ConvergenceError as err:
        p, lo, up, it, s = err.best
        err.best = _result(p, lo, up, it, s, points, constraints, {"converged": False})
        raise
    return _result(p, lo, up, it, s, points, constraints, {"tol": tol, "converged": True})


def _user_axes(channel, constraints):
    grid = channel.inputs
    if grid.axes is None or len(grid.axes) < 2:
        raise DomainError("multiple-access channels need a product input grid")
    return grid.shape


def _sum_rate(prob4, neg_ent4, pmfs):
    """Sum rate of a product input distribution on a two-or-more-user grid."""
    joint = pmfs[0]
    for p in pmfs[1:]:
        joint = np.multiply.outer(joint, p)
    joint = joint.ravel()
    q = joint @ prob4
    logq = np.log(np.maximum(q, _TINY))
    d = neg_ent4 - prob4 @ logq
    return float(joint @ d), d


def _induced(channel, shape, pmfs, user):
    """Channel ``P(y | x_user)`` seen by one user, and the averaged row terms."""
    prob = channel.prob.reshape(*shape, channel.num_outputs)
    negent = channel.row_neg_entropy.reshape(shape)
    w = np.moveaxis(prob, user, 0)
    h = np.moveaxis(negent, user, 0)
    # average out the other users one axis at a time; axis 1 is always next
    for a in range(len(shape)):
        if a != user:
            w = np.tensordot(w, pmfs[a], axes=([1], [0]))
            h = np.tensordot(h, pmfs[a], axes=([1], [0]))
    return w, h


def mac_total_capacity(
    channel: DiscreteChannel,
    constraints,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    starts: int = 5,
    seed: int = 0,
    mode: str = "product",
    init=None,
    max_cycles: int = 10_000,
) -> CapacityResult:
    """Sum capacity of a multiple-access channel on a product input grid.

    ``mode="product"`` maximises over independent inputs (a proper MAC) by
    alternating maximisation, keeping the best of a uniform start and
    ``starts`` random starts drawn from ``numpy.random.default_rng(seed)``.
    ``mode="cooperative"`` lets the inputs be jointly distributed (plain
    constrained Blahut-Arimoto on the joint grid) and is an upper reference.

    ``init`` (a list of per-user pmfs) replaces the uniform start.
    """
    shape = _user_axes(channel, constraints)
    m = len(shape)
    constraints = _as_constraints(constraints, m)
    if mode == "cooperative":
        res = blahut_arimoto(channel, constraints, tol, max_iter)
        res.meta["mode"] = "cooperative"
        return res
    if mode != "product":
        raise DomainError(f"unknown mode {mode!r}")
    axes = channel.inputs.axes
    rng = np.random.default_rng(seed)
    inits = [init if init is not None else [np.full(n, 1.0 / n) for n in shape]]
    for _ in range(starts):
        inits.append([rng.dirichlet(np.ones(n)) for n in shape])
    best = None
    failures = []
    for k, start in enumerate(inits):
        try:
            res = _alternate(channel, shape, axes, constraints, tol, max_iter, start, max_cycles)
        except ConvergenceError as err:
            failures.append(err)
            continue
        res.meta["start"] = k
        if best is None or res.capacity > best.capacity:
            best = res
    if best is None:
        raise ConvergenceError("no multi-start run converged", best=failures[-1].best)
    best.meta.update({"mode": "product", "seed": seed, "starts": starts})
    return best


def _alternate(channel, shape, axes, constraints, tol, max_iter, start, max_cycles):
    m = len(shape)
    pmfs = [np.asarray(p, dtype=float) / np.sum(p) for p in start]
    mults = [None] * m
    iters = 0
    prev = -math.inf
    gaps = [math.inf] * m
    for cycle in range(1, max_cycles + 1):
        for u in range(m):
            w, h = _induced(channel, shape, pmfs, u)
            negent_w = _row_neg_entropy(w)
            bonus = h - negent_w  # I(X_-u; Y | X_u = x) >= 0
            c = constraints[u]
            pts = axes[u][:, None]
            cost, budget, _ = _cost_setup(pts, [c])
            if cost is not None:
                budget = np.where(np.isinf(budget), 2.0, budget)
            with np.errstate(divide="ignore"):
                logp0 = np.maximum(np.log(pmfs[u]), -700.0)
            p, lo, up, it, s = _ba_core(
                w, negent_w, cost, budget, bonus, tol * 0.1, max_iter, logp0, mults[u]
            )
            pmfs[u], mults[u], gaps[u] = p, s, up - lo
            iters += it
        value, _ = _sum_rate(channel.prob, channel.row_neg_entropy, pmfs)
        if value - prev < tol:
            break
        prev = value
    else:
        raise ConvergenceError(f"alternating maximisation did not settle in {max_cycles} cycles")
    slack = np.array([c.average - p @ a for c, p, a in zip(constraints, pmfs, axes)])
    return CapacityResult(
        value, pmfs, cycle, max(max(gaps), 0.0), slack, {"cycles": cycle, "ba_iterations": iters}
    )


def _row_neg_entropy(w):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(w > 0, w * np.log(np.where(w > 0, w, 1.0)), 0.0)
    return t.sum(axis=1)


def golden_section_max(f, lo: float, hi: float, xtol: float = 1e-10):
    """Maximise a unimodal ``f`` on ``[lo, hi]``; ties move left.

    Returns ``(x, f(x))``; the endpoints are also compared so a maximum on
    the boundary is found exactly.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    candidates = [(lo, f(lo)), ((a + b) / 2.0, f((a + b) / 2.0)), (hi, f(hi))]
    x, fx = candidates[0]
    for xc, fxc in candidates[1:]:
        if fxc > fx:
            x, fx = xc, fxc
    return x, fx


def exhaustive_binary_capacity(channel: DiscreteChannel, alpha_s, xtol: float = 1e-10):
    """Best mutual information with on/off inputs and ``P(on) <= alpha_s``.

    ``channel`` must have two inputs per user, ``{0, peak}``.  For one user
    the concave objective is maximised by golden-section search.  For two
    users the inputs are independent; the inner maximisation over the second
    user is concave, the outer one is scanned on a grid and then refined.

    Returns
    -------
    capacity : float
    alphas : tuple of float
        Maximising on-probabilities.
    """
    shape = channel.inputs.shape
    if any(n != 2 for n in shape):
        raise DomainError("exhaustive_binary_capacity needs a {0, peak} grid per user")
    alphas_s = np.broadcast_to(np.asarray(alpha_s, dtype=float), (len(shape),))
    prob, negent = channel.prob, channel.row_neg_entropy

    def info(alphas):
        pmfs = [np.array([1.0 - a, a]) for a in alphas]
        return _sum_rate(prob, negent, pmfs)[0]

    if len(shape) == 1:
        a, v = golden_section_max(lambda a: info([a]), 0.0, float(alphas_s[0]), xtol)
        return v, (a,)
    if len(shape) != 2:
        raise DomainError("binary search supports one or two users")

    def inner(a1):
        a2, v = golden_section_max(lambda a2: info([a1, a2]), 0.0, float(alphas_s[1]), xtol)
        return v, a2

    scan = np.linspace(0.0, alphas_s[0], 41)
    vals = [inner(a)[0] for a in scan]
    j = int(np.argmax(vals))
    lo, hi = scan[max(j - 1, 0)], scan[min(j + 1, len(scan) - 1)]
    a1, v = golden_section_max(lambda a: inner(a)[0], float(lo), float(hi), xtol)
    a2 = inner(a1)[1]
    return v, (a1, a2)


def scenario_capacity(spec: ScenarioSpec, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                      starts=5, seed=0, mode="product", max_outcomes=MAX_OUTCOMES) -> CapacityResult:
    """Capacity of a whole scenario in nats.

    LS and TS_BLOCK are single transmitters (TS_BLOCK may correlate its
    colonies); TS is ``m`` identical orthogonal colonies; MAC kinds report
    the total (sum) capacity.
    """
    channel = build_channel(spec, max_outcomes)
    peaks = spec.input_peaks
    cons = [InputConstraint(p, a) for p, a in zip(peaks, spec.input_averages)]
    if spec.kind in MAC_KINDS:
        res = mac_total_capacity(channel, cons, tol, max_iter, starts, seed, mode)
    else:
        res = blahut_arimoto(channel, cons, tol, max_iter)
    if spec.kind == "TS":
        res = CapacityResult(
            spec.m * res.capacity, res.input_pmf, res.iterations, spec.m * res.gap,
            res.constraint_slack, dict(res.meta, colonies=spec.m),
        )
    res.meta.update({"grid_size": spec.grid_size, "tol": tol})
    return res
