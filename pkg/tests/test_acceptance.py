"""Acceptance checks, one test per criterion.

Each test carries a ``criterion`` marker; the conftest prints one PASS/FAIL
line per criterion at the end of the run.  Run directly with
``python tests/test_acceptance.py``.
"""

import io
import math
import sys
import time

import numpy as np
import pytest

from molcap.bounds import (
    BoundParams,
    MacBoundParams,
    equal_rate_objective,
    kl_upper_bound,
    lemma3_equal_rate_point,
    lemma8_smsr_inner,
    lower_bound_binary,
    smsr_interfered_objective,
)
from molcap.capacity import InputConstraint, blahut_arimoto, exhaustive_binary_capacity
from molcap.channels import build_bic, build_bic_from_probabilities, build_smsr
from molcap.cli import config_from_dict, format_results, main, recipe_config, run_experiment
from molcap.kinetics import (
    ConcentrationVector,
    Kinetics,
    binding_probability,
    blocking_steady_state,
    labeling_steady_state,
)
from molcap.simulate import ChainModel, gillespie_occupancy

LOW = {"gamma_block": 0.0003, "kappa_block": 0.15}
HIGH = {"gamma_block": 0.0005, "kappa_block": 0.01}


def run_recipe(name, **overrides):
    return run_experiment(config_from_dict(recipe_config(name), overrides), workers=1)


def by_curve(rows):
    out = {}
    for r in rows:
        out.setdefault(r.curve, {})[r.sweep_value] = r
    return out


def width(row):
    return 0.0 if row.upper_ci is None else row.upper_ci - row.lower_ci


def timed_recipe(name):
    start = time.perf_counter()
    rows = by_curve(run_recipe(name))
    return rows, time.perf_counter() - start


# 1 -------------------------------------------------------------------------


def _draws():
    """Fixed parameter draws: (kind, model, concentrations, kinetics, expected per state)."""
    rng = np.random.default_rng(0)
    cases = []
    for _ in range(50):
        x, a, kd, kappa = rng.uniform(1, 500), rng.uniform(0, 20), rng.uniform(50, 500), rng.uniform(0.01, 1)
        k = Kinetics.uniform(1, kd)
        c = ConcentrationVector([x], [a])
        cases.append(("binding", ChainModel("blocking", 0, kappa), c, k,
                      {"full": binding_probability(x, a, kd)}))
    for _ in range(50):
        m = int(rng.integers(2, 4))
        xs, a, kd = rng.uniform(1, 300, m), rng.uniform(0, 10), rng.uniform(50, 500)
        br, kb, i = rng.uniform(0.001, 0.05), rng.uniform(0.005, 0.2), int(rng.integers(m))
        k = Kinetics.uniform(m, kd, br)
        c = ConcentrationVector(xs, [a] * m)
        p_bind, p_block = blocking_steady_state(i, c, k)
        t = c.total
        others = [j for j in range(m) if j != i]
        denom = t[i] / kd + br * sum(t[j] for j in others) + 1.0
        expected = {"full": p_bind}
        for j in others:
            expected[f"blocked{j}"] = br * t[j] / denom
        assert sum(expected.values()) - p_bind == pytest.approx(p_block, abs=1e-14)
        cases.append(("blocking", ChainModel("blocking", i, 0.1, kb), c, k, expected))
    for _ in range(50):
        m = int(rng.integers(2, 4))
        xs, a, kd = rng.uniform(1, 300, m), rng.uniform(0, 10), rng.uniform(50, 500)
        c = ConcentrationVector(xs, [a] * m)
        k = Kinetics.uniform(m, kd)
        expected = {f"label{j}": labeling_steady_state(j, c, kd) for j in range(m)}
        cases.append(("labeling", ChainModel("labeling", kappa=rng.uniform(0.01, 1)), c, k, expected))
    return cases


@pytest.mark.criterion(1, "Gillespie occupancy matches the closed-form steady states")
def test_criterion_01_steady_state_oracle():
    start = time.perf_counter()
    misses, checks, worst_se = [], 0, 0.0
    for seed, (kind, model, c, k, expected) in enumerate(_draws()):
        est = gillespie_occupancy(model, c, k, seed=seed)
        for label, value in expected.items():
            se = est.std_error(label)
            worst_se = max(worst_se, se)
            checks += 1
            z = (est[label] - value) / se
            if abs(z) > 3:
                misses.append((kind, seed, label, round(z, 2)))
    elapsed = time.perf_counter() - start
    print(f"{checks} comparisons, {len(misses)} beyond 3 SE: {misses}; max SE {worst_se:.2e}; {elapsed:.0f} s")
    assert worst_se < 0.005
    assert elapsed < 120
    assert not misses


# 2 -------------------------------------------------------------------------


@pytest.mark.criterion(2, "on/off closed form equals exhaustive on/off capacity")
def test_criterion_02_binary_lower_bound_exact():
    start = time.perf_counter()
    worst = 0.0
    for peak in range(10, 201, 10):
        ch = build_bic(20, float(peak), 0.0, 250.0, 2)
        for alpha in (0.2, 0.5, 1.0):
            exact, _ = exhaustive_binary_capacity(ch, alpha)
            worst = max(worst, abs(lower_bound_binary(BoundParams(20, float(peak), alpha)) - exact))
    print(f"max |difference| {worst:.2e} nats")
    assert worst < 1e-9
    assert time.perf_counter() - start < 10


# 3 -------------------------------------------------------------------------


@pytest.mark.criterion(3, "KL upper bound dominates capacity; gap shrinks with noise")
def test_criterion_03_upper_bound_dominance():
    start = time.perf_counter()
    a_nes = np.geomspace(1.0, 50.0, 20)
    alphas = np.linspace(0.1, 1.0, 5)
    for alpha in alphas:
        gaps, slack = [], []
        for a_ne in a_nes:
            res = blahut_arimoto(build_bic(160, 80.0, a_ne, 250.0, 101), InputConstraint.from_ratio(80.0, alpha))
            ub = kl_upper_bound(BoundParams(160, 80.0, alpha, a_ne)).value
            assert ub >= res.upper, (alpha, a_ne, ub, res.upper)
            gaps.append(ub - res.capacity)
            slack.append(res.gap)
        steps = np.diff(gaps)
        allowed = np.array(slack[:-1]) + np.array(slack[1:])
        print(f"alpha {alpha:.3f}: gap {gaps[0]:.4f} -> {gaps[-1]:.4f}, max step {steps.max():.2e}")
        assert np.all(steps <= allowed), (alpha, steps)
    assert time.perf_counter() - start < 300


# 4 -------------------------------------------------------------------------


@pytest.mark.criterion(4, "capacity at N' = 100 near the large-N asymptote")
def test_criterion_04_asymptotic_capacity():
    start = time.perf_counter()
    n = 100
    ch = build_bic_from_probabilities(n, np.linspace(0.0, 1.0, 1001))
    res = blahut_arimoto(ch, None)
    predicted = 0.5 * math.log(n / (2 * math.pi * math.e)) + math.log(math.pi)
    rel = abs(res.capacity - predicted) / predicted
    print(f"capacity {res.capacity:.5f} (gap {res.gap:.1e}), asymptote {predicted:.5f}, relative error {rel:.2%}")
    assert time.perf_counter() - start < 30
    assert rel < 0.05


# 5 -------------------------------------------------------------------------


@pytest.mark.criterion(5, "LS versus TS ordering at A_s = 80")
def test_criterion_05_ls_ts_ordering():
    start = time.perf_counter()
    rows = {r.curve: r for r in run_recipe("fig5a", peak=80.0)}
    ls = rows["LS"]
    holds = {}
    for m in (2, 4, 8, 16):
        ts = rows[f"TS m={m}"]
        holds[m] = ts.lower_ci > ls.upper_ci if m <= 4 else ts.upper_ci < ls.lower_ci
        print(f"TS m={m}: {ts.value_nats:.4f} vs LS {ls.value_nats:.4f} -> {'ok' if holds[m] else 'violated'}")
    assert time.perf_counter() - start < 180
    assert all(holds.values()), holds


# 6 -------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(6, "blocking lowers TS capacity; LS wins at small A_s")
def test_criterion_06_blocking_ordering():
    fig6_rows, elapsed = timed_recipe("fig6")
    print(f"fig6 sweep in {elapsed:.0f} s")
    ls = fig6_rows["LS"]
    curves = [fig6_rows[f"TS m=2 {b} blocking"] for b in ("no", "low", "high")]
    values = sorted(ls)
    for a in values:
        line = [c[a] for c in curves]
        print(f"A_s {a:g}: LS {ls[a].value_nats:.4f} TS " + " ".join(f"{r.value_nats:.4f}" for r in line))
        for hi, lo in zip(line, line[1:]):
            assert hi.value_nats + width(hi) + width(lo) >= lo.value_nats, (a, hi.curve, lo.curve)
    first_decade = [a for a in values if a < 10 * values[0]]
    for a in first_decade:
        for c in curves:
            assert ls[a].lower_ci > c[a].upper_ci, (a, c[a].curve)
    assert elapsed < 600


# 7 -------------------------------------------------------------------------


@pytest.mark.criterion(7, "on/off lower bound within 1% of capacity at small A_s'")
def test_criterion_07_lower_bound_tight():
    start = time.perf_counter()
    rows = by_curve(run_recipe("fig8"))
    cap, lb = rows["capacity"], rows["binary lower bound"]
    values = sorted(cap)
    quartile = values[: len(values) // 4]
    for a in quartile:
        rel = abs(cap[a].value_nats - lb[a].value_nats) / cap[a].value_nats
        print(f"A_s' {a:g}: relative gap {rel:.2e}")
        assert rel < 0.01
    assert time.perf_counter() - start < 60


# 8 -------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(8, "DLSR has the largest total capacity; SMSR and DMDR cross")
def test_criterion_08_total_capacity_orderings():
    totalcap_rows, elapsed = timed_recipe("totalcap0")
    print(f"total-capacity sweep in {elapsed:.0f} s")
    dlsr, dmdr, smsr = (totalcap_rows[k] for k in ("DLSR", "DMDR", "SMSR"))
    values = sorted(dlsr)
    for a in values:
        print(f"A_s {a:g}: DLSR {dlsr[a].value_nats:.4f} DMDR {dmdr[a].value_nats:.4f} SMSR {smsr[a].value_nats:.4f}")
        assert dlsr[a].value_nats >= dmdr[a].value_nats
        assert dlsr[a].value_nats >= smsr[a].value_nats
    assert smsr[values[0]].value_nats > dmdr[values[0]].value_nats
    assert smsr[values[-1]].value_nats < dmdr[values[-1]].value_nats
    assert elapsed < 1200


# 9 -------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(9, "inner-bound rate pairs stay below on/off total capacity")
def test_criterion_09_inner_bounds_achievable():
    rows, elapsed = timed_recipe("regions")
    totals = {name[: -len(" binary total")]: next(iter(v.values())).value_nats
              for name, v in rows.items() if name.endswith(" binary total")}
    mac = {"DLSR": ("DLSR", {}), "DMDR low blocking": ("DMDR_BLOCK", LOW),
           "DMDR high blocking": ("DMDR_BLOCK", HIGH)}
    checked = 0
    for name, curve in rows.items():
        if name.endswith(" binary total"):
            continue
        family = next(f for f in totals if name.startswith(f + " "))
        for r in curve.values():
            assert r.meta["r1"] + r.meta["r2"] <= totals[family] + 1e-6, (name, r.meta)
            checked += 1
    for family, (kind, rates) in mac.items():
        kin = Kinetics.from_rates(2, 0.0004, 0.1, rates.get("gamma_block", 0.0), rates.get("kappa_block", 1.0))
        point, _ = lemma3_equal_rate_point(MacBoundParams(6, 10, 100.0, 0.5, kinetics=kin), kind)
        assert point.total <= totals[family] + 1e-6
        checked += 1
    print(f"{checked} rate pairs checked against {totals}")
    assert elapsed < 600


# 10 ------------------------------------------------------------------------


def _p_alone_interfered(kind, peak, kin, receptors):
    kd = 250.0
    if kind == "DLSR":
        return (kd / (peak + kd)) ** receptors, ((peak + kd) / (2 * peak + kd)) ** receptors
    half = receptors / 2
    foreign = kin.block_ratio[0, 1] * peak + 1.0
    return (kd / (peak + kd)) ** half, (foreign / (peak / kd + foreign)) ** half


@pytest.mark.criterion(10, "stationarity roots have small residuals and maximise their objectives")
def test_criterion_10_root_residuals():
    start = time.perf_counter()
    grid = np.arange(1, 10_000) * 1e-4
    kins = {"none": Kinetics.uniform(2, 250.0),
            "low": Kinetics.from_rates(2, 0.0004, 0.1, **LOW),
            "high": Kinetics.from_rates(2, 0.0004, 0.1, **HIGH)}
    interior = 0
    for peak in (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0):
        for kind, kin in (("DLSR", kins["none"]), ("DMDR_BLOCK", kins["low"]), ("DMDR_BLOCK", kins["high"])):
            bp = MacBoundParams(6, 10, peak, 0.5, kinetics=kin)
            _, root = lemma3_equal_rate_point(bp, kind)
            if not root.interior:
                continue
            interior += 1
            p0, p1 = _p_alone_interfered(kind, peak, kin, 60)
            assert abs(root.residual) < 1e-8
            assert equal_rate_objective(root.alpha, p0, p1) >= equal_rate_objective(grid, p0, p1).max() - 1e-12
        for peaks in ((peak, peak), (peak, 2 * peak)):
            bp = MacBoundParams(6, 10, peaks, 0.5)
            _, _, details = lemma8_smsr_inner(bp)
            channel = build_smsr(bp.spec("SMSR"))
            pts = channel.inputs.points

            def row(x):
                return channel.prob[int(np.flatnonzero(np.all(pts == x, axis=1))[0])]

            for i, key in enumerate(("user1", "user2")):
                root = details[key]["root"]
                if not root.interior:
                    continue
                interior += 1
                on = row(np.array(peaks))
                off = row(np.array([0.0, peaks[1]]) if i == 0 else np.array([peaks[0], 0.0]))
                assert abs(root.residual) < 1e-8
                best = smsr_interfered_objective(grid, off, on).max()
                assert smsr_interfered_objective(root.alpha, off, on) >= best - 1e-12
    print(f"{interior} interior roots checked")
    assert interior > 0
    assert time.perf_counter() - start < 60


# 11 ------------------------------------------------------------------------


def _csv(argv, workers):
    out, err = io.StringIO(), io.StringIO()
    assert main(["run", *argv, "-o", "-", "--workers", str(workers)], out=out, err=err) == 0, err.getvalue()
    return out.getvalue().encode()


@pytest.mark.criterion(11, "re-running a recipe gives byte-identical CSV")
def test_criterion_11_determinism():
    runs = [
        ["--recipe", "fig8"],
        ["--recipe", "fig7"],
        ["--recipe", "equalrate"],
        ["--recipe", "regions"],
        ["--recipe", "totalcap0", "--peak", "10"],
        ["--recipe", "fig6", "--peak", "10"],
    ]
    for argv in runs:
        first = _csv(argv, 1)
        assert first == _csv(argv, 1), argv
        assert first == _csv(argv, 2), argv
    cfg = config_from_dict(recipe_config("fig9"), {"peak": 5.0})
    assert format_results(run_experiment(cfg, 1)) == format_results(run_experiment(cfg, 1))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
