"""Exit criteria for the package, one test per criterion.

Each test appends a PASS/FAIL line to ``RESULTS``; the lines are printed in
the pytest terminal summary. Tolerances and runtime limits are fixed here.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from certcal import simulation as sim
from certcal.calibration import (
    CertaintyPredictor,
    binomial_tail_v,
    calibrate,
    predict,
    predict_many,
)
from certcal.evaluation import EvaluationReport, evaluate, fpr_alpha_curve
from certcal.scores import (
    AnswerSample,
    exact_match_clusters,
    kernel_language_entropy,
    normalize_kernel,
    semantic_entropy,
    vanilla_entropy,
)
from certcal.shift import rejection_sample

RESULTS = []
DELTA = 0.05
LIMIT_2000 = DELTA + 3 * math.sqrt(DELTA * (1 - DELTA) / 2000)  # ~0.0646


def record(name, ok, detail):
    RESULTS.append((name, bool(ok), detail))
    assert ok, f"{name}: {detail}"


def test_type1_certification_matrix():
    t0 = time.perf_counter()
    worlds = {"uniform(0,1)": sim.uniform_law(), "beta(2,5)": sim.beta_law(2, 5),
              "truncnorm(0,1)": sim.normal_law(0, 1)}
    worst, worst_cfg = 0.0, None
    for i, (name, law) in enumerate(worlds.items()):
        for n0 in (50, 200, 1000):
            for alpha in (0.05, 0.10):
                rep = sim.run_type1_trials(sim.SyntheticWorld(law, law), n0, alpha, DELTA, 2000,
                                           seed=1000 + 17 * i + n0 + int(alpha * 100))
                if rep.exceed_rate >= worst:
                    worst, worst_cfg = rep.exceed_rate, (name, n0, alpha)
    elapsed = time.perf_counter() - t0
    record("type I certification (18 configs x 2000 trials)",
           worst <= LIMIT_2000 and elapsed < 60,
           f"max exceed_rate {worst:.4f} at {worst_cfg} <= {LIMIT_2000:.4f}; {elapsed:.1f}s < 60s")


def test_small_sample_abstention():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    preds = [calibrate(rng.random(10), 0.05, 0.05) for _ in range(1000)]
    elapsed = time.perf_counter() - t0
    ok = all(p.k_hat == 11 and math.isinf(p.tau) for p in preds)
    v10 = sim.oracle_v_exact(10, 10, Fraction(1, 20))
    record("small-sample abstention (n0=10)", ok and v10 > Fraction(1, 20) and elapsed < 1,
           f"k_hat=11, tau=+inf in {sum(p.k_hat == 11 for p in preds)}/1000 trials; "
           f"exact v(10)={float(v10):.4f} > 0.05; {elapsed:.2f}s < 1s")


def test_v_oracle_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for alpha in (Fraction(1, 10), Fraction(1, 20), Fraction(1, 4), Fraction(1, 2)):
        for n0 in range(0, 31):
            for k in range(1, n0 + 2):
                err = abs(binomial_tail_v(k, n0, float(alpha)) - float(sim.oracle_v_exact(k, n0, alpha)))
                worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    record("v(k) log-space vs exact rational", worst <= 1e-12 and elapsed < 5,
           f"max abs error {worst:.2e} <= 1e-12; {elapsed:.2f}s < 5s")


def test_type2_ordinal():
    t0 = time.perf_counter()
    alpha = 0.05
    world = sim.SyntheticWorld(sim.uniform_law(), sim.beta_law(2, 1)).with_oracle(alpha)
    rows = sim.run_type2_study(world, [100, 1000, 10000], alpha, DELTA, 500, seed=2)
    med = [r.median_excess for r in rows]
    elapsed = time.perf_counter() - t0
    ok = med[0] >= med[1] >= med[2] and med[2] <= 0.02 and elapsed < 120
    record("type II ordinal shrinkage", ok,
           "median excess " + ", ".join(f"n0={r.n0}: {r.median_excess:.4f}" for r in rows)
           + f"; last <= 0.02; {elapsed:.1f}s < 120s")


def test_type3_shift_certification():
    t0 = time.perf_counter()
    src, tgt = sim.uniform_law(), sim.beta_law(2, 1)
    good = sim.run_shift_trials(src, tgt, 1000, 0.05, DELTA, 2000, seed=3, bound_b=2.0)
    bad = sim.run_shift_trials(src, tgt, 1000, 0.05, DELTA, 2000, seed=3, bound_b=2.0,
                               ratio=lambda x: np.ones_like(x))
    elapsed = time.perf_counter() - t0
    ok = good.exceed_rate <= LIMIT_2000 and bad.exceed_rate > 0.25 and elapsed < 120
    record("covariate-shift certification", ok,
           f"target exceed_rate {good.exceed_rate:.4f} <= {LIMIT_2000:.4f}; "
           f"negative control {bad.exceed_rate:.4f} > 0.25; {elapsed:.1f}s < 120s")


def test_rejection_sampling_distribution():
    rng = np.random.default_rng(4)
    x = rng.random(10_000)
    acc = rejection_sample(2 * x, 2.0, seed=2024)
    rate = acc.size / x.size
    ref = stats.beta(2, 1).rvs(size=10_000, random_state=np.random.default_rng(5))
    n, m = acc.size, ref.size
    d = stats.ks_2samp(x[acc], ref).statistic
    crit = math.sqrt(-math.log(0.01 / 2) / 2) * math.sqrt((n + m) / (n * m))
    record("rejection sampling -> Beta(2,1)", d < crit and abs(rate - 0.5) <= 0.02,
           f"KS D={d:.4f} < {crit:.4f} (1% critical); acceptance {rate:.4f} in 0.5 +- 0.02")


def test_score_identities():
    vne_mixed = -kernel_language_entropy(normalize_kernel(np.eye(8))).value
    v = np.random.default_rng(6).normal(size=5)
    vne_pure = -kernel_language_entropy(normalize_kernel(np.outer(v, v))).value
    ve = vanilla_entropy(["a", "a", "a", "b", "b"]).value
    ve_closed = -(0.6 * math.log(0.6) + 0.4 * math.log(0.4))
    rng = np.random.default_rng(7)
    se_eq = True
    for _ in range(500):
        answers = list(rng.choice(["A", "B", "C"], size=int(rng.integers(1, 16))))
        samples = [AnswerSample(a, None, c) for a, c in zip(answers, exact_match_clusters(answers))]
        se_eq &= semantic_entropy(samples).value == vanilla_entropy(answers).value
    ok = (abs(vne_mixed - math.log(8)) <= 1e-10 and abs(vne_pure) <= 1e-10
          and abs(-ve - ve_closed) <= 1e-12 and se_eq)
    record("score-function identities", ok,
           f"|VNE(I/8)-ln8|={abs(vne_mixed - math.log(8)):.1e}, |VNE(rank1)|={abs(vne_pure):.1e}, "
           f"|VE{{3,2}}-closed|={abs(-ve - ve_closed):.1e}, SE==VE on 500 MC records: {se_eq}")


def _random_increasing(rng):
    prims = [
        lambda: (lambda a, b: lambda x: a * x + b)(rng.uniform(0.01, 100), rng.normal(0, 10)),
        lambda: (lambda s: lambda x: np.exp(s * x))(rng.uniform(0.1, 3)),
        lambda: (lambda c: lambda x: x + c * x**3)(rng.uniform(0.01, 5)),
        lambda: (lambda s: lambda x: np.arctan(s * x))(rng.uniform(0.1, 2)),
        lambda: np.sinh,
        lambda: (lambda s: lambda x: np.logaddexp(0, s * x))(rng.uniform(0.1, 2)),
    ]
    fs = [prims[i]() for i in rng.integers(0, len(prims), size=int(rng.integers(1, 4)))]

    def h(x):
        for f in fs:
            x = f(x)
        return x
    return h


def test_monotone_transform_invariance():
    rng = np.random.default_rng(8)
    checked = 0
    mismatches = 0
    while checked < 100:
        cal = rng.normal(size=int(rng.integers(50, 600)))
        query = np.concatenate([cal, rng.normal(size=400)])
        h = _random_increasing(rng)
        vals = np.unique(query)
        with np.errstate(over="ignore", invalid="ignore"):
            hv = h(vals)
        if not (np.all(np.isfinite(hv)) and np.all(np.diff(hv) > 0)):
            continue  # transform not strictly increasing in floating point on this data
        for alpha in (0.05, 0.1, 0.2):
            p, q = calibrate(cal, alpha, DELTA), calibrate(h(cal), alpha, DELTA)
            same = (p.k_hat == q.k_hat
                    and np.array_equal(predict_many(p, query), predict_many(q, h(query)))
                    and all(predict(p, e) == predict(q, he) for e, he in zip(query[:20], h(query[:20]))))
            mismatches += not same
        checked += 1
    record("monotone-transform invariance", mismatches == 0,
           f"{checked} random increasing transforms x 3 alphas, {mismatches} mismatches")


def _brute(tau, labeled):
    n = len(labeled)
    answered = neg = pos = fp = fn = good = 0
    for eta, y, c in labeled:
        a = eta > tau
        answered += a
        good += a and c == 1
        if y == 0:
            neg += 1
            fp += a
        else:
            pos += 1
            fn += not a
    return EvaluationReport(n, answered, good / answered if answered else None,
                            fp / neg if neg else None, fn / pos if pos else None, answered / n)


def test_metric_oracle():
    rng = np.random.default_rng(9)
    eta = np.round(rng.normal(size=1000), 2)
    y = rng.integers(0, 2, size=1000)
    correct = np.where(rng.random(1000) < 0.85, y, 1 - y)
    labeled = list(zip(eta.tolist(), y.tolist(), correct.tolist()))
    taus = [math.inf] + sorted(rng.choice(eta, 25).tolist())
    bad = 0
    for tau in taus:
        k = 1001 if math.isinf(tau) else 500
        pred = CertaintyPredictor(0.05, 0.05, 1000, k, tau)
        bad += evaluate(pred, labeled) != _brute(tau, labeled)
    record("metric oracle (1000 records)", bad == 0, f"{len(taus)} thresholds, {bad} mismatches vs recount")


def test_fpr_alpha_curve_shape():
    world = sim.SyntheticWorld(sim.beta_law(2, 5), sim.beta_law(5, 2), p_y=0.5)
    s, y = world.sample_labeled(5000, np.random.default_rng(10))
    cal = s[y == 0]
    n0 = cal.size
    curve = fpr_alpha_curve(cal, list(zip(s, y)), [0.02, 0.05, 0.10, 0.20], DELTA)
    ok = all(f <= a + 1 / n0 for a, f in curve)
    record("FPR-alpha curve below diagonal", ok,
           f"n0={n0}; " + ", ".join(f"alpha={a}: fpr={f:.4f}" for a, f in curve) + " (<= alpha + 1/n0)")
