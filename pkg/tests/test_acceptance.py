"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
PASS lines alongside pytest's own report.
"""

import numpy as np
import pytest

from mavg import core, harness, objectives as ob, theory

from conftest import record_verdict
from oracles import (
    divisor_scan_k,
    feasibility_margins_dup,
    grid_scan_mu,
    k_opt_condition_margin_dup,
    kavg_reference,
    positive_momentum_margin_dup,
)


def _verdict(num: int, ok: bool, detail: str) -> None:
    line = f"criterion {num:02d}: {'PASS' if ok else 'FAIL'} — {detail}"
    print(line)
    record_verdict(line)
    assert ok, f"criterion {num} failed: {detail}"


# ---------------------------------------------------------------------------
# 1. momentum-free runs reduce bitwise to plain periodic averaging
# ---------------------------------------------------------------------------


def test_c01_mu_zero_reduction_bitwise():
    gen = np.random.default_rng(20240401)
    ok = True
    for _ in range(10):
        spec = ob.make_logcosh(dim=5, sigma2=float(gen.uniform(0.0, 0.05)))
        hyper = core.HyperParams(
            num_learners=int(gen.integers(1, 9)),
            batch_size=int(gen.integers(1, 33)),
            local_steps=int(gen.integers(1, 17)),
            step_size=float(gen.uniform(0.002, 0.05)),
            momentum=0.0,
            meta_iters=50,
            master_seed=int(gen.integers(0, 2**32)),
        )
        trace = core.run(spec, hyper)
        history = kavg_reference(spec, hyper)
        ok = ok and np.array_equal(trace.weights, history)
    _verdict(1, ok, "10 random configurations, trajectories bitwise equal")


# ---------------------------------------------------------------------------
# 2-3. auxiliary-sequence and geometric-sum identities along real runs
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def identity_traces(logcosh):
    traces = {}
    for mu in (0.3, 0.6, 0.9):
        hyper = core.HyperParams(4, 16, 8, 0.01, mu, 200, master_seed=1000)
        traces[mu] = (hyper, core.run(logcosh, hyper))
    return traces


def test_c02_auxiliary_sequence_identity(identity_traces):
    worst = 0.0
    for mu, (hyper, trace) in identity_traces.items():
        z = core.auxiliary_sequence(trace, hyper)
        for n in range(1, hyper.meta_iters + 1):
            g = core.aggregated_gradient(trace, n, hyper)
            resid = np.linalg.norm(z[n] - z[n - 1] + hyper.step_size / (1 - mu) * g)
            scale = 1.0 + np.linalg.norm(z[n - 1])
            worst = max(worst, resid / scale)
    _verdict(2, worst <= 1e-9, f"max scaled residual {worst:.3e} <= 1e-9")


def test_c03_momentum_geometric_sum_identity(identity_traces):
    worst = 0.0
    for mu, (hyper, trace) in identity_traces.items():
        for n in range(1, hyper.meta_iters + 1):
            acc = np.zeros(trace.dim)
            for i in range(n):
                acc += mu**i * trace.displacements[n - 1 - i]
            v = trace.momenta[n]
            worst = max(worst, np.linalg.norm(acc - v) / (1.0 + np.linalg.norm(v)))
    _verdict(3, worst <= 1e-9, f"max relative reconstruction error {worst:.3e}")


# ---------------------------------------------------------------------------
# 4. the certified bound dominates the seed-averaged measurement
# ---------------------------------------------------------------------------


def test_c04_bound_dominates_empirical_mean(logcosh):
    eta = 0.01
    details = []
    ok = True
    for mu in (0.0, 0.5):
        delta = theory.delta_max(eta, mu, logcosh.lipschitz_L)
        feas = theory.stepsize_feasible(eta, mu, 8, logcosh.lipschitz_L, delta)
        assert feas.margin_step >= 0.5, "step size must leave margin >= 0.5"
        sweep = harness.SweepSpec(
            objective="logcosh",
            base=core.HyperParams(4, 16, 8, eta, mu, 1000),
            seeds=list(range(1, 21)),
        )
        report = harness.empirical_vs_bound(sweep, sweep.base)
        ok = ok and report.satisfied
        details.append(
            f"mu={mu}: {report.empirical_mean:.4g} <= {report.bound_total:.4g}"
        )
    _verdict(4, ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 5. the printed conditions really produce a strictly positive best momentum
# ---------------------------------------------------------------------------

MOMENTUM_REGIMES = [
    dict(n=100, eta=0.02, p=4, b=16, k=3, L=1.0, M=20.0, s2=0.01, df=2.0),
    dict(n=200, eta=0.05, p=2, b=8, k=2, L=1.0, M=10.0, s2=0.05, df=5.0),
    dict(n=50, eta=0.01, p=8, b=32, k=5, L=0.5, M=5.0, s2=0.02, df=1.0),
    dict(n=100, eta=0.01, p=4, b=16, k=8, L=1.0, M=20.0, s2=0.01, df=2.0),
    dict(n=500, eta=0.005, p=4, b=32, k=16, L=1.0, M=5.0, s2=0.02, df=3.0),
    dict(n=200, eta=0.02, p=8, b=16, k=6, L=0.5, M=2.0, s2=0.01, df=1.0),
]


def test_c05_positive_momentum_condition_regimes():
    branches = {"K<=5": 0, "K>5": 0}
    ok = True
    for reg in MOMENTUM_REGIMES:
        bi = theory.BoundInputs(reg["L"], reg["M"], reg["s2"], reg["df"])
        cond = theory.positive_momentum_condition(
            reg["n"], reg["eta"], reg["p"], reg["b"], reg["k"], bi
        )
        got = theory.optimal_mu(reg["n"], reg["eta"], reg["p"], reg["b"], reg["k"], bi)
        oracle = grid_scan_mu(reg["n"], reg["eta"], reg["p"], reg["b"], reg["k"], bi)
        ok = ok and cond.holds and got[0] > 0.0 and got == oracle
        branches[cond.branch] += 1
    ok = ok and branches["K<=5"] >= 3 and branches["K>5"] >= 3
    _verdict(5, ok, f"6 regimes ({branches}); all mu* > 0, grid oracle exact")


# ---------------------------------------------------------------------------
# 6. momentum beats the longer momentum-free run below the step threshold
# ---------------------------------------------------------------------------


def test_c06_speedup_inequality():
    bi = theory.BoundInputs(lipschitz_L=1.0, grad_bound_M=20.0, sigma2=0.01, delta_f=2.0)
    details = []
    ok = True
    for mu in (0.3, 0.6, 0.9):
        threshold = theory.speedup_check(mu, 100, 1e-9, 4, 16, 8, bi).eta_threshold
        rep = theory.speedup_check(mu, 100, 0.5 * threshold, 4, 16, 8, bi)
        ok = ok and rep.holds
        details.append(f"mu={mu}: {rep.g_mavg:.4g} < {rep.g_kavg_scaled:.4g}")
    _verdict(6, ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 7. best averaging interval: above one, and not increased by momentum
# ---------------------------------------------------------------------------


def test_c07_optimal_k_behavior():
    bi = theory.BoundInputs(lipschitz_L=1.0, grad_bound_M=0.05, sigma2=0.01,
                            delta_f=100.0)
    s, eta, p, b = 1024, 0.06, 4, 16
    ok = theory.k_opt_condition(s, eta, 0.0, p, b, bi).holds
    k0, _ = theory.optimal_k(s, 0.0, eta, p, b, bi)
    ok = ok and k0 > 1 and divisor_scan_k(s, 0.0, eta, p, b, bi)[0] == k0
    ks = {0.0: k0}
    for mu in (0.3, 0.5):
        ok = ok and theory.k_opt_condition(s, eta, mu, p, b, bi).holds
        k_mu, _ = theory.optimal_k(s, mu, eta, p, b, bi)
        ok = ok and k_mu <= k0 and divisor_scan_k(s, mu, eta, p, b, bi)[0] == k_mu
        ks[mu] = k_mu
    _verdict(7, ok, f"K_opt by momentum: {ks} (S = 1024)")


# ---------------------------------------------------------------------------
# 8. the best momentum grows with the learner count at fixed sample budget
# ---------------------------------------------------------------------------

SCALING_REGIMES = [
    dict(s_total=2**14, eta=0.01, b=4, k=8, p0=2, L=1.0, M=0.5, s2=0.5, df=1.0),
    dict(s_total=2**15, eta=0.02, b=8, k=4, p0=2, L=1.0, M=1.0, s2=0.2, df=2.0),
    dict(s_total=2**13, eta=0.01, b=2, k=8, p0=4, L=0.5, M=0.3, s2=1.0, df=1.0),
]


def test_c08_mu_star_grows_with_learner_count():
    ok = True
    seqs = []
    for reg in SCALING_REGIMES:
        bi = theory.BoundInputs(reg["L"], reg["M"], reg["s2"], reg["df"])
        rep = theory.mu_star_vs_p(reg["s_total"], reg["eta"], reg["b"], reg["k"],
                                  reg["p0"], (1, 2, 4), bi)
        ok = ok and rep.nondecreasing
        seqs.append([e.mu_star for e in rep.entries])
    _verdict(8, ok, f"mu* sequences over lambda in (1,2,4): {seqs}")


# ---------------------------------------------------------------------------
# 9. momentum shortens the measured time-to-threshold on the logistic task
# ---------------------------------------------------------------------------


def test_c09_empirical_acceleration_on_logistic(logistic):
    eta = 0.02
    delta = theory.delta_max(eta, 0.7, logistic.lipschitz_L)
    assert theory.stepsize_feasible(eta, 0.7, 8, logistic.lipschitz_L, delta).feasible
    sweep = harness.SweepSpec(
        objective="logistic",
        base=core.HyperParams(4, 16, 8, eta, 0.0, 100),
        seeds=list(range(1, 11)),
        loss_threshold=logistic.race_threshold,
    )
    result = harness.race(sweep, [0.0, 0.3, 0.5, 0.7])
    by_mu = {e.momentum: e for e in result.entries}
    best = min(by_mu[mu].median_iters for mu in (0.3, 0.5, 0.7))
    ratio = best / by_mu[0.0].median_iters
    _verdict(9, ratio <= 0.9,
             f"best momentum median {best:g} vs baseline {by_mu[0.0].median_iters:g} "
             f"(ratio {ratio:.3f} <= 0.9)")


# ---------------------------------------------------------------------------
# 10. halving the step size lowers the noise floor, in theory and in runs
# ---------------------------------------------------------------------------


def test_c10_noise_floor_shrinks_with_step_size(logcosh):
    mu = 0.3
    levels = [(0.03, 400), (0.015, 800), (0.0075, 1600)]  # eta halves, N doubles
    inputs = harness.bound_inputs_for(logcosh)
    terms, floors = [], []
    for eta, n_meta in levels:
        bb = theory.convergence_bound(mu, n_meta, eta, 4, 16, 8, inputs)
        terms.append((bb.term2, bb.term3, bb.term4))
        finals = []
        for seed in range(1, 21):
            trace = core.run(
                logcosh, core.HyperParams(4, 16, 8, eta, mu, n_meta, seed),
                record_wallclock=False,
            )
            finals.append(trace.grad_sq_norms[-1])
        floors.append(float(np.mean(finals)))
    ok = all(
        terms[i + 1][j] < terms[i][j] for i in range(2) for j in range(3)
    ) and floors[2] < floors[1] < floors[0]
    _verdict(10, ok, f"bound noise terms strictly decrease; measured floors {floors}")


# ---------------------------------------------------------------------------
# 11. every condition checker agrees exactly with its duplicated formula
# ---------------------------------------------------------------------------


def test_c11_condition_checkers_match_duplicate_oracles():
    gen = np.random.default_rng(20240402)
    ok = True
    for _ in range(100):
        eta = float(gen.uniform(1e-4, 0.5))
        mu = float(gen.uniform(0.0, 0.95))
        k = int(gen.integers(1, 65))
        L = float(gen.uniform(0.05, 2.0))
        delta = float(gen.uniform(0.05, 0.99))
        n = int(gen.integers(1, 1000))
        p = int(gen.integers(1, 64))
        b = int(gen.integers(1, 128))
        m_bound = float(gen.uniform(0.0, 50.0))
        s2 = float(gen.uniform(0.0, 1.0))
        df = float(gen.uniform(0.0, 10.0))
        s = int(gen.integers(1, 4096))

        rep = theory.stepsize_feasible(eta, mu, k, L, delta)
        m1, m2 = feasibility_margins_dup(eta, mu, k, L, delta)
        ok = ok and rep.margin_step == m1 and rep.margin_delta == m2

        bi = theory.BoundInputs(L, m_bound, s2, df, delta=delta)
        cond = theory.positive_momentum_condition(n, eta, p, b, k, bi)
        margin, branch = positive_momentum_margin_dup(n, eta, p, b, k, L, s2, df)
        ok = ok and cond.margin == margin and cond.branch == branch

        kc = theory.k_opt_condition(s, eta, mu, p, b, bi)
        ok = ok and kc.margin == k_opt_condition_margin_dup(
            s, eta, mu, p, b, L, m_bound, s2, df, delta
        )
    _verdict(11, ok, "100 random tuples, margins exactly equal")
