"""Objective values, gradients, stochastic oracles, and certified constants."""

import math

import numpy as np
import pytest

from mavg import objectives as ob
from mavg.streams import stream_for

from oracles import finite_difference_gradient


def _ball_points(spec, count, rng):
    radius = spec.domain_radius if spec.domain_radius is not None else 5.0
    pts = rng.standard_normal((count, spec.dim))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return pts * (radius * rng.uniform(0.05, 0.999, size=(count, 1)))


# ---------------------------------------------------------------------------
# values and exact gradients
# ---------------------------------------------------------------------------


def test_logcosh_zero_is_global_minimum(logcosh):
    assert ob.value(logcosh, np.zeros(logcosh.dim)) == 0.0
    assert np.array_equal(ob.gradient(logcosh, np.zeros(logcosh.dim)), np.zeros(logcosh.dim))


def test_quadratic_value_and_gradient(quadratic):
    w = np.zeros(quadratic.dim)
    w[0], w[1] = 3.0, 4.0
    assert ob.value(quadratic, w) == 12.5
    assert np.array_equal(ob.gradient(quadratic, w), w)


def test_logistic_value_matches_straight_line_loss(logistic):
    feats, labels, w_true = ob.generate_logistic_dataset()
    assert np.array_equal(feats, logistic.features)
    assert np.array_equal(labels, logistic.labels)
    # independent scalar re-implementation of the mean loss
    total = 0.0
    for x, y in zip(feats, labels):
        margin = y * float(np.dot(x, w_true))
        total += math.log1p(math.exp(-margin)) if margin > -30 else -margin
    expected = total / len(labels)
    assert ob.value(logistic, w_true) == pytest.approx(expected, rel=1e-12)


def test_logcosh_stable_for_large_inputs(logcosh):
    w = np.full(logcosh.dim, 500.0)
    expected = logcosh.dim * (500.0 - math.log(2.0))
    assert ob.value(logcosh, w) == pytest.approx(expected, rel=1e-12)
    assert np.isfinite(ob.gradient(logcosh, w)).all()


@pytest.mark.parametrize("name", ["quadratic", "logcosh", "logistic"])
def test_gradient_matches_finite_differences(name, rng):
    spec = ob.get_objective(name)
    for w in _ball_points(spec, 100, rng):
        fd = finite_difference_gradient(lambda x: ob.value(spec, x), w, h=1e-5)
        g = ob.gradient(spec, w)
        assert np.linalg.norm(fd - g) <= 1e-5 * (1.0 + np.linalg.norm(g))


def test_dimension_mismatch_raises(logcosh):
    with pytest.raises(ValueError):
        ob.value(logcosh, np.zeros(3))
    with pytest.raises(ValueError):
        ob.gradient(logcosh, np.zeros(logcosh.dim + 1))
    with pytest.raises(ValueError):
        ob.sample_gradient(logcosh, np.zeros(3), np.random.default_rng(0))


def test_non_finite_point_raises(logcosh):
    w = np.zeros(logcosh.dim)
    w[0] = np.inf
    with pytest.raises(ValueError):
        ob.value(logcosh, w)


# ---------------------------------------------------------------------------
# stochastic oracle
# ---------------------------------------------------------------------------


def test_zero_noise_draw_equals_gradient(logcosh):
    spec = logcosh.with_sigma2(0.0)
    w = spec.init_point
    draw = ob.sample_gradient(spec, w, stream_for(0, 1, 1))
    assert np.array_equal(draw, ob.gradient(spec, w))


def test_block_draws_equal_sequential_draws(logcosh, logistic):
    for spec in (logcosh, logistic):
        w = spec.init_point + 0.1
        block = ob.sample_gradient_block(spec, w, stream_for(5, 1, 1), 12)
        rng = stream_for(5, 1, 1)
        seq = np.stack([ob.sample_gradient(spec, w, rng) for _ in range(12)])
        assert np.array_equal(block, seq)


def test_monte_carlo_unbiased_and_variance_bounded(logcosh, logistic):
    n_draws = 10**5
    for spec in (logcosh, logistic):
        w = spec.init_point + 0.3
        g = ob.gradient(spec, w)
        rng = stream_for(99, 1, 1)
        draws = ob.sample_gradient_block(spec, w, rng, n_draws)
        mean = draws.mean(axis=0)
        sigma = math.sqrt(spec.noise_sigma2)
        tol = 3.0 * sigma / math.sqrt(n_draws) * math.sqrt(spec.dim)
        assert np.linalg.norm(mean - g) <= tol
        variance = float(np.mean(np.sum(draws**2, axis=1))) - float(g @ g)
        # the estimator carries a 2*g.z cross term; allow 4 standard errors
        stderr = (2 * np.linalg.norm(g) * sigma + sigma**2) / math.sqrt(n_draws)
        assert variance <= spec.noise_sigma2 + 4 * stderr


def test_additive_noise_variance_is_tight(logcosh):
    # E||z||^2 = sigma2 exactly by construction; check the estimate sits near it
    rng = stream_for(7, 1, 1)
    w = np.zeros(logcosh.dim)
    draws = ob.sample_gradient_block(logcosh, w, rng, 10**5)
    est = float(np.mean(np.sum(draws**2, axis=1)))
    assert est == pytest.approx(logcosh.noise_sigma2, rel=0.05)


# ---------------------------------------------------------------------------
# assumption checks on certified constants
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["quadratic", "logcosh", "logistic"])
def test_lipschitz_and_gradient_bounds_hold_in_domain(name, rng):
    spec = ob.get_objective(name)
    xs = _ball_points(spec, 1000, rng)
    ys = _ball_points(spec, 1000, rng)
    L = spec.lipschitz_L
    for x, y in zip(xs, ys):
        lhs = np.linalg.norm(ob.gradient(spec, x) - ob.gradient(spec, y))
        assert lhs <= L * np.linalg.norm(x - y) * (1 + 1e-9)
    for x in xs:
        assert float(np.sum(ob.gradient(spec, x) ** 2)) <= spec.grad_bound_M * (1 + 1e-9)
        assert ob.value(spec, x) >= spec.f_star


def test_registry_contents():
    names = {s.name for s in ob.registry()}
    assert names == {"quadratic", "logcosh", "logistic"}
    logcosh = ob.get_objective("logcosh")
    assert logcosh.grad_bound_M == float(logcosh.dim)
    assert logcosh.lipschitz_L == 1.0
    quadratic = ob.get_objective("quadratic")
    assert quadratic.lipschitz_L == 1.0
    assert quadratic.grad_bound_M == quadratic.domain_radius**2
    with pytest.raises(ValueError):
        ob.get_objective("nope")


def test_logistic_constants_dominate_sampled_estimates(logistic, rng):
    # the recorded constants are provable bounds; sampling must stay below them
    xs = _ball_points(logistic, 200, rng)
    ys = _ball_points(logistic, 200, rng)
    ratios = []
    for x, y in zip(xs, ys):
        gap = np.linalg.norm(x - y)
        if gap > 1e-9:
            ratios.append(np.linalg.norm(ob.gradient(logistic, x) - ob.gradient(logistic, y)) / gap)
    assert max(ratios) <= logistic.lipschitz_L
    for x in xs[:50]:
        g = ob.gradient(logistic, x)
        per_point = -logistic.labels[:, None] * logistic.features \
            * (1.0 / (1.0 + np.exp(logistic.labels * (logistic.features @ x))))[:, None]
        variance = float(np.mean(np.sum(per_point**2, axis=1))) - float(g @ g)
        assert variance <= logistic.noise_sigma2


def test_logistic_dataset_file_schema():
    path = ob.data_dir() / "logistic_dataset.csv"
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(f"feature_{j}" for j in range(20)) + ",label"
    assert len(lines) == 1001
    labels = np.array([float(line.split(",")[-1]) for line in lines[1:]])
    assert set(np.unique(labels)) == {-1.0, 1.0}
    # 10% of the generator's signs were flipped
    feats, labels_gen, w_true = ob.generate_logistic_dataset()
    clean = np.where(feats @ w_true >= 0.0, 1.0, -1.0)
    assert int(np.sum(clean != labels_gen)) == 100


def test_spec_file_round_trip(tmp_path):
    from mavg import datagen

    written = datagen.regenerate(tmp_path)
    for path in written:
        shipped = (ob.data_dir() / path.name).read_text()
        assert path.read_text() == shipped


def test_spec_file_unknown_key_rejected(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("name = x\nfamily = logcosh\ndim = 2\nwat = 3\n")
    with pytest.raises(ValueError, match="unknown keys"):
        ob._load_spec_file(bad)


def test_with_sigma2_rejected_for_logistic(logistic):
    with pytest.raises(ValueError):
        logistic.with_sigma2(0.5)
