"""Test objectives with certified smoothness/noise constants and gradient oracles.

Each objective ships as an :class:`ObjectiveSpec` carrying the constants the
bound calculator consumes: gradient-Lipschitz constant, squared-gradient bound
(global, or certified on a ball of ``domain_radius``), per-sample noise
variance, and a lower bound on the function value.  Constants persist as flat
text files under ``mavg/data`` so they can be audited and regenerated.

Three families are provided:

* ``quadratic`` — 0.5*||w||^2; gradient bound only holds on a declared ball.
* ``logcosh``   — sum_i log cosh(w_i); all constants hold globally.
* ``logistic``  — logistic regression over a fixed synthetic dataset; the
  stochastic gradient is the loss gradient at one uniformly drawn data point.

For the first two families the stochastic oracle adds isotropic Gaussian noise
with per-sample covariance (sigma2/dim) * I, so the expected squared noise norm
equals sigma2 exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

_LOG2 = math.log(2.0)
_FAMILIES = ("quadratic", "logcosh", "logistic")


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """An objective together with its certified constants.

    ``grad_bound_M`` bounds ||grad F(w)||^2 for every w in the admissible
    domain: the whole space when ``domain_radius`` is None, otherwise the ball
    of that radius around the origin.  ``noise_sigma2`` bounds the per-sample
    variance E||g(w; xi)||^2 - ||grad F(w)||^2 of the stochastic oracle.
    """

    name: str
    family: str
    dim: int
    lipschitz_L: float
    grad_bound_M: float
    noise_sigma2: float
    f_star: float
    init_point: np.ndarray
    domain_radius: float | None = None
    race_threshold: float | None = None
    # logistic only: the fixed dataset (features shape (n, dim), labels in {-1, +1})
    features: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown objective family {self.family!r}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        for field in ("lipschitz_L", "grad_bound_M", "noise_sigma2"):
            if getattr(self, field) < 0:
                raise ValueError(f"{field} must be nonnegative")
        init = np.asarray(self.init_point, dtype=np.float64)
        if init.shape != (self.dim,):
            raise ValueError(f"init_point must have shape ({self.dim},)")
        init = init.copy()
        init.setflags(write=False)
        object.__setattr__(self, "init_point", init)
        if self.family == "logistic":
            if self.features is None or self.labels is None:
                raise ValueError("logistic objective requires a dataset")
            feats = np.asarray(self.features, dtype=np.float64)
            labs = np.asarray(self.labels, dtype=np.float64)
            if feats.ndim != 2 or feats.shape[1] != self.dim:
                raise ValueError("features must have shape (n, dim)")
            if labs.shape != (feats.shape[0],) or not np.all(np.abs(labs) == 1.0):
                raise ValueError("labels must be +/-1 with one entry per row")
            feats.setflags(write=False)
            labs.setflags(write=False)
            object.__setattr__(self, "features", feats)
            object.__setattr__(self, "labels", labs)

    def with_sigma2(self, sigma2: float) -> "ObjectiveSpec":
        """Copy of this spec with a different additive-noise level."""
        if self.family == "logistic":
            raise ValueError("logistic noise comes from subsampling, not sigma2")
        return replace(self, noise_sigma2=float(sigma2))


def _check_point(spec: ObjectiveSpec, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (spec.dim,):
        raise ValueError(f"point has shape {w.shape}, expected ({spec.dim},)")
    return w


def _sigmoid_of_negative(m: np.ndarray) -> np.ndarray:
    """1 / (1 + exp(m)) evaluated without overflow."""
    out = np.empty_like(m)
    pos = m >= 0
    e = np.exp(-m[pos])
    out[pos] = e / (1.0 + e)
    out[~pos] = 1.0 / (1.0 + np.exp(m[~pos]))
    return out


def value(spec: ObjectiveSpec, w: np.ndarray) -> float:
    """Exact objective value F(w)."""
    w = _check_point(spec, w)
    if not np.all(np.isfinite(w)):
        raise ValueError("point has non-finite coordinates")
    if spec.family == "quadratic":
        return 0.5 * float(w @ w)
    if spec.family == "logcosh":
        # log cosh x = logaddexp(x, -x) - log 2, stable for large |x|
        return float(np.sum(np.logaddexp(w, -w))) - spec.dim * _LOG2
    margins = spec.labels * (spec.features @ w)
    return float(np.mean(np.logaddexp(0.0, -margins)))


def gradient(spec: ObjectiveSpec, w: np.ndarray) -> np.ndarray:
    """Exact gradient of F at w."""
    w = _check_point(spec, w)
    if not np.all(np.isfinite(w)):
        raise ValueError("point has non-finite coordinates")
    if spec.family == "quadratic":
        return w.copy()
    if spec.family == "logcosh":
        return np.tanh(w)
    margins = spec.labels * (spec.features @ w)
    weights = spec.labels * _sigmoid_of_negative(margins)
    return -(spec.features.T @ weights) / spec.features.shape[0]


def sample_gradient(spec: ObjectiveSpec, w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One stochastic gradient draw g(w; xi).

    Deterministic given the stream state.  A sigma2 = 0 additive-noise
    objective consumes no randomness and returns the exact gradient.
    """
    return sample_gradient_block(spec, w, rng, 1)[0]


def sample_gradient_block(
    spec: ObjectiveSpec, w: np.ndarray, rng: np.random.Generator, count: int
) -> np.ndarray:
    """``count`` consecutive draws as rows of a (count, dim) array.

    Bitwise identical to ``count`` successive :func:`sample_gradient` calls on
    the same stream; the block form exists so the simulator's inner loop can
    draw one minibatch at a time.
    """
    w = _check_point(spec, w)
    if count < 1:
        raise ValueError("count must be positive")
    if spec.family == "logistic":
        # margins come from one full-dataset matvec so that the per-row values
        # do not depend on how many draws share the call (BLAS kernels are not
        # shape-stable at the last ulp)
        all_margins = spec.features @ w
        idx = rng.integers(0, spec.features.shape[0], size=count)
        rows = spec.features[idx]
        margins = spec.labels[idx] * all_margins[idx]
        weights = spec.labels[idx] * _sigmoid_of_negative(margins)
        return -weights[:, None] * rows
    grad = gradient(spec, w)
    if spec.noise_sigma2 == 0.0:
        return np.broadcast_to(grad, (count, spec.dim)).copy()
    scale = math.sqrt(spec.noise_sigma2 / spec.dim)
    return grad + rng.standard_normal((count, spec.dim)) * scale


# ---------------------------------------------------------------------------
# construction and persistence
# ---------------------------------------------------------------------------

def _spread_init(dim: int, radius: float) -> np.ndarray:
    """Deterministic start point at the requested distance from the origin."""
    return np.full(dim, radius / math.sqrt(dim))


def make_quadratic(
    dim: int = 10, domain_radius: float = 5.0, sigma2: float = 0.01, init_radius: float = 2.5
) -> ObjectiveSpec:
    """0.5*||w||^2, certified on the ball of ``domain_radius``.

    The gradient is the identity map, so L = 1 exactly and the squared
    gradient norm on the ball is at most radius^2.  The global bounded-gradient
    assumption cannot hold for this objective; leave the ball and the
    simulator flags the trace.
    """
    return ObjectiveSpec(
        name="quadratic",
        family="quadratic",
        dim=dim,
        lipschitz_L=1.0,
        grad_bound_M=domain_radius**2,
        noise_sigma2=sigma2,
        f_star=0.0,
        init_point=_spread_init(dim, init_radius),
        domain_radius=domain_radius,
        race_threshold=0.5 * (init_radius / 2.0) ** 2,
    )


def make_logcosh(dim: int = 20, sigma2: float = 0.01, init_radius: float = 2.0) -> ObjectiveSpec:
    """sum_i log cosh(w_i): smooth, non-convex-free but globally certified.

    d/dx tanh(x) = sech^2(x) in [0, 1] gives L = 1; |tanh| <= 1 per coordinate
    gives ||grad F||^2 <= dim everywhere; F >= 0 with equality at the origin.
    """
    return ObjectiveSpec(
        name="logcosh",
        family="logcosh",
        dim=dim,
        lipschitz_L=1.0,
        grad_bound_M=float(dim),
        noise_sigma2=sigma2,
        f_star=0.0,
        init_point=_spread_init(dim, init_radius),
        race_threshold=0.2,
    )


def generate_logistic_dataset(
    n_points: int = 1000, dim: int = 20, flip_fraction: float = 0.1, seed: int = 20240617
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw the fixed synthetic classification dataset.

    Returns (features, labels, true_weights).  Labels follow the sign of
    x @ true_weights, then a fixed fraction is flipped.  Everything is a pure
    function of the seed, so the shipped CSV can be regenerated byte-for-byte.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    features = rng.standard_normal((n_points, dim))
    true_w = rng.standard_normal(dim)
    true_w *= 3.0 / np.linalg.norm(true_w)
    labels = np.where(features @ true_w >= 0.0, 1.0, -1.0)
    n_flip = int(round(flip_fraction * n_points))
    flip_idx = rng.permutation(n_points)[:n_flip]
    labels[flip_idx] *= -1.0
    return features, labels, true_w


def certify_logistic_constants(features: np.ndarray, labels: np.ndarray) -> dict[str, float]:
    """Constants provably valid for the mean logistic loss over this dataset.

    * L: the per-point Hessian is s(1-s) x x^T with s(1-s) <= 1/4, so the mean
      Hessian is dominated by (1/4) X^T X / n.
    * M: every per-point gradient has norm at most ||x_i||, so the mean
      gradient norm is at most the mean of ||x_i|| — valid at every w.
    * sigma2: E||g_i(w)||^2 <= mean of ||x_i||^2, which dominates the
      subsampling variance at every w.
    """
    n = features.shape[0]
    gram_top = float(np.linalg.eigvalsh(features.T @ features)[-1])
    row_norms = np.linalg.norm(features, axis=1)
    return {
        "lipschitz_L": 0.25 * gram_top / n,
        "grad_bound_M": float(np.mean(row_norms)) ** 2,
        "noise_sigma2": float(np.mean(row_norms**2)),
    }


def data_dir() -> Path:
    return Path(resources.files("mavg").joinpath("data"))


def _parse_constants_file(path: Path) -> dict[str, str]:
    fields: dict[str, str] = {}
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path.name}: malformed line {raw!r}")
        key, val = line.split("=", 1)
        fields[key.strip()] = val.strip()
    return fields


def _load_spec_file(path: Path) -> ObjectiveSpec:
    fields = _parse_constants_file(path)
    known = {
        "format_version", "name", "family", "dim", "lipschitz_L", "grad_bound_M",
        "noise_sigma2", "f_star", "init_point", "domain_radius", "race_threshold",
        "dataset", "dataset_seed",
    }
    unknown = set(fields) - known
    if unknown:
        raise ValueError(f"{path.name}: unknown keys {sorted(unknown)}")
    features = labels = None
    if "dataset" in fields:
        csv_path = path.parent / fields["dataset"]
        table = np.genfromtxt(csv_path, delimiter=",", skip_header=1)
        features, labels = table[:, :-1], table[:, -1]
    return ObjectiveSpec(
        name=fields["name"],
        family=fields["family"],
        dim=int(fields["dim"]),
        lipschitz_L=float(fields["lipschitz_L"]),
        grad_bound_M=float(fields["grad_bound_M"]),
        noise_sigma2=float(fields["noise_sigma2"]),
        f_star=float(fields["f_star"]),
        init_point=np.array([float(tok) for tok in fields["init_point"].split()]),
        domain_radius=float(fields["domain_radius"]) if "domain_radius" in fields else None,
        race_threshold=float(fields["race_threshold"]) if "race_threshold" in fields else None,
        features=features,
        labels=labels,
    )


_REGISTRY: dict[str, ObjectiveSpec] | None = None


def registry() -> list[ObjectiveSpec]:
    """The canonical objectives, loaded once from the shipped constant files."""
    global _REGISTRY
    if _REGISTRY is None:
        specs = [_load_spec_file(data_dir() / f"{name}.txt")
                 for name in ("quadratic", "logcosh", "logistic")]
        _REGISTRY = {spec.name: spec for spec in specs}
    return list(_REGISTRY.values())


def get_objective(name: str) -> ObjectiveSpec:
    for spec in registry():
        if spec.name == name:
            return spec
    raise ValueError(f"unknown objective {name!r}; known: {[s.name for s in registry()]}")
