"""The multi-learner simulator: K local SGD steps per learner, then an
averaging step with block momentum at the meta level.

One meta iteration n (1-based) does, exactly and in this order:

1. every learner j starts from the shared weights and runs K minibatch SGD
   steps, ``w <- w - (eta / B) * sum_of_B_sample_gradients``, drawing from its
   private stream ``stream_for(master_seed, j, n)``;
2. the endpoints are summed in ascending learner id and divided by P, giving
   the average ``a``;
3. the displacement ``d = a - w_meta`` updates the momentum buffer
   ``v <- mu * v + d`` and the weights ``w_meta <- w_meta + v``.

With ``mu == 0`` the weights are set to ``a`` directly, which is the same
value in exact arithmetic and keeps the momentum-free trajectory bitwise equal
to plain periodic averaging.  Because streams are keyed by (seed, learner,
iteration) and the reductions above have a pinned order, the trace is
identical for any worker count, including fully serial execution.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .objectives import ObjectiveSpec, gradient, sample_gradient_block, value
from .streams import stream_for

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HyperParams:
    """One full configuration of the simulator.

    ``step_size = 0`` is admitted (it makes the local loop a no-op), which the
    test oracles rely on; everything downstream that divides by the step size
    checks positivity itself.
    """

    num_learners: int
    batch_size: int
    local_steps: int
    step_size: float
    momentum: float
    meta_iters: int
    master_seed: int = 0

    def __post_init__(self):
        for name in ("num_learners", "batch_size", "local_steps", "meta_iters"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        if not np.isfinite(self.step_size) or self.step_size < 0:
            raise ValueError(f"step_size must be finite and >= 0, got {self.step_size!r}")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum!r}")
        if not isinstance(self.master_seed, (int, np.integer)):
            raise ValueError("master_seed must be an integer")


@dataclass(frozen=True)
class MetaState:
    """Global weights and momentum buffer after ``iteration`` meta steps."""

    weights: np.ndarray
    momentum_buffer: np.ndarray
    iteration: int

    @classmethod
    def initial(cls, init_point: np.ndarray) -> "MetaState":
        w = np.asarray(init_point, dtype=np.float64).copy()
        return cls(weights=w, momentum_buffer=np.zeros_like(w), iteration=0)


@dataclass
class LearnerState:
    """One learner's private weights and stream within a meta iteration."""

    learner_id: int
    weights: np.ndarray
    rng: np.random.Generator

    @classmethod
    def at_barrier(
        cls, hyper: "HyperParams", learner_id: int, meta_iteration: int,
        shared_weights: np.ndarray,
    ) -> "LearnerState":
        """Fresh state at the start of a meta iteration: weights are an exact
        copy of the shared vector, the stream is keyed to this (learner,
        iteration) pair."""
        return cls(
            learner_id=learner_id,
            weights=np.asarray(shared_weights, dtype=np.float64).copy(),
            rng=stream_for(hyper.master_seed, learner_id, meta_iteration),
        )


@dataclass
class RunTrace:
    """Per-iteration record of a run.

    Row n (1-based) holds the objective value and squared gradient norm at the
    iteration's *starting* weights, the displacement d_n produced by that
    iteration, and the updated momentum buffer v_{n+1}.  ``weights`` and
    ``momenta`` keep one extra row (the state after the last step, and the
    all-zero initial buffer) so that identity checks over the whole run need
    nothing outside the trace.
    """

    objective: str
    hyper: HyperParams
    f_values: np.ndarray          # (N,)   F at start weights
    grad_sq_norms: np.ndarray     # (N,)   ||grad F||^2 at start weights
    weights: np.ndarray           # (N+1, d)
    displacements: np.ndarray     # (N, d)
    momenta: np.ndarray           # (N+1, d), momenta[0] == 0
    wallclock_s: np.ndarray       # (N,)
    violation_flags: np.ndarray   # (N,) bool
    endpoints: np.ndarray | None = None      # (N, P, d) when recorded
    sample_logs: list[np.ndarray] = field(default_factory=list)  # per n: (P, K, B, d)

    @property
    def n_meta(self) -> int:
        return len(self.f_values)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def assumption_violated(self) -> bool:
        return bool(self.violation_flags.any())

    @property
    def final_f(self) -> float:
        return float(self.f_values[-1])

    @property
    def avg_grad_sq(self) -> float:
        """(1/N) * sum over the run of the squared gradient norms."""
        return float(np.mean(self.grad_sq_norms))

    def iters_to_threshold(self, threshold: float) -> float:
        """First 1-based n with F(w_n) <= threshold, or inf if never reached."""
        hits = np.nonzero(self.f_values <= threshold)[0]
        return float(hits[0] + 1) if hits.size else float("inf")


def local_k_steps(
    start: np.ndarray,
    spec: ObjectiveSpec,
    hyper: HyperParams,
    rng: np.random.Generator,
    sample_log: list[np.ndarray] | None = None,
) -> np.ndarray:
    """Run K minibatch SGD steps from ``start`` on one learner's stream.

    Consumes exactly K*B oracle draws.  Each step sums its B per-sample
    gradients in draw order before applying the single scalar factor eta/B.
    """
    w = np.asarray(start, dtype=np.float64).copy()
    scale = hyper.step_size / hyper.batch_size
    for k in range(1, hyper.local_steps + 1):
        block = sample_gradient_block(spec, w, rng, hyper.batch_size)
        if sample_log is not None:
            sample_log.append(block)
        w -= scale * np.add.reduce(block, axis=0)
        if not np.all(np.isfinite(w)):
            raise DivergenceError(
                f"non-finite weights after local step {k}", local_step=k
            )
    return w


def _average_endpoints(endpoints: list[np.ndarray], num_learners: int) -> np.ndarray:
    if len(endpoints) != num_learners:
        raise ValueError(f"expected {num_learners} endpoints, got {len(endpoints)}")
    acc = np.zeros_like(endpoints[0])
    for e in endpoints:  # ascending learner id: summation order is part of the contract
        acc += e
    return acc / num_learners


def _meta_update(
    weights: np.ndarray, momentum_buffer: np.ndarray,
    endpoints: list[np.ndarray], hyper: HyperParams,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (d, v_new, w_new) for one averaging-plus-momentum step."""
    avg = _average_endpoints(endpoints, hyper.num_learners)
    d = avg - weights
    if hyper.momentum == 0.0:
        v_new, w_new = d, avg
    else:
        v_new = hyper.momentum * momentum_buffer + d
        w_new = weights + v_new
    if not np.all(np.isfinite(w_new)):
        raise DivergenceError("non-finite weights after meta update")
    return d, v_new, w_new


def meta_step(meta: MetaState, endpoints: list[np.ndarray], hyper: HyperParams) -> MetaState:
    """Average the learner endpoints and apply the block-momentum update."""
    d, v_new, w_new = _meta_update(meta.weights, meta.momentum_buffer, endpoints, hyper)
    return MetaState(weights=w_new, momentum_buffer=v_new, iteration=meta.iteration + 1)


def run(
    spec: ObjectiveSpec,
    hyper: HyperParams,
    *,
    workers: int = 1,
    record_endpoints: bool = False,
    record_samples: bool = False,
    record_wallclock: bool = True,
) -> RunTrace:
    """Execute ``meta_iters`` meta iterations and record the full trace.

    ``workers`` > 1 runs the learners of each iteration in a thread pool; the
    result is bitwise identical for every worker count because learner streams
    are keyed, not shared.  ``record_wallclock=False`` zeroes the timing column
    so that written traces are byte-reproducible.
    """
    n_meta, p, dim = hyper.meta_iters, hyper.num_learners, spec.dim
    w = np.asarray(spec.init_point, dtype=np.float64).copy()
    v = np.zeros(dim)

    trace = RunTrace(
        objective=spec.name,
        hyper=hyper,
        f_values=np.zeros(n_meta),
        grad_sq_norms=np.zeros(n_meta),
        weights=np.zeros((n_meta + 1, dim)),
        displacements=np.zeros((n_meta, dim)),
        momenta=np.zeros((n_meta + 1, dim)),
        wallclock_s=np.zeros(n_meta),
        violation_flags=np.zeros(n_meta, dtype=bool),
        endpoints=np.zeros((n_meta, p, dim)) if record_endpoints else None,
    )
    trace.weights[0] = w

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    warned = False
    try:
        for n in range(1, n_meta + 1):
            t0 = time.perf_counter()
            trace.f_values[n - 1] = value(spec, w)
            g = gradient(spec, w)
            trace.grad_sq_norms[n - 1] = float(g @ g)

            logs: list[list[np.ndarray]] | None = None
            if record_samples:
                logs = [[] for _ in range(p)]

            def one_learner(j: int) -> np.ndarray:
                learner = LearnerState.at_barrier(hyper, j, n, w)
                sink = logs[j - 1] if logs is not None else None
                try:
                    return local_k_steps(
                        learner.weights, spec, hyper, learner.rng, sample_log=sink
                    )
                except DivergenceError as exc:
                    raise DivergenceError(
                        f"learner {j} diverged at meta iteration {n}, "
                        f"local step {exc.local_step}",
                        meta_iteration=n, learner_id=j, local_step=exc.local_step,
                    ) from None

            if pool is not None:
                endpoints = list(pool.map(one_learner, range(1, p + 1)))
            else:
                endpoints = [one_learner(j) for j in range(1, p + 1)]

            if spec.domain_radius is not None:
                r = spec.domain_radius
                out = float(np.linalg.norm(w)) > r or any(
                    float(np.linalg.norm(e)) > r for e in endpoints
                )
                trace.violation_flags[n - 1] = out
                if out and not warned:
                    warned = True
                    log.warning(
                        "%s: iterate left the certified ball (radius %g) at meta "
                        "iteration %d; constants no longer certified", spec.name, r, n,
                    )

            try:
                d, v, w = _meta_update(w, v, endpoints, hyper)
            except DivergenceError as exc:
                raise DivergenceError(
                    f"meta update diverged at iteration {n}", meta_iteration=n
                ) from exc

            trace.displacements[n - 1] = d
            trace.momenta[n] = v
            trace.weights[n] = w
            if record_endpoints:
                trace.endpoints[n - 1] = np.stack(endpoints)
            if record_samples:
                trace.sample_logs.append(np.stack([np.stack(rows) for rows in logs]))
            if record_wallclock:
                trace.wallclock_s[n - 1] = time.perf_counter() - t0
    finally:
        if pool is not None:
            pool.shutdown()
    return trace


def aggregated_gradient(trace: RunTrace, n: int, hyper: HyperParams) -> np.ndarray:
    """The average stochastic gradient the whole system applied at iteration n.

    Each learner starts the iteration at the shared weights and accumulates K
    steps of size eta/B, so the recorded displacement equals minus step size
    times the mean of all P*K*B sample gradients; dividing recovers that mean.
    ``n`` is 1-based.
    """
    if hyper.step_size <= 0:
        raise ValueError("aggregated gradient needs a positive step size")
    if not 1 <= n <= trace.n_meta:
        raise ValueError(f"n must be in 1..{trace.n_meta}, got {n}")
    return -trace.displacements[n - 1] / hyper.step_size


def auxiliary_sequence(trace: RunTrace, hyper: HyperParams) -> np.ndarray:
    """The momentum-corrected iterates z_n = w_n + (mu/(1-mu)) * v_n.

    Returned for n = 1..N+1.  Along a run, consecutive entries differ by
    exactly -(eta/(1-mu)) times the aggregated gradient, which is the identity
    the test suite checks at tolerance 1e-9.
    """
    coeff = hyper.momentum / (1.0 - hyper.momentum)
    return trace.weights + coeff * trace.momenta


# ---------------------------------------------------------------------------
# trace persistence
# ---------------------------------------------------------------------------

TRACE_HEADER = "n,f_value,grad_sq_norm,d_norm,v_norm,wallclock_s,assumption_violated"


def trace_csv_lines(trace: RunTrace) -> list[str]:
    lines = [TRACE_HEADER]
    d_norms = np.linalg.norm(trace.displacements, axis=1)
    v_norms = np.linalg.norm(trace.momenta[1:], axis=1)
    for i in range(trace.n_meta):
        lines.append(
            f"{i + 1},{float(trace.f_values[i])!r},{float(trace.grad_sq_norms[i])!r},"
            f"{float(d_norms[i])!r},{float(v_norms[i])!r},"
            f"{float(trace.wallclock_s[i])!r},{int(trace.violation_flags[i])}"
        )
    return lines


def write_trace(trace: RunTrace, path, vectors_path=None) -> None:
    """Write the scalar trace CSV, and optionally the vector sidecar.

    The sidecar holds one line per iteration: w_n, d_n, v_{n+1}, space
    separated with 17 significant digits (enough to round-trip doubles).
    """
    with open(path, "w") as fh:
        fh.write("\n".join(trace_csv_lines(trace)) + "\n")
    if vectors_path is not None:
        with open(vectors_path, "w") as fh:
            fh.write("# per line: w_n then d_n then v_{n+1}, each of dim "
                     f"{trace.dim}\n")
            for i in range(trace.n_meta):
                row = np.concatenate(
                    [trace.weights[i], trace.displacements[i], trace.momenta[i + 1]]
                )
                fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_trace_csv(path) -> dict[str, np.ndarray]:
    """Parse a trace CSV back into column arrays (keys = header names)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected trace header {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = np.array(rows, dtype=np.float64).T
    names = TRACE_HEADER.split(",")
    return {name: cols[i] for i, name in enumerate(names)}
