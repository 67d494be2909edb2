"""Keyed, counter-based random streams for reproducible parallel simulation.

Every learner at every meta iteration owns a private stream derived from
``(master_seed, learner_id, meta_iteration)``.  Streams are built on Philox,
a counter-based bit generator, so the draw sequence of one learner can never
depend on scheduling, worker count, or what any other learner draws.
"""

from __future__ import annotations

import numpy as np

_SEED_MASK = (1 << 64) - 1


def stream_for(master_seed: int, learner_id: int, meta_iteration: int) -> np.random.Generator:
    """Return the private generator for one learner at one meta iteration.

    The same triple always yields the same stream, on any platform and under
    any execution order.  ``learner_id`` is 1-based, ``meta_iteration`` is
    1-based, matching the simulator's counting.
    """
    if learner_id < 1 or meta_iteration < 1:
        raise ValueError(
            f"learner_id and meta_iteration are 1-based, got ({learner_id}, {meta_iteration})"
        )
    seq = np.random.SeedSequence(
        int(master_seed) & _SEED_MASK, spawn_key=(learner_id, meta_iteration)
    )
    return np.random.Generator(np.random.Philox(seq))
