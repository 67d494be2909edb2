"""Exception types shared across the package.

Argument problems raise plain ``ValueError``; these two carry outcomes that
callers (and the CLI exit-code map) treat differently from bad arguments.
"""

from __future__ import annotations


class InfeasibilityError(Exception):
    """No admissible value exists (step size too large, empty search set, ...)."""


class DivergenceError(RuntimeError):
    """Iterates left the representable range during a run."""

    def __init__(self, message: str, *, meta_iteration: int | None = None,
                 learner_id: int | None = None, local_step: int | None = None):
        super().__init__(message)
        self.meta_iteration = meta_iteration
        self.learner_id = learner_id
        self.local_step = local_step
