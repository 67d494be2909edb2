"""Regenerate the shipped objective constant files and the logistic dataset.

The repository already contains the generated files; run this module
(``python -m mavg.datagen``) only to reproduce them.  Output is byte-stable:
fixed seeds, ``repr`` float formatting.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from . import objectives

DATASET_SEED = 20240617
DATASET_NAME = "logistic_dataset.csv"


def _write_constants(path: Path, spec: objectives.ObjectiveSpec, extra: dict[str, str]) -> None:
    lines = [
        f"# {spec.name} objective constants",
        "# regenerate with: python -m mavg.datagen",
        "format_version = 1",
        f"name = {spec.name}",
        f"family = {spec.family}",
        f"dim = {spec.dim}",
        f"lipschitz_L = {spec.lipschitz_L!r}",
        f"grad_bound_M = {spec.grad_bound_M!r}",
        f"noise_sigma2 = {spec.noise_sigma2!r}",
        f"f_star = {spec.f_star!r}",
        "init_point = " + " ".join(repr(float(x)) for x in spec.init_point),
    ]
    if spec.domain_radius is not None:
        lines.append(f"domain_radius = {spec.domain_radius!r}")
    if spec.race_threshold is not None:
        lines.append(f"race_threshold = {spec.race_threshold!r}")
    lines.extend(f"{key} = {val}" for key, val in extra.items())
    path.write_text("\n".join(lines) + "\n")


def _write_dataset(path: Path, features: np.ndarray, labels: np.ndarray) -> None:
    dim = features.shape[1]
    header = ",".join(f"feature_{j}" for j in range(dim)) + ",label"
    rows = [header]
    for x, y in zip(features, labels):
        rows.append(",".join(repr(float(v)) for v in x) + f",{int(y)}")
    path.write_text("\n".join(rows) + "\n")


def regenerate(out_dir: Path | None = None) -> list[Path]:
    out_dir = out_dir or objectives.data_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    quad = objectives.make_quadratic()
    _write_constants(out_dir / "quadratic.txt", quad, {})
    written.append(out_dir / "quadratic.txt")

    logcosh = objectives.make_logcosh()
    _write_constants(out_dir / "logcosh.txt", logcosh, {})
    written.append(out_dir / "logcosh.txt")

    features, labels, _ = objectives.generate_logistic_dataset(seed=DATASET_SEED)
    _write_dataset(out_dir / DATASET_NAME, features, labels)
    written.append(out_dir / DATASET_NAME)

    constants = objectives.certify_logistic_constants(features, labels)
    spec = objectives.ObjectiveSpec(
        name="logistic",
        family="logistic",
        dim=features.shape[1],
        lipschitz_L=constants["lipschitz_L"],
        grad_bound_M=constants["grad_bound_M"],
        noise_sigma2=constants["noise_sigma2"],
        f_star=0.0,
        init_point=np.zeros(features.shape[1]),
        race_threshold=0.45,
        features=features,
        labels=labels,
    )
    _write_constants(
        out_dir / "logistic.txt", spec,
        {"dataset": DATASET_NAME, "dataset_seed": str(DATASET_SEED)},
    )
    written.append(out_dir / "logistic.txt")
    return written


def main(argv: list[str] | None = None) -> int:
    out = Path(argv[0]) if argv else None
    for path in regenerate(out):
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
