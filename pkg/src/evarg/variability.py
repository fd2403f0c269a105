"""In-context example variability and its correlation with scores.

Variability of a cluster of example sentence vectors is the mean
Euclidean distance from the cluster mean. Vectors come precomputed from
a newline-delimited JSON file (one record per example); producing them
is out of scope here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class VariabilityError(Exception):
    """Bad vector data (empty cluster, dimension mismatch, bad file)."""


@dataclass(frozen=True)
class VectorCluster:
    event_type: str
    vectors: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if not self.vectors:
            raise VariabilityError(f"empty vector cluster for {self.event_type!r}")
        dims = {len(v) for v in self.vectors}
        if len(dims) != 1:
            raise VariabilityError(
                f"dimension mismatch in cluster {self.event_type!r}: {sorted(dims)}"
            )


def variability(cluster: VectorCluster) -> float:
    """Mean Euclidean distance of the cluster's vectors from their mean."""
    matrix = np.asarray(cluster.vectors, dtype=float)
    centroid = matrix.mean(axis=0)
    return float(np.linalg.norm(matrix - centroid, axis=1).mean())


def pearson(xs: list[float], ys: list[float]) -> float | None:
    """Pearson r, or None when undefined (short or constant series)."""
    if len(xs) != len(ys):
        raise VariabilityError("series length mismatch")
    if len(xs) < 2:
        return None
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if math.isclose(float(x.std()), 0.0) or math.isclose(float(y.std()), 0.0):
        return None
    return float(np.corrcoef(x, y)[0, 1])


def load_vectors(path: str) -> dict[str, tuple[float, ...]]:
    """Read {example_id, values} records; all dimensions must agree."""
    vectors: dict[str, tuple[float, ...]] = {}
    dim: int | None = None
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    example_id = record["example_id"]
                    values = tuple(float(v) for v in record["values"])
                except (ValueError, KeyError, TypeError) as exc:
                    raise VariabilityError(f"{path}:{lineno}: bad vector record: {exc}") from exc
                if not values:
                    raise VariabilityError(f"{path}:{lineno}: empty vector")
                if dim is None:
                    dim = len(values)
                elif len(values) != dim:
                    raise VariabilityError(
                        f"{path}:{lineno}: dimension {len(values)} != {dim}"
                    )
                if example_id in vectors:
                    raise VariabilityError(f"{path}:{lineno}: duplicate id {example_id!r}")
                vectors[example_id] = values
    except OSError as exc:
        raise VariabilityError(f"cannot read vector file {path}: {exc}") from exc
    return vectors


def variability_report(
    clusters_per_k: dict[int, list[VectorCluster]],
    arg_c_per_k: dict[int, float],
) -> dict:
    """Mean variability per k plus its Pearson correlation with Arg-C F1."""
    if set(clusters_per_k) != set(arg_c_per_k):
        raise VariabilityError(
            f"k grids differ: {sorted(clusters_per_k)} vs {sorted(arg_c_per_k)}"
        )
    per_k = {}
    means: list[float] = []
    scores: list[float] = []
    for k in sorted(clusters_per_k):
        clusters = clusters_per_k[k]
        if not clusters:
            raise VariabilityError(f"no clusters for k={k}")
        mean = sum(variability(c) for c in clusters) / len(clusters)
        per_k[str(k)] = {"mean_variability": mean, "arg_c_f1": arg_c_per_k[k]}
        means.append(mean)
        scores.append(arg_c_per_k[k])
    return {"per_k": per_k, "correlation": pearson(means, scores)}
