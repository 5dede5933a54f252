"""Concept geometry: decayed per-class centroids, the scaled-rotation map
aligning one concept's class-separation vector with another's, and the
projection of examples through that map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LABELS, NEG, POS, ConfigurationError, Example, check_dims

DEFAULT_DEGENERACY_TOL = 1e-9


class CentroidTracker:
    """Per-class feature centroids with exponential forgetting.

    Each class keeps a decayed feature sum and a decayed normaliser; the first
    example of a class sets the centroid directly. With forgetting factor 1
    the centroid reduces to the arithmetic mean.
    """

    def __init__(self, n_features: int, forgetting_factor: float) -> None:
        if n_features < 1:
            raise ConfigurationError("n_features must be >= 1")
        if not 0.0 < forgetting_factor <= 1.0:
            raise ConfigurationError("forgetting_factor must be in (0, 1]")
        self.n_features = n_features
        self.forgetting_factor = forgetting_factor
        self.sum_c = [np.zeros(n_features), np.zeros(n_features)]
        self.normalizer = [0.0, 0.0]
        self.seen = [False, False]

    def update(self, example: Example) -> None:
        check_dims(example.features, self.n_features, "CentroidTracker.update")
        label = example.label
        if not self.seen[label]:
            self.sum_c[label] = example.features.copy()
            self.normalizer[label] = 1.0
            self.seen[label] = True
        else:
            theta = self.forgetting_factor
            self.sum_c[label] = theta * self.sum_c[label] + example.features
            self.normalizer[label] = theta * self.normalizer[label] + 1.0

    def centroid(self, label: int) -> np.ndarray | None:
        if label not in LABELS:
            raise ValueError(f"unknown label {label!r}")
        if not self.seen[label]:
            return None
        return self.sum_c[label] / self.normalizer[label]

    @property
    def both_classes_seen(self) -> bool:
        return self.seen[NEG] and self.seen[POS]

    def concept_vector(self) -> np.ndarray | None:
        """Vector from the NEG centroid to the POS centroid, or None until
        both classes have been observed."""
        if not self.both_classes_seen:
            return None
        return self.centroid(POS) - self.centroid(NEG)


@dataclass(frozen=True)
class AlignMap:
    """Scaled rotation carrying one concept vector onto another.

    ``matrix / scale`` is orthogonal; ``degenerate`` marks maps built from a
    vanishing input vector, for which projection falls back to the identity.
    """

    matrix: np.ndarray
    scale: float
    degenerate: bool = False


def _householder(w: np.ndarray) -> np.ndarray:
    return np.eye(w.shape[0]) - 2.0 * np.outer(w, w) / float(w @ w)


def build_align_map(
    v_src: np.ndarray,
    v_tgt: np.ndarray,
    degeneracy_tol: float = DEFAULT_DEGENERACY_TOL,
) -> AlignMap:
    """Matrix R with R @ v_tgt == v_src, as a scaled two-reflection rotation.

    The rotation part is H_u @ H_{u+v} for unit vectors u, v of the inputs;
    antiparallel inputs use the single reflection H_v instead. Either input
    with norm below the (relative) degeneracy tolerance yields an identity
    fallback map flagged degenerate.
    """
    v_src = np.asarray(v_src, dtype=float)
    v_tgt = np.asarray(v_tgt, dtype=float)
    if v_src.shape != v_tgt.shape or v_src.ndim != 1:
        raise ValueError(
            f"vector shapes must match and be 1-D, got {v_src.shape} and {v_tgt.shape}"
        )
    d = v_src.shape[0]
    norm_src = float(np.linalg.norm(v_src))
    norm_tgt = float(np.linalg.norm(v_tgt))
    eps = degeneracy_tol * (1.0 + max(norm_src, norm_tgt))
    if norm_src <= eps or norm_tgt <= eps:
        return AlignMap(matrix=np.eye(d), scale=1.0, degenerate=True)
    u = v_src / norm_src
    v = v_tgt / norm_tgt
    scale = norm_src / norm_tgt
    w = u + v
    if float(np.linalg.norm(w)) > degeneracy_tol:
        rotation = _householder(u) @ _householder(w)
    else:
        rotation = _householder(v)
    return AlignMap(matrix=rotation * scale, scale=scale, degenerate=False)


def project_example(
    features: np.ndarray,
    align_map: AlignMap,
    c_tgt_pos: np.ndarray,
    c_src_pos: np.ndarray,
) -> np.ndarray:
    """Image of a target-space point in the source concept's space.

    The displacement from the target POS centroid is rotated/scaled by the
    map and re-anchored at the source POS centroid. Degenerate maps return
    the input unchanged.
    """
    features = np.asarray(features, dtype=float)
    if align_map.degenerate:
        return features
    return c_src_pos + align_map.matrix @ (features - c_tgt_pos)
