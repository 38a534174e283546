"""Dataset ingestion, min-max normalization, 7:3 splitting, and synthetic
benchmark generation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

TEST_CLAMP_LO = -0.5
TEST_CLAMP_HI = 1.5


@dataclass
class NormStats:
    """Per-feature min/max computed from training rows only."""

    mins: np.ndarray
    maxs: np.ndarray

    def transform(self, x: np.ndarray, clamp: bool = False) -> np.ndarray:
        span = self.maxs - self.mins
        safe = np.where(span > 0.0, span, 1.0)
        out = (x - self.mins) / safe
        out = np.where(span > 0.0, out, 0.0)  # constant features map to 0
        if clamp:
            out = np.clip(out, TEST_CLAMP_LO, TEST_CLAMP_HI)
        return out


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray | None = None           # 0/1, 1 = outlier
    feature_names: list | None = None
    train_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None
    norm_stats: NormStats | None = None
    raw_features: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def train_features(self) -> np.ndarray:
        return self.features[self.train_idx]

    def test_features(self) -> np.ndarray:
        return self.features[self.test_idx]

    def train_labels(self) -> np.ndarray | None:
        return None if self.labels is None else self.labels[self.train_idx]

    def test_labels(self) -> np.ndarray | None:
        return None if self.labels is None else self.labels[self.test_idx]


def load_csv(path, label_column: str | None = None) -> Dataset:
    """Read a header-ed numeric CSV; the optional label column must be 0/1."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file")
        header = [h.strip() for h in header]
        label_pos = None
        if label_column is not None:
            if label_column not in header:
                raise ParseError(f"{path}: label column {label_column!r} not in header")
            label_pos = header.index(label_column)

        rows, labels = [], []
        for r, line in enumerate(reader, start=1):
            if not line:
                continue
            if len(line) != len(header):
                raise ParseError(f"{path}: row {r} has {len(line)} fields, expected {len(header)}", row=r)
            values = []
            for c, cell in enumerate(line):
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(f"{path}: non-numeric cell {cell!r} at row {r}, column {c + 1}",
                                     row=r, column=c + 1)
                if label_pos is not None and c == label_pos:
                    if value not in (0.0, 1.0):
                        raise ParseError(f"{path}: label at row {r} must be 0 or 1, got {cell!r}",
                                         row=r, column=c + 1)
                    labels.append(int(value))
                else:
                    values.append(value)
            rows.append(values)

    feature_names = [h for i, h in enumerate(header) if i != label_pos]
    features = np.asarray(rows, dtype=np.float64)
    return Dataset(features=features,
                   labels=np.asarray(labels, dtype=np.int64) if label_pos is not None else None,
                   feature_names=feature_names)


def split_and_normalize(dataset: Dataset, test_fraction: float = 0.3,
                        seed: int = 0) -> Dataset:
    """Seeded uniform shuffle, ceil(0.7 n) training rows, min-max stats from
    the training rows only. Test rows are clamped to [-0.5, 1.5]."""
    n = dataset.n
    if n < 4:
        raise ValueError("need at least 4 rows to split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = math.ceil((1.0 - test_fraction) * n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])

    raw = dataset.features
    stats = NormStats(mins=raw[train_idx].min(axis=0), maxs=raw[train_idx].max(axis=0))
    features = np.empty_like(raw, dtype=np.float64)
    features[train_idx] = stats.transform(raw[train_idx])
    features[test_idx] = stats.transform(raw[test_idx], clamp=True)

    return Dataset(features=features, labels=dataset.labels,
                   feature_names=dataset.feature_names,
                   train_idx=train_idx, test_idx=test_idx,
                   norm_stats=stats, raw_features=raw)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 2000
    p_o: float = 0.05
    n_features: int = 2
    overlap: float = 1.0 / 3.0  # 0 = outliers kept clear of inlier clusters, 1 = anywhere
    cluster_std: float = 0.08
    seed: int = 0


def make_synthetic(spec: SyntheticSpec) -> Dataset:
    """2-D (by default) benchmark: inliers from a two-component Gaussian
    mixture, outliers uniform on the 1.5x-expanded bounding box. The outlier
    count is deterministic: ceil(p_o * n)."""
    if not 0.0 < spec.p_o < 0.5:
        raise ValueError("p_o must lie in (0, 0.5)")
    rng = np.random.default_rng(spec.seed)
    n_out = math.ceil(spec.p_o * spec.n)
    n_in = spec.n - n_out
    p = spec.n_features

    centers = np.zeros((2, p))
    centers[0, :] = 0.3
    centers[1, :] = 0.7
    comp = rng.integers(0, 2, size=n_in)
    inliers = centers[comp] + rng.normal(0.0, spec.cluster_std, size=(n_in, p))

    lo, hi = inliers.min(axis=0), inliers.max(axis=0)
    mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
    box_lo, box_hi = mid - 1.5 * half, mid + 1.5 * half

    # Rejection radius around cluster centers shrinks as overlap grows:
    # 12 sigma at overlap 0 (fully separated), 0 at overlap 1 (anywhere).
    margin = 12.0 * spec.cluster_std * (1.0 - spec.overlap)
    outliers = np.empty((n_out, p))
    filled = 0
    while filled < n_out:
        cand = rng.uniform(box_lo, box_hi, size=(n_out - filled, p))
        if margin > 0.0:
            d = np.min(np.linalg.norm(cand[:, None, :] - centers[None, :, :], axis=2), axis=1)
            cand = cand[d > margin]
        outliers[filled : filled + cand.shape[0]] = cand
        filled += cand.shape[0]

    features = np.vstack([inliers, outliers])
    labels = np.concatenate([np.zeros(n_in, dtype=np.int64), np.ones(n_out, dtype=np.int64)])
    order = rng.permutation(spec.n)
    return Dataset(features=features[order], labels=labels[order],
                   feature_names=[f"f{i}" for i in range(p)])
