"""Windowed-mean feature extraction, standardization, and train/test split.

Each epoch becomes one feature vector of per-channel averages over the
configured time windows, for both chromophores. Feature ordering is
window-major, then chromophore (HbO before HbR), then channel:

    index(w, c, ch) = (w * 2 + c) * n_channels + ch

This ordering is fixed and recorded in the model file so trained models
stay portable. Labels are encoded LFT=0, RFT=1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dsp import Epoch, _round_index
from .errors import (
    ConfigError,
    DataFormatError,
    DimensionMismatchError,
    InsufficientDataError,
    InvalidWindowError,
)

CHROMOPHORES = ("hbo", "hbr")
LABELS = ("LFT", "RFT")  # tuple index is the integer encoding
LABEL_TO_INT = {name: i for i, name in enumerate(LABELS)}

DEFAULT_WINDOWS = ((0.0, 5.0), (5.0, 10.0), (10.0, 15.0))


@dataclass(frozen=True)
class FeatureLayout:
    windows: tuple[tuple[float, float], ...] = DEFAULT_WINDOWS
    n_channels: int = 20
    chromophores: tuple[str, ...] = CHROMOPHORES

    @property
    def n_features(self) -> int:
        return len(self.windows) * len(self.chromophores) * self.n_channels

    def feature_index(self, window: int, chromophore: int, channel: int) -> int:
        return (window * len(self.chromophores) + chromophore) * self.n_channels + channel


@dataclass(frozen=True)
class Scaling:
    """Per-feature mean and population std; degenerate columns get std 1."""

    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray  # bool mask of columns whose std was forced to 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scaling):
            return NotImplemented
        return (
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.std, other.std)
            and np.array_equal(self.degenerate, other.degenerate)
        )


@dataclass(frozen=True)
class FeatureVector:
    label: int
    values: np.ndarray


@dataclass
class FeatureSet:
    """Labeled feature matrix plus optional layout and scaling provenance."""

    values: np.ndarray  # [n_items, n_features]
    labels: np.ndarray  # [n_items] ints in {0, 1}
    layout: FeatureLayout | None = None
    scaling: Scaling | None = None

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def validate(self) -> None:
        if self.values.ndim != 2 or self.labels.shape != (self.values.shape[0],):
            raise DataFormatError(
                f"feature matrix {self.values.shape} inconsistent with labels {self.labels.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DataFormatError("feature values contain non-finite entries")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise DataFormatError("labels must be 0 (LFT) or 1 (RFT)")

    def subset(self, indices: np.ndarray) -> "FeatureSet":
        return FeatureSet(
            values=self.values[indices],
            labels=self.labels[indices],
            layout=self.layout,
            scaling=self.scaling,
        )


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.7
    seed: int = 0
    stratified: bool = True

    def validate(self) -> None:
        if not (0.0 < self.train_fraction < 1.0):
            raise ConfigError(f"split.train_fraction must be in (0, 1), got {self.train_fraction}")


def extract_features(epoch: Epoch, windows=DEFAULT_WINDOWS) -> FeatureVector:
    """Average each channel/chromophore over the given half-open windows."""
    if epoch.label not in LABEL_TO_INT:
        raise DataFormatError(f"unknown task label '{epoch.label}' (expected one of {LABELS})")
    fs = epoch.sample_rate_hz
    parts = []
    for w_start, w_end in windows:
        if not (epoch.t_start_s <= w_start < w_end <= epoch.t_end_s):
            raise InvalidWindowError(
                f"feature window [{w_start}, {w_end}) outside epoch "
                f"[{epoch.t_start_s}, {epoch.t_end_s})"
            )
        i0 = _round_index((w_start - epoch.t_start_s) * fs)
        i1 = _round_index((w_end - epoch.t_start_s) * fs)
        if i1 <= i0:
            raise InvalidWindowError(f"feature window [{w_start}, {w_end}) contains no samples")
        for chrom in CHROMOPHORES:
            parts.append(getattr(epoch, chrom)[i0:i1].mean(axis=0))
    return FeatureVector(label=LABEL_TO_INT[epoch.label], values=np.concatenate(parts))


def build_feature_set(epochs, windows=DEFAULT_WINDOWS) -> FeatureSet:
    """Stack per-epoch feature vectors into one FeatureSet."""
    if not epochs:
        raise InsufficientDataError("no epochs to extract features from")
    vectors = [extract_features(ep, windows) for ep in epochs]
    layout = FeatureLayout(
        windows=tuple((float(a), float(b)) for a, b in windows),
        n_channels=epochs[0].hbo.shape[1],
    )
    fs = FeatureSet(
        values=np.array([v.values for v in vectors]),
        labels=np.array([v.label for v in vectors], dtype=np.int64),
        layout=layout,
    )
    fs.validate()
    return fs


def fit_standardizer(train: FeatureSet) -> Scaling:
    """Per-feature mean and population std over the training set.

    Columns with std below 1e-12 get std replaced by 1 and are flagged.
    """
    if len(train) < 2:
        raise InsufficientDataError(f"standardizer needs >= 2 vectors, got {len(train)}")
    mean = train.values.mean(axis=0)
    std = train.values.std(axis=0)
    degenerate = std < 1e-12
    std = np.where(degenerate, 1.0, std)
    return Scaling(mean=mean, std=std, degenerate=degenerate)


def apply_standardizer(fs: FeatureSet, scaling: Scaling) -> FeatureSet:
    """Return a new FeatureSet with values mapped to (value - mean) / std."""
    if scaling.mean.shape != (fs.n_features,):
        raise DimensionMismatchError(
            f"scaling has {scaling.mean.shape[0]} features, data has {fs.n_features}"
        )
    return FeatureSet(
        values=(fs.values - scaling.mean) / scaling.std,
        labels=fs.labels.copy(),
        layout=fs.layout,
        scaling=scaling,
    )


def split(fs: FeatureSet, cfg: SplitConfig) -> tuple[FeatureSet, FeatureSet]:
    """Deterministic train/test split, stratified by label by default.

    The total train count is round(train_fraction * n). Under
    stratification, per-class counts start at floor(train_fraction * n_c)
    and remaining slots go to classes by descending fractional remainder
    (ties broken by lower label). Within each class, membership is chosen
    by a seeded shuffle; both outputs preserve the input ordering.
    """
    cfg.validate()
    n = len(fs)
    if n == 0:
        raise InsufficientDataError("cannot split an empty feature set")
    rng = np.random.default_rng(cfg.seed)
    n_train_total = _round_index(cfg.train_fraction * n)

    if not cfg.stratified:
        perm = rng.permutation(n)
        train_idx = np.sort(perm[:n_train_total])
        test_idx = np.sort(perm[n_train_total:])
        return fs.subset(train_idx), fs.subset(test_idx)

    classes = sorted(set(fs.labels.tolist()))
    class_idx = {c: np.flatnonzero(fs.labels == c) for c in classes}
    for c in classes:
        if len(class_idx[c]) == 0:
            raise InsufficientDataError(f"stratified split requires every class; class {c} is empty")
    base = {c: int(np.floor(cfg.train_fraction * len(class_idx[c]))) for c in classes}
    remainder = {c: cfg.train_fraction * len(class_idx[c]) - base[c] for c in classes}
    extra = n_train_total - sum(base.values())
    for c in sorted(classes, key=lambda c: (-remainder[c], c))[:extra]:
        base[c] += 1

    train_parts, test_parts = [], []
    for c in classes:
        idx = class_idx[c]
        perm = rng.permutation(len(idx))
        train_parts.append(idx[perm[: base[c]]])
        test_parts.append(idx[perm[base[c]:]])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    return fs.subset(train_idx), fs.subset(test_idx)


def strip_scaling(fs: FeatureSet) -> FeatureSet:
    return replace(fs, scaling=None)
