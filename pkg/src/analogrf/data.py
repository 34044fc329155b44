"""Dataset parsing, standardization, deterministic splits, synthetic data.

Benchmark datasets are supplied by the user as LIBSVM sparse text or
headerless CSV files and referenced through a small plain-text manifest;
the repository itself only bundles a tiny synthetic blob dataset for tests.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .attention import AttentionProblem
from .kernels import attention_exact

__all__ = [
    "Dataset",
    "SplitSpec",
    "Standardizer",
    "ManifestEntry",
    "ParseError",
    "parse_libsvm",
    "serialize_libsvm",
    "parse_csv",
    "load_dataset",
    "split",
    "standardize_fit_apply",
    "parse_manifest",
    "load_benchmark",
    "synth_attention_problem",
    "synthetic_blobs",
    "gaussian_features",
    "MANIFEST_ENV_VAR",
]

MANIFEST_ENV_VAR = "ANALOGRF_MANIFEST"

STD_FLOOR = 1e-12


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Dense features with contiguous 0-based integer labels."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = ""

    def __post_init__(self):
        feats = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        if not np.all(np.isfinite(feats)):
            raise ValueError("feature matrix contains non-finite entries")
        if feats.shape[0] != labels.shape[0]:
            raise ValueError("feature/label count mismatch")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise ValueError("labels must lie in [0, class_count)")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "random_half"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("fixed", "random_half"):
            raise ValueError(f"unknown split mode: {self.mode!r}")


@dataclass(frozen=True)
class Standardizer:
    """Per-column mean/std computed from training data only.

    Columns with (population) std below 1e-12 get std 1.0 so the transform
    is total; such columns map to exactly zero.
    """

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[0] == 0:
            raise ValueError("cannot fit a standardizer on empty data")
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std < STD_FLOOR, 1.0, std)
        return cls(mean=mean, std=std)

    def transform(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return (X - self.mean) / self.std


def standardize_fit_apply(train, test):
    """Fit on train only, transform both; returns (standardizer, train, test)."""
    st = Standardizer.fit(train)
    return st, st.transform(train), st.transform(test)


def _remap_labels(raw: list[float]) -> tuple[np.ndarray, int]:
    uniq = sorted(set(raw))
    lookup = {v: i for i, v in enumerate(uniq)}
    return np.array([lookup[v] for v in raw], dtype=np.int64), len(uniq)


def parse_libsvm(text, name: str = "") -> Dataset:
    """Parse LIBSVM sparse lines `<label> <idx>:<val> ...` into a dense Dataset.

    Indices are 1-based and must be strictly increasing within a line; absent
    indices are 0.0. Labels are remapped to contiguous 0-based integers by
    ascending original value (so {-1, +1} becomes {0, 1}).
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    raw_labels: list[float] = []
    rows: list[list[tuple[int, float]]] = []
    width = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad label {tokens[0]!r}") from exc
        entries: list[tuple[int, float]] = []
        prev = 0
        for token in tokens[1:]:
            idx_str, _, val_str = token.partition(":")
            try:
                idx = int(idx_str)
                val = float(val_str)
            except ValueError as exc:
                raise ParseError(f"line {lineno}: bad entry {token!r}") from exc
            if idx <= prev:
                raise ParseError(
                    f"line {lineno}: indices must be 1-based and strictly increasing"
                )
            prev = idx
            entries.append((idx, val))
        width = max(width, prev)
        raw_labels.append(label)
        rows.append(entries)
    if not rows:
        raise ParseError("empty input")
    feats = np.zeros((len(rows), width))
    for i, entries in enumerate(rows):
        for idx, val in entries:
            feats[i, idx - 1] = val
    labels, class_count = _remap_labels(raw_labels)
    return Dataset(features=feats, labels=labels, class_count=class_count, name=name)


def serialize_libsvm(ds: Dataset) -> str:
    """Inverse of parse_libsvm (up to label remapping, which is idempotent).

    Zeros are omitted, except that the last column is pinned on the first
    line so the feature count survives a round trip.
    """
    lines = []
    for i in range(ds.n):
        row = ds.features[i]
        entries = [(j + 1, row[j]) for j in np.flatnonzero(row != 0.0)]
        if i == 0 and (not entries or entries[-1][0] < ds.d):
            entries.append((ds.d, row[ds.d - 1]))
        body = " ".join(f"{idx}:{val:.17g}" for idx, val in entries)
        lines.append(f"{ds.labels[i]} {body}".rstrip())
    return "\n".join(lines) + "\n"


def parse_csv(text, name: str = "") -> Dataset:
    """Parse headerless `label,f1,...,fd` lines."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    raw_labels: list[float] = []
    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if width is None:
            width = len(parts) - 1
            if width < 1:
                raise ParseError(f"line {lineno}: no feature columns")
        elif len(parts) - 1 != width:
            raise ParseError(f"line {lineno}: expected {width} features")
        try:
            raw_labels.append(float(parts[0]))
            rows.append([float(p) for p in parts[1:]])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad number") from exc
    if not rows:
        raise ParseError("empty input")
    labels, class_count = _remap_labels(raw_labels)
    return Dataset(
        features=np.asarray(rows), labels=labels, class_count=class_count, name=name
    )


def load_dataset(path, fmt: str = "libsvm", name: str = "") -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    name = name or os.path.splitext(os.path.basename(str(path)))[0]
    if fmt == "libsvm":
        return parse_libsvm(text, name=name)
    if fmt == "csv":
        return parse_csv(text, name=name)
    raise ValueError(f"unknown dataset format: {fmt!r}")


def _subset(ds: Dataset, idx: np.ndarray, suffix: str) -> Dataset:
    return Dataset(
        features=ds.features[idx],
        labels=ds.labels[idx],
        class_count=ds.class_count,
        name=f"{ds.name}{suffix}" if ds.name else ds.name,
    )


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Deterministic 50/50 random partition; sizes ceil(N/2) and floor(N/2).

    Fixed-split benchmarks ship separate train/test files and never reach
    this function, so mode='fixed' is rejected here.
    """
    if spec.mode == "fixed":
        raise ValueError("fixed splits are provided as separate files, nothing to split")
    if ds.n < 2:
        raise ValueError("random_half split needs at least 2 samples")
    perm = np.random.default_rng(spec.seed).permutation(ds.n)
    cut = math.ceil(ds.n / 2)
    return _subset(ds, np.sort(perm[:cut]), ":train"), _subset(ds, np.sort(perm[cut:]), ":test")


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    fmt: str
    split_mode: str
    train_path: str
    test_path: str | None = None


def parse_manifest(path) -> dict[str, ManifestEntry]:
    """Parse `name format split train_path [test_path]` lines; '#' comments."""
    entries: dict[str, ManifestEntry] = {}
    base = os.path.dirname(os.path.abspath(str(path)))
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (4, 5):
                raise ParseError(f"{path}:{lineno}: expected 4 or 5 fields")
            name, fmt, mode, train_path = parts[:4]
            test_path = parts[4] if len(parts) == 5 else None
            if mode == "fixed" and test_path is None:
                raise ParseError(f"{path}:{lineno}: fixed split needs a test path")
            def resolve(p):
                return p if os.path.isabs(p) else os.path.join(base, p)
            entries[name] = ManifestEntry(
                name=name,
                fmt=fmt,
                split_mode=mode,
                train_path=resolve(train_path),
                test_path=resolve(test_path) if test_path else None,
            )
    return entries


def load_benchmark(
    entry: ManifestEntry, split_seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Load one manifest entry as an unstandardized (train, test) pair."""
    if entry.split_mode == "fixed":
        train = load_dataset(entry.train_path, entry.fmt, name=entry.name)
        test = load_dataset(entry.test_path, entry.fmt, name=entry.name)
        if train.d != test.d:
            width = max(train.d, test.d)
            train = _pad_features(train, width)
            test = _pad_features(test, width)
        return train, test
    ds = load_dataset(entry.train_path, entry.fmt, name=entry.name)
    return split(ds, SplitSpec(mode="random_half", seed=split_seed))


def _pad_features(ds: Dataset, width: int) -> Dataset:
    if ds.d == width:
        return ds
    feats = np.zeros((ds.n, width))
    feats[:, : ds.d] = ds.features
    return Dataset(features=feats, labels=ds.labels, class_count=ds.class_count, name=ds.name)


def synth_attention_problem(
    L: int, d_head: int, seed: int = 0, d_v: int | None = None
) -> AttentionProblem:
    """Standard-normal Q, K, V with the exact attention output precomputed."""
    if L < 1 or d_head < 1:
        raise ValueError("L and d_head must be positive")
    d_v = d_head if d_v is None else d_v
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((L, d_head))
    K = rng.standard_normal((L, d_head))
    V = rng.standard_normal((L, d_v))
    return AttentionProblem(
        Q=Q, K=K, V=V, d_head=d_head, exact_output=attention_exact(Q, K, V, d_head)
    )


def synthetic_blobs(
    n: int = 200, d: int = 4, seed: int = 7, separation: float = 4.0, spread: float = 0.4
) -> Dataset:
    """Two well-separated Gaussian blobs; linearly separable by construction."""
    rng = np.random.default_rng(seed)
    half = n // 2
    center = separation / (2.0 * math.sqrt(d)) * np.ones(d)
    neg = -center + spread * rng.standard_normal((n - half, d))
    pos = center + spread * rng.standard_normal((half, d))
    feats = np.vstack([neg, pos])
    labels = np.concatenate([np.zeros(n - half, dtype=np.int64), np.ones(half, dtype=np.int64)])
    perm = rng.permutation(n)
    return Dataset(
        features=feats[perm], labels=labels[perm], class_count=2, name="blobs"
    )


def gaussian_features(n: int, d: int, seed: int = 0, name: str = "gauss") -> Dataset:
    """Standard-normal feature rows with alternating labels, for error sweeps."""
    rng = np.random.default_rng(seed)
    feats = rng.standard_normal((n, d))
    labels = (np.arange(n) % 2).astype(np.int64)
    return Dataset(features=feats, labels=labels, class_count=2, name=name)


def clustered_gaussians(
    n: int = 256,
    d: int = 16,
    n_clusters: int = 8,
    spread: float = 0.3,
    seed: int = 0,
    name: str = "clusters",
) -> Dataset:
    """Gaussian mixture rows, standardized per column.

    Unlike a single isotropic blob, clustered rows keep a fraction of the
    pairwise distances small after standardization, so Gram matrices carry
    off-diagonal mass the way real benchmark data does.
    """
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_clusters, d))
    assign = rng.integers(0, n_clusters, size=n)
    feats = centers[assign] + spread * rng.standard_normal((n, d))
    feats = Standardizer.fit(feats).transform(feats)
    return Dataset(
        features=feats,
        labels=(assign % 2).astype(np.int64),
        class_count=2,
        name=name,
    )
