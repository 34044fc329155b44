"""Closed-form ridge classification on explicit feature maps.

Models are always fit on exact (noise-free) float64 features; prediction may
run the feature mapping through either backend, which is how the downstream
robustness of the analog path is measured.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import analog, features
from .kernels import GramPair, approx_error, gram

__all__ = [
    "RidgeModel",
    "fit",
    "decision_scores",
    "predict_features",
    "predict",
    "evaluate",
    "EvalResult",
    "save_model",
    "load_model",
]

DEFAULT_LAMBDA = 0.5


@dataclass(frozen=True)
class RidgeModel:
    """One-vs-rest ridge weights: a single row for binary tasks, C rows otherwise."""

    weights: np.ndarray
    lam: float
    class_count: int
    spec: features.FeatureMapSpec | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError("weights must be 2-D (classes x features)")
        if not np.all(np.isfinite(w)):
            raise ValueError("model weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def _solve(Z: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Solve (Z^T Z + lam I) W = Z^T Y without forming an explicit inverse.

    Uses the primal D x D system when D <= N and the equivalent dual N x N
    system otherwise; both are symmetric positive definite for lam > 0.
    """
    n, d = Z.shape
    if d <= n:
        A = Z.T @ Z + lam * np.eye(d)
        return np.linalg.solve(A, Z.T @ Y)
    G = Z @ Z.T + lam * np.eye(n)
    return Z.T @ np.linalg.solve(G, Y)


def fit(
    Z,
    labels,
    lam: float = DEFAULT_LAMBDA,
    class_count: int | None = None,
    spec: features.FeatureMapSpec | None = None,
) -> RidgeModel:
    """Closed-form ridge fit with +/-1 one-vs-rest targets.

    Binary tasks produce a single weight row scoring class 1 against class 0.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if Z.shape[0] != labels.shape[0]:
        raise ValueError("feature/label count mismatch")
    if Z.shape[0] < 1:
        raise ValueError("cannot fit on an empty feature matrix")
    if not np.all(np.isfinite(Z)):
        raise ValueError("features must be finite")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if class_count is None:
        class_count = int(labels.max()) + 1 if labels.size else 0
    if class_count < 2:
        raise ValueError("need at least two classes")
    if labels.min() < 0 or labels.max() >= class_count:
        raise ValueError("labels must lie in [0, class_count)")
    if class_count == 2:
        y = np.where(labels == 1, 1.0, -1.0)[:, None]
    else:
        y = np.full((labels.shape[0], class_count), -1.0)
        y[np.arange(labels.shape[0]), labels] = 1.0
    W = _solve(Z, y, lam)
    return RidgeModel(weights=W.T, lam=lam, class_count=class_count, spec=spec)


def decision_scores(model: RidgeModel, Z) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if Z.shape[1] != model.weights.shape[1]:
        raise ValueError("feature dimension does not match model")
    return Z @ model.weights.T


def predict_features(model: RidgeModel, Z) -> np.ndarray:
    """Predict labels from already-mapped features.

    Binary: sign rule with sgn(0) -> class 1. Multi-class: argmax with ties
    going to the lowest class index.
    """
    scores = decision_scores(model, Z)
    if model.class_count == 2:
        return (scores[:, 0] >= 0.0).astype(np.int64)
    return np.argmax(scores, axis=1).astype(np.int64)


def predict(model: RidgeModel, x, proj: features.ProjectionMatrix, backend=None, rng=None):
    """Map one sample (or a batch) through the given backend and classify it."""
    if model.spec is not None and model.spec != proj.spec:
        raise ValueError("projection does not match the spec the model was fit with")
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    Z = features.map_features(X, proj, backend=backend, rng=rng)
    labels = predict_features(model, Z)
    return labels if np.asarray(x).ndim > 1 else int(labels[0])


@dataclass(frozen=True)
class EvalResult:
    """Per-seed test accuracies and Gram approximation errors."""

    accuracies: np.ndarray
    errors: np.ndarray
    seeds: tuple[int, ...]

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def accuracy_std(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def error_mean(self) -> float:
        return float(np.mean(self.errors))


def _make_backend(kind: str, proj, train_X, cfg, seed):
    if kind == "exact":
        return None
    if kind == "analog":
        cfg = cfg or analog.AnalogTileConfig()
        cfg = replace(cfg, seed=seed)
        cal = train_X[: analog.MAX_CALIBRATION_ROWS]
        pad = proj.padded_dim - cal.shape[1]
        if pad:
            cal = np.hstack([cal, np.zeros((cal.shape[0], pad))])
        return analog.AnalogBackend(proj.omega, cfg, cal)
    raise ValueError(f"unknown backend kind: {kind!r}")


def evaluate(
    train,
    test,
    spec: features.FeatureMapSpec,
    backend: str = "exact",
    seeds=(0,),
    lam: float = DEFAULT_LAMBDA,
    cfg: analog.AnalogTileConfig | None = None,
    error_rows: int = 1000,
) -> EvalResult:
    """Fit on exact train features, predict through `backend`, repeat per seed.

    Also records the Gram approximation error on a test subset of at most
    `error_rows` rows, using features mapped through the same backend.
    """
    accs, errs = [], []
    for seed in seeds:
        sp = replace(spec, seed=int(seed))
        proj = features.sample_projection(sp)
        be = _make_backend(backend, proj, train.features, cfg, int(seed))
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA11A]))
        Ztr = features.map_features(train.features, proj)
        model = fit(Ztr, train.labels, lam=lam, class_count=train.class_count, spec=sp)
        Zte = features.map_features(test.features, proj, backend=be, rng=rng)
        preds = predict_features(model, Zte)
        accs.append(float(np.mean(preds == test.labels)))
        sub = test.features[:error_rows]
        Zsub = Zte[:error_rows]
        G = gram(sp.kernel, sub, sub)
        errs.append(approx_error(GramPair(exact=G, approx=Zsub @ Zsub.T)))
    return EvalResult(
        accuracies=np.asarray(accs), errors=np.asarray(errs), seeds=tuple(int(s) for s in seeds)
    )


def save_model(model: RidgeModel, path) -> None:
    """Write `C D lambda` header plus row-major LE float64 weights."""
    c, d = model.weights.shape
    header = f"{c} {d} {model.lam}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())


def load_model(path) -> RidgeModel:
    with open(path, "rb") as fh:
        parts = fh.readline().decode("ascii").split()
        if len(parts) != 3:
            raise ValueError("malformed model header")
        c, d, lam = int(parts[0]), int(parts[1]), float(parts[2])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != c * d:
        raise ValueError("model payload size does not match header")
    return RidgeModel(
        weights=data.reshape(c, d).copy(),
        lam=lam,
        class_count=2 if c == 1 else c,
    )
