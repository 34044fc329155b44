"""Projection-matrix samplers and the random-feature maps built on them.

The generic map is z(x) = h(x)/sqrt(m) * [f_1(w_1.x), ..., f_l(w_m.x)] with
kernel-specific post-processing:

    RBF      f_1 = sin, f_2 = cos            h(x) = 1
    ArcCos0  f_1 = step(.)                   h(x) = sqrt(2)
    Softmax  f_1 = exp, f_2 = exp(-.)        h(x) = exp(-||x||^2 / 2) / sqrt(2)

so that E<z(x), z(y)> equals the corresponding exact kernel. The softmax
prefactor 1/sqrt(2) (rather than sqrt(2)) is required for unbiasedness with
the concatenated +/- exponential pair; this was verified against a
brute-force Monte Carlo oracle.

Three samplers for the projection columns w_i are provided: plain i.i.d.
truncated Gaussian draws, block-orthogonal draws with chi(d) column norms,
and a structured orthogonal construction sqrt(d) * H D1 H D2 H D3 built from
normalized Walsh-Hadamard transforms H and Rademacher diagonals D_i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .kernels import Kernel

__all__ = [
    "Sampler",
    "FeatureMapSpec",
    "ProjectionMatrix",
    "truncated_normal",
    "fwht",
    "sample_rff",
    "sample_orf",
    "sample_sorf",
    "sample_projection",
    "map_features",
    "feature_map",
    "softmax_trig_features",
    "softmax_trig_map",
    "save_projection",
    "load_projection",
]

# Number of post-processing functions l per kernel; output dim is D = l * m.
FUNC_COUNT = {Kernel.RBF: 2, Kernel.ARCCOS0: 1, Kernel.SOFTMAX: 2}


class Sampler(str, Enum):
    RFF = "rff"
    ORF = "orf"
    SORF = "sorf"


@dataclass(frozen=True)
class FeatureMapSpec:
    """Recipe for a feature map: kernel, sampler, dimensions, and seed."""

    kernel: Kernel
    sampler: Sampler
    d: int
    m: int
    seed: int
    truncation: float = 3.0

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("d and m must be positive")
        if self.truncation <= 0:
            raise ValueError("truncation must be positive")

    @property
    def l(self) -> int:
        return FUNC_COUNT[self.kernel]

    @property
    def D(self) -> int:
        return self.l * self.m

    @property
    def expansion_ratio(self) -> float:
        """The application factor a = D / (l * d)."""
        return self.D / (self.l * self.d)


@dataclass(frozen=True)
class ProjectionMatrix:
    """Sampled projection omega (one column per feature) plus its recipe.

    For the structured sampler, omega is stored at the padded power-of-two
    input dimension; inputs are zero-padded at map time, which leaves the
    kernel estimate unchanged.
    """

    omega: np.ndarray
    spec: FeatureMapSpec

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=np.float64)
        if not np.all(np.isfinite(omega)):
            raise ValueError("projection matrix has non-finite entries")
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)

    @property
    def padded_dim(self) -> int:
        return self.omega.shape[0]


def truncated_normal(
    rng: np.random.Generator, shape, truncation: float = 3.0
) -> np.ndarray:
    """Standard normal draws conditioned on |v| <= truncation, by resampling."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > truncation
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > truncation
    return out


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length() if n > 1 else 1


def fwht(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Orthonormal fast Walsh-Hadamard transform along `axis`.

    The transform length must be a power of two; the result equals H @ a with
    H the normalized (H H^T = I) Hadamard matrix.
    """
    a = np.asarray(a, dtype=np.float64)
    squeeze = a.ndim == 1
    if squeeze:
        a = a[:, None]
    a = np.moveaxis(a, axis, 0).copy()
    n = a.shape[0]
    if n & (n - 1):
        raise ValueError("transform length must be a power of two")
    trailing = a.shape[1:]
    a = a.reshape(n, -1)
    h = 1
    while h < n:
        a = a.reshape(n // (2 * h), 2, h, -1)
        top = a[:, 0] + a[:, 1]
        bot = a[:, 0] - a[:, 1]
        a = np.stack((top, bot), axis=1).reshape(n, -1)
        h *= 2
    a /= math.sqrt(n)
    a = a.reshape(n, *trailing)
    a = np.moveaxis(a, 0, axis)
    return a[:, 0] if squeeze else a


def sample_rff(spec: FeatureMapSpec) -> ProjectionMatrix:
    """i.i.d. truncated-Gaussian projection columns."""
    rng = np.random.default_rng(spec.seed)
    omega = truncated_normal(rng, (spec.d, spec.m), spec.truncation)
    return ProjectionMatrix(omega, spec)


def sample_orf(spec: FeatureMapSpec) -> ProjectionMatrix:
    """Block-orthogonal columns with chi(d) norms.

    Each d-sized block is the Q factor of a truncated-Gaussian matrix (signs
    fixed so the distribution does not depend on the QR routine), and column i
    is rescaled by an independent chi(d) norm so that marginally each column
    matches an isotropic Gaussian draw (E||w||^2 = d).
    """
    d, m = spec.d, spec.m
    rng = np.random.default_rng(spec.seed)
    blocks = []
    for _ in range((m + d - 1) // d):
        g = truncated_normal(rng, (d, d), spec.truncation)
        q, r = np.linalg.qr(g)
        sign = np.sign(np.diag(r))
        sign[sign == 0] = 1.0
        norms = np.sqrt(rng.chisquare(d, size=d))
        blocks.append(q * (sign * norms))
    omega = np.hstack(blocks)[:, :m]
    return ProjectionMatrix(omega, spec)


def _sorf_block(rng: np.random.Generator, dp: int) -> np.ndarray:
    # sqrt(dp) * H D1 H D2 H D3 acting on the identity, D_i Rademacher.
    block = np.eye(dp)
    for _ in range(3):
        signs = rng.integers(0, 2, size=dp) * 2.0 - 1.0
        block = fwht(signs[:, None] * block, axis=0)
    return math.sqrt(dp) * block


def sample_sorf(spec: FeatureMapSpec) -> ProjectionMatrix:
    """Structured orthogonal columns from Hadamard-Rademacher products.

    The input dimension is padded to the next power of two; every block has
    exactly orthogonal columns and all row/column norms equal sqrt(d_padded).
    """
    dp = _next_pow2(spec.d)
    rng = np.random.default_rng(spec.seed)
    n_blocks = (spec.m + dp - 1) // dp
    blocks = [_sorf_block(rng, dp) for _ in range(n_blocks)]
    omega = np.hstack(blocks)[:, : spec.m]
    return ProjectionMatrix(omega, spec)


_SAMPLERS = {
    Sampler.RFF: sample_rff,
    Sampler.ORF: sample_orf,
    Sampler.SORF: sample_sorf,
}


def sample_projection(spec: FeatureMapSpec) -> ProjectionMatrix:
    """Sample the projection matrix named by the spec."""
    return _SAMPLERS[spec.sampler](spec)


def _project(X: np.ndarray, proj: ProjectionMatrix, backend, rng) -> np.ndarray:
    """Raw projections U = X_padded @ omega, through a backend if given."""
    pad = proj.padded_dim - X.shape[1]
    if pad:
        X = np.hstack([X, np.zeros((X.shape[0], pad))])
    if backend is None:
        return X @ proj.omega
    return backend.matmat(X, rng=rng)


def map_features(X, proj: ProjectionMatrix, backend=None, rng=None) -> np.ndarray:
    """Apply the feature map row-wise: (N, d) -> (N, D).

    With backend=None the projection is an exact float64 matmul; otherwise
    the backend supplies the linear map (e.g. the simulated analog crossbar)
    and the kernel-specific post-processing stays digital.
    """
    spec = proj.spec
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.d:
        raise ValueError(f"expected inputs of dim {spec.d}, got {X.shape[1]}")
    U = _project(X, proj, backend, rng)
    inv_sqrt_m = 1.0 / math.sqrt(spec.m)
    if spec.kernel is Kernel.RBF:
        return inv_sqrt_m * np.concatenate([np.sin(U), np.cos(U)], axis=1)
    if spec.kernel is Kernel.ARCCOS0:
        return math.sqrt(2.0) * inv_sqrt_m * (U > 0.0).astype(np.float64)
    if spec.kernel is Kernel.SOFTMAX:
        h = np.exp(-0.5 * np.einsum("ij,ij->i", X, X)) / math.sqrt(2.0)
        return (h * inv_sqrt_m)[:, None] * np.concatenate(
            [np.exp(U), np.exp(-U)], axis=1
        )
    raise ValueError(f"unknown kernel: {spec.kernel!r}")


def feature_map(x, proj: ProjectionMatrix, backend=None, rng=None) -> np.ndarray:
    """Feature map of a single vector; see map_features."""
    return map_features(np.asarray(x, dtype=np.float64)[None, :], proj, backend, rng)[0]


def softmax_trig_features(X, proj: ProjectionMatrix, backend=None, rng=None) -> np.ndarray:
    """Trigonometric softmax-kernel features exp(||x||^2/2)/sqrt(m) [sin, cos].

    Unbiased for exp(x.y) like the positive pair, but the estimates are
    sign-indefinite; kept for the positive-vs-trigonometric comparison.
    """
    spec = proj.spec
    if spec.kernel is not Kernel.SOFTMAX:
        raise ValueError("trigonometric features require a softmax projection")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.d:
        raise ValueError(f"expected inputs of dim {spec.d}, got {X.shape[1]}")
    U = _project(X, proj, backend, rng)
    h = np.exp(0.5 * np.einsum("ij,ij->i", X, X))
    return (h / math.sqrt(spec.m))[:, None] * np.concatenate(
        [np.sin(U), np.cos(U)], axis=1
    )


def softmax_trig_map(x, proj: ProjectionMatrix, backend=None, rng=None) -> np.ndarray:
    return softmax_trig_features(np.asarray(x, dtype=np.float64)[None, :], proj, backend, rng)[0]


def save_projection(proj: ProjectionMatrix, path) -> None:
    """Write `d m l kernel sampler seed` header plus row-major LE float64 data."""
    spec = proj.spec
    header = f"{spec.d} {spec.m} {spec.l} {spec.kernel.value} {spec.sampler.value} {spec.seed}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(proj.omega, dtype="<f8").tobytes())


def load_projection(path) -> ProjectionMatrix:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 6:
            raise ValueError("malformed projection header")
        d, m, l, kernel, sampler, seed = header
        spec = FeatureMapSpec(
            kernel=Kernel(kernel),
            sampler=Sampler(sampler),
            d=int(d),
            m=int(m),
            seed=int(seed),
        )
        if spec.l != int(l):
            raise ValueError("header function count does not match kernel")
        rows = _next_pow2(spec.d) if spec.sampler is Sampler.SORF else spec.d
        data = np.frombuffer(fh.read(), dtype="<f8")
        if data.size != rows * spec.m:
            raise ValueError("projection payload size does not match header")
        return ProjectionMatrix(data.reshape(rows, spec.m).copy(), spec)
