"""Linear-complexity attention through softmax-kernel random features.

The reordered computation D^-1 (Q' (K'^T V)) avoids the L x L attention
matrix: queries and keys are mapped to positive softmax features, the K'^T V
contraction runs first, and a diagonal normalizer restores the softmax row
sums. A ReLU variant replaces the kernel feature map with Q' = relu(Q omega).

The softmax temperature 1/sqrt(d_head) is folded symmetrically: Q and K are
each scaled by d_head^(-1/4) before mapping, so the feature inner products
estimate exp(q.k / sqrt(d_head)) directly.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import analog, features
from .features import FeatureMapSpec, ProjectionMatrix, Sampler
from .kernels import Kernel, mse

__all__ = [
    "AttentionProblem",
    "FavorOutput",
    "FlopCounter",
    "favor_attention",
    "relu_attention",
    "attention_error_experiment",
]


@dataclass(frozen=True)
class AttentionProblem:
    """Q, K, V for one head plus the exact softmax-attention output."""

    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    d_head: int
    exact_output: np.ndarray

    def __post_init__(self):
        for name in ("Q", "K", "V", "exact_output"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.Q.shape != (self.L, self.d_head) or self.K.shape != self.Q.shape:
            raise ValueError("Q and K must be L x d_head")
        if self.V.shape[0] != self.L or self.exact_output.shape != self.V.shape:
            raise ValueError("V/exact_output shape mismatch")

    @property
    def L(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True)
class FavorOutput:
    """Approximated attention output with the mapped matrices that produced it.

    q_prime and k_prime are the feature maps up to a per-row (queries) or
    global (keys) positive stabilizer factor; those factors cancel between
    the numerator and the normalizer, so `output` is unaffected by them.
    """

    output: np.ndarray
    q_prime: np.ndarray
    k_prime: np.ndarray
    normalizer: np.ndarray


@dataclass
class FlopCounter:
    """Tallies floating-point operations (one multiply-accumulate = 2 ops)."""

    total: int = 0
    events: list = field(default_factory=list)

    def matmul(self, n: int, k: int, m: int) -> None:
        self.total += 2 * n * k * m
        self.events.append(("matmul", n, k, m))

    def elementwise(self, count: int) -> None:
        self.total += int(count)
        self.events.append(("elementwise", int(count)))


def _mapped_projections(X, proj, backend, rng, counter):
    U = features._project(X, proj, backend, rng)
    if counter is not None:
        counter.matmul(X.shape[0], proj.padded_dim, proj.omega.shape[1])
    return U


def _positive_pair_features(X, U, m, stabilizer):
    """exp(+/-u - ||x||^2/2) pairs with a stabilizer subtracted pre-exp.

    stabilizer='row' subtracts each row's max |u| (used for queries);
    'global' subtracts one scalar over the whole matrix (used for keys).
    Either way the true feature map is recovered by a positive rescaling
    that cancels in the attention normalization.
    """
    sq = 0.5 * np.einsum("ij,ij->i", X, X)
    if stabilizer == "row":
        stab = np.abs(U).max(axis=1, keepdims=True)
    else:
        stab = np.abs(U).max()
    scale = 1.0 / np.sqrt(2.0 * m)
    pos = np.exp(U - stab - sq[:, None])
    neg = np.exp(-U - stab - sq[:, None])
    return scale * np.concatenate([pos, neg], axis=1)


def _normalized_output(q_prime, k_prime, V, counter=None):
    kv = k_prime.T @ V
    ksum = k_prime.sum(axis=0)
    numer = q_prime @ kv
    denom = q_prime @ ksum
    if counter is not None:
        L, D = q_prime.shape
        counter.matmul(D, k_prime.shape[0], V.shape[1])
        counter.matmul(L, D, V.shape[1])
        counter.matmul(L, D, 1)
    bad = np.flatnonzero(~(denom > 0.0))
    if bad.size:
        raise ValueError(
            f"nonpositive attention normalizer at row(s) {bad[:8].tolist()}; "
            "the feature configuration is degenerate"
        )
    return numer / denom[:, None], denom


def favor_attention(
    problem: AttentionProblem,
    proj: ProjectionMatrix,
    backend=None,
    rng=None,
    counter: FlopCounter | None = None,
) -> FavorOutput:
    """Softmax-kernel attention computed in the reordered linear-cost form."""
    if proj.spec.kernel is not Kernel.SOFTMAX:
        raise ValueError("favor attention requires a softmax-kernel projection")
    if proj.spec.d != problem.d_head:
        raise ValueError("projection input dim must equal d_head")
    m = proj.spec.m
    temper = float(problem.d_head) ** -0.25
    Qs = problem.Q * temper
    Ks = problem.K * temper
    Uq = _mapped_projections(Qs, proj, backend, rng, counter)
    Uk = _mapped_projections(Ks, proj, backend, rng, counter)
    q_prime = _positive_pair_features(Qs, Uq, m, stabilizer="row")
    k_prime = _positive_pair_features(Ks, Uk, m, stabilizer="global")
    if counter is not None:
        counter.elementwise(4 * problem.L * m)
    output, denom = _normalized_output(q_prime, k_prime, problem.V, counter)
    return FavorOutput(output=output, q_prime=q_prime, k_prime=k_prime, normalizer=denom)


def relu_attention(
    problem: AttentionProblem,
    omega: np.ndarray,
    backend=None,
    rng=None,
    counter: FlopCounter | None = None,
) -> FavorOutput:
    """Attention variant with Q' = relu(Q omega), K' = relu(K omega).

    omega maps d_head directly to the target dimension D; no prefactor or
    1/sqrt(d_head) tempering is needed because the normalization is invariant
    to positive rescaling of Q and K.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape[0] != problem.d_head:
        raise ValueError("omega must have d_head rows")
    if backend is None:
        backend = analog.ExactBackend(omega)
    Uq = backend.matmat(problem.Q, rng=rng)
    Uk = backend.matmat(problem.K, rng=rng)
    if counter is not None:
        counter.matmul(problem.L, omega.shape[0], omega.shape[1])
        counter.matmul(problem.L, omega.shape[0], omega.shape[1])
        counter.elementwise(2 * problem.L * omega.shape[1])
    q_prime = np.maximum(Uq, 0.0)
    k_prime = np.maximum(Uk, 0.0)
    output, denom = _normalized_output(q_prime, k_prime, problem.V, counter)
    return FavorOutput(output=output, q_prime=q_prime, k_prime=k_prime, normalizer=denom)


def _spec_seed(seed: int, m: int, sampler_idx: int) -> int:
    return int(np.random.SeedSequence([seed, m, sampler_idx]).generate_state(1)[0])


def attention_error_experiment(
    L: int,
    d_head: int,
    m_values,
    seeds,
    samplers=(Sampler.RFF, Sampler.ORF),
    feature_types=("positive", "trig"),
    backend: str = "exact",
    cfg: analog.AnalogTileConfig | None = None,
) -> list[dict]:
    """Approximation error of kernelized attention on synthetic Q/K/V.

    For every (m, sampler, feature type) three views of the approximation are
    compared against the exact ones: the unnormalized softmax kernel matrix
    B = exp(Q K^T / sqrt(d_head)) versus Zq Zk^T (mse_kernel / fro_kernel),
    the row-normalized attention matrix (mse_attn / fro_attn), and the
    attention output (mse_output / fro_output). The kernel-matrix view is
    dominated by exp(||q||^2)-scale outliers at these geometries; the
    normalized views are the stable ones. Returns one aggregated row per
    (m, sampler, features, metric) with mean and std over seeds.
    Trigonometric features may produce nonpositive normalizers; affected
    normalized metrics are recorded as inf rather than raised, since that
    instability is part of what the comparison shows.
    """
    from .data import synth_attention_problem

    samplers = [Sampler(s) for s in samplers]
    per_cell: dict[tuple, list[dict]] = {}
    for seed in seeds:
        problem = synth_attention_problem(L, d_head, seed=int(seed))
        temper = float(d_head) ** -0.25
        Qs = problem.Q * temper
        Ks = problem.K * temper
        B = np.exp(Qs @ Ks.T)
        A = B / B.sum(axis=1, keepdims=True)
        b_norm = np.linalg.norm(B)
        a_norm = np.linalg.norm(A)
        o_norm = np.linalg.norm(problem.exact_output)
        for m in m_values:
            for si, sampler in enumerate(samplers):
                spec = FeatureMapSpec(
                    kernel=Kernel.SOFTMAX,
                    sampler=sampler,
                    d=d_head,
                    m=int(m),
                    seed=_spec_seed(int(seed), int(m), si),
                )
                proj = features.sample_projection(spec)
                be = None
                rng = None
                if backend == "analog":
                    acfg = analog.AnalogTileConfig() if cfg is None else cfg
                    acfg = dataclasses.replace(acfg, seed=spec.seed)
                    cal = np.vstack([Ks, Qs])[: analog.MAX_CALIBRATION_ROWS]
                    be = analog.AnalogBackend(proj.omega, acfg, cal)
                    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xF0]))
                elif backend != "exact":
                    raise ValueError(f"unknown backend kind: {backend!r}")
                for ftype in feature_types:
                    if ftype == "positive":
                        Zq = features.map_features(Qs, proj, backend=be, rng=rng)
                        Zk = features.map_features(Ks, proj, backend=be, rng=rng)
                    elif ftype == "trig":
                        Zq = features.softmax_trig_features(Qs, proj, backend=be, rng=rng)
                        Zk = features.softmax_trig_features(Ks, proj, backend=be, rng=rng)
                    else:
                        raise ValueError(f"unknown feature type: {ftype!r}")
                    Bhat = Zq @ Zk.T
                    denom = Bhat.sum(axis=1)
                    with np.errstate(divide="ignore", invalid="ignore"):
                        Ahat = Bhat / denom[:, None]
                        Ohat = Ahat @ problem.V
                    metrics = {
                        "mse_kernel": mse(B, Bhat),
                        "fro_kernel": float(np.linalg.norm(B - Bhat) / b_norm),
                    }
                    if np.all(np.isfinite(Ahat)):
                        metrics["mse_attn"] = mse(A, Ahat)
                        metrics["fro_attn"] = float(np.linalg.norm(A - Ahat) / a_norm)
                        metrics["mse_output"] = mse(problem.exact_output, Ohat)
                        metrics["fro_output"] = float(
                            np.linalg.norm(problem.exact_output - Ohat) / o_norm
                        )
                    else:
                        for name in ("mse_attn", "fro_attn", "mse_output", "fro_output"):
                            metrics[name] = float("inf")
                    for name, value in metrics.items():
                        per_cell.setdefault(
                            (int(m), sampler.value, ftype, backend, name), []
                        ).append(value)
    rows = []
    for (m, sampler, ftype, bk, metric), values in sorted(per_cell.items()):
        arr = np.asarray(values)
        rows.append(
            {
                "m": m,
                "sampler": sampler,
                "features": ftype,
                "backend": bk,
                "metric": metric,
                "mean": float(np.mean(arr)),
                "std": float(np.std(arr)),
                "seeds": len(values),
            }
        )
    return rows
