"""Simulated analog in-memory matrix-vector multiplication.

Models the accuracy-relevant path of a phase-change-memory crossbar behind
the same interface as an exact float64 backend: weight clipping at program
time, a frozen programming-noise realization, symmetric INT8 input
quantization with a calibrated per-tile scale, per-column output noise,
ADC saturation at calibrated per-column bounds, an optional per-column
affine correction, and digital accumulation across 256x256 tiles.

Signed weights are modeled directly; the differential conductance-pair
encoding of the physical devices is abstracted away because every effect
simulated here (clipping, noise, quantization, saturation) acts at the
signed-weight level.
"""
from __future__ import annotations

import abc
import dataclasses
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MvmBackend",
    "ExactBackend",
    "AnalogTileConfig",
    "ProgrammedTile",
    "AnalogBackend",
    "round_half_away",
    "quantize_codes",
    "program",
    "calibrate",
    "analog_matvec",
    "analog_matmat",
    "dump_tile",
    "load_tile",
]

MAX_TILE_DIM = 256
INT8_MAX = 127
MAX_CALIBRATION_ROWS = 2000


class MvmBackend(abc.ABC):
    """A fixed linear map x -> W^T x, evaluated exactly or through the simulator."""

    in_dim: int
    out_dim: int

    @abc.abstractmethod
    def matmat(self, X: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """Apply the map to the rows of X: (N, in_dim) -> (N, out_dim)."""

    def matvec(self, x, rng: np.random.Generator | None = None) -> np.ndarray:
        return self.matmat(np.asarray(x, dtype=np.float64)[None, :], rng=rng)[0]


class ExactBackend(MvmBackend):
    """Reference backend: a plain float64 matrix product."""

    def __init__(self, weights: np.ndarray):
        self.weights = np.array(weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a 2-D matrix")
        self.weights.setflags(write=False)
        self.in_dim, self.out_dim = self.weights.shape

    def matmat(self, X, rng=None):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.in_dim:
            raise ValueError(f"expected inputs of dim {self.in_dim}, got {X.shape[1]}")
        return X @ self.weights


def round_half_away(v: np.ndarray) -> np.ndarray:
    """Round to nearest with halves away from zero (symmetric about 0)."""
    v = np.asarray(v, dtype=np.float64)
    return np.copysign(np.floor(np.abs(v) + 0.5), v)


def quantize_codes(x: np.ndarray, scale: float) -> np.ndarray:
    """Symmetric INT8 codes: round(x / scale) clamped to [-127, 127]."""
    if scale <= 0:
        raise ValueError("quantization scale must be positive")
    return np.clip(round_half_away(x / scale), -INT8_MAX, INT8_MAX)


@dataclass(frozen=True)
class AnalogTileConfig:
    """Noise, quantization, and geometry parameters of one crossbar tile.

    eta_w scales the frozen programming noise relative to max|target|;
    eta_out scales the per-call output noise relative to the per-column
    calibration reference. redraw_weight_noise redraws the weight noise on
    every call instead of freezing it at program time (sensitivity studies
    only). adc_headroom multiplies the calibrated per-column saturation
    bound; at the default 1.0 the ADC clamps exactly at the calibration
    maximum and the affine correction stays the identity.
    """

    rows: int = MAX_TILE_DIM
    cols: int = MAX_TILE_DIM
    clip_alpha: float = 2.0
    eta_w: float = 0.12
    eta_out: float = 0.1
    input_bits: int = 8
    adc_headroom: float = 1.0
    redraw_weight_noise: bool = False
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.rows <= MAX_TILE_DIM and 1 <= self.cols <= MAX_TILE_DIM):
            raise ValueError(f"tile geometry must lie in [1, {MAX_TILE_DIM}]")
        if self.clip_alpha <= 0:
            raise ValueError("clip_alpha must be positive")
        if self.eta_w < 0 or self.eta_out < 0:
            raise ValueError("noise magnitudes must be nonnegative")
        if self.input_bits != 8:
            raise ValueError("only INT8 input quantization is modeled")
        if self.adc_headroom <= 0:
            raise ValueError("adc_headroom must be positive")


@dataclass(frozen=True)
class ProgrammedTile:
    """An immutable programmed crossbar tile.

    target holds the clipped weights, effective the one-time programming-noise
    realization on top of them. Calibration fields stay None until calibrate()
    derives the INT8 input scale, the per-column output-noise reference, the
    ADC saturation bounds, and the affine correction.
    """

    target: np.ndarray
    effective: np.ndarray
    cfg: AnalogTileConfig
    input_scale: float | None = None
    out_ref: np.ndarray | None = None
    adc_clip: np.ndarray | None = None
    affine_scale: np.ndarray | None = None
    affine_offset: np.ndarray | None = None

    def __post_init__(self):
        for name in ("target", "effective", "out_ref", "adc_clip", "affine_scale", "affine_offset"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=np.float64)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def rows(self) -> int:
        return self.target.shape[0]

    @property
    def cols(self) -> int:
        return self.target.shape[1]

    @property
    def calibrated(self) -> bool:
        return self.input_scale is not None


def program(
    W: np.ndarray, cfg: AnalogTileConfig, rng: np.random.Generator | None = None
) -> ProgrammedTile:
    """Clip W to +/- clip_alpha * std(W) and freeze one programming-noise draw.

    The noise has standard deviation eta_w * max|target| per entry, drawn once
    here; it is never redrawn unless cfg.redraw_weight_noise is set.
    """
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    r, c = W.shape
    if r < 1 or c < 1 or r > cfg.rows or c > cfg.cols:
        raise ValueError(f"matrix {W.shape} does not fit a {cfg.rows}x{cfg.cols} tile")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    bound = cfg.clip_alpha * W.std()
    target = np.clip(W, -bound, bound)
    zeta = cfg.eta_w * np.abs(target).max() * rng.standard_normal(W.shape)
    return ProgrammedTile(target=target, effective=target + zeta, cfg=cfg)


def _fit_affine(clipped: np.ndarray, true: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Per-column least-squares (a, b) minimizing ||a * clipped + b - true||.
    mean_c = clipped.mean(axis=0)
    mean_t = true.mean(axis=0)
    var_c = ((clipped - mean_c) ** 2).sum(axis=0)
    cov = ((clipped - mean_c) * (true - mean_t)).sum(axis=0)
    safe = var_c > 1e-30
    a = np.where(safe, cov / np.where(safe, var_c, 1.0), 1.0)
    b = mean_t - a * mean_c
    return a, b


def calibrate(tile: ProgrammedTile, calibration_inputs: np.ndarray) -> ProgrammedTile:
    """Derive input scale, output-noise reference, and ADC bounds from a replay.

    The INT8 scale is max-abs over the calibration inputs divided by 127; the
    per-column ADC bound is the max-abs pre-noise output times the headroom
    factor, so the calibration stream itself never saturates at headroom 1.0.
    The output-noise reference is the per-column RMS of the pre-noise replay
    outputs: referencing eta_out to the column maximum instead would roughly
    triple the injected noise (the max of ~2000 roughly-Gaussian outputs sits
    near 3.5 sigma) and puts the end-to-end error outside its golden interval.
    """
    X = np.atleast_2d(np.asarray(calibration_inputs, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("empty calibration set")
    if X.shape[0] > MAX_CALIBRATION_ROWS:
        raise ValueError(f"calibration set exceeds {MAX_CALIBRATION_ROWS} rows")
    if X.shape[1] != tile.rows:
        raise ValueError(f"calibration rows must have dim {tile.rows}")
    max_abs = np.abs(X).max()
    if max_abs == 0.0:
        raise ValueError("degenerate input scale: all calibration inputs are zero")
    scale = max_abs / INT8_MAX
    Xq = quantize_codes(X, scale) * scale
    Y = Xq @ tile.effective
    out_ref = np.sqrt(np.mean(Y * Y, axis=0))
    adc_clip = np.abs(Y).max(axis=0) * tile.cfg.adc_headroom
    if tile.cfg.adc_headroom < 1.0:
        clipped = np.clip(Y, -adc_clip, adc_clip)
        affine_scale, affine_offset = _fit_affine(clipped, Y)
    else:
        affine_scale = np.ones(tile.cols)
        affine_offset = np.zeros(tile.cols)
    return dataclasses.replace(
        tile,
        input_scale=scale,
        out_ref=out_ref,
        adc_clip=adc_clip,
        affine_scale=affine_scale,
        affine_offset=affine_offset,
    )


def analog_matmat(
    tile: ProgrammedTile, X: np.ndarray, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Simulated MVM for each row of X through one calibrated tile.

    Pipeline: INT8 quantize/dequantize the inputs, multiply by the effective
    weights, add fresh per-column Gaussian output noise, clamp at the ADC
    bounds, and apply the per-column affine correction.
    """
    if not tile.calibrated:
        raise ValueError("tile must be calibrated before use")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != tile.rows:
        raise ValueError(f"expected inputs of dim {tile.rows}, got {X.shape[1]}")
    cfg = tile.cfg
    needs_rng = cfg.eta_out > 0 or cfg.redraw_weight_noise
    if needs_rng and rng is None:
        raise ValueError("an rng is required to draw per-call noise")
    Xq = quantize_codes(X, tile.input_scale) * tile.input_scale
    W = tile.effective
    if cfg.redraw_weight_noise:
        zeta = cfg.eta_w * np.abs(tile.target).max() * rng.standard_normal(W.shape)
        W = tile.target + zeta
    Y = Xq @ W
    if cfg.eta_out > 0:
        Y = Y + (cfg.eta_out * tile.out_ref) * rng.standard_normal(Y.shape)
    Y = np.clip(Y, -tile.adc_clip, tile.adc_clip)
    return Y * tile.affine_scale + tile.affine_offset


def analog_matvec(
    tile: ProgrammedTile, x, rng: np.random.Generator | None = None
) -> np.ndarray:
    return analog_matmat(tile, np.asarray(x, dtype=np.float64)[None, :], rng=rng)[0]


def _chunks(total: int, size: int) -> list[slice]:
    return [slice(i, min(i + size, total)) for i in range(0, total, size)]


class AnalogBackend(MvmBackend):
    """A d x D matrix spread over a grid of programmed tiles.

    Row-adjacent tiles share input slices and their partial sums accumulate
    digitally in float64; column chunks concatenate. Trailing tiles keep
    their natural (smaller) geometry, which is equivalent to zero-padding a
    full tile: absent cells hold weight zero and contribute nothing. Each
    tile is programmed with an independent child seed of cfg.seed and
    calibrated with its slice of the calibration inputs.
    """

    def __init__(
        self,
        weights: np.ndarray,
        cfg: AnalogTileConfig,
        calibration_inputs: np.ndarray,
    ):
        W = np.atleast_2d(np.asarray(weights, dtype=np.float64))
        self.cfg = cfg
        self.in_dim, self.out_dim = W.shape
        self._row_slices = _chunks(self.in_dim, cfg.rows)
        self._col_slices = _chunks(self.out_dim, cfg.cols)
        cal = np.atleast_2d(np.asarray(calibration_inputs, dtype=np.float64))
        if cal.shape[1] != self.in_dim:
            raise ValueError(f"calibration rows must have dim {self.in_dim}")
        seeds = np.random.SeedSequence(cfg.seed).spawn(
            len(self._row_slices) * len(self._col_slices)
        )
        self.tiles: list[list[ProgrammedTile]] = []
        k = 0
        for rs in self._row_slices:
            row = []
            for cs in self._col_slices:
                tile = program(W[rs, cs], cfg, rng=np.random.default_rng(seeds[k]))
                row.append(calibrate(tile, cal[:, rs]))
                k += 1
            self.tiles.append(row)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return len(self._row_slices), len(self._col_slices)

    def matmat(self, X, rng=None):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.in_dim:
            raise ValueError(f"expected inputs of dim {self.in_dim}, got {X.shape[1]}")
        parts = []
        for j, _cs in enumerate(self._col_slices):
            acc = np.zeros((X.shape[0], self.tiles[0][j].cols))
            for i, rs in enumerate(self._row_slices):
                acc += analog_matmat(self.tiles[i][j], X[:, rs], rng=rng)
            parts.append(acc)
        return np.concatenate(parts, axis=1)


_HEADER_FIELDS = ("rows", "cols", "clip_alpha", "eta_w", "eta_out", "seed")


def dump_tile(tile: ProgrammedTile, path) -> None:
    """Debug dump: text header + LE float64 blocks (target, effective, affine, clips)."""
    cfg = tile.cfg
    header = f"{tile.rows} {tile.cols} {cfg.clip_alpha} {cfg.eta_w} {cfg.eta_out} {cfg.seed}\n"
    nan = np.full(tile.cols, np.nan)
    blocks = [
        tile.target,
        tile.effective,
        tile.affine_scale if tile.calibrated else nan,
        tile.affine_offset if tile.calibrated else nan,
        tile.adc_clip if tile.calibrated else nan,
        tile.out_ref if tile.calibrated else nan,
        np.array([tile.input_scale if tile.calibrated else np.nan]),
    ]
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for block in blocks:
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_tile(path) -> ProgrammedTile:
    """Inverse of dump_tile. Non-header config fields revert to defaults."""
    with open(path, "rb") as fh:
        parts = fh.readline().decode("ascii").split()
        if len(parts) != len(_HEADER_FIELDS):
            raise ValueError("malformed tile header")
        rows, cols = int(parts[0]), int(parts[1])
        cfg = AnalogTileConfig(
            rows=max(rows, 1),
            cols=max(cols, 1),
            clip_alpha=float(parts[2]),
            eta_w=float(parts[3]),
            eta_out=float(parts[4]),
            seed=int(parts[5]),
        )
        data = np.frombuffer(fh.read(), dtype="<f8")
    expected = 2 * rows * cols + 4 * cols + 1
    if data.size != expected:
        raise ValueError("tile payload size does not match header")
    target = data[: rows * cols].reshape(rows, cols)
    effective = data[rows * cols : 2 * rows * cols].reshape(rows, cols)
    rest = data[2 * rows * cols :]
    affine_scale, affine_offset, adc_clip, out_ref = (
        rest[i * cols : (i + 1) * cols] for i in range(4)
    )
    input_scale = float(rest[4 * cols])
    if np.isnan(input_scale):
        return ProgrammedTile(target=target.copy(), effective=effective.copy(), cfg=cfg)
    return ProgrammedTile(
        target=target.copy(),
        effective=effective.copy(),
        cfg=cfg,
        input_scale=input_scale,
        out_ref=out_ref.copy(),
        adc_clip=adc_clip.copy(),
        affine_scale=affine_scale.copy(),
        affine_offset=affine_offset.copy(),
    )
