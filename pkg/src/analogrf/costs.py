"""Inference FLOP accounting and the mapping latency/energy cost model.

One multiply-accumulate counts as two operations, so mapping an L x d batch
onto m features costs 2*L*d*m operations; latency is ops/throughput and
energy is latency*power. Hardware profiles are data, not code: the bundled
defaults can be overridden or extended from a plain-text profile file.

The analog accelerator profile carries power = 63.1/9.76 W (throughput over
energy efficiency, about 6.5 W) so that latency and energy stay mutually
consistent with both published ratings.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

__all__ = [
    "HardwareProfile",
    "FlopMethod",
    "FlopReport",
    "DEFAULT_PROFILES",
    "inference_flops",
    "mapping_cost",
    "parse_profiles",
    "load_profiles",
]

TERA = 1e12


@dataclass(frozen=True)
class HardwareProfile:
    """A compute device reduced to peak throughput and power."""

    name: str
    tops: float
    watts: float

    def __post_init__(self):
        if self.tops <= 0 or self.watts <= 0:
            raise ValueError("throughput and power must be positive")


DEFAULT_PROFILES = {
    p.name: p
    for p in (
        HardwareProfile("aimc", 63.1, 63.1 / 9.76),
        HardwareProfile("gpu_int8", 624.0, 400.0),
        HardwareProfile("gpu_fp16", 312.0, 400.0),
        HardwareProfile("cpu", 1.2288, 253.0),
    )
}


class FlopMethod(str, Enum):
    HIGH_DIM_MAPPING = "high_dim_mapping"
    EXACT_KERNEL = "exact_kernel"
    KERNEL_APPROX = "kernel_approx"
    AIMC_DEPLOY = "aimc_deploy"


@dataclass(frozen=True)
class FlopReport:
    method: FlopMethod
    digital_flops: int
    analog_flops: int = 0

    def __post_init__(self):
        if self.digital_flops < 0 or self.analog_flops < 0:
            raise ValueError("operation counts must be nonnegative")


def _require_positive(**params):
    for key, value in params.items():
        if value is None or value < 1:
            raise ValueError(f"parameter {key} must be a positive integer")


def inference_flops(
    method: FlopMethod,
    N: int | None = None,
    H: int | None = None,
    d: int | None = None,
    m: int | None = None,
    D: int | None = None,
) -> FlopReport:
    """Per-sample inference cost of the four ways to work in a feature space.

    high_dim_mapping: 4*H*d + 2*H     (explicit map into an H-dim space)
    exact_kernel:     2*d*N           (kernel against every training sample)
    kernel_approx:    4*m*d + 2*D     (random-feature map plus readout)
    aimc_deploy:      2*D digital; the 4*m*d mapping moves into analog memory
    """
    method = FlopMethod(method)
    if method is FlopMethod.HIGH_DIM_MAPPING:
        _require_positive(H=H, d=d)
        return FlopReport(method, 4 * H * d + 2 * H)
    if method is FlopMethod.EXACT_KERNEL:
        _require_positive(d=d, N=N)
        return FlopReport(method, 2 * d * N)
    if method is FlopMethod.KERNEL_APPROX:
        _require_positive(m=m, d=d, D=D)
        return FlopReport(method, 4 * m * d + 2 * D)
    if method is FlopMethod.AIMC_DEPLOY:
        _require_positive(m=m, d=d, D=D)
        return FlopReport(method, 2 * D, analog_flops=4 * m * d)
    raise ValueError(f"unknown method: {method!r}")


def mapping_cost(L: int, d: int, m: int, profile: HardwareProfile) -> tuple[float, float]:
    """(latency seconds, energy joules) of mapping L inputs from d to m dims."""
    _require_positive(L=L, d=d, m=m)
    ops = 2.0 * L * d * m
    latency = ops / (profile.tops * TERA)
    return latency, latency * profile.watts


def parse_profiles(text: str) -> dict[str, HardwareProfile]:
    """Parse `name throughput_tops power_watts` lines; '#' starts a comment."""
    profiles: dict[str, HardwareProfile] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"profile line {lineno}: expected `name tops watts`")
        profiles[parts[0]] = HardwareProfile(parts[0], float(parts[1]), float(parts[2]))
    return profiles


def load_profiles(path=None) -> dict[str, HardwareProfile]:
    """Default profiles, optionally overridden/extended from a profile file."""
    profiles = dict(DEFAULT_PROFILES)
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            profiles.update(parse_profiles(fh.read()))
    return profiles
