"""CFG-Cache: frequency-split bias recording and unconditional reconstruction.

At a refresh step both branches run fully and the low/high-frequency parts of
(uncond - cond) are cached in the spectral domain. At reuse steps only the
conditional branch runs; the unconditional output is rebuilt from it plus the
cached biases, each scaled by a timestep-adaptive enhancement weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import make_masks, merge_frequency, split_frequency


@dataclass(frozen=True)
class CfgBiasCache:
    delta_lf: np.ndarray  # center-shifted, nonzero only inside the low mask
    delta_hf: np.ndarray
    recorded_step: int
    recorded_t: int
    cutoff: float


def record_bias(
    eps_c: np.ndarray,
    eps_u: np.ndarray,
    cutoff: float,
    step: int = -1,
    t: int = -1,
) -> CfgBiasCache:
    if eps_c.shape != eps_u.shape:
        raise ValueError(f"shape mismatch: {eps_c.shape} vs {eps_u.shape}")
    u_low, u_high = split_frequency(eps_u, cutoff)
    c_low, c_high = split_frequency(eps_c, cutoff)
    return CfgBiasCache(u_low - c_low, u_high - c_high, step, t, cutoff)


def enhancement_weights(t: int, t0: int, alpha1: float, alpha2: float) -> tuple[float, float]:
    """w1 = 1 + a1 * [t > t0] (mid phase, low-frequency emphasis);
    w2 = 1 + a2 * [t <= t0] (late phase, high-frequency emphasis)."""
    w1 = 1.0 + alpha1 * (1.0 if t > t0 else 0.0)
    w2 = 1.0 + alpha2 * (1.0 if t <= t0 else 0.0)
    return w1, w2


def reconstruct_uncond(
    eps_c: np.ndarray,
    bias: CfgBiasCache,
    w1: float = 1.0,
    w2: float = 1.0,
    cutoff: float | None = None,
) -> np.ndarray:
    if cutoff is not None and cutoff != bias.cutoff:
        raise ValueError(f"cutoff mismatch: bias recorded at {bias.cutoff}, call uses {cutoff}")
    if eps_c.shape != bias.delta_lf.shape:
        raise ValueError(f"shape mismatch: {eps_c.shape} vs {bias.delta_lf.shape}")
    c_low, c_high = split_frequency(eps_c, bias.cutoff)
    f_low = bias.delta_lf * np.float32(w1) + c_low
    f_high = bias.delta_hf * np.float32(w2) + c_high
    return merge_frequency(f_low, f_high)


def baseline_cond_copy(eps_c: np.ndarray) -> np.ndarray:
    """Naive same-step baseline: reuse the conditional output unchanged."""
    return eps_c


def baseline_stale_uncond(trace, s: int) -> np.ndarray:
    """Most recent fully computed unconditional output before step s."""
    for record in reversed(trace[:s]):
        if record.uncond_full:
            return record.eps_uncond
    raise ValueError(f"no fully computed unconditional output before step {s}")


def bias_frequency_trend(trace, cutoff: float) -> list[tuple[int, float, float]]:
    """Per step with both true branch outputs: bias spectrum energy inside
    the low and high masks."""
    rows = []
    for record in trace:
        if not record.uncond_full:
            continue
        low, high = split_frequency(record.eps_uncond - record.eps_cond, cutoff)
        rows.append((
            record.t,
            float(np.sum(np.abs(low.astype(np.complex128)) ** 2)),
            float(np.sum(np.abs(high.astype(np.complex128)) ** 2)),
        ))
    if not rows:
        raise ValueError("trace lacks fully computed unconditional outputs")
    return rows


def low_high_masks(shape: tuple[int, int], cutoff: float):
    return make_masks(shape[0], shape[1], cutoff)
