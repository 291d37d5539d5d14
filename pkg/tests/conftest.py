import numpy as np

from diffcache import rng


def latent(shape, seed=0, index=0):
    """Seeded standard-normal test tensor."""
    return rng.gaussian(shape, seed, rng.TEST_DATA, index)


def naive_dft2(x):
    """Brute-force 2-D DFT over the last two axes, float64 arithmetic."""
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[-2], x.shape[-1]
    out = np.zeros(x.shape, dtype=np.complex128)
    ys = np.arange(h)
    xs = np.arange(w)
    for u in range(h):
        for v in range(w):
            phase = np.exp(-2j * np.pi * (u * ys[:, None] / h + v * xs[None, :] / w))
            out[..., u, v] = np.sum(x * phase, axis=(-2, -1))
    return out
