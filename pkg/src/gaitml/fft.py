"""Iterative radix-2 decimation-in-time FFT, vectorised over leading axes."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from gaitml.errors import GaitError


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(0, (int(n) - 1).bit_length())


@lru_cache(maxsize=None)
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=None)
def _twiddles(m: int) -> np.ndarray:
    tw = np.exp(-2j * np.pi * np.arange(m) / (2 * m))
    tw.setflags(write=False)
    return tw


def fft(x: np.ndarray) -> np.ndarray:
    """Complex DFT along the last axis. Length must be a power of two."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise GaitError(f"FFT length must be a power of two, got {n}")
    lead = x.shape[:-1]
    x = x[..., _bit_reverse(n)]
    m = 1
    while m < n:
        x = x.reshape(*lead, n // (2 * m), 2, m)
        even = x[..., 0, :]
        odd = x[..., 1, :] * _twiddles(m)
        x = np.concatenate([even + odd, even - odd], axis=-1)
        m *= 2
    return x.reshape(*lead, n)


def rfft(x: np.ndarray, n: int | None = None) -> np.ndarray:
    """One-sided spectrum (bins 0..n/2) of real input, zero-padded to ``n``."""
    x = np.asarray(x, dtype=np.float64)
    if n is None:
        n = x.shape[-1]
    if x.shape[-1] > n:
        raise GaitError(f"input length {x.shape[-1]} exceeds FFT length {n}")
    if x.shape[-1] < n:
        pad = [(0, 0)] * (x.ndim - 1) + [(0, n - x.shape[-1])]
        x = np.pad(x, pad)
    return fft(x)[..., : n // 2 + 1]
