"""Real-input DFT with an O(L log L) production path and an O(L^2) oracle.

Conventions, fixed across the package:

* forward:   X[k] = sum_n x[n] * exp(-2j*pi*k*n/L) for k = 0 .. floor(L/2)
* inverse:   x[n] = (1/L) * sum_k Xext[k] * exp(+2j*pi*k*n/L), where Xext is
  the Hermitian extension of the retained bins back to length L
* amplitude: hypot(Re, Im)

Only the K = floor(L/2) + 1 non-redundant bins are kept for real input; the
self-conjugate bins (0, and K-1 for even L) carry an exactly zero imaginary
part.  The fast path uses iterative radix-2 Cooley-Tukey for power-of-two
lengths and Bluestein's chirp-z algorithm otherwise; both are vectorised over
leading axes and must agree with ``dft_direct`` to 1e-9 (enforced in tests).
"""

from __future__ import annotations

import numpy as np

_BITREV: dict[int, np.ndarray] = {}
_TWIDDLE: dict[int, list[np.ndarray]] = {}
_CHIRP: dict[int, tuple[np.ndarray, np.ndarray, int]] = {}


def n_bins(length: int) -> int:
    """Number of retained spectrum bins for a real signal of this length."""
    if length < 1:
        raise ValueError("length must be positive")
    return length // 2 + 1


def hermitian_multiplicity(length: int) -> np.ndarray:
    """Per-bin multiplicity in the Hermitian extension (1 for self-conjugate bins, else 2)."""
    m = np.full(n_bins(length), 2.0)
    m[0] = 1.0
    if length % 2 == 0:
        m[-1] = 1.0
    return m


def _bitrev_indices(n: int) -> np.ndarray:
    idx = _BITREV.get(n)
    if idx is None:
        idx = np.array([0], dtype=np.intp)
        while idx.size < n:
            idx = np.concatenate([2 * idx, 2 * idx + 1])
        _BITREV[n] = idx
    return idx


def _stage_twiddles(n: int) -> list[np.ndarray]:
    tw = _TWIDDLE.get(n)
    if tw is None:
        tw = []
        half = 1
        while half < n:
            tw.append(np.exp((-1j * np.pi / half) * np.arange(half)))
            half *= 2
        _TWIDDLE[n] = tw
    return tw


def _fft_pow2(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    out = np.ascontiguousarray(a[..., _bitrev_indices(n)])
    lead = out.shape[:-1]
    for w in _stage_twiddles(n):
        half = w.shape[0]
        blocks = out.reshape(lead + (n // (2 * half), 2, half))
        even = blocks[..., 0, :]
        odd = blocks[..., 1, :] * w
        out = np.concatenate((even + odd, even - odd), axis=-1).reshape(lead + (n,))
    return out


def _ifft_pow2(a: np.ndarray) -> np.ndarray:
    return np.conj(_fft_pow2(np.conj(a))) / a.shape[-1]


def _chirp(n: int) -> tuple[np.ndarray, np.ndarray, int]:
    c = _CHIRP.get(n)
    if c is None:
        k = np.arange(n)
        # k*k mod 2n keeps the chirp argument small; exp(i*pi*k^2/n) has period 2n in k^2
        b = np.exp((1j * np.pi / n) * (k * k % (2 * n)))
        m = 1
        while m < 2 * n - 1:
            m *= 2
        kernel = np.zeros(m, dtype=np.complex128)
        kernel[:n] = b
        kernel[m - n + 1 :] = b[1:][::-1]
        c = (b, _fft_pow2(kernel), m)
        _CHIRP[n] = c
    return c


def _fft_bluestein(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    b, kernel_f, m = _chirp(n)
    buf = np.zeros(a.shape[:-1] + (m,), dtype=np.complex128)
    buf[..., :n] = a * np.conj(b)
    conv = _ifft_pow2(_fft_pow2(buf) * kernel_f)
    return np.conj(b) * conv[..., :n]


def fft_complex(a: np.ndarray) -> np.ndarray:
    """Unnormalized DFT along the last axis, any length."""
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[-1]
    if n < 1:
        raise ValueError("empty transform")
    if n == 1:
        return a.copy()
    if n & (n - 1) == 0:
        return _fft_pow2(a)
    return _fft_bluestein(a)


def ifft_complex(a: np.ndarray) -> np.ndarray:
    """Inverse of ``fft_complex`` (carries the 1/n factor)."""
    a = np.asarray(a, dtype=np.complex128)
    return np.conj(fft_complex(np.conj(a))) / a.shape[-1]


def _zero_self_conjugate_imag(spec: np.ndarray, length: int) -> None:
    spec[..., 0] = spec[..., 0].real
    if length % 2 == 0:
        spec[..., -1] = spec[..., -1].real


def dft_forward(x: np.ndarray, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Forward transform of a real series; returns (real, imag) over K bins.

    Parameters
    ----------
    x : real array; the transform runs along `axis`.
    axis : time axis (default 0, so (L,) and (L, C) work unchanged).

    Returns
    -------
    (real, imag) arrays with K = floor(L/2) + 1 bins along `axis`.
    """
    x = np.asarray(x, dtype=float)
    length = x.shape[axis]
    moved = np.moveaxis(x, axis, -1)
    spec = fft_complex(moved)[..., : n_bins(length)]
    _zero_self_conjugate_imag(spec, length)
    real = np.ascontiguousarray(np.moveaxis(spec.real, -1, axis))
    imag = np.ascontiguousarray(np.moveaxis(spec.imag, -1, axis))
    return real, imag


def dft_inverse(real: np.ndarray, imag: np.ndarray, length: int, axis: int = 0) -> np.ndarray:
    """Inverse transform from K retained bins back to a real series of `length`.

    The spectrum is Hermitian-extended before inversion; imaginary parts of
    the self-conjugate bins are ignored.
    """
    r = np.moveaxis(np.asarray(real, dtype=float), axis, -1)
    i = np.moveaxis(np.asarray(imag, dtype=float), axis, -1)
    k = n_bins(length)
    if r.shape != i.shape or r.shape[-1] != k:
        raise ValueError(f"expected {k} bins for length {length}, got shapes {r.shape} and {i.shape}")
    z = r + 1j * i
    _zero_self_conjugate_imag(z, length)
    full = np.zeros(r.shape[:-1] + (length,), dtype=np.complex128)
    full[..., :k] = z
    mirror = np.arange(1, (length + 1) // 2)
    if mirror.size:
        full[..., length - mirror] = np.conj(z[..., mirror])
    x = ifft_complex(full).real
    return np.ascontiguousarray(np.moveaxis(x, -1, axis))


def dft_forward_adjoint(g_real: np.ndarray, g_imag: np.ndarray, length: int, axis: int = 0) -> np.ndarray:
    """Adjoint of ``dft_forward`` as a linear map R^L -> R^(2K).

    Needed for gradient propagation through the forward transform:
    out[n] = sum_k (g_real[k] * cos(2 pi k n / L) - g_imag[k] * sin(2 pi k n / L)).
    Imaginary-part cotangents at the self-conjugate bins are ignored, matching
    the zeroing done in the forward pass.
    """
    gr = np.moveaxis(np.asarray(g_real, dtype=float), axis, -1)
    gi = np.moveaxis(np.asarray(g_imag, dtype=float), axis, -1)
    k = n_bins(length)
    if gr.shape != gi.shape or gr.shape[-1] != k:
        raise ValueError("cotangent shape does not match bin count")
    z = gr + 1j * gi
    _zero_self_conjugate_imag(z, length)
    full = np.zeros(gr.shape[:-1] + (length,), dtype=np.complex128)
    full[..., :k] = z
    out = (length * ifft_complex(full)).real
    return np.ascontiguousarray(np.moveaxis(out, -1, axis))


def dft_direct(x: np.ndarray, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Direct O(L^2) forward transform; the verification oracle for the fast path."""
    x = np.asarray(x, dtype=float)
    length = x.shape[axis]
    n = np.arange(length)
    k = np.arange(n_bins(length))
    basis = np.exp((-2j * np.pi / length) * np.outer(k, n))
    moved = np.moveaxis(x, axis, -1)
    spec = moved @ basis.T
    _zero_self_conjugate_imag(spec, length)
    real = np.ascontiguousarray(np.moveaxis(spec.real, -1, axis))
    imag = np.ascontiguousarray(np.moveaxis(spec.imag, -1, axis))
    return real, imag


def amplitude(real: np.ndarray, imag: np.ndarray) -> np.ndarray:
    return np.hypot(real, imag)


def window_taps(kind: str, length: int) -> np.ndarray:
    """Taps for a named analysis window ("rectangular" or "hann", symmetric)."""
    if length < 1:
        raise ValueError("length must be positive")
    if kind == "rectangular":
        return np.ones(length)
    if kind == "hann":
        if length == 1:
            return np.ones(1)
        n = np.arange(length)
        return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (length - 1)))
    raise ValueError(f"unknown window kind: {kind!r}")


def apply_window(x: np.ndarray, taps: np.ndarray, axis: int = 0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    taps = np.asarray(taps, dtype=float)
    if taps.ndim != 1 or taps.shape[0] != x.shape[axis]:
        raise ValueError("taps length must match the time axis")
    shape = [1] * x.ndim
    shape[axis] = taps.shape[0]
    return x * taps.reshape(shape)


def truncate_bins(real: np.ndarray, imag: np.ndarray, keep: int, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Zero every bin at index >= keep; keep must satisfy 1 <= keep <= K."""
    real = np.asarray(real, dtype=float)
    imag = np.asarray(imag, dtype=float)
    k = real.shape[axis]
    if not 1 <= keep <= k:
        raise ValueError(f"keep must be in [1, {k}], got {keep}")
    r = np.moveaxis(real.copy(), axis, -1)
    i = np.moveaxis(imag.copy(), axis, -1)
    r[..., keep:] = 0.0
    i[..., keep:] = 0.0
    return np.moveaxis(r, -1, axis), np.moveaxis(i, -1, axis)
