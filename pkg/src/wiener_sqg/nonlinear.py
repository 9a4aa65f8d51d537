"""Quadratic SQG nonlinearity in Fourier space.

Products of two radius-N fields live exactly on the radius-2N band. Three
evaluations of c_k = sum_{m+n=k} a_m b_n are provided:

- ``direct``: the literal double loop, kept as the reference;
- ``summed``: the same sums arranged as row-Toeplitz matrix products;
- ``fast``: a zero-padded transform on a grid of at least 4N+1 points per
  side, wide enough that the circular convolution never wraps.

Summation gives every output coefficient an error relative to its own terms,
sum_{m+n=k} |a_m||b_n|. The transform spreads round-off of size
eps * max|c| over all modes, which swamps the e^{-t|k|} tail of a smooth
solution and is then blown up by exponential weights. The solver therefore
uses ``summed``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .spectral import (
    SpectralField,
    VectorField,
    lattice,
    multiplier_apply,
    symmetrize,
)

METHODS = ("direct", "summed", "fast")
DEFAULT_METHOD = "summed"

# the divergence kills the mean; anything larger than this means a broken symbol
MEAN_TOL = 1e-14


@dataclass(frozen=True)
class ConvolutionPlan:
    N: int
    M: int
    method: str = "fast"
    grid: int | None = None

    def __post_init__(self):
        if self.M < 2 * self.N:
            raise ValueError(f"working radius M={self.M} cannot hold the product band 2N={2 * self.N}")
        if self.method not in METHODS:
            raise ValueError(f"unknown convolution method {self.method!r}")
        if self.grid is not None and self.grid < 2 * self.M + 1:
            raise ValueError(f"padded grid {self.grid} < {2 * self.M + 1} would alias")

    @classmethod
    def for_radius(cls, N, method="fast", grid=None):
        return cls(N=N, M=2 * N, method=method, grid=grid)

    @property
    def grid_size(self) -> int:
        return self.grid if self.grid is not None else sfft.next_fast_len(2 * self.M + 1)


def riesz_velocity(theta: SpectralField) -> VectorField:
    """u = R^perp theta = (-R2 theta, R1 theta), symbols (i k2/|k|, -i k1/|k|)."""
    K1, K2, Kabs = lattice(theta.N)
    with np.errstate(divide="ignore", invalid="ignore"):
        m1 = 1j * K2 / Kabs
        m2 = -1j * K1 / Kabs
    return VectorField(multiplier_apply(theta, m1), multiplier_apply(theta, m2))


def _check_pair(f, g):
    if f.N != g.N:
        raise ValueError(f"convolution operands need the same radius, got {f.N} and {g.N}")


def convolve_direct(f: SpectralField, g: SpectralField) -> SpectralField:
    """Brute-force discrete convolution onto the radius-2N band (zero mode kept)."""
    _check_pair(f, g)
    N = f.N
    a, b = f.coeffs, g.coeffs
    out = np.zeros((4 * N + 1, 4 * N + 1), dtype=np.complex128)
    # out index of k = m + n is (m1+N) + (n1+N); fixed loop order keeps sums reproducible
    for i in range(2 * N + 1):
        for j in range(2 * N + 1):
            am = a[i, j]
            if am != 0:
                out[i:i + 2 * N + 1, j:j + 2 * N + 1] += am * b
    return SpectralField(2 * N, out, mean_free=False)


def _toeplitz_rows(a: np.ndarray) -> np.ndarray:
    """T[i, s, q] = a[i, q - s] (zero outside the band), so (b @ T[i])[r, q] = sum_j a[i, j] b[r, q - j]."""
    n = a.shape[-1]
    D = np.arange(2 * n - 1)[None, :] - np.arange(n)[:, None]
    valid = (D >= 0) & (D < n)
    return np.where(valid[None], a[:, np.clip(D, 0, n - 1)], 0.0)


def _summed(a: np.ndarray, bs: np.ndarray) -> np.ndarray:
    """Direct convolution of ``a`` with each array in the stack ``bs``."""
    m, n = bs.shape[0], a.shape[-1]
    T = _toeplitz_rows(a).transpose(1, 0, 2).reshape(n, -1)   # (s, i*q)
    Y = (bs.reshape(m * n, n) @ T).reshape(m, n, n, 2 * n - 1)  # (m, r, i, q)
    out = np.zeros((m, 2 * n - 1, 2 * n - 1), dtype=np.complex128)
    for i in range(n):
        out[:, i:i + n, :] += Y[:, :, i]
    return out


def convolve_summed(f: SpectralField, g: SpectralField) -> SpectralField:
    """Same sums as :func:`convolve_direct`, grouped into matrix products."""
    _check_pair(f, g)
    out = _summed(f.coeffs, g.coeffs[None])[0]
    return SpectralField(2 * f.N, symmetrize(out), mean_free=False)


def _wrap_index(M: int, P: int) -> np.ndarray:
    return np.arange(-M, M + 1) % P


def to_grid(arr: np.ndarray, N: int, P: int) -> np.ndarray:
    """Physical values theta(2 pi j / P) of a radius-N coefficient array."""
    padded = np.zeros((P, P), dtype=np.complex128)
    idx = _wrap_index(N, P)
    padded[np.ix_(idx, idx)] = arr
    return (sfft.ifft2(padded, workers=1) * (P * P)).real


def from_grid(values: np.ndarray, M: int) -> np.ndarray:
    """Radius-M coefficient array of real grid values (exact if band-limited to M)."""
    P = values.shape[0]
    full = sfft.fft2(values, workers=1) / (P * P)
    idx = _wrap_index(M, P)
    return symmetrize(full[np.ix_(idx, idx)])


def convolve_fast(f: SpectralField, g: SpectralField, grid: int | None = None) -> SpectralField:
    """Same result as :func:`convolve_direct`, via a zero-padded transform."""
    _check_pair(f, g)
    plan = ConvolutionPlan.for_radius(f.N, "fast", grid)
    P, M = plan.grid_size, plan.M
    prod = to_grid(f.coeffs, f.N, P) * to_grid(g.coeffs, g.N, P)
    return SpectralField(M, from_grid(prod, M), mean_free=False)


def convolve(f, g, method=DEFAULT_METHOD):
    if method == "direct":
        return convolve_direct(f, g)
    if method == "summed":
        return convolve_summed(f, g)
    if method == "fast":
        return convolve_fast(f, g)
    raise ValueError(f"unknown convolution method {method!r}")


def divergence(p1: SpectralField, p2: SpectralField) -> SpectralField:
    """i k1 p1 + i k2 p2; the result has an exactly vanishing zero mode."""
    K1, K2, _ = lattice(p1.N)
    arr = 1j * K1 * p1.coeffs + 1j * K2 * p2.coeffs
    c0 = arr[p1.N, p1.N]
    assert abs(c0) <= MEAN_TOL, f"divergence has mean {c0}"
    arr[p1.N, p1.N] = 0.0
    return SpectralField(p1.N, arr)


def transport_full(theta: SpectralField, method: str = DEFAULT_METHOD) -> SpectralField:
    """div(theta u_theta) on the radius-2N band, before Galerkin truncation."""
    u = riesz_velocity(theta)
    if method == "direct":
        return divergence(convolve_direct(theta, u.u1), convolve_direct(theta, u.u2))
    if method == "summed":
        p = symmetrize(_summed(theta.coeffs, np.stack([u.u1.coeffs, u.u2.coeffs])))
        M = 2 * theta.N
        return divergence(SpectralField(M, p[0], mean_free=False), SpectralField(M, p[1], mean_free=False))
    if method != "fast":
        raise ValueError(f"unknown convolution method {method!r}")
    N = theta.N
    M = 2 * N
    P = sfft.next_fast_len(2 * M + 1)
    th = to_grid(theta.coeffs, N, P)
    p1 = from_grid(th * to_grid(u.u1.coeffs, N, P), M)
    p2 = from_grid(th * to_grid(u.u2.coeffs, N, P), M)
    return divergence(SpectralField(M, p1, mean_free=False), SpectralField(M, p2, mean_free=False))


def truncate(f: SpectralField, N: int) -> SpectralField:
    """Galerkin projection onto |k|_inf <= N with the zero mode removed."""
    M = f.N
    if N > M:
        raise ValueError(f"cannot truncate radius {M} to larger radius {N}")
    lo, hi = M - N, M + N + 1
    arr = np.array(f.coeffs[lo:hi, lo:hi])
    arr[N, N] = 0.0
    return SpectralField(N, arr)


def pad(f: SpectralField, M: int) -> SpectralField:
    """Embed a radius-N field in the larger radius-M band."""
    N = f.N
    if M < N:
        raise ValueError(f"cannot pad radius {N} down to {M}")
    arr = np.zeros((2 * M + 1, 2 * M + 1), dtype=np.complex128)
    arr[M - N:M + N + 1, M - N:M + N + 1] = f.coeffs
    return SpectralField(M, arr, f.mean_free)


def transport_term(theta: SpectralField, method: str = DEFAULT_METHOD) -> SpectralField:
    """Galerkin-truncated u_theta . grad theta = div(theta u_theta) on radius N."""
    return truncate(transport_full(theta, method), theta.N)


def transport_with_loss(theta: SpectralField, method: str = DEFAULT_METHOD):
    """Truncated transport term and the X^0 mass dropped by the truncation."""
    full = transport_full(theta, method)
    kept = truncate(full, theta.N)
    N, M = theta.N, full.N
    K1, K2, _ = lattice(M)
    outside = np.maximum(np.abs(K1), np.abs(K2)) > N
    return kept, float(np.sum(np.abs(full.coeffs[outside])))
