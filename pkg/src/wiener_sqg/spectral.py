"""Band-limited real fields on the 2-torus [0, 2pi]^2 stored by Fourier coefficients.

A field theta(x) = sum_k a_k exp(i k.x) is held as a dense (2N+1, 2N+1) complex
array indexed ``[k1 + N, k2 + N]`` for |k|_inf <= N. Coefficients are series
coefficients (not the integral transform, which carries an extra (2 pi)^2).
Reality of theta means a_{-k} = conj(a_k); mean-zero means a_0 = 0.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

import numpy as np

from .errors import (
    NegativeTime,
    OutOfBand,
    OverflowGuard,
    SymmetryBreaking,
    SymmetryConflict,
    ZeroModeSupplied,
)

# relative tolerance for Hermitian-symmetry validation
HERMITIAN_RTOL = 1e-12
# largest admissible exponent in a growing multiplier
EXP_GUARD = 700.0

Symbol = Union[Callable[[np.ndarray, np.ndarray], np.ndarray], np.ndarray]


@functools.lru_cache(maxsize=64)
def lattice(N: int):
    """Return read-only (K1, K2, |K|) integer-lattice grids for radius ``N``."""
    k = np.arange(-N, N + 1, dtype=float)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    Kabs = np.hypot(K1, K2)
    for a in (K1, K2, Kabs):
        a.setflags(write=False)
    return K1, K2, Kabs


@functools.lru_cache(maxsize=256)
def _weights(N: int, sigma: float) -> np.ndarray:
    Kabs = lattice(N)[2]
    w = np.zeros_like(Kabs)
    nz = Kabs > 0
    w[nz] = Kabs[nz] ** sigma
    w.setflags(write=False)
    return w


def mirror(arr: np.ndarray) -> np.ndarray:
    """Coefficient array of x -> theta(-x) conjugated, i.e. a_k -> conj(a_{-k})."""
    return np.conj(arr[..., ::-1, ::-1])


def hermitian_defect(arr: np.ndarray) -> float:
    scale = float(np.max(np.abs(arr), initial=0.0))
    if scale == 0.0:
        return 0.0
    # non-finite entries give nan here; the solver reports them itself
    with np.errstate(invalid="ignore"):
        return float(np.max(np.abs(arr - mirror(arr)))) / scale


def symmetrize(arr: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto Hermitian arrays; the result is bitwise symmetric."""
    return 0.5 * (arr + mirror(arr))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real band-limited scalar field on the torus.

    ``mean_free=False`` is reserved for raw products on the doubled band, whose
    zero mode is kept until an explicit :func:`truncate`.
    """

    N: int
    coeffs: np.ndarray = field(repr=False)
    mean_free: bool = True

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"truncation radius must be a positive integer, got {self.N!r}")
        arr = np.array(self.coeffs, dtype=np.complex128)
        n = 2 * self.N + 1
        if arr.shape != (n, n):
            raise ValueError(f"coefficient array must have shape {(n, n)}, got {arr.shape}")
        if self.mean_free and arr[self.N, self.N] != 0:
            raise ZeroModeSupplied("mean-free field has a nonzero (0,0) coefficient")
        if hermitian_defect(arr) > HERMITIAN_RTOL:
            raise SymmetryBreaking("coefficients are not Hermitian (field is not real)")
        arr.setflags(write=False)
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def zeros(cls, N: int) -> "SpectralField":
        return cls(N, np.zeros((2 * N + 1, 2 * N + 1), dtype=np.complex128))

    def __getitem__(self, k) -> complex:
        k1, k2 = k
        if max(abs(k1), abs(k2)) > self.N:
            return 0j
        return complex(self.coeffs[k1 + self.N, k2 + self.N])

    @property
    def mean(self) -> complex:
        return complex(self.coeffs[self.N, self.N])

    def entries(self, canonical: bool = False):
        """Yield ``((k1, k2), a_k)`` for nonzero coefficients in lexicographic order.

        With ``canonical`` only the half-lattice representative of each +-k pair
        (k1 > 0, or k1 == 0 and k2 > 0) is produced.
        """
        N = self.N
        idx = np.argwhere(self.coeffs != 0)
        for i, j in idx:
            k1, k2 = int(i) - N, int(j) - N
            if canonical and not (k1 > 0 or (k1 == 0 and k2 > 0)):
                continue
            yield (k1, k2), complex(self.coeffs[i, j])

    def _like(self, arr, mean_free=None):
        return SpectralField(self.N, arr, self.mean_free if mean_free is None else mean_free)

    def _check_same(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.N != self.N:
            raise ValueError(f"radius mismatch: {self.N} vs {other.N}")
        return None

    def __add__(self, other):
        bad = self._check_same(other)
        if bad is not None:
            return bad
        return self._like(self.coeffs + other.coeffs, self.mean_free and other.mean_free)

    def __sub__(self, other):
        bad = self._check_same(other)
        if bad is not None:
            return bad
        return self._like(self.coeffs - other.coeffs, self.mean_free and other.mean_free)

    def __neg__(self):
        return self._like(-self.coeffs)

    def __mul__(self, c):
        if not np.isreal(c):
            raise SymmetryBreaking("only real scalars keep a field real")
        return self._like(float(np.real(c)) * self.coeffs)

    __rmul__ = __mul__

    def allclose(self, other: "SpectralField", rtol=1e-12, atol=0.0) -> bool:
        if other.N != self.N:
            return False
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol))

    def array_equal(self, other: "SpectralField") -> bool:
        return other.N == self.N and bool(np.array_equal(self.coeffs, other.coeffs))


@dataclass(frozen=True, eq=False)
class VectorField:
    u1: SpectralField
    u2: SpectralField

    def __post_init__(self):
        if self.u1.N != self.u2.N:
            raise ValueError("vector components must share a truncation radius")

    @property
    def N(self) -> int:
        return self.u1.N


@dataclass(frozen=True)
class NormReport:
    """Norms of one snapshot; ``x`` maps sigma -> sum_k |k|^sigma |a_k|."""

    x: dict
    l2: float
    gevrey: float = float("nan")
    gevrey_rate: float = 0.5
    time: float = 0.0

    def __post_init__(self):
        vals = list(self.x.values()) + [self.l2]
        if not np.isnan(self.gevrey):
            vals.append(self.gevrey)
        if any((not np.isfinite(v)) or v < 0 for v in vals):
            raise ValueError(f"norm report entries must be finite and nonnegative: {self}")


def make_field(N: int, entries: Iterable) -> SpectralField:
    """Build a real field from ``(k, c)`` pairs, filling in the conjugate mirrors."""
    arr = np.zeros((2 * N + 1, 2 * N + 1), dtype=np.complex128)
    given = np.zeros(arr.shape, dtype=bool)
    for k, c in entries:
        k1, k2 = (int(k[0]), int(k[1]))
        if k1 == 0 and k2 == 0:
            raise ZeroModeSupplied("the (0,0) mode is excluded (mean-zero fields)")
        if max(abs(k1), abs(k2)) > N:
            raise OutOfBand(f"mode {(k1, k2)} outside |k|_inf <= {N}")
        c = complex(c)
        i, j = k1 + N, k2 + N
        mi, mj = N - k1, N - k2
        if given[i, j] and arr[i, j] != c:
            raise SymmetryConflict(f"mode {(k1, k2)} supplied twice with different values")
        if given[mi, mj] and arr[mi, mj] != c.conjugate():
            raise SymmetryConflict(
                f"mode {(k1, k2)} and its mirror {(-k1, -k2)} are not complex conjugates"
            )
        arr[i, j] = c
        arr[mi, mj] = c.conjugate()
        given[i, j] = True
        given[mi, mj] = True
    return SpectralField(N, arr)


def x_norm_array(coeffs: np.ndarray, N: int, sigma: float) -> np.ndarray:
    """sum_{k != 0} |k|^sigma |a_k| over the last two axes of a coefficient stack."""
    return np.sum(_weights(N, float(sigma)) * np.abs(coeffs), axis=(-2, -1))


def x_norm(f: SpectralField, sigma: float) -> float:
    return float(x_norm_array(f.coeffs, f.N, sigma))


def l2_norm(f: SpectralField) -> float:
    """L^2 norm over [0, 2pi]^2 via Parseval: 2 pi sqrt(sum |a_k|^2)."""
    return float(2.0 * np.pi * np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def _symbol_values(m: Symbol, N: int) -> np.ndarray:
    if callable(m):
        K1, K2, _ = lattice(N)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.asarray(m(K1, K2), dtype=np.complex128)
        vals = np.broadcast_to(vals, K1.shape).copy()
    else:
        vals = np.array(m, dtype=np.complex128)
    # symbols may be singular at k = 0; that mode is absent or is annihilated
    if not np.isfinite(vals[N, N]):
        vals[N, N] = 0.0
    return vals


def multiplier_apply(f: SpectralField, m: Symbol) -> SpectralField:
    """Apply a Fourier multiplier a_k -> m(k) a_k.

    ``m`` is either a callable of the lattice arrays (K1, K2) or a precomputed
    array. It must satisfy m(-k) = conj(m(k)) for the output to stay real.
    """
    vals = _symbol_values(m, f.N)
    if not np.all(np.isfinite(vals)):
        raise ValueError("multiplier is not finite on the retained band")
    if hermitian_defect(vals) > HERMITIAN_RTOL:
        raise SymmetryBreaking("multiplier violates m(-k) = conj(m(k))")
    return f._like(vals * f.coeffs)


def semigroup_symbol(N: int, t: float, kappa: float = 1.0) -> np.ndarray:
    return np.exp(-kappa * t * lattice(N)[2])


def semigroup_apply(f: SpectralField, t: float, kappa: float = 1.0) -> SpectralField:
    """Dissipative propagator e^{-kappa t |D|}."""
    if t < 0:
        raise NegativeTime(f"semigroup needs t >= 0, got {t}")
    if kappa <= 0:
        raise ValueError("dissipation coefficient must be positive")
    return f._like(semigroup_symbol(f.N, t, kappa) * f.coeffs)


def gevrey_guard(N: int, rate: float, t: float) -> None:
    if abs(rate) * t * np.sqrt(2.0) * N > EXP_GUARD:
        raise OverflowGuard(
            f"exp weight overflows: rate*t*sqrt(2)*N = {abs(rate) * t * np.sqrt(2.0) * N:.4g} > {EXP_GUARD}"
        )


def gevrey_apply(f: SpectralField, rate: float, t: float) -> SpectralField:
    """Analytic weight e^{rate t |D|}."""
    if t < 0:
        raise NegativeTime(f"gevrey weight needs t >= 0, got {t}")
    gevrey_guard(f.N, rate, t)
    return f._like(np.exp(rate * t * lattice(f.N)[2]) * f.coeffs)


def fractional_laplacian(f: SpectralField, s: float) -> SpectralField:
    """|D|^s; the zero mode is left at zero."""
    return f._like(_weights(f.N, float(s)) * f.coeffs)


def norm_report(f: SpectralField, sigmas=(-1.0, -0.5, 0.0, 1.0), t: float = 0.0,
                gevrey_rate: float = 0.5) -> NormReport:
    """Collect X^sigma, L^2 and the rate-weighted X^0 norm at time ``t``."""
    x = {float(s): x_norm(f, s) for s in sigmas}
    try:
        gev = x_norm(gevrey_apply(f, gevrey_rate, t), 0.0)
    except OverflowGuard:
        gev = float("nan")
    return NormReport(x=x, l2=l2_norm(f), gevrey=gev, gevrey_rate=gevrey_rate, time=t)


def random_field(N: int, rng: np.random.Generator, slope: float = 0.0,
                 scale: float = 1.0, jitter: bool = False) -> SpectralField:
    """Random-phase real field with |a_k| = scale/(1+|k|)^slope on the full band.

    Only the canonical half-lattice is drawn; the rest follows by symmetry, so
    the draw sequence depends on ``N`` alone. ``jitter`` multiplies each
    amplitude by an extra uniform(0, 1) factor.
    """
    K1, K2, Kabs = lattice(N)
    half = (K1 > 0) | ((K1 == 0) & (K2 > 0))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=int(half.sum()))
    arr = np.zeros(K1.shape, dtype=np.complex128)
    arr[half] = scale * np.exp(1j * phases) / (1.0 + Kabs[half]) ** slope
    if jitter:
        arr[half] *= rng.uniform(0.0, 1.0, size=phases.size)
    arr = arr + mirror(arr)
    return SpectralField(N, arr)
