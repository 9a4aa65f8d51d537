"""Randomized checks of the product, Duhamel, interpolation and power-triangle inequalities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analysis import CheckResult
from .errors import TruncationDominated
from .nonlinear import (
    convolve_direct,
    convolve_fast,
    divergence,
    riesz_velocity,
    transport_full,
)
from .spectral import SpectralField, lattice, random_field, x_norm, x_norm_array

PRODUCT_SIGMAS = (0.0, 0.5, 1.0, 2.0)
DUHAMEL_SIGMAS = (-1.0, -0.5, 0.0, 1.0)
CONV_RTOL = 1e-12


def random_pair(rng: np.random.Generator, N: int):
    """Two independent random real fields with random slopes, scales and jittered amplitudes."""
    f = random_field(N, rng, slope=rng.uniform(0.0, 2.5), scale=rng.uniform(0.1, 2.0), jitter=True)
    g = random_field(N, rng, slope=rng.uniform(0.0, 2.5), scale=rng.uniform(0.1, 2.0), jitter=True)
    return f, g


def drop_mean(f: SpectralField) -> SpectralField:
    arr = np.array(f.coeffs)
    arr[f.N, f.N] = 0.0
    return SpectralField(f.N, arr)


def convolution_agreement(f: SpectralField, g: SpectralField) -> float:
    """max_k |fast_k - direct_k| / max_k (|a| * |b|)_k.

    The denominator bounds every product coefficient; transform round-off is
    absolute, so it is measured against that common scale rather than against
    coefficients that are themselves at round-off level.
    """
    direct = convolve_direct(f, g).coeffs
    fast = convolve_fast(f, g).coeffs
    scale = float(np.max(convolve_direct(
        SpectralField(f.N, np.abs(f.coeffs), f.mean_free),
        SpectralField(g.N, np.abs(g.coeffs), g.mean_free),
    ).coeffs.real))
    gap = float(np.max(np.abs(fast - direct)))
    return gap / scale if scale > 0 else gap


def lemma_product_check(seed: int, N: int = 6) -> list:
    """Algebra and weighted-product inequalities on one random pair.

    Both sides use the exact (untruncated) radius-2N product with its mean removed.
    """
    rng = np.random.default_rng(seed)
    f, g = random_pair(rng, N)
    fg = drop_mean(convolve_direct(f, g))
    tag = f"seed={seed},N={N}"
    f0, g0, f1, g1 = x_norm(f, 0), x_norm(g, 0), x_norm(f, 1), x_norm(g, 1)
    out = [
        CheckResult.upper(f"conv_fast_eq_direct[{tag}]", convolution_agreement(f, g), CONV_RTOL),
        CheckResult.upper(f"product_x0[{tag}]", x_norm(fg, 0), f0 * g0),
        CheckResult.upper(f"product_x1[{tag}]", x_norm(fg, 1), f0 * g1 + f1 * g0),
    ]
    for s in PRODUCT_SIGMAS:
        lhs = x_norm(fg, s)
        rhs = 2.0 ** s * (f0 * x_norm(g, s) + x_norm(f, s) * g0)
        out.append(CheckResult.upper(f"weighted_product[sigma={s:g},{tag}]", lhs, rhs, ratio=lhs / rhs))
    full = transport_full(f)
    out.append(CheckResult.upper(f"transport_bound[{tag}]", x_norm(full, 0), f0 * f1))
    return out


# ---------------------------------------------------------------- Duhamel / Q(a, b)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _bilinear(a: SpectralField, b: SpectralField) -> np.ndarray:
    """div(b u_a) on the radius-2N band, untruncated."""
    u = riesz_velocity(a)
    return divergence(convolve_fast(b, u.u1), convolve_fast(b, u.u2)).coeffs


@dataclass
class DuhamelOutcome:
    sup_norm: float
    l1_norm: float


def duhamel_norms(a_states, b_states, dt: float, sigma: float) -> DuhamelOutcome:
    """sup_t ||Q(a,b)(t)||_{X^sigma} and int_0^T ||Q(a,b)(t)||_{X^{sigma+1}} dt.

    a, b are piecewise constant in time (value i on [t_i, t_{i+1})), so
    Q(t_i + s) = e^{-s|k|} Q(t_i) + (1 - e^{-s|k|})/|k| G_i per mode, exactly.
    The sup is sampled at the nodes and the Gauss points; the time integral
    uses 8-point Gauss-Legendre per subinterval.
    """
    M = 2 * a_states[0].N
    Kabs = lattice(M)[2]
    nz = Kabs > 0
    safe = np.where(nz, Kabs, 1.0)
    Q = np.zeros((2 * M + 1, 2 * M + 1), dtype=np.complex128)
    sup = 0.0
    l1 = 0.0
    s_pts = 0.5 * dt * (_GL_NODES + 1.0)
    for a, b in zip(a_states, b_states):
        G = _bilinear(a, b)
        decay = np.exp(-s_pts[:, None, None] * Kabs[None])
        kern = np.where(nz, -np.expm1(-s_pts[:, None, None] * Kabs[None]) / safe, s_pts[:, None, None])
        inner = decay * Q[None] + kern * G[None]
        sup = max(sup, float(np.max(x_norm_array(inner, M, sigma))))
        l1 += 0.5 * dt * float(np.dot(_GL_WEIGHTS, x_norm_array(inner, M, sigma + 1.0)))
        E = np.exp(-dt * Kabs)
        w = np.where(nz, -np.expm1(-dt * Kabs) / safe, dt)
        Q = E * Q + w * G
        sup = max(sup, float(x_norm_array(Q, M, sigma)))
    return DuhamelOutcome(sup, l1)


def lemma_duhamel_check(seed: int, N: int = 4, T: float = 1.0, sigma: float = 0.0,
                        J: int = 16) -> list:
    """Bilinear Duhamel bounds on random piecewise-constant pairs (a, b).

    For sigma >= -1 both sup-X^sigma and L^1-X^{sigma+1} of Q(a, b) are bounded
    by 2^{sigma+1}[|a|_{L^inf X^0} |b|_{L^1 X^{sigma+1}} + |a|_{L^1 X^{sigma+1}} |b|_{L^inf X^0}].
    At sigma = -1 the constant-one bounds for Q(a, a) in sup-X^0 and L^1-X^1
    are checked as well.
    """
    if sigma < -1:
        raise ValueError("Duhamel bounds need sigma >= -1")
    rng = np.random.default_rng(seed)
    dt = T / J
    a_states, b_states = [], []
    for _ in range(J):
        a, b = random_pair(rng, N)
        a_states.append(a)
        b_states.append(b)
    tag = f"seed={seed},sigma={sigma:g}"

    def linf(states, s):
        return max(x_norm(x, s) for x in states)

    def l1(states, s):
        return dt * sum(x_norm(x, s) for x in states)

    out = []
    res = duhamel_norms(a_states, b_states, dt, sigma)
    rhs = 2.0 ** (sigma + 1.0) * (linf(a_states, 0) * l1(b_states, sigma + 1)
                                  + l1(a_states, sigma + 1) * linf(b_states, 0))
    out.append(CheckResult.upper(f"duhamel_sup[{tag}]", res.sup_norm, rhs, ratio=res.sup_norm / rhs))
    out.append(CheckResult.upper(f"duhamel_l1[{tag}]", res.l1_norm, rhs, ratio=res.l1_norm / rhs))
    if sigma == -1.0:
        same = duhamel_norms(a_states, a_states, dt, 0.0)
        rhs1 = linf(a_states, 0) * l1(a_states, 1)
        out.append(CheckResult.upper(f"duhamel_self_sup[{tag}]", same.sup_norm, rhs1,
                                     ratio=same.sup_norm / rhs1))
        out.append(CheckResult.upper(f"duhamel_self_l1[{tag}]", same.l1_norm, rhs1,
                                     ratio=same.l1_norm / rhs1))
    return out


# ---------------------------------------------------------------- interpolation on R^2


@dataclass
class SampledProfile:
    """Nonnegative Fourier-side profile |f^(xi)| sampled at cell midpoints of [-L, L]^2."""

    amplitude: Callable[[np.ndarray, np.ndarray], np.ndarray]
    L: float = 8.0
    h: float = 0.01

    @property
    def n(self) -> int:
        return int(round(2.0 * self.L / self.h))

    @property
    def nodes(self) -> np.ndarray:
        return -self.L + self.h * (np.arange(self.n) + 0.5)

    def refined(self, L=None, h=None) -> "SampledProfile":
        return SampledProfile(self.amplitude, self.L if L is None else L, self.h if h is None else h)

    def norms(self, sigma: float, chunk: int = 256):
        """(||f||_{X^sigma}, ||f||_{X^{sigma+1}}, ||f^||_{L^2(dxi)}) by the midpoint rule."""
        x = self.nodes
        xs = xs1 = sq = 0.0
        for start in range(0, x.size, chunk):
            X, Y = np.meshgrid(x[start:start + chunk], x, indexing="ij")
            r = np.hypot(X, Y)
            v = np.asarray(self.amplitude(X, Y), dtype=float)
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError("profile samples must be finite and nonnegative")
            rs = r ** sigma
            xs += float(np.sum(rs * v))
            xs1 += float(np.sum(rs * r * v))
            sq += float(np.sum(v * v))
        area = self.h * self.h
        return xs * area, xs1 * area, math.sqrt(sq * area)


def gaussian_profile(scale: float = 1.0, width: float = 1.0):
    def amp(x, y):
        return scale * np.exp(-(x * x + y * y) / (2.0 * width * width))
    return amp


def random_smooth_profile(seed: int, bumps: int = 3):
    """Sum of Gaussian bumps with random weights, centres in [-1.5, 1.5]^2, widths in [0.5, 1]."""
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.2, 1.0, bumps)
    c = rng.uniform(-1.5, 1.5, (bumps, 2))
    s = rng.uniform(0.5, 1.0, bumps)

    def amp(x, y):
        out = np.zeros(np.broadcast(x, y).shape)
        for wi, ci, si in zip(w, c, s):
            out += wi * np.exp(-((x - ci[0]) ** 2 + (y - ci[1]) ** 2) / (2.0 * si * si))
        return out
    return amp


INTERP_CONSTANT = math.sqrt(2.0 * math.pi) + 1.0
TRUNCATION_RTOL = 1e-6


def _rel_change(a, b):
    return max(abs(x - y) / abs(y) for x, y in zip(a, b) if y != 0)


def lemma_interpolation_check(profile: SampledProfile, sigma: float, name: str = "interpolation") -> list:
    """||f||_{X^sigma} <= (sqrt(2 pi) + 1) ||f^||_{L^2}^{1/(sigma+2)} ||f||_{X^{sigma+1}}^{(sigma+1)/(sigma+2)}.

    The L^2 factor is the unnormalized ||f^||_{L^2(dxi)}: splitting at |xi| = lambda
    and applying Cauchy-Schwarz on the disc gives exactly this constant with that
    factor. The Plancherel-normalized variant (divided by 2 pi) is smaller and the
    constant does not survive it; its ratio is reported alongside.
    Raises :class:`TruncationDominated` if doubling the box moves a norm by more
    than 1e-6 relative. Returns ``[inequality, quadrature]`` results.
    """
    if not sigma > -1:
        raise ValueError("interpolation needs sigma > -1")
    base = profile.norms(sigma)
    wide = profile.refined(L=2.0 * profile.L).norms(sigma)
    trunc = _rel_change(base, wide)
    if trunc > TRUNCATION_RTOL:
        raise TruncationDominated(f"box [-{profile.L}, {profile.L}]^2 misses {trunc:.3g} of a norm")
    fine = profile.refined(h=0.5 * profile.h).norms(sigma)
    quad = _rel_change(fine, base)
    xs, xs1, l2 = fine
    p = 1.0 / (sigma + 2.0)
    rhs = INTERP_CONSTANT * l2 ** p * xs1 ** (1.0 - p)
    rhs_plancherel = INTERP_CONSTANT * (l2 / (2.0 * math.pi)) ** p * xs1 ** (1.0 - p)
    tag = f"sigma={sigma:g}"
    return [
        CheckResult.upper(f"{name}[{tag}]", xs, rhs, ratio=xs / rhs,
                          plancherel_ratio=xs / rhs_plancherel, truncation=trunc),
        CheckResult.upper(f"{name}_quadrature[{tag}]", quad, TRUNCATION_RTOL),
    ]


# ---------------------------------------------------------------- power triangle


def power_triangle_check(p: float, sample_count: int = 0, seed: int = 0, box: int = 20) -> CheckResult:
    """|k|^p <= |k - n|^p + |n|^p over all k, n with |k|_inf, |n|_inf <= box.

    For p <= 1 the check passes iff no pair violates the inequality (exhaustive,
    plus ``sample_count`` random pairs from a box ten times wider). For p > 1
    it passes iff a violating pair is found; k = (2, 0), n = (1, 0) is tried
    first and the pair is returned in ``details['counterexample']``.
    """
    if not p > 0:
        raise ValueError("exponent must be positive")
    r = np.arange(-box, box + 1, dtype=float)
    K1, K2 = [a.ravel() for a in np.meshgrid(r, r, indexing="ij")]
    kp = np.hypot(K1, K2) ** p
    worst = -np.inf
    worst_pair = None
    for i in range(K1.size):
        lhs = kp[i]
        rhs = np.hypot(K1[i] - K1, K2[i] - K2) ** p + kp
        excess = (lhs - rhs) / max(lhs, 1.0)
        j = int(np.argmax(excess))
        if excess[j] > worst:
            worst = float(excess[j])
            worst_pair = ((int(K1[i]), int(K2[i])), (int(K1[j]), int(K2[j])))
    if sample_count:
        rng = np.random.default_rng(seed)
        k = rng.integers(-10 * box, 10 * box + 1, size=(sample_count, 2)).astype(float)
        n = rng.integers(-10 * box, 10 * box + 1, size=(sample_count, 2)).astype(float)
        lhs = np.hypot(k[:, 0], k[:, 1]) ** p
        rhs = np.hypot(k[:, 0] - n[:, 0], k[:, 1] - n[:, 1]) ** p + np.hypot(n[:, 0], n[:, 1]) ** p
        excess = (lhs - rhs) / np.maximum(lhs, 1.0)
        j = int(np.argmax(excess))
        if excess[j] > worst:
            worst = float(excess[j])
            worst_pair = (tuple(int(v) for v in k[j]), tuple(int(v) for v in n[j]))
    # equality cases (collinear k, n at p = 1) are exact up to rounding
    tol = 1e-12
    name = f"power_triangle[p={p:g}]"
    if p <= 1.0:
        return CheckResult.upper(name, worst, tol, worst_pair=worst_pair)
    witness = ((2, 0), (1, 0))
    if 2.0 ** p > 2.0:
        counter = witness
        excess = (2.0 ** p - 2.0) / 2.0 ** p
    else:
        counter, excess = worst_pair, worst
    return CheckResult.lower(name, excess, tol, counterexample=counter, worst_pair=worst_pair)
