"""Time integration of the critical dissipative SQG equation on the torus.

    d/dt theta + kappa |D| theta + u_theta . grad theta = 0,  u_theta = R^perp theta

Two routes are provided. ``picard_solve`` iterates the mild (Duhamel) map

    psi(theta)(t) = e^{-kappa t |D|} theta0 - int_0^t e^{-kappa (t-z) |D|} div(theta u_theta)(z) dz

to a fixed point, and ``simulate`` marches an exponential integrator. Both use
the same quadrature of the Duhamel integral: the nonlinear factor is frozen on
each subinterval and the kernel is integrated exactly per mode, so the
exponential-Euler march is the fixed point of the discrete map.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import GridMismatch, NoConvergence, NonFiniteState
from .nonlinear import transport_term, transport_with_loss
from .spectral import (
    NormReport,
    SpectralField,
    gevrey_guard,
    lattice,
    mirror,
    random_field,
    semigroup_symbol,
    x_norm,
    x_norm_array,
)

log = logging.getLogger(__name__)

ENGINES = ("picard", "expeuler", "etdrk2")
RECIPES = ("random_phase", "lowest_shell", "two_shells")
REPORT_SIGMAS = (-1.0, -0.5, 0.0, 1.0)


def default_dt(N: int, rho0: float) -> float:
    """min(1/64, 1/(4 N rho0)): keeps the frozen-factor error below the Lipschitz scale."""
    return min(1.0 / 64.0, 1.0 / (4.0 * N * rho0))


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    J: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.J < 0:
            raise ValueError("number of steps must be nonnegative")

    @classmethod
    def covering(cls, T: float, dt: float) -> "TimeGrid":
        """Uniform grid on [0, T]; dt shrinks slightly if T/dt is not an integer."""
        J = int(round(T / dt))
        if J == 0 or abs(J * dt - T) > 1e-9 * max(T, 1.0):
            J = max(1, math.ceil(T / dt - 1e-9))
            dt = T / J
        return cls(dt=float(dt), J=J)

    @property
    def T(self) -> float:
        return self.J * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.J + 1)

    def index_of(self, t: float, tol: float = 1e-9) -> Optional[int]:
        j = int(round(t / self.dt))
        if 0 <= j <= self.J and abs(j * self.dt - t) <= tol * max(1.0, abs(t)):
            return j
        return None


@dataclass(frozen=True)
class InitRecipe:
    name: str = "random_phase"
    rho0: float = 0.5
    slope: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.name not in RECIPES:
            raise ValueError(f"unknown initial-data recipe {self.name!r}; choose from {RECIPES}")
        if not self.rho0 > 0:
            raise ValueError(f"target X^0 norm must be positive, got {self.rho0}")
        if self.slope < 0:
            raise ValueError("spectral slope must be >= 0")


@dataclass(frozen=True)
class SolverConfig:
    N: int
    T: float
    dt: Optional[float] = None
    kappa: float = 1.0
    engine: str = "expeuler"
    max_iters: int = 60
    fixpoint_tol: float = 1e-12
    init: InitRecipe = field(default_factory=InitRecipe)
    r1: Optional[float] = None
    linear_only: bool = False

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got {self.T}")
        if self.dt is None:
            object.__setattr__(self, "dt", default_dt(self.N, self.init.rho0))
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if not self.kappa > 0:
            raise ValueError(f"dissipation coefficient must be positive, got {self.kappa}")
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}; choose from {ENGINES}")
        if self.r1 is None:
            rho0 = self.init.rho0
            object.__setattr__(self, "r1", (1.0 - rho0) / (1.0 + rho0) if rho0 < 1 else 0.0)

    @property
    def rho0(self) -> float:
        return self.init.rho0

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.covering(self.T, self.dt)

    def replace(self, **changes) -> "SolverConfig":
        """Copy with changes; ``rho0``/``slope``/``seed``/``recipe`` go to the init recipe.

        Derived defaults (dt, r1) are kept unless passed explicitly, ``None`` re-derives.
        """
        init = asdict(self.init)
        for key in ("rho0", "slope", "seed"):
            if key in changes:
                init[key] = changes.pop(key)
        if "recipe" in changes:
            init["name"] = changes.pop("recipe")
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes, init=InitRecipe(**init))
        return SolverConfig(**d)


@dataclass
class Trajectory:
    grid: TimeGrid
    coeffs: np.ndarray
    N: int
    kappa: float = 1.0
    reports: Optional[list] = None
    dropped: Optional[np.ndarray] = None
    config: Optional[SolverConfig] = None
    picard: Optional["PicardReport"] = None

    def __post_init__(self):
        n = 2 * self.N + 1
        if self.coeffs.shape != (self.grid.J + 1, n, n):
            raise GridMismatch(
                f"coefficient stack {self.coeffs.shape} does not fit grid J={self.grid.J}, N={self.N}"
            )

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __len__(self):
        return self.grid.J + 1

    def state(self, j: int) -> SpectralField:
        return SpectralField(self.N, self.coeffs[j])

    @property
    def states(self) -> list:
        return [self.state(j) for j in range(len(self))]

    def x_norms(self, sigma: float) -> np.ndarray:
        return x_norm_array(self.coeffs, self.N, sigma)

    def weighted(self, rate: float) -> "Trajectory":
        """Trajectory of e^{rate t |D|} theta(t)."""
        gevrey_guard(self.N, rate, self.grid.T)
        w = np.exp(rate * self.times[:, None, None] * lattice(self.N)[2][None])
        return Trajectory(self.grid, w * self.coeffs, self.N, self.kappa)

    def gevrey_norms(self, rate: float = 0.5) -> np.ndarray:
        out = np.full(len(self), np.nan)
        Kabs = lattice(self.N)[2]
        ok = np.abs(rate) * self.times * math.sqrt(2.0) * self.N <= 700.0
        if np.any(ok):
            t = self.times[ok]
            out[ok] = np.sum(np.exp(rate * t[:, None, None] * Kabs[None]) * np.abs(self.coeffs[ok]),
                             axis=(-2, -1))
        return out

    def l2_norms(self) -> np.ndarray:
        return 2.0 * np.pi * np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=(-2, -1)))

    def attach_reports(self, gevrey_rate: float = 0.5) -> None:
        xs = {s: self.x_norms(s) for s in REPORT_SIGMAS}
        l2 = self.l2_norms()
        gev = self.gevrey_norms(gevrey_rate)
        if np.any(np.isnan(gev)):
            log.warning("weighted norm skipped at %d nodes (exponent guard)", int(np.isnan(gev).sum()))
        self.reports = [
            NormReport(x={s: float(xs[s][j]) for s in REPORT_SIGMAS}, l2=float(l2[j]),
                       gevrey=float(gev[j]), gevrey_rate=gevrey_rate, time=float(self.times[j]))
            for j in range(len(self))
        ]


def sup_distance(a: Trajectory, b: Trajectory, sigma: float = 0.0) -> float:
    """max_j ||a(t_j) - b(t_j)||_{X^sigma}."""
    if a.coeffs.shape != b.coeffs.shape:
        raise GridMismatch("trajectories live on different grids")
    return float(np.max(x_norm_array(a.coeffs - b.coeffs, a.N, sigma)))


def l1_time(traj: Trajectory, sigma: float = 1.0) -> float:
    """Left Riemann sum sum_{j<J} dt ||theta(t_j)||_{X^sigma}; exact for piecewise-frozen states."""
    return float(traj.grid.dt * np.sum(traj.x_norms(sigma)[:-1]))


# ---------------------------------------------------------------- initial data


def initial_data(recipe: InitRecipe, N: int) -> SpectralField:
    """Random-phase field a_k = e^{i phi_k}/(1+|k|)^q rescaled to X^0 norm rho0."""
    rng = np.random.default_rng(recipe.seed)
    f = random_field(N, rng, slope=recipe.slope)
    if recipe.name != "random_phase":
        Kabs = lattice(N)[2]
        shells = (1.0,) if recipe.name == "lowest_shell" else (1.0, 2.0)
        keep = np.isin(Kabs, shells)
        f = SpectralField(N, np.where(keep, f.coeffs, 0.0))
    return f * (recipe.rho0 / x_norm(f, 0.0))


# ---------------------------------------------------------------- kernels


def duhamel_weight(N: int, dt: float, kappa: float = 1.0) -> np.ndarray:
    """int_0^dt e^{-kappa s |k|} ds = (1 - e^{-kappa dt |k|})/(kappa |k|), per mode."""
    z = kappa * dt * lattice(N)[2]
    w = np.full(z.shape, float(dt))
    nz = z > 0
    w[nz] = dt * (-np.expm1(-z[nz])) / z[nz]
    return w


def etd2_weight(N: int, dt: float, kappa: float = 1.0) -> np.ndarray:
    """(e^{-z} - 1 + z)/((kappa |k|)^2 dt) with z = kappa dt |k|; series near z = 0."""
    z = kappa * dt * lattice(N)[2]
    w = np.full(z.shape, 0.5 * dt)
    small = (z > 0) & (z < 1e-3)
    big = z >= 1e-3
    zs = z[small]
    w[small] = dt * (0.5 - zs / 6.0 + zs ** 2 / 24.0 - zs ** 3 / 120.0)
    zb = z[big]
    w[big] = dt * (zb + np.expm1(-zb)) / zb ** 2
    return w


def _transport(theta: SpectralField, linear_only: bool) -> SpectralField:
    if linear_only:
        return SpectralField.zeros(theta.N)
    return transport_term(theta)


def step_exponential_euler(theta: SpectralField, dt: float, kappa: float = 1.0,
                           linear_only: bool = False) -> SpectralField:
    """theta+ = e^{-kappa dt |D|} theta - w(dt) . F(theta), F = P_N div(theta u_theta)."""
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    F = _transport(theta, linear_only)
    E = semigroup_symbol(theta.N, dt, kappa)
    w = duhamel_weight(theta.N, dt, kappa)
    return SpectralField(theta.N, E * theta.coeffs - w * F.coeffs)


def step_etdrk2(theta: SpectralField, dt: float, kappa: float = 1.0,
                linear_only: bool = False) -> SpectralField:
    """Second-order exponential Runge-Kutta (exponential-Euler predictor, ETD corrector)."""
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    N = theta.N
    F0 = _transport(theta, linear_only)
    E = semigroup_symbol(N, dt, kappa)
    pred = E * theta.coeffs - duhamel_weight(N, dt, kappa) * F0.coeffs
    if linear_only:
        return SpectralField(N, pred)
    F1 = transport_term(SpectralField(N, pred))
    return SpectralField(N, pred - etd2_weight(N, dt, kappa) * (F1.coeffs - F0.coeffs))


# ---------------------------------------------------------------- Picard


def picard_map(traj: Trajectory, theta0: SpectralField, kappa: Optional[float] = None,
               linear_only: bool = False) -> Trajectory:
    """Apply the discrete mild map psi to a whole trajectory.

    psi(theta)(t_j) = S(t_j) theta0 - sum_{i<j} S(t_j - t_{i+1}) w F(theta(t_i)),
    evaluated by the recursion Q_{j+1} = S(dt) Q_j + w F_j.
    """
    if theta0.N != traj.N:
        raise GridMismatch(f"initial data radius {theta0.N} != trajectory radius {traj.N}")
    kappa = traj.kappa if kappa is None else kappa
    N, grid = traj.N, traj.grid
    E = semigroup_symbol(N, grid.dt, kappa)
    w = duhamel_weight(N, grid.dt, kappa)
    Kabs = lattice(N)[2]
    out = np.empty_like(traj.coeffs)
    out[0] = theta0.coeffs
    Q = np.zeros_like(theta0.coeffs)
    for j in range(grid.J):
        F = _transport(traj.state(j), linear_only)
        Q = E * Q + w * F.coeffs
        out[j + 1] = np.exp(-kappa * grid.times[j + 1] * Kabs) * theta0.coeffs - Q
    return Trajectory(grid, out, N, kappa)


def linear_flow(theta0: SpectralField, grid: TimeGrid, kappa: float = 1.0) -> Trajectory:
    Kabs = lattice(theta0.N)[2]
    coeffs = np.exp(-kappa * grid.times[:, None, None] * Kabs[None]) * theta0.coeffs[None]
    return Trajectory(grid, coeffs, theta0.N, kappa)


def c2_time(theta0: SpectralField, r1: float, kappa: float = 1.0) -> float:
    """Largest T with sum_k (1 - e^{-kappa T |k|}) |a_k| <= (1 - r0) r1, r0 = (1 + rho0)/2.

    With a growing exponential e^{+T|k|} the left side would be negative and the
    condition empty, so the decaying one is used.
    """
    rho0 = x_norm(theta0, 0.0)
    r0 = 0.5 * (1.0 + rho0)
    budget = (1.0 - r0) * r1
    if rho0 <= budget:
        return math.inf
    a = np.abs(theta0.coeffs)
    Kabs = lattice(theta0.N)[2]

    def g(T):
        return float(np.sum(-np.expm1(-kappa * T * Kabs) * a)) - budget

    hi = 1.0
    while g(hi) < 0:
        hi *= 2.0
    return brentq(g, 0.0, hi, xtol=1e-14, rtol=1e-12)


@dataclass
class PicardReport:
    distances: list
    ratios: list
    converged: bool
    iterations: int
    residual: float
    r0: float
    r1: float
    r1_measured: float
    ratio_bound: float
    ratio_max_tail: float
    c2_time: float

    @property
    def ratios_ok(self) -> bool:
        return self.ratio_max_tail <= self.ratio_bound


# distances below this are round-off; their ratios carry no contraction information
RATIO_FLOOR = 1e-13


def picard_solve(config: SolverConfig, theta0: Optional[SpectralField] = None):
    """Iterate the discrete mild map from the linear flow to a fixed point.

    Returns ``(trajectory, PicardReport)``. Contraction ratios are measured from
    the second iteration on, ignoring pairs whose distances sit at round-off.
    """
    if theta0 is None:
        theta0 = initial_data(config.init, config.N)
    rho0 = x_norm(theta0, 0.0)
    if rho0 >= 1.0:
        warnings.warn(f"rho0 = {rho0:.3g} >= 1 lies outside the small-data regime", RuntimeWarning)
    grid = config.grid
    traj = linear_flow(theta0, grid, config.kappa)
    distances, ratios = [], []
    converged = False
    for m in range(config.max_iters):
        nxt = picard_map(traj, theta0, config.kappa, config.linear_only)
        d = sup_distance(nxt, traj)
        if not math.isfinite(d):
            raise NonFiniteState(m, f"Picard iterate {m} is not finite")
        distances.append(d)
        if len(distances) > 1 and distances[-2] > RATIO_FLOOR:
            ratios.append(d / distances[-2])
        traj = nxt
        if d < config.fixpoint_tol:
            converged = True
            break
    if not converged:
        tail = distances[-3:]
        if len(tail) < 2 or all(b >= a for a, b in zip(tail, tail[1:])):
            raise NoConvergence(
                f"Picard iteration stalled after {config.max_iters} iterations (last distances {tail})"
            )
        log.warning("Picard iteration hit max_iters=%d with residual %.3g", config.max_iters, distances[-1])
    r0 = 0.5 * (1.0 + rho0)
    r1_meas = l1_time(traj, 1.0)
    tail = [r for r, d in zip(ratios, distances[1:]) if d > RATIO_FLOOR][1:]
    report = PicardReport(
        distances=distances,
        ratios=ratios,
        converged=converged,
        iterations=len(distances),
        residual=distances[-1],
        r0=r0,
        r1=float(config.r1),
        r1_measured=r1_meas,
        ratio_bound=r0 + r1_meas + 0.05,
        ratio_max_tail=max(tail) if tail else 0.0,
        c2_time=c2_time(theta0, config.r1, config.kappa) if config.r1 > 0 else 0.0,
    )
    traj.config = config
    return traj, report


# ---------------------------------------------------------------- marching


def _check_finite(arr, step):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteState(step)


def simulate(config: SolverConfig, theta0: Optional[SpectralField] = None) -> Trajectory:
    """March the configured engine to the horizon and attach per-node diagnostics.

    ``dropped`` holds, per node, the X^0 mass that Galerkin truncation removes
    from the transport term evaluated at that node.
    """
    if theta0 is None:
        theta0 = initial_data(config.init, config.N)
    if theta0.N != config.N:
        raise GridMismatch(f"initial data radius {theta0.N} != configured N={config.N}")
    _check_finite(theta0.coeffs, 0)
    grid = config.grid
    N, kappa = config.N, config.kappa
    if config.engine == "picard":
        traj, report = picard_solve(config, theta0)
        traj.picard = report
    else:
        step = step_exponential_euler if config.engine == "expeuler" else step_etdrk2
        coeffs = np.empty((grid.J + 1, 2 * N + 1, 2 * N + 1), dtype=np.complex128)
        coeffs[0] = theta0.coeffs
        theta = theta0
        for j in range(grid.J):
            theta = step(theta, grid.dt, kappa, config.linear_only)
            _check_finite(theta.coeffs, j + 1)
            coeffs[j + 1] = theta.coeffs
        traj = Trajectory(grid, coeffs, N, kappa, config=config)
    dropped = np.zeros(len(traj))
    if not config.linear_only:
        for j in range(len(traj)):
            dropped[j] = transport_with_loss(traj.state(j))[1]
    traj.dropped = dropped
    traj.attach_reports()
    x0 = traj.x_norms(0.0)
    rises = np.nonzero(np.diff(x0) > 0)[0]
    if rises.size:
        log.warning("X^0 norm increased at %d steps (first at step %d, rho0=%.3g)",
                    rises.size, int(rises[0]) + 1, x_norm(theta0, 0.0))
    return traj


def mirror_check(traj: Trajectory) -> float:
    """Largest Hermitian defect over all stored states (0 for exactly real fields)."""
    return float(np.max(np.abs(traj.coeffs - mirror(traj.coeffs))))
