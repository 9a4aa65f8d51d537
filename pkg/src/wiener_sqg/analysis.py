"""Checks of the small-data estimates on computed trajectories.

Every check returns :class:`CheckResult` records that serialize to one line of
``check_name,pass|fail,measured,bound,slack``. Slack is positive when the check
passes, whatever the direction of the inequality.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import NodeMissing, NonPositiveNorm, RegimeViolation
from .solver import Trajectory
from .spectral import lattice, x_norm_array

log = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    bound: float
    slack: float
    details: dict = field(default_factory=dict, repr=False)

    def __bool__(self):
        return bool(self.passed)

    @classmethod
    def upper(cls, name, measured, bound, **details):
        """Passes iff measured <= bound."""
        measured, bound = float(measured), float(bound)
        return cls(name, measured <= bound, measured, bound, bound - measured, details)

    @classmethod
    def lower(cls, name, measured, bound, **details):
        """Passes iff measured >= bound."""
        measured, bound = float(measured), float(bound)
        return cls(name, measured >= bound, measured, bound, measured - bound, details)

    def record(self) -> str:
        status = "pass" if self.passed else "fail"
        return f"{self.name},{status},{self.measured:.17g},{self.bound:.17g},{self.slack:.17g}"


def quadrature_tol(traj: Trajectory) -> float:
    """5 dt ||theta0||_{X^1}: allowance for the O(dt) time quadrature."""
    return 5.0 * traj.grid.dt * float(traj.x_norms(1.0)[0])


def _rho0(traj, rho0):
    return float(traj.x_norms(0.0)[0]) if rho0 is None else float(rho0)


def apriori_margins(traj: Trajectory, rho0: Optional[float] = None) -> np.ndarray:
    """rho0 - ||theta(t_j)||_{X^0} - (1 - rho0) int_0^{t_j} ||theta||_{X^1} (trapezoid)."""
    rho0 = _rho0(traj, rho0)
    x0 = traj.x_norms(0.0)
    x1 = traj.x_norms(1.0)
    integral = np.concatenate([[0.0], cumulative_trapezoid(x1, dx=traj.grid.dt)])
    return rho0 - x0 - (1.0 - rho0) * integral


def check_apriori(traj: Trajectory, rho0: Optional[float] = None) -> CheckResult:
    rho0 = _rho0(traj, rho0)
    if rho0 >= 1.0:
        raise RegimeViolation(f"a-priori estimate needs ||theta0||_X0 < 1, got {rho0:.6g}")
    margins = apriori_margins(traj, rho0)
    lo = float(np.min(margins))
    return CheckResult.lower("apriori", lo, -quadrature_tol(traj),
                             margins=margins, violation=max(0.0, -lo), rho0=rho0)


def check_monotone(traj: Trajectory, rho0: Optional[float] = None) -> CheckResult:
    """X^0 norm non-increasing node to node; only a warning outside rho0 < 1."""
    rho0 = _rho0(traj, rho0)
    x0 = traj.x_norms(0.0)
    rise = float(np.max(np.diff(x0), initial=-np.inf)) if len(x0) > 1 else 0.0
    res = CheckResult.upper("monotone_x0", rise, 0.0, rho0=rho0)
    if rho0 >= 1.0 and not res.passed:
        log.warning("X^0 increased by %.3g (rho0=%.3g, no guarantee in this regime)", rise, rho0)
        res.passed = True
        res.details["exploration"] = True
    return res


@dataclass
class FrakNorms:
    frak0: float
    frak1: float

    @property
    def total(self) -> float:
        return self.frak0 + self.frak1


def frak_norms(traj: Trajectory) -> FrakNorms:
    """sum_k max_j |a_k(t_j)| and sum_{j<J} dt ||theta(t_j)||_{X^1}."""
    sup_per_mode = np.max(np.abs(traj.coeffs), axis=0)
    frak0 = float(np.sum(sup_per_mode))
    x1 = traj.x_norms(1.0)
    frak1 = float(traj.grid.dt * np.sum(x1[:-1]))
    return FrakNorms(frak0, frak1)


def check_frak(traj: Trajectory, rho0: Optional[float] = None, constant: float = 4.0,
               name: str = "frak_bound") -> CheckResult:
    rho0 = _rho0(traj, rho0)
    fr = frak_norms(traj)
    return CheckResult.upper(name, fr.total, constant * rho0 + quadrature_tol(traj),
                             frak0=fr.frak0, frak1=fr.frak1,
                             sup_x0=float(np.max(traj.x_norms(0.0))))


def check_gevrey(traj: Trajectory, rate: float = 0.5, rho0: Optional[float] = None) -> list:
    """Weighted trajectory e^{t/2 |D|} theta in both trajectory norms, and the pointwise decay.

    Returns ``[gevrey_frak, gevrey_pointwise]``; the first carries the per-node
    weighted X^0 norms under ``details['weighted_x0']``.
    """
    rho0 = _rho0(traj, rho0)
    weighted = traj.weighted(rate)
    res = check_frak(weighted, rho0, constant=12.0, name="gevrey_frak")
    # the tolerance uses the unweighted initial data (weights are 1 at t = 0)
    wx0 = weighted.x_norms(0.0)
    res.details["weighted_x0"] = wx0
    x0 = traj.x_norms(0.0)
    decay = float(np.max(x0 * np.exp(rate * traj.times)))
    point = CheckResult.upper("gevrey_pointwise", decay, 12.0 * rho0)
    return [res, point]


# ---------------------------------------------------------------- splitting


@dataclass
class SplitReport:
    t: float
    lam: float
    delta: float
    low: float
    high: float
    low_weighted: float
    x0: float
    checks: list
    composite: float
    radius_t_holds: bool
    gate: float
    below_gate: bool


def decay_split(traj: Trajectory, delta: float, lam: Optional[float], t: float,
                rho0: Optional[float] = None):
    """Split ||theta(t)||_{X^0} at |k| = lambda.

    ``lam=None`` takes lambda = log 4 / t. Returns ``(A, B, SplitReport)`` with
    A = sum_{0<|k|<lambda} |a_k(t)| and B = sum_{|k|>=lambda} |a_k(t)|, checking
    A <= lambda^delta ||theta0||_{X^-delta} and B <= e^{-t lambda/2} ||e^{t/2 |D|} theta(t)||_{X^0}.
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    j = traj.grid.index_of(t)
    if j is None:
        raise NodeMissing(f"t={t} is not a node of the time grid (dt={traj.grid.dt})")
    t = float(traj.times[j])
    if lam is None:
        if t <= 0:
            raise ValueError("the lambda = log4/t rule needs t > 0")
        lam = math.log(4.0) / t
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    rho0 = _rho0(traj, rho0)
    Kabs = lattice(traj.N)[2]
    a = np.abs(traj.coeffs[j])
    lowmask = (Kabs > 0) & (Kabs < lam)
    highmask = Kabs >= lam
    A = float(np.sum(a[lowmask]))
    B = float(np.sum(a[highmask]))
    A_w = float(np.sum((np.exp(-t * Kabs) * a)[lowmask]))
    x0 = float(np.sum(a[Kabs > 0]))
    xneg = float(x_norm_array(traj.coeffs[0], traj.N, -delta))
    gev = float(np.sum(np.exp(0.5 * t * Kabs) * a))
    low_bound = lam ** delta * xneg
    high_bound = math.exp(-0.5 * t * lam) * gev
    tag = f"t={t:g}"
    checks = [
        CheckResult.upper(f"split_low[{tag}]", A, low_bound, lam=lam),
        CheckResult.upper(f"split_high[{tag}]", B, high_bound, lam=lam),
        CheckResult.upper(f"split_total[{tag}]", x0, low_bound + high_bound, lam=lam),
    ]
    radius_t = float(np.sum(np.exp(t * Kabs) * a))
    gate = 2.0 ** (-(3.0 - delta))
    report = SplitReport(
        t=t, lam=lam, delta=delta, low=A, high=B, low_weighted=A_w, x0=x0, checks=checks,
        composite=lam ** delta * xneg + 2.0 * rho0 * math.exp(-t * lam),
        radius_t_holds=radius_t <= 2.0 * rho0,
        gate=gate, below_gate=rho0 < gate,
    )
    return A, B, report


# ---------------------------------------------------------------- decay fit


@dataclass
class DecayFit:
    window: tuple
    slope: float
    intercept: float
    residual: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.slope <= -0.5


def fit_decay(traj: Trajectory, window: Optional[Sequence[float]] = None) -> DecayFit:
    """Least-squares slope of log ||theta(t)||_{X^0} against t on a time window.

    The default window is the right half of the horizon.
    """
    T = traj.grid.T
    ta, tb = (0.5 * T, T) if window is None else (float(window[0]), float(window[1]))
    if not (0.0 <= ta < tb <= T + 1e-12):
        raise ValueError(f"window [{ta}, {tb}] not inside [0, {T}]")
    t = traj.times
    sel = (t >= ta - 1e-12) & (t <= tb + 1e-12)
    if sel.sum() < 8:
        raise ValueError(f"decay fit needs >= 8 samples, window has {int(sel.sum())}")
    x0 = traj.x_norms(0.0)[sel]
    if np.any(x0 <= 0):
        raise NonPositiveNorm("X^0 norm vanishes inside the fit window")
    y = np.log(x0)
    slope, intercept = np.polyfit(t[sel], y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * t[sel] + intercept)) ** 2)))
    return DecayFit((ta, tb), float(slope), float(intercept), resid, int(sel.sum()))


def check_decay(traj: Trajectory, window=None, name="decay_slope") -> CheckResult:
    fit = fit_decay(traj, window)
    return CheckResult.upper(name, fit.slope, -0.5, residual=fit.residual, window=fit.window)


# ---------------------------------------------------------------- bootstrap


def lemma_bootstrap_check(M0: float, eps1: float, eps2: float, f: Callable,
                          samples: np.ndarray, name: str = "bootstrap") -> CheckResult:
    """If f(t) <= M0 + eps1 f(eps2 t) on the samples, then sup f <= M0/(1 - eps1).

    A failing hypothesis is reported (``details['hypothesis'] is False``) and the
    implication counts as vacuously satisfied.
    """
    if not 0.0 < eps1 < 1.0:
        raise ValueError("eps1 must lie in (0, 1)")
    if not 0.0 <= eps2 <= 1.0:
        raise ValueError("eps2 must lie in [0, 1]")
    samples = np.asarray(samples, dtype=float)
    fv = np.asarray(f(samples), dtype=float)
    fs = np.asarray(f(eps2 * samples), dtype=float)
    if np.any(fv < 0) or not np.all(np.isfinite(fv)):
        raise ValueError("bootstrap test function must be finite and nonnegative")
    rhs = M0 + eps1 * fs
    gap = float(np.max(fv - rhs))
    hypothesis = bool(np.all(fv <= rhs * (1.0 + 1e-12) + 1e-300))
    bound = M0 / (1.0 - eps1)
    res = CheckResult.upper(name, float(np.max(fv)), bound, hypothesis=hypothesis,
                            hypothesis_gap=gap)
    if not hypothesis:
        log.info("bootstrap hypothesis fails on the samples (max excess %.3g)", gap)
        res.passed = True
    return res


def bootstrap_instance(traj: Trajectory, delta: float = 0.5) -> CheckResult:
    """f(t) = t^delta ||theta(t)||_{X^0} with M0 = (log 4)^delta ||theta0||_{X^-delta}, eps = 1/2."""
    t = traj.times
    vals = t ** delta * traj.x_norms(0.0)

    def f(s):
        return np.interp(s, t, vals)

    M0 = math.log(4.0) ** delta * float(traj.x_norms(-delta)[0])
    even = t[::2]
    return lemma_bootstrap_check(M0, 0.5, 0.5, f, even, name=f"bootstrap[delta={delta:g}]")
