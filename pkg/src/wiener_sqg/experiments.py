"""Named experiments E1-E6: config parsing, orchestration, output files."""
from __future__ import annotations

import logging
import re
import sys
import time
import traceback
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import (
    CheckResult,
    bootstrap_instance,
    check_apriori,
    check_decay,
    check_frak,
    check_gevrey,
    check_monotone,
    decay_split,
    fit_decay,
    frak_norms,
)
from .errors import MissingRequired, RangeError, RegimeViolation, SQGError, TypeMismatch, UnknownKey
from .io import write_manifest, write_results, write_spectrum, write_timeseries
from .lemmas import (
    DUHAMEL_SIGMAS,
    SampledProfile,
    gaussian_profile,
    lemma_duhamel_check,
    lemma_interpolation_check,
    lemma_product_check,
    power_triangle_check,
    random_smooth_profile,
)
from .solver import ENGINES, RECIPES, InitRecipe, SolverConfig, simulate

log = logging.getLogger(__name__)

EXPERIMENTS = ("E1_apriori", "E2_frak", "E3_gevrey", "E4_split", "E5_decay", "E6_lemmas")
FORMAT_VERSION = 1

# control run must reproduce the dissipative slope within this much
CONTROL_SLOPE_TOL = 0.1


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    solver: SolverConfig
    delta: float = 0.5
    lam: Optional[float] = None           # None: lambda = log4 / t
    split_times: tuple = (2.0, 4.0, 8.0)
    fit_window: Optional[tuple] = None    # None: right half of the horizon
    lemma_seeds: int = 50
    lemma_N: int = 6
    interp_sigmas: tuple = (0.0, 0.5, 1.0)
    powers: tuple = (0.25, 0.5, 1.0, 1.5, 2.0)

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise RangeError(f"unknown experiment name {self.name!r}; choose from {EXPERIMENTS}")

    @property
    def seed(self) -> int:
        return self.solver.init.seed

    def echo(self) -> list:
        """All settings, defaults included, as (key, value) strings."""
        c = self.solver
        fw = self.fit_window
        return [
            ("name", self.name),
            ("N", c.N),
            ("T", _fmt(c.T)),
            ("dt", _fmt(c.dt)),
            ("J", c.grid.J),
            ("kappa", _fmt(c.kappa)),
            ("engine", c.engine),
            ("max_iters", c.max_iters),
            ("fixpoint_tol", _fmt(c.fixpoint_tol)),
            ("recipe", c.init.name),
            ("rho0", _fmt(c.rho0)),
            ("slope", _fmt(c.init.slope)),
            ("seed", c.init.seed),
            ("r1", _fmt(c.r1)),
            ("linear_only", str(c.linear_only).lower()),
            ("delta", _fmt(self.delta)),
            ("lam", "log4/t" if self.lam is None else _fmt(self.lam)),
            ("split_times", ",".join(_fmt(t) for t in self.split_times)),
            ("fit_window", "right_half" if fw is None else f"{_fmt(fw[0])},{_fmt(fw[1])}"),
            ("lemma_seeds", self.lemma_seeds),
            ("lemma_N", self.lemma_N),
        ]


def _fmt(x) -> str:
    # shortest round-tripping form
    return repr(float(x))


# ---------------------------------------------------------------- parsing


def _float(text: str) -> float:
    # fractions such as 1/256 are handy for time steps
    return float(Fraction(text)) if "/" in text else float(text)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(text)


def _floats(text: str) -> tuple:
    return tuple(_float(p) for p in text.split(",") if p)


def _lam(text: str):
    return None if text.lower() in ("auto", "log4/t") else _float(text)


_KEYS = {
    "name": str, "N": int, "T": _float, "dt": _float, "kappa": _float, "engine": str,
    "max_iters": int, "fixpoint_tol": _float, "rho0": _float, "slope": _float,
    "seed": int, "recipe": str, "r1": _float, "linear_only": _bool, "delta": _float,
    "lam": _lam, "split_times": _floats, "fit_start": _float, "fit_end": _float,
    "lemma_seeds": int, "lemma_N": int,
}
_ALIASES = {"q": "slope", "n_seeds": "lemma_seeds"}
_PAIR = re.compile(r"([^\s=]+)\s*=\s*([^\s=]+)")


def parse_config(text: str) -> ExperimentSpec:
    """Parse flat ``key = value`` text; several pairs may share a line, ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        pairs = _PAIR.findall(line)
        if not pairs or _PAIR.sub("", line).strip():
            raise TypeMismatch(f"line {lineno}: cannot read {line!r} as key = value pairs")
        for key, value in pairs:
            key = _ALIASES.get(key, key)
            if key not in _KEYS:
                raise UnknownKey(f"line {lineno}: unknown key {key!r}")
            try:
                raw[key] = _KEYS[key](value)
            except (ValueError, ZeroDivisionError):
                raise TypeMismatch(f"line {lineno}: {key} = {value!r} is not a valid {_KEYS[key].__name__.strip('_')}") from None
    for key in ("N", "T"):
        if key not in raw:
            raise MissingRequired(f"required key {key!r} is missing")
    raw.setdefault("name", "E5_decay")
    return _build(raw)


def _build(raw: dict) -> ExperimentSpec:
    checks = {
        "N": lambda v: v >= 1, "T": lambda v: v > 0, "dt": lambda v: v > 0,
        "kappa": lambda v: v > 0, "rho0": lambda v: v > 0, "max_iters": lambda v: v >= 1,
        "fixpoint_tol": lambda v: v > 0, "delta": lambda v: 0 <= v < 1, "r1": lambda v: v >= 0,
        "lam": lambda v: v is None or v > 0, "lemma_seeds": lambda v: v >= 1,
        "lemma_N": lambda v: v >= 1, "split_times": lambda v: len(v) > 0 and min(v) > 0,
    }
    for key, ok in checks.items():
        if key in raw and not ok(raw[key]):
            raise RangeError(f"{key} = {raw[key]!r} is out of range")
    if raw.get("engine", "expeuler") not in ENGINES:
        raise RangeError(f"engine must be one of {ENGINES}")
    if raw.get("recipe", "random_phase") not in RECIPES:
        raise RangeError(f"recipe must be one of {RECIPES}")
    init = InitRecipe(
        name=raw.get("recipe", "random_phase"),
        rho0=raw.get("rho0", 0.1),
        slope=raw.get("slope", 2.0),
        seed=raw.get("seed", 0),
    )
    solver = SolverConfig(
        N=raw["N"], T=raw["T"], dt=raw.get("dt"), kappa=raw.get("kappa", 1.0),
        engine=raw.get("engine", "expeuler"), max_iters=raw.get("max_iters", 60),
        fixpoint_tol=raw.get("fixpoint_tol", 1e-12), init=init, r1=raw.get("r1"),
        linear_only=raw.get("linear_only", False),
    )
    window = None
    if "fit_start" in raw or "fit_end" in raw:
        window = (raw.get("fit_start", 0.5 * solver.T), raw.get("fit_end", solver.T))
        if not 0 <= window[0] < window[1] <= solver.T:
            raise RangeError(f"fit window {window} must lie inside [0, T]")
    extra = {k: raw[k] for k in ("delta", "lam", "split_times", "lemma_seeds", "lemma_N") if k in raw}
    return ExperimentSpec(name=raw["name"], solver=solver, fit_window=window, **extra)


def load_config(path) -> ExperimentSpec:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------- experiments


def _write_run(traj, out: Path) -> None:
    write_timeseries(traj, out / "timeseries.csv")
    write_spectrum(traj.state(0), traj.times[0], out / "spectrum_initial.txt")
    write_spectrum(traj.state(-1), traj.times[-1], out / "spectrum_final.txt")


def _picard_checks(traj) -> list:
    rep = traj.picard
    if rep is None:
        return []
    return [
        CheckResult.upper("picard_residual", rep.residual, 1e-10, iterations=rep.iterations),
        CheckResult.upper("picard_contraction", rep.ratio_max_tail, rep.ratio_bound),
    ]


def _e1(spec, out):
    c = spec.solver
    if c.rho0 >= 1.0:
        raise RegimeViolation(f"E1_apriori needs rho0 < 1, got rho0 = {c.rho0:g}")
    traj = simulate(c)
    _write_run(traj, out)
    checks = [check_apriori(traj, c.rho0), check_monotone(traj, c.rho0)] + _picard_checks(traj)
    return traj, checks


def _e2(spec, out):
    c = spec.solver
    traj = simulate(c)
    _write_run(traj, out)
    fr = frak_norms(traj)
    sup_x0 = float(np.max(traj.x_norms(0.0)))
    checks = [
        check_frak(traj, c.rho0),
        CheckResult.lower("frak0_dominates_sup", fr.frak0, sup_x0),
    ] + _picard_checks(traj)
    return traj, checks


def _gevrey_decay_agreement(gevrey: list, decay: CheckResult) -> CheckResult:
    """A passing Gevrey check must come with a fitted slope <= -1/2."""
    if all(r.passed for r in gevrey):
        return CheckResult.upper("gevrey_decay_agreement", decay.measured, -0.5)
    return CheckResult("gevrey_decay_agreement", True, decay.measured, -0.5, 0.0,
                       {"vacuous": True})


def _control_checks(spec, traj) -> list:
    """Fit the same window on the linear-only run from the same data."""
    control = simulate(spec.solver.replace(linear_only=True))
    fit = fit_decay(traj, spec.fit_window)
    ctl = fit_decay(control, spec.fit_window)
    return [
        CheckResult.upper("decay_slope_control", ctl.slope, -0.5),
        CheckResult.upper("decay_vs_control", abs(fit.slope - ctl.slope), CONTROL_SLOPE_TOL,
                          slope=fit.slope, control=ctl.slope),
    ]


def _e3(spec, out):
    c = spec.solver
    traj = simulate(c)
    _write_run(traj, out)
    gevrey = check_gevrey(traj, 0.5, c.rho0)
    decay = check_decay(traj, spec.fit_window)
    checks = gevrey + [decay, _gevrey_decay_agreement(gevrey, decay)]
    checks += _control_checks(spec, traj) + _picard_checks(traj)
    return traj, checks


def _e4(spec, out):
    c = spec.solver
    traj = simulate(c)
    _write_run(traj, out)
    checks = []
    for t in spec.split_times:
        if t > traj.grid.T + 1e-12:
            log.warning("split time %g lies beyond the horizon %g; skipped", t, traj.grid.T)
            continue
        checks += decay_split(traj, spec.delta, spec.lam, t, c.rho0)[2].checks
    checks.append(bootstrap_instance(traj, spec.delta))
    return traj, checks


def _e5(spec, out):
    c = spec.solver
    traj = simulate(c)
    _write_run(traj, out)
    pointwise = [r for r in check_gevrey(traj, 0.5, c.rho0) if r.name == "gevrey_pointwise"]
    checks = [check_decay(traj, spec.fit_window)] + _control_checks(spec, traj)
    checks += [check_monotone(traj, c.rho0)] + pointwise
    return traj, checks


def lemma_suite(seed: int, n_seeds: int = 50, N: int = 6, interp_sigmas=(0.0, 0.5, 1.0),
                powers=(0.25, 0.5, 1.0, 1.5, 2.0)) -> list:
    """Every lemma instance of the E6 suite, in a fixed order."""
    checks = []
    for s in range(seed, seed + n_seeds):
        checks += lemma_product_check(s, N)
    for sigma in DUHAMEL_SIGMAS:
        for s in range(seed, seed + n_seeds):
            checks += lemma_duhamel_check(s, N=N, sigma=sigma)
    profiles = [("gaussian", gaussian_profile()), (f"random{seed}", random_smooth_profile(seed))]
    for label, amp in profiles:
        prof = SampledProfile(amp)
        for sigma in interp_sigmas:
            checks += lemma_interpolation_check(prof, sigma, name=f"interpolation_{label}")
    for p in powers:
        checks.append(power_triangle_check(p))
    return checks


def _e6(spec, out):
    checks = lemma_suite(spec.seed, spec.lemma_seeds, spec.lemma_N, spec.interp_sigmas, spec.powers)
    return None, checks


_RUNNERS = {"E1_apriori": _e1, "E2_frak": _e2, "E3_gevrey": _e3, "E4_split": _e4,
            "E5_decay": _e5, "E6_lemmas": _e6}


@dataclass
class RunOutcome:
    exit_code: int
    checks: list = field(default_factory=list)
    error: Optional[str] = None


def run_experiment(spec: ExperimentSpec, out_dir, stream=None) -> RunOutcome:
    """Run one experiment into ``out_dir``.

    Exit code 0 iff every check passes, 1 on a failed check, 2 on a runtime error.
    """
    stream = sys.stdout if stream is None else stream
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    traj, checks, error = None, [], None
    try:
        traj, checks = _RUNNERS[spec.name](spec, out)
    except (SQGError, ArithmeticError, ValueError, RuntimeError) as exc:
        step = getattr(exc, "step", None)
        where = f" at step {step}" if step is not None else ""
        error = f"{spec.name}{where}: {type(exc).__name__}: {exc}"
        print(f"error: {error}", file=sys.stderr)
        log.debug("%s", traceback.format_exc())
    if checks:
        write_results(checks, out / "results.csv")
    failed = [r for r in checks if not r.passed]
    code = 2 if error else (1 if failed else 0)
    for r in checks:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} measured={r.measured:.6g} bound={r.bound:.6g}",
              file=stream)
    items = [("format_version", FORMAT_VERSION), ("code_version", __version__)] + spec.echo()
    if traj is not None:
        items += [
            ("final_x0", _fmt(traj.x_norms(0.0)[-1])),
            ("max_dropped_mass", _fmt(np.max(traj.dropped)) if traj.dropped is not None else "nan"),
        ]
        if traj.picard is not None:
            items += [("picard_iterations", traj.picard.iterations),
                      ("picard_residual", _fmt(traj.picard.residual))]
    items += [
        ("checks", len(checks)),
        ("checks_failed", len(failed)),
        ("exit_code", code),
    ]
    if error:
        items.append(("error", error.replace("\n", " ")))
    items.append(("wall_clock", f"{time.perf_counter() - start:.3f}"))
    write_manifest(items, out / "manifest.txt")
    return RunOutcome(code, checks, error)
