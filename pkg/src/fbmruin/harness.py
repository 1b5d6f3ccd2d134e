"""Experiments that set asymptotic formulas against simulation."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .asymptotics import (
    PROOF_CONSISTENT,
    AsymptoteResult,
    ConstantInputs,
    evaluation_floor,
    lower_envelope_factor,
    two_dim_asymptote,
)
from .errors import DomainError, Unreachable
from .mc import MCConfig, RuinEstimate, simulate_two_dim
from .model import Case, ModelParams, classify, derive

BELOW, INSIDE, ABOVE = "below", "inside", "above"
CSV_HEADER = ("u", "asymptote_lo", "asymptote_hi", "mc", "mc_ci", "ratio_or_verdict", "method", "runtime_s")


@dataclass(frozen=True)
class RatioRow:
    u: float
    asymptote_lo: float
    asymptote_hi: float
    mc: float
    mc_ci: float
    method: str
    runtime_s: float
    ratio: float | None = None
    #: standard error of ``ratio`` (simulation and constant uncertainty)
    ratio_se: float | None = None
    verdict: str | None = None

    @property
    def ratio_or_verdict(self):
        return self.verdict if self.verdict is not None else self.ratio

    def csv_fields(self) -> tuple:
        return (self.u, self.asymptote_lo, self.asymptote_hi, self.mc, self.mc_ci,
                self.ratio_or_verdict, self.method, self.runtime_s)


@dataclass(frozen=True)
class TrendFit:
    """Weighted least-squares slope of ``log ratio`` against ``u``."""

    slope: float
    ci_half_width: float

    @property
    def contains_zero(self) -> bool:
        return abs(self.slope) <= self.ci_half_width


@dataclass(frozen=True)
class Inclusion:
    lower: float
    upper: float
    lower_widened: float
    upper_widened: float
    mc: RuinEstimate
    verdict: str


def _check_floor(params: ModelParams, u: float):
    floor = evaluation_floor(params)
    if u < floor:
        raise DomainError("u", f"u={u:g} is below the evaluation floor {floor:.6g}")


def widened_bracket(res: AsymptoteResult, k: ConstantInputs) -> tuple[float, float]:
    """Stretch the bracket by twice the relative standard error of its constants."""
    lo_rel = k.rel_se(res.lower_constant) if res.lower_constant else 0.0
    hi_rel = k.rel_se(res.upper_constant) if res.upper_constant else 0.0
    return res.lower * max(0.0, 1.0 - 2.0 * lo_rel), res.upper * (1.0 + 2.0 * hi_rel)


def verdict(lo: float, hi: float, est: RuinEstimate) -> str:
    a, b = est.interval
    if b < lo:
        return BELOW
    if a > hi:
        return ABOVE
    return INSIDE


def ratio_table(params: ModelParams, u_grid, k: ConstantInputs | None = None, cfg: MCConfig | None = None,
                exponent_convention: str = PROOF_CONSISTENT, enforce_floor: bool = True) -> list[RatioRow]:
    """Asymptote and simulation side by side for each ``u`` in ``u_grid``.

    Point asymptotes give ``ratio = mc / asymptote``; brackets give a
    three-valued verdict against the widened bracket.  With
    ``enforce_floor=False`` levels below the evaluation floor are allowed.
    """
    k = k or ConstantInputs()
    cfg = cfg or MCConfig()
    rows = []
    for u in u_grid:
        if enforce_floor:
            _check_floor(params, u)
        t0 = time.perf_counter()
        res = two_dim_asymptote(params, u, k, exponent_convention)
        est = simulate_two_dim(params, u, cfg)
        runtime = time.perf_counter() - t0
        if res.kind == "point":
            ratio = est.p_hat / res.value
            const_rel = k.rel_se(res.lower_constant) if res.lower_constant else 0.0
            mc_rel = est.std_error / est.p_hat if est.p_hat > 0 else math.inf
            rows.append(RatioRow(u, res.value, res.value, est.p_hat, est.ci_half_width, est.method, runtime,
                                 ratio=ratio, ratio_se=ratio * math.hypot(mc_rel, const_rel)))
        else:
            lo, hi = widened_bracket(res, k)
            rows.append(RatioRow(u, res.lower, res.upper, est.p_hat, est.ci_half_width, est.method, runtime,
                                 verdict=verdict(lo, hi, est)))
    return rows


def trend_slope(rows: list[RatioRow], level: float = 0.95) -> TrendFit:
    """Slope of ``log(ratio)`` versus ``u`` with a ``level`` confidence half-width.

    Weights come from the per-row ratio standard errors, taken as known, so
    the interval uses the normal quantile.
    """
    pts = [(r.u, r.ratio, r.ratio_se) for r in rows if r.ratio is not None and r.ratio > 0]
    if len(pts) < 2:
        raise DomainError("rows", "trend needs at least two ratio rows")
    u = np.array([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    sd = np.array([p[2] / p[1] for p in pts])
    w = 1.0 / sd**2
    ubar = np.sum(w * u) / np.sum(w)
    sxx = np.sum(w * (u - ubar) ** 2)
    slope = float(np.sum(w * (u - ubar) * y) / sxx)
    z = stats.norm.ppf(0.5 + level / 2.0)
    return TrendFit(slope, float(z / math.sqrt(sxx)))


def bounds_inclusion(params: ModelParams, u: float, k: ConstantInputs | None = None, cfg: MCConfig | None = None,
                     exponent_convention: str = PROOF_CONSISTENT, estimate: RuinEstimate | None = None) -> Inclusion:
    """Place a simulated probability relative to the two-sided bounds.

    Requires ``CaseTwoInterior`` with ``H <= 1/2``.  A precomputed
    ``estimate`` may be passed to reuse a simulation.
    """
    cls = classify(params)
    if cls.case is not Case.CASE_TWO_INTERIOR or params.H > 0.5 + 1e-12:
        raise DomainError("params", f"bounds apply to CaseTwoInterior with H <= 1/2, got {cls.tag}, H={params.H}")
    _check_floor(params, u)
    k = k or ConstantInputs()
    res = two_dim_asymptote(params, u, k, exponent_convention)
    est = estimate if estimate is not None else simulate_two_dim(params, u, cfg or MCConfig())
    lo, hi = widened_bracket(res, k)
    return Inclusion(res.lower, res.upper, lo, hi, est, verdict(lo, hi, est))


@dataclass(frozen=True)
class OscillationReport:
    """Simulation along levels with ``t*`` on and off the rescaled grid.

    ``ratio_*`` are simulated probabilities divided by the upper bound
    ``Phi_bar(D_H u^{1-H})`` at the same level.
    """

    u_on_grid: list = field(default_factory=list)
    u_off_grid: list = field(default_factory=list)
    ratio_on: list = field(default_factory=list)
    ratio_on_se: list = field(default_factory=list)
    ratio_off: list = field(default_factory=list)
    ratio_off_se: list = field(default_factory=list)
    predicted_gap: list = field(default_factory=list)
    observed_gap: list = field(default_factory=list)
    pair_significant: list = field(default_factory=list)
    #: mean over pairs of ``log(observed gap) - log(predicted gap)``
    separation: float = float("nan")
    exponent_convention: str = PROOF_CONSISTENT
    resolved: bool = True
    flags: tuple = ()

    @property
    def longest_significant_run(self) -> int:
        best = run = 0
        for ok in self.pair_significant:
            run = run + 1 if ok else 0
            best = max(best, run)
        return best

    def gap_within(self, factor: float) -> list[bool]:
        return [1.0 / factor <= o / p <= factor for o, p in zip(self.observed_gap, self.predicted_gap)]


def oscillation_levels(params: ModelParams, n_levels: int, u_target: float = 10.0):
    """Paired levels ``(u_n, v_n)`` around ``u_target``.

    ``u_n = n delta / t*`` puts ``u_n t*`` on the grid; ``v_n = (n delta - theta) / t*``
    with ``theta = -delta w2' / (w1' - w2')`` puts the grid point
    ``u t* + theta`` at the optimal offset from the kink.
    """
    q = derive(params)
    delta = params.delta
    theta = -delta * q.w2p / (q.w1p - q.w2p)
    centre = round(u_target * q.t_star / delta)
    n_start = max(1, centre - (n_levels - 1) // 2)
    ns = range(n_start, n_start + n_levels)
    on = [n * delta / q.t_star for n in ns]
    off = [(n * delta - theta) / q.t_star for n in ns]
    return on, off


def oscillation_experiment(params: ModelParams, n_levels: int, cfg: MCConfig | None = None,
                           u_target: float = 10.0, exponent_convention: str = PROOF_CONSISTENT,
                           confidence: float = 0.95, max_rel_se: float = 0.25) -> OscillationReport:
    """Compare on-grid and off-grid levels for ``H < 1/2`` in ``CaseTwoInterior``.

    A pair is significant when the on-grid ratio exceeds the off-grid ratio
    by a one-sided z-test at ``confidence``.  Estimates whose relative
    standard error exceeds ``max_rel_se`` mark the report unresolved.

    Raises
    ------
    Unreachable
        When a level produces no weighted hits at all.
    """
    cls = classify(params)
    if cls.case is not Case.CASE_TWO_INTERIOR or not params.H < 0.5:
        raise DomainError("params", f"oscillation needs CaseTwoInterior with H < 1/2, got {cls.tag}, H={params.H}")
    if n_levels <= 0:
        return OscillationReport(exponent_convention=exponent_convention)
    cfg = cfg or MCConfig()
    on, off = oscillation_levels(params, n_levels, u_target)
    z = stats.norm.ppf(confidence)

    def ratio(u):
        est = simulate_two_dim(params, u, cfg)
        if est.p_hat <= 0:
            raise Unreachable(f"no hits at u={u:g} with {cfg.n_paths} paths")
        upper = two_dim_asymptote(params, u, exponent_convention=exponent_convention).upper
        return est.p_hat / upper, est.std_error / upper, est.std_error / est.p_hat

    r_on, s_on, r_off, s_off, pred, obs, sig = [], [], [], [], [], [], []
    resolved = True
    for u_n, v_n in zip(on, off):
        a, sa, rel_a = ratio(u_n)
        b, sb, rel_b = ratio(v_n)
        resolved &= max(rel_a, rel_b) <= max_rel_se
        r_on.append(a), s_on.append(sa), r_off.append(b), s_off.append(sb)
        obs.append(b / a)
        pred.append(lower_envelope_factor(params, v_n, exponent_convention))
        sig.append(bool((a - b) / math.hypot(sa, sb) > z))
    separation = float(np.mean(np.log(obs) - np.log(pred)))
    flags = () if resolved else ("unresolved separation",)
    return OscillationReport(on, off, r_on, s_on, r_off, s_off, pred, obs, sig, separation,
                             exponent_convention, resolved, flags)
