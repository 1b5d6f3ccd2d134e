"""Monte Carlo estimation of grid ruin probabilities.

Paths are exact fBm samples on ``G(delta) = {delta, 2 delta, ...}`` up to a
finite horizon.  The simultaneous ruin event is a single crossing of the
upper envelope ``max(q1 u + c1 t, q2 u + c2 t)``.  Several level sets can be
evaluated on the same paths, which is how the grid-coupling and dominance
checks get exact pathwise comparisons.

The tilted estimator shifts the path by ``a * Cov(B_H(t), B_H(tau))`` so that
its mean meets the boundary at the anchor ``tau``; the likelihood ratio
``exp(-a B_H(tau) - a^2 Var B_H(tau) / 2)`` depends on one coordinate only.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng
from ._kernels import crossing_scan
from .errors import DomainError, HorizonUnstable, WeightOverflow
from .fbm import fbm_covariance, sample_fgn_block
from .model import Case, ModelParams, classify, canonical, critical_times, validate

CRUDE = "crude"
TILT = "mean_shift_tilt"
METHODS = (CRUDE, TILT)

LOCALIZED = "localized"
EXPAND = "expand_until_stable"
FIXED = "fixed"

MIN_POINTS = 8
#: doubles materialised per sampling chunk
CHUNK_ELEMENTS = 1 << 22
LOG_WEIGHT_LIMIT = 700.0
Z95 = 1.959963984540054


@dataclass(frozen=True)
class HorizonPolicy:
    """How far along the grid paths are simulated.

    ``window`` multiplies the natural time scale ``u * max(t2, t_star)`` (or
    ``u * t_i`` for one line).  ``localized`` starts there and doubles while
    the last doubling still moves the estimate by more than
    ``stability_tol`` (relative); ``fixed`` uses ``T`` as is.
    """

    mode: str = LOCALIZED
    window: float = 3.0
    stability_tol: float = 0.01
    max_doublings: int = 5
    T: float | None = None

    def __post_init__(self):
        if self.mode not in (LOCALIZED, EXPAND, FIXED):
            raise DomainError("mode", f"unknown horizon mode {self.mode!r}")
        if self.window < 1:
            raise DomainError("window", "window multiplier must be >= 1")
        if self.mode == FIXED and not (self.T and self.T > 0):
            raise DomainError("T", "fixed horizon needs T > 0")


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 100_000
    seed: int = 0
    method: str = TILT
    horizon: HorizonPolicy = field(default_factory=HorizonPolicy)
    n_blocks: int = 32
    threads: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError("method", f"unknown method {self.method!r}")
        if self.n_paths < 2:
            raise DomainError("n_paths", "need at least two paths")
        if self.n_blocks < 1 or self.n_blocks > self.n_paths:
            raise DomainError("n_blocks", "need 1 <= n_blocks <= n_paths")


@dataclass(frozen=True)
class RuinEstimate:
    p_hat: float
    ci_half_width: float
    std_error: float
    n_paths: int
    method: str
    horizon_points: int
    horizon_T: float
    horizon_policy: str
    u: float
    delta: float
    runtime_s: float = 0.0
    max_abs_log_weight: float = 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return self.p_hat - self.ci_half_width, self.p_hat + self.ci_half_width


@dataclass(frozen=True)
class _Problem:
    """Internal description: boundary lines, anchor and natural time scale."""

    H: float
    delta: float
    lines: tuple
    anchor: float
    scale: float

    def levels(self, u: float, times: np.ndarray) -> np.ndarray:
        return np.max([q * u + c * times for c, q in self.lines], axis=0)


def _peak_time(c, q, H):
    return H * q / (c * (1.0 - H))


def two_dim_problem(params: ModelParams) -> _Problem:
    validate(params)
    if not params.delta > 0:
        raise DomainError("delta", "grid simulation needs delta > 0")
    cls = classify(params)
    lines = ((params.c1, params.q1), (params.c2, params.q2))
    if cls.case is Case.CASE_TWO_INTERIOR:
        p, _ = canonical(params)
        t1, t2, t_star = critical_times(p.c1, p.q1, p.c2, p.q2, p.H)
        return _Problem(params.H, params.delta, lines, t_star, max(t2, t_star))
    c, q = params.line(cls.index)
    t_i = _peak_time(c, q, params.H)
    if cls.case is Case.DEGENERATE_ONE_LINE:
        return _Problem(params.H, params.delta, lines, t_i, t_i)
    p, _ = canonical(params)
    t1, t2, t_star = critical_times(p.c1, p.q1, p.c2, p.q2, p.H)
    return _Problem(params.H, params.delta, lines, t_i, max(t2, t_star))


def one_dim_problem(c, q, H, delta) -> _Problem:
    if not (c > 0 and q > 0):
        raise DomainError("c" if not c > 0 else "q", "drift and capital must be > 0")
    if not (0 < H < 1):
        raise DomainError("H", f"H must lie in (0, 1), got {H!r}")
    if not delta > 0:
        raise DomainError("delta", "grid simulation needs delta > 0")
    t0 = _peak_time(c, q, H)
    return _Problem(H, delta, ((c, q),), t0, t0)


@dataclass
class _Tilt:
    shift: np.ndarray
    tau_index: int
    a: float
    var_tau: float


def _tilt(problem: _Problem, u: float, n: int) -> _Tilt:
    delta, H = problem.delta, problem.H
    # anchor snapped to the grid from above
    j = math.ceil(u * problem.anchor / delta - 1e-9)
    j = min(max(j, 1), n)
    tau = j * delta
    times = delta * np.arange(1, n + 1)
    var_tau = tau ** (2 * H)
    a = float(problem.levels(u, np.array([tau]))[0]) / var_tau
    shift = a * fbm_covariance(H, times, np.array([tau]))[:, 0]
    return _Tilt(shift, j - 1, a, var_tau)


def _simulate(problem: _Problem, u: float, n: int, level_sets: list, cfg: MCConfig):
    """Run all blocks; return first-crossing indices ``(L, P)`` and log weights ``(P,)``."""
    tilt = _tilt(problem, u, n) if cfg.method == TILT else None
    shift = tilt.shift if tilt else np.zeros(n)
    tau_index = tilt.tau_index if tilt else -1
    sizes = rng.split(cfg.n_paths, cfg.n_blocks)
    rows_per_chunk = max(1, CHUNK_ELEMENTS // n)

    def block(b):
        firsts = [np.empty(sizes[b], dtype=np.int64) for _ in level_sets]
        at_tau = np.zeros(sizes[b])
        for c, start in enumerate(range(0, sizes[b], rows_per_chunk)):
            rows = min(rows_per_chunk, sizes[b] - start)
            inc = sample_fgn_block(problem.H, n, problem.delta, rows, rng.stream(cfg.seed, b, c))
            for k, levels in enumerate(level_sets):
                first, tau_vals = crossing_scan(inc, shift, levels, tau_index if k == 0 else -1)
                firsts[k][start:start + rows] = first
                if k == 0:
                    at_tau[start:start + rows] = tau_vals
        return firsts, at_tau

    results = rng.map_blocks(block, cfg.n_blocks, cfg.threads)
    first = np.stack([np.concatenate([r[0][k] for r in results]) for k in range(len(level_sets))])
    if tilt is None:
        log_w = np.zeros(cfg.n_paths)
    else:
        at_tau = np.concatenate([r[1] for r in results])
        log_w = -tilt.a * at_tau - 0.5 * tilt.a**2 * tilt.var_tau
    return first, log_w, sizes


def _estimate(hit: np.ndarray, weights: np.ndarray, sizes, method: str):
    values = np.where(hit, weights, 0.0)
    p_hat = float(values.mean())
    if method == CRUDE:
        n = values.size
        se = math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)
    else:
        edges = np.cumsum([0] + list(sizes))
        means = np.array([values[edges[b]:edges[b + 1]].mean() for b in range(len(sizes))])
        counts = np.asarray(sizes, dtype=float)
        if len(sizes) > 1:
            # block means weighted by block size reproduce p_hat exactly
            dev = means - p_hat
            var = np.sum(counts**2 * dev**2) / (counts.sum() ** 2) * len(sizes) / (len(sizes) - 1)
            se = math.sqrt(var)
        else:
            se = float(values.std(ddof=1) / math.sqrt(values.size))
    return p_hat, se


def _weights(log_w: np.ndarray) -> np.ndarray:
    peak = float(np.max(np.abs(log_w))) if log_w.size else 0.0
    if peak > LOG_WEIGHT_LIMIT:
        raise WeightOverflow(f"|log weight| reaches {peak:.1f}; tilt too strong for double precision")
    return np.exp(log_w)


def _base_points(problem: _Problem, u: float, policy: HorizonPolicy) -> int:
    if policy.mode == FIXED:
        return max(1, int(math.floor(policy.T / problem.delta + 1e-9)))
    return max(MIN_POINTS, int(math.ceil(policy.window * u * problem.scale / problem.delta)))


def _run(problem: _Problem, u: float, cfg: MCConfig, level_builder):
    """Horizon loop shared by every estimator.

    ``level_builder(times)`` returns the list of level arrays; the first one
    drives the stability check.  Returns ``(first, weights, sizes, n, tag)``.
    """
    if not u > 0:
        raise DomainError("u", f"u must be > 0, got {u!r}")
    policy = cfg.horizon
    base = _base_points(problem, u, policy)
    if policy.mode == FIXED:
        times = problem.delta * np.arange(1, base + 1)
        first, log_w, sizes = _simulate(problem, u, base, level_builder(times), cfg)
        return first, _weights(log_w), sizes, base, FIXED

    for attempt in range(policy.max_doublings):
        n = base * 2 ** (attempt + 1)
        times = problem.delta * np.arange(1, n + 1)
        first, log_w, sizes = _simulate(problem, u, n, level_builder(times), cfg)
        w = _weights(log_w)
        hit = first[0] >= 0
        p_full = float(np.mean(np.where(hit, w, 0.0)))
        p_half = float(np.mean(np.where(hit & (first[0] < n // 2), w, 0.0)))
        if p_full == 0.0 or (p_full - p_half) <= policy.stability_tol * p_full:
            tag = f"{policy.mode}(x{2 ** (attempt + 1)})"
            return first, w, sizes, n, tag
    raise HorizonUnstable(
        f"estimate still moved by {(p_full - p_half) / p_full:.3%} after {policy.max_doublings} doublings"
    )


def _pack(hit, w, sizes, n, tag, problem, u, cfg, t0) -> RuinEstimate:
    p_hat, se = _estimate(hit, w, sizes, cfg.method)
    log_w_peak = float(np.max(np.abs(np.log(w[w > 0])))) if np.any(w > 0) else 0.0
    return RuinEstimate(
        p_hat=p_hat,
        ci_half_width=Z95 * se,
        std_error=se,
        n_paths=cfg.n_paths,
        method=cfg.method,
        horizon_points=n,
        horizon_T=n * problem.delta,
        horizon_policy=tag,
        u=u,
        delta=problem.delta,
        runtime_s=time.perf_counter() - t0,
        max_abs_log_weight=log_w_peak,
    )


def simulate_problem(problem: _Problem, u: float, cfg: MCConfig) -> RuinEstimate:
    t0 = time.perf_counter()
    first, w, sizes, n, tag = _run(problem, u, cfg, lambda times: [problem.levels(u, times)])
    return _pack(first[0] >= 0, w, sizes, n, tag, problem, u, cfg, t0)


def simulate_two_dim(params: ModelParams, u: float, cfg: MCConfig | None = None) -> RuinEstimate:
    """Estimate ``P(exists t in G(delta) up to the horizon: B_H(t) > max_i(q_i u + c_i t))``."""
    return simulate_problem(two_dim_problem(params), u, cfg or MCConfig())


def simulate_one_dim(c: float, q: float, H: float, delta: float, u: float,
                     cfg: MCConfig | None = None) -> RuinEstimate:
    """Estimate ``P(exists t in G(delta): B_H(t) > q u + c t)``."""
    return simulate_problem(one_dim_problem(c, q, H, delta), u, cfg or MCConfig())


@dataclass(frozen=True)
class CoupledComparison:
    fine: RuinEstimate
    coarse: RuinEstimate
    violations: int


def coupled_grid_comparison(params: ModelParams, u: float, cfg: MCConfig | None = None,
                            k: int = 2) -> CoupledComparison:
    """Evaluate grids ``G(delta)`` and ``G(k delta)`` on the same paths.

    The coarse grid is a subset of the fine one, so a coarse crossing without
    a fine crossing (a violation) is impossible.
    """
    if int(k) != k or k < 1:
        raise DomainError("k", "coarsening factor must be a positive integer")
    cfg = cfg or MCConfig()
    problem = two_dim_problem(params)
    t0 = time.perf_counter()

    def builder(times):
        fine = problem.levels(u, times)
        coarse = fine.copy()
        idx = np.arange(1, times.size + 1)
        coarse[idx % k != 0] = np.inf
        return [fine, coarse]

    first, w, sizes, n, tag = _run(problem, u, cfg, builder)
    fine_hit = first[0] >= 0
    coarse_hit = first[1] >= 0
    violations = int(np.sum(coarse_hit & ~fine_hit))
    fine = _pack(fine_hit, w, sizes, n, tag, problem, u, cfg, t0)
    coarse = _pack(coarse_hit, w, sizes, n, tag, problem, u, cfg, t0)
    return CoupledComparison(fine, coarse, violations)


@dataclass(frozen=True)
class DominanceReport:
    two_dim: RuinEstimate
    line1: RuinEstimate
    line2: RuinEstimate
    violations: int
    ratio: float
    dominant_mismatches: int | None = None


def dominance_check(params: ModelParams, u: float, cfg: MCConfig | None = None) -> DominanceReport:
    """Check pathwise that simultaneous ruin implies ruin of each line.

    For non-crossing lines also counts paths where the simultaneous event and
    the dominating line's event disagree (``dominant_mismatches``).
    """
    cfg = cfg or MCConfig()
    problem = two_dim_problem(params)
    t0 = time.perf_counter()

    def builder(times):
        return [
            problem.levels(u, times),
            params.q1 * u + params.c1 * times,
            params.q2 * u + params.c2 * times,
        ]

    first, w, sizes, n, tag = _run(problem, u, cfg, builder)
    both, one, two = (first[i] >= 0 for i in range(3))
    violations = int(np.sum(both & ~(one & two)))
    mismatches = None
    cls = classify(params)
    if cls.case is Case.DEGENERATE_ONE_LINE:
        dom = one if cls.index == 1 else two
        mismatches = int(np.sum(both != dom))
    est = [_pack(h, w, sizes, n, tag, problem, u, cfg, t0) for h in (both, one, two)]
    smaller = min(est[1].p_hat, est[2].p_hat)
    ratio = est[0].p_hat / smaller if smaller > 0 else float("nan")
    return DominanceReport(est[0], est[1], est[2], violations, ratio, mismatches)


def simultaneous_hits(paths: np.ndarray, times: np.ndarray, params: ModelParams, u: float) -> np.ndarray:
    """Direct per-path indicator: both lines exceeded at the same grid time."""
    a = paths > params.q1 * u + params.c1 * times
    b = paths > params.q2 * u + params.c2 * times
    return np.any(a & b, axis=1)
