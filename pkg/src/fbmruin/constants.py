"""Monte Carlo estimates of Pickands, discrete Pickands and Piterbarg constants.

Write ``W(t) = sqrt(2) B(t) - |t|`` for a two-sided Brownian motion (or
``sqrt(2) B_H(t) - |t|^{2H}`` for fBm).  Each ``exp(W(t))`` has mean one and
is the density of a mean shift, which gives ratio representations with
bounded integrands:

* discrete Pickands ``E[sup exp(W) / (alpha * sum exp(W))]`` over ``alpha Z``
  is bounded by ``1/alpha`` path by path;
* the Pickands constant is the ``alpha -> 0`` limit of the same ratio, taken
  here on a fine mesh of a window of length ``S``;
* for ``E[sup_t exp(W(t) + k(t))]`` over a finite grid, sampling the shift
  location ``s`` with probability proportional to ``exp(d(s))`` and dividing
  by ``sum_t exp(W(t) + d(t))`` gives an unbiased estimator bounded by
  ``sum_t exp(d(t))`` whenever ``k <= d``.

The direct estimator (plain average of the sup) is kept for comparison; its
variance grows without bound with the window for the drifts used here.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng
from ._kernels import log_ratio
from .errors import DomainError, DriftViolation, NotConverged
from .fbm import sample_fbm_block
from .model import DerivedQuantities

MIXTURE = "mixture"
DIRECT = "direct"
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class ConstantEstimate:
    value: float
    std_err: float
    n_paths: int
    horizon_T: float
    grid_step: float
    converged: bool
    kind: str = ""
    method: str = MIXTURE
    #: value at the previous (halved) horizon, same paths
    previous_value: float | None = None
    #: finest minus next-coarser mesh value (mesh-based estimators only)
    mesh_gap: float | None = None
    extrapolated: float | None = None
    config: dict = field(default_factory=dict)

    @property
    def rel_err(self) -> float:
        return self.std_err / self.value if self.value else math.inf


@dataclass(frozen=True)
class ConstantConfig:
    """Truncation/replication settings shared by the grid estimators."""

    T: float = 16.0
    n_paths: int = 100_000
    seed: int = 0
    rel_tol: float = 1e-2
    T_cap: float = 256.0
    n_blocks: int = 16
    threads: int | None = None
    raise_on_failure: bool = True

    def __post_init__(self):
        if self.n_paths < 2:
            raise DomainError("n_paths", "standard error needs at least two paths")
        if not self.T > 0:
            raise DomainError("T", f"T must be > 0, got {self.T!r}")


@dataclass(frozen=True)
class PiterbargDriftSpec:
    """Piecewise-linear ``k(t)``: slope ``slope_neg`` on ``t < 0``, ``slope_pos * t + offset_pos`` on ``t >= 0``."""

    slope_neg: float
    slope_pos: float
    offset_pos: float = 0.0

    def validate(self) -> "PiterbargDriftSpec":
        if not self.slope_pos - 1.0 < 0.0:
            raise DriftViolation(f"slope_pos={self.slope_pos} leaves -|t| + k(t) bounded below on t > 0")
        if not self.slope_neg + 1.0 > 0.0:
            raise DriftViolation(f"slope_neg={self.slope_neg} leaves -|t| + k(t) bounded below on t < 0")
        return self

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0, self.slope_neg * t, self.slope_pos * t + self.offset_pos)

    @classmethod
    def from_quantities(cls, q: DerivedQuantities, shifted: bool = False) -> "PiterbargDriftSpec":
        """``d`` (``shifted=False``) or ``d_delta`` from a two-line model."""
        return cls(q.d_slope_neg, q.d_slope_pos, q.d_delta_offset if shifted else 0.0)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _converged(new, old, se, rel_tol) -> bool:
    return abs(new - old) < max(2.0 * se, rel_tol * abs(new))


# --- two-sided Gaussian walks on a grid -------------------------------------


def _side_increments(step: float, n_side: int, rows: int, seed: int, block: int, chunk: int, side: int,
                     n0: int) -> np.ndarray:
    """Increments of ``sqrt(2) B`` on one side, built level by level.

    Level 0 covers indices ``[0, n0)``, level ``l`` covers ``[n0 2^{l-1}, n0 2^l)``;
    each level has its own stream so longer walks extend shorter ones.
    """
    parts = []
    filled = 0
    level = 0
    while filled < n_side:
        stop = n0 if level == 0 else n0 * 2**level
        width = min(stop, n_side) - filled
        gen = rng.stream(seed, block, chunk, side, level)
        full = stop - filled
        draw = gen.standard_normal((rows, full))
        parts.append(draw[:, :width])
        filled += width
        level += 1
    inc = np.concatenate(parts, axis=1) if parts else np.zeros((rows, 0))
    return inc * math.sqrt(2.0 * step)


def _two_sided_walks(step, n_side, rows, seed, block, chunk, n0):
    """``sqrt(2) B`` on ``-n_side..n_side`` grid steps, columns ordered by time."""
    right = np.cumsum(_side_increments(step, n_side, rows, seed, block, chunk, 0, n0), axis=1)
    left = np.cumsum(_side_increments(step, n_side, rows, seed, block, chunk, 1, n0), axis=1)
    return np.concatenate([left[:, ::-1], np.zeros((rows, 1)), right], axis=1)


def _uniforms(rows, seed, block, chunk):
    return rng.stream(seed, block, chunk, 2, 0).random(rows)


def _grid_pass(step, n0, levels, functional, cfg: ConstantConfig):
    """Evaluate ``functional(walk, times, u, n_side)`` for each window in ``levels``.

    Returns an array ``(len(levels), n_paths)``.
    """
    n_max = n0 * 2 ** max(levels)
    sizes = rng.split(cfg.n_paths, cfg.n_blocks)
    width = 2 * n_max + 1
    rows_per_chunk = max(1, _CHUNK_ELEMENTS // width)
    times_full = step * np.arange(-n_max, n_max + 1)

    def block(b):
        out = np.empty((len(levels), sizes[b]))
        for c, start in enumerate(range(0, sizes[b], rows_per_chunk)):
            rows = min(rows_per_chunk, sizes[b] - start)
            walk = _two_sided_walks(step, n_max, rows, cfg.seed, b, c, n0)
            u = _uniforms(rows, cfg.seed, b, c)
            for i, level in enumerate(levels):
                n_side = n0 * 2**level
                sl = slice(n_max - n_side, n_max + n_side + 1)
                out[i, start:start + rows] = functional(walk[:, sl], times_full[sl], u)
        return out

    return np.concatenate(rng.map_blocks(block, cfg.n_blocks, cfg.threads), axis=1)


def _doubling(step, kind, functional, cfg: ConstantConfig, method, extra=None) -> ConstantEstimate:
    """Truncation diagnostic: double the window from ``cfg.T`` until two windows agree."""
    n0 = int(math.floor(cfg.T / step + 1e-9))
    if n0 == 0:
        # only t = 0 lies in the window: every path gives the same number
        values = _grid_pass(step, 1, [0], lambda w, t, u: functional(w[:, 1:2], t[1:2], u), cfg)[0]
        return ConstantEstimate(float(values[0]), 0.0, cfg.n_paths, cfg.T, step, True, kind, method,
                                config={**asdict(cfg), **(extra or {})})
    prev_vals = _grid_pass(step, n0, [0], functional, cfg)[0]
    prev, _ = _mean_se(prev_vals)
    level = 1
    while True:
        T = n0 * 2**level * step
        vals = _grid_pass(step, n0, [level], functional, cfg)[0]
        mean, se = _mean_se(vals)
        ok = _converged(mean, prev, se, cfg.rel_tol)
        if ok or 2 * T > cfg.T_cap:
            if not ok and cfg.raise_on_failure:
                raise NotConverged(f"{kind}: value moved {prev:.6g} -> {mean:.6g} at T={T:g} (cap {cfg.T_cap:g})")
            return ConstantEstimate(mean, se, cfg.n_paths, T, step, ok, kind, method, previous_value=prev,
                                    config={**asdict(cfg), **(extra or {})})
        prev = mean
        level += 1


def estimate_discrete_pickands(alpha: float, cfg: ConstantConfig | None = None) -> ConstantEstimate:
    """``E[sup exp(W) / (alpha * sum exp(W))]`` over ``alpha Z`` truncated to ``[-T, T]``."""
    cfg = cfg or ConstantConfig()
    if not (math.isfinite(alpha) and alpha > 0):
        raise DomainError("alpha", f"alpha must be > 0, got {alpha!r}")
    log_alpha = math.log(alpha)

    def functional(walk, times, u):
        w = walk - np.abs(times)
        zero = np.zeros(times.size)
        return np.exp(log_ratio(w, zero, zero) - log_alpha)

    return _doubling(alpha, "discrete_pickands", functional, cfg, MIXTURE, {"alpha": alpha})


def _mixture_functional(k_num: PiterbargDriftSpec, k_den: PiterbargDriftSpec):
    def functional(walk, times, u):
        d = k_den(times)
        top = d.max()
        weights = np.exp(d - top)
        log_z = top + math.log(weights.sum())
        cdf = np.cumsum(weights) / weights.sum()
        s_idx = np.minimum(np.searchsorted(cdf, u, side="right"), times.size - 1)
        s = times[s_idx]
        w = walk - np.abs(times[None, :] - s[:, None])
        return np.exp(log_ratio(w, k_num(times), d) + log_z)

    return functional


def _direct_functional(k: PiterbargDriftSpec):
    def functional(walk, times, u):
        return np.exp(np.max(walk - np.abs(times) + k(times), axis=1))

    return functional


def estimate_piterbarg(spec: PiterbargDriftSpec, grid_step: float, cfg: ConstantConfig | None = None,
                       method: str = MIXTURE) -> ConstantEstimate:
    """``lim_T E[sup_{t in [-T, T] on the grid} exp(sqrt(2) B(t) - |t| + k(t))]``."""
    cfg = cfg or ConstantConfig()
    spec.validate()
    if not (math.isfinite(grid_step) and grid_step > 0):
        raise DomainError("grid_step", f"grid step must be > 0, got {grid_step!r}")
    if method == MIXTURE:
        functional = _mixture_functional(spec, spec)
    elif method == DIRECT:
        functional = _direct_functional(spec)
    else:
        raise DomainError("method", f"unknown method {method!r}")
    return _doubling(grid_step, "piterbarg", functional, cfg, method, {"spec": asdict(spec), "gamma": grid_step})


def estimate_piterbarg_pair(upper: PiterbargDriftSpec, lower: PiterbargDriftSpec, grid_step: float,
                            cfg: ConstantConfig | None = None, method: str = MIXTURE):
    """Estimate constants for ``lower <= upper`` on shared paths and a shared sampling measure.

    Every path then satisfies ``estimate(lower) <= estimate(upper)``.  The
    truncation is chosen by the upper drift; returns ``(lower, upper)``.
    """
    cfg = cfg or ConstantConfig()
    upper.validate()
    lower.validate()
    probe = grid_step * np.arange(-int(cfg.T_cap / grid_step), int(cfg.T_cap / grid_step) + 1)
    if np.any(lower(probe) > upper(probe) + 1e-12):
        raise DomainError("lower", "lower drift must not exceed upper drift")
    if method == MIXTURE:
        f_up, f_low = _mixture_functional(upper, upper), _mixture_functional(lower, upper)
    elif method == DIRECT:
        f_up, f_low = _direct_functional(upper), _direct_functional(lower)
    else:
        raise DomainError("method", f"unknown method {method!r}")
    up = _doubling(grid_step, "piterbarg", f_up, cfg, method, {"spec": asdict(upper), "gamma": grid_step})
    n_side = int(round(up.horizon_T / grid_step))
    n0 = int(math.floor(cfg.T / grid_step + 1e-9))
    level = int(round(math.log2(n_side / n0))) if n0 else 0
    vals = _grid_pass(grid_step, max(n0, 1), [level], f_low, cfg)[0]
    mean, se = _mean_se(vals)
    low = ConstantEstimate(mean, se, cfg.n_paths, up.horizon_T, grid_step, up.converged, "piterbarg", method,
                           config={**asdict(cfg), "spec": asdict(lower), "gamma": grid_step, "paired_with": asdict(upper)})
    return low, up


def piterbarg_paths(spec: PiterbargDriftSpec, grid_step: float, T: float, cfg: ConstantConfig,
                    method: str = DIRECT) -> np.ndarray:
    """Per-path values at a fixed truncation (for pathwise comparisons)."""
    n0 = int(math.floor(cfg.T / grid_step + 1e-9))
    level = int(round(math.log2(max(T / grid_step, 1) / max(n0, 1))))
    functional = _direct_functional(spec) if method == DIRECT else _mixture_functional(spec, spec)
    return _grid_pass(grid_step, max(n0, 1), [level], functional, cfg)[0]


# --- continuous Pickands constant on a fine mesh ------------------------------


@dataclass(frozen=True)
class PickandsConfig:
    S: float = 32.0
    n_paths: int = 100_000
    mesh_points: int = 1 << 14
    seed: int = 0
    rel_tol: float = 1e-2
    S_cap: float = 256.0
    n_blocks: int = 16
    threads: int | None = None
    raise_on_failure: bool = True

    def __post_init__(self):
        if self.n_paths < 2:
            raise DomainError("n_paths", "standard error needs at least two paths")
        if self.mesh_points < 1 << 10:
            raise DomainError("mesh_points", "mesh needs at least 2^10 points")
        if not self.S > 0:
            raise DomainError("S", f"S must be > 0, got {self.S!r}")


def _line_paths(n_points: int, h: float, rows: int, gen: np.random.Generator) -> np.ndarray:
    """``B_1(t) = t N`` sampled at ``h, 2h, ..., n h``."""
    return gen.standard_normal(rows)[:, None] * (h * np.arange(1, n_points + 1))[None, :]


def pickands_ratio_paths(two_h: float, S: float, mesh_points: int, n_paths: int, seed: int,
                         n_blocks: int = 16, threads=None) -> np.ndarray:
    """Per-path ``log`` ratios for the window ``S``, the window ``S/2`` and the mesh ``2h``.

    Returns an array of shape ``(3, n_paths)`` holding the ratios themselves.
    """
    H = two_h / 2.0
    h = S / mesh_points
    centre = mesh_points // 2
    t = h * (np.arange(mesh_points + 1) - centre)
    drift = np.abs(t) ** two_h
    quarter = mesh_points // 4
    half_sl = slice(centre - quarter, centre + quarter + 1)
    coarse_sl = slice(centre % 2, None, 2)
    zero_full = np.zeros(t.size)
    sizes = rng.split(n_paths, n_blocks)
    rows_per_chunk = max(1, _CHUNK_ELEMENTS // (2 * (mesh_points + 1)))

    def block(b):
        out = np.empty((3, sizes[b]))
        for c, start in enumerate(range(0, sizes[b], rows_per_chunk)):
            rows = min(rows_per_chunk, sizes[b] - start)
            gen = rng.stream(seed, b, c)
            if H >= 1.0:
                path = _line_paths(mesh_points, h, rows, gen)
            else:
                path = sample_fbm_block(H, mesh_points, h, rows, gen)
            full = np.concatenate([np.zeros((rows, 1)), path], axis=1)
            w = math.sqrt(2.0) * (full - full[:, centre:centre + 1]) - drift
            out[0, start:start + rows] = np.exp(log_ratio(w, zero_full, zero_full) - math.log(h))
            wh = np.ascontiguousarray(w[:, half_sl])
            z = np.zeros(wh.shape[1])
            out[1, start:start + rows] = np.exp(log_ratio(wh, z, z) - math.log(h))
            wc = np.ascontiguousarray(w[:, coarse_sl])
            z = np.zeros(wc.shape[1])
            out[2, start:start + rows] = np.exp(log_ratio(wc, z, z) - math.log(2 * h))
        return out

    return np.concatenate(rng.map_blocks(block, n_blocks, threads), axis=1)


def estimate_pickands(two_h: float, cfg: PickandsConfig | None = None) -> ConstantEstimate:
    """Pickands constant for ``2H`` in ``(0, 2]`` from the sup/integral ratio on a fine mesh.

    The window of length ``S`` is centred at the origin and doubled (with the
    mesh width held fixed) until halving it changes the estimate by less than
    ``max(2 se, rel_tol * value)``.  The reported value is the raw finest-mesh
    value; ``mesh_gap`` is its distance to the same paths read on a mesh twice
    as coarse, and ``extrapolated`` a Richardson value of order ``H`` that is
    reported but never used downstream.
    """
    cfg = cfg or PickandsConfig()
    if not (0.0 < two_h <= 2.0):
        raise DomainError("two_h", f"2H must lie in (0, 2], got {two_h!r}")
    S, mesh = cfg.S, cfg.mesh_points
    while True:
        r = pickands_ratio_paths(two_h, S, mesh, cfg.n_paths, cfg.seed, cfg.n_blocks, cfg.threads)
        value, se = _mean_se(r[0])
        half, _ = _mean_se(r[1])
        coarse, _ = _mean_se(r[2])
        ok = _converged(value, half, se, cfg.rel_tol)
        if ok or 2 * S > cfg.S_cap:
            break
        S, mesh = 2 * S, 2 * mesh
    if not ok and cfg.raise_on_failure:
        raise NotConverged(f"pickands: window S={S:g} still moves the estimate ({half:.6g} -> {value:.6g})")
    H = two_h / 2.0
    gap = value - coarse
    return ConstantEstimate(
        value, se, cfg.n_paths, S, S / mesh, ok, "pickands", MIXTURE,
        previous_value=half, mesh_gap=gap, extrapolated=value + gap / (2.0**H - 1.0),
        config={**asdict(cfg), "two_h": two_h, "S_used": S, "mesh_points_used": mesh},
    )


def discrete_pickands_reference(alpha: float, terms: int = 2_000_000) -> float:
    """Series ``exp(-2 sum_k Phi_bar(sqrt(k alpha / 2)) / k) / alpha`` for the Brownian discrete constant.

    Independent closed form used only to cross-check the simulation.
    """
    from scipy.special import ndtr

    k = np.arange(1, terms + 1, dtype=float)
    return float(np.exp(-2.0 * np.sum(ndtr(-np.sqrt(k * alpha / 2.0)) / k)) / alpha)


def random_line_pickands_quadrature(S: float, mesh_points: int) -> float:
    """Expectation of the ``2H = 2`` mesh ratio over ``N ~ N(0, 1)`` by quadrature.

    For ``B_1(t) = t N`` the ratio ``max exp(W) / (h sum exp(W))`` depends on
    ``N`` only, so its mean is a one-dimensional integral.
    """
    from scipy import integrate
    from scipy.special import logsumexp

    h = S / mesh_points
    t = h * (np.arange(mesh_points + 1) - mesh_points // 2)

    def ratio(n):
        w = math.sqrt(2.0) * n * t - t * t
        return math.exp(w.max() - logsumexp(w) - math.log(h))

    dens = lambda n: ratio(n) * math.exp(-0.5 * n * n) / math.sqrt(2 * math.pi)
    val, _ = integrate.quad(dens, -12.0, 12.0, limit=400, points=[0.0], epsabs=1e-8, epsrel=1e-6)
    return float(val)
