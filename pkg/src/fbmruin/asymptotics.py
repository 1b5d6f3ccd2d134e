"""Closed-form asymptotic approximations for grid ruin probabilities.

All expressions are evaluated on the log scale first: at the levels of
interest the normal tail underflows double precision long before the
approximations stop being meaningful.  ``AsymptoteResult`` carries both the
plain and the log values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, MissingConstant, Unsupported
from .model import (
    Case,
    ModelParams,
    OneDimParams,
    classify,
    derive,
    one_dim_line,
    validate,
)

PROOF_CONSISTENT = "proof_consistent"
STATEMENT_LITERAL = "statement_literal"
EXPONENT_CONVENTIONS = (PROOF_CONSISTENT, STATEMENT_LITERAL)

#: asymptotes are only compared with simulation once the normal-tail argument reaches this
FLOOR_ARGUMENT = 3.0

_SQRT2 = math.sqrt(2.0)


def survival(x):
    """Standard normal survival function ``1 - Phi(x)`` via ``erfc``."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / _SQRT2)
    return out if out.ndim else float(out)


def log_survival(x):
    """``log(1 - Phi(x))``, finite far beyond the underflow point of :func:`survival`."""
    out = special.log_ndtr(-np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def _is_half(H: float) -> bool:
    return abs(H - 0.5) < 1e-12


@dataclass(frozen=True)
class ConstantInputs:
    """Externally estimated constants with optional standard errors.

    ``discrete_alpha`` and ``piterbarg_gamma`` record which grid step an
    estimate belongs to; when set, a mismatch with the step a formula needs is
    treated as a missing constant rather than silently reused.
    """

    pickands_2h: float | None = None
    discrete_pickands: float | None = None
    piterbarg_lower: float | None = None
    piterbarg_upper: float | None = None
    pickands_2h_se: float = 0.0
    discrete_pickands_se: float = 0.0
    piterbarg_lower_se: float = 0.0
    piterbarg_upper_se: float = 0.0
    pickands_twoh: float | None = None
    discrete_alpha: float | None = None
    piterbarg_gamma: float | None = None

    def __post_init__(self):
        for name in ("pickands_2h", "discrete_pickands", "piterbarg_lower", "piterbarg_upper"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value > 0):
                raise DomainError(name, f"{name} must be finite and > 0, got {value!r}")

    def need(self, name: str, at: float | None = None, key: str | None = None) -> float:
        value = getattr(self, name)
        if value is None:
            raise MissingConstant(f"{name} is required for this regime")
        if at is not None and key is not None:
            recorded = getattr(self, key)
            if recorded is not None and not math.isclose(recorded, at, rel_tol=1e-9):
                raise MissingConstant(f"{name} was estimated at {key}={recorded}, formula needs {at}")
        return value

    def rel_se(self, name: str) -> float:
        value = getattr(self, name)
        if not value:
            return 0.0
        return getattr(self, name + "_se") / value


@dataclass(frozen=True)
class AsymptoteResult:
    kind: str
    log_lower: float
    log_upper: float
    branch: str
    exponent_convention: str = PROOF_CONSISTENT
    flags: tuple = field(default_factory=tuple)
    #: names of the constants that scale the lower and upper end
    lower_constant: str | None = None
    upper_constant: str | None = None

    @property
    def log_value(self) -> float:
        if self.kind != "point":
            raise AttributeError("bracket results have no single value")
        return self.log_lower

    @property
    def value(self) -> float:
        return math.exp(self.log_value)

    @property
    def lower(self) -> float:
        return math.exp(self.log_lower)

    @property
    def upper(self) -> float:
        return math.exp(self.log_upper)

    def scaled(self, factor: float, note: str) -> "AsymptoteResult":
        shift = math.log(factor)
        return AsymptoteResult(
            self.kind,
            self.log_lower + shift,
            self.log_upper + shift,
            f"{note}; {self.branch}",
            self.exponent_convention,
            self.flags,
            self.lower_constant,
            self.upper_constant,
        )


def _point(log_value, branch, constant=None, **kw) -> AsymptoteResult:
    return AsymptoteResult("point", log_value, log_value, branch, lower_constant=constant,
                           upper_constant=constant, **kw)


def one_dim_log_prefactor(p: OneDimParams, u: float) -> float:
    """Log of the ``H < 1/2`` polynomial prefactor at level ``q*u``."""
    H, c = p.H, p.c
    level = p.q * u
    return (
        0.5 * math.log(2 * math.pi)
        + (H + 0.5) * math.log(H)
        + H * math.log(level)
        - math.log(p.delta)
        - (H + 1) * math.log(c)
        - (H + 0.5) * math.log(1 - H)
    )


def one_dim_asymptote(p: OneDimParams, u: float, k: ConstantInputs | None = None) -> AsymptoteResult:
    """Large-``u`` approximation of ``P(exists t in G(delta): B_H(t) - c t > q u)``."""
    if not u > 0:
        raise DomainError("u", f"u must be > 0, got {u!r}")
    if not p.delta > 0:
        raise DomainError("delta", "the grid asymptote needs delta > 0")
    k = k or ConstantInputs()
    H, c = p.H, p.c
    level = p.q * u
    x = p.c_big * level ** (1.0 - H)
    if _is_half(H):
        alpha = 2.0 * c * c * p.delta
        const = k.need("discrete_pickands", alpha, "discrete_alpha")
        return _point(math.log(const) - 2.0 * c * level, f"one-line H=1/2 (alpha={alpha:g})",
                      "discrete_pickands")
    if H > 0.5:
        const = k.need("pickands_2h", 2 * H, "pickands_twoh")
        log_v = (
            math.log(const)
            + (0.5 - 0.5 / H) * math.log(2.0)
            + 0.5 * math.log(math.pi)
            - 0.5 * math.log(H)
            - 0.5 * math.log(1.0 - H)
            + (1.0 / H - 1.0) * math.log(x)
            + log_survival(x)
        )
        return _point(log_v, "one-line H>1/2", "pickands_2h")
    return _point(one_dim_log_prefactor(p, u) + log_survival(x), "one-line H<1/2")


def two_dim_asymptote(
    params: ModelParams,
    u: float,
    k: ConstantInputs | None = None,
    exponent_convention: str = PROOF_CONSISTENT,
) -> AsymptoteResult:
    """Approximation (or two-sided bounds) for the simultaneous grid ruin probability."""
    validate(params)
    if exponent_convention not in EXPONENT_CONVENTIONS:
        raise ValueError(f"unknown exponent convention {exponent_convention!r}")
    if not params.delta > 0:
        raise DomainError("delta", "the grid asymptote needs delta > 0")
    if not u > 0:
        raise DomainError("u", f"u must be > 0, got {u!r}")
    k = k or ConstantInputs()
    cls = classify(params)
    if cls.case in (Case.DEGENERATE_ONE_LINE, Case.CASE_ONE_EXTERIOR):
        res = one_dim_asymptote(one_dim_line(params, cls.index), u, k)
        return res.scaled(1.0, cls.tag)
    if cls.case is Case.CASE_THREE_BOUNDARY:
        res = one_dim_asymptote(one_dim_line(params, cls.index), u, k)
        return res.scaled(0.5, cls.tag)

    q = derive(params)
    H = params.H
    log_tail = log_survival(q.d_h * u ** (1.0 - H))
    if H > 0.5 and not _is_half(H):
        return _point(log_tail, "CaseTwoInterior H>1/2")
    if _is_half(H):
        gamma = q.gamma
        lo = k.need("piterbarg_lower", gamma, "piterbarg_gamma")
        hi = k.need("piterbarg_upper", gamma, "piterbarg_gamma")
        return AsymptoteResult(
            "bracket",
            math.log(lo) + log_tail,
            q.log_big_a + math.log(hi) + log_tail,
            "CaseTwoInterior H=1/2",
            lower_constant="piterbarg_lower",
            upper_constant="piterbarg_upper",
        )
    expo = 1.0 - 2.0 * H if exponent_convention == PROOF_CONSISTENT else 1.0 - H
    return AsymptoteResult(
        "bracket",
        math.log(2.0) - q.big_b * u**expo + log_tail,
        log_tail,
        "CaseTwoInterior H<1/2",
        exponent_convention=exponent_convention,
    )


def lower_envelope_factor(params: ModelParams, u: float, exponent_convention=PROOF_CONSISTENT) -> float:
    """``2 exp(-B u^e)``: ratio of the lower to the upper ``H < 1/2`` bound."""
    q = derive(params)
    H = params.H
    expo = 1.0 - 2.0 * H if exponent_convention == PROOF_CONSISTENT else 1.0 - H
    return 2.0 * math.exp(-q.big_b * u**expo)


def lexicographic_index(params: ModelParams) -> int:
    """1 if ``(q1, c1) >= (q2, c2)`` in dictionary order, else 2."""
    return 1 if (params.q1, params.c1) >= (params.q2, params.c2) else 2


def finite_horizon(params: ModelParams, T: float, u: float, k: ConstantInputs | None = None) -> AsymptoteResult:
    """Ruin before ``T`` in continuous time; exact for Brownian motion."""
    validate(params)
    if not T > 0:
        raise DomainError("T", f"T must be > 0, got {T!r}")
    if u < 0:
        raise DomainError("u", f"u must be >= 0, got {u!r}")
    k = k or ConstantInputs()
    H = params.H
    if _is_half(H):
        i = lexicographic_index(params)
        c, q = params.line(i)
        rt = math.sqrt(T)
        first = log_survival(u * q / rt + c * rt)
        second = -2.0 * c * q * u + log_survival(u * q / rt - c * rt)
        return _point(np.logaddexp(first, second), f"finite horizon H=1/2 exact (line {i})")
    lam = max(params.q1 * u + params.c1 * T, params.q2 * u + params.c2 * T) / T**H
    if H > 0.5:
        return _point(log_survival(lam), "finite horizon H>1/2")
    const = k.need("pickands_2h", 2 * H, "pickands_twoh")
    log_v = (
        math.log(const)
        + (1.0 - 2.0 * H) / H * math.log(lam)
        + (1.0 / (2.0 * H)) * math.log(0.5)
        - math.log(H)
        + log_survival(lam)
    )
    return _point(log_v, "finite horizon H<1/2", "pickands_2h")


def bm_exact_infinite(c: float, x: float) -> float:
    """``P(sup_t B(t) - c t > x) = exp(-2 c x)`` for Brownian motion."""
    if not c > 0:
        raise DomainError("c", f"c must be > 0, got {c!r}")
    if x < 0:
        raise DomainError("x", f"x must be >= 0, got {x!r}")
    return math.exp(-2.0 * c * x)


def continuous_reference(params: ModelParams, u: float, k: ConstantInputs | None = None) -> AsymptoteResult:
    """Continuous-time counterpart where it coincides with the grid asymptote.

    For ``H = 1/2`` the grid form is returned with a flag: only the constant
    differs in continuous time and those constants are not computed here.
    """
    validate(params)
    H = params.H
    if H < 0.5 and not _is_half(H):
        raise Unsupported("for H < 1/2 the grid asymptote is of smaller order than the continuous one")
    discrete = two_dim_asymptote(params, u, k)
    if _is_half(H):
        return AsymptoteResult(
            discrete.kind, discrete.log_lower, discrete.log_upper,
            f"continuous reference; {discrete.branch}", discrete.exponent_convention,
            ("continuous-constant differs",), discrete.lower_constant, discrete.upper_constant,
        )
    return AsymptoteResult(
        discrete.kind, discrete.log_lower, discrete.log_upper,
        f"continuous reference (coincides); {discrete.branch}", discrete.exponent_convention,
        (), discrete.lower_constant, discrete.upper_constant,
    )


def tail_argument(params: ModelParams, u: float) -> float:
    """Argument of the normal tail in the applicable asymptote."""
    cls = classify(params)
    H = params.H
    if cls.case is Case.CASE_TWO_INTERIOR:
        return derive(params).d_h * u ** (1.0 - H)
    p = one_dim_line(params, cls.index)
    return p.c_big * (p.q * u) ** (1.0 - H)


def evaluation_floor(params: ModelParams) -> float:
    """Smallest ``u`` at which the tail argument reaches ``FLOOR_ARGUMENT``."""
    cls = classify(params)
    H = params.H
    if cls.case is Case.CASE_TWO_INTERIOR:
        scale = derive(params).d_h
    else:
        p = one_dim_line(params, cls.index)
        scale = p.c_big * p.q ** (1.0 - H)
    return (FLOOR_ARGUMENT / scale) ** (1.0 / (1.0 - H))
