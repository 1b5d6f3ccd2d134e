"""Problem parameters, case classification and derived scalars.

The two risk processes ruin simultaneously at time ``t`` when
``B_H(t) > max(q1*u + c1*t, q2*u + c2*t)``.  After rescaling time by ``u``
the problem is governed by the two boundary lines ``q_i + c_i*t`` and the
three critical times ``t1``, ``t2`` (variance maximisers of the single-line
problems) and ``t_star`` (the crossing point of the lines).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateInput, DomainError

#: relative tolerance for declaring ``t_star == t_i``
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Drifts ``c_i``, capital coefficients ``q_i``, Hurst index and grid step.

    ``delta == 0`` denotes the continuous-time reference problem.
    """

    c1: float
    q1: float
    c2: float
    q2: float
    H: float
    delta: float = 1.0

    def swapped(self) -> "ModelParams":
        return replace(self, c1=self.c2, q1=self.q2, c2=self.c1, q2=self.q1)

    def line(self, i: int):
        """Return ``(c_i, q_i)``."""
        return (self.c1, self.q1) if i == 1 else (self.c2, self.q2)


def validate(params: ModelParams) -> ModelParams:
    """Check positivity and range constraints, returning ``params`` unchanged.

    Raises
    ------
    DomainError
        Naming the first offending field.
    """
    for name in ("c1", "q1", "c2", "q2"):
        value = getattr(params, name)
        if not (math.isfinite(value) and value > 0):
            raise DomainError(name, f"{name} must be finite and > 0, got {value!r}")
    if not (0.0 < params.H < 1.0):
        raise DomainError("H", f"H must lie in (0, 1), got {params.H!r}")
    if not (math.isfinite(params.delta) and params.delta >= 0):
        raise DomainError("delta", f"delta must be finite and >= 0, got {params.delta!r}")
    return params


class Case(enum.Enum):
    DEGENERATE_ONE_LINE = "DegenerateOneLine"
    CASE_ONE_EXTERIOR = "CaseOneExterior"
    CASE_TWO_INTERIOR = "CaseTwoInterior"
    CASE_THREE_BOUNDARY = "CaseThreeBoundary"


@dataclass(frozen=True)
class CaseClassification:
    """Asymptotic regime with the line index in the caller's original labelling.

    ``swapped`` records that the labels were exchanged internally so that
    ``c1 > c2`` and ``q2 > q1`` hold.
    """

    case: Case
    index: int | None = None
    swapped: bool = False

    @property
    def tag(self) -> str:
        if self.index is None:
            return self.case.value
        return f"{self.case.value}({self.index})"

    def __str__(self) -> str:
        return self.tag


def lines_cross(params: ModelParams) -> bool:
    """True when ``q1 + c1 t`` and ``q2 + c2 t`` meet at some ``t > 0``."""
    return (params.c1 - params.c2) * (params.q2 - params.q1) > 0


def canonical(params: ModelParams) -> tuple[ModelParams, bool]:
    """Relabel so that ``c1 > c2`` and ``q2 > q1``; only valid for crossing lines."""
    if not lines_cross(params):
        raise DegenerateInput("boundary lines do not cross in (0, inf)")
    if params.c1 > params.c2:
        return params, False
    return params.swapped(), True


def dominating_line(params: ModelParams) -> int:
    """Index of the pointwise larger line on ``(0, inf)`` for non-crossing lines.

    Identical lines resolve to 1.
    """
    if params.c1 == params.c2:
        return 1 if params.q1 >= params.q2 else 2
    if params.q1 == params.q2:
        return 1 if params.c1 > params.c2 else 2
    # no crossing: one line is larger in both slope and intercept
    return 1 if params.c1 > params.c2 else 2


def critical_times(c1, q1, c2, q2, H):
    t1 = H * q1 / (c1 * (1.0 - H))
    t2 = H * q2 / (c2 * (1.0 - H))
    t_star = (q2 - q1) / (c1 - c2)
    return t1, t2, t_star


def _tie(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_RTOL * max(abs(a), abs(b))


def classify(params: ModelParams) -> CaseClassification:
    """Select the asymptotic regime.

    Parameters satisfying ``c1 < c2, q1 > q2`` are relabelled internally; the
    returned index always refers to the caller's labels.
    """
    validate(params)
    if not lines_cross(params):
        return CaseClassification(Case.DEGENERATE_ONE_LINE, dominating_line(params))

    canon, swapped = canonical(params)
    t1, t2, t_star = critical_times(canon.c1, canon.q1, canon.c2, canon.q2, canon.H)

    def original(i: int) -> int:
        return 3 - i if swapped else i

    if _tie(t_star, t1):
        return CaseClassification(Case.CASE_THREE_BOUNDARY, original(1), swapped)
    if _tie(t_star, t2):
        return CaseClassification(Case.CASE_THREE_BOUNDARY, original(2), swapped)
    if t_star < t1:
        return CaseClassification(Case.CASE_ONE_EXTERIOR, original(1), swapped)
    if t_star > t2:
        return CaseClassification(Case.CASE_ONE_EXTERIOR, original(2), swapped)
    return CaseClassification(Case.CASE_TWO_INTERIOR, None, swapped)


def w_prime(c: float, q: float, H: float, t: float) -> float:
    """Derivative of ``w(t) = (q + c t)^2 / t^{2H}``."""
    level = q + c * t
    return 2.0 * c * level * t ** (-2.0 * H) - 2.0 * H * level**2 * t ** (-2.0 * H - 1.0)


@dataclass(frozen=True)
class DerivedQuantities:
    """Every scalar the two-line asymptotics consume, in the relabelled frame."""

    t1: float
    t2: float
    t_star: float
    eta: float
    d_h: float
    c_h1: float
    c_h2: float
    gamma: float
    big_a: float
    log_big_a: float
    w1p: float
    w2p: float
    big_b: float
    d_slope_neg: float
    d_slope_pos: float
    d_delta_offset: float
    swapped: bool = False


def c_h(c: float, q: float, H: float) -> float:
    """``c^H q^{1-H} / (H^H (1-H)^{1-H})``."""
    return c**H * q ** (1.0 - H) / (H**H * (1.0 - H) ** (1.0 - H))


def derive(params: ModelParams) -> DerivedQuantities:
    validate(params)
    if not lines_cross(params):
        raise DegenerateInput("derive() needs crossing boundary lines")
    p, swapped = canonical(params)
    c1, q1, c2, q2, H, delta = p.c1, p.q1, p.c2, p.q2, p.H, p.delta
    t1, t2, t_star = critical_times(c1, q1, c2, q2, H)
    eta = (c1 * q2 - q1 * c2) / (c1 - c2)
    cross = c1 * q2 - q1 * c2
    dq = q2 - q1
    log_a = delta * cross * (c1 * q2 + q1 * c2 - 2.0 * c2 * q2) / (2.0 * dq**2)
    w1p = w_prime(c1, q1, H, t_star)
    w2p = w_prime(c2, q2, H, t_star)
    return DerivedQuantities(
        t1=t1,
        t2=t2,
        t_star=t_star,
        eta=eta,
        d_h=(c1 * t_star + q1) / t_star**H,
        c_h1=c_h(c1, q1, H),
        c_h2=c_h(c2, q2, H),
        gamma=delta * cross**2 / (2.0 * dq**2),
        big_a=math.exp(log_a) if log_a < 709.0 else math.inf,
        log_big_a=log_a,
        w1p=w1p,
        w2p=w2p,
        big_b=-delta * w1p * w2p / (2.0 * (w1p - w2p)),
        d_slope_neg=(q2 * c1 + c2 * q1 - 2.0 * q2 * c2) / cross,
        d_slope_pos=(2.0 * c1 * q1 - c1 * q2 - q1 * c2) / cross,
        d_delta_offset=-delta * cross * (c1 - c2) / dq,
        swapped=swapped,
    )


def drift_d(t, quantities: DerivedQuantities, variant: str = "plain"):
    """Piecewise-linear drift ``d(t)`` or its grid-shifted version ``d_delta(t)``.

    ``variant`` is ``"plain"`` or ``"delta_shifted"``; the latter adds the
    constant ``d_delta_offset`` on ``t >= 0`` only.
    """
    if variant not in ("plain", "delta_shifted"):
        raise ValueError(f"unknown variant {variant!r}")
    t = np.asarray(t, dtype=float)
    out = np.where(t < 0, quantities.d_slope_neg * t, quantities.d_slope_pos * t)
    if variant == "delta_shifted":
        out = out + np.where(t >= 0, quantities.d_delta_offset, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class OneDimParams:
    """Single boundary ``q*u + c*t``.

    The one-line result is stated for ``q = 1``; general ``q`` is handled by
    evaluating it at level ``q*u``.
    """

    c: float
    q: float
    H: float
    delta: float = 1.0

    def __post_init__(self):
        for name in ("c", "q"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(name, f"{name} must be finite and > 0, got {value!r}")
        if not (0.0 < self.H < 1.0):
            raise DomainError("H", f"H must lie in (0, 1), got {self.H!r}")
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise DomainError("delta", f"delta must be >= 0, got {self.delta!r}")

    @property
    def t0(self) -> float:
        """Variance maximiser of ``B_H(t) / (1 + c t)``."""
        return self.H / (self.c * (1.0 - self.H))

    @property
    def t_peak(self) -> float:
        """Variance maximiser of ``B_H(t) / (q + c t)``, i.e. ``q * t0``."""
        return self.q * self.t0

    @property
    def c_big(self) -> float:
        return c_h(self.c, 1.0, self.H)

    def f(self, t):
        """``(1 + c t)^2 / t^{2H}``; its minimum sits at ``t0``."""
        return (1.0 + self.c * t) ** 2 / t ** (2.0 * self.H)

    @property
    def f_second_at_t0(self) -> float:
        H, c = self.H, self.c
        return 2.0 * c ** (2 + 2 * H) * (1 - H) ** (2 * H + 1) / H ** (2 * H + 1)


def one_dim_line(params: ModelParams, i: int) -> OneDimParams:
    c, q = params.line(i)
    return OneDimParams(c=c, q=q, H=params.H, delta=params.delta)
