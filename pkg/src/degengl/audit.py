"""Quantitative audits of the density-estimate argument on computed fields.

Sequences are indexed by integer radius R = 0, 1, ..., R_max; the lattice
spacing h is independent of (and usually finer than) the radius step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, HypothesisError, ParameterError
from .grid import Field, Region, ball_mask, energy
from .potential import EnergyParams, Potential, eval_potential, prior_density_criterion
from .profile1d import comparison_profile

logger = logging.getLogger(__name__)

_LEVELS = 64
_TOP_LEVEL = 1.0 - 1e-6
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_LEVELS)
_TREND_LIMIT = -0.5


def _finite(value: float) -> float | None:
    return float(value) if math.isfinite(value) else None


def _power(value: float, exponent: float) -> float:
    """value**exponent with 0**0 taken as 0 (empty sets carry no mass)."""
    if value <= 0.0:
        return 0.0
    return value**exponent


# -- sequences ------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditSequences:
    radii: np.ndarray
    V: np.ndarray
    P: np.ndarray
    n: int
    T: int | None = None
    q: float | None = None
    M: np.ndarray | None = None

    @property
    def gamma(self) -> float | None:
        return None if self.q is None else self.q - 1.0

    @property
    def R_max(self) -> int:
        return int(self.radii[-1])

    def with_mixture(self, T: int, p: float, m: float) -> AuditSequences:
        M = mixture_sequence(self.V, self.P, T, p, m)
        return replace(self, T=int(T), q=p * m / (m - p), M=M)

    def rows(self) -> list[tuple[int, float, float, float | None]]:
        out = []
        for k, R in enumerate(self.radii):
            mixed = None if self.M is None or not math.isfinite(self.M[k]) else float(self.M[k])
            out.append((int(R), float(self.V[k]), float(self.P[k]), mixed))
        return out

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "T": self.T,
            "q": self.q,
            "gamma": self.gamma,
            "radii": [int(r) for r in self.radii],
            "V": [float(v) for v in self.V],
            "P": [float(v) for v in self.P],
            "M": None if self.M is None else [_finite(v) for v in self.M],
        }


def volume_potential_sequences(
    u: Field,
    center,
    R_max: int,
    params: EnergyParams,
    P: Potential,
) -> AuditSequences:
    """V_R = hⁿ·#{B_R ∩ {u >= 0}} and P_R = hⁿ·Σ_{B_R} W(u) for R = 0..R_max."""
    grid = u.grid
    R_max = int(R_max)
    if R_max < 1:
        raise ConfigError(f"invalid R_max={R_max!r}: expected an integer >= 1")
    grid.require_ball(center, R_max)
    shell = np.ceil(grid.distance(center) - 1e-12).astype(int).ravel()
    inside = shell <= R_max
    shell = shell[inside]
    values = u.values.ravel()[inside]
    weights = np.asarray(eval_potential(P, values))
    volume = grid.cell_volume
    V = np.cumsum(np.bincount(shell, weights=(values >= 0.0).astype(float), minlength=R_max + 1)) * volume
    Pm = np.cumsum(np.bincount(shell, weights=weights, minlength=R_max + 1)) * volume
    radii = np.arange(R_max + 1)
    seq = AuditSequences(radii=radii, V=V, P=Pm, n=grid.n)
    logger.debug("sequences to R=%d: V_R=%.6g P_R=%.6g (p=%s, m=%s)", R_max, V[-1], Pm[-1], params.p, params.m)
    return seq


def mixture_sequence(V, P, T: int, p: float, m: float) -> np.ndarray:
    """M_R = Σ_{j=0..T} (P_{R-j} + V_{R-j}·(1+j)^(-q)), q = pm/(m-p); NaN where R < T."""
    if not m > p:
        raise ParameterError(f"m > p required for the mixture sequence, got p={p!r}, m={m!r}")
    T = int(T)
    if T < 0:
        raise ConfigError(f"invalid window T={T!r}: expected T >= 0")
    V = np.asarray(V, dtype=float)
    Pm = np.asarray(P, dtype=float)
    q = p * m / (m - p)
    M = np.full(V.shape, np.nan)
    if len(V) <= T:
        return M
    total = np.zeros(len(V) - T)
    for j in range(T + 1):
        stop = len(V) - j
        total += Pm[T - j : stop] + V[T - j : stop] * (1.0 + j) ** (-q)
    M[T:] = total
    return M


@dataclass(frozen=True)
class WeightSeries:
    q: float
    partial_sums: np.ndarray
    integral_bound: float

    @property
    def total(self) -> float:
        return float(self.partial_sums[-1])

    @property
    def c0(self) -> float:
        return 1.0 / self.total


def weight_series(q: float, T: int) -> WeightSeries:
    """Partial sums of Σ (1+j)^(-q) for j <= T, with the bound 1 + 1/(q-1)."""
    if not q > 1:
        raise ParameterError(f"weight series diverges for q={q!r}: expected q > 1")
    terms = (1.0 + np.arange(int(T) + 1)) ** (-q)
    return WeightSeries(q=float(q), partial_sums=np.cumsum(terms), integral_bound=1.0 + 1.0 / (q - 1.0))


# -- competitor and co-area -----------------------------------------------------------


@dataclass(frozen=True)
class CompetitorSet:
    """v_R(x) = U(|x - c| - R) on B_{R+1} (1 outside) and the contact sets."""

    v: Field
    S: Region
    ball: Region
    center: tuple[float, ...]
    R: float
    T: int
    levels: np.ndarray
    weights: np.ndarray
    level_volumes: np.ndarray
    _u: np.ndarray = field(repr=False, compare=False, default=None)

    def level_region(self, k: int) -> Region:
        """S_{R,h_k} = {x ∈ B_{R+1}: u(x) > h_k > v_R(x)}."""
        h_k = float(self.levels[k])
        return Region(self.v.grid, self.S.mask & (self._u > h_k) & (self.v.values < h_k))


def build_competitor(u: Field, center, R: float, T: int, params: EnergyParams) -> CompetitorSet:
    grid = u.grid
    if int(T) < 1:
        raise ConfigError(f"invalid window T={T!r}: expected T >= 1")
    grid.require_ball(center, R + 1.0)
    dist = grid.distance(center)
    ball = ball_mask(grid, center, R + 1.0)
    profile, _ = comparison_profile(params.p, params.m, dist - R)
    v_values = np.where(ball.mask, profile, 1.0)
    S = ball.mask & (u.values > v_values)

    lower, _ = comparison_profile(params.p, params.m, -float(T))
    half = 0.5 * (_TOP_LEVEL - lower)
    levels = lower + half * (_GL_X + 1.0)
    weights = half * _GL_W
    volume = grid.cell_volume
    counts = [np.count_nonzero(S & (u.values > h_k) & (v_values < h_k)) for h_k in levels]
    return CompetitorSet(
        v=Field(grid, v_values),
        S=Region(grid, S),
        ball=ball,
        center=tuple(float(c) for c in np.atleast_1d(center)),
        R=float(R),
        T=int(T),
        levels=levels,
        weights=weights,
        level_volumes=np.asarray(counts, dtype=float) * volume,
        _u=u.values,
    )


def coarea_functional(
    u: Field,
    comp: CompetitorSet,
    T: int,
    params: EnergyParams,
    P: Potential,
) -> tuple[float, float]:
    """(∫ |S_{R,h}|^((n-1)/n) W(h)^((p-1)/p) dh over the level ladder, J(v_R, S_R))."""
    if int(T) != comp.T:
        raise ConfigError(f"competitor was built with T={comp.T}, not T={T!r}")
    if comp.v.grid != u.grid:
        raise ConfigError("competitor does not belong to this field's grid")
    n = u.grid.n
    exponent = (n - 1) / n
    level_weight = np.asarray(eval_potential(P, comp.levels)) ** ((params.p - 1.0) / params.p)
    sizes = np.array([_power(v, exponent) for v in comp.level_volumes])
    lhs = float(np.sum(comp.weights * sizes * level_weight))
    rhs = energy(comp.v, comp.S, params, P) if comp.S.count else 0.0
    return lhs, rhs


# -- main inequality ------------------------------------------------------------------


@dataclass(frozen=True)
class MainInequalityRecord:
    R: int
    T: int
    lhs: float
    rhs: float
    ratio: float | None
    coarea_lhs: float
    coarea_rhs: float
    inner_energy: float
    inner_scale: float
    annuli: tuple[dict[str, float], ...]

    @property
    def inner_ratio(self) -> float:
        return self.inner_energy / self.inner_scale

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "R": self.R,
            "T": self.T,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "coarea_lhs": self.coarea_lhs,
            "coarea_rhs": self.coarea_rhs,
            "inner_energy": self.inner_energy,
            "inner_scale": self.inner_scale,
            "inner_ratio": self.inner_ratio,
            "annuli": list(self.annuli),
        }


def main_inequality_report(
    u: Field,
    center,
    R: int,
    T: int,
    params: EnergyParams,
    P: Potential,
) -> MainInequalityRecord:
    """(V_{R-T})^((n-1)/n) against J(v_R, S_R), with the inner-ball and per-annulus split."""
    params.require_degenerate()
    R, T = int(R), int(T)
    if R < T + 1:
        raise ParameterError(f"main inequality needs R >= T + 1, got R={R}, T={T}")
    grid = u.grid
    n = grid.n
    seq = volume_potential_sequences(u, center, R + 1, params, P)
    comp = build_competitor(u, center, R, T, params)
    lhs = _power(float(seq.V[R - T]), (n - 1) / n)
    rhs = energy(comp.v, comp.S, params, P) if comp.S.count else 0.0
    coarea_lhs, coarea_rhs = coarea_functional(u, comp, T, params, P)

    dist = grid.distance(center)
    inner = Region(grid, comp.S.mask & (dist <= R - T + 1e-12))
    inner_energy = energy(comp.v, inner, params, P) if inner.count else 0.0
    q = params.q
    annuli = []
    for j in range(T + 1):
        shell = Region(grid, comp.S.mask & (dist > R - j + 1e-12) & (dist <= R + 1 - j + 1e-12))
        annuli.append(
            {
                "j": float(j),
                "competitor": energy(comp.v, shell, params, P) if shell.count else 0.0,
                "budget": float(
                    (seq.P[R + 1 - j] - seq.P[R - j]) + (seq.V[R + 1 - j] - seq.V[R - j]) * (1.0 + j) ** (-q)
                ),
            }
        )
    return MainInequalityRecord(
        R=R,
        T=T,
        lhs=lhs,
        rhs=rhs,
        ratio=rhs / lhs if lhs > 0 else None,
        coarea_lhs=coarea_lhs,
        coarea_rhs=coarea_rhs,
        inner_energy=inner_energy,
        inner_scale=float(R ** (n - 1) * T ** (-params.gamma)),
        annuli=tuple(annuli),
    )


# -- discrete inequality --------------------------------------------------------------


@dataclass(frozen=True)
class ConstantFit:
    """Envelope and log-space least-squares summary of measured ratios."""

    envelope: float
    log_mean: float
    log_residual: float
    samples: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "envelope": _finite(self.envelope),
            "log_mean": _finite(self.log_mean),
            "log_residual": _finite(self.log_residual),
            "samples": self.samples,
        }


def fit_constant(ratios: Sequence[float], *, lower: bool = True) -> ConstantFit:
    r = np.asarray([x for x in ratios if x > 0 and math.isfinite(x)], dtype=float)
    if r.size == 0:
        return ConstantFit(envelope=math.nan, log_mean=math.nan, log_residual=math.nan, samples=0)
    logs = np.log(r)
    return ConstantFit(
        envelope=float(r.min() if lower else r.max()),
        log_mean=float(np.exp(logs.mean())),
        log_residual=float(logs.std()),
        samples=int(r.size),
    )


@dataclass(frozen=True)
class InequalityRow:
    R: int
    bracket: float
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -1e-12 * max(abs(self.rhs), 1.0)


@dataclass(frozen=True)
class InequalityReport:
    n: int
    T: int
    gamma: float
    c1: float
    C0: float
    c1_fitted: bool
    C0_fitted: bool
    C_P: float
    C0_min: float
    c1_fit: ConstantFit
    rows: tuple[InequalityRow, ...]

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    @property
    def min_slack(self) -> float | None:
        return min((row.slack for row in self.rows), default=None)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "T": self.T,
            "gamma": self.gamma,
            "c1": _finite(self.c1),
            "C0": _finite(self.C0),
            "c1_fitted": self.c1_fitted,
            "C0_fitted": self.C0_fitted,
            "C_P": _finite(self.C_P),
            "C0_min": _finite(self.C0_min),
            "c1_fit": self.c1_fit.to_json_dict(),
            "passed": self.passed,
            "min_slack": self.min_slack,
            "rows": [
                {"R": r.R, "bracket": r.bracket, "lhs": r.lhs, "rhs": r.rhs, "slack": r.slack, "passed": r.passed}
                for r in self.rows
            ],
        }


def _require_mixture(seq: AuditSequences) -> tuple[np.ndarray, int, float]:
    if seq.M is None or seq.T is None or seq.q is None:
        raise ConfigError("sequences carry no mixture M_R; call with_mixture(T, p, m) first")
    return seq.M, seq.T, seq.q


def potential_scale(seq: AuditSequences, n: int) -> float:
    """C_P = max over R >= 2 of P_R / R^(n-1)."""
    radii = seq.radii[seq.radii >= 2]
    if radii.size == 0:
        raise ConfigError("potential scale needs radii R >= 2")
    return float(np.max(seq.P[radii] / radii.astype(float) ** (n - 1)))


def fitted_C0(seq: AuditSequences, n: int) -> float:
    """C0 = C_P·(T+1)/T, so that (T+1)·P_R <= C0·T·R^(n-1) on the measured radii."""
    _M, T, _q = _require_mixture(seq)
    if T < 1:
        raise ConfigError(f"fitted C0 needs T >= 1, got T={T}")
    return potential_scale(seq, n) * (T + 1) / T


def _least_passing_C0(M, T: int, n: int, radii: list[int], rhs_values: list[float], c1: float) -> float:
    if T < 1:
        return 0.0
    need = 0.0
    for R, rhs in zip(radii, rhs_values):
        if c1 <= 0:
            allowed = math.inf
        elif n == 1:
            allowed = math.inf if c1 <= rhs else 0.0
        else:
            allowed = (rhs / c1) ** (n / (n - 1))
        need = max(need, (float(M[R - T]) - allowed) / (T * float(R) ** (n - 1)))
    return need


def discrete_inequality_check(
    seq: AuditSequences,
    n: int,
    c1: float | None = None,
    C0: float | None = None,
) -> InequalityReport:
    """c1·[(M_{R-T} - C0·T·R^(n-1))⁺]^((n-1)/n) <= R^(n-1)·T^(-γ) + M_{R+1} - M_R.

    Rows cover every R with R - T >= T and R + 1 <= R_max. Constants left as
    None are fitted: C0 from the potential scale C_P(T+1)/T, c1 as the largest
    value passing every row with a positive bracket. The report also carries
    C0_min, the smallest C0 under which every row passes with the c1 used.
    """
    M, T, q = _require_mixture(seq)
    gamma = q - 1.0
    exponent = (n - 1) / n
    C_P = potential_scale(seq, n)
    C0_value = fitted_C0(seq, n) if C0 is None else float(C0)
    candidates = list(range(max(2 * T, 1), seq.R_max))

    brackets, rhs_values = [], []
    for R in candidates:
        bracket = max(0.0, float(M[R - T]) - C0_value * T * R ** (n - 1))
        rhs = R ** (n - 1) * (T ** (-gamma) if T > 0 else 1.0) + float(M[R + 1] - M[R])
        brackets.append(bracket)
        rhs_values.append(rhs)

    ratios = [rhs / _power(b, exponent) for b, rhs in zip(brackets, rhs_values) if b > 0]
    fit = fit_constant(ratios)
    if c1 is None:
        c1_value = fit.envelope if fit.samples else math.inf
    else:
        c1_value = float(c1)
    rows = []
    for R, bracket, rhs in zip(candidates, brackets, rhs_values):
        scaled = _power(bracket, exponent)
        lhs = c1_value * scaled if scaled > 0 else 0.0
        rows.append(InequalityRow(R=R, bracket=bracket, lhs=lhs, rhs=rhs))
    return InequalityReport(
        n=n,
        T=T,
        gamma=gamma,
        c1=c1_value,
        C0=C0_value,
        c1_fitted=c1 is None,
        C0_fitted=C0 is None,
        C_P=C_P,
        C0_min=_least_passing_C0(M, T, n, candidates, rhs_values, c1_value),
        c1_fit=fit,
        rows=tuple(rows),
    )


@dataclass(frozen=True)
class SandwichReport:
    c0: float
    C0: float
    rows: tuple[dict[str, float], ...]

    @property
    def passed(self) -> bool:
        return all(row["V"] >= row["bound"] - 1e-12 * max(row["V"], 1.0) for row in self.rows)

    def to_json_dict(self) -> dict[str, Any]:
        return {"c0": self.c0, "C0": self.C0, "passed": self.passed, "rows": list(self.rows)}


def sandwich_check(seq: AuditSequences, n: int, C0: float | None = None) -> SandwichReport:
    """V_R >= c0·(M_R - C0·T·R^(n-1)) with c0 = 1 / Σ_{j<=T} (1+j)^(-q)."""
    M, T, q = _require_mixture(seq)
    C0_value = fitted_C0(seq, n) if C0 is None else float(C0)
    c0 = weight_series(q, T).c0
    rows = []
    for R in range(max(T, 1), seq.R_max + 1):
        rows.append({"R": float(R), "V": float(seq.V[R]), "bound": c0 * (float(M[R]) - C0_value * T * R ** (n - 1))})
    return SandwichReport(c0=c0, C0=C0_value, rows=tuple(rows))


# -- induction ------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityConstants:
    n: int
    epsilon: float
    sigma: float
    rho1: float
    rho0: float

    def to_json_dict(self) -> dict[str, float]:
        return {"n": self.n, "epsilon": self.epsilon, "sigma": self.sigma, "rho1": self.rho1, "rho0": self.rho0}


def rho1(n: int, sigma: float, T: int, C0: float) -> float:
    return 2.0 ** (n + 1) * C0 * T / sigma


def density_constants(n: int, eps: float, T: int, C0: float) -> DensityConstants:
    """σ = 2^(-n)·ε, ρ1 = 2^(n+1)·C0·T/σ and ρ0 = ρ1/2."""
    if not eps > 0:
        raise ParameterError(f"invalid density eps={eps!r}: expected eps > 0")
    sigma = 2.0 ** (-n) * eps
    r1 = rho1(n, sigma, T, C0)
    return DensityConstants(n=n, epsilon=float(eps), sigma=sigma, rho1=r1, rho0=0.5 * r1)


def minimal_closing_c1(n: int, sigma: float, T: int, gamma: float, C0: float = 1.0) -> float:
    """Smallest c1 for which c1·[(σ/2)(R/2)ⁿ]^((n-1)/n) - R^(n-1)T^(-γ) >= σ((R+1)ⁿ - Rⁿ) for all R >= ρ1."""
    r1 = rho1(n, sigma, T, C0)
    growth = sigma * n * (1.0 + 1.0 / r1) ** (n - 1)
    return (T ** (-gamma) + growth) * 2.0 ** (n - 1) / (0.5 * sigma) ** ((n - 1) / n)


@dataclass(frozen=True)
class InductionStep:
    R: int
    M_next: float
    increment: float
    above_rho1: bool
    chain_ok: bool
    ind_ok: bool
    step_ok: bool


@dataclass(frozen=True)
class InductionTrace:
    n: int
    sigma: float
    T: int
    C0: float
    c1: float
    gamma: float
    rho1: float
    R_start: int
    R_stop: int
    steps: tuple[InductionStep, ...]
    first_violation: dict[str, Any] | None
    below_rho1: bool

    @property
    def maintained(self) -> bool:
        return all(step.ind_ok for step in self.steps)

    def rows(self) -> list[tuple[Any, ...]]:
        return [
            (s.R, s.M_next, s.increment, int(s.above_rho1), int(s.chain_ok), int(s.ind_ok), int(s.step_ok))
            for s in self.steps
        ]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "sigma": self.sigma,
            "T": self.T,
            "C0": self.C0,
            "c1": self.c1,
            "gamma": self.gamma,
            "rho1": self.rho1,
            "R_start": self.R_start,
            "R_stop": self.R_stop,
            "steps": len(self.steps),
            "maintained": self.maintained,
            "below_rho1": self.below_rho1,
            "first_violation": self.first_violation,
        }


def power_seed(sigma: float, n: int, R: int, T: int) -> list[float]:
    """M_r = σ·rⁿ for r = R-T..R."""
    return [sigma * float(r) ** n for r in range(R - T, R + 1)]


def induction_simulator(
    n: int,
    sigma: float,
    T: int,
    C0: float,
    c1: float,
    gamma: float,
    M_init: Sequence[float],
    R_start: int,
    R_stop: int,
) -> InductionTrace:
    """Worst-case propagation of the discrete inequality from a seed window ending at R_start.

    Each step sets M_{R+1} to the smallest value the inequality allows and
    checks M_{R+1} >= σ(R+1)ⁿ. The first step that breaks the chain
    M_{R-T} - C0·T·R^(n-1) >= (σ/2)(R/2)ⁿ or loses the bound is recorded as
    the first violation. Starting below ρ1 is a separate precondition flag.
    """
    T, R_start, R_stop = int(T), int(R_start), int(R_stop)
    if not sigma > 0:
        raise ParameterError(f"invalid sigma={sigma!r}: expected sigma > 0")
    if T < 1:
        raise ParameterError(f"invalid window T={T!r}: expected T >= 1")
    if len(M_init) != T + 1:
        raise ConfigError(f"seed must cover T+1 = {T + 1} radii, got {len(M_init)}")
    if R_start - T < 0 or R_stop < R_start:
        raise ConfigError(f"invalid radii R_start={R_start}, R_stop={R_stop} for T={T}")
    M: dict[int, float] = {R_start - T + k: float(v) for k, v in enumerate(M_init)}
    for r, value in M.items():
        if value < sigma * float(r) ** n * (1.0 - 1e-12):
            raise HypothesisError(f"seed fails M_r >= sigma*r^n at r={r}: M_r={value!r} < {sigma * float(r) ** n!r}")

    r1 = rho1(n, sigma, T, C0)
    tol = 1e-9 * r1
    exponent = (n - 1) / n
    steps: list[InductionStep] = []
    first: dict[str, Any] | None = None
    for R in range(R_start, R_stop):
        bracket = M[R - T] - C0 * T * float(R) ** (n - 1)
        increment = max(0.0, c1 * _power(bracket, exponent) - float(R) ** (n - 1) * T ** (-gamma))
        M[R + 1] = M[R] + increment
        step = InductionStep(
            R=R,
            M_next=M[R + 1],
            increment=increment,
            above_rho1=R >= r1 - tol,
            chain_ok=bracket >= 0.5 * sigma * (0.5 * R) ** n,
            ind_ok=M[R + 1] >= sigma * float(R + 1) ** n * (1.0 - 1e-12),
            step_ok=increment >= sigma * (float(R + 1) ** n - float(R) ** n),
        )
        steps.append(step)
        if first is None:
            reasons = [name for name, ok in (("chain", step.chain_ok), ("ind", step.ind_ok)) if not ok]
            if reasons:
                first = {"step": len(steps) - 1, "R": R, "reasons": reasons}
    trace = InductionTrace(
        n=n,
        sigma=float(sigma),
        T=T,
        C0=float(C0),
        c1=float(c1),
        gamma=float(gamma),
        rho1=r1,
        R_start=R_start,
        R_stop=R_stop,
        steps=tuple(steps),
        first_violation=first,
        below_rho1=R_start < r1 - tol,
    )
    if trace.below_rho1:
        logger.info("induction starts at R=%d below rho1=%.6g", R_start, r1)
    if first is not None:
        logger.info("induction from R=%d: first violation at R=%d (%s)", R_start, first["R"], ",".join(first["reasons"]))
    return trace


@dataclass(frozen=True)
class SigmaSearch:
    sigma: float | None
    lower: float
    upper: float
    iterations: int

    def to_json_dict(self) -> dict[str, Any]:
        return {"sigma": self.sigma, "lower": self.lower, "upper": self.upper, "iterations": self.iterations}


def _closes(n: int, sigma: float, T: int, C0: float, c1: float, gamma: float, horizon: float) -> bool:
    R = int(math.ceil(rho1(n, sigma, T, C0)))
    trace = induction_simulator(n, sigma, T, C0, c1, gamma, power_seed(sigma, n, R, T), R, int(horizon * R))
    return trace.maintained


def largest_closing_sigma(
    n: int,
    T: int,
    C0: float,
    c1: float,
    gamma: float,
    *,
    lower: float = 0.01,
    upper: float = 1.0,
    horizon: float = 2.0,
    iterations: int = 30,
) -> SigmaSearch:
    """Largest σ in [lower, upper] whose induction, seeded at ρ1(σ), holds to horizon·ρ1."""
    if not 0 < lower < upper:
        raise ConfigError(f"invalid sigma bracket [{lower!r}, {upper!r}]")
    if _closes(n, upper, T, C0, c1, gamma, horizon):
        return SigmaSearch(sigma=upper, lower=lower, upper=upper, iterations=0)
    if not _closes(n, lower, T, C0, c1, gamma, horizon):
        return SigmaSearch(sigma=None, lower=lower, upper=upper, iterations=0)
    lo, hi = lower, upper
    done = 0
    for done in range(1, iterations + 1):
        mid = 0.5 * (lo + hi)
        if _closes(n, mid, T, C0, c1, gamma, horizon):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-4 * hi:
            break
    return SigmaSearch(sigma=lo, lower=lower, upper=upper, iterations=done)


# -- density --------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityReport:
    center: tuple[float, ...]
    center_value: float
    center_is_zero: bool
    radii: np.ndarray
    plus_fraction: np.ndarray
    minus_fraction: np.ndarray
    delta: float
    plus_trend: float | None
    minus_trend: float | None
    prior_criterion: bool

    @property
    def flags(self) -> list[str]:
        out = []
        if not self.center_is_zero:
            out.append("center-not-zero")
        for name, fraction, trend in (
            ("plus", self.plus_fraction, self.plus_trend),
            ("minus", self.minus_fraction, self.minus_trend),
        ):
            if fraction.size and float(fraction.min()) <= 1e-12:
                out.append(f"{name}-vanishes")
            elif trend is not None and trend < _TREND_LIMIT:
                out.append(f"{name}-decays")
        return out

    def rows(self) -> list[tuple[int, float, float]]:
        return [(int(R), float(a), float(b)) for R, a, b in zip(self.radii, self.plus_fraction, self.minus_fraction)]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "center": list(self.center),
            "center_value": self.center_value,
            "center_is_zero": self.center_is_zero,
            "radii": [int(R) for R in self.radii],
            "plus_fraction": [float(v) for v in self.plus_fraction],
            "minus_fraction": [float(v) for v in self.minus_fraction],
            "delta": self.delta,
            "plus_trend": self.plus_trend,
            "minus_trend": self.minus_trend,
            "prior_criterion": self.prior_criterion,
            "flags": self.flags,
        }


def _trend(radii: np.ndarray, fraction: np.ndarray) -> float | None:
    if radii.size < 3 or np.any(fraction <= 0):
        return None
    slope, _ = np.polyfit(np.log(radii.astype(float)), np.log(fraction), 1)
    return float(slope)


def density_report(u: Field, center, R0: int, R_max: int, params: EnergyParams) -> DensityReport:
    """|B_R ∩ {u >= 0}|/Rⁿ and |B_R ∩ {u <= 0}|/Rⁿ for integer R in [R0, R_max]."""
    grid = u.grid
    R0, R_max = int(R0), int(R_max)
    if not 1 <= R0 <= R_max:
        raise ConfigError(f"invalid radii R0={R0}, R_max={R_max}: expected 1 <= R0 <= R_max")
    grid.require_ball(center, R_max)
    n = grid.n
    shell = np.ceil(grid.distance(center) - 1e-12).astype(int).ravel()
    inside = shell <= R_max
    shell = shell[inside]
    values = u.values.ravel()[inside]
    volume = grid.cell_volume
    plus = np.cumsum(np.bincount(shell, weights=(values >= 0).astype(float), minlength=R_max + 1)) * volume
    minus = np.cumsum(np.bincount(shell, weights=(values <= 0).astype(float), minlength=R_max + 1)) * volume
    radii = np.arange(R0, R_max + 1)
    scale = radii.astype(float) ** n
    plus_fraction = plus[R0:] / scale
    minus_fraction = minus[R0:] / scale
    center_value = u.at(center)
    report = DensityReport(
        center=tuple(float(c) for c in np.atleast_1d(center)),
        center_value=center_value,
        center_is_zero=abs(center_value) <= grid.h,
        radii=radii,
        plus_fraction=plus_fraction,
        minus_fraction=minus_fraction,
        delta=float(min(plus_fraction.min(), minus_fraction.min())),
        plus_trend=_trend(radii, plus_fraction),
        minus_trend=_trend(radii, minus_fraction),
        prior_criterion=prior_density_criterion(n, params.p, params.m),
    )
    if report.flags:
        logger.warning("density report flags: %s", ", ".join(report.flags))
    return report


def initial_ball_density(u: Field, center, rho: float) -> float:
    """|{u >= 0} ∩ B_rho| / rhoⁿ."""
    if not rho > 0:
        raise ConfigError(f"invalid radius rho={rho!r}: expected rho > 0")
    ball = ball_mask(u.grid, center, rho)
    return Region(u.grid, ball.mask & (u.values >= 0)).volume / rho**u.grid.n


@dataclass(frozen=True)
class RampReport:
    R: float
    P_R: float
    energy_u: float
    energy_v: float
    Q: float

    @property
    def lower_holds(self) -> bool:
        return self.P_R <= self.energy_u * (1.0 + 1e-12)

    @property
    def upper_holds(self) -> bool:
        return self.energy_u <= self.Q * self.energy_v * (1.0 + 1e-12)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "R": self.R,
            "P_R": self.P_R,
            "energy_u": self.energy_u,
            "energy_v": self.energy_v,
            "Q": self.Q,
            "lower_holds": self.lower_holds,
            "upper_holds": self.upper_holds,
        }


def ramp_competitor_energy(u: Field, center, R: float, params: EnergyParams, P: Potential) -> RampReport:
    """Energies of u and of min(u, ramp) on B_{R+2}, the ramp being -1 on B_R and 1 off B_{R+2}."""
    grid = u.grid
    reach = R + 2.0 + grid.h
    grid.require_ball(center, reach)
    dist = grid.distance(center)
    ramp = np.clip(dist - R - 1.0, -1.0, 1.0)
    v = Field(grid, np.minimum(u.values, ramp))
    region = ball_mask(grid, center, reach)
    inner = ball_mask(grid, center, R)
    P_R = float(np.sum(np.asarray(eval_potential(P, u.values[inner.mask]))) * grid.cell_volume)
    return RampReport(
        R=float(R),
        P_R=P_R,
        energy_u=energy(u, region, params, P),
        energy_v=energy(v, region, params, P),
        Q=params.Q,
    )
