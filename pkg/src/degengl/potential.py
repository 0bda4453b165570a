"""Energy parameters, the double-well potential W and its admissibility checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, DomainError, ParameterError

_DOMAIN_SLACK = 1e-12
_RATIO_RTOL = 1e-12
_BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class EnergyParams:
    """Structural constants of the energy ∫ |∇v|^p + W(v)."""

    n: int = 2
    p: float = 2.0
    m: float = 4.0
    lam: float = 1.0
    Lam: float = 1.0
    Q: float = 1.0
    eps_reg: float | None = None

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n not in (1, 2, 3):
            raise ParameterError(f"invalid dimension n={self.n!r}: expected 1, 2 or 3")
        if not self.p > 1:
            raise ParameterError(f"invalid exponent p={self.p!r}: expected p > 1")
        if not self.m > 0:
            raise ParameterError(f"invalid exponent m={self.m!r}: expected m > 0")
        if not 0 < self.lam <= self.Lam:
            raise ParameterError(f"invalid bounds lam={self.lam!r}, Lam={self.Lam!r}: expected 0 < lam <= Lam")
        if not self.Q >= 1:
            raise ParameterError(f"invalid quasi-minimality factor Q={self.Q!r}: expected Q >= 1")
        if self.eps_reg is not None and not self.eps_reg >= 0:
            raise ParameterError(f"invalid eps_reg={self.eps_reg!r}: expected eps_reg >= 0")

    @property
    def reg(self) -> float:
        """Gradient regularization actually used (1e-8 for p >= 2, 1e-4 below)."""
        if self.eps_reg is not None:
            return float(self.eps_reg)
        return 1e-8 if self.p >= 2 else 1e-4

    @property
    def degenerate(self) -> bool:
        return self.m > self.p

    @property
    def q(self) -> float:
        """Weight exponent pm/(m-p) of the mixture sequence."""
        self.require_degenerate()
        return self.p * self.m / (self.m - self.p)

    @property
    def gamma(self) -> float:
        """Tail-energy decay exponent pm/(m-p) - 1."""
        return self.q - 1.0

    @property
    def decay_exponent(self) -> float:
        """Polynomial decay exponent p/(m-p) of the comparison profile."""
        self.require_degenerate()
        return self.p / (self.m - self.p)

    @property
    def regime(self) -> str:
        return classify_regime(self.p, self.m)

    def require_degenerate(self) -> None:
        if not self.m > self.p:
            raise ParameterError(
                f"m > p required for density-estimate audits, got p={self.p!r}, m={self.m!r}"
            )

    def to_json_dict(self) -> dict[str, float | int | None]:
        return {
            "n": self.n,
            "p": self.p,
            "m": self.m,
            "lam": self.lam,
            "Lam": self.Lam,
            "Q": self.Q,
            "eps_reg": self.eps_reg,
        }


def classify_regime(p: float, m: float) -> str:
    """Name the profile regime: finite transition layer, exponential or polynomial tails."""
    if m < p:
        return "free-boundary"
    if m == p:
        return "exponential"
    return "polynomial"


def prior_density_criterion(n: int, p: float, m: float) -> bool:
    """Whether the exponents fall in the range covered by the older density estimates."""
    if m <= p or p >= n:
        return True
    return p * m / (m - p) > n


@dataclass(frozen=True)
class Potential:
    """Even double well W with W(±1) = 0, stored through its well-scaled ratio.

    A custom potential is kept as the ratios r(τ) = W(τ)/(1-τ²)^m and
    r'(τ) = W'(τ)/(1-τ²)^(m-1) on interior nodes, each interpolated with a
    monotone cubic. Values near the wells are then reconstructed as
    r·(1-τ²)^m without losing relative precision.
    """

    kind: str
    m: float
    nodes: tuple[float, ...] = ()
    _ratio: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False, compare=False)
    _dratio: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False, compare=False)

    def ratio(self, tau: np.ndarray | float) -> np.ndarray:
        """W(τ)/(1-τ²)^m, extended continuously to the wells."""
        t = np.asarray(tau, dtype=float)
        if self.kind == "model":
            return np.ones_like(t)
        assert self._ratio is not None
        return np.asarray(self._ratio(t), dtype=float)

    def dratio(self, tau: np.ndarray | float) -> np.ndarray:
        """W'(τ)/(1-τ²)^(m-1), extended continuously to the wells."""
        t = np.asarray(tau, dtype=float)
        if self.kind == "model":
            return -2.0 * self.m * t
        assert self._dratio is not None
        return np.asarray(self._dratio(t), dtype=float)

    def near_well(self, delta: np.ndarray | float, *, side: int = -1) -> np.ndarray:
        """W at τ = side·(1 - δ), accurate for tiny δ."""
        d = np.asarray(delta, dtype=float)
        tau = side * (1.0 - d)
        return self.ratio(tau) * (d * (2.0 - d)) ** self.m


def model_potential(m: float) -> Potential:
    if not m > 0:
        raise ParameterError(f"invalid exponent m={m!r}: expected m > 0")
    return Potential(kind="model", m=float(m))


def tabulated_potential(tau, w, dw, m: float) -> Potential:
    """Build a custom potential from (τ, W, W') samples on [-1, 1]."""
    tau = np.asarray(tau, dtype=float)
    w = np.asarray(w, dtype=float)
    dw = np.asarray(dw, dtype=float)
    if not (tau.shape == w.shape == dw.shape) or tau.ndim != 1:
        raise ConfigError("invalid potential table: tau, W, dW must be equal-length columns")
    order = np.argsort(tau)
    tau, w, dw = tau[order], w[order], dw[order]
    if np.any(np.diff(tau) <= 0):
        raise ConfigError("invalid potential table: tau values must be distinct")
    if tau[0] < -1 - _DOMAIN_SLACK or tau[-1] > 1 + _DOMAIN_SLACK:
        raise ConfigError("invalid potential table: tau must lie in [-1, 1]")
    interior = np.abs(tau) < 1.0
    if interior.sum() < 4:
        raise ConfigError("invalid potential table: need at least 4 interior nodes")
    if np.any(w[interior] <= 0):
        raise ConfigError("invalid potential table: W must be positive on (-1, 1)")
    t_in = tau[interior]
    base = 1.0 - t_in**2
    ratio = PchipInterpolator(t_in, w[interior] / base**m, extrapolate=True)
    dratio = PchipInterpolator(t_in, dw[interior] / base ** (m - 1.0), extrapolate=True)
    return Potential(kind="custom", m=float(m), nodes=tuple(t_in.tolist()), _ratio=ratio, _dratio=dratio)


def tabulate_potential(
    w: Callable[[np.ndarray], np.ndarray],
    dw: Callable[[np.ndarray], np.ndarray],
    m: float,
    *,
    nodes: int = 2001,
) -> Potential:
    tau = np.linspace(-1.0, 1.0, nodes)
    return tabulated_potential(tau, w(tau), dw(tau), m)


def load_potential_table(path: str | Path, m: float) -> Potential:
    """Read a CSV with header ``tau,W,dW`` into a custom potential."""
    table_path = Path(path)
    if not table_path.exists():
        raise ConfigError(f"potential table not found: {table_path}")
    rows: list[tuple[float, float, float]] = []
    with table_path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        missing = {"tau", "W", "dW"} - set(reader.fieldnames or [])
        if missing:
            raise ConfigError(f"invalid potential table {table_path}: missing column(s) {', '.join(sorted(missing))}")
        for row in reader:
            try:
                rows.append((float(row["tau"]), float(row["W"]), float(row["dW"])))
            except ValueError as exc:
                raise ConfigError(f"invalid potential table {table_path}: {exc}") from exc
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or len(data) == 0:
        raise ConfigError(f"invalid potential table {table_path}: no rows")
    return tabulated_potential(data[:, 0], data[:, 1], data[:, 2], m)


def _check_domain(t: np.ndarray, *, open_interval: bool) -> None:
    if not np.all(np.isfinite(t)):
        raise DomainError("potential argument must be finite")
    bound = np.max(np.abs(t)) if t.size else 0.0
    if open_interval and bound >= 1.0:
        raise DomainError(f"W' evaluated at |tau|={bound!r} >= 1 without at_wells=True")
    if bound > 1.0 + _DOMAIN_SLACK:
        raise DomainError(f"potential evaluated at |tau|={bound!r} > 1")


def _scalar_or_array(value: np.ndarray, like) -> np.ndarray | float:
    if np.ndim(like) == 0:
        return float(value)
    return value


def eval_potential(P: Potential, tau):
    """W(τ) on [-1, 1]; exactly 0 at the wells."""
    t = np.asarray(tau, dtype=float)
    _check_domain(t, open_interval=False)
    base = np.clip(1.0 - t * t, 0.0, None)
    value = P.ratio(t) * base**P.m
    return _scalar_or_array(value, tau)


def eval_potential_deriv(P: Potential, tau, *, at_wells: bool = False):
    """W'(τ) on (-1, 1); at_wells=True extends it by 0 to τ = ±1 (needs m > 1)."""
    t = np.asarray(tau, dtype=float)
    _check_domain(t, open_interval=not at_wells)
    if at_wells and P.m <= 1 and np.any(np.abs(t) >= 1.0):
        raise DomainError(f"W' has no continuous extension to the wells for m={P.m!r} <= 1")
    base = np.clip(1.0 - t * t, 0.0, None)
    value = P.dratio(t) * base ** (P.m - 1.0)
    return _scalar_or_array(value, tau)


@dataclass(frozen=True)
class RatioBound:
    """Measured range of one structural ratio against its (lower, upper) constants."""

    lower: float
    upper: float
    ratio_min: float
    ratio_max: float
    argmin: float
    argmax: float

    @property
    def passed(self) -> bool:
        return (
            self.ratio_min >= self.lower * (1.0 - _RATIO_RTOL)
            and self.ratio_max <= self.upper * (1.0 + _RATIO_RTOL)
        )

    def to_json_dict(self) -> dict[str, float | bool]:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max,
            "argmin": self.argmin,
            "argmax": self.argmax,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class AdmissibilityReport:
    value_ratio: RatioBound
    slope_ratio: RatioBound
    samples: int

    @property
    def passed(self) -> bool:
        return self.value_ratio.passed and self.slope_ratio.passed

    def to_json_dict(self) -> dict[str, object]:
        return {
            "passed": self.passed,
            "samples": self.samples,
            "value_ratio": self.value_ratio.to_json_dict(),
            "slope_ratio": self.slope_ratio.to_json_dict(),
        }


def _ratio_bound(ratio: np.ndarray, tau: np.ndarray, lower: float, upper: float) -> RatioBound:
    i_min = int(np.argmin(ratio))
    i_max = int(np.argmax(ratio))
    return RatioBound(
        lower=float(lower),
        upper=float(upper),
        ratio_min=float(ratio[i_min]),
        ratio_max=float(ratio[i_max]),
        argmin=float(tau[i_min]),
        argmax=float(tau[i_max]),
    )


def model_slope_bounds(m: float) -> tuple[float, float]:
    """Slope-ratio pair that the model potential (1-τ²)^m satisfies on |τ| > 1/2."""
    return min(1.0, 2.0 * m) * (1.0 - _BOUND_SLACK), max(1.0, 2.0 * m) * (1.0 + _BOUND_SLACK)


def check_admissible(
    P: Potential,
    params: EnergyParams,
    samples: int,
    *,
    slope_bounds: tuple[float, float] | None = None,
) -> AdmissibilityReport:
    """Sample both structural ratios of W on a uniform grid of (-1, 1).

    The value ratio W/(1-τ²)^m is checked against (params.lam, params.Lam).
    The slope ratio -W'/((1-τ²)^(m-1) sgn τ) on |τ| > 1/2 has its own pair,
    ``slope_bounds``, which defaults to :func:`model_slope_bounds` for P.m.
    """
    if samples < 2:
        raise ParameterError(f"invalid samples={samples!r}: expected >= 2")
    tau = np.linspace(-1.0, 1.0, samples + 2)[1:-1]
    base = 1.0 - tau * tau
    value = np.asarray(eval_potential(P, tau)) / base**P.m
    value_bound = _ratio_bound(value, tau, params.lam, params.Lam)

    outer = tau[np.abs(tau) > 0.5]
    if outer.size == 0:
        outer = tau[[0, -1]]
    slope = -np.asarray(eval_potential_deriv(P, outer)) / ((1.0 - outer**2) ** (P.m - 1.0) * np.sign(outer))
    if slope_bounds is None:
        slope_bounds = model_slope_bounds(P.m)
    slope_bound = _ratio_bound(slope, outer, *slope_bounds)
    return AdmissibilityReport(value_ratio=value_bound, slope_ratio=slope_bound, samples=samples)
