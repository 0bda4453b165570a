"""One-dimensional profiles: comparison, heteroclinic and ε-perturbed super-solution.

Heteroclinic and super-solution profiles are defined through their inverse
t(s) = ∫_0^s dτ / U'(τ). The inverse is tabulated by adaptive quadrature on
nodes graded geometrically toward both ends and inverted by Newton steps
whose integrals use fixed Gauss rules (Gauss-Jacobi on segments that touch a
root where 1/U' has an algebraic singularity).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator
from scipy.special import roots_jacobi

from .errors import FitError, InfeasibleError, ParameterError, QuadratureError
from .grid import Field, Grid
from .potential import Potential, eval_potential, eval_potential_deriv

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]

_GAUSS_ORDER = 24
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
_NODES_PER_DECADE = 24
_REACHABLE_GAP = 1e-10
_ASYMPTOTIC_GAP = 1e-13
_NEWTON_STEPS = 10
_TRANSVERSALITY = 0.1


def _require_degenerate(p: float, m: float) -> None:
    if not p > 1:
        raise ParameterError(f"invalid exponent p={p!r}: expected p > 1")
    if not m > p:
        raise ParameterError(f"m > p required for the comparison profile, got p={p!r}, m={m!r}")


@dataclass(frozen=True)
class ProfileMeta:
    p: float
    m: float
    epsilon: float = 0.0
    eta: float = 0.0
    s0: float = -1.0
    s1: float = 1.0
    a: float = -math.inf
    b: float = math.inf
    h: float | None = None

    def to_json_dict(self) -> dict[str, float | None]:
        def finite(value: float | None) -> float | None:
            if value is None or not math.isfinite(value):
                return None
            return float(value)

        return {
            "p": self.p,
            "m": self.m,
            "epsilon": self.epsilon,
            "eta": self.eta,
            "s0": self.s0,
            "s1": self.s1,
            "a": finite(self.a),
            "b": finite(self.b),
            "h": self.h,
        }


@dataclass(frozen=True)
class Profile1D:
    """Sampled monotone profile with an accurate evaluator for off-sample t."""

    kind: str
    t: np.ndarray
    u: np.ndarray
    du: np.ndarray
    meta: ProfileMeta
    _evaluator: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = field(
        default=None, repr=False, compare=False
    )

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Return (U(t), U'(t)); outside [a, b] the profile is held constant."""
        t_arr = np.asarray(t, dtype=float)
        if self._evaluator is None:
            u = np.interp(t_arr, self.t, self.u)
            du = np.interp(t_arr, self.t, self.du, left=0.0, right=0.0)
            return u, du
        return self._evaluator(t_arr)

    def rows(self) -> list[tuple[float, float, float]]:
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.t, self.u, self.du)]


# -- comparison profile ---------------------------------------------------------------


def comparison_profile(p: float, m: float, t):
    """U(t) = -1 + (1-t)^(-p/(m-p)) for t <= 0, U(t) = min(t, 1) for t >= 0."""
    _require_degenerate(p, m)
    k = p / (m - p)
    t_arr = np.asarray(t, dtype=float)
    s = 1.0 - np.minimum(t_arr, 0.0)
    left = t_arr <= 0.0
    u = np.where(left, -1.0 + s ** (-k), np.minimum(t_arr, 1.0))
    du = np.where(left, k * s ** (-k - 1.0), np.where(t_arr < 1.0, 1.0, 0.0))
    if np.ndim(t) == 0:
        return float(u), float(du)
    return u, du


def build_comparison_profile(p: float, m: float, t_grid) -> Profile1D:
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    u, du = comparison_profile(p, m, t_grid)

    def evaluator(t_arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return comparison_profile(p, m, t_arr)

    meta = ProfileMeta(p=p, m=m, s0=-1.0, s1=1.0, a=-math.inf, b=1.0)
    return Profile1D("comparison", t_grid, np.asarray(u), np.asarray(du), meta, evaluator)


def tail_energy(p: float, m: float, T: float, P: Potential) -> float:
    """∫_{-∞}^{-T} |U'|^p + W(U) dt for the comparison profile.

    With s = 1 - t the integrand decays like s^(-q), q = pm/(m-p); the
    substitution z = ((1+T)/s)^(q-1) maps [1+T, ∞) onto (0, 1] with a bounded
    integrand. The piece z < z_cut is replaced by its leading-order value.
    """
    _require_degenerate(p, m)
    if not T >= 1:
        raise ParameterError(f"invalid tail cutoff T={T!r}: expected T >= 1")
    k = p / (m - p)
    q = p * m / (m - p)
    gamma = q - 1.0
    start = 1.0 + T

    def density(s: float) -> float:
        grad = (k * s ** (-k - 1.0)) ** p
        return grad + float(P.near_well(s ** (-k), side=-1))

    def transformed(z: float) -> float:
        s = start * z ** (-1.0 / gamma)
        return density(s) * start / gamma * z ** (-1.0 / gamma - 1.0)

    z_cut = 1e-10
    body, _err = integrate.quad(transformed, z_cut, 1.0, epsabs=0.0, epsrel=1e-11, limit=200)
    s_cut = start * z_cut ** (-1.0 / gamma)
    leading = k**p + float(P.ratio(-1.0)) * 2.0**m
    return float(body + leading * s_cut ** (1.0 - q) / (q - 1.0))


# -- inverse-function machinery -------------------------------------------------------


@dataclass(frozen=True)
class _End:
    """One end of the profile's range: a root of U' or an asymptotic well."""

    root: float
    reachable: bool
    exponent: float = 0.0
    smooth: ArrayFn | None = None


def _gauss_legendre(func: ArrayFn, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    tau = mid[..., None] + half[..., None] * _GL_X
    return half * (func(tau) @ _GL_W)


_JACOBI_CACHE: dict[float, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_jacobi(smooth: ArrayFn, root: float, length: np.ndarray, exponent: float, direction: int) -> np.ndarray:
    """∫ over [root, root + direction·length] of |τ - root|^exponent · smooth(τ) dτ."""
    rule = _JACOBI_CACHE.get(exponent)
    if rule is None:
        rule = roots_jacobi(_GAUSS_ORDER, 0.0, exponent)
        _JACOBI_CACHE[exponent] = rule
    xi, weights = rule
    tau = root + direction * length[..., None] * (1.0 + xi) / 2.0
    return (length / 2.0) ** (1.0 + exponent) * (smooth(tau) @ weights)


class _InverseIntegral:
    """Tabulated t(s) = ∫_0^s dτ/speed(τ) with Newton inversion."""

    def __init__(self, speed: ArrayFn, left: _End, right: _End) -> None:
        self.speed = speed
        self.left = left
        self.right = right
        s_nodes = self._nodes()
        pieces = np.empty(len(s_nodes) - 1)
        for i in range(len(pieces)):
            pieces[i] = self._quad_segment(s_nodes, i)
        t_nodes = np.concatenate([[0.0], np.cumsum(pieces)])
        zero = int(np.flatnonzero(s_nodes == 0.0)[0])
        self.s_nodes = s_nodes
        self.t_nodes = t_nodes - t_nodes[zero]
        if np.any(np.diff(self.t_nodes) <= 0):
            raise QuadratureError("inverse-function table is not strictly increasing")
        self._guess = PchipInterpolator(self.t_nodes, self.s_nodes)

    def _nodes(self) -> np.ndarray:
        parts = []
        for end, direction in ((self.left, 1.0), (self.right, -1.0)):
            span = abs(end.root)
            gap = (_REACHABLE_GAP if end.reachable else _ASYMPTOTIC_GAP) * max(span, 1.0)
            count = max(int(math.ceil(math.log10(span / gap) * _NODES_PER_DECADE)), 8)
            offsets = np.geomspace(gap, span, count)
            side = end.root + direction * offsets
            if end.reachable:
                side = np.concatenate([[end.root], side])
            parts.append(side if direction > 0 else side[::-1])
        left_side, right_side = parts
        left_side[-1] = 0.0
        right_side[0] = 0.0
        return np.concatenate([left_side, right_side[1:]])

    def _density(self, tau: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.speed(tau)

    def _quad_segment(self, s_nodes: np.ndarray, i: int) -> float:
        lo, hi = float(s_nodes[i]), float(s_nodes[i + 1])
        if i == 0 and self.left.reachable:
            smooth = self.left.smooth
            value, _ = integrate.quad(lambda x: float(smooth(np.asarray(x))), lo, hi, weight="alg", wvar=(self.left.exponent, 0.0))
            return value
        if i == len(s_nodes) - 2 and self.right.reachable:
            smooth = self.right.smooth
            value, _ = integrate.quad(lambda x: float(smooth(np.asarray(x))), lo, hi, weight="alg", wvar=(0.0, self.right.exponent))
            return value

        def density(tau: float) -> float:
            return float(self._density(np.asarray(tau)))

        value, _ = integrate.quad(density, lo, hi, epsabs=0.0, epsrel=1e-13, limit=100)
        return value

    def _partial(self, idx: np.ndarray, s: np.ndarray) -> np.ndarray:
        """∫ from s_nodes[idx] to s of the density, per entry."""
        lo = self.s_nodes[idx]
        out = _gauss_legendre(self._density, lo, s)
        last = len(self.s_nodes) - 2
        if self.left.reachable:
            first = idx == 0
            if np.any(first):
                out[first] = _gauss_jacobi(
                    self.left.smooth, self.left.root, s[first] - self.left.root, self.left.exponent, 1
                )
        if self.right.reachable:
            final = idx == last
            if np.any(final):
                root = self.right.root
                whole = self.t_nodes[-1] - self.t_nodes[-2]
                rest = _gauss_jacobi(self.right.smooth, root, root - s[final], self.right.exponent, -1)
                out[final] = whole - rest
        return out

    def invert(self, t: np.ndarray) -> np.ndarray:
        t_flat = np.asarray(t, dtype=float).ravel()
        idx = np.clip(np.searchsorted(self.t_nodes, t_flat, side="right") - 1, 0, len(self.s_nodes) - 2)
        lo, hi = self.s_nodes[idx], self.s_nodes[idx + 1]
        s = np.clip(self._guess(t_flat), lo, hi)
        t_lo = self.t_nodes[idx]
        for _ in range(_NEWTON_STEPS):
            residual = t_lo + self._partial(idx, s) - t_flat
            with np.errstate(invalid="ignore"):
                step = residual * self.speed(s)
            s = np.clip(s - np.nan_to_num(step), lo, hi)
        s = np.where(t_flat <= self.t_nodes[0], self.s_nodes[0], s)
        s = np.where(t_flat >= self.t_nodes[-1], self.s_nodes[-1], s)
        return s.reshape(np.shape(t))

    def evaluator(self) -> Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]:
        def evaluate(t_arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            s = self.invert(t_arr)
            return s, self.speed(s)

        return evaluate


# -- heteroclinic profile -------------------------------------------------------------


def heteroclinic_profile(p: float, P: Potential, t_grid) -> Profile1D:
    """Monotone solution with U(0) = 0 and equipartition (p-1)|U'|^p = W(U)."""
    if not p > 1:
        raise ParameterError(f"invalid exponent p={p!r}: expected p > 1")
    probe = np.linspace(-1.0, 1.0, 4001)[1:-1]
    if np.any(np.asarray(eval_potential(P, probe)) <= 0):
        raise QuadratureError("W vanishes inside (-1, 1); the inverse-function integral diverges")
    m = P.m

    def speed(tau: np.ndarray) -> np.ndarray:
        w = np.asarray(eval_potential(P, np.clip(tau, -1.0, 1.0)))
        return (w / (p - 1.0)) ** (1.0 / p)

    reachable = m < p
    exponent = -m / p

    def smooth_left(tau: np.ndarray) -> np.ndarray:
        return ((p - 1.0) / (P.ratio(tau) * (1.0 - tau) ** m)) ** (1.0 / p)

    def smooth_right(tau: np.ndarray) -> np.ndarray:
        return ((p - 1.0) / (P.ratio(tau) * (1.0 + tau) ** m)) ** (1.0 / p)

    inverse = _InverseIntegral(
        speed,
        _End(-1.0, reachable, exponent, smooth_left),
        _End(1.0, reachable, exponent, smooth_right),
    )
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    u, du = inverse.evaluator()(t_grid)
    a = inverse.t_nodes[0] if reachable else -math.inf
    b = inverse.t_nodes[-1] if reachable else math.inf
    meta = ProfileMeta(p=p, m=m, s0=-1.0, s1=1.0, a=float(a), b=float(b))
    logger.debug("heteroclinic profile p=%s m=%s over %d nodes", p, m, len(inverse.s_nodes))
    return Profile1D("heteroclinic", t_grid, u, du, meta, inverse.evaluator())


# -- super-solution profile -----------------------------------------------------------


@dataclass(frozen=True)
class SupersolutionRoots:
    epsilon: float
    eta: float
    s0: float
    s1: float


def supersolution_roots(h: float, p: float, P: Potential, epsilon: float) -> SupersolutionRoots:
    """Pick η and the roots s0 < 0 < s1 of W(τ) - ετ + η.

    The left root is placed where W'(s0) - ε equals the transversality margin
    ε/10, which gives the η closest to the tangency value; η = ε·s0 - W(s0).
    """
    if not 0 < h < 1:
        raise ParameterError(f"invalid level h={h!r}: expected 0 < h < 1")
    if not epsilon > 0:
        raise InfeasibleError(f"epsilon={epsilon!r} gives no transversal roots; expected epsilon > 0")
    target = (1.0 + _TRANSVERSALITY) * epsilon

    def slope(tau: float) -> float:
        return float(eval_potential_deriv(P, tau, at_wells=True))

    peak = optimize.minimize_scalar(lambda tau: -slope(tau), bounds=(-1.0 + 1e-12, 0.0), method="bounded")
    tau_peak = float(peak.x)
    if slope(tau_peak) <= target:
        raise InfeasibleError(
            f"epsilon={epsilon!r} too large: max W' on (-1, 0) is {slope(tau_peak)!r}, "
            f"need more than {target!r} for a transversal left root"
        )
    s0 = optimize.brentq(lambda tau: slope(tau) - target, -1.0, tau_peak, xtol=1e-15, rtol=4e-16, maxiter=200)
    eta = epsilon * s0 - float(eval_potential(P, s0))

    def gap(tau: float) -> float:
        return float(eval_potential(P, tau)) - epsilon * tau + eta

    if gap(0.0) <= 0:
        raise InfeasibleError(f"epsilon={epsilon!r}: W(0) + eta <= 0, no root pair brackets 0")
    s1 = optimize.brentq(gap, 0.0, 1.0, xtol=1e-15, rtol=4e-16, maxiter=200)
    if s1 < 1.0 - h:
        raise InfeasibleError(f"epsilon={epsilon!r}: right root s1={s1!r} below 1 - h = {1.0 - h!r}")
    if abs(slope(s1) - epsilon) < _TRANSVERSALITY * epsilon:
        raise InfeasibleError(f"epsilon={epsilon!r}: right root s1={s1!r} is not transversal")
    probe = np.linspace(s0, s1, 2001)[1:-1]
    if np.any(np.asarray(eval_potential(P, probe)) - epsilon * probe + eta <= 0):
        raise InfeasibleError(f"epsilon={epsilon!r}: W - eps*tau + eta changes sign inside [s0, s1]")
    return SupersolutionRoots(epsilon=float(epsilon), eta=float(eta), s0=float(s0), s1=float(s1))


def supersolution_profile(h: float, p: float, P: Potential, epsilon: float) -> Profile1D:
    """Solution of p (d/dt)((U')^(p-1)) = W'(U) - ε on [a, b] with U'(a) = U'(b) = 0."""
    if not p > 1:
        raise ParameterError(f"invalid exponent p={p!r}: expected p > 1")
    roots = supersolution_roots(h, p, P, epsilon)
    eps, eta, s0, s1 = roots.epsilon, roots.eta, roots.s0, roots.s1
    w0 = float(eval_potential(P, s0))
    w1 = float(eval_potential(P, s1))

    def gap(tau: np.ndarray) -> np.ndarray:
        return np.asarray(eval_potential(P, tau)) - eps * tau + eta

    def speed(tau: np.ndarray) -> np.ndarray:
        t = np.clip(tau, s0, s1)
        return (np.clip(gap(t), 0.0, None) / (p - 1.0)) ** (1.0 / p)

    def divided(tau: np.ndarray, root: float, w_root: float) -> np.ndarray:
        d = tau - root
        near = np.abs(d) <= 1e-6
        safe = np.where(near, 1.0, d)
        far = (np.asarray(eval_potential(P, tau)) - w_root) / safe
        close = np.asarray(eval_potential_deriv(P, 0.5 * (tau + root)))
        return np.where(near, close, far) - eps

    def smooth_left(tau: np.ndarray) -> np.ndarray:
        return ((p - 1.0) / divided(tau, s0, w0)) ** (1.0 / p)

    def smooth_right(tau: np.ndarray) -> np.ndarray:
        return ((p - 1.0) / -divided(tau, s1, w1)) ** (1.0 / p)

    inverse = _InverseIntegral(
        speed,
        _End(s0, True, -1.0 / p, smooth_left),
        _End(s1, True, -1.0 / p, smooth_right),
    )
    a, b = float(inverse.t_nodes[0]), float(inverse.t_nodes[-1])
    meta = ProfileMeta(p=p, m=P.m, epsilon=eps, eta=eta, s0=s0, s1=s1, a=a, b=b, h=h)
    du = speed(inverse.s_nodes)
    du[0] = 0.0
    du[-1] = 0.0
    logger.info("super-solution profile eps=%s eta=%.6g on [a, b] = [%.6g, %.6g]", eps, eta, a, b)
    return Profile1D("supersolution", inverse.t_nodes.copy(), inverse.s_nodes.copy(), du, meta, inverse.evaluator())


def first_integral_defect(profile: Profile1D, P: Potential) -> np.ndarray:
    """Relative defect of (p-1)(U')^p - W(U) + εU = η at every sample."""
    meta = profile.meta
    lhs = (meta.p - 1.0) * profile.du**meta.p - np.asarray(eval_potential(P, profile.u)) + meta.epsilon * profile.u
    scale = max(abs(meta.eta), 1e-300)
    return np.abs(lhs - meta.eta) / scale


def ode_residual(profile: Profile1D, P: Potential, *, points: int = 401, step: float = 1e-4) -> np.ndarray:
    """p (d/dt)((U')^(p-1)) - W'(U) + ε on interior points, by central differences."""
    meta = profile.meta
    lo = meta.a if math.isfinite(meta.a) else float(profile.t[0])
    hi = meta.b if math.isfinite(meta.b) else float(profile.t[-1])
    margin = 0.02 * (hi - lo)
    t = np.linspace(lo + margin, hi - margin, points)
    _, du_plus = profile.evaluate(t + step)
    _, du_minus = profile.evaluate(t - step)
    u, _ = profile.evaluate(t)
    flux = (du_plus ** (meta.p - 1.0) - du_minus ** (meta.p - 1.0)) / (2.0 * step)
    return meta.p * flux - np.asarray(eval_potential_deriv(P, u)) + meta.epsilon


def supersolution_radius(profile: Profile1D, n: int) -> float:
    """Smallest r with -ε + p(n-1)(U')^(p-1)/(r+t) < 0 on [a, b], and r + a >= 0."""
    meta = profile.meta
    if profile.kind != "supersolution":
        raise ParameterError(f"supersolution profile required, got {profile.kind!r}")
    peak = float(np.max(profile.du)) ** (meta.p - 1.0)
    return meta.p * (n - 1) * peak / meta.epsilon - meta.a


# -- fields from profiles -------------------------------------------------------------


def radial_field(profile: Profile1D, grid: Grid, center, r: float) -> Field:
    """v(x) = U(|x - c| - r), held at U(a) inside and U(b) outside the annulus."""
    dist = grid.distance(center)
    u, _ = profile.evaluate(dist - r)
    return Field.clamped(grid, u)


def planar_field(profile: Profile1D, grid: Grid, *, axis: int = 0, offset: float = 0.0) -> Field:
    coords = grid.axis_coords(axis) - offset
    u, _ = profile.evaluate(coords)
    shape = [1] * grid.n
    shape[axis] = grid.shape[axis]
    return Field.clamped(grid, np.broadcast_to(u.reshape(shape), grid.shape).copy())


def fit_decay_exponent(prof: Profile1D, window: tuple[float, float]) -> float:
    """Negated least-squares slope of log(1+U) against log(1-t) over the window."""
    t_lo, t_hi = window
    if not t_lo < t_hi < 0:
        raise FitError(f"invalid window {window!r}: expected t_lo < t_hi < 0")
    inside = (prof.t >= t_lo) & (prof.t <= t_hi)
    lift = prof.u[inside] + 1.0
    inside_t = prof.t[inside]
    usable = lift > 0
    if int(usable.sum()) < 8:
        raise FitError(f"only {int(usable.sum())} usable samples in window {window!r}; need at least 8")
    slope, _intercept = np.polyfit(np.log(1.0 - inside_t[usable]), np.log(lift[usable]), 1)
    return float(-slope)


def level_weight_integral(T: float, p: float, m: float, P: Potential) -> float:
    """∫ from U(-T) to 0 of W(h)^((p-1)/p) dh."""
    lower, _ = comparison_profile(p, m, -float(T))
    value, _ = integrate.quad(
        lambda level: float(eval_potential(P, level)) ** ((p - 1.0) / p), lower, 0.0, epsrel=1e-10
    )
    return float(value)
