"""Constrained minimization of the one-dimensional polaron energy functional.

The object of study is

    E_V(u) = integral( u'(x)^2 - u(x)^4 - V(x) u(x)^2 ) dx

minimized over real profiles with integral(u^2) = 1, for an external
potential V that is nonnegative, even, and nonincreasing away from the
origin.  The infimum e(V) is negative for every such V (the free case
V = 0 gives e(0) = -1/12 with minimizer (1/2) sech(x/2)), and a
minimizer solves the Euler-Lagrange equation

    -u'' - 2 u^3 - V u = lambda u,

whose multiplier satisfies lambda = e(V) - integral(u^4).

Discretely, the functional is assembled from the grid module's kinetic
form and trapezoid quadrature, and minimized by projected gradient
descent on the unit L2 sphere with Barzilai-Borwein step selection and
a nonmonotone acceptance test.  The descent operates in the quadrature
inner product <a, b> = sum_i w_i a_i b_i, in which the constraint is the
unit sphere and the stationarity residual reduces, at interior nodes, to
the discretized Euler-Lagrange residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceError, ValidationError
from .grid import (
    Grid,
    GridFunction,
    default_grid,
    integrate,
    interpolate,
    kinetic_energy,
    normalize,
    sample,
)

__all__ = [
    "Potential",
    "TabulatedPotential",
    "PekarResult",
    "MinimizeOptions",
    "eval_pekar",
    "minimize",
    "lagrange_multiplier",
    "el_residual",
    "scale",
    "recenter_peak",
]

POTENTIAL_KINDS = ("sech2", "gaussian", "lorentzian", "zero")


@dataclass(frozen=True)
class Potential:
    """Symmetric-decreasing attractive potential, V(x) >= 0.

    kinds:
        sech2       V0 / cosh(x/w)^2
        gaussian    V0 * exp(-(x/w)^2)
        lorentzian  V0 / (1 + (x/w)^2)
        zero        identically 0
    """

    kind: str
    amplitude: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValidationError("pekar", "potential.kind", f"unknown kind {self.kind!r}, expected one of {POTENTIAL_KINDS}")
        if not (np.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValidationError("pekar", "potential.amplitude", f"must be >= 0, got {self.amplitude}")
        if not (np.isfinite(self.width) and self.width > 0):
            raise ValidationError("pekar", "potential.width", f"must be > 0, got {self.width}")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        t = x / self.width
        if self.kind == "sech2":
            return self.amplitude / np.cosh(t) ** 2
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-(t**2))
        return self.amplitude / (1.0 + t**2)

    @classmethod
    def from_spec(cls, spec: dict) -> "Potential":
        if not isinstance(spec, dict):
            raise ValidationError("pekar", "potential", "expected an object with a 'kind' entry")
        kind = spec.get("kind")
        if kind is None:
            raise ValidationError("pekar", "potential.kind", "missing")
        known = {"kind", "amplitude", "width"}
        for key in spec:
            if key not in known:
                raise ValidationError("pekar", f"potential.{key}", "unknown parameter")
        try:
            amplitude = float(spec.get("amplitude", 0.0))
            width = float(spec.get("width", 1.0))
        except (TypeError, ValueError) as exc:
            raise ValidationError("pekar", "potential", f"non-numeric entry: {exc}") from None
        return cls(str(kind), amplitude, width)


class TabulatedPotential:
    """Potential given by samples on a grid, interpolated cubically.

    Accepted when the samples themselves are nonnegative, even, and
    nonincreasing away from the origin (up to rounding slack).
    """

    def __init__(self, gf: GridFunction):
        v = gf.values
        if not gf.is_real:
            raise ValidationError("pekar", "potential.values", "must be real")
        scale_tol = 1e-12 * (1.0 + float(np.max(np.abs(v))))
        if np.min(v) < -scale_tol:
            raise ValidationError("pekar", "potential.values", "negative samples")
        if np.max(np.abs(v - v[::-1])) > scale_tol:
            raise ValidationError("pekar", "potential.values", "samples are not even")
        half = v[gf.grid.points // 2 :]
        if np.max(np.diff(half)) > scale_tol:
            raise ValidationError("pekar", "potential.values", "samples increase away from the origin")
        self.profile = gf
        self.amplitude = float(v[gf.grid.points // 2])

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0.0

    def __call__(self, x):
        return np.maximum(interpolate(self.profile, x), 0.0)


@dataclass(frozen=True)
class PekarResult:
    """Converged minimizer bundle for one potential."""

    u: GridFunction
    energy: float
    multiplier: float
    el_residual: float
    iterations: int


@dataclass(frozen=True)
class MinimizeOptions:
    tol: float = 1e-8
    max_iter: int = 200_000
    initial: Optional[GridFunction] = None


def free_minimizer(grid: Grid) -> GridFunction:
    """(1/2) sech(x/2), the exact free-case minimizer and default start."""
    return sample(grid, lambda x: 0.5 / np.cosh(0.5 * x))


def eval_pekar(u: GridFunction, V) -> float:
    """Energy E_V(u) of a normalized profile.  Rejects unnormalized input."""
    mass = integrate(GridFunction(u.grid, u.values**2))
    if abs(mass - 1.0) > 1e-8:
        raise ValidationError("pekar", "u", f"profile not normalized: integral(u^2) = {mass!r}")
    x = u.grid.nodes
    quartic = integrate(GridFunction(u.grid, u.values**4))
    pot = integrate(GridFunction(u.grid, V(x) * u.values**2))
    return kinetic_energy(u) - quartic - pot


def lagrange_multiplier(u: GridFunction, V) -> float:
    """lambda = integral(u'^2 - 2 u^4 - V u^2) for a normalized critical point."""
    x = u.grid.nodes
    quartic = integrate(GridFunction(u.grid, u.values**4))
    pot = integrate(GridFunction(u.grid, V(x) * u.values**2))
    return kinetic_energy(u) - 2.0 * quartic - pot


def el_residual(u: GridFunction, lam: float, V) -> float:
    """Sup norm over interior nodes of -u'' - 2u^3 - Vu - lambda*u."""
    v = u.values
    h = u.grid.spacing
    x = u.grid.nodes
    d2 = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    inner = v[1:-1]
    r = -d2 - 2.0 * inner**3 - V(x[1:-1]) * inner - lam * inner
    return float(np.max(np.abs(r)))


def scale(u: GridFunction, alpha: float) -> GridFunction:
    """Mass-preserving dilation u(x) -> sqrt(alpha) u(alpha x).

    The scaled profile lives on the grid of half-width R/alpha with the
    same node count, so its samples are exactly sqrt(alpha) times the
    original ones and no interpolation occurs.  The scaling identity
    integral(phi'^2) - a*integral(phi^4) - a^2*integral(V(a x) phi^2)
    = a^2 * E_V(u) then holds exactly at the discrete level.
    """
    if not (alpha > 0 and np.isfinite(alpha)):
        raise ValidationError("pekar", "alpha", f"must be positive and finite, got {alpha}")
    new_grid = Grid(u.grid.half_width / alpha, u.grid.points)
    return GridFunction(new_grid, math.sqrt(alpha) * u.values)


def recenter_peak(u: GridFunction) -> GridFunction:
    """Shift by whole nodes so the density peak sits at x = 0."""
    shift = u.grid.points // 2 - int(np.argmax(np.abs(u.values)))
    if shift == 0:
        return u
    out = np.zeros_like(u.values)
    if shift > 0:
        out[shift:] = u.values[:-shift]
    else:
        out[:shift] = u.values[-shift:]
    return GridFunction(u.grid, out)


# ---------------------------------------------------------------------------
# descent engine
#
# Shared with the perturbation module, which adds one extra energy term
# delta * <W, u^2>.  The measure hook supplies the term's value and its
# exact discrete gradient, either from a density on the nodes or from a
# point evaluation functional.


class _DensityTerm:
    """delta * sum_i w_i W_i u_i^2 for a density W sampled on the nodes."""

    def __init__(self, w_quad: np.ndarray, density: np.ndarray, delta: float):
        self.wW = w_quad * density
        self.delta = delta

    def value(self, u: np.ndarray) -> float:
        return self.delta * float(self.wW @ (u * u))

    def add_gradient(self, u: np.ndarray, g: np.ndarray) -> None:
        g += 2.0 * self.delta * self.wW * u


class _PointTerm:
    """delta * (c . u)^2 for a fixed evaluation functional c (cubic stencil)."""

    def __init__(self, idx: np.ndarray, coeffs: np.ndarray, n: int, delta: float):
        self.c = np.zeros(n)
        np.add.at(self.c, idx, coeffs)
        self.delta = delta

    def value(self, u: np.ndarray) -> float:
        return self.delta * float(self.c @ u) ** 2

    def add_gradient(self, u: np.ndarray, g: np.ndarray) -> None:
        g += (2.0 * self.delta * float(self.c @ u)) * self.c


@dataclass
class _DescentState:
    u: np.ndarray
    energy: float
    multiplier: float
    residual: float
    iterations: int
    converged: bool


def _descend(
    grid: Grid,
    vx: np.ndarray,
    u0: np.ndarray,
    *,
    term=None,
    tol: float = 1e-8,
    max_iter: int = 200_000,
    energy_floor: Optional[float] = None,
) -> _DescentState:
    h = grid.spacing
    w = grid.weights.copy()
    n = grid.points
    inv_h2 = 1.0 / h**2

    def second_diff(u):
        au = np.empty_like(u)
        au[1:-1] = (2.0 * u[1:-1] - u[:-2] - u[2:]) * inv_h2
        au[0] = (2.0 * u[0] - u[1]) * inv_h2
        au[-1] = (2.0 * u[-1] - u[-2]) * inv_h2
        return au

    def w_normalize(u):
        return u / math.sqrt(float(w @ (u * u)))

    def energy_of(u):
        d = np.diff(u)
        kin = (d @ d + u[0] ** 2 + u[-1] ** 2) / h
        e = kin - float(w @ u**4) - float(w @ (vx * u * u))
        if term is not None:
            e += term.value(u)
        return e

    def grad_of(u):
        g = 2.0 * h * second_diff(u) - 4.0 * w * u**3 - 2.0 * w * vx * u
        if term is not None:
            term.add_gradient(u, g)
        return g

    u = w_normalize(u0.astype(float).copy())
    energy = energy_of(u)
    memory = [energy]
    lipschitz = 8.0 * inv_h2 + 2.0 * float(np.max(vx)) + 12.0 * float(np.max(u * u)) + 4.0
    tau = 1.0 / lipschitz
    tau_min, tau_max = 1e-4 / lipschitz, 1e4

    prev_u = None
    prev_gt = None
    best = None
    stagnant = 0

    for it in range(1, max_iter + 1):
        g = grad_of(u)
        lam = 0.5 * float(g @ u)
        grad_t = g / w - 2.0 * lam * u
        residual = 0.5 * float(np.max(np.abs(grad_t[1:-1])))

        if best is None or residual < best.residual:
            best = _DescentState(u.copy(), energy, lam, residual, it, False)
        if residual <= tol:
            return _DescentState(u, energy, lam, residual, it, True)

        if prev_u is not None:
            s = u - prev_u
            y = grad_t - prev_gt
            sy = float(w @ (s * y))
            if sy > 0:
                tau = float(w @ (s * s)) / sy
            else:
                tau *= 2.0
            tau = min(max(tau, tau_min), tau_max)
        prev_u = u.copy()
        prev_gt = grad_t.copy()

        gt_norm2 = float(w @ (grad_t * grad_t))
        e_ref = max(memory)
        step = tau
        accepted = False
        for _ in range(60):
            trial = w_normalize(u - step * grad_t)
            e_trial = energy_of(trial)
            if e_trial <= e_ref - 1e-4 * step * gt_norm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # No step length made progress; reset the BB memory and retry
            # from a conservative step before giving up.
            prev_u = prev_gt = None
            tau = max(0.25 * tau, tau_min)
            stagnant += 1
            if stagnant > 5:
                raise ConvergenceError(
                    f"descent stagnated at residual {residual:.3e} after {it} iterations",
                    best=best,
                )
            continue
        stagnant = 0

        if energy_floor is not None and e_trial < energy_floor:
            raise ValidationError(
                "perturb",
                "delta",
                f"energy fell below {energy_floor:.3e}; functional appears unbounded below",
            )

        delta_e = abs(e_trial - energy)
        u, energy = trial, e_trial
        memory.append(energy)
        if len(memory) > 10:
            memory.pop(0)
        if delta_e <= 1e-14:
            # Energy has flattened to rounding level; see whether the
            # stationarity residual agrees that we are done.
            g = grad_of(u)
            lam = 0.5 * float(g @ u)
            grad_t = g / w - 2.0 * lam * u
            residual = 0.5 * float(np.max(np.abs(grad_t[1:-1])))
            if residual <= tol:
                return _DescentState(u, energy, lam, residual, it, True)

    raise ConvergenceError(
        f"no convergence within {max_iter} iterations (residual {best.residual:.3e})",
        best=best,
    )


def _polish_tail(grid: Grid, vx: np.ndarray, u: np.ndarray, lam: float) -> np.ndarray:
    """Resolve the far tail by the linearized Euler-Lagrange recurrence.

    Descent resolves the profile down to roughly the residual tolerance;
    below that the exponential tail is iteration noise.  Where |u| has
    dropped under a cutoff the cubic term is negligible (< cutoff^3) and
    the stationarity equation is the linear three-term recurrence
    (-D2 - V - lambda) u = 0, a tridiagonal M-matrix problem once
    -lambda - V > 0.  Solving it with the converged interior value as
    boundary data reconstructs the decaying tail exactly (to rounding),
    in particular keeping it positive.
    """
    from scipy.linalg import solve_banded

    h2 = grid.spacing**2
    cutoff = 1e-9 * float(np.max(np.abs(u)))
    big = np.abs(u) >= cutoff
    if not np.any(big):
        return u
    lo, hi = int(np.argmax(big)), int(len(u) - 1 - np.argmax(big[::-1]))
    out = u.copy()
    for seg, anchor in (((0, lo), lo), ((hi + 1, len(u)), hi)):
        start, stop = seg
        m = stop - start
        if m <= 0:
            continue
        q = -lam - vx[start:stop]
        if np.min(q) <= 0:
            continue  # linearization not diagonally dominant here; leave as is
        diag = 2.0 + h2 * q
        ab = np.zeros((3, m))
        ab[0, 1:] = -1.0
        ab[1, :] = diag
        ab[2, :-1] = -1.0
        rhs = np.zeros(m)
        if anchor == lo:
            rhs[-1] = u[lo]
        else:
            rhs[0] = u[hi]
        out[start:stop] = solve_banded((1, 1), ab, rhs)
    return out


def minimize(V, grid: Optional[Grid] = None, opts: Optional[MinimizeOptions] = None) -> PekarResult:
    """Minimize E_V over the unit sphere; see the module docstring.

    Returns the converged minimizer with its energy, multiplier, final
    Euler-Lagrange residual, and iteration count.  Raises
    ConvergenceError (carrying the best iterate) if the cap is hit.
    """
    grid = grid or default_grid()
    opts = opts or MinimizeOptions()
    if opts.initial is not None:
        if opts.initial.grid != grid:
            raise ValidationError("pekar", "initial", "initial profile lives on a different grid")
        u0 = np.abs(opts.initial.values)
    elif grid.points > 6000:
        # Grid continuation: the descent iteration count grows like the
        # condition number 1/h^2, so cold starts on fine grids crawl.
        # Solve at half resolution first and interpolate.
        coarse = minimize(V, Grid(grid.half_width, (grid.points - 1) // 2 + 1), opts)
        u0 = np.abs(np.asarray(coarse.u(grid.nodes), dtype=float))
    else:
        u0 = free_minimizer(grid).values
    vx = np.asarray(V(grid.nodes), dtype=float)
    state = _descend(grid, vx, u0, tol=opts.tol, max_iter=opts.max_iter)

    values = _polish_tail(grid, vx, state.u, state.multiplier)
    w = grid.weights
    values = values / math.sqrt(float(w @ (values * values)))
    u = GridFunction(grid, values)
    energy = eval_pekar(u, V)
    lam = lagrange_multiplier(u, V)
    return PekarResult(
        u=u,
        energy=energy,
        multiplier=lam,
        el_residual=el_residual(u, lam, V),
        iterations=state.iterations,
    )
