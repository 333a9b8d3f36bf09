"""Perturbed ground energy e(V + delta*W) and its one-sided brackets.

W is a probability measure (dirac, gaussian, or indicator) paired with
functions on the grid; the perturbed functional adds delta * <W, u^2> to
the Pekar energy.  The map delta -> e(V + delta*W) is an infimum of
affine functions of delta, hence concave, and its difference quotients
are bracketed by the pairings against the unperturbed and perturbed
minimizers:

    <W, u_V^2>  >=  (e(V + delta*W) - e(V)) / delta  >=  <W, u_delta^2>

for delta > 0, with both inequalities reversed for delta < 0.  As delta
shrinks the bracket closes onto the derivative at zero, <W, u_V^2>,
which hf_derivative returns directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import pekar
from .errors import RangeError, ValidationError
from .grid import Grid, GridFunction, _cubic_stencil, default_grid

__all__ = [
    "MEASURE_KINDS",
    "TestMeasure",
    "PerturbResult",
    "pair",
    "perturbed_energy",
    "hf_derivative",
    "bracket_check",
]

MEASURE_KINDS = ("dirac", "gaussian", "indicator")

# Largest perturbation strength the small-delta analysis is trusted for.
DELTA_CAP = 0.5


@dataclass(frozen=True)
class TestMeasure:
    """Probability measure used to probe the ground energy.

    kind "dirac" is a point mass at center (width ignored), "gaussian"
    has density exp(-((x-center)/width)^2) / (width sqrt(pi)), and
    "indicator" is uniform on [center - width, center + width].
    """

    kind: str
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ValidationError(
                "perturb", "kind", f"unknown measure kind {self.kind!r}; expected one of {MEASURE_KINDS}"
            )
        if not np.isfinite(self.center):
            raise ValidationError("perturb", "center", "center must be finite")
        if self.kind != "dirac" and not (self.width > 0 and np.isfinite(self.width)):
            raise ValidationError("perturb", "width", "width must be positive and finite")

    @staticmethod
    def from_spec(spec: dict) -> "TestMeasure":
        known = {"kind", "center", "width"}
        extra = set(spec) - known
        if extra:
            raise ValidationError("perturb", "measure", f"unknown keys {sorted(extra)}")
        if "kind" not in spec:
            raise ValidationError("perturb", "measure", "missing key 'kind'")
        return TestMeasure(
            kind=str(spec["kind"]),
            center=float(spec.get("center", 0.0)),
            width=float(spec.get("width", 1.0)),
        )

    def density(self, grid: Grid) -> np.ndarray:
        """Nodal density, renormalized so the trapezoid mass is exactly 1."""
        if self.kind == "dirac":
            raise ValidationError("perturb", "kind", "a dirac measure has no nodal density")
        x = grid.nodes
        if self.kind == "gaussian":
            raw = np.exp(-(((x - self.center) / self.width) ** 2)) / (self.width * math.sqrt(math.pi))
        else:
            raw = (np.abs(x - self.center) <= self.width) / (2.0 * self.width)
        mass = float(grid.weights @ raw)
        if mass < 0.5:
            raise RangeError(
                "perturb", "measure", f"measure mass inside the grid is only {mass:.3g}; enlarge the grid"
            )
        return raw / mass


def pair(W: TestMeasure, f: GridFunction) -> float:
    """The pairing <W, f>; for a dirac measure a cubic interpolation of f."""
    if W.kind == "dirac":
        if abs(W.center) > f.grid.half_width:
            raise RangeError("perturb", "center", "dirac center lies outside the grid")
        return float(f(W.center))
    return float(f.grid.weights @ (W.density(f.grid) * f.values))


@dataclass(frozen=True)
class PerturbResult:
    delta: float
    energy: float
    u: GridFunction


@lru_cache(maxsize=8)
def _base(V, grid: Grid) -> pekar.PekarResult:
    return pekar.minimize(V, grid)


def _measure_term(W: TestMeasure, grid: Grid, delta: float):
    if W.kind == "dirac":
        if abs(W.center) > grid.half_width:
            raise RangeError("perturb", "center", "dirac center lies outside the grid")
        idx, coeffs = _cubic_stencil(grid, np.array([W.center]))
        return pekar._PointTerm(idx[0], coeffs[0], grid.points, delta), None
    dens = W.density(grid)
    return pekar._DensityTerm(grid.weights, dens, delta), dens


def perturbed_energy(
    V,
    W: TestMeasure,
    delta: float,
    grid: Optional[Grid] = None,
    opts: Optional[pekar.MinimizeOptions] = None,
) -> PerturbResult:
    """Minimize E_V(u) + delta * <W, u^2> over the unit sphere.

    Descent is warm-started from the unperturbed minimizer, so for
    delta = 0 it terminates immediately on u_V and reproduces e(V)
    exactly.  A run whose energy dives below a generous bound is
    reported as a rejected delta (the functional has lost its lower
    bound at this strength).
    """
    delta = float(delta)
    if not (abs(delta) <= DELTA_CAP):
        raise ValidationError("perturb", "delta", f"|delta| = {abs(delta)} exceeds the cap {DELTA_CAP}")
    grid = grid or default_grid()
    opts = opts or pekar.MinimizeOptions()
    base = _base(V, grid)

    term, dens = _measure_term(W, grid, delta)
    vx = np.asarray(V(grid.nodes), dtype=float)
    floor = base.energy - 10.0 * (1.0 + abs(delta))
    state = pekar._descend(
        grid,
        vx,
        base.u.values.copy(),
        term=term,
        tol=opts.tol,
        max_iter=opts.max_iter,
        energy_floor=floor,
    )

    # Polish the far tails with the linearized equation; the smooth part
    # of the measure joins the potential there, a point mass cannot.
    vx_eff = vx if dens is None else vx - delta * dens
    values = pekar._polish_tail(grid, vx_eff, state.u, state.multiplier)
    w = grid.weights
    values = values / math.sqrt(float(w @ (values * values)))
    u = GridFunction(grid, values)
    u_sq = GridFunction(grid, values * values)
    energy = pekar.eval_pekar(u, V) + delta * pair(W, u_sq)
    return PerturbResult(delta=delta, energy=energy, u=u)


def hf_derivative(V, W: TestMeasure, grid: Optional[Grid] = None) -> float:
    """d/d delta at 0 of e(V + delta*W), which equals <W, u_V^2>."""
    if getattr(V, "is_zero", False):
        raise ValidationError(
            "perturb", "V", "the free potential has a translation family, not a unique minimizer"
        )
    grid = grid or default_grid()
    base = _base(V, grid)
    u_sq = GridFunction(grid, base.u.values**2)
    return pair(W, u_sq)


def bracket_check(
    V,
    W: TestMeasure,
    delta: float,
    grid: Optional[Grid] = None,
) -> tuple:
    """Two-sided bracket of the difference quotient at one delta.

    Returns (upper, quotient, lower) = (<W, u_V^2>,
    (e(V + delta*W) - e(V)) / delta, <W, u_delta^2>) and asserts the
    variational ordering upper >= quotient >= lower (reversed for
    delta < 0) with 1e-9 slack.
    """
    delta = float(delta)
    if delta == 0.0:
        raise ValidationError("perturb", "delta", "delta must be nonzero")
    if abs(delta) > 0.25:
        raise ValidationError("perturb", "delta", f"|delta| = {abs(delta)} exceeds the bracket cap 0.25")
    grid = grid or default_grid()
    base = _base(V, grid)
    u_sq = GridFunction(grid, base.u.values**2)
    upper = pair(W, u_sq)
    pr = perturbed_energy(V, W, delta, grid)
    quotient = (pr.energy - base.energy) / delta
    lower = pair(W, GridFunction(grid, pr.u.values**2))
    slack = 1e-9
    ordered = (upper >= quotient - slack and quotient >= lower - slack) if delta > 0 else (
        upper <= quotient + slack and quotient <= lower + slack
    )
    if not ordered:
        raise ValidationError(
            "perturb",
            "bracket",
            f"variational ordering violated at delta = {delta}: "
            f"upper {upper!r}, quotient {quotient!r}, lower {lower!r}",
        )
    return upper, quotient, lower
