"""Uniform symmetric grids and the quadrature/energy primitives built on them.

Everything downstream runs on a uniform grid over [-R, R] with an odd
number of nodes, so that x = 0 is always a node and reflection x -> -x
is an exact permutation of the node set.  Integrals use the trapezoid
rule, which is superalgebraically accurate for smooth profiles that
decay before the boundary.  The kinetic energy

    T(u) = integral of u'(x)^2 dx

is discretized as the energy of the piecewise-linear interpolant with
homogeneous Dirichlet closure at +-(R+h),

    T_h(u) = sum_i (u_{i+1} - u_i)^2 / h  +  (u_0^2 + u_{n-1}^2) / h,

equivalently the quadratic form of the standard second-order central
difference Laplacian after summation by parts.  Its error for smooth
decaying u is -(h^2/12) * integral(u''^2) + O(h^4), which is what the
tolerance budget of the rest of the package is built around.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import DomainTooSmallError, ValidationError

__all__ = [
    "Grid",
    "GridFunction",
    "integrate",
    "kinetic_energy",
    "normalize",
    "sample",
    "write_csv",
    "read_csv",
]

# Boundary decay required before a kinetic energy is considered meaningful.
DECAY_TOL = 1e-8

# Significant digits used for all text output.  17 round-trips a double.
FLOAT_FMT = ".17g"


@dataclass(frozen=True)
class Grid:
    """Uniform symmetric grid: nodes x_i = -R + i*h, h = 2R/(n-1)."""

    half_width: float
    points: int

    def __post_init__(self):
        if not (self.half_width > 0 and np.isfinite(self.half_width)):
            raise ValidationError("grid", "half_width", f"must be positive and finite, got {self.half_width}")
        if self.points < 16:
            raise ValidationError("grid", "points", f"need at least 16 nodes, got {self.points}")
        if self.points % 2 == 0:
            # x = 0 must be a node; even counts put the origin between nodes.
            raise ValidationError("grid", "points", f"node count must be odd, got {self.points}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.linspace(-self.half_width, self.half_width, self.points)
        x.setflags(write=False)
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.points, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        w.setflags(write=False)
        return w

    @classmethod
    def from_spec(cls, spec: dict) -> "Grid":
        if not isinstance(spec, dict):
            raise ValidationError("grid", "grid", "expected an object with half_width and points")
        known = {"half_width", "points"}
        for key in spec:
            if key not in known:
                raise ValidationError("grid", key, "unknown grid parameter")
        try:
            half_width = float(spec.get("half_width", 40.0))
            points = int(spec.get("points", 4097))
        except (TypeError, ValueError) as exc:
            raise ValidationError("grid", "grid", f"non-numeric entry: {exc}") from None
        return cls(half_width, points)


DEFAULT_GRID_SPEC = {"half_width": 40.0, "points": 4097}


def default_grid() -> Grid:
    return Grid(40.0, 4097)


@dataclass(frozen=True)
class GridFunction:
    """Values of a function sampled on a Grid.  Immutable after construction.

    The dtype declares realness: float64 arrays are real-valued functions,
    complex128 arrays are complex-valued ones.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.points,):
            raise ValidationError(
                "grid", "values", f"expected {self.grid.points} samples, got shape {v.shape}"
            )
        if np.iscomplexobj(v):
            v = v.astype(np.complex128, copy=True)
        else:
            v = v.astype(np.float64, copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def __call__(self, x):
        """Cubic interpolation of the samples at arbitrary points."""
        return interpolate(self, x)


def sample(grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
    return GridFunction(grid, fn(grid.nodes))


def _check_finite(f: GridFunction, op: str) -> None:
    if not np.all(np.isfinite(f.values)):
        raise ValidationError("grid", op, "non-finite sample values")


def integrate(f: GridFunction):
    """Trapezoid quadrature of f over [-R, R]."""
    _check_finite(f, "integrate")
    v = f.values
    h = f.grid.spacing
    total = v.sum() - 0.5 * (v[0] + v[-1])
    result = h * total
    return result if not f.is_real else float(result)


def kinetic_energy(u: GridFunction) -> float:
    """Discrete integral of u'^2 with Dirichlet closure at the boundary.

    Requires a real-valued profile that has decayed below DECAY_TOL at
    +-R; otherwise the Dirichlet closure would misrepresent the tail and
    the grid is simply too small for this profile.
    """
    _check_finite(u, "kinetic_energy")
    if not u.is_real:
        raise ValidationError("grid", "kinetic_energy", "requires a real-valued profile")
    v = u.values
    edge = max(abs(v[0]), abs(v[-1]))
    if edge >= DECAY_TOL:
        raise DomainTooSmallError(
            "grid",
            "kinetic_energy",
            f"boundary value {edge:.3e} exceeds {DECAY_TOL:.0e}; enlarge half_width",
        )
    d = np.diff(v)
    h = u.grid.spacing
    return float((d @ d + v[0] ** 2 + v[-1] ** 2) / h)


def normalize(u: GridFunction) -> GridFunction:
    """Rescale so that integral(|u|^2) = 1.  Rejects the zero function."""
    _check_finite(u, "normalize")
    v = u.values
    mass = integrate(GridFunction(u.grid, (v * np.conj(v)).real))
    if not (mass > 0.0) or not np.isfinite(mass):
        raise ValidationError("grid", "normalize", "zero or non-finite L2 mass")
    return GridFunction(u.grid, v / np.sqrt(mass))


def interpolate(f: GridFunction, x):
    """Local 4-point Lagrange cubic interpolation of the samples.

    Exact at the nodes.  Points outside [-R, R] evaluate to 0, matching
    the Dirichlet picture of profiles that have decayed by the boundary.
    The value at a query point is a fixed linear functional of the four
    surrounding samples, which is what the perturbation machinery needs
    to differentiate through an evaluation exactly.
    """
    xq = np.atleast_1d(np.asarray(x, dtype=float))
    idx, weights = _cubic_stencil(f.grid, xq)
    vals = np.einsum("qk,qk->q", weights, f.values[idx])
    inside = np.abs(xq) <= f.grid.half_width * (1 + 1e-15)
    vals = np.where(inside, vals, 0.0)
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return vals[0]
    return vals


def _cubic_stencil(grid: Grid, xq: np.ndarray):
    """Indices (q, 4) and Lagrange weights (q, 4) of the cubic stencil at xq."""
    h = grid.spacing
    t = (xq + grid.half_width) / h
    base = np.clip(np.floor(t).astype(int), 1, grid.points - 3)
    idx = base[:, None] + np.arange(-1, 3)[None, :]
    # Local coordinate of the query point relative to node `base`.
    s = (t - base)[:, None]
    offs = np.arange(-1, 3, dtype=float)[None, :]
    weights = np.ones_like(idx, dtype=float)
    for m in range(4):
        om = offs[0, m]
        mask = np.arange(4) != m
        weights[:, m] = np.prod((s - offs[:, mask]) / (om - offs[:, mask]), axis=1)
    return idx, weights


def _fmt(x: float) -> str:
    return format(float(x), FLOAT_FMT)


def write_csv(f: GridFunction, path) -> None:
    """Serialize to CSV: header `x,value` for real data, `x,re,im` for complex."""
    buf = io.StringIO()
    x = f.grid.nodes
    if f.is_real:
        buf.write("x,value\n")
        for xi, vi in zip(x, f.values):
            buf.write(f"{_fmt(xi)},{_fmt(vi)}\n")
    else:
        buf.write("x,re,im\n")
        for xi, vi in zip(x, f.values):
            buf.write(f"{_fmt(xi)},{_fmt(vi.real)},{_fmt(vi.imag)}\n")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(buf.getvalue())


def read_csv(path) -> GridFunction:
    """Read a profile written by write_csv, reconstructing its grid."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        rows = [line.strip() for line in fh if line.strip()]
    if header == "x,value":
        complex_data = False
    elif header == "x,re,im":
        complex_data = True
    else:
        raise ValidationError("grid", "csv", f"unrecognized header {header!r}")
    data = np.array([[float(c) for c in row.split(",")] for row in rows])
    if data.shape[1] != (3 if complex_data else 2):
        raise ValidationError("grid", "csv", "column count does not match header")
    x = data[:, 0]
    n = len(x)
    if n < 16:
        raise ValidationError("grid", "csv", f"too few rows ({n}) for a grid")
    h = np.diff(x)
    if not np.allclose(h, h[0], rtol=1e-12, atol=1e-12 * max(1.0, abs(x[-1]))):
        raise ValidationError("grid", "csv", "nodes are not uniformly spaced")
    if abs(x[0] + x[-1]) > 1e-12 * max(1.0, abs(x[-1])):
        raise ValidationError("grid", "csv", "nodes are not symmetric about 0")
    grid = Grid(float(x[-1]), n)
    values = data[:, 1] + 1j * data[:, 2] if complex_data else data[:, 1]
    return GridFunction(grid, values)
