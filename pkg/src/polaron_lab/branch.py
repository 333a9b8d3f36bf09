"""The curve of even positive solutions of -u'' - 2u^3 - Vu = lambda*u.

For each lambda below the lowest eigenvalue lambda_0 of the linearization
-d^2/dx^2 - V there is a unique even positive decaying solution u(lambda),
found here by shooting: integrate outward from u(0) = s, u'(0) = 0 and
adjust the height s until the logarithmic derivative u'/u at a matching
radius x_m equals that of the decaying solution of the linear tail
equation.  The tail log-derivative is obtained by integrating the Riccati
equation r' = -(lambda + V) - r^2 inward from a radius where V has fallen
below 1e-12, which is the stable direction, so the matching radius itself
can stay small enough that the growing mode exp(sqrt(-lambda) x) does not
swamp double precision.  Heights below the solution blow up to +infinity
and heights above it cross zero, so bisection on that dichotomy brackets
the height and Newton (via the variational equation) finishes it off.

The squared norm of u(lambda) decreases strictly as lambda increases and
vanishes at the linearization threshold, so matching the norm to 1 by a
bracketing root solve singles out the normalized solution.  In the free
case V = 0 the family is exactly u = B sech(Bx) with lambda = -B^2 and
norm^2 = 2B, which the tests lean on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import ConvergenceError, RangeError, ValidationError
from .grid import Grid, GridFunction, default_grid

__all__ = [
    "BranchPoint",
    "BranchCurve",
    "lambda0",
    "solve_at_lambda",
    "trace_branch",
    "norm_match",
]

# Potential contributions below this level are treated as absent when
# choosing the tail radius.
POTENTIAL_FLOOR = 1e-12


@dataclass(frozen=True)
class BranchPoint:
    lam: float
    u: GridFunction
    norm2_sq: float
    el_residual: float
    height: float


@dataclass(frozen=True)
class BranchCurve:
    points: tuple

    def norms(self) -> np.ndarray:
        return np.array([p.norm2_sq for p in self.points])

    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])


def lambda0(V, grid: Optional[Grid] = None) -> float:
    """Lowest eigenvalue of -d^2/dx^2 - V on the grid, or 0 if none is negative.

    The eigenvalue bias of the second-order difference operator is
    -(h^2/12) integral(psi''^2) + O(h^4), so the default grid is finer
    than the profile grids elsewhere: 65537 nodes keep the bias near 1e-7.
    """
    grid = grid or Grid(40.0, 65537)
    h = grid.spacing
    x = grid.nodes
    diag = 2.0 / h**2 - np.asarray(V(x), dtype=float)
    off = np.full(grid.points - 1, -1.0 / h**2)
    low = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0), eigvals_only=True)[0]
    return float(low) if low < 0.0 else 0.0


def _vx(V, x: float) -> float:
    return float(V(np.array([x]))[0])


def _matching_radius(V, lam: float, half_width: float) -> tuple:
    """Pick the matching radius x_m and the tail start x_far.

    x_m balances two demands: the cubic term must be negligible there
    (the profile has decayed to ~1e-3), yet exp(kappa*x_m) must stay far
    below 1/eps or the growing mode drowns the shot.  x_far is where the
    potential has fallen below POTENTIAL_FLOOR; between x_m and x_far the
    tail is handled by the Riccati log-derivative, beyond x_far it is a
    pure exponential.
    """
    kappa = math.sqrt(-lam)
    x_pot = 0.0
    if _vx(V, 0.0) >= POTENTIAL_FLOOR:
        # V is symmetric decreasing, so bisect for the crossing.
        if _vx(V, half_width) >= POTENTIAL_FLOOR:
            raise RangeError(
                "branch", "grid.half_width", "potential has not decayed to 1e-12 inside the grid"
            )
        lo, hi = 0.0, half_width
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if _vx(V, mid) >= POTENTIAL_FLOOR:
                lo = mid
            else:
                hi = mid
        x_pot = hi
    u_target = 1e-3 * min(1.0, kappa)
    amp = max(2.0 * kappa, 0.5)
    x_tail = math.log(amp / u_target) / kappa
    # exp(kappa * x_m) <= e^16.2 ~ 1e7 keeps the growing mode resolvable.
    x_m = min(max(2.0, x_tail), 16.2 / kappa, half_width - 1.5)
    u_edge = amp * math.exp(-kappa * x_m)
    if 2.0 * u_edge**2 > 1e-4 * abs(lam):
        raise RangeError(
            "branch",
            "lam",
            f"lambda = {lam}: the cubic term is still {2.0 * u_edge**2:.1e} at the largest "
            "well-conditioned matching radius; enlarge the grid or move lambda down",
        )
    if _vx(V, x_m) >= -lam:
        raise RangeError(
            "branch",
            "lam",
            f"lambda = {lam}: matching radius {x_m:.2f} sits inside the classically "
            "allowed region; move lambda further below the threshold",
        )
    return x_m, max(x_pot, x_m)


@dataclass(frozen=True)
class _Tail:
    """Decaying tail beyond the matching radius, normalized to 1 at x_m."""

    kappa: float
    x_m: float
    x_far: float
    r_m: float
    norm_integral: float  # integral over (x_m, inf) of the squared relative tail
    ode: Optional[object]  # dense (r, W) solution on [x_m, x_far], W = log u up to a shift
    w_m: float

    def eval(self, pts: np.ndarray) -> np.ndarray:
        out = np.empty_like(pts)
        far = pts > self.x_far
        mid = ~far
        if self.ode is None:
            out[mid] = np.exp(-self.kappa * (pts[mid] - self.x_m))
        else:
            out[mid] = np.exp(self.ode(pts[mid])[1] - self.w_m)
        out[far] = math.exp(-self.w_m) * np.exp(-self.kappa * (pts[far] - self.x_far))
        return out


def _tail_solution(V, lam: float, x_m: float, x_far: float) -> _Tail:
    kappa = math.sqrt(-lam)
    if x_far <= x_m + 1e-9:
        return _Tail(kappa, x_m, x_m, -kappa, 1.0 / (2.0 * kappa), None, 0.0)

    def rhs(x, y):
        return [-(lam + _vx(V, x)) - y[0] * y[0], y[0]]

    sol = solve_ivp(
        rhs,
        (x_far, x_m),
        [-kappa, 0.0],
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
        dense_output=True,
    )
    if not sol.success:
        raise ConvergenceError(f"tail log-derivative integration failed at lambda = {lam}")
    r_m, w_m = sol.y[0, -1], sol.y[1, -1]
    mesh = np.linspace(x_m, x_far, max(65, int((x_far - x_m) / 0.002) | 1))
    rel = np.exp(sol.sol(mesh)[1] - w_m)
    integral = float(simpson(rel * rel, x=mesh)) + math.exp(-2.0 * w_m) / (2.0 * kappa)
    return _Tail(kappa, x_m, x_far, float(r_m), integral, sol.sol, float(w_m))


def _shoot(V, lam: float, s: float, x_m: float):
    """Integrate u and its height sensitivity out to x_m.

    State y = (u, u', v, v', q) where v solves the variational equation
    and q accumulates integral(u^2).  Returns ("ok", sol) when x_m is
    reached, ("node", None) when u crosses zero first (height too large)
    and ("blow", None) when u runs away to +infinity (height too small).
    """

    def rhs(x, y):
        u, up, v, vp, _ = y
        vx = _vx(V, x)
        return [up, -(lam + vx) * u - 2.0 * u**3, vp, -(lam + vx + 6.0 * u * u) * v, u * u]

    def node(x, y):
        return y[0]

    node.terminal = True
    node.direction = -1.0

    def blowup(x, y):
        return abs(y[0]) - 1e6

    blowup.terminal = True

    sol = solve_ivp(
        rhs,
        (0.0, x_m),
        [s, 0.0, 1.0, 0.0, 0.0],
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
        dense_output=True,
        events=[node, blowup],
    )
    if sol.t[-1] >= x_m and sol.success:
        return "ok", sol
    if sol.t_events[0].size:
        return "node", None
    if sol.t_events[1].size:
        return "blow", None
    # Step-size collapse without a flagged event: classify by where the
    # trajectory was heading.
    return ("blow", None) if sol.y[0, -1] > s else ("node", None)


def _solve_height(V, lam: float, x_m: float, r_m: float, s_hint: Optional[float]):
    """Height s with u'(x_m) = r_m * u(x_m), by bracketing plus Newton.

    Heights below the solution send the shot to +infinity, heights above
    it push u through zero, and on trajectories that reach x_m the sign
    of the matching defect tells the same story, so a bisection bracket
    always closes in; Newton steps accelerate it whenever the latest
    probe reached the matching radius.
    """
    kappa = math.sqrt(-lam)

    def probe(s):
        tag, sol = _shoot(V, lam, s, x_m)
        if tag != "ok":
            return tag, None, None, None
        u_m, up_m, v_m, vp_m, _ = sol.y[:, -1]
        return tag, sol, up_m - r_m * u_m, vp_m - r_m * v_m

    def below(tag, f):
        return tag == "blow" or (tag == "ok" and f > 0.0)

    s = float(s_hint) if s_hint else kappa
    tag, sol, f, fp = probe(s)
    s_lo = s_hi = None
    if below(tag, f):
        s_lo = s
        for _ in range(60):
            s *= 1.5
            tag, sol, f, fp = probe(s)
            if below(tag, f):
                s_lo = s
            else:
                s_hi = s
                break
    else:
        s_hi = s
        for _ in range(60):
            s /= 1.5
            if s < 1e-9 * kappa:
                break
            tag, sol, f, fp = probe(s)
            if below(tag, f):
                s_lo = s
                break
            s_hi = s
    if s_lo is None or s_hi is None:
        return None

    last_ok = (s, f, fp) if tag == "ok" else None
    for _ in range(100):
        s_next = None
        if last_ok is not None and last_ok[2] not in (None, 0.0):
            cand = last_ok[0] - last_ok[1] / last_ok[2]
            if s_lo < cand < s_hi:
                s_next = cand
        if s_next is None:
            s_next = 0.5 * (s_lo + s_hi)
        tag, sol, f, fp = probe(s_next)
        if tag == "ok":
            last_ok = (s_next, f, fp)
            u_m, up_m = sol.y[0, -1], sol.y[1, -1]
            scale = abs(r_m) * abs(u_m) + abs(up_m)
            if u_m > 0.0 and scale > 0.0 and abs(f) <= 1e-11 * scale:
                return sol, s_next
        if below(tag, f):
            s_lo = s_next
        else:
            s_hi = s_next
        if s_hi - s_lo <= 4e-16 * s_hi:
            # Bracket exhausted at machine precision; take the last
            # matched probe and let the residual certificate judge it.
            if tag == "ok" and sol.y[0, -1] > 0.0:
                return sol, s_next
            return None
    return None


def solve_at_lambda(
    V,
    lam: float,
    grid: Optional[Grid] = None,
    *,
    height_hint: Optional[float] = None,
    lambda0_value: Optional[float] = None,
) -> BranchPoint:
    """Even positive decaying solution at one lambda on the branch."""
    grid = grid or default_grid()
    lam0 = lambda0(V, None) if lambda0_value is None else lambda0_value
    if not (lam < lam0 - 1e-6):
        raise ValidationError(
            "branch", "lam", f"lambda {lam} is not below the linearization threshold {lam0} by 1e-6"
        )
    x_m, x_far = _matching_radius(V, lam, grid.half_width)
    tail = _tail_solution(V, lam, x_m, x_far)
    result = _solve_height(V, lam, x_m, tail.r_m, height_hint)
    if result is None:
        raise ConvergenceError(
            f"height search failed at lambda = {lam} (hint {height_hint}, matching radius {x_m:.2f})"
        )
    sol, s = result
    return _assemble(V, lam, grid, sol, tail, s)


def _assemble(V, lam: float, grid: Grid, sol, tail: _Tail, s: float) -> BranchPoint:
    x = grid.nodes
    ax = np.abs(x)
    values = np.empty(grid.points)
    inner = ax <= tail.x_m
    values[inner] = sol.sol(ax[inner])[0]
    u_m, up_m, v_m, vp_m, q_m = sol.y[:, -1]
    values[~inner] = u_m * tail.eval(ax[~inner])
    u = GridFunction(grid, values)

    norm2_sq = 2.0 * (q_m + u_m * u_m * tail.norm_integral)
    residual = _certify_residual(V, lam, sol, tail, grid.half_width)
    return BranchPoint(lam=lam, u=u, norm2_sq=norm2_sq, el_residual=residual, height=s)


def _certify_residual(V, lam, sol, tail: _Tail, half_width) -> float:
    """A-posteriori sup of |-u'' - 2u^3 - Vu - lambda*u| on a fine mesh.

    The assembled profile (dense ODE output inside the matching radius,
    Riccati tail outside) is differentiated by a fourth-order five-point
    second difference, independent of the integrator's own right-hand
    side, so it also catches junction mismatches.
    """
    hq = 0.004
    x_hi = min(tail.x_far + 4.0, half_width)
    xs = np.arange(0.0, x_hi, hq)
    u_m = sol.y[0, -1]

    def profile(pts):
        vals = np.empty_like(pts)
        inner = pts <= tail.x_m
        if np.any(inner):
            vals[inner] = sol.sol(pts[inner])[0]
        if np.any(~inner):
            vals[~inner] = u_m * tail.eval(pts[~inner])
        return vals

    f = profile(xs)
    # Five-point interior second derivative, O(hq^4).
    d2 = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2] + 16.0 * f[3:-1] - f[4:]) / (12.0 * hq * hq)
    mid = xs[2:-2]
    fm = f[2:-2]
    r = -d2 - 2.0 * fm**3 - np.asarray(V(mid)) * fm - lam * fm
    return float(np.max(np.abs(r)))


def trace_branch(V, lambdas: Sequence[float], grid: Optional[Grid] = None) -> BranchCurve:
    """Solve along an ascending lambda ladder, warm-starting each height.

    Verifies that the squared norms decrease strictly along the ladder
    and raises ConvergenceError naming the offending pair otherwise.
    """
    lams = [float(l) for l in lambdas]
    if sorted(lams) != lams or len(set(lams)) != len(lams):
        raise ValidationError("branch", "lambdas", "ladder must be strictly ascending")
    grid = grid or default_grid()
    lam0 = lambda0(V)
    points = []
    height = None
    for lam in lams:
        pt = solve_at_lambda(V, lam, grid, height_hint=height, lambda0_value=lam0)
        points.append(pt)
        height = pt.height
    norms = [p.norm2_sq for p in points]
    for a, b, la, lb in zip(norms, norms[1:], lams, lams[1:]):
        if not (a > b):
            raise ConvergenceError(
                f"norm monotonicity violated: norm^2({la}) = {a!r} <= norm^2({lb}) = {b!r}"
            )
    return BranchCurve(points=tuple(points))


def norm_match(
    V,
    grid: Optional[Grid] = None,
    window: Optional[tuple] = None,
):
    """Find lambda* with norm^2(lambda*) = 1; returns (lambda*, u*).

    The norm decreases in lambda, so the root is bracketed by checking
    the window ends and then closed in by brentq.  The default window
    sits between lambda_0 - 4 and lambda_0 - 0.05.
    """
    grid = grid or default_grid()
    lam0 = lambda0(V)
    if window is None:
        window = (lam0 - 4.0, lam0 - 0.05)
    lo, hi = float(window[0]), float(window[1])
    if not (lo < hi < lam0):
        raise ValidationError("branch", "window", f"need lo < hi < lambda0 = {lam0}")

    cache: dict = {}

    def norm_err(lam: float) -> float:
        if lam not in cache:
            hint = None
            if cache:
                nearest = min(cache, key=lambda l: abs(l - lam))
                hint = cache[nearest].height
            cache[lam] = solve_at_lambda(V, lam, grid, height_hint=hint, lambda0_value=lam0)
        return cache[lam].norm2_sq - 1.0

    f_lo, f_hi = norm_err(lo), norm_err(hi)
    if not (f_lo > 0.0 > f_hi):
        raise RangeError(
            "branch",
            "window",
            f"norm^2 - 1 is {f_lo:.3e} at {lo} and {f_hi:.3e} at {hi}; widen the window to bracket 1",
        )
    lam_star = brentq(norm_err, lo, hi, xtol=1e-13, rtol=8.9e-16)
    norm_err(lam_star)
    pt = cache[lam_star]
    return pt.lam, pt.u
