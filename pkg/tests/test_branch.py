import math

import numpy as np
import pytest

from polaron_lab import branch, pekar
from polaron_lab.errors import RangeError, ValidationError
from polaron_lab.grid import Grid, default_grid


ZERO = pekar.Potential("zero")


def test_lambda0_poschl_teller_ladder(sech2):
    # l(l+1) sech^2 wells have ground eigenvalue -l^2
    assert abs(branch.lambda0(sech2) + 1.0) < 1e-6
    deep = pekar.Potential("sech2", 6.0, 1.0)
    assert abs(branch.lambda0(deep) + 4.0) < 1e-6


def test_lambda0_free_is_zero():
    assert abs(branch.lambda0(ZERO)) < 1e-6


def test_free_point_closed_form():
    # u = B sech(Bx) at lambda = -B^2, squared norm 2B, height B
    pt = branch.solve_at_lambda(ZERO, -0.49, lambda0_value=0.0)
    B = 0.7
    assert abs(pt.norm2_sq - 2.0 * B) < 1e-8
    assert abs(pt.height - B) < 1e-8
    x = pt.u.grid.nodes
    assert np.max(np.abs(pt.u.values - B / np.cosh(B * x))) < 1e-7
    assert pt.el_residual < 1e-8


def test_branch_rejects_lambda_at_threshold(sech2):
    lam0 = branch.lambda0(sech2)
    with pytest.raises(ValidationError):
        branch.solve_at_lambda(sech2, lam0 + 0.5, lambda0_value=lam0)


def test_branch_needs_room_for_the_tail(sech2):
    # V(3) is far above the decay floor, so no matching radius exists
    with pytest.raises(RangeError):
        branch.solve_at_lambda(sech2, -2.0, Grid(3.0, 257), lambda0_value=-1.0)


def test_trace_branch_monotone_norms(sech2):
    lams = np.linspace(-2.4, -1.3, 5)
    curve = branch.trace_branch(sech2, lams)
    norms = curve.norms()
    assert np.all(np.diff(norms) < 0)
    assert np.all([p.el_residual < 1e-7 for p in curve.points])
    assert np.allclose(curve.lambdas(), lams)


def test_trace_branch_rejects_unsorted_ladder(sech2):
    with pytest.raises(ValidationError):
        branch.trace_branch(sech2, [-1.5, -2.0])
    with pytest.raises(ValidationError):
        branch.trace_branch(sech2, [-2.0, -2.0])


def test_norm_match_free_case():
    # norm^2(lambda) = 2 sqrt(-lambda) crosses 1 at lambda = -1/4
    lam_star, u = branch.norm_match(ZERO)
    assert abs(lam_star + 0.25) < 1e-9
    x = u.grid.nodes
    assert np.max(np.abs(u.values - 0.5 / np.cosh(x / 2.0))) < 1e-8


def test_norm_match_agrees_with_minimizer_multiplier(sech2):
    """The matched lambda equals the minimizer's Lagrange multiplier.

    The shooting side is h-free (its error is ODE tolerance), while the
    minimizer's multiplier carries h^2 bias, removed by Richardson over
    a grid pair before comparison.
    """
    lam_star, _ = branch.norm_match(sech2)
    m1 = pekar.minimize(sech2, Grid(40.0, 4097)).multiplier
    m2 = pekar.minimize(sech2, Grid(40.0, 8193)).multiplier
    richardson = (4.0 * m2 - m1) / 3.0
    assert abs(lam_star - richardson) < 5e-7


def test_norm_match_window_must_bracket(sech2):
    with pytest.raises(RangeError):
        branch.norm_match(sech2, window=(-9.0, -7.0))
