import numpy as np
import pytest
from scipy.integrate import quad

from polaron_lab import pekar, perturb
from polaron_lab.errors import RangeError, ValidationError
from polaron_lab.grid import Grid, default_grid, integrate, sample


def test_measure_validation_and_spec():
    with pytest.raises(ValidationError):
        perturb.TestMeasure("cauchy", 0.0, 1.0)
    with pytest.raises(ValidationError):
        perturb.TestMeasure("gaussian", 0.0, -1.0)
    with pytest.raises(ValidationError):
        perturb.TestMeasure.from_spec({"kind": "dirac", "middle": 0.0})
    W = perturb.TestMeasure.from_spec({"kind": "indicator", "center": 1.0, "width": 0.5})
    assert W.kind == "indicator" and W.center == 1.0


def test_density_has_unit_mass():
    gr = default_grid()
    for spec in ({"kind": "gaussian", "width": 0.5}, {"kind": "indicator", "width": 2.0}):
        W = perturb.TestMeasure.from_spec(spec)
        dens = W.density(gr)
        assert float(gr.weights @ dens) == pytest.approx(1.0, abs=1e-14)


def test_dirac_pairing_is_point_evaluation():
    gr = Grid(20.0, 2049)
    f = sample(gr, lambda x: np.exp(-0.5 * x * x))
    W = perturb.TestMeasure("dirac", 0.3)
    # cubic-stencil evaluation, so h^4 accuracy rather than exactness
    assert abs(perturb.pair(W, f) - np.exp(-0.5 * 0.09)) < 1e-7


def test_dirac_outside_box_rejected():
    gr = Grid(5.0, 129)
    f = sample(gr, lambda x: np.zeros_like(x))
    with pytest.raises(RangeError):
        perturb.pair(perturb.TestMeasure("dirac", 7.0), f)


def test_gaussian_pairing_against_quadrature():
    gr = default_grid()
    f = sample(gr, lambda x: 1.0 / np.cosh(x / 2.0))
    W = perturb.TestMeasure("gaussian", 0.0, 0.5)
    ref, _ = quad(
        lambda x: np.exp(-((x / 0.5) ** 2)) / (0.5 * np.sqrt(np.pi)) / np.cosh(x / 2.0),
        -np.inf,
        np.inf,
    )
    assert abs(perturb.pair(W, f) - ref) < 1e-9


def test_perturbed_energy_zero_delta_is_base(sech2, gauss_half, sech2_base):
    res = perturb.perturbed_energy(sech2, gauss_half, 0.0)
    assert res.energy == pytest.approx(sech2_base.energy, abs=1e-12)


def test_perturbed_energy_monotone_in_delta(sech2, gauss_half, sech2_base):
    # the probe enters with a plus sign, so its derivative is the
    # positive pairing and the energy rises with delta
    up = perturb.perturbed_energy(sech2, gauss_half, 0.2).energy
    down = perturb.perturbed_energy(sech2, gauss_half, -0.2).energy
    assert down < sech2_base.energy < up


def test_delta_cap(sech2, gauss_half):
    with pytest.raises(ValidationError):
        perturb.perturbed_energy(sech2, gauss_half, 0.7)
    with pytest.raises(ValidationError):
        perturb.bracket_check(sech2, gauss_half, 0.3)
    with pytest.raises(ValidationError):
        perturb.bracket_check(sech2, gauss_half, 0.0)


def test_bracket_single_delta(sech2, gauss_half):
    upper, quotient, lower = perturb.bracket_check(sech2, gauss_half, 0.1)
    assert upper >= quotient - 1e-9
    assert quotient >= lower - 1e-9


def test_bracket_reversed_for_negative_delta(sech2, gauss_half):
    upper, quotient, lower = perturb.bracket_check(sech2, gauss_half, -0.1)
    assert upper <= quotient + 1e-9
    assert quotient <= lower + 1e-9


def test_hf_derivative_consistency(sech2, sech2_base):
    # the derivative is the pairing of W with the base ground density
    W = perturb.TestMeasure("dirac", 0.0)
    val = perturb.hf_derivative(sech2, W)
    u0 = float(sech2_base.u(0.0))
    assert abs(val - u0 * u0) < 1e-12


def test_hf_derivative_rejects_free_case(gauss_half):
    # translation-degenerate minimizers have no well-defined pairing
    with pytest.raises(ValidationError):
        perturb.hf_derivative(pekar.Potential("zero"), gauss_half)
