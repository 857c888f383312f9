import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msturm.core import (
    BoundaryCoefficient,
    DimensionError,
    PotentialGrid,
    Problem,
    Projector,
    SpectralData,
    SpectralDatum,
    canonicalize_multiplets,
    shift_spectrum,
    validate_problem,
    validate_spectral_data,
)


def _toy_data(lams, alphas=None):
    datums = []
    for i, lam in enumerate(lams):
        alpha = np.eye(1) if alphas is None else alphas[i]
        datums.append(SpectralDatum(i + 1, 1, lam, alpha))
    return SpectralData(tuple(datums), len(lams))


class TestValidateProblem:
    def test_star_model_is_valid(self, star_model):
        assert validate_problem(star_model) == []

    def test_full_projector_rejected(self):
        prob = Problem(
            PotentialGrid.zeros(2, 10),
            Projector(np.eye(2), 2),
            BoundaryCoefficient.zero(2),
        )
        report = validate_problem(prob)
        assert any("p < m" in v for v in report)

    def test_boundary_coefficient_outside_range_of_projector(self):
        # H equal to the complement projector is annihilated by T on both sides
        t = np.diag([1.0, 0.0])
        prob = Problem(
            PotentialGrid.zeros(2, 10),
            Projector(t, 1),
            BoundaryCoefficient(np.diag([0.0, 1.0])),
        )
        report = validate_problem(prob)
        assert any("THT" in v for v in report)

    def test_non_hermitian_potential_reported(self):
        samples = np.zeros((11, 2, 2), dtype=complex)
        samples[:, 0, 1] = 1.0
        prob = Problem(
            PotentialGrid(samples), Projector(np.diag([1.0, 0.0]), 1), BoundaryCoefficient.zero(2)
        )
        assert any("Hermitian" in v for v in validate_problem(prob))

    def test_dimension_mismatch_is_structural(self):
        with pytest.raises(DimensionError):
            Problem(
                PotentialGrid.zeros(3, 10),
                Projector(np.diag([1.0, 0.0]), 1),
                BoundaryCoefficient.zero(3),
            )

    def test_validation_is_deterministic(self, star_model):
        assert validate_problem(star_model) == validate_problem(star_model)


class TestShiftSpectrum:
    def test_nonnegative_data_is_untouched(self):
        data = _toy_data([0.25, 1.0, 2.25])
        shifted, shift = shift_spectrum(data)
        assert shift == 0.0
        assert shifted is data

    def test_margin_zero_translation(self):
        data = _toy_data([-1.0, 0.5, 2.0])
        shifted, shift = shift_spectrum(data, margin=0.0)
        assert shift == 1.0
        assert [d.lam for d in shifted.data] == [0.0, 1.5, 3.0]

    def test_default_margin(self):
        # direct formula: max(0, -min lam) + margin
        data = _toy_data([-1.0, 0.5])
        shifted, shift = shift_spectrum(data, margin=0.25)
        assert shift == pytest.approx(1.25)
        assert min(d.lam for d in shifted.data) == pytest.approx(0.25)

    @given(
        lams=st.lists(
            st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=1, max_size=8
        ),
        margin=st.floats(min_value=0.0, max_value=1.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_shift_properties(self, lams, margin):
        data = _toy_data(sorted(lams))
        shifted, shift = shift_spectrum(data, margin=margin)
        assert min(d.lam for d in shifted.data) >= 0.0
        for before, after in zip(data.data, shifted.data):
            assert after.alpha is before.alpha or np.array_equal(after.alpha, before.alpha)
        again, shift2 = shift_spectrum(shifted, margin=margin)
        if shift == 0.0:
            assert again is shifted and shift2 == 0.0


class TestSpectralDataInvariants:
    def test_ordering_violation_detected(self):
        data = _toy_data([2.0, 1.0])
        assert any("nondecreasing" in v for v in validate_spectral_data(data))

    def test_psd_violation_detected(self):
        data = _toy_data([1.0, 2.0], alphas=[np.eye(1), -np.eye(1)])
        assert any("semidefinite" in v for v in validate_spectral_data(data))

    def test_equal_lambda_unequal_alpha_detected(self):
        datums = (
            SpectralDatum(1, 1, 1.0, np.eye(2)),
            SpectralDatum(1, 2, 1.0, 2 * np.eye(2)),
        )
        data = SpectralData(datums, 1)
        assert any("unequal weights" in v for v in validate_spectral_data(data))

    def test_canonicalize_shares_floats(self):
        datums = (
            SpectralDatum(1, 1, 1.0, np.eye(2)),
            SpectralDatum(1, 2, 1.0 + 1e-9, np.eye(2) + 1e-9),
        )
        data = canonicalize_multiplets(SpectralData(datums, 1))
        assert data.data[0].lam == data.data[1].lam
        assert np.array_equal(data.data[0].alpha, data.data[1].alpha)


def test_projector_helpers():
    t = Projector.star(3)
    assert t.p == 1 and t.m == 3
    basis = t.range_basis()
    assert basis.shape == (3, 1)
    np.testing.assert_allclose(basis.conj().T @ basis, np.eye(1), atol=1e-14)
    np.testing.assert_allclose(t.matrix @ basis, basis, atol=1e-14)


def test_potential_grid_shapes():
    with pytest.raises(DimensionError):
        PotentialGrid(np.zeros((5, 2, 3)))
    grid = PotentialGrid.diagonal([lambda x: np.sin(x), [0.0] * 11], 10)
    assert grid.m == 2 and grid.n_grid == 10
    assert grid.x[0] == 0.0 and grid.x[-1] == pytest.approx(np.pi)
