"""Tests for photon profiles and their discretization."""

import math

import numpy as np
import pytest

from src.photon_trajectories.errors import InvalidArgumentError, NormalizationError
from src.photon_trajectories.profiles import (
    BUILTIN_PROFILES,
    constant_window,
    discretize_profile,
    gaussian,
    make_profile,
    matched_exponential,
    tabulated,
    vacuum,
)


class TestPhotonProfile:
    """Test continuum profiles."""

    def test_matched_exponential_values(self, matched_profile):
        assert matched_profile.xi(0.0) == pytest.approx(1.0)
        assert matched_profile.xi(2.0) == pytest.approx(math.exp(-1.0))
        assert matched_profile.tail(3.0) == pytest.approx(math.exp(-3.0))
        assert matched_profile.analytic_tail

    def test_zero_before_origin(self, matched_profile):
        assert matched_profile.xi(-0.5) == 0
        assert matched_profile.tail(-1.0) == pytest.approx(1.0)

    def test_array_evaluation(self, matched_profile):
        ts = np.linspace(0.0, 4.0, 9)
        np.testing.assert_allclose(matched_profile.xi(ts), np.exp(-0.5 * ts))
        np.testing.assert_allclose(matched_profile.tail(ts), np.exp(-ts))

    @pytest.mark.parametrize("profile", [
        matched_exponential(0.7),
        constant_window(0.5, 2.5),
        gaussian(3.0, 0.7),
        gaussian(0.2, 1.0),
    ])
    def test_builtin_profiles_are_normalized(self, profile):
        assert profile.check_normalization() == pytest.approx(1.0, abs=1e-9)

    def test_gaussian_tail_matches_quadrature(self, gaussian_profile):
        from scipy import integrate

        numeric, _ = integrate.quad(lambda s: abs(gaussian_profile.xi(s)) ** 2, 2.5, 12.0)
        assert gaussian_profile.tail(2.5) == pytest.approx(numeric, abs=1e-9)

    def test_constant_window_tail(self):
        profile = constant_window(1.0, 3.0)
        assert profile.tail(0.0) == pytest.approx(1.0)
        assert profile.tail(2.0) == pytest.approx(0.5)
        assert profile.tail(5.0) == 0.0
        assert profile.cell_mass(1.0, 1.5) == pytest.approx(0.25)

    def test_tabulated_profile_is_normalized(self):
        profile = tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
        assert not profile.analytic_tail
        assert profile.tail(0.0) == pytest.approx(1.0, abs=1e-8)
        assert profile.tail(1.0) == pytest.approx(0.5, abs=1e-8)
        assert profile.xi(2.5) == 0

    def test_tabulated_rejects_bad_samples(self):
        with pytest.raises(InvalidArgumentError):
            tabulated([0.0, 2.0, 1.0], [1.0, 1.0, 1.0])
        with pytest.raises(InvalidArgumentError):
            tabulated([0.0, 1.0], [0.0, 0.0])

    def test_vacuum(self, vacuum_profile):
        assert vacuum_profile.is_vacuum
        assert vacuum_profile.xi(1.0) == 0
        assert vacuum_profile.tail(10.0) == 1.0

    def test_unnormalized_profile_rejected(self):
        profile = tabulated([0.0, 4.0], [1.0, 1.0], normalize=False)
        with pytest.raises(NormalizationError) as exc_info:
            profile.check_normalization()
        assert exc_info.value.residual == pytest.approx(3.0, abs=1e-8)


class TestMakeProfile:
    """Test the named-profile registry."""

    def test_registry_names(self):
        assert set(BUILTIN_PROFILES) == {"matched_exponential", "constant_window", "gaussian", "vacuum", "tabulated"}

    def test_make_profile(self):
        profile = make_profile("gaussian", t0=2.0, sigma=0.5)
        assert profile.name == "gaussian"
        assert profile.params == {"t0": 2.0, "sigma": 0.5}

    def test_unknown_profile(self):
        with pytest.raises(InvalidArgumentError, match="unknown profile"):
            make_profile("lorentzian")

    def test_bad_parameters(self):
        with pytest.raises(InvalidArgumentError, match="bad parameters"):
            make_profile("constant_window", t0=0.0)
        with pytest.raises(InvalidArgumentError):
            make_profile("matched_exponential", gamma_p=-1.0)


class TestDiscretizeProfile:
    """Test sampling on the collision grid."""

    @pytest.mark.parametrize("sampling", ["cell", "left"])
    def test_constant_window(self, sampling):
        dprofile = discretize_profile(constant_window(0.0, 1.0), 0.1, 1.0, sampling=sampling)
        assert len(dprofile) == 10
        np.testing.assert_allclose(dprofile.values, 1.0, atol=1e-12)
        assert dprofile.weight(0) == pytest.approx(1.0, abs=1e-12)
        assert dprofile.remainder == pytest.approx(0.0, abs=1e-15)

    def test_matched_exponential_cell_sampling(self, matched_profile):
        dprofile = discretize_profile(matched_profile, 0.01, 20.0, sampling="cell")
        assert len(dprofile) == 2000
        assert dprofile.weight(0) == pytest.approx(1.0, abs=1e-12)
        assert dprofile.remainder == pytest.approx(math.exp(-20.0))

    def test_left_sampling_overshoots_normalization(self, matched_profile):
        with pytest.raises(NormalizationError):
            discretize_profile(matched_profile, 0.01, 20.0, sampling="left")

        dprofile = discretize_profile(matched_profile, 0.01, 20.0, sampling="left", allow_unnormalized=True)
        expected = 0.01 * (1.0 - math.exp(-20.0)) / (1.0 - math.exp(-0.01)) + math.exp(-20.0)
        assert dprofile.weight(0) == pytest.approx(expected, rel=1e-12)

    def test_tail_recursion(self, gaussian_profile):
        dprofile = discretize_profile(gaussian_profile, 0.05, 8.0)
        w = dprofile.tail_weights
        np.testing.assert_array_equal(w[1:] + dprofile.masses(), w[:-1])

    def test_cell_sampling_keeps_phase(self):
        profile = tabulated([0.0, 1.0, 2.0], [1j, 1j, 1j])
        dprofile = discretize_profile(profile, 0.25, 2.0)
        np.testing.assert_allclose(np.angle(dprofile.values), math.pi / 2)

    def test_xi_past_grid_is_zero(self, matched_grid):
        assert matched_grid.xi(len(matched_grid)) == 0
        assert matched_grid.weight(len(matched_grid) + 5) == matched_grid.remainder

    @pytest.mark.parametrize("tau,horizon", [(0.0, 1.0), (-0.1, 1.0), (0.1, 0.05), (0.1, 0.0)])
    def test_rejects_bad_grid(self, matched_profile, tau, horizon):
        with pytest.raises(InvalidArgumentError):
            discretize_profile(matched_profile, tau, horizon)

    def test_rejects_truncated_numeric_tail(self):
        profile = tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
        with pytest.raises(InvalidArgumentError, match="beyond horizon"):
            discretize_profile(profile, 0.1, 1.0)

    def test_vacuum_grid(self, vacuum_profile):
        dprofile = discretize_profile(vacuum_profile, 0.1, 1.0)
        np.testing.assert_array_equal(dprofile.values, 0.0)
        assert dprofile.weight(0) == 1.0
