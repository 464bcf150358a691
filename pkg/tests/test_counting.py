"""Tests for count-number statistics from the non-Hermitian propagator."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from src.photon_trajectories.counting import (
    CountRecord,
    PropagatorGrid,
    _double_density,
    count_table,
    exclusive_density,
    exclusive_density_split,
    one_count_pair,
    prob_m_counts,
    prob_no_counts,
    pure_components,
    single_count_scan,
    two_count_pair,
)
from src.photon_trajectories.continuous import Hierarchy, homodyne_rate, no_jump_step
from src.photon_trajectories.discrete import (
    ConditionalPair,
    CountRecordDiscrete,
    closed_form_pair,
    first_order_intensities,
    iterate_record,
    pair_trace,
    posterior_density,
    scenario_probabilities,
)
from src.photon_trajectories.errors import InvalidArgumentError, UnsupportedCountError
from src.photon_trajectories.models import SystemModel, build_collision_exact, random_model, two_level_atom
from src.photon_trajectories.profiles import discretize_profile


class TestCountRecord:
    """Test count-record validation."""

    def test_valid_record(self):
        record = CountRecord((0.5, 1.5), 2.0)
        assert record.m == 2
        assert CountRecord((), 0.0).m == 0

    @pytest.mark.parametrize("times,window_end", [
        ((1.0, 0.5), 2.0),
        ((0.0,), 2.0),
        ((3.0,), 2.0),
        ((0.5,), 0.5),
        ((0.5, 2.0), 2.0),
        ((1.0, 1.0), 2.0),
        ((), -1.0),
    ])
    def test_invalid_record(self, times, window_end):
        with pytest.raises(InvalidArgumentError):
            CountRecord(times, window_end)


class TestNoCounts:
    """Test the probability of no counts."""

    def test_matched_two_level_atom(self, tla, matched_profile):
        assert prob_no_counts(tla, matched_profile, 2.0, points=512) == pytest.approx(5.0 * math.exp(-2.0), abs=1e-5)

    def test_zero_window(self, qubit_model, gaussian_profile):
        assert prob_no_counts(qubit_model, gaussian_profile, 0.0, points=16) == pytest.approx(1.0)

    def test_non_increasing(self, qubit_model, gaussian_profile):
        values = [prob_no_counts(qubit_model, gaussian_profile, t, points=256) for t in np.linspace(0.0, 6.0, 13)]
        assert np.all(np.diff(values) <= 1e-9)

    def test_matches_m_zero(self, qubit_model, gaussian_profile):
        result = prob_m_counts(qubit_model, gaussian_profile, 4.0, 0, points=256)
        assert result.value == prob_no_counts(qubit_model, gaussian_profile, 4.0, 256)
        assert result.error >= 0.0

    def test_vacuum_decay(self, excited_tla, vacuum_profile):
        assert prob_no_counts(excited_tla, vacuum_profile, 1.5, points=64) == pytest.approx(math.exp(-1.5))

    def test_negative_time(self, tla, matched_profile):
        with pytest.raises(InvalidArgumentError):
            prob_no_counts(tla, matched_profile, -1.0)


class TestConditionalPairs:
    """Test the conditional vectors for fixed count records."""

    def test_count_at_window_end_rejected(self, tla, matched_profile):
        with pytest.raises(InvalidArgumentError):
            one_count_pair(tla, matched_profile, 2.0, 2.0, points=8)
        with pytest.raises(InvalidArgumentError):
            two_count_pair(tla, matched_profile, 2.0, 1.0, 2.0, points=8)

    def test_ground_atom_cannot_emit_first(self, tla, matched_profile):
        pair = one_count_pair(tla, matched_profile, 2.0, 0.7, points=64)
        np.testing.assert_allclose(pair.alpha_bar, 0.0, atol=1e-15)
        assert pair.m == 1

    def test_uncoupled_system(self, qubit_model, gaussian_profile):
        model = SystemModel(qubit_model.hamiltonian, np.zeros((2, 2)), qubit_model.initial)
        t, t1 = 4.0, 2.5
        pair = one_count_pair(model, gaussian_profile, t, t1, points=32)
        expected = gaussian_profile.xi(t1) * (expm(-1j * t * model.hamiltonian) @ model.psi)
        np.testing.assert_allclose(pair.alpha_bar, 0.0, atol=1e-15)
        np.testing.assert_allclose(pair.beta_bar, expected, atol=1e-12)

        pair2 = two_count_pair(model, gaussian_profile, t, 1.0, 2.0, points=32)
        np.testing.assert_allclose(pair2.alpha_bar, 0.0, atol=1e-15)
        np.testing.assert_allclose(pair2.beta_bar, 0.0, atol=1e-15)

    def test_scan_matches_single_record(self, gaussian_profile):
        model = random_model(3, seed=21)
        nodes, density = single_count_scan(model, gaussian_profile, 2.0, points=16)
        assert nodes[8] == pytest.approx(1.0)
        direct = exclusive_density(model, gaussian_profile, CountRecord((1.0,), 2.0), points=8)
        assert density[8] == pytest.approx(direct, rel=1e-9)

    def test_double_density_matches_record(self, gaussian_profile):
        model = random_model(3, seed=22)
        grid = PropagatorGrid(model, gaussian_profile, 3.0, 24)
        density = _double_density(grid, model.psi, float(gaussian_profile.tail(3.0)))
        direct = exclusive_density(model, gaussian_profile, CountRecord((1.0, 2.0), 3.0), points=8)
        assert density[8, 16] == pytest.approx(direct, rel=1e-9)
        np.testing.assert_array_equal(np.tril(density, -1), 0.0)

    def test_split_adds_up(self, qubit_model, gaussian_profile):
        record = CountRecord((1.2,), 3.0)
        future, consumed = exclusive_density_split(qubit_model, gaussian_profile, record, points=64)
        assert future >= 0.0 and consumed >= 0.0
        assert future + consumed == pytest.approx(exclusive_density(qubit_model, gaussian_profile, record, 64))

    def test_three_counts_unsupported(self, qubit_model, gaussian_profile):
        with pytest.raises(UnsupportedCountError):
            exclusive_density(qubit_model, gaussian_profile, CountRecord((0.5, 1.0, 1.5), 2.0))
        assert issubclass(UnsupportedCountError, NotImplementedError)


class TestCountProbabilities:
    """Test P_t(m) for m = 0, 1, 2."""

    @pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 5.0])
    def test_two_level_atom_normalization(self, tla, matched_profile, t):
        p0 = prob_m_counts(tla, matched_profile, t, 0, points=256).value
        p1 = prob_m_counts(tla, matched_profile, t, 1, points=256).value
        p2 = prob_m_counts(tla, matched_profile, t, 2, points=16).value
        assert p0 + p1 == pytest.approx(1.0, abs=1e-4)
        assert abs(p2) < 1e-8

    def test_vacuum_single_emission(self, excited_tla, vacuum_profile):
        t = 2.0
        p1 = prob_m_counts(excited_tla, vacuum_profile, t, 1, points=128)
        assert p1.value == pytest.approx(1.0 - math.exp(-t), abs=1e-8)
        assert p1.error < 1e-6

    def test_zero_window_has_no_counts(self, qubit_model, gaussian_profile):
        assert prob_m_counts(qubit_model, gaussian_profile, 0.0, 1).value == 0.0
        assert prob_m_counts(qubit_model, gaussian_profile, 0.0, 2).value == 0.0

    def test_excited_atom_can_count_twice(self, matched_profile):
        model = two_level_atom(1.0, excited=True)
        t = 6.0
        probs = [prob_m_counts(model, matched_profile, t, m, points=p).value
                 for m, p in ((0, 256), (1, 256), (2, 64))]
        assert probs[2] > 0.1
        assert sum(probs) == pytest.approx(1.0, abs=1e-3)

    def test_mixed_state_is_a_weighted_sum(self, gaussian_profile):
        model = random_model(2, seed=5, mixed=True)
        components = list(pure_components(model))
        assert sum(w for w, _ in components) == pytest.approx(1.0)
        expected = sum(w * prob_no_counts(model.with_initial(psi), gaussian_profile, 4.0, 128)
                       for w, psi in components)
        assert prob_no_counts(model, gaussian_profile, 4.0, 128) == pytest.approx(expected, rel=1e-12)

    def test_count_number_limits(self, tla, matched_profile):
        with pytest.raises(UnsupportedCountError):
            prob_m_counts(tla, matched_profile, 1.0, 3)
        with pytest.raises(InvalidArgumentError):
            prob_m_counts(tla, matched_profile, 1.0, -1)

    def test_count_table(self, tla, matched_profile):
        rows = count_table(tla, matched_profile, [0.0, 1.0, 3.0], points_single=128, points_double=16)
        assert len(rows) == 3
        assert set(rows[0]) == {"t", "P0", "P1", "P2", "quadrature_error", "normalization_residual"}
        assert rows[0]["P0"] == pytest.approx(1.0)
        for row in rows:
            assert row["normalization_residual"] < 1e-4

    def test_count_table_without_pairs(self, tla, matched_profile):
        rows = count_table(tla, matched_profile, [1.0], max_counts=1, points_single=64)
        assert "P2" not in rows[0]


class TestDiscreteLimit:
    """Test that the exact discrete filter approaches the continuum formulas as τ → 0."""

    T, T1, T2 = 1.0, 0.3, 0.7
    TAUS = (1e-2, 5e-3, 2.5e-3, 1.25e-3)

    @pytest.fixture
    def model(self):
        return random_model(3, seed=7)

    def two_count_state(self, model, profile, tau):
        dprofile = discretize_profile(profile, tau, self.T)
        record = CountRecordDiscrete((round(self.T1 / tau), round(self.T2 / tau)), len(dprofile))
        return closed_form_pair(record, build_collision_exact(model, tau), dprofile, model.psi)

    def test_two_count_density(self, model, matched_profile):
        continuum = exclusive_density(model, matched_profile, CountRecord((self.T1, self.T2), self.T), points=256)
        errors = []
        for tau in self.TAUS:
            pair = self.two_count_state(model, matched_profile, tau)
            errors.append(abs(pair_trace(pair) / tau ** 2 - continuum))
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(orders >= 0.9)
        assert errors[-1] < 0.01 * continuum

    def test_interpretation_split(self, model, matched_profile):
        future, consumed = exclusive_density_split(
            model, matched_profile, CountRecord((self.T1, self.T2), self.T), points=256)
        expected = future / (future + consumed)
        gaps = []
        for tau in self.TAUS[-2:]:
            p_future, p_consumed = scenario_probabilities(self.two_count_state(model, matched_profile, tau))
            assert p_future + p_consumed == pytest.approx(1.0)
            gaps.append(abs(p_future - expected))
        assert gaps[-1] < 2e-3
        assert gaps[-1] < gaps[0]

    def test_homodyne_rate_on_the_same_state(self, model, matched_profile):
        tau = 1e-3
        dprofile = discretize_profile(matched_profile, tau, 2.0)
        j = round(self.T / tau)
        pair = iterate_record([0] * j, build_collision_exact(model, tau), dprofile,
                              ConditionalPair.initial(model.psi, dprofile))
        total = pair_trace(pair)
        sectors = Hierarchy(
            rho=posterior_density(pair) / total,
            rho01=np.outer(pair.alpha, np.conj(pair.beta)) / total,
            rho00=np.outer(pair.alpha, np.conj(pair.alpha)) / total,
        )
        _, r_j = first_order_intensities(pair, model, dprofile.xi(j))
        assert homodyne_rate(sectors, dprofile.xi(j), model) == pytest.approx(r_j, rel=1e-12, abs=1e-14)
        assert homodyne_rate(sectors, matched_profile.xi(self.T), model) == pytest.approx(r_j, abs=5e-3)

    def test_homodyne_rate_along_no_count_path(self, model, matched_profile):
        dt = 1e-4
        h = Hierarchy.initial(model)
        for i in range(round(self.T / dt)):
            h = no_jump_step(h, matched_profile.xi(i * dt), dt, model)
        continuum = homodyne_rate(h, matched_profile.xi(self.T), model)

        tau = 5e-4
        dprofile = discretize_profile(matched_profile, tau, 2.0)
        j = round(self.T / tau)
        pair = iterate_record([0] * j, build_collision_exact(model, tau), dprofile,
                              ConditionalPair.initial(model.psi, dprofile))
        _, r_j = first_order_intensities(pair, model, dprofile.xi(j))
        assert r_j == pytest.approx(continuum, abs=3e-3)
