import numpy as np
import pytest

from qarrival import (
    ModelParams,
    WaveFunction,
    gaussian_packet,
    make_grid,
    region_probability,
    step_indicator,
)
from qarrival.errors import ConfigurationError, ContainmentError
from qarrival.grid import edge_mass


class TestMakeGrid:
    def test_half_offset_nodes(self):
        g = make_grid(-1.0, 1.0, 4)
        assert g.dx == 0.5
        np.testing.assert_allclose(g.x, [-0.75, -0.25, 0.25, 0.75])

    def test_no_node_at_origin(self):
        g = make_grid(-50.0, 50.0, 1024)
        assert g.dx == pytest.approx(100.0 / 1024)
        assert np.min(np.abs(g.x)) >= g.dx / 2 - 1e-15

    @pytest.mark.parametrize("bad", [(-1, 1, 3), (-1, 1, 0), (-1, 1, 1)])
    def test_rejects_bad_node_counts(self, bad):
        with pytest.raises(ConfigurationError):
            make_grid(*bad)

    def test_rejects_inverted_bounds(self):
        with pytest.raises(ConfigurationError):
            make_grid(1.0, -1.0, 4)
        with pytest.raises(ConfigurationError):
            make_grid(1.0, 1.0, 4)


class TestGaussianPacket:
    def test_unit_norm(self):
        g = make_grid(-50.0, 50.0, 1024)
        psi = gaussian_packet(g, x0=10.0, p0=-2.0, sigma=1.0)
        assert abs(psi.norm2 - 1.0) < 1e-10

    def test_position_expectation(self):
        g = make_grid(-50.0, 50.0, 1024)
        psi = gaussian_packet(g, x0=10.0, p0=-2.0, sigma=1.0)
        assert abs(psi.position_expectation() - 10.0) < 1e-8

    def test_momentum_expectation(self):
        g = make_grid(-50.0, 50.0, 1024)
        psi = gaussian_packet(g, x0=10.0, p0=-2.0, sigma=1.0)
        assert abs(psi.momentum_expectation() - (-2.0)) < 1e-6

    def test_containment_error(self):
        g = make_grid(-2.0, 2.0, 64)
        with pytest.raises(ContainmentError):
            gaussian_packet(g, x0=10.0, p0=0.0, sigma=1.0)

    def test_rejects_nonpositive_sigma(self):
        g = make_grid(-2.0, 2.0, 64)
        with pytest.raises(ConfigurationError):
            gaussian_packet(g, x0=0.0, p0=0.0, sigma=0.0)

    @pytest.mark.parametrize("seed", range(4))
    def test_unit_norm_random_contained(self, seed):
        rng = np.random.default_rng(seed)
        g = make_grid(-40.0, 40.0, 512)
        x0 = rng.uniform(-20, 20)
        p0 = rng.uniform(-5, 5)
        sigma = rng.uniform(0.5, 3.0)
        psi = gaussian_packet(g, x0, p0, sigma)
        assert abs(psi.norm2 - 1.0) < 1e-10


class TestRegionProbability:
    def test_packet_in_positive_half(self):
        g = make_grid(-50.0, 50.0, 512)
        psi = gaussian_packet(g, x0=10.0, p0=-2.0, sigma=1.0)
        left = region_probability(psi, "x<0")
        right = region_probability(psi, "x>0")
        assert left < 1e-10
        assert right == pytest.approx(1.0, abs=1e-10)
        # partition holds exactly: the two halves are the same summands
        assert left + right == region_probability(psi, "all")

    def test_symmetric_packet_splits_in_half(self):
        g = make_grid(-50.0, 50.0, 512)
        psi = gaussian_packet(g, x0=0.0, p0=0.0, sigma=2.0)
        assert abs(region_probability(psi, "x<0") - 0.5) < 1e-10
        assert abs(region_probability(psi, "x>0") - 0.5) < 1e-10

    def test_zero_field(self):
        g = make_grid(-1.0, 1.0, 8)
        psi = WaveFunction(g, np.zeros(8, dtype=complex))
        for region in ("x<0", "x>0", "all"):
            assert region_probability(psi, region) == 0.0

    def test_unknown_region_rejected(self):
        g = make_grid(-1.0, 1.0, 8)
        psi = WaveFunction(g, np.zeros(8, dtype=complex))
        with pytest.raises(ConfigurationError):
            region_probability(psi, "x>=0")

    @pytest.mark.parametrize("seed", range(4))
    def test_partition_random_states(self, seed):
        rng = np.random.default_rng(100 + seed)
        g = make_grid(-10.0, 10.0, 64)
        psi = WaveFunction(g, rng.normal(size=64) + 1j * rng.normal(size=64))
        left = region_probability(psi, "x<0")
        right = region_probability(psi, "x>0")
        assert left + right == region_probability(psi, "all")


class TestStepIndicator:
    def test_small_grid_values(self):
        g = make_grid(-1.0, 1.0, 4)
        v = step_indicator(g)
        np.testing.assert_array_equal(v.values, [1.0, 1.0, 0.0, 0.0])
        assert v.is_projector

    def test_idempotent(self):
        g = make_grid(-7.0, 3.0, 64)
        v = step_indicator(g).values
        np.testing.assert_array_equal(v * v, v)

    def test_positive_grid_all_zero(self):
        g = make_grid(1.0, 2.0, 8)
        assert not np.any(step_indicator(g).values)


class TestModelParams:
    def test_defaults(self):
        p = ModelParams(gamma=1.0, tau=10.0, dt=1e-3)
        assert p.mass == 1.0 and p.hbar == 1.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(gamma=-1.0, tau=1.0, dt=0.1),
            dict(gamma=1.0, tau=1.0, dt=0.0),
            dict(gamma=1.0, tau=1.0, dt=2.0),
            dict(gamma=1.0, tau=1.0, dt=0.1, mass=0.0),
            dict(gamma=1.0, tau=1.0, dt=0.1, hbar=-1.0),
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ConfigurationError):
            ModelParams(**kwargs)


def test_edge_mass_detects_boundary_weight():
    g = make_grid(-10.0, 10.0, 100)
    psi = gaussian_packet(g, x0=0.0, p0=0.0, sigma=1.0)
    assert edge_mass(psi) < 1e-12
    bumped = np.zeros(100, dtype=complex)
    bumped[0] = 1.0
    assert edge_mass(WaveFunction(g, bumped)) > 0
