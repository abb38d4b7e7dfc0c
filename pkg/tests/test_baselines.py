import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexcover.analytic import NetworkParams
from hexcover.baselines import (
    EmptySiteSetError,
    SiteFileError,
    SiteSet,
    default_guard,
    lattice_sites,
    load_fixture,
    load_site_set,
    ppp_generate,
    ppp_outage,
    ppp_rayleigh_outage,
    project,
    sc_count_for_area,
    siteset_outage,
    unproject,
    user_grid,
)
from hexcover.simulator import SimConfig, run_realizations

SQRT3 = math.sqrt(3)
CELL_DENSITY = 1 / (1.5 * SQRT3 * 1000.0**2)


class TestPPP:
    def test_mean_count(self):
        counts = [len(ppp_generate(2e-6, (10_000, 10_000), s)) for s in range(200)]
        assert abs(np.mean(counts) - 200) < 3 * math.sqrt(200 / 200)

    def test_seeded(self):
        a = ppp_generate(2e-6, (10_000, 10_000), 4)
        np.testing.assert_array_equal(a.sites, ppp_generate(2e-6, (10_000, 10_000), 4).sites)
        assert not np.array_equal(a.sites, ppp_generate(2e-6, (10_000, 10_000), 5).sites)
        assert np.all(np.abs(a.sites) <= 5000)

    def test_density(self):
        s = ppp_generate(2e-6, (20_000, 20_000), 1)
        assert s.density == pytest.approx(2e-6, rel=0.1)

    def test_closed_form(self):
        assert ppp_rayleigh_outage(1.0) == pytest.approx(0.4399, abs=1e-4)
        assert ppp_rayleigh_outage(10.0) > ppp_rayleigh_outage(1.0)


class TestLattice:
    def test_spacing_and_origin(self):
        s = lattice_sites(1000.0, (5000, 5000))
        assert np.any(np.all(s.sites == 0, axis=1))
        d = np.hypot(*(s.sites[:, None, :] - s.sites[None, :, :]).transpose(2, 0, 1))
        np.fill_diagonal(d, np.inf)
        np.testing.assert_allclose(d.min(axis=1), 1000.0, rtol=1e-12)

    def test_jitter_needs_seed(self):
        with pytest.raises(ValueError):
            lattice_sites(1000.0, (5000, 5000), jitter=100.0)

    def test_site_outside_window(self):
        with pytest.raises(ValueError):
            SiteSet("x", np.array([[3000.0, 0.0]]), (5000.0, 5000.0))


class TestSiteFiles:
    def test_center_projects_to_origin(self):
        np.testing.assert_allclose(project(43.0, -79.0, 43.0, -79.0), [[0.0, 0.0]], atol=1e-9)

    @settings(max_examples=50)
    @given(st.floats(-2000, 2000), st.floats(-2000, 2000))
    def test_roundtrip(self, x, y):
        ll = unproject([[x, y]], 45.5, -73.6)
        np.testing.assert_allclose(project(ll[:, 0], ll[:, 1], 45.5, -73.6), [[x, y]], atol=1e-6)

    def test_one_degree_of_latitude(self):
        assert project(44.0, -79.0, 43.0, -79.0)[0, 1] == pytest.approx(111_195, rel=1e-4)

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "sites.csv"
        path.write_text("id,latitude_deg,longitude_deg\n1,43.0,-79.0\n2,north,-79.0\n")
        with pytest.raises(SiteFileError, match=r"sites\.csv:3"):
            load_site_set(path, 43.0, -79.0, (5000, 5000))

    def test_empty_window(self, tmp_path):
        path = tmp_path / "sites.csv"
        path.write_text("id,latitude_deg,longitude_deg\n1,44.0,-79.0\n")
        with pytest.raises(EmptySiteSetError):
            load_site_set(path, 43.0, -79.0, (5000, 5000))

    @pytest.mark.parametrize("name, density", [("toronto", 6.94e-7), ("montreal", 1.18e-6)])
    def test_fixture_density(self, name, density):
        s = load_fixture(name)
        assert s.density == pytest.approx(density, rel=0.005)

    def test_unknown_fixture(self):
        with pytest.raises(ValueError):
            load_fixture("ottawa")


class TestCounts:
    def test_examples(self):
        assert sc_count_for_area(0.29, 2.598e6, 150.0) == 13
        assert sc_count_for_area(0.0, 2.598e6, 150.0) == 0

    @given(st.integers(1, 40))
    def test_exact_multiples(self, k):
        # k whole tiles of area need exactly k cells
        tile = 1.5 * SQRT3 * 150.0**2
        assert sc_count_for_area(0.5, 2 * k * tile, 150.0) == k


class TestOutage:
    def test_guard_too_large(self):
        with pytest.raises(ValueError):
            user_grid((5000, 5000), 2500.0, 50.0)
        s = lattice_sites(1000.0, (5000, 5000))
        with pytest.raises(ValueError):
            siteset_outage(s, NetworkParams(), 0, 1, guard=3000.0)

    def test_default_guard(self):
        assert default_guard(1 / math.pi) == pytest.approx(2.0)

    def test_single_site_noise_limited(self):
        # no interference, no shadowing: outage is the grid share beyond the coverage radius
        p = NetworkParams(sigma_l_db=0.0)
        s = SiteSet("one", np.zeros((1, 2)), (10_000.0, 10_000.0))
        margin_db = p.bs_power_dbm - p.noise_dbm - 10 * math.log10(p.sinr_threshold)
        radius = 10 ** (margin_db / (10 * p.alpha))
        expected = 1 - math.pi * radius**2 / 8000.0**2
        got = siteset_outage(s, p, 0, 1, guard=1000.0, grid_step=20.0)
        assert got == pytest.approx(expected, abs=0.005)

    def test_lattice_matches_simulator(self):
        p = NetworkParams()
        s = lattice_sites(SQRT3 * 1000.0, (20_000, 20_000))
        lat = siteset_outage(s, p, 3, 10, grid_step=100.0)
        sim = run_realizations(SimConfig(params=p, grid_step=25.0, realizations=10, seed=3))
        sim_mean = math.fsum(r.outage_fraction for r in sim) / len(sim)
        assert lat == pytest.approx(sim_mean, abs=0.01)

    def test_irregularity_raises_outage(self):
        p = NetworkParams()
        window = (20_000.0, 20_000.0)
        guard = default_guard(CELL_DENSITY)
        lat = siteset_outage(lattice_sites(SQRT3 * 1000.0, window), p, 1, 5, guard=guard, grid_step=100.0)
        jit = siteset_outage(lattice_sites(SQRT3 * 1000.0, window, jitter=300.0, seed=1), p, 1, 5,
                             guard=guard, grid_step=100.0)
        ppp = ppp_outage(CELL_DENSITY, window, p, 1, 5, guard=guard, grid_step=100.0)
        assert lat <= jit <= ppp

    def test_threads_do_not_change_result(self):
        s = load_fixture("montreal")
        p = NetworkParams()
        a = siteset_outage(s, p, 2, 4, grid_step=100.0, fading="rayleigh")
        assert siteset_outage(s, p, 2, 4, grid_step=100.0, fading="rayleigh", threads=3) == a

    def test_bad_fading(self):
        with pytest.raises(ValueError):
            siteset_outage(load_fixture("toronto"), NetworkParams(), 0, 1, fading="rician")
