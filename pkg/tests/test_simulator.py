import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexcover.analytic import NetworkParams
from hexcover.lattice import bs_positions, hex_tiling, tile_of
from hexcover.simulator import (
    SC_TX_BASE,
    SimConfig,
    aggregate,
    ergodic_rate_map,
    evaluate_points,
    greedy_colors,
    outage_map,
    place_scs,
    residual_outage,
    run_realizations,
    shadowing_for,
    sweep,
    write_table,
)

FAST = SimConfig(grid_step=50.0, realizations=4, seed=11)


class TiledLoss:
    """Hand-built field: ``loss_db`` on every BS link inside the given tiles."""

    def __init__(self, tiling, tiles, loss_db=80.0):
        self.keys = {tuple(int(v) for v in tiling.axial[t]) for t in tiles}
        self.loss_db = loss_db

    def value_db(self, tx, q, r):
        tx, q, r = np.broadcast_arrays(np.asarray(tx), np.asarray(q), np.asarray(r))
        hit = np.array([(int(a), int(b)) in self.keys for a, b in zip(q.ravel(), r.ravel())]).reshape(q.shape)
        return np.where(hit & (tx < SC_TX_BASE), self.loss_db, 0.0)


def sinr_direct(point, params, extra_loss_db=0.0):
    """Explicit per-point SINR with nearest-power association and no fading."""
    bs = bs_positions(params.r_mc_m)
    noise_mw = 10 ** (params.noise_dbm / 10)
    powers = []
    for x, y in bs:
        d = max(params.r_ref_m, math.hypot(point[0] - x, point[1] - y))
        powers.append(10 ** ((params.bs_power_dbm - 10 * params.alpha * math.log10(d) - extra_loss_db) / 10))
    k = int(np.argmax(powers))
    return powers[k] / (math.fsum(powers[:k] + powers[k + 1:]) + noise_mw)


class TestConfig:
    @pytest.mark.parametrize("changes", [{"grid_step": 0.0}, {"fading_draws": 50}, {"realizations": 0},
                                         {"sc_mode": "mesh"}, {"fading": "rician"}])
    def test_invalid(self, changes):
        with pytest.raises(ValueError):
            FAST.replace(**changes)


class TestOutageMap:
    def test_deterministic(self):
        a = outage_map(FAST, 2)
        b = outage_map(FAST, 2)
        np.testing.assert_array_equal(a.rop, b.rop)
        np.testing.assert_array_equal(a.se, b.se)
        assert not np.array_equal(a.se, outage_map(FAST, 3).se)

    def test_nearest_association_without_shadowing(self):
        cfg = FAST.replace(params=NetworkParams(sigma_l_db=0.0))
        m = outage_map(cfg, 0)
        bs = bs_positions(1000.0)
        d = np.hypot(m.points[:, None, 0] - bs[None, :, 0], m.points[:, None, 1] - bs[None, :, 1])
        dmin = d.min(axis=1)
        served = d[np.arange(len(d)), m.serving]
        np.testing.assert_allclose(served, dmin, rtol=1e-12)

    def test_matches_direct_sinr(self):
        p = NetworkParams(sigma_l_db=0.0)
        m = outage_map(FAST.replace(params=p), 0)
        idx = np.linspace(0, len(m.points) - 1, 25).astype(int)
        for i in idx:
            sinr = sinr_direct(m.points[i], p)
            assert m.se[i] == pytest.approx(math.log2(1 + sinr / p.snr_gap), rel=1e-9)

    def test_center_without_shadowing(self):
        p = NetworkParams(sigma_l_db=0.0)
        for fading in ("none", "rayleigh"):
            _, rop, _ = evaluate_points(FAST.replace(params=p, fading=fading), [[0.0, 0.0]], 0)
            assert rop[0] == pytest.approx(0.0, abs=0.01)

    @pytest.mark.parametrize("point", [(500.0, 0.0), (700.0, 300.0)])
    def test_rayleigh_matches_closed_form(self, point):
        p = NetworkParams(sigma_l_db=0.0)
        cfg = FAST.replace(params=p, fading="rayleigh", fading_draws=20_000)
        _, rop, _ = evaluate_points(cfg, [point], 0)
        bs = bs_positions(1000.0)
        s = np.array([10 ** ((43 - 40 * math.log10(math.hypot(point[0] - x, point[1] - y))) / 10) for x, y in bs])
        k = int(np.argmax(s))
        t = p.sinr_threshold
        cov = math.exp(-t * 10 ** (p.noise_dbm / 10) / s[k]) * np.prod(
            [1 / (1 + t * s[j] / s[k]) for j in range(len(s)) if j != k])
        sd = math.sqrt(cov * (1 - cov) / 20_000)
        assert rop[0] == pytest.approx(1 - cov, abs=4 * sd)

    def test_fading_batches_agree(self):
        # disjoint K-batches (different seeds) estimate the same expectation
        cfg = FAST.replace(fading="rayleigh", fading_draws=500, params=NetworkParams(sigma_l_db=0.0))
        pts = np.array([[600.0, 200.0]])
        a = evaluate_points(cfg, pts, 0)[1][0]
        b = evaluate_points(cfg.replace(seed=99), pts, 0)[1][0]
        sd = math.sqrt(max(a * (1 - a), 1e-4) / 500)
        assert abs(a - b) <= 3 * math.sqrt(2) * sd

    def test_csv(self, tmp_path):
        m = outage_map(FAST, 0)
        path = tmp_path / "map.csv"
        m.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x_m,y_m,serving_id,rop,se_bps_hz,outage_flag"
        assert len(lines) == len(m.points) + 1


class TestPlacement:
    def test_synthetic_field(self):
        p = NetworkParams(sigma_l_db=0.0, c0_bps_hz=0.2)
        cfg = FAST.replace(params=p)
        tiling = hex_tiling(1000.0, 150.0)
        assert len(place_scs(cfg, 0, tiling=tiling).tiles) == 0
        field = TiledLoss(tiling, [3, 7, 12])
        plan = place_scs(cfg, 0, shadow=field, tiling=tiling)
        # per-tile oracle: SINR at each tile center with the tile's extra loss
        expected = []
        for i, c in enumerate(tiling.centers):
            loss = 80.0 if i in (3, 7, 12) else 0.0
            se = math.log2(1 + sinr_direct(c, p, loss) / p.snr_gap)
            if se < p.c0_bps_hz:
                expected.append(i)
        assert expected == [3, 7, 12]
        assert plan.tiles.tolist() == expected
        np.testing.assert_array_equal(plan.weights, tiling.edge_weight[[3, 7, 12]])

    def test_chosen_tiles_in_outage(self):
        plan = place_scs(FAST, 1)
        _, rop, _ = evaluate_points(FAST, plan.centers, 1)
        assert np.all(rop > FAST.params.eta)
        assert plan.weighted_count >= 0
        assert float(plan.weighted_count) == pytest.approx(float(np.sum(plan.weights)))

    def test_csv(self, tmp_path):
        plan = place_scs(FAST, 1)
        path = tmp_path / "plan.csv"
        plan.to_csv(path)
        assert path.read_text().splitlines()[0] == "tile_index,x_m,y_m,edge_weight"


class TestResidual:
    @pytest.fixture(scope="class")
    @staticmethod
    def runs():
        out = []
        for i in range(3):
            shadow = shadowing_for(FAST, i)
            base = outage_map(FAST, i, shadow)
            plan = place_scs(FAST, i, shadow)
            modes = {m: residual_outage(FAST, plan, i, m, shadow) for m in
                     ("isolated", "orthogonal", "cochannel", "orthogonal_reuse3")}
            out.append((base, plan, modes))
        return out

    def test_isolated_tiles_covered(self, runs):
        for _, _, modes in runs:
            cmap, _ = modes["isolated"]
            on_sc = cmap.serving >= SC_TX_BASE
            assert np.any(on_sc)
            assert not np.any(cmap.outage[on_sc])

    def test_not_worse_than_no_scs(self, runs):
        for base, _, modes in runs:
            assert modes["isolated"][1] <= base.outage_fraction
            assert modes["orthogonal"][1] <= base.outage_fraction

    def test_sc_served_points_are_in_chosen_tiles(self, runs):
        tiling = hex_tiling(1000.0, 150.0)
        for _, plan, modes in runs:
            cmap, _ = modes["orthogonal"]
            on_sc = cmap.serving >= SC_TX_BASE
            q, r = tile_of(cmap.points[on_sc], 150.0)
            np.testing.assert_array_equal(tiling.index_of(q, r), cmap.serving[on_sc] - SC_TX_BASE)
            assert set(np.unique(cmap.serving[on_sc] - SC_TX_BASE)) <= set(plan.tiles.tolist())

    def test_mode_none_is_base_map(self, runs):
        base, plan, _ = runs[0]
        _, frac = residual_outage(FAST, plan, 0, "none")
        assert frac == base.outage_fraction

    def test_plan_mismatch(self, runs):
        _, plan, _ = runs[0]
        with pytest.raises(ValueError):
            residual_outage(FAST, plan, 1, "orthogonal")
        with pytest.raises(ValueError):
            residual_outage(FAST.replace(seed=12), plan, 0, "orthogonal")

    def test_ergodic_isolated_beats_cochannel(self, runs):
        _, plan, _ = runs[0]
        iso = ergodic_rate_map(FAST, plan, 0, "isolated")
        co = ergodic_rate_map(FAST, plan, 0, "cochannel")
        on_sc = iso.serving >= SC_TX_BASE
        assert np.all(iso.se[on_sc] >= co.se[on_sc])

    def test_ergodic_rate_grows_as_noise_falls(self):
        plan = place_scs(FAST, 0)
        quiet = FAST.replace(params=NetworkParams(noise_dbm=-120.0))
        a = ergodic_rate_map(FAST, plan, 0, "isolated").se
        b = ergodic_rate_map(quiet, place_scs(quiet, 0), 0, "isolated").se
        assert b.mean() > a.mean()

    def test_ergodic_mean_stable_in_k(self):
        cfg = FAST.replace(grid_step=100.0, fading="rayleigh", fading_draws=500)
        plan = place_scs(cfg, 0)
        a = ergodic_rate_map(cfg, plan, 0, "orthogonal").se.mean()
        b = ergodic_rate_map(cfg.replace(fading_draws=1000), plan, 0, "orthogonal").se.mean()
        assert b == pytest.approx(a, rel=0.02)


class TestColoring:
    def test_palette_and_determinism(self):
        tiling = hex_tiling(1000.0, 150.0)
        adj = tiling.adjacency()
        colors = greedy_colors(adj)
        assert set(colors.values()) <= {0, 1, 2}
        assert colors == greedy_colors(adj)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 30))
    def test_path_is_properly_colored(self, n):
        adj = {i: [j for j in (i - 1, i + 1) if 0 <= j < n] for i in range(n)}
        colors = greedy_colors(adj)
        assert all(colors[i] != colors[i + 1] for i in range(n - 1))

    def test_triangle_of_tiles(self):
        adj = {0: [1, 2], 1: [0, 2], 2: [0, 1]}
        assert sorted(greedy_colors(adj).values()) == [0, 1, 2]


class TestSweep:
    def test_single_config_equals_direct_calls(self):
        cfg = FAST.replace(sc_mode="orthogonal", realizations=3)
        row = sweep([cfg])[0]
        results = []
        for i in range(3):
            shadow = shadowing_for(cfg, i)
            base = outage_map(cfg, i, shadow)
            plan = place_scs(cfg, i, shadow)
            results.append(residual_outage(cfg, plan, i, shadow=shadow)[1])
            assert base.outage_fraction == run_realizations(cfg)[i].outage_fraction
        assert row["residual_mean"] == pytest.approx(sum(results) / 3, abs=1e-15)

    def test_threads_do_not_change_results(self, tmp_path):
        cfg = FAST.replace(sc_mode="cochannel", realizations=5, fading="rayleigh", grid_step=100.0)
        a = aggregate(cfg, run_realizations(cfg, threads=1))
        b = aggregate(cfg, run_realizations(cfg, threads=3))
        write_table(tmp_path / "a.csv", [a])
        write_table(tmp_path / "b.csv", [b])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_empty(self):
        with pytest.raises(ValueError):
            sweep([])
