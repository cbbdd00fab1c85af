import math

import numpy as np
import pytest

from mmwsim.cluster import ClusterConfig, expand_cluster, seed_for
from mmwsim.em import SPEED_OF_LIGHT, WaveContext
from mmwsim.tracer import PathKind, PropagationPath

CTX = WaveContext(carrier_frequency=28e9)
STILL = (0.0, 0.0, 0.0)


def _reflection_path(shift=0.0):
    verts = np.array([[0.0 + shift, 0.0, 8.0],
                      [10.0 + shift, 5.0, 5.0],
                      [20.0 + shift, 0.0, 1.5]])
    d = float(np.linalg.norm(np.diff(verts, axis=0), axis=1).sum())
    return PropagationPath(kind=PathKind.REFLECTION, surface_ids=(1,),
                           vertices3d=verts, d_total=d,
                           wall_vertex_indices=(1,))


def _los_path():
    verts = np.array([[0.0, 0.0, 8.0], [50.0, 0.0, 1.5]])
    return PropagationPath(kind=PathKind.LOS, vertices3d=verts,
                           d_total=float(np.linalg.norm(verts[1] - verts[0])))


class TestExpansion:
    def test_subray_count(self):
        cfg = ClusterConfig(subray_count=20)
        rays = expand_cluster(_reflection_path(), 1e-4 + 0j, cfg, STILL, CTX)
        assert len(rays) == 20

    def test_power_conservation_exact(self):
        cfg = ClusterConfig(subray_count=20)
        base = 3e-5 * np.exp(1j * 0.3)
        rays = expand_cluster(_reflection_path(), base, cfg, STILL, CTX)
        total = sum(abs(r.gain) ** 2 for r in rays)
        assert total == pytest.approx(abs(base) ** 2, rel=1e-12)

    def test_single_subray_degenerate(self):
        cfg = ClusterConfig(subray_count=1)
        base = 2e-5 + 0j
        path = _reflection_path()
        rays = expand_cluster(path, base, cfg, STILL, CTX)
        assert len(rays) == 1
        expected = base * np.exp(-1j * CTX.wavenumber * path.d_total)
        assert rays[0].gain == pytest.approx(expected)
        assert rays[0].delay == pytest.approx(path.d_total / SPEED_OF_LIGHT)

    def test_specular_ray_keeps_geometric_phase(self):
        cfg = ClusterConfig(subray_count=20)
        base = 1e-4 + 0j
        path = _reflection_path()
        rays = expand_cluster(path, base, cfg, STILL, CTX)
        expected = base / math.sqrt(20) * np.exp(
            -1j * CTX.wavenumber * path.d_total)
        assert rays[0].gain == pytest.approx(expected)
        assert rays[0].delay == min(r.delay for r in rays)

    def test_diffuse_delays_nonnegative_offsets(self):
        cfg = ClusterConfig(subray_count=50)
        path = _reflection_path()
        rays = expand_cluster(path, 1e-4 + 0j, cfg, STILL, CTX)
        base_delay = path.d_total / SPEED_OF_LIGHT
        for r in rays[1:]:
            assert r.delay > base_delay

    def test_los_bypasses_expansion(self):
        cfg = ClusterConfig(subray_count=20)
        base = 1e-4 * np.exp(-1j * 1.2)  # already fully phased
        rays = expand_cluster(_los_path(), base, cfg, STILL, CTX)
        assert len(rays) == 1
        assert rays[0].gain == pytest.approx(base)

    def test_diffraction_bypasses_expansion(self):
        verts = np.array([[0.0, 0.0, 8.0], [30.0, 10.0, 6.0], [50.0, 0.0, 1.5]])
        path = PropagationPath(kind=PathKind.DIFFRACTION, wedge_id=3,
                               vertices3d=verts, d_total=60.0)
        rays = expand_cluster(path, 1e-6 - 2e-6j, ClusterConfig(), STILL, CTX)
        assert len(rays) == 1
        assert rays[0].gain == pytest.approx(1e-6 - 2e-6j)


class TestSeeding:
    def test_repeat_call_identical(self):
        cfg = ClusterConfig(subray_count=20, master_seed=42)
        a = expand_cluster(_reflection_path(), 1e-4 + 0j, cfg, STILL, CTX)
        b = expand_cluster(_reflection_path(), 1e-4 + 0j, cfg, STILL, CTX)
        assert [(r.gain, r.delay, r.doa, r.dod) for r in a] == \
               [(r.gain, r.delay, r.doa, r.dod) for r in b]

    def test_offsets_follow_signature_not_position(self):
        # Shifting the geometry changes absolute delays/angles but the drawn
        # offsets are identical because the signature is unchanged.
        cfg = ClusterConfig(subray_count=20, master_seed=7)
        a = expand_cluster(_reflection_path(0.0), 1e-4 + 0j, cfg, STILL, CTX)
        b = expand_cluster(_reflection_path(5.0), 1e-4 + 0j, cfg, STILL, CTX)
        da = [r.delay - a[0].delay for r in a[1:]]
        db = [r.delay - b[0].delay for r in b[1:]]
        assert da == pytest.approx(db, rel=1e-12)
        az_a = [r.doa[0] - a[0].doa[0] for r in a[1:]]
        az_b = [r.doa[0] - b[0].doa[0] for r in b[1:]]
        assert az_a == pytest.approx(az_b, rel=1e-12)

    def test_master_seed_changes_offsets(self):
        a = expand_cluster(_reflection_path(), 1e-4 + 0j,
                           ClusterConfig(master_seed=0), STILL, CTX)
        b = expand_cluster(_reflection_path(), 1e-4 + 0j,
                           ClusterConfig(master_seed=1), STILL, CTX)
        assert [r.delay for r in a[1:]] != [r.delay for r in b[1:]]

    def test_seed_for_distinguishes_signatures(self):
        p1 = _reflection_path()
        p2 = PropagationPath(kind=PathKind.REFLECTION, surface_ids=(2,),
                             vertices3d=p1.vertices3d, d_total=p1.d_total,
                             wall_vertex_indices=(1,))
        cfg = ClusterConfig()
        assert seed_for(p1, cfg) != seed_for(p2, cfg)


class TestStatistics:
    def test_delay_offset_mean(self):
        cfg = ClusterConfig(subray_count=100_001, delay_spread=12e-9)
        path = _reflection_path()
        rays = expand_cluster(path, 1e-4 + 0j, cfg, STILL, CTX)
        base_delay = path.d_total / SPEED_OF_LIGHT
        offsets = np.array([r.delay - base_delay for r in rays[1:]])
        assert offsets.mean() == pytest.approx(12e-9, rel=0.01)

    def test_angular_offset_spread(self):
        spread = math.radians(10.0)
        cfg = ClusterConfig(subray_count=100_001, azimuth_spread=spread)
        path = _reflection_path()
        rays = expand_cluster(path, 1e-4 + 0j, cfg, STILL, CTX)
        az = np.array([r.doa[0] - rays[0].doa[0] for r in rays[1:]])
        # Laplace(scale = spread / sqrt(2)) has std equal to the spread.
        assert az.mean() == pytest.approx(0.0, abs=3 * spread / 300)
        assert az.std() == pytest.approx(spread, rel=0.02)


class TestDoppler:
    def test_stationary_ue_zero_doppler(self):
        rays = expand_cluster(_los_path(), 1e-4 + 0j, ClusterConfig(),
                              STILL, CTX)
        assert rays[0].doppler == 0.0

    def test_head_on_motion_max_doppler(self):
        # UE at the far end moving straight away from the BS along +x: the
        # departure direction at the UE points back at -x, so the Doppler
        # shift is -f v / c.
        rays = expand_cluster(_los_path(), 1e-4 + 0j, ClusterConfig(),
                              (2.0, 0.0, 0.0), CTX)
        d = _los_path().vertices3d
        u = (d[0] - d[1]) / np.linalg.norm(d[0] - d[1])
        expected = CTX.carrier_frequency / SPEED_OF_LIGHT * 2.0 * u[0]
        assert rays[0].doppler == pytest.approx(expected)
        assert rays[0].doppler < 0.0


class TestConfigValidation:
    def test_zero_subrays_rejected(self):
        with pytest.raises(ValueError):
            ClusterConfig(subray_count=0)

    def test_nonpositive_spread_rejected(self):
        with pytest.raises(ValueError):
            ClusterConfig(delay_spread=0.0)
