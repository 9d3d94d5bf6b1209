import math

import numpy as np
import pytest
from scipy import stats

from conftest import TABLE3_ATM
from uvnlos.errors import DomainError
from uvnlos.geometry.scene import ObstacleBox, SystemGeometry
from uvnlos.mcpt import McptSpec, batch_rng, sample_beam_direction, trace
from uvnlos.reflection import ReflectionSurface


def test_samples_inside_cap(t3):
    d = sample_beam_direction(np.random.default_rng(0), t3, 200_000)
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, rtol=1e-12)
    assert np.all(d @ t3.beam_axis >= math.cos(t3.beta_t) - 1e-12)
    mean = d.mean(axis=0)
    assert np.linalg.norm(mean / np.linalg.norm(mean) - t3.beam_axis) < 5e-3
    assert sample_beam_direction(np.random.default_rng(0), t3).shape == (3,)


def test_cap_uniformity_chi2(t3):
    d = sample_beam_direction(np.random.default_rng(1), t3, 1_000_000)
    axis = t3.beam_axis
    helper = np.array([0.0, 0.0, 1.0])
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)
    cos_t = d @ axis
    phi = np.arctan2(d @ v, d @ u)
    # equal-area bins: uniform in cos(theta) and in azimuth
    c_bin = np.floor((1 - cos_t) / (1 - math.cos(t3.beta_t)) * 10).clip(0, 9)
    p_bin = np.floor((phi + math.pi) / (2 * math.pi) * 8).clip(0, 7)
    counts = np.bincount((c_bin * 8 + p_bin).astype(int), minlength=80)
    assert stats.chisquare(counts).pvalue > 0.01


def test_spec_validation():
    with pytest.raises(DomainError):
        McptSpec(n_photons=0)
    with pytest.raises(DomainError):
        McptSpec(survival_threshold=1.0)


def test_batch_streams_are_keyed():
    a = batch_rng(5, 0).random(4)
    assert np.array_equal(a, batch_rng(5, 0).random(4))
    assert not np.array_equal(a, batch_rng(5, 1).random(4))
    assert not np.array_equal(a, batch_rng(6, 0).random(4))


def test_worker_count_does_not_change_estimate(t3, t3_obstacle):
    spec = McptSpec(n_photons=200_000, rng_seed=3, batch_size=16384)
    surface = ReflectionSurface()
    one = trace(t3, TABLE3_ATM, t3_obstacle, surface, spec, workers=1)
    four = trace(t3, TABLE3_ATM, t3_obstacle, surface, spec, workers=4)
    assert one.q_r_hat == four.q_r_hat and one.std_error == four.std_error


def test_fully_blocked_gives_zero():
    g = SystemGeometry(0.15, 0.15, 0.5, 0.5, 2.6, -2.6, 100.0)
    wall = ObstacleBox(thickness=1e5, width=1e5, height=1e5, center_x=-0.5e5 - 0.01, center_y=50.0)
    est = trace(g, TABLE3_ATM, wall, ReflectionSurface(r_r=0.0), McptSpec(n_photons=50_000))
    assert est.q_r_hat == 0.0 and est.insufficient
    assert est.path_loss_db == math.inf and est.stderr_db == math.inf


def test_components_add_up(t3, t3_obstacle):
    est = trace(t3, TABLE3_ATM, t3_obstacle, ReflectionSurface(), McptSpec(n_photons=100_000))
    assert est.q_sca_hat + est.q_ref_hat == pytest.approx(est.q_r_hat, rel=1e-12)
    assert est.q_ref_hat > 0 and est.n_contributing > 0
