import math

import numpy as np
import pytest
from scipy import integrate

from conftest import COARSE, SURFACE, TABLE3_ATM
from uvnlos.errors import DomainError
from uvnlos.geometry.scene import ObstacleBox
from uvnlos.mcpt import McptSpec, trace
from uvnlos.reflection import (
    ReflectionSurface,
    in_reflection_region,
    phong_intensity,
    reflected_energy,
    reflection_integrand,
    reflection_patch,
    region_y_interval,
)
from uvnlos.scattering import Atmosphere, beam_solid_angle, scattered_energy


def test_phong_table_value():
    assert phong_intensity(0.0, 0.0, 0.5, 5) == pytest.approx(0.5 / math.pi + 0.5 * 6 / (2 * math.pi))
    assert phong_intensity(0.0, 0.0, 0.5, 5) == pytest.approx(0.63662, abs=1e-5)


def test_phong_domain():
    with pytest.raises(DomainError):
        phong_intensity(2.0, 0.0, 0.5, 5)
    with pytest.raises(DomainError):
        phong_intensity(0.1, -0.1, 0.5, 5)
    with pytest.raises(DomainError):
        ReflectionSurface(r_r=1.5)


def test_lambertian_hemisphere_normalised():
    val, _ = integrate.dblquad(lambda t, p: phong_intensity(t, 0.0, 1.0, 5) * math.sin(t),
                               0, 2 * math.pi, 0, math.pi / 2)
    assert val == pytest.approx(1.0, abs=1e-10)
    # eta = 1 leaves only the diffuse term
    assert phong_intensity(0.3, 0.2, 1.0, 5) == pytest.approx(math.cos(0.3) / math.pi)


def test_specular_lobe_normalised():
    m = 5
    val, _ = integrate.quad(lambda t: (m + 1) / (2 * math.pi) * math.cos(t) ** m * math.sin(t) * 2 * math.pi,
                            0, math.pi / 2)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_lobe_cut_off_behind():
    assert phong_intensity(0.2, 2.0, 0.0, 5) == 0.0


def _facade_point(geom, obstacle):
    z = np.linspace(0, obstacle.height, 400)
    lo, hi, ok = region_y_interval(z, geom, obstacle)
    i = np.flatnonzero(ok)[len(np.flatnonzero(ok)) // 2]
    return np.array([obstacle.x_c, 0.5 * (lo[i] + hi[i]), z[i]])


def test_integrand_two_step(t4, t4_obstacle):
    p = _facade_point(t4, t4_obstacle)
    patch = reflection_patch(p, t4)
    # energy per unit area arriving at the patch
    incident = (t4.pulse_energy * math.cos(patch.omega_i) * math.exp(-TABLE3_ATM.ke * patch.tau)
                / (beam_solid_angle(t4.beta_t) * patch.tau**2))
    # fraction of it collected by the aperture after reflection
    collected = (SURFACE.r_r * phong_intensity(patch.theta_1, patch.theta_2, SURFACE.eta, SURFACE.m_s)
                 * t4.aperture_area * math.cos(patch.theta_v) / patch.epsilon**2
                 * math.exp(-TABLE3_ATM.ke * patch.epsilon))
    assert reflection_integrand(patch, t4, TABLE3_ATM, SURFACE) == pytest.approx(incident * collected, rel=1e-12)


def test_integrand_zero_reflectance_and_no_extinction(t4, t4_obstacle):
    patch = reflection_patch(_facade_point(t4, t4_obstacle), t4)
    assert reflection_integrand(patch, t4, TABLE3_ATM, ReflectionSurface(r_r=0.0)) == 0.0
    a = reflection_integrand(patch, t4, Atmosphere(0.0, 0.0, 0.0), SURFACE)
    b = reflection_integrand(patch, t4, Atmosphere(0.0, 0.0, 0.0, gamma=0.5, g=0.1, f=0.9), SURFACE)
    assert a == b


def test_region_indicator(t4, t4_obstacle):
    p = _facade_point(t4, t4_obstacle)
    assert in_reflection_region(p, t4, t4_obstacle)
    assert not in_reflection_region(p + [0, 0, 1e3], t4, t4_obstacle)
    assert not in_reflection_region(p + [0, 1e3, 0], t4, t4_obstacle)


def test_region_area_matches_raster(t4, t4_obstacle):
    res = reflected_energy(t4, TABLE3_ATM, t4_obstacle, SURFACE)
    ys = np.linspace(t4_obstacle.y_b, t4_obstacle.y_a, 801)
    zs = np.linspace(0, t4_obstacle.height, 1601)
    yy, zz = np.meshgrid(0.5 * (ys[1:] + ys[:-1]), 0.5 * (zs[1:] + zs[:-1]))
    pts = np.stack([np.full(yy.shape, t4_obstacle.x_c), yy, zz], axis=-1)
    frac = in_reflection_region(pts, t4, t4_obstacle).mean()
    assert res.diagnostics["active_region_fraction"] == pytest.approx(frac, abs=2e-3)


def test_low_obstacle_below_footprints(t4):
    low = ObstacleBox(30, 40, 1.0, -45, 100)
    res = reflected_energy(t4, TABLE3_ATM, low, SURFACE, COARSE)
    assert res.q_ref == 0.0 and res.diagnostics["empty_region"]


def test_diffuse_surface_ignores_directivity(t4, t4_obstacle):
    a = reflected_energy(t4, TABLE3_ATM, t4_obstacle, ReflectionSurface(0.1, 1.0, 1.0), COARSE).q_ref
    b = reflected_energy(t4, TABLE3_ATM, t4_obstacle, ReflectionSurface(0.1, 40.0, 1.0), COARSE).q_ref
    assert a == pytest.approx(b, rel=1e-14)


def test_no_obstacle_no_reflection(t4):
    assert reflected_energy(t4, TABLE3_ATM, None, SURFACE).q_ref == 0.0


def test_bind_fills_facade(t4_obstacle):
    s = SURFACE.bind(t4_obstacle)
    assert s.plane_x == -30 and s.y_span == (80, 120) and s.z_span == (0, 80)
    np.testing.assert_array_equal(s.normal, [1, 0, 0])


def test_reflection_matches_photon_tracing(t4):
    o = ObstacleBox(30, 40, 80, -60, 100)
    q = reflected_energy(t4, TABLE3_ATM, o, SURFACE).q_ref
    q += scattered_energy(t4, TABLE3_ATM, o).q_sca
    est = trace(t4, TABLE3_ATM, o, SURFACE, McptSpec(n_photons=1_000_000, rng_seed=11))
    assert abs(q - est.q_r_hat) < 3 * est.std_error
