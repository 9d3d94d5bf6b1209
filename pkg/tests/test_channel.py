import math

import pytest

from conftest import COARSE, SURFACE, TABLE3_ATM, table3_geometry
from uvnlos.channel import (
    no_obstacle_baseline,
    path_loss_db,
    sweep_offset,
    sweep_range,
    total_energy,
)
from uvnlos.geometry.scene import ObstacleBox, range_scaled_obstacle
from uvnlos.reflection import ReflectionSurface
from uvnlos.scattering import scattered_energy


def test_path_loss_definition():
    assert path_loss_db(1.0, 1.0) == 0.0
    assert path_loss_db(1.0, 1e-9) == pytest.approx(90.0)
    assert path_loss_db(1.0, 0.0) == math.inf


def test_total_is_sum(t3, t3_obstacle):
    res = total_energy(t3, TABLE3_ATM, t3_obstacle, SURFACE, COARSE)
    assert res.q_total == res.q_sca + res.q_ref
    assert res.path_loss_db == pytest.approx(path_loss_db(1.0, res.q_total))
    assert res.diagnostics["validity"] == ["delta_t_positive", "delta_r_positive", "corner_limit_tx",
                                           "corner_limit_rx", "obstacle_y_range"]


def test_collapse_to_baseline(t3):
    base = no_obstacle_baseline(t3, TABLE3_ATM, COARSE)
    bare = total_energy(t3, TABLE3_ATM, None, ReflectionSurface(r_r=0.0), COARSE)
    assert bare.q_total == base.q_total
    far = ObstacleBox(10, 200, 200, -1e6, 50)
    res = total_energy(t3, TABLE3_ATM, far, ReflectionSurface(r_r=0.0), COARSE)
    assert res.path_loss_db == pytest.approx(base.path_loss_db, abs=0.01)


def test_obstacle_lowers_path_loss_at_100m(t3, t3_obstacle):
    with_obstacle = total_energy(t3, TABLE3_ATM, t3_obstacle, SURFACE, COARSE).path_loss_db
    assert with_obstacle < no_obstacle_baseline(t3, TABLE3_ATM, COARSE).path_loss_db


def test_sweep_range_shape_and_consistency(t3):
    ranges = [50.0, 100.0, 150.0, 200.0]
    rows = sweep_range(t3, TABLE3_ATM, SURFACE, ranges, COARSE, blockage="oracle")
    assert [r.range_m for r in rows] == ranges
    losses = [r.result.path_loss_db for r in rows]
    assert all(b > a for a, b in zip(losses, losses[1:]))
    single = total_energy(t3, TABLE3_ATM, range_scaled_obstacle(100.0), SURFACE, COARSE, blockage="oracle")
    assert rows[1].result.q_total == single.q_total
    again = sweep_range(t3, TABLE3_ATM, SURFACE, ranges, COARSE, blockage="oracle")
    assert [r.result.q_total for r in again] == [r.result.q_total for r in rows]


def test_baseline_increases_with_range():
    losses = [no_obstacle_baseline(table3_geometry(r=r), TABLE3_ATM, COARSE).path_loss_db
              for r in (50, 100, 150, 200)]
    assert all(b > a for a, b in zip(losses, losses[1:]))


def test_sweep_offset_columns(t4, t4_obstacle):
    rows = sweep_offset(t4, TABLE3_ATM, t4_obstacle, SURFACE, [-5.0, -60.0], COARSE, blockage="oracle")
    assert rows[0].result is None and "center_x" in rows[0].error
    row = rows[1]
    sca = scattered_energy(t4, TABLE3_ATM, t4_obstacle.replace(center_x=-60.0), COARSE).q_sca
    assert row.result.q_sca == sca
    assert row.result.pl_sca_db == pytest.approx(path_loss_db(1.0, sca))
    assert row.result.pl_ref_db < row.result.pl_sca_db
