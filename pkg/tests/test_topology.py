import numpy as np
import pytest
from scipy import stats

from cellfree_jrc.errors import DegenerateGeometryError, InvalidConfigError
from cellfree_jrc.topology import (
    Annulus,
    ClutterField,
    Rect,
    bearing,
    generate_layout,
    read_entities_csv,
    sample_clutter,
    write_entities_csv,
)

AREA = Rect(0.0, 0.0, 500.0, 500.0)


def test_generate_layout_counts_and_bounds():
    layout = generate_layout(100, 50, AREA, seed=7)
    assert layout.ap_positions.shape == (100, 2)
    assert layout.ue_positions.shape == (50, 2)
    assert AREA.contains(layout.ap_positions).all()
    assert AREA.contains(layout.ue_positions).all()


def test_generate_layout_deterministic():
    a = generate_layout(100, 50, AREA, seed=7)
    b = generate_layout(100, 50, AREA, seed=7)
    np.testing.assert_array_equal(a.ap_positions, b.ap_positions)
    np.testing.assert_array_equal(a.ue_positions, b.ue_positions)
    c = generate_layout(100, 50, AREA, seed=8)
    assert not np.array_equal(a.ap_positions, c.ap_positions)


def test_generate_layout_unit_square():
    unit = Rect(0.0, 0.0, 1.0, 1.0)
    layout = generate_layout(1, 1, unit, seed=0)
    assert unit.contains(layout.ap_positions).all()
    assert unit.contains(layout.ue_positions).all()


def test_generate_layout_zero_area_rejected():
    with pytest.raises(InvalidConfigError):
        generate_layout(2, 2, Rect(0.0, 0.0, 0.0, 1.0), seed=0)


def test_sample_clutter_zero_intensity_empty():
    field = sample_clutter(0.0, Rect(0.0, 0.0, 20.0, 20.0), 1.0, seed=0)
    assert field.num_scatterers == 0


def test_sample_clutter_negative_intensity_rejected():
    with pytest.raises(InvalidConfigError):
        sample_clutter(-0.1, Rect(0.0, 0.0, 20.0, 20.0), 1.0, seed=0)


def test_sample_clutter_poisson_moments():
    # rho * |region| = 0.1 * 400 = 40; sample mean and variance of the count
    # over 1e4 draws must sit within 3 sigma of 40.
    region = Rect(0.0, 0.0, 20.0, 20.0)
    counts = np.array(
        [sample_clutter(0.1, region, 1.0, seed=(11, i)).num_scatterers for i in range(10_000)]
    )
    lam = 40.0
    mean_tol = 3.0 * np.sqrt(lam / counts.size)
    assert abs(counts.mean() - lam) < mean_tol
    # var(sample variance) ~ (mu4 - sigma^4)/n with Poisson mu4 = lam + 3 lam^2
    var_tol = 3.0 * np.sqrt((lam + 2.0 * lam**2) / counts.size)
    assert abs(counts.var(ddof=1) - lam) < var_tol


def test_sample_clutter_rcs_exponential():
    region = Rect(0.0, 0.0, 200.0, 200.0)
    rcs = []
    i = 0
    while sum(len(r) for r in rcs) < 100_000:
        rcs.append(sample_clutter(0.05, region, 1.0, seed=(21, i)).rcs)
        i += 1
    samples = np.concatenate(rcs)[:100_000]
    assert (samples >= 0).all()
    assert abs(samples.mean() - 1.0) < 0.01
    # Kolmogorov-Smirnov against Exp(1) at the 1% level.
    result = stats.kstest(samples, "expon", args=(0.0, 1.0))
    assert result.pvalue > 0.01


def test_sample_clutter_worst_case_gains_are_one():
    field = sample_clutter(0.05, Rect(0.0, 0.0, 50.0, 50.0), 2.0, seed=3)
    np.testing.assert_array_equal(field.fading_gain, np.ones(field.num_scatterers))


def test_sample_clutter_annulus_region():
    region = Annulus(center=(10.0, -5.0), r_inner=20.0, r_outer=27.5)
    field = sample_clutter(0.05, region, 0.5, seed=4)
    assert field.num_scatterers > 0
    assert region.contains(field.positions).all()


def test_bearing_cardinal_directions():
    assert bearing((0, 0), (1, 0)) == pytest.approx(0.0)
    assert bearing((0, 0), (0, 1)) == pytest.approx(np.pi / 2)
    assert bearing((0, 0), (-1, 0)) == pytest.approx(np.pi)


def test_bearing_coincident_points():
    with pytest.raises(DegenerateGeometryError):
        bearing((1.0, 2.0), (1.0, 2.0))


def test_entities_csv_round_trip(tmp_path):
    layout = generate_layout(4, 3, AREA, seed=5)
    clutter = sample_clutter(0.02, Rect(0.0, 0.0, 50.0, 50.0), 1.5, seed=6)
    path = tmp_path / "entities.csv"
    write_entities_csv(path, layout=layout, clutter=clutter)
    data = read_entities_csv(path)
    np.testing.assert_allclose(data["ap"], layout.ap_positions)
    np.testing.assert_allclose(data["ue"], layout.ue_positions)
    np.testing.assert_allclose(data["scatterer"], clutter.positions)
    np.testing.assert_allclose(data["rcs"], clutter.rcs)


def test_clutter_field_rejects_negative_rcs():
    with pytest.raises(InvalidConfigError):
        ClutterField(
            positions=np.array([[1.0, 1.0]]),
            rcs=np.array([-1.0]),
            fading_gain=np.array([1.0]),
            intensity=0.1,
        )
