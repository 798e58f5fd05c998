import math

import numpy as np
import pytest

from isac_outage import ConfigError, SystemConfig
from isac_outage.experiments import (
    DEFAULT_B_GRID,
    DEFAULT_EPSILON_GRID,
    ExperimentSpec,
    build_spec,
    histogram_gof,
    parse_config_text,
    read_csv,
    render_csv,
    run_histogram,
    run_target_op_sweep,
    run_tradeoff,
    run_user_op_sweep,
    run_validate,
)

GAMMAS = tuple(float(g) for g in range(1, 17))


def analytic(table, col):
    i, m = table.columns.index(col), table.columns.index("method")
    return [row[i] for row in table.rows if row[m] == "analytic"]


# ---------------------------------------------------------------- config

def test_parse_config_text_comments_and_blanks():
    text = "# reference point\nN = 9\n\n p_t=20   # doubled\nb1_phase = pi/3\n"
    assert parse_config_text(text) == {"N": "9", "p_t": "20", "b1_phase": "pi/3"}


def test_build_spec_types():
    spec = build_spec({"N": "9", "b1_phase": "pi/3", "alpha": "1+2j", "grid": "1, 2,4", "sweep": "gamma-grid"})
    assert spec.base.N == 9 and spec.base.b1_phase == pytest.approx(math.pi / 3)
    assert spec.base.alpha == 1 + 2j and spec.grid == (1.0, 2.0, 4.0)


@pytest.mark.parametrize("values,key", [
    ({"sigma_u2": "0"}, "sigma_u2"),
    ({"bogus": "1"}, "bogus"),
    ({"N": "nine"}, "N"),
    ({"N": "9.5"}, "N"),
    ({"sweep": "gamma-grid"}, "grid"),
    ({"sweep": "b1-grid", "grid": "0.1,-0.2"}, "grid"),
    ({"sweep": "sideways"}, "sweep"),
    ({"trials": "0"}, "trials"),
])
def test_bad_config_names_key(values, key):
    with pytest.raises(ConfigError) as err:
        build_spec(values)
    assert err.value.key == key


def test_config_file_line_without_equals():
    with pytest.raises(ConfigError):
        parse_config_text("N 9\n")


def test_default_grids():
    assert len(DEFAULT_EPSILON_GRID) == 12
    assert min(DEFAULT_EPSILON_GRID) == pytest.approx(8e-10) and max(DEFAULT_EPSILON_GRID) < 8e-4
    assert DEFAULT_B_GRID[0] == 0.05 and DEFAULT_B_GRID[-1] == 0.95


# ------------------------------------------------------------------- CSV

def test_csv_metadata_and_roundtrip():
    spec = ExperimentSpec(sweep="gamma-grid", grid=(2.0, 1.0), trials=2000, seed=9)
    text = render_csv(run_user_op_sweep(spec))
    lines = text.splitlines()
    assert lines[0].startswith("# tool = isac-outage ")
    for key in ("N", "M", "p_t", "sigma_u2", "sigma_r2", "L", "alpha", "b1_mag", "b1_phase", "b2_mag", "b2_phase", "seed"):
        assert any(line.startswith(f"# {key} = ") for line in lines)
    table = read_csv(text)
    assert table.columns == ["gamma", "p_u", "std_error", "method"]
    assert table.meta["seed"] == "9"
    assert [float(r[0]) for r in table.rows] == [1.0, 1.0, 2.0, 2.0]


def test_csv_has_no_timestamp_and_is_stable():
    spec = ExperimentSpec(sweep="gamma-grid", grid=(4.0,), trials=3000, seed=1)
    assert render_csv(run_user_op_sweep(spec)) == render_csv(run_user_op_sweep(spec))


def test_parallel_sweep_identical():
    a = ExperimentSpec(sweep="gamma-grid", grid=(1.0, 8.0), trials=40000, seed=2)
    b = ExperimentSpec(sweep="gamma-grid", grid=(1.0, 8.0), trials=40000, seed=2, workers=3)
    assert render_csv(run_user_op_sweep(a)) == render_csv(run_user_op_sweep(b))


# ---------------------------------------------------------------- sweeps

def test_user_sweep_shape_and_monotone():
    table = run_user_op_sweep(ExperimentSpec(sweep="gamma-grid", grid=GAMMAS, trials=5000))
    assert len(table.rows) == 32
    gammas = table.column("gamma")
    assert gammas == sorted(gammas)
    assert np.all(np.diff(analytic(table, "p_u")) >= 0)


def test_user_sweep_more_antennas_lower():
    n15 = run_user_op_sweep(ExperimentSpec(sweep="gamma-grid", grid=GAMMAS, trials=1000))
    n9 = run_user_op_sweep(ExperimentSpec(base=SystemConfig(N=9), sweep="gamma-grid", grid=GAMMAS, trials=1000))
    assert np.all(np.array(analytic(n15, "p_u")) <= np.array(analytic(n9, "p_u")))


def test_user_sweep_wrong_sweep_rejected():
    with pytest.raises(ConfigError):
        run_user_op_sweep(ExperimentSpec(sweep="epsilon-grid", grid=(1e-6,)))


@pytest.mark.slow
def test_target_sweep_shape_power_and_agreement():
    grid = DEFAULT_EPSILON_GRID
    t10 = run_target_op_sweep(ExperimentSpec(sweep="epsilon-grid", grid=grid, trials=10**6, seed=3))
    assert len(t10.rows) == 24
    assert t10.columns == ["epsilon", "epsilon_db", "p_c", "std_error", "method"]
    for row in t10.rows:
        assert row[1] == pytest.approx(10 * math.log10(row[0]))
    p10 = analytic(t10, "p_c")
    assert np.all(np.diff(p10) <= 0)
    mc = [r[2] for r in t10.rows if r[4] == "monte-carlo"]
    assert np.all(np.abs(np.array(p10) - mc) <= 0.02)
    t20 = run_target_op_sweep(ExperimentSpec(base=SystemConfig(p_t=20.0), sweep="epsilon-grid", grid=grid, trials=1))
    assert np.all(np.array(analytic(t20, "p_c")) <= np.array(p10))


def test_tradeoff_b1_direction():
    spec = ExperimentSpec(base=SystemConfig(N=9), sweep="b1-grid", grid=(0.1, 0.4, 0.8))
    table = run_tradeoff(spec)
    assert table.columns == ["swept_param", "value", "p_u", "p_c"]
    assert "b2_mag fixed at 0.8" in table.meta["note"]
    assert np.all(np.diff(table.column("p_u")) < 0) and np.all(np.diff(table.column("p_c")) > 0)


def test_tradeoff_single_point():
    table = run_tradeoff(ExperimentSpec(sweep="b1-grid", grid=(0.3,)))
    assert len(table.rows) == 1 and table.rows[0][0] == "b1_mag"


def test_tradeoff_b2_descending_mirrors_b1():
    spec = ExperimentSpec(base=SystemConfig(N=9, b1_mag=0.2), sweep="b2-grid", grid=(1.2, 0.8, 0.4))
    table = run_tradeoff(spec)
    # lowering |b2| tilts the beam toward the user, like raising |b1|
    assert np.all(np.diff(table.column("p_u")) < 0) and np.all(np.diff(table.column("p_c")) > 0)


# ------------------------------------------------------------- histogram

def test_histogram_needs_enough_draws():
    with pytest.raises(ConfigError):
        run_histogram(ExperimentSpec(trials=9999))


def test_histogram_shape_mean_and_fit():
    table = run_histogram(ExperimentSpec(trials=10**4, seed=0))
    assert len(table.rows) == 2500
    mean, se = float(table.meta["sample_mean_x"]), float(table.meta["sample_se_x"])
    assert abs(mean - 1.5) <= 5 * se
    _, p_value, _ = histogram_gof(table)
    assert p_value > 1e-3


def test_histogram_density_normalised():
    table = run_histogram(ExperimentSpec(trials=2 * 10**4, seed=1, bins=20))
    area = (table.rows[0][1] - table.rows[0][0]) * (table.rows[0][3] - table.rows[0][2])
    assert sum(table.column("clt_expected")) / 2e4 == pytest.approx(1.0, abs=1e-3)
    assert sum(table.column("density")) * area == pytest.approx(1 - table.meta["outside_grid"] / 2e4)


# -------------------------------------------------------------- validate

@pytest.mark.slow
def test_validate_default_all_pass():
    table, ok = run_validate(ExperimentSpec())
    failed = [row for row in table.rows if row[3] != "pass"]
    assert ok, f"failed checks: {failed}"


@pytest.mark.slow
def test_validate_seed_change_same_pattern():
    a, _ = run_validate(ExperimentSpec(seed=1, trials=50000))
    b, _ = run_validate(ExperimentSpec(seed=2, trials=50000))
    assert [r[0] for r in a.rows] == [r[0] for r in b.rows]
    assert [r[3] for r in a.rows] == [r[3] for r in b.rows]
    assert [r[1] for r in a.rows] != [r[1] for r in b.rows]
