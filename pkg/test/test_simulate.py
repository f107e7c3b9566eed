"""Test the trial generator, the population values and Monte Carlo sweeps.

Config files and sweep tables are written to test/test_simulate/o.
"""

import math
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

THISDIR = str(Path(__file__).resolve().parent)
sys.path.insert(0, os.path.dirname(THISDIR))
from lordparadox import simulate
from lordparadox.analysis import estimateSet
from lordparadox.dataset import pearson
from lordparadox.exceptions import ConfigError, InvalidSpec
from lordparadox.paradox import Category
from lordparadox.simulate import ScenarioSpec

OUTPUT = THISDIR + "/test_simulate/o"


def writeConfig(name: str, text: str) -> str:
	os.makedirs(OUTPUT, exist_ok=True)
	path = OUTPUT + "/" + name
	Path(path).write_text(text, encoding="utf-8")
	return path


def byCell(rows, cell: int) -> dict:
	return {row.estimator: row for row in rows if row.cell == cell}


def test_generate_deterministic():
	spec = ScenarioSpec(nSch=5, pupilsPerSchool=8, deltaPre=0.2, seed=42)
	first, second = simulate.generate(spec), simulate.generate(spec)
	assert first.records == second.records
	assert first.pupilIds[0] == "s1-1"
	assert first.pupilIds[-1] == "s5-8"


def test_generate_seedAndReplicateMatter():
	spec = ScenarioSpec(nSch=5, pupilsPerSchool=8, seed=42)
	base = simulate.generate(spec).records[0]
	assert simulate.generate(ScenarioSpec(nSch=5, pupilsPerSchool=8, seed=43)).records[0] != base
	assert simulate.generate(spec, replicate=1).records[0] != base


def test_generate_schoolIdsSortable():
	data = simulate.generate(ScenarioSpec(nSch=12, pupilsPerSchool=2))
	assert data.schoolIds[0] == "s01"
	assert data.schoolIds[-1] == "s12"
	assert data.nSchools == 12


@pytest.mark.parametrize(
	"arguments",
	[
		{"nSch": 0},
		{"alloc": 1.0},
		{"alloc": 0.0},
		{"rho": 1.0},
		{"iccTarget": 1.0},
		{"iccTarget": -0.1},
		{"design": "cluster"},
		{"cutLow": 1.0, "cutHigh": 0.0},
		{"seed": -1},
		{"nSch": 3, "pupilsPerSchool": (4, 5)},
		{"pupilsPerSchool": 0},
	],
)
def test_scenarioSpec_invalid(arguments: dict):
	with pytest.raises(InvalidSpec):
		ScenarioSpec(**arguments)


def test_generate_emptyArm():
	"""
	One pupil per school rounds the within-school share down to nobody
	"""
	with pytest.raises(InvalidSpec):
		simulate.generate(ScenarioSpec(nSch=4, pupilsPerSchool=1, design="mst"))


def test_generate_unequalSchools():
	data = simulate.generate(ScenarioSpec(nSch=3, pupilsPerSchool=(2, 5, 9), design="srt", seed=4))
	assert data.n == 16
	assert list(pd.Series(data.schoolIds).value_counts().sort_index()) == [2, 5, 9]


def test_allocate_crt():
	data = simulate.generate(ScenarioSpec(nSch=11, pupilsPerSchool=6, design="crt", seed=1))
	frame = pd.DataFrame({"school": data.schoolIds, "group": data.group})
	shares = frame.groupby("school")["group"].mean()
	assert set(shares) == {0.0, 1.0}
	assert int(shares.sum()) == round(0.5 * 11)


def test_allocate_mst():
	data = simulate.generate(ScenarioSpec(nSch=6, pupilsPerSchool=(10, 10, 4, 8, 20, 6), alloc=0.25, seed=2))
	frame = pd.DataFrame({"school": data.schoolIds, "group": data.group})
	treated = frame.groupby("school")["group"].sum()
	assert list(treated) == [round(0.25 * size) for size in (10, 10, 4, 8, 20, 6)]


def test_allocate_srt():
	data = simulate.generate(ScenarioSpec(nSch=20, pupilsPerSchool=500, design="srt", alloc=0.3, seed=3))
	assert data.nT / data.n == pytest.approx(0.3, abs=0.02)


def test_allocate_rdd():
	spec = ScenarioSpec(nSch=10, pupilsPerSchool=100, design="rdd", cutLow=-0.3, cutHigh=0.4, seed=5)
	data = simulate.generate(spec)
	assert np.all(data.group[data.pretest < -0.3] == 1)
	assert np.all(data.group[data.pretest > 0.4] == 0)
	between = (data.pretest >= -0.3) & (data.pretest <= 0.4)
	assert 0 < data.group[between].mean() < 1


def test_generate_prePostCorrelation():
	data = simulate.generate(ScenarioSpec(nSch=100, pupilsPerSchool=100, rho=0.6, seed=6))
	assert pearson(data.pretest, data.posttest) == pytest.approx(0.6, abs=0.03)


def test_generate_baselineShift():
	data = simulate.generate(ScenarioSpec(nSch=100, pupilsPerSchool=200, deltaPre=-0.4, seed=7))
	shift = data.pretest[data.treated].mean() - data.pretest[~data.treated].mean()
	assert shift == pytest.approx(-0.4, abs=0.05)


def test_populationEffects():
	effects = simulate.populationEffects(ScenarioSpec(deltaPre=-0.4, rho=0.7))
	assert effects["gP"] == pytest.approx(-0.28)
	assert effects["gG"] == pytest.approx(0.12 / math.sqrt(0.6))
	assert effects["ttG"] == effects["gG"]
	assert effects["ttP"] == 0
	assert effects["pretImb"] == pytest.approx(-0.4)


def test_populationEffects_clustered():
	effects = simulate.populationEffects(ScenarioSpec(iccTarget=0.2, rho=0.5, effect=0.3))
	assert effects["gP"] == pytest.approx(0.3 / math.sqrt(1.25))
	assert effects["ttP"] == pytest.approx(0.3 / math.sqrt(0.25 * 0.25 + 0.75))


def test_populationEffects_rdd():
	effects = simulate.populationEffects(ScenarioSpec(design="rdd"))
	assert set(effects) == {"gP", "gG", "ttP", "ttG", "pretImb"}
	assert all(value is None for value in effects.values())


def test_analyzeReplicate_reversal():
	"""
	50,000 pupils per arm, baseline shift -0.4, no effect: the simple pair reverses
	"""
	spec = ScenarioSpec(nSch=100, pupilsPerSchool=1000, deltaPre=-0.4, rho=0.7, seed=2024)
	result = simulate.analyzeReplicate(spec, 0)
	assert result.simple is Category.Reversal
	assert result.estimates.gP.g == pytest.approx(-0.28, abs=0.02)


def test_sweep_singleReplicate():
	spec = ScenarioSpec(nSch=8, pupilsPerSchool=15, effect=0.2, seed=11)
	rows = byCell(simulate.sweep([spec], 1), 0)
	estimates = estimateSet(simulate.generate(spec, 0))
	assert rows["gP"].mean == estimates.gP.g
	assert rows["ttG"].mean == estimates.ttG.g
	assert rows["gP"].sd is None
	assert rows["gP"].replicates == 1


def test_sweep_workersDoNotMatter():
	grid = [ScenarioSpec(nSch=6, pupilsPerSchool=10, seed=12), ScenarioSpec(nSch=6, pupilsPerSchool=10, seed=13)]
	assert simulate.sweep(grid, 5, workers=1) == simulate.sweep(grid, 5, workers=4)


def test_sweep_invalid():
	with pytest.raises(InvalidSpec):
		simulate.sweep([], 10)
	with pytest.raises(InvalidSpec):
		simulate.sweep([ScenarioSpec()], 0)


def test_sweep_reversalFrequency():
	grid = [
		ScenarioSpec(nSch=40, pupilsPerSchool=100, deltaPre=delta, rho=0.7, seed=20)
		for delta in (-0.4, 0.0, 0.4)
	]
	rows = simulate.sweep(grid, 20)
	frequencies = [byCell(rows, cell)["gP"].reversalFreq for cell in range(3)]
	assert frequencies[0] > 0.9
	assert frequencies[1] <= 0.1
	assert frequencies[2] > 0.9


def test_sweep_coverage():
	"""
	Pupils allocated within schools: the post-ANCOVA interval covers the truth
	"""
	spec = ScenarioSpec(nSch=30, pupilsPerSchool=40, iccTarget=0.15, effect=0.2, seed=2025)
	row = byCell(simulate.sweep([spec], 500, workers=4), 0)["ttP"]
	assert row.failures == 0
	assert 0.93 <= row.coverage <= 0.97


def test_sweep_clusteredIntervalsWider():
	spec = ScenarioSpec(nSch=30, pupilsPerSchool=40, design="crt", iccTarget=0.15, effect=0.2, seed=2026)
	rows = byCell(simulate.sweep([spec], 30), 0)
	assert rows["ttP"].meanWidth > rows["gP"].meanWidth


def test_sweep_widthGrowsWithIcc():
	grid = [
		ScenarioSpec(nSch=16, pupilsPerSchool=25, design="crt", iccTarget=icc, effect=0.2, seed=30)
		for icc in (0.0, 0.2, 0.5)
	]
	rows = simulate.sweep(grid, 10)
	widths = [byCell(rows, cell)["ttP"].meanWidth for cell in range(3)]
	assert widths[0] < widths[1] < widths[2]


def test_writeSweepTsv():
	grid = [
		ScenarioSpec(nSch=6, pupilsPerSchool=(5, 6, 7, 8, 9, 10), seed=40),
		ScenarioSpec(nSch=6, pupilsPerSchool=20, design="rdd", seed=41),
	]
	fileName = OUTPUT + "/sweep.tsv"
	simulate.writeSweepTsv(simulate.sweep(grid, 3), fileName)
	table = pd.read_csv(fileName, sep="\t")
	assert len(table) == 2 * 4
	assert list(table["estimator"][:4]) == ["gP", "gG", "ttP", "ttG"]
	assert table.loc[0, "pupils_per_school"] == "5,6,7,8,9,10"
	assert table[table["design"] == "rdd"]["truth"].isna().all()
	assert table[table["design"] == "rdd"]["coverage"].isna().all()
	assert "NA" in Path(fileName).read_text(encoding="utf-8")


def test_loadScenarioConfig_grid():
	path = writeConfig(
		"grid.cfg",
		"# reversal grid\n"
		"n_sch = 10\n"
		"pupils_per_school = 40\n"
		"delta_pre = -0.4 | 0 | 0.4  # baseline shift\n"
		"\n"
		"rho = 0.7\n"
		"design = crt|mst\n"
		"replicates = 7\n"
		"seed = 3\n",
	)
	grid, replicates = simulate.loadScenarioConfig(path)
	assert replicates == 7
	assert len(grid) == 6
	assert (grid[0].deltaPre, grid[0].design) == (-0.4, "crt")
	assert (grid[1].deltaPre, grid[1].design) == (-0.4, "mst")
	assert (grid[5].deltaPre, grid[5].design) == (0.4, "mst")
	assert all(spec.nSch == 10 and spec.rho == 0.7 and spec.seed == 3 for spec in grid)


def test_loadScenarioConfig_seedOverride():
	path = writeConfig("seed.cfg", "seed = 3\nn_sch = 3\npupils_per_school = 4,5,6\n")
	grid, replicates = simulate.loadScenarioConfig(path, seed=99)
	assert replicates == 1
	assert grid == [ScenarioSpec(nSch=3, pupilsPerSchool=(4, 5, 6), seed=99)]


def test_loadScenarioConfig_defaults():
	grid, _ = simulate.loadScenarioConfig(writeConfig("empty.cfg", "# nothing set\n"))
	assert grid == [ScenarioSpec()]


@pytest.mark.parametrize(
	("text", "match"),
	[
		("n_sch = 10\nrho 0.5\n", ":2: expected key=value"),
		("colour = red\n", ":1: unknown key 'colour'"),
		("n_sch = 4\n\nrho = high\n", ":3: bad value for 'rho'"),
		("replicates = many\n", ":1: bad value"),
		("design =\n", ":1: expected key=value"),
	],
)
def test_loadScenarioConfig_errors(text: str, match: str):
	with pytest.raises(ConfigError, match=match):
		simulate.loadScenarioConfig(writeConfig("bad.cfg", text))


def test_loadScenarioConfig_invalidScenario():
	with pytest.raises(InvalidSpec):
		simulate.loadScenarioConfig(writeConfig("alloc.cfg", "alloc = 0.5 | 2\n"))


def test_loadScenarioConfig_missing():
	with pytest.raises(ConfigError):
		simulate.loadScenarioConfig(OUTPUT + "/missing.cfg")
