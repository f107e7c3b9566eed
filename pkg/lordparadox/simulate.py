"""Simulate two-arm pre/post trials in schools.

For school j and pupil i:

	u_j ~ N(0, s2u), s2u = icc / (1 - icc)
	a_ij ~ N(delta * T_ij, 1)
	pre_ij = u_j + a_ij
	post_ij = u_j + rho * a_ij + sqrt(1 - rho^2) * e_ij + effect * T_ij

Baseline imbalance is a shift of latent ability in the intervention arm,
so pre and post differ between arms by delta and rho * delta. The gain
difference is (rho - 1) * delta: the two simple estimators disagree in
sign whenever delta != 0 and there is no effect, which is regression to
the mean at work.

Random numbers come from numpy's PCG64 generator seeded with
SeedSequence(seed, spawn_key=(replicate,)). Draws are taken in a fixed
order (school intercepts, abilities, noise, pupil uniforms, school
uniforms) so a seed always yields the same dataset.
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from lordparadox.analysis import ESTIMATE_NAMES, EstimateSet, estimateSet
from lordparadox.dataset import TrialDataset, fromArrays
from lordparadox.exceptions import ConfigError, InvalidSpec, UnwritablePath
from lordparadox.paradox import (Category, ComparisonRecord, ParadoxThresholds, classify,
                                 classifyMlm)

DESIGNS = ("crt", "mst", "srt", "rdd")


@dataclass(frozen=True)
class ScenarioSpec:
	"""Parameters of one simulated trial.

	design picks how pupils are allocated: crt allocates whole schools,
	mst allocates a fixed share within each school, srt allocates every
	pupil independently and rdd allocates by pretest (below cutLow to
	intervention, above cutHigh to control, at random between).
	"""

	nSch: int = 30
	pupilsPerSchool: int | tuple[int, ...] = 40
	alloc: float = 0.5
	design: str = "mst"
	deltaPre: float = 0.0
	rho: float = 0.5
	iccTarget: float = 0.0
	effect: float = 0.0
	seed: int = 0
	cutLow: float = -0.5
	cutHigh: float = 0.5

	def __post_init__(self):
		if isinstance(self.pupilsPerSchool, (list, tuple)):
			object.__setattr__(self, "pupilsPerSchool", tuple(int(size) for size in self.pupilsPerSchool))
		problems = []
		if self.nSch < 1:
			problems.append("n_sch must be at least 1")
		if isinstance(self.pupilsPerSchool, tuple):
			if len(self.pupilsPerSchool) != self.nSch:
				problems.append("pupils_per_school needs one size per school")
			if any(size < 1 for size in self.pupilsPerSchool):
				problems.append("every school needs at least one pupil")
		elif self.pupilsPerSchool < 1:
			problems.append("pupils_per_school must be at least 1")
		if not 0 < self.alloc < 1:
			problems.append("alloc must lie in (0, 1)")
		if not abs(self.rho) < 1:
			problems.append("rho must lie in (-1, 1)")
		if not 0 <= self.iccTarget < 1:
			problems.append("icc_target must lie in [0, 1)")
		if self.design not in DESIGNS:
			problems.append(f"design must be one of {', '.join(DESIGNS)}")
		if self.cutLow > self.cutHigh:
			problems.append("cut_low must not exceed cut_high")
		if not 0 <= self.seed < 2 ** 64:
			problems.append("seed must be a 64-bit unsigned integer")
		if problems:
			raise InvalidSpec("; ".join(problems))

	@property
	def sizes(self) -> np.ndarray:
		if isinstance(self.pupilsPerSchool, tuple):
			return np.array(self.pupilsPerSchool, dtype=np.int64)
		return np.full(self.nSch, self.pupilsPerSchool, dtype=np.int64)

	@property
	def sigma2U(self) -> float:
		return self.iccTarget / (1 - self.iccTarget)


def generator(spec: ScenarioSpec, replicate: int = 0) -> np.random.Generator:
	"""The PCG64 stream of one replicate of a scenario."""
	return np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed, spawn_key=(replicate,))))


def _allocate(spec: ScenarioSpec, school: np.ndarray, pre: np.ndarray, pupilDraw: np.ndarray, schoolDraw: np.ndarray):
	if spec.design == "crt":
		treatedSchools = np.argsort(schoolDraw, kind="stable")[: int(round(spec.alloc * spec.nSch))]
		return np.isin(school, treatedSchools)
	if spec.design == "mst":
		order = np.lexsort((pupilDraw, school))
		starts = np.concatenate(([0], np.cumsum(spec.sizes)[:-1]))
		rank = np.empty(len(school), dtype=np.int64)
		rank[order] = np.arange(len(school)) - starts[school[order]]
		return rank < np.round(spec.alloc * spec.sizes)[school]
	if spec.design == "srt":
		return pupilDraw < spec.alloc
	return np.where(pre < spec.cutLow, True, np.where(pre > spec.cutHigh, False, pupilDraw < spec.alloc))


def generate(spec: ScenarioSpec, replicate: int = 0, label: str = "simulated") -> TrialDataset:
	"""Draw one dataset from a scenario.

	Args:
		spec (ScenarioSpec): the scenario
		replicate (int, optional): replicate index, selects an independent
		stream of the same seed. Defaults to 0.
		label (str, optional): outcome label. Defaults to "simulated".

	Raises:
		InvalidSpec: the allocation leaves an arm empty

	Returns:
		TrialDataset: simulated dataset
	"""
	rng = generator(spec, replicate)
	sizes = spec.sizes
	school = np.repeat(np.arange(spec.nSch), sizes)
	n = len(school)
	intercepts = rng.normal(0.0, math.sqrt(spec.sigma2U), spec.nSch)
	ability = rng.standard_normal(n)
	noise = rng.standard_normal(n)
	pupilDraw = rng.random(n)
	schoolDraw = rng.random(spec.nSch)

	if spec.design == "rdd":
		treated = _allocate(spec, school, intercepts[school] + ability, pupilDraw, schoolDraw)
	else:
		treated = _allocate(spec, school, None, pupilDraw, schoolDraw)
		ability = ability + spec.deltaPre * treated
	if treated.all() or not treated.any():
		raise InvalidSpec(f"{spec.design} allocation with alloc={spec.alloc} leaves an arm empty")

	pretest = intercepts[school] + ability
	posttest = (
		intercepts[school]
		+ spec.rho * ability
		+ math.sqrt(1 - spec.rho ** 2) * noise
		+ spec.effect * treated
	)
	width = len(str(spec.nSch))
	schoolIds = np.array([f"s{index + 1:0{width}d}" for index in range(spec.nSch)], dtype=object)
	within = np.arange(n) - np.repeat(np.cumsum(sizes) - sizes, sizes)
	pupilIds = [f"{schoolIds[j]}-{k + 1}" for j, k in zip(school, within)]
	return fromArrays(pretest, posttest, treated.astype(np.int8), schoolIds[school], pupilIds, label)


def populationEffects(spec: ScenarioSpec) -> dict[str, float | None]:
	"""Population values of the estimators under the generator.

	gP and the post-test ANOVA: (rho * delta + effect) / sqrt(s2u + 1).
	gG and ttG: ((rho - 1) * delta + effect) / sqrt(2 - 2 rho), since the
	school intercept cancels in gains. ttP: effect over the within-school
	residual scale sqrt((1 - rho)^2 s2u + 1 - rho^2), which assumes the
	model recovers the within-school pretest slope. All are None for rdd,
	where allocation depends on the pretest.

	Args:
		spec (ScenarioSpec): the scenario

	Returns:
		dict[str, float | None]: values keyed gP, gG, ttP, ttG, pretImb
	"""
	if spec.design == "rdd":
		return {name: None for name in ESTIMATE_NAMES + ("pretImb",)}
	rho, delta, effect, sigma2U = spec.rho, spec.deltaPre, spec.effect, spec.sigma2U
	gain = ((rho - 1) * delta + effect) / math.sqrt(2 - 2 * rho)
	return {
		"gP": (rho * delta + effect) / math.sqrt(sigma2U + 1),
		"gG": gain,
		"ttP": effect / math.sqrt((1 - rho) ** 2 * sigma2U + 1 - rho ** 2),
		"ttG": gain,
		"pretImb": delta / math.sqrt(1 + sigma2U),
	}


@dataclass(frozen=True)
class ReplicateResult:
	"""Estimates and verdict categories of one replicate."""

	estimates: EstimateSet
	simple: Category | None
	mlm: Category | None


def analyzeReplicate(
	spec: ScenarioSpec, replicate: int, thresholds: ParadoxThresholds = ParadoxThresholds()
) -> ReplicateResult:
	"""Generate one replicate and run the four models on it."""
	estimates = estimateSet(generate(spec, replicate))
	record = ComparisonRecord("replicate", estimates.gP, estimates.gG, estimates.ttP, estimates.ttG)
	verdicts = []
	for classifier, pair in ((classify, ("gP", "gG")), (classifyMlm, ("ttP", "ttG"))):
		ready = all(getattr(estimates, name) is not None for name in pair)
		verdicts.append(classifier(record, thresholds).category if ready else None)
	return ReplicateResult(estimates, *verdicts)


@dataclass(frozen=True)
class SweepRow:
	"""Summary of one estimator in one grid cell."""

	cell: int
	estimator: str
	replicates: int
	truth: float | None
	mean: float | None
	sd: float | None
	coverage: float | None
	meanWidth: float | None
	failures: int
	reversalFreq: float
	reversalFreqMlm: float
	spec: ScenarioSpec


def _summarise(cell: int, spec: ScenarioSpec, results: list[ReplicateResult]) -> list[SweepRow]:
	truths = populationEffects(spec)
	count = len(results)
	reversal = sum(result.simple is Category.Reversal for result in results) / count
	reversalMlm = sum(result.mlm is Category.Reversal for result in results) / count
	rows = []
	for name in ESTIMATE_NAMES:
		estimates = [getattr(result.estimates, name) for result in results]
		estimates = [estimate for estimate in estimates if estimate is not None]
		values = np.array([estimate.g for estimate in estimates])
		widths = [estimate.width for estimate in estimates if estimate.width is not None]
		truth = truths[name]
		coverage = None
		if truth is not None and widths:
			coverage = float(np.mean([estimate.covers(truth) for estimate in estimates if estimate.width is not None]))
		rows.append(
			SweepRow(
				cell=cell,
				estimator=name,
				replicates=count,
				truth=truth,
				mean=float(values.mean()) if len(values) else None,
				sd=float(values.std(ddof=1)) if len(values) > 1 else None,
				coverage=coverage,
				meanWidth=float(np.mean(widths)) if widths else None,
				failures=count - len(estimates),
				reversalFreq=reversal,
				reversalFreqMlm=reversalMlm,
				spec=spec,
			)
		)
	return rows


def sweep(
	grid: Sequence[ScenarioSpec],
	replicates: int,
	workers: int = 1,
	thresholds: ParadoxThresholds = ParadoxThresholds(),
) -> list[SweepRow]:
	"""Run every scenario of a grid for a number of replicates.

	Replicate r of a cell uses stream r of the cell's seed, so the table is
	the same however many workers run it.

	Args:
		grid (Sequence[ScenarioSpec]): scenarios, one cell each
		replicates (int): replicates per cell, at least 1
		workers (int, optional): worker threads. Defaults to 1.
		thresholds (ParadoxThresholds, optional): for the reversal counts

	Raises:
		InvalidSpec: empty grid or replicates < 1

	Returns:
		list[SweepRow]: one row per (cell, estimator)
	"""
	if not grid:
		raise InvalidSpec("sweep needs at least one scenario")
	if replicates < 1:
		raise InvalidSpec("sweep needs at least one replicate")
	rows = []
	with ThreadPoolExecutor(max_workers=max(workers, 1)) as executor:
		for cell, spec in enumerate(grid):
			results = list(
				executor.map(lambda replicate, spec=spec: analyzeReplicate(spec, replicate, thresholds), range(replicates))
			)
			rows.extend(_summarise(cell, spec, results))
	return rows


SPEC_COLUMNS = (
	("n_sch", "nSch"),
	("pupils_per_school", "pupilsPerSchool"),
	("alloc", "alloc"),
	("design", "design"),
	("delta_pre", "deltaPre"),
	("rho", "rho"),
	("icc_target", "iccTarget"),
	("effect", "effect"),
	("seed", "seed"),
	("cut_low", "cutLow"),
	("cut_high", "cutHigh"),
)

ROW_COLUMNS = (
	("estimator", "estimator"),
	("replicates", "replicates"),
	("truth", "truth"),
	("mean", "mean"),
	("sd", "sd"),
	("coverage", "coverage"),
	("mean_width", "meanWidth"),
	("failures", "failures"),
	("reversal_freq", "reversalFreq"),
	("reversal_freq_mlm", "reversalFreqMlm"),
)


def _specValue(value):
	if isinstance(value, tuple):
		return ",".join(str(item) for item in value)
	return value


def sweepFrame(rows: Sequence[SweepRow]) -> pd.DataFrame:
	"""Sweep rows as a DataFrame with one column per scenario parameter."""
	records = []
	for row in rows:
		record = {"cell": row.cell}
		record.update({column: _specValue(getattr(row.spec, field)) for column, field in SPEC_COLUMNS})
		record.update({column: getattr(row, field) for column, field in ROW_COLUMNS})
		records.append(record)
	return pd.DataFrame.from_records(records)


def writeSweepTsv(rows: Sequence[SweepRow], fileName: str):
	"""Write a sweep table as TSV, one row per (cell, estimator).

	Raises:
		UnwritablePath: the file cannot be written
	"""
	try:
		os.makedirs(Path(fileName).parent, exist_ok=True)
		sweepFrame(rows).to_csv(fileName, sep="\t", index=False, na_rep="NA", float_format="%.6f", lineterminator="\n")
	except OSError as error:
		raise UnwritablePath(f"{fileName}: {error}") from error


CONFIG_KEYS = {
	"n_sch": ("nSch", int),
	"pupils_per_school": ("pupilsPerSchool", None),
	"alloc": ("alloc", float),
	"design": ("design", str),
	"delta_pre": ("deltaPre", float),
	"rho": ("rho", float),
	"icc_target": ("iccTarget", float),
	"effect": ("effect", float),
	"seed": ("seed", int),
	"cut_low": ("cutLow", float),
	"cut_high": ("cutHigh", float),
}


def _pupils(text: str):
	sizes = tuple(int(part) for part in text.split(","))
	return sizes[0] if len(sizes) == 1 else sizes


def loadScenarioConfig(path: str, seed: int | None = None) -> tuple[list[ScenarioSpec], int]:
	"""Read a flat key=value scenario file.

	A value may list alternatives separated by "|"; the grid is the
	Cartesian product of all alternatives, in the order the keys appear.
	The key "replicates" sets the replicate count (default 1).

	Args:
		path (str): config file
		seed (int, optional): overrides the seed key

	Raises:
		ConfigError: unreadable file, unknown key or bad value, with line number
		InvalidSpec: a scenario of the grid is invalid

	Returns:
		tuple[list[ScenarioSpec], int]: (grid, replicates)
	"""
	try:
		lines = Path(path).read_text(encoding="utf-8").splitlines()
	except (OSError, UnicodeDecodeError) as error:
		raise ConfigError(f"{path}: {error}") from error
	alternatives = {}
	replicates = 1
	for number, line in enumerate(lines, start=1):
		line = line.split("#", 1)[0].strip()
		if not line:
			continue
		key, sep, value = line.partition("=")
		key, value = key.strip(), value.strip()
		if not sep or not value:
			raise ConfigError(f"{path}:{number}: expected key=value, got '{line}'")
		if key != "replicates" and key not in CONFIG_KEYS:
			raise ConfigError(f"{path}:{number}: unknown key '{key}'")
		try:
			if key == "replicates":
				replicates = int(value)
				continue
			field, convert = CONFIG_KEYS[key]
			alternatives[field] = [(convert or _pupils)(part.strip()) for part in value.split("|")]
		except ValueError as error:
			raise ConfigError(f"{path}:{number}: bad value for '{key}': {value}") from error
	if seed is not None:
		alternatives["seed"] = [seed]
	fields = list(alternatives)
	grid = [
		ScenarioSpec(**dict(zip(fields, combination)))
		for combination in itertools.product(*(alternatives[field] for field in fields))
	]
	return grid, replicates

