"""Ingest, validate and standardise per-pupil trial data.

A TrialDataset holds the complete cases of one outcome: pretest, posttest,
treatment indicator and school for every pupil. Columns are stored as
read-only numpy arrays so a dataset can be shared freely once built.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from metprint import FHFormatter, Logger, LogType

from lordparadox.estimators import pretestImbalance
from lordparadox.exceptions import (EmptyAfterFiltering, FileUnreadable, LordParadoxError,
                                    SchemaMismatch, SingleArm, UnwritablePath, ZeroVariance)

MISSING_TOKENS = ("", "NA", "na")


@dataclass(frozen=True)
class PupilRecord:
	"""One pupil of a two-arm pre/post trial."""

	pupilId: str
	schoolId: str
	group: int
	pretest: float
	posttest: float


@dataclass(frozen=True)
class ColumnSchema:
	"""Map the columns of an input file onto the fields of a PupilRecord.

	The pupil column is optional: when it is absent from the header, pupils
	are identified by their line number in the file.
	"""

	school: str = "school"
	group: str = "group"
	pretest: str = "pretest"
	posttest: str = "posttest"
	pupil: str = "pupil_id"


@dataclass(frozen=True, eq=False)
class TrialDataset:
	"""Complete-case records for one outcome, in file order."""

	pupilIds: tuple[str, ...]
	schoolIds: np.ndarray
	group: np.ndarray
	pretest: np.ndarray
	posttest: np.ndarray
	label: str = ""
	standardized: bool = False
	droppedCount: int = 0
	droppedLines: tuple[int, ...] = ()

	def __post_init__(self):
		for name, dtype in (
			("schoolIds", object),
			("group", np.int8),
			("pretest", np.float64),
			("posttest", np.float64),
		):
			column = np.array(getattr(self, name), dtype=dtype)
			column.setflags(write=False)
			object.__setattr__(self, name, column)

	@property
	def n(self) -> int:
		return len(self.group)

	@property
	def nT(self) -> int:
		return int(np.count_nonzero(self.group == 1))

	@property
	def nC(self) -> int:
		return int(np.count_nonzero(self.group == 0))

	@property
	def nSchools(self) -> int:
		return len(set(self.schoolIds))

	@property
	def gain(self) -> np.ndarray:
		return self.posttest - self.pretest

	@property
	def treated(self) -> np.ndarray:
		return self.group == 1

	def schoolCodes(self) -> tuple[np.ndarray, np.ndarray]:
		"""Get the sorted distinct school ids and each pupil's index into them.

		Returns:
			tuple[np.ndarray, np.ndarray]: (schools, codes)
		"""
		schools, codes = np.unique(self.schoolIds.astype(str), return_inverse=True)
		return schools, codes

	@property
	def records(self) -> list[PupilRecord]:
		return [
			PupilRecord(pupilId, str(school), int(group), float(pre), float(post))
			for pupilId, school, group, pre, post in zip(
				self.pupilIds, self.schoolIds, self.group, self.pretest, self.posttest
			)
		]


@dataclass(frozen=True)
class DatasetSummary:
	"""Descriptive statistics in the shape of the reference summary table.

	Correlations and the imbalance metric are None when undefined (a score
	without spread), never zero.
	"""

	n: int
	nT: int
	nC: int
	nSch: int
	ptCorr: float | None
	ppCorr: float | None
	pretImb: float | None


def fromArrays(
	pretest: Iterable[float],
	posttest: Iterable[float],
	group: Iterable[int],
	school: Iterable[str],
	pupilIds: Sequence[str] | None = None,
	label: str = "",
) -> TrialDataset:
	"""Build a TrialDataset from parallel columns.

	Args:
		pretest (Iterable[float]): pretest scores
		posttest (Iterable[float]): posttest scores
		group (Iterable[int]): 1 = intervention, 0 = control
		school (Iterable[str]): school identifier per pupil
		pupilIds (Sequence[str], optional): pupil identifiers. Defaults to
		the position of each pupil.
		label (str, optional): outcome abbreviation. Defaults to "".

	Raises:
		ValueError: columns differ in length
		LordParadoxError: a group value outside {0, 1} or a non-finite score
		EmptyAfterFiltering: no records
		SingleArm: one arm is empty

	Returns:
		TrialDataset: the dataset
	"""
	pretest = np.asarray(pretest, dtype=np.float64)
	posttest = np.asarray(posttest, dtype=np.float64)
	group = np.asarray(group)
	school = np.asarray([str(item) for item in school], dtype=object)
	if not len(pretest) == len(posttest) == len(group) == len(school):
		raise ValueError("pretest, posttest, group and school must have equal length")
	if pupilIds is None:
		pupilIds = [str(index) for index in range(len(group))]
	if len(pupilIds) != len(group):
		raise ValueError("pupilIds must match the other columns in length")
	if not np.all(np.isin(group, (0, 1))):
		raise LordParadoxError("group must be 0 (control) or 1 (intervention)")
	if not (np.all(np.isfinite(pretest)) and np.all(np.isfinite(posttest))):
		raise LordParadoxError("scores must be finite")
	checkArms(group, label)
	return TrialDataset(
		pupilIds=tuple(str(pupil) for pupil in pupilIds),
		schoolIds=school,
		group=group.astype(np.int8),
		pretest=pretest,
		posttest=posttest,
		label=label,
	)


def checkArms(group: np.ndarray, label: str):
	"""Raise if there are no records or if an arm is empty."""
	if len(group) == 0:
		raise EmptyAfterFiltering(f"{label or 'dataset'}: no complete cases")
	if np.all(group == 1) or np.all(group == 0):
		arm = "control" if np.all(group == 1) else "intervention"
		raise SingleArm(f"{label or 'dataset'}: the {arm} arm is empty")


def checkExists(file: str):
	"""Throw FileUnreadable if the path does not exist."""
	if not os.path.exists(file):
		raise FileUnreadable(file + " does not exist")


def _parseScore(column: pd.Series) -> np.ndarray:
	stripped = column.str.strip()
	stripped = stripped.where(~stripped.isin(MISSING_TOKENS))
	values = pd.to_numeric(stripped, errors="coerce").to_numpy(dtype=np.float64)
	values[~np.isfinite(values)] = np.nan
	return values


def loadCsv(path: str, schema: ColumnSchema = ColumnSchema(), label: str | None = None) -> TrialDataset:
	"""Load a per-pupil CSV file and keep the complete cases.

	A row is dropped (and counted) when any of school, group, pretest or
	posttest is missing, unparseable or non-finite, or when group is not 0
	or 1. Blank lines, and rows with every field empty, are skipped without
	counting but still advance the line numbers. Surviving rows keep their
	file order.

	Args:
		path (str): path to a UTF-8 CSV with a header row
		schema (ColumnSchema, optional): column mapping. Defaults to ColumnSchema().
		label (str, optional): outcome label. Defaults to the file stem.

	Raises:
		FileUnreadable: the file is missing or cannot be decoded
		SchemaMismatch: a mapped column is absent from the header
		EmptyAfterFiltering: no complete cases
		SingleArm: one arm is empty

	Returns:
		TrialDataset: complete-case dataset with droppedCount set
	"""
	checkExists(path)
	label = Path(path).stem if label is None else label
	try:
		frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8")
	except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
		raise FileUnreadable(f"{path}: {error}") from error
	for column in (schema.school, schema.group, schema.pretest, schema.posttest):
		if column not in frame.columns:
			raise SchemaMismatch(f"{path}:1: column '{column}' not in header")

	frame = frame.fillna("")
	blank = frame.apply(lambda column: column.str.strip() == "").to_numpy(dtype=bool).all(axis=1)
	school = frame[schema.school].str.strip()
	pretest = _parseScore(frame[schema.pretest])
	posttest = _parseScore(frame[schema.posttest])
	group = _parseScore(frame[schema.group])
	keep = (
		~school.isin(MISSING_TOKENS).to_numpy()
		& np.isfinite(pretest)
		& np.isfinite(posttest)
		& np.isin(group, (0.0, 1.0))
		& ~blank
	)
	# header is line 1, blank lines are kept as rows so numbering follows the file
	lines = np.arange(len(frame)) + 2
	if schema.pupil in frame.columns:
		pupilIds = frame[schema.pupil].str.strip().to_numpy()[keep]
	else:
		pupilIds = lines[keep].astype(str)
	droppedLines = tuple(int(line) for line in lines[~keep & ~blank])
	if droppedLines:
		Logger(FHFormatter()).logPrint(
			f"{path}: dropped {len(droppedLines)} incomplete rows (lines {_lineSpan(droppedLines)})",
			LogType.WARNING,
		)
	group = group[keep].astype(np.int8)
	checkArms(group, f"{path} ({label})")
	return TrialDataset(
		pupilIds=tuple(str(pupil) for pupil in pupilIds),
		schoolIds=school.to_numpy()[keep],
		group=group,
		pretest=pretest[keep],
		posttest=posttest[keep],
		label=label,
		droppedCount=len(droppedLines),
		droppedLines=droppedLines,
	)


def _lineSpan(lines: tuple[int, ...], limit: int = 10) -> str:
	shown = ", ".join(str(line) for line in lines[:limit])
	return shown + (", ..." if len(lines) > limit else "")


def writeCsv(data: TrialDataset, fileName: str):
	"""Write a dataset as CSV with the default column names.

	Args:
		data (TrialDataset): dataset to write
		fileName (str): full file path

	Raises:
		UnwritablePath: the file cannot be written
	"""
	frame = pd.DataFrame(
		{
			"pupil_id": list(data.pupilIds),
			"school": data.schoolIds.astype(str),
			"group": data.group.astype(int),
			"pretest": data.pretest,
			"posttest": data.posttest,
		}
	)
	try:
		os.makedirs(Path(fileName).parent, exist_ok=True)
		frame.to_csv(fileName, index=False, lineterminator="\n")
	except OSError as error:
		raise UnwritablePath(f"{fileName}: {error}") from error


def standardizeZ(data: TrialDataset) -> TrialDataset:
	"""Z-score pretest and posttest over the pooled sample (both arms).

	Args:
		data (TrialDataset): dataset with at least two records

	Raises:
		ZeroVariance: either score is constant

	Returns:
		TrialDataset: copy with mean 0, sample SD 1 scores and standardized set
	"""
	if data.n < 2:
		raise ZeroVariance(f"{data.label}: need at least two records to standardise")
	scaled = {}
	for name in ("pretest", "posttest"):
		values = getattr(data, name)
		spread = values.std(ddof=1)
		if spread == 0:
			raise ZeroVariance(f"{data.label}: {name} is constant")
		scaled[name] = (values - values.mean()) / spread
	return replace(data, standardized=True, **scaled)


def pearson(first: np.ndarray, second: np.ndarray) -> float | None:
	"""Pearson correlation, or None when either vector has no spread."""
	if np.ptp(first) == 0 or np.ptp(second) == 0:
		return None
	return float(np.clip(np.corrcoef(first, second)[0, 1], -1.0, 1.0))


def summarize(data: TrialDataset) -> DatasetSummary:
	"""Summarise a dataset: counts, pt.corr, pp.corr and pret.imb.

	Args:
		data (TrialDataset): the dataset

	Returns:
		DatasetSummary: summary; undefined statistics are None
	"""
	try:
		pretImb = pretestImbalance(data).g
	except LordParadoxError:
		pretImb = None
	return DatasetSummary(
		n=data.n,
		nT=data.nT,
		nC=data.nC,
		nSch=data.nSchools,
		ptCorr=pearson(data.pretest, data.group.astype(np.float64)),
		ppCorr=pearson(data.pretest, data.posttest),
		pretImb=pretImb,
	)
