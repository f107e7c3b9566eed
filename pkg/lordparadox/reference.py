"""Bundled reference tables of 50 outcomes from 34 projects.

Three TSV files ship in lordparadox/resources:
- table1_outcomes.tsv: label, title, design and security rating (lock)
- table2_estimates.tsv: gP, gG, ttP and ttG with 95% bounds, and pret.imb
- table3_summary.tsv: n, n.t, n.c, n.sch, icc, pt.corr, pp.corr, pret.imb

Values are transcribed as published: bounds are rounded, so intervals are
not exactly symmetric. Rows are joined on label and kept in the order of
the estimates table (ascending pret.imb).
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import pandas as pd

from lordparadox.estimators import Z_975, EffectEstimate, EffectKind
from lordparadox.exceptions import ReferenceDataError, UnknownLabel, UnwritablePath
from lordparadox.paradox import ComparisonRecord

THISDIR = str(Path(__file__).resolve().parent)
RESOURCES = THISDIR + "/resources"
TABLE_FILES = ("table1_outcomes.tsv", "table2_estimates.tsv", "table3_summary.tsv")
EXPECTED_ROWS = 50
IMBALANCE_TOLERANCE = 0.01
DESIGNS = ("srt", "mst", "crt", "action", "quasi", "rdd")
ESTIMATE_KINDS = {
	"gP": EffectKind.PostDIM,
	"gG": EffectKind.GainDIM,
	"ttP": EffectKind.MlmPostAncova,
	"ttG": EffectKind.MlmGainAnova,
}


@dataclass(frozen=True)
class ReferenceRow:
	"""One outcome joined across the three tables."""

	outcome: int
	label: str
	title: str
	design: str
	lock: int | None
	gP: tuple[float, float, float]
	gG: tuple[float, float, float]
	ttP: tuple[float, float, float]
	ttG: tuple[float, float, float]
	pretImb: float
	n: int
	nT: int
	nC: int
	nSch: int
	icc: float
	ptCorr: float
	ppCorr: float
	summaryPretImb: float


def _read(name: str, directory: str) -> pd.DataFrame:
	path = f"{directory}/{name}"
	try:
		return pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False, encoding="utf-8")
	except (OSError, UnicodeDecodeError, pd.errors.ParserError) as error:
		raise ReferenceDataError(f"{path}: {error}") from error


def _triple(row, name: str) -> tuple[float, float, float]:
	return (float(row[name]), float(row[f"{name}.lb"]), float(row[f"{name}.ub"]))


def loadReference(directory: str = RESOURCES) -> list[ReferenceRow]:
	"""Load and join the reference tables, then validate them.

	Args:
		directory (str, optional): directory holding the three TSV files.
		Defaults to the bundled resources.

	Raises:
		ReferenceDataError: a table is missing, malformed or fails validation

	Returns:
		list[ReferenceRow]: joined rows in estimates-table order
	"""
	outcomes, estimates, summaries = (_read(name, directory) for name in TABLE_FILES)
	for frame, name in zip((outcomes, estimates, summaries), TABLE_FILES):
		if frame["label"].duplicated().any():
			duplicates = sorted(set(frame["label"][frame["label"].duplicated()]))
			raise ReferenceDataError(f"{name}: duplicate labels {duplicates}")
	outcomes = outcomes.set_index("label")
	summaries = summaries.set_index("label")
	rows = []
	for line, row in enumerate(estimates.to_dict("records"), start=2):
		label = row["label"]
		if label not in outcomes.index or label not in summaries.index:
			raise ReferenceDataError(f"{TABLE_FILES[1]}:{line}: '{label}' does not join the other tables")
		outcome = outcomes.loc[label]
		summary = summaries.loc[label]
		try:
			rows.append(
				ReferenceRow(
					outcome=int(outcome["outcome"]),
					label=label,
					title=outcome["title"],
					design=outcome["design"],
					lock=int(outcome["lock"]) if outcome["lock"] else None,
					gP=_triple(row, "gP"),
					gG=_triple(row, "gG"),
					ttP=_triple(row, "ttP"),
					ttG=_triple(row, "ttG"),
					pretImb=float(row["pret.imb"]),
					n=int(summary["n"]),
					nT=int(summary["n.t"]),
					nC=int(summary["n.c"]),
					nSch=int(summary["n.sch"]),
					icc=float(summary["icc"]),
					ptCorr=float(summary["pt.corr"]),
					ppCorr=float(summary["pp.corr"]),
					summaryPretImb=float(summary["pret.imb"]),
				)
			)
		except (KeyError, ValueError) as error:
			raise ReferenceDataError(f"{TABLE_FILES[1]}:{line}: {error}") from error
	validateReference(rows, len(outcomes), len(summaries))
	return rows


def validateReference(rows: Sequence[ReferenceRow], outcomeCount: int | None = None, summaryCount: int | None = None):
	"""Check row count, designs, locks and cross-table pret.imb agreement.

	Raises:
		ReferenceDataError: the first violation found
	"""
	counts = [len(rows)] + [count for count in (outcomeCount, summaryCount) if count is not None]
	if any(count != EXPECTED_ROWS for count in counts):
		raise ReferenceDataError(f"expected {EXPECTED_ROWS} rows in every table, got {counts}")
	for row in rows:
		if row.design not in DESIGNS:
			raise ReferenceDataError(f"{row.label}: unknown design '{row.design}'")
		if row.lock is not None and not 0 <= row.lock <= 5:
			raise ReferenceDataError(f"{row.label}: lock {row.lock} outside 0-5")
		if abs(row.pretImb - row.summaryPretImb) > IMBALANCE_TOLERANCE + 1e-9:
			raise ReferenceDataError(
				f"{row.label}: pret.imb {row.pretImb} disagrees with summary value {row.summaryPretImb}"
			)


def filterReference(
	rows: Sequence[ReferenceRow],
	label: str | None = None,
	imbAbove: float | None = None,
	design: str | None = None,
	lock: int | None = None,
) -> list[ReferenceRow]:
	"""Select reference rows; filters combine with AND.

	Args:
		rows (Sequence[ReferenceRow]): rows from loadReference
		label (str, optional): exact label
		imbAbove (float, optional): keep |pret.imb| > imbAbove
		design (str, optional): design code
		lock (int, optional): minimum security rating

	Raises:
		UnknownLabel: label is not in the table

	Returns:
		list[ReferenceRow]: matching rows in table order
	"""
	if label is not None and label not in {row.label for row in rows}:
		raise UnknownLabel(f"no outcome labelled '{label}'")
	selected = []
	for row in rows:
		if label is not None and row.label != label:
			continue
		if imbAbove is not None and not abs(row.pretImb) > imbAbove:
			continue
		if design is not None and row.design != design:
			continue
		if lock is not None and (row.lock is None or row.lock < lock):
			continue
		selected.append(row)
	return selected


def _estimate(values: tuple[float, float, float], kind: EffectKind) -> EffectEstimate:
	g, lb, ub = values
	return EffectEstimate(g=g, se=(ub - lb) / (2 * Z_975), lb=lb, ub=ub, kind=kind)


def toComparisonRecord(row: ReferenceRow) -> ComparisonRecord:
	"""Convert a reference row, recovering se from the interval width."""
	return ComparisonRecord(
		label=row.label,
		pretImb=row.pretImb,
		icc=row.icc,
		nSch=row.nSch,
		**{name: _estimate(getattr(row, name), kind) for name, kind in ESTIMATE_KINDS.items()},
	)


def referenceFrame(rows: Sequence[ReferenceRow]) -> pd.DataFrame:
	"""Joined rows as a DataFrame with the published column names."""
	records = []
	for row in rows:
		record = {
			"outcome": row.outcome,
			"label": row.label,
			"title": row.title,
			"design": row.design,
			"lock": row.lock,
		}
		for name in ESTIMATE_KINDS:
			record[name], record[f"{name}.lb"], record[f"{name}.ub"] = getattr(row, name)
		record.update(
			{
				"pret.imb": row.pretImb,
				"n": row.n,
				"n.t": row.nT,
				"n.c": row.nC,
				"n.sch": row.nSch,
				"icc": row.icc,
				"pt.corr": row.ptCorr,
				"pp.corr": row.ppCorr,
			}
		)
		records.append(record)
	columns = ["outcome", "label", "title", "design", "lock"]
	for name in ESTIMATE_KINDS:
		columns += [name, f"{name}.lb", f"{name}.ub"]
	columns += ["pret.imb", "n", "n.t", "n.c", "n.sch", "icc", "pt.corr", "pp.corr"]
	return pd.DataFrame.from_records(records, columns=columns).astype({"lock": "Int64"})


def exportTsv(rows: Sequence[ReferenceRow], fileName: str):
	"""Write joined rows as TSV; an empty lock is written as an empty cell.

	Raises:
		UnwritablePath: the file cannot be written
	"""
	try:
		os.makedirs(Path(fileName).parent, exist_ok=True)
		referenceFrame(rows).to_csv(fileName, sep="\t", index=False, float_format="%.2f", lineterminator="\n")
	except OSError as error:
		raise UnwritablePath(f"{fileName}: {error}") from error
