"""Analysis reports: the four estimates of one dataset with both verdicts.

A report serialises to JSON (sorted keys, undefined values as null) and to
a TSV with one row per estimate. reportFromJson inverts reportToJson.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from lordparadox.analysis import ESTIMATE_NAMES, EstimateSet, Failure, comparisonRecord, estimateSet
from lordparadox.dataset import DatasetSummary, TrialDataset, summarize
from lordparadox.estimators import EffectEstimate, EffectKind
from lordparadox.exceptions import UnwritablePath
from lordparadox.paradox import (Category, ImbalanceFlag, ParadoxThresholds, ParadoxVerdict,
                                 batchClassify)

SCHEMA_VERSION = 1
PAIRS = {"gP": "simple", "gG": "simple", "ttP": "mlm", "ttG": "mlm"}


@dataclass(frozen=True)
class AnalysisReport:
	"""Everything cmd analyze learns about one dataset."""

	label: str
	summary: DatasetSummary
	estimates: EstimateSet
	simple: ParadoxVerdict
	mlm: ParadoxVerdict
	droppedCount: int = 0
	standardized: bool = False
	schemaVersion: int = SCHEMA_VERSION

	@property
	def warnings(self) -> tuple[str, ...]:
		return self.estimates.warnings

	@property
	def failures(self) -> tuple[Failure, ...]:
		return self.estimates.failures

	@property
	def partial(self) -> bool:
		return self.estimates.partial

	@property
	def exitCode(self) -> int:
		"""The largest exit code among the failures, 0 when there are none."""
		return max((failure.exitCode for failure in self.failures), default=0)


def analyzeDataset(data: TrialDataset, thresholds: ParadoxThresholds = ParadoxThresholds()) -> AnalysisReport:
	"""Summarise a dataset, estimate the four effects and classify both pairs.

	Model failures do not raise: the report is partial and lists them.

	Args:
		data (TrialDataset): dataset, already standardised if required
		thresholds (ParadoxThresholds, optional): Defaults to ParadoxThresholds().

	Returns:
		AnalysisReport: the report
	"""
	summary = summarize(data)
	estimates = estimateSet(data)
	(_, simple, mlm), = batchClassify([comparisonRecord(data.label, estimates, summary)], thresholds).rows
	return AnalysisReport(
		label=data.label,
		summary=summary,
		estimates=estimates,
		simple=simple,
		mlm=mlm,
		droppedCount=data.droppedCount,
		standardized=data.standardized,
	)


def _estimateDict(estimate: EffectEstimate | None) -> dict | None:
	if estimate is None:
		return None
	return {
		"g": estimate.g,
		"se": estimate.se,
		"lb": estimate.lb,
		"ub": estimate.ub,
		"kind": estimate.kind.value,
		"diff": estimate.diff,
	}


def _verdictDict(verdict: ParadoxVerdict) -> dict:
	return {
		"category": None if verdict.category is None else verdict.category.value,
		"divergence": verdict.divergence,
		"imbalance_flag": None if verdict.imbalanceFlag is None else verdict.imbalanceFlag.value,
		"near_zero": verdict.nearZero,
		"partial": verdict.partial,
	}


def reportToDict(report: AnalysisReport) -> dict:
	"""Plain-data form of a report, as written to JSON."""
	summary = report.summary
	estimates = report.estimates
	return {
		"schema_version": report.schemaVersion,
		"label": report.label,
		"summary": {
			"n": summary.n,
			"n_t": summary.nT,
			"n_c": summary.nC,
			"n_sch": summary.nSch,
			"pt_corr": summary.ptCorr,
			"pp_corr": summary.ppCorr,
			"pret_imb": summary.pretImb,
		},
		"estimates": {name: _estimateDict(getattr(estimates, name)) for name in ESTIMATE_NAMES},
		"icc": {"post": estimates.iccPost, "gain": estimates.iccGain},
		"verdicts": {"simple": _verdictDict(report.simple), "mlm": _verdictDict(report.mlm)},
		"warnings": list(estimates.warnings),
		"failures": [
			{
				"estimate": failure.estimate,
				"error": failure.error,
				"message": failure.message,
				"exit_code": failure.exitCode,
			}
			for failure in estimates.failures
		],
		"partial": report.partial,
		"dropped_rows": report.droppedCount,
		"standardized": report.standardized,
	}


def reportToJson(report: AnalysisReport) -> str:
	"""Serialise a report; the output is byte-stable for equal reports."""
	return json.dumps(reportToDict(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _estimateFrom(data: dict | None) -> EffectEstimate | None:
	if data is None:
		return None
	return EffectEstimate(
		g=data["g"],
		se=data["se"],
		lb=data["lb"],
		ub=data["ub"],
		kind=EffectKind(data["kind"]),
		diff=data["diff"],
	)


def _verdictFrom(data: dict) -> ParadoxVerdict:
	return ParadoxVerdict(
		category=None if data["category"] is None else Category(data["category"]),
		divergence=data["divergence"],
		imbalanceFlag=None if data["imbalance_flag"] is None else ImbalanceFlag(data["imbalance_flag"]),
		nearZero=data["near_zero"],
		partial=data["partial"],
	)


def reportFromJson(text: str) -> AnalysisReport:
	"""Parse the output of reportToJson back into an AnalysisReport."""
	data = json.loads(text)
	summary = data["summary"]
	estimates = data["estimates"]
	return AnalysisReport(
		label=data["label"],
		summary=DatasetSummary(
			n=summary["n"],
			nT=summary["n_t"],
			nC=summary["n_c"],
			nSch=summary["n_sch"],
			ptCorr=summary["pt_corr"],
			ppCorr=summary["pp_corr"],
			pretImb=summary["pret_imb"],
		),
		estimates=EstimateSet(
			iccPost=data["icc"]["post"],
			iccGain=data["icc"]["gain"],
			failures=tuple(
				Failure(item["estimate"], item["error"], item["message"], item["exit_code"])
				for item in data["failures"]
			),
			warnings=tuple(data["warnings"]),
			**{name: _estimateFrom(estimates[name]) for name in ESTIMATE_NAMES},
		),
		simple=_verdictFrom(data["verdicts"]["simple"]),
		mlm=_verdictFrom(data["verdicts"]["mlm"]),
		droppedCount=data["dropped_rows"],
		standardized=data["standardized"],
		schemaVersion=data["schema_version"],
	)


def reportFrame(report: AnalysisReport) -> pd.DataFrame:
	"""One row per estimate with the verdict of the pair it belongs to."""
	failures = {failure.estimate: failure.error for failure in report.failures}
	verdicts = {"simple": report.simple, "mlm": report.mlm}
	records = []
	for name in ESTIMATE_NAMES:
		estimate = getattr(report.estimates, name)
		verdict = verdicts[PAIRS[name]]
		records.append(
			{
				"label": report.label,
				"estimate": name,
				"kind": None if estimate is None else estimate.kind.value,
				"g": None if estimate is None else estimate.g,
				"se": None if estimate is None else estimate.se,
				"lb": None if estimate is None else estimate.lb,
				"ub": None if estimate is None else estimate.ub,
				"diff": None if estimate is None else estimate.diff,
				"pair": PAIRS[name],
				"category": None if verdict.category is None else verdict.category.value,
				"divergence": verdict.divergence,
				"imbalance_flag": None if verdict.imbalanceFlag is None else verdict.imbalanceFlag.value,
				"failure": failures.get(name),
			}
		)
	return pd.DataFrame.from_records(records)


def reportToTsv(report: AnalysisReport) -> str:
	return reportFrame(report).to_csv(sep="\t", index=False, na_rep="NA", float_format="%.6f", lineterminator="\n")


def writeReport(report: AnalysisReport, outputDir: str, formats: tuple[str, ...] = ("json", "tsv")) -> list[str]:
	"""Write <label>.json and / or <label>.tsv to a directory.

	Raises:
		UnwritablePath: a file cannot be written

	Returns:
		list[str]: paths written
	"""
	writers = {"json": reportToJson, "tsv": reportToTsv}
	written = []
	try:
		os.makedirs(outputDir, exist_ok=True)
		for extension in formats:
			fileName = str(Path(outputDir) / f"{report.label or 'report'}.{extension}")
			Path(fileName).write_text(writers[extension](report), encoding="utf-8", newline="\n")
			written.append(fileName)
	except OSError as error:
		raise UnwritablePath(f"{outputDir}: {error}") from error
	return written
