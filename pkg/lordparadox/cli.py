"""Command line entry point: analyze, reference, plot and simulate.

Exit codes: 0 on success, 2 on data errors, 3 when a model fails to
converge.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from metprint import FHFormatter, Logger, LogType

from lordparadox.analysis import comparisonRecord
from lordparadox.dataset import ColumnSchema, loadCsv, standardizeZ, writeCsv
from lordparadox.exceptions import EmptyInput, LordParadoxError
from lordparadox.paradox import parseThresholds
from lordparadox.plot import writeFigures
from lordparadox.reference import (DESIGNS, exportTsv, filterReference, loadReference,
                                   referenceFrame, toComparisonRecord)
from lordparadox.report import analyzeDataset, reportFromJson, writeReport
from lordparadox.simulate import generate, loadScenarioConfig, sweep, writeSweepTsv

FORMATS = {"json": ("json",), "tsv": ("tsv",), "both": ("json", "tsv")}
LOGGER = Logger(FHFormatter())


def _fail(error: LordParadoxError) -> int:
	LOGGER.logPrint(f"{type(error).__name__}: {error}", LogType.ERROR)
	return error.exitCode


def cmdAnalyze(args: argparse.Namespace) -> int:
	"""Analyse each CSV and write a JSON and / or TSV report per file.

	A model failure still writes the (partial) report; the exit code is the
	largest of the failures.
	"""
	thresholds = parseThresholds(args.thresholds)
	schema = ColumnSchema(
		school=args.col_school,
		group=args.col_group,
		pretest=args.col_pre,
		posttest=args.col_post,
		pupil=args.col_pupil,
	)
	exitCode = 0
	for path in args.csv:
		try:
			data = loadCsv(path, schema)
			if args.standardize:
				data = standardizeZ(data)
				LOGGER.logPrint(f"{path}: pretest and posttest standardised", LogType.WARNING)
			report = analyzeDataset(data, thresholds)
			for fileName in writeReport(report, args.output, FORMATS[args.format]):
				LOGGER.logPrint(f"wrote {fileName}", LogType.SUCCESS)
		except LordParadoxError as error:
			exitCode = max(exitCode, _fail(error))
			continue
		for name, icc in (("post-ANCOVA", report.estimates.iccPost), ("gain-ANOVA", report.estimates.iccGain)):
			if icc == 0:
				LOGGER.logPrint(f"{report.label}: {name} school variance is on the boundary (icc 0)", LogType.WARNING)
		for failure in report.failures:
			LOGGER.logPrint(f"{path}: {failure.estimate} {failure.error}: {failure.message}", LogType.ERROR)
		if report.simple.category is not None:
			LOGGER.logPrint(f"{report.label}: simple pair {report.simple.category.value}", LogType.INFO)
		if report.mlm.category is not None:
			LOGGER.logPrint(f"{report.label}: multilevel pair {report.mlm.category.value}", LogType.INFO)
		exitCode = max(exitCode, report.exitCode)
	return exitCode


def cmdReference(args: argparse.Namespace) -> int:
	"""Print or export the bundled reference rows matching the filters."""
	rows = filterReference(
		loadReference(), label=args.label, imbAbove=args.imb_above, design=args.design, lock=args.lock
	)
	if args.output:
		exportTsv(rows, args.output)
		LOGGER.logPrint(f"wrote {len(rows)} rows to {args.output}", LogType.SUCCESS)
	else:
		print(referenceFrame(rows).to_string(index=False))
	return 0


def cmdPlot(args: argparse.Namespace) -> int:
	"""Write the two forest plots from reports or from the reference table."""
	if args.reports:
		records = []
		for fileName in args.reports:
			try:
				report = reportFromJson(Path(fileName).read_text(encoding="utf-8"))
			except (OSError, ValueError, KeyError, TypeError) as error:
				raise EmptyInput(f"{fileName}: not a readable report ({error})") from error
			records.append(comparisonRecord(report.label, report.estimates, report.summary))
	else:
		records = [toComparisonRecord(row) for row in loadReference()]
	for fileName in writeFigures(records, args.output, png=args.png):
		LOGGER.logPrint(f"wrote {fileName}", LogType.SUCCESS)
	return 0


def cmdSimulate(args: argparse.Namespace) -> int:
	"""Generate datasets or run a sweep from a scenario config.

	A single scenario with one replicate writes a dataset CSV; anything else
	runs a sweep and writes one TSV row per (cell, estimator).
	"""
	grid, replicates = loadScenarioConfig(args.config, seed=args.seed)
	if args.replicates is not None:
		replicates = args.replicates
	output = Path(args.output)
	mode = args.mode
	if mode == "auto":
		mode = "dataset" if len(grid) == 1 and replicates == 1 else "sweep"
	if mode == "dataset":
		for cell, spec in enumerate(grid):
			fileName = str(output / ("dataset.csv" if len(grid) == 1 else f"dataset_{cell}.csv"))
			writeCsv(generate(spec), fileName)
			LOGGER.logPrint(f"wrote {fileName}", LogType.SUCCESS)
		return 0
	thresholds = parseThresholds(args.thresholds)
	LOGGER.logPrint(f"sweeping {len(grid)} cells x {replicates} replicates", LogType.INFO)
	fileName = str(output / "sweep.tsv")
	writeSweepTsv(sweep(grid, replicates, workers=args.workers, thresholds=thresholds), fileName)
	LOGGER.logPrint(f"wrote {fileName}", LogType.SUCCESS)
	return 0


def buildParser() -> argparse.ArgumentParser:
	parser = argparse.ArgumentParser(
		prog="lordparadox", description="Detect and explain Lord's Paradox in pre/post trials"
	)
	commands = parser.add_subparsers(dest="command", required=True)

	analyze = commands.add_parser("analyze", help="analyse per-pupil CSV files")
	analyze.add_argument("csv", nargs="+", help="CSV files with a header row")
	analyze.add_argument("--col-school", default="school", help="school column")
	analyze.add_argument("--col-group", default="group", help="group column (1 = intervention)")
	analyze.add_argument("--col-pre", default="pretest", help="pretest column")
	analyze.add_argument("--col-post", default="posttest", help="posttest column")
	analyze.add_argument("--col-pupil", default="pupil_id", help="pupil id column (optional in the file)")
	analyze.add_argument("--standardize", action="store_true", help="z-score pretest and posttest")
	analyze.add_argument("--thresholds", default="", help="e.g. d=0.1,imb=0.2,note=0.1,nz=0.05")
	analyze.add_argument("--format", choices=sorted(FORMATS), default="both", help="report format")
	analyze.add_argument("--output", default=".", help="directory for the reports")
	analyze.set_defaults(func=cmdAnalyze)

	reference = commands.add_parser("reference", help="show the bundled reference table")
	reference.add_argument("--label", help="a single outcome label")
	reference.add_argument("--imb-above", type=float, help="keep |pret.imb| above this value")
	reference.add_argument("--design", choices=DESIGNS, help="keep one design")
	reference.add_argument("--lock", type=int, help="keep a security rating of at least this")
	reference.add_argument("--output", help="write TSV here instead of printing")
	reference.set_defaults(func=cmdReference)

	plot = commands.add_parser("plot", help="write the two forest plots")
	plot.add_argument("reports", nargs="*", help="JSON reports (default: the reference table)")
	plot.add_argument("--output", default=".", help="directory for the figures")
	plot.add_argument("--png", action="store_true", help="also write PNG renderings")
	plot.set_defaults(func=cmdPlot)

	simulate = commands.add_parser("simulate", help="simulate trials from a scenario config")
	simulate.add_argument("config", help="key=value scenario file")
	simulate.add_argument("--seed", type=int, help="override the seed of every scenario")
	simulate.add_argument("--replicates", type=int, help="override the replicate count")
	simulate.add_argument("--mode", choices=("auto", "dataset", "sweep"), default="auto")
	simulate.add_argument("--workers", type=int, default=1, help="worker threads for a sweep")
	simulate.add_argument("--thresholds", default="", help="e.g. d=0.1,imb=0.2,note=0.1,nz=0.05")
	simulate.add_argument("--output", default=".", help="output directory")
	simulate.set_defaults(func=cmdSimulate)
	return parser


def main(argv: list[str] | None = None) -> int:
	"""Run a command and return its exit code."""
	args = buildParser().parse_args(argv)
	try:
		return args.func(args)
	except LordParadoxError as error:
		return _fail(error)


def cli():  # pragma: no cover
	sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
	cli()
