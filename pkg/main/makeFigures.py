"""Redraw the two forest plots from the bundled reference table.

Writes figure_negative and figure_nonnegative (SVG, and PNG with --png) to
main/output and logs the verdict counts of both estimate pairs.
"""
import argparse
import os
import sys
from pathlib import Path

from metprint import FHFormatter, Logger, LogType

THISDIR = str(Path(__file__).resolve().parent)
sys.path.insert(0, os.path.dirname(THISDIR))
from lordparadox import paradox, plot, reference

if __name__ == "__main__":  # pragma: no cover
	parser = argparse.ArgumentParser(description="Redraw the forest plots from the reference table")
	parser.add_argument("-o", "--output", default=THISDIR + "/output", help="output directory")
	parser.add_argument("--png", action="store_true", help="also write PNG renderings")
	args = parser.parse_args()

	logger = Logger(FHFormatter())
	records = [reference.toComparisonRecord(row) for row in reference.loadReference()]
	result = paradox.batchClassify(records)
	logger.logPrint("Simple models (gP, gG)", LogType.BOLD)
	for category, count in result.simpleCounts.items():
		logger.logPrint(f"{category}: {count}", LogType.INFO)
	logger.logPrint("Multilevel models (ttP, ttG)", LogType.BOLD)
	for category, count in result.mlmCounts.items():
		logger.logPrint(f"{category}: {count}", LogType.INFO)
	logger.logPrint(
		f"median divergence {result.medianDivergence():.3f} (simple) "
		f"vs {result.medianDivergence(mlm=True):.3f} (multilevel)",
		LogType.INFO,
	)
	for fileName in plot.writeFigures(records, args.output, png=args.png):
		logger.logPrint(f"wrote {fileName}", LogType.SUCCESS)
