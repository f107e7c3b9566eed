"""Test the bundled reference tables: loading, validation, filters and export."""

import hashlib
import os
import shutil
import sys
from pathlib import Path

import pandas as pd
import pytest

THISDIR = str(Path(__file__).resolve().parent)
sys.path.insert(0, os.path.dirname(THISDIR))
from lordparadox import reference
from lordparadox.estimators import EffectKind
from lordparadox.exceptions import ReferenceDataError, UnknownLabel

OUTPUT = THISDIR + "/test_reference/o"

CHECKSUMS = {
	"table1_outcomes.tsv": "03b14f9fa112da8ea696b449aa19acc22dd14ed0e9eef7d4ca110748621656f2",
	"table2_estimates.tsv": "d0ed6af9a86ffc1b1923ec7c794667c0cdc9550a6bb517efd250414c3437227b",
	"table3_summary.tsv": "072c58f18fdeab687777a7b8bf57bfb877184b10d86424989b44365955902170",
}


@pytest.fixture(scope="module")
def rows():
	return reference.loadReference()


def copyResources(name: str) -> str:
	"""Copy the bundled tables to a scratch directory."""
	directory = OUTPUT + "/" + name
	shutil.rmtree(directory, ignore_errors=True)
	shutil.copytree(reference.RESOURCES, directory)
	return directory


def test_resources_checksums():
	for name, digest in CHECKSUMS.items():
		data = Path(reference.RESOURCES, name).read_bytes()
		assert hashlib.sha256(data).hexdigest() == digest


def test_loadReference_rows(rows):
	assert len(rows) == 50
	assert len({row.label for row in rows}) == 50
	assert [row.label for row in rows[:3]] == ["shine", "ttsm", "fs"]


def test_loadReference_shine(rows):
	(shine,) = reference.filterReference(rows, label="shine")
	assert shine.design == "rdd"
	assert shine.pretImb == -2.64
	assert shine.icc == 0.03
	assert shine.n == 549
	assert shine.n == shine.nT + shine.nC
	assert shine.gP == (-1.66, -1.85, -1.46)


def test_loadReference_ttsm(rows):
	(ttsm,) = reference.filterReference(rows, label="ttsm")
	assert (ttsm.n, ttsm.nSch, ttsm.icc) == (101772, 361, 0.20)
	assert ttsm.ttG == (0.15, -0.14, 0.43)


def test_filterReference_imbalance(rows):
	assert {row.label for row in reference.filterReference(rows, imbAbove=0.3)} == {"fs", "cmtm", "ttsm", "shine"}
	assert len(reference.filterReference(rows, imbAbove=0.2)) == 8
	selected = reference.filterReference(rows, imbAbove=0.1)
	assert len(selected) == 20
	assert sum(row.pretImb < 0 for row in selected) == 10


def test_filterReference_design(rows):
	selected = reference.filterReference(rows, design="rdd")
	assert "shine" in {row.label for row in selected}
	assert all(row.design == "rdd" for row in selected)


def test_filterReference_lock(rows):
	selected = reference.filterReference(rows, lock=4)
	assert selected
	assert all(row.lock is not None and row.lock >= 4 for row in selected)
	assert len(reference.filterReference(rows, lock=0)) == sum(row.lock is not None for row in rows)


def test_filterReference_combined(rows):
	selected = reference.filterReference(rows, imbAbove=0.3, design="rdd")
	assert [row.label for row in selected] == ["shine"]


def test_filterReference_unknown(rows):
	with pytest.raises(UnknownLabel):
		reference.filterReference(rows, label="nope")


def test_loadReference_consistent(rows):
	for row in rows:
		assert abs(row.pretImb - row.summaryPretImb) <= reference.IMBALANCE_TOLERANCE + 1e-9
		assert row.design in reference.DESIGNS


def test_toComparisonRecord(rows):
	record = reference.toComparisonRecord(rows[1])
	assert record.label == "ttsm"
	assert record.gP.g == -0.23
	assert record.gP.se == pytest.approx(0.14 / 3.92)
	assert record.ttP.kind is EffectKind.MlmPostAncova
	assert record.ttG.kind is EffectKind.MlmGainAnova
	assert record.pretImb == -0.41
	assert not record.partial


def test_validate_disagreeingImbalance():
	directory = copyResources("imbalance")
	path = Path(directory, "table3_summary.tsv")
	path.write_text(path.read_text(encoding="utf-8").replace("\t0.81\t-2.64\n", "\t0.81\t-2.50\n"), encoding="utf-8")
	with pytest.raises(ReferenceDataError, match="shine"):
		reference.loadReference(directory)


def test_validate_missingRow():
	directory = copyResources("missing")
	path = Path(directory, "table2_estimates.tsv")
	lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
	path.write_text("".join(lines[:-1]), encoding="utf-8")
	with pytest.raises(ReferenceDataError, match="expected 50 rows"):
		reference.loadReference(directory)


def test_validate_duplicateLabel():
	directory = copyResources("duplicate")
	path = Path(directory, "table3_summary.tsv")
	lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
	path.write_text("".join(lines + lines[1:2]), encoding="utf-8")
	with pytest.raises(ReferenceDataError, match="duplicate"):
		reference.loadReference(directory)


def test_loadReference_missingDirectory():
	with pytest.raises(ReferenceDataError):
		reference.loadReference(OUTPUT + "/nowhere")


def test_referenceFrame(rows):
	frame = reference.referenceFrame(rows)
	assert frame.shape == (50, 25)
	assert list(frame.columns[:5]) == ["outcome", "label", "title", "design", "lock"]
	assert str(frame["lock"].dtype) == "Int64"


def test_exportTsv(rows):
	fileName = OUTPUT + "/export/imbalanced.tsv"
	selected = reference.filterReference(rows, imbAbove=0.3)
	reference.exportTsv(selected, fileName)
	table = pd.read_csv(fileName, sep="\t")
	assert list(table["label"]) == ["shine", "ttsm", "fs", "cmtm"]
	assert list(table["pret.imb"]) == [-2.64, -0.41, -0.36, -0.36]
	text = Path(fileName).read_text(encoding="utf-8")
	assert "\r" not in text
	assert "-1.66\t-1.85\t-1.46" in text
