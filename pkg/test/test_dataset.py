"""Test ingestion, complete-case filtering, z-scoring and summaries.

Input files are written to test/test_dataset/o before they are read back.
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

THISDIR = str(Path(__file__).resolve().parent)
sys.path.insert(0, os.path.dirname(THISDIR))
from lordparadox import dataset
from lordparadox.exceptions import (EmptyAfterFiltering, FileUnreadable, SchemaMismatch, SingleArm,
                                    UnwritablePath, ZeroVariance)

OUTPUT = THISDIR + "/test_dataset/o"

HEADER = "pupil_id,school,group,pretest,posttest\n"


def writeInput(name: str, text: str) -> str:
	os.makedirs(OUTPUT, exist_ok=True)
	path = OUTPUT + "/" + name
	Path(path).write_text(text, encoding="utf-8")
	return path


def shifted(offset: float, perArm: int = 500) -> dataset.TrialDataset:
	"""Arms with identical unit-SD pretests apart from a mean offset."""
	base = np.random.default_rng(7).standard_normal(perArm)
	base = (base - base.mean()) / base.std(ddof=1)
	pretest = np.concatenate([base + offset, base])
	group = np.repeat([1, 0], perArm)
	school = np.tile(["a", "b", "c", "d"], perArm // 2)
	return dataset.fromArrays(pretest, pretest + 1, group, school)


def test_loadCsv_missingPosttest():
	"""
	A 5 row file with one missing posttest keeps 4 records
	"""
	path = writeInput(
		"missing.csv",
		HEADER + "p1,a,1,1.0,2.0\np2,a,0,2.0,3.0\np3,b,1,3.0,\np4,b,0,4.0,5.0\np5,b,1,5.0,6.0\n",
	)
	data = dataset.loadCsv(path)
	assert data.n == 4
	assert data.droppedCount == 1
	assert data.droppedLines == (4,)
	assert data.pupilIds == ("p1", "p2", "p4", "p5")
	assert data.label == "missing"


def test_loadCsv_blankLineKeepsNumbering():
	"""
	Line numbers and default pupil ids follow the file across a blank line
	"""
	path = writeInput(
		"blank.csv",
		"school,group,pretest,posttest\na,1,1,2\n\nb,0,2,NA\nb,1,3,4\nc,0,4,5\nc,1,5,6\n",
	)
	data = dataset.loadCsv(path)
	assert data.droppedCount == 1
	assert data.droppedLines == (4,)
	assert data.pupilIds == ("2", "5", "6", "7")


def test_loadCsv_groupOutOfDomain():
	path = writeInput("group2.csv", HEADER + "p1,a,1,1,2\np2,a,2,2,3\np3,b,0,3,4\np4,b,1,4,5\n")
	data = dataset.loadCsv(path)
	assert data.droppedCount == 1
	assert list(data.group) == [1, 0, 1]


def test_loadCsv_missingTokensAndNonFinite():
	path = writeInput(
		"tokens.csv",
		HEADER + "p1,a,1,NA,2\np2,a,0,na,3\np3,,1,1,4\np4,b,0,inf,5\np5,b,1,1,x\np6,b,1,1,2\np7,a,0,2,3\n",
	)
	data = dataset.loadCsv(path)
	assert data.pupilIds == ("p6", "p7")
	assert data.droppedLines == (2, 3, 4, 5, 6)


def test_loadCsv_allControl():
	path = writeInput("control.csv", HEADER + "p1,a,0,1,2\np2,b,0,2,3\n")
	with pytest.raises(SingleArm):
		dataset.loadCsv(path)


def test_loadCsv_nothingComplete():
	path = writeInput("empty.csv", HEADER + "p1,a,1,,2\np2,b,0,2,\n")
	with pytest.raises(EmptyAfterFiltering):
		dataset.loadCsv(path)


def test_loadCsv_schemaMismatch():
	path = writeInput("schema.csv", "pupil_id,school,arm,pretest,posttest\np1,a,1,1,2\n")
	with pytest.raises(SchemaMismatch, match=":1: column 'group'"):
		dataset.loadCsv(path)


def test_loadCsv_missingFile():
	with pytest.raises(FileUnreadable):
		dataset.loadCsv(OUTPUT + "/does-not-exist.csv")


def test_loadCsv_customColumnsWithoutPupilId():
	path = writeInput("custom.csv", "sch,treat,pre,post\na,1,1,2\na,0,2,3\nb,1,3,4\nb,0,4,5\n")
	schema = dataset.ColumnSchema(school="sch", group="treat", pretest="pre", posttest="post")
	data = dataset.loadCsv(path, schema, label="custom")
	assert data.pupilIds == ("2", "3", "4", "5")
	assert list(data.schoolIds) == ["a", "a", "b", "b"]
	assert data.nSchools == 2


def test_loadCsv_deterministic():
	path = writeInput("twice.csv", HEADER + "p1,a,1,1.5,2.25\np2,a,0,2,3\np3,b,1,3,4\np4,b,0,4,5\n")
	first, second = dataset.loadCsv(path), dataset.loadCsv(path)
	assert first.records == second.records


def test_writeCsv_readBack():
	data = shifted(-0.2, perArm=10)
	fileName = OUTPUT + "/written.csv"
	dataset.writeCsv(data, fileName)
	again = dataset.loadCsv(fileName)
	np.testing.assert_allclose(again.pretest, data.pretest, rtol=1e-12)
	assert again.pupilIds == data.pupilIds


def test_writeCsv_unwritable():
	blocker = writeInput("blocker", "")
	with pytest.raises(UnwritablePath):
		dataset.writeCsv(shifted(0.0, perArm=4), blocker + "/sub/out.csv")


def test_fromArrays_readOnly():
	data = shifted(0.0, perArm=4)
	with pytest.raises(ValueError):
		data.pretest[0] = 1.0


def test_standardizeZ_forced():
	data = dataset.fromArrays([1, 2, 3], [2, 4, 6], [1, 0, 1], ["a", "a", "b"])
	scaled = dataset.standardizeZ(data)
	np.testing.assert_allclose(scaled.pretest, [-1, 0, 1], atol=1e-12)
	np.testing.assert_allclose(scaled.posttest, [-1, 0, 1], atol=1e-12)
	assert scaled.standardized
	assert not data.standardized


def test_standardizeZ_idempotent():
	scaled = dataset.standardizeZ(shifted(0.3))
	again = dataset.standardizeZ(scaled)
	np.testing.assert_allclose(again.pretest, scaled.pretest, atol=1e-12)
	np.testing.assert_allclose(again.posttest, scaled.posttest, atol=1e-12)


def test_standardizeZ_constantPosttest():
	data = dataset.fromArrays([1, 2, 3], [5, 5, 5], [1, 0, 1], ["a", "a", "b"])
	with pytest.raises(ZeroVariance):
		dataset.standardizeZ(data)


def test_pearson():
	first = np.array([1.0, 2.0, 3.0, 4.0])
	assert dataset.pearson(first, 2 * first + 1) == pytest.approx(1.0)
	assert dataset.pearson(first, -first) == pytest.approx(-1.0)
	assert dataset.pearson(first, np.array([1.0, 3.0, 2.0, 4.0])) == pytest.approx(0.8)
	assert dataset.pearson(first, np.full(4, 5.0)) is None


def test_summarize_counts():
	summary = dataset.summarize(shifted(0.0, perArm=6))
	assert (summary.n, summary.nT, summary.nC, summary.nSch) == (12, 6, 6, 4)
	assert summary.n == summary.nT + summary.nC


def test_summarize_identicalScores():
	data = dataset.fromArrays([1, 4, 2, 8], [1, 4, 2, 8], [1, 0, 1, 0], ["a", "a", "b", "b"])
	assert dataset.summarize(data).ppCorr == pytest.approx(1.0)


def test_summarize_independentGroup():
	rng = np.random.default_rng(11)
	pretest = rng.standard_normal(4000)
	data = dataset.fromArrays(pretest, pretest, np.tile([1, 0], 2000), np.repeat(np.arange(40), 100))
	assert abs(dataset.summarize(data).ptCorr) < 0.05


def test_summarize_ttsmImbalance():
	"""
	Arms offset so that Hedges' g of pretest is -0.41 (the ttsm row)
	"""
	correction = 1 - 3 / (4 * (1000 - 2) - 1)
	summary = dataset.summarize(shifted(-0.41 / correction))
	assert summary.pretImb == pytest.approx(-0.41, abs=0.005)


def test_summarize_undefinedStatistics():
	data = dataset.fromArrays([1, 1, 1, 1], [1, 2, 3, 4], [1, 0, 1, 0], ["a", "a", "b", "b"])
	summary = dataset.summarize(data)
	assert summary.ptCorr is None
	assert summary.ppCorr is None
	assert summary.pretImb is None


def test_summarize_scaleInvariant():
	rng = np.random.default_rng(3)
	pretest = rng.normal(50, 10, 200)
	posttest = 0.6 * pretest + rng.normal(0, 8, 200)
	data = dataset.fromArrays(pretest, posttest, np.tile([1, 0], 100), np.repeat(np.arange(10), 20))
	before, after = dataset.summarize(data), dataset.summarize(dataset.standardizeZ(data))
	assert after.ptCorr == pytest.approx(before.ptCorr, abs=1e-10)
	assert after.ppCorr == pytest.approx(before.ppCorr, abs=1e-10)
	assert after.pretImb == pytest.approx(before.pretImb, abs=1e-10)
