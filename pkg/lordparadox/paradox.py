"""Classify each outcome's reversal status and baseline imbalance.

A pair of estimates is compared by its divergence |a - b|. Below the
divergence threshold the pair is Consistent. Otherwise it is a
BorderlineReversal when either estimate sits near zero, a Reversal when
the signs differ and a MagnitudeDivergent pair when they agree.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from lordparadox.estimators import EffectEstimate
from lordparadox.exceptions import ConfigError, MissingEstimate

# compare rounded differences so 0.11 - 0.01 counts as 0.10
DECIMALS = 10


class Category(Enum):
	Consistent = "Consistent"
	MagnitudeDivergent = "MagnitudeDivergent"
	BorderlineReversal = "BorderlineReversal"
	Reversal = "Reversal"


class ImbalanceFlag(Enum):
	Balanced = "Balanced"
	Notable = "Notable"
	Substantial = "Substantial"


@dataclass(frozen=True)
class ParadoxThresholds:
	"""Decision thresholds; all are judgement calls and may be overridden."""

	divergence: float = 0.1
	substantial: float = 0.2
	notable: float = 0.1
	nearZero: float = 0.05


THRESHOLD_KEYS = {"d": "divergence", "imb": "substantial", "note": "notable", "nz": "nearZero"}


def parseThresholds(text: str) -> ParadoxThresholds:
	"""Parse a flag value such as "d=0.1,imb=0.2,nz=0.05".

	Args:
		text (str): comma separated key=value pairs, keys d, imb, note, nz

	Raises:
		ConfigError: unknown key or a value that is not a non-negative number

	Returns:
		ParadoxThresholds: thresholds with the given overrides
	"""
	values = {}
	for item in filter(None, (part.strip() for part in text.split(","))):
		key, sep, value = item.partition("=")
		if not sep or key.strip() not in THRESHOLD_KEYS:
			raise ConfigError(f"bad threshold '{item}', expected one of {sorted(THRESHOLD_KEYS)}=value")
		try:
			number = float(value)
		except ValueError as error:
			raise ConfigError(f"bad threshold value in '{item}'") from error
		if not number >= 0:
			raise ConfigError(f"threshold '{item}' must be non-negative")
		values[THRESHOLD_KEYS[key.strip()]] = number
	return ParadoxThresholds(**values)


@dataclass(frozen=True)
class ComparisonRecord:
	"""The four estimates of one outcome joined to its summary statistics."""

	label: str
	gP: EffectEstimate | None = None
	gG: EffectEstimate | None = None
	ttP: EffectEstimate | None = None
	ttG: EffectEstimate | None = None
	pretImb: float | None = None
	icc: float | None = None
	nSch: int | None = None

	@property
	def partial(self) -> bool:
		return None in (self.gP, self.gG, self.ttP, self.ttG)


@dataclass(frozen=True)
class ParadoxVerdict:
	"""Classification of one estimate pair.

	category and divergence are None for a partial verdict (an estimate
	of the pair is missing); imbalanceFlag is None without pret.imb.
	"""

	category: Category | None
	divergence: float | None
	imbalanceFlag: ImbalanceFlag | None
	nearZero: bool = False
	partial: bool = False


def imbalanceFlag(pretImb: float | None, thresholds: ParadoxThresholds = ParadoxThresholds()):
	"""Flag |pret.imb| as Substantial (> substantial), Notable (> notable) or Balanced."""
	if pretImb is None:
		return None
	size = round(abs(pretImb), DECIMALS)
	if size > thresholds.substantial:
		return ImbalanceFlag.Substantial
	if size > thresholds.notable:
		return ImbalanceFlag.Notable
	return ImbalanceFlag.Balanced


def classifyPair(
	first: float, second: float, pretImb: float | None, thresholds: ParadoxThresholds = ParadoxThresholds()
) -> ParadoxVerdict:
	"""Classify a pair of point estimates."""
	divergence = round(abs(first - second), DECIMALS)
	nearZero = bool(
		min(abs(first), abs(second)) < thresholds.nearZero or first == 0 or second == 0
	)
	if divergence < thresholds.divergence:
		category = Category.Consistent
	elif nearZero:
		category = Category.BorderlineReversal
	elif np.sign(first) != np.sign(second):
		category = Category.Reversal
	else:
		category = Category.MagnitudeDivergent
	return ParadoxVerdict(category, divergence, imbalanceFlag(pretImb, thresholds), nearZero)


def _classify(
	label: str,
	first: EffectEstimate | None,
	second: EffectEstimate | None,
	names: str,
	pretImb: float | None,
	thresholds: ParadoxThresholds,
) -> ParadoxVerdict:
	if first is None or second is None:
		raise MissingEstimate(f"{label}: {names} needs both estimates")
	return classifyPair(first.g, second.g, pretImb, thresholds)


def classify(record: ComparisonRecord, thresholds: ParadoxThresholds = ParadoxThresholds()) -> ParadoxVerdict:
	"""Classify the simple pair (gP against gG).

	Raises:
		MissingEstimate: gP or gG is absent
	"""
	return _classify(record.label, record.gP, record.gG, "gP/gG", record.pretImb, thresholds)


def classifyMlm(record: ComparisonRecord, thresholds: ParadoxThresholds = ParadoxThresholds()) -> ParadoxVerdict:
	"""Classify the multilevel pair (ttP against ttG).

	Raises:
		MissingEstimate: ttP or ttG is absent
	"""
	return _classify(record.label, record.ttP, record.ttG, "ttP/ttG", record.pretImb, thresholds)


def _partial(record: ComparisonRecord, thresholds: ParadoxThresholds) -> ParadoxVerdict:
	return ParadoxVerdict(None, None, imbalanceFlag(record.pretImb, thresholds), partial=True)


@dataclass(frozen=True)
class BatchResult:
	"""Verdicts per record in input order, with aggregate counts."""

	rows: tuple[tuple[str, ParadoxVerdict, ParadoxVerdict], ...]
	simpleCounts: dict = field(default_factory=dict)
	mlmCounts: dict = field(default_factory=dict)
	imbalanceCounts: dict = field(default_factory=dict)

	def labels(self, category: Category, mlm: bool = False) -> list[str]:
		index = 2 if mlm else 1
		return [row[0] for row in self.rows if row[index].category is category]

	def medianDivergence(self, mlm: bool = False) -> float | None:
		index = 2 if mlm else 1
		values = [row[index].divergence for row in self.rows if row[index].divergence is not None]
		return float(np.median(values)) if values else None


def batchClassify(
	records: Sequence[ComparisonRecord], thresholds: ParadoxThresholds = ParadoxThresholds()
) -> BatchResult:
	"""Classify both pairs of every record.

	A pair with a missing estimate gets a partial verdict rather than an
	error.

	Args:
		records (Sequence[ComparisonRecord]): records to classify
		thresholds (ParadoxThresholds, optional): Defaults to ParadoxThresholds().

	Returns:
		BatchResult: verdicts in input order and counts per category and flag
	"""
	rows = []
	for record in records:
		verdicts = []
		for classifier in (classify, classifyMlm):
			try:
				verdicts.append(classifier(record, thresholds))
			except MissingEstimate:
				verdicts.append(_partial(record, thresholds))
		rows.append((record.label, verdicts[0], verdicts[1]))

	def count(index: int) -> dict:
		counter = Counter(row[index].category for row in rows if row[index].category is not None)
		return {category.value: counter[category] for category in Category}

	flags = Counter(row[1].imbalanceFlag for row in rows if row[1].imbalanceFlag is not None)
	return BatchResult(
		rows=tuple(rows),
		simpleCounts=count(1),
		mlmCounts=count(2),
		imbalanceCounts={flag.value: flags[flag] for flag in ImbalanceFlag},
	)
