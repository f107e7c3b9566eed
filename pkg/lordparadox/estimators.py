"""Difference-in-means effect sizes as Hedges' g.

These estimators ignore clustering: every pupil is treated as an
independent observation, which is how the simple comparisons are made.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Sequence

import numpy as np
from metprint import FHFormatter, Logger, LogType

from lordparadox.exceptions import TooFewObservations, ZeroPooledVariance

if TYPE_CHECKING:
	from lordparadox.dataset import TrialDataset

Z_975 = 1.96
DEGENERATE_GAINS = "DegenerateGains"


class EffectKind(Enum):
	"""Which model produced an estimate."""

	PostDIM = "PostDIM"
	GainDIM = "GainDIM"
	MlmPostAncova = "MlmPostAncova"
	MlmGainAnova = "MlmGainAnova"
	MlmPostAnova = "MlmPostAnova"
	MlmGainAncova = "MlmGainAncova"
	Pretest = "Pretest"


@dataclass(frozen=True)
class EffectEstimate:
	"""A standardised effect with a symmetric Wald 95% interval.

	se, lb and ub are None when the estimate has no defined spread
	(degenerate gains). diff is the unstandardised contrast.
	"""

	g: float
	se: float | None
	lb: float | None
	ub: float | None
	kind: EffectKind
	diff: float | None = None

	@property
	def width(self) -> float | None:
		if self.lb is None or self.ub is None:
			return None
		return self.ub - self.lb

	def covers(self, value: float) -> bool:
		return self.lb is not None and self.ub is not None and self.lb <= value <= self.ub


def hedgesG(
	valuesT: Sequence[float], valuesC: Sequence[float], kind: EffectKind = EffectKind.PostDIM
) -> EffectEstimate:
	"""Hedges' g of intervention minus control.

	g = J * (mean_t - mean_c) / s_p with the n - 1 pooled SD and
	J = 1 - 3 / (4 * (n_t + n_c - 2) - 1).
	se = sqrt((n_t + n_c) / (n_t * n_c) + g^2 / (2 * (n_t + n_c))).

	Args:
		valuesT (Sequence[float]): intervention values
		valuesC (Sequence[float]): control values
		kind (EffectKind, optional): label for the estimate. Defaults to PostDIM.

	Raises:
		TooFewObservations: an arm has fewer than two values
		ZeroPooledVariance: both arms are constant

	Returns:
		EffectEstimate: g with se and 95% bounds
	"""
	valuesT = np.asarray(valuesT, dtype=np.float64)
	valuesC = np.asarray(valuesC, dtype=np.float64)
	nT, nC = len(valuesT), len(valuesC)
	if nT < 2 or nC < 2:
		raise TooFewObservations(f"need at least two per arm, got {nT} and {nC}")
	df = nT + nC - 2
	pooledVar = ((nT - 1) * valuesT.var(ddof=1) + (nC - 1) * valuesC.var(ddof=1)) / df
	if not pooledVar > 0:
		raise ZeroPooledVariance("pooled variance is zero")
	diff = float(valuesT.mean() - valuesC.mean())
	correction = 1 - 3 / (4 * df - 1)
	g = correction * diff / np.sqrt(pooledVar)
	se = np.sqrt((nT + nC) / (nT * nC) + g ** 2 / (2 * (nT + nC)))
	return EffectEstimate(
		g=float(g),
		se=float(se),
		lb=float(g - Z_975 * se),
		ub=float(g + Z_975 * se),
		kind=kind,
		diff=diff,
	)


def _byArm(data: TrialDataset, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
	return values[data.treated], values[~data.treated]


def dimPost(data: TrialDataset) -> EffectEstimate:
	"""Difference-in-means of posttest alone."""
	return hedgesG(*_byArm(data, data.posttest), kind=EffectKind.PostDIM)


def dimGain(data: TrialDataset) -> EffectEstimate:
	"""Difference-in-means of gain scores (posttest - pretest).

	When every pupil has the same gain the estimate is g = 0 with no
	spread, and a DegenerateGains warning is logged.

	Args:
		data (TrialDataset): dataset, with commensurate pre and post scales

	Returns:
		EffectEstimate: kind GainDIM
	"""
	gain = data.gain
	if len(gain) and np.all(gain == gain[0]):
		Logger(FHFormatter()).logPrint(
			f"{DEGENERATE_GAINS}: {data.label or 'dataset'} has identical gains for every pupil",
			LogType.WARNING,
		)
		return EffectEstimate(g=0.0, se=None, lb=None, ub=None, kind=EffectKind.GainDIM, diff=0.0)
	return hedgesG(*_byArm(data, gain), kind=EffectKind.GainDIM)


def pretestImbalance(data: TrialDataset) -> EffectEstimate:
	"""Baseline imbalance: Hedges' g of pretest, intervention minus control."""
	return hedgesG(*_byArm(data, data.pretest), kind=EffectKind.Pretest)
