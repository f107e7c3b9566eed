"""Run the four models on one dataset.

The simple pair (difference-in-means of post and of gain) ignores schools;
the multilevel pair (post-ANCOVA and gain-ANOVA) adds a random intercept
per school. A failure in one model does not stop the others: the estimate
is left out and the failure is recorded.
"""
from __future__ import annotations

from dataclasses import dataclass

from lordparadox.dataset import DatasetSummary, TrialDataset
from lordparadox.estimators import DEGENERATE_GAINS, EffectEstimate, dimGain, dimPost
from lordparadox.exceptions import LordParadoxError
from lordparadox.mixedmodel import GAIN_ANOVA, POST_ANCOVA, LmmFit, effectSizeTotalVariance, fitLmm
from lordparadox.paradox import ComparisonRecord

ESTIMATE_NAMES = ("gP", "gG", "ttP", "ttG")


@dataclass(frozen=True)
class Failure:
	"""Why an estimate is missing."""

	estimate: str
	error: str
	message: str
	exitCode: int


@dataclass(frozen=True)
class EstimateSet:
	"""gP, gG, ttP and ttG for one outcome; any may be None on failure."""

	gP: EffectEstimate | None = None
	gG: EffectEstimate | None = None
	ttP: EffectEstimate | None = None
	ttG: EffectEstimate | None = None
	iccPost: float | None = None
	iccGain: float | None = None
	failures: tuple[Failure, ...] = ()
	warnings: tuple[str, ...] = ()

	@property
	def partial(self) -> bool:
		return any(getattr(self, name) is None for name in ESTIMATE_NAMES)


def _mlm(fit: LmmFit) -> tuple[EffectEstimate, float]:
	estimate = effectSizeTotalVariance(fit)
	return estimate, fit.icc


def estimateSet(data: TrialDataset) -> EstimateSet:
	"""Compute the four estimates, collecting failures instead of raising.

	Args:
		data (TrialDataset): the dataset

	Returns:
		EstimateSet: estimates, the school icc of each multilevel model, and
		failures / warnings
	"""
	results = {}
	failures = []
	warnings = []
	steps = (
		("gP", lambda: (dimPost(data), None)),
		("gG", lambda: (dimGain(data), None)),
		("ttP", lambda: _mlm(fitLmm(data, POST_ANCOVA))),
		("ttG", lambda: _mlm(fitLmm(data, GAIN_ANOVA))),
	)
	for name, step in steps:
		try:
			results[name] = step()
		except LordParadoxError as error:
			failures.append(Failure(name, type(error).__name__, str(error), error.exitCode))
			results[name] = (None, None)
	if results["gG"][0] is not None and results["gG"][0].se is None:
		warnings.append(DEGENERATE_GAINS)
	if data.standardized:
		warnings.append("StandardizationApplied")
	return EstimateSet(
		gP=results["gP"][0],
		gG=results["gG"][0],
		ttP=results["ttP"][0],
		ttG=results["ttG"][0],
		iccPost=results["ttP"][1],
		iccGain=results["ttG"][1],
		failures=tuple(failures),
		warnings=tuple(warnings),
	)


def comparisonRecord(label: str, estimates: EstimateSet, summary: DatasetSummary | None = None) -> ComparisonRecord:
	"""Join an EstimateSet and a DatasetSummary into a ComparisonRecord."""
	return ComparisonRecord(
		label=label,
		gP=estimates.gP,
		gG=estimates.gG,
		ttP=estimates.ttP,
		ttG=estimates.ttG,
		pretImb=None if summary is None else summary.pretImb,
		icc=estimates.iccPost,
		nSch=None if summary is None else summary.nSch,
	)
