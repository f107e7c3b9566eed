"""Random-intercept linear mixed models fitted by profiled REML.

The model is y_ij = x_ij'b + u_j + e_ij with u_j ~ N(0, s2u) for school j
and e_ij ~ N(0, s2e). With lam = s2u / s2e the marginal covariance of
school j is s2e * (I + lam * 11'), whose inverse is
I - (lam / (1 + lam * n_j)) * 11'. Every quantity REML needs is therefore
a function of per-school sums, so a fit never forms an n x n matrix.
s2e is profiled out and the criterion is minimised over log(lam) by
golden-section search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from lordparadox.dataset import TrialDataset
from lordparadox.estimators import Z_975, EffectEstimate, EffectKind
from lordparadox.exceptions import (InvalidSpec, NonConvergence, NotConverged,
                                    RankDeficientDesign, TooFewSchools)

LOG_LAMBDA_BRACKET = (-12.0, 12.0)
LOG_LAMBDA_TOL = 1e-8
BOUNDARY_LAMBDA = 1e-10
INV_PHI = (math.sqrt(5) - 1) / 2
GROUPINGS = {"school": "schoolIds"}


class Outcome(Enum):
	Post = "Post"
	Gain = "Gain"


class Covariate(Enum):
	Treatment = "Treatment"
	Pretest = "Pretest"


@dataclass(frozen=True)
class LmmSpec:
	"""Which of the multilevel models to fit.

	post-ANCOVA is Post with Pretest, gain-ANOVA is Gain without it. The
	other two combinations (post-ANOVA, gain-ANCOVA) are also allowed.
	Treatment is always a covariate.
	grouping names the dataset column that identifies schools.
	"""

	outcome: Outcome
	covariates: frozenset = frozenset({Covariate.Treatment})
	grouping: str = "school"

	def __post_init__(self):
		object.__setattr__(self, "covariates", frozenset(self.covariates))
		if Covariate.Treatment not in self.covariates:
			raise InvalidSpec("Treatment must be a covariate of every model")
		if self.grouping not in GROUPINGS:
			raise InvalidSpec(f"unknown grouping {self.grouping!r}, expected one of {sorted(GROUPINGS)}")

	@property
	def adjustsPretest(self) -> bool:
		return Covariate.Pretest in self.covariates

	@property
	def kind(self) -> EffectKind:
		return {
			(Outcome.Post, True): EffectKind.MlmPostAncova,
			(Outcome.Post, False): EffectKind.MlmPostAnova,
			(Outcome.Gain, True): EffectKind.MlmGainAncova,
			(Outcome.Gain, False): EffectKind.MlmGainAnova,
		}[(self.outcome, self.adjustsPretest)]


POST_ANCOVA = LmmSpec(Outcome.Post, frozenset({Covariate.Treatment, Covariate.Pretest}))
GAIN_ANOVA = LmmSpec(Outcome.Gain, frozenset({Covariate.Treatment}))


@dataclass(frozen=True)
class LmmFit:
	"""A fitted random-intercept model.

	blups are the predicted school intercepts u_j, in the order of schools.
	"""

	betaNames: tuple[str, ...]
	beta: tuple[float, ...]
	seBeta: tuple[float, ...]
	sigma2U: float
	sigma2E: float
	icc: float
	lam: float
	remlValue: float
	converged: bool
	nObs: int
	schools: tuple[str, ...] = ()
	blups: tuple[float, ...] = ()
	spec: LmmSpec | None = None

	def coef(self, name: str) -> float:
		return self.beta[self.betaNames.index(name)]

	def se(self, name: str) -> float:
		return self.seBeta[self.betaNames.index(name)]

	def blup(self, school: str) -> float:
		return self.blups[self.schools.index(school)]


@dataclass(frozen=True, eq=False)
class SchoolMoments:
	"""Per-school sufficient statistics of a response and design."""

	sizes: np.ndarray
	xSum: np.ndarray
	ySum: np.ndarray
	xtx: np.ndarray
	xty: np.ndarray
	yty: float
	nObs: int

	@property
	def nFixed(self) -> int:
		return self.xtx.shape[0]


def schoolMoments(y: np.ndarray, x: np.ndarray, codes: np.ndarray) -> SchoolMoments:
	"""Accumulate the per-school sums of y and x.

	Rows are put into a canonical order first so the sums, and everything
	computed from them, do not depend on the order of the input records.

	Args:
		y (np.ndarray): response, length n
		x (np.ndarray): fixed-effect design, n x p
		codes (np.ndarray): school index 0..J-1 per row

	Returns:
		SchoolMoments: the sums
	"""
	order = np.lexsort(tuple(x.T[::-1]) + (y, codes))
	y, x, codes = y[order], x[order], codes[order]
	nSchools = int(codes.max()) + 1
	return SchoolMoments(
		sizes=np.bincount(codes, minlength=nSchools).astype(np.float64),
		xSum=np.stack(
			[np.bincount(codes, weights=x[:, k], minlength=nSchools) for k in range(x.shape[1])],
			axis=1,
		),
		ySum=np.bincount(codes, weights=y, minlength=nSchools),
		xtx=x.T @ x,
		xty=x.T @ y,
		yty=float(y @ y),
		nObs=len(y),
	)


def _gls(moments: SchoolMoments, lam: float) -> tuple[np.ndarray, np.ndarray, float, np.ndarray]:
	weights = lam / (1 + lam * moments.sizes)
	xvx = moments.xtx - (moments.xSum.T * weights) @ moments.xSum
	xvy = moments.xty - moments.xSum.T @ (weights * moments.ySum)
	yvy = moments.yty - float(np.sum(weights * moments.ySum ** 2))
	beta = np.linalg.solve(xvx, xvy)
	return beta, xvx, yvy - float(xvy @ beta), weights


def remlCriterion(moments: SchoolMoments, lam: float) -> float:
	"""The profiled REML criterion (smaller is better).

	log|V| + (n - p) * log(r'V^-1 r) + log|X'V^-1 X| with V = I + lam * ZZ'.

	Args:
		moments (SchoolMoments): sufficient statistics
		lam (float): variance ratio s2u / s2e, >= 0

	Returns:
		float: criterion value; inf when the residual quadratic form is not
		positive
	"""
	_, xvx, quadratic, _ = _gls(moments, lam)
	sign, logDetXvx = np.linalg.slogdet(xvx)
	if quadratic <= 0 or sign <= 0:
		return math.inf
	logDetV = float(np.sum(np.log1p(lam * moments.sizes)))
	return logDetV + (moments.nObs - moments.nFixed) * math.log(quadratic) + logDetXvx


def goldenSection(
	func: Callable[[float], float], lower: float, upper: float, tol: float = LOG_LAMBDA_TOL
) -> tuple[float, float]:
	"""Minimise a unimodal function on [lower, upper] by golden-section search.

	Args:
		func (Callable[[float], float]): function to minimise
		lower (float): left end of the bracket
		upper (float): right end of the bracket
		tol (float, optional): width of the final bracket. Defaults to LOG_LAMBDA_TOL.

	Raises:
		NonConvergence: func is not finite at an evaluated point

	Returns:
		tuple[float, float]: (argmin, minimum)
	"""

	def evaluate(point: float) -> float:
		value = func(point)
		if not math.isfinite(value):
			raise NonConvergence(f"REML criterion is not finite at log(lambda) = {point:.6g}")
		return value

	lower, upper = min(lower, upper), max(lower, upper)
	width = upper - lower
	steps = max(int(math.ceil(math.log(tol / width) / math.log(INV_PHI))), 1)
	left = upper - INV_PHI * width
	right = lower + INV_PHI * width
	fLeft, fRight = evaluate(left), evaluate(right)
	for _ in range(steps):
		if fLeft < fRight:
			upper, right, fRight = right, left, fLeft
			left = upper - INV_PHI * (upper - lower)
			fLeft = evaluate(left)
		else:
			lower, left, fLeft = left, right, fRight
			right = lower + INV_PHI * (upper - lower)
			fRight = evaluate(right)
	if fLeft < fRight:
		return left, fLeft
	return right, fRight


def optimiseLambda(moments: SchoolMoments) -> tuple[float, float, bool]:
	"""Find the REML-optimal lam over the log bracket, with a boundary at zero.

	Returns:
		tuple[float, float, bool]: (lam, criterion, converged). converged is
		False when the optimum sits on the upper end of the bracket.
	"""
	lower, upper = LOG_LAMBDA_BRACKET
	logLam, value = goldenSection(lambda point: remlCriterion(moments, math.exp(point)), lower, upper)
	atZero = remlCriterion(moments, 0.0)
	if not math.isfinite(atZero):
		raise NonConvergence("REML criterion is not finite at lambda = 0")
	lam = math.exp(logLam)
	if atZero <= value + 1e-10 * max(1.0, abs(value)) or lam < BOUNDARY_LAMBDA:
		return 0.0, atZero, True
	return lam, value, upper - logLam > 1e-6


def fitRandomIntercept(
	y: np.ndarray,
	x: np.ndarray,
	groups: Sequence,
	betaNames: Sequence[str] | None = None,
	lam: float | None = None,
) -> LmmFit:
	"""Fit y = x b + u_school + e by REML.

	Args:
		y (np.ndarray): response
		x (np.ndarray): fixed-effect design, n x p, full column rank
		groups (Sequence): school id per row
		betaNames (Sequence[str], optional): names of the columns of x
		lam (float, optional): fix lam instead of optimising it

	Raises:
		TooFewSchools: fewer than two schools
		RankDeficientDesign: x is not of full column rank
		NonConvergence: the criterion is not finite on the bracket

	Returns:
		LmmFit: the fit
	"""
	y = np.asarray(y, dtype=np.float64)
	x = np.asarray(x, dtype=np.float64)
	if x.ndim == 1:
		x = x[:, None]
	schools, codes = np.unique(np.asarray(groups).astype(str), return_inverse=True)
	if len(schools) < 2:
		raise TooFewSchools(f"need at least two schools, got {len(schools)}")
	nObs, nFixed = x.shape
	if nObs <= nFixed or np.linalg.matrix_rank(x) < nFixed:
		raise RankDeficientDesign(f"design with {nFixed} columns is not of full rank on {nObs} rows")
	betaNames = tuple(betaNames) if betaNames is not None else tuple(f"x{k}" for k in range(nFixed))
	moments = schoolMoments(y, x, codes)
	if lam is None:
		lam, value, converged = optimiseLambda(moments)
	else:
		value, converged = remlCriterion(moments, lam), True
		if not math.isfinite(value):
			raise NonConvergence(f"REML criterion is not finite at lambda = {lam:.6g}")
	beta, xvx, quadratic, weights = _gls(moments, lam)
	sigma2E = quadratic / (nObs - nFixed)
	sigma2U = lam * sigma2E
	seBeta = np.sqrt(np.diag(np.linalg.inv(xvx)) * sigma2E)
	blups = weights * (moments.ySum - moments.xSum @ beta)
	return LmmFit(
		betaNames=betaNames,
		beta=tuple(float(value) for value in beta),
		seBeta=tuple(float(value) for value in seBeta),
		sigma2U=float(sigma2U),
		sigma2E=float(sigma2E),
		icc=lam / (1 + lam),
		lam=float(lam),
		remlValue=float(value),
		converged=bool(converged),
		nObs=nObs,
		schools=tuple(str(school) for school in schools),
		blups=tuple(float(value) for value in blups),
	)


def designFor(data: TrialDataset, spec: LmmSpec) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
	"""Response, design matrix and coefficient names of a model on a dataset."""
	columns = [np.ones(data.n), data.group.astype(np.float64)]
	names = ["intercept", "treatment"]
	if spec.adjustsPretest:
		columns.append(data.pretest)
		names.append("pretest")
	response = data.posttest if spec.outcome is Outcome.Post else data.gain
	return response, np.column_stack(columns), tuple(names)


def fitLmm(data: TrialDataset, spec: LmmSpec) -> LmmFit:
	"""Fit one of the multilevel models with a random intercept per school.

	gain-ANCOVA (Gain with Pretest) is fitted through its post-ANCOVA
	equivalent: post - pre = b0 + b1 T + b2 pre + e is post = b0 + b1 T +
	(b2 + 1) pre + e, so only the pretest slope shifts by one.

	Args:
		data (TrialDataset): the dataset
		spec (LmmSpec): which model

	Raises:
		TooFewSchools: fewer than two schools
		RankDeficientDesign: a constant covariate or a single arm
		NonConvergence: REML criterion not finite on the bracket

	Returns:
		LmmFit: the fit, with spec attached
	"""
	gainAncova = spec.outcome is Outcome.Gain and spec.adjustsPretest
	fitSpec = replace(spec, outcome=Outcome.Post) if gainAncova else spec
	response, design, names = designFor(data, fitSpec)
	fit = fitRandomIntercept(response, design, getattr(data, GROUPINGS[spec.grouping]), names)
	beta = fit.beta
	if gainAncova:
		beta = beta[:2] + (beta[2] - 1.0,)
	return replace(fit, beta=beta, spec=spec)


def _requireConverged(fit: LmmFit):
	if not fit.converged:
		raise NotConverged("variance components did not converge (lambda at the upper bound)")


def effectSizeTotalVariance(fit: LmmFit) -> EffectEstimate:
	"""Treatment coefficient over the square root of the total variance.

	The interval is the Wald interval of the coefficient divided by the same
	denominator; uncertainty in the variance components is ignored and no
	small-sample correction is applied.

	Args:
		fit (LmmFit): converged fit with a "treatment" coefficient

	Raises:
		NotConverged: the fit did not converge
		InvalidSpec: the fit carries no spec, so its kind is unknown

	Returns:
		EffectEstimate: kind taken from the fit's spec
	"""
	if fit.spec is None:
		raise InvalidSpec("effect size needs a fit made by fitLmm, this one has no model spec")
	_requireConverged(fit)
	scale = math.sqrt(fit.sigma2U + fit.sigma2E)
	coefficient, se = fit.coef("treatment"), fit.se("treatment")
	return EffectEstimate(
		g=coefficient / scale,
		se=se / scale,
		lb=(coefficient - Z_975 * se) / scale,
		ub=(coefficient + Z_975 * se) / scale,
		kind=fit.spec.kind,
		diff=coefficient,
	)


def iccOf(fit: LmmFit) -> float:
	"""Intra-cluster correlation s2u / (s2u + s2e) of a converged fit."""
	_requireConverged(fit)
	return fit.sigma2U / (fit.sigma2U + fit.sigma2E)
