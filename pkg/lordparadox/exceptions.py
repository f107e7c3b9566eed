"""Errors raised by the lordparadox library.

Every error carries the exit code the command line uses when it surfaces
the error: 2 for problems with the data or the inputs, 3 for model fits
that did not converge.
"""
from __future__ import annotations

DATA_ERROR = 2
FIT_ERROR = 3


class LordParadoxError(ValueError):
	"""Base class for all lordparadox errors."""

	exitCode = DATA_ERROR


class FileUnreadable(LordParadoxError):
	"""Input file is missing, unreadable or not UTF-8."""


class SchemaMismatch(LordParadoxError):
	"""A mapped column is absent from the header."""


class EmptyAfterFiltering(LordParadoxError):
	"""No complete cases survive ingestion."""


class SingleArm(LordParadoxError):
	"""One of the two arms is empty."""


class ZeroVariance(LordParadoxError):
	"""A score is constant where a spread is required."""


class TooFewObservations(LordParadoxError):
	"""An arm has fewer than two members."""


class ZeroPooledVariance(LordParadoxError):
	"""Pooled within-arm variance is zero."""


class TooFewSchools(LordParadoxError):
	"""Fewer than two schools for a multilevel model."""


class RankDeficientDesign(LordParadoxError):
	"""Fixed-effect design matrix is not of full column rank."""


class InvalidSpec(LordParadoxError):
	"""Simulation scenario or model specification is invalid."""


class MissingEstimate(LordParadoxError):
	"""A required estimate is absent from a comparison record."""


class UnknownLabel(LordParadoxError):
	"""Outcome label is not in the reference tables."""


class EmptyInput(LordParadoxError):
	"""Nothing to plot."""


class UnwritablePath(LordParadoxError):
	"""Output path cannot be written."""


class ConfigError(LordParadoxError):
	"""Malformed key=value configuration."""


class ReferenceDataError(LordParadoxError):
	"""Bundled reference tables violate their invariants."""


class NonConvergence(LordParadoxError):
	"""REML criterion is not finite on the search bracket."""

	exitCode = FIT_ERROR


class NotConverged(LordParadoxError):
	"""A quantity was requested from a fit that did not converge."""

	exitCode = FIT_ERROR
