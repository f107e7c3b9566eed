"""Two-panel forest plots of the four effect estimates per outcome.

The left panel shows the simple pair (gP, gG) and the right panel the
multilevel pair (ttP, ttG). Each outcome is a row with a horizontal 95%
interval per estimate and a vertical reference line at zero. Each panel
spans the interval extrema (and zero) with 5% padding.

Outcomes with a negative pret.imb go in one figure and the rest in another,
both ordered top to bottom by descending pret.imb.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from html import escape
from pathlib import Path
from typing import Sequence

from metprint import FHFormatter, Logger, LogType
from PIL import Image, ImageDraw, ImageFont

from lordparadox.estimators import EffectEstimate
from lordparadox.exceptions import EmptyInput, UnwritablePath
from lordparadox.paradox import ComparisonRecord

WIDTH = 960
LABEL_WIDTH = 110
RIGHT_MARGIN = 20
PANEL_GAP = 50
TOP_MARGIN = 80
BOTTOM_MARGIN = 80
ROW_HEIGHT = 22
BAR_OFFSET = 4
PADDING = 0.05
FONT_FAMILY = "DejaVu Sans, Arial, sans-serif"
POST_COLOUR = "#1f4e79"
GAIN_COLOUR = "#c0392b"
AXIS_COLOUR = "#3a3a3a"
GRID_COLOUR = "#d0d0d0"
PANELS = (("gP", "gG", "Simple models (gP, gG)"), ("ttP", "ttG", "Multilevel models (ttP, ttG)"))
NICE_STEPS = (1, 2, 2.5, 5, 10)


def orderRecords(records: Sequence[ComparisonRecord], negative: bool) -> list[ComparisonRecord]:
	"""Pick the negative (or non-negative) pret.imb records in figure order.

	Rows run top to bottom by descending pret.imb. Ties keep the reverse of
	their input order. Records without pret.imb are left out.

	Args:
		records (Sequence[ComparisonRecord]): records in table order
		negative (bool): True for pret.imb < 0, False for pret.imb >= 0

	Returns:
		list[ComparisonRecord]: records, top row first
	"""
	selected = [
		record for record in records if record.pretImb is not None and (record.pretImb < 0) == negative
	]
	return list(reversed(sorted(selected, key=lambda record: record.pretImb)))


def splitByImbalance(records: Sequence[ComparisonRecord]) -> tuple[list[ComparisonRecord], list[ComparisonRecord]]:
	"""(negative, non-negative) records, each in figure order."""
	return orderRecords(records, True), orderRecords(records, False)


def _bounds(estimate: EffectEstimate) -> tuple[float, float]:
	if estimate.lb is None or estimate.ub is None:
		return estimate.g, estimate.g
	return estimate.lb, estimate.ub


def niceTicks(lower: float, upper: float, count: int = 5) -> list[float]:
	"""Round tick positions covering [lower, upper]."""
	raw = (upper - lower) / count
	magnitude = 10 ** math.floor(math.log10(raw))
	step = next(factor * magnitude for factor in NICE_STEPS if factor * magnitude >= raw)
	first = math.ceil(lower / step - 1e-9)
	last = math.floor(upper / step + 1e-9)
	return [round(index * step, 10) for index in range(first, last + 1)]


@dataclass(frozen=True)
class Panel:
	"""Horizontal placement and value range of one panel."""

	left: float
	width: float
	lower: float
	upper: float
	postName: str
	gainName: str
	heading: str

	def x(self, value: float) -> float:
		return self.left + (value - self.lower) / (self.upper - self.lower) * self.width


@dataclass(frozen=True)
class Layout:
	"""Geometry shared by the SVG and PNG renderers."""

	records: tuple[ComparisonRecord, ...]
	panels: tuple[Panel, ...]
	width: int
	height: int

	def rowY(self, index: int) -> float:
		return TOP_MARGIN + (index + 0.5) * ROW_HEIGHT

	@property
	def bottom(self) -> float:
		return TOP_MARGIN + len(self.records) * ROW_HEIGHT


def layout(records: Sequence[ComparisonRecord]) -> Layout:
	"""Place the rows and scale each panel to its interval extrema.

	Raises:
		EmptyInput: no record has an estimate to draw
	"""
	if not records:
		raise EmptyInput("nothing to plot: no records")
	panelWidth = (WIDTH - LABEL_WIDTH - RIGHT_MARGIN - PANEL_GAP) / 2
	panels = []
	drawable = False
	for index, (postName, gainName, heading) in enumerate(PANELS):
		values = [0.0]
		for record in records:
			for name in (postName, gainName):
				estimate = getattr(record, name)
				if estimate is not None:
					values.extend(_bounds(estimate))
					drawable = True
		lower, upper = min(values), max(values)
		pad = PADDING * (upper - lower) if upper > lower else 0.5
		panels.append(
			Panel(
				left=LABEL_WIDTH + index * (panelWidth + PANEL_GAP),
				width=panelWidth,
				lower=lower - pad,
				upper=upper + pad,
				postName=postName,
				gainName=gainName,
				heading=heading,
			)
		)
	if not drawable:
		raise EmptyInput("nothing to plot: no record has an estimate")
	height = TOP_MARGIN + len(records) * ROW_HEIGHT + BOTTOM_MARGIN
	return Layout(tuple(records), tuple(panels), WIDTH, height)


def _svgText(x: float, y: float, text: str, size: int = 12, anchor: str = "start", extra: str = "") -> str:
	return (
		f"<text x='{x:.2f}' y='{y:.2f}' font-size='{size}' font-family='{FONT_FAMILY}' "
		f"text-anchor='{anchor}'{extra}>{escape(text)}</text>"
	)


def _svgEstimate(panel: Panel, estimate: EffectEstimate | None, y: float, colour: str, marker: str) -> list[str]:
	if estimate is None:
		return []
	lower, upper = _bounds(estimate)
	x = panel.x(estimate.g)
	elements = [
		f"<line x1='{panel.x(lower):.2f}' x2='{panel.x(upper):.2f}' y1='{y:.2f}' y2='{y:.2f}' "
		f"stroke='{colour}' stroke-width='1.6' />"
	]
	if marker == "circle":
		elements.append(f"<circle cx='{x:.2f}' cy='{y:.2f}' r='3.2' fill='{colour}' />")
	else:
		elements.append(f"<rect x='{x - 3:.2f}' y='{y - 3:.2f}' width='6' height='6' fill='{colour}' />")
	return elements


def forestPlotSvg(records: Sequence[ComparisonRecord], title: str = "") -> str:
	"""Render records as a two-panel forest plot in SVG.

	Rows are drawn in the order given, first record at the top. Each row is
	a group carrying a data-label attribute with the outcome label.

	Args:
		records (Sequence[ComparisonRecord]): records, top row first
		title (str, optional): figure title. Defaults to "".

	Raises:
		EmptyInput: no records, or none with an estimate

	Returns:
		str: SVG markup
	"""
	plan = layout(records)
	elements = [
		"<?xml version='1.0' encoding='UTF-8'?>",
		f"<svg xmlns='http://www.w3.org/2000/svg' width='{plan.width}' height='{plan.height}' "
		f"viewBox='0 0 {plan.width} {plan.height}' role='img'>",
		f"<rect x='0' y='0' width='{plan.width}' height='{plan.height}' fill='white' stroke='none' />",
		_svgText(plan.width / 2, 26, title, size=16, anchor="middle", extra=" font-weight='bold'"),
	]
	for panel in plan.panels:
		right = panel.left + panel.width
		elements.append(_svgText(panel.left + panel.width / 2, TOP_MARGIN - 20, panel.heading, size=13, anchor="middle"))
		elements.append(
			f"<rect x='{panel.left:.2f}' y='{TOP_MARGIN}' width='{panel.width:.2f}' "
			f"height='{plan.bottom - TOP_MARGIN:.2f}' fill='none' stroke='{AXIS_COLOUR}' stroke-width='1' />"
		)
		for tick in niceTicks(panel.lower, panel.upper):
			x = panel.x(tick)
			elements.append(
				f"<line x1='{x:.2f}' x2='{x:.2f}' y1='{TOP_MARGIN}' y2='{plan.bottom:.2f}' "
				f"stroke='{GRID_COLOUR}' stroke-width='1' opacity='0.6' />"
			)
			elements.append(_svgText(x, plan.bottom + 18, f"{tick:g}", size=11, anchor="middle"))
		zero = panel.x(0.0)
		elements.append(
			f"<line x1='{zero:.2f}' x2='{zero:.2f}' y1='{TOP_MARGIN}' y2='{plan.bottom:.2f}' "
			f"stroke='{AXIS_COLOUR}' stroke-width='1.2' stroke-dasharray='4 3' />"
		)
		elements.append(_svgText((panel.left + right) / 2, plan.bottom + 40, "Effect size", size=12, anchor="middle"))
	for index, record in enumerate(plan.records):
		y = plan.rowY(index)
		elements.append(f"<g data-label='{escape(record.label)}'>")
		elements.append(_svgText(LABEL_WIDTH - 12, y + 4, record.label, anchor="end"))
		for panel in plan.panels:
			elements.extend(_svgEstimate(panel, getattr(record, panel.postName), y - BAR_OFFSET, POST_COLOUR, "circle"))
			elements.extend(_svgEstimate(panel, getattr(record, panel.gainName), y + BAR_OFFSET, GAIN_COLOUR, "square"))
		elements.append("</g>")
	legendY = plan.height - 14
	elements.append(f"<circle cx='{LABEL_WIDTH:.2f}' cy='{legendY - 4}' r='3.2' fill='{POST_COLOUR}' />")
	elements.append(_svgText(LABEL_WIDTH + 10, legendY, "post-test (gP, ttP)", size=11))
	elements.append(f"<rect x='{LABEL_WIDTH + 177:.2f}' y='{legendY - 7}' width='6' height='6' fill='{GAIN_COLOUR}' />")
	elements.append(_svgText(LABEL_WIDTH + 190, legendY, "gain score (gG, ttG)", size=11))
	elements.append("</svg>")
	return "\n".join(elements) + "\n"


def _pngEstimate(draw: ImageDraw.ImageDraw, panel: Panel, estimate: EffectEstimate | None, y: float, colour: str, marker: str):
	if estimate is None:
		return
	lower, upper = _bounds(estimate)
	draw.line((panel.x(lower), y, panel.x(upper), y), fill=colour, width=2)
	x = panel.x(estimate.g)
	if marker == "circle":
		draw.ellipse((x - 3, y - 3, x + 3, y + 3), fill=colour)
	else:
		draw.rectangle((x - 3, y - 3, x + 3, y + 3), fill=colour)


# the default bitmap font is 6 px per character and 11 px high
CHAR_WIDTH = 6
CHAR_HEIGHT = 11


def _pngText(draw: ImageDraw.ImageDraw, x: float, y: float, text: str, font, align: str = "middle"):
	width = CHAR_WIDTH * len(text)
	left = {"start": x, "middle": x - width / 2, "end": x - width}[align]
	draw.text((left, y - CHAR_HEIGHT / 2), text, fill="black", font=font)


def forestPlotImage(records: Sequence[ComparisonRecord], title: str = "") -> Image.Image:
	"""Render the same forest plot as a Pillow image.

	Raises:
		EmptyInput: no records, or none with an estimate
	"""
	plan = layout(records)
	image = Image.new("RGB", (plan.width, plan.height), "white")
	draw = ImageDraw.Draw(image)
	font = ImageFont.load_default()
	_pngText(draw, plan.width / 2, 20, title, font)
	for panel in plan.panels:
		_pngText(draw, panel.left + panel.width / 2, TOP_MARGIN - 20, panel.heading, font)
		for tick in niceTicks(panel.lower, panel.upper):
			x = panel.x(tick)
			draw.line((x, TOP_MARGIN, x, plan.bottom), fill=GRID_COLOUR, width=1)
			_pngText(draw, x, plan.bottom + 14, f"{tick:g}", font)
		zero = panel.x(0.0)
		draw.line((zero, TOP_MARGIN, zero, plan.bottom), fill=AXIS_COLOUR, width=1)
		draw.rectangle((panel.left, TOP_MARGIN, panel.left + panel.width, plan.bottom), outline=AXIS_COLOUR)
	for index, record in enumerate(plan.records):
		y = plan.rowY(index)
		_pngText(draw, LABEL_WIDTH - 12, y, record.label, font, align="end")
		for panel in plan.panels:
			_pngEstimate(draw, panel, getattr(record, panel.postName), y - BAR_OFFSET, POST_COLOUR, "circle")
			_pngEstimate(draw, panel, getattr(record, panel.gainName), y + BAR_OFFSET, GAIN_COLOUR, "square")
	return image


FIGURES = (
	("figure_negative", True, "Outcomes with negative pre-test imbalance"),
	("figure_nonnegative", False, "Outcomes with non-negative pre-test imbalance"),
)


def writeFigures(records: Sequence[ComparisonRecord], outputDir: str, png: bool = False) -> list[str]:
	"""Write the negative and non-negative imbalance figures to a directory.

	A figure with no records is skipped with a warning.

	Args:
		records (Sequence[ComparisonRecord]): records with pret.imb, in table order
		outputDir (str): directory for figure_negative.svg and figure_nonnegative.svg
		png (bool, optional): also write .png renderings. Defaults to False.

	Raises:
		EmptyInput: neither figure has a record
		UnwritablePath: a file cannot be written

	Returns:
		list[str]: paths written
	"""
	written = []
	try:
		os.makedirs(outputDir, exist_ok=True)
		for stem, negative, title in FIGURES:
			ordered = orderRecords(records, negative)
			if not ordered:
				Logger(FHFormatter()).logPrint(f"{stem}: no records, skipping", LogType.WARNING)
				continue
			fileName = str(Path(outputDir) / f"{stem}.svg")
			Path(fileName).write_text(forestPlotSvg(ordered, title), encoding="utf-8", newline="\n")
			written.append(fileName)
			if png:
				fileName = str(Path(outputDir) / f"{stem}.png")
				forestPlotImage(ordered, title).save(fileName)
				written.append(fileName)
	except OSError as error:
		raise UnwritablePath(f"{outputDir}: {error}") from error
	if not written:
		raise EmptyInput("nothing to plot: no record has a pret.imb value")
	return written
