"""Minimal SVG document builder.

Coordinates are written with one decimal; text is XML-escaped.
"""

from __future__ import annotations

from collections.abc import Iterable
from xml.sax.saxutils import escape, quoteattr

PALETTE = (
	"#1f77b4",
	"#ff7f0e",
	"#2ca02c",
	"#d62728",
	"#9467bd",
	"#8c564b",
	"#e377c2",
	"#7f7f7f",
	"#bcbd22",
	"#17becf",
)


def _points(points: Iterable[tuple[float, float]]) -> str:
	return " ".join(f"{x:.1f},{y:.1f}" for x, y in points)


def _attrs(extra: dict[str, str] | None) -> str:
	if not extra:
		return ""
	return "".join(f" {key}={quoteattr(str(value))}" for key, value in extra.items())


class SVG:
	def __init__(self, width: int, height: int):
		self.width = width
		self.height = height
		self.parts: list[str] = [
			'<?xml version="1.0" encoding="UTF-8"?>\n',
			f'<svg version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" '
			'xmlns="http://www.w3.org/2000/svg">\n',
		]

	def group_start(self, title: str | None = None, **attrs: str) -> None:
		self.parts.append(f"<g{_attrs(attrs)}>\n")
		if title:
			self.parts.append(f"<title>{escape(title)}</title>\n")

	def group_end(self) -> None:
		self.parts.append("</g>\n")

	def rect(self, x: float, y: float, width: float, height: float, fill: str, **extra: str) -> None:
		self.parts.append(
			f'<rect x="{x:.1f}" y="{y:.1f}" width="{width:.1f}" height="{height:.1f}" '
			f'fill="{fill}"{_attrs(extra)}/>\n'
		)

	def line(self, x1: float, y1: float, x2: float, y2: float, stroke: str = "#000") -> None:
		self.parts.append(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" stroke="{stroke}"/>\n')

	def polyline(self, points: Iterable[tuple[float, float]], stroke: str, **extra: str) -> None:
		self.parts.append(
			f'<polyline points="{_points(points)}" fill="none" stroke="{stroke}"{_attrs(extra)}/>\n'
		)

	def polygon(self, points: Iterable[tuple[float, float]], fill: str, **extra: str) -> None:
		self.parts.append(f'<polygon points="{_points(points)}" fill="{fill}"{_attrs(extra)}/>\n')

	def text(self, x: float, y: float, string: str, size: int = 11, anchor: str = "start") -> None:
		self.parts.append(
			f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" text-anchor="{anchor}">{escape(string)}</text>\n'
		)

	def render(self) -> str:
		return "".join(self.parts) + "</svg>\n"
