"""Render regret / ratio / comparison charts from experiment summary CSVs.

Input schema (one row per round, written by the experiment harness):

    round,cum_regret_mean,cum_regret_std,ratio_mean

A plot spec is a JSON object::

    {
      "kind": "regret" | "ratio" | "comparison",
      "inputs": ["results/figure1_d8_summary.csv", ...],
      "labels": ["d = 8", ...],          # optional, defaults to file stems
      "output": "figure1.png",           # .png written, .svg alongside
      "title": "optional title",
      "style_version": 1                 # must match the committed style
    }

Rendering is read-only on its inputs and deterministic for fixed inputs and
style version (fixed SVG hash salt, no timestamp metadata).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

STYLE_VERSION = 1
_STYLE_FILE = Path(__file__).with_name("style.mplstyle")
_KINDS = ("regret", "ratio", "comparison")

EXPECTED_HEADER = ["round", "cum_regret_mean", "cum_regret_std", "ratio_mean"]


class PlotSpecError(ValueError):
    """Raised for malformed specs or inputs that do not match the schema."""


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    inputs: tuple[str, ...]
    output: str
    labels: tuple[str, ...] = ()
    title: str = ""
    style_version: int = STYLE_VERSION

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise PlotSpecError(f"unknown chart kind {self.kind!r}; expected one of {_KINDS}")
        if not self.inputs:
            raise PlotSpecError("plot spec needs at least one input CSV")
        if self.labels and len(self.labels) != len(self.inputs):
            raise PlotSpecError("labels must match inputs one to one")
        if self.style_version != STYLE_VERSION:
            raise PlotSpecError(
                f"spec styled for version {self.style_version}, renderer is {STYLE_VERSION}"
            )

    @classmethod
    def from_file(cls, path) -> "PlotSpec":
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        if not isinstance(raw, dict):
            raise PlotSpecError("plot spec must be a JSON object")
        known = {"kind", "inputs", "output", "labels", "title", "style_version"}
        unknown = set(raw) - known
        if unknown:
            raise PlotSpecError(f"unknown spec fields: {sorted(unknown)}")
        try:
            return cls(
                kind=raw["kind"],
                inputs=tuple(raw["inputs"]),
                output=raw["output"],
                labels=tuple(raw.get("labels", ())),
                title=raw.get("title", ""),
                style_version=raw.get("style_version", STYLE_VERSION),
            )
        except KeyError as exc:
            raise PlotSpecError(f"plot spec missing field {exc.args[0]!r}") from exc


def read_summary(path) -> dict[str, np.ndarray]:
    """Load one summary CSV, validating the documented header."""
    path = Path(path)
    if not path.exists():
        raise PlotSpecError(f"input CSV not found: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != EXPECTED_HEADER:
            raise PlotSpecError(f"unexpected CSV header in {path}: {header}")
        rows = [[float(v) for v in row] for row in reader]
    if not rows:
        raise PlotSpecError(f"no data rows in {path}")
    data = np.asarray(rows)
    return {name: data[:, i] for i, name in enumerate(EXPECTED_HEADER)}


def _labels_for(spec: PlotSpec) -> list[str]:
    if spec.labels:
        return list(spec.labels)
    return [Path(p).stem.replace("_summary", "") for p in spec.inputs]


def render(spec: PlotSpec) -> list[Path]:
    """Draw the chart and write both PNG and SVG next to ``spec.output``."""
    series = [read_summary(p) for p in spec.inputs]
    labels = _labels_for(spec)

    with plt.style.context(str(_STYLE_FILE)):
        with plt.rc_context({"svg.hashsalt": f"figplots-v{STYLE_VERSION}"}):
            fig, ax = plt.subplots()
            for data, label in zip(series, labels):
                rounds = data["round"]
                if spec.kind == "ratio":
                    ax.plot(rounds, data["ratio_mean"], label=label)
                else:
                    mean, std = data["cum_regret_mean"], data["cum_regret_std"]
                    ax.plot(rounds, mean, label=label)
                    ax.fill_between(rounds, mean - std, mean + std, alpha=0.25, linewidth=0)
            ax.set_xlabel("round")
            if spec.kind == "ratio":
                ax.set_ylabel("cumulative regret / theoretical growth rate")
            else:
                ax.set_ylabel("cumulative regret")
            if spec.title:
                ax.set_title(spec.title)
            ax.legend()
            fig.tight_layout()

            out_png = Path(spec.output).with_suffix(".png")
            out_svg = out_png.with_suffix(".svg")
            out_png.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(out_png, metadata={"Software": None})
            fig.savefig(out_svg, metadata={"Date": None, "Creator": None})
            plt.close(fig)
    return [out_png, out_svg]


def render_file(spec_path) -> list[Path]:
    return render(PlotSpec.from_file(spec_path))
