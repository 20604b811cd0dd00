"""Rows of margin tables with a stability-state verdict per system."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..lti import TransferFunction
from .frequency import MarginReport, stability_margins

PM_TARGET = 45.0
GM_TARGET_DB = 10.0


@dataclass(frozen=True)
class MarginRow:
    name: str
    report: MarginReport
    verdict: str


def verdict(report: MarginReport) -> str:
    """Classify by the usual converter targets: 45 deg < PM < 180 deg, GM > 10 dB."""
    if not report.stable_verdict:
        return "Unstable"
    pm = report.pm
    if math.isinf(pm) or pm < PM_TARGET:
        return "Stable with poor dynamic response"
    if report.gm < GM_TARGET_DB:
        return "Stable with low gain margin"
    return "Stable with good dynamic response"


def bode_table_report(systems: Sequence[tuple[str, TransferFunction]]) -> list[MarginRow]:
    rows = []
    for name, g in systems:
        rep = stability_margins(g)
        rows.append(MarginRow(name, rep, verdict(rep)))
    return rows


def _join(values: Sequence[float], fmt: str = "{:.4g}") -> str:
    if not values:
        return "Inf"
    return " and ".join(fmt.format(v) for v in values)


def format_margin_table(rows: Sequence[MarginRow]) -> str:
    unit = "samples" if rows and rows[0].report.ts is not None else "s"
    header = ["System", "PM (deg)", "GM (dB)", "w_g (rad/s)", "w_p (rad/s)", f"Delay margin ({unit})", "Stability state"]
    body = []
    for r in rows:
        rep = r.report
        body.append(
            [
                r.name,
                _join([m.pm_deg for m in rep.phase_margins]),
                _join([m.gm_db for m in rep.gain_margins]),
                _join(rep.omega_g),
                _join(rep.omega_p),
                _join([m.delay for m in rep.phase_margins]),
                r.verdict,
            ]
        )
    widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(line, widths)) for line in [header, *body]]
    return "\n".join(lines)
