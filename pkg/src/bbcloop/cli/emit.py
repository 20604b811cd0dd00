"""CSV and SVG writers for step, bode, pole-zero and simulation data."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..analysis import FrequencyResponse, PoleZeroReport, TimeSeries  # noqa: E402
from ..simloop import SimTrace  # noqa: E402

# fixed ids and no timestamp keep repeated SVG output byte-identical
matplotlib.rcParams["svg.hashsalt"] = "bbcloop"
matplotlib.rcParams["svg.fonttype"] = "none"
_SVG_META = {"Date": None, "Creator": None}


class EmitError(OSError):
    pass


def _num(x: float) -> str:
    # shortest repr that round-trips
    return repr(float(x))


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    rows = list(rows)
    if not rows:
        raise EmitError(f"refusing to write {path}: no data")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from None
    return path


def write_step_csv(path, ts: TimeSeries) -> Path:
    return _write_rows(path, ["t", "y"], ((_num(t), _num(y)) for t, y in zip(ts.times, ts.values)))


def write_bode_csv(path, fr: FrequencyResponse) -> Path:
    return _write_rows(
        path,
        ["omega_rad_s", "mag_db", "phase_deg"],
        ((_num(w), _num(m), _num(p)) for w, m, p in fr.rows()),
    )


def write_pzmap_csv(path, rep: PoleZeroReport) -> Path:
    rows = [("pole", _num(r.real), _num(r.imag)) for r in rep.poles]
    rows += [("zero", _num(r.real), _num(r.imag)) for r in rep.zeros]
    return _write_rows(path, ["kind", "re", "im"], rows)


def write_trace_csv(path, tr: SimTrace) -> Path:
    g = "{:.9g}".format
    rows = (
        (g(t), g(i), g(v), g(d), m, g(e), g(ea))
        for t, i, v, d, m, e, ea in zip(tr.t, tr.i_L, tr.v_C, tr.duty, tr.mode, tr.v_error, tr.v_ea)
    )
    return _write_rows(path, ["t", "i_L", "v_C", "duty", "mode", "v_error", "v_ea"], rows)


def write_summary_csv(path, rows) -> Path:
    def cell(x):
        if isinstance(x, float):
            return _num(x)
        return "" if x is None else str(x)

    return _write_rows(
        path,
        ["id", "reproduced", "published", "rel_delta", "verdict", "criterion", "anchor"],
        ((r.id, cell(r.reproduced), cell(r.published), cell(r.rel_delta), r.verdict, cell(r.criterion), r.anchor) for r in rows),
    )


def _save(fig, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata=_SVG_META)
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from None
    finally:
        plt.close(fig)
    return path


def write_step_svg(path, ts: TimeSeries, title: str = "") -> Path:
    if len(ts) == 0:
        raise EmitError("empty time series")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts.times, ts.values, lw=1)
    ax.set_xlabel("t (s)")
    ax.set_ylabel("y")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def write_bode_svg(path, fr: FrequencyResponse, title: str = "") -> Path:
    if len(fr.omega) == 0:
        raise EmitError("empty sweep")
    fig, (a1, a2) = plt.subplots(2, 1, sharex=True, figsize=(6, 6))
    a1.semilogx(fr.omega, fr.mag_db, lw=1)
    a1.set_ylabel("magnitude (dB)")
    a1.set_title(title)
    a2.semilogx(fr.omega, fr.phase_deg, lw=1)
    a2.set_ylabel("phase (deg)")
    a2.set_xlabel("omega (rad/s)")
    for a in (a1, a2):
        a.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def write_pzmap_svg(path, rep: PoleZeroReport, title: str = "") -> Path:
    if not rep.poles and not rep.zeros:
        raise EmitError("no poles or zeros to plot")
    fig, ax = plt.subplots(figsize=(5, 5))
    if rep.ts is not None:
        th = [2 * math.pi * k / 360 for k in range(361)]
        ax.plot([math.cos(t) for t in th], [math.sin(t) for t in th], "k:", lw=0.8)
        ax.set_aspect("equal", adjustable="datalim")
    else:
        ax.axvline(0.0, color="k", lw=0.8, ls=":")
    ax.scatter([p.real for p in rep.poles], [p.imag for p in rep.poles], marker="x", label="pole")
    ax.scatter(
        [z.real for z in rep.zeros], [z.imag for z in rep.zeros], marker="o", facecolors="none", edgecolors="C1", label="zero"
    )
    ax.set_xlabel("real")
    ax.set_ylabel("imag")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def write_trace_svg(path, tr: SimTrace, title: str = "") -> Path:
    if len(tr) == 0:
        raise EmitError("empty trace")
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(6, 7))
    for ax, y, label in zip(axes, (tr.v_C, tr.i_L, tr.duty), ("v_C (V)", "i_L (A)", "duty")):
        ax.plot(tr.t, y, lw=1)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    axes[0].set_title(title)
    axes[-1].set_xlabel("t (s)")
    return _save(fig, path)
