"""Regeneration of the published tables with per-row deltas and verdicts."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ..analysis import pole_zero_report, stability_margins, step_metrics, step_response
from ..controller import pidn_transfer, preset
from ..lti import real_factors, second_order_character, tf_to_zpk, tustin_discretize
from ..plant import ConverterParams, OperatingMode, plant_transfer, script_plant
from ..simloop import SimConfig, simulate_closed_loop, small_signal_consistency
from ..systems import closed_loop
from .config import published_data

MODES = ("boost", "buck")

# Feedback gain and sample time behind each published group.  They differ from
# row to row; each value is the one that reproduces the printed numbers.
ANALOG_ZPK_GAIN = {"boost": 0.5, "buck": 2.0}
ANALOG_MARGIN_GAIN = {("boost", "pid"): 0.5, ("boost", "pidn"): 0.5, ("buck", "pid"): 1.0, ("buck", "pidn"): 1.0}
DIGITAL_ZPK = {"boost": (1e-5, 1.0), "buck": (0.1, 1.0)}
DIGITAL_MARGIN_TS = 0.1
DIGITAL_MARGIN_GAIN = {("boost", "pid"): 1.0, ("boost", "pidn"): 0.5, ("buck", "pid"): 1.0, ("buck", "pidn"): 1.0}


@dataclass(frozen=True)
class SummaryRow:
    id: str
    anchor: str
    reproduced: Any
    published: Any
    rel_delta: float | None
    verdict: str  # "pass", "fail" or "footnote"
    criterion: int | None

    @property
    def gated(self) -> bool:
        return self.criterion is not None and self.verdict != "footnote"


def _match(published: list[float], roots: list[complex]) -> list[float]:
    """Pair each published real root with a distinct nearest reproduced real root."""
    pool = [r.real for r in roots if r.imag == 0.0]
    out = []
    for target in published:
        if not pool:
            out.append(math.nan)
            continue
        j = min(range(len(pool)), key=lambda k: abs(pool[k] - target))
        out.append(pool.pop(j))
    return out


def _quad(roots: list[complex]) -> tuple[float, float]:
    quads = [f for f in real_factors(roots) if len(f) == 2]
    return quads[0] if quads else (math.nan, math.nan)


def _coeff_rows(prefix: str, poly, var: str, out: dict) -> None:
    deg = poly.degree
    for i, c in enumerate(poly.coeffs):
        out[f"{prefix}.{var}{deg - i}"] = c


def _zpk_rows(prefix: str, g, published: dict[str, Any], out: dict) -> None:
    z = tf_to_zpk(g)
    out[f"{prefix}.gain"] = z.gain
    for kind, roots in (("zero", list(z.zeros)), ("pole", list(z.poles))):
        ids = [k for k in published if k.startswith(f"{prefix}.{kind}.")]
        for k, v in zip(ids, _match([published[k] for k in ids], roots)):
            out[k] = v
    b, c = _quad(list(z.poles))
    out[f"{prefix}.quad.b"] = b
    out[f"{prefix}.quad.c"] = c


def _plants(out: dict, published) -> None:
    p = ConverterParams()
    for mode in MODES:
        g = plant_transfer(p, mode)
        _coeff_rows(f"plant.{mode}.num", g.num, "s", out)
        _coeff_rows(f"plant.{mode}.den", g.den, "s", out)


def _controllers(out: dict, published) -> None:
    for mode in MODES:
        for kind in ("pid", "pidn"):
            c = pidn_transfer(preset(f"{mode}-{kind}"))
            _coeff_rows(f"ctrl.{mode}.{kind}.num", c.num, "s", out)
            _coeff_rows(f"ctrl.{mode}.{kind}.den", c.den, "s", out)


def _analog_loops(out: dict, published) -> None:
    for mode in MODES:
        for kind in ("pid", "pidn"):
            g = closed_loop(mode, "analog", kind, ANALOG_ZPK_GAIN[mode])
            _zpk_rows(f"cl.analog.{mode}.{kind}", g, published, out)
            ch = second_order_character(g)
            out[f"char.{mode}.{kind}.zeta"] = ch.zeta
            out[f"char.{mode}.{kind}.wn"] = ch.omega_n


def _digital(out: dict, published) -> None:
    for mode in MODES:
        ts, h = DIGITAL_ZPK[mode]
        gd = tustin_discretize(script_plant(mode), ts)
        if mode == "boost":
            out["tustin.boost.plant.gain"] = gd.num.leading
            _coeff_rows("tustin.boost.plant.den", gd.den, "z", out)
        else:
            _zpk_rows("tustin.buck.plant", gd, published, out)
        for kind in ("pid", "pidn"):
            cd = tustin_discretize(pidn_transfer(preset(f"{mode}-{kind}")), ts)
            _coeff_rows(f"tustin.{mode}.{kind}.num", cd.num, "z", out)
            _coeff_rows(f"tustin.{mode}.{kind}.den", cd.den, "z", out)
            g = closed_loop(mode, "digital", kind, h, ts)
            _zpk_rows(f"cl.digital.{mode}.{kind}", g, published, out)


def _step_group(mode: str) -> Callable[[dict, Any], None]:
    def run(out: dict, published) -> None:
        for kind in ("none", "pid", "pidn"):
            g = closed_loop(mode, "analog", kind, ANALOG_ZPK_GAIN[mode])
            m = step_metrics(step_response(g))
            pre = f"step.{mode}.{kind}"
            out[f"{pre}.peak"] = m.peak_amplitude
            out[f"{pre}.overshoot"] = m.overshoot_pct
            out[f"{pre}.rise"] = m.rise_time
            out[f"{pre}.settling"] = m.settling_time
            out[f"{pre}.final"] = m.final_value
            if mode == "boost" and kind == "none":
                out[f"{pre}.overshoot_oracle"] = m.overshoot_pct

    return run


def _margin_rows(prefix: str, g, out: dict) -> None:
    rep = stability_margins(g)
    for i, m in enumerate(rep.phase_margins):
        out[f"{prefix}.pm.{i}"] = m.pm_deg
        out[f"{prefix}.wp.{i}"] = m.omega
        out[f"{prefix}.dm.{i}"] = m.delay
    for i, m in enumerate(rep.gain_margins):
        out[f"{prefix}.gm.{i}"] = m.gm_db
        out[f"{prefix}.wg.{i}"] = m.omega
    if rep.gain_margins:
        out[f"{prefix}.wg.0b"] = rep.gain_margins[-1].omega
    out[f"{prefix}.pm"] = rep.pm
    out[f"{prefix}.gm"] = rep.gm


def _margins(out: dict, published) -> None:
    for mode in MODES:
        _margin_rows(f"margin.analog.{mode}.none", closed_loop(mode, "analog", "none", 0.0), out)
        _margin_rows(f"margin.digital.{mode}.none", closed_loop(mode, "digital", "none", 0.0, DIGITAL_MARGIN_TS), out)
        for kind in ("pid", "pidn"):
            g = closed_loop(mode, "analog", kind, ANALOG_MARGIN_GAIN[(mode, kind)])
            _margin_rows(f"margin.analog.{mode}.{kind}", g, out)
            g = closed_loop(mode, "digital", kind, DIGITAL_MARGIN_GAIN[(mode, kind)], DIGITAL_MARGIN_TS)
            _margin_rows(f"margin.digital.{mode}.{kind}", g, out)


def _pole_zero(out: dict, published) -> None:
    for mode in MODES:
        for kind in ("none", "pid", "pidn"):
            out[f"pz.analog.{mode}.{kind}"] = pole_zero_report(
                closed_loop(mode, "analog", kind, ANALOG_ZPK_GAIN[mode])
            ).classification.value
            ts, h = DIGITAL_ZPK[mode]
            rep = pole_zero_report(closed_loop(mode, "digital", kind, h, ts))
            out[f"pz.digital.{mode}.{kind}"] = rep.classification.value
            if mode == "buck" and kind == "pid":
                ext = [o.value.real for o in rep.offenders_of("zero") if o.location.value == "exterior"]
                edge = [o.value.real for o in rep.offenders_of("pole") if o.location.value != "exterior"]
                out["pz.digital.buck.pid.exterior_zero"] = ext[0] if ext else math.nan
                out["pz.digital.buck.pid.boundary_pole"] = edge[0] if edge else math.nan


def _simulation(out: dict, published) -> None:
    p = ConverterParams()
    gains = preset("boost-pidn")
    cfg = SimConfig(mode=OperatingMode.BOOST, horizon=0.2)
    tr = simulate_closed_loop(p, gains, cfg)
    w = tr.window()
    v = float(np.mean(tr.v_C[w]))
    i = float(np.mean(tr.i_L[w]))
    out["sim.boost.v_C"] = v
    out["sim.boost.i_load"] = v / p.R_load
    out["sim.boost.duty"] = float(np.mean(tr.duty[w]))
    out["sim.boost.power_balance"] = p.v_batt * i / (v * v / p.R_load)
    out["sim.boost.small_signal"] = small_signal_consistency(p, gains, cfg.with_(horizon=0.1), 0.25).max_deviation
    tb = simulate_closed_loop(p, preset("buck-pidn"), SimConfig(mode=OperatingMode.BUCK, horizon=0.2))
    vb = float(np.mean(tb.v_C[tb.window()]))
    out["sim.buck.v_C"] = vb
    out["sim.buck.i_batt"] = vb / p.R_batt


GROUPS = (_plants, _controllers, _analog_loops, _digital, _step_group("boost"), _step_group("buck"), _margins, _pole_zero, _simulation)


def reproduce(workers: int = 1) -> dict[str, Any]:
    rows = published_data()["rows"]
    published = {r["id"]: r["published"] for r in rows}
    parts: list[dict] = [{} for _ in GROUPS]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda k: GROUPS[k](parts[k], published), range(len(GROUPS))))
    else:
        for k, fn in enumerate(GROUPS):
            fn(parts[k], published)
    merged: dict[str, Any] = {}
    for part in parts:
        merged.update(part)
    return merged


def _judge(value: Any, published: Any, tol: dict) -> tuple[float | None, bool]:
    if isinstance(published, str) or isinstance(value, str):
        return None, value == published
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None, False
    value, published = float(value), float(published)
    if math.isinf(published) or math.isinf(value):
        return (0.0 if value == published else math.inf), value == published
    rel = (value - published) / abs(published) if published else math.inf
    if "equal" in tol:
        return rel, value == published
    if "rel" in tol:
        return rel, abs(rel) <= tol["rel"]
    if "sig" in tol:
        return rel, abs(rel) <= 5.0 * 10.0 ** (-tol["sig"])
    if "abs" in tol:
        return rel, abs(value - published) <= tol["abs"]
    if "max" in tol:
        return rel, value <= published
    if "footnote" in tol:
        return rel, False
    raise ValueError(f"unknown tolerance {tol!r}")


def summary(workers: int = 1) -> list[SummaryRow]:
    values = reproduce(workers)
    out = []
    for r in published_data()["rows"]:
        tol = r["tolerance"]
        val = values.get(r["id"])
        if isinstance(val, (np.floating, np.integer)):
            val = float(val)
        rel, ok = _judge(val, r["published"], tol)
        verdict = "footnote" if "footnote" in tol else ("pass" if ok else "fail")
        out.append(SummaryRow(r["id"], r["anchor"], val, r["published"], rel, verdict, r.get("criterion")))
    return out


def _fmt(x: Any) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        if math.isinf(x):
            return "Inf" if x > 0 else "-Inf"
        if math.isnan(x):
            return "NaN"
        return f"{x:.4g}"
    return str(x)


def format_summary(rows: list[SummaryRow]) -> str:
    header = ["id", "reproduced", "published", "rel delta", "verdict", "anchor"]
    body = [
        [r.id, _fmt(r.reproduced), _fmt(r.published), _fmt(r.rel_delta), r.verdict if r.gated or r.verdict == "footnote" else f"{r.verdict} (info)", r.anchor]
        for r in rows
    ]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(x.ljust(w) for x, w in zip(line, widths)).rstrip() for line in [header, *body]]
    failed = [r for r in rows if r.gated and r.verdict == "fail"]
    gated = sum(r.gated for r in rows)
    lines.append("")
    lines.append(f"{gated - len(failed)}/{gated} gated rows within tolerance")
    return "\n".join(lines)


def write_bundle(out_dir: Path, rows: list[SummaryRow]) -> list[Path]:
    """Summary CSV plus step, bode and pole-zero CSVs of every analysed system."""
    from .emit import write_bode_csv, write_pzmap_csv, write_step_csv, write_summary_csv
    from ..analysis import default_grid, frequency_response

    out_dir = Path(out_dir)
    files = [write_summary_csv(out_dir / "summary.csv", rows)]
    for mode in MODES:
        for kind in ("none", "pid", "pidn"):
            g = closed_loop(mode, "analog", kind, ANALOG_ZPK_GAIN[mode])
            name = f"analog_{mode}_{kind}"
            files.append(write_step_csv(out_dir / f"step_{name}.csv", step_response(g)))
            files.append(write_pzmap_csv(out_dir / f"pzmap_{name}.csv", pole_zero_report(g)))
            files.append(write_bode_csv(out_dir / f"bode_{name}.csv", frequency_response(g, default_grid(g))))
            ts, h = DIGITAL_ZPK[mode]
            gd = closed_loop(mode, "digital", kind, h, ts)
            name = f"digital_{mode}_{kind}"
            files.append(write_pzmap_csv(out_dir / f"pzmap_{name}.csv", pole_zero_report(gd)))
            files.append(write_bode_csv(out_dir / f"bode_{name}.csv", frequency_response(gd, default_grid(gd))))
    return files
