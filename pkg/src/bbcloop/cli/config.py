"""Scenario configuration: YAML ingestion, validation and default resolution."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from ..controller import PidGains
from ..plant import ConverterParams, OperatingMode
from ..simloop import Disturbance, ModePolicy, SimConfig
from ..systems import (
    Controller,
    Domain,
    PlantSource,
    default_feedback_gain,
    default_gains,
    default_sample_time,
)


class ConfigError(ValueError):
    """Schema violation in a scenario file or on the command line."""


TOP_KEYS = {
    "converter",
    "mode",
    "domain",
    "controller",
    "gains",
    "sample_time",
    "feedback_gain",
    "plant_source",
    "step_horizon",
    "freq_decades",
    "points_per_decade",
    "sim",
}
GAIN_KEYS = {"kp", "ki", "kd", "n"}


@dataclass(frozen=True)
class ScenarioConfig:
    converter: ConverterParams = field(default_factory=ConverterParams)
    mode: OperatingMode = OperatingMode.BOOST
    domain: Domain = Domain.ANALOG
    controller: Controller = Controller.PIDN
    gains: PidGains | None = None
    sample_time: float | None = None
    feedback_gain: float | None = None
    plant_source: PlantSource = PlantSource.SCRIPT
    step_horizon: float | None = None
    freq_decades: tuple[float, float] | None = None  # log10 of the sweep bounds in rad/s
    points_per_decade: int = 1000
    sim: SimConfig | None = None

    def resolved(self) -> ScenarioConfig:
        """Copy with every default made explicit."""
        gains = self.gains
        if gains is None and self.controller is not Controller.NONE:
            gains = default_gains(self.mode, self.controller)
        ts = self.sample_time
        if ts is None and self.domain is Domain.DIGITAL:
            ts = default_sample_time(self.mode)
        h = self.feedback_gain
        if h is None:
            h = default_feedback_gain(self.mode, self.domain, self.controller)
        sim = self.sim or SimConfig(mode=self.mode)
        return replace(self, gains=gains, sample_time=ts, feedback_gain=h, sim=sim)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "converter": asdict(self.converter),
            "mode": self.mode.value,
            "domain": self.domain.value,
            "controller": self.controller.value,
            "gains": asdict(self.gains) if self.gains else None,
            "sample_time": self.sample_time,
            "feedback_gain": self.feedback_gain,
            "plant_source": self.plant_source.value,
            "step_horizon": self.step_horizon,
            "freq_decades": list(self.freq_decades) if self.freq_decades else None,
            "points_per_decade": self.points_per_decade,
        }
        if self.sim is not None:
            sim = {}
            for f in fields(SimConfig):
                v = getattr(self.sim, f.name)
                if hasattr(v, "value"):
                    v = v.value
                elif f.name == "disturbances":
                    v = [[d.time, d.parameter, d.value] for d in v]
                elif isinstance(v, PidGains):
                    v = asdict(v)
                elif isinstance(v, tuple):
                    v = list(v)
                sim[f.name] = v
            out["sim"] = sim
        return out


def _check_keys(section: str, data: Any, allowed: set[str]) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected a mapping, got {type(data).__name__}")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {', '.join(unknown)}")
    return data


def _enum(kind, value, key):
    try:
        return kind(value)
    except ValueError:
        choices = ", ".join(m.value for m in kind)
        raise ConfigError(f"{key}: {value!r} is not one of {choices}") from None


def _number(value, key, positive=False):
    value = _as_number(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{key}: must be positive")
    return float(value)


def _build_sim(data: dict, mode: OperatingMode) -> SimConfig:
    allowed = {f.name for f in fields(SimConfig)}
    _check_keys("sim", data, allowed)
    kw = dict(data)
    kw.setdefault("mode", mode.value)
    if "mode_policy" in kw:
        kw["mode_policy"] = _enum(ModePolicy, kw["mode_policy"], "sim.mode_policy")
    if "initial_state" in kw and kw["initial_state"] is not None:
        kw["initial_state"] = tuple(_number(x, "sim.initial_state") for x in kw["initial_state"])
    if "disturbances" in kw:
        try:
            kw["disturbances"] = tuple(Disturbance(float(t), str(p), float(v)) for t, p, v in kw["disturbances"])
        except (TypeError, ValueError):
            raise ConfigError("sim.disturbances: expected a list of [time, parameter, value]") from None
    if kw.get("other_mode_gains") is not None:
        kw["other_mode_gains"] = _build_gains(kw["other_mode_gains"], "sim.other_mode_gains")
    try:
        return SimConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sim: {exc}") from None


def _build_gains(data: Any, section: str = "gains") -> PidGains:
    _check_keys(section, data, GAIN_KEYS)
    missing = GAIN_KEYS - set(data)
    if missing:
        raise ConfigError(f"{section}: missing key(s) {', '.join(sorted(missing))}")
    try:
        return PidGains(**{k: _number(v, f"{section}.{k}") for k, v in data.items()})
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def config_from_dict(data: dict | None) -> ScenarioConfig:
    data = _check_keys("config", data or {}, TOP_KEYS)
    kw: dict[str, Any] = {}
    if "converter" in data:
        conv = _check_keys("converter", data["converter"], {f.name for f in fields(ConverterParams)})
        try:
            kw["converter"] = ConverterParams(**{k: _number(v, f"converter.{k}") for k, v in conv.items()})
        except ValueError as exc:
            raise ConfigError(f"converter: {exc}") from None
    for key, kind in (("mode", OperatingMode), ("domain", Domain), ("controller", Controller), ("plant_source", PlantSource)):
        if key in data:
            kw[key] = _enum(kind, data[key], key)
    if data.get("gains") is not None:
        kw["gains"] = _build_gains(data["gains"])
    for key in ("sample_time", "step_horizon"):
        if data.get(key) is not None:
            kw[key] = _number(data[key], key, positive=True)
    if data.get("feedback_gain") is not None:
        kw["feedback_gain"] = _number(data["feedback_gain"], "feedback_gain")
    if data.get("freq_decades") is not None:
        fd = data["freq_decades"]
        if not isinstance(fd, (list, tuple)) or len(fd) != 2:
            raise ConfigError("freq_decades: expected [lo, hi]")
        lo, hi = (_number(x, "freq_decades") for x in fd)
        if not lo < hi:
            raise ConfigError("freq_decades: lo must be below hi")
        kw["freq_decades"] = (lo, hi)
    if "points_per_decade" in data:
        ppd = data["points_per_decade"]
        if isinstance(ppd, bool) or not isinstance(ppd, int) or ppd < 400:
            raise ConfigError("points_per_decade: expected an integer >= 400")
        kw["points_per_decade"] = ppd
    if data.get("sim") is not None:
        kw["sim"] = _build_sim(data["sim"], kw.get("mode", OperatingMode.BOOST))
    return ScenarioConfig(**kw)


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    return config_from_dict(data)


def _as_number(x):
    # YAML 1.1 reads exponents without a sign (1.5e6) as strings
    if isinstance(x, str):
        try:
            return float(x)
        except ValueError:
            return x
    return x


def published_data() -> dict:
    text = resources.files("bbcloop").joinpath("data/published.yaml").read_text()
    data = yaml.safe_load(text)
    for row in data["rows"]:
        row["published"] = _as_number(row["published"])
        row["tolerance"] = {k: _as_number(v) for k, v in row["tolerance"].items()}
    return data


def provenance_for(cfg: ScenarioConfig) -> dict[str, str]:
    """Anchor behind every default in the resolved config."""
    prov = published_data()["provenance"]
    mode = cfg.mode.value
    if cfg.domain is Domain.ANALOG:
        fb = prov[f"feedback_gain.{mode}.analog"]
    elif cfg.mode is OperatingMode.BOOST and cfg.controller is Controller.PIDN:
        fb = prov["feedback_gain.boost.digital.pidn"]
    else:
        fb = prov["feedback_gain.digital"]
    out = {
        "converter": prov["converter"],
        "mode": prov["mode"],
        "domain": prov["domain"],
        "controller": prov["controller"],
        "gains": prov[f"gains.{mode}"],
        "sample_time": prov[f"sample_time.{mode}"],
        "feedback_gain": fb,
        "plant_source": prov["plant_source"],
        "step_horizon": prov["step_horizon"],
        "freq_decades": prov["freq_decades"],
        "points_per_decade": prov["points_per_decade"],
    }
    for f in fields(SimConfig):
        key = "sim.duty_limits" if f.name in ("duty_min", "duty_max") else f"sim.{f.name}"
        out[f"sim.{f.name}"] = prov[key]
    return out


def dump_config(cfg: ScenarioConfig, provenance: bool = False) -> str:
    data = cfg.to_dict()
    if provenance:
        data["provenance"] = provenance_for(cfg)
    return yaml.safe_dump(data, sort_keys=False)
