"""Builders for the plant, controller and closed-loop systems of each scenario."""

from __future__ import annotations

import enum

from .controller import ControllerKind, PidGains, pidn_transfer, preset
from .lti import TransferFunction, tf_feedback, tf_series, tustin_discretize
from .plant import ConverterParams, OperatingMode, plant_transfer, script_plant


class Domain(str, enum.Enum):
    ANALOG = "analog"
    DIGITAL = "digital"


class Controller(str, enum.Enum):
    NONE = "none"
    PID = "pid"
    PIDN = "pidn"


class PlantSource(str, enum.Enum):
    # "script": rounded-pole ZPK plants that the published closed loops were computed from
    SCRIPT = "script"
    DERIVED = "derived"


def default_gains(mode: OperatingMode | str, controller: Controller | str) -> PidGains:
    return preset(f"{OperatingMode(mode).value}-{Controller(controller).value}")


def default_sample_time(mode: OperatingMode | str) -> float:
    return 1e-5 if OperatingMode(mode) is OperatingMode.BOOST else 0.1


def default_feedback_gain(mode, domain, controller) -> float:
    mode, domain, controller = OperatingMode(mode), Domain(domain), Controller(controller)
    if domain is Domain.ANALOG:
        return 0.5 if mode is OperatingMode.BOOST else 2.0
    if mode is OperatingMode.BOOST and controller is Controller.PIDN:
        return 0.5
    return 1.0


def plant_for(
    mode: OperatingMode | str,
    source: PlantSource | str = PlantSource.SCRIPT,
    params: ConverterParams | None = None,
) -> TransferFunction:
    if PlantSource(source) is PlantSource.SCRIPT:
        return script_plant(mode)
    return plant_transfer(params or ConverterParams(), mode)


def controller_for(gains: PidGains) -> TransferFunction:
    return pidn_transfer(gains)


def closed_loop(
    mode: OperatingMode | str,
    domain: Domain | str,
    controller: Controller | str,
    feedback_gain: float,
    sample_time: float | None = None,
    gains: PidGains | None = None,
    source: PlantSource | str = PlantSource.SCRIPT,
    params: ConverterParams | None = None,
) -> TransferFunction:
    """Controller and plant in series, closed through a static feedback gain.

    With ``controller="none"`` the bare plant is returned (no feedback path).
    Digital systems discretize plant and controller separately with Tustin.
    """
    domain, controller = Domain(domain), Controller(controller)
    g = plant_for(mode, source, params)
    c = None
    if controller is not Controller.NONE:
        c = controller_for(gains or default_gains(mode, controller))
    if domain is Domain.DIGITAL:
        ts = sample_time if sample_time is not None else default_sample_time(mode)
        g = tustin_discretize(g, ts)
        c = tustin_discretize(c, ts) if c is not None else None
    if c is None:
        return g
    return tf_feedback(tf_series(c, g), feedback_gain)


__all__ = [
    "ControllerKind",
    "Domain",
    "Controller",
    "PlantSource",
    "closed_loop",
    "controller_for",
    "default_feedback_gain",
    "default_gains",
    "default_sample_time",
    "plant_for",
]
