"""Averaged models of the half-bridge bidirectional buck-boost converter.

State vector is (i_L, v_C): inductor current and the voltage on the
capacitor of the output side for the active mode (DC-bus capacitor in boost,
battery-side capacitor in buck).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .lti import StateSpaceModel, TransferFunction, ss_to_tf, zpk_to_tf, ZpkForm


class OperatingMode(str, enum.Enum):
    BOOST = "boost"
    BUCK = "buck"


@dataclass(frozen=True)
class ConverterParams:
    """Physical ratings; defaults are the nominal design values (SI units)."""

    v_bus: float = 24.0
    i_bus: float = 3.0
    v_batt: float = 12.0
    f_sw: float = 20e3
    v_o: float = 24.0
    i_o: float = 2.4
    duty: float = 0.5
    L: float = 1000e-6
    C_bus: float = 250e-6
    R_load: float = 10.0
    C_o: float = 125e-6
    Ns: int = 6
    Np: int = 1
    R_inter: float = 30e-3

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{f.name} must be positive and finite, got {v!r}")
        if not 0 < self.duty < 1:
            raise ValueError(f"duty must lie in (0, 1), got {self.duty}")

    @property
    def R_batt(self) -> float:
        return self.Ns / self.Np * self.R_inter

    def with_(self, **changes) -> ConverterParams:
        return replace(self, **changes)


def boost_state_space(p: ConverterParams) -> StateSpaceModel:
    d, L, C, R = p.duty, p.L, p.C_bus, p.R_load
    A = [[0.0, -(1 - d) / L], [(1 - d) / C, -1 / (R * C)]]
    B = [[1 / L], [0.0]]
    return StateSpaceModel(A, B, np.eye(2), np.zeros((2, 1)))


def buck_state_space(p: ConverterParams) -> StateSpaceModel:
    d, L, C, R = p.duty, p.L, p.C_o, p.R_batt
    A = [[0.0, -1 / L], [1 / C, -1 / (R * C)]]
    B = [[d / L], [0.0]]
    return StateSpaceModel(A, B, np.eye(2), np.zeros((2, 1)))


def state_space(p: ConverterParams, mode: OperatingMode | str) -> StateSpaceModel:
    mode = OperatingMode(mode)
    return boost_state_space(p) if mode is OperatingMode.BOOST else buck_state_space(p)


# Output row of the capacitor voltage; every analysed transfer function is voltage-out.
VOLTAGE_OUTPUT = 1


def plant_transfer(p: ConverterParams, mode: OperatingMode | str) -> TransferFunction:
    return ss_to_tf(state_space(p, mode), 0, VOLTAGE_OUTPUT)


# Rounded-pole plants used by the reference analyses.  The reference
# closed-loop factors and margins follow from these rather than from the
# exactly derived models.
SCRIPT_PLANTS = {
    OperatingMode.BOOST: ZpkForm((), (-200 + 979.79j, -200 - 979.79j), 2e6),
    OperatingMode.BUCK: ZpkForm((), (-180.7, -44259.24), 4e6),
}


def script_plant(mode: OperatingMode | str) -> TransferFunction:
    return zpk_to_tf(SCRIPT_PLANTS[OperatingMode(mode)])


def nonlinear_derivatives(
    p: ConverterParams,
    mode: OperatingMode | str,
    state: tuple[float, float],
    duty_input: float,
) -> tuple[float, float]:
    """Averaged large-signal dynamics with the duty cycle as a live input."""
    if not 0.0 <= duty_input <= 1.0:
        raise ValueError(f"duty must lie in [0, 1], got {duty_input}")
    i_l, v_c = state
    if OperatingMode(mode) is OperatingMode.BOOST:
        u = 1.0 - duty_input
        return (p.v_batt - u * v_c) / p.L, (u * i_l - v_c / p.R_load) / p.C_bus
    return (duty_input * p.v_bus - v_c) / p.L, (i_l - v_c / p.R_batt) / p.C_o


def equilibrium(p: ConverterParams, mode: OperatingMode | str, duty: float) -> tuple[float, float]:
    """Steady state of the averaged model under a constant duty."""
    if OperatingMode(mode) is OperatingMode.BOOST:
        v = p.v_batt / (1.0 - duty)
        return v / (p.R_load * (1.0 - duty)), v
    v = duty * p.v_bus
    return v / p.R_batt, v


def duty_for_output(p: ConverterParams, mode: OperatingMode | str, v_out: float) -> float:
    if OperatingMode(mode) is OperatingMode.BOOST:
        return 1.0 - p.v_batt / v_out
    return v_out / p.v_bus


def duty_linearization(
    p: ConverterParams, mode: OperatingMode | str, duty: float
) -> StateSpaceModel:
    """Small-signal model around the equilibrium, duty perturbation as input."""
    i0, v0 = equilibrium(p, mode, duty)
    if OperatingMode(mode) is OperatingMode.BOOST:
        u = 1.0 - duty
        A = [[0.0, -u / p.L], [u / p.C_bus, -1 / (p.R_load * p.C_bus)]]
        B = [[v0 / p.L], [-i0 / p.C_bus]]
    else:
        A = [[0.0, -1 / p.L], [1 / p.C_o, -1 / (p.R_batt * p.C_o)]]
        B = [[p.v_bus / p.L], [0.0]]
    return StateSpaceModel(A, B, [[0.0, 1.0]], [[0.0]])
