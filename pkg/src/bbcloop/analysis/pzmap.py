"""Pole-zero stability classification in the s- or z-plane."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from ..lti import TransferFunction

BOUNDARY_TOL = 1e-9
# Roots this close to the boundary print as lying on it at four significant figures.
NEAR_TOL = 1e-4


class Stability(str, enum.Enum):
    STABLE = "stable"
    MARGINALLY_STABLE = "marginally_stable"
    UNSTABLE = "unstable"


class Location(str, enum.Enum):
    EXTERIOR = "exterior"
    BOUNDARY = "boundary"
    NEAR_BOUNDARY = "near_boundary"


@dataclass(frozen=True)
class Offender:
    kind: str  # "pole" or "zero"
    value: complex
    location: Location


@dataclass(frozen=True)
class PoleZeroReport:
    poles: tuple[complex, ...]
    zeros: tuple[complex, ...]
    classification: Stability
    offenders: tuple[Offender, ...]
    ts: float | None = None

    def offenders_of(self, kind: str, location: Location | None = None) -> list[Offender]:
        return [o for o in self.offenders if o.kind == kind and (location is None or o.location == location)]


def boundary_distance(root: complex, discrete: bool) -> float:
    """Signed distance from the stability boundary; positive means unstable side."""
    if discrete:
        return abs(root) - 1.0
    return root.real / max(1.0, abs(root))


def _locate(d: float, tol: float, near: float) -> Location | None:
    if d > tol:
        return Location.EXTERIOR
    if d >= -tol:
        return Location.BOUNDARY
    if d >= -near:
        return Location.NEAR_BOUNDARY
    return None


def pole_zero_report(
    g: TransferFunction, boundary_tol: float = BOUNDARY_TOL, near_tol: float = NEAR_TOL
) -> PoleZeroReport:
    poles = tuple(g.poles())
    zeros = tuple(g.zeros())
    discrete = g.is_discrete
    offenders = []
    on_boundary = []
    unstable = False
    for kind, roots in (("pole", poles), ("zero", zeros)):
        for r in roots:
            loc = _locate(boundary_distance(r, discrete), boundary_tol, near_tol)
            if loc is None:
                continue
            offenders.append(Offender(kind, r, loc))
            if kind == "pole":
                if loc is Location.EXTERIOR:
                    unstable = True
                elif loc is Location.BOUNDARY:
                    on_boundary.append(r)
    # repeated boundary poles grow polynomially
    for i, a in enumerate(on_boundary):
        if any(abs(a - b) <= 1e-6 for b in on_boundary[i + 1 :]):
            unstable = True
    if unstable:
        cls = Stability.UNSTABLE
    elif on_boundary:
        cls = Stability.MARGINALLY_STABLE
    else:
        cls = Stability.STABLE
    return PoleZeroReport(poles, zeros, cls, tuple(offenders), g.ts)
