"""Lumped-vortex thin-airfoil labels, with mirror vortices for ground effect.

Each straight panel of the camber line carries one point vortex at its
quarter point; flow tangency is enforced at its three-quarter point. Vortex
strengths are clockwise-positive so that positive circulation gives positive
lift in a freestream running along +x. In ground-effect mode every vortex gets
an opposite-sign image mirrored across y = 0, which makes the ground a
streamline exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import GroundContact, NonPositiveClearance, SingularSystem
from .geometry import AirfoilGeometry, camber_line, rotate

PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class DragPolar:
    """Parabolic surrogate polar cd = cd0 + k * cl**2 (not a measured polar)."""

    cd0: float = 0.008
    k: float = 0.01

    def __post_init__(self):
        if not self.cd0 > 0 or self.k < 0:
            raise ValueError("need cd0 > 0 and k >= 0")


@dataclass(frozen=True)
class OracleConfig:
    panels: int = 200
    ground_effect: bool = True
    polar: DragPolar = DragPolar()


@dataclass(frozen=True, eq=False)
class PanelSystem:
    nodes: np.ndarray
    vortices: np.ndarray
    collocation: np.ndarray
    normals: np.ndarray
    ground: bool
    gamma: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.vortices.shape[0]

    def influence_matrix(self) -> np.ndarray:
        c, v, nrm = self.collocation, self.vortices, self.normals
        return kernels.vortex_influence(
            np.ascontiguousarray(c[:, 0]), np.ascontiguousarray(c[:, 1]),
            np.ascontiguousarray(nrm[:, 0]), np.ascontiguousarray(nrm[:, 1]),
            np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1]),
            self.ground,
        )

    def rhs(self, u_inf: float = 1.0) -> np.ndarray:
        return -u_inf * self.normals[:, 0]


@dataclass(frozen=True)
class AeroLabel:
    cl: float
    cd: float
    ratio: float

    @classmethod
    def from_cl(cls, cl, polar=DragPolar()):
        cd = drag_estimate(cl, polar)
        return cls(float(cl), cd, float(cl) / cd)


def build_panels(nodes, aoa_deg, ground_clearance=None, datum_y=None) -> PanelSystem:
    """Panelize a body-frame camber line at an angle of attack.

    ``ground_clearance=None`` selects free air and leaves the line where the
    rotation puts it. Otherwise the line is lifted so that ``datum_y`` (the
    lowest point of the full section after rotation; the lowest camber point
    by default) sits at the requested clearance.
    """
    nodes = rotate(np.asarray(nodes, dtype=np.float64), aoa_deg)
    ground = ground_clearance is not None
    if ground:
        if not ground_clearance > 0:
            raise NonPositiveClearance(f"ground clearance must be > 0, got {ground_clearance}")
        low = nodes[:, 1].min() if datum_y is None else datum_y
        nodes[:, 1] += ground_clearance - low
        if np.any(nodes[:, 1] <= 0.0):
            raise GroundContact(f"camber line touches the ground at aoa {aoa_deg}")
    seg = nodes[1:] - nodes[:-1]
    length = np.hypot(seg[:, 0], seg[:, 1])
    if np.any(length <= 0):
        raise ValueError("zero-length panel")
    tangent = seg / length[:, None]
    normals = np.column_stack([-tangent[:, 1], tangent[:, 0]])
    return PanelSystem(
        nodes=nodes,
        vortices=nodes[:-1] + 0.25 * seg,
        collocation=nodes[:-1] + 0.75 * seg,
        normals=normals,
        ground=ground,
    )


def solve_circulations(system: PanelSystem, u_inf: float = 1.0) -> np.ndarray:
    a = system.influence_matrix()
    lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    if np.min(np.abs(np.diag(lu))) < PIVOT_TOL:
        raise SingularSystem("pivot below 1e-12 in influence matrix factorization")
    return scipy.linalg.lu_solve((lu, piv), system.rhs(u_inf))


def solve(system: PanelSystem, u_inf: float = 1.0) -> PanelSystem:
    gamma = solve_circulations(system, u_inf)
    return PanelSystem(system.nodes, system.vortices, system.collocation,
                       system.normals, system.ground, gamma)


def residual(system: PanelSystem, u_inf: float = 1.0) -> float:
    return float(np.max(np.abs(system.influence_matrix() @ system.gamma - system.rhs(u_inf))))


def induced_velocity(system: PanelSystem, points, gamma=None) -> np.ndarray:
    """Velocity (u, v) induced at ``points`` by the vortices and their images."""
    gamma = system.gamma if gamma is None else np.asarray(gamma, dtype=np.float64)
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    xv, yv = system.vortices[:, 0], system.vortices[:, 1]
    dx = p[:, 0, None] - xv[None, :]
    dy = p[:, 1, None] - yv[None, :]
    r2 = dx * dx + dy * dy
    u = (gamma * dy / (2 * np.pi * r2)).sum(axis=1)
    v = (-gamma * dx / (2 * np.pi * r2)).sum(axis=1)
    if system.ground:
        dyi = p[:, 1, None] + yv[None, :]
        r2i = dx * dx + dyi * dyi
        u += (-gamma * dyi / (2 * np.pi * r2i)).sum(axis=1)
        v += (gamma * dx / (2 * np.pi * r2i)).sum(axis=1)
    return np.column_stack([u, v])


def lift_coefficient(system_or_gamma, u_inf: float = 1.0, chord: float = 1.0) -> float:
    """Kutta-Joukowski: cl = 2 * sum(gamma) / (U c)."""
    gamma = getattr(system_or_gamma, "gamma", system_or_gamma)
    return 2.0 * float(np.sum(gamma)) / (u_inf * chord)


def drag_estimate(cl: float, polar: DragPolar = DragPolar()) -> float:
    return polar.cd0 + polar.k * cl * cl


def label(g: AirfoilGeometry, aoa_deg: float, ground_clearance: float | None = None,
          n: int = 200, *, ground_effect: bool = True, polar: DragPolar = DragPolar()) -> AeroLabel:
    """Lift, surrogate drag and their ratio for a normalized section.

    In ground-effect mode the camber line gets the same vertical offset that
    :func:`afdc.geometry.pose` applies to the full section, so the label and
    the rendered image describe one configuration.
    """
    nodes = camber_line(g, n)
    if ground_effect and ground_clearance is not None:
        lowest = rotate(g.points, aoa_deg)[:, 1].min()
        system = build_panels(nodes, aoa_deg, ground_clearance, datum_y=lowest)
    else:
        system = build_panels(nodes, aoa_deg, None)
    gamma = solve_circulations(system)
    cl = lift_coefficient(gamma)
    if not math.isfinite(cl):
        raise SingularSystem("non-finite lift")
    return AeroLabel.from_cl(cl, polar)


def label_with(g: AirfoilGeometry, aoa_deg: float, ground_clearance: float,
               config: OracleConfig = OracleConfig()) -> AeroLabel:
    return label(g, aoa_deg, ground_clearance, config.panels,
                 ground_effect=config.ground_effect, polar=config.polar)
