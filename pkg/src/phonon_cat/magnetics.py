"""On-axis field of two coaxial, uniformly magnetized cylinders and design maps.

Each cylinder (radius R, length L, magnetization along +z) is equivalent to a
solenoidal surface current ``K = M_s``; its axial field at axial distance
``u`` from an end face follows from ``f(u) = u / sqrt(u^2 + R^2)``:

    B(zeta) = (mu0 Ms / 2) [f(zeta + L/2) - f(zeta - L/2)]

with ``zeta`` measured from the cylinder center.  The two magnets sit on
either side of a gap, centered at ``z = -(gap + L)/2`` and ``z = +(gap + L)/2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources

import numpy as np

from .model import (
    DeviceParams,
    cooperativity,
    g1_from_device,
    g2_from_device,
    thermal_occupation,
)


@lru_cache(maxsize=1)
def material_table() -> dict[str, dict]:
    with resources.files("phonon_cat").joinpath("data/materials.json").open() as fh:
        return json.load(fh)


def saturation(material: str) -> float:
    """``mu0 M_s`` in tesla."""
    table = material_table()
    if material not in table:
        raise KeyError(f"unknown material {material!r}; known: {sorted(table)}")
    return float(table[material]["mu0_Ms_T"])


@dataclass(frozen=True)
class MagnetPair:
    radius: float
    length: float
    gap: float
    mu0_Ms: float

    def __post_init__(self):
        for name in ("radius", "length", "gap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @classmethod
    def of(cls, material: str, radius=15e-9, length=150e-9, gap=30e-9) -> "MagnetPair":
        return cls(radius, length, gap, saturation(material))

    @property
    def centers(self) -> tuple[float, float]:
        c = 0.5 * (self.gap + self.length)
        return -c, c

    def with_(self, **changes) -> "MagnetPair":
        return replace(self, **changes)


@dataclass(frozen=True)
class GradientReport:
    B0: float
    G1: float
    G2: float
    offset: float


def _f(u, R):
    return u / np.sqrt(u * u + R * R)


def _f1(u, R):
    return R * R / (u * u + R * R) ** 1.5


def _f2(u, R):
    return -3.0 * u * R * R / (u * u + R * R) ** 2.5


def _check_inside(pair: MagnetPair, z):
    z = np.asarray(z, dtype=float)
    if np.any(np.abs(z) >= pair.gap / 2):
        raise ValueError("evaluation point lies inside (or on) the magnet material")


def single_cylinder_field(mu0_Ms: float, radius: float, length: float, zeta, order: int = 0):
    """Axial field (or its ``order``-th z-derivative) of one cylinder, ``zeta`` from its center."""
    fn = (_f, _f1, _f2)[order]
    zeta = np.asarray(zeta, dtype=float)
    return 0.5 * mu0_Ms * (fn(zeta + length / 2, radius) - fn(zeta - length / 2, radius))


def _pair_sum(pair: MagnetPair, z, order: int):
    lo, hi = pair.centers
    return (single_cylinder_field(pair.mu0_Ms, pair.radius, pair.length, z - lo, order)
            + single_cylinder_field(pair.mu0_Ms, pair.radius, pair.length, z - hi, order))


def on_axis_field(pair: MagnetPair, z_from_gap_center):
    """``B_z`` in tesla on the common axis at distance ``z`` from the gap center."""
    _check_inside(pair, z_from_gap_center)
    out = _pair_sum(pair, z_from_gap_center, 0)
    return float(out) if np.ndim(out) == 0 else out


def gradients(pair: MagnetPair, offset: float = 0.0) -> GradientReport:
    """Field, first and second axial derivatives by analytic differentiation."""
    _check_inside(pair, offset)
    return GradientReport(
        B0=float(_pair_sum(pair, offset, 0)),
        G1=float(_pair_sum(pair, offset, 1)),
        G2=float(_pair_sum(pair, offset, 2)),
        offset=float(offset),
    )


def device_with_gradients(dev: DeviceParams, pair: MagnetPair, offset: float = 0.0) -> DeviceParams:
    rep = gradients(pair, offset)
    return dev.with_(G2=abs(rep.G2), G1=rep.G1)


def coupling_map(dev_template: DeviceParams, z_zpf_values, Q_values) -> dict:
    """Grid of ``g2`` and cooperativity over ``(z_zpf, Q)``.

    Returns arrays ``g2[i]`` (per ``z_zpf``), ``C[i, j]`` and the ``C = 1``
    contour as ``Q_threshold[i]``, the quality factor at which ``C = 1`` for
    each ``z_zpf`` (``C`` is linear in ``Q`` at fixed ``n_th``).
    """
    z = np.asarray(z_zpf_values, dtype=float)
    Q = np.asarray(Q_values, dtype=float)
    if np.any(z <= 0) or np.any(Q <= 0):
        raise ValueError("sweep ranges must be positive")
    n_th = thermal_occupation(dev_template.omega_m, dev_template.T)
    g2 = np.array([g2_from_device(dev_template.with_(z_zpf=zz)) for zz in z])
    C = np.array([[cooperativity(g, dev_template.gamma_z, dev_template.omega_m / q, n_th)
                   for q in Q] for g in g2])
    # C scales as Q: C(Q) = C(Q_ref) Q / Q_ref
    Q_thr = np.array([Q[0] / C[i, 0] for i in range(len(z))])
    return {"z_zpf": z, "Q": Q, "g2": g2, "C": C, "Q_threshold": Q_thr, "n_th": n_th}


def gap_sweep(material: str, gaps, z_zpf: float, radius=15e-9, length=150e-9) -> dict:
    """``G2`` and ``g2`` versus gap for one material."""
    gaps = np.asarray(gaps, dtype=float)
    reps = [gradients(MagnetPair.of(material, radius, length, g)) for g in gaps]
    G2 = np.array([abs(r.G2) for r in reps])
    g2 = np.array([g2_from_device(_probe(z_zpf, r)) for r in reps])
    return {"gap": gaps, "G2": G2, "g2": g2}


def offset_sweep(pair: MagnetPair, offsets, z_zpf: float) -> dict:
    """First- and second-order couplings versus axial offset from the gap center."""
    offsets = np.asarray(offsets, dtype=float)
    reps = [gradients(pair, o) for o in offsets]
    g1 = np.array([g1_from_device(_probe(z_zpf, r)) for r in reps])
    g2 = np.array([g2_from_device(_probe(z_zpf, r)) for r in reps])
    return {"offset": offsets, "G1": np.array([r.G1 for r in reps]),
            "G2": np.array([r.G2 for r in reps]), "g1": g1, "g2": g2}


def _probe(z_zpf: float, rep: GradientReport) -> DeviceParams:
    # only z_zpf and the gradients enter the coupling formulas
    return DeviceParams(z_zpf=z_zpf, omega_m=1.0, Q=1.0, T=1.0, gamma_z=0.0,
                        G2=abs(rep.G2), G1=rep.G1)
