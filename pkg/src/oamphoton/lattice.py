"""Lattice geometry: cavity/OAM/polarization site labels and flat indexing.

The simulated system is a rectangular lattice whose x axis enumerates
cavities ``j`` and whose y axis enumerates orbital-angular-momentum (OAM)
values ``l`` inside a truncation window ``[l_min, l_max]``.  An optional
two-state polarization index ``s`` doubles every site.  All matrices in the
package are expressed over the flat index produced here, with ``s`` varying
fastest, then ``l``, then ``j``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Boundary",
    "LatticeSpec",
    "SiteIndex",
    "flat_index",
    "site_of",
    "neighbors",
    "column_of_index",
    "l_of_index",
    "spin_of_index",
]


class Boundary(enum.Enum):
    """Boundary closure of one lattice axis."""

    OPEN = "open"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of the simulated lattice.

    Parameters
    ----------
    n_x
        Number of cavities (lattice columns), at least 1.
    l_min, l_max
        Endpoints of the OAM truncation window, ``l_min <= l_max``.
    spin_dim
        1 for scalar lattices, 2 when polarization is tracked.
    bc_x, bc_y
        Boundary closure along the cavity axis and the OAM axis.  A
        periodic OAM axis identifies ``l_max + 1`` with ``l_min``.
    """

    n_x: int
    l_min: int = -50
    l_max: int = 50
    spin_dim: int = 1
    bc_x: Boundary = Boundary.OPEN
    bc_y: Boundary = Boundary.OPEN

    def __post_init__(self) -> None:
        if self.n_x < 1:
            raise ValueError(f"n_x must be >= 1, got {self.n_x}")
        if self.l_min > self.l_max:
            raise ValueError(f"l_min={self.l_min} exceeds l_max={self.l_max}")
        if self.spin_dim not in (1, 2):
            raise ValueError(f"spin_dim must be 1 or 2, got {self.spin_dim}")
        for name in ("bc_x", "bc_y"):
            if not isinstance(getattr(self, name), Boundary):
                raise ValueError(f"{name} must be a Boundary member")

    @property
    def n_l(self) -> int:
        """Length of the OAM window (the y period when ``bc_y`` is periodic)."""
        return self.l_max - self.l_min + 1

    @property
    def dim(self) -> int:
        """Total Hilbert-space dimension ``n_x * n_l * spin_dim``."""
        return self.n_x * self.n_l * self.spin_dim

    @property
    def l_values(self) -> np.ndarray:
        """All OAM values in the window, ascending."""
        return np.arange(self.l_min, self.l_max + 1)


@dataclass(frozen=True)
class SiteIndex:
    """One lattice mode: cavity ``j``, OAM ``l``, polarization ``s``."""

    j: int
    l: int
    s: int = 0


def _check_site(spec: LatticeSpec, site: SiteIndex) -> None:
    if not 0 <= site.j < spec.n_x:
        raise ValueError(f"cavity index {site.j} outside [0, {spec.n_x})")
    if not spec.l_min <= site.l <= spec.l_max:
        raise ValueError(
            f"OAM index {site.l} outside [{spec.l_min}, {spec.l_max}]"
        )
    if not 0 <= site.s < spec.spin_dim:
        raise ValueError(f"spin index {site.s} outside [0, {spec.spin_dim})")


def flat_index(spec: LatticeSpec, site: SiteIndex) -> int:
    """Map a site to its flat matrix index (``s`` fastest, then ``l``, then ``j``)."""
    _check_site(spec, site)
    return (site.j * spec.n_l + (site.l - spec.l_min)) * spec.spin_dim + site.s


def site_of(spec: LatticeSpec, index: int) -> SiteIndex:
    """Inverse of :func:`flat_index`."""
    if not 0 <= index < spec.dim:
        raise ValueError(f"flat index {index} outside [0, {spec.dim})")
    index, s = divmod(index, spec.spin_dim)
    j, il = divmod(index, spec.n_l)
    return SiteIndex(j=j, l=il + spec.l_min, s=s)


def neighbors(spec: LatticeSpec, site: SiteIndex) -> list[tuple[str, SiteIndex]]:
    """Nearest neighbors of a site as ``(direction, site)`` pairs.

    Directions are ``"+x"``, ``"-x"``, ``"+y"``, ``"-y"``.  Under open
    boundaries the out-of-lattice neighbor is omitted; under periodic
    boundaries it wraps modulo the axis length.
    """
    _check_site(spec, site)
    out: list[tuple[str, SiteIndex]] = []
    for direction, dj in (("+x", 1), ("-x", -1)):
        j = site.j + dj
        if 0 <= j < spec.n_x:
            out.append((direction, SiteIndex(j, site.l, site.s)))
        elif spec.bc_x is Boundary.PERIODIC:
            out.append((direction, SiteIndex(j % spec.n_x, site.l, site.s)))
    for direction, dl in (("+y", 1), ("-y", -1)):
        l = site.l + dl
        if spec.l_min <= l <= spec.l_max:
            out.append((direction, SiteIndex(site.j, l, site.s)))
        elif spec.bc_y is Boundary.PERIODIC:
            il = (l - spec.l_min) % spec.n_l
            out.append((direction, SiteIndex(site.j, il + spec.l_min, site.s)))
    return out


def column_of_index(spec: LatticeSpec) -> np.ndarray:
    """Cavity index ``j`` for every flat index, as an integer vector."""
    return np.repeat(np.arange(spec.n_x), spec.n_l * spec.spin_dim)


def l_of_index(spec: LatticeSpec) -> np.ndarray:
    """OAM value ``l`` for every flat index, as an integer vector."""
    per_column = np.repeat(spec.l_values, spec.spin_dim)
    return np.tile(per_column, spec.n_x)


def spin_of_index(spec: LatticeSpec) -> np.ndarray:
    """Polarization index ``s`` for every flat index, as an integer vector."""
    return np.tile(np.arange(spec.spin_dim), spec.n_x * spec.n_l)
