"""Tight-binding Hamiltonian builders for gauge-field lattices.

All Hamiltonians are Hermitian matrices over the flat site basis of
:mod:`oamphoton.lattice`, in units of the nearest-neighbor coupling
``kappa = 1``.  Phases are specified in cycles and enter as
``exp(i*2*pi*phase)``; spinful hops carry 2x2 Jones matrices
``exp(i*2*pi*(phase + angle * sigma.n))``.

Builders provided:

* :func:`build_landau_hofstadter` -- uniform flux with the phase on the
  OAM-axis hops, winding with the cavity index.
* :func:`build_oam_gauge_hofstadter` -- the same flux with the phase on
  the cavity-axis hops, winding with the OAM value (gauge-equivalent on
  commensurate tori).
* :func:`build_non_abelian` -- general spinful lattice with Jones-matrix
  hop phases and per-cavity on-site energies.
* :func:`build_dirac` -- lattice regularization of a two-component Dirac
  point, optionally threaded by a uniform flux.
* :func:`build_qsh` -- the staggered-flux spin lattice whose band gap
  closes and reopens as the polarization-splitting offset is tuned.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np
import scipy.sparse

from .lattice import Boundary, LatticeSpec

__all__ = [
    "DENSE_DIM_LIMIT",
    "SpinAxis",
    "GaugeConfig",
    "HamiltonianMatrix",
    "jones_exp",
    "build_landau_hofstadter",
    "build_oam_gauge_hofstadter",
    "build_non_abelian",
    "build_dirac",
    "build_qsh",
    "apply_onsite_disorder",
]

DENSE_DIM_LIMIT = 4096
"""Matrices up to this dimension are stored dense, larger ones sparse."""

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class SpinAxis:
    """A unit 3-vector selecting a Pauli combination ``sigma . n``."""

    n: tuple[float, float, float]

    def __post_init__(self) -> None:
        norm = float(np.linalg.norm(self.n))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"axis must be unit norm, got |n| = {norm}")

    @classmethod
    def x(cls) -> "SpinAxis":
        return cls((1.0, 0.0, 0.0))

    @classmethod
    def y(cls) -> "SpinAxis":
        return cls((0.0, 1.0, 0.0))

    @classmethod
    def z(cls) -> "SpinAxis":
        return cls((0.0, 0.0, 1.0))

    def sigma(self) -> np.ndarray:
        """The 2x2 Hermitian matrix ``sigma . n``."""
        return sum(c * p for c, p in zip(self.n, _PAULI))


def jones_exp(phi: float, axis: SpinAxis) -> np.ndarray:
    """Jones matrix ``exp(i*2*pi*phi*(sigma.n))`` for a phase in cycles.

    Equals ``cos(2*pi*phi) I + i sin(2*pi*phi) (sigma.n)``; unitary with
    determinant 1.
    """
    if not isinstance(axis, SpinAxis):
        axis = SpinAxis(tuple(axis))
    angle = 2.0 * np.pi * phi
    return np.cos(angle) * np.eye(2, dtype=complex) + 1j * np.sin(angle) * axis.sigma()


def _per_cavity(values: Mapping[int, float] | Callable[[int], float] | float | None,
                n_x: int, default: float = 0.0) -> np.ndarray:
    """Normalize a per-cavity parameter to a length-``n_x`` float vector."""
    if values is None:
        return np.full(n_x, default)
    if callable(values):
        return np.array([float(values(j)) for j in range(n_x)])
    if isinstance(values, Mapping):
        out = np.full(n_x, default)
        for j, v in values.items():
            if not 0 <= int(j) < n_x:
                raise ValueError(f"cavity index {j} outside [0, {n_x})")
            out[int(j)] = float(v)
        return out
    return np.full(n_x, float(values))


@dataclass(frozen=True)
class GaugeConfig:
    """Hop phases and on-site energies of the general spinful lattice.

    All phases are in cycles.  Cavity-axis hops ``j -> j+1`` carry
    ``exp(i*2*pi*(phi_x + alpha * sigma.axis1))``; OAM-axis hops
    ``l -> l+1`` inside cavity ``j`` carry
    ``exp(i*2*pi*(phi_y(j) + beta(j) * sigma.axis2))``; every mode of
    cavity ``j`` is detuned by ``onsite(j)``.

    ``flux`` optionally records a rational flux per plaquette ``p/q``
    (stored reduced); it is carried for bookkeeping (validation, Bloch
    analysis), not applied implicitly by the builders.
    """

    phi_x: float = 0.0
    phi_y: Mapping[int, float] | Callable[[int], float] | float | None = None
    alpha: float = 0.0
    beta: Mapping[int, float] | Callable[[int], float] | float | None = None
    axis1: SpinAxis = SpinAxis.x()
    axis2: SpinAxis = SpinAxis.z()
    onsite: Mapping[int, float] | Callable[[int], float] | float | None = None
    flux: Fraction | None = None

    def __post_init__(self) -> None:
        if self.flux is not None and not isinstance(self.flux, Fraction):
            object.__setattr__(self, "flux", Fraction(self.flux))


@dataclass(frozen=True)
class HamiltonianMatrix:
    """A Hermitian lattice Hamiltonian with its geometry.

    ``data`` is a dense complex array for dimensions up to
    :data:`DENSE_DIM_LIMIT` and a CSR sparse matrix above that.  Energies
    are in units of the nearest-neighbor coupling.
    """

    spec: LatticeSpec
    data: np.ndarray | scipy.sparse.csr_matrix

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def is_dense(self) -> bool:
        return isinstance(self.data, np.ndarray)

    def toarray(self) -> np.ndarray:
        """The Hamiltonian as a dense complex array."""
        if self.is_dense:
            return np.asarray(self.data)
        return self.data.toarray()

    def hermiticity_defect(self) -> float:
        """Max-norm of ``H - H^dagger`` (should be < 1e-12)."""
        delta = self.data - self.data.conj().T
        if self.is_dense:
            return float(np.abs(delta).max())
        delta = scipy.sparse.coo_matrix(delta)
        return float(np.abs(delta.data).max()) if delta.nnz else 0.0


class _Assembler:
    """Accumulates hop blocks and diagonal terms, then freezes the matrix."""

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[complex] = []

    def add(self, row: int, col: int, val: complex) -> None:
        self.rows.append(row)
        self.cols.append(col)
        self.vals.append(val)

    def add_hop(self, src: int, dst: int, block: np.ndarray) -> None:
        """Add ``block`` mapping src -> dst and its Hermitian conjugate."""
        sd = self.spec.spin_dim
        for a in range(sd):
            for b in range(sd):
                v = block[a, b] if sd == 2 else complex(block)
                if v != 0:
                    self.add(dst + a, src + b, v)
                    self.add(src + b, dst + a, np.conj(v))

    def finish(self) -> HamiltonianMatrix:
        dim = self.spec.dim
        coo = scipy.sparse.coo_matrix(
            (self.vals, (self.rows, self.cols)), shape=(dim, dim), dtype=complex
        )
        if dim <= DENSE_DIM_LIMIT:
            return HamiltonianMatrix(self.spec, coo.toarray())
        return HamiltonianMatrix(self.spec, coo.tocsr())


def _iter_x_hops(spec: LatticeSpec):
    """Yield base flat indices ``(src, dst, j_src)`` for hops ``j -> j+1``."""
    sd, n_l = spec.spin_dim, spec.n_l
    stride = n_l * sd
    for j in range(spec.n_x if spec.bc_x is Boundary.PERIODIC else spec.n_x - 1):
        jn = (j + 1) % spec.n_x
        for il in range(n_l):
            yield (j * n_l + il) * sd, (jn * n_l + il) * sd, j


def _iter_y_hops(spec: LatticeSpec):
    """Yield base flat indices ``(src, dst, j, l_src)`` for hops ``l -> l+1``."""
    sd, n_l = spec.spin_dim, spec.n_l
    n_y = n_l if spec.bc_y is Boundary.PERIODIC else n_l - 1
    for j in range(spec.n_x):
        for il in range(n_y):
            iln = (il + 1) % n_l
            yield (j * n_l + il) * sd, (j * n_l + iln) * sd, j, spec.l_min + il


def build_landau_hofstadter(spec: LatticeSpec, phi0: float | Fraction) -> HamiltonianMatrix:
    """Uniform-flux lattice with cavity-indexed phases on the OAM-axis hops.

    ``H = -sum_{j,l} ( exp(i*2*pi*j*phi0) a^dag_{j,l+1} a_{j,l}
    + a^dag_{j+1,l} a_{j,l} + h.c. )`` with ``phi0`` flux quanta per
    plaquette, in units of the hop amplitude.  Requires a scalar lattice.
    """
    if spec.spin_dim != 1:
        raise ValueError("scalar builder requires spin_dim = 1")
    phi0 = float(phi0)
    asm = _Assembler(spec)
    for src, dst, _ in _iter_x_hops(spec):
        asm.add_hop(src, dst, -1.0)
    for src, dst, j, _ in _iter_y_hops(spec):
        asm.add_hop(src, dst, -np.exp(2j * np.pi * j * phi0))
    return asm.finish()


def build_oam_gauge_hofstadter(spec: LatticeSpec, phi0: float | Fraction) -> HamiltonianMatrix:
    """Uniform-flux lattice with OAM-indexed phases on the cavity-axis hops.

    ``H = -sum_{j,l} ( a^dag_{j,l+1} a_{j,l}
    + exp(-i*2*pi*l*phi0) a^dag_{j+1,l} a_{j,l} + h.c. )``.  Carries the
    same flux per plaquette as :func:`build_landau_hofstadter`; on tori
    whose dimensions are multiples of the flux denominator the two share
    a spectrum.  This gauge keeps a periodic OAM axis seamless only when
    the window length times ``phi0`` is an integer.
    """
    if spec.spin_dim != 1:
        raise ValueError("scalar builder requires spin_dim = 1")
    phi0 = float(phi0)
    asm = _Assembler(spec)
    for src, dst, j in _iter_x_hops(spec):
        l = (src // spec.spin_dim) % spec.n_l + spec.l_min
        asm.add_hop(src, dst, -np.exp(-2j * np.pi * l * phi0))
    for src, dst, _, _ in _iter_y_hops(spec):
        asm.add_hop(src, dst, -1.0)
    return asm.finish()


def build_non_abelian(spec: LatticeSpec, cfg: GaugeConfig) -> HamiltonianMatrix:
    """General spinful lattice with Jones-matrix hop phases.

    Cavity-axis hops carry ``exp(i*2*pi*(phi_x + alpha*sigma.axis1))``,
    OAM-axis hops in cavity ``j`` carry
    ``exp(i*2*pi*(phi_y(j) + beta(j)*sigma.axis2))``, and each cavity is
    detuned by ``onsite(j)``; hop amplitude ``-1``.
    """
    if spec.spin_dim != 2:
        raise ValueError("spinful builder requires spin_dim = 2")
    phi_y = _per_cavity(cfg.phi_y, spec.n_x)
    beta = _per_cavity(cfg.beta, spec.n_x)
    onsite = _per_cavity(cfg.onsite, spec.n_x)
    u_x = np.exp(2j * np.pi * cfg.phi_x) * jones_exp(cfg.alpha, cfg.axis1)
    u_y = [
        np.exp(2j * np.pi * phi_y[j]) * jones_exp(beta[j], cfg.axis2)
        for j in range(spec.n_x)
    ]
    asm = _Assembler(spec)
    for src, dst, _ in _iter_x_hops(spec):
        asm.add_hop(src, dst, -u_x)
    for src, dst, j, _ in _iter_y_hops(spec):
        asm.add_hop(src, dst, -u_y[j])
    for j in range(spec.n_x):
        if onsite[j] != 0.0:
            base = j * spec.n_l * spec.spin_dim
            for k in range(spec.n_l * spec.spin_dim):
                asm.add(base + k, base + k, onsite[j])
    return asm.finish()


def build_dirac(spec: LatticeSpec, phi0: float | Fraction = 0.0) -> HamiltonianMatrix:
    """Two-component lattice with a conical (Dirac) spectrum at zero flux.

    OAM-axis hops carry ``i exp(i*2*pi*j*phi0) sigma_x`` and cavity-axis
    hops ``i sigma_y`` (amplitude ``-1``), so at ``phi0 = 0`` the torus
    dispersion is ``E = +/- 2 sqrt(sin^2 kx + sin^2 ky)``.
    """
    phi0 = float(phi0)
    cfg = GaugeConfig(
        alpha=0.25, axis1=SpinAxis.y(),
        beta=0.25, axis2=SpinAxis.x(),
        phi_y=lambda j: j * phi0,
    )
    return build_non_abelian(spec, cfg)


def qsh_onsite(lambda0: float) -> Callable[[int], float]:
    """Per-cavity staircase detuning ``lambda0 * (mod(j,4) - 1.5)``."""
    return lambda j: lambda0 * ((j % 4) - 1.5)


def build_qsh(spec: LatticeSpec, beta0: float, lambda0: float) -> HamiltonianMatrix:
    """Staggered-flux spin lattice with a tunable polarization offset.

    OAM-axis hops in cavity ``j`` carry
    ``exp(i*(pi*j/2 + 2*pi*beta0) sigma_z)`` (i.e. opposite flux
    ``+/- 1/4`` for the two polarizations, offset by ``beta0`` cycles),
    cavity-axis hops carry ``i sigma_x``, and the on-site staircase is
    ``lambda0 * (mod(j,4) - 1.5)``.  Sweeping ``beta0`` from 0 to 0.125
    closes and reopens the low-frequency band gap.
    """
    cfg = GaugeConfig(
        alpha=0.25, axis1=SpinAxis.x(),
        beta=lambda j: j / 4.0 + beta0, axis2=SpinAxis.z(),
        onsite=qsh_onsite(lambda0),
    )
    return build_non_abelian(spec, cfg)


def apply_onsite_disorder(
    H: HamiltonianMatrix, deltas: Mapping[int, float] | np.ndarray
) -> HamiltonianMatrix:
    """Return ``H`` with ``deltas[j]`` added to every diagonal of cavity ``j``."""
    spec = H.spec
    delta_vec = _per_cavity(
        deltas if not isinstance(deltas, np.ndarray) else dict(enumerate(deltas)),
        spec.n_x,
    )
    per_index = np.repeat(delta_vec, spec.n_l * spec.spin_dim)
    if H.is_dense:
        data = H.data + np.diag(per_index)
    else:
        data = (H.data + scipy.sparse.diags(per_index)).tocsr()
    return HamiltonianMatrix(spec, data)
