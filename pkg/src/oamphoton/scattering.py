"""Steady-state input-output transmission through the lattice.

A monochromatic drive entering one mode ``n`` at detuning ``omega`` leaves
the system through every mode ``n'`` with amplitude

``T_{n'n} = -i [sqrt(G) (omega - H + i G/2)^{-1} sqrt(G)]_{n'n}``,

where ``G = diag(gamma_n)`` collects the input/output coupling rates.  The
full scattering row adds the direct reflection ``delta_{n'n}``; for uniform
rates and Hermitian ``H`` that row is exactly unit norm.

Solvers: dense and sparse direct factorizations up to
:data:`DIRECT_SOLVE_LIMIT`, a preconditioned Krylov iteration above it, and
an eigendecomposition fast path for frequency sweeps at uniform decay
(exact -- same resolvent, evaluated in the eigenbasis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .lattice import LatticeSpec, SiteIndex, flat_index
from .hamiltonians import HamiltonianMatrix

__all__ = [
    "DIRECT_SOLVE_LIMIT",
    "DecaySpec",
    "ScatteringResult",
    "default_omega_grid",
    "greens_apply",
    "transmission",
    "s_matrix_row",
    "total_transmission_spectrum",
    "butterfly_scan",
    "spectral_factorization",
    "eig_transmission_vector",
]

DIRECT_SOLVE_LIMIT = 6000
"""Largest dimension solved by direct factorization; Krylov above."""

RESIDUAL_RTOL = 1e-10
"""Relative residual bound enforced on every linear solve."""


@dataclass(frozen=True)
class DecaySpec:
    """Input/output coupling rates, uniform or per mode (units of the hop).

    Use :meth:`uniform` or :meth:`per_mode`; all rates must be positive.
    """

    gamma: float | None = None
    rates: np.ndarray | None = None

    def __post_init__(self) -> None:
        if (self.gamma is None) == (self.rates is None):
            raise ValueError("specify exactly one of a uniform rate or a rate vector")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError(f"decay rate must be positive, got {self.gamma}")
        if self.rates is not None:
            rates = np.asarray(self.rates, dtype=float)
            if rates.ndim != 1 or not np.all(rates > 0):
                raise ValueError("per-mode rates must be a vector of positive values")
            object.__setattr__(self, "rates", rates)

    @classmethod
    def uniform(cls, gamma: float) -> "DecaySpec":
        return cls(gamma=float(gamma))

    @classmethod
    def per_mode(cls, rates: np.ndarray) -> "DecaySpec":
        return cls(rates=np.asarray(rates, dtype=float))

    @property
    def is_uniform(self) -> bool:
        return self.gamma is not None

    def rate_vector(self, dim: int) -> np.ndarray:
        """All coupling rates as a length-``dim`` vector."""
        if self.is_uniform:
            return np.full(dim, self.gamma)
        if self.rates.shape[0] != dim:
            raise ValueError(
                f"rate vector length {self.rates.shape[0]} != dimension {dim}"
            )
        return self.rates


@dataclass(frozen=True)
class ScatteringResult:
    """Transmission amplitudes from one input mode to every mode at one ``omega``.

    ``amplitudes[n']`` is ``T_{n', input}``; the direct-reflection delta is
    excluded when ``includes_reflection_delta`` is False (the default).
    """

    omega: float
    input: SiteIndex
    amplitudes: np.ndarray
    includes_reflection_delta: bool = False


def default_omega_grid(n: int = 400, span: float = 4.5) -> np.ndarray:
    """The default probe grid: ``n`` points spanning ``[-span, span]``."""
    return np.linspace(-span, span, n)


def _shifted_operator(H: HamiltonianMatrix, decay: DecaySpec, omega: float):
    """The solve operator ``omega - H + i*diag(rates)/2`` (dense or sparse)."""
    rates = decay.rate_vector(H.dim)
    shift = omega + 0.5j * rates
    if H.is_dense:
        A = -H.data.astype(complex, copy=True)
        A[np.diag_indices_from(A)] += shift
        return A
    return scipy.sparse.diags(shift) - H.data


def _solve(H: HamiltonianMatrix, decay: DecaySpec, omega: float,
           rhs: np.ndarray) -> np.ndarray:
    """Solve ``(omega - H + i G/2) x = rhs`` with a verified residual."""
    A = _shifted_operator(H, decay, omega)
    if H.dim <= DIRECT_SOLVE_LIMIT:
        if H.is_dense:
            x = scipy.linalg.solve(A, rhs)
        else:
            x = scipy.sparse.linalg.spsolve(A.tocsc(), rhs)
    else:
        precond = scipy.sparse.linalg.LinearOperator(
            A.shape, matvec=lambda v: v / A.diagonal()
        )
        x, info = scipy.sparse.linalg.bicgstab(
            A, rhs, rtol=RESIDUAL_RTOL, atol=0.0, M=precond, maxiter=20000
        )
        if info != 0:
            residual = np.linalg.norm(A @ x - rhs)
            raise RuntimeError(
                f"iterative solve did not converge (info={info}, "
                f"residual={residual:.3e})"
            )
    residual = np.linalg.norm(A @ x - rhs)
    bound = RESIDUAL_RTOL * np.linalg.norm(rhs)
    if residual > max(bound, 1e-300):
        raise RuntimeError(
            f"solve residual {residual:.3e} exceeds {bound:.3e} "
            f"(dim={H.dim}, omega={omega})"
        )
    return x


def greens_apply(H: HamiltonianMatrix, decay: DecaySpec, omega: float,
                 input: SiteIndex) -> np.ndarray:
    """The resolvent column ``(omega - H + i G/2)^{-1} e_input``."""
    rhs = np.zeros(H.dim, dtype=complex)
    rhs[flat_index(H.spec, input)] = 1.0
    return _solve(H, decay, omega, rhs)


def transmission(H: HamiltonianMatrix, decay: DecaySpec, omega: float,
                 input: SiteIndex) -> ScatteringResult:
    """Transmission amplitudes ``-i sqrt(G) G(omega) sqrt(G) e_input``."""
    rates = decay.rate_vector(H.dim)
    gamma_in = rates[flat_index(H.spec, input)]
    x = greens_apply(H, decay, omega, input)
    amplitudes = -1j * np.sqrt(rates) * x * np.sqrt(gamma_in)
    return ScatteringResult(omega=omega, input=input, amplitudes=amplitudes)


def s_matrix_row(H: HamiltonianMatrix, decay: DecaySpec, omega: float,
                 input: SiteIndex) -> np.ndarray:
    """One scattering-matrix row ``delta_{n'n} + T_{n'n}``.

    For uniform decay and Hermitian ``H`` the row has 2-norm 1 (checked in
    the test suite, not here); with per-mode rates it is still computed
    but no unitarity holds.
    """
    result = transmission(H, decay, omega, input)
    row = result.amplitudes.copy()
    row[flat_index(H.spec, input)] += 1.0
    return row


def spectral_factorization(H: HamiltonianMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of a dense Hermitian ``H`` (ascending)."""
    return np.linalg.eigh(H.toarray())


def eig_transmission_vector(evals: np.ndarray, evecs: np.ndarray, gamma: float,
                            omega: float, input_index: int) -> np.ndarray:
    """Uniform-decay transmission via the eigenbasis (exact fast path).

    ``T = -i gamma V diag(1/(omega - E + i gamma/2)) V^dag e_in``.
    """
    c = evecs[input_index, :].conj() / (omega - evals + 0.5j * gamma)
    return -1j * gamma * (evecs @ c)


def total_transmission_spectrum(
    H: HamiltonianMatrix,
    decay: DecaySpec,
    inputs: list[SiteIndex],
    omega_grid: np.ndarray | None = None,
) -> np.ndarray:
    """Total transmitted power ``sum_in sum_out |T|^2`` over a probe grid.

    The sum runs over every output mode (the same-mode term included, the
    reflection delta excluded).  With uniform decay and a dense ``H`` the
    sweep uses the eigenbasis identity
    ``sum_out |T|^2 = gamma^2 sum_m |V[in, m]|^2 / ((omega-E_m)^2 + gamma^2/4)``;
    otherwise each frequency is solved directly.
    """
    if omega_grid is None:
        omega_grid = default_omega_grid()
    omega_grid = np.asarray(omega_grid, dtype=float)
    if omega_grid.size == 0:
        raise ValueError("probe grid must be nonempty")
    in_rows = [flat_index(H.spec, s) for s in inputs]
    if decay.is_uniform and H.is_dense:
        evals, evecs = spectral_factorization(H)
        weights = np.zeros(H.dim)
        for r in in_rows:
            weights += np.abs(evecs[r, :]) ** 2
        gamma = decay.gamma
        lorentz = 1.0 / (
            (omega_grid[:, None] - evals[None, :]) ** 2 + 0.25 * gamma**2
        )
        return gamma**2 * (lorentz @ weights)
    out = np.zeros(omega_grid.size)
    for k, omega in enumerate(omega_grid):
        for site in inputs:
            result = transmission(H, decay, float(omega), site)
            out[k] += float(np.sum(np.abs(result.amplitudes) ** 2))
    return out


def butterfly_scan(
    spec: LatticeSpec,
    phi0_list: np.ndarray,
    omega_grid: np.ndarray | None = None,
    decay: DecaySpec | None = None,
    inputs: list[SiteIndex] | None = None,
) -> np.ndarray:
    """Total-transmission rows over a flux list (one lattice per flux).

    Builds the cavity-phase uniform-flux lattice for each ``phi0`` and
    records its :func:`total_transmission_spectrum`; by default the probes
    enter every cavity at OAM 0.
    """
    from .hamiltonians import build_landau_hofstadter

    if decay is None:
        decay = DecaySpec.uniform(0.1)
    if omega_grid is None:
        omega_grid = default_omega_grid()
    if inputs is None:
        inputs = [SiteIndex(j, 0, 0) for j in range(spec.n_x)]
    rows = np.empty((len(phi0_list), np.asarray(omega_grid).size))
    for i, phi0 in enumerate(phi0_list):
        H = build_landau_hofstadter(spec, float(phi0))
        rows[i] = total_transmission_spectrum(H, decay, inputs, omega_grid)
    return rows
