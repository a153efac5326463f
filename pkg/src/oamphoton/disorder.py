"""Monte-Carlo disorder studies of the edge transport observable.

Fabrication imperfections enter as Gaussian perturbations of the lattice:
cavity resonance detunings, coupling-amplitude and coupling-phase errors
on the hops, and photon-loss imbalance between OAM modes.  The model
distinguishes three draw granularities (:class:`DisorderScope`):

* ``PER_CAVITY_LINK`` -- one coupling draw per cavity-axis link
  ``j -> j+1`` (the physical splitter is shared by every OAM mode
  crossing it); detunings are drawn per cavity.
* ``PER_OAM_LINK`` -- one coupling draw per OAM-axis link ``(j, l -> l+1)``,
  with the optional OAM envelope evaluated at the link midpoint
  ``l + 1/2`` scaling the error size; detunings are drawn per cavity.
* ``PER_SITE`` -- detunings drawn per lattice site; coupling errors are
  not defined at this granularity and are rejected.

The optional envelope also scales the per-mode loss imbalance (evaluated
at the mode's own ``l``); it never touches cavity-axis links or
detunings.  :func:`saturating_oam_envelope` provides the standard choice
``1 - exp(-(x/width)**2)``, vanishing at ``l = 0`` and saturating at 1
for ``|l|`` well beyond ``width``.

Randomness is counter-based for reproducibility: every consumer accepts
either an integer seed (one ``Philox`` stream) or a ready
``numpy.random.Generator``; the Monte-Carlo driver derives stream ``t``
for trial ``t`` with ``Philox(key=seed).jumped(t)``, so results are
independent of execution order and bitwise reproducible.

Coupling-phase sigmas are in radians (an angle error of the physical
element), unlike the gauge phases elsewhere in the package, which are in
cycles.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse

from .hamiltonians import HamiltonianMatrix, _iter_x_hops, _iter_y_hops
from .lattice import LatticeSpec, l_of_index
from .scattering import DecaySpec
from .edge import EdgeRegion, displacement_spectrum

__all__ = [
    "DisorderScope",
    "DisorderModel",
    "MonteCarloSummary",
    "saturating_oam_envelope",
    "sample_disordered_hamiltonian",
    "loss_perturbed_decay",
    "displacement_robustness",
]

#: Attempts allowed for redrawing a loss vector before giving up.
MAX_LOSS_RESAMPLES = 100


class DisorderScope(enum.Enum):
    """Granularity at which disorder draws are made (see module docstring)."""

    PER_CAVITY_LINK = "per_cavity_link"
    PER_OAM_LINK = "per_oam_link"
    PER_SITE = "per_site"


def saturating_oam_envelope(x, width: float = 30.0):
    """Error envelope ``1 - exp(-(x/width)**2)``: zero at 0, saturating at 1.

    Models imperfections that grow with the OAM index and level off once
    ``|x|`` passes ``width``; e.g. ``width=30`` gives ``~2.8e-4`` at the
    first link midpoint ``x = 0.5`` and ``~0.895`` at ``x = 45``.
    """
    if width <= 0:
        raise ValueError(f"envelope width must be positive, got {width!r}")
    return 1.0 - np.exp(-np.square(np.asarray(x, dtype=float) / width))


@dataclass(frozen=True)
class DisorderModel:
    """Gaussian disorder strengths, their granularity, and the OAM envelope.

    ``sigma_detuning`` is the resonance-shift scale in coupling units;
    ``sigma_coupling_mag`` the relative coupling-amplitude error;
    ``sigma_coupling_phase`` the coupling-phase error in radians;
    ``sigma_loss`` the relative loss imbalance used by
    :func:`loss_perturbed_decay`.  ``oam_envelope`` (if given) must map
    real arrays into ``[0, 1]``.
    """

    sigma_detuning: float = 0.0
    sigma_coupling_mag: float = 0.0
    sigma_coupling_phase: float = 0.0
    sigma_loss: float = 0.0
    oam_envelope: Callable[[np.ndarray], np.ndarray] | None = None
    scope: DisorderScope = DisorderScope.PER_CAVITY_LINK

    def __post_init__(self) -> None:
        for name in (
            "sigma_detuning",
            "sigma_coupling_mag",
            "sigma_coupling_phase",
            "sigma_loss",
        ):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be >= 0 and finite, got {value!r}")
        if not isinstance(self.scope, DisorderScope):
            raise ValueError(f"scope must be a DisorderScope member, got {self.scope!r}")
        if self.scope is DisorderScope.PER_SITE and (
            self.sigma_coupling_mag > 0.0 or self.sigma_coupling_phase > 0.0
        ):
            raise ValueError(
                "coupling perturbations need a link scope (PER_CAVITY_LINK or "
                "PER_OAM_LINK); PER_SITE draws only detunings"
            )

    # -- presets ----------------------------------------------------------

    @classmethod
    def cavity_detuning(cls, sigma: float) -> "DisorderModel":
        """Resonance-shift disorder only: one draw per cavity."""
        return cls(sigma_detuning=sigma)

    @classmethod
    def cavity_link_errors(
        cls, sigma_mag: float = 0.05, sigma_phase: float = 0.05
    ) -> "DisorderModel":
        """Amplitude and phase errors on the cavity-axis couplings."""
        return cls(
            sigma_coupling_mag=sigma_mag,
            sigma_coupling_phase=sigma_phase,
            scope=DisorderScope.PER_CAVITY_LINK,
        )

    @classmethod
    def oam_link_errors(
        cls,
        sigma_mag: float = 0.05,
        sigma_loss: float = 0.02,
        width: float = 30.0,
    ) -> "DisorderModel":
        """OAM-coupling amplitude errors plus loss imbalance, both enveloped."""
        return cls(
            sigma_coupling_mag=sigma_mag,
            sigma_loss=sigma_loss,
            oam_envelope=lambda x: saturating_oam_envelope(x, width),
            scope=DisorderScope.PER_OAM_LINK,
        )


@dataclass(frozen=True)
class MonteCarloSummary:
    """Mean and sample standard deviation of the displacement over trials."""

    omega_grid: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    trials: int
    seed: int

    def __post_init__(self) -> None:
        for name in ("omega_grid", "mean", "std"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        if not (self.omega_grid.shape == self.mean.shape == self.std.shape):
            raise ValueError("omega_grid, mean and std must share one shape")
        if np.any(self.std < 0.0):
            raise ValueError("standard deviations must be nonnegative")


def _generator(seed: "int | np.random.Generator") -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(key=seed))


def _envelope_values(model: DisorderModel, x: np.ndarray) -> np.ndarray:
    if model.oam_envelope is None:
        return np.ones(np.shape(x))
    values = np.asarray(model.oam_envelope(np.asarray(x, dtype=float)), dtype=float)
    if values.shape != np.shape(x):
        raise ValueError("oam_envelope must evaluate elementwise, shape preserved")
    if np.any(values < 0.0) or np.any(values > 1.0 + 1e-12):
        raise ValueError("oam_envelope values must lie in [0, 1]")
    return values


def _resolve_base(
    base: "HamiltonianMatrix | Callable[[], HamiltonianMatrix]",
) -> HamiltonianMatrix:
    H = base() if callable(base) else base
    if not isinstance(H, HamiltonianMatrix):
        raise TypeError(
            "base must be a HamiltonianMatrix or a zero-argument builder "
            f"returning one, got {type(H).__name__}"
        )
    return H


def sample_disordered_hamiltonian(
    base: "HamiltonianMatrix | Callable[[], HamiltonianMatrix]",
    model: DisorderModel,
    seed: "int | np.random.Generator",
) -> HamiltonianMatrix:
    """One Gaussian-perturbed copy of the base Hamiltonian.

    Draw protocol (fixed, so a seed fully determines the sample): first
    the detuning normals, then the coupling-amplitude normals, then the
    coupling-phase normals, each of a shape set by the lattice and the
    scope, not by which sigmas are zero.  Each perturbed hop is scaled
    once by ``(1 + sigma_mag * F * z_mag) * exp(1j * sigma_phase * F *
    z_phase)`` and its Hermitian partner is rewritten as the conjugate,
    so the sample stays exactly Hermitian.  With every sigma zero the
    base matrix is returned bit-identically.
    """
    H = _resolve_base(base)
    spec = H.spec
    rng = _generator(seed)
    matrix = H.toarray().copy() if H.is_dense else H.data.tolil(copy=True)

    # detunings (drawn first, applied to every diagonal entry of the unit)
    if model.scope is DisorderScope.PER_SITE:
        draws = rng.standard_normal(spec.n_x * spec.n_l)
        shifts = np.repeat(model.sigma_detuning * draws, spec.spin_dim)
    else:
        draws = rng.standard_normal(spec.n_x)
        shifts = np.repeat(model.sigma_detuning * draws, spec.n_l * spec.spin_dim)
    if model.sigma_detuning > 0.0:
        if H.is_dense:
            matrix[np.arange(spec.dim), np.arange(spec.dim)] += shifts
        else:
            matrix.setdiag(matrix.diagonal() + shifts)

    # couplings (magnitude draws, then phase draws, always in this order)
    sd = spec.spin_dim
    if model.scope is DisorderScope.PER_CAVITY_LINK:
        mag = rng.standard_normal(spec.n_x)
        phase = rng.standard_normal(spec.n_x)
        if model.sigma_coupling_mag > 0.0 or model.sigma_coupling_phase > 0.0:
            factors = (1.0 + model.sigma_coupling_mag * mag) * np.exp(
                1j * model.sigma_coupling_phase * phase
            )
            for src, dst, j in _iter_x_hops(spec):
                _scale_hop(matrix, dst, src, sd, factors[j])
    elif model.scope is DisorderScope.PER_OAM_LINK:
        mag = rng.standard_normal((spec.n_x, spec.n_l))
        phase = rng.standard_normal((spec.n_x, spec.n_l))
        if model.sigma_coupling_mag > 0.0 or model.sigma_coupling_phase > 0.0:
            midpoints = _envelope_values(model, spec.l_values + 0.5)
            factors = (
                1.0 + model.sigma_coupling_mag * midpoints[None, :] * mag
            ) * np.exp(
                1j * model.sigma_coupling_phase * midpoints[None, :] * phase
            )
            for src, dst, j, l_src in _iter_y_hops(spec):
                _scale_hop(matrix, dst, src, sd, factors[j, l_src - spec.l_min])

    if not H.is_dense:
        return HamiltonianMatrix(spec, matrix.tocsr())
    return HamiltonianMatrix(spec, matrix)


def _scale_hop(matrix, dst: int, src: int, sd: int, factor: complex) -> None:
    """Scale the ``dst <- src`` hop block and rewrite its Hermitian partner."""
    if sd == 1:
        value = matrix[dst, src] * factor
        matrix[dst, src] = value
        matrix[src, dst] = np.conj(value)
        return
    block = matrix[dst : dst + sd, src : src + sd] * factor
    block = block.toarray() if scipy.sparse.issparse(block) else block
    matrix[dst : dst + sd, src : src + sd] = block
    matrix[src : src + sd, dst : dst + sd] = block.conj().T


def loss_perturbed_decay(
    base_gamma: float,
    spec: LatticeSpec,
    model: DisorderModel,
    seed: "int | np.random.Generator",
) -> DecaySpec:
    """Per-mode decay rates ``gamma * (1 + sigma_loss * F(l) * z_n)``.

    The envelope is evaluated at each mode's own OAM index, so the
    ``l = 0`` modes keep exactly the base rate under the standard
    envelope.  A draw that would make any rate nonpositive is discarded
    and redrawn, up to :data:`MAX_LOSS_RESAMPLES` times.
    """
    if not base_gamma > 0.0:
        raise ValueError(f"base loss rate must be positive, got {base_gamma!r}")
    rng = _generator(seed)
    envelope = _envelope_values(model, l_of_index(spec).astype(float))
    for _ in range(MAX_LOSS_RESAMPLES):
        draws = rng.standard_normal(spec.dim)
        rates = base_gamma * (1.0 + model.sigma_loss * envelope * draws)
        if np.all(rates > 0.0):
            return DecaySpec.per_mode(rates)
    raise ValueError(
        f"could not draw positive loss rates in {MAX_LOSS_RESAMPLES} attempts; "
        f"sigma_loss={model.sigma_loss!r} is too large for base "
        f"gamma={base_gamma!r}"
    )


def displacement_robustness(
    base: "HamiltonianMatrix | Callable[[], HamiltonianMatrix]",
    model: DisorderModel,
    decay: DecaySpec,
    omega_grid: np.ndarray,
    region: EdgeRegion,
    trials: int = 100,
    seed: int = 0,
    input_l_values: Sequence[int] = (0,),
) -> MonteCarloSummary:
    """Monte-Carlo mean and spread of the edge OAM displacement.

    For each trial an independent ``Philox(key=seed).jumped(trial)``
    stream perturbs the Hamiltonian and, when ``sigma_loss > 0``, the
    decay rates; the displacement spectrum is then averaged over the
    requested input OAM values (more than one models a source that is
    itself spread over OAM).  Means and sample standard deviations
    (``ddof=1``) are taken trialwise in fixed order, so identical
    arguments give bitwise-identical summaries.
    """
    if trials < 2:
        raise ValueError(f"need at least 2 trials for a spread, got {trials!r}")
    if not input_l_values:
        raise ValueError("input_l_values must name at least one input OAM")
    if model.sigma_loss > 0.0 and not decay.is_uniform:
        raise ValueError(
            "loss disorder perturbs a uniform base rate; supply a uniform "
            "DecaySpec when sigma_loss > 0"
        )
    H0 = _resolve_base(base)
    omega_grid = np.asarray(omega_grid, dtype=float)
    samples = np.empty((trials, omega_grid.size))
    for trial in range(trials):
        rng = np.random.Generator(np.random.Philox(key=seed).jumped(trial))
        H = sample_disordered_hamiltonian(H0, model, rng)
        trial_decay = decay
        if model.sigma_loss > 0.0:
            trial_decay = loss_perturbed_decay(decay.gamma, H0.spec, model, rng)
        spectra = [
            displacement_spectrum(H, trial_decay, omega_grid, region, input_l)
            for input_l in input_l_values
        ]
        samples[trial] = np.mean(spectra, axis=0)
    return MonteCarloSummary(
        omega_grid=omega_grid,
        mean=samples.mean(axis=0),
        std=samples.std(axis=0, ddof=1),
        trials=trials,
        seed=seed,
    )
