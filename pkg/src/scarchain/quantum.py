"""Spin-1/2 Hamiltonian in the reduced sector, diagonalization, evolution.

Pauli convention: s_hat = sigma/2, so the chain Hamiltonian reads
H = (1/2) sum_j [mu . sigma_j + sigma_j J sigma_{j+1}] with periodic wrap.
Matrix elements between symmetrized basis states |O_a> use
<O_b|H|O_a> = sqrt(|O_b|/|O_a|) * sum over targets of H|r_b> landing in O_a.

Coherent states: the spin at orientation (theta, phi) is
cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>, bit 0 = up.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg as sla
from scipy import sparse

from .model import ModelError, SpinChainModel, SpinConfiguration
from .sector import SectorError, SymmetrySector, expand_to_full, project_from_full

DENSE_DIMENSION_LIMIT = 10000
EIGEN_CACHE_MAGIC = b"SCAREIG1"


class QuantumError(RuntimeError):
    """Hamiltonian construction or eigensolver failure."""


def model_is_real(model: SpinChainModel) -> bool:
    """True when the computational-basis Hamiltonian has real entries."""
    j = model.coupling
    return model.mu[1] == 0.0 and j[0, 1] == 0.0 and j[1, 2] == 0.0


def _pauli_action(states: np.ndarray, site: int, kind: str):
    """(targets, factors) of sigma^kind at ``site`` applied to basis kets."""
    bit = ((states >> np.uint64(site)) & np.uint64(1)).astype(np.float64)
    z = 1.0 - 2.0 * bit
    if kind == "z":
        return states, z.astype(np.complex128)
    targets = states ^ np.uint64(1 << site)
    if kind == "x":
        return targets, np.ones(len(states), dtype=np.complex128)
    return targets, 1j * z


@dataclass(frozen=True)
class SectorOperator:
    """Hermitian operator on the sector, dense or sparse."""

    sector: SymmetrySector
    matrix: np.ndarray | None = None
    matrix_sparse: sparse.csr_matrix | None = None

    @property
    def dimension(self) -> int:
        return self.sector.dimension

    @property
    def is_dense(self) -> bool:
        return self.matrix is not None

    def apply(self, vec: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ vec
        return self.matrix_sparse @ vec

    def norm_estimate(self, seed: int = 0, iterations: int = 30) -> float:
        """Power-iteration estimate of the spectral norm."""
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dimension)
        v /= np.linalg.norm(v)
        est = 1.0
        for _ in range(iterations):
            w = self.apply(v)
            est = float(np.linalg.norm(w))
            if est == 0.0:
                return 0.0
            v = w / est
        return est


def _operator_terms(model: SpinChainModel):
    """Yield (site_ops, coefficient) descriptors for the chain Hamiltonian."""
    n = model.n_sites
    axes = "xyz"
    for a in range(3):
        if model.mu[a] == 0.0:
            continue
        for j in range(n):
            yield ((j, axes[a]),), 0.5 * model.mu[a]
    for a in range(3):
        for b in range(3):
            jab = model.coupling[a, b]
            if jab == 0.0:
                continue
            for j in range(n):
                yield ((j, axes[a]), ((j + 1) % n, axes[b])), 0.5 * jab


def assemble_sector_operator(
    sector: SymmetrySector,
    terms,
    dense: bool,
    real: bool,
) -> SectorOperator:
    """Assemble sum of Pauli strings (given as ((site, kind), ...), coeff)."""
    reps = sector.representatives
    dim = sector.dimension
    sizes = sector.orbit_sizes
    rows = np.arange(dim)
    row_size = sizes[rows]

    dtype = np.float64 if real else np.complex128
    if dense:
        h = np.zeros((dim, dim), dtype=dtype)
        triplets = None
    else:
        h = None
        triplets = []

    for ops, coeff in terms:
        targets = reps
        factors = np.full(dim, coeff, dtype=np.complex128)
        for site, kind in ops:
            targets, f = _pauli_action(targets, site, kind)
            factors = factors * f
        cols = sector.orbit_index[targets.astype(np.int64)]
        vals = np.conj(factors) * np.sqrt(row_size / sizes[cols])
        if real:
            if np.max(np.abs(vals.imag)) > 1e-14 * max(1.0, np.max(np.abs(vals.real))):
                raise QuantumError("real assembly requested for a complex operator")
            vals = vals.real
        if dense:
            np.add.at(h, (rows, cols), vals)
        else:
            triplets.append((rows, cols, vals))

    if dense:
        return SectorOperator(sector=sector, matrix=h)
    rows_all = np.concatenate([t[0] for t in triplets])
    cols_all = np.concatenate([t[1] for t in triplets])
    vals_all = np.concatenate([t[2] for t in triplets])
    mat = sparse.coo_matrix((vals_all, (rows_all, cols_all)), shape=(dim, dim)).tocsr()
    return SectorOperator(sector=sector, matrix_sparse=mat)


def build_hamiltonian(
    model: SpinChainModel, sector: SymmetrySector, layout: str = "auto"
) -> SectorOperator:
    """Sector Hamiltonian of the chain; dense up to the desk-scale budget.

    layout: 'auto' picks dense when the dimension allows full
    diagonalization, sparse otherwise; 'dense' / 'sparse' force it.
    """
    if model.spin != 0.5:
        raise ModelError("quantum chain supports spin-1/2 only")
    if model.n_sites != sector.n_sites:
        raise SectorError("model and sector chain lengths differ")
    if layout not in ("auto", "dense", "sparse"):
        raise ValueError(f"unknown layout {layout!r}")
    dense = layout == "dense" or (
        layout == "auto" and sector.dimension <= DENSE_DIMENSION_LIMIT
    )
    if layout == "dense" and sector.dimension > DENSE_DIMENSION_LIMIT:
        raise QuantumError(
            f"dense Hamiltonian at dimension {sector.dimension} exceeds the "
            f"budget of {DENSE_DIMENSION_LIMIT}"
        )
    return assemble_sector_operator(
        sector, _operator_terms(model), dense=dense, real=model_is_real(model)
    )


def site_orbit(sector: SymmetrySector, site: int) -> np.ndarray:
    """Orbit of a site index under translation-by-4 and the mirror."""
    n = sector.n_sites
    sites = set()
    for m in range(n // 4):
        t = (site + 4 * m) % n
        sites.add(t)
        sites.add((1 - t) % n)
    return np.array(sorted(sites))


def symmetrized_site_operator(
    sector: SymmetrySector, kind: str = "x", site: int = 0
) -> SectorOperator:
    """Group average of sigma^kind at a site (equals it in expectation).

    For states inside the symmetric sector the expectation value of
    sigma^kind_site coincides with that of the group-averaged operator,
    which is block-exact in the reduced basis.
    """
    sites = site_orbit(sector, site)
    weight = 1.0 / len(sites)
    terms = [(((int(j), kind),), weight) for j in sites]
    return assemble_sector_operator(sector, terms, dense=True, real=kind != "y")


@dataclass(frozen=True)
class SectorState:
    """Normalized state vector in the sector basis."""

    amplitudes: np.ndarray
    sector: SymmetrySector

    def __post_init__(self):
        amps = np.asarray(self.amplitudes)
        if amps.shape != (self.sector.dimension,):
            raise QuantumError(
                f"state length {amps.shape} does not match sector dimension "
                f"{self.sector.dimension}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-10:
            raise QuantumError(f"sector state norm {norm} is not 1")
        object.__setattr__(self, "amplitudes", amps)

    def overlap(self, other: "SectorState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class EigenSystem:
    """Ascending energies and the matching orthonormal eigenvector columns."""

    energies: np.ndarray
    states: np.ndarray
    sector: SymmetrySector

    @property
    def dimension(self) -> int:
        return len(self.energies)

    def eigenstate(self, n: int) -> SectorState:
        return SectorState(self.states[:, n], self.sector)


def diagonalize(op: SectorOperator, check_residuals: bool = True) -> EigenSystem:
    """Full eigensystem of a dense sector operator."""
    if not op.is_dense:
        raise QuantumError(
            "dimension exceeds the dense budget; use Krylov evolution instead"
        )
    h = op.matrix
    energies, states = sla.eigh(h)
    if check_residuals:
        scale = max(float(np.max(np.abs(energies))), 1.0)
        idx = np.linspace(0, len(energies) - 1, min(8, len(energies))).astype(int)
        for n in idx:
            res = np.linalg.norm(h @ states[:, n] - energies[n] * states[:, n])
            if res > 1e-8 * scale:
                raise QuantumError(f"eigenpair {n} residual {res:.3e} too large")
    return EigenSystem(energies=energies, states=states, sector=op.sector)


# --- coherent product states ---------------------------------------------------


def _site_spinor(v: np.ndarray):
    z = min(1.0, max(-1.0, float(v[2])))
    c = math.sqrt(0.5 * (1.0 + z))
    s = math.sqrt(0.5 * (1.0 - z))
    rho = math.hypot(float(v[0]), float(v[1]))
    phase = complex(v[0] / rho, v[1] / rho) if rho > 1e-300 else 1.0
    return c, s * phase


def coherent_amplitudes_full(config: SpinConfiguration) -> np.ndarray:
    """Full-space amplitudes <x|{s}> of the coherent product state."""
    amp = np.ones(1, dtype=np.complex128)
    for v in config.orientations:
        a0, a1 = _site_spinor(v)
        amp = np.concatenate([amp * a0, amp * a1])
    return amp


def coherent_sector_amplitudes(
    config: SpinConfiguration, sector: SymmetrySector
) -> np.ndarray:
    """Unnormalized sector projection <O_a|{s}> of the coherent state."""
    if config.n_sites != sector.n_sites:
        raise SectorError("configuration and sector chain lengths differ")
    return project_from_full(sector, coherent_amplitudes_full(config))


def coherent_product_state(config: SpinConfiguration, sector: SymmetrySector):
    """Sector-projected, renormalized coherent state and its raw weight.

    The weight is the norm of the projection; it equals 1 exactly when the
    configuration is invariant under the sector symmetries (TI/IS states).
    """
    proj = coherent_sector_amplitudes(config, sector)
    weight = float(np.linalg.norm(proj))
    if weight < 1e-12:
        raise QuantumError("coherent state has (numerically) no sector component")
    return SectorState(proj / weight, sector), weight


# --- time evolution -------------------------------------------------------------


def evolve(state: SectorState, eigen: EigenSystem, t: float) -> SectorState:
    """exp(-i H t)|psi> through the eigenbasis."""
    if (
        eigen.sector.n_sites != state.sector.n_sites
        or eigen.sector.dimension != state.sector.dimension
    ):
        raise QuantumError("state and eigensystem come from different sectors")
    coeffs = eigen.states.conj().T @ state.amplitudes
    coeffs = coeffs * np.exp(-1j * eigen.energies * t)
    return SectorState(eigen.states @ coeffs, eigen.sector)


def evolve_krylov(
    op: SectorOperator,
    state: SectorState,
    t: float,
    krylov_dim: int = 30,
    step_norm: float = 5.0,
    hnorm: float | None = None,
) -> SectorState:
    """Lanczos propagation of exp(-i H t)|psi> for a Hermitian operator.

    The interval is split so each substep satisfies |H| dt <= step_norm,
    which keeps the Krylov truncation error far below 1e-10 at the default
    subspace size.
    """
    if hnorm is None:
        hnorm = op.norm_estimate()
    n_sub = max(1, int(math.ceil(abs(t) * hnorm / step_norm)))
    dt = t / n_sub
    psi = state.amplitudes.astype(np.complex128)
    for _ in range(n_sub):
        psi = _lanczos_expm_step(op, psi, dt, krylov_dim)
    psi /= np.linalg.norm(psi)
    return SectorState(psi, state.sector)


def _lanczos_expm_step(op: SectorOperator, psi: np.ndarray, dt: float, m: int):
    beta0 = np.linalg.norm(psi)
    v = psi / beta0
    basis = [v]
    alphas, betas = [], []
    for k in range(m):
        w = op.apply(basis[k])
        if k > 0:
            w = w - betas[k - 1] * basis[k - 1]
        a = float(np.real(np.vdot(basis[k], w)))
        w = w - a * basis[k]
        # one re-orthogonalization pass keeps the basis clean
        for u in basis:
            w = w - np.vdot(u, w) * u
        alphas.append(a)
        b = float(np.linalg.norm(w))
        if b < 1e-14 or k == m - 1:
            break
        betas.append(b)
        basis.append(w / b)
    k_eff = len(alphas)
    evals, evecs = sla.eigh_tridiagonal(alphas, betas[: k_eff - 1])
    small = evecs @ (np.exp(-1j * dt * evals) * evecs[0, :])
    out = np.zeros_like(psi)
    for coeff, u in zip(small, basis):
        out += coeff * u
    return beta0 * out


# --- observables ----------------------------------------------------------------


def operator_expectations(op: SectorOperator, states: np.ndarray) -> np.ndarray:
    """<v_n|A|v_n> for eigenvector columns, vectorized."""
    av = op.apply(states)
    return np.real(np.sum(np.conj(states) * av, axis=0))


def half_chain_entropy(
    sector: SymmetrySector, amplitudes: np.ndarray, cut: int | None = None
) -> float:
    """Von Neumann entropy (natural log) of the contiguous block [0, cut)."""
    n = sector.n_sites
    if cut is None:
        cut = n // 2
    if not 0 < cut < n:
        raise ValueError(f"cut must be inside the chain, got {cut}")
    full = expand_to_full(sector, amplitudes)
    mat = full.reshape(1 << (n - cut), 1 << cut)
    svals = sla.svdvals(mat)
    p = svals**2
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)))


# --- binary eigensystem cache ----------------------------------------------------


def save_eigensystem(path, eigen: EigenSystem) -> None:
    """Write magic, N, dimension, flag, energies, then row-major states (LE)."""
    complex_flag = 1 if np.iscomplexobj(eigen.states) else 0
    with open(path, "wb") as fh:
        fh.write(EIGEN_CACHE_MAGIC)
        fh.write(struct.pack("<QQQ", eigen.sector.n_sites, eigen.dimension, complex_flag))
        fh.write(np.ascontiguousarray(eigen.energies, dtype="<f8").tobytes())
        dtype = "<c16" if complex_flag else "<f8"
        fh.write(np.ascontiguousarray(eigen.states, dtype=dtype).tobytes())


def load_eigensystem(path, sector: SymmetrySector) -> EigenSystem:
    raw = Path(path).read_bytes()
    if raw[:8] != EIGEN_CACHE_MAGIC:
        raise QuantumError(f"{path}: not an eigensystem cache")
    n_sites, dim, complex_flag = struct.unpack("<QQQ", raw[8:32])
    if n_sites != sector.n_sites or dim != sector.dimension:
        raise QuantumError(
            f"{path}: cached system is N={n_sites}, dim={dim}; the sector has "
            f"N={sector.n_sites}, dim={sector.dimension}"
        )
    offset = 32
    energies = np.frombuffer(raw, dtype="<f8", count=dim, offset=offset).copy()
    offset += 8 * dim
    dtype = "<c16" if complex_flag else "<f8"
    states = np.frombuffer(raw, dtype=dtype, count=dim * dim, offset=offset)
    return EigenSystem(energies=energies, states=states.reshape(dim, dim).copy(), sector=sector)
