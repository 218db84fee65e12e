"""Phase-space projections of sector states, UPO traces, and scar scores.

The projection of a state onto a manifold point is the squared overlap with
the raw (unsymmetrized) coherent product state at that point.  For grids on
the TI/IS manifolds the overlap factorizes through the per-pattern bit
occupations, which reduces every map to two small matrix products: a
(grid x slots) chart table and a (slots x dim) occupation-weight table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classical import PeriodSearchError, orbit_period, integrate_upo, upo_velocity
from .model import (
    Manifold,
    ManifoldPoint,
    ModelError,
    SpinChainModel,
    SpinConfiguration,
    is_sign_pattern,
)
from .projection import (
    ProjectionMap,
    UpoTrace,
    chart_coordinates,
    chart_interpolation_matrix,
    projection_grid,
)
from .quantum import (
    EigenSystem,
    QuantumError,
    SectorState,
    coherent_sector_amplitudes,
    half_chain_entropy,
    operator_expectations,
    symmetrized_site_operator,
)
from .sector import SymmetrySector

DEGENERACY_TOL = 1e-10
DEFAULT_FAMILY_ORBITS = 60
DEFAULT_FAMILY_POINTS = 400

_OBSERVABLES = {
    "sigma_x_site1": ("x", 0),
    "sigma_z_site1": ("z", 0),
}


@dataclass(frozen=True)
class ManifoldBasis:
    """Occupation-weight table linking a manifold chart to the sector basis.

    weights[a, slot(p, m)] counts, normalized by 1/sqrt(orbit size), the
    basis states in orbit a with p down-spins on '+' pattern sites and m
    down-spins on '-' sites; every coherent overlap on the manifold is a
    linear functional of these counts.
    """

    sector: SymmetrySector
    manifold: Manifold
    pattern: np.ndarray
    n_plus: int
    n_minus: int
    weights: np.ndarray

    @property
    def n_slots(self) -> int:
        return (self.n_plus + 1) * (self.n_minus + 1)


def manifold_basis(sector: SymmetrySector, manifold: Manifold) -> ManifoldBasis:
    n = sector.n_sites
    if manifold is Manifold.TI:
        pattern = np.ones(n)
    else:
        pattern = is_sign_pattern(n)
    plus_mask = np.uint64(sum(1 << j for j in range(n) if pattern[j] > 0))
    minus_mask = np.uint64(sum(1 << j for j in range(n) if pattern[j] < 0))
    n_plus = int(np.round(np.sum(pattern > 0)))
    n_minus = n - n_plus

    states = np.arange(1 << n, dtype=np.uint64)
    p = np.bitwise_count(states & plus_mask).astype(np.int64)
    m = np.bitwise_count(states & minus_mask).astype(np.int64)
    slots = p * (n_minus + 1) + m
    weights = np.zeros((sector.dimension, (n_plus + 1) * (n_minus + 1)))
    np.add.at(weights, (sector.orbit_index, slots), 1.0)
    weights *= sector.norms[:, None]
    return ManifoldBasis(
        sector=sector,
        manifold=manifold,
        pattern=pattern,
        n_plus=n_plus,
        n_minus=n_minus,
        weights=weights,
    )


def coherent_chart_matrix(
    basis: ManifoldBasis, thetas: np.ndarray, phis: np.ndarray
) -> np.ndarray:
    """Chart table T[(theta, phi), slot]: coherent amplitude per occupation slot.

    A basis state with occupations (p, m) overlaps the manifold coherent
    state at (theta, phi) with amplitude
    c^(P-p+m) s^(M-m+p) (-1)^m e^{i phi (p+m)}, c = cos(theta/2),
    s = sin(theta/2).
    """
    P, M = basis.n_plus, basis.n_minus
    slots = np.arange((P + 1) * (M + 1))
    p = slots // (M + 1)
    m = slots % (M + 1)
    exp_c = P - p + m
    exp_s = M - m + p

    half = np.asarray(thetas) / 2.0
    c = np.cos(half)
    s = np.sin(half)
    powers = np.arange(P + M + 1)
    cpow = c[:, None] ** powers[None, :]
    spow = s[:, None] ** powers[None, :]
    radial = cpow[:, exp_c] * spow[:, exp_s]

    phase = np.exp(1j * np.asarray(phis)[:, None] * (p + m)[None, :])
    phase = phase * ((-1.0) ** m)[None, :]
    table = radial[:, None, :] * phase[None, :, :]
    return table.reshape(len(thetas) * len(phis), len(slots))


def coherent_overlap_probability(state: SectorState, config: SpinConfiguration) -> float:
    """Q = |<{s}|psi>|^2 against the raw product state at one configuration."""
    coh = coherent_sector_amplitudes(config, state.sector)
    return float(np.abs(np.vdot(coh, state.amplitudes)) ** 2)


def husimi_projection(
    state: SectorState,
    manifold: Manifold,
    thetas: np.ndarray | None = None,
    phis: np.ndarray | None = None,
    basis: ManifoldBasis | None = None,
) -> ProjectionMap:
    """Map Q(theta, phi) = |<{s(theta, phi)}|psi>|^2 over a manifold grid."""
    if thetas is None or phis is None:
        thetas, phis = projection_grid()
    if basis is None:
        basis = manifold_basis(state.sector, manifold)
    elif basis.manifold is not manifold:
        raise ValueError("basis manifold does not match the requested manifold")
    table = coherent_chart_matrix(basis, thetas, phis)
    g = basis.weights.T @ state.amplitudes
    q = np.abs(np.conj(table) @ g) ** 2
    return ProjectionMap(thetas, phis, q.reshape(len(thetas), len(phis)), manifold)


# --- orbit traces ---------------------------------------------------------------


def _transverse_frame(u: np.ndarray):
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(u)))] = 1.0
    e1 = np.cross(u, ref)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(u, e1)


def _is_circle_points(u, start, n_points):
    """Precession circle about u through ``start``, in flow direction."""
    cos_beta = float(u @ start)
    planar = start - cos_beta * u
    rho = np.linalg.norm(planar)
    e1 = planar / rho
    e2 = np.cross(u, e1)
    psi = np.linspace(0.0, 2.0 * math.pi, n_points, endpoint=False)
    return (
        cos_beta * u[None, :]
        + rho * (np.cos(psi)[:, None] * e1[None, :] + np.sin(psi)[:, None] * e2[None, :])
    )


def upo_trace(
    anchor: ManifoldPoint,
    model: SpinChainModel,
    n_points: int = DEFAULT_FAMILY_POINTS,
) -> UpoTrace:
    """One period of the manifold orbit through the anchor, in chart coords.

    A fixed-point anchor yields a single-point trace with the degenerate
    flag set.
    """
    n = anchor.unit_vector()
    if anchor.manifold is Manifold.IS:
        model.require_is_usable()
        u = model.field_direction()
        if np.linalg.norm(np.cross(u, n)) < 1e-10:
            theta, phi = chart_coordinates(n[None, :])
            return UpoTrace(theta, phi, anchor.manifold, degenerate=True)
        points = _is_circle_points(u, n, n_points)
        theta, phi = chart_coordinates(points)
        return UpoTrace(theta, phi, anchor.manifold)

    speed = np.linalg.norm(upo_velocity(n, model, Manifold.TI))
    if speed < 1e-12:
        theta, phi = chart_coordinates(n[None, :])
        return UpoTrace(theta, phi, anchor.manifold, degenerate=True)
    period = orbit_period(anchor, model)
    oversample = 4
    _, orbit = integrate_upo(anchor, model, period, dt=period / (oversample * n_points))
    theta, phi = chart_coordinates(orbit[: oversample * n_points : oversample])
    return UpoTrace(theta, phi, anchor.manifold)


def is_upo_family(
    model: SpinChainModel,
    n_orbits: int = DEFAULT_FAMILY_ORBITS,
    points_per_orbit: int = DEFAULT_FAMILY_POINTS,
) -> list[UpoTrace]:
    """IS orbits discretized by the conserved angle beta = arccos(u . s).

    beta takes ``n_orbits`` uniform values inside (0, pi); the poles are
    fixed points and excluded.
    """
    model.require_is_usable()
    u = model.field_direction()
    e1, e2 = _transverse_frame(u)
    psi = np.linspace(0.0, 2.0 * math.pi, points_per_orbit, endpoint=False)
    circle = np.cos(psi)[:, None] * e1[None, :] + np.sin(psi)[:, None] * e2[None, :]
    family = []
    for i in range(n_orbits):
        beta = math.pi * (i + 0.5) / n_orbits
        points = math.cos(beta) * u[None, :] + math.sin(beta) * circle
        theta, phi = chart_coordinates(points)
        family.append(UpoTrace(theta, phi, Manifold.IS))
    return family


# --- diagonal ensemble ----------------------------------------------------------


def diagonal_ensemble_projection(
    psi0: SectorState,
    eigen: EigenSystem,
    manifold: Manifold,
    thetas: np.ndarray | None = None,
    phis: np.ndarray | None = None,
    degeneracy_tol: float = DEGENERACY_TOL,
    chunk_size: int = 1024,
) -> ProjectionMap:
    """Infinite-time average of the projection map under the eigensystem.

    For a nondegenerate spectrum this is sum_n |<E_n|psi0>|^2 Q_n; energy
    clusters closer than ``degeneracy_tol`` are kept as coherent blocks
    (their time-invariant part survives the average).
    """
    if thetas is None or phis is None:
        thetas, phis = projection_grid()
    if psi0.sector.dimension != eigen.dimension:
        raise QuantumError("initial state and eigensystem sector mismatch")
    basis = manifold_basis(eigen.sector, manifold)
    table_c = np.conj(coherent_chart_matrix(basis, thetas, phis))

    coeffs = eigen.states.conj().T @ psi0.amplitudes
    g_all = (basis.weights.T @ eigen.states) * coeffs[None, :]

    block_id = np.concatenate([[0], np.cumsum(np.diff(eigen.energies) > degeneracy_tol)])
    n_blocks = int(block_id[-1]) + 1
    if n_blocks < eigen.dimension:
        h_blocks = np.zeros((n_blocks, g_all.shape[0]), dtype=np.complex128)
        np.add.at(h_blocks, block_id, g_all.T)
        h_blocks = h_blocks.T
    else:
        h_blocks = g_all

    q = np.zeros(table_c.shape[0])
    for start in range(0, n_blocks, chunk_size):
        amp = table_c @ h_blocks[:, start : start + chunk_size]
        q += np.sum(np.abs(amp) ** 2, axis=1)
    return ProjectionMap(thetas, phis, q.reshape(len(thetas), len(phis)), manifold)


# --- random reference states ------------------------------------------------------


def random_sector_state(sector: SymmetrySector, seed) -> SectorState:
    """Uniform [0, 1] amplitudes, renormalized, with independent random phases."""
    rng = np.random.default_rng(seed)
    amps = rng.uniform(0.0, 1.0, sector.dimension)
    amps /= np.linalg.norm(amps)
    phases = np.exp(2j * math.pi * rng.uniform(0.0, 1.0, sector.dimension))
    return SectorState(amps * phases, sector)


# --- scar scores -------------------------------------------------------------------


def scar_score(pmap: ProjectionMap, upo_family: list[UpoTrace]) -> float:
    """max over UPOs of the loop average of Q / Q_max along the trace."""
    if not upo_family:
        raise ValueError("empty UPO family")
    qmax = pmap.maximum
    if qmax <= 0.0:
        raise ValueError("map maximum must be positive")
    best = 0.0
    for trace in upo_family:
        loop = float(np.mean(pmap.interpolate(trace.thetas, trace.phis)))
        best = max(best, loop)
    return best / qmax


@dataclass(frozen=True)
class ScarStats:
    """Per-state scar scores and the derived scarring statistics."""

    s_scores_eigen: np.ndarray
    s_scores_random: np.ndarray
    chi: float
    n_scarred: int
    seed: int

    def to_json_dict(self, n_bins: int = 50) -> dict:
        top = max(self.s_scores_eigen.max(), self.s_scores_random.max())
        bins = np.linspace(0.0, float(top), n_bins + 1)
        eigen_counts, _ = np.histogram(self.s_scores_eigen, bins=bins)
        random_counts, _ = np.histogram(self.s_scores_random, bins=bins)
        return {
            "chi": self.chi,
            "n_scarred": self.n_scarred,
            "n_eigen": int(len(self.s_scores_eigen)),
            "n_random": int(len(self.s_scores_random)),
            "seed": self.seed,
            "score_histograms": {
                "bin_edges": bins.tolist(),
                "eigenstates": eigen_counts.tolist(),
                "random": random_counts.tolist(),
            },
        }


def _scores_for_columns(table_c, interp, weights, columns, n_orbits, chunk_size=512):
    g = weights.T @ columns
    scores = np.empty(g.shape[1])
    n_pts = interp.shape[0] // n_orbits
    for start in range(0, g.shape[1], chunk_size):
        q = np.abs(table_c @ g[:, start : start + chunk_size]) ** 2
        qmax = q.max(axis=0)
        loops = (interp @ q).reshape(n_orbits, n_pts, -1).mean(axis=1)
        scores[start : start + q.shape[1]] = loops.max(axis=0) / qmax
    return scores


def scar_statistics(
    eigen: EigenSystem,
    model: SpinChainModel,
    n_random: int = 1000,
    seed: int = 1,
    family: list[UpoTrace] | None = None,
    thetas: np.ndarray | None = None,
    phis: np.ndarray | None = None,
    chunk_size: int = 512,
) -> ScarStats:
    """Scar scores of all eigenstates against a random-state ensemble.

    chi is the probability that a uniformly drawn eigenstate outscores a
    uniformly drawn random state; n_scarred counts eigenstates scoring above
    the mean random score.
    """
    if n_random < 1:
        raise ValueError("n_random must be >= 1")
    if thetas is None or phis is None:
        thetas, phis = projection_grid()
    if family is None:
        family = is_upo_family(model)
    basis = manifold_basis(eigen.sector, Manifold.IS)
    table_c = np.conj(coherent_chart_matrix(basis, thetas, phis))
    trace_thetas = np.concatenate([t.thetas for t in family])
    trace_phis = np.concatenate([t.phis for t in family])
    interp = chart_interpolation_matrix(thetas, phis, trace_thetas, trace_phis)

    s_eigen = _scores_for_columns(
        table_c, interp, basis.weights, eigen.states, len(family), chunk_size
    )
    randoms = np.column_stack(
        [random_sector_state(eigen.sector, (seed, r)).amplitudes for r in range(n_random)]
    )
    s_rand = _scores_for_columns(
        table_c, interp, basis.weights, randoms, len(family), chunk_size
    )

    ordered = np.sort(s_rand)
    wins = np.searchsorted(ordered, s_eigen, side="left").sum()
    chi = float(wins) / (len(s_eigen) * len(s_rand))
    n_scarred = int(np.sum(s_eigen > s_rand.mean()))
    return ScarStats(
        s_scores_eigen=s_eigen,
        s_scores_random=s_rand,
        chi=chi,
        n_scarred=n_scarred,
        seed=seed,
    )


# --- ETH panels --------------------------------------------------------------------


def eth_scatter(
    eigen: EigenSystem, observable: str = "sigma_x_site1", cut: int | None = None
) -> np.ndarray:
    """(E_n, local expectation, half-chain entropy) rows for all eigenstates."""
    if observable not in _OBSERVABLES:
        raise ValueError(
            f"unsupported observable {observable!r}; known: {sorted(_OBSERVABLES)}"
        )
    kind, site = _OBSERVABLES[observable]
    op = symmetrized_site_operator(eigen.sector, kind, site)
    expectations = operator_expectations(op, eigen.states)
    entropies = np.array(
        [
            half_chain_entropy(eigen.sector, eigen.states[:, n], cut)
            for n in range(eigen.dimension)
        ]
    )
    return np.column_stack([eigen.energies, expectations, entropies])
