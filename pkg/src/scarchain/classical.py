"""Classical rotor-chain dynamics, UPOs, and Lyapunov exponents.

The chain evolves under

    ds_j/dt = [mu + J (s_{j-1} + s_{j+1})] x s_j        (periodic wrap)

which is the expectation-value dynamics of the quantum chain: a spin in a
field mu precesses counterclockwise about mu (right-hand rule), i.e.
s(t) = Rot(mu_hat, +|mu| t) s(0).  On the TI manifold the single-spin
dynamics is ds/dt = (mu + 2 J s) x s; on the IS manifold the interaction
cancels sitewise and ds/dt = mu x s, a uniform precession at omega = |mu|.

Integrator: fixed-step classical RK4 with per-spin renormalization after
each step (the phase-space constraint |s_j| = 1 is kept exact).  Tangent
dynamics use the analytic Jacobian of the flow, not finite differences.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import (
    Manifold,
    ManifoldPoint,
    ModelError,
    SpinChainModel,
    SpinConfiguration,
    UpoDescriptor,
    is_sign_pattern,
    make_is_state,
    manifold_state,
    classical_energy,
)
from .projection import ProjectionMap

DEFAULT_STEPS_PER_PERIOD = 1000
PERIOD_RETURN_TOL = 1e-8
STABLE_LAMBDA_CUTOFF = 1e-4  # per period: |log max multiplier| below this -> 0


class IntegrationError(RuntimeError):
    """Integration failed a conservation or closure check."""


class PeriodSearchError(RuntimeError):
    """No return to the anchor found (fixed point or integrator fault)."""


class LyapunovMethod(enum.Enum):
    MONODROMY = "Monodromy"
    ANALYTICAL_IS = "AnalyticalIS"


@dataclass(frozen=True)
class Trajectory:
    """Sampled chain trajectory: times (T,) and states (T, N, 3)."""

    times: np.ndarray
    states: np.ndarray
    energy_drift: float

    def __post_init__(self):
        norms = np.linalg.norm(self.states, axis=2)
        if np.max(np.abs(norms - 1.0)) > 1e-10:
            raise IntegrationError("stored trajectory violates unit spin norms")

    def state_at(self, index: int) -> SpinConfiguration:
        return SpinConfiguration(self.states[index])


@dataclass(frozen=True)
class FloquetCoupling:
    """Rotating-frame time-averaged coupling and the field direction."""

    jbar: np.ndarray
    u: np.ndarray

    def adjugate(self) -> np.ndarray:
        """Adj(jbar) such that Adj(jbar) @ jbar = det(jbar) * I."""
        u, jbar = self.u, self.jbar
        uju = float(u @ jbar @ u)
        tr = float(np.trace(jbar))
        return 0.25 * (uju - tr) * (
            np.outer(u, u) * (3 * uju - tr) - 2 * uju * np.eye(3)
        )

    def determinant(self) -> float:
        u, jbar = self.u, self.jbar
        uju = float(u @ jbar @ u)
        tr = float(np.trace(jbar))
        return 0.25 * uju * (uju - tr) ** 2


@dataclass(frozen=True)
class LyapunovResult:
    lambda_: float
    omega: float
    method: LyapunovMethod
    ratio: float = 0.0
    alpha: float | None = None
    raw_lambda: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "ratio", self.lambda_ / self.omega)


# --- velocity fields ---------------------------------------------------------


def chain_velocity(states: np.ndarray, model: SpinChainModel) -> np.ndarray:
    """Right-hand side of the rotor chain for states of shape (..., N, 3)."""
    neigh = np.roll(states, 1, axis=-2) + np.roll(states, -1, axis=-2)
    field = model.mu + neigh @ model.coupling.T
    return np.cross(field, states)


def upo_velocity(s: np.ndarray, model: SpinChainModel, manifold: Manifold) -> np.ndarray:
    """Single-spin velocity on a UPO manifold."""
    if manifold is Manifold.TI:
        return np.cross(model.mu + 2.0 * (model.coupling @ s), s)
    return np.cross(model.mu, s)


def _rk4_step(y, dt, rhs):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _renormalize(states: np.ndarray) -> np.ndarray:
    return states / np.linalg.norm(states, axis=-1, keepdims=True)


def default_timestep(model: SpinChainModel) -> float:
    """T/1000 for the dominant precession scale of the model."""
    scale = model.field_strength + 2.0 * np.linalg.norm(model.coupling, 2)
    if scale == 0.0:
        raise ModelError("model has no dynamics (mu = 0 and J = 0)")
    return (2.0 * math.pi / scale) / DEFAULT_STEPS_PER_PERIOD


def integrate_chain(
    initial: SpinConfiguration,
    model: SpinChainModel,
    t_final: float,
    dt: float | None = None,
    store_every: int = 1,
    energy_tol: float = 1e-8,
) -> Trajectory:
    """Integrate the rotor chain up to t_final; raises on energy drift.

    The drift tolerance is applied per precession period, so longer runs are
    allowed proportionally more accumulated drift.
    """
    if t_final <= 0.0:
        raise ValueError("t_final must be positive")
    if dt is None:
        dt = default_timestep(model)
    if dt <= 0.0 or dt > t_final:
        raise IntegrationError(f"bad step size dt={dt} for t_final={t_final}")

    n_steps = int(math.ceil(t_final / dt))
    dt = t_final / n_steps
    s = initial.orientations.copy()
    e0 = classical_energy(initial, model)
    times = [0.0]
    states = [s.copy()]
    rhs = lambda y: chain_velocity(y, model)
    for k in range(1, n_steps + 1):
        s = _renormalize(_rk4_step(s, dt, rhs))
        if k % store_every == 0 or k == n_steps:
            times.append(k * dt)
            states.append(s.copy())
    e1 = classical_energy(SpinConfiguration(s), model)
    drift = abs(e1 - e0) / max(abs(e0), 1.0)
    periods = max(1.0, t_final * max(model.field_strength, 1e-12) / (2 * math.pi))
    if drift > energy_tol * periods:
        raise IntegrationError(
            f"energy drift {drift:.3e} exceeds {energy_tol:.1e} per period "
            f"over {periods:.1f} periods"
        )
    return Trajectory(np.array(times), np.array(states), drift)


def integrate_upo(
    anchor: ManifoldPoint,
    model: SpinChainModel,
    t_final: float,
    dt: float | None = None,
):
    """Single-spin orbit of the manifold dynamics: (times, unit vectors)."""
    if anchor.manifold is Manifold.IS and model.field_strength == 0.0:
        raise ModelError("IS orbit needs a nonzero field")
    if dt is None:
        dt = default_timestep(model)
    n_steps = int(math.ceil(t_final / dt))
    dt = t_final / n_steps
    s = anchor.unit_vector()
    times = np.linspace(0.0, n_steps * dt, n_steps + 1)
    orbit = np.empty((n_steps + 1, 3))
    orbit[0] = s
    rhs = lambda y: upo_velocity(y, model, anchor.manifold)
    for k in range(1, n_steps + 1):
        s = _rk4_step(s, dt, rhs)
        s = s / np.linalg.norm(s)
        orbit[k] = s
    return times, orbit


def orbit_period(
    anchor: ManifoldPoint,
    model: SpinChainModel,
    max_periods: float = 50.0,
    return_tol: float = PERIOD_RETURN_TOL,
) -> float:
    """Period of the UPO through the anchor.

    IS orbits precess uniformly, so their period 2*pi/|mu| is returned
    without integration.  TI periods are found numerically from the first
    return of the orbit to the anchor, refined by bisection on the radial
    velocity, and verified to close within ``return_tol``.
    """
    if anchor.manifold is Manifold.IS:
        model.require_is_usable()
        return 2.0 * math.pi / model.field_strength

    s0 = anchor.unit_vector()
    v0 = upo_velocity(s0, model, Manifold.TI)
    speed = np.linalg.norm(v0)
    if speed < 1e-12:
        raise PeriodSearchError("anchor is a fixed point of the TI dynamics")

    dt = default_timestep(model) / 2.0
    rhs = lambda y: upo_velocity(y, model, Manifold.TI)
    horizon = max_periods * DEFAULT_STEPS_PER_PERIOD * 2.0 * dt

    s_prev = s0.copy()
    s_curr = _rk4_step(s0, dt, rhs)
    s_curr /= np.linalg.norm(s_curr)
    d_prev, d_curr = 0.0, float(np.linalg.norm(s_curr - s0))
    d_max = d_curr
    t = dt  # time at s_curr
    while t < horizon:
        s_next = _rk4_step(s_curr, dt, rhs)
        s_next /= np.linalg.norm(s_next)
        d_next = float(np.linalg.norm(s_next - s0))
        d_max = max(d_max, d_next)
        # scale-free detector: the orbit must first travel away from the
        # anchor, then a local minimum well inside the excursion is a return
        armed = d_curr < 0.5 * d_max
        if armed and d_curr <= d_prev and d_curr <= d_next and d_curr < 0.1 * d_max:
            t_ref, s_ref = _refine_return(s_prev, t - dt, 2 * dt, s0, rhs)
            if np.linalg.norm(s_ref - s0) < return_tol:
                return t_ref
        s_prev, s_curr = s_curr, s_next
        d_prev, d_curr = d_curr, d_next
        t += dt
    raise PeriodSearchError(
        f"no return to the anchor within {max_periods} estimated periods"
    )


def _refine_return(s_left, t_left, window, s0, rhs):
    """Bisection on the radial velocity h = (s - s0) . v inside a bracket."""

    def advance(s, span, n=16):
        h = span / n
        for _ in range(n):
            s = _rk4_step(s, h, rhs)
            s = s / np.linalg.norm(s)
        return s

    def h_of(s):
        return float((s - s0) @ rhs(s))

    lo, hi = 0.0, window
    s_lo = s_left
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        s_mid = advance(s_lo, mid - lo)
        if h_of(s_mid) < 0.0:
            lo, s_lo = mid, s_mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, t_left):
            break
    s_best = advance(s_lo, 0.5 * (lo + hi) - lo)
    return t_left + 0.5 * (lo + hi), s_best


def upo_descriptor(model: SpinChainModel, anchor: ManifoldPoint) -> UpoDescriptor:
    return UpoDescriptor(anchor, orbit_period(anchor, model))


# --- rotating-frame Floquet average -----------------------------------------


def floquet_averaged_coupling(model: SpinChainModel) -> FloquetCoupling:
    """Time average of R(-wt) J R(wt) over one precession about mu.

    Closed form: jbar = u x u * (3 uJu - TrJ)/2 - I * (uJu - TrJ)/2, with
    u the field direction.  Requires a nonzero field.
    """
    u = model.field_direction()
    j = model.coupling
    uju = float(u @ j @ u)
    tr = float(np.trace(j))
    jbar = np.outer(u, u) * 0.5 * (3.0 * uju - tr) - np.eye(3) * 0.5 * (uju - tr)
    return FloquetCoupling(jbar, u)


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    ux = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + math.sin(angle) * ux + (1.0 - math.cos(angle)) * (ux @ ux)


def lyapunov_analytical_is(
    model: SpinChainModel, anchor: ManifoldPoint
) -> LyapunovResult:
    """Closed-form IS Lyapunov exponent, valid for |J| << |mu|.

    lambda^2 = |alpha| with alpha = -n . Adj(jbar) . n for the orbit tagged
    by the anchor direction n.  The formula is evaluated regardless of the
    coupling strength; its accuracy degrades outside the weak-coupling
    regime.
    """
    if model.field_strength == 0.0:
        raise ModelError("analytic IS exponent needs a nonzero field")
    fc = floquet_averaged_coupling(model)
    n = anchor.unit_vector()
    alpha = float(-n @ fc.adjugate() @ n)
    lam = math.sqrt(abs(alpha))
    return LyapunovResult(
        lambda_=lam,
        omega=model.field_strength,
        method=LyapunovMethod.ANALYTICAL_IS,
        alpha=alpha,
    )


def lyapunov_analytical_is_ising(
    model: SpinChainModel, anchor: ManifoldPoint
) -> LyapunovResult:
    """Ising-in-a-field special case (mu_y = 0, coupling = J_zz along zz)."""
    if model.field_strength == 0.0:
        raise ModelError("analytic IS exponent needs a nonzero field")
    if abs(model.mu[1]) > 1e-14:
        raise ModelError("Ising closed form assumes mu_y = 0")
    j = model.coupling
    off = j - np.diag(np.diag(j))
    if np.any(off != 0.0) or j[0, 0] != 0.0 or j[1, 1] != 0.0:
        raise ModelError("Ising closed form needs coupling = J_zz z x z")
    jzz = float(j[2, 2])
    u = model.field_direction()
    n = anchor.unit_vector()
    un = float(u @ n)
    lam_sq = 0.25 * jzz**2 * u[0] ** 2 * ((1.0 - 3.0 * u[2] ** 2) * un**2 + 2.0 * u[2] ** 2)
    return LyapunovResult(
        lambda_=math.sqrt(abs(lam_sq)),
        omega=model.field_strength,
        method=LyapunovMethod.ANALYTICAL_IS,
        alpha=lam_sq,
    )


def is_rotating_frame_generator(model: SpinChainModel, anchor: ManifoldPoint) -> np.ndarray:
    """Linearized rotating-frame generator about the IS fixed point, (3N, 3N).

    Block structure: d eps_i/dt = nu_i M (eps_{i-1} + eps_{i+1}) with
    M = -n_x jbar.  Its spectrum is the analytic Lyapunov spectrum.
    """
    model.require_is_usable()
    n_sites = model.n_sites
    fc = floquet_averaged_coupling(model)
    n = anchor.unit_vector()
    nx = np.array(
        [[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]]
    )
    m = -nx @ fc.jbar
    nu = is_sign_pattern(n_sites)
    gen = np.zeros((3 * n_sites, 3 * n_sites))
    for i in range(n_sites):
        for nb in ((i - 1) % n_sites, (i + 1) % n_sites):
            gen[3 * i : 3 * i + 3, 3 * nb : 3 * nb + 3] += nu[i] * m
    return gen


# --- monodromy ----------------------------------------------------------------


def _tangent_rhs(s, tangent, model):
    """d(delta s)/dt for tangent columns, shape (N, 3, K)."""
    neigh_s = np.roll(s, 1, axis=0) + np.roll(s, -1, axis=0)
    b = model.mu + neigh_s @ model.coupling.T
    neigh_t = np.roll(tangent, 1, axis=0) + np.roll(tangent, -1, axis=0)
    jt = np.einsum("ab,nbk->nak", model.coupling, neigh_t)
    term1 = np.cross(jt, s[:, :, None], axisa=1, axisb=1, axisc=1)
    term2 = np.cross(b[:, :, None], tangent, axisa=1, axisb=1, axisc=1)
    return term1 + term2


def monodromy_matrix(
    model: SpinChainModel,
    initial: SpinConfiguration,
    period: float,
    steps_per_period: int = 2000,
    closure_tol: float = 1e-6,
) -> np.ndarray:
    """Fundamental matrix of the tangent flow over one period, (3N, 3N).

    The orbit and the analytic variational equations are integrated jointly
    with RK4.  Raises if the orbit fails to close within ``closure_tol`` or
    the tangent field overflows (a sign the orbit is too unstable for a
    single-sweep monodromy; re-orthonormalized propagation would be needed).
    """
    n_sites = initial.n_sites
    if n_sites != model.n_sites:
        raise ModelError("initial configuration does not match model.n_sites")
    dim = 3 * n_sites
    s = initial.orientations.copy()
    tangent = np.eye(dim).reshape(n_sites, 3, dim)
    dt = period / steps_per_period

    for _ in range(steps_per_period):
        k1s = chain_velocity(s, model)
        k1t = _tangent_rhs(s, tangent, model)
        s2 = s + 0.5 * dt * k1s
        k2s = chain_velocity(s2, model)
        k2t = _tangent_rhs(s2, tangent + 0.5 * dt * k1t, model)
        s3 = s + 0.5 * dt * k2s
        k3s = chain_velocity(s3, model)
        k3t = _tangent_rhs(s3, tangent + 0.5 * dt * k2t, model)
        s4 = s + dt * k3s
        k4s = chain_velocity(s4, model)
        k4t = _tangent_rhs(s4, tangent + dt * k3t, model)
        s = _renormalize(s + (dt / 6.0) * (k1s + 2 * k2s + 2 * k3s + k4s))
        tangent = tangent + (dt / 6.0) * (k1t + 2 * k2t + 2 * k3t + k4t)
        if not np.all(np.isfinite(tangent)) or np.max(np.abs(tangent)) > 1e12:
            raise IntegrationError("tangent propagation overflow")

    closure = np.max(np.linalg.norm(s - initial.orientations, axis=1))
    if closure > closure_tol:
        raise IntegrationError(
            f"orbit fails to close over the given period: deviation {closure:.3e}"
        )
    return tangent.reshape(dim, dim)


def lyapunov_monodromy(
    model: SpinChainModel,
    upo: UpoDescriptor,
    initial: SpinConfiguration,
    steps_per_period: int = 2000,
    closure_tol: float = 1e-6,
) -> LyapunovResult:
    """Lyapunov exponent from the largest monodromy eigenvalue modulus.

    lambda = ln max_i |eig_i(M)| / T.  A degenerate unit-circle spectrum
    (log-multiplier below 1e-4 over the period) is reported as a stable
    orbit, lambda = 0.
    """
    m = monodromy_matrix(model, initial, upo.period, steps_per_period, closure_tol)
    moduli = np.abs(np.linalg.eigvals(m))
    raw = math.log(float(np.max(moduli))) / upo.period
    lam = 0.0 if abs(raw) * upo.period < STABLE_LAMBDA_CUTOFF else max(raw, 0.0)
    return LyapunovResult(
        lambda_=lam,
        omega=upo.frequency,
        method=LyapunovMethod.MONODROMY,
        raw_lambda=raw,
    )


# --- classical fidelity baseline ----------------------------------------------


class ConvergenceError(RuntimeError):
    """Ensemble average failed the doubling diagnostic."""


def perturb_configuration(
    config: SpinConfiguration, delta: float, rng: np.random.Generator
) -> np.ndarray:
    """Rotate each spin by a Gaussian angle about a random transverse axis."""
    s = config.orientations
    n = s.shape[0]
    raw = rng.standard_normal((n, 3))
    raw -= (np.sum(raw * s, axis=1, keepdims=True)) * s
    axes = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    angles = rng.normal(0.0, delta, size=n)[:, None]
    # axis is transverse to s, so the Rodrigues formula loses its axial term
    return np.cos(angles) * s + np.sin(angles) * np.cross(axes, s)


def classical_fidelity_map(
    model: SpinChainModel,
    anchor: ManifoldPoint,
    thetas: np.ndarray,
    phis: np.ndarray,
    r_samples: int,
    delta: float = 0.05,
    horizon_periods: float = 200.0,
    transient_periods: float = 20.0,
    samples_per_period: int = 4,
    steps_per_period: int = 200,
    seed: int = 1,
    batch: int = 64,
    convergence_threshold: float | None = None,
) -> ProjectionMap:
    """Time- and ensemble-averaged classical overlap map on the IS manifold.

    An ensemble of ``r_samples`` perturbed copies of the IS configuration at
    the anchor is evolved under the chain dynamics; the map value at each
    manifold point is the average of prod_j ((1 + s_j . s_j(t)) / 2)^(2s)
    over ensemble members and sample times.

    Doubling diagnostic: the map is also accumulated over the first half of
    the ensemble; if the map maximum moves by more than
    ``convergence_threshold`` (relative) when the second half is added, a
    ConvergenceError is raised (or a warning is emitted when no threshold is
    configured).
    """
    if r_samples < 1:
        raise ValueError("r_samples must be >= 1")
    if anchor.manifold is not Manifold.IS:
        raise ModelError("classical fidelity baseline is defined on the IS manifold")
    model.require_is_usable()

    n_sites = model.n_sites
    nu = is_sign_pattern(n_sites)
    base = make_is_state(anchor, n_sites)
    period = 2.0 * math.pi / model.field_strength
    dt = period / steps_per_period
    sample_stride = max(1, steps_per_period // samples_per_period)
    n_transient = int(round(transient_periods * steps_per_period))
    n_total = int(round(horizon_periods * steps_per_period))

    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    dirs = np.stack(
        [np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1
    ).reshape(-1, 3)
    n_grid = dirs.shape[0]
    two_s = 2.0 * model.spin

    acc = np.zeros(n_grid)
    acc_half = np.zeros(n_grid)
    n_half = max(1, r_samples // 2)
    total_samples = 0
    half_samples = 0

    rhs = lambda y: chain_velocity(y, model)
    tiny = np.finfo(float).tiny

    for start in range(0, r_samples, batch):
        members = range(start, min(start + batch, r_samples))
        states = np.stack(
            [
                perturb_configuration(base, delta, np.random.default_rng((seed, r)))
                for r in members
            ]
        )
        in_half = np.array([r < n_half for r in members])
        for k in range(n_total):
            states = _renormalize(_rk4_step(states, dt, rhs))
            if k < n_transient or (k - n_transient) % sample_stride != 0:
                continue
            # log-overlap against every manifold grid point, summed over sites
            logq = np.zeros((n_grid, states.shape[0]))
            for j in range(n_sites):
                x = 0.5 * (1.0 + nu[j] * dirs @ states[:, j, :].T)
                logq += np.log(np.maximum(x, tiny))
            q = np.exp(two_s * logq)
            acc += q.sum(axis=1)
            if np.any(in_half):
                acc_half += q[:, in_half].sum(axis=1)
            total_samples += states.shape[0]
            half_samples += int(np.sum(in_half))

    values = (acc / total_samples).reshape(len(thetas), len(phis))
    if half_samples and half_samples < total_samples:
        half = acc_half / half_samples
        change = abs(half.max() - values.max()) / max(values.max(), tiny)
        if convergence_threshold is not None and change > convergence_threshold:
            raise ConvergenceError(
                f"map maximum moved by {change:.2%} when doubling the ensemble"
            )
        if convergence_threshold is None and change > 0.5:
            warnings.warn(
                f"classical fidelity map may not be converged (doubling moved "
                f"the maximum by {change:.2%})",
                RuntimeWarning,
            )
    return ProjectionMap(np.asarray(thetas), np.asarray(phis), values, Manifold.IS)
