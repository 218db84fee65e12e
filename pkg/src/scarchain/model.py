"""Spin-chain model definitions, presets, and the TI/IS manifold states.

The model family is a homogeneous chain of N spins in a uniform field ``mu``
with nearest-neighbor coupling matrix ``J`` and periodic boundaries.  Two
families of product configurations play a special role: the translationally
invariant (TI) states, all spins aligned, and the interaction-suppressing (IS)
states with the sign pattern ``(+, +, -, -, +, +, -, -, ...)``.

Angle convention (fixed project-wide): ``theta`` is the polar angle measured
from +z, ``phi`` the azimuth from +x in the xy-plane, so a manifold point maps
to the unit vector ``(sin t cos p, sin t sin p, cos t)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

UNIT_NORM_TOL = 1e-12

_PRESET_NAMES = ("ising", "xx", "xxz", "custom")

#: IS pattern period: spins flip every other pair of sites.
IS_BLOCK = 4


class ModelError(ValueError):
    """Invalid model parameters or an operation outside a model's domain."""


class Manifold(enum.Enum):
    """The two UPO manifolds of the classical dynamics."""

    TI = "TI"
    IS = "IS"


def _as_unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ModelError("cannot normalize a zero vector")
    return v / n


@dataclass(frozen=True)
class SpinChainModel:
    """Field vector mu, 3x3 coupling matrix, chain length, and spin magnitude."""

    mu: np.ndarray
    coupling: np.ndarray
    n_sites: int
    spin: float = 0.5

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(3)
        coupling = np.asarray(self.coupling, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(coupling)):
            raise ModelError("mu and coupling must be finite")
        if not np.allclose(coupling, coupling.T, atol=1e-14, rtol=0.0):
            raise ModelError("coupling matrix must be symmetric")
        if self.n_sites < 1:
            raise ModelError(f"n_sites must be positive, got {self.n_sites}")
        if self.spin < 0.5 or round(2 * self.spin) != 2 * self.spin:
            raise ModelError(f"spin must be a half-integer >= 1/2, got {self.spin}")
        mu.setflags(write=False)
        coupling.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "n_sites", int(self.n_sites))
        object.__setattr__(self, "spin", float(self.spin))

    @property
    def field_strength(self) -> float:
        return float(np.linalg.norm(self.mu))

    def field_direction(self) -> np.ndarray:
        """Unit vector along mu; error when the field vanishes."""
        if self.field_strength == 0.0:
            raise ModelError("field direction undefined for zero mu")
        return self.mu / self.field_strength

    def require_is_usable(self):
        """Check the preconditions for any IS-manifold computation."""
        if self.n_sites < 4 or self.n_sites % IS_BLOCK != 0:
            raise ModelError(
                f"IS states need n_sites divisible by 4, got {self.n_sites}"
            )
        if self.field_strength == 0.0:
            raise ModelError("IS computations need a nonzero field mu")

    def with_coupling_scale(self, scale: float) -> "SpinChainModel":
        """Same model with the coupling matrix multiplied by ``scale``."""
        return SpinChainModel(self.mu, scale * self.coupling, self.n_sites, self.spin)


@dataclass(frozen=True)
class ManifoldPoint:
    """A point (theta, phi) of a UPO manifold chart."""

    theta: float
    phi: float
    manifold: Manifold

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise ModelError(f"theta must lie in [0, pi], got {self.theta}")
        object.__setattr__(self, "phi", float(self.phi) % (2 * math.pi))
        object.__setattr__(self, "theta", float(self.theta))

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array(
            [st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)]
        )

    @classmethod
    def from_vector(cls, v, manifold: Manifold) -> "ManifoldPoint":
        v = _as_unit(v)
        theta = math.acos(max(-1.0, min(1.0, v[2])))
        phi = math.atan2(v[1], v[0]) % (2 * math.pi)
        return cls(theta, phi, manifold)


@dataclass(frozen=True)
class SpinConfiguration:
    """N unit 3-vectors: one point of the classical phase space."""

    orientations: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.orientations, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ModelError(f"orientations must be (N, 3), got {arr.shape}")
        norms = np.linalg.norm(arr, axis=1)
        if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
            raise ModelError("spin orientations must be unit vectors")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "orientations", arr)

    @property
    def n_sites(self) -> int:
        return self.orientations.shape[0]


@dataclass(frozen=True)
class UpoDescriptor:
    """A periodic orbit: manifold anchor plus period and frequency."""

    anchor: ManifoldPoint
    period: float
    frequency: float = field(default=0.0)

    def __post_init__(self):
        if self.period <= 0.0:
            raise ModelError(f"period must be positive, got {self.period}")
        freq = 2 * math.pi / self.period
        if self.frequency and not math.isclose(self.frequency, freq, rel_tol=1e-9):
            raise ModelError("frequency inconsistent with period")
        object.__setattr__(self, "frequency", freq)


def is_sign_pattern(n_sites: int) -> np.ndarray:
    """The (+, +, -, -, ...) sign pattern; requires n_sites divisible by 4."""
    if n_sites < 4 or n_sites % IS_BLOCK != 0:
        raise ModelError(f"IS pattern needs n_sites divisible by 4, got {n_sites}")
    pattern = np.array([1.0, 1.0, -1.0, -1.0])
    return np.tile(pattern, n_sites // IS_BLOCK)


def make_ti_state(anchor: ManifoldPoint, n_sites: int) -> SpinConfiguration:
    """All n_sites spins aligned with the anchor."""
    if anchor.manifold is not Manifold.TI:
        raise ModelError("make_ti_state needs a TI-manifold anchor")
    v = anchor.unit_vector()
    return SpinConfiguration(np.tile(v, (n_sites, 1)))


def make_is_state(anchor: ManifoldPoint, n_sites: int) -> SpinConfiguration:
    """Spins along +/- the anchor with the (+, +, -, -, ...) pattern."""
    if anchor.manifold is not Manifold.IS:
        raise ModelError("make_is_state needs an IS-manifold anchor")
    nu = is_sign_pattern(n_sites)
    return SpinConfiguration(nu[:, None] * anchor.unit_vector())


def manifold_state(anchor: ManifoldPoint, n_sites: int) -> SpinConfiguration:
    if anchor.manifold is Manifold.TI:
        return make_ti_state(anchor, n_sites)
    return make_is_state(anchor, n_sites)


def classical_energy(config: SpinConfiguration, model: SpinChainModel) -> float:
    """Energy s * sum_j [mu . s_j + s_j . J . s_{j+1}] with periodic wrap.

    This is the classical Hamiltonian whose gradient flow reproduces the rotor
    dynamics, normalized so it equals the quantum expectation value on the
    coherent product state with the same orientations.
    """
    s = config.orientations
    if s.shape[0] != model.n_sites:
        raise ModelError("configuration size does not match model.n_sites")
    s_next = np.roll(s, -1, axis=0)
    field_term = float(np.sum(s @ model.mu))
    bond_term = float(np.sum((s @ model.coupling) * s_next))
    return model.spin * (field_term + bond_term)


def _coupling_from_components(jxx, jyy, jzz, jxy, jxz, jyz) -> np.ndarray:
    return np.array(
        [
            [jxx, jxy, jxz],
            [jxy, jyy, jyz],
            [jxz, jyz, jzz],
        ],
        dtype=float,
    )


def make_model(
    preset: str,
    mu,
    n_sites: int,
    spin: float = 0.5,
    j_xx: float | None = None,
    j_yy: float | None = None,
    j_zz: float | None = None,
    coupling=None,
) -> SpinChainModel:
    """Build a model from a named preset.

    Presets fill the coupling matrix following the usual conventions:
    ``ising`` uses only J_zz, ``xx`` uses J_xx = J_yy, ``xxz`` uses
    J_xx = J_yy plus J_zz, and ``custom`` takes a full symmetric 3x3 matrix
    (or any subset of diagonal components).
    """
    name = preset.lower()
    if name not in _PRESET_NAMES:
        raise ModelError(f"unknown preset {preset!r}; expected one of {_PRESET_NAMES}")

    if name == "custom":
        if coupling is not None:
            j = np.asarray(coupling, dtype=float)
        else:
            j = _coupling_from_components(
                j_xx or 0.0, j_yy or 0.0, j_zz or 0.0, 0.0, 0.0, 0.0
            )
        return SpinChainModel(mu, j, n_sites, spin)

    if coupling is not None:
        raise ModelError(f"preset {preset!r} does not take a full coupling matrix")

    if name == "ising":
        if j_zz is None:
            raise ModelError("ising preset needs j_zz")
        if j_xx is not None or j_yy is not None:
            raise ModelError("ising preset takes only j_zz")
        j = _coupling_from_components(0.0, 0.0, j_zz, 0.0, 0.0, 0.0)
    elif name == "xx":
        if j_xx is None:
            raise ModelError("xx preset needs j_xx")
        if j_yy is not None and j_yy != j_xx:
            raise ModelError("xx preset requires j_yy == j_xx")
        if j_zz not in (None, 0.0):
            raise ModelError("xx preset has no j_zz; use xxz")
        j = _coupling_from_components(j_xx, j_xx, 0.0, 0.0, 0.0, 0.0)
    else:  # xxz
        if j_xx is None or j_zz is None:
            raise ModelError("xxz preset needs j_xx and j_zz")
        if j_yy is not None and j_yy != j_xx:
            raise ModelError("xxz preset requires j_yy == j_xx")
        j = _coupling_from_components(j_xx, j_xx, j_zz, 0.0, 0.0, 0.0)

    return SpinChainModel(mu, j, n_sites, spin)


# --- flat key=value config files -------------------------------------------

_MODEL_KEYS = {
    "preset": str,
    "mu_x": float,
    "mu_y": float,
    "mu_z": float,
    "Jxx": float,
    "Jyy": float,
    "Jzz": float,
    "Jxy": float,
    "Jxz": float,
    "Jyz": float,
    "N": int,
    "spin": float,
}


def parse_flat_config(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, blank lines ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ModelError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ModelError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def model_from_config(entries: dict) -> SpinChainModel:
    """Build a model from flat config entries; unknown keys are an error."""
    unknown = set(entries) - set(_MODEL_KEYS)
    if unknown:
        raise ModelError(f"unknown model config keys: {sorted(unknown)}")
    if "preset" not in entries:
        raise ModelError("model config needs a 'preset' key")
    typed = {}
    for key, value in entries.items():
        try:
            typed[key] = _MODEL_KEYS[key](value)
        except ValueError as exc:
            raise ModelError(f"config key {key!r}: {exc}") from exc

    mu = (typed.get("mu_x", 0.0), typed.get("mu_y", 0.0), typed.get("mu_z", 0.0))
    n_sites = typed.get("N")
    if n_sites is None:
        raise ModelError("model config needs an 'N' key")
    preset = typed["preset"].lower()
    spin = typed.get("spin", 0.5)

    if preset == "custom":
        j = _coupling_from_components(
            typed.get("Jxx", 0.0),
            typed.get("Jyy", 0.0),
            typed.get("Jzz", 0.0),
            typed.get("Jxy", 0.0),
            typed.get("Jxz", 0.0),
            typed.get("Jyz", 0.0),
        )
        return make_model("custom", mu, n_sites, spin, coupling=j)

    for key in ("Jxy", "Jxz", "Jyz"):
        if key in typed:
            raise ModelError(f"{key} is only valid with preset = custom")
    return make_model(
        preset,
        mu,
        n_sites,
        spin,
        j_xx=typed.get("Jxx"),
        j_yy=typed.get("Jyy"),
        j_zz=typed.get("Jzz"),
    )


def load_model_config(path) -> SpinChainModel:
    return model_from_config(parse_flat_config(Path(path).read_text()))
