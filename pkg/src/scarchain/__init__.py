"""Quantum scarring diagnostics for many-body spin chains."""

from .model import (
    Manifold,
    ManifoldPoint,
    ModelError,
    SpinChainModel,
    SpinConfiguration,
    UpoDescriptor,
    classical_energy,
    is_sign_pattern,
    load_model_config,
    make_is_state,
    make_model,
    make_ti_state,
)
from .classical import (
    FloquetCoupling,
    IntegrationError,
    LyapunovMethod,
    LyapunovResult,
    PeriodSearchError,
    Trajectory,
    classical_fidelity_map,
    floquet_averaged_coupling,
    integrate_chain,
    integrate_upo,
    lyapunov_analytical_is,
    lyapunov_monodromy,
    monodromy_matrix,
    orbit_period,
    upo_descriptor,
)
from .projection import ProjectionMap, UpoTrace, projection_grid
from .sector import SectorError, SymmetrySector, build_sector
from .quantum import (
    EigenSystem,
    QuantumError,
    SectorOperator,
    SectorState,
    build_hamiltonian,
    coherent_product_state,
    diagonalize,
    evolve,
    evolve_krylov,
    half_chain_entropy,
    load_eigensystem,
    save_eigensystem,
)
from .scars import (
    ScarStats,
    diagonal_ensemble_projection,
    eth_scatter,
    husimi_projection,
    is_upo_family,
    random_sector_state,
    scar_score,
    scar_statistics,
    upo_trace,
)

__version__ = "0.1.0"
