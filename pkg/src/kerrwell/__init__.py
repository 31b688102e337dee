"""Spectral, semiclassical and Lindblad toolkit for tunable double wells.

Modules: ``hilbert`` (operators and Hamiltonians), ``spectra`` (levels, gaps,
ILAS), ``semiclassics`` (classical landscape, lobe actions, EBK curves),
``dynamics`` (Liouvillian, propagation, activation times) and the sweep
machinery in ``sweep``, ``presets`` and ``cli``.
"""

from __future__ import annotations

from .dynamics import (
    DecayFit,
    DetailedBalanceReport,
    DissipationParams,
    Superoperator,
    Trajectory,
    activation_time,
    activation_time_fit,
    activation_time_spectral,
    detailed_balance_analysis,
    evolve,
    liouvillian,
    steady_state,
    well_projectors,
)
from .errors import (
    BistabilityLostError,
    ConfigError,
    KerrwellError,
    NumericalError,
    UsageError,
)
from .hilbert import (
    Family,
    Hamiltonian,
    ModelParams,
    PhysicalDriveParams,
    annihilation_operator,
    build_chemical_hamiltonian,
    build_hamiltonian,
    build_kpo_hamiltonian,
    coherent_state,
    convert_physical_params,
    momentum_operator,
    position_operator,
)
from .semiclassics import (
    ClassicalLandscape,
    EBKCurve,
    Well,
    analyze_landscape,
    classical_hamiltonian,
    ebk_curve,
    lobe_action,
    rabi_frequency,
    resonance_parabola,
    triple_intersections,
)
from .spectra import GapTrace, Spectrum, eigensystem, gap_trace, ilas, transition_spectrum

__version__ = "0.1.0"
