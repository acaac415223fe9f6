"""Emitters on the zigzag edge of a honeycomb resonator lattice.

Exact sparse single-excitation dynamics next to the emergent cavity-QED
description: mode structure, decay rates, state-transfer fidelities,
dispersive potentials, and the capacitance-matrix circuit model.
"""

__version__ = "0.1.0"

from .lattice import (LatticeSpec, QubitArrangement, SiteIndex, SiteMap,
                      SparseHermitian, attach_qubits, build_bath_hamiltonian)
from .spectra import (FlatBandSupport, ModeField, bulk_dispersion,
                      dense_spectrum, edge_mode, edge_mode_field,
                      flat_band_support, support_boundary)
from .flatband import (CompactStateTable, ProjectorBlock,
                       cavity_edge_amplitude, cavity_field, cavity_volume,
                       compact_state_amplitudes, orthonormalize)
from .emitters import (EffectiveModel, build_effective_model,
                       dispersive_couplings, bulk_green, gamma_matrix,
                       gamma_quadrature, gamma_smalldelta, rabi_coupling)
from .dynamics import (TimeSeries, compare_models, evolve_effective,
                       evolve_full, qubit_excited_state, rabi_closed_form,
                       rabi_exact, transfer_fidelity, two_qubit_beating)
from .circuit import (CircuitSpec, build_capacitance_matrix, circuit_modes,
                      disorder_flatband_width, extract_hoppings)
