"""Exact Fock-space toolkit for interference of photon wavepackets that carry
coherence with the vacuum: two-pulse interferometry, post-selected
entanglement, heralded gates, and detector-stream Monte Carlo."""

from .circuits import (Beamsplitter, CnotCircuit, Delay, HeraldPattern,
                       InterferometerNetwork, MziCircuit, NsGate, NsSolveError,
                       PhaseShift, Relabel, build_heralded_cnot, build_ns_gate,
                       build_unbalanced_mzi, compile_network, solve_ns_angles)
from .cnot import (HeraldedGateResult, PhaseConfig, bayes_fidelity,
                   optimize_phases, run_gate, sweep_theta)
from .constants import CNOT_HERALD_PROBABILITY, NS_HERALD_PROBABILITY, \
    circuit_constants_hash
from .entangle import (TwoQubitPureState, concurrence, concurrence_from_s,
                       postselected_state)
from .fock import (FockError, FockState, MixedState, ModeUnitary,
                   apply_mode_unitary, apply_uniform_loss, basis_state,
                   g2_groups, mean_occupation, normally_ordered_g2, postselect,
                   tensor, vacuum)
from .hom import (CorrelationHistogram, HomSummary, c1_from_ratio, delta_m,
                  fit_k1_oscillation, hom_summary, naive_visibility,
                  normalization_factor, oracle_delta_m, ratio_phase_averaged,
                  reduced_path_state, simulate_histogram, vhom)
from .source import (CoherenceMetrics, SourcePulseSpec, c1_of,
                     coherence_metrics, pulse_area_from_intensity, source_state,
                     s2_pure_dephasing)
from .timetag import (DriftModel, EstimationError, ParameterEstimate,
                      TimeTagRecord, TimeTagStream, block_statistics,
                      estimate_parameters, generate_stream, infer_phase_blocks,
                      read_binary, read_csv, write_binary, write_csv)

__version__ = "0.1.0"
