"""Heralded-CNOT performance versus pulse area, input phases, and photon loss.

Inputs are four emitted wavepackets (control, target, two gate ancillas),
either coherent 0/1 superpositions with individual phases or their incoherent
(dephased) counterparts.  The control photon is prepared across both control
rails, the target on its 0 rail, matching a logical (|0> + |1>) x |0> input,
so the ideal heralded output is the Bell state Phi+.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .circuits import CircuitError, CnotCircuit, build_heralded_cnot
from .constants import CNOT_HERALD_PROBABILITY
from .fock import FockState, MixedState, apply_mode_unitary, postselect
from .source import SourcePulseSpec

TWO_PI = 2.0 * math.pi


class GateInputError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseConfig:
    """Phases of the four input wavepackets (control, target, ancilla 1, ancilla 2)."""

    alphas: tuple[float, float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "alphas",
                           tuple(float(a) % TWO_PI for a in self.alphas))


@dataclass(frozen=True)
class HeraldedGateResult:
    p_herald: float
    fidelity: float
    conditional_state: MixedState
    inputs: tuple[SourcePulseSpec, ...]


# basis occupations of the logical two-qubit space (c0, c1, t0, t1)
_LOGICAL = {"00": (1, 0, 1, 0), "01": (1, 0, 0, 1),
            "10": (0, 1, 1, 0), "11": (0, 1, 0, 1)}


def _check_gate_input(spec: SourcePulseSpec) -> None:
    if spec.p2:
        raise GateInputError("gate inputs are 0/1 wavepackets; p2 is not supported here")
    if spec.m_overlap != 1.0:
        raise GateInputError("gate inputs assume fully indistinguishable photons (m = 1)")


def _branch_state(circ: CnotCircuit, emitted: frozenset[int]) -> FockState:
    """Photons of the emitting subset placed on their input modes (no phases).

    Source order: 0 control (spread over both rails), 1 target (rail t0),
    2 ancilla on h1, 3 ancilla on h3.
    """
    base = [0] * 8
    if 1 in emitted:
        base[circ.T0] = 1
    if 2 in emitted:
        base[circ.H1] = 1
    if 3 in emitted:
        base[circ.H3] = 1
    if 0 not in emitted:
        return FockState(8, 1, {tuple(base): 1.0})
    o1, o2 = list(base), list(base)
    o1[circ.C0] = 1
    o2[circ.C1] = 1
    r = 1.0 / math.sqrt(2.0)
    return FockState(8, 1, {tuple(o1): r, tuple(o2): r})


def coherent_input_state(theta: float, alphas: Sequence[float]) -> FockState:
    """Product of four 0/1 wavepackets with phases, control spread over its rails."""
    circ = build_heralded_cnot()
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    amps: dict[tuple, complex] = {}
    for emitted in _subsets():
        mag = s ** len(emitted) * c ** (4 - len(emitted))
        if mag == 0.0:
            continue
        phase = np.exp(1j * sum(alphas[i] for i in emitted))
        for occ, a in _branch_state(circ, emitted).amplitudes.items():
            amps[occ] = amps.get(occ, 0.0) + mag * phase * a
    return FockState(8, 1, amps)


@lru_cache(maxsize=1)
def _subsets() -> tuple[frozenset[int], ...]:
    return tuple(frozenset(s) for r in range(5)
                 for s in itertools.combinations(range(4), r))


def _phi_plus_overlap(component: FockState) -> complex:
    return (component.amplitude(_LOGICAL["00"]) +
            component.amplitude(_LOGICAL["11"])) / math.sqrt(2.0)


def run_gate(inputs: Sequence[SourcePulseSpec], incoherent: bool = False) -> HeraldedGateResult:
    """Exact heralded-gate run for four source pulses.

    Coherent inputs use the full eight-mode state with all emission subsets
    interfering; `incoherent` replaces each input by its dephased mixture, in
    which case the input phases drop out.  Fidelity is the overlap of the
    heralded logical state with the Bell state Phi+.
    """
    inputs = tuple(inputs)
    if len(inputs) != 4:
        raise GateInputError("the gate takes exactly four input pulses")
    for spec in inputs:
        _check_gate_input(spec)
    thetas = {spec.theta for spec in inputs}
    if len(thetas) != 1:
        raise GateInputError("all four inputs share one pulse area in this study")
    theta = inputs[0].theta
    circ = build_heralded_cnot()
    unitary = _compiled_unitary()
    pattern = circ.herald_pattern()

    if not incoherent:
        state = coherent_input_state(theta, [s.alpha for s in inputs])
        out = apply_mode_unitary(state, unitary)
        p, cond = postselect(out, pattern)
        if p <= 0.0:
            return HeraldedGateResult(0.0, 0.0, MixedState(()), inputs)
        fid = sum(w * abs(_phi_plus_overlap(comp)) ** 2 for w, comp in cond.components)
        return HeraldedGateResult(p, fid, cond, inputs)

    c2, s2 = math.cos(theta / 2.0) ** 2, math.sin(theta / 2.0) ** 2
    p_total = 0.0
    fid_total = 0.0
    comps: list[tuple[float, FockState]] = []
    for emitted in _subsets():
        w = s2 ** len(emitted) * c2 ** (4 - len(emitted))
        if w == 0.0:
            continue
        out = apply_mode_unitary(_branch_state(circ, emitted), unitary)
        p, cond = postselect(out, pattern)
        if p <= 0.0:
            continue
        p_total += w * p
        for cw, comp in cond.components:
            comps.append((w * p * cw, comp))
            fid_total += w * p * cw * abs(_phi_plus_overlap(comp)) ** 2
    if p_total <= 0.0:
        return HeraldedGateResult(0.0, 0.0, MixedState(()), inputs)
    cond = MixedState(tuple((cw / p_total, comp) for cw, comp in comps))
    return HeraldedGateResult(p_total, fid_total / p_total, cond, inputs)


@lru_cache(maxsize=1)
def _compiled_unitary():
    return build_heralded_cnot().network.compile()


def bayes_fidelity(p1: float, p_herald: float) -> float:
    """Heralded Bell fidelity p1^4 * P(h|4) / P(h) from the four-photon argument."""
    if p_herald <= 0.0:
        raise GateInputError("herald probability must be positive")
    f = p1 ** 4 * CNOT_HERALD_PROBABILITY / p_herald
    if f > 1.0 + 1e-9:
        warnings.warn(f"Bayes fidelity {f} exceeds 1: inconsistent inputs", stacklevel=2)
    return min(f, 1.0)


# ---------------------------------------------------------------------------
# fast phase evaluator: output amplitudes are linear in one phase factor per
# emission subset, so herald statistics reduce to small matrix products


class HeraldPolynomial:
    """Heralded output amplitudes of the gate as functions of the input phases.

    For a fixed pulse area, the amplitude on each heralded logical occupation
    is sum_S z(S, occ) * exp(i sum_{k in S} alpha_k) over emission subsets S.
    """

    def __init__(self, theta: float):
        circ = build_heralded_cnot()
        unitary = _compiled_unitary()
        pattern = circ.herald_pattern()
        c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
        subsets = _subsets()
        occ_index: dict[tuple, int] = {}
        cols: list[dict[int, complex]] = []
        for emitted in subsets:
            mag = s ** len(emitted) * c ** (4 - len(emitted))
            col: dict[int, complex] = {}
            if mag > 0.0:
                out = apply_mode_unitary(_branch_state(circ, emitted), unitary)
                for occ, amp in out.amplitudes.items():
                    if any(p is not None and occ[m] != p
                           for m, p in enumerate(pattern)):
                        continue
                    logical = tuple(occ[m] for m in circ.logical_modes)
                    idx = occ_index.setdefault(logical, len(occ_index))
                    col[idx] = col.get(idx, 0.0) + mag * amp
            cols.append(col)
        self.theta = theta
        self._chi = np.array([[1.0 if k in sub else 0.0 for k in range(4)]
                              for sub in subsets])
        z = np.zeros((len(occ_index), len(subsets)), dtype=complex)
        for j, col in enumerate(cols):
            for idx, amp in col.items():
                z[idx, j] = amp
        self._z = z
        self._phi_plus_row = np.zeros(len(occ_index), dtype=complex)
        for key, sign in ((_LOGICAL["00"], 1.0), (_LOGICAL["11"], 1.0)):
            if key in occ_index:
                self._phi_plus_row[occ_index[key]] += sign / math.sqrt(2.0)

    def _amplitudes(self, alphas: Sequence[float]) -> np.ndarray:
        phases = np.exp(1j * (self._chi @ np.asarray(alphas, dtype=float)))
        return self._z @ phases

    def p_herald(self, alphas: Sequence[float]) -> float:
        amps = self._amplitudes(alphas)
        return float(np.sum(np.abs(amps) ** 2))

    def fidelity(self, alphas: Sequence[float]) -> float:
        amps = self._amplitudes(alphas)
        p = float(np.sum(np.abs(amps) ** 2))
        if p <= 0.0:
            return 0.0
        return float(abs(self._phi_plus_row @ amps) ** 2) / p

    def p_herald_incoherent(self) -> float:
        return float(np.sum(np.abs(self._z) ** 2))


@lru_cache(maxsize=64)
def herald_polynomial(theta: float) -> HeraldPolynomial:
    return HeraldPolynomial(theta)


# ---------------------------------------------------------------------------
# sweeps and phase optimization


@dataclass(frozen=True)
class ThetaPoint:
    theta: float
    p_herald: float
    fidelity: float
    p4: float
    bayes_f: float


def sweep_theta(grid: Sequence[float], phase_config: Optional[PhaseConfig] = None,
                incoherent: bool = False) -> list[ThetaPoint]:
    """Heralding probability and fidelity along a pulse-area grid."""
    alphas = (phase_config or PhaseConfig((0.0, 0.0, 0.0, 0.0))).alphas
    points = []
    for theta in grid:
        if not -1e-12 <= theta <= math.pi + 1e-12:
            raise GateInputError(f"grid point {theta} outside [0, pi]")
        theta = min(max(float(theta), 0.0), math.pi)
        specs = tuple(SourcePulseSpec(theta=theta, alpha=a) for a in alphas)
        res = run_gate(specs, incoherent=incoherent)
        p1 = math.sin(theta / 2.0) ** 2
        bay = bayes_fidelity(p1, res.p_herald) if res.p_herald > 0.0 else 0.0
        points.append(ThetaPoint(theta, res.p_herald, res.fidelity, p1 ** 4, bay))
    return points


def optimize_phases(theta: float, objective: str = "max",
                    grid_points: int = 8) -> tuple[PhaseConfig, float, float]:
    """Extremal herald probability over the four input phases.

    Deterministic coarse grid (grid_points per axis) followed by Nelder-Mead
    refinement from the best grid node.  Returns the phase configuration, the
    herald probability there, and the corresponding heralded Bell fidelity.
    """
    if not 0.0 < theta <= math.pi:
        raise GateInputError("pulse area must be in (0, pi]")
    if objective not in ("max", "min"):
        raise GateInputError("objective must be 'max' or 'min'")
    if grid_points < 8:
        raise GateInputError("phase grid needs at least 8 points per axis")
    poly = herald_polynomial(theta)
    sign = -1.0 if objective == "max" else 1.0

    def cost(alphas):
        return sign * poly.p_herald(alphas)

    axis = np.arange(grid_points) * (TWO_PI / grid_points)
    best_val, best_alphas = math.inf, (0.0,) * 4
    for alphas in itertools.product(axis, repeat=4):
        v = cost(alphas)
        if v < best_val:
            best_val, best_alphas = v, alphas
    res = optimize.minimize(cost, best_alphas, method="Nelder-Mead",
                            options={"xatol": 1e-9, "fatol": 1e-13,
                                     "maxiter": 4000, "maxfev": 8000})
    alphas = tuple(float(a) for a in (res.x if res.fun <= best_val else best_alphas))
    config = PhaseConfig(alphas)
    p = poly.p_herald(config.alphas)
    return config, p, poly.fidelity(config.alphas)
