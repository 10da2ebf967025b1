"""Linear-optical networks over spatial x time-bin x internal modes.

A network is an ordered element list (beamsplitters, phase shifts, a one-bin
delay per spatial arm, relabelings) over a fixed mode set.  Networks compile
to a dense mode unitary, serialize to JSON, and apply to sparse Fock states
element by element, which stays cheap even when the mode count is large.

Builders cover the path-unbalanced Mach-Zehnder used for two-pulse
interference and the heralded CNOT assembled from two nonlinear-sign blocks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy import optimize

from . import constants
from .fock import FockError, FockState, ModeUnitary, apply_permutation, apply_phase, \
    apply_two_mode_block

ModeLabel = tuple  # (spatial, time_bin, internal)


class CircuitError(ValueError):
    pass


class NsSolveError(CircuitError):
    """Nonlinear-sign block parameters fail the gate contract."""


# ---------------------------------------------------------------------------
# elements


@dataclass(frozen=True)
class Beamsplitter:
    modes: tuple[int, int]
    reflectivity: float
    phase: float = 0.0

    def block(self) -> np.ndarray:
        if not 0.0 <= self.reflectivity <= 1.0:
            raise CircuitError(f"reflectivity out of range: {self.reflectivity}")
        t = math.sqrt(1.0 - self.reflectivity)
        r = math.sqrt(self.reflectivity)
        return np.array([[t, 1j * np.exp(-1j * self.phase) * r],
                         [1j * np.exp(1j * self.phase) * r, t]], dtype=complex)


@dataclass(frozen=True)
class PhaseShift:
    mode: int
    phi: float


@dataclass(frozen=True)
class Delay:
    """Advance every time bin of one spatial arm by one (cyclic in the window)."""

    spatial: object


@dataclass(frozen=True)
class Relabel:
    perm: tuple[int, ...]


Element = Union[Beamsplitter, PhaseShift, Delay, Relabel]


def rotation_elements(i: int, j: int, theta: float) -> list[Element]:
    """Elements realizing the real rotation [[cos, -sin], [sin, cos]] on (i, j)."""
    th = math.remainder(theta, 2.0 * math.pi)
    out: list[Element] = []
    if math.cos(th) < 0.0:
        th = th - math.pi if th > 0 else th + math.pi
        out.append(PhaseShift(i, math.pi))
        out.append(PhaseShift(j, math.pi))
    s = math.sin(th)
    if s != 0.0:
        bs = Beamsplitter((i, j), s * s, -math.pi / 2.0 if s > 0 else math.pi / 2.0)
        out.insert(0, bs)
    return out


# ---------------------------------------------------------------------------
# network


@dataclass(frozen=True)
class InterferometerNetwork:
    mode_labels: tuple[ModeLabel, ...]
    elements: tuple[Element, ...]

    def __post_init__(self):
        if len(set(self.mode_labels)) != len(self.mode_labels):
            raise CircuitError("duplicate mode labels")
        n = len(self.mode_labels)
        for el in self.elements:
            for m in _element_modes(el, self):
                if not 0 <= m < n:
                    raise CircuitError(f"element {el} references unknown mode {m}")

    @property
    def mode_count(self) -> int:
        return len(self.mode_labels)

    def index(self, label: ModeLabel) -> int:
        try:
            return self.mode_labels.index(label)
        except ValueError:
            raise CircuitError(f"no mode labeled {label!r}") from None

    def delay_permutation(self, spatial) -> tuple[int, ...]:
        bins = sorted({b for s, b, _ in self.mode_labels if s == spatial})
        if not bins:
            raise CircuitError(f"no modes with spatial id {spatial!r}")
        nxt = {b: bins[(k + 1) % len(bins)] for k, b in enumerate(bins)}
        perm = list(range(self.mode_count))
        for idx, (s, b, i) in enumerate(self.mode_labels):
            if s == spatial:
                perm[idx] = self.index((s, nxt[b], i))
        return tuple(perm)

    def compile(self) -> ModeUnitary:
        n = self.mode_count
        u = np.eye(n, dtype=complex)
        for el in self.elements:
            u = _element_matrix(el, self) @ u
        return ModeUnitary(n, u)

    def apply(self, state: FockState) -> FockState:
        if state.mode_count != self.mode_count:
            raise CircuitError("state does not match network mode count")
        out = state
        for el in self.elements:
            if isinstance(el, Beamsplitter):
                out = apply_two_mode_block(out, el.modes[0], el.modes[1], el.block())
            elif isinstance(el, PhaseShift):
                out = apply_phase(out, el.mode, el.phi)
            elif isinstance(el, Delay):
                out = apply_permutation(out, self.delay_permutation(el.spatial))
            elif isinstance(el, Relabel):
                out = apply_permutation(out, el.perm)
            else:
                raise CircuitError(f"unknown element {el!r}")
        return out

    def to_json(self) -> str:
        return json.dumps({
            "mode_labels": [list(l) for l in self.mode_labels],
            "elements": [_element_to_dict(el) for el in self.elements],
        })

    @classmethod
    def from_json(cls, text: str) -> "InterferometerNetwork":
        d = json.loads(text)
        labels = tuple(tuple(l) for l in d["mode_labels"])
        elements = tuple(_element_from_dict(e) for e in d["elements"])
        return cls(labels, elements)


def _element_modes(el: Element, net: InterferometerNetwork) -> tuple[int, ...]:
    if isinstance(el, Beamsplitter):
        return el.modes
    if isinstance(el, PhaseShift):
        return (el.mode,)
    if isinstance(el, Relabel):
        return tuple(range(len(el.perm)))
    return ()


def _element_matrix(el: Element, net: InterferometerNetwork) -> np.ndarray:
    n = net.mode_count
    m = np.eye(n, dtype=complex)
    if isinstance(el, Beamsplitter):
        i, j = el.modes
        b = el.block()
        m[i, i], m[i, j] = b[0, 0], b[0, 1]
        m[j, i], m[j, j] = b[1, 0], b[1, 1]
    elif isinstance(el, PhaseShift):
        m[el.mode, el.mode] = np.exp(1j * el.phi)
    elif isinstance(el, Delay):
        perm = net.delay_permutation(el.spatial)
        m = np.zeros((n, n), dtype=complex)
        for src, dst in enumerate(perm):
            m[dst, src] = 1.0
    elif isinstance(el, Relabel):
        m = np.zeros((n, n), dtype=complex)
        for src, dst in enumerate(el.perm):
            m[dst, src] = 1.0
    else:
        raise CircuitError(f"unknown element {el!r}")
    return m


def _element_to_dict(el: Element) -> dict:
    if isinstance(el, Beamsplitter):
        return {"type": "bs", "modes": list(el.modes),
                "reflectivity": el.reflectivity, "phase": el.phase}
    if isinstance(el, PhaseShift):
        return {"type": "phase", "mode": el.mode, "phi": el.phi}
    if isinstance(el, Delay):
        return {"type": "delay", "spatial": el.spatial}
    if isinstance(el, Relabel):
        return {"type": "relabel", "perm": list(el.perm)}
    raise CircuitError(f"unknown element {el!r}")


def _element_from_dict(d: dict) -> Element:
    kind = d["type"]
    if kind == "bs":
        return Beamsplitter(tuple(d["modes"]), d["reflectivity"], d.get("phase", 0.0))
    if kind == "phase":
        return PhaseShift(d["mode"], d["phi"])
    if kind == "delay":
        return Delay(d["spatial"])
    if kind == "relabel":
        return Relabel(tuple(d["perm"]))
    raise CircuitError(f"unknown element type {kind!r}")


def compile_network(network: InterferometerNetwork) -> ModeUnitary:
    """Product of the element matrices in application order."""
    return network.compile()


# ---------------------------------------------------------------------------
# unbalanced Mach-Zehnder over a pulse window


SHORT_ARM = "a"
LONG_ARM = "b"


def _perp(internal: str) -> str:
    return internal + "~"


@dataclass(frozen=True)
class MziCircuit:
    """Unbalanced Mach-Zehnder: W input pulses onto 2 detectors x (W+1) bins.

    Detector 1 is the long-arm-side output (single counts go as 1 + c1 cos phi),
    detector 2 the short-arm side.  Only bins with both interference partners
    (1..W-1) enter histogram analysis.
    """

    network: InterferometerNetwork
    window: int
    phi: float
    perpendicular: bool
    internals: tuple[str, ...]

    @property
    def analysis_bins(self) -> range:
        return range(1, self.window)

    def detector_modes(self, detector: int, time_bin: int) -> tuple[int, ...]:
        arm = LONG_ARM if detector == 1 else SHORT_ARM
        return tuple(idx for idx, (s, b, _) in enumerate(self.network.mode_labels)
                     if s == arm and b == time_bin)

    def input_state(self, spec) -> FockState:
        """Tensor product of W source pulses placed on the short-arm input slots."""
        from .source import source_state  # local import to avoid a cycle
        pulse = source_state(spec)
        labels = self.network.mode_labels
        n = len(labels)
        zero = (0,) * n
        amps = {zero: 1.0 + 0.0j}
        for j in range(self.window):
            distinct = f"u{j}" if f"u{j}" in self.internals else "u"
            mode_of = {0: self.network.index((SHORT_ARM, j, "s")),
                       1: self.network.index((SHORT_ARM, j, distinct))}
            new: dict[tuple, complex] = {}
            for occ, amp in amps.items():
                for (ns, nu), pa in pulse.amplitudes.items():
                    o = list(occ)
                    o[mode_of[0]] += ns
                    o[mode_of[1]] += nu
                    new[tuple(o)] = new.get(tuple(o), 0.0) + amp * pa
            amps = new
        cut = max(max(o) for o in amps)
        return FockState(n, max(cut, 1), amps)

    def propagate(self, spec) -> FockState:
        return self.network.apply(self.input_state(spec))


def build_unbalanced_mzi(window: int, phi: float, r1: float = 0.5, r2: float = 0.5,
                         perpendicular: bool = False,
                         distinct_pulse_modes: bool = False) -> MziCircuit:
    """Build the path-unbalanced interferometer for a W-pulse train.

    The long arm carries a one-bin delay and the slowly varying phase phi; with
    `perpendicular` its internal modes are relabeled to orthogonal partners so
    no interference takes place at the output beamsplitter.
    `distinct_pulse_modes` allocates one unique internal mode per pulse, needed
    for sources with overlap m < 1.
    """
    if window < 4:
        raise CircuitError("window must cover at least 4 pulses")
    if not (0.0 < r1 < 1.0 and 0.0 < r2 < 1.0):
        raise CircuitError("beamsplitter reflectivities must be in (0, 1)")
    internals = ["s"] + ([f"u{j}" for j in range(window)] if distinct_pulse_modes else ["u"])
    full_internal = list(internals)
    if perpendicular:
        full_internal += [_perp(i) for i in internals]
    bins = range(window + 1)
    labels = tuple((arm, b, i) for arm in (SHORT_ARM, LONG_ARM)
                   for b in bins for i in full_internal)
    net = InterferometerNetwork(labels, ())
    idx = net.index

    elements: list[Element] = []
    for b in range(window):  # input pulses occupy bins 0..W-1
        for i in internals:
            elements.append(Beamsplitter((idx((SHORT_ARM, b, i)), idx((LONG_ARM, b, i))), r1))
    for b in bins:
        for i in internals:
            elements.append(PhaseShift(idx((LONG_ARM, b, i)), phi))
    elements.append(Delay(LONG_ARM))
    if perpendicular:
        perm = list(range(len(labels)))
        for b in bins:
            for i in internals:
                p, q = idx((LONG_ARM, b, i)), idx((LONG_ARM, b, _perp(i)))
                perm[p], perm[q] = q, p
        elements.append(Relabel(tuple(perm)))
    for b in bins:
        for i in full_internal:
            elements.append(Beamsplitter((idx((SHORT_ARM, b, i)), idx((LONG_ARM, b, i))), r2))

    net = InterferometerNetwork(labels, tuple(elements))
    return MziCircuit(net, window, phi, perpendicular, tuple(internals))


# ---------------------------------------------------------------------------
# nonlinear-sign block and heralded CNOT


@dataclass(frozen=True)
class HeraldPattern:
    """Exact photon counts on heralding modes; all other modes are wildcards."""

    counts: tuple[tuple[int, int], ...]  # (mode index, required count)

    def full_pattern(self, mode_count: int) -> tuple[Optional[int], ...]:
        pattern: list[Optional[int]] = [None] * mode_count
        for mode, count in self.counts:
            pattern[mode] = count
        return tuple(pattern)


def _ns_conditional_amplitudes(u: np.ndarray) -> np.ndarray:
    """Herald amplitudes of the signal 0/1/2-photon components for one block.

    Modes are ordered (signal, counter ancilla, vacuum ancilla); the ancilla
    input is one photon on the counter mode and the herald is one photon there
    and none on the vacuum mode.
    """
    a, b = u[0, 0], u[1, 1]
    c, d = u[0, 1], u[1, 0]
    return np.array([b, a * b + c * d, a * a * b + 2.0 * a * c * d])


def _ns_unitary(angles: Sequence[float]) -> np.ndarray:
    def rot(i, j, th):
        m = np.eye(3, dtype=complex)
        m[i, i] = m[j, j] = math.cos(th)
        m[i, j] = -math.sin(th)
        m[j, i] = math.sin(th)
        return m

    t1, t2, t3 = angles
    return rot(1, 2, t3) @ rot(0, 1, t2) @ rot(1, 2, t1)


def solve_ns_angles(tol: float = 1e-12) -> tuple[float, float, float]:
    """Derivative-free solve of the nonlinear-sign contract over three rotations.

    Seeded from the closed-form reduction of the contract equations, then
    polished with Powell to machine accuracy.
    """
    lam = constants.NS_LAMBDA
    target = np.array([lam, lam, -lam])

    def residual(angles):
        return float(np.sum(np.abs(_ns_conditional_amplitudes(_ns_unitary(angles)) - target) ** 2))

    c2 = 1.0 - math.sqrt(2.0)
    s2sq = 1.0 - c2 * c2
    c1c3 = -lam * math.sqrt(2.0) / s2sq
    s1s3 = c2 * c1c3 - lam
    diff = math.acos(max(-1.0, min(1.0, c1c3 + s1s3)))
    summ = math.acos(max(-1.0, min(1.0, c1c3 - s1s3)))
    seed = [(summ + diff) / 2.0, math.acos(c2), (summ - diff) / 2.0]
    res = optimize.minimize(residual, seed, method="Powell",
                            options={"xtol": 1e-14, "ftol": 1e-16, "maxiter": 2000})
    if residual(res.x) > tol:
        raise NsSolveError(f"solver residual {residual(res.x):.3e} above {tol:.1e}")
    return tuple(float(x) for x in res.x)


@dataclass(frozen=True)
class NsGate:
    """Heralded sign flip of the two-photon signal component on 3 modes."""

    network: InterferometerNetwork
    herald: HeraldPattern
    herald_probability: float


def _ns_elements(signal: int, counter: int, vac: int) -> list[Element]:
    out: list[Element] = []
    out += rotation_elements(counter, vac, constants.NS_THETA_1)
    out += rotation_elements(signal, counter, constants.NS_THETA_2)
    out += rotation_elements(counter, vac, constants.NS_THETA_3)
    return out


def _verify_ns_contract(u: np.ndarray) -> None:
    lam = constants.NS_LAMBDA
    amps = _ns_conditional_amplitudes(u)
    target = np.array([lam, lam, -lam])
    dev = float(np.max(np.abs(amps - target)))
    if dev > constants.NS_CONTRACT_TOL:
        raise NsSolveError(f"sign-gate contract violated by {dev:.3e}")


def build_ns_gate() -> NsGate:
    """Three-mode nonlinear-sign block with frozen beamsplitter angles.

    Conditioned on one photon at the counter ancilla and none at the vacuum
    ancilla, maps a|0> + b|1> + c|2> to a|0> + b|1> - c|2> with herald
    probability (3 - sqrt(2))/7 independent of the input.  Construction aborts
    if the frozen angles no longer satisfy the contract.
    """
    labels = (("sig", 0, 0), ("anc1", 0, 0), ("anc0", 0, 0))
    net = InterferometerNetwork(labels, tuple(_ns_elements(0, 1, 2)))
    _verify_ns_contract(net.compile().entries)
    return NsGate(net, HeraldPattern(((1, 1), (2, 0))), constants.NS_HERALD_PROBABILITY)


@dataclass(frozen=True)
class CnotCircuit:
    """Heralded CNOT over dual-rail control/target plus four heralding modes."""

    network: InterferometerNetwork
    herald: HeraldPattern

    # mode order: c0, c1, t0, t1, h0, h1, h2, h3
    C0, C1, T0, T1, H0, H1, H2, H3 = range(8)

    @property
    def logical_modes(self) -> tuple[int, int, int, int]:
        return (self.C0, self.C1, self.T0, self.T1)

    def herald_pattern(self) -> tuple[Optional[int], ...]:
        return self.herald.full_pattern(self.network.mode_count)


def _hadamard_elements(i: int, j: int) -> list[Element]:
    # [[1, 1], [1, -1]]/sqrt(2) = rotation(pi/4) after a pi phase on mode j
    return [PhaseShift(j, math.pi)] + rotation_elements(i, j, math.pi / 4.0)


@lru_cache(maxsize=1)
def build_heralded_cnot() -> CnotCircuit:
    """Two nonlinear-sign blocks around a central exchange of the c1/t0 rails.

    Herald: exactly one photon at detectors D1 and D3, none at D0 and D2.
    With one photon on each logical input and each ancilla counter mode, the
    heralded action is an exact CNOT with probability (11 - 6*sqrt(2))/49.
    """
    labels = tuple((name, 0, 0) for name in
                   ("c0", "c1", "t0", "t1", "h0", "h1", "h2", "h3"))
    c = CnotCircuit
    elements: list[Element] = []
    elements += _hadamard_elements(c.T0, c.T1)
    elements += rotation_elements(c.C1, c.T0, math.pi / 4.0)
    elements += _ns_elements(c.C1, c.H1, c.H0)
    elements += _ns_elements(c.T0, c.H3, c.H2)
    elements += rotation_elements(c.C1, c.T0, -math.pi / 4.0)  # undo the central mix
    elements += _hadamard_elements(c.T0, c.T1)
    elements.append(PhaseShift(c.C1, math.pi))  # absorbs the residual control-phase
    net = InterferometerNetwork(labels, tuple(elements))
    _verify_ns_contract(_ns_unitary((constants.NS_THETA_1, constants.NS_THETA_2,
                                     constants.NS_THETA_3)))
    return CnotCircuit(net, HeraldPattern(((c.H0, 0), (c.H1, 1), (c.H2, 0), (c.H3, 1))))
