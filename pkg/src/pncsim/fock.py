"""Sparse multimode bosonic Fock states and exact linear-optical operations.

States are stored as maps from occupation vectors to complex amplitudes, so
memory scales with the number of populated basis terms rather than with the
full truncated Hilbert space.  All operations are pure functions returning new
states; nothing mutates in place.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

Occupation = tuple[int, ...]

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
PRUNE_TOL = 1e-14


class FockError(ValueError):
    """Raised on malformed states, patterns or non-unitary matrices."""


@dataclass(frozen=True)
class FockState:
    """Pure state on `mode_count` bosonic modes with at most `cutoff` photons per mode.

    `amplitudes` maps occupation tuples (length `mode_count`) to complex
    amplitudes.  A state is either normalized (default) or explicitly tagged
    `normalized=False`, e.g. for post-selection branches.
    """

    mode_count: int
    cutoff: int
    amplitudes: Mapping[Occupation, complex]
    normalized: bool = True

    def __post_init__(self):
        amps = {tuple(int(n) for n in occ): complex(a)
                for occ, a in self.amplitudes.items()
                if abs(a) > 0.0}
        for occ in amps:
            if len(occ) != self.mode_count:
                raise FockError(f"occupation {occ} does not match mode_count={self.mode_count}")
            if any(n < 0 for n in occ):
                raise FockError(f"negative occupation in {occ}")
            if any(n > self.cutoff for n in occ):
                raise FockError(f"occupation {occ} exceeds cutoff={self.cutoff}")
        object.__setattr__(self, "amplitudes", MappingProxyType(amps))
        if self.normalized and abs(self.norm_sq() - 1.0) > 1e-9:
            raise FockError(f"state tagged normalized but |psi|^2 = {self.norm_sq()!r}")

    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def items_lex(self):
        """Amplitudes in lexicographic occupation order (stable across runs)."""
        return sorted(self.amplitudes.items(), key=lambda kv: kv[0])

    def amplitude(self, occ: Sequence[int]) -> complex:
        return self.amplitudes.get(tuple(occ), 0.0 + 0.0j)

    def renormalized(self) -> "FockState":
        n = math.sqrt(self.norm_sq())
        if n == 0.0:
            raise FockError("cannot normalize a zero state")
        return FockState(self.mode_count, self.cutoff,
                         {o: a / n for o, a in self.amplitudes.items()})

    def total_photon_range(self) -> tuple[int, int]:
        totals = [sum(o) for o in self.amplitudes] or [0]
        return min(totals), max(totals)


@dataclass(frozen=True)
class MixedState:
    """Weighted ensemble of pure states (few-branch mixtures, not dense matrices).

    An empty component tuple is the explicit "no support" marker returned by
    post-selection when nothing matches.
    """

    components: tuple[tuple[float, FockState], ...]

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components if w > 0.0)
        object.__setattr__(self, "components", comps)
        if any(w < 0 for w, _ in comps):
            raise FockError("negative mixture weight")
        if comps and abs(sum(w for w, _ in comps) - 1.0) > 1e-9:
            raise FockError("mixture weights must sum to 1")

    @property
    def is_empty(self) -> bool:
        return not self.components

    def mode_count(self) -> int:
        if self.is_empty:
            raise FockError("empty mixture has no mode count")
        return self.components[0][1].mode_count


State = Union[FockState, MixedState]


@dataclass(frozen=True)
class ModeUnitary:
    """A unitary matrix acting on mode (creation-operator) space."""

    dimension: int
    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (self.dimension, self.dimension):
            raise FockError(f"matrix shape {m.shape} does not match dimension {self.dimension}")
        dev = np.max(np.abs(m.conj().T @ m - np.eye(self.dimension)))
        if dev > UNITARY_TOL:
            raise FockError(f"matrix is not unitary (deviation {dev:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)


# ---------------------------------------------------------------------------
# constructors


def basis_state(occupation: Sequence[int], cutoff: Optional[int] = None) -> FockState:
    occ = tuple(int(n) for n in occupation)
    if cutoff is None:
        cutoff = max(occ) if occ else 0
    return FockState(len(occ), cutoff, {occ: 1.0})


def vacuum(mode_count: int) -> FockState:
    return FockState(mode_count, 0, {(0,) * mode_count: 1.0})


def tensor(a: FockState, b: FockState) -> FockState:
    amps = {}
    for oa, ca in a.amplitudes.items():
        for ob, cb in b.amplitudes.items():
            amps[oa + ob] = ca * cb
    return FockState(a.mode_count + b.mode_count, max(a.cutoff, b.cutoff), amps,
                     normalized=a.normalized and b.normalized)


def _as_components(state: State) -> tuple[tuple[float, FockState], ...]:
    if isinstance(state, MixedState):
        return state.components
    return ((1.0, state),)


# ---------------------------------------------------------------------------
# permanents and the direct (transition-amplitude) unitary lift


def permanent(m: np.ndarray) -> complex:
    """Permanent of a small complex matrix by Ryser's formula (Gray code)."""
    n = m.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n == 1:
        return complex(m[0, 0])
    if n == 2:
        return m[0, 0] * m[1, 1] + m[0, 1] * m[1, 0]
    row_sum = np.zeros(n, dtype=complex)
    total = 0.0 + 0.0j
    sign = -1.0 if n % 2 else 1.0
    prev_gray = 0
    for k in range(1, 2 ** n):
        gray = k ^ (k >> 1)
        bit = gray ^ prev_gray
        j = bit.bit_length() - 1
        if gray & bit:
            row_sum += m[:, j]
        else:
            row_sum -= m[:, j]
        prev_gray = gray
        sign = -sign
        total += sign * np.prod(row_sum)
    return complex(total * (-1.0 if n % 2 else 1.0) * (-1.0) ** n)


def _occupations_of_total(total: int, modes: int, cap: int):
    """All occupation tuples of `modes` modes with given photon total, entries <= cap."""
    if modes == 1:
        if total <= cap:
            yield (total,)
        return
    for first in range(min(total, cap), -1, -1):
        for rest in _occupations_of_total(total - first, modes - 1, cap):
            yield (first,) + rest


def _repeat_indices(occ: Occupation) -> list[int]:
    out = []
    for i, n in enumerate(occ):
        out.extend([i] * n)
    return out


_FACT = [math.factorial(k) for k in range(21)]


def _transition_amplitude(u: np.ndarray, occ_in: Occupation, occ_out: Occupation) -> complex:
    cols = _repeat_indices(occ_in)
    rows = _repeat_indices(occ_out)
    sub = u[np.ix_(rows, cols)]
    norm = math.sqrt(math.prod(_FACT[n] for n in occ_in) *
                     math.prod(_FACT[n] for n in occ_out))
    return permanent(sub) / norm


def _apply_by_permanents(state: FockState, u: np.ndarray) -> dict[Occupation, complex]:
    by_total: dict[int, list[tuple[Occupation, complex]]] = {}
    for occ, amp in state.amplitudes.items():
        by_total.setdefault(sum(occ), []).append((occ, amp))
    out: dict[Occupation, complex] = {}
    modes = state.mode_count
    for total, terms in by_total.items():
        for occ_out in _occupations_of_total(total, modes, total):
            acc = 0.0 + 0.0j
            for occ_in, amp in terms:
                acc += amp * _transition_amplitude(u, occ_in, occ_out)
            if abs(acc) > PRUNE_TOL:
                out[occ_out] = out.get(occ_out, 0.0) + acc
    return out


# ---------------------------------------------------------------------------
# elementary sparse operations (two-mode blocks, phases, permutations)


def apply_two_mode_block(state: FockState, i: int, j: int, block: np.ndarray) -> FockState:
    """Lift a 2x2 unitary block on modes (i, j) to the Fock space of the state.

    Convention: creation operators transform as a_i^dag -> A a_i^dag + C a_j^dag,
    a_j^dag -> B a_i^dag + D a_j^dag for block [[A, B], [C, D]].
    """
    a, b = block[0, 0], block[0, 1]
    c, d = block[1, 0], block[1, 1]
    out: dict[Occupation, complex] = {}
    for occ, amp in state.amplitudes.items():
        ni, nj = occ[i], occ[j]
        total = ni + nj
        if total == 0:
            out[occ] = out.get(occ, 0.0) + amp
            continue
        base = amp / math.sqrt(_FACT[ni] * _FACT[nj])
        for k in range(total + 1):
            coeff = 0.0 + 0.0j
            for p in range(max(0, k - nj), min(ni, k) + 1):
                q = k - p
                coeff += (math.comb(ni, p) * math.comb(nj, q) *
                          a ** p * c ** (ni - p) * b ** q * d ** (nj - q))
            if coeff == 0.0:
                continue
            new_amp = base * coeff * math.sqrt(_FACT[k] * _FACT[total - k])
            occ_new = list(occ)
            occ_new[i], occ_new[j] = k, total - k
            key = tuple(occ_new)
            out[key] = out.get(key, 0.0) + new_amp
    out = {o: v for o, v in out.items() if abs(v) > PRUNE_TOL}
    cut = max((max(o) for o in out), default=0)
    return FockState(state.mode_count, max(cut, 0), out, normalized=state.normalized)


def apply_phase(state: FockState, mode: int, phi: float) -> FockState:
    factor = np.exp(1j * phi)
    amps = {occ: amp * factor ** occ[mode] for occ, amp in state.amplitudes.items()}
    return FockState(state.mode_count, state.cutoff, amps, normalized=state.normalized)


def apply_permutation(state: FockState, perm: Sequence[int]) -> FockState:
    """Relabel modes: photons in mode m move to mode perm[m]."""
    if sorted(perm) != list(range(state.mode_count)):
        raise FockError("not a permutation of the mode indices")
    amps = {}
    for occ, amp in state.amplitudes.items():
        new = [0] * state.mode_count
        for m, n in enumerate(occ):
            new[perm[m]] = n
        amps[tuple(new)] = amp
    return FockState(state.mode_count, state.cutoff, amps, normalized=state.normalized)


# ---------------------------------------------------------------------------
# unitary decomposition (Givens triangularization)


def decompose_unitary(u: np.ndarray):
    """Factor u = G_1^dag G_2^dag ... G_L^dag D into two-mode rotations and phases.

    Returns (blocks, phases) where blocks is a list of (i, j, 2x2 array) in
    application order after the diagonal phases are applied first; i.e.
    applying `phases` then each block in order reproduces u.
    """
    d = u.shape[0]
    work = np.array(u, dtype=complex)
    left: list[tuple[int, int, np.ndarray]] = []
    for col in range(d):
        for row in range(d - 1, col, -1):
            x, y = work[row - 1, col], work[row, col]
            if abs(y) < 1e-15:
                continue
            h = math.hypot(abs(x), abs(y))
            g = np.array([[np.conj(x) / h, np.conj(y) / h],
                          [-y / h, x / h]], dtype=complex)
            work[[row - 1, row], :] = g @ work[[row - 1, row], :]
            left.append((row - 1, row, g))
    phases = np.angle(np.diag(work))
    blocks = [(i, j, g.conj().T) for i, j, g in reversed(left)]
    return blocks, phases


def _apply_by_decomposition(state: FockState, u: np.ndarray) -> FockState:
    blocks, phases = decompose_unitary(u)
    out = state
    for mode, phi in enumerate(phases):
        if abs(phi) > 1e-16:
            out = apply_phase(out, mode, phi)
    for i, j, g in blocks:
        out = apply_two_mode_block(out, i, j, g)
    return out


# ---------------------------------------------------------------------------
# spec-level operations


def apply_mode_unitary(state: State, u: ModeUnitary, strategy: str = "auto") -> State:
    """Fock-space action of a mode unitary.

    `strategy` is one of "auto", "permanent", "decompose". The two explicit
    strategies are independent implementations kept as mutual cross-checks;
    "auto" picks by mode count.
    """
    if isinstance(state, MixedState):
        comps = tuple((w, apply_mode_unitary(s, u, strategy)) for w, s in state.components)
        return MixedState(comps)
    if u.dimension != state.mode_count:
        raise FockError(f"unitary dimension {u.dimension} != mode count {state.mode_count}")
    if strategy == "auto":
        strategy = "permanent" if state.mode_count <= 8 else "decompose"
    if strategy == "permanent":
        amps = _apply_by_permanents(state, u.entries)
        cut = max((max(o) for o in amps), default=0)
        return FockState(state.mode_count, cut, amps, normalized=state.normalized)
    if strategy == "decompose":
        return _apply_by_decomposition(state, u.entries)
    raise FockError(f"unknown strategy {strategy!r}")


def apply_uniform_loss(state: State, mode: int, eta: float) -> MixedState:
    """Bosonic loss channel of transmission eta on one mode.

    Each Kraus branch (l photons lost) stays pure; the result is the weighted
    ensemble over l.
    """
    if not 0.0 <= eta <= 1.0:
        raise FockError(f"transmission must be in [0, 1], got {eta}")
    out: list[tuple[float, FockState]] = []
    for w, pure in _as_components(state):
        max_n = max((occ[mode] for occ in pure.amplitudes), default=0)
        for lost in range(max_n + 1):
            amps = {}
            for occ, amp in pure.amplitudes.items():
                n = occ[mode]
                if n < lost:
                    continue
                coeff = math.sqrt(math.comb(n, lost) * eta ** (n - lost) * (1.0 - eta) ** lost)
                if coeff == 0.0:
                    continue
                occ_new = list(occ)
                occ_new[mode] = n - lost
                amps[tuple(occ_new)] = amp * coeff
            if not amps:
                continue
            branch = FockState(pure.mode_count, pure.cutoff, amps, normalized=False)
            weight = branch.norm_sq() * w
            if weight > 1e-300:
                out.append((weight, branch.renormalized()))
    return MixedState(tuple(out))


Pattern = Sequence[Optional[int]]


def project_pattern(state: FockState, pattern: Pattern) -> tuple[float, Optional[FockState]]:
    """Project a pure state on exact photon counts (None entries are wildcards).

    Returns (probability, conditional state over the wildcard modes) with the
    conditional renormalized, or (0.0, None) when nothing matches.
    """
    if len(pattern) != state.mode_count:
        raise FockError("pattern length does not match mode count")
    keep = [m for m, p in enumerate(pattern) if p is None]
    amps: dict[Occupation, complex] = {}
    prob = 0.0
    for occ, amp in state.amplitudes.items():
        if any(p is not None and occ[m] != p for m, p in enumerate(pattern)):
            continue
        prob += abs(amp) ** 2
        key = tuple(occ[m] for m in keep)
        amps[key] = amps.get(key, 0.0) + amp
    if prob <= 0.0 or not amps:
        return 0.0, None
    scale = 1.0 / math.sqrt(prob)
    cond_amps = {o: a * scale for o, a in amps.items()}
    cut = max((max(o) for o in cond_amps if o), default=0)
    if not keep:
        cond = FockState(0, 0, {(): 1.0})
    else:
        cond = FockState(len(keep), cut, cond_amps)
    return prob, cond


def postselect(state: State, pattern: Pattern) -> tuple[float, MixedState]:
    """Probability and conditional mixture for an exact-count detection pattern.

    Empty matches return probability 0 and an empty mixture, never a division
    by zero.
    """
    comps: list[tuple[float, FockState]] = []
    total = 0.0
    for w, pure in _as_components(state):
        p, cond = project_pattern(pure, pattern)
        if p > 0.0 and cond is not None:
            comps.append((w * p, cond))
            total += w * p
    if total <= 0.0:
        return 0.0, MixedState(())
    return total, MixedState(tuple((wp / total, c) for wp, c in comps))


def annihilate(state: FockState, mode: int) -> FockState:
    """Unnormalized action of the annihilation operator on one mode."""
    amps = {}
    for occ, amp in state.amplitudes.items():
        n = occ[mode]
        if n == 0:
            continue
        occ_new = list(occ)
        occ_new[mode] = n - 1
        amps[tuple(occ_new)] = amp * math.sqrt(n)
    return FockState(state.mode_count, state.cutoff, amps, normalized=False)


def mean_occupation(state: State, modes: Union[int, Sequence[int]]) -> float:
    """Expectation of the photon number summed over the given mode(s)."""
    group = (modes,) if isinstance(modes, int) else tuple(modes)
    total = 0.0
    for w, pure in _as_components(state):
        for occ, amp in pure.amplitudes.items():
            total += w * abs(amp) ** 2 * sum(occ[m] for m in group)
    return total


def normally_ordered_g2(state: State, modes: tuple[int, int]) -> float:
    """Exact <a_i^dag a_j^dag a_j a_i> (per-bin unnormalized coincidence rate)."""
    i, j = modes
    total = 0.0
    for w, pure in _as_components(state):
        total += w * annihilate(annihilate(pure, i), j).norm_sq()
    return total


def g2_groups(state: State, group_i: Sequence[int], group_j: Sequence[int]) -> float:
    """Normally ordered correlation of total photon numbers of two mode groups.

    Sums <a_i^dag a_j^dag a_j a_i> over all mode pairs, which equals
    <: N_i N_j :> for the group number operators (detectors that do not
    resolve internal mode structure).
    """
    total = 0.0
    for w, pure in _as_components(state):
        for i in group_i:
            lowered = annihilate(pure, i)
            if not lowered.amplitudes:
                continue
            for j in group_j:
                total += w * annihilate(lowered, j).norm_sq()
    return total
