"""Emitted wavepacket states with photon-number coherence and their metrics.

A pulse is parameterized by the drive pulse area theta, the drive-imposed
phase alpha, the mean wavepacket overlap m between successive pulses, and an
optional two-photon probability p2.  Partial distinguishability is modeled by
splitting each photon between an internal mode shared by all pulses and one
unique to its own pulse; the shared weight is chosen so that the pairwise
wavepacket overlap (and hence the two-photon interference visibility) equals
m exactly.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional

from .fock import FockState


class SourceError(ValueError):
    pass


@dataclass(frozen=True)
class SourcePulseSpec:
    """Wavepacket parameterization: populations from theta, phase alpha, overlap m."""

    theta: float
    alpha: float = 0.0
    m_overlap: float = 1.0
    p2: Optional[float] = None

    def __post_init__(self):
        if not -1e-12 <= self.theta <= math.pi + 1e-12:
            raise SourceError(f"pulse area must be in [0, pi], got {self.theta}")
        object.__setattr__(self, "theta", min(max(float(self.theta), 0.0), math.pi))
        if not 0.0 <= self.m_overlap <= 1.0:
            raise SourceError(f"overlap must be in [0, 1], got {self.m_overlap}")
        if self.p2 is not None:
            if not 0.0 <= self.p2 < 1.0:
                raise SourceError(f"p2 must be in [0, 1), got {self.p2}")
            if self.p2 > self.p1_raw() + 1e-12:
                raise SourceError("p2 exceeds the available excited population")

    def p0(self) -> float:
        return math.cos(self.theta / 2.0) ** 2

    def p1_raw(self) -> float:
        return math.sin(self.theta / 2.0) ** 2

    def populations(self) -> tuple[float, float, float]:
        """(p0, p1, p2) with p0 fixed by theta and p1 reduced to make room for p2."""
        p0 = self.p0()
        p2 = self.p2 or 0.0
        return p0, 1.0 - p0 - p2, p2

    def mean_photon_number(self) -> float:
        p0, p1, p2 = self.populations()
        return p1 + 2.0 * p2

    def internal_split(self) -> tuple[float, float]:
        """Amplitudes (shared, unique) of one photon's internal state.

        The shared weight is m**0.25 so that the overlap of two distinct
        pulses' single-photon wavepackets is sqrt(m) in amplitude, i.e. m in
        probability: the interference visibility then equals m.
        """
        a = self.m_overlap ** 0.25
        return a, math.sqrt(max(0.0, 1.0 - math.sqrt(self.m_overlap)))

    def to_json(self) -> str:
        return json.dumps({"theta": self.theta, "alpha": self.alpha,
                           "m": self.m_overlap, "p2": self.p2})

    @classmethod
    def from_json(cls, text: str) -> "SourcePulseSpec":
        d = json.loads(text)
        return cls(theta=d["theta"], alpha=d.get("alpha", 0.0),
                   m_overlap=d.get("m", 1.0), p2=d.get("p2"))


@dataclass(frozen=True)
class CoherenceMetrics:
    """First-order photon-number coherence, mean photon number, joint amplitude."""

    c1: float
    mu: float
    s2_1m: float

    def __post_init__(self):
        if not -1e-12 <= self.c1 <= 1.0 + 1e-12:
            raise SourceError(f"c1 out of range: {self.c1}")
        if self.s2_1m > self.c1 + 1e-12:
            raise SourceError("joint amplitude cannot exceed c1")


def source_state(spec: SourcePulseSpec) -> FockState:
    """Emitted single-pulse state over internal modes (shared, unique).

    For m = 1 the unique mode carries no weight but is kept in the layout so
    states with different overlaps compose uniformly.  Number amplitudes are
    (sqrt(p0), e^{i alpha} sqrt(p1), e^{2i alpha} sqrt(p2)).
    """
    p0, p1, p2 = spec.populations()
    a_sh, a_un = spec.internal_split()
    phase = complex(math.cos(spec.alpha), math.sin(spec.alpha))
    amps = {}
    if p0 > 0.0:
        amps[(0, 0)] = math.sqrt(p0)
    if p1 > 0.0:
        c1_amp = phase * math.sqrt(p1)
        if a_sh:
            amps[(1, 0)] = c1_amp * a_sh
        if a_un:
            amps[(0, 1)] = c1_amp * a_un
    if p2 > 0.0:
        # (a_sh s^dag + a_un u^dag)^2 / sqrt(2) acting on vacuum
        c2_amp = phase ** 2 * math.sqrt(p2)
        if a_sh:
            amps[(2, 0)] = c2_amp * a_sh ** 2
        if a_sh and a_un:
            amps[(1, 1)] = c2_amp * math.sqrt(2.0) * a_sh * a_un
        if a_un:
            amps[(0, 2)] = c2_amp * a_un ** 2
    cutoff = 2 if p2 > 0.0 else 1
    return FockState(2, cutoff, amps)


def c1_of(state: FockState) -> float:
    """Mean first-order photon-number coherence of a single-pulse state.

    Computed as (1/mu) * sum over internal modes of |<a>|^2, which reduces to
    (1/mu) |sum_n sqrt((n+1) p_n p_{n+1})|^2 for states whose amplitudes are
    sqrt(p_n) times a common progressing phase.  Vacuum input has mu = 0 and
    is reported as zero coherence.
    """
    mu = 0.0
    means = [0.0 + 0.0j] * state.mode_count
    for occ, amp in state.amplitudes.items():
        mu += abs(amp) ** 2 * sum(occ)
        for m in range(state.mode_count):
            if occ[m] == 0:
                continue
            lowered = list(occ)
            lowered[m] -= 1
            other = state.amplitude(lowered)
            means[m] += other.conjugate() * amp * math.sqrt(occ[m])
    if mu <= 0.0:
        warnings.warn("c1 of a vacuum pulse is defined as 0", stacklevel=2)
        return 0.0
    return float(sum(abs(v) ** 2 for v in means) / mu)


def s2_pure_dephasing(c1: float, m: float) -> float:
    """Joint coherence-overlap amplitude for an emitter with pure dephasing only."""
    if not 0.0 <= c1 <= 1.0 or not 0.0 <= m <= 1.0:
        raise SourceError("c1 and m must lie in [0, 1]")
    return c1 * (2.0 * m / (1.0 + m)) if m > 0.0 else 0.0


def coherence_metrics(spec: SourcePulseSpec) -> CoherenceMetrics:
    c1 = c1_of(source_state(spec))
    return CoherenceMetrics(c1=c1, mu=spec.mean_photon_number(),
                            s2_1m=s2_pure_dephasing(c1, spec.m_overlap))


def pulse_area_from_intensity(i_rel: float, sqrt_mapping: bool = False) -> float:
    """Pulse area from relative emission intensity I/I_pi.

    Default is theta = 2 arcsin(I/I_pi).  With `sqrt_mapping` the argument is
    sqrt(I/I_pi) instead, which is the inversion of I proportional to
    sin^2(theta/2); both agree at the endpoints.
    """
    if not 0.0 <= i_rel <= 1.0:
        raise SourceError(f"relative intensity must be in [0, 1], got {i_rel}")
    arg = math.sqrt(i_rel) if sqrt_mapping else i_rel
    return 2.0 * math.asin(arg)
