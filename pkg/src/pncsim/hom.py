"""Two-pulse interference observables: peak areas, normalization, visibility.

Peak areas are computed exactly from normally ordered correlations of the
interferometer output state, normalized by the phase-independent factor built
from auto- and cross-correlation far peaks.  Phase averaging uses uniform
deterministic quadrature so repeated runs are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .circuits import CircuitError, LONG_ARM as LONG_ARM_LABEL, MziCircuit, \
    SHORT_ARM as SHORT_ARM_LABEL, build_unbalanced_mzi
from .fock import FockState, annihilate, g2_groups, mean_occupation
from .source import SourcePulseSpec, c1_of, source_state


def _overlap(a: FockState, b: FockState) -> complex:
    """<a|b> over sparse amplitude maps."""
    if len(a.amplitudes) > len(b.amplitudes):
        return _overlap(b, a).conjugate()
    return complex(sum(amp.conjugate() * b.amplitudes.get(occ, 0.0)
                       for occ, amp in a.amplitudes.items()))

PhaseSpec = Union[float, str]

PAIRS = ("D1D2", "D1D1", "D2D2")


class HomError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationHistogram:
    """Normalized peak areas per detector pair and delay index k."""

    peak_areas: Mapping[tuple[str, int], float]
    single_counts: tuple[float, float]
    normalization: float
    phase: PhaseSpec

    def area(self, pair: str, k: int) -> float:
        return self.peak_areas[(pair, k)]


@dataclass(frozen=True)
class HomSummary:
    g2_k0_par: float
    g2_k0_perp: float
    g2_k1: float
    g2_kfar: float
    v_hom: float
    c1_est: float
    m_est: float
    delta_m: float


# ---------------------------------------------------------------------------
# raw (unnormalized) correlations


@dataclass(frozen=True)
class RawCorrelations:
    g: Mapping[tuple[str, int], float]
    singles: tuple[float, float]


def _raw_correlations(spec: SourcePulseSpec, phi: float, perpendicular: bool,
                      window: int, r1: float, r2: float, k_max: int) -> RawCorrelations:
    mzi = build_unbalanced_mzi(window, phi, r1=r1, r2=r2, perpendicular=perpendicular,
                               distinct_pulse_modes=spec.m_overlap < 1.0)
    out = mzi.propagate(spec)
    bins = mzi.analysis_bins
    if k_max > bins.stop - 1 - bins.start:
        raise HomError(f"window {window} too small for k_max={k_max}")
    d1 = {t: mzi.detector_modes(1, t) for t in bins}
    d2 = {t: mzi.detector_modes(2, t) for t in bins}
    g: dict[tuple[str, int], float] = {}
    groups = {"D1D2": (d1, d2), "D1D1": (d1, d1), "D2D2": (d2, d2)}
    for pair, (ga, gb) in groups.items():
        for k in range(-k_max, k_max + 1):
            t0 = bins.start if k >= 0 else bins.start - k
            g[(pair, k)] = g2_groups(out, ga[t0], gb[t0 + k])
    t_mid = bins.start + len(bins) // 2
    singles = (mean_occupation(out, d1[t_mid]), mean_occupation(out, d2[t_mid]))
    return RawCorrelations(g, singles)


def _scale_by_efficiency(raw: RawCorrelations, eff: tuple[float, float]) -> RawCorrelations:
    e1, e2 = eff
    factor = {"D1D2": e1 * e2, "D1D1": e1 * e1, "D2D2": e2 * e2}
    g = {(pair, k): v * factor[pair] for (pair, k), v in raw.g.items()}
    return RawCorrelations(g, (raw.singles[0] * e1, raw.singles[1] * e2))


def _average_raw(raws: Sequence[RawCorrelations]) -> RawCorrelations:
    keys = raws[0].g.keys()
    g = {k: float(np.mean([r.g[k] for r in raws])) for k in keys}
    singles = tuple(float(np.mean([r.singles[i] for r in raws])) for i in (0, 1))
    return RawCorrelations(g, singles)


# ---------------------------------------------------------------------------
# normalization


def detector_gamma(auto_d1_far: float, auto_d2_far: float) -> float:
    """Detector efficiency ratio from phase-symmetric far-peak auto-correlations."""
    if auto_d2_far <= 0.0:
        raise HomError("cannot estimate detector balance from zero counts")
    return math.sqrt(auto_d1_far / auto_d2_far)


def normalization_factor(far_areas: Mapping[str, float], gamma: float = 1.0) -> float:
    """Phase-independent normalization from far-peak auto- and cross-correlations.

    With balanced detection (gamma = 1) this is the plain quarter-sum
    (G_D1D1 + 2 G_D1D2 + G_D2D2)/4 of the far peaks.  A detector efficiency
    imbalance multiplies the three terms by eta1^2, eta1*eta2 and eta2^2;
    weighting the autos by 1/gamma and gamma with gamma = eta1/eta2 restores a
    common eta1*eta2 factor, so normalized areas are unchanged and the factor
    stays phase independent.
    """
    for pair in PAIRS:
        if pair not in far_areas:
            raise HomError(f"missing far-peak area for {pair}")
    total = (far_areas["D1D1"] / gamma + 2.0 * far_areas["D1D2"]
             + gamma * far_areas["D2D2"])
    if total <= 0.0:
        raise HomError("zero total far-peak counts")
    return 0.25 * total


K_FAR_NORM = 2  # far-peak delay used as the normalization reference


def _normalize(raw: RawCorrelations, gamma: float, phase: PhaseSpec) -> CorrelationHistogram:
    far = {pair: raw.g[(pair, K_FAR_NORM)] for pair in PAIRS}
    norm = normalization_factor(far, gamma)
    areas = {key: v / norm for key, v in raw.g.items()}
    return CorrelationHistogram(areas, raw.singles, norm, phase)


# ---------------------------------------------------------------------------
# spec-level simulation entry points


DEFAULT_QUADRATURE = 64


def phase_quadrature(points: int = DEFAULT_QUADRATURE) -> np.ndarray:
    if points < 64:
        raise HomError("phase averaging requires at least 64 quadrature points")
    return np.arange(points) * (2.0 * math.pi / points)


def simulate_histogram(spec: SourcePulseSpec, phi: PhaseSpec,
                       perpendicular: bool = False, window: int = 5,
                       r1: float = 0.5, r2: float = 0.5,
                       efficiencies: tuple[float, float] = (1.0, 1.0),
                       k_max: Optional[int] = None,
                       quadrature_points: int = DEFAULT_QUADRATURE) -> CorrelationHistogram:
    """Exact normalized correlation histogram of the unbalanced interferometer.

    `phi` is either a fixed interferometer phase or "averaged" for a uniform
    quadrature average over [0, 2pi).  Detector efficiencies enter the raw
    correlations multiplicatively (exact for normally ordered quantities); the
    detector balance used in the normalization is estimated from the data via
    phase-symmetrized far-peak auto-correlations, never taken from the inputs.
    """
    if k_max is None:
        k_max = window - 2
    if phi == "averaged":
        raws = [_scale_by_efficiency(
                    _raw_correlations(spec, p, perpendicular, window, r1, r2, k_max),
                    efficiencies)
                for p in phase_quadrature(quadrature_points)]
        avg = _average_raw(raws)
        gamma = detector_gamma(avg.g[("D1D1", K_FAR_NORM)], avg.g[("D2D2", K_FAR_NORM)])
        return _normalize(avg, gamma, "averaged")
    phi = float(phi)
    raw = _scale_by_efficiency(
        _raw_correlations(spec, phi, perpendicular, window, r1, r2, k_max), efficiencies)
    if efficiencies[0] == efficiencies[1]:
        gamma = 1.0
    else:
        mirror = _scale_by_efficiency(
            _raw_correlations(spec, math.pi - phi, perpendicular, window, r1, r2, k_max),
            efficiencies)
        gamma = detector_gamma(raw.g[("D1D1", K_FAR_NORM)] + mirror.g[("D1D1", K_FAR_NORM)],
                               raw.g[("D2D2", K_FAR_NORM)] + mirror.g[("D2D2", K_FAR_NORM)])
    return _normalize(raw, gamma, phi)


def vhom(g2_k0_par: float, g2_k0_perp: float) -> float:
    """Interference visibility from parallel and orthogonal zero-delay areas."""
    if g2_k0_perp <= 0.0:
        raise HomError("orthogonal-configuration reference area must be positive")
    return 1.0 - g2_k0_par / g2_k0_perp


def ratio_phase_averaged(c1: float) -> float:
    """Phase-averaged ratio of the |k|=1 and |k|>=2 peak areas for a 0/1 source."""
    if not 0.0 <= c1 <= 1.0:
        raise HomError(f"c1 must be in [0, 1], got {c1}")
    return 3.0 / (4.0 - 2.0 * c1 * c1)


def c1_from_ratio(r: float, strict: bool = True) -> float:
    """Invert the phase-averaged peak ratio; exact roundtrip with the forward map.

    Ratios outside [3/4, 3/2] are inconsistent with a 0/1 photon model (a
    multi-photon correction is needed); `strict` raises, otherwise the value
    is clamped into the valid range first (statistical use).
    """
    lo, hi = 0.75, 1.5
    if not lo <= r <= hi:
        if strict:
            raise HomError(f"ratio {r} outside [3/4, 3/2]; 0/1 photon model inconsistent")
        r = min(max(r, lo), hi)
    return math.sqrt(max(0.0, (4.0 - 3.0 / r) / 2.0))


def delta_m(c1: float, m: float) -> float:
    """Indistinguishability error when far peaks are used as the reference.

    Assumes the phase-averaged parallel far peaks are suppressed by
    1 - c1^2/2 (purely dephased emitter); validated against the brute-force
    histogram oracle at m in {0, 1}, where the two-internal-mode simulator
    realizes the same suppression.
    """
    if not (0.0 <= c1 <= 1.0 and 0.0 <= m <= 1.0):
        raise HomError("c1 and m must lie in [0, 1]")
    half = c1 * c1 / 2.0
    return (1.0 - m) * half / (1.0 - half)


def naive_visibility(spec: SourcePulseSpec, window: int = 4,
                     quadrature_points: int = DEFAULT_QUADRATURE) -> float:
    """Visibility an experimenter infers normalizing each histogram by its own
    phase-averaged cross-correlation far peaks (the coherence-blind procedure)."""
    k_max = 2
    vals = {}
    for perp in (False, True):
        raws = [_raw_correlations(spec, p, perp, window, 0.5, 0.5, k_max)
                for p in phase_quadrature(quadrature_points)]
        avg = _average_raw(raws)
        vals[perp] = avg.g[("D1D2", 0)] / avg.g[("D1D2", K_FAR_NORM)]
    return 1.0 - vals[False] / vals[True]


def oracle_delta_m(spec: SourcePulseSpec, window: int = 4,
                   quadrature_points: int = DEFAULT_QUADRATURE) -> float:
    return spec.m_overlap - naive_visibility(spec, window, quadrature_points)


def fit_k1_oscillation(spec: SourcePulseSpec, window: int = 5,
                       phis: Optional[Sequence[float]] = None) -> float:
    """Amplitude (max minus min) of the cos(2 phi) oscillation of the |k|=1 area.

    Least-squares fit of a + b cos(2 phi) over a deterministic phase grid; the
    returned amplitude is 2|b|.
    """
    if phis is None:
        phis = [k * math.pi / 8.0 for k in range(8)]
    areas = []
    for p in phis:
        hist = simulate_histogram(spec, p, window=window, k_max=2)
        areas.append(hist.area("D1D2", 1))
    design = np.column_stack([np.ones(len(phis)), np.cos(2.0 * np.asarray(phis))])
    coef, *_ = np.linalg.lstsq(design, np.asarray(areas), rcond=None)
    return 2.0 * abs(float(coef[1]))


def hom_summary(spec: SourcePulseSpec, window: int = 5,
                efficiencies: tuple[float, float] = (1.0, 1.0),
                quadrature_points: int = DEFAULT_QUADRATURE) -> HomSummary:
    """Phase-averaged observables plus estimators for one source setting."""
    par = simulate_histogram(spec, "averaged", window=window,
                             efficiencies=efficiencies,
                             quadrature_points=quadrature_points)
    perp = simulate_histogram(spec, "averaged", perpendicular=True, window=window,
                              efficiencies=efficiencies,
                              quadrature_points=quadrature_points)
    g0_par = par.area("D1D2", 0)
    g0_perp = perp.area("D1D2", 0)
    g1 = par.area("D1D2", 1)
    gfar = par.area("D1D2", K_FAR_NORM)
    v = vhom(g0_par, g0_perp)
    c1_est = c1_from_ratio(g1 / gfar, strict=False)
    return HomSummary(g2_k0_par=g0_par, g2_k0_perp=g0_perp, g2_k1=g1, g2_kfar=gfar,
                      v_hom=v, c1_est=c1_est, m_est=v,
                      delta_m=spec.m_overlap - v)


# ---------------------------------------------------------------------------
# post-selected path state entering the final beamsplitter


def _pre_output_network(mzi: MziCircuit):
    """The interferometer elements before the final beamsplitter layer."""
    from .circuits import Beamsplitter, InterferometerNetwork
    elements = list(mzi.network.elements)
    cut = len(elements)
    while cut > 0 and isinstance(elements[cut - 1], Beamsplitter):
        cut -= 1
    return InterferometerNetwork(mzi.network.mode_labels, tuple(elements[:cut]))


def reduced_path_state(spec: SourcePulseSpec, phi: float, window: int = 5,
                       bin_pair: Optional[tuple[int, int]] = None) -> np.ndarray:
    """Two-qubit density matrix of the path state heralded by a |k|=1 coincidence.

    Retrodicted state of the photon pair entering the final beamsplitter given
    one detection in each of two consecutive time bins in the high-loss limit:
    the normally ordered two-photon correlation matrix over the path (arm)
    labels, with internal structure and undetected modes traced out.  Basis
    order (UU, UL, LU, LL) with U the short arm, L the delayed arm; the first
    slot is the early bin.
    """
    mzi = build_unbalanced_mzi(window, phi,
                               distinct_pulse_modes=spec.m_overlap < 1.0)
    if bin_pair is None:
        mid = mzi.analysis_bins.start + len(mzi.analysis_bins) // 2 - 1
        bin_pair = (mid, mid + 1)
    e_bin, l_bin = bin_pair
    pre = _pre_output_network(mzi)
    state = pre.apply(mzi.input_state(spec))
    labels = pre.mode_labels
    arms = (SHORT_ARM_LABEL, LONG_ARM_LABEL)  # qubit basis order U, L
    internals = sorted({i for _, _, i in labels})

    def lowered(arm_e, arm_l, int_e, int_l):
        m_e = labels.index((arm_e, e_bin, int_e))
        m_l = labels.index((arm_l, l_bin, int_l))
        return annihilate(annihilate(state, m_e), m_l)

    sigma = np.zeros((4, 4), dtype=complex)
    for int_e in internals:
        for int_l in internals:
            branches = {}
            for qe, arm_e in enumerate(arms):
                for ql, arm_l in enumerate(arms):
                    branches[2 * qe + ql] = lowered(arm_e, arm_l, int_e, int_l)
            for q, sq in branches.items():
                for qp, sqp in branches.items():
                    sigma[q, qp] += _overlap(sqp, sq)
    trace = float(np.trace(sigma).real)
    if trace <= 0.0:
        raise HomError("no two-photon component in the requested bins")
    return sigma / trace


# ---------------------------------------------------------------------------
# parameter sweeps (CSV rows)


SWEEP_HEADER = "theta,phi,m,g2_k0,g2_k1,g2_kfar,vhom,c1,ratio"


def sweep_point(theta: float, phi: PhaseSpec, m: float, window: int = 5,
                quadrature_points: int = DEFAULT_QUADRATURE) -> dict:
    """One sweep row: normalized areas, visibility, source c1, measured ratio."""
    spec = SourcePulseSpec(theta=theta, m_overlap=m)
    par = simulate_histogram(spec, phi, window=window,
                             quadrature_points=quadrature_points)
    perp = simulate_histogram(spec, phi, perpendicular=True, window=window,
                              quadrature_points=quadrature_points)
    g0, g1 = par.area("D1D2", 0), par.area("D1D2", 1)
    gfar = par.area("D1D2", K_FAR_NORM)
    return {
        "theta": theta,
        "phi": phi,
        "m": m,
        "g2_k0": g0,
        "g2_k1": g1,
        "g2_kfar": gfar,
        "vhom": vhom(g0, perp.area("D1D2", 0)),
        "c1": c1_of(source_state(spec)),
        "ratio": g1 / gfar,
    }
