"""Monte Carlo detector streams for the unbalanced interferometer, plus the
full analysis pipeline (phase inference, correlation counting, estimation).

Generation is exact: pulses are sampled sequentially, carrying the conditional
state of the delayed-arm light from one detection bin to the next, so the
stream reproduces the joint photon statistics of the interferometer including
the quantum correlations between neighbouring bins.  Randomness is drawn from
counter-based Philox streams keyed per block, so identical seeds give
bit-identical streams under any scheduling.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .fock import FockState, apply_two_mode_block
from .hom import c1_from_ratio
from .source import SourcePulseSpec

TAU_P_DEFAULT_PS = 12300  # pulse period used in the reference setup


class TimetagError(ValueError):
    pass


class EstimationError(TimetagError):
    pass


@dataclass(frozen=True)
class TimeTagRecord:
    detector_id: int
    timestamp_ps: int


@dataclass(frozen=True)
class DriftModel:
    """Slow interferometer phase drift.

    "sinusoid": phi(t) = center + amplitude * sin(2 pi t / period + psi0) with
    psi0 drawn once from the seed.  "random-walk": per-pulse Gaussian steps of
    standard deviation step_rad, accumulated per block.  Both are quasi-static
    over an analysis block.
    """

    kind: str = "sinusoid"
    period_pulses: float = 200_000.0
    amplitude: float = math.pi
    center: float = math.pi
    step_rad: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("sinusoid", "random-walk"):
            raise TimetagError(f"unknown drift kind {self.kind!r}")

    def block_phases(self, n_blocks: int, block_length: int) -> np.ndarray:
        """Phase at each block center."""
        centers = (np.arange(n_blocks) + 0.5) * block_length
        if self.kind == "sinusoid":
            rng = np.random.Generator(np.random.Philox(key=self.seed))
            psi0 = rng.uniform(0.0, 2.0 * math.pi)
            return self.center + self.amplitude * np.sin(
                2.0 * math.pi * centers / self.period_pulses + psi0)
        steps = np.empty(n_blocks)
        for k in range(n_blocks):
            rng = np.random.Generator(
                np.random.Philox(key=self.seed, counter=[0, 0, 0, k]))
            steps[k] = rng.normal(0.0, self.step_rad * math.sqrt(block_length))
        return self.center + np.cumsum(steps)


@dataclass
class TimeTagStream:
    """Column store of detection records plus the pulse period."""

    detector_ids: np.ndarray
    timestamps_ps: np.ndarray
    pulse_period_ps: int = TAU_P_DEFAULT_PS

    def __post_init__(self):
        self.detector_ids = np.asarray(self.detector_ids, dtype=np.uint8)
        self.timestamps_ps = np.asarray(self.timestamps_ps, dtype=np.uint64)
        if self.detector_ids.shape != self.timestamps_ps.shape:
            raise TimetagError("detector and timestamp columns differ in length")
        if len(self.timestamps_ps) and np.any(np.diff(self.timestamps_ps.astype(np.int64)) < 0):
            raise TimetagError("timestamps must be nondecreasing")

    def __len__(self) -> int:
        return len(self.detector_ids)

    def records(self) -> Iterator[TimeTagRecord]:
        for det, ts in zip(self.detector_ids, self.timestamps_ps):
            yield TimeTagRecord(int(det), int(ts))

    def pulse_indices(self) -> np.ndarray:
        return (self.timestamps_ps // np.uint64(self.pulse_period_ps)).astype(np.int64)


# ---------------------------------------------------------------------------
# stream file formats


def write_csv(stream: TimeTagStream, path: Union[str, Path]) -> None:
    with open(path, "w") as fh:
        fh.write("detector_id,timestamp_ps\n")
        for det, ts in zip(stream.detector_ids, stream.timestamps_ps):
            fh.write(f"{det},{ts}\n")


def read_csv(path: Union[str, Path],
             pulse_period_ps: int = TAU_P_DEFAULT_PS) -> TimeTagStream:
    dets: list[int] = []
    times: list[int] = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "detector_id,timestamp_ps":
            raise TimetagError(f"unexpected header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d, t = line.split(",")
            dets.append(int(d))
            times.append(int(t))
    return TimeTagStream(np.array(dets, dtype=np.uint8),
                         np.array(times, dtype=np.uint64), pulse_period_ps)


_BINARY_RECORD = struct.Struct("<BQ")


def write_binary(stream: TimeTagStream, path: Union[str, Path]) -> None:
    arr = np.empty(len(stream), dtype=[("det", "u1"), ("ts", "<u8")])
    arr["det"] = stream.detector_ids
    arr["ts"] = stream.timestamps_ps
    Path(path).write_bytes(arr.tobytes())


def read_binary(path: Union[str, Path],
                pulse_period_ps: int = TAU_P_DEFAULT_PS) -> TimeTagStream:
    raw = Path(path).read_bytes()
    if len(raw) % _BINARY_RECORD.size:
        raise TimetagError("binary stream length is not a whole number of records")
    arr = np.frombuffer(raw, dtype=[("det", "u1"), ("ts", "<u8")])
    return TimeTagStream(arr["det"].copy(), arr["ts"].copy(), pulse_period_ps)


# ---------------------------------------------------------------------------
# exact sequential sampler

# local mode layout for one detection bin:
# 0 delayed shared, 1 delayed unique-of-previous, 2 short shared,
# 3 short unique-of-current, 4 next-delayed shared, 5 next-delayed unique,
# 6 short unique-of-previous (vacuum in), 7 delayed unique-of-current (vacuum in)
_N_LOCAL = 8
_BIN_MODES_D1 = (0, 1, 7)   # delayed-arm outputs (detector 1)
_BIN_MODES_D2 = (2, 6, 3)   # short-arm outputs (detector 2)
_NEXT_MODES = (4, 5)


def _carried_basis(n_max: int) -> list[tuple[int, int]]:
    return [(a, b) for total in range(n_max + 1)
            for a in range(total, -1, -1) for b in (total - a,)]


def _fresh_pulse_state(spec: SourcePulseSpec, phi: float, r1: float) -> FockState:
    """Source pulse after the input splitter, over local modes (2, 3, 4, 5)."""
    from .source import source_state
    pulse = source_state(SourcePulseSpec(theta=spec.theta, alpha=0.0,
                                         m_overlap=spec.m_overlap, p2=spec.p2))
    t_amp = math.sqrt(1.0 - r1)
    l_amp = 1j * math.sqrt(r1) * np.exp(1j * phi)
    slots = {"s": (2, 4), "u": (3, 5)}
    amps: dict[tuple, complex] = {}
    for (ns, nu), amp in pulse.amplitudes.items():
        for ks in range(ns + 1):
            for ku in range(nu + 1):
                coeff = amp
                coeff *= math.sqrt(math.comb(ns, ks)) * t_amp ** ks * l_amp ** (ns - ks)
                coeff *= math.sqrt(math.comb(nu, ku)) * t_amp ** ku * l_amp ** (nu - ku)
                occ = [0] * _N_LOCAL
                occ[slots["s"][0]], occ[slots["s"][1]] = ks, ns - ks
                occ[slots["u"][0]], occ[slots["u"][1]] = ku, nu - ku
                key = tuple(occ)
                amps[key] = amps.get(key, 0.0) + coeff
    cut = max(max(o) for o in amps)
    return FockState(_N_LOCAL, max(cut, 1), amps)


@dataclass
class _StepOperators:
    outcomes: list[tuple[int, int]]
    prob_rows: np.ndarray        # (n_outcomes, D*D) -> probability per outcome
    superops: list[np.ndarray]   # (D*D, D*D) conditional maps
    dim: int


def _build_step_operators(spec: SourcePulseSpec, phi: float, r1: float, r2: float,
                          efficiencies: tuple[float, float]) -> _StepOperators:
    n_max = 2 if spec.p2 else 1
    basis = _carried_basis(n_max)
    index = {occ: i for i, occ in enumerate(basis)}
    dim = len(basis)
    fresh = _fresh_pulse_state(spec, phi, r1)
    bs_pairs = ((2, 0), (6, 1), (3, 7))
    block = np.array([[math.sqrt(1.0 - r2), 1j * math.sqrt(r2)],
                      [1j * math.sqrt(r2), math.sqrt(1.0 - r2)]])

    # Kraus rows per detector micro-occupation: amplitude maps carried -> next
    kraus: dict[tuple, np.ndarray] = {}
    for col, carried in enumerate(basis):
        occ0 = [0] * _N_LOCAL
        occ0[0], occ0[1] = carried
        joint = {}
        for occ, amp in fresh.amplitudes.items():
            o = list(occ)
            o[0] += occ0[0]
            o[1] += occ0[1]
            joint[tuple(o)] = amp
        state = FockState(_N_LOCAL, max(n_max, fresh.cutoff), joint)
        for i, j in bs_pairs:
            state = apply_two_mode_block(state, j, i, block)  # short mode is column 2
        for occ, amp in state.amplitudes.items():
            d_occ = tuple(occ[m] for m in _BIN_MODES_D1 + _BIN_MODES_D2)
            nxt = (occ[_NEXT_MODES[0]], occ[_NEXT_MODES[1]])
            if nxt not in index:
                raise TimetagError("carried occupation exceeded the local basis")
            mat = kraus.setdefault(d_occ, np.zeros((dim, dim), dtype=complex))
            mat[index[nxt], col] += amp

    # group micro-occupations by pre-loss counts, then fold in detection loss
    pre_loss: dict[tuple[int, int], np.ndarray] = {}
    for d_occ, mat in kraus.items():
        n1 = sum(d_occ[:3])
        n2 = sum(d_occ[3:])
        s = np.kron(mat, mat.conj())
        pre_loss[(n1, n2)] = pre_loss.get((n1, n2), 0.0) + s

    eta1, eta2 = efficiencies
    max1 = max(n for n, _ in pre_loss)
    max2 = max(n for _, n in pre_loss)
    outcomes = [(m1, m2) for m1 in range(max1 + 1) for m2 in range(max2 + 1)]
    superops = []
    for m1, m2 in outcomes:
        s = np.zeros((dim * dim, dim * dim), dtype=complex)
        for (n1, n2), s_pre in pre_loss.items():
            if n1 < m1 or n2 < m2:
                continue
            w = (math.comb(n1, m1) * eta1 ** m1 * (1.0 - eta1) ** (n1 - m1) *
                 math.comb(n2, m2) * eta2 ** m2 * (1.0 - eta2) ** (n2 - m2))
            if w > 0.0:
                s = s + w * s_pre
        superops.append(s)
    trace_row = np.eye(dim).reshape(-1)
    prob_rows = np.array([trace_row @ s for s in superops])
    keep = [i for i, _ in enumerate(outcomes)
            if np.any(np.abs(prob_rows[i]) > 1e-300) or outcomes[i] == (0, 0)]
    return _StepOperators([outcomes[i] for i in keep], prob_rows[keep],
                          [superops[i] for i in keep], dim)


GENERATION_BLOCK = 512


def generate_stream(spec: SourcePulseSpec, drift: DriftModel, n_pulses: int,
                    efficiency: Union[float, tuple[float, float]] = 1.0,
                    pulse_period_ps: int = TAU_P_DEFAULT_PS, seed: int = 0,
                    r1: float = 0.5, r2: float = 0.5) -> TimeTagStream:
    """Sample a detector time-tag stream, one detection bin per pulse period.

    Detection outcomes are drawn from the exact joint distribution of the
    interferometer output at the instantaneous drift phase, thinned by the
    detector efficiency.  Timestamps are bin index times the pulse period.
    """
    eff = (efficiency, efficiency) if np.isscalar(efficiency) else tuple(efficiency)
    if not (0.0 < eff[0] <= 1.0 and 0.0 < eff[1] <= 1.0):
        raise TimetagError(f"efficiency must be in (0, 1], got {eff}")
    if n_pulses < 1:
        raise TimetagError("need at least one pulse")
    n_blocks = (n_pulses + GENERATION_BLOCK - 1) // GENERATION_BLOCK
    phis = DriftModel.block_phases(drift, n_blocks, GENERATION_BLOCK)

    dets: list[int] = []
    times: list[int] = []
    rho = None
    for b in range(n_blocks):
        ops = _build_step_operators(spec, float(phis[b]), r1, r2, eff)
        if rho is None:
            rho = np.zeros(ops.dim * ops.dim, dtype=complex)
            rho[0] = 1.0  # vacuum carried state
        rng = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 1, b]))
        start = b * GENERATION_BLOCK
        count = min(GENERATION_BLOCK, n_pulses - start)
        uniforms = rng.random(count)
        prob_rows = ops.prob_rows
        superops = ops.superops
        outcomes = ops.outcomes
        for i in range(count):
            probs = np.clip((prob_rows @ rho).real, 0.0, None)
            total = probs.sum()
            target = uniforms[i] * total
            acc = 0.0
            pick = len(probs) - 1
            for o, p in enumerate(probs):
                acc += p
                if target <= acc:
                    pick = o
                    break
            rho = (superops[pick] @ rho) / probs[pick]
            m1, m2 = outcomes[pick]
            if m1 or m2:
                ts = (start + i) * pulse_period_ps
                dets.extend([1] * m1 + [2] * m2)
                times.extend([ts] * (m1 + m2))
    return TimeTagStream(np.array(dets, dtype=np.uint8),
                         np.array(times, dtype=np.uint64), pulse_period_ps)


# ---------------------------------------------------------------------------
# correlation counting


K_MAX = 3
FAR_KS = (2, 3)


@dataclass
class BlockStats:
    index: int
    n_pulses: int
    n1: int
    n2: int
    g: dict  # (pair, k) -> pair count, k in -K_MAX..K_MAX (autos k >= 0)

    def imbalance(self) -> float:
        total = self.n1 + self.n2
        return (self.n1 - self.n2) / total if total else 0.0


def block_statistics(stream: TimeTagStream, block_length: int) -> list[BlockStats]:
    """Per-block singles and normally ordered pair counts at small delays.

    Only whole blocks are kept; pairs never straddle a block boundary.
    """
    if block_length <= 2 * K_MAX:
        raise TimetagError("block length too small for the delay range")
    pulses = stream.pulse_indices()
    dets = stream.detector_ids
    if len(pulses) == 0:
        raise TimetagError("empty stream")
    n_blocks = int(pulses.max() + 1) // block_length
    if n_blocks == 0:
        raise TimetagError("stream shorter than one analysis block")
    out = []
    for b in range(n_blocks):
        lo, hi = b * block_length, (b + 1) * block_length
        sel = (pulses >= lo) & (pulses < hi)
        rel = pulses[sel] - lo
        d = dets[sel]
        c1 = np.bincount(rel[d == 1], minlength=block_length).astype(np.float64)
        c2 = np.bincount(rel[d == 2], minlength=block_length).astype(np.float64)
        g = {}
        for k in range(-K_MAX, K_MAX + 1):
            if k >= 0:
                g[("D1D2", k)] = float(c1[:block_length - k] @ c2[k:])
            else:
                g[("D1D2", k)] = float(c1[-k:] @ c2[:block_length + k])
        g[("D1D1", 0)] = float(np.sum(c1 * (c1 - 1.0)))
        g[("D2D2", 0)] = float(np.sum(c2 * (c2 - 1.0)))
        for k in range(1, K_MAX + 1):
            g[("D1D1", k)] = float(c1[:block_length - k] @ c1[k:])
            g[("D2D2", k)] = float(c2[:block_length - k] @ c2[k:])
        out.append(BlockStats(b, block_length, int(c1.sum()), int(c2.sum()), g))
    return out


def _far_mean(g: dict, pair: str) -> float:
    vals = []
    for k in FAR_KS:
        vals.append(g[(pair, k)])
        if (pair, -k) in g:
            vals.append(g[(pair, -k)])
    return float(np.mean(vals))


def _sum_stats(blocks: Sequence[BlockStats]) -> dict:
    keys = blocks[0].g.keys()
    return {k: float(sum(b.g[k] for b in blocks)) for k in keys}


# ---------------------------------------------------------------------------
# phase inference


@dataclass(frozen=True)
class PhaseBlock:
    block: int
    phi_hat: float
    n1: int
    n2: int
    flagged: bool


def infer_phase_blocks(stream: TimeTagStream, block_length: int,
                       c1: Optional[float] = None,
                       min_counts: int = 50) -> list[PhaseBlock]:
    """Blockwise phase estimates from the single-count imbalance.

    The imbalance (I1 - I2)/(I1 + I2) equals c1 cos(phi); phases come out in
    [0, pi] (the cosine leaves the sign of phi unresolved).  Without a given
    c1 it is estimated from the imbalance second moment, which assumes the
    drift covers the phase fairly.  Low-count blocks are flagged, not dropped.
    """
    blocks = block_statistics(stream, block_length)
    imb = np.array([b.imbalance() for b in blocks])
    if c1 is None:
        c1 = math.sqrt(max(1e-12, 2.0 * float(np.mean(imb ** 2))))
    out = []
    for b, x in zip(blocks, imb):
        arg = min(1.0, max(-1.0, x / c1)) if c1 > 0 else 0.0
        out.append(PhaseBlock(b.index, math.acos(arg), b.n1, b.n2,
                              b.n1 + b.n2 < min_counts))
    return out


# ---------------------------------------------------------------------------
# parameter estimation


@dataclass(frozen=True)
class ParameterEstimate:
    c1_hat: float
    c1_sigma: float
    m_hat: float
    m_sigma: float
    s_hat: float
    s_sigma: float
    c1_ratio: float
    r_phase_avg: float
    gamma_hat: float
    n_blocks: int
    n_flagged: int
    phase_bins_occupied: int
    phase_binned: tuple  # (bin center, blocks, g2_k0, g2_k1, g2_kfar) rows


def _normalized_block_areas(blocks: Sequence[BlockStats], gamma: float):
    """Per-block Eq.-style normalized areas (k=0, |k|=1 mean, far mean)."""
    rows = []
    for b in blocks:
        far11 = _far_mean(b.g, "D1D1")
        far12 = _far_mean(b.g, "D1D2")
        far22 = _far_mean(b.g, "D2D2")
        norm = 0.25 * (far11 / gamma + 2.0 * far12 + gamma * far22)
        if norm <= 0.0:
            rows.append(None)
            continue
        g0 = b.g[("D1D2", 0)] / norm
        g1 = 0.5 * (b.g[("D1D2", 1)] + b.g[("D1D2", -1)]) / norm
        rows.append((b.imbalance(), g0, g1, far12 / norm, b.n1 + b.n2))
    return rows


def _estimate_gamma(blocks: Sequence[BlockStats]) -> float:
    """Detector efficiency ratio from the phase-independence of the normalization.

    The quarter-sum of far peaks weighted (1/g, 2, g) is independent of the
    drift phase exactly when g matches the detector efficiency ratio, so the
    ratio is recovered by minimizing the variance of the per-block factor.
    This stays unbiased under arbitrary (even one-sided) phase coverage.
    """
    from scipy.optimize import minimize_scalar
    rows = np.array([[_far_mean(b.g, p) for p in PAIRS_ORDER] for b in blocks])
    rows = rows[np.all(rows > 0.0, axis=1)]
    if len(rows) < 4:
        return 1.0

    def spread(log_g: float) -> float:
        g = math.exp(log_g)
        n = 0.25 * (rows[:, 0] / g + 2.0 * rows[:, 1] + g * rows[:, 2])
        return float(np.var(n) / np.mean(n) ** 2)

    res = minimize_scalar(spread, bounds=(-1.5, 1.5), method="bounded",
                          options={"xatol": 1e-10})
    return float(math.exp(res.x))


def _estimate_once(blocks: Sequence[BlockStats],
                   perp_blocks: Optional[Sequence[BlockStats]]) -> dict:
    total = _sum_stats(blocks)
    far11, far12, far22 = (_far_mean(total, p) for p in PAIRS_ORDER)
    if far11 <= 0 or far22 <= 0 or far12 <= 0:
        raise EstimationError("no far-peak coincidences; stream too short")
    gamma = _estimate_gamma(blocks)
    r_hat = 0.5 * (total[("D1D2", 1)] + total[("D1D2", -1)]) / far12
    c1_ratio = c1_from_ratio(r_hat, strict=False)

    rows = [r for r in _normalized_block_areas(blocks, gamma) if r is not None]
    if len(rows) < 4:
        raise EstimationError("too few analysable blocks")
    imb = np.array([r[0] for r in rows])
    g1 = np.array([r[2] for r in rows])
    counts = np.array([r[4] for r in rows], dtype=float)
    x = imb ** 2 - (1.0 - imb ** 2) / np.maximum(counts, 1.0)  # debias imb^2
    if float(np.std(x)) < 1e-6:
        raise EstimationError("insufficient phase coverage: imbalance never varies")
    w = np.sqrt(counts)
    design = np.column_stack([np.ones_like(x), x]) * w[:, None]
    coef, *_ = np.linalg.lstsq(design, g1 * w, rcond=None)
    b0, b1 = float(coef[0]), float(coef[1])
    s_hat = max(0.0, 2.0 * (b0 - 0.75))
    if b1 < 0 and s_hat > 0:
        c1_fit = math.sqrt(min(1.0, s_hat / (-b1)))
    else:
        c1_fit = c1_ratio

    norm_total = 0.25 * (far11 / gamma + 2.0 * far12 + gamma * far22)
    g0_par = total[("D1D2", 0)] / norm_total
    if perp_blocks is not None:
        t_perp = _sum_stats(perp_blocks)
        p11, p12, p22 = (_far_mean(t_perp, p) for p in PAIRS_ORDER)
        gamma_p = math.sqrt(p11 / p22)
        norm_perp = 0.25 * (p11 / gamma_p + 2.0 * p12 + gamma_p * p22)
        g0_perp = t_perp[("D1D2", 0)] / norm_perp
    else:
        g0_perp = 0.5  # exact orthogonal-configuration value for 0/1 pulses
    m_hat = 1.0 - g0_par / g0_perp
    return {"c1": c1_fit, "c1_ratio": c1_ratio, "r": r_hat, "s": s_hat,
            "m": m_hat, "gamma": gamma}


PAIRS_ORDER = ("D1D1", "D1D2", "D2D2")


def estimate_parameters(stream: TimeTagStream,
                        perp_stream: Optional[TimeTagStream] = None,
                        block_length: int = 5000, phase_bins: int = 12,
                        bootstrap: int = 100, seed: int = 1,
                        min_counts: int = 50) -> ParameterEstimate:
    """Estimate coherence and indistinguishability from a time-tag stream.

    The |k|=1 area versus squared single-count imbalance regression yields the
    oscillation amplitude and c1 without needing resolved phase values (the
    imbalance is c1 cos phi, so no drift-coverage assumption enters).  The
    indistinguishability comes from the zero-delay area against an orthogonal
    reference stream when given, else the ideal 0/1 value 1/2.  Confidence
    intervals are bootstrap over blocks.
    """
    blocks = block_statistics(stream, block_length)
    perp_blocks = (block_statistics(perp_stream, block_length)
                   if perp_stream is not None else None)
    flagged = sum(1 for b in blocks if b.n1 + b.n2 < min_counts)
    point = _estimate_once(blocks, perp_blocks)

    # phase-binned report and coverage diagnostic
    phases = infer_phase_blocks(stream, block_length, c1=point["c1"],
                                min_counts=min_counts)
    rows = _normalized_block_areas(blocks, point["gamma"])
    binned = np.zeros((phase_bins, 5))
    for ph, row in zip(phases, rows):
        if row is None or ph.flagged:
            continue
        idx = min(phase_bins - 1, int(ph.phi_hat / math.pi * phase_bins))
        binned[idx, 0] += 1
        binned[idx, 1:] += (row[1], row[2], row[3], 0.0)
    occupied = int(np.sum(binned[:, 0] > 0))
    if occupied < 2:
        raise EstimationError(
            f"insufficient phase coverage: {occupied} of {phase_bins} bins occupied")
    phase_rows = tuple(
        ((i + 0.5) * math.pi / phase_bins, int(binned[i, 0]),
         *(binned[i, 1:4] / binned[i, 0]))
        for i in range(phase_bins) if binned[i, 0] > 0)

    rng = np.random.Generator(np.random.Philox(key=seed))
    samples = {"c1": [], "m": [], "s": []}
    for _ in range(bootstrap):
        pick = rng.integers(0, len(blocks), size=len(blocks))
        sub = [blocks[i] for i in pick]
        sub_perp = None
        if perp_blocks is not None:
            pick_p = rng.integers(0, len(perp_blocks), size=len(perp_blocks))
            sub_perp = [perp_blocks[i] for i in pick_p]
        try:
            est = _estimate_once(sub, sub_perp)
        except EstimationError:
            continue
        for key in samples:
            samples[key].append(est[key])
    sigmas = {k: float(np.std(v)) if len(v) > 10 else float("nan")
              for k, v in samples.items()}

    return ParameterEstimate(
        c1_hat=point["c1"], c1_sigma=sigmas["c1"],
        m_hat=point["m"], m_sigma=sigmas["m"],
        s_hat=point["s"], s_sigma=sigmas["s"],
        c1_ratio=point["c1_ratio"], r_phase_avg=point["r"],
        gamma_hat=point["gamma"], n_blocks=len(blocks), n_flagged=flagged,
        phase_bins_occupied=occupied, phase_binned=phase_rows)
