"""Post-selected path-time two-photon states and their concurrence."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

BASIS = ("UU", "UL", "LU", "LL")  # first slot: early photon path; U upper, L lower


class EntangleError(ValueError):
    pass


@dataclass(frozen=True)
class TwoQubitPureState:
    """Normalized amplitudes over (|UU>, |UL>, |LU>, |LL>)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(4)
        n = np.linalg.norm(v)
        if n <= 0.0:
            raise EntangleError("state has zero norm")
        if abs(n - 1.0) > 1e-9:
            raise EntangleError(f"state norm deviates from 1 by {abs(n - 1.0):.3e}")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def postselected_state(phi: float,
                       weights: Optional[Sequence[float]] = None) -> TwoQubitPureState:
    """Path-time state heralded by coincident early/late detections.

    Default branch weights give the equal-amplitude state
    (i e^{i phi} |LU> + |UU> - e^{2i phi} |LL>)/sqrt(3), with no |UL>
    component (that branch needs more than one photon per pulse).  `weights`
    rescales the branch magnitudes in the order (LU, UU, LL, UL), modeling
    loss or distinguishability attenuating individual branches.
    """
    if weights is None:
        weights = (1.0, 1.0, 1.0, 0.0)
    if len(weights) not in (3, 4):
        raise EntangleError("weights must give 3 or 4 branch magnitudes")
    w_lu, w_uu, w_ll = weights[:3]
    w_ul = weights[3] if len(weights) == 4 else 0.0
    amps = np.zeros(4, dtype=complex)
    amps[BASIS.index("LU")] = 1j * cmath.exp(1j * phi) * w_lu
    amps[BASIS.index("UU")] = w_uu
    amps[BASIS.index("LL")] = -cmath.exp(2j * phi) * w_ll
    amps[BASIS.index("UL")] = w_ul
    n = np.linalg.norm(amps)
    if n <= 0.0:
        raise EntangleError("all branch weights are zero")
    return TwoQubitPureState(amps / n)


StateLike = Union[TwoQubitPureState, np.ndarray, Sequence[complex]]

_SIGMA_YY = np.array([[0, 0, 0, -1],
                      [0, 0, 1, 0],
                      [0, 1, 0, 0],
                      [-1, 0, 0, 0]], dtype=float)


def concurrence(state: StateLike) -> float:
    """Two-qubit concurrence; accepts a pure state (vector) or a density matrix.

    Pure states use 2|ad - bc|; mixed states the spin-flip eigenvalue
    construction, evaluated through a Hermitian similarity so near-pure inputs
    stay accurate.
    """
    if isinstance(state, TwoQubitPureState):
        v = state.amplitudes
    else:
        arr = np.asarray(state, dtype=complex)
        if arr.shape == (4,):
            v = arr
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise EntangleError("pure state is not normalized")
        elif arr.shape == (4, 4):
            return _mixed_concurrence(arr)
        else:
            raise EntangleError(f"unsupported state shape {arr.shape}")
    a, b, c, d = v
    return float(2.0 * abs(a * d - b * c))


def _mixed_concurrence(rho: np.ndarray) -> float:
    if np.max(np.abs(rho - rho.conj().T)) > 1e-9:
        raise EntangleError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-9:
        raise EntangleError(f"density matrix trace deviates from 1 by {abs(tr - 1.0):.3e}")
    evals, vecs = np.linalg.eigh(rho)
    # zero out eigenvalue noise: sqrt would amplify 1e-16 jitter to 1e-8
    evals = np.where(evals > 1e-12 * evals.max(), evals, 0.0)
    w = vecs * np.sqrt(evals)
    # spin-flip overlap matrix is complex symmetric; its singular values are
    # the Wootters eigenvalues, and the SVD keeps near-pure inputs accurate
    a = w.T @ _SIGMA_YY @ w
    lam = np.sort(np.linalg.svd(a, compute_uv=False))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_from_s(s2: float) -> float:
    """Concurrence of the post-selected path state from the k=1 oscillation amplitude."""
    if not 0.0 <= s2 <= 1.0:
        raise EntangleError(f"oscillation amplitude must be in [0, 1], got {s2}")
    return 2.0 * s2 / 3.0
