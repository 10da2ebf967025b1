"""Frozen circuit constants and their provenance hash.

The nonlinear-sign gate angles below were obtained by a derivative-free solve
of the gate contract (equal herald amplitude on the 0- and 1-photon signal
components, sign-flipped on the 2-photon component, with herald probability
NS_HERALD_PROBABILITY) over three real beamsplitter rotations.  They are kept
as literals so compiled circuits are bit-stable across runs; `solve_ns_angles`
in `circuits` rederives them and the test suite asserts agreement.
"""

from __future__ import annotations

import hashlib
import json
import math

# Herald probability of one nonlinear-sign block and of the full two-block
# gate fed with four photons.
NS_HERALD_PROBABILITY = (3.0 - math.sqrt(2.0)) / 7.0
NS_LAMBDA = math.sqrt(NS_HERALD_PROBABILITY)
CNOT_HERALD_PROBABILITY = NS_HERALD_PROBABILITY ** 2  # = (11 - 6*sqrt(2)) / 49

# Rotation angles (radians) of the three-beamsplitter nonlinear-sign block,
# ordered as applied: ancilla pair, signal/ancilla, ancilla pair.
NS_THETA_1 = 2.5697337833885827
NS_THETA_2 = 1.9978749131873728
NS_THETA_3 = -0.2605265825354979

NS_CONTRACT_TOL = 1e-9


def circuit_constants() -> dict:
    return {
        "ns_theta_1": NS_THETA_1,
        "ns_theta_2": NS_THETA_2,
        "ns_theta_3": NS_THETA_3,
        "ns_lambda": NS_LAMBDA,
        "beamsplitter_convention": "[[t, i*e^{-i*psi}*sqrt(r)], [i*e^{i*psi}*sqrt(r), t]]",
    }


def circuit_constants_hash() -> str:
    """Content hash of the frozen constants, embedded in run provenance."""
    blob = json.dumps(circuit_constants(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
