import json
from pathlib import Path

import numpy as np
import pytest

from sodbt.model import SecondOrderSystem, benchmark_chain, build_proportional

ORACLES = Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def frozen():
    return json.loads(ORACLES.read_text())


def system_from_dict(d):
    mats = {k: np.array(d[k], dtype=float) for k in "MDKBC"}
    return SecondOrderSystem(mats["M"], mats["D"], mats["K"], mats["B"], mats["C"],
                             damping=(d["alpha"], d["beta"]))


def random_spd(rng, n, lo=0.5, hi=4.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (Q * rng.uniform(lo, hi, n)) @ Q.T


def random_system(seed, n=None, nmax=16):
    """Random stable proportionally damped SISO system."""
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(2, nmax + 1))
    M = random_spd(rng, n, 0.5, 2.0)
    K = random_spd(rng, n, 0.5, 50.0)
    alpha = rng.uniform(0.01, 0.2)
    beta = rng.uniform(0.01, 0.2)
    B = rng.standard_normal((n, 1))
    C = rng.standard_normal((1, n))
    return build_proportional(M, K, B, C, alpha, beta)


def scalar_system(m=1.0, d=0.0, k=1.0, b=1.0, c=1.0):
    damping = (d / m, 0.0) if d else (0.0, 0.0)
    return SecondOrderSystem(np.array([[m]]), np.array([[d]]), np.array([[k]]), np.array([[b]]),
                             np.array([[c]]), damping=damping)


@pytest.fixture(scope="session")
def chain50():
    return benchmark_chain()
