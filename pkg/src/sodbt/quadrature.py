"""Symmetric frequency quadrature rules.

A rule stores ``nu`` positive nodes with weights ``rho_j = sqrt(w_j / 2pi)``,
where ``w_j`` are composite-trapezoid weights on the positive grid.  The full
rule mirrors every node to ``-x`` with the same weight, so a Gramian integral
``1/(2pi) int_R f`` is approximated by ``sum_j rho_j^2 f(x_j)`` over ``2 nu``
signed nodes.  Signed nodes are kept interleaved as ``(x1, -x1, x2, -x2, ...)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadInterval, InvariantViolation, NotIncreasing

P_SIDE = "P"
Q_SIDE = "Q"
DISJOINT_RTOL = 1e-12


def logspace_nodes(lo, hi, nu):
    """``nu`` geometrically spaced nodes from ``lo`` to ``hi`` inclusive."""
    if not (np.isfinite(lo) and np.isfinite(hi)) or not 0 < lo < hi:
        raise BadInterval(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    if int(nu) != nu or nu < 2:
        raise BadInterval(f"need at least 2 nodes, got nu={nu}")
    x = np.geomspace(lo, hi, int(nu))
    x[0], x[-1] = lo, hi
    if np.any(np.diff(x) <= 0):
        raise BadInterval(f"interval [{lo}, {hi}] too narrow for {nu} distinct nodes")
    return x


def trapezoid_raw(nodes):
    """Composite-trapezoid weights ``w_j`` on ``nodes`` (no 2pi scaling)."""
    x = np.asarray(nodes, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise NotIncreasing("need at least two nodes")
    h = np.diff(x)
    if np.any(h <= 0):
        raise NotIncreasing("nodes must be strictly increasing")
    w = np.empty_like(x)
    w[0] = h[0] / 2
    w[-1] = h[-1] / 2
    w[1:-1] = (h[:-1] + h[1:]) / 2
    return w


def trapezoid_weights(nodes):
    """Square-root weights ``rho_j = sqrt(w_j / (2 pi))``."""
    return np.sqrt(trapezoid_raw(nodes) / (2 * np.pi))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    side: str
    positive_nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.array(self.positive_nodes, dtype=float).ravel()
        w = np.array(self.weights, dtype=float).ravel()
        if self.side not in (P_SIDE, Q_SIDE):
            raise InvariantViolation(f"side must be 'P' or 'Q', got {self.side!r}")
        if x.size != w.size:
            raise InvariantViolation("node and weight counts differ")
        if x.size == 0:
            raise InvariantViolation("empty quadrature rule")
        if np.any(x <= 0) or np.any(np.diff(x) <= 0):
            raise InvariantViolation("positive nodes must be > 0 and strictly increasing")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise InvariantViolation("weights must be positive")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positive_nodes", x)
        object.__setattr__(self, "weights", w)

    @property
    def nu(self):
        return self.positive_nodes.size

    @property
    def size(self):
        return 2 * self.nu

    @property
    def nodes(self):
        """Signed nodes in interleaved order ``(x1, -x1, x2, -x2, ...)``."""
        return np.column_stack([self.positive_nodes, -self.positive_nodes]).ravel()

    @property
    def full_weights(self):
        return np.repeat(self.weights, 2)

    def canonical(self):
        """Rule rebuilt from its nodes sorted ascending (identity for valid rules)."""
        order = np.argsort(self.positive_nodes)
        return QuadratureRule(self.side, self.positive_nodes[order], self.weights[order])

    def __eq__(self, other):
        if not isinstance(other, QuadratureRule):
            return NotImplemented
        return (
            self.side == other.side
            and np.array_equal(self.positive_nodes, other.positive_nodes)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None


def make_symmetric_rule(side, lo, hi, nu):
    x = logspace_nodes(lo, hi, nu)
    return QuadratureRule(side, x, trapezoid_weights(x))


def offset_rule_pair(lo, hi, nu):
    """Disjoint ``(p_rule, q_rule)`` with ``nu`` nodes each on ``[lo, hi]``.

    ``2 nu`` log-spaced nodes are split alternately: the Q side takes the even
    positions, the P side the odd ones, i.e. the P grid is the Q grid shifted
    by half a geometric step.
    """
    if nu < 2:
        raise BadInterval(f"need at least 2 nodes per side, got {nu}")
    x = logspace_nodes(lo, hi, 2 * nu)
    zq, zp = x[0::2], x[1::2]
    return (
        QuadratureRule(P_SIDE, zp, trapezoid_weights(zp)),
        QuadratureRule(Q_SIDE, zq, trapezoid_weights(zq)),
    )


def check_disjoint(p_rule, q_rule, rtol=DISJOINT_RTOL):
    """List of ``(k, j)`` with ``|omega_k - zeta_j| <= rtol * max(|omega_k|, |zeta_j|)``.

    Indices refer to the positive nodes of ``q_rule`` (k) and ``p_rule`` (j).
    Empty list means the rules are disjoint.
    """
    w = q_rule.positive_nodes
    z = p_rule.positive_nodes
    # sorted merge: only neighbours in the merged order can collide
    pos = np.searchsorted(z, w)
    hits = []
    for k, (wk, p) in enumerate(zip(w, pos)):
        for j in (p - 1, p):
            if 0 <= j < z.size and abs(wk - z[j]) <= rtol * max(abs(wk), abs(z[j])):
                hits.append((k, int(j)))
    return hits
