"""Sylvester equations for the real sample matrices and their low-rank
solution by extended block Krylov projection.

The real matrices satisfy ``Z X - X Y = E F^T`` where ``Z`` and ``Y`` are
block diagonal with ``2x2`` blocks of the form ``p I + q J``,
``J = [[0, 1], [-1, 0]]``.  Such blocks multiply, invert and commute like the
complex numbers ``p + i q``, which is how :class:`Block2Diag` stores them.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import Breakdown, SingularBlock, SpectraOverlap
from .gramians import attach_damping, default_rank, truncation_rank_check
from .model import ReducedModel

SINGULAR_BLOCK_RTOL = 1e-14
SPECTRA_RTOL = 1e-10
DEFLATION_RTOL = 1e-12
F2 = np.array([[1, 1], [1j, -1j]]) / np.sqrt(2)


class Block2Diag:
    """Block-diagonal matrix of ``2x2`` blocks ``Re(lam) I + Im(lam) J``."""

    def __init__(self, lam):
        self.lam = np.asarray(lam, dtype=complex).ravel()

    @property
    def shape(self):
        n = 2 * self.lam.size
        return (n, n)

    def dense(self):
        n = self.lam.size
        out = np.zeros((2 * n, 2 * n))
        i = np.arange(n)
        p, q = self.lam.real, self.lam.imag
        out[2 * i, 2 * i] = p
        out[2 * i + 1, 2 * i + 1] = p
        out[2 * i, 2 * i + 1] = q
        out[2 * i + 1, 2 * i] = -q
        return out

    def _mul(self, lam, X):
        X = np.asarray(X)
        x1, x2 = X[0::2], X[1::2]
        shape = (-1,) + (1,) * (X.ndim - 1)
        p = lam.real.reshape(shape)
        q = lam.imag.reshape(shape)
        out = np.empty(np.broadcast_shapes(X.shape), dtype=np.result_type(X, float))
        out[0::2] = p * x1 + q * x2
        out[1::2] = -q * x1 + p * x2
        return out

    def apply(self, X):
        return self._mul(self.lam, X)

    def solve(self, X):
        return self._mul(1.0 / self.lam, X)

    def rapply(self, X):
        """``X @ self``."""
        return self.T.apply(np.asarray(X).T).T

    def inv(self):
        return Block2Diag(1.0 / self.lam)

    @property
    def T(self):
        return Block2Diag(self.lam.conj())

    def __matmul__(self, other):
        if isinstance(other, Block2Diag):
            return Block2Diag(self.lam * other.lam)
        return self.apply(other)

    def eigvals(self):
        return np.column_stack([self.lam, self.lam.conj()]).ravel()


class DenseOperator:
    """Dense matrix with a cached LU for inverse actions."""

    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)
        self._lu = None

    @property
    def shape(self):
        return self.A.shape

    def dense(self):
        return self.A

    def apply(self, X):
        return self.A @ X

    def solve(self, X):
        if self._lu is None:
            self._lu = sla.lu_factor(self.A)
        return sla.lu_solve(self._lu, X)

    @property
    def T(self):
        return DenseOperator(self.A.T)

    def eigvals(self):
        return np.linalg.eigvals(self.A)


def as_operator(G):
    if isinstance(G, (Block2Diag, DenseOperator)):
        return G
    return DenseOperator(G)


def dense_of(G):
    return as_operator(G).dense()


# --------------------------------------------------------------------------
# assembly


@dataclass
class RealCoefficients:
    """Dense block-diagonal coefficients and right-hand sides of the real
    per-block equations (reference assembly, used for checks)."""

    omega1: np.ndarray
    omega2: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    h_zeta: np.ndarray
    h_omega: np.ndarray


def real_coefficients(samples):
    w, phi, hw = samples.q_rule.positive_nodes, samples.q_rule.weights, samples.q_values
    z, rho, hz = samples.p_rule.positive_nodes, samples.p_rule.weights, samples.p_values
    c = 2 * np.outer(phi, rho * z)
    nq, np_ = w.size, z.size
    Hz = np.zeros((2 * nq, 2 * np_))
    Hz[0::2, 0::2] = c * hz.real[None, :]
    Hz[0::2, 1::2] = c * hz.imag[None, :]
    Hw = np.zeros((2 * nq, 2 * np_))
    Hw[0::2, 0::2] = c * hw.real[:, None]
    Hw[1::2, 0::2] = -c * hw.imag[:, None]
    return RealCoefficients(
        omega1=Block2Diag(1j * w).dense(),
        omega2=Block2Diag(w**2 + 0j).dense(),
        theta1=Block2Diag(1j * z).dense(),
        theta2=Block2Diag(z**2 + 0j).dense(),
        h_zeta=Hz,
        h_omega=Hw,
    )


@dataclass
class SylvesterProblem:
    """``Z X - X Y = E F^T``."""

    Z: object
    Y: object
    E: np.ndarray
    F: np.ndarray
    target: str = "M"

    @property
    def rhs(self):
        return self.E @ self.F.T


def _checked(lam, scale, what):
    bad = np.abs(lam) <= SINGULAR_BLOCK_RTOL * scale
    if np.any(bad):
        raise SingularBlock(f"singular 2x2 block in {what} at index {int(np.argmax(bad))}")
    return lam


def _side_blocks(samples):
    a, b = samples.alpha, samples.beta
    w = samples.q_rule.positive_nodes
    z = samples.p_rule.positive_nodes
    # complex symbols of beta*Omega1 + I and -Omega2 + alpha*Omega1 (and P side)
    bw = _checked(1 + 1j * b * w, 1 + b * w, "beta*Omega1 + I")
    aw = _checked(-(w**2) + 1j * a * w, w**2 + a * w, "-Omega2 + alpha*Omega1")
    bz = _checked(1 + 1j * b * z, 1 + b * z, "beta*Theta1 + I")
    az = _checked(-(z**2) + 1j * a * z, z**2 + a * z, "-Theta2 + alpha*Theta1")
    return aw, bw, az, bz


def _rhs_vectors(samples):
    w, phi, hw = samples.q_rule.positive_nodes, samples.q_rule.weights, samples.q_values
    z, rho, hz = samples.p_rule.positive_nodes, samples.p_rule.weights, samples.p_values
    dl_ew = np.zeros(2 * w.size)
    dl_ew[0::2] = 2 * phi
    dl_lw = np.empty(2 * w.size)
    dl_lw[0::2] = 2 * phi * hw.real
    dl_lw[1::2] = -2 * phi * hw.imag
    dr_lz = np.empty(2 * z.size)
    dr_lz[0::2] = rho * z * hz.real
    dr_lz[1::2] = rho * z * hz.imag
    dr_ez = np.zeros(2 * z.size)
    dr_ez[0::2] = rho * z
    return dl_ew, dl_lw, dr_lz, dr_ez


def assemble_sylvester(samples, target="M"):
    """Coefficients and rank-2 factors of the Sylvester equation for the real
    mass-like (``target="M"``) or stiffness-like (``target="K"``) matrix."""
    aw, bw, az, bz = _side_blocks(samples)
    dl_ew, dl_lw, dr_lz, dr_ez = _rhs_vectors(samples)
    if target == "M":
        left, right = Block2Diag(bw), Block2Diag(bz)  # inverted factors
        Z = Block2Diag(aw / bw)
        Y = Block2Diag(az / bz)
    elif target == "K":
        left, right = Block2Diag(aw), Block2Diag(az)
        Z = Block2Diag(bw / aw)
        Y = Block2Diag(bz / az)
    else:
        raise ValueError(f"target must be 'M' or 'K', got {target!r}")
    E = np.column_stack([left.solve(dl_ew), dl_lw])
    # second row of F^T is -e_zeta^T Delta_r right^{-1}
    F = np.column_stack([dr_lz, -right.T.solve(dr_ez)])
    return SylvesterProblem(Z, Y, E, F, target)


def dense_rhs(samples, target="M"):
    """Right-hand side assembled densely from the block data (no factoring)."""
    c = real_coefficients(samples)
    aw, bw, az, bz = _side_blocks(samples)
    if target == "M":
        lo, ro = Block2Diag(bw).inv().dense(), Block2Diag(bz).inv().dense()
    else:
        lo, ro = Block2Diag(aw).inv().dense(), Block2Diag(az).inv().dense()
    return lo @ c.h_zeta - c.h_omega @ ro


# --------------------------------------------------------------------------
# dense solvers


def _check_separation(ez, ey):
    """Smallest pairwise relative gap ``|l - m| / (|l| + |m|)`` between spectra."""
    diff = np.abs(ez[:, None] - ey[None, :])
    size = np.abs(ez)[:, None] + np.abs(ey)[None, :]
    gap = (diff / np.maximum(size, 1e-300)).min()
    if gap <= SPECTRA_RTOL:
        raise SpectraOverlap(f"spectra of Z and Y overlap (relative gap {gap:.3e})")
    return gap


def solve_sylvester(Z, Y, R):
    """Dense solution of ``Z X - X Y = R``.

    Block-diagonal ``2x2`` coefficients are diagonalized in closed form and the
    solution is a Cauchy-type division; general dense coefficients go through
    Bartels-Stewart (:func:`scipy.linalg.solve_sylvester`).
    """
    R = np.asarray(R)
    if isinstance(Z, Block2Diag) and isinstance(Y, Block2Diag):
        return _solve_block2(Z, Y, R)
    Zd, Yd = dense_of(Z), dense_of(Y)
    _check_separation(np.linalg.eigvals(Zd), np.linalg.eigvals(Yd))
    return sla.solve_sylvester(Zd, -Yd, R)


def _wh_left(X):
    """``W^H X`` with ``W = I kron F2``, the eigenvectors of every block."""
    X = np.asarray(X, dtype=complex)
    out = np.empty_like(X)
    out[0::2] = (X[0::2] - 1j * X[1::2]) / np.sqrt(2)
    out[1::2] = (X[0::2] + 1j * X[1::2]) / np.sqrt(2)
    return out


def _w_left(X):
    """``W X``."""
    X = np.asarray(X, dtype=complex)
    out = np.empty_like(X)
    out[0::2] = (X[0::2] + X[1::2]) / np.sqrt(2)
    out[1::2] = 1j * (X[0::2] - X[1::2]) / np.sqrt(2)
    return out


def _solve_block2(Z, Y, R):
    ez, ey = Z.eigvals(), Y.eigvals()
    _check_separation(ez, ey)
    # Z = W diag(ez) W^H, Y = W diag(ey) W^H
    Rh = _wh_left(_wh_left(R.conj().T).conj().T)
    Xh = Rh / (ez[:, None] - ey[None, :])
    X = _w_left(_w_left(Xh.conj().T).conj().T)
    return X.real


def dense_sylvester_solve(problem):
    return solve_sylvester(problem.Z, problem.Y, problem.rhs)


def sylvester_residual(problem, X):
    Z, Y = as_operator(problem.Z), as_operator(problem.Y)
    return np.linalg.norm(Z.apply(X) - Y.T.apply(X.T).T - problem.rhs)


# --------------------------------------------------------------------------
# extended block Arnoldi


@dataclass
class ExtendedKrylovBasis:
    """Orthonormal basis ``V`` of the extended block Krylov space and the
    projection ``T = V^T G V``."""

    V: np.ndarray
    T: np.ndarray
    m: int
    deflation: list = field(default_factory=list)
    GV: np.ndarray = None

    @property
    def dim(self):
        return self.V.shape[1]


def _orth_against(W, V, ref_norms):
    """Two-pass block Gram-Schmidt followed by a rank-revealing SVD."""
    for _ in range(2):
        if V.shape[1]:
            W = W - V @ (V.T @ W)
    if W.shape[1] == 0:
        return W, 0
    Uw, sw, _ = np.linalg.svd(W, full_matrices=False)
    ref = max(ref_norms, 1e-300)
    keep = sw > DEFLATION_RTOL * ref
    return Uw[:, keep], int((~keep).sum())


class ExtendedArnoldi:
    """Incremental extended block Arnoldi process on ``(G, J)``.

    Each step appends ``G @ (last forward block)`` and
    ``G^{-1} @ (last inverse block)`` after orthogonalization; columns whose
    orthogonal remainder is negligible are dropped and logged.
    """

    def __init__(self, G, J):
        self.G = as_operator(G)
        J = np.asarray(J, dtype=float)
        if J.ndim == 1:
            J = J[:, None]
        if not np.any(J):
            raise ValueError("start block J must be nonzero")
        N = J.shape[0]
        self.V = np.empty((N, 0))
        self.GV = np.empty((N, 0))
        self.T = np.empty((0, 0))
        self.deflation = []
        self.m = 0
        self._fwd = J
        self._inv = self.G.solve(J)
        self._first = True

    def _append(self, Q):
        if Q.shape[1] == 0:
            return
        GQ = self.G.apply(Q)
        k = self.V.shape[1]
        T = np.empty((k + Q.shape[1],) * 2)
        T[:k, :k] = self.T
        T[:k, k:] = self.V.T @ GQ
        T[k:, :k] = Q.T @ self.GV
        T[k:, k:] = Q.T @ GQ
        self.T = T
        self.V = np.hstack([self.V, Q])
        self.GV = np.hstack([self.GV, GQ])
        return GQ

    def step(self):
        """Run one iteration; returns the number of new columns."""
        if self._first:
            Wf, Wi = self._fwd, self._inv
            self._first = False
        else:
            Wf = self._fwd_image
            Wi = self.G.solve(self._inv)
        Qf, df = _orth_against(Wf, self.V, np.linalg.norm(Wf, 2) if Wf.size else 0.0)
        GQf = self._append(Qf)
        Qi, di = _orth_against(Wi, self.V, np.linalg.norm(Wi, 2) if Wi.size else 0.0)
        self._append(Qi)
        self.m += 1
        self.deflation.append({"iteration": self.m, "forward_dropped": df, "inverse_dropped": di})
        self._fwd = Qf
        self._fwd_image = GQf if GQf is not None else np.empty((self.V.shape[0], 0))
        self._inv = Qi
        return Qf.shape[1] + Qi.shape[1]

    def basis(self):
        return ExtendedKrylovBasis(self.V, self.T, self.m, list(self.deflation), self.GV)


def extended_block_arnoldi(G, J, m):
    """Orthonormal basis of ``K_m(G, J) + K_m(G^{-1}, G^{-1} J)``.

    Raises :class:`Breakdown` (with the partial basis in ``exc.basis``) when an
    iteration adds no new direction before ``m`` iterations are done.
    """
    arn = ExtendedArnoldi(G, J)
    for _ in range(m):
        if arn.step() == 0:
            exc = Breakdown(
                f"extended Krylov space became invariant at dimension {arn.V.shape[1]}",
                dim=arn.V.shape[1],
            )
            exc.basis = arn.basis()
            raise exc
    return arn.basis()


# --------------------------------------------------------------------------
# projected solver


@dataclass
class KrylovSolution:
    """Factored approximation ``X_m = Vz @ S @ Vy.T``."""

    Vz: np.ndarray
    Vy: np.ndarray
    S: np.ndarray
    residual_history: list
    Tz: np.ndarray
    Ty: np.ndarray
    iterations: int
    deflation_z: list
    deflation_y: list
    breakdown: bool = False

    @property
    def X(self):
        return self.Vz @ self.S @ self.Vy.T

    @property
    def residual(self):
        return self.residual_history[-1] if self.residual_history else np.inf


def _lowrank_norm(A, B):
    """``||A B^T||_F`` through thin QR factors."""
    Ra = np.linalg.qr(A, mode="r")
    Rb = np.linalg.qr(B, mode="r")
    return np.linalg.norm(Ra @ Rb.T)


def krylov_sylvester_solve(problem, m, tol=None):
    """Galerkin solution of ``Z X - X Y = E F^T`` on extended Krylov spaces of
    ``(Z, E)`` and ``(Y^T, F)``.

    The residual history holds ``||Z X_j - X_j Y - E F^T||_F / ||E F^T||_F``
    after every iteration, evaluated in factored form.  Iteration stops early
    when it drops to ``tol``, or when both spaces become invariant (the
    Galerkin solution is then exact on them).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    Z, Y = as_operator(problem.Z), as_operator(problem.Y)
    E, F = problem.E, problem.F
    az = ExtendedArnoldi(Z, E)
    ay = ExtendedArnoldi(Y.T, F)
    rhs_norm = max(_lowrank_norm(E, F), 1e-300)
    history = []
    S = Tz = Ty = None
    broke = False
    for _ in range(m):
        nz = az.step() if az.V.shape[1] < az.V.shape[0] else 0
        ny = ay.step() if ay.V.shape[1] < ay.V.shape[0] else 0
        if nz == 0 and ny == 0 and S is not None:
            broke = True
            break
        Tz, Ty = az.T, ay.T.T
        Em, Fm = az.V.T @ E, ay.V.T @ F
        S = solve_sylvester(Tz, Ty, Em @ Fm.T)
        A = np.hstack([az.GV @ S, -(az.V @ S), -E])
        B = np.hstack([ay.V, ay.GV, F])
        history.append(_lowrank_norm(A, B) / rhs_norm)
        if tol is not None and history[-1] <= tol:
            break
    return KrylovSolution(az.V, ay.V, S, history, Tz, Ty, len(history),
                          az.deflation, ay.deflation, broke)


def krydatabt_reduce(samples, r=None, m=30, tol=None):
    """Data-driven velocity BT with low-rank Sylvester solves.

    Only the ``4m``-sized projected solution of the mass-like equation is
    decomposed by SVD; the stiffness-like matrix enters in factored form.
    """
    from .databt import build_real_bc

    solM = krylov_sylvester_solve(assemble_sylvester(samples, "M"), m, tol)
    Uu, s, Wt = np.linalg.svd(solM.S)
    if r is None:
        r = default_rank(s)
    notes = truncation_rank_check(s, r)
    scale = 1.0 / np.sqrt(s[:r])
    solK = krylov_sylvester_solve(assemble_sylvester(samples, "K"), m, tol)
    left = (solM.Vz @ (Uu[:, :r] * scale)).T  # r x Nq
    right = solM.Vy @ (Wt[:r].T * scale)  # Np x r
    Kr = (left @ solK.Vz) @ solK.S @ (solK.Vy.T @ right)
    BtR, CtR = build_real_bc(samples)
    Br = left @ BtR
    Cr = CtR @ right
    a, b = samples.alpha, samples.beta
    Mr = np.eye(r)
    Dr = a * Mr + b * Kr
    red = attach_damping(Mr, Dr, Kr, Br, Cr, (a, b))
    info = {"m": m, "residual": format(solM.residual, ".3e"),
            "residual_K": format(solK.residual, ".3e")}
    out = ReducedModel(red, "KryData-BT-SOPD", r, s, info, notes)
    out.krylov = (solM, solK)
    return out
