"""Velocity Gramian factors and intrusive velocity balanced truncation."""

from dataclasses import dataclass
import warnings

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateTruncation, IndefiniteGramian, RankDeficient, UnstableSystem
from .model import (
    ReducedModel,
    SecondOrderSystem,
    as_system,
    damping_residual,
    first_order_poles,
    resolvent_columns,
    resolvent_rows,
    to_first_order,
    DAMPING_TOL,
)

CLIP_RTOL = 1e-12
INDEFINITE_TOL = 1e-6
RANK_RTOL = 1e-14
TIE_RTOL = 1e-12
STABILITY_TOL = 1e-10


@dataclass
class GramianFactors:
    """``P_v ~ U U^H`` and ``Q_v ~ L L^H``.

    For ``kind == "quadrature"`` the factors are complex with columns over the
    interleaved signed nodes; ``L^H`` then has rows ``phi_k C G(i w_k)``.
    """

    U: np.ndarray
    L: np.ndarray
    kind: str

    @property
    def P(self):
        return _hermitian_product(self.U)

    @property
    def Q(self):
        return _hermitian_product(self.L)


def _hermitian_product(F):
    G = F @ F.conj().T
    if np.iscomplexobj(G):
        G = (G + G.conj().T) / 2
    return G


def psd_sqrt(G, name="Gramian"):
    """Square-root factor of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues above ``-1e-12 * lambda_max`` are clipped to zero; a clipped
    negative mass beyond ``1e-6 * trace`` raises :class:`IndefiniteGramian`.
    """
    G = (G + G.T) / 2
    lam, V = np.linalg.eigh(G)
    lam_max = max(lam.max(initial=0.0), 0.0)
    neg = lam[lam < 0]
    trace = np.abs(lam).sum()
    if neg.size and (neg.min() < -CLIP_RTOL * lam_max) and (-neg.sum() > INDEFINITE_TOL * trace):
        raise IndefiniteGramian(f"{name} has significant negative spectrum ({neg.min():.3e})")
    lam = np.clip(lam, 0.0, None)
    order = np.argsort(lam)[::-1]
    return V[:, order] * np.sqrt(lam[order])


def check_stable(sys):
    poles = first_order_poles(sys)
    scale = max(1.0, np.abs(poles).max(initial=0.0))
    worst = poles.real.max()
    if worst >= -STABILITY_TOL * scale:
        raise UnstableSystem(f"first-order realization has a pole with Re = {worst:.3e}")


def lyapunov_gramians(sys):
    """Full first-order controllability and observability Gramians."""
    sys = as_system(sys)
    check_stable(sys)
    fo = to_first_order(sys)
    Einv = np.linalg.inv(fo.E)
    A = Einv @ fo.A
    Bs = Einv @ fo.Bf
    P = sla.solve_continuous_lyapunov(A, -Bs @ Bs.T)
    # A^T Qh + Qh A = -C^T C with Qh = E^T Q E
    Qh = sla.solve_continuous_lyapunov(A.T, -fo.Cf.T @ fo.Cf)
    Q = Einv.T @ Qh @ Einv
    return (P + P.T) / 2, (Q + Q.T) / 2


def exact_velocity_gramians(sys):
    P, Q = lyapunov_gramians(sys)
    n = as_system(sys).n
    return P[n:, n:], Q[n:, n:]


def lyapunov_velocity_gramians(sys):
    """Exact velocity Gramian factors from the Lyapunov equations."""
    Pv, Qv = exact_velocity_gramians(sys)
    return GramianFactors(psd_sqrt(Pv, "P_v"), psd_sqrt(Qv, "Q_v"), "exact")


def quad_gramian_factors(sys, p_rule, q_rule):
    """Quadrature factors: ``U[:, j] = rho_j zeta_j G(i zeta_j) B`` and
    ``L^H[k, :] = phi_k C G(i omega_k)`` over all signed nodes."""
    sys = as_system(sys)
    z, rho = p_rule.nodes, p_rule.full_weights
    w, phi = q_rule.nodes, q_rule.full_weights
    U = resolvent_columns(sys, 1j * z) * (rho * z)
    LH = resolvent_rows(sys, 1j * w) * phi[:, None]
    return GramianFactors(U, LH.conj().T, "quadrature")


def realify_factors(factors):
    """Unitary pair-wise transform turning interleaved conjugate-pair factors
    into real ones with the same Gram products.

    Each column pair ``[u, -conj(u)]`` of ``U`` and ``[l, conj(l)]`` of ``L``
    becomes ``sqrt(2) [Re u, Im u]`` and ``sqrt(2) [Re l, Im l]``; then
    ``L_R^T M U_R`` equals the real sample matrix of the data-driven path.
    """
    if not np.iscomplexobj(factors.U) and not np.iscomplexobj(factors.L):
        return factors
    U, L = factors.U, factors.L
    Ur = np.empty(U.shape)
    Ur[:, 0::2] = np.sqrt(2) * U[:, 0::2].real
    Ur[:, 1::2] = np.sqrt(2) * U[:, 0::2].imag
    Lr = np.empty(L.shape)
    Lr[:, 0::2] = np.sqrt(2) * L[:, 0::2].real
    Lr[:, 1::2] = np.sqrt(2) * L[:, 0::2].imag
    return GramianFactors(Ur, Lr, factors.kind)


def truncation_rank_check(sv, r):
    """Validate ``r`` against singular values; returns list of warnings."""
    sv = np.asarray(sv)
    if not 1 <= r <= sv.size:
        raise RankDeficient(f"r={r} outside [1, {sv.size}]")
    if sv[0] <= 0 or sv[r - 1] <= RANK_RTOL * sv[0]:
        raise RankDeficient(f"sigma_{r} = {sv[r - 1]:.3e} negligible relative to sigma_1")
    notes = []
    if r < sv.size and abs(sv[r - 1] - sv[r]) <= TIE_RTOL * sv[r - 1]:
        msg = f"sigma_{r} and sigma_{r + 1} coincide; truncation at r={r} is not unique"
        warnings.warn(msg, DegenerateTruncation, stacklevel=3)
        notes.append(msg)
    return notes


def default_rank(sv, rtol=1e-8):
    """Smallest ``r`` with ``sigma_{r+1} / sigma_1 < rtol``."""
    sv = np.asarray(sv)
    small = np.nonzero(sv < rtol * sv[0])[0]
    return int(small[0]) if small.size else sv.size


def attach_damping(M, D, K, B, C, damping):
    """Build a system, keeping the damping pair only if it still holds."""
    if damping is not None and damping_residual(M, D, K, *damping) > DAMPING_TOL:
        damping = None
    return SecondOrderSystem(M, D, K, B, C, damping=damping)


def _balancing_svd(M, U, L):
    """Thin SVD ``L^H M U = Z diag(s) Yh``.

    Wide factors (more columns than rows) are first compressed by QR so the
    SVD runs on a matrix of the state dimension; the nonzero singular
    triplets are unchanged.
    """
    n = U.shape[0]
    if U.shape[1] <= n and L.shape[1] <= n:
        return np.linalg.svd(L.conj().T @ M @ U, full_matrices=False)
    Ql, Rl = np.linalg.qr(L.conj().T)  # L^H = Ql Rl
    Qu, Ru = np.linalg.qr(U.conj().T)  # U = Ru^H Qu^H
    Zs, s, Yhs = np.linalg.svd(Rl @ M @ Ru.conj().T)
    return Ql @ Zs, s, Yhs @ Qu.conj().T


def bt_reduce(sys, factors, r):
    """Velocity balanced truncation from square-root Gramian factors.

    Complex quadrature factors are first mapped to real ones with
    :func:`realify_factors`, so the reduced model is real.
    """
    sys = as_system(sys)
    f = realify_factors(factors)
    U, L = f.U, f.L
    Z, s, Yh = _balancing_svd(sys.M, U, L)
    notes = truncation_rank_check(s, r)
    scale = 1.0 / np.sqrt(s[:r])
    W = (L @ Z[:, :r]) * scale
    V = (U @ Yh[:r].T) * scale
    Mr = np.eye(r)
    Dr = W.T @ sys.D @ V
    Kr = W.T @ sys.K @ V
    Br = W.T @ sys.B
    Cr = sys.C @ V
    red = attach_damping(Mr, Dr, Kr, Br, Cr, sys.damping)
    return ReducedModel(red, "BT-SOPD", r, s, {"gramians": f.kind}, notes)


def bt_projection(sys, factors, r):
    """``(W_r, V_r, singular_values)`` of the velocity BT step."""
    sys = as_system(sys)
    f = realify_factors(factors)
    Z, s, Yh = _balancing_svd(sys.M, f.U, f.L)
    truncation_rank_check(s, r)
    scale = 1.0 / np.sqrt(s[:r])
    return (f.L @ Z[:, :r]) * scale, (f.U @ Yh[:r].T) * scale, s


def velocity_singular_values(M, U, L):
    """Singular values of ``L^H M U`` (at most the state dimension of them)."""
    n = U.shape[0]
    if U.shape[1] > n or L.shape[1] > n:
        Rl = np.linalg.qr(L.conj().T, mode="r")
        Ru = np.linalg.qr(U.conj().T, mode="r")
        return np.linalg.svd(Rl @ M @ Ru.conj().T, compute_uv=False)
    return np.linalg.svd(L.conj().T @ M @ U, compute_uv=False)


@dataclass
class BoundReport:
    premise_met: bool
    delta: float
    lhs: float
    rhs: float
    n_compared: int
    n_exact: int
    n_quad: int
    p_error: float
    q_error: float

    @property
    def holds(self):
        return self.lhs <= self.rhs

    @property
    def status(self):
        if not self.premise_met:
            return "PremiseUnmet"
        return "holds" if self.holds else "violated"


def sv_perturbation_bound(M, U, L, Ut, Lt, delta=None):
    """Quadrature perturbation diagnostic for the velocity singular values.

    Computes ``lhs = ||sigma - sigma~||_2`` over the common leading values and
    ``rhs = 2 delta ||M||_2 ||L||_2 ||U||_2``.  With ``delta=None`` the
    measured relative Gramian error ``max(||P - P~||_F/||P||_F, same for Q)``
    is used.  ``premise_met`` records whether
    ``||G - G~||_F <= delta/(1+delta) sigma_min(G)`` holds for both Gramians;
    when it does not, the comparison is only reported.
    """
    P = U @ U.conj().T
    Q = L @ L.conj().T
    Pt = _hermitian_product(Ut)
    Qt = _hermitian_product(Lt)
    dP = np.linalg.norm(P - Pt)
    dQ = np.linalg.norm(Q - Qt)
    p_err = dP / max(np.linalg.norm(P), 1e-300)
    q_err = dQ / max(np.linalg.norm(Q), 1e-300)
    if delta is None:
        delta = max(p_err, q_err)
    sig = velocity_singular_values(M, U, L)
    sig_t = velocity_singular_values(M, Ut, Lt)
    k = min(sig.size, sig_t.size)
    lhs = float(np.sqrt(np.sum((sig[:k] - sig_t[:k]) ** 2)))
    rhs = float(2 * delta * np.linalg.norm(M, 2) * np.linalg.norm(L, 2) * np.linalg.norm(U, 2))
    smin_p = np.linalg.svd(P, compute_uv=False).min()
    smin_q = np.linalg.svd(Q, compute_uv=False).min()
    frac = delta / (1 + delta)
    premise = 0 < delta < 1 and dP <= frac * smin_p and dQ <= frac * smin_q
    return BoundReport(bool(premise), float(delta), lhs, rhs, k, sig.size, sig_t.size,
                       float(p_err), float(q_err))
