"""Data-driven velocity balanced truncation for proportionally damped systems.

Everything here reads only a :class:`~sodbt.sampling.FrequencySampleSet`.
The complex quantities ``Mt, Dt, Kt, Bt, Ct`` stand in for
``L^H M U, L^H D U, L^H K U, L^H B, C U`` with quadrature Gramian factors and
are obtained in closed form from the samples; the real quantities are their
images under the pair-wise unitary transform and are what the reduction uses.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateDenominator
from .gramians import attach_damping, default_rank, truncation_rank_check
from .model import ReducedModel

SQRT2 = np.sqrt(2.0)
# pair transforms: complex 2x2 blocks X2 = F2^H XR F1
F1 = np.array([[1, -1], [1j, 1j]]) / SQRT2
F2 = np.array([[1, 1], [1j, -1j]]) / SQRT2


@dataclass
class LoewnerQuantities:
    Mt: np.ndarray
    Dt: np.ndarray
    Kt: np.ndarray
    Bt: np.ndarray
    Ct: np.ndarray
    samples: object

    @property
    def alpha(self):
        return self.samples.alpha

    @property
    def beta(self):
        return self.samples.beta


@dataclass
class RealLoewnerQuantities:
    MtR: np.ndarray
    DtR: np.ndarray
    KtR: np.ndarray
    BtR: np.ndarray
    CtR: np.ndarray
    alpha: float
    beta: float
    imag_residue: float = 0.0


@dataclass
class RelationOperands:
    """Coefficients of the two linear relations satisfied by ``Mt, Dt, Kt``."""

    lam_q: np.ndarray  # diagonal of Lambda_Q, i * omega_k
    lam_p: np.ndarray  # diagonal of Lambda_P, i * zeta_j
    phi_q: np.ndarray  # row (phi_k)
    xi_p: np.ndarray  # row (rho_j zeta_j)
    h_zeta: np.ndarray  # row (rho_j zeta_j H(i zeta_j))
    h_omega: np.ndarray  # row (phi_k H(i omega_k))


def relation_operands(samples):
    z, rho = samples.p_rule.nodes, samples.p_rule.full_weights
    w, phi = samples.q_rule.nodes, samples.q_rule.full_weights
    return RelationOperands(
        lam_q=1j * w,
        lam_p=1j * z,
        phi_q=phi,
        xi_p=rho * z,
        h_zeta=rho * z * samples.p_values_full,
        h_omega=phi * samples.q_values_full,
    )


def build_bc(samples):
    """``Bt_k = phi_k H(i w_k)`` and ``Ct_j = rho_j zeta_j H(i zeta_j)`` over
    the signed nodes; shapes ``(Nq, 1)`` and ``(1, Np)``."""
    ops = relation_operands(samples)
    return ops.h_omega.reshape(-1, 1), ops.h_zeta.reshape(1, -1)


def _raise_bad(bad, where):
    k, j = (int(v) for v in bad)
    if k >= 0:
        raise DegenerateDenominator(f"degenerate closed-form denominator at {where} (k={k}, j={j})", k, j)


def build_mdk_closed_form(samples, backend=None):
    """Complex ``Mt, Dt, Kt`` from the explicit entry formulas."""
    p, q = samples.p_rule, samples.q_rule
    Mt, Kt, bad = _kernels.mdk_complex(
        q.nodes, q.full_weights, samples.q_values_full,
        p.nodes, p.full_weights, samples.p_values_full,
        samples.alpha, samples.beta, backend=backend,
    )
    _raise_bad(bad, "signed node pair")
    Dt = samples.alpha * Mt + samples.beta * Kt
    Bt, Ct = build_bc(samples)
    return LoewnerQuantities(Mt, Dt, Kt, Bt, Ct, samples)


def relation_residual(q):
    """Relative residuals of the two linear relations.

    ``res1 = ||LQ^2 Mt + LQ Dt + Kt - PhiQ^T h_zeta||_F / s`` and
    ``res2 = ||Mt LP^2 + Dt LP + Kt - h_omega^T XiP||_F / s`` with
    ``s = max(||Kt||_F, 1)``.
    """
    ops = relation_operands(q.samples)
    lq = ops.lam_q[:, None]
    lp = ops.lam_p[None, :]
    r1 = lq**2 * q.Mt + lq * q.Dt + q.Kt - np.outer(ops.phi_q, ops.h_zeta)
    r2 = q.Mt * lp**2 + q.Dt * lp + q.Kt - np.outer(ops.h_omega, ops.xi_p)
    scale = max(np.linalg.norm(q.Kt), 1.0)
    return np.linalg.norm(r1) / scale, np.linalg.norm(r2) / scale


def pair_transform_left(nu):
    return np.kron(np.eye(nu), F2)


def pair_transform_right(nu):
    return np.kron(np.eye(nu), F1.conj().T)


def to_real(q):
    """Apply ``(I kron F2) X (I kron F1^H)`` to the complex quantities.

    Dense reference transform; :func:`build_real_quantities` produces the same
    matrices directly in real arithmetic.
    """
    nuq = q.Mt.shape[0] // 2
    nup = q.Mt.shape[1] // 2
    TL = pair_transform_left(nuq)
    TR = pair_transform_right(nup)
    out = {}
    resid = 0.0
    for name, X in (("MtR", TL @ q.Mt @ TR), ("DtR", TL @ q.Dt @ TR), ("KtR", TL @ q.Kt @ TR),
                    ("BtR", TL @ q.Bt), ("CtR", q.Ct @ TR)):
        scale = max(np.abs(X).max(initial=0.0), 1e-300)
        resid = max(resid, np.abs(X.imag).max(initial=0.0) / scale)
        out[name] = X.real.copy()
    return RealLoewnerQuantities(alpha=q.alpha, beta=q.beta, imag_residue=resid, **out)


def build_real_bc(samples):
    """``BtR_k = sqrt2 phi_k [Re H; -Im H]``, ``CtR_j = sqrt2 rho_j zeta_j [Re H, Im H]``."""
    p, q = samples.p_rule, samples.q_rule
    hw, hz = samples.q_values, samples.p_values
    Br = np.empty((2 * q.nu, 1))
    Br[0::2, 0] = SQRT2 * q.weights * hw.real
    Br[1::2, 0] = -SQRT2 * q.weights * hw.imag
    Cr = np.empty((1, 2 * p.nu))
    c = SQRT2 * p.weights * p.positive_nodes
    Cr[0, 0::2] = c * hz.real
    Cr[0, 1::2] = c * hz.imag
    return Br, Cr


def build_real_quantities(samples, backend=None):
    """Real ``MtR, DtR, KtR, BtR, CtR`` assembled block by block.

    Each ``2x2`` block comes from the two closed-form entries at
    ``(w_k, zeta_j)`` and ``(-w_k, zeta_j)``; the other two entries of the
    complex block follow by conjugation, so only positive-node samples are read.
    """
    p, q = samples.p_rule, samples.q_rule
    MtR, KtR, bad = _kernels.mdk_real(
        q.positive_nodes, q.weights, samples.q_values,
        p.positive_nodes, p.weights, samples.p_values,
        samples.alpha, samples.beta, backend=backend,
    )
    _raise_bad(bad, "positive node block")
    DtR = samples.alpha * MtR + samples.beta * KtR
    BtR, CtR = build_real_bc(samples)
    return RealLoewnerQuantities(MtR, DtR, KtR, BtR, CtR, samples.alpha, samples.beta)


def real_block_residual(samples, rq):
    """Residuals of the per-block real equations for ``MtR, KtR``.

    ``-W2 M + W1 (a M + b K) + K = H_zeta`` and
    ``-M T2 + (a M + b K) T1 + K = H_omega`` with the block-diagonal
    ``W1 = diag([[0, w], [-w, 0]])``, ``W2 = diag(w^2 I)`` and their P-side
    analogues.  Returned relative to ``max(||KtR||_F, 1)``.
    """
    from .sylvester import real_coefficients

    c = real_coefficients(samples)
    a, b = samples.alpha, samples.beta
    M, K = rq.MtR, rq.KtR
    D = a * M + b * K
    r1 = -c.omega2 @ M + c.omega1 @ D + K - c.h_zeta
    r2 = -M @ c.theta2 + D @ c.theta1 + K - c.h_omega
    scale = max(np.linalg.norm(K), 1.0)
    return np.linalg.norm(r1) / scale, np.linalg.norm(r2) / scale


def databt_reduce(samples, r=None, backend=None):
    """Data-driven velocity BT in real arithmetic.

    Parameters
    ----------
    samples : FrequencySampleSet
    r : int, optional
        Reduced order; defaults to the smallest ``r`` with
        ``sigma_{r+1} / sigma_1 < 1e-8``.

    Returns
    -------
    ReducedModel
        Real model with ``M_r = I_r``.
    """
    rq = build_real_quantities(samples, backend=backend)
    Z, s, Yh = np.linalg.svd(rq.MtR, full_matrices=False)
    if r is None:
        r = default_rank(s)
    notes = truncation_rank_check(s, r)
    scale = 1.0 / np.sqrt(s[:r])
    Zl = Z[:, :r] * scale
    Yr = Yh[:r].T * scale
    Mr = np.eye(r)
    Dr = Zl.T @ rq.DtR @ Yr
    Kr = Zl.T @ rq.KtR @ Yr
    Br = Zl.T @ rq.BtR
    Cr = rq.CtR @ Yr
    red = attach_damping(Mr, Dr, Kr, Br, Cr, (samples.alpha, samples.beta))
    info = {"nu_p": samples.p_rule.nu, "nu_q": samples.q_rule.nu}
    return ReducedModel(red, "Data-BT-SOPD", r, s, info, notes)
