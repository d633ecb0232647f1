"""Hot assembly kernels with a numba path and a pure-numpy path.

The numba path is used when numba imports cleanly and ``SODBT_DISABLE_NUMBA``
is unset (or ``0``).  Both paths return identical results up to rounding;
``tests/test_kernels.py`` checks parity and ``benchmarks/bench_kernels.py``
times them against each other.

Kernel conventions: ``a(x) = -x**2 + 1j*x*alpha`` and ``b(x) = 1j*x*beta + 1``,
so that ``(ix)^2 M + ix D + K = a(x) M + b(x) K`` for ``D = alpha M + beta K``.
"""

import os

import numpy as np

# relative threshold for the closed-form denominators
DENOM_TOL = 1e-12


def _numba_requested():
    flag = os.environ.get("SODBT_DISABLE_NUMBA", "0").strip().lower()
    return flag in ("", "0", "false", "no")


try:
    if not _numba_requested():
        raise ImportError("numba disabled by SODBT_DISABLE_NUMBA")
    import numba

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip probing an outdated system TBB
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def _njit(func):
    if HAVE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def _njit_parallel(func):
    if HAVE_NUMBA:
        return numba.njit(cache=True, parallel=True)(func)
    return func


if HAVE_NUMBA:
    prange = numba.prange
else:
    prange = range


@_njit
def _first_bad_row(bad_col):
    """``[k, j]`` of the first flagged row, from per-row column indices."""
    for k in range(bad_col.shape[0]):
        if bad_col[k] >= 0:
            return np.array([k, bad_col[k]])
    return np.array([-1, -1])


# --------------------------------------------------------------------------
# numba path


@_njit
def _entry(w, hw, z, hz, c, alpha, beta):
    aw = -w * w + 1j * w * alpha
    az = -z * z + 1j * z * alpha
    bw = 1j * w * beta + 1.0
    bz = 1j * z * beta + 1.0
    det = aw * bz - az * bw
    diff = aw - az
    scale_det = max(abs(aw) * abs(bz), abs(az) * abs(bw))
    scale_diff = max(abs(aw), abs(az))
    ok = abs(det) > DENOM_TOL * scale_det and abs(diff) > DENOM_TOL * scale_diff
    if not ok:
        return 0j, 0j, False
    k_num = aw * hw - az * hz
    kt = c * k_num / det
    mt = c * (hz - hw) / diff + c * (bz - bw) * k_num / (diff * det)
    return mt, kt, True


@_njit_parallel
def _mdk_complex_nb(w, phi, hw, z, rho, hz, alpha, beta):
    nq = w.shape[0]
    np_ = z.shape[0]
    mt = np.empty((nq, np_), dtype=np.complex128)
    kt = np.empty((nq, np_), dtype=np.complex128)
    bad_col = np.full(nq, -1)  # rows are independent; first hit per row
    for k in prange(nq):
        for j in range(np_):
            c = phi[k] * rho[j] * z[j]
            m, kk, ok = _entry(w[k], hw[k], z[j], hz[j], c, alpha, beta)
            if not ok and bad_col[k] < 0:
                bad_col[k] = j
            mt[k, j] = m
            kt[k, j] = kk
    return mt, kt, _first_bad_row(bad_col)


@_njit_parallel
def _mdk_real_nb(w, phi, hw, z, rho, hz, alpha, beta):
    nq = w.shape[0]
    np_ = z.shape[0]
    mr = np.empty((2 * nq, 2 * np_))
    kr = np.empty((2 * nq, 2 * np_))
    bad_col = np.full(nq, -1)
    for k in prange(nq):
        hwc = np.conj(hw[k])
        for j in range(np_):
            c = phi[k] * rho[j] * z[j]
            m_p, k_p, ok1 = _entry(w[k], hw[k], z[j], hz[j], c, alpha, beta)
            m_m, k_m, ok2 = _entry(-w[k], hwc, z[j], hz[j], c, alpha, beta)
            if not (ok1 and ok2) and bad_col[k] < 0:
                bad_col[k] = j
            r = 2 * k
            s = 2 * j
            sp = m_p + m_m
            sm = m_p - m_m
            mr[r, s] = sp.real
            mr[r, s + 1] = sp.imag
            mr[r + 1, s] = -sm.imag
            mr[r + 1, s + 1] = sm.real
            sp = k_p + k_m
            sm = k_p - k_m
            kr[r, s] = sp.real
            kr[r, s + 1] = sp.imag
            kr[r + 1, s] = -sm.imag
            kr[r + 1, s + 1] = sm.real
    return mr, kr, _first_bad_row(bad_col)


# --------------------------------------------------------------------------
# numpy path


def _entries_np(w, hw, z, hz, c, alpha, beta):
    w = w[:, None]
    hw = hw[:, None]
    z = z[None, :]
    hz = hz[None, :]
    aw = -w * w + 1j * w * alpha
    az = -z * z + 1j * z * alpha
    bw = 1j * w * beta + 1.0
    bz = 1j * z * beta + 1.0
    det = aw * bz - az * bw
    diff = aw - az
    scale_det = np.maximum(np.abs(aw) * np.abs(bz), np.abs(az) * np.abs(bw))
    scale_diff = np.maximum(np.abs(aw), np.abs(az))
    ok = (np.abs(det) > DENOM_TOL * scale_det) & (np.abs(diff) > DENOM_TOL * scale_diff)
    det = np.where(ok, det, 1.0)
    diff = np.where(ok, diff, 1.0)
    k_num = aw * hw - az * hz
    kt = c * k_num / det
    mt = c * (hz - hw) / diff + c * (bz - bw) * k_num / (diff * det)
    mt = np.where(ok, mt, 0.0)
    kt = np.where(ok, kt, 0.0)
    return mt, kt, ok


def _first_bad(ok):
    if ok.all():
        return np.array([-1, -1])
    k, j = np.argwhere(~ok)[0]
    return np.array([k, j])


def _mdk_complex_np(w, phi, hw, z, rho, hz, alpha, beta):
    c = phi[:, None] * (rho * z)[None, :]
    mt, kt, ok = _entries_np(w, hw, z, hz, c, alpha, beta)
    return mt, kt, _first_bad(ok)


def _mdk_real_np(w, phi, hw, z, rho, hz, alpha, beta):
    c = phi[:, None] * (rho * z)[None, :]
    m_p, k_p, ok1 = _entries_np(w, hw, z, hz, c, alpha, beta)
    m_m, k_m, ok2 = _entries_np(-w, np.conj(hw), z, hz, c, alpha, beta)
    nq, np_ = c.shape

    def blocks(p, m):
        out = np.empty((2 * nq, 2 * np_))
        sp = p + m
        sm = p - m
        out[0::2, 0::2] = sp.real
        out[0::2, 1::2] = sp.imag
        out[1::2, 0::2] = -sm.imag
        out[1::2, 1::2] = sm.real
        return out

    return blocks(m_p, m_m), blocks(k_p, k_m), _first_bad(ok1 & ok2)


# --------------------------------------------------------------------------
# dispatch


def _prep(w, phi, hw, z, rho, hz):
    return (
        np.ascontiguousarray(w, dtype=np.float64),
        np.ascontiguousarray(phi, dtype=np.float64),
        np.ascontiguousarray(hw, dtype=np.complex128),
        np.ascontiguousarray(z, dtype=np.float64),
        np.ascontiguousarray(rho, dtype=np.float64),
        np.ascontiguousarray(hz, dtype=np.complex128),
    )


def mdk_complex(w, phi, hw, z, rho, hz, alpha, beta, backend=None):
    """Closed-form complex ``(Mt, Kt)`` over signed nodes.

    Returns ``(Mt, Kt, bad)`` where ``bad`` is ``[k, j]`` of the first
    degenerate denominator or ``[-1, -1]``.
    """
    args = _prep(w, phi, hw, z, rho, hz) + (float(alpha), float(beta))
    if _use_numba(backend):
        return _mdk_complex_nb(*args)
    return _mdk_complex_np(*args)


def mdk_real(w, phi, hw, z, rho, hz, alpha, beta, backend=None):
    """Real ``(MtR, KtR, bad)`` from positive nodes and their samples."""
    args = _prep(w, phi, hw, z, rho, hz) + (float(alpha), float(beta))
    if _use_numba(backend):
        return _mdk_real_nb(*args)
    return _mdk_real_np(*args)


def _use_numba(backend):
    if backend is None:
        return HAVE_NUMBA
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but unavailable")
        return True
    if backend == "numpy":
        return False
    raise ValueError(f"unknown backend {backend!r}")


def active_backend():
    return "numba" if HAVE_NUMBA else "numpy"
