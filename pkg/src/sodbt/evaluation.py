"""Reduction quality: frequency sweeps, H-infinity and H2 errors, time responses.

All relative errors divide by a norm of the *full* model, never the reduced
one, so ``hinf_error_grid(sys, red)`` and ``hinf_error_grid(red, sys)`` share
a numerator but not a denominator.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np
import scipy.linalg as sla

from .errors import BadInterval, SingularPencil
from .gramians import check_stable
from .model import EPS, ReducedModel, _gecon, as_system, eval_transfer, first_order_poles, to_first_order
from .quadrature import logspace_nodes, trapezoid_raw

DEFAULT_COUNT = 2000
REFINE_ROUNDS = 3
REFINE_POINTS = 21
TRUST_RTOL = 1e-2
H2_FLAG_RTOL = 0.10


def _tag(model):
    return model.method if isinstance(model, ReducedModel) else "full"


def _frequency_grid(lo, hi, count):
    if count < 1:
        raise ValueError("count must be >= 1")
    if count == 1:
        if not lo > 0:
            raise BadInterval(f"need lo > 0, got {lo}")
        return np.array([float(lo)])
    return logspace_nodes(lo, hi, count)


def _sweep(sys, freqs):
    """``H(i f)`` per node; singular nodes become NaN and are listed."""
    sys = as_system(sys)
    out = np.full(len(freqs), np.nan + 0j)
    skipped = []
    for i, f in enumerate(freqs):
        try:
            out[i] = eval_transfer(sys, 1j * f)
        except SingularPencil:
            skipped.append(i)
    return out, skipped


# --------------------------------------------------------------------------
# Bode sweep


@dataclass
class BodeData:
    """Magnitude and phase of ``H(i f)`` on a log grid."""

    freqs: np.ndarray
    magnitude: np.ndarray
    phase: np.ndarray
    skipped: list = field(default_factory=list)
    tag: str = "full"

    @property
    def values(self):
        return self.magnitude * np.exp(1j * self.phase)


def bode_sweep(model, lo, hi, count):
    """Frequency response of ``model`` at ``count`` log-spaced nodes.

    Nodes where the pencil is numerically singular are skipped: their
    magnitude and phase are NaN and their indices are listed in
    ``skipped``.
    """
    freqs = _frequency_grid(lo, hi, count)
    vals, skipped = _sweep(model, freqs)
    if skipped:
        warnings.warn(f"{len(skipped)} singular node(s) skipped in sweep", RuntimeWarning, stacklevel=2)
    return BodeData(freqs, np.abs(vals), np.angle(vals), skipped, _tag(model))


# --------------------------------------------------------------------------
# H-infinity


@dataclass
class ErrorReport:
    """Frequency-grid comparison of a full and a reduced model.

    Attributes
    ----------
    grid : ndarray
        Sorted frequencies, coarse grid plus refinement points.
    h_full, h_red : ndarray
        Complex responses on ``grid``.
    abs_err : ndarray
        ``|H - H_r|`` on ``grid``.
    hinf_rel : float
        ``max |H - H_r| / max |H|``.
    h2_rel : float
        Trapezoid-on-grid estimate of ``||H - H_r||_2 / ||H||_2`` using the
        coarse grid only.
    trusted : bool
        False when refinement moved ``hinf_rel`` by more than 1 %, i.e. the
        coarse grid was too sparse to be believed.
    """

    grid: np.ndarray
    h_full: np.ndarray
    h_red: np.ndarray
    abs_err: np.ndarray
    hinf_rel: float
    hinf_abs: float
    h2_rel: float
    coarse_hinf_rel: float
    trusted: bool
    tag_full: str = "full"
    tag_red: str = "reduced"
    skipped: list = field(default_factory=list)

    @classmethod
    def empty(cls, tag_full="full", tag_red="reduced"):
        z = np.empty(0)
        return cls(z, z.astype(complex), z.astype(complex), z, 0.0, 0.0, 0.0, 0.0, True, tag_full, tag_red)

    def summary(self):
        """Key-value block used by the CLI."""
        lines = [
            f"full={self.tag_full}",
            f"reduced={self.tag_red}",
            f"hinf_rel={self.hinf_rel:.6e}",
            f"hinf_abs={self.hinf_abs:.6e}",
            f"h2_rel_grid={self.h2_rel:.6e}",
            f"grid_points={self.grid.size}",
            f"trusted={'yes' if self.trusted else 'no'}",
        ]
        if self.skipped:
            lines.append(f"skipped={len(self.skipped)}")
        return "\n".join(lines)


def _refine(sys, red, lo_f, hi_f):
    freqs = np.geomspace(lo_f, hi_f, REFINE_POINTS)[1:-1]
    hf, sf = _sweep(sys, freqs)
    hr, sr = _sweep(red, freqs)
    keep = np.isfinite(hf) & np.isfinite(hr)
    return freqs[keep], hf[keep], hr[keep]


def hinf_error_grid(sys, red, lo=1e-2, hi=1e4, count=DEFAULT_COUNT):
    """Relative H-infinity error estimated on a refined log grid.

    The coarse grid has ``count`` nodes.  Then ``REFINE_ROUNDS`` rounds of
    local refinement zoom in on the neighbourhoods of the arg-max of
    ``|H - H_r|`` and of ``|H|``.
    """
    if count < 2:
        raise ValueError("count must be >= 2")
    grid = _frequency_grid(lo, hi, count)
    hf, sf = _sweep(sys, grid)
    hr, sr = _sweep(red, grid)
    skipped = sorted(set(sf) | set(sr))
    keep = np.isfinite(hf) & np.isfinite(hr)
    grid, hf, hr = grid[keep], hf[keep], hr[keep]
    if grid.size == 0:
        raise SingularPencil("every grid node is singular")
    err = np.abs(hf - hr)
    denom = np.abs(hf).max()
    coarse = err.max() / denom if denom > 0 else np.inf

    # coarse-grid H2 ratio; the 1/2pi and mirror factors cancel
    w = trapezoid_raw(grid) if grid.size >= 2 else np.ones(1)
    num2 = np.sum(w * err ** 2)
    den2 = np.sum(w * np.abs(hf) ** 2)
    h2 = float(np.sqrt(num2 / den2)) if den2 > 0 else np.inf

    for _ in range(REFINE_ROUNDS):
        order = np.argsort(grid)
        grid, hf, hr = grid[order], hf[order], hr[order]
        err = np.abs(hf - hr)
        new = []
        for j in {int(np.argmax(err)), int(np.argmax(np.abs(hf)))}:
            a = grid[max(j - 1, 0)]
            b = grid[min(j + 1, grid.size - 1)]
            if b > a:
                new.append(_refine(sys, red, a, b))
        for f, a, b in new:
            grid = np.concatenate([grid, f])
            hf = np.concatenate([hf, a])
            hr = np.concatenate([hr, b])

    order = np.argsort(grid, kind="stable")
    grid, hf, hr = grid[order], hf[order], hr[order]
    err = np.abs(hf - hr)
    denom = np.abs(hf).max()
    hinf_abs = float(err.max())
    rel = hinf_abs / denom if denom > 0 else np.inf
    scale = max(rel, np.finfo(float).tiny)
    trusted = abs(rel - coarse) <= TRUST_RTOL * scale or rel < 1e-14
    return ErrorReport(grid, hf, hr, err, float(rel), hinf_abs, h2, float(coarse), bool(trusted),
                       _tag(sys), _tag(red), skipped)


# --------------------------------------------------------------------------
# H2


@dataclass
class H2Report:
    """Relative H2 error by two independent routes.

    ``rel`` comes from Lyapunov equations of the error system; ``rel_grid``
    from trapezoid quadrature of ``|H - H_r|^2``.  ``consistent`` is False
    when the two differ by more than 10 %.
    """

    rel: float
    rel_grid: float
    abs: float
    norm_full: float
    consistent: bool
    band: tuple


def _state_space(sys):
    fo = to_first_order(sys)
    Einv_A = np.linalg.solve(fo.E, fo.A)
    Einv_B = np.linalg.solve(fo.E, fo.Bf)
    return Einv_A, Einv_B, fo.Cf


def _cross_term(A1, B1, C1, A2, B2, C2):
    """``C1 X C2^T`` with ``A1 X + X A2^T + B1 B2^T = 0``."""
    X = sla.solve_sylvester(A1, A2.T, -B1 @ B2.T)
    return float((C1 @ X @ C2.T)[0, 0])


def _h2_band(*systems):
    mags = np.concatenate([np.abs(first_order_poles(s)) for s in systems])
    mags = mags[mags > 0]
    return float(mags.min()) * 1e-3, float(mags.max()) * 1e3


def h2_error(sys, red, nu=4000, band=None):
    """Relative H2 error ``||H - H_r||_2 / ||H||_2``.

    The primary value solves three Sylvester equations that together form
    the controllability Gramian of the block-diagonal error system.  Sharing
    one solver for all three blocks makes identical inputs cancel exactly.
    The cross-check integrates ``|H - H_r|^2`` with the trapezoid rule on
    ``nu`` log-spaced nodes over ``band`` (default: three decades beyond the
    pole magnitudes of both models on either side).
    """
    full = as_system(sys)
    rmod = as_system(red)
    check_stable(full)
    check_stable(rmod)
    A1, B1, C1 = _state_space(full)
    A2, B2, C2 = _state_space(rmod)
    h11 = _cross_term(A1, B1, C1, A1, B1, C1)
    h12 = _cross_term(A1, B1, C1, A2, B2, C2)
    h22 = _cross_term(A2, B2, C2, A2, B2, C2)
    err2 = max(h11 - 2.0 * h12 + h22, 0.0)
    norm = np.sqrt(max(h11, 0.0))
    rel = np.sqrt(err2) / norm if norm > 0 else np.inf

    if band is None:
        band = _h2_band(full, rmod)
    grid = logspace_nodes(band[0], band[1], nu)
    hf, sf = _sweep(full, grid)
    hr, sr = _sweep(rmod, grid)
    keep = np.isfinite(hf) & np.isfinite(hr)
    w = trapezoid_raw(grid)[keep]
    den = np.sum(w * np.abs(hf[keep]) ** 2)
    num = np.sum(w * np.abs(hf[keep] - hr[keep]) ** 2)
    rel_grid = float(np.sqrt(num / den)) if den > 0 else np.inf

    big = max(rel, rel_grid)
    consistent = big < 1e-12 or abs(rel - rel_grid) <= H2_FLAG_RTOL * big
    if not consistent:
        warnings.warn(f"H2 estimates disagree: lyapunov={rel:.3e} grid={rel_grid:.3e}",
                      RuntimeWarning, stacklevel=2)
    return H2Report(float(rel), rel_grid, float(np.sqrt(err2)), float(norm), bool(consistent), tuple(band))


# --------------------------------------------------------------------------
# time domain


@dataclass(frozen=True)
class ExpSineInput:
    """``u(t) = amplitude * exp(-a t) * sin(b t)``."""

    a: float = 1.0
    b: float = 1.0
    amplitude: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.exp(-self.a * t) * np.sin(self.b * t)

    def describe(self):
        return f"exp-sine a={self.a:g} b={self.b:g} amplitude={self.amplitude:g}"


@dataclass
class TimeResponse:
    times: np.ndarray
    outputs: np.ndarray
    input: ExpSineInput
    tag: str = "full"

    @property
    def step(self):
        return float(self.times[1] - self.times[0])


def _as_input(u):
    if isinstance(u, ExpSineInput):
        return u
    if u is None:
        return ExpSineInput(0.0, 0.0, 0.0)
    a, b = u
    return ExpSineInput(float(a), float(b))


def simulate_time(model, u, t_end, steps):
    """Zero-state response by the implicit trapezoidal rule.

    Parameters
    ----------
    model : SecondOrderSystem or ReducedModel
    u : ExpSineInput or (a, b) or None
        ``None`` means ``u = 0``.
    t_end : float
    steps : int
        Number of fixed steps, ``h = t_end / steps``.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    u = _as_input(u)
    sys = as_system(model)
    fo = to_first_order(sys)
    h = t_end / steps
    lhs = fo.E - 0.5 * h * fo.A
    rhs = fo.E + 0.5 * h * fo.A
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu = sla.lu_factor(lhs, check_finite=False)
    anorm = np.abs(lhs).sum(axis=0).max()
    rcond = _gecon(lu[0], anorm)
    if not rcond > EPS:
        raise SingularPencil(f"E - hA/2 numerically singular (rcond={rcond:.3g})", node=h)
    times = np.linspace(0.0, t_end, steps + 1)
    uv = u(times)
    b = fo.Bf[:, 0]
    c = fo.Cf[0]
    x = np.zeros(fo.E.shape[0])
    y = np.empty(steps + 1)
    y[0] = 0.0
    for k in range(steps):
        x = sla.lu_solve(lu, rhs @ x + 0.5 * h * (uv[k] + uv[k + 1]) * b, check_finite=False)
        y[k + 1] = c @ x
    return TimeResponse(times, y, u, _tag(model))


# --------------------------------------------------------------------------
# plot data


def _columns(obj):
    if isinstance(obj, ErrorReport):
        return (["freq", "mag_full", "mag_red", "abs_err"],
                [obj.grid, np.abs(obj.h_full), np.abs(obj.h_red), obj.abs_err])
    if isinstance(obj, BodeData):
        return ["freq", "mag", "phase"], [obj.freqs, obj.magnitude, obj.phase]
    if isinstance(obj, TimeResponse):
        return ["time", f"y_{obj.tag}"], [obj.times, obj.outputs]
    if isinstance(obj, (list, tuple)):
        if not obj:
            return ["time"], [np.empty(0)]
        t = obj[0].times
        for r in obj[1:]:
            if r.times.shape != t.shape or not np.allclose(r.times, t, rtol=0, atol=1e-12 * t[-1]):
                raise ValueError("time responses must share a time grid")
        return ["time"] + [f"y_{r.tag}" for r in obj], [t] + [r.outputs for r in obj]
    raise TypeError(f"cannot export {type(obj).__name__}")


def export_plot_data(obj, path):
    """Write a whitespace-separated column file with a ``#`` header line."""
    names, cols = _columns(obj)
    lines = ["# " + " ".join(names)]
    for row in zip(*cols):
        lines.append(" ".join(format(float(v), ".17g") for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_plot_data(path):
    """Inverse of :func:`export_plot_data`: ``(names, 2-D array)``."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError("missing '#' header line")
        names = header[1:].split()
        rows = [list(map(float, ln.split())) for ln in fh if ln.strip()]
    data = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return names, data
