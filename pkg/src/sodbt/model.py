"""Second-order LTI systems ``M q'' + D q' + K q = B u, y = C q``.

Holds the system containers, transfer-function evaluation, the first-order
(companion) realization, the proportional-damping constructor, a seeded
mass-spring-damper chain generator and the plain-text model file format.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvariantViolation,
    NegativeCoefficient,
    ParseError,
    SingularPencil,
)

DAMPING_TOL = 1e-12
EPS = np.finfo(float).eps


def damping_residual(M, D, K, alpha, beta):
    """``||D - (alpha M + beta K)||_F / (||D||_F + 1)``."""
    return np.linalg.norm(D - (alpha * M + beta * K)) / (np.linalg.norm(D) + 1.0)


@dataclass(frozen=True, eq=False)
class SecondOrderSystem:
    """SISO second-order system.

    ``B`` is stored as an ``(n, 1)`` column and ``C`` as a ``(1, n)`` row.
    ``damping`` is the ``(alpha, beta)`` pair when ``D = alpha M + beta K``.
    """

    M: np.ndarray
    D: np.ndarray
    K: np.ndarray
    B: np.ndarray
    C: np.ndarray
    damping: tuple = None

    def __post_init__(self):
        M = np.array(self.M, dtype=float, ndmin=2)
        n = M.shape[0]
        D = np.array(self.D, dtype=float, ndmin=2)
        K = np.array(self.K, dtype=float, ndmin=2)
        B = np.array(self.B, dtype=float).reshape(-1, 1)
        C = np.array(self.C, dtype=float).reshape(1, -1)
        for name, mat in (("M", M), ("D", D), ("K", K)):
            if mat.shape != (n, n):
                raise DimensionMismatch(f"{name} has shape {mat.shape}, expected {(n, n)}")
        if B.shape[0] != n or C.shape[1] != n:
            raise DimensionMismatch(f"B {B.shape} / C {C.shape} incompatible with n={n}")
        if np.linalg.cond(M) > 1.0 / EPS:
            raise InvariantViolation("M is singular")
        damping = self.damping
        if damping is not None:
            alpha, beta = (float(v) for v in damping)
            if damping_residual(M, D, K, alpha, beta) > DAMPING_TOL:
                raise InvariantViolation(
                    f"declared damping pair ({alpha}, {beta}) does not reproduce D"
                )
            damping = (alpha, beta)
        for name, value in (("M", M), ("D", D), ("K", K), ("B", B), ("C", C), ("damping", damping)):
            object.__setattr__(self, name, value)
        for arr in (M, D, K, B, C):
            arr.setflags(write=False)

    @property
    def n(self):
        return self.M.shape[0]

    @property
    def alpha(self):
        return None if self.damping is None else self.damping[0]

    @property
    def beta(self):
        return None if self.damping is None else self.damping[1]

    def pencil(self, s):
        return (s * s) * self.M + s * self.D + self.K

    def __eq__(self, other):
        if not isinstance(other, SecondOrderSystem):
            return NotImplemented
        return self.damping == other.damping and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in "MDKBC"
        )

    __hash__ = None


@dataclass(frozen=True)
class FirstOrderRealization:
    E: np.ndarray
    A: np.ndarray
    Bf: np.ndarray
    Cf: np.ndarray

    def transfer(self, s):
        x = np.linalg.solve(s * self.E - self.A, self.Bf.astype(complex))
        return complex((self.Cf @ x)[0, 0])


@dataclass
class ReducedModel:
    """A reduced second-order system together with its provenance."""

    system: SecondOrderSystem
    method: str
    r: int
    singular_values: np.ndarray
    info: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def provenance(self):
        sv = ",".join(format(v, ".17g") for v in np.asarray(self.singular_values))
        parts = [f"method={self.method}", f"r={self.r}"]
        parts += [f"{k}={v}" for k, v in self.info.items()]
        parts.append(f"sv={sv}")
        return " ".join(parts)


def as_system(model):
    """Accept a :class:`SecondOrderSystem` or :class:`ReducedModel`."""
    if isinstance(model, ReducedModel):
        return model.system
    return model


# --------------------------------------------------------------------------
# transfer function


def _gecon(lu, anorm):
    gecon = lapack.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    return rcond


def shifted_lu(sys, s):
    """LU factors of ``s^2 M + s D + K``; raises :class:`SingularPencil`."""
    A = sys.pencil(complex(s))
    anorm = np.abs(A).sum(axis=0).max()
    if not np.all(np.isfinite(A)):
        raise SingularPencil(f"non-finite pencil at s={s}", node=s)
    with warnings.catch_warnings():
        # singularity is judged by the condition estimate below
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    rcond = _gecon(lu, anorm) if anorm > 0 else 0.0
    if not rcond > EPS:
        raise SingularPencil(f"s^2M+sD+K numerically singular at s={s} (rcond={rcond:.3g})", node=s)
    return lu, piv


def resolvent_columns(sys, nodes):
    """``G(s) B`` for each node, returned as columns of an ``(n, len)`` array."""
    nodes = np.asarray(nodes, dtype=complex).ravel()
    out = np.empty((sys.n, nodes.size), dtype=complex)
    b = sys.B[:, 0].astype(complex)
    for i, s in enumerate(nodes):
        try:
            lu = shifted_lu(sys, s)
        except SingularPencil as exc:
            exc.index = i
            raise
        out[:, i] = sla.lu_solve(lu, b, check_finite=False)
    return out


def resolvent_rows(sys, nodes):
    """``C G(s)`` for each node, returned as rows of a ``(len, n)`` array."""
    nodes = np.asarray(nodes, dtype=complex).ravel()
    out = np.empty((nodes.size, sys.n), dtype=complex)
    c = sys.C[0].astype(complex)
    for i, s in enumerate(nodes):
        try:
            lu = shifted_lu(sys, s)
        except SingularPencil as exc:
            exc.index = i
            raise
        # (C G)^T = G^T C^T
        out[i] = sla.lu_solve(lu, c, trans=1, check_finite=False)
    return out


def eval_transfer(sys, s):
    """``H(s) = C (s^2 M + s D + K)^{-1} B``."""
    sys = as_system(sys)
    x = resolvent_columns(sys, [s])[:, 0]
    return complex(sys.C[0] @ x)


def eval_transfer_batch(sys, nodes):
    """Vector of ``H(s)`` over ``nodes`` (order preserved).

    A :class:`SingularPencil` carries the offending ``index``.
    """
    sys = as_system(sys)
    nodes = np.asarray(nodes, dtype=complex).ravel()
    if nodes.size == 0:
        return np.empty(0, dtype=complex)
    return sys.C[0] @ resolvent_columns(sys, nodes)


# --------------------------------------------------------------------------
# realizations and constructors


def to_first_order(sys):
    """Companion realization with state ``[q; q']``."""
    sys = as_system(sys)
    n = sys.n
    I = np.eye(n)
    Z = np.zeros((n, n))
    E = np.block([[I, Z], [Z, sys.M]])
    A = np.block([[Z, I], [-sys.K, -sys.D]])
    Bf = np.vstack([np.zeros((n, 1)), sys.B])
    Cf = np.hstack([sys.C, np.zeros((1, n))])
    return FirstOrderRealization(E, A, Bf, Cf)


def first_order_poles(sys):
    fo = to_first_order(sys)
    return sla.eigvals(fo.A, fo.E)


def is_stable(sys, tol=1e-10):
    poles = first_order_poles(as_system(sys))
    scale = max(1.0, np.abs(poles).max(initial=0.0))
    return bool(np.all(poles.real < -tol * scale))


def build_proportional(M, K, B, C, alpha, beta):
    """System with Rayleigh damping ``D = alpha M + beta K``."""
    if alpha < 0 or beta < 0:
        raise NegativeCoefficient(f"damping coefficients must be >= 0, got alpha={alpha}, beta={beta}")
    M = np.array(M, dtype=float, ndmin=2)
    K = np.array(K, dtype=float, ndmin=2)
    D = alpha * M + beta * K
    return SecondOrderSystem(M, D, K, B, C, damping=(float(alpha), float(beta)))


def chain_stiffness(stiffnesses):
    """Fixed-fixed chain stiffness matrix from ``n + 1`` spring constants."""
    k = np.asarray(stiffnesses, dtype=float)
    n = k.size - 1
    K = np.diag(k[:-1] + k[1:])
    idx = np.arange(n - 1)
    K[idx, idx + 1] = -k[1:-1]
    K[idx + 1, idx] = -k[1:-1]
    return K


def synth_msd_chain(n, masses=1.0, stiffnesses=1.0, alpha=0.0, beta=0.0,
                    input_node=0, output_node=None, jitter=0.0, seed=None):
    """Fixed-fixed mass-spring-damper chain with Rayleigh damping.

    Parameters
    ----------
    n : int
        Number of masses.
    masses : float or array_like
        Scalar or ``n`` masses.
    stiffnesses : float or array_like
        Scalar or ``n + 1`` spring constants (walls at both ends).  With unit
        values ``K`` is the tridiagonal ``[-1, 2, -1]`` matrix.
    alpha, beta : float
        Rayleigh coefficients.
    input_node, output_node : int
        Zero-based indices for ``B = e_in`` and ``C = e_out^T``;
        ``output_node`` defaults to ``input_node``.
    jitter : float
        Relative uniform perturbation applied to masses and springs.
    seed : int, optional
        Seed for the jitter.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if output_node is None:
        output_node = input_node
    for name, idx in (("input_node", input_node), ("output_node", output_node)):
        if not 0 <= idx < n:
            raise IndexOutOfRange(f"{name}={idx} outside [0, {n})")
    m = np.broadcast_to(np.asarray(masses, dtype=float), (n,)).copy()
    k = np.broadcast_to(np.asarray(stiffnesses, dtype=float), (n + 1,)).copy()
    if jitter:
        rng = np.random.default_rng(seed)
        m *= 1.0 + jitter * rng.uniform(-1.0, 1.0, n)
        k *= 1.0 + jitter * rng.uniform(-1.0, 1.0, n + 1)
    if np.any(m <= 0) or np.any(k <= 0):
        raise ValueError("masses and stiffnesses must be positive")
    if n == 1 and np.ndim(stiffnesses) == 0:
        # single mass against one wall
        K = np.array([[k[0]]])
    else:
        K = chain_stiffness(k)
    B = np.zeros((n, 1))
    B[input_node, 0] = 1.0
    C = np.zeros((1, n))
    C[0, output_node] = 1.0
    return build_proportional(np.diag(m), K, B, C, alpha, beta)


# Benchmark chain: stiff enough that the modes sit inside [1e-2, 1e4] with
# moderate Rayleigh damping, actuated and observed at the middle mass.
BENCH_MASS = 1.0
BENCH_STIFFNESS = 2.0e4
BENCH_JITTER = 0.3


def benchmark_chain(n=50, alpha=0.05, beta=0.05, seed=7):
    """The reference chain used by the tests, benchmarks and CLI defaults."""
    return synth_msd_chain(n, masses=BENCH_MASS, stiffnesses=BENCH_STIFFNESS, alpha=alpha,
                           beta=beta, input_node=n // 2, jitter=BENCH_JITTER, seed=seed)


# --------------------------------------------------------------------------
# model file


def _fmt(x):
    return format(float(x), ".17g")


def _write_matrix(lines, label, mat):
    lines.append(f"{label}:")
    for row in np.atleast_2d(mat):
        lines.append(" ".join(_fmt(v) for v in row))


def format_model(sys, provenance=None):
    sys = as_system(sys)
    if sys.damping is None:
        a, b = "none", "none"
    else:
        a, b = _fmt(sys.damping[0]), _fmt(sys.damping[1])
    lines = [f"so-model v1 n={sys.n} alpha={a} beta={b}"]
    if provenance:
        lines.append(f"# {provenance}")
    for label in "MDKBC":
        _write_matrix(lines, label, getattr(sys, label))
    return "\n".join(lines) + "\n"


def save_model(model, path):
    """Write a system (or a :class:`ReducedModel` with provenance)."""
    prov = model.provenance() if isinstance(model, ReducedModel) else None
    with open(path, "w") as fh:
        fh.write(format_model(model, prov))


def _parse_header_fields(line, lineno, magic, required):
    tokens = line.split()
    if len(tokens) < 2 or tokens[0] != magic or tokens[1] != "v1":
        raise ParseError(f"expected header '{magic} v1 ...', got {line!r}", line=lineno)
    fields = {}
    for tok in tokens[2:]:
        if "=" not in tok:
            raise ParseError(f"malformed header field {tok!r}", line=lineno)
        key, val = tok.split("=", 1)
        fields[key] = val
    for key in required:
        if key not in fields:
            raise ParseError(f"header missing field '{key}'", line=lineno, field=key)
    return fields


def _parse_float(text, lineno, fieldname):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"bad number {text!r} for '{fieldname}'", line=lineno, field=fieldname) from None


def parse_provenance(text):
    out = {}
    for tok in text.split():
        if "=" in tok:
            key, val = tok.split("=", 1)
            out[key] = val
    return out


def parse_model(text):
    """Parse model-file text into ``(system, provenance_dict)``."""
    raw = text.splitlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw)]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines:
        raise ParseError("empty model file", line=1)
    lineno, header = lines[0]
    fields = _parse_header_fields(header, lineno, "so-model", ("n", "alpha", "beta"))
    try:
        n = int(fields["n"])
    except ValueError:
        raise ParseError(f"bad dimension {fields['n']!r}", line=lineno, field="n") from None
    if n < 1:
        raise ParseError(f"dimension must be >= 1, got {n}", line=lineno, field="n")
    damping = None
    if fields["alpha"] != "none" or fields["beta"] != "none":
        damping = (
            _parse_float(fields["alpha"], lineno, "alpha"),
            _parse_float(fields["beta"], lineno, "beta"),
        )
    provenance = {}
    blocks = {}
    current = None
    for lineno, ln in lines[1:]:
        if ln.startswith("#"):
            provenance.update(parse_provenance(ln[1:]))
            continue
        if ln.endswith(":") and ln[:-1] in "MDKBC" and len(ln) == 2:
            current = ln[:-1]
            if current in blocks:
                raise ParseError(f"duplicate block {current}", line=lineno, field=current)
            blocks[current] = []
            continue
        if current is None:
            raise ParseError(f"data before first block label: {ln!r}", line=lineno)
        blocks[current].append([_parse_float(t, lineno, current) for t in ln.split()])
    shapes = {"M": (n, n), "D": (n, n), "K": (n, n), "B": (n, 1), "C": (1, n)}
    mats = {}
    for label, shape in shapes.items():
        if label not in blocks:
            raise ParseError(f"missing block {label}", field=label)
        rows = blocks[label]
        if len(rows) != shape[0] or any(len(r) != shape[1] for r in rows):
            got = (len(rows), len(rows[0]) if rows else 0)
            raise DimensionMismatch(f"block {label}: expected shape {shape}, got {got}")
        mats[label] = np.array(rows, dtype=float)
    sys = SecondOrderSystem(mats["M"], mats["D"], mats["K"], mats["B"], mats["C"], damping=damping)
    return sys, provenance


def load_model(path, warn_unstable=True):
    """Read a model file; returns a :class:`SecondOrderSystem`.

    Provenance comments (if any) are available via :func:`load_model_with_provenance`.
    """
    return load_model_with_provenance(path, warn_unstable)[0]


def load_model_with_provenance(path, warn_unstable=True):
    with open(path) as fh:
        sys, prov = parse_model(fh.read())
    if warn_unstable and not is_stable(sys):
        warnings.warn(f"model in {path} is not asymptotically stable", RuntimeWarning, stacklevel=2)
    return sys, prov
