"""Frequency-response datasets: the only input the data-driven path reads."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DisjointnessViolation, InvariantViolation, MissingDamping, ParseError
from .model import as_system, eval_transfer_batch
from .quadrature import P_SIDE, Q_SIDE, QuadratureRule, check_disjoint


@dataclass(frozen=True, eq=False)
class FrequencySampleSet:
    """Samples ``H(i x)`` at the positive nodes of a P rule and a Q rule.

    Values at the mirrored nodes are implied by ``H(-ix) = conj(H(ix))``.
    """

    p_rule: QuadratureRule
    q_rule: QuadratureRule
    p_values: np.ndarray
    q_values: np.ndarray
    alpha: float
    beta: float
    provenance: str = "unknown"

    def __post_init__(self):
        pv = np.array(self.p_values, dtype=complex).ravel()
        qv = np.array(self.q_values, dtype=complex).ravel()
        if pv.size != self.p_rule.nu or qv.size != self.q_rule.nu:
            raise InvariantViolation("value count must equal positive-node count per side")
        if self.p_rule.side != P_SIDE or self.q_rule.side != Q_SIDE:
            raise InvariantViolation("p_rule/q_rule carry the wrong side tags")
        if not (np.all(np.isfinite(pv)) and np.all(np.isfinite(qv))):
            raise InvariantViolation("non-finite sample values")
        if self.alpha < 0 or self.beta < 0:
            raise InvariantViolation("damping coefficients must be >= 0")
        hits = check_disjoint(self.p_rule, self.q_rule)
        if hits:
            raise DisjointnessViolation(f"P and Q nodes collide at (k, j) = {hits[:5]}", hits)
        if any(c.isspace() for c in self.provenance):
            raise InvariantViolation("provenance tag must not contain whitespace")
        pv.setflags(write=False)
        qv.setflags(write=False)
        object.__setattr__(self, "p_values", pv)
        object.__setattr__(self, "q_values", qv)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def p_values_full(self):
        """Samples over the interleaved signed P nodes."""
        return np.column_stack([self.p_values, self.p_values.conj()]).ravel()

    @property
    def q_values_full(self):
        return np.column_stack([self.q_values, self.q_values.conj()]).ravel()

    def __eq__(self, other):
        if not isinstance(other, FrequencySampleSet):
            return NotImplemented
        return (
            self.p_rule == other.p_rule
            and self.q_rule == other.q_rule
            and np.array_equal(self.p_values, other.p_values)
            and np.array_equal(self.q_values, other.q_values)
            and self.alpha == other.alpha
            and self.beta == other.beta
            and self.provenance == other.provenance
        )

    __hash__ = None


def sample_model(sys, p_rule, q_rule, provenance="model"):
    """Evaluate ``H(i x)`` at the positive nodes of both rules."""
    sys = as_system(sys)
    if sys.damping is None:
        raise MissingDamping("system carries no (alpha, beta) damping pair")
    hits = check_disjoint(p_rule, q_rule)
    if hits:
        raise DisjointnessViolation(f"P and Q nodes collide at (k, j) = {hits[:5]}", hits)
    pv = eval_transfer_batch(sys, 1j * p_rule.positive_nodes)
    qv = eval_transfer_batch(sys, 1j * q_rule.positive_nodes)
    return FrequencySampleSet(p_rule, q_rule, pv, qv, sys.damping[0], sys.damping[1], provenance)


# --------------------------------------------------------------------------
# sample file


def _fmt(x):
    return format(float(x), ".17g")


def format_samples(samples):
    lines = [
        f"so-samples v1 alpha={_fmt(samples.alpha)} beta={_fmt(samples.beta)} "
        f"source={samples.provenance}"
    ]
    for label, rule, vals in (
        ("P", samples.p_rule, samples.p_values),
        ("Q", samples.q_rule, samples.q_values),
    ):
        lines.append(f"{label}:")
        for x, w, h in zip(rule.positive_nodes, rule.weights, vals):
            lines.append(f"{_fmt(x)} {_fmt(w)} {_fmt(h.real)} {_fmt(h.imag)}")
    return "\n".join(lines) + "\n"


def export_samples(samples, path):
    with open(path, "w") as fh:
        fh.write(format_samples(samples))


def parse_samples(text):
    from .model import _parse_float, _parse_header_fields

    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ParseError("empty sample file", line=1)
    lineno, header = lines[0]
    fields = _parse_header_fields(header, lineno, "so-samples", ("alpha", "beta", "source"))
    alpha = _parse_float(fields["alpha"], lineno, "alpha")
    beta = _parse_float(fields["beta"], lineno, "beta")
    sections = {}
    current = None
    for lineno, ln in lines[1:]:
        if ln in ("P:", "Q:"):
            current = ln[0]
            if current in sections:
                raise ParseError(f"duplicate section {ln}", line=lineno, field=current)
            sections[current] = []
            continue
        if current is None:
            raise ParseError(f"record before first section: {ln!r}", line=lineno)
        toks = ln.split()
        if len(toks) != 4:
            raise ParseError(f"expected 4 columns, got {len(toks)}", line=lineno, field=current)
        sections[current].append([_parse_float(t, lineno, current) for t in toks])
    for label in ("P", "Q"):
        if not sections.get(label):
            raise ParseError(f"missing or empty section {label}:", field=label)
    rules, values = {}, {}
    for label in ("P", "Q"):
        arr = np.array(sections[label])
        rules[label] = QuadratureRule(label, arr[:, 0], arr[:, 1])
        values[label] = arr[:, 2] + 1j * arr[:, 3]
    return FrequencySampleSet(
        rules["P"], rules["Q"], values["P"], values["Q"], alpha, beta, fields["source"]
    )


def import_samples(path):
    with open(path) as fh:
        return parse_samples(fh.read())


# --------------------------------------------------------------------------
# validation


@dataclass
class ClosureReport:
    structural_ok: bool
    closure_checked: bool
    closure_ok: bool
    max_deviation: float
    issues: list = field(default_factory=list)

    @property
    def ok(self):
        return self.structural_ok and (self.closure_ok or not self.closure_checked)


def validate_conjugate_closure(samples, sys=None, n_checks=10, tol=1e-10, seed=0):
    """Check rule symmetry invariants and, given the true system, the sampled
    values and the conjugation identity ``H(-ix) = conj(H(ix))``.

    The deviation reported is the maximum relative mismatch between the
    conjugate of a stored sample and a fresh evaluation at the mirrored node.
    """
    issues = []
    for rule in (samples.p_rule, samples.q_rule):
        x, w = rule.nodes, rule.full_weights
        if not np.array_equal(x[0::2], -x[1::2]):
            issues.append(f"{rule.side}: mirrored nodes not symmetric")
        if not np.array_equal(w[0::2], w[1::2]):
            issues.append(f"{rule.side}: mirrored weights differ")
    if check_disjoint(samples.p_rule, samples.q_rule):
        issues.append("P and Q nodes not disjoint")
    structural_ok = not issues
    if sys is None:
        return ClosureReport(structural_ok, False, True, 0.0, issues)
    rng = np.random.default_rng(seed)
    nodes = np.concatenate([samples.p_rule.positive_nodes, samples.q_rule.positive_nodes])
    vals = np.concatenate([samples.p_values, samples.q_values])
    pick = rng.choice(nodes.size, size=min(n_checks, nodes.size), replace=False)
    fresh = eval_transfer_batch(sys, -1j * nodes[pick])
    dev = np.abs(fresh - np.conj(vals[pick])) / np.maximum(np.abs(fresh), 1e-300)
    max_dev = float(dev.max())
    closure_ok = max_dev <= tol
    if not closure_ok:
        issues.append(f"conjugate closure violated, max relative deviation {max_dev:.3e}")
    return ClosureReport(structural_ok, True, closure_ok, max_dev, issues)
