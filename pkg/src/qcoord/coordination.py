"""Target ensembles, candidate extensions, and closed-form rate expressions.

A target is a classical-quantum ensemble: a source pmf over X together
with one product state per source symbol on the network registers
(A, B for the two-node network; A, B, C for cascade and isolated-node).
An extension adjoins label variables Y (and Z) with atom lists for the
downstream registers; a validated extension reproduces the target
ensemble exactly and is the object the rate formulas are evaluated on.

Network kinds: "two-node" (rate I(X;Y)), "cascade" (corner point
(I(X;YZ), I(X;Z))), "isolated" (rate I(X;Y|Z), which additionally
requires the A and C marginals of the extension to be in product form).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .classical import (
    Alphabet,
    JointPmf,
    conditional_mutual_information,
    mutual_information,
)
from .quantum import (
    DensityOperator,
    HermitianObservable,
    Povm,
    QuantumError,
    born_distribution,
    observable_expectation,
    partial_trace,
    tensor,
    trace_norm_distance,
)

KINDS = ("two-node", "cascade", "isolated")
VALIDATION_TOL = 1e-9


class CoordinationError(ValueError):
    """Rejected input: inconsistent shapes/dims, as opposed to a failing check."""


class ExtensionNotValidated(RuntimeError):
    """Raised when a rate is requested for an extension never validated."""


class CqEnsemble:
    """Source pmf p_X plus one per-letter product state per source symbol.

    ``register_dims`` maps register names (subset of A, B, C in that order)
    to dimensions; each ``states[x]`` lives on the full register product.
    """

    def __init__(self, source: JointPmf, states: Sequence[DensityOperator],
                 register_dims: dict):
        if len(source.variables) != 1:
            raise CoordinationError("source must be a single-variable pmf")
        regs = list(register_dims)
        if regs not in (["A", "B"], ["A", "B", "C"]):
            raise CoordinationError(
                f"registers must be [A,B] or [A,B,C], got {regs}")
        self.source = source
        self.register_dims = dict(register_dims)
        total = int(np.prod(list(register_dims.values())))
        states = list(states)
        if len(states) != source.variables[0].size:
            raise CoordinationError(
                f"{len(states)} states for {source.variables[0].size} symbols")
        for s in states:
            if s.dim != total:
                raise CoordinationError(
                    f"state dim {s.dim} does not match registers {register_dims}")
        self.states = tuple(states)

    @property
    def x_alphabet(self) -> Alphabet:
        return self.source.variables[0]

    @property
    def registers(self) -> tuple:
        return tuple(self.register_dims)

    @property
    def dims_list(self) -> list:
        return [self.register_dims[r] for r in self.registers]

    def a_part(self, x_index: int) -> DensityOperator:
        return partial_trace(self.states[x_index], self.dims_list, [0])

    def rest_part(self, x_index: int) -> DensityOperator:
        keep = list(range(1, len(self.registers)))
        return partial_trace(self.states[x_index], self.dims_list, keep)

    def factorization_defect(self, x_index: int) -> float:
        """Trace distance between omega^x and (A part) x (rest part)."""
        prod = tensor(self.a_part(x_index), self.rest_part(x_index))
        return trace_norm_distance(prod.matrix, self.states[x_index].matrix)

    def factorizes(self, tol: float = VALIDATION_TOL) -> bool:
        return all(
            self.factorization_defect(i) <= tol
            for i in range(len(self.states))
        )

    def average_state(self) -> DensityOperator:
        px = self.source.table
        avg = sum(p * s.matrix for p, s in zip(px, self.states))
        return DensityOperator(avg)

    def conditional_part(self, x_index: int, register: str) -> DensityOperator:
        pos = self.registers.index(register)
        return partial_trace(self.states[x_index], self.dims_list, [pos])


@dataclass(frozen=True)
class RatePoint:
    """A corner of the cascade region: rates in bits per source symbol."""

    r12: float
    r23: Optional[float] = None

    def __post_init__(self):
        for v in (self.r12, self.r23):
            if v is not None and not np.isfinite(v):
                raise CoordinationError("rates must be finite")


class Extension:
    """Candidate decomposition: joint pmf over labels plus per-label atoms.

    ``joint`` has variables (X, Y) or (X, Y, Z); ``atoms_a[x]``,
    ``atoms_b[y]`` and (for three-register kinds) ``atoms_c[z]`` are the
    per-label register states.  Atom lists may repeat states; merging is
    the optimizer's job.
    """

    def __init__(self, joint: JointPmf, atoms_a, atoms_b, atoms_c=None,
                 kind: str = "two-node"):
        if kind not in KINDS:
            raise CoordinationError(f"unknown network kind {kind!r}")
        want = 2 if kind == "two-node" else 3
        if len(joint.variables) != want:
            raise CoordinationError(
                f"{kind} extension needs {want} label variables")
        if kind == "two-node" and atoms_c is not None:
            raise CoordinationError("two-node extension has no C atoms")
        if kind != "two-node" and atoms_c is None:
            raise CoordinationError(f"{kind} extension requires C atoms")
        sizes = [v.size for v in joint.variables]
        atoms_a, atoms_b = list(atoms_a), list(atoms_b)
        if len(atoms_a) != sizes[0]:
            raise CoordinationError("one A atom per X symbol required")
        if len(atoms_b) != sizes[1]:
            raise CoordinationError("one B atom per Y symbol required")
        if atoms_c is not None:
            atoms_c = list(atoms_c)
            if len(atoms_c) != sizes[2]:
                raise CoordinationError("one C atom per Z symbol required")
        self.joint = joint
        self.atoms_a = tuple(atoms_a)
        self.atoms_b = tuple(atoms_b)
        self.atoms_c = tuple(atoms_c) if atoms_c is not None else None
        self.kind = kind
        self._validated = False

    @property
    def validated(self) -> bool:
        return self._validated

    def require_validated(self):
        if not self._validated:
            raise ExtensionNotValidated(
                "run validate_extension against the target ensemble first")

    def conditional_rest(self, x_index: int) -> np.ndarray:
        """Sum_y[,z] p(y[,z]|x) * atomsB^y [x atomsC^z] as a raw matrix."""
        t = self.joint.table
        px = t.reshape(t.shape[0], -1).sum(axis=1)
        if px[x_index] <= 0:
            raise CoordinationError(f"source symbol {x_index} has zero mass")
        if self.kind == "two-node":
            cond = t[x_index] / px[x_index]
            return sum(
                c * b.matrix for c, b in zip(cond, self.atoms_b) if c > 0
            )
        cond = t[x_index] / px[x_index]
        dim_b = self.atoms_b[0].dim
        dim_c = self.atoms_c[0].dim
        out = np.zeros((dim_b * dim_c, dim_b * dim_c), dtype=complex)
        for yi in range(cond.shape[0]):
            for zi in range(cond.shape[1]):
                c = cond[yi, zi]
                if c > 0:
                    out += c * np.kron(self.atoms_b[yi].matrix,
                                       self.atoms_c[zi].matrix)
        return out

    def ac_marginal(self) -> np.ndarray:
        """Sum_{x,z} p(x,z) atomsA^x x atomsC^z as a raw matrix."""
        if self.kind == "two-node":
            raise CoordinationError("AC marginal needs a Z variable")
        pxz = self.joint.table.sum(axis=1)
        da = self.atoms_a[0].dim
        dc = self.atoms_c[0].dim
        out = np.zeros((da * dc, da * dc), dtype=complex)
        for xi in range(pxz.shape[0]):
            for zi in range(pxz.shape[1]):
                if pxz[xi, zi] > 0:
                    out += pxz[xi, zi] * np.kron(self.atoms_a[xi].matrix,
                                                 self.atoms_c[zi].matrix)
        return out


@dataclass(frozen=True)
class ConstraintCheck:
    """One validated constraint: measured deviation vs. tolerance."""

    name: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            status = "ok " if c.passed else "FAIL"
            lines.append(f"[{status}] {c.name}: deviation={c.deviation:.3e} "
                         f"(tol={c.tolerance:.1e})")
        return "\n".join(lines)


def validate_extension(ext: Extension, target: CqEnsemble,
                       tol: float = VALIDATION_TOL) -> ValidationReport:
    """Check an extension against its target ensemble, constraint by constraint.

    Shape or dimension mismatches raise CoordinationError (rejected input);
    numeric constraint violations come back as failing report entries.
    """
    want_regs = 2 if ext.kind == "two-node" else 3
    if len(target.registers) != want_regs:
        raise CoordinationError(
            f"{ext.kind} extension against {len(target.registers)}-register target")
    x_alpha = target.x_alphabet
    if ext.joint.variables[0].size != x_alpha.size:
        raise CoordinationError("X alphabet size mismatch")
    dims = target.dims_list
    if ext.atoms_a[0].dim != dims[0]:
        raise CoordinationError("A atom dimension mismatch")
    if ext.atoms_b[0].dim != dims[1]:
        raise CoordinationError("B atom dimension mismatch")
    if ext.atoms_c is not None and ext.atoms_c[0].dim != dims[2]:
        raise CoordinationError("C atom dimension mismatch")

    checks = []
    x_marg = ext.joint.marginal([ext.joint.variables[0].name])
    dev = float(0.5 * np.abs(x_marg.table - target.source.table).sum())
    checks.append(ConstraintCheck("source marginal p_X", dev, tol))

    px = target.source.table
    for i, sym in enumerate(x_alpha.symbols):
        defect = target.factorization_defect(i)
        checks.append(
            ConstraintCheck(f"omega^{sym} factorizes A x rest", defect, tol))
        dev_a = trace_norm_distance(ext.atoms_a[i].matrix,
                                    target.a_part(i).matrix)
        checks.append(ConstraintCheck(f"A atom reproduces A part, x={sym}",
                                      dev_a, tol))
        if px[i] > 0:
            rest = ext.conditional_rest(i)
            dev_r = trace_norm_distance(rest, target.rest_part(i).matrix)
            checks.append(
                ConstraintCheck(f"atom mixture reproduces rest, x={sym}",
                                dev_r, tol))

    if ext.kind == "isolated":
        ac = ext.ac_marginal()
        pz = ext.joint.table.sum(axis=(0, 1))
        pxm = ext.joint.table.sum(axis=(1, 2))
        sigma_a = sum(p * a.matrix for p, a in zip(pxm, ext.atoms_a))
        sigma_c = sum(p * c.matrix for p, c in zip(pz, ext.atoms_c))
        dev_ac = trace_norm_distance(ac, np.kron(sigma_a, sigma_c))
        checks.append(ConstraintCheck("sigma_AC = sigma_A x sigma_C",
                                      dev_ac, tol))

    report = ValidationReport(tuple(checks))
    if report.passed:
        ext._validated = True
    return report


def two_node_rate(ext: Extension) -> float:
    """I(X;Y) of the extension's label pmf (bits per source symbol)."""
    ext.require_validated()
    if ext.kind != "two-node":
        raise CoordinationError("two_node_rate needs a two-node extension")
    x, y = ext.joint.names
    return mutual_information(ext.joint, [x], [y])


def cascade_rate_point(ext: Extension) -> RatePoint:
    """Corner point (I(X;YZ), I(X;Z)); the region for this extension is its up-set."""
    ext.require_validated()
    if ext.kind != "cascade":
        raise CoordinationError("cascade_rate_point needs a cascade extension")
    x, y, z = ext.joint.names
    return RatePoint(
        r12=mutual_information(ext.joint, [x], [y, z]),
        r23=mutual_information(ext.joint, [x], [z]),
    )


def isolated_rate(ext: Extension) -> float:
    """I(X;Y|Z) for an isolated-node extension (includes the AC product check)."""
    ext.require_validated()
    if ext.kind != "isolated":
        raise CoordinationError("isolated_rate needs an isolated extension")
    x, y, z = ext.joint.names
    return conditional_mutual_information(ext.joint, [x], [y], [z])


def measurement_statistics(slot_states: Sequence[DensityOperator], observable):
    """Both sides of the block-averaged measurement identity, independently.

    Returns (empirical average over slots, value on the mean state).  For a
    HermitianObservable the values are scalars, for a Povm they are outcome
    distributions.
    """
    slots = list(slot_states)
    if not slots:
        raise CoordinationError("need at least one slot state")
    dim = slots[0].dim
    for s in slots:
        if s.dim != dim:
            raise QuantumError("slot states have mismatched dimensions")
    mean_state = DensityOperator(
        sum(s.matrix for s in slots) / len(slots))
    if isinstance(observable, HermitianObservable):
        empirical = float(np.mean([observable_expectation(s, observable)
                                   for s in slots]))
        return empirical, observable_expectation(mean_state, observable)
    if isinstance(observable, Povm):
        empirical = np.mean([born_distribution(s, observable) for s in slots],
                            axis=0)
        return empirical, born_distribution(mean_state, observable)
    raise CoordinationError("observable must be HermitianObservable or Povm")


def extension_target(ext: Extension, register_dims: dict) -> CqEnsemble:
    """The ensemble an extension induces: its own X marginal and mixtures.

    Useful for validating a decomposition "against its own induced ensemble".
    """
    x_alpha = ext.joint.variables[0]
    source = ext.joint.marginal([x_alpha.name])
    states = []
    for i in range(x_alpha.size):
        rest = ext.conditional_rest(i)
        states.append(tensor(ext.atoms_a[i], DensityOperator(rest)))
    return CqEnsemble(source, states, register_dims)
