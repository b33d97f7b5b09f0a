"""Discrete probability: joint pmfs, Shannon quantities, types, typicality.

Joint pmfs are dense numpy tables over a handful of named variables
(alphabet-product size is capped, paper-scale alphabets are tiny).
All information quantities are in bits with 0 log 0 := 0.  Conditioning
is handled by marginalization inside the mutual-information helpers
rather than by a separate conditional-pmf type.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

PMF_TOL = 1e-12
MAX_TABLE_ENTRIES = 1_000_000


class PmfError(ValueError):
    """Rejected input: malformed distribution or variable selection."""


@dataclass(frozen=True)
class Alphabet:
    """A named finite alphabet with an ordered list of symbol ids."""

    name: str
    symbols: tuple

    def __init__(self, name: str, symbols: Sequence):
        symbols = tuple(symbols)
        if not symbols:
            raise PmfError(f"alphabet {name!r} is empty")
        if len(set(symbols)) != len(symbols):
            raise PmfError(f"alphabet {name!r} has duplicate symbols")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "symbols", symbols)

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise PmfError(f"symbol {symbol!r} not in alphabet {self.name!r}")


class JointPmf:
    """Dense joint distribution over one or more named variables."""

    __slots__ = ("variables", "table")

    def __init__(self, variables: Sequence[Alphabet], table):
        variables = tuple(variables)
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise PmfError(f"duplicate variable names {names}")
        t = np.asarray(table, dtype=float)
        shape = tuple(v.size for v in variables)
        if t.shape != shape:
            raise PmfError(f"table shape {t.shape} does not match alphabets {shape}")
        if t.size > MAX_TABLE_ENTRIES:
            raise PmfError("alphabet product too large")
        if np.any(t < -PMF_TOL):
            raise PmfError("negative probability entry")
        t = np.clip(t, 0.0, None)
        if abs(t.sum() - 1.0) > 1e-9:
            raise PmfError(f"probabilities sum to {t.sum()}, not 1")
        t = t / t.sum()
        t.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "table", t)

    def __setattr__(self, name, value):
        raise AttributeError("JointPmf is immutable")

    @property
    def names(self) -> tuple:
        return tuple(v.name for v in self.variables)

    def alphabet(self, name: str) -> Alphabet:
        for v in self.variables:
            if v.name == name:
                return v
        raise PmfError(f"unknown variable {name!r}")

    def _axes(self, names) -> list:
        own = list(self.names)
        axes = []
        for n in names:
            if n not in own:
                raise PmfError(f"unknown variable {n!r}; have {own}")
            axes.append(own.index(n))
        if len(set(axes)) != len(axes):
            raise PmfError(f"repeated variable in {list(names)}")
        return axes

    def marginal(self, names) -> "JointPmf":
        """Marginal pmf over ``names``, in this pmf's variable order."""
        axes = self._axes(names)
        keep = sorted(axes)
        drop = tuple(i for i in range(len(self.variables)) if i not in keep)
        t = self.table.sum(axis=drop) if drop else self.table
        return JointPmf([self.variables[i] for i in keep], t)

    def prob(self, assignment: dict) -> float:
        idx = tuple(
            v.index(assignment[v.name]) for v in self.variables
        )
        return float(self.table[idx])

    def __repr__(self):
        return f"JointPmf({'x'.join(self.names)}, shape={self.table.shape})"


def pmf_from_assignments(variables: Sequence[Alphabet], entries: dict) -> JointPmf:
    """Build a JointPmf from {symbol-tuple: probability} sparse entries."""
    variables = tuple(variables)
    t = np.zeros(tuple(v.size for v in variables))
    for key, p in entries.items():
        if not isinstance(key, tuple):
            key = (key,)
        idx = tuple(v.index(s) for v, s in zip(variables, key))
        t[idx] += p
    return JointPmf(variables, t)


def _entropy_of_table(t: np.ndarray) -> float:
    flat = t.ravel()
    pos = flat[flat > 0]
    return float(-(pos * np.log2(pos)).sum())


def entropy(p: JointPmf, names=None) -> float:
    """Shannon entropy (bits) of the marginal over ``names`` (default: all)."""
    if names is None:
        names = p.names
    names = list(names)
    if not names:
        raise PmfError("entropy needs at least one variable")
    return _entropy_of_table(p.marginal(names).table)


def mutual_information(p: JointPmf, names_a, names_b) -> float:
    """I(A;B) = H(A) + H(B) - H(AB) over disjoint variable groups."""
    a, b = list(names_a), list(names_b)
    if set(a) & set(b):
        raise PmfError(f"overlapping groups {a} and {b}")
    return entropy(p, a) + entropy(p, b) - entropy(p, a + b)


def conditional_mutual_information(p: JointPmf, names_a, names_b, names_c) -> float:
    """I(A;B|C) = H(AC) + H(BC) - H(ABC) - H(C) over disjoint groups."""
    a, b, c = list(names_a), list(names_b), list(names_c)
    groups = [set(a), set(b), set(c)]
    for i in range(3):
        for j in range(i + 1, 3):
            if groups[i] & groups[j]:
                raise PmfError("variable groups must be pairwise disjoint")
    if not c:
        return mutual_information(p, a, b)
    return (
        entropy(p, a + c)
        + entropy(p, b + c)
        - entropy(p, a + b + c)
        - entropy(p, c)
    )


def total_variation(p: JointPmf, q: JointPmf) -> float:
    """Normalized total variation (1/2) sum |p - q| over matching tables."""
    if p.names != q.names or p.table.shape != q.table.shape:
        raise PmfError("distributions have different variables or shapes")
    for va, vb in zip(p.variables, q.variables):
        if va.symbols != vb.symbols:
            raise PmfError(f"alphabet mismatch on {va.name!r}")
    return float(0.5 * np.abs(p.table - q.table).sum())


def tv_tables(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized total variation between two raw probability tables."""
    return float(0.5 * np.abs(np.asarray(a) - np.asarray(b)).sum())


@dataclass(frozen=True, eq=False)
class TypeClass:
    """Empirical joint type of aligned sequences: counts and frequencies."""

    variables: tuple
    n: int
    counts: np.ndarray

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n

    def as_pmf(self) -> JointPmf:
        return JointPmf(self.variables, self.frequencies)


def empirical_type(seqs, variables: Sequence[Alphabet]) -> TypeClass:
    """Joint type of aligned sequences, one per alphabet in ``variables``."""
    variables = tuple(variables)
    seqs = [list(s) for s in seqs]
    if len(seqs) != len(variables):
        raise PmfError(f"{len(seqs)} sequences for {len(variables)} variables")
    n = len(seqs[0])
    if n < 1:
        raise PmfError("sequences must be nonempty")
    for s in seqs:
        if len(s) != n:
            raise PmfError("sequences have different lengths")
    counts = np.zeros(tuple(v.size for v in variables))
    for row in zip(*seqs):
        idx = tuple(v.index(s) for v, s in zip(variables, row))
        counts[idx] += 1
    counts.setflags(write=False)
    return TypeClass(variables, n, counts)


def is_typical(seqs, target: JointPmf, radius: float) -> bool:
    """True iff the joint type of ``seqs`` is strictly within ``radius`` in TV."""
    t = empirical_type(seqs, target.variables)
    return tv_tables(t.frequencies, target.table) < radius


@dataclass(frozen=True)
class ToleranceSchedule:
    """Typicality radii and slack rules used by the coding scheme.

    ``delta`` is the base radius; the encoder uses ``multipliers[1]*delta``,
    the decoder ``multipliers[2]*delta``.  ``gamma_of_delta`` maps delta to
    the output radius of the block analysis; the default is linear with
    coefficient = product of the alphabet sizes involved.  ``alpha_n`` is
    the entropy-continuity slack -3 e log2(e * alphabet product).
    """

    delta: float
    multipliers: tuple = (1.0, 2.0, 8.0)
    gamma_coeff: float = None  # default set per instance: prod of alphabet sizes
    gamma_of_delta: Callable[[float], float] = None

    def __post_init__(self):
        if self.delta <= 0:
            raise PmfError("delta must be positive")
        m = tuple(float(x) for x in self.multipliers)
        if any(m[i] >= m[i + 1] for i in range(len(m) - 1)):
            raise PmfError("multipliers must be strictly increasing")
        object.__setattr__(self, "multipliers", m)

    def with_alphabet_sizes(self, *sizes: int) -> "ToleranceSchedule":
        coeff = float(np.prod([s for s in sizes if s]))
        return ToleranceSchedule(self.delta, self.multipliers, coeff,
                                 self.gamma_of_delta)

    @property
    def source_radius(self) -> float:
        return self.multipliers[0] * self.delta

    @property
    def encode_radius(self) -> float:
        return self.multipliers[1] * self.delta

    @property
    def decode_radius(self) -> float:
        return self.multipliers[2] * self.delta

    def gamma(self, delta: float = None) -> float:
        d = self.delta if delta is None else delta
        if self.gamma_of_delta is not None:
            return float(self.gamma_of_delta(d))
        coeff = 1.0 if self.gamma_coeff is None else self.gamma_coeff
        return coeff * d

    def alpha(self, eps_n: float, *alphabet_sizes: int) -> float:
        """Entropy-continuity slack for a measured deviation eps_n."""
        return alpha_n(eps_n, *alphabet_sizes)


def alpha_n(eps_n: float, *alphabet_sizes: int) -> float:
    """Entropy-continuity slack -3 e log2(e * prod sizes); 0 at e = 0."""
    if eps_n <= 0:
        return 0.0
    prod = float(np.prod([s for s in alphabet_sizes if s]))
    return float(-3.0 * eps_n * np.log2(eps_n * prod))
