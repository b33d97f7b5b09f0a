"""Finite-blocklength simulation of the random-binning coordination scheme.

Two interchangeable engines produce statistically identical trials:

* ``explicit`` — materializes the codebook (i.i.d. codewords, one uniform
  bin index per codeword) and runs the literal typicality scans.  Capped:
  ``2^ceil(n*R0) * n`` stored symbols must stay below ``MEMORY_CAP``.
* ``sampled`` — draws each trial from the exact outcome distribution of
  the scheme (see ``sampling``); this is what makes achievable-rate
  blocklengths (where the codebook is astronomically large) tractable.
  A fresh codebook is implicitly drawn per trial, which matches the
  shared-randomness average the derandomization argument operates on.

Encoding and decoding follow the scheme exactly: the encoder picks the
smallest jointly typical codeword index at the encode radius (2 delta)
and falls back to index 0 when none exists; the decoder picks the
smallest index in the announced bin that is typical at the decode radius
(8 delta), falling back to 0.  An atypical source sequence (radius
delta) triggers an arbitrary transmission, fixed to bin 0 for
reproducibility.  All indices are 0-based.
"""

from __future__ import annotations

import math
import random as _pyrandom
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .classical import Alphabet, JointPmf, ToleranceSchedule, alpha_n
from .coordination import CoordinationError, CqEnsemble, Extension
from .quantum import DensityOperator, trace_norm_distance
from . import sampling

MEMORY_CAP = 2 ** 30
EXPLICIT_AUTO_BUDGET = 2 ** 22
_KEY_CODEBOOK, _KEY_BINS, _KEY_TRIAL = 1, 2, 3


class MemoryCapError(ValueError):
    """Materializing this codebook would exceed the in-memory cap."""


class ProtocolError(ValueError):
    """Invalid simulation parameters."""


def _ceil_rate(n: int, rate: float) -> int:
    if rate < 0:
        raise ProtocolError("rates must be nonnegative")
    return max(0, math.ceil(n * rate - 1e-9))


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _bigint_rng(seed: int, *key: int) -> _pyrandom.Random:
    state = np.random.SeedSequence(seed, spawn_key=key).generate_state(2)
    return _pyrandom.Random(int(state[0]) << 32 | int(state[1]))


@dataclass(frozen=True)
class CodebookParams:
    """Block length, bin rate R, codeword rate R0, typicality delta, seed."""

    n: int
    bin_rate: float
    codeword_rate: float
    delta: float
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ProtocolError("block length must be >= 1")
        if self.bin_rate < 0 or self.codeword_rate < 0:
            raise ProtocolError("rates must be nonnegative")
        if self.delta <= 0:
            raise ProtocolError("delta must be positive")

    @property
    def num_codewords(self) -> int:
        return 1 << _ceil_rate(self.n, self.codeword_rate)

    @property
    def num_bins(self) -> int:
        return 1 << _ceil_rate(self.n, self.bin_rate)

    @property
    def within_memory_cap(self) -> bool:
        return self.num_codewords * self.n <= MEMORY_CAP


@dataclass(frozen=True)
class Codebook:
    """Materialized codebook: codeword symbol rows plus per-index bins."""

    params: CodebookParams
    codewords: np.ndarray  # (L0, n) int8
    bins: np.ndarray       # (L0,) int64
    num_bins: int

    def __post_init__(self):
        if self.codewords.shape[0] != self.bins.shape[0]:
            raise ProtocolError("every codeword needs a bin")


def build_codebook(params: CodebookParams, p_u: np.ndarray,
                   role: int = 0) -> Codebook:
    """Draw codewords i.i.d. from ``p_u`` and uniform bins, reproducibly.

    The codeword stream is consumed row-major, so enlarging the codeword
    rate with the same seed extends the codebook by new rows while keeping
    existing ones (and their bins) unchanged.
    """
    p_u = np.asarray(p_u, dtype=float)
    l0 = params.num_codewords
    if l0 * params.n > MEMORY_CAP:
        raise MemoryCapError(
            f"codebook needs {l0 * params.n} symbols (cap {MEMORY_CAP}); "
            "lower n or the codeword rate, or use the sampled engine")
    if params.num_bins > 2 ** 62:
        raise MemoryCapError("bin indices exceed 63 bits; lower n or R")
    cw_rng = _rng(params.seed, _KEY_CODEBOOK, role)
    cum = np.cumsum(p_u)
    cum[-1] = 1.0
    codewords = np.empty((l0, params.n), dtype=np.int8)
    # row-chunked generation keeps peak memory bounded while preserving the
    # stream order (so a larger codebook extends a smaller one row for row)
    chunk = max(1, (1 << 22) // params.n)
    for start in range(0, l0, chunk):
        stop = min(start + chunk, l0)
        draws = cw_rng.random((stop - start, params.n))
        codewords[start:stop] = np.searchsorted(
            cum, draws, side="right").astype(np.int8)
    bin_rng = _rng(params.seed, _KEY_BINS, role)
    bins = bin_rng.integers(0, params.num_bins, size=l0, dtype=np.int64)
    codewords.setflags(write=False)
    bins.setflags(write=False)
    return Codebook(params, codewords, bins, params.num_bins)


def _first_typical(codewords: np.ndarray, ctx_seq: np.ndarray, num_ctx: int,
                   p_ctx_u: np.ndarray, radius: float,
                   bins: Optional[np.ndarray] = None,
                   bin_value: Optional[int] = None,
                   chunk: int = 4096) -> Optional[int]:
    """Smallest index whose joint type with ``ctx_seq`` is within ``radius``.

    With ``bins``/``bin_value`` the search is restricted to one bin.
    """
    l0, n = codewords.shape
    num_u = p_ctx_u.shape[-1]
    onehot = np.zeros((n, num_ctx))
    onehot[np.arange(n), ctx_seq] = 1.0
    target = p_ctx_u.reshape(num_ctx, num_u)
    for start in range(0, l0, chunk):
        rows = codewords[start:start + chunk]
        if bins is not None:
            sel = np.flatnonzero(bins[start:start + chunk] == bin_value)
            if sel.size == 0:
                continue
            rows = rows[sel]
        else:
            sel = None
        counts = np.empty((rows.shape[0], num_ctx, num_u))
        for u in range(num_u):
            counts[:, :, u] = (rows == u).astype(float) @ onehot
        tv = 0.5 * np.abs(counts / n - target[None]).sum(axis=(1, 2))
        hits = np.flatnonzero(tv < radius)
        if hits.size:
            h = int(hits[0])
            return start + (int(sel[h]) if sel is not None else h)
    return None


def encode_generic(cb: Codebook, target_joint: np.ndarray, radius: float,
                   x_seq: np.ndarray, y_seq: Optional[np.ndarray] = None):
    """Generic encoder: smallest codeword jointly typical with the context.

    ``target_joint`` has axes (X[, Y], U).  Returns (ell, bin message,
    fallback flag); fallback sends the first codeword's bin.
    """
    t = np.asarray(target_joint, dtype=float)
    if y_seq is not None:
        num_x, num_y, num_u = t.shape
        ctx = np.asarray(x_seq) * num_y + np.asarray(y_seq)
        flat = t.reshape(num_x * num_y, num_u)
        num_ctx = num_x * num_y
    else:
        num_ctx = t.shape[0]
        ctx = np.asarray(x_seq)
        flat = t
    ell = _first_typical(cb.codewords, ctx, num_ctx, flat, radius)
    if ell is None:
        return 0, int(cb.bins[0]), True
    return int(ell), int(cb.bins[ell]), False


def decode_generic(cb: Codebook, target_joint: np.ndarray, radius: float,
                   m12: int, y_seq: Optional[np.ndarray] = None,
                   z_seq: Optional[np.ndarray] = None):
    """Generic decoder: smallest in-bin codeword typical with (y^n, z^n).

    ``target_joint`` has axes ([Y, ][Z, ]U) matching the provided context
    sequences; with no context the check reduces to the codeword marginal.
    Returns (ell_hat, fallback flag).
    """
    t = np.asarray(target_joint, dtype=float)
    seqs = [s for s in (y_seq, z_seq) if s is not None]
    n = cb.codewords.shape[1]
    if not seqs:
        ctx = np.zeros(n, dtype=np.int64)
        flat = t.reshape(1, -1)
        num_ctx = 1
    elif len(seqs) == 1:
        ctx = np.asarray(seqs[0])
        flat = t
        num_ctx = t.shape[0]
    else:
        num_y, num_z = t.shape[0], t.shape[1]
        ctx = np.asarray(seqs[0]) * num_z + np.asarray(seqs[1])
        flat = t.reshape(num_y * num_z, t.shape[2])
        num_ctx = num_y * num_z
    ell = _first_typical(cb.codewords, ctx, num_ctx, flat, radius,
                         bins=cb.bins, bin_value=m12)
    if ell is None:
        return 0, True
    return int(ell), False


@dataclass
class SimulationTrace:
    """One protocol run: sequences, indices, averaged state, distances."""

    n: int
    seed: int
    trial: int
    engine: str
    x_seq: np.ndarray
    b_label_seq: np.ndarray            # Bob's decoded label sequence
    ell: int
    m12: int
    ell_hat: int
    x_typical: bool
    encoder_fallback: bool
    decoder_fallback: bool
    joint_counts: np.ndarray           # label joint type counts
    avg_state: DensityOperator
    distance_to_target: float
    distance_to_tau: float
    gamma_radius: float
    gamma_typical: bool
    block_bound_ok: Optional[bool]
    rate: float
    codeword_rate: float
    # cascade-only fields
    rate23: Optional[float] = None
    c_label_seq: Optional[np.ndarray] = None
    bar_z_seq: Optional[np.ndarray] = None
    ell2: Optional[int] = None
    m23: Optional[int] = None
    ell_hat2: Optional[int] = None
    ell_tilde2: Optional[int] = None
    index_match: Optional[bool] = None

    def slot_states(self, atoms_a, atoms_b, atoms_c=None):
        """Per-slot prepared product states (generated on demand)."""
        out = []
        for i in range(self.n):
            m = np.kron(atoms_a[self.x_seq[i]].matrix,
                        atoms_b[self.b_label_seq[i]].matrix)
            if atoms_c is not None:
                m = np.kron(m, atoms_c[self.c_label_seq[i]].matrix)
            out.append(DensityOperator(m))
        return out


def _two_node_tables(target: CqEnsemble, ext: Extension):
    p_joint = ext.joint.table
    a_mats = [a.matrix for a in ext.atoms_a]
    b_mats = [b.matrix for b in ext.atoms_b]
    px = p_joint.sum(axis=1)
    etas = []
    for xi in range(p_joint.shape[0]):
        cond = p_joint[xi] / px[xi] if px[xi] > 0 else p_joint[xi]
        etas.append(sum(c * b for c, b in zip(cond, b_mats)))
    omega = sum(
        target.source.table[xi] * np.kron(a_mats[xi], etas[xi])
        for xi in range(p_joint.shape[0]))
    return p_joint, a_mats, b_mats, etas, omega


def _finish_two_node_trace(counts, x_seq, u_seq, tables, gamma, n,
                           meta) -> SimulationTrace:
    p_joint, a_mats, b_mats, etas, omega = tables
    freq = counts / n
    dim = a_mats[0].shape[0] * b_mats[0].shape[0]
    rho = np.zeros((dim, dim), dtype=complex)
    for a in range(freq.shape[0]):
        for u in range(freq.shape[1]):
            if freq[a, u] > 0:
                rho += freq[a, u] * np.kron(a_mats[a], b_mats[u])
    px_hat = freq.sum(axis=1)
    tau = sum(px_hat[a] * np.kron(a_mats[a], etas[a])
              for a in range(freq.shape[0]))
    d_target = trace_norm_distance(rho, omega)
    d_tau = trace_norm_distance(rho, tau)
    g_typ = bool(0.5 * np.abs(freq - p_joint).sum() < gamma)
    bound_ok = bool(d_tau <= gamma) if g_typ else None
    return SimulationTrace(
        n=n, seed=meta["seed"], trial=meta["trial"], engine=meta["engine"],
        x_seq=x_seq, b_label_seq=u_seq, ell=meta["ell"], m12=meta["m12"],
        ell_hat=meta["ell_hat"], x_typical=meta["x_typical"],
        encoder_fallback=meta["enc_fb"], decoder_fallback=meta["dec_fb"],
        joint_counts=counts, avg_state=DensityOperator(rho),
        distance_to_target=d_target, distance_to_tau=d_tau,
        gamma_radius=gamma, gamma_typical=g_typ, block_bound_ok=bound_ok,
        rate=meta["rate"], codeword_rate=meta["r0"])


def default_codeword_rate(ext: Extension, delta: float,
                          gamma_coeff: Optional[float] = None) -> float:
    """Covering-rate default R0 = I(X;labels) + 2 gamma(delta)."""
    from .classical import mutual_information
    names = ext.joint.names
    mi = mutual_information(ext.joint, [names[0]], list(names[1:]))
    if gamma_coeff is None:
        gamma_coeff = float(np.prod([v.size for v in ext.joint.variables]))
    return mi + 2.0 * gamma_coeff * delta


def _resolve_schedule(ext, delta, gamma_coeff,
                      schedule: Optional[ToleranceSchedule]):
    """(delta, multipliers, gamma) from an explicit schedule or defaults."""
    if schedule is None:
        if gamma_coeff is None:
            gamma_coeff = float(np.prod([v.size
                                         for v in ext.joint.variables]))
        return delta, (1.0, 2.0, 8.0), gamma_coeff * delta
    sched = schedule
    if sched.gamma_coeff is None and sched.gamma_of_delta is None:
        sched = sched.with_alphabet_sizes(
            *[v.size for v in ext.joint.variables])
    return sched.delta, sched.multipliers, sched.gamma()


def simulate_two_node(target: CqEnsemble, ext: Extension, n: int,
                      rate: float, trials: int, seed: int,
                      delta: float = 0.02,
                      codeword_rate: Optional[float] = None,
                      engine: str = "auto",
                      gamma_coeff: Optional[float] = None,
                      schedule: Optional[ToleranceSchedule] = None,
                      threads: int = 0) -> list:
    """Monte Carlo runs of the two-node scheme; one trace per trial.

    ``engine="auto"`` materializes the codebook when it is small enough to
    scan and otherwise samples trials from the exact outcome distribution.
    A ``schedule`` overrides ``delta``/``gamma_coeff`` and supplies the
    typicality radius multipliers.  Identical (seed, params) reproduce
    identical traces bit for bit.
    """
    ext.require_validated()
    if ext.kind != "two-node":
        raise CoordinationError("simulate_two_node needs a two-node extension")
    if n < 1 or trials < 1:
        raise ProtocolError("n and trials must be positive")
    delta, mults, gamma = _resolve_schedule(ext, delta, gamma_coeff, schedule)
    if codeword_rate is None:
        from .classical import mutual_information
        names = ext.joint.names
        codeword_rate = (mutual_information(ext.joint, [names[0]],
                                            list(names[1:]))
                         + 2.0 * gamma)
    params = CodebookParams(n=n, bin_rate=rate, codeword_rate=codeword_rate,
                            delta=delta, seed=seed)
    tables = _two_node_tables(target, ext)
    if engine == "auto":
        engine = ("explicit"
                  if params.num_codewords * n <= EXPLICIT_AUTO_BUDGET
                  else "sampled")
    if engine == "explicit":
        codebook = build_codebook(params, tables[0].sum(axis=0), role=0)
        runner = lambda t: _explicit_two_node_trial(
            codebook, tables, gamma, params, t, mults)
    elif engine == "sampled":
        runner = lambda t: _sampled_two_node_trial(tables, gamma, params, t,
                                                   mults)
    else:
        raise ProtocolError(f"unknown engine {engine!r}")
    return _run_trials(runner, trials, threads)


def _run_trials(runner, trials: int, threads: int) -> list:
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(runner, range(trials)))
    return [runner(t) for t in range(trials)]


def _explicit_two_node_trial(cb: Codebook, tables, gamma, params,
                             trial: int, mults=(1.0, 2.0, 8.0)
                             ) -> SimulationTrace:
    p_joint = tables[0]
    px = p_joint.sum(axis=1)
    p_u = p_joint.sum(axis=0)
    n = params.n
    rng = _rng(params.seed, _KEY_TRIAL, trial, 0)
    x_seq = sampling.sample_iid(rng, px, n)
    x_counts = np.bincount(x_seq, minlength=px.size)
    x_typical = bool(0.5 * np.abs(x_counts / n - px).sum()
                     < mults[0] * params.delta)
    if x_typical:
        ell, m12, enc_fb = encode_generic(cb, p_joint,
                                          mults[1] * params.delta, x_seq)
    else:
        ell, m12, enc_fb = 0, 0, True
    ell_hat, dec_fb = decode_generic(cb, p_u, mults[2] * params.delta, m12)
    u_seq = cb.codewords[ell_hat]
    counts = np.zeros_like(p_joint)
    np.add.at(counts, (x_seq, u_seq), 1.0)
    meta = dict(seed=params.seed, trial=trial, engine="explicit",
                ell=ell, m12=m12, ell_hat=ell_hat, x_typical=x_typical,
                enc_fb=enc_fb or not x_typical, dec_fb=dec_fb,
                rate=params.bin_rate, r0=params.codeword_rate)
    return _finish_two_node_trace(counts, x_seq, u_seq, tables, gamma, n,
                                  meta)


def _sampled_two_node_trial(tables, gamma, params, trial: int,
                            mults=(1.0, 2.0, 8.0)) -> SimulationTrace:
    p_joint = tables[0]
    rng = _rng(params.seed, _KEY_TRIAL, trial, 0)
    bin_rng = _bigint_rng(params.seed, _KEY_TRIAL, trial, 1)
    raw = sampling.sample_two_node_trial(
        rng, bin_rng, p_joint, params.n, params.delta,
        params.num_codewords, params.num_bins,
        source_mult=mults[0], encode_mult=mults[1], decode_mult=mults[2])
    meta = dict(seed=params.seed, trial=trial, engine="sampled",
                ell=raw.ell, m12=raw.m12, ell_hat=raw.ell_hat,
                x_typical=raw.x_typical,
                enc_fb=raw.encoder_fallback or not raw.x_typical,
                dec_fb=raw.decoder_fallback,
                rate=params.bin_rate, r0=params.codeword_rate)
    return _finish_two_node_trace(raw.counts.astype(float), raw.x_seq,
                                  raw.u_seq, tables, gamma, params.n, meta)


# ----------------------------------------------------------------------
# cascade
# ----------------------------------------------------------------------

def _cascade_tables(target: CqEnsemble, ext: Extension):
    p_xyz = ext.joint.table
    a_mats = [a.matrix for a in ext.atoms_a]
    b_mats = [b.matrix for b in ext.atoms_b]
    c_mats = [c.matrix for c in ext.atoms_c]
    px = p_xyz.sum(axis=(1, 2))
    etas = []
    for xi in range(p_xyz.shape[0]):
        cond = p_xyz[xi] / px[xi] if px[xi] > 0 else p_xyz[xi]
        eta = 0
        for yi in range(cond.shape[0]):
            for zi in range(cond.shape[1]):
                if cond[yi, zi] > 0:
                    eta = eta + cond[yi, zi] * np.kron(b_mats[yi], c_mats[zi])
        etas.append(eta)
    omega = sum(target.source.table[xi] * np.kron(a_mats[xi], etas[xi])
                for xi in range(p_xyz.shape[0]))
    return p_xyz, a_mats, b_mats, c_mats, etas, omega


def _first_typical_pair(y_cws, z_cws, x_seq, p_xyz, radius):
    """Lexicographically first (l1, l2) with (x, y(l1), z(l2)) jointly typical.

    Rows whose (x, y) marginal type already violates the radius cannot host
    a hit (marginal TV <= joint TV) and are skipped without changing order.
    """
    n = x_seq.size
    num_x, num_y, num_z = p_xyz.shape
    onehot_x = np.zeros((n, num_x))
    onehot_x[np.arange(n), x_seq] = 1.0
    p_xy = p_xyz.sum(axis=2)
    counts_xy = np.empty((y_cws.shape[0], num_x, num_y))
    for y in range(num_y):
        counts_xy[:, :, y] = (y_cws == y).astype(float) @ onehot_x
    tv_xy = 0.5 * np.abs(counts_xy / n - p_xy[None]).sum(axis=(1, 2))
    candidate_rows = np.flatnonzero(tv_xy < radius)
    flat = p_xyz.reshape(num_x * num_y, num_z)
    for l1 in candidate_rows:
        ctx = x_seq.astype(np.int64) * num_y + y_cws[l1]
        l2 = _first_typical(z_cws, ctx, num_x * num_y, flat, radius)
        if l2 is not None:
            return int(l1), int(l2)
    return None


def simulate_cascade(target: CqEnsemble, ext: Extension, n: int,
                     rate12: float, rate23: float, trials: int, seed: int,
                     delta: float = 0.02,
                     codeword_rate_y: Optional[float] = None,
                     codeword_rate_z: Optional[float] = None,
                     engine: str = "auto",
                     gamma_coeff: Optional[float] = None,
                     schedule: Optional[ToleranceSchedule] = None,
                     threads: int = 0) -> list:
    """Monte Carlo runs of the rate-splitting cascade scheme.

    The Alice-to-Bob rate splits as R' = rate12 - rate23 for the label
    codebook and R'' = rate23 for the relayed codebook.  The sampled
    engine supports the degenerate relay (single Z label) only; richer
    cascades use the explicit engine.
    """
    ext.require_validated()
    if ext.kind not in ("cascade", "isolated"):
        raise CoordinationError("simulate_cascade needs a cascade extension")
    if rate12 < rate23:
        raise ProtocolError("rate12 must be at least rate23 (rate splitting)")
    delta, mults, gamma = _resolve_schedule(ext, delta, gamma_coeff, schedule)
    from .classical import mutual_information
    names = ext.joint.names
    if codeword_rate_z is None:
        codeword_rate_z = (
            mutual_information(ext.joint, [names[0]], [names[2]])
            + 2.0 * gamma)
    if codeword_rate_y is None:
        codeword_rate_y = (
            mutual_information(ext.joint, [names[0], names[2]], [names[1]])
            + 2.0 * gamma)
    tables = _cascade_tables(target, ext)
    num_z_labels = tables[0].shape[2]
    params_y = CodebookParams(n=n, bin_rate=rate12 - rate23,
                              codeword_rate=codeword_rate_y,
                              delta=delta, seed=seed)
    params_z = CodebookParams(n=n, bin_rate=rate23,
                              codeword_rate=codeword_rate_z,
                              delta=delta, seed=seed)
    if engine == "auto":
        cost = (params_y.num_codewords + params_z.num_codewords) * n
        engine = "explicit" if cost <= EXPLICIT_AUTO_BUDGET else "sampled"
    if engine == "sampled" and num_z_labels != 1:
        raise ProtocolError(
            "the sampled engine supports cascade only with a degenerate "
            "relay label (single Z symbol); use the explicit engine")
    if engine == "explicit":
        p_xyz = tables[0]
        cb_y = build_codebook(params_y, p_xyz.sum(axis=(0, 2)), role=0)
        cb_z = build_codebook(params_z, p_xyz.sum(axis=(0, 1)), role=1)
        runner = lambda t: _explicit_cascade_trial(
            cb_y, cb_z, tables, gamma, params_y, params_z, t,
            rate12, rate23, mults)
    elif engine == "sampled":
        runner = lambda t: _sampled_cascade_degenerate_trial(
            tables, gamma, params_y, params_z, t, rate12, rate23, mults)
    else:
        raise ProtocolError(f"unknown engine {engine!r}")
    return _run_trials(runner, trials, threads)


def _finish_cascade_trace(counts3, x_seq, y_seq, z_seq, bar_z_seq, tables,
                          gamma, n, meta) -> SimulationTrace:
    p_xyz, a_mats, b_mats, c_mats, etas, omega = tables
    freq = counts3 / n
    da, db, dc = (a_mats[0].shape[0], b_mats[0].shape[0], c_mats[0].shape[0])
    rho = np.zeros((da * db * dc, da * db * dc), dtype=complex)
    for a in range(freq.shape[0]):
        for y in range(freq.shape[1]):
            for z in range(freq.shape[2]):
                if freq[a, y, z] > 0:
                    rho += freq[a, y, z] * np.kron(
                        np.kron(a_mats[a], b_mats[y]), c_mats[z])
    px_hat = freq.sum(axis=(1, 2))
    tau = sum(px_hat[a] * np.kron(a_mats[a], etas[a])
              for a in range(freq.shape[0]))
    d_target = trace_norm_distance(rho, omega)
    d_tau = trace_norm_distance(rho, tau)
    g_typ = bool(0.5 * np.abs(freq - p_xyz).sum() < gamma)
    bound_ok = bool(d_tau <= gamma) if g_typ else None
    return SimulationTrace(
        n=n, seed=meta["seed"], trial=meta["trial"], engine=meta["engine"],
        x_seq=x_seq, b_label_seq=y_seq, ell=meta["ell"], m12=meta["m12"],
        ell_hat=meta["ell_hat"], x_typical=meta["x_typical"],
        encoder_fallback=meta["enc_fb"], decoder_fallback=meta["dec_fb"],
        joint_counts=counts3, avg_state=DensityOperator(rho),
        distance_to_target=d_target, distance_to_tau=d_tau,
        gamma_radius=gamma, gamma_typical=g_typ, block_bound_ok=bound_ok,
        rate=meta["rate"], codeword_rate=meta["r0"],
        rate23=meta["rate23"], c_label_seq=z_seq, bar_z_seq=bar_z_seq,
        ell2=meta["ell2"], m23=meta["m23"], ell_hat2=meta["ell_hat2"],
        ell_tilde2=meta["ell_tilde2"], index_match=meta["index_match"])


def _explicit_cascade_trial(cb_y: Codebook, cb_z: Codebook, tables, gamma,
                            params_y, params_z, trial, rate12, rate23,
                            mults=(1.0, 2.0, 8.0)) -> SimulationTrace:
    p_xyz = tables[0]
    px = p_xyz.sum(axis=(1, 2))
    p_z = p_xyz.sum(axis=(0, 1))
    p_yz = p_xyz.sum(axis=0)
    n = params_y.n
    rng = _rng(params_y.seed, _KEY_TRIAL, trial, 0)
    x_seq = sampling.sample_iid(rng, px, n)
    x_counts = np.bincount(x_seq, minlength=px.size)
    x_typical = bool(0.5 * np.abs(x_counts / n - px).sum()
                     < mults[0] * params_y.delta)
    enc_fb = False
    if x_typical:
        pair = _first_typical_pair(cb_y.codewords, cb_z.codewords, x_seq,
                                   p_xyz, mults[1] * params_y.delta)
        if pair is None:
            ell, ell2, enc_fb = 0, 0, True
        else:
            ell, ell2 = pair
        m12 = int(cb_y.bins[ell])
        m23_msg = int(cb_z.bins[ell2])
    else:
        ell, ell2, enc_fb = 0, 0, True
        m12, m23_msg = 0, 0
    # Bob stage (i): recover the relay codeword, forward its bin message
    ell_hat2, dec_fb2 = decode_generic(cb_z, p_z, mults[2] * params_z.delta,
                                       m23_msg)
    bar_z_seq = cb_z.codewords[ell_hat2]
    # Bob stage (ii): recover his own codeword against the relay context
    p_zy = p_yz.T.copy()
    ell_hat, dec_fb = decode_generic(cb_y, p_zy, mults[2] * params_y.delta,
                                     m12, y_seq=bar_z_seq)
    y_seq = cb_y.codewords[ell_hat]
    # Charlie runs the same recovery rule on the forwarded message
    ell_tilde2, dec_fb3 = decode_generic(cb_z, p_z, mults[2] * params_z.delta,
                                         m23_msg)
    z_seq = cb_z.codewords[ell_tilde2]
    counts3 = np.zeros_like(p_xyz)
    np.add.at(counts3, (x_seq, y_seq, z_seq), 1.0)
    meta = dict(seed=params_y.seed, trial=trial, engine="explicit",
                ell=ell, m12=m12, ell_hat=ell_hat,
                x_typical=x_typical, enc_fb=enc_fb or not x_typical,
                dec_fb=dec_fb or dec_fb2 or dec_fb3,
                rate=rate12, r0=params_y.codeword_rate, rate23=rate23,
                ell2=ell2, m23=m23_msg, ell_hat2=ell_hat2,
                ell_tilde2=ell_tilde2,
                index_match=bool(ell_hat2 == ell_tilde2))
    return _finish_cascade_trace(counts3, x_seq, y_seq, z_seq, bar_z_seq,
                                 tables, gamma, n, meta)


def _sampled_cascade_degenerate_trial(tables, gamma, params_y, params_z,
                                      trial, rate12, rate23,
                                      mults=(1.0, 2.0, 8.0)
                                      ) -> SimulationTrace:
    """Degenerate relay: the Z label is constant, so the Y side is exactly
    the two-node trial; the relay draws live on separate streams."""
    p_xyz = tables[0]
    p_xy = p_xyz[:, :, 0]
    rng = _rng(params_y.seed, _KEY_TRIAL, trial, 0)
    bin_rng = _bigint_rng(params_y.seed, _KEY_TRIAL, trial, 1)
    raw = sampling.sample_two_node_trial(
        rng, bin_rng, p_xy, params_y.n, params_y.delta,
        params_y.num_codewords, params_y.num_bins,
        source_mult=mults[0], encode_mult=mults[1], decode_mult=mults[2])
    aux_bins = _bigint_rng(params_y.seed, _KEY_TRIAL, trial, 3)
    if raw.x_typical:
        m23_msg = aux_bins.randrange(params_z.num_bins)
    else:
        m23_msg = 0
    n = params_y.n
    z_seq = np.zeros(n, dtype=np.int8)
    counts3 = raw.counts.astype(float)[:, :, None]
    meta = dict(seed=params_y.seed, trial=trial, engine="sampled",
                ell=raw.ell, m12=raw.m12, ell_hat=raw.ell_hat,
                x_typical=raw.x_typical,
                enc_fb=raw.encoder_fallback or not raw.x_typical,
                dec_fb=raw.decoder_fallback,
                rate=rate12, r0=params_y.codeword_rate, rate23=rate23,
                ell2=0, m23=m23_msg, ell_hat2=0, ell_tilde2=0,
                index_match=True)
    return _finish_cascade_trace(counts3, raw.x_seq, raw.u_seq, z_seq,
                                 z_seq, tables, gamma, n, meta)


# ----------------------------------------------------------------------
# derandomization and converse test
# ----------------------------------------------------------------------

@dataclass
class DerandomizationReport:
    """Per-seed mean distances and the selected deterministic codebook seed."""

    seeds: list
    distances: np.ndarray
    best_index: int
    best_seed: int
    best_distance: float
    mean_distance: float
    quantiles: dict
    epsilon: float
    traces_by_seed: Optional[list] = None

    @property
    def meets_epsilon(self) -> bool:
        return self.best_distance <= self.epsilon

    @property
    def best_below_mean(self) -> bool:
        return self.best_distance <= self.mean_distance + 1e-15


def derandomize(target: CqEnsemble, ext: Extension, n: int, rate: float,
                trials: int, num_seeds: int, epsilon: float,
                seed: int = 0, keep_traces: bool = False,
                **sim_kwargs) -> DerandomizationReport:
    """Select the best codebook seed by mean distance across seeds.

    The selection mirrors the shared-randomness removal argument: the
    minimum over sampled seeds cannot exceed the sample mean, and a seed
    meeting ``epsilon`` yields a deterministic code at that distance.
    """
    if num_seeds < 1:
        raise ProtocolError("need at least one seed")
    seeds, dists, kept = [], [], []
    for s in range(num_seeds):
        seed_s = int(np.random.SeedSequence(seed, spawn_key=(7, s))
                     .generate_state(1)[0])
        traces = simulate_two_node(target, ext, n, rate, trials,
                                   seed=seed_s, **sim_kwargs)
        seeds.append(seed_s)
        dists.append(float(np.mean([t.distance_to_target for t in traces])))
        if keep_traces:
            kept.append(traces)
    dists = np.array(dists)
    best = int(np.argmin(dists))
    qs = {q: float(np.percentile(dists, q)) for q in (25, 50, 75)}
    return DerandomizationReport(
        seeds=seeds, distances=dists, best_index=best,
        best_seed=seeds[best], best_distance=float(dists[best]),
        mean_distance=float(dists.mean()), quantiles=qs, epsilon=epsilon,
        traces_by_seed=kept if keep_traces else None)


@dataclass
class ConverseInequality:
    name: str
    information_bits: float
    rate_bound: float
    slack_total: float

    @property
    def margin(self) -> float:
        return self.rate_bound + self.slack_total - self.information_bits

    @property
    def passed(self) -> bool:
        return self.margin >= 0


@dataclass
class ConverseReport:
    inequalities: list
    eps_n: float
    alpha: float
    measured: JointPmf

    @property
    def passed(self) -> bool:
        return all(iq.passed for iq in self.inequalities)


def converse_check(traces: Sequence[SimulationTrace], target: CqEnsemble,
                   ext: Extension, rate: float,
                   rate23: Optional[float] = None,
                   slack: float = 0.02) -> ConverseReport:
    """Measurement-side rate bound on the simulated code.

    Reads the computational-basis diagonal of the trial-averaged
    classical-quantum state (exact, via the recorded label types and atom
    diagonals), forms the per-letter distribution, and checks the
    mutual-information inequalities with the entropy-continuity slack
    alpha_n computed from the measured trace distance.  The slack is a
    relaxation term, so it enters clamped at zero: outside the
    small-deviation regime (where the continuity bound is vacuous) the
    plain information inequality I <= rate still applies.
    """
    if not traces:
        raise ProtocolError("converse_check needs at least one trace")
    from .classical import mutual_information
    counts = np.mean([t.joint_counts for t in traces], axis=0)
    n = traces[0].n
    freq = counts / n
    cascade = freq.ndim == 3
    a_mats = [a.matrix for a in ext.atoms_a]
    b_diag = np.array([np.real(np.diag(b.matrix)) for b in ext.atoms_b])
    px = target.source.table
    num_x = freq.shape[0]
    dim_b = b_diag.shape[1]

    if not cascade:
        p_joint, a_mats2, b_mats, etas, _ = _two_node_tables(target, ext)
        eps = 0.0
        for a in range(num_x):
            block = sum(freq[a, u] * np.kron(a_mats[a], b_mats[u])
                        for u in range(freq.shape[1]))
            eps += trace_norm_distance(block, px[a] * np.kron(a_mats[a],
                                                              etas[a]))
        alpha = alpha_n(eps, num_x, dim_b)
        slack_alpha = max(alpha, 0.0)
        meas = np.einsum("xu,ub->xb", freq, b_diag)
        x_alpha = Alphabet("X", [f"x{i}" for i in range(num_x)])
        y_alpha = Alphabet("Yb", [f"b{i}" for i in range(dim_b)])
        meas_pmf = JointPmf([x_alpha, y_alpha], meas / meas.sum())
        mi = mutual_information(meas_pmf, ["X"], ["Yb"])
        iq = [ConverseInequality("I(X;Y) <= R + alpha + slack",
                                 mi, rate, slack_alpha + slack)]
        return ConverseReport(iq, eps, alpha, meas_pmf)

    if rate23 is None:
        raise ProtocolError("cascade converse needs rate23")
    c_diag = np.array([np.real(np.diag(c.matrix)) for c in ext.atoms_c])
    dim_c = c_diag.shape[1]
    _, a_mats2, b_mats, c_mats, etas, _ = _cascade_tables(target, ext)
    eps = 0.0
    for a in range(num_x):
        block = np.zeros_like(np.kron(np.kron(a_mats[a], b_mats[0]),
                                      c_mats[0]))
        for y in range(freq.shape[1]):
            for z in range(freq.shape[2]):
                if freq[a, y, z] > 0:
                    block = block + freq[a, y, z] * np.kron(
                        np.kron(a_mats[a], b_mats[y]), c_mats[z])
        eps += trace_norm_distance(block,
                                   px[a] * np.kron(a_mats[a], etas[a]))
    alpha = alpha_n(eps, num_x, dim_b, dim_c)
    slack_alpha = max(alpha, 0.0)
    meas = np.einsum("xyz,yb,zc->xbc", freq, b_diag, c_diag)
    x_alpha = Alphabet("X", [f"x{i}" for i in range(num_x)])
    yb = Alphabet("Yb", [f"b{i}" for i in range(dim_b)])
    zc = Alphabet("Zc", [f"c{i}" for i in range(dim_c)])
    meas_pmf = JointPmf([x_alpha, yb, zc], meas / meas.sum())
    iq = [
        ConverseInequality("I(X;YZ) <= R12 + alpha + slack",
                           mutual_information(meas_pmf, ["X"], ["Yb", "Zc"]),
                           rate, slack_alpha + slack),
        ConverseInequality("I(X;Z) <= R23 + alpha + slack",
                           mutual_information(meas_pmf, ["X"], ["Zc"]),
                           rate23, slack_alpha + slack),
    ]
    return ConverseReport(iq, eps, alpha, meas_pmf)
