"""Clock registers, history states, and Feynman-Kitaev clock Hamiltonians.

Layout conventions
------------------
A Hamiltonian acts on ``nt`` time qubits followed by the circuit's sites, so
state site ``s`` is global site ``nt + s``.  The time register is ``k`` digit
registers of ``L = d - 1`` qubits each, digit 0 first.  Inside a digit
register, position ``p`` (1..L) lives at local index ``L - p`` so a digit of
value ``a`` reads ``|0^(L-a) 1^a>``.  With ``k = 1`` this is the plain unary
clock ``|0^(T-t) 1^t>``.

Digit orderings
---------------
``"standard"`` writes ``t`` in base ``d``.  A carry then resets a whole digit
register at once, which needs a term touching every qubit of that digit.
``"snake"`` uses the reflected (boustrophedon) mixed-radix order, where
consecutive times differ in a single digit by one, so every propagation term
stays within ``2k + 3`` sites.  Both orderings agree for ``k = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .circuits import Circuit
from .linalg import (
    ATOL,
    DensityOperator,
    DimensionError,
    HermitianTermSum,
    KrausChannel,
    RegisterShape,
    StateVector,
    Term,
    apply_local,
    dense_cap,
    eigensolve_hermitian,
    partial_trace,
    reduced_density,
    trace_distance,
)

P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)
RAISE = np.array([[0, 0], [1, 0]], dtype=complex)
LOWER = RAISE.T.copy()
ORDERINGS = ("snake", "standard")


def digit_base(k, T):
    """``d`` = (smallest integer c with c^k >= T) + 1, computed exactly."""
    if k < 1:
        raise ValueError("clock dimension must be >= 1")
    if T < 0:
        raise ValueError("T must be >= 0")
    c = max(int(round(T ** (1.0 / k))) - 1, 0)
    while c**k < T:
        c += 1
    while c > 0 and (c - 1) ** k >= T:
        c -= 1
    return c + 1


def _check_time(t, T):
    if not 0 <= t <= T:
        raise ValueError(f"time {t} outside 0..{T}")


def clock_digits(t, k, d, ordering="standard"):
    """Digit values (digit 0 first) of ``t`` in the given ordering."""
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown ordering {ordering!r}")
    out = []
    for i in range(k):
        s = (t // d**i) % d
        if ordering == "snake" and (t // d ** (i + 1)) % 2 == 1:
            s = d - 1 - s
        out.append(s)
    return tuple(out)


def unary_bits(a, length):
    return [0] * (length - a) + [1] * a


def unary_state(t, T):
    _check_time(t, T)
    return StateVector.basis(RegisterShape.uniform(T), unary_bits(t, T))


def clock_state(k, t, T, ordering="standard"):
    _check_time(t, T)
    ck = Clock(k, T, ordering)
    return StateVector.basis(RegisterShape.uniform(ck.nt), ck.config(t))


def _ops_matrix(ops):
    """Sparse Kronecker product of ``{site: 2x2}`` in increasing site order."""
    m = sp.identity(1, dtype=complex, format="csr")
    for s in sorted(ops):
        m = sp.kron(m, sp.csr_matrix(ops[s]), format="csr")
    return m


def _merge(*dicts):
    out = {}
    for d in dicts:
        for s, op in d.items():
            out[s] = out[s] @ op if s in out else op
    return out


@dataclass(frozen=True)
class Clock:
    k: int
    T: int
    ordering: str = "snake"

    def __post_init__(self):
        if self.ordering not in ORDERINGS:
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.k < 1 or self.T < 0:
            raise ValueError("need k >= 1 and T >= 0")

    @cached_property
    def d(self):
        return digit_base(self.k, self.T)

    @property
    def L(self):
        return self.d - 1

    @property
    def nt(self):
        return self.k * self.L

    @property
    def nonlocal_carries(self):
        return self.ordering == "standard" and self.k > 1

    def digits(self, t):
        _check_time(t, self.T)
        return clock_digits(t, self.k, self.d, self.ordering)

    def config(self, t):
        bits = []
        for a in self.digits(t):
            bits += unary_bits(a, self.L)
        return bits

    def configs(self):
        return np.array([self.config(t) for t in range(self.T + 1)], dtype=np.uint8).reshape(
            self.T + 1, self.nt
        )

    def site(self, i, p):
        """Global time site of digit ``i`` position ``p`` (1-based)."""
        return i * self.L + (self.L - p)

    def value_ops(self, i, j):
        """Local check that digit ``i`` holds value ``j`` (on legal configurations)."""
        L = self.L
        if L == 0:
            return {}
        if j == 0:
            return {self.site(i, 1): P0}
        if j == L:
            return {self.site(i, L): P1}
        return {self.site(i, j): P1, self.site(i, j + 1): P0}

    def projector_ops(self, t):
        """Local projector onto the legal configuration of time ``t``."""
        return _merge(*(self.value_ops(i, a) for i, a in enumerate(self.digits(t))))

    def _move_ops(self, i, x, y):
        """Digit ``i`` from value ``x`` to ``y``, written as local operators."""
        lo, hi = min(x, y), max(x, y)
        flip = RAISE if y > x else LOWER
        ops = {self.site(i, p): flip for p in range(lo + 1, hi + 1)}
        if lo >= 1:
            ops[self.site(i, lo)] = P1
        if hi + 1 <= self.L:
            ops[self.site(i, hi + 1)] = P0
        return ops

    def transition_ops(self, t):
        """Operator taking the clock from ``t - 1`` to ``t``."""
        if not 1 <= t <= self.T:
            raise ValueError(f"transition {t} outside 1..{self.T}")
        before, after = self.digits(t - 1), self.digits(t)
        parts = []
        for i, (x, y) in enumerate(zip(before, after)):
            parts.append(self._move_ops(i, x, y) if x != y else self.value_ops(i, x))
        return _merge(*parts)

    def stab_ops(self):
        """One check per adjacent pair: position p+1 set while p is clear is illegal."""
        out = []
        for i in range(self.k):
            for p in range(1, self.L):
                out.append({self.site(i, p): P0, self.site(i, p + 1): P1})
        return out

    def range_ops(self):
        """Checks that vanish on times ``<= T`` and equal one on legal configs past ``T``."""
        if self.k == 1:
            return []
        b = self.digits(self.T)
        out = []
        for i in range(self.k):
            higher = [self.value_ops(j, b[j]) for j in range(i + 1, self.k)]
            forward = self.ordering == "standard" or (self.T // self.d ** (i + 1)) % 2 == 0
            if forward and b[i] + 1 <= self.L:
                out.append(_merge(*higher, {self.site(i, b[i] + 1): P1}))
            elif not forward and b[i] >= 1:
                out.append(_merge(*higher, {self.site(i, b[i]): P0}))
        return out

    def legal_configs(self):
        """Every configuration with each digit register in unary form."""
        per = [unary_bits(a, self.L) for a in range(self.d)]
        out = []
        for combo in np.ndindex(*(self.d,) * self.k):
            bits = []
            for a in combo:
                bits += per[a]
            out.append(bits)
        return np.array(out, dtype=np.uint8).reshape(len(out), self.nt)


# --- Hamiltonian -------------------------------------------------------------


@dataclass(frozen=True)
class FkOptions:
    include_in: bool = True
    include_out: bool = False
    in_checked_sites: tuple | None = None
    clock_dimension: int = 1
    ordering: str = "snake"
    out_site: int = 0


@dataclass(frozen=True)
class FkHamiltonian(HermitianTermSum):
    """A clock Hamiltonian that remembers the circuit, clock and options it came from."""

    circuit: Circuit = None
    clock: Clock = None
    options: FkOptions = None
    flags: tuple = ()

    @property
    def nt(self):
        return self.clock.nt

    @property
    def checked_sites(self):
        return _checked(self.circuit, self.options)

    def locality_bound(self):
        return 2 * self.clock.k + 3

    def history_basis(self):
        """Columns spanning the history states over unchecked input sites (full space)."""
        c = self.circuit
        free = [s for s in range(c.n) if s not in self.checked_sites]
        cols = []
        for combo in np.ndindex(*(c.shape.dims[s] for s in free)):
            digits = [0] * c.n
            for s, v in zip(free, combo):
                digits[s] = v
            init = StateVector.basis(c.shape, digits)
            cols.append(history_state(c, init, clock=self.clock, from_initial=True).full_vector())
        return np.array(cols).T


def _checked(c, opts):
    if opts.in_checked_sites is None:
        return tuple(c.ancilla_sites)
    return c.shape.check_sites(opts.in_checked_sites)


def _sorted_term(ops, state_sites, state_ops, tag, nt):
    """Term from time-site ops (sorted) followed by state sites, in that order."""
    time_sites = sorted(ops)
    mat = sp.kron(_ops_matrix(ops), sp.csr_matrix(state_ops), format="csr") if state_sites else _ops_matrix(ops)
    return Term(tuple(time_sites) + tuple(nt + s for s in state_sites), mat, tag)


def _propagation_term(clock, t, gate):
    x = _ops_matrix(clock.transition_ops(t))
    u = sp.csr_matrix(gate.unitary)
    ident = sp.identity(u.shape[0], dtype=complex, format="csr")
    diag = x.conj().T @ x + x @ x.conj().T
    mat = 0.5 * (sp.kron(diag, ident) - sp.kron(x, u) - sp.kron(x.conj().T, u.conj().T))
    time_sites = tuple(sorted(clock.transition_ops(t)))
    return Term(time_sites + tuple(clock.nt + s for s in gate.support), sp.csr_matrix(mat), "prop")


def build_fk_hamiltonian(c, opts=None):
    """Clock Hamiltonian ``H_in + H_prop + H_stab`` (plus ``H_out`` when asked)."""
    opts = opts or FkOptions()
    ck = Clock(opts.clock_dimension, c.size, opts.ordering)
    nt = ck.nt
    shape = RegisterShape((2,) * nt) + c.shape
    terms = []
    if opts.include_in:
        start = ck.projector_ops(0) if nt else {}
        for s in _checked(c, opts):
            q = c.shape.dims[s]
            not_zero = np.eye(q, dtype=complex)
            not_zero[0, 0] = 0
            terms.append(_sorted_term(start, (s,), not_zero, "in", nt))
    for t, gate in enumerate(c.gates, start=1):
        terms.append(_propagation_term(ck, t, gate))
    if opts.include_out:
        q = c.shape.dims[opts.out_site]
        reject = np.eye(q, dtype=complex)
        reject[1, 1] = 0
        end = ck.projector_ops(c.size) if nt else {}
        terms.append(_sorted_term(end, (opts.out_site,), reject, "out", nt))
    for ops in ck.stab_ops() + ck.range_ops():
        terms.append(_sorted_term(ops, (), None, "stab", nt))
    flags = []
    if c.has_wide_gates:
        flags.append("wide_gate")
    if ck.nonlocal_carries:
        flags.append("nonlocal_carry")
    return FkHamiltonian(shape, tuple(terms), c, ck, opts, tuple(flags))


# --- sparse-in-time states ------------------------------------------------------


def _bits_to_int(bits):
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _int_to_bits(x, width):
    return [(x >> (width - 1 - i)) & 1 for i in range(width)]


def _split_support(support, nt):
    """Reorder a support so time sites come first; returns (perm, tau, sigma)."""
    tau = [i for i, s in enumerate(support) if s < nt]
    sig = [i for i, s in enumerate(support) if s >= nt]
    return tau + sig, [support[i] for i in tau], [support[i] - nt for i in sig]


def _permute_local(mat, dims, perm):
    """Local operator with its tensor factors reordered by ``perm``."""
    if list(perm) == sorted(perm):
        return mat
    dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
    k = len(dims)
    t = dense.reshape(tuple(dims) * 2)
    t = np.transpose(t, list(perm) + [k + p for p in perm])
    n = dense.shape[0]
    return sp.csr_matrix(t.reshape(n, n))


def _blocks(mat, n_time, block):
    """Map ``(a, b) -> dense block`` for nonzero time-pattern blocks of ``mat``."""
    csr = sp.csr_matrix(mat)
    coo = csr.tocoo()
    pairs = set(zip((coo.row // block).tolist(), (coo.col // block).tolist()))
    out = {}
    for a, b in pairs:
        blk = csr[a * block:(a + 1) * block, b * block:(b + 1) * block].toarray()
        if np.any(blk):
            out[(a, b)] = blk
    return out


@dataclass
class TimeSparseState:
    """``sum_c |c>_time (x) |phi_c>`` over a list of distinct time configurations.

    Only configurations that are actually populated are stored, so the time
    register can be far too large to materialize.  The state need not be
    normalized; channel branches carry their probability as squared norm.
    """

    nt: int
    state_dims: tuple
    configs: np.ndarray
    blocks: np.ndarray

    def __post_init__(self):
        self.state_dims = tuple(self.state_dims)
        self.blocks = np.asarray(self.blocks, dtype=complex)
        self.blocks = self.blocks.reshape(-1, math.prod(self.state_dims))
        self.configs = np.asarray(self.configs, dtype=np.uint8).reshape(len(self.blocks), self.nt)

    @property
    def state_dim(self):
        return math.prod(self.state_dims)

    @property
    def shape(self):
        return RegisterShape((2,) * self.nt) + RegisterShape(self.state_dims)

    def norm_sq(self):
        return float(np.vdot(self.blocks, self.blocks).real)

    def scaled(self, factor):
        return TimeSparseState(self.nt, self.state_dims, self.configs, self.blocks * factor)

    @classmethod
    def merged(cls, nt, state_dims, pairs):
        acc = {}
        order = []
        for cfg, blk in pairs:
            key = bytes(cfg)
            if key in acc:
                acc[key] = acc[key] + blk
            else:
                acc[key] = blk
                order.append(key)
        keep = [k for k in order if np.any(np.abs(acc[k]) > 1e-15)]
        configs = np.array([list(k) for k in keep], dtype=np.uint8).reshape(len(keep), nt)
        dim = math.prod(state_dims)
        blocks = np.array([acc[k] for k in keep], dtype=complex).reshape(len(keep), dim)
        return cls(nt, state_dims, configs, blocks)

    def full_vector(self):
        dim = self.shape.dim
        if dim > max(dense_cap(), 2**16):
            raise DimensionError(f"full-space dimension {dim} is too large to materialize")
        out = np.zeros(dim, dtype=complex)
        D = self.state_dim
        for cfg, blk in zip(self.configs, self.blocks):
            idx = _bits_to_int(cfg)
            out[idx * D:(idx + 1) * D] += blk
        return out

    def _term_parts(self, term):
        perm, tau, sig = _split_support(term.support, self.nt)
        local_dims = [2] * len(tau) + [self.state_dims[s] for s in sig]
        mat = _permute_local(term.matrix, [2 if s < self.nt else self.state_dims[s - self.nt]
                                           for s in term.support], perm)
        block = math.prod(local_dims[len(tau):])
        return tau, sig, _blocks(mat, 2 ** len(tau), block)

    def _groups(self, tau):
        outside = [s for s in range(self.nt) if s not in set(tau)]
        rest = self.configs[:, outside]
        groups = {}
        for idx in range(len(self.configs)):
            groups.setdefault(rest[idx].tobytes(), []).append(idx)
        pattern = [_bits_to_int(self.configs[idx, tau]) for idx in range(len(self.configs))]
        return groups, pattern

    def expectation(self, hamiltonian):
        """``<Phi|H|Phi>`` summed term by term, never leaving the stored configurations."""
        total = 0.0 + 0.0j
        for term in hamiltonian.terms:
            total += self.term_expectation(term)
        if abs(total.imag) > 1e-9 * max(1.0, abs(total.real)):
            raise ValueError(f"expectation has imaginary part {total.imag:.3e}")
        return float(total.real)

    def term_expectation(self, term):
        tau, sig, blocks = self._term_parts(term)
        if not blocks:
            return 0.0
        groups, pattern = self._groups(tau)
        total = 0.0 + 0.0j
        for members in groups.values():
            for ci in members:
                for cj in members:
                    blk = blocks.get((pattern[ci], pattern[cj]))
                    if blk is None:
                        continue
                    phi = self.blocks[cj]
                    moved = apply_local(phi, self.state_dims, sig, blk) if sig else blk[0, 0] * phi
                    total += np.vdot(self.blocks[ci], moved)
        return complex(total)

    def apply_operator(self, support, op):
        """``(op on support) |Phi>`` for an operator that may touch time and state sites."""
        term = Term(tuple(support), sp.csr_matrix(op))
        tau, sig, blocks = self._term_parts(term)
        by_col = {}
        for (a, b), blk in blocks.items():
            by_col.setdefault(b, []).append((a, blk))
        pairs = []
        for idx, cfg in enumerate(self.configs):
            b = _bits_to_int(cfg[tau]) if tau else 0
            for a, blk in by_col.get(b, ()):
                new = cfg.copy()
                if tau:
                    new[tau] = _int_to_bits(a, len(tau))
                phi = self.blocks[idx]
                moved = apply_local(phi, self.state_dims, sig, blk) if sig else blk[0, 0] * phi
                pairs.append((new, moved))
        return TimeSparseState.merged(self.nt, self.state_dims, pairs)

    def trace_time(self):
        """Unnormalized ``Tr_time |Phi><Phi|`` as a plain matrix."""
        b = self.blocks
        return b.T @ b.conj()

    def reduced_state_matrix(self, keep_state_sites):
        """Unnormalized reduced matrix on chosen state sites (time traced too)."""
        keep = list(keep_state_sites)
        rest = [s for s in range(len(self.state_dims)) if s not in keep]
        dk = math.prod(self.state_dims[s] for s in keep)
        out = np.zeros((dk, dk), dtype=complex)
        for blk in self.blocks:
            t = np.transpose(blk.reshape(self.state_dims), keep + rest).reshape(dk, -1)
            out += t @ t.conj().T
        return out


@dataclass
class Mixture:
    """Convex combination kept as unnormalized pure branches (a Kraus unravelling)."""

    branches: list = field(default_factory=list)

    @classmethod
    def pure(cls, state):
        return cls([state])

    @property
    def weight(self):
        return sum(b.norm_sq() for b in self.branches)

    def apply_channel(self, channel, prune=1e-14):
        out = []
        for branch in self.branches:
            for k in channel.kraus:
                nb = branch.apply_operator(channel.support, k)
                if nb.norm_sq() > prune:
                    out.append(nb)
        return Mixture(out)

    def expectation(self, hamiltonian):
        return sum(b.expectation(hamiltonian) for b in self.branches)

    def trace_time(self):
        return sum(b.trace_time() for b in self.branches)

    def density_matrix(self):
        vecs = [b.full_vector() for b in self.branches]
        return sum(np.outer(v, v.conj()) for v in vecs)


# --- history states -----------------------------------------------------------


@dataclass(frozen=True)
class HistoryState:
    circuit: Circuit
    clock: Clock
    snapshots: tuple
    weights: np.ndarray = None

    def __post_init__(self):
        T = self.clock.T
        if len(self.snapshots) != T + 1:
            raise DimensionError(f"{len(self.snapshots)} snapshots for T = {T}")
        if self.weights is None:
            object.__setattr__(self, "weights", np.full(T + 1, 1 / math.sqrt(T + 1)))

    @property
    def T(self):
        return self.clock.T

    @property
    def nt(self):
        return self.clock.nt

    @property
    def shape(self):
        return RegisterShape((2,) * self.nt) + self.circuit.shape

    def sparse(self):
        blocks = np.array([w * psi for w, psi in zip(self.weights, self.snapshots)])
        return TimeSparseState(self.nt, self.circuit.shape.dims, self.clock.configs(), blocks)

    def full_vector(self):
        return self.sparse().full_vector()

    def full_state(self):
        return StateVector(self.shape, self.full_vector())

    def trace_time(self):
        return self.sparse().trace_time()

    def expectation(self, hamiltonian):
        return self.sparse().expectation(hamiltonian)

    def check_recursion(self, atol=ATOL):
        for t in range(1, self.T + 1):
            want = self.circuit.apply_gate(t - 1, self.snapshots[t - 1])
            if np.abs(want - self.snapshots[t]).max() > atol:
                return False
        return True


def history_state(c, witness=None, k=1, ordering="snake", clock=None, from_initial=False):
    """Uniform superposition over the snapshots of ``c`` run on ``witness (x) |0...0>``.

    With ``from_initial=True`` the ``witness`` argument is the full initial state.
    """
    if from_initial:
        init = witness
    else:
        init = c.initial_state(witness)
    clock = clock or Clock(k, c.size, ordering)
    if clock.T != c.size:
        raise DimensionError(f"clock has T = {clock.T} but circuit has {c.size} gates")
    return HistoryState(c, clock, tuple(c.snapshots(init)))


# --- checks -------------------------------------------------------------------


@dataclass(frozen=True)
class TraceOrderResult:
    lhs: np.ndarray
    rhs: np.ndarray
    distance: float


def verify_traceorder(psi, traced_state_sites, route="full"):
    """Compare ``Tr_{S+time}`` of the history state with the snapshot average.

    ``route="full"`` reduces the materialized full-space vector; ``"sparse"``
    sums over stored clock configurations and works at any ``T``.
    """
    n = psi.circuit.n
    traced = set(psi.circuit.shape.check_sites(traced_state_sites))
    keep = [s for s in range(n) if s not in traced]
    if route == "full":
        full = psi.full_state()
        lhs = reduced_density(full, [psi.nt + s for s in keep]).matrix
    else:
        lhs = psi.sparse().reduced_state_matrix(keep)
    dk = math.prod(psi.circuit.shape.dims[s] for s in keep)
    rhs = np.zeros((dk, dk), dtype=complex)
    for snap in psi.snapshots:
        rho = DensityOperator(psi.circuit.shape, np.outer(snap, snap.conj()), check_psd=False)
        rhs += partial_trace(rho, sorted(traced)).matrix
    rhs /= psi.T + 1
    return TraceOrderResult(lhs, rhs, float(np.abs(lhs - rhs).max()))


@dataclass(frozen=True)
class ClosenessResult:
    projected: np.ndarray
    energy: float
    distance: float
    bound: float
    bound_ok: bool


def closeness_to_history(eta, hamiltonian, gap, ground_basis=None):
    """Project ``eta`` onto the history-state ground space and test the gentle-measurement bound."""
    vec = eta.amplitudes if isinstance(eta, StateVector) else np.asarray(eta, dtype=complex)
    basis = hamiltonian.history_basis() if ground_basis is None else ground_basis
    q, _ = np.linalg.qr(basis)
    proj = q @ (q.conj().T @ vec)
    norm = np.linalg.norm(proj)
    if norm < 1e-12:
        raise ValueError("state is orthogonal to the history-state ground space")
    psi = proj / norm
    mat = hamiltonian.to_sparse()
    energy = float(np.vdot(vec, mat @ vec).real)
    energy = max(energy, 0.0)
    distance = trace_distance(np.outer(vec, vec.conj()), np.outer(psi, psi.conj()))
    bound = 2 * math.sqrt(energy / gap)
    return ClosenessResult(psi, energy, distance, bound, distance <= bound + 1e-12)


@dataclass(frozen=True)
class YesBoundResult:
    accept_probability: float
    energy: float
    bound: float
    lambda_min: float | None
    ok: bool

    def __bool__(self):
        return self.ok


def accept_probability(c, initial, out_site=0):
    final = c.run(initial).amplitudes.reshape(c.shape.dims)
    picked = np.take(final, 1, axis=out_site)
    return float(np.vdot(picked, picked).real)


def kitaev_yes_bound(c, witness=None, gamma=0.0, k=1, ordering="snake"):
    """History-state energy of an accepting computation against ``gamma / (T + 1)``."""
    init = c.initial_state(witness)
    p = accept_probability(c, init)
    if p < 1 - gamma - ATOL:
        raise ValueError(f"circuit accepts with probability {p:.6f} < 1 - gamma")
    opts = FkOptions(include_out=True, clock_dimension=k, ordering=ordering)
    h = build_fk_hamiltonian(c, opts)
    hist = history_state(c, witness, clock=h.clock)
    energy = hist.expectation(h)
    bound = gamma / (c.size + 1)
    ok = energy <= bound + ATOL
    lam = None
    if h.shape.dim <= dense_cap():
        lam = float(eigensolve_hermitian(h).values[0])
        ok = ok and lam <= energy + ATOL
    return YesBoundResult(p, energy, bound, lam, ok)


def channel_on_history(hist, channel: KrausChannel):
    """Apply a channel to a history state kept sparse in time."""
    return Mixture.pure(hist.sparse()).apply_channel(channel)
