"""Approximate low-weight-check codes built from a clock Hamiltonian.

The code space is the zero-energy space of the clock Hamiltonian of an
encoding circuit ``V`` padded with ``K`` identity gates.  Encoding a message
gives the history state of that wait circuit; decoding traces out the clock,
runs syndrome correction for the inner CSS code, undoes ``V`` and drops the
ancilla.  Almost all of the history-state weight sits in the waiting period,
where the snapshot is an honest codeword, so the decoded state is the message
up to a small junk term.

The second half turns a circuit ``C`` into an error-corrected one that
encodes, waits, decodes and then runs ``C``, and simulates the verifier that
reads a witness off a candidate ground state of that circuit's Hamiltonian.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .circuits import Circuit, named_gate
from .clock import (
    Clock,
    FkOptions,
    HistoryState,
    Mixture,
    build_fk_hamiltonian,
    digit_base,
)
from .linalg import (
    DensityOperator,
    DimensionError,
    KrausChannel,
    RegisterShape,
    StateVector,
    apply_local,
    partial_trace,
    random_channel,
    replace_channel,
    trace_distance,
)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _pauli_string(n, sites, letter):
    ops = [PAULI[letter] if s in sites else PAULI["I"] for s in range(n)]
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


# --- inner CSS code -------------------------------------------------------------


@dataclass(frozen=True)
class CssCode:
    n: int
    k: int
    d: int
    x_stabilizers: tuple
    z_stabilizers: tuple
    encoder: Circuit
    logical_x: tuple = ()
    logical_z: tuple = ()
    q: int = 2
    name: str = "css"

    @property
    def T_V(self):
        return self.encoder.size

    @property
    def message_sites(self):
        return tuple(range(self.k))

    @property
    def ancilla_sites(self):
        return tuple(range(self.k, self.n))

    @property
    def correctable(self):
        return (self.d - 1) // 2

    def check_matrix(self):
        """Symplectic rows ``(x | z)`` of all stabilizer generators."""
        rows = []
        for sup in self.x_stabilizers:
            rows.append([int(s in sup) for s in range(self.n)] + [0] * self.n)
        for sup in self.z_stabilizers:
            rows.append([0] * self.n + [int(s in sup) for s in range(self.n)])
        return np.array(rows, dtype=np.uint8).reshape(-1, 2 * self.n)

    def stabilizers_commute(self):
        for a in self.x_stabilizers:
            for b in self.z_stabilizers:
                if len(set(a) & set(b)) % 2:
                    return False
        return True

    def codeword(self, message):
        """``V (message (x) |0...0>)`` as a plain vector."""
        return self.encoder.run(self.encoder.initial_state(message)).amplitudes

    def stabilizer_matrices(self):
        return [_pauli_string(self.n, set(s), "X") for s in self.x_stabilizers] + [
            _pauli_string(self.n, set(s), "Z") for s in self.z_stabilizers
        ]

    @cached_property
    def correction(self):
        return tuple(self.correction_kraus())

    def correction_kraus(self):
        """Measure every stabilizer, then undo the lowest-weight error with that syndrome."""
        n = self.n
        stabs = self.stabilizer_matrices()
        nx = len(self.x_stabilizers)
        # X-type checks flag Z errors and Z-type checks flag X errors
        fix_z = _syndrome_table(n, self.x_stabilizers)
        fix_x = _syndrome_table(n, self.z_stabilizers)
        ops = []
        dim = 2**n
        for bits in itertools.product((0, 1), repeat=len(stabs)):
            proj = np.eye(dim, dtype=complex)
            for b, s in zip(bits, stabs):
                proj = proj @ (np.eye(dim) + (-1) ** b * s) / 2
            sx, sz = bits[:nx], bits[nx:]
            fix = _pauli_string(n, fix_z.get(sx, set()), "Z") @ _pauli_string(n, fix_x.get(sz, set()), "X")
            ops.append(fix @ proj)
        return ops


def _syndrome_table(n, checks):
    """Lowest-weight site set producing each syndrome (single-type errors)."""
    table = {}
    for w in range(n + 1):
        for sites in itertools.combinations(range(n), w):
            syn = tuple(len(set(sites) & set(c)) % 2 for c in checks)
            table.setdefault(syn, set(sites))
        if len(table) == 2 ** len(checks):
            break
    return table


def _rank_gf2(rows):
    m = [r.copy() for r in np.array(rows, dtype=np.uint8)]
    rank = 0
    if not m:
        return 0
    cols = len(m[0])
    for c in range(cols):
        pivot = next((i for i in range(rank, len(m)) if m[i][c]), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        for i in range(len(m)):
            if i != rank and m[i][c]:
                m[i] ^= m[rank]
        rank += 1
    return rank


def brute_force_distance(code):
    """Smallest weight of a Pauli that commutes with every check but is not a stabilizer."""
    n = code.n
    checks = code.check_matrix()
    base = _rank_gf2(checks)
    best = None
    for x in range(2**n):
        for z in range(2**n):
            if x == 0 and z == 0:
                continue
            xv = np.array([(x >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.uint8)
            zv = np.array([(z >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.uint8)
            weight = int(np.sum(xv | zv))
            if best is not None and weight >= best:
                continue
            # symplectic product with each check
            comm = (checks[:, :n] @ zv + checks[:, n:] @ xv) % 2
            if np.any(comm):
                continue
            if _rank_gf2(np.vstack([checks, np.concatenate([xv, zv])])) == base:
                continue
            best = weight
    return best


def steane_like_inner():
    """[[7,1,3]] code with a 12-gate encoder; the message sits on site 0."""
    rows = ((0, 1, 4, 5), (0, 2, 4, 6), (3, 4, 5, 6))
    gates = [named_gate("H", (s,)) for s in (1, 2, 3)]
    for a, b in ((0, 4), (1, 0), (0, 5), (0, 6), (2, 0), (0, 4), (3, 4), (3, 5), (4, 6)):
        gates.append(named_gate("CNOT", (a, b)))
    encoder = Circuit(RegisterShape.uniform(7), tuple(gates), witness_count=1)
    return CssCode(7, 1, 3, rows, rows, encoder, (0, 5, 6), (0, 5, 6), name="steane7")


def identity_code(k=1):
    """Trivial code: no ancilla, no checks, empty encoder."""
    encoder = Circuit(RegisterShape.uniform(k), (), witness_count=k)
    return CssCode(k, k, 1, (), (), encoder, name="identity")


INNER_CODES = {"steane7": steane_like_inner, "identity": identity_code}


# --- parameters -----------------------------------------------------------------


def _wait_count(T_V, delta):
    if delta <= 0:
        raise ValueError("delta must be positive")
    target = 1 - delta**2 / 4
    if target <= 0:
        return 1
    K = max(math.ceil(target * T_V / (1 - target) - 1e-9), 1)
    while K / (T_V + K) < target - 1e-15:
        K += 1
    while K > 1 and (K - 1) / (T_V + K - 1) >= target - 1e-15:
        K -= 1
    return K


def build_wait_circuit(V, delta):
    """``V`` followed by ``K`` explicit identity gates, with ``K/(T_V+K) >= 1 - delta^2/4``."""
    K = _wait_count(V.size, delta)
    waits = tuple(named_gate("I", (0,), V.shape.dims) for _ in range(K))
    return Circuit(V.shape, V.gates + waits, V.witness_count), K


def choose_r(T_C, n):
    """Smallest ``r`` with ``n^r >= T_C``."""
    if T_C < 1 or n < 2:
        raise ValueError("need T_C >= 1 and n >= 2")
    r = 1
    while n**r < T_C:
        r += 1
    return r


def closed_form_r(delta, n):
    return math.log(1 + 4 / delta**2) / math.log(n) + 2


@dataclass(frozen=True)
class QlwcParameters:
    q: int
    delta: float
    w: int
    m: int
    d: int
    r: int
    K: int
    T_V: int
    T_C: int
    n: int
    digit_base: int
    clock_qubits: int
    closed_form_r: float
    measured_locality: int = 0

    @property
    def waiting_fraction(self):
        return self.K / (self.T_V + self.K)

    @property
    def waiting_mass(self):
        """History-state weight on snapshots that are finished codewords."""
        return (self.K + 1) / (self.T_C + 1)

    def identities(self):
        return {
            "w == 3 + 2r": self.w == 3 + 2 * self.r,
            "measured locality <= w": self.measured_locality <= self.w,
            "K/(T_V+K) >= 1 - delta^2/4": self.waiting_fraction >= 1 - self.delta**2 / 4 - 1e-15,
            "m <= (r+1) n": self.m <= (self.r + 1) * self.n,
            "T_C == T_V + K": self.T_C == self.T_V + self.K,
        }

    def to_json(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["waiting_fraction"] = self.waiting_fraction
        out["waiting_mass"] = self.waiting_mass
        return out


@dataclass(frozen=True)
class QlwcCode:
    inner: CssCode
    params: QlwcParameters
    hamiltonian: object
    wait_circuit: Circuit

    @property
    def clock(self):
        return self.hamiltonian.clock

    @property
    def nt(self):
        return self.clock.nt

    def code_site(self, s):
        """Global index of state-register site ``s``."""
        return self.nt + s


def build_qlwc(inner, delta, r=None):
    C, K = build_wait_circuit(inner.encoder, delta)
    r = r or choose_r(C.size, inner.n)
    h = build_fk_hamiltonian(
        C,
        FkOptions(include_in=True, include_out=False, in_checked_sites=inner.ancilla_sites,
                  clock_dimension=r, ordering="snake"),
    )
    params = QlwcParameters(
        q=inner.q, delta=delta, w=3 + 2 * r, m=h.clock.nt + inner.n, d=inner.d, r=r, K=K,
        T_V=inner.T_V, T_C=C.size, n=inner.n, digit_base=digit_base(r, C.size),
        clock_qubits=h.clock.nt, closed_form_r=closed_form_r(delta, inner.n),
        measured_locality=h.locality,
    )
    return QlwcCode(inner, params, h, C)


# --- encode / errors / decode ----------------------------------------------------


@dataclass(frozen=True)
class ErrorChannel:
    """Kraus channel addressed in the code's global sites (clock qubits first)."""

    support: tuple
    kraus: tuple

    def as_kraus_channel(self):
        return KrausChannel(self.support, self.kraus)


@dataclass(frozen=True)
class CodeState:
    """An encoded state: a mixture sparse in clock configurations."""

    code: QlwcCode
    mixture: Mixture
    reference: bool = False

    @property
    def state_dims(self):
        return (2,) * (self.code.inner.n + int(self.reference))

    def energy(self):
        return self.mixture.expectation(self.code.hamiltonian) / self.mixture.weight


def _message_vector(message, reference):
    amps = message.amplitudes if isinstance(message, StateVector) else np.asarray(message, dtype=complex)
    want = 4 if reference else 2
    if amps.size != want:
        raise DimensionError(f"message needs {want} amplitudes, got {amps.size}")
    return amps


def encode(code, message, reference=False):
    """History state of the wait circuit on ``message (x) |0...0>`` (reference kept aside)."""
    inner = code.inner
    amps = _message_vector(message, reference)
    n = inner.n
    zeros = np.zeros(2 ** (n - 1), dtype=complex)
    zeros[0] = 1
    if reference:
        # message on site 0, reference on the extra last site
        init = np.einsum("ar,z->azr", amps.reshape(2, 2), zeros).reshape(-1)
    else:
        init = np.kron(amps, zeros)
    shape = RegisterShape.uniform(n + int(reference))
    gates = code.wait_circuit.gates
    circuit = Circuit(shape, gates, witness_count=1)
    hist = HistoryState(circuit, code.clock, tuple(circuit.snapshots(init)))
    return CodeState(code, Mixture.pure(hist.sparse()), reference)


def parse_budget(code, channel):
    touched = set(channel.support)
    state = {s - code.nt for s in touched if s >= code.nt}
    clock = {s for s in touched if s < code.nt}
    return state, clock


def apply_error(state, channel, certified=True):
    code = state.code
    support = tuple(channel.support)
    n_sites = code.nt + code.inner.n
    for s in support:
        if not 0 <= s < n_sites:
            raise DimensionError(f"error site {s} outside the {n_sites}-site block")
    if certified and len(support) > code.inner.correctable:
        raise ValueError(
            f"error touches {len(support)} sites; the budget is (d-1)/2 = {code.inner.correctable}"
        )
    kc = channel.as_kraus_channel() if isinstance(channel, ErrorChannel) else channel
    return CodeState(code, state.mixture.apply_channel(kc), state.reference)


def _apply_kraus_matrix(rho, dims, sites, kraus):
    out = np.zeros_like(rho)
    if tuple(sites) == tuple(range(len(sites))):
        # leading block: K (x) I acts on rho viewed as a block matrix
        d = kraus[0].shape[0]
        rest = rho.shape[0] // d
        t = rho.reshape(d, rest, d, rest)
        for k in kraus:
            out += np.einsum("ab,bicj,dc->aidj", k, t, k.conj(), optimize=True).reshape(rho.shape)
        return out
    for k in kraus:
        left = apply_local(rho, dims, sites, k)
        out += apply_local(left.conj().T, dims, sites, k).conj().T
    return out


def _undo_encoder(rho, dims, encoder):
    for g in reversed(encoder.gates):
        u = g.unitary.conj().T
        rho = apply_local(rho, dims, g.support, u)
        rho = apply_local(rho.conj().T, dims, g.support, u).conj().T
    return rho


def decode_matrix(inner, rho, dims, correct=True):
    """Correction, ``V^dag`` and ancilla trace on a state-register matrix."""
    code_sites = tuple(range(inner.n))
    if correct and inner.x_stabilizers + inner.z_stabilizers:
        rho = _apply_kraus_matrix(rho, dims, code_sites, inner.correction)
    rho = _undo_encoder(rho, dims, inner.encoder)
    return rho


def decode(code, state, correct=True):
    """``Tr_anc(V^dag R(Tr_time sigma) V)`` with ``R`` the syndrome correction."""
    rho = state.mixture.trace_time() / state.mixture.weight
    dims = state.state_dims
    rho = decode_matrix(code.inner, rho, dims, correct)
    out = partial_trace(DensityOperator(RegisterShape(dims), rho, check_psd=False),
                        code.inner.ancilla_sites)
    return out


def junk_weight(rho, phi):
    """Smallest ``w`` with ``rho = (1-w) |phi><phi| + w * (a state)``."""
    rho = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    phi = phi.amplitudes if isinstance(phi, StateVector) else np.asarray(phi, dtype=complex)
    inv = np.linalg.pinv(rho, rcond=1e-12, hermitian=True)
    val = float(np.vdot(phi, inv @ phi).real)
    # phi outside the support of rho leaves nothing to subtract
    resid = phi - rho @ (inv @ phi)
    if val <= 0 or np.linalg.norm(resid) > 1e-8:
        return 1.0
    return max(0.0, 1.0 - 1.0 / val)


MESSAGES = {
    "0": (np.array([1, 0], dtype=complex), False),
    "1": (np.array([0, 1], dtype=complex), False),
    "plus": (np.array([1, 1], dtype=complex) / math.sqrt(2), False),
    "bell": (np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2), True),
}


@dataclass(frozen=True)
class RecoveryResult:
    trace_distance: float
    junk_weight: float
    decoded: np.ndarray


def recover(code, message, reference, channels=(), correct=True, certified=True):
    """Encode, apply each channel, decode, and compare against the message."""
    state = encode(code, message, reference)
    for ch in channels:
        state = apply_error(state, ch, certified)
    out = decode(code, state, correct)
    phi = _message_vector(message, reference)
    target = np.outer(phi, phi.conj())
    return RecoveryResult(trace_distance(out.matrix, target), junk_weight(out.matrix, phi), out.matrix)


def erasure(code, state_site):
    ch = replace_channel((code.code_site(state_site),), (2,))
    return ErrorChannel(ch.support, ch.kraus)


def random_single_site_channel(code, rng, sites=None):
    sites = range(code.inner.n) if sites is None else sites
    s = int(rng.choice(list(sites)))
    ch = random_channel((code.code_site(s),), (2,), rng)
    return ErrorChannel(ch.support, ch.kraus)


# --- error-corrected circuits and the verifier ------------------------------------


@dataclass(frozen=True)
class CorrectedCircuit:
    circuit: Circuit
    original: Circuit
    inner: CssCode
    K: int
    site_map: tuple

    @property
    def waiting_fraction(self):
        return self.K / self.circuit.size if self.circuit.size else 0.0

    @property
    def c_ancilla_sites(self):
        return tuple(self.site_map[s] for s in range(self.inner.k, self.original.n))


def transform_error_corrected(C, inner):
    """Encode the witness, wait ``2 T_V + T_C`` steps, decode, then run ``C``."""
    k = inner.k
    if C.witness_count != k:
        raise DimensionError(f"circuit has {C.witness_count} witness sites; the code encodes {k}")
    if C.shape.dims[:k] != (inner.q,) * k:
        raise DimensionError("witness sites do not match the code's qudit dimension")
    n_total = inner.n + C.n - k
    site_map = tuple(list(range(k)) + list(range(inner.n, n_total)))
    shape = RegisterShape((inner.q,) * inner.n + C.shape.dims[k:])
    K = 2 * inner.T_V + C.size
    gates = list(inner.encoder.gates)
    gates += [named_gate("I", (0,), shape.dims) for _ in range(K)]
    gates += [g.dagger() for g in reversed(inner.encoder.gates)]
    gates += [g.shifted(site_map) for g in C.gates]
    return CorrectedCircuit(Circuit(shape, tuple(gates), witness_count=k), C, inner, K, site_map)


@dataclass(frozen=True)
class VerifierResult:
    accept_probability: float
    waiting_mass: float
    waiting_acceptance: float | None
    waiting_fraction: float


def history_preparer(cc, witness, k=2):
    """Exact history state of the corrected circuit on ``witness`` (a sparse mixture)."""
    c = cc.circuit
    clock = Clock(k, c.size, "snake")
    hist = HistoryState(c, clock, tuple(c.snapshots(c.initial_state(witness))))
    return Mixture.pure(hist.sparse()), hist


def _prepared_state_matrix(D, cc):
    shape = cc.circuit.shape
    if isinstance(D, Mixture):
        return D.trace_time() / D.weight
    if isinstance(D, HistoryState):
        return D.trace_time()
    if isinstance(D, DensityOperator):
        if D.shape != shape:
            raise DimensionError("prepared state does not match the corrected register")
        return D.matrix
    if isinstance(D, Circuit):
        if D.shape != shape:
            raise DimensionError("preparing circuit does not match the corrected register")
        v = D.run(StateVector.basis(shape, (0,) * len(shape))).amplitudes
        return np.outer(v, v.conj())
    raise TypeError(f"cannot prepare a state from {type(D).__name__}")


def _accept_from_matrix(rho, cc, correct):
    inner, C = cc.inner, cc.original
    dims = cc.circuit.shape.dims
    rho = decode_matrix(inner, rho, dims, correct)
    # keep only the decoded witness, reset the ancilla of C, run C, read site 0
    reg = DensityOperator(RegisterShape(dims), rho, check_psd=False)
    kept = partial_trace(reg, [s for s in range(len(dims)) if s >= inner.k]).matrix
    zeros = np.zeros(math.prod(C.shape.dims[inner.k:]), dtype=complex)
    zeros[0] = 1
    u = C.unitary()
    out = u @ np.kron(kept, np.outer(zeros, zeros)) @ u.conj().T
    diag = np.diagonal(out).real.reshape(C.shape.dims)
    return float(np.take(diag, 1, axis=0).sum())


def verifier_pipeline(D, cc, correct=True, history=None):
    """Probability that the verifier accepts the state prepared by ``D``."""
    rho = _prepared_state_matrix(D, cc)
    p = _accept_from_matrix(rho, cc, correct)
    wait_acc = None
    T = cc.circuit.size
    lo = cc.inner.T_V
    hi = cc.inner.T_V + cc.K
    wait_mass = (hi - lo + 1) / (T + 1)
    if history is not None:
        block = sum(np.outer(history.snapshots[t], history.snapshots[t].conj())
                    for t in range(lo, hi + 1)) / (hi - lo + 1)
        wait_acc = _accept_from_matrix(block, cc, correct)
    return VerifierResult(p, wait_mass, wait_acc, cc.waiting_fraction)


def junk_preparer(cc):
    """Maximally mixed state on the corrected register."""
    dim = cc.circuit.shape.dim
    return DensityOperator(cc.circuit.shape, np.eye(dim) / dim, check_psd=False)
