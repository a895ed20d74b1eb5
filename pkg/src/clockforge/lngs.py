"""A 3-local qutrit line whose ground state is the cat-circuit history state.

Each time qubit ``time(i+1)`` is paired with state qubit ``i`` and the pair is
compressed into one qutrit: ``|1,x> -> |x>`` for ``x`` in {0, 1} and
``|0,0> -> |2>``.  The pattern ``|0,1>`` never occurs in the history state, so
nothing is lost.  The module then builds noisy versions of that ground state
and checks the two families of inequalities that rule out shallow circuits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .circuits import cat_circuit, effect_zone_and_shadow, random_layered_circuit
from .clock import FkOptions, build_fk_hamiltonian
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
    dephasing_channel,
    haar_unitary,
    partial_trace,
    replace_channel,
    unitary_channel,
)

# columns: qutrit |0>, |1>, |2>; rows: (time, state) pair index 2*time + state
FUSION = np.zeros((4, 3), dtype=complex)
FUSION[2, 0] = FUSION[3, 1] = FUSION[0, 2] = 1.0

A_LOCAL = np.diag([1.0, 0.0, 1.0]).astype(complex)
B_LOCAL = np.diag([0.0, 1.0, 1.0]).astype(complex)
EPS_LIMIT = 1 / 48


def fused_site_of(n, qubit):
    """Qutrit holding a given qubit of the unary clock Hamiltonian (time sites first)."""
    if qubit < n:
        return n - 1 - qubit
    return qubit - n


def _fuse_term(n, term):
    """Compress one qubit term onto the qutrits its qubits belong to."""
    qutrits = sorted({fused_site_of(n, q) for q in term.support})
    # qubit layout of the touched pairs: for each qutrit, (time, state)
    pair_qubits = []
    for i in qutrits:
        pair_qubits += [n - 1 - i, n + i]
    extra = [q for q in pair_qubits if q not in term.support]
    local = sp.kron(sp.csr_matrix(term.matrix), sp.identity(2 ** len(extra), format="csr"))
    order = list(term.support) + extra
    perm = [order.index(q) for q in pair_qubits]
    k = len(order)
    dense = local.toarray().reshape((2,) * (2 * k))
    dense = np.transpose(dense, perm + [k + p for p in perm]).reshape(2**k, 2**k)
    w = FUSION
    for _ in qutrits[1:]:
        w = np.kron(w, FUSION)
    return Term(tuple(qutrits), w.conj().T @ dense @ w, term.tag)


@dataclass(frozen=True)
class QutritChainHamiltonian:
    n: int
    terms: HermitianTermSum
    fusion_map: np.ndarray = field(default_factory=lambda: FUSION.copy(), repr=False)

    @property
    def shape(self):
        return self.terms.shape

    @property
    def locality(self):
        return self.terms.locality

    def is_geometrically_local(self, width=3):
        for t in self.terms:
            s = sorted(t.support)
            if len(s) > width or s[-1] - s[0] != len(s) - 1:
                return False
        return True

    def ground_state(self):
        return fused_history_state(self.n)


def build_lngs_hamiltonian(n):
    if n < 2:
        raise ValueError("the qutrit line needs n >= 2")
    qubit_h = build_fk_hamiltonian(cat_circuit(n), FkOptions(include_in=False))
    terms = tuple(_fuse_term(n, t) for t in qubit_h.terms)
    return QutritChainHamiltonian(n, HermitianTermSum(RegisterShape.uniform(n, 3), terms))


def fusion_isometry(n):
    """Full ``2^(2n) x 3^n`` embedding of the qutrit line in the qubit clock space."""
    rows, cols = [], []
    for col, digits in enumerate(itertools.product(range(3), repeat=n)):
        bits = [0] * (2 * n)
        for i, x in enumerate(digits):
            time, state = (0, 0) if x == 2 else (1, x)
            bits[n - 1 - i] = time
            bits[n + i] = state
        rows.append(int("".join(map(str, bits)), 2) if bits else 0)
        cols.append(col)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(4**n, 3**n))


# --- the ground state ---------------------------------------------------------


@dataclass(frozen=True)
class SparseQutritState:
    """A state on ``n`` qutrits given as ``{digit tuple: amplitude}``."""

    n: int
    amplitudes: dict

    def dense(self):
        out = np.zeros(3**self.n, dtype=complex)
        for digits, amp in self.amplitudes.items():
            out[np.ravel_multi_index(digits, (3,) * self.n)] += amp
        return out

    def state_vector(self):
        return StateVector(RegisterShape.uniform(self.n, 3), self.dense())

    def reduced(self, sites):
        """Reduced density matrix on ``sites`` (in the given order)."""
        sites = list(sites)
        rest = [s for s in range(self.n) if s not in sites]
        groups = {}
        for digits, amp in self.amplitudes.items():
            key = tuple(digits[s] for s in rest)
            idx = np.ravel_multi_index(tuple(digits[s] for s in sites), (3,) * len(sites)) if sites else 0
            groups.setdefault(key, []).append((idx, amp))
        dim = 3 ** len(sites)
        out = np.zeros((dim, dim), dtype=complex)
        for members in groups.values():
            vec = np.zeros(dim, dtype=complex)
            for idx, amp in members:
                vec[idx] += amp
            out += np.outer(vec, vec.conj())
        return out


def fused_history_state(n):
    """``(1/sqrt(n+1)) sum_t |Cat_t> |2...2>`` with ``Cat_0`` the empty string."""
    amp = 1 / math.sqrt(n + 1)
    out = {(2,) * n: amp}
    for t in range(1, n + 1):
        for bit in (0, 1):
            digits = (bit,) * t + (2,) * (n - t)
            out[digits] = out.get(digits, 0) + amp / math.sqrt(2)
    return SparseQutritState(n, out)


def observable_pair(i, j):
    """Local matrices of ``A_i`` and ``B_j``; both are projectors."""
    if not i < j:
        raise ValueError("need i < j")
    return A_LOCAL, B_LOCAL


# --- noisy ground states ------------------------------------------------------


@dataclass(frozen=True)
class NoiseComponent:
    probability: float
    sites: tuple
    channel: KrausChannel

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(sorted(int(s) for s in self.sites)))
        if set(self.channel.support) - set(self.sites):
            raise ValueError("channel acts outside its corruption set")


@dataclass(frozen=True)
class NoisyGroundStateSpec:
    n: int
    eps: float
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        total = sum(c.probability for c in comps)
        if abs(total - 1) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        if any(c.probability < 0 for c in comps):
            raise ValueError("negative probability")
        limit = math.floor(self.eps * self.n + 1e-12)
        for c in comps:
            if len(c.sites) > limit:
                raise ValueError(f"corruption set {c.sites} larger than floor(eps n) = {limit}")
            if any(not 0 <= s < self.n for s in c.sites):
                raise DimensionError(f"corruption set {c.sites} out of range")
        object.__setattr__(self, "components", comps)

    def site_weights(self):
        w = np.zeros(self.n)
        for c in self.components:
            for s in c.sites:
                w[s] += c.probability
        return w


CHANNEL_MENU = ("replace", "unitary", "dephase")


def corruption_channel(kind, sites, rng=None):
    dims = (3,) * len(sites)
    if not sites:
        return KrausChannel((), (np.eye(1),))
    if kind == "replace":
        return replace_channel(sites, dims)
    if kind == "dephase":
        return dephasing_channel(sites, dims)
    if kind == "unitary":
        return unitary_channel(sites, haar_unitary(3 ** len(sites), rng))
    raise ValueError(f"unknown corruption channel {kind!r}")


def random_noise_spec(n, eps, rng, components=4, kinds=CHANNEL_MENU):
    """Uniform size-floor(eps n) corruption sets with Dirichlet weights."""
    size = math.floor(eps * n + 1e-12)
    probs = rng.dirichlet(np.ones(components))
    probs = probs / probs.sum()
    comps = []
    for p in probs:
        sites = tuple(sorted(int(s) for s in rng.choice(n, size=size, replace=False)))
        kind = kinds[int(rng.integers(len(kinds)))]
        comps.append(NoiseComponent(float(p), sites, corruption_channel(kind, sites, rng)))
    fix = 1.0 - sum(c.probability for c in comps)
    comps[-1] = NoiseComponent(comps[-1].probability + fix, comps[-1].sites, comps[-1].channel)
    return NoisyGroundStateSpec(n, eps, tuple(comps))


def iid_noise_spec(n, eps, kind="replace"):
    """Each site hit independently with probability ``eps``, conditioned on at most 2 eps n hits.

    The result is a valid spec with corruption fraction ``2 eps``.
    """
    cap = math.floor(2 * eps * n + 1e-12)
    comps = []
    for size in range(cap + 1):
        weight = eps**size * (1 - eps) ** (n - size)
        for sites in itertools.combinations(range(n), size):
            channel = _product_channel(kind, sites)
            comps.append([weight, sites, channel])
    total = sum(c[0] for c in comps)
    comps = [NoiseComponent(w / total, s, ch) for w, s, ch in comps]
    fix = 1.0 - sum(c.probability for c in comps)
    comps[0] = NoiseComponent(comps[0].probability + fix, comps[0].sites, comps[0].channel)
    return NoisyGroundStateSpec(n, 2 * eps, tuple(comps))


def _product_channel(kind, sites):
    if not sites:
        return KrausChannel((), (np.eye(1),))
    single = corruption_channel(kind, (0,))
    ops = [np.eye(1, dtype=complex)]
    for _ in sites:
        ops = [np.kron(a, b) for a in ops for b in single.kraus]
    return KrausChannel(tuple(sites), tuple(ops))


@dataclass(frozen=True)
class NoisyGroundState:
    """``sum_l p_l (N_l (x) id)(|Psi><Psi|)``, evaluated lazily on small site subsets."""

    psi: SparseQutritState
    spec: NoisyGroundStateSpec

    @property
    def n(self):
        return self.psi.n

    def component_reduced(self, index, sites):
        comp = self.spec.components[index]
        sites = list(sites)
        extra = [s for s in comp.sites if s not in sites]
        window = sites + extra
        rho = self.psi.reduced(window)
        dims = (3,) * len(window)
        if comp.channel.support:
            local = [window.index(s) for s in comp.channel.support]
            out = np.zeros_like(rho)
            for k in comp.channel.kraus:
                left = apply_local(rho, dims, local, k)
                out += apply_local(left.conj().T, dims, local, k).conj().T
            rho = out
        if extra:
            rho = DensityOperator(RegisterShape(dims), rho, check_psd=False)
            rho = partial_trace(rho, list(range(len(sites), len(window)))).matrix
        return rho

    def reduced(self, sites):
        return sum(c.probability * self.component_reduced(i, sites)
                   for i, c in enumerate(self.spec.components))

    def to_density_operator(self):
        if 3**self.n > 729:
            raise DimensionError("full density operator only for n <= 6")
        return DensityOperator(RegisterShape.uniform(self.n, 3), self.reduced(range(self.n)))


def make_noisy_ground_state(h, spec):
    if spec.n != h.n:
        raise DimensionError(f"spec for n = {spec.n} but Hamiltonian has n = {h.n}")
    return NoisyGroundState(h.ground_state(), spec)


def good_indices(spec):
    """Sites whose total corruption probability is at most ``2 eps``."""
    w = spec.site_weights()
    return tuple(int(i) for i in np.flatnonzero(w <= 2 * spec.eps + 1e-12))


@dataclass(frozen=True)
class InequalityReport:
    i: int
    j: int
    eps: float
    joint: float
    a_value: float
    b_value: float
    indices_good: bool

    @property
    def joint_ok(self):
        return self.joint <= 4 * self.eps + ATOL

    @property
    def marginals_ok(self):
        floor = 0.5 - 8 * self.eps - ATOL
        return self.a_value >= floor and self.b_value >= floor

    @property
    def ok(self):
        return self.joint_ok and self.marginals_ok


def _expect(rho, op):
    return float(np.trace(rho @ op).real)


def verify_lngs_inequalities(sigma, i, j, eps):
    """Measure ``Tr(A_i B_j sigma)``, ``Tr(A_i sigma)`` and ``Tr(B_j sigma)``."""
    if not i < j:
        raise ValueError("need i < j")
    rho = sigma.reduced([i, j])
    a = _expect(rho, np.kron(A_LOCAL, np.eye(3)))
    b = _expect(rho, np.kron(np.eye(3), B_LOCAL))
    joint = _expect(rho, np.kron(A_LOCAL, B_LOCAL))
    good = set(good_indices(sigma.spec))
    return InequalityReport(i, j, eps, joint, a, b, i in good and j in good)


@dataclass(frozen=True)
class Certificate:
    depth_bound: float
    margin: float


def depth_bound_certificate(n, eps, delta):
    """Depth lower bound ``(1/2) log2(n/2)`` and the margin that makes shallow states contradictory."""
    if not 0 <= eps < EPS_LIMIT:
        raise ValueError(f"eps = {eps} outside 0 <= eps < 1/48")
    if not 0 <= delta < 1 / 8 - 6 * eps:
        raise ValueError(f"delta = {delta} outside 0 <= delta < 1/8 - 6 eps")
    if n < 2:
        raise ValueError("n must be >= 2")
    margin = (0.5 - 8 * eps - delta) ** 2 - delta - 4 * eps
    return Certificate(0.5 * math.log2(n / 2), margin)


@dataclass(frozen=True)
class AdversaryReport:
    n: int
    depth: int
    samples: int
    pairs_checked: int
    max_factorization_gap: float
    precondition_met: bool
    shadow_ok: bool
    strong_marginal_pairs: int
    min_joint_given_strong: float | None


def low_depth_adversary(n, depth, rng, samples=20, threshold=0.45):
    """Check factorization on random depth-``depth`` qutrit states for pairs outside the shadow."""
    worst = 0.0
    pairs = 0
    strong = 0
    min_joint = None
    shadow_ok = True
    dims = (3,) * n
    for _ in range(samples):
        c, layering = random_layered_circuit(n, depth, rng, q=3)
        psi = c.run(StateVector.basis(c.shape, (0,) * n)).amplitudes
        for i in range(n):
            report = effect_zone_and_shadow(layering, [i])
            shadow_ok &= len(report.shadow) <= 2 ** (2 * depth + 1)
            a_psi = apply_local(psi, dims, (i,), A_LOCAL)
            ea = float(np.vdot(psi, a_psi).real)
            for j in range(i + 1, n):
                if j in report.shadow:
                    continue
                b_psi = apply_local(psi, dims, (j,), B_LOCAL)
                eb = float(np.vdot(psi, b_psi).real)
                joint = float(np.vdot(psi, apply_local(a_psi, dims, (j,), B_LOCAL)).real)
                worst = max(worst, abs(joint - ea * eb))
                pairs += 1
                if ea >= threshold and eb >= threshold:
                    strong += 1
                    min_joint = joint if min_joint is None else min(min_joint, joint)
    return AdversaryReport(
        n, depth, samples, pairs, worst,
        depth < 0.5 * math.log2(n / 2), shadow_ok, strong, min_joint,
    )
