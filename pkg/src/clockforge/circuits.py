"""Gate-level circuits, greedy layering, and lightcone analyses."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    ATOL,
    DimensionError,
    RegisterShape,
    StateVector,
    Term,
    apply_local,
    haar_unitary,
)

_S2 = 1 / math.sqrt(2)

NAMED_GATES = {
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.diag([1, 1j]).astype(complex),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}
IDENTITY_LABELS = ("I", "identity")


def ry(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True)
class Gate:
    label: str
    support: tuple
    unitary: np.ndarray

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        if not support:
            raise ValueError("a gate needs at least one site")
        if len(set(support)) != len(support):
            raise DimensionError(f"repeated site in gate support {support}")
        u = np.asarray(self.unitary, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise DimensionError(f"gate {self.label!r} matrix is not square")
        if np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() > ATOL:
            raise ValueError(f"gate {self.label!r} is not unitary")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "unitary", u)

    @property
    def wide(self):
        return len(self.support) > 2

    @property
    def is_identity(self):
        return self.label in IDENTITY_LABELS

    def dagger(self):
        label = self.label if self.is_identity else self.label + "^dag"
        return Gate(label, self.support, self.unitary.conj().T)

    def shifted(self, mapping):
        """Same gate on relabelled sites (``mapping[old] = new``)."""
        return Gate(self.label, tuple(mapping[s] for s in self.support), self.unitary)


def named_gate(label, support, dims=None):
    """Build a gate from its name; identities adapt to the site dimensions."""
    support = tuple(support)
    if label in IDENTITY_LABELS:
        d = math.prod(dims[s] for s in support) if dims is not None else 2 ** len(support)
        return Gate("I", support, np.eye(d, dtype=complex))
    if label not in NAMED_GATES:
        raise ValueError(f"unknown gate name {label!r}; give an explicit unitary")
    return Gate(label, support, NAMED_GATES[label])


@dataclass(frozen=True)
class Circuit:
    shape: RegisterShape
    gates: tuple
    witness_count: int = 0

    def __post_init__(self):
        shape = self.shape if isinstance(self.shape, RegisterShape) else RegisterShape(tuple(self.shape))
        gates = tuple(self.gates)
        for g in gates:
            shape.check_sites(g.support)
            local = math.prod(shape.dims[s] for s in g.support)
            if g.unitary.shape[0] != local:
                raise DimensionError(
                    f"gate {g.label!r} on {g.support} has dimension {g.unitary.shape[0]}, expected {local}"
                )
        if not 0 <= self.witness_count <= len(shape):
            raise DimensionError(f"witness_count {self.witness_count} outside 0..{len(shape)}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "gates", gates)

    @property
    def n(self):
        return len(self.shape)

    @property
    def size(self):
        return len(self.gates)

    @property
    def witness_sites(self):
        return tuple(range(self.witness_count))

    @property
    def ancilla_sites(self):
        return tuple(range(self.witness_count, self.n))

    @property
    def has_wide_gates(self):
        return any(g.wide for g in self.gates)

    def initial_state(self, witness=None):
        """``witness`` on the first sites tensored with zeros on the ancilla."""
        zeros = np.zeros(math.prod(self.shape.dims[self.witness_count:]), dtype=complex)
        zeros[0] = 1.0
        if self.witness_count == 0:
            if witness is not None and witness.shape.dim != 1:
                raise DimensionError("this circuit takes no witness")
            return StateVector(self.shape, zeros)
        if witness is None:
            raise DimensionError(f"circuit needs a witness on {self.witness_count} sites")
        want = self.shape.dims[: self.witness_count]
        if not isinstance(witness, StateVector):
            witness = StateVector(want, witness)
        if witness.shape.dims != want:
            raise DimensionError(f"witness shape {witness.shape.dims} does not match {want}")
        return StateVector(self.shape, np.kron(witness.amplitudes, zeros),
                           subnormalized=witness.subnormalized)

    def apply_gate(self, index, vec):
        g = self.gates[index]
        return apply_local(vec, self.shape.dims, g.support, g.unitary)

    def run(self, state):
        vec = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
        for i in range(self.size):
            vec = self.apply_gate(i, vec)
        return StateVector(self.shape, vec, subnormalized=True)

    def snapshots(self, state):
        """``[psi_0, ..., psi_T]`` with ``psi_t = C_t psi_{t-1}``."""
        vec = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
        out = [vec]
        for i in range(self.size):
            vec = self.apply_gate(i, vec)
            out.append(vec)
        return out

    def unitary(self):
        u = np.eye(self.shape.dim, dtype=complex)
        for g in self.gates:
            u = apply_local(u, self.shape.dims, g.support, g.unitary)
        return u

    def then(self, other):
        if other.shape != self.shape:
            raise DimensionError("cannot concatenate circuits on different registers")
        return Circuit(self.shape, self.gates + other.gates, self.witness_count)

    def dagger(self):
        return Circuit(self.shape, tuple(g.dagger() for g in reversed(self.gates)), self.witness_count)

    # JSON interchange

    def to_json(self):
        gates = []
        for g in self.gates:
            entry = {"label": g.label, "support": list(g.support)}
            builtin = NAMED_GATES.get(g.label)
            if not g.is_identity and (builtin is None or builtin.shape != g.unitary.shape
                                      or not np.allclose(builtin, g.unitary)):
                entry["unitary"] = [[[z.real, z.imag] for z in row] for row in g.unitary]
            gates.append(entry)
        return {"dims": list(self.shape.dims), "witness_count": self.witness_count, "gates": gates}

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        dims = tuple(data["dims"])
        gates = []
        for pos, entry in enumerate(data.get("gates", [])):
            try:
                label = entry.get("label", "U")
                support = tuple(entry["support"])
                if "unitary" in entry:
                    gates.append(Gate(label, support, _parse_matrix(entry["unitary"])))
                else:
                    gates.append(named_gate(label, support, dims))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"gate #{pos}: {exc}") from exc
        return cls(RegisterShape(dims), tuple(gates), int(data.get("witness_count", 0)))


def _parse_matrix(rows):
    """Accept ``[[re, im], ...]`` pairs, plain reals, or ``{"re":, "im":}`` entries."""
    out = []
    for row in rows:
        vals = []
        for z in row:
            if isinstance(z, (list, tuple)):
                vals.append(complex(z[0], z[1]))
            elif isinstance(z, dict):
                vals.append(complex(z.get("re", 0.0), z.get("im", 0.0)))
            else:
                vals.append(complex(z))
        out.append(vals)
    return np.array(out, dtype=complex)


def cat_circuit(n):
    """H on site 0 followed by the CNOT chain ``i -> i+1``."""
    if n < 1:
        raise ValueError("cat circuit needs n >= 1")
    gates = [named_gate("H", (0,))]
    gates += [named_gate("CNOT", (i, i + 1)) for i in range(n - 1)]
    return Circuit(RegisterShape.uniform(n), tuple(gates))


def cat_state(n):
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = _S2
    return StateVector(RegisterShape.uniform(n), amps)


# --- layering -----------------------------------------------------------------


@dataclass(frozen=True)
class Layering:
    circuit: Circuit
    layers: tuple

    @property
    def depth(self):
        return len(self.layers)

    def layer_of(self):
        out = {}
        for j, layer in enumerate(self.layers):
            for g in layer:
                out[g] = j
        return out

    def check(self):
        seen = []
        for layer in self.layers:
            used = set()
            for g in layer:
                sup = set(self.circuit.gates[g].support)
                if used & sup:
                    raise ValueError(f"gates overlap inside a layer: {layer}")
                used |= sup
            seen.extend(layer)
        if sorted(seen) != list(range(self.circuit.size)):
            raise ValueError("layering does not cover each gate exactly once")
        return self

    def ordered_gates(self):
        return [g for layer in self.layers for g in sorted(layer)]


def layerize(c):
    """Greedy earliest-layer assignment; respects the gate order on shared sites."""
    last = {}
    layers = []
    for i, g in enumerate(c.gates):
        j = max((last[s] + 1 for s in g.support if s in last), default=0)
        if j == len(layers):
            layers.append([])
        layers[j].append(i)
        for s in g.support:
            last[s] = j
    return Layering(c, tuple(tuple(layer) for layer in layers))


def layered_circuit(shape, layers):
    """Build a circuit from explicit layers of gates; returns (circuit, layering)."""
    gates = []
    index_layers = []
    for layer in layers:
        idx = []
        for g in layer:
            idx.append(len(gates))
            gates.append(g)
        index_layers.append(tuple(idx))
    c = Circuit(shape, tuple(gates))
    return c, Layering(c, tuple(index_layers)).check()


def _as_layering(obj):
    return obj if isinstance(obj, Layering) else layerize(obj)


# --- lightcones -------------------------------------------------------------


@dataclass(frozen=True)
class LightconeReport:
    target: frozenset
    lightcone_gates: frozenset
    lightcone_support: frozenset
    effect_zone_gates: frozenset = field(default=frozenset())
    shadow: frozenset = field(default=frozenset())
    depth: int = 0

    @property
    def shadow_bound(self):
        return max(len(self.target), 2) * 2 ** (2 * self.depth) if self.depth else len(self.target)

    def to_json(self):
        return {
            "target": sorted(self.target),
            "depth": self.depth,
            "lightcone_gates": sorted(self.lightcone_gates),
            "lightcone_support": sorted(self.lightcone_support),
            "effect_zone_gates": sorted(self.effect_zone_gates),
            "shadow": sorted(self.shadow),
            "shadow_bound": self.shadow_bound,
        }


def lightcone(layering, target_support):
    """Backward closure: gates that can influence the target sites."""
    layering = _as_layering(layering)
    gates = layering.circuit.gates
    target = frozenset(int(s) for s in target_support)
    layering.circuit.shape.check_sites(sorted(target))
    sites = set(target)
    cone = set()
    for layer in reversed(layering.layers):
        hit = [g for g in layer if sites & set(gates[g].support)]
        for g in hit:
            cone.add(g)
            sites |= set(gates[g].support)
    return LightconeReport(target, frozenset(cone), frozenset(sites), depth=layering.depth)


def effect_zone_and_shadow(layering, target_support):
    """Lightcone plus its forward bounce-back and the sites that bounce-back touches."""
    layering = _as_layering(layering)
    gates = layering.circuit.gates
    cone = lightcone(layering, target_support)
    sites = set(cone.lightcone_support)
    zone = set()
    for layer in layering.layers:
        for g in layer:
            if sites & set(gates[g].support):
                zone.add(g)
        for g in layer:
            if g in zone:
                sites |= set(gates[g].support)
    shadow = set(cone.target)
    for g in zone:
        shadow |= set(gates[g].support)
    return LightconeReport(
        cone.target,
        cone.lightcone_gates,
        cone.lightcone_support,
        frozenset(zone),
        frozenset(shadow),
        layering.depth,
    )


def disjoint_lightcones(layering, a_support, b_support):
    """True when the two operators share no site and no lightcone gate."""
    layering = _as_layering(layering)
    a = lightcone(layering, a_support)
    b = lightcone(layering, b_support)
    return not (a.target & b.target) and not (a.lightcone_gates & b.lightcone_gates)


@dataclass(frozen=True)
class FactorizationResult:
    lhs: float
    rhs: float
    gap: float
    disjoint: bool

    @property
    def diagnostic(self):
        """Set when the lightcones overlap, so no factorization is promised."""
        return not self.disjoint


def _expect_local(vec, dims, support, op):
    return complex(np.vdot(vec, apply_local(vec, dims, support, op)))


def factorization_check(c, a, b, traced=(), layering=None):
    """Compare ``Tr(A B rho)`` with ``Tr(A rho) Tr(B rho)`` for the output of ``c``.

    ``rho`` is the circuit output on ``|0...0>`` with ``traced`` sites discarded;
    ``a`` and ``b`` are :class:`Term` objects addressed in the full register.
    """
    layering = layering or layerize(c)
    dims = c.shape.dims
    traced = set(c.shape.check_sites(traced))
    c.shape.check_sites(a.support)
    c.shape.check_sites(b.support)
    if traced & (set(a.support) | set(b.support)):
        raise DimensionError("operators must act on sites that are kept")
    if set(a.support) & set(b.support):
        raise DimensionError("operators must act on disjoint sites")
    psi = c.run(StateVector.basis(c.shape, (0,) * c.n)).amplitudes
    joint = Term(a.support + b.support, np.kron(a.dense(), b.dense()))
    lhs = _expect_local(psi, dims, joint.support, joint.matrix)
    ea = _expect_local(psi, dims, a.support, a.dense())
    eb = _expect_local(psi, dims, b.support, b.dense())
    rhs = ea * eb
    return FactorizationResult(
        float(lhs.real), float(rhs.real), float(abs(lhs - rhs)),
        disjoint_lightcones(layering, a.support, b.support),
    )


def random_layered_circuit(n, depth, rng, q=2, pair_prob=0.7):
    """Random depth-``depth`` circuit of Haar gates on random disjoint pairs/singles."""
    shape = RegisterShape.uniform(n, q)
    layers = []
    for _ in range(depth):
        order = list(rng.permutation(n))
        layer = []
        while order:
            if len(order) >= 2 and rng.random() < pair_prob:
                a, b = int(order.pop()), int(order.pop())
                layer.append(Gate("U", (a, b), haar_unitary(q * q, rng)))
            else:
                a = int(order.pop())
                if rng.random() < 0.5:
                    layer.append(Gate("U", (a,), haar_unitary(q, rng)))
        layers.append(layer)
    return layered_circuit(shape, layers)


def worked_example():
    """Four-site, three-layer circuit with a two-site gate in each of the first two layers."""
    shape = RegisterShape.uniform(4)
    one = np.eye(2, dtype=complex)
    two = np.eye(4, dtype=complex)
    layers = [
        [Gate("U11", (0, 1), two), Gate("U12", (2,), one), Gate("U13", (3,), one)],
        [Gate("U21", (1, 2), two)],
        [Gate("U31", (2,), one), Gate("U32", (3,), one)],
    ]
    return layered_circuit(shape, layers)
