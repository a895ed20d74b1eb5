"""Complex linear algebra over multi-qudit registers.

Everything here works on plain numpy arrays (and scipy sparse matrices for
Hamiltonian terms) wrapped in a few small frozen dataclasses that carry the
register layout.  Site indices are 0-based and the tensor ordering is
big-endian: site 0 is the leftmost factor.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

ATOL = 1e-10
EIG_RESIDUAL = 1e-8
DEFAULT_DENSE_CAP = 2**14
# full-space dimension above which eigensolve switches to Lanczos
DENSE_EIGH_LIMIT = 2500

TAGS = ("in", "out", "prop", "stab", "other")


class DimensionError(ValueError):
    """Register shapes or supports do not line up."""


class ConvergenceError(RuntimeError):
    """An iterative eigensolve did not reach the requested residual."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def dense_cap():
    """Largest full Hilbert-space dimension we are willing to materialize."""
    value = os.environ.get("CLOCKFORGE_DENSE_CAP")
    return int(value) if value else DEFAULT_DENSE_CAP


@dataclass(frozen=True)
class RegisterShape:
    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if any(d < 2 for d in dims):
            raise DimensionError(f"every site dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def uniform(cls, n, q=2):
        return cls((q,) * n)

    def __len__(self):
        return len(self.dims)

    @property
    def dim(self):
        return math.prod(self.dims)

    def __add__(self, other):
        return RegisterShape(self.dims + other.dims)

    def check_sites(self, sites):
        sites = tuple(int(s) for s in sites)
        if len(set(sites)) != len(sites):
            raise DimensionError(f"repeated site in {sites}")
        for s in sites:
            if not 0 <= s < len(self.dims):
                raise DimensionError(f"site {s} out of range for {len(self.dims)} sites")
        return sites

    def drop(self, sites):
        sites = set(self.check_sites(sites))
        return RegisterShape(tuple(d for i, d in enumerate(self.dims) if i not in sites))


def _as_shape(shape):
    if isinstance(shape, RegisterShape):
        return shape
    return RegisterShape(tuple(shape))


@dataclass(frozen=True)
class StateVector:
    shape: RegisterShape
    amplitudes: np.ndarray
    subnormalized: bool = False

    def __post_init__(self):
        shape = _as_shape(self.shape)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != shape.dim:
            raise DimensionError(f"{amps.size} amplitudes for a register of dimension {shape.dim}")
        if not self.subnormalized and abs(np.linalg.norm(amps) - 1.0) > ATOL:
            raise ValueError(f"state is not normalized (norm {np.linalg.norm(amps):.12f})")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, dims, digits):
        shape = _as_shape(dims)
        amps = np.zeros(shape.dim, dtype=complex)
        amps[np.ravel_multi_index(tuple(digits), shape.dims)] = 1.0
        return cls(shape, amps)

    def density(self):
        return DensityOperator(self.shape, np.outer(self.amplitudes, self.amplitudes.conj()))

    def inner(self, other):
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class DensityOperator:
    shape: RegisterShape
    matrix: np.ndarray
    check_psd: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        shape = _as_shape(self.shape)
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (shape.dim, shape.dim):
            raise DimensionError(f"matrix of shape {mat.shape} for a register of dimension {shape.dim}")
        if np.abs(mat - mat.conj().T).max(initial=0.0) > ATOL:
            raise ValueError("density operator is not Hermitian")
        if abs(np.trace(mat) - 1.0) > ATOL:
            raise ValueError(f"density operator has trace {np.trace(mat).real:.12f}")
        if self.check_psd and shape.dim <= 4096:
            lowest = np.linalg.eigvalsh(mat)[0]
            if lowest < -ATOL:
                raise ValueError(f"density operator has eigenvalue {lowest:.3e}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "matrix", mat)


@dataclass(frozen=True)
class Term:
    """One local Hermitian term: ``matrix`` acts on ``support`` in that order."""

    support: tuple
    matrix: object
    tag: str = "other"

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(s) for s in self.support))
        if self.tag not in TAGS:
            raise ValueError(f"unknown term tag {self.tag!r}")
        if len(set(self.support)) != len(self.support):
            raise DimensionError(f"repeated site in support {self.support}")

    def dense(self):
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)


@dataclass(frozen=True)
class HermitianTermSum:
    shape: RegisterShape
    terms: tuple

    def __post_init__(self):
        shape = _as_shape(self.shape)
        terms = tuple(self.terms)
        for term in terms:
            shape.check_sites(term.support)
            local = math.prod(shape.dims[s] for s in term.support)
            if term.matrix.shape != (local, local):
                raise DimensionError(
                    f"term on {term.support} has matrix {term.matrix.shape}, expected {(local, local)}"
                )
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "terms", terms)

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    @property
    def locality(self):
        return max((len(t.support) for t in self.terms), default=0)

    def with_tags(self, *tags):
        return HermitianTermSum(self.shape, tuple(t for t in self.terms if t.tag in tags))

    def validate(self, atol=ATOL):
        """Check Hermiticity and the unit spectral-norm bound of every term."""
        for i, term in enumerate(self.terms):
            m = term.dense()
            if np.abs(m - m.conj().T).max(initial=0.0) > atol:
                raise ValueError(f"term {i} ({term.tag}) on {term.support} is not Hermitian")
            norm = np.abs(np.linalg.eigvalsh(m)).max(initial=0.0)
            if norm > 1 + atol:
                raise ValueError(f"term {i} ({term.tag}) has spectral norm {norm:.6f} > 1")
        return self

    def to_sparse(self):
        if self.shape.dim > dense_cap():
            raise DimensionError(
                f"dimension {self.shape.dim} exceeds the dense cap {dense_cap()}"
            )
        total = sp.csr_matrix((self.shape.dim, self.shape.dim), dtype=complex)
        for term in self.terms:
            total = total + embed_operator(term.matrix, term.support, self.shape.dims)
        return total


def _site_offsets(dims, sites):
    """Flat-index offset of every configuration of ``sites`` inside ``dims``."""
    strides = [math.prod(dims[s + 1:]) for s in range(len(dims))]
    if not sites:
        return np.zeros(1, dtype=np.int64)
    grids = np.indices([dims[s] for s in sites]).reshape(len(sites), -1)
    return sum(grids[k].astype(np.int64) * strides[s] for k, s in enumerate(sites))


def embed_operator(op, support, dims):
    """Sparse matrix of ``op`` (acting on ``support``) on the full register."""
    dims = tuple(dims)
    support = tuple(support)
    rest = tuple(s for s in range(len(dims)) if s not in support)
    coo = sp.coo_matrix(op)
    local = _site_offsets(dims, support)
    others = _site_offsets(dims, rest)
    rows = (local[coo.row][:, None] + others[None, :]).ravel()
    cols = (local[coo.col][:, None] + others[None, :]).ravel()
    data = np.repeat(coo.data.astype(complex), others.size)
    full = math.prod(dims)
    return sp.csr_matrix((data, (rows, cols)), shape=(full, full))


def apply_local(vec, dims, support, op):
    """Apply ``op`` on ``support`` to a vector (or to every column of a matrix)."""
    dims = tuple(dims)
    support = tuple(support)
    arr = np.asarray(vec)
    t = arr.reshape(dims + (-1,))
    k = len(support)
    t = np.moveaxis(t, support, range(k))
    head = t.shape[:k]
    tail = t.shape[k:]
    flat = t.reshape(math.prod(head), -1)
    flat = op @ flat
    t = np.asarray(flat).reshape(head + tail)
    t = np.moveaxis(t, range(k), support)
    return t.reshape(arr.shape)


def tensor_product(a, b):
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(a.shape + b.shape, np.kron(a.amplitudes, b.amplitudes),
                           subnormalized=a.subnormalized or b.subnormalized)
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(a.shape + b.shape, np.kron(a.matrix, b.matrix))
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def partial_trace(rho, traced_sites):
    """Trace out ``traced_sites``; the remaining sites keep their order."""
    traced = sorted(rho.shape.check_sites(traced_sites))
    dims = rho.shape.dims
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    for offset, s in enumerate(reversed(traced)):
        alive = n - offset
        t = np.trace(t, axis1=s, axis2=s + alive)
    kept = rho.shape.drop(traced)
    return DensityOperator(kept, t.reshape(kept.dim, kept.dim), check_psd=False)


def reduced_density(psi, keep):
    """Reduced state of a pure vector on ``keep`` (ordered as given)."""
    shape = psi.shape
    keep = shape.check_sites(keep)
    rest = [s for s in range(len(shape)) if s not in keep]
    t = np.transpose(psi.amplitudes.reshape(shape.dims), list(keep) + rest)
    kept = RegisterShape(tuple(shape.dims[s] for s in keep))
    m = t.reshape(kept.dim, -1)
    return DensityOperator(kept, m @ m.conj().T, check_psd=False)


def _matrix(x):
    return x.matrix if isinstance(x, DensityOperator) else np.asarray(x)


def trace_norm(a):
    a = np.asarray(a)
    if np.allclose(a, a.conj().T, atol=ATOL):
        return float(np.abs(np.linalg.eigvalsh((a + a.conj().T) / 2)).sum())
    return float(np.linalg.svd(a, compute_uv=False).sum())


def trace_distance(rho, sigma):
    """``||rho - sigma||_1``, a number in [0, 2] for states."""
    if isinstance(rho, DensityOperator) and isinstance(sigma, DensityOperator):
        if rho.shape != sigma.shape:
            raise DimensionError(f"shape mismatch {rho.shape.dims} vs {sigma.shape.dims}")
    a, b = _matrix(rho), _matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return trace_norm(a - b)


def pure_trace_distance(a, b):
    """Closed form ``2 sqrt(1 - |<a|b>|^2)`` for normalized pure states."""
    a = a.amplitudes if isinstance(a, StateVector) else np.asarray(a)
    b = b.amplitudes if isinstance(b, StateVector) else np.asarray(b)
    overlap = min(abs(np.vdot(a, b)) ** 2, 1.0)
    return 2.0 * math.sqrt(1.0 - overlap)


@dataclass(frozen=True)
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    method: str


def eigensolve_hermitian(h, how_many=1, residual_tol=EIG_RESIDUAL, dense_limit=DENSE_EIGH_LIMIT):
    """Lowest ``how_many`` eigenpairs of a term sum, in ascending order.

    Small registers go through ``numpy.linalg.eigh``; larger ones (still below
    the dense cap) through ARPACK's Lanczos on the materialized sparse matrix.
    """
    mat = h.to_sparse() if isinstance(h, HermitianTermSum) else h
    dim = mat.shape[0]
    how_many = min(how_many, dim)
    if dim <= dense_limit:
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        vals, vecs = np.linalg.eigh(dense)
        vals, vecs = vals[:how_many], vecs[:, :how_many]
        method = "dense"
    else:
        # a buffer of extra pairs keeps degenerate copies from being skipped
        k = min(2 * how_many + 8, dim - 2)
        vals, vecs = spla.eigsh(mat, k=k, which="SA", tol=1e-12, maxiter=20 * dim)
        order = np.argsort(vals)
        vals, vecs = vals[order][:how_many], vecs[:, order][:, :how_many]
        method = "lanczos"
    res = np.linalg.norm(mat @ vecs - vecs * vals[None, :], axis=0)
    worst = float(res.max(initial=0.0))
    if worst > residual_tol:
        raise ConvergenceError("eigensolve residual above tolerance", worst)
    return EigenResult(np.asarray(vals, dtype=float), vecs, res, method)


def ground_space(h, gap_tol=1e-8, max_dim=16):
    """Orthonormal basis of the lowest eigenspace (eigenvalues within ``gap_tol``)."""
    res = eigensolve_hermitian(h, how_many=max_dim + 1)
    keep = res.values <= res.values[0] + gap_tol
    return res.values[0], res.vectors[:, keep], res


def expectation(h, state):
    """Real part of ``Tr(H rho)`` (or ``<psi|H|psi>``), summed term by term."""
    if isinstance(h, Term):
        h = HermitianTermSum(state.shape, (h,))
    if h.shape != state.shape:
        raise DimensionError(f"shape mismatch {h.shape.dims} vs {state.shape.dims}")
    total = 0.0 + 0.0j
    dims = state.shape.dims
    if isinstance(state, StateVector):
        psi = state.amplitudes
        for term in h.terms:
            total += np.vdot(psi, apply_local(psi, dims, term.support, term.matrix))
    else:
        rho = state.matrix
        for term in h.terms:
            total += np.trace(apply_local(rho, dims, term.support, term.matrix))
    if abs(total.imag) > ATOL * max(1.0, abs(total.real)):
        raise ValueError(f"expectation has imaginary part {total.imag:.3e}")
    return float(total.real)


# --- channels -----------------------------------------------------------------


@dataclass(frozen=True)
class KrausChannel:
    """A CPTP map given by Kraus operators acting on ``support``."""

    support: tuple
    kraus: tuple

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(s) for s in self.support))
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        d = ops[0].shape[1]
        completeness = sum(k.conj().T @ k for k in ops)
        if np.abs(completeness - np.eye(d)).max() > ATOL:
            raise ValueError("Kraus operators do not satisfy sum K^dag K = I")
        object.__setattr__(self, "kraus", ops)


def apply_channel(rho, channel):
    dims = rho.shape.dims
    rho.shape.check_sites(channel.support)
    out = np.zeros_like(rho.matrix)
    for k in channel.kraus:
        left = apply_local(rho.matrix, dims, channel.support, k)
        out += apply_local(left.conj().T, dims, channel.support, k).conj().T
    return DensityOperator(rho.shape, out, check_psd=False)


def identity_channel(support, dims):
    d = math.prod(dims)
    return KrausChannel(support, (np.eye(d),))


def replace_channel(support, dims):
    """Replace the sites with the maximally mixed state (an erasure)."""
    d = math.prod(dims)
    ops = []
    for a in range(d):
        for b in range(d):
            k = np.zeros((d, d), dtype=complex)
            k[a, b] = 1.0 / math.sqrt(d)
            ops.append(k)
    return KrausChannel(support, tuple(ops))


def dephasing_channel(support, dims):
    d = math.prod(dims)
    return KrausChannel(support, tuple(np.diag(np.eye(d)[a]).astype(complex) for a in range(d)))


def unitary_channel(support, u):
    return KrausChannel(support, (np.asarray(u, dtype=complex),))


def haar_unitary(d, rng):
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))[None, :]


def random_channel(support, dims, rng, n_kraus=None):
    """Random CPTP map from a Haar isometry (Stinespring dilation)."""
    d = math.prod(dims)
    if n_kraus is None:
        n_kraus = int(rng.integers(1, d * d + 1))
    u = haar_unitary(d * n_kraus, rng)
    iso = u[:, :d]
    ops = tuple(iso[i * d:(i + 1) * d, :] for i in range(n_kraus))
    return KrausChannel(support, ops)


def random_state(dims, rng):
    shape = _as_shape(dims)
    z = rng.standard_normal(shape.dim) + 1j * rng.standard_normal(shape.dim)
    return StateVector(shape, z / np.linalg.norm(z))
