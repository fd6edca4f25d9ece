"""Canonical and Tucker tensor containers with the rank-reduction pipeline.

A rank-R canonical tensor stores a weight vector ``xi`` (length R) and three
side matrices ``A[l]`` of shape (n_l, R); entry (i,j,k) is
``sum_q xi[q] * A[0][i,q] * A[1][j,q] * A[2][k,q]``.  Rank reduction goes
canonical -> Tucker (reduced higher-order SVD of the side matrices) ->
canonical (two-level SVD of the Tucker core), never materializing the full
array.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericError

# column block size for chunked Khatri-Rao contractions, ~3e7 doubles
_CHUNK_NUMEL = 3.2e7


@dataclass
class CanonicalTensor3:
    """Rank-R separable 3D tensor: weights plus one side matrix per mode.

    Parameters
    ----------
    weights : (R,) ndarray
        Term weights; may carry either sign.  R = 0 encodes the zero tensor.
    factors : tuple of three (n_l, R) ndarrays
        Side matrices, one column per term.
    """

    weights: np.ndarray
    factors: tuple

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.factors = tuple(np.asarray(A, dtype=float) for A in self.factors)
        if len(self.factors) != 3:
            raise ConfigError("canonical tensor needs exactly three side matrices")
        R = self.weights.shape[0]
        for A in self.factors:
            if A.ndim != 2 or A.shape[1] != R:
                raise ConfigError("side matrix shape does not match rank %d" % R)

    @property
    def rank(self):
        return self.weights.shape[0]

    @property
    def shape(self):
        return tuple(A.shape[0] for A in self.factors)


def zero_canonical(shape):
    """Rank-0 canonical tensor of the given mode sizes."""
    return CanonicalTensor3(np.zeros(0), tuple(np.zeros((n, 0)) for n in shape))


@dataclass
class TuckerTensor3:
    """Orthogonal-factor compressed tensor: core plus orthonormal factors.

    ``factors[l]`` has shape (n_l, r_l) with orthonormal columns; ``core`` is
    the dense r1 x r2 x r3 array.
    """

    core: np.ndarray
    factors: tuple

    def __post_init__(self):
        self.core = np.asarray(self.core, dtype=float)
        self.factors = tuple(np.asarray(U, dtype=float) for U in self.factors)
        for l, U in enumerate(self.factors):
            if U.shape[1] != self.core.shape[l]:
                raise ConfigError("factor %d does not match core shape" % l)

    @property
    def ranks(self):
        return self.core.shape

    @property
    def shape(self):
        return tuple(U.shape[0] for U in self.factors)


def eval_entry(t, i):
    """Evaluate one entry of a canonical tensor in O(R).

    Parameters
    ----------
    t : CanonicalTensor3
    i : sequence of three ints

    Returns
    -------
    float
    """
    i1, i2, i3 = i
    n1, n2, n3 = t.shape
    if not (0 <= i1 < n1 and 0 <= i2 < n2 and 0 <= i3 < n3):
        raise ConfigError("index %r out of range for shape %r" % (tuple(i), t.shape))
    if t.rank == 0:
        return 0.0
    return float(np.dot(t.weights,
                        t.factors[0][i1] * t.factors[1][i2] * t.factors[2][i3]))


def eval_entries(t, idx):
    """Evaluate a batch of entries; ``idx`` is an (S, 3) integer array."""
    idx = np.asarray(idx, dtype=int).reshape(-1, 3)
    if t.rank == 0 or idx.size == 0:
        return np.zeros(len(idx))
    for ax in range(3):
        if idx[:, ax].min() < 0 or idx[:, ax].max() >= t.shape[ax]:
            raise ConfigError("entry index out of range")
    return np.einsum("sk,sk,sk,k->s",
                     t.factors[0][idx[:, 0]],
                     t.factors[1][idx[:, 1]],
                     t.factors[2][idx[:, 2]],
                     t.weights)


def dense(t):
    """Materialize a canonical tensor as a dense array (chunked over terms)."""
    n1, n2, n3 = t.shape
    out = np.zeros((n1, n2, n3))
    step = max(1, int(_CHUNK_NUMEL // max(1, n1 * n2)))
    for a in range(0, t.rank, step):
        sl = slice(a, a + step)
        W1 = t.factors[0][:, sl] * t.weights[sl]
        kab = np.einsum("ak,bk->kab", W1, t.factors[1][:, sl])
        out += np.tensordot(kab, t.factors[2][:, sl], axes=(0, 1))
    return out


def dense_slice(t, axis, index):
    """One full 2D slice of a canonical tensor, fixing ``axis`` (0..2) at ``index``."""
    if axis not in (0, 1, 2):
        raise ConfigError("axis must be 0, 1 or 2")
    if not (0 <= index < t.shape[axis]):
        raise ConfigError("slice index out of range")
    rest = [l for l in range(3) if l != axis]
    if t.rank == 0:
        return np.zeros((t.shape[rest[0]], t.shape[rest[1]]))
    w = t.weights * t.factors[axis][index]
    return np.einsum("k,ak,bk->ab", w, t.factors[rest[0]], t.factors[rest[1]])


def tucker_dense(t):
    """Materialize a Tucker tensor: three mode products of the core."""
    X = np.tensordot(t.factors[0], t.core, axes=(1, 0))
    X = np.tensordot(X, t.factors[1], axes=(1, 1)).transpose(0, 2, 1)
    return np.tensordot(X, t.factors[2], axes=(2, 1))


def canonical_axpy(alpha, x, y):
    """Return alpha*x + y as a canonical tensor of rank R_x + R_y."""
    if x.shape != y.shape:
        raise ConfigError("mode sizes differ: %r vs %r" % (x.shape, y.shape))
    w = np.concatenate([alpha * x.weights, y.weights])
    A = tuple(np.concatenate([x.factors[l], y.factors[l]], axis=1) for l in range(3))
    return CanonicalTensor3(w, A)


def frobenius_norm(t):
    """Frobenius norm via Gram matrices of the side matrices, O(R^2 n)."""
    if t.rank == 0:
        return 0.0
    G = t.factors[0].T @ t.factors[0]
    G = G * (t.factors[1].T @ t.factors[1])
    G = G * (t.factors[2].T @ t.factors[2])
    s = float(t.weights @ G @ t.weights)
    # cancellation can leave a tiny negative residue
    return np.sqrt(max(s, 0.0))


def c2t_rhosvd(t, eps):
    """Canonical -> Tucker by reduced higher-order SVD of the side matrices.

    Each side matrix is scaled column-wise by ``|xi|**(1/3)`` (the sign is
    carried in mode 1) so the three mode SVDs see the same term magnitudes;
    singular values with ``sigma > eps * sigma_max`` are kept per mode.  The
    core is assembled from the projected columns without forming the dense
    tensor.

    Parameters
    ----------
    t : CanonicalTensor3
    eps : float
        Relative singular-value truncation threshold, > 0.

    Returns
    -------
    TuckerTensor3
    """
    if eps <= 0:
        raise ConfigError("eps must be positive")
    if t.rank == 0:
        raise ConfigError("cannot compress an empty tensor")
    for A in t.factors:
        if not np.all(np.isfinite(A)):
            raise NumericError("side matrix contains non-finite values")
    if not np.all(np.isfinite(t.weights)):
        raise NumericError("weight vector contains non-finite values")

    w = np.abs(t.weights) ** (1.0 / 3.0)
    sgn = np.sign(t.weights)
    Us = []
    for l in range(3):
        M = t.factors[l] * w
        U, s, _ = np.linalg.svd(M, full_matrices=False)
        r = int(np.sum(s > eps * s[0])) if s.size and s[0] > 0 else 0
        Us.append(U[:, :max(r, 1)])

    P = [Us[0].T @ (t.factors[0] * (w * sgn)),
         Us[1].T @ (t.factors[1] * w),
         Us[2].T @ (t.factors[2] * w)]
    r1, r2, r3 = (p.shape[0] for p in P)
    core = np.zeros((r1, r2, r3))
    step = max(1, int(_CHUNK_NUMEL // max(1, r1 * r2)))
    for a in range(0, t.rank, step):
        sl = slice(a, a + step)
        kab = np.einsum("ak,bk->kab", P[0][:, sl], P[1][:, sl])
        core += np.tensordot(kab, P[2][:, sl], axes=(0, 1))
    return TuckerTensor3(core, tuple(Us))


def t2c(t, eps):
    """Tucker -> canonical via a two-level SVD of the core.

    The core is matricized along the mode giving the smallest canonical rank
    bound (ties broken by mode order); each retained right singular vector is
    reshaped and SVD-factored again, so every kept triple becomes one
    canonical term.  Terms are truncated against a global Frobenius budget of
    ``eps * ||core||_F``, which is exact because the triples form an
    orthonormal system.

    Returns
    -------
    CanonicalTensor3 with rank <= min(r1*r2, r2*r3, r1*r3).
    """
    if eps <= 0:
        raise ConfigError("eps must be positive")
    G = t.core
    if not np.all(np.isfinite(G)):
        raise NumericError("core contains non-finite values")
    r = G.shape
    if min(r) == 0 or not np.any(G):
        return zero_canonical(t.shape)

    cost = [r[0] * min(r[1], r[2]), r[1] * min(r[0], r[2]), r[2] * min(r[0], r[1])]
    m = int(np.argmin(cost))
    rest = [l for l in range(3) if l != m]
    Gm = np.moveaxis(G, m, 0).reshape(r[m], -1)
    U, tau, Vt = np.linalg.svd(Gm, full_matrices=False)
    total = float(np.sum(tau ** 2))

    terms = []
    for j in range(tau.shape[0]):
        if tau[j] <= 0:
            continue
        Pj, s, Qjt = np.linalg.svd(Vt[j].reshape(r[rest[0]], r[rest[1]]),
                                   full_matrices=False)
        for i in range(s.shape[0]):
            wji = tau[j] * s[i]
            if wji > 0:
                terms.append((wji, j, Pj[:, i], Qjt[i]))

    terms.sort(key=lambda z: z[0])
    budget = eps * eps * total
    acc, cut = 0.0, 0
    for wji, _, _, _ in terms:
        if acc + wji * wji <= budget:
            acc += wji * wji
            cut += 1
        else:
            break
    keep = terms[cut:]
    if not keep:
        return zero_canonical(t.shape)
    keep.sort(key=lambda z: -z[0])

    weights = np.array([z[0] for z in keep])
    core_fac = [None] * 3
    core_fac[m] = np.stack([U[:, z[1]] for z in keep], axis=1)
    core_fac[rest[0]] = np.stack([z[2] for z in keep], axis=1)
    core_fac[rest[1]] = np.stack([z[3] for z in keep], axis=1)
    A = tuple(t.factors[l] @ core_fac[l] for l in range(3))
    return CanonicalTensor3(weights, A)


def reduce_rank(t, eps):
    """Compress a canonical tensor by RHOSVD followed by the core transform.

    Returns the input unchanged when compression does not lower the rank, so
    the result never has more terms than the input.
    """
    if t.rank == 0:
        return t
    out = t2c(c2t_rhosvd(t, eps), eps)
    return out if out.rank < t.rank else t


_MAGIC = b"CT3\x00"


def save_canonical(t, path):
    """Write a canonical tensor to ``path``.

    Byte layout: 4-byte magic ``b"CT3\\x00"``, four little-endian uint64
    (n1, n2, n3, R), then little-endian float64 arrays back to back: xi
    (R values), A1, A2, A3 each written column-major (n_l * R values).
    """
    n1, n2, n3 = t.shape
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<4Q", n1, n2, n3, t.rank))
        f.write(np.ascontiguousarray(t.weights, dtype="<f8").tobytes())
        for A in t.factors:
            f.write(np.asarray(A, dtype="<f8").tobytes(order="F"))


def load_canonical(path):
    """Read a canonical tensor written by ``save_canonical``."""
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise DataError("not a canonical tensor file: %s" % path)
        n1, n2, n3, R = struct.unpack("<4Q", f.read(32))
        xi = np.frombuffer(f.read(8 * R), dtype="<f8").astype(float)
        A = []
        for n in (n1, n2, n3):
            buf = np.frombuffer(f.read(8 * n * R), dtype="<f8")
            A.append(buf.reshape((n, R), order="F").astype(float))
    return CanonicalTensor3(xi, tuple(A))
