"""Discretized delta splitting and the regularized Poisson solve.

The 3D finite-difference Laplacian with homogeneous Dirichlet closure acts
on canonical tensors mode-wise (rank-3 Kronecker structure), which turns the
assembled potential into a discretized delta: ``delta = -A_lap P``.  Its
smooth long-range part is the right-hand side of the regularized system
``(-A_lap + kappa^2) U = delta_long``, solved directly by diagonalization in
the 3D discrete sine basis; the total potential adds the short-range
template field back.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dstn

from .errors import ConfigError, NumericError
from .formats import CanonicalTensor3, dense, zero_canonical
from .assembly import scatter_short

_F64 = "<f8"


@dataclass(frozen=True)
class DiscreteLaplacian:
    """7-point Laplacian on a Grid3 with zero Dirichlet ghost values.

    The univariate stencil is ``h^-2 tridiag(1, -2, 1)``; an optional constant
    screening ``kappa`` (1/Angstrom) augments the operator to the screened
    form ``-lap + kappa^2`` used by the solver.
    """

    grid: object
    kappa: float = 0.0

    def __post_init__(self):
        if not (self.kappa >= 0):
            raise ConfigError("screening constant must be nonnegative")


def eigenvalues_1d(n, h):
    """Eigenvalues of the 1D negated Dirichlet Laplacian, (2/h^2)(1-cos(pi j/(n+1)))."""
    j = np.arange(1, n + 1)
    return (2.0 / (h * h)) * (1.0 - np.cos(np.pi * j / (n + 1)))


def _d1(V, h):
    # univariate stencil on the columns of V, ghosts zero
    W = -2.0 * V
    W[:-1] += V[1:]
    W[1:] += V[:-1]
    return W / (h * h)


def apply_stencil_dense(L, v):
    """Dense action of the screened Laplacian, ``lap v - kappa^2 v``."""
    h2 = L.grid.h ** 2
    w = -6.0 * v
    w[:-1] += v[1:]
    w[1:] += v[:-1]
    w[:, :-1] += v[:, 1:]
    w[:, 1:] += v[:, :-1]
    w[:, :, :-1] += v[:, :, 1:]
    w[:, :, 1:] += v[:, :, :-1]
    w /= h2
    if L.kappa > 0:
        w -= (L.kappa ** 2) * v
    return w


def apply_kron_laplacian(t, L):
    """Screened Laplacian action on a canonical tensor, mode-wise.

    Output columns per input column k are (D a1, a2, a3), (a1, D a2, a3),
    (a1, a2, D a3) with D the univariate stencil, so the output rank is
    3 R; when kappa > 0 another R identity-scaled columns with weight
    ``-kappa^2 xi_k`` are appended.  Equals the dense 7-point stencil action
    (minus ``kappa^2`` times the field) at every node.
    """
    n = L.grid.n
    if t.shape != (n, n, n):
        raise ConfigError("tensor mode sizes %r do not match the grid" % (t.shape,))
    if t.rank == 0:
        return t
    h = L.grid.h
    A1, A2, A3 = t.factors
    D1, D2, D3 = _d1(A1, h), _d1(A2, h), _d1(A3, h)
    w = [t.weights] * 3
    F1 = [D1, A1, A1]
    F2 = [A2, D2, A2]
    F3 = [A3, A3, D3]
    if L.kappa > 0:
        w.append(-(L.kappa ** 2) * t.weights)
        F1.append(A1)
        F2.append(A2)
        F3.append(A3)
    return CanonicalTensor3(np.concatenate(w),
                            (np.concatenate(F1, axis=1),
                             np.concatenate(F2, axis=1),
                             np.concatenate(F3, axis=1)))


def negate(t):
    """Canonical tensor with all weights negated."""
    return CanonicalTensor3(-t.weights, t.factors)


@dataclass
class GridFunction3:
    """Dense scalar field on a Grid3 (potential in charge/length units)."""

    grid: object
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = self.grid.n
        if self.values.shape != (n, n, n):
            raise ConfigError("field shape %r does not match grid n=%d"
                              % (self.values.shape, n))
        if not np.all(np.isfinite(self.values)):
            raise NumericError("field contains non-finite values")


@dataclass
class DeltaSplit:
    """Long- and short-range parts of the discretized delta.

    ``delta_long`` has rank at most 3 R_L (+R_L with screening) and stays
    localized near the atoms; ``delta_short`` collects the compactly
    supported per-atom contributions.  ``scaling`` records that the delta is
    the plain negated Laplacian action, no 4*pi factor, so solving
    ``(-lap+kappa^2) U = delta_long`` returns the long-range potential in the
    same units as the assembly.
    """

    delta_long: CanonicalTensor3
    delta_short: CanonicalTensor3
    scaling: str = "unscaled"


def _short_collective(rs):
    # per-atom template columns embedded into full-grid side vectors
    n = rs.grid.n
    R0 = rs.short_reference.rank
    if R0 == 0 or not rs.short_list:
        return zero_canonical((n, n, n))
    r = rs.support_radius
    N = len(rs.short_list)
    w = np.empty(N * R0)
    A = [np.zeros((n, N * R0)) for _ in range(3)]
    for a, (c, z) in enumerate(rs.short_list):
        sl = slice(a * R0, (a + 1) * R0)
        w[sl] = z * rs.short_reference.weights
        for l in range(3):
            lo = c[l] - r
            beg = max(lo, 0)
            end = min(lo + 2 * r + 1, n)
            A[l][beg:end, sl] = rs.short_reference.factors[l][beg - lo:end - lo]
    return CanonicalTensor3(w, tuple(A))


def build_delta_split(rs, L):
    """Discretized delta of a range-separated potential, split long/short.

    Both parts are the negated Kronecker-Laplacian action on the respective
    potential parts; the short part materializes each atom's compact template
    as full-grid canonical columns, stored collectively.
    """
    if rs.grid.n != L.grid.n or abs(rs.grid.b - L.grid.b) > 1e-12:
        raise ConfigError("tensor and operator grids differ")
    dl = negate(apply_kron_laplacian(rs.long, L)) if rs.long.rank \
        else zero_canonical(rs.long.shape)
    short = _short_collective(rs)
    ds = negate(apply_kron_laplacian(short, L)) if short.rank \
        else short
    return DeltaSplit(dl, ds)


def poisson_solve(rhs, L, bc="homogeneous", method="spectral", tol=1e-10,
                  bc_field=None):
    """Solve ``(-lap + kappa^2) u = rhs`` with Dirichlet boundary data.

    Parameters
    ----------
    rhs : CanonicalTensor3, GridFunction3 or dense array
    L : DiscreteLaplacian
    bc : {"homogeneous", "trace"}
        Homogeneous ghosts, or face values taken from ``bc_field`` with the
        interior solved after moving the face data into the right-hand side.
    method : {"spectral", "cg"}
        Direct diagonalization in the 3D sine basis, or conjugate gradients
        on the Kronecker-structured operator (homogeneous bc only).
    tol : float
        Relative residual target for cg; the spectral path is direct and
        simply reports its residual.
    bc_field : GridFunction3 or dense array, required when bc="trace".

    Returns
    -------
    GridFunction3 with ``meta["residual"]`` set.
    """
    n, h = L.grid.n, L.grid.h
    if isinstance(rhs, CanonicalTensor3):
        f = dense(rhs)
    elif isinstance(rhs, GridFunction3):
        f = rhs.values
    else:
        f = np.asarray(rhs, dtype=float)
    if f.shape != (n, n, n):
        raise ConfigError("right-hand side shape does not match the grid")

    if bc == "homogeneous":
        if method == "spectral":
            u = _solve_spectral(f, n, h, L.kappa)
        elif method == "cg":
            u = _solve_cg(f, L, tol)
        else:
            raise ConfigError("unknown solver method %r" % method)
        res = _residual(L, u, f)
        return GridFunction3(L.grid, u, {"residual": res, "method": method,
                                         "bc": bc, "kappa": L.kappa})
    if bc != "trace":
        raise ConfigError("bc must be 'homogeneous' or 'trace'")
    if method != "spectral":
        raise ConfigError("inhomogeneous boundary data requires the spectral solver")
    if bc_field is None:
        raise ConfigError("bc='trace' needs bc_field")
    g = bc_field.values if isinstance(bc_field, GridFunction3) \
        else np.asarray(bc_field, dtype=float)
    if g.shape != (n, n, n):
        raise ConfigError("boundary field shape does not match the grid")
    # move the known face values into the interior right-hand side
    fi = f[1:-1, 1:-1, 1:-1].copy()
    h2 = h * h
    fi[0] += g[0, 1:-1, 1:-1] / h2
    fi[-1] += g[-1, 1:-1, 1:-1] / h2
    fi[:, 0] += g[1:-1, 0, 1:-1] / h2
    fi[:, -1] += g[1:-1, -1, 1:-1] / h2
    fi[:, :, 0] += g[1:-1, 1:-1, 0] / h2
    fi[:, :, -1] += g[1:-1, 1:-1, -1] / h2
    ui = _solve_spectral(fi, n - 2, h, L.kappa)
    u = g.copy()
    u[1:-1, 1:-1, 1:-1] = ui
    # residual over the interior equations actually solved
    res_f = apply_stencil_dense(DiscreteLaplacian(L.grid, L.kappa), u)
    num = np.linalg.norm((-res_f - f)[1:-1, 1:-1, 1:-1])
    den = np.linalg.norm(fi)
    res = float(num / den) if den > 0 else 0.0
    return GridFunction3(L.grid, u, {"residual": res, "method": method,
                                     "bc": bc, "kappa": L.kappa})


def _solve_spectral(f, n, h, kappa):
    lam = eigenvalues_1d(n, h)
    F = dstn(f, type=1, norm="ortho")
    plane = lam[:, None] + lam[None, :] + kappa * kappa
    for i in range(n):
        F[i] /= lam[i] + plane
    return dstn(F, type=1, norm="ortho")


def dst1_direct(v):
    """O(n^2) per line reference transform: orthonormal type-I sine matrix."""
    n = v.shape[0]
    j = np.arange(1, n + 1)
    S = np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(j, j) / (n + 1))
    out = np.tensordot(S, v, axes=(1, 0))
    out = np.moveaxis(np.tensordot(S, np.moveaxis(out, 1, 0), axes=(1, 0)), 0, 1)
    return np.moveaxis(np.tensordot(S, np.moveaxis(out, 2, 0), axes=(1, 0)), 0, 2)


def _solve_cg(f, L, tol):
    if not (tol > 0):
        raise ConfigError("cg tolerance must be positive")
    nrm_f = np.linalg.norm(f)
    if nrm_f == 0:
        return np.zeros_like(f)
    x = np.zeros_like(f)
    r = f.copy()
    p = r.copy()
    rs = float(np.vdot(r, r))
    cap = 40 * L.grid.n
    for _ in range(cap):
        Ap = -apply_stencil_dense(L, p)
        alpha = rs / float(np.vdot(p, Ap))
        x += alpha * p
        r -= alpha * Ap
        rs_new = float(np.vdot(r, r))
        if np.sqrt(rs_new) <= tol * nrm_f:
            return x
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise NumericError("cg did not reach tolerance %.1e in %d iterations"
                       % (tol, cap))


def _residual(L, u, f):
    den = np.linalg.norm(f)
    if den == 0:
        return 0.0
    return float(np.linalg.norm(-apply_stencil_dense(L, u) - f) / den)


def compose_total(u_long, rs):
    """Total potential: long-range solve plus the short-range template field."""
    if u_long.grid.n != rs.grid.n or abs(u_long.grid.b - rs.grid.b) > 1e-12:
        raise ConfigError("field and tensor grids differ")
    out = u_long.values.copy()
    scatter_short(rs, out)
    meta = dict(u_long.meta)
    meta["composed"] = True
    return GridFunction3(u_long.grid, out, meta)


def save_field(f, path):
    """Write a field dump: raw little-endian float64, mode-1 fastest, plus a
    ``path + '.info'`` text sidecar with grid and solver metadata."""
    with open(path, "wb") as fh:
        fh.write(np.asarray(f.values, dtype=_F64).tobytes(order="F"))
    g = f.grid
    lines = ["n=%d" % g.n, "b=%.17g" % g.b, "h=%.17g" % g.h,
             "units=charge/angstrom", "order=mode1-fastest",
             "bc=%s" % f.meta.get("bc", "homogeneous"),
             "residual=%.17g" % f.meta.get("residual", 0.0)]
    with open(str(path) + ".info", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path):
    """Read a field dump written by ``save_field``."""
    from .grid_kernel import Grid3
    info = {}
    with open(str(path) + ".info") as fh:
        for line in fh:
            if "=" in line:
                k, v = line.strip().split("=", 1)
                info[k] = v
    grid = Grid3(int(info["n"]), float(info["b"]))
    raw = np.fromfile(path, dtype=_F64)
    n = grid.n
    if raw.size != n ** 3:
        raise ConfigError("dump size does not match n=%d" % n)
    vals = raw.reshape((n, n, n), order="F")
    meta = {"bc": info.get("bc", "homogeneous"),
            "residual": float(info.get("residual", 0.0))}
    return GridFunction3(grid, vals, meta)
