"""Brute-force reference fields and error metrics.

The direct-sum oracle evaluates the collective potential by an O(N n^3)
double loop, either with the exact radial kernel 1/r or with the same
Gaussian-sum kernel the tensor pipeline uses; the latter is the default
comparison target, so reported errors isolate compression and solver terms
from quadrature error.
"""

from dataclasses import dataclass, field as dfield

import numpy as np

from .errors import ConfigError, NumericError
from .solver import GridFunction3

_CHUNK_NUMEL = 3.2e7


@dataclass
class ErrorReport:
    """Error metrics of one field against a reference.

    ``discrete_l2`` is sqrt(h^3 * sum diff^2) (potential * Angstrom^(3/2));
    ``rss`` is the unweighted root-sum-square; ``relative_l2`` is the ratio
    of difference to reference norms; nodes within ``exclude_radius`` grid
    units (Chebyshev) of a listed center are dropped from
    ``max_abs_excluding_cores``.
    """

    discrete_l2: float
    max_abs: float
    max_abs_excluding_cores: float
    relative_l2: float
    rss: float
    n: int
    b: float
    config: dict = dfield(default_factory=dict)

    def text(self):
        """Line-oriented human-readable block."""
        lines = ["error report (n=%d, b=%.6g)" % (self.n, self.b),
                 "  discrete L2 (h^3-weighted): %.6e" % self.discrete_l2,
                 "  unweighted root-sum-square: %.6e" % self.rss,
                 "  relative L2:                %.6e" % self.relative_l2,
                 "  max abs:                    %.6e" % self.max_abs,
                 "  max abs excluding cores:    %.6e" % self.max_abs_excluding_cores]
        for k in sorted(self.config):
            lines.append("  %s: %s" % (k, self.config[k]))
        return "\n".join(lines)

    def keyvalues(self):
        """Machine-readable key=value lines."""
        pairs = [("n", "%d" % self.n), ("b", "%.17g" % self.b),
                 ("discrete_l2", "%.17g" % self.discrete_l2),
                 ("rss", "%.17g" % self.rss),
                 ("relative_l2", "%.17g" % self.relative_l2),
                 ("max_abs", "%.17g" % self.max_abs),
                 ("max_abs_excluding_cores", "%.17g" % self.max_abs_excluding_cores)]
        pairs += [(k, str(self.config[k])) for k in sorted(self.config)]
        return "\n".join("%s=%s" % kv for kv in pairs) + "\n"


def gaussian_field(positions, charges, grid, q):
    """Dense Gaussian-sum potential of point charges, chunked over terms."""
    x = grid.coords()
    n = grid.n
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    charges = np.asarray(charges, dtype=float)
    t2 = q.nodes ** 2
    M = charges.size * q.rank
    out = np.zeros((n, n, n))
    step = max(1, int(_CHUNK_NUMEL // (n * n)))
    for beg in range(0, M, step):
        idx = np.arange(beg, min(beg + step, M))
        ia, ik = idx // q.rank, idx % q.rank
        w = charges[ia] * q.weights[ik]
        E1 = np.exp(-t2[ik][None, :] * (x[:, None] - positions[ia, 0][None, :]) ** 2)
        E1 *= w
        E2 = np.exp(-t2[ik][None, :] * (x[:, None] - positions[ia, 1][None, :]) ** 2)
        E3 = np.exp(-t2[ik][None, :] * (x[:, None] - positions[ia, 2][None, :]) ** 2)
        kab = np.einsum("ak,bk->kab", E1, E2)
        out += np.tensordot(kab, E3, axes=(0, 1))
    return out


def direct_sum_oracle(m, grid, kernel="gaussian_sum", quad=None):
    """Collective potential by direct summation over atoms.

    Parameters
    ----------
    m : Molecule
    grid : Grid3
    kernel : {"gaussian_sum", "exact_newton"}
        Gaussian-sum mode needs ``quad`` and is the consistent comparison
        target for the tensor pipeline; exact mode computes sum_v z_v / r and
        additionally carries the quadrature error when compared against
        tensor output.
    quad : SincQuadrature, required for gaussian_sum.

    Returns
    -------
    GridFunction3; in exact mode, nodes coinciding with an atom are set to 0
    and listed in ``meta["excluded_nodes"]``.
    """
    if kernel == "gaussian_sum":
        if quad is None:
            raise ConfigError("gaussian_sum oracle needs a quadrature")
        vals = gaussian_field(m.positions, m.charges, grid, quad)
        return GridFunction3(grid, vals, {"kernel": kernel})
    if kernel != "exact_newton":
        raise ConfigError("unknown oracle kernel %r" % kernel)
    x = grid.coords()
    n = grid.n
    out = np.zeros((n, n, n))
    singular = np.zeros((n, n, n), dtype=bool)
    tol2 = (1e-9 * grid.h) ** 2
    for pos, z in zip(m.positions, m.charges):
        d1 = (x - pos[0]) ** 2
        d2 = (x - pos[1]) ** 2
        d3 = (x - pos[2]) ** 2
        D = d1[:, None, None] + d2[None, :, None] + d3[None, None, :]
        hit = D < tol2
        if np.any(hit):
            singular |= hit
            D = np.where(hit, 1.0, D)
        out += z / np.sqrt(D)
    excluded = [tuple(int(v) for v in idx) for idx in np.argwhere(singular)]
    if excluded:
        out[singular] = 0.0
    return GridFunction3(grid, out, {"kernel": kernel,
                                     "excluded_nodes": excluded})


def compare(a, b, exclude_centers=None, exclude_radius=1, config=None,
            l2_excludes_cores=False):
    """Error metrics of field ``a`` against reference ``b``.

    ``exclude_centers`` lists node index triples (atom centers); nodes within
    ``exclude_radius`` grid units of any of them, plus any nodes the
    reference itself excluded, are dropped from the core-excluding max norm.
    With ``l2_excludes_cores`` the L2-type metrics drop those nodes too;
    that is the right mode when ``a`` and ``b`` resolve the singular cores
    differently (e.g. two quadratures of unequal rank), since the core
    values are quadrature-dependent regularizations, not field values.
    """
    if a.grid.n != b.grid.n or abs(a.grid.b - b.grid.b) > 1e-12:
        raise ConfigError("fields live on different grids")
    g = a.grid
    diff = a.values - b.values
    absd = np.abs(diff)
    max_abs = float(absd.max())
    mask = np.zeros_like(diff, dtype=bool)
    centers = list(exclude_centers or [])
    centers += b.meta.get("excluded_nodes", [])
    for c in centers:
        lo = [max(ci - exclude_radius, 0) for ci in c]
        hi = [min(ci + exclude_radius + 1, g.n) for ci in c]
        mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
    max_excl = float(absd[~mask].max()) if np.any(~mask) else 0.0
    if l2_excludes_cores:
        ss = float(np.sum(diff[~mask] ** 2))
        ref_ss = float(np.sum(b.values[~mask] ** 2))
    else:
        ss = float(np.sum(diff * diff))
        ref_ss = float(np.sum(b.values * b.values))
    l2 = np.sqrt(g.h ** 3 * ss)
    rel = np.sqrt(ss / ref_ss) if ref_ss > 0 else (0.0 if ss == 0 else np.inf)
    if not np.isfinite(rel):
        raise NumericError("reference field is identically zero")
    cfg = dict(config or {})
    if l2_excludes_cores:
        cfg["l2_excludes_cores"] = True
    return ErrorReport(discrete_l2=l2, max_abs=max_abs,
                       max_abs_excluding_cores=max_excl,
                       relative_l2=float(rel), rss=float(np.sqrt(ss)),
                       n=g.n, b=g.b, config=cfg)


def write_report(report, path):
    """Write the text block to ``path`` and key=value lines to ``path + '.kv'``."""
    with open(path, "w") as fh:
        fh.write(report.text() + "\n")
    with open(str(path) + ".kv", "w") as fh:
        fh.write(report.keyvalues())
