"""Collective potential of a molecule in range-separated canonical form.

Every atom contributes a shifted window of the doubled-grid reference kernel.
The smooth long-range columns of all atoms are concatenated into one
canonical tensor and rank-compressed once; the short-range columns are kept
as a single compact reference template plus a list of (center, charge)
pairs, evaluated locally through a uniform-cell spatial index.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .formats import (CanonicalTensor3, dense, eval_entry, reduce_rank,
                      zero_canonical)

_TIE = 1e-9


@dataclass
class Atom:
    """Point charge: position (Angstrom), charge (elementary units), radius."""

    position: np.ndarray
    charge: float
    radius: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(self.position)):
            raise DataError("atom position must be finite")
        if not (self.radius >= 0):
            raise DataError("atom radius must be nonnegative")


@dataclass
class Molecule:
    """A named list of atoms."""

    atoms: list
    name: str = ""

    def __post_init__(self):
        if len(self.atoms) == 0:
            raise DataError("molecule has no atoms")

    @property
    def n_atoms(self):
        return len(self.atoms)

    @property
    def positions(self):
        return np.array([a.position for a in self.atoms])

    @property
    def charges(self):
        return np.array([a.charge for a in self.atoms])

    @property
    def net_charge(self):
        return float(np.sum(self.charges))


def snap_to_grid(m, grid):
    """Nearest grid node per atom, ties rounded away from the box center.

    Parameters
    ----------
    m : Molecule
    grid : Grid3

    Returns
    -------
    list of ((i1, i2, i3), offset)
        0-based node indices and the residual ``position - node`` vector,
        max-norm at most h/2.
    """
    pts = m.positions
    if np.any(np.abs(pts) > grid.b + 1e-9):
        raise ConfigError("atom outside the computational box")
    h = grid.h
    u = (pts + grid.b) / h
    c = 0.5 * (grid.n - 1)
    lo = np.floor(u)
    frac = u - lo
    idx = lo.copy()
    idx[frac > 0.5 + _TIE] += 1
    tie = np.abs(frac - 0.5) <= _TIE
    idx[tie & (u >= c)] += 1
    idx = np.clip(idx, 0, grid.n - 1).astype(int)
    out = []
    for a in range(pts.shape[0]):
        node = -grid.b + idx[a] * h
        out.append((tuple(int(v) for v in idx[a]), pts[a] - node))
    return out


def snapped_molecule(m, grid):
    """Copy of ``m`` with every atom moved to its nearest grid node.

    Returns the new molecule and the snap list from ``snap_to_grid``.
    """
    snaps = snap_to_grid(m, grid)
    atoms = []
    for a, (idx, _) in zip(m.atoms, snaps):
        pos = -grid.b + np.asarray(idx) * grid.h
        atoms.append(Atom(pos, a.charge, a.radius))
    return Molecule(atoms, m.name), snaps


def shift_and_window(kernel, center, part="both"):
    """Window the doubled-grid reference tensor so its center lands on a node.

    The result's entry at node ``j`` equals the reference tensor's entry at
    displacement ``j - center``; selecting ``part`` restricts columns to the
    long-range prefix, the short-range suffix, or all columns.

    Parameters
    ----------
    kernel : ReferenceKernel
    center : sequence of three ints, 0-based node indices
    part : {"both", "long", "short"}

    Returns
    -------
    CanonicalTensor3 on the n-grid.
    """
    n = kernel.grid.n
    center = tuple(int(v) for v in center)
    for cl in center:
        if not (0 <= cl < n):
            raise ConfigError("window center %r outside the grid" % (center,))
    if part == "both":
        cols = slice(0, kernel.rank)
    elif part in ("long", "short"):
        if kernel.split_index is None:
            raise ConfigError("kernel is not split; cannot select %r columns" % part)
        cols = slice(0, kernel.split_index) if part == "long" \
            else slice(kernel.split_index, kernel.rank)
    else:
        raise ConfigError("part must be 'long', 'short' or 'both'")
    A = []
    for l in range(3):
        W = kernel.wide_tensor.factors[l]
        beg = n - center[l]
        assert 0 <= beg and beg + n <= 2 * n
        A.append(W[beg:beg + n, cols])
    return CanonicalTensor3(kernel.wide_tensor.weights[cols], tuple(A))


def _template_radius(gamma):
    # template length 2r+1 stays below 2*gamma while covering the support
    # radius gamma/2 nodes plus the threshold tail
    return min(gamma - 1, gamma // 2 + 2) if gamma > 1 else 1


@dataclass
class RSTensor:
    """Range-separated representation of a collective potential.

    ``long`` is a rank-R_L canonical tensor on the full grid;
    ``short_reference`` is the compact short-range template (canonical, side
    length 2*support_radius + 1) shared by all atoms; ``short_list`` holds
    (center node, weight) per atom.  Storage is 3*R_L*n + 4*N numbers plus
    the template's 3*R0*(2*support_radius+1) <= 3*R0*2*gamma.
    """

    grid: object
    long: CanonicalTensor3
    short_reference: CanonicalTensor3
    short_list: list
    gamma: int
    long_rank_pre: int = 0
    _template: np.ndarray = field(default=None, repr=False)
    _cells: dict = field(default=None, repr=False)

    @property
    def support_radius(self):
        return (self.short_reference.shape[0] - 1) // 2

    def template_dense(self):
        """Dense short-range template block, cached."""
        if self._template is None:
            self._template = dense(self.short_reference)
        return self._template

    def cell_index(self):
        """Uniform-cell index over short_list, cell size gamma grid units."""
        if self._cells is None:
            cells = {}
            for a, (cidx, _) in enumerate(self.short_list):
                key = tuple(v // self.gamma for v in cidx)
                cells.setdefault(key, []).append(a)
            self._cells = cells
        return self._cells

    def nearby_atoms(self, i):
        """Indices of short_list entries whose template window covers node i."""
        cells = self.cell_index()
        ci = tuple(v // self.gamma for v in i)
        r = self.support_radius
        out = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for a in cells.get((ci[0] + dx, ci[1] + dy, ci[2] + dz), ()):
                        c = self.short_list[a][0]
                        if max(abs(i[0] - c[0]), abs(i[1] - c[1]),
                               abs(i[2] - c[2])) <= r:
                            out.append(a)
        return out


def assemble_collective(m, kernel, eps_reduce):
    """Assemble a molecule's collective potential in range-separated form.

    The long-range part concatenates, over atoms, the charge-weighted
    long-range window columns (rank N * R_l) and compresses them once at
    ``eps_reduce``.  The short-range part is stored as the shared template
    plus the snapped (center, charge) list.

    Parameters
    ----------
    m : Molecule
    kernel : ReferenceKernel, already split.
    eps_reduce : float or None
        Rank-reduction tolerance for the long-range sum; None keeps the
        uncompressed rank N * R_l.

    Returns
    -------
    RSTensor
    """
    if kernel.split_index is None:
        raise ConfigError("kernel must be split before assembly")
    grid = kernel.grid
    n = grid.n
    gamma = kernel.separation_gamma
    margin = np.min(grid.b - np.abs(m.positions))
    if margin < 0.5 * gamma * grid.h - 1e-9:
        raise ConfigError("atom margin %.3f A is below gamma*h/2 = %.3f A"
                          % (margin, 0.5 * gamma * grid.h))
    snaps = snap_to_grid(m, grid)
    z = m.charges
    R_l = kernel.split_index
    N = m.n_atoms

    if R_l == 0:
        long_pre = 0
        long = zero_canonical((n, n, n))
    else:
        long_pre = N * R_l
        w = np.empty(long_pre)
        A = [np.empty((n, long_pre)) for _ in range(3)]
        c_long = kernel.wide_tensor.weights[:R_l]
        for a, (cidx, _) in enumerate(snaps):
            sl = slice(a * R_l, (a + 1) * R_l)
            w[sl] = z[a] * c_long
            for l in range(3):
                beg = n - cidx[l]
                A[l][:, sl] = kernel.wide_tensor.factors[l][beg:beg + n, :R_l]
        long = CanonicalTensor3(w, tuple(A))
        if eps_reduce is not None:
            long = reduce_rank(long, eps_reduce)

    r_t = _template_radius(gamma)
    R_s = kernel.rank - R_l
    if R_s == 0:
        short_ref = zero_canonical((2 * r_t + 1,) * 3)
    else:
        Wc = [kernel.wide_tensor.factors[l][n - r_t:n + r_t + 1, R_l:]
              for l in range(3)]
        short_ref = CanonicalTensor3(kernel.wide_tensor.weights[R_l:], tuple(Wc))
    short_list = [(cidx, float(z[a])) for a, (cidx, _) in enumerate(snaps)]
    return RSTensor(grid, long, short_ref, short_list, gamma,
                    long_rank_pre=long_pre)


def rs_eval_entry(t, i):
    """Evaluate one entry of a range-separated tensor.

    Cost is O(R_L) for the long part plus O(1) per nearby atom through the
    cached dense template, the nearby set coming from the spatial index.
    """
    n = t.grid.n
    i = tuple(int(v) for v in i)
    for v in i:
        if not (0 <= v < n):
            raise ConfigError("index %r out of range" % (i,))
    val = eval_entry(t.long, i) if t.long.rank else 0.0
    T = t.template_dense()
    r = t.support_radius
    for a in t.nearby_atoms(i):
        c, w = t.short_list[a]
        val += w * T[i[0] - c[0] + r, i[1] - c[1] + r, i[2] - c[2] + r]
    return float(val)


def scatter_short(t, out):
    """Add the short-range field into dense array ``out`` (shape n^3) in place."""
    n = t.grid.n
    if out.shape != (n, n, n):
        raise ConfigError("output array does not match the grid")
    T = t.template_dense()
    r = t.support_radius
    for c, w in t.short_list:
        lo = [ci - r for ci in c]
        sl_out, sl_t = [], []
        for l in range(3):
            a = max(lo[l], 0)
            b = min(lo[l] + 2 * r + 1, n)
            sl_out.append(slice(a, b))
            sl_t.append(slice(a - lo[l], b - lo[l]))
        out[sl_out[0], sl_out[1], sl_out[2]] += w * T[sl_t[0], sl_t[1], sl_t[2]]
    return out
