"""Elastic-map projections and bi-Gaussian risk surfaces.

An elastic map is a rectangular grid of nodes embedded in data space
and tied together by springs: edge springs penalize stretching, rib
springs (three consecutive collinear nodes) penalize bending. Fitting
alternates two exact steps: assign every data point to its closest
node, then minimize the total energy

    U = data_term + stretch * edge_term + bend * rib_term

over node positions for the fixed assignment, which is a sparse
symmetric positive-definite linear solve. The energy never increases
within an epoch. A softening schedule starts rigid and relaxes the
moduli so the map first captures the linear structure, then bends.

With both moduli zero the procedure reduces to k-means with grid-node
centroids; with a very large bend modulus the grid stays affine and
reproduces the principal-component plane.

Risk surfaces fit one Gaussian per class on a 1-D or 2-D coordinate
system and evaluate the posterior user probability on a raster. The
0.5 level set is the quadratic-discriminant decision boundary.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

from .classify import GaussianPairModel, fit_gaussian_mixture
from .quantify import norm_cdf

log = logging.getLogger(__name__)

__all__ = [
    "ElasticGrid",
    "EnergyRecord",
    "MapFit",
    "Raster",
    "RiskSurface",
    "build_grid",
    "fit_map",
    "project",
    "color",
    "bi_gaussian_risk",
    "risk_surface",
    "export_raster_csv",
    "export_raster_npy",
]

_RESIDUAL_TOL = 1e-10


@dataclass
class ElasticGrid:
    """Rectangular node grid with spring topology and starting moduli.

    An r x c grid has r*c nodes, r(c-1)+c(r-1) edges, and
    r(c-2)+c(r-2) ribs. ``internal`` holds each node's (row, col)
    coordinates on the map's own 2-D canvas.
    """

    rows: int
    cols: int
    nodes: np.ndarray
    internal: np.ndarray
    edges: np.ndarray
    ribs: np.ndarray
    stretch: float = 1.0
    bend: float = 10.0

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols


def _principal_plane(data: np.ndarray):
    """Mean, two unit directions, and SDs spanning the data's best plane.

    Degenerate data (rank below 2) falls back to a jittered line: the
    missing direction gets an arbitrary orthogonal unit vector with a
    tiny amplitude, and the fallback is logged.
    """
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / data.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]

    scale = max(math.sqrt(float(eigvals[0])), 1e-12)
    u1 = eigvecs[:, 0]
    if eigvals[0] <= 0.0:
        log.warning("all data points coincide; grid spans arbitrary axes")
        u1 = np.zeros(data.shape[1])
        u1[0] = 1.0
        s1 = 1e-6 * max(float(np.linalg.norm(mean)), 1.0)
    else:
        s1 = math.sqrt(float(eigvals[0]))
    if data.shape[1] > 1 and eigvals[1] > 1e-12 * eigvals[0] > 0.0:
        u2 = eigvecs[:, 1]
        s2 = math.sqrt(float(eigvals[1]))
    else:
        log.warning("data rank below 2; grid degenerates to a jittered line")
        pivot = int(np.argmin(np.abs(u1)))
        u2 = np.zeros(data.shape[1])
        u2[pivot] = 1.0
        u2 -= (u2 @ u1) * u1
        u2 /= np.linalg.norm(u2)
        s2 = 1e-6 * max(s1, scale)
    return mean, u1, u2, s1, s2


def build_grid(data, rows: int = 16, cols: int = 16,
               stretch: float = 1.0, bend: float = 10.0) -> ElasticGrid:
    """Lay out a rows x cols grid on the data's principal plane.

    Nodes cover +-2 SD along each of the first two principal
    directions (row axis along the first). Requires at least two data
    dimensions; rank-deficient data degrades to a jittered line.
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("data must be a nonempty 2-D array")
    if arr.shape[1] < 2:
        raise ValueError("need at least 2 data dimensions for a grid")
    if rows < 1 or cols < 1:
        raise ValueError("grid dimensions must be positive")

    mean, u1, u2, s1, s2 = _principal_plane(arr)
    row_pos = np.linspace(-2.0, 2.0, rows) if rows > 1 else np.zeros(1)
    col_pos = np.linspace(-2.0, 2.0, cols) if cols > 1 else np.zeros(1)

    nodes = np.empty((rows * cols, arr.shape[1]))
    internal = np.empty((rows * cols, 2))
    for i in range(rows):
        for j in range(cols):
            k = i * cols + j
            nodes[k] = mean + row_pos[i] * s1 * u1 + col_pos[j] * s2 * u2
            internal[k] = (i, j)

    edges = []
    for i in range(rows):
        for j in range(cols - 1):
            edges.append((i * cols + j, i * cols + j + 1))
    for j in range(cols):
        for i in range(rows - 1):
            edges.append((i * cols + j, (i + 1) * cols + j))

    ribs = []
    for i in range(rows):
        for j in range(cols - 2):
            base = i * cols + j
            ribs.append((base, base + 1, base + 2))
    for j in range(cols):
        for i in range(rows - 2):
            base = i * cols + j
            ribs.append((base, base + cols, base + 2 * cols))

    return ElasticGrid(
        rows=rows, cols=cols, nodes=nodes, internal=internal,
        edges=np.array(edges, dtype=int).reshape(-1, 2),
        ribs=np.array(ribs, dtype=int).reshape(-1, 3),
        stretch=float(stretch), bend=float(bend))


@dataclass(frozen=True)
class EnergyRecord:
    """Energy terms after one minimization step."""

    epoch: int
    iteration: int
    stretch: float
    bend: float
    data_term: float
    edge_term: float
    rib_term: float

    @property
    def total(self) -> float:
        return self.data_term + self.edge_term + self.rib_term


@dataclass
class MapFit:
    """A fitted elastic map: final node positions plus diagnostics."""

    grid: ElasticGrid
    nodes: np.ndarray
    hosts: np.ndarray
    trace: list
    converged: bool


def _assign_hosts(data: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Closest node per data point; ties go to the smallest index."""
    d2 = ((data[:, None, :] - nodes[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _energies(data, nodes, hosts, grid, stretch, bend):
    data_term = float(((data - nodes[hosts]) ** 2).sum())
    edge_term = 0.0
    if grid.edges.size:
        diff = nodes[grid.edges[:, 0]] - nodes[grid.edges[:, 1]]
        edge_term = stretch * float((diff ** 2).sum())
    rib_term = 0.0
    if grid.ribs.size:
        bow = (nodes[grid.ribs[:, 0]] - 2.0 * nodes[grid.ribs[:, 1]]
               + nodes[grid.ribs[:, 2]])
        rib_term = bend * float((bow ** 2).sum())
    return data_term, edge_term, rib_term


def _spring_matrix(grid: ElasticGrid, counts, stretch, bend):
    k = grid.n_nodes
    rows, cols, vals = [], [], []
    rows.extend(range(k))
    cols.extend(range(k))
    vals.extend(counts.tolist())
    if stretch > 0.0 and grid.edges.size:
        for a, b in grid.edges:
            rows.extend((a, b, a, b))
            cols.extend((a, b, b, a))
            vals.extend((stretch, stretch, -stretch, -stretch))
    if bend > 0.0 and grid.ribs.size:
        for a, b, c in grid.ribs:
            stencil = ((a, 1.0), (b, -2.0), (c, 1.0))
            for i, wi in stencil:
                for j, wj in stencil:
                    rows.append(i)
                    cols.append(j)
                    vals.append(bend * wi * wj)
    return coo_matrix((vals, (rows, cols)), shape=(k, k)).tocsc()


def _solve_nodes(grid, data, hosts, stretch, bend):
    k = grid.n_nodes
    counts = np.bincount(hosts, minlength=k).astype(float)
    if stretch == 0.0 and bend == 0.0 and np.any(counts == 0.0):
        raise ValueError("singular quadratic system: empty grid regions "
                         "with zero elasticity")
    rhs = np.zeros((k, data.shape[1]))
    np.add.at(rhs, hosts, data)
    matrix = _spring_matrix(grid, counts, stretch, bend)
    try:
        solved = splu(matrix).solve(rhs)
    except RuntimeError as exc:
        raise ValueError("singular quadratic system: %s" % exc) from exc
    residual = np.linalg.norm(matrix @ solved - rhs)
    # backward-error scale: stiff moduli inflate the matrix norm, so the
    # residual must be judged against it, not against the data side alone
    scale = (np.linalg.norm(matrix.data) * np.linalg.norm(solved)
             + np.linalg.norm(rhs))
    limit = _RESIDUAL_TOL * max(scale, 1e-300)
    if not np.isfinite(residual) or residual > limit:
        raise ValueError("quadratic solve failed: residual %.3g exceeds %.3g"
                         % (residual, limit))
    return solved


def default_schedule(stretch: float = 1.0, bend: float = 10.0,
                     epochs: int = 4, decay: float = 10.0):
    """Rigid-to-soft moduli schedule, decaying geometrically."""
    if epochs < 1:
        raise ValueError("need at least one epoch")
    return [(stretch / decay ** e, bend / decay ** e)
            for e in range(epochs)]


def fit_map(data, grid: ElasticGrid, schedule=None,
            max_iter: int = 200) -> MapFit:
    """Fit the grid to the data by alternating assignment and solving.

    ``schedule`` is a nonempty list of (stretch, bend) epochs, both
    moduli nonnegative; the default softens the grid's starting moduli
    geometrically over four epochs. Within an epoch the total energy
    is nonincreasing; the epoch stops when the host assignment reaches
    a fixed point or ``max_iter`` is hit (logged).
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("data must be a nonempty 2-D array")
    if arr.shape[1] != grid.nodes.shape[1]:
        raise ValueError("data has %d dimensions, grid nodes have %d"
                         % (arr.shape[1], grid.nodes.shape[1]))
    if schedule is None:
        schedule = default_schedule(grid.stretch, grid.bend)
    schedule = [(float(s), float(b)) for s, b in schedule]
    if not schedule:
        raise ValueError("schedule must be nonempty")
    if any(s < 0 or b < 0 for s, b in schedule):
        raise ValueError("moduli must be nonnegative")

    nodes = grid.nodes.copy()
    trace = []
    converged = True
    for epoch, (stretch, bend) in enumerate(schedule):
        previous = None
        for iteration in range(max_iter):
            hosts = _assign_hosts(arr, nodes)
            if previous is not None and np.array_equal(hosts, previous):
                break
            nodes = _solve_nodes(grid, arr, hosts, stretch, bend)
            d, ue, ug = _energies(arr, nodes, hosts, grid, stretch, bend)
            trace.append(EnergyRecord(epoch=epoch, iteration=iteration,
                                      stretch=stretch, bend=bend,
                                      data_term=d, edge_term=ue, rib_term=ug))
            previous = hosts
        else:
            converged = False
            log.warning("epoch %d hit the %d-iteration cap", epoch, max_iter)

    return MapFit(grid=grid, nodes=nodes, hosts=_assign_hosts(arr, nodes),
                  trace=trace, converged=converged)


# ---------------------------------------------------------------------------
# projection onto the fitted manifold


def _closest_on_segments(points, starts, ends):
    """Closest point on each segment for each point.

    Returns (t, dist2) arrays of shape (n_points, n_segments) where t
    is the clamped interpolation parameter along each segment.
    """
    axis = ends - starts
    length2 = (axis ** 2).sum(axis=1)
    length2 = np.where(length2 > 0.0, length2, 1.0)
    offset = points[:, None, :] - starts[None, :, :]
    t = np.clip((offset * axis[None, :, :]).sum(axis=2) / length2, 0.0, 1.0)
    closest = starts[None, :, :] + t[:, :, None] * axis[None, :, :]
    dist2 = ((points[:, None, :] - closest) ** 2).sum(axis=2)
    return t, dist2


def _closest_on_triangle(points, a, b, c):
    """Barycentric coordinates of the closest point on one triangle.

    Vectorized region-based closest-point computation; returns
    (bary, dist2) with bary of shape (n, 3).
    """
    n = points.shape[0]
    ab = b - a
    ac = c - a
    ap = points - a
    d1 = ap @ ab
    d2 = ap @ ac
    bp = points - b
    d3 = bp @ ab
    d4 = bp @ ac
    cp = points - c
    d5 = cp @ ab
    d6 = cp @ ac

    v = np.full(n, np.nan)
    w = np.full(n, np.nan)
    todo = np.ones(n, dtype=bool)

    def settle(mask, v_val, w_val):
        nonlocal todo
        mask = mask & todo
        v[mask] = np.broadcast_to(v_val, (n,))[mask]
        w[mask] = np.broadcast_to(w_val, (n,))[mask]
        todo = todo & ~mask

    settle((d1 <= 0) & (d2 <= 0), 0.0, 0.0)
    settle((d3 >= 0) & (d4 <= d3), 1.0, 0.0)
    settle((d6 >= 0) & (d5 <= d6), 0.0, 1.0)

    vc = d1 * d4 - d3 * d2
    denom = np.where(np.abs(d1 - d3) > 0, d1 - d3, 1.0)
    settle((vc <= 0) & (d1 >= 0) & (d3 <= 0), d1 / denom, 0.0)

    vb = d5 * d2 - d1 * d6
    denom = np.where(np.abs(d2 - d6) > 0, d2 - d6, 1.0)
    settle((vb <= 0) & (d2 >= 0) & (d6 <= 0), 0.0, d2 / denom)

    va = d3 * d6 - d5 * d4
    edge = (d4 - d3) + (d5 - d6)
    denom = np.where(np.abs(edge) > 0, edge, 1.0)
    wv = (d4 - d3) / denom
    settle((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), 1.0 - wv, wv)

    total = va + vb + vc
    denom = np.where(np.abs(total) > 0, total, 1.0)
    settle(todo, vb / denom, vc / denom)

    v = np.clip(v, 0.0, 1.0)
    w = np.clip(w, 0.0, 1.0)
    overflow = v + w
    scale = np.where(overflow > 1.0, overflow, 1.0)
    v /= scale
    w /= scale
    u = 1.0 - v - w
    closest = u[:, None] * a + v[:, None] * b + w[:, None] * c
    dist2 = ((points - closest) ** 2).sum(axis=1)
    return np.column_stack([u, v, w]), dist2


def _grid_triangles(grid: ElasticGrid):
    """Triangle vertex-index triples in deterministic cell order."""
    triangles = []
    for i in range(grid.rows - 1):
        for j in range(grid.cols - 1):
            k = i * grid.cols + j
            triangles.append((k, k + 1, k + grid.cols))
            triangles.append((k + 1, k + grid.cols, k + grid.cols + 1))
    return triangles


def project(data, fit: MapFit) -> np.ndarray:
    """Project points onto the map; returns internal (row, col) coords.

    The grid squares are triangulated and each point goes to the
    closest point over all triangles (strictly smaller distance wins,
    so exact ties keep the lowest triangle index); its internal
    coordinates are interpolated barycentrically. Single-row or
    single-column grids project onto the polyline, a single node maps
    everything to itself.
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != fit.nodes.shape[1]:
        raise ValueError("data dimensionality does not match the map")
    nodes = fit.nodes
    internal = fit.grid.internal

    if fit.grid.rows == 1 and fit.grid.cols == 1:
        return np.tile(internal[0], (arr.shape[0], 1))

    if fit.grid.rows == 1 or fit.grid.cols == 1:
        starts = nodes[fit.grid.edges[:, 0]]
        ends = nodes[fit.grid.edges[:, 1]]
        t, dist2 = _closest_on_segments(arr, starts, ends)
        pick = np.argmin(dist2, axis=1)
        t_best = t[np.arange(arr.shape[0]), pick]
        lo = internal[fit.grid.edges[pick, 0]]
        hi = internal[fit.grid.edges[pick, 1]]
        return lo + t_best[:, None] * (hi - lo)

    best_d2 = np.full(arr.shape[0], np.inf)
    coords = np.zeros((arr.shape[0], 2))
    for va, vb, vc in _grid_triangles(fit.grid):
        bary, dist2 = _closest_on_triangle(arr, nodes[va], nodes[vb],
                                           nodes[vc])
        better = dist2 < best_d2
        if np.any(better):
            best_d2[better] = dist2[better]
            coords[better] = (bary[better] @ np.stack(
                [internal[va], internal[vb], internal[vc]]))
    return coords


# ---------------------------------------------------------------------------
# canvas rasters


@dataclass
class Raster:
    """A rectangular raster over the map's internal coordinates.

    ``values`` is (resolution, resolution); cells with no nearby data
    hold NaN for averaged functions (no-data, not zero). ``kind`` is
    ``mean`` or ``density``; density cells integrate to the point
    count.
    """

    values: np.ndarray
    row_bounds: tuple
    col_bounds: tuple
    kind: str

    @property
    def cell_sizes(self) -> tuple:
        res_r, res_c = self.values.shape
        return ((self.row_bounds[1] - self.row_bounds[0]) / res_r,
                (self.col_bounds[1] - self.col_bounds[0]) / res_c)


def color(fit: MapFit, data, values=None, resolution: int = 100,
          bandwidth_cells: float = 2.0) -> Raster:
    """Rasterize a per-point function (or the data density) on the map.

    Each raster cell holds the Gaussian-kernel-weighted average of
    ``values`` over points projecting nearby; the kernel bandwidth is
    ``bandwidth_cells`` cell widths per axis. With ``values=None`` the
    raster is instead a density whose sum times the cell area equals
    the number of points (each point's kernel is renormalized by its
    in-raster mass, so boundary points lose nothing).
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    coords = project(data, fit)
    if values is not None:
        values = np.asarray(values, dtype=float)
        if values.shape != (coords.shape[0],):
            raise ValueError("values must be one number per data point")

    row_bounds = (0.0, float(fit.grid.rows - 1) if fit.grid.rows > 1 else 1.0)
    col_bounds = (0.0, float(fit.grid.cols - 1) if fit.grid.cols > 1 else 1.0)
    cell_r = (row_bounds[1] - row_bounds[0]) / resolution
    cell_c = (col_bounds[1] - col_bounds[0]) / resolution
    centers_r = row_bounds[0] + (np.arange(resolution) + 0.5) * cell_r
    centers_c = col_bounds[0] + (np.arange(resolution) + 0.5) * cell_c
    h_r = bandwidth_cells * cell_r
    h_c = bandwidth_cells * cell_c

    # separable Gaussian weights: (cells, points) per axis
    wr = np.exp(-0.5 * ((centers_r[:, None] - coords[None, :, 0]) / h_r) ** 2)
    wc = np.exp(-0.5 * ((centers_c[:, None] - coords[None, :, 1]) / h_c) ** 2)

    if values is not None:
        weight_sum = np.einsum("rp,cp->rc", wr, wc)
        value_sum = np.einsum("rp,cp,p->rc", wr, wc, values)
        with np.errstate(invalid="ignore"):
            grid_vals = np.where(weight_sum > 1e-12,
                                 value_sum / weight_sum, np.nan)
        return Raster(values=grid_vals, row_bounds=row_bounds,
                      col_bounds=col_bounds, kind="mean")

    # density: renormalize each point's kernel by its in-raster mass
    mass_r = (norm_cdf((row_bounds[1] - coords[:, 0]) / h_r)
              - norm_cdf((row_bounds[0] - coords[:, 0]) / h_r))
    mass_c = (norm_cdf((col_bounds[1] - coords[:, 1]) / h_c)
              - norm_cdf((col_bounds[0] - coords[:, 1]) / h_c))
    mass = np.maximum(mass_r * mass_c, 1e-300)
    scale = 1.0 / (2.0 * math.pi * h_r * h_c)
    density = np.einsum("rp,cp,p->rc", wr, wc, scale / mass)
    return Raster(values=density, row_bounds=row_bounds,
                  col_bounds=col_bounds, kind="density")


def export_raster_csv(raster: Raster, path) -> None:
    """Write raster cells as CSV rows (row, col, value); NaN is empty."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write("row,col,value\n")
        res_r, res_c = raster.values.shape
        for i in range(res_r):
            for j in range(res_c):
                cell = raster.values[i, j]
                text = "" if math.isnan(cell) else repr(float(cell))
                handle.write("%d,%d,%s\n" % (i, j, text))


def export_raster_npy(raster: Raster, path) -> None:
    """Save the raster array plus a JSON sidecar (shape, bounds, kind)."""
    np.save(path, raster.values)
    sidecar = str(path)
    if sidecar.endswith(".npy"):
        sidecar = sidecar[:-4]
    with open(sidecar + ".json", "w", encoding="utf-8") as handle:
        json.dump({
            "shape": list(raster.values.shape),
            "row_bounds": list(raster.row_bounds),
            "col_bounds": list(raster.col_bounds),
            "kind": raster.kind,
        }, handle, indent=2)
        handle.write("\n")


# ---------------------------------------------------------------------------
# bi-Gaussian risk surfaces


@dataclass
class RiskSurface:
    """Posterior user probability on a coordinate raster.

    ``rho`` has shape (resolution,) for 1-D coordinates and
    (resolution, resolution) for 2-D, with ``rho[i, j]`` evaluated at
    (xs[j], ys[i]). The 0.5 level set is the quadratic-discriminant
    decision boundary of the two class Gaussians.
    """

    model: GaussianPairModel
    xs: np.ndarray
    ys: np.ndarray
    rho: np.ndarray

    def rho_at(self, points) -> np.ndarray:
        return self.model.posterior(points)

    def to_raster(self) -> Raster:
        if self.ys is None:
            raise ValueError("1-D risk surfaces have no raster form")
        return Raster(values=self.rho,
                      row_bounds=(float(self.ys[0]), float(self.ys[-1])),
                      col_bounds=(float(self.xs[0]), float(self.xs[-1])),
                      kind="risk")


def bi_gaussian_risk(mean_user, cov_user, n_user,
                     mean_non, cov_non, n_non) -> GaussianPairModel:
    """Build the risk model directly from class Gaussian parameters."""
    mean_u = np.atleast_1d(np.asarray(mean_user, dtype=float))
    mean_n = np.atleast_1d(np.asarray(mean_non, dtype=float))
    cov_u = np.atleast_2d(np.asarray(cov_user, dtype=float))
    cov_n = np.atleast_2d(np.asarray(cov_non, dtype=float))
    if n_user <= 0 or n_non <= 0:
        raise ValueError("class counts must be positive")
    try:
        chol_u = np.linalg.cholesky(cov_u)
        chol_n = np.linalg.cholesky(cov_n)
    except np.linalg.LinAlgError as exc:
        raise ValueError("class covariance is not positive definite") from exc
    return GaussianPairModel(
        mean_user=mean_u, mean_non=mean_n, cov_user=cov_u, cov_non=cov_n,
        n_user=int(n_user), n_non=int(n_non), prior_multiplier=1.0,
        _chol_user=chol_u, _chol_non=chol_n)


def risk_surface(coords, labels, resolution: int = 16,
                 bounds=None) -> RiskSurface:
    """Fit per-class Gaussians on 1-D or 2-D coordinates and rasterize.

    Both classes need at least 3 points. ``bounds`` is ((lo, hi),) per
    axis; the default pads the data range by 5% per side. The posterior
    and its complement sum to one at every cell.
    """
    arr = np.asarray(coords, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[1] not in (1, 2):
        raise ValueError("risk surfaces take 1-D or 2-D coordinates")
    mask = np.asarray(labels, dtype=bool)
    if mask.shape != (arr.shape[0],):
        raise ValueError("labels must be one flag per row")
    if mask.sum() < 3 or (~mask).sum() < 3:
        raise ValueError("both classes need at least 3 points")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")

    model = fit_gaussian_mixture(arr, mask)

    if bounds is None:
        bounds = []
        for axis in range(arr.shape[1]):
            lo = float(arr[:, axis].min())
            hi = float(arr[:, axis].max())
            pad = 0.05 * (hi - lo) if hi > lo else 1.0
            bounds.append((lo - pad, hi + pad))
    if len(bounds) != arr.shape[1]:
        raise ValueError("need one (lo, hi) bound pair per axis")

    xs = np.linspace(bounds[0][0], bounds[0][1], resolution)
    if arr.shape[1] == 1:
        rho = model.posterior(xs[:, None])
        return RiskSurface(model=model, xs=xs, ys=None, rho=rho)
    ys = np.linspace(bounds[1][0], bounds[1][1], resolution)
    gx, gy = np.meshgrid(xs, ys)
    cells = np.column_stack([gx.ravel(), gy.ravel()])
    rho = model.posterior(cells).reshape(resolution, resolution)
    return RiskSurface(model=model, xs=xs, ys=ys, rho=rho)
