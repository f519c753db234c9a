"""Hadamard shape derivatives of Steklov eigenvalues.

All boundary integrals use the piecewise-linear (in arclength) nodal
representation of the squared trace quantities, with the normal-derivative
square replaced by sigma^2 u^2 through the boundary condition.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ClusteredEigenvalue
from .fem import SteklovSpectrum
from .geometry import BoundaryField, BoundaryPolyline
from .graphs import GraphPair

CLUSTER_TOL = 1e-3


@dataclass(frozen=True)
class CurvatureField:
    """Discrete curvature, one value per polyline vertex."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class ClusterDerivativeMatrix:
    """Directional-derivative matrix of an m-fold eigenvalue cluster."""

    matrix: np.ndarray

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)


def polyline_curvature(b: BoundaryPolyline) -> CurvatureField:
    """Turning angle at each vertex over half the adjacent edge lengths.

    Positive at convex (counterclockwise) corners; the nodal value times
    the local P1 weight recovers the turning-angle measure.
    """
    v = b.vertices
    e = np.roll(v, -1, axis=0) - v          # edge i: v_i -> v_{i+1}
    lens = np.linalg.norm(e, axis=1)
    eprev = np.roll(e, 1, axis=0)
    lprev = np.roll(lens, 1)
    cross = eprev[:, 0] * e[:, 1] - eprev[:, 1] * e[:, 0]
    dot = np.sum(eprev * e, axis=1)
    ang = np.arctan2(cross, dot)
    return CurvatureField(ang / (0.5 * (lprev + lens)))


def vertex_normals(b: BoundaryPolyline):
    """Outward unit normal per vertex (normalized mean of adjacent edge normals)."""
    v = b.vertices
    e = np.roll(v, -1, axis=0) - v
    n_edge = np.column_stack([e[:, 1], -e[:, 0]])
    n_edge /= np.linalg.norm(n_edge, axis=1)[:, None]
    n_vert = n_edge + np.roll(n_edge, 1, axis=0)
    norm = np.linalg.norm(n_vert, axis=1)
    norm = np.where(norm < 1e-14, 1.0, norm)
    return n_vert / norm[:, None]


def _vertex_arcs(spec: SteklovSpectrum):
    """Arclength of each polyline vertex along the mesh boundary loop."""
    space = spec.space
    mesh = space.mesh
    loop_arcs = mesh.boundary_arclengths()
    return loop_arcs[mesh.boundary_vertex_map]


def interpolate_to_boundary_dofs(spec: SteklovSpectrum, vertex_values):
    """P1 interpolation (in arclength) of per-polyline-vertex data onto the
    boundary dofs of the spectrum's space."""
    space = spec.space
    arcs_v = _vertex_arcs(spec)
    per = space.mesh.boundary_arclengths()
    total = per[-1] + np.linalg.norm(
        space.mesh.vertices[space.mesh.boundary_loop[-1]]
        - space.mesh.vertices[space.mesh.boundary_loop[0]])
    order = np.argsort(arcs_v)
    xs = arcs_v[order]
    ys = np.asarray(vertex_values, dtype=float)[order]
    # periodic extension for interpolation across the seam
    xs_ext = np.concatenate([xs, [xs[0] + total]])
    ys_ext = np.concatenate([ys, [ys[0]]])
    return np.interp(space.boundary_arc, xs_ext, ys_ext)


def _interval_lengths(spec: SteklovSpectrum):
    space = spec.space
    arc = space.boundary_arc
    pts = space.dof_coords[space.boundary_dofs]
    seg = np.diff(arc)
    last = np.linalg.norm(pts[0] - pts[-1])
    return np.concatenate([seg, [last]])


def boundary_integral(spec: SteklovSpectrum, f, g):
    """Integral over the boundary of the product of two P1 nodal functions."""
    L = _interval_lengths(spec)
    f1 = np.roll(f, -1)
    g1 = np.roll(g, -1)
    return float(np.sum(L / 6.0 * (2 * f * g + f * g1 + f1 * g + 2 * f1 * g1)))


def integral_weights(spec: SteklovSpectrum, f):
    """Vector w with w . g = boundary_integral(f, g) for nodal g."""
    L = _interval_lengths(spec)
    Lm = np.roll(L, 1)
    return (L / 6.0) * (2 * f + np.roll(f, -1)) + (Lm / 6.0) * (2 * f + np.roll(f, 1))


def _pair_integrand(spec: SteklovSpectrum, i, j, h_dofs):
    sigma = 0.5 * (spec.eigenvalues[i] + spec.eigenvalues[j])
    ui, uj = spec.traces[:, i], spec.traces[:, j]
    ti, tj = spec.tangential[:, i], spec.tangential[:, j]
    return ti * tj - sigma**2 * ui * uj - sigma * h_dofs * ui * uj


def _as_dof_values(spec: SteklovSpectrum, field):
    if isinstance(field, BoundaryField):
        vals = field.values
        if field.is_vector:
            raise ValueError("scalar V.n field expected here")
    elif isinstance(field, CurvatureField):
        vals = field.values
    else:
        vals = np.asarray(field, dtype=float)
    nb = len(spec.space.boundary_dofs)
    if vals.shape == (nb,):
        return vals
    return interpolate_to_boundary_dofs(spec, vals)


def cluster_indices(spec: SteklovSpectrum, k, cluster_tol=CLUSTER_TOL):
    """Contiguous index range of eigenvalues within cluster_tol of sigma_k."""
    w = spec.eigenvalues
    scale = max(abs(w[k]), 1e-12)
    lo = k
    while lo > 1 and abs(w[lo] - w[lo - 1]) < cluster_tol * scale:
        lo -= 1
    hi = k
    while hi + 1 < len(w) and abs(w[hi + 1] - w[hi]) < cluster_tol * scale:
        hi += 1
    return lo, hi


def eigenvalue_shape_derivative(spec: SteklovSpectrum, k, vn, h,
                                cluster_tol=CLUSTER_TOL) -> float:
    """Derivative of a simple sigma_k along a normal perturbation field.

    vn and h are per-polyline-vertex fields (or per-boundary-dof arrays);
    raises ClusteredEigenvalue when the gap test fails.
    """
    lo, hi = cluster_indices(spec, k, cluster_tol)
    if lo != hi:
        raise ClusteredEigenvalue(
            f"sigma_{k} clusters with indices [{lo}, {hi}]")
    vn_d = _as_dof_values(spec, vn)
    h_d = _as_dof_values(spec, h)
    f = _pair_integrand(spec, k, k, h_d)
    return boundary_integral(spec, f, vn_d)


def cluster_matrix(spec: SteklovSpectrum, cluster, vn, h) -> ClusterDerivativeMatrix:
    """Directional-derivative matrix M of a cluster (an index range)."""
    lo, hi = cluster
    vn_d = _as_dof_values(spec, vn)
    h_d = _as_dof_values(spec, h)
    m = hi - lo + 1
    mat = np.zeros((m, m))
    for a in range(m):
        for bb in range(a, m):
            val = boundary_integral(
                spec, _pair_integrand(spec, lo + a, lo + bb, h_d), vn_d)
            mat[a, bb] = val
            mat[bb, a] = val
    return ClusterDerivativeMatrix(mat)


def _edge_frames(b: BoundaryPolyline):
    """Unit tangent and outward normal of every polyline edge."""
    v = b.vertices
    e = np.roll(v, -1, axis=0) - v
    el = np.linalg.norm(e, axis=1)
    safe = np.where(el < 1e-300, 1.0, el)
    tau = e / safe[:, None]
    nrm = np.column_stack([tau[:, 1], -tau[:, 0]])
    return tau, nrm, el


def _interval_geometry(spec: SteklovSpectrum, b: BoundaryPolyline):
    """Boundary-dof interval data for edgewise integration.

    Returns (L, edge, lam0, lam1, span): per interval its length, the
    polyline edge it lies on, the barycentric positions of its endpoints
    along that edge, and the edge's arclength span.
    """
    arc = spec.space.boundary_arc
    L = _interval_lengths(spec)
    arcs_v = _vertex_arcs(spec)
    total = float(arc[-1] + L[-1])
    arcs_ext = np.concatenate([arcs_v, [arcs_v[0] + total]])
    edge = np.searchsorted(arcs_v, arc + 1e-12 * max(total, 1.0),
                           side="right") - 1
    edge = np.clip(edge, 0, len(b) - 1)
    a0 = arcs_ext[edge]
    span = arcs_ext[edge + 1] - a0
    span = np.where(span < 1e-300, 1.0, span)
    lam0 = (arc - a0) / span
    lam1 = (arc + L - a0) / span
    return L, edge, lam0, lam1, span


def _pair_weights(spec: SteklovSpectrum, a, bb, b: BoundaryPolyline, geom):
    """Vertex-velocity weights of the pair (a, bb) shape derivative.

    Returns W of shape (n_vertices, 2) such that the derivative of the
    boundary functional under a vertex velocity field V (piecewise linear
    along the polyline) is sum_j V_j . W_j.  The polygon-exact Hadamard
    formula is used: for harmonic eigenfunctions,
      d sigma = int (u_tau.u_tau - sigma^2 u u) V.n ds
                - sigma int (u_a u_tau_b + u_b u_tau_a) V.tau ds
                - sigma int u_a u_b div_tau V ds,
    with edge frames (tau, n) constant per edge, so no curvature field is
    needed and corner effects of the discrete parametrization are captured.
    """
    L, edge, lam0, lam1, span = geom
    tau, nrm, _ = _edge_frames(b)
    sig = 0.5 * (spec.eigenvalues[a] + spec.eigenvalues[bb])
    ua, ub = spec.traces[:, a], spec.traces[:, bb]
    ta, tb = spec.tangential[:, a], spec.tangential[:, bb]
    fA = ta * tb - sig**2 * ua * ub       # multiplies V.n
    fB = -sig * (ua * tb + ub * ta)       # multiplies V.tau
    fC = -sig * ua * ub                   # multiplies div_tau V
    nv = len(b)
    m1 = np.roll(np.arange(len(L)), -1)

    W = np.zeros((nv, 2))
    j1 = (edge + 1) % nv
    for f, vecs in ((fA, nrm), (fB, tau)):
        f0, f1 = f, f[m1]
        cg0 = L / 6.0 * (2 * f0 + f1)
        cg1 = L / 6.0 * (f0 + 2 * f1)
        w_lo = cg0 * (1 - lam0) + cg1 * (1 - lam1)
        w_hi = cg0 * lam0 + cg1 * lam1
        np.add.at(W, edge, w_lo[:, None] * vecs[edge])
        np.add.at(W, j1, w_hi[:, None] * vecs[edge])
    intC = L / 2.0 * (fC + fC[m1]) / span
    np.add.at(W, edge, -intC[:, None] * tau[edge])
    np.add.at(W, j1, intC[:, None] * tau[edge])
    return W


def _gradient_rows(spec, k, b, transform, cluster_tol):
    """Gradient entries through a linear map of vertex-velocity weights.

    transform maps a weight array W (n_vertices, 2) to the vector of
    directional derivatives along the parametrization's basis velocities.
    Simple eigenvalue: derivative of the smooth branch through u_k.
    Clustered eigenvalue: per coordinate the minimum eigenvalue of the
    cluster matrix.  For k at the bottom of the cluster this is the exact
    one-sided derivative (sigma_k follows the lowest splitting branch);
    higher in the cluster it is the conservative lower bound, so the
    ascent cannot overshoot across a branch crossing.
    """
    lo, hi = cluster_indices(spec, k, cluster_tol)
    geom = _interval_geometry(spec, b)
    if lo == hi:
        return transform(_pair_weights(spec, k, k, b, geom))
    m = hi - lo + 1
    rows = {}
    for a in range(m):
        for bb in range(a, m):
            rows[(a, bb)] = transform(_pair_weights(spec, lo + a, lo + bb, b, geom))
    n_entries = len(next(iter(rows.values())))
    grads = np.zeros(n_entries)
    mat = np.zeros((m, m))
    for r in range(n_entries):
        for a in range(m):
            for bb in range(a, m):
                mat[a, bb] = rows[(a, bb)][r]
                mat[bb, a] = mat[a, bb]
        grads[r] = np.linalg.eigvalsh(mat)[0]
    return grads


def vertex_field_derivative(spec: SteklovSpectrum, k, b: BoundaryPolyline,
                            field, cluster_tol=CLUSTER_TOL) -> float:
    """Derivative of a simple sigma_k under a per-vertex velocity field.

    field holds one 2D velocity per polyline vertex (BoundaryField vector
    variant or an (n, 2) array); the boundary moves piecewise linearly.
    Raises ClusteredEigenvalue when the gap test fails.
    """
    lo, hi = cluster_indices(spec, k, cluster_tol)
    if lo != hi:
        raise ClusteredEigenvalue(
            f"sigma_{k} clusters with indices [{lo}, {hi}]")
    vals = field.values if isinstance(field, BoundaryField) else \
        np.asarray(field, dtype=float)
    if vals.shape != (len(b), 2):
        raise ValueError("field must hold one 2D velocity per vertex")
    geom = _interval_geometry(spec, b)
    W = _pair_weights(spec, k, k, b, geom)
    return float(np.sum(vals * W))


def support_gradient(spec: SteklovSpectrum, k, b: BoundaryPolyline,
                     cluster_tol=CLUSTER_TOL) -> np.ndarray:
    """Gradient of sigma_k with respect to every support value p_i.

    Entry i is the derivative under the exact vertex velocity of the
    reconstruction: raising p_i moves vertex i along (cos theta_i,
    sin theta_i) and shears the neighbors tangentially through the
    finite-difference p'; clusters are handled per _gradient_rows.
    """
    n = len(b)
    theta = 2.0 * np.pi * np.arange(n) / n
    c, s = np.cos(theta), np.sin(theta)
    nth = np.column_stack([c, s])
    tth = np.column_stack([-s, c])
    half_h = n / (4.0 * np.pi)    # 1/(2h) for the support grid step

    def transform(W):
        wn = np.einsum("ij,ij->i", nth, W)
        wt = np.einsum("ij,ij->i", tth, W)
        return wn + half_h * (np.roll(wt, 1) - np.roll(wt, -1))

    return _gradient_rows(spec, k, b, transform, cluster_tol)


def graph_gradient(spec: SteklovSpectrum, k, gp: GraphPair,
                   cluster_tol=CLUSTER_TOL):
    """Gradients of sigma_k with respect to lower-graph values p and
    upper-graph values q (vertical vertex perturbations V = (0, chi_i))."""
    b = gp.polyline()
    lower = gp.lower_vertex_indices()
    upper = gp.upper_vertex_indices()

    def transform(W):
        return np.concatenate([W[lower, 1], W[upper, 1]])

    g = _gradient_rows(spec, k, b, transform, cluster_tol)
    n = gp.n
    return g[:n], g[n:]


def gradient_to_json_dict(grad):
    return {"gradient": np.asarray(grad).tolist()}
