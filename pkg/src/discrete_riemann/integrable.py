"""
Quadratic theory on critical maps: cross-ratios, the Hirota system,
Baecklund transformations and zero-curvature transfer matrices.

Vertex positions are the critical coordinates Z of a CriticalMap; a
face (x, y, x', y') is read counterclockwise as everywhere else.  The
Baecklund parameter undoing B_lam is -lam (for the quadratic relation,
which only sees lam^2, lam itself works too), see ``inverse_parameter``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .critical import CriticalMap, HolonomyError

LINEAR, QUADRATIC = "linear", "quadratic"


class SingularFace(ValueError):
    """A face where two values coincide and the ratio is undefined."""

    def __init__(self, message, faces=None):
        super().__init__(message)
        self.faces = faces


class DegenerateEdge(ValueError):
    """An edge where the Baecklund homography degenerates."""

    def __init__(self, message, edge=None):
        super().__init__(message)
        self.edge = edge


class InconsistentSheet(RuntimeError):
    """Propagated values disagree on edges off the propagation tree."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def _corners(cm: CriticalMap, f):
    q = cm.cx.quads
    f = np.asarray(f)
    z = cm.Z
    return (f[q[:, 0]], f[q[:, 1]], f[q[:, 2]], f[q[:, 3]],
            z[q[:, 0]], z[q[:, 1]], z[q[:, 2]], z[q[:, 3]])


# ----------------------------------------------------------------------
# face residuals
# ----------------------------------------------------------------------

@dataclass
class CrossRatioReport:
    cross_ratio: np.ndarray       # per face
    diagonal_ratio: np.ndarray    # per face
    singular: np.ndarray          # faces with coincident values


def cross_ratio(a, b, c, d):
    """(b - a)(d - c) / ((a - d)(c - b)) for a face (a, b, c, d) = (x, y, x', y')."""
    return (b - a) * (d - c) / ((a - d) * (c - b))


def cross_ratio_residual(cm: CriticalMap, f, tol: float = 1e-14) -> CrossRatioReport:
    """Per-face defects of the cross-ratio and diagonal-ratio conditions.

    The cross-ratio defect is relative to the face cross-ratio of Z; the
    diagonal-ratio defect compares (f(y')-f(y))/(f(x')-f(x)) with
    (y'-y)/(x'-x).
    """
    fx, fy, fx2, fy2, x, y, x2, y2 = _corners(cm, f)
    scale = max(1.0, float(np.abs(np.asarray(f)).max()))
    dens = np.stack([fx - fy2, fx2 - fy, fx2 - fx])
    singular = (np.abs(dens) < tol * scale).any(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cr = cross_ratio(fx, fy, fx2, fy2)
        cr0 = cross_ratio(x, y, x2, y2)
        cr_res = np.abs(cr - cr0) / np.abs(cr0)
        dr = (fy2 - fy) / (fx2 - fx)
        dr_res = np.abs(dr - (y2 - y) / (x2 - x))
    cr_res[singular] = np.nan
    dr_res[singular] = np.nan
    return CrossRatioReport(cr_res, dr_res, np.flatnonzero(singular))


# ----------------------------------------------------------------------
# Hirota system
# ----------------------------------------------------------------------

def hirota_residual(cm: CriticalMap, w) -> np.ndarray:
    """|sum over the face contour of (b - a) w(a) w(b)| per face."""
    wx, wy, wx2, wy2, x, y, x2, y2 = _corners(cm, w)
    r = ((y - x) * wx * wy + (x2 - y) * wy * wx2
         + (y2 - x2) * wx2 * wy2 + (x - y2) * wy2 * wx)
    return np.abs(r)


def hirota_solve_corner(z4, w3, corner: int = 3) -> complex:
    """Value of w at one corner of a face making the Hirota residual vanish.

    z4: the four positions (x, y, x', y'); w3: the three other values in
    face order with the missing corner skipped.
    """
    z4 = np.asarray(z4, dtype=complex)
    w = list(w3)
    w.insert(corner, 0.0)
    w = np.array(w, dtype=complex)
    nxt, prv = (corner + 1) % 4, (corner - 1) % 4
    # terms containing w[corner]: (z[corner]-z[prv]) w[prv] + (z[nxt]-z[corner]) w[nxt]
    coef = (z4[corner] - z4[prv]) * w[prv] + (z4[nxt] - z4[corner]) * w[nxt]
    rest = 0j
    for k in range(4):
        a, b = k, (k + 1) % 4
        if corner in (a, b):
            continue
        rest += (z4[b] - z4[a]) * w[a] * w[b]
    if abs(coef) < 1e-300:
        raise SingularFace("corner cannot be solved: vanishing coefficient")
    return -rest / coef


def hirota_goursat(cm: CriticalMap, w0, max_sweeps: Optional[int] = None) -> np.ndarray:
    """Complete a partial Hirota field (NaN = unknown) face by face.

    Faces with exactly three known corners are solved for the fourth
    until nothing changes; unknowns left at the end stay NaN.
    """
    w = np.array(w0, dtype=complex)
    q = cm.cx.quads
    zq = cm.Z[q]
    sweeps = 0
    while True:
        known = ~np.isnan(w[q])
        cand = np.flatnonzero(known.sum(axis=1) == 3)
        if cand.size == 0:
            break
        for f in cand:
            k = known[f]
            if k.all() or k.sum() != 3:
                continue
            c = int(np.flatnonzero(~k)[0])
            v = q[f, c]
            if not np.isnan(w[v]):
                continue
            w3 = [w[q[f, j]] for j in range(4) if j != c]
            w[v] = hirota_solve_corner(zq[f], w3, c)
        sweeps += 1
        if max_sweeps is not None and sweeps >= max_sweeps:
            break
    return w


def _propagate(cm: CriticalMap, start: complex, step_fn, dtype=complex) -> np.ndarray:
    tree = cm.tree()
    out = np.zeros(cm.cx.V, dtype=dtype)
    out[cm.origin] = start
    for layer in tree.layers:
        par = tree.parent[layer]
        out[layer] = step_fn(par, layer, out[par])
    return out


def hirota_integrate(cm: CriticalMap, w, tol: float = 1e-10, f0: complex = 0.0) -> np.ndarray:
    """f with f(y) - f(x) = (y - x) w(x) w(y) and f(O) = f0.

    Raises HolonomyError naming the worst edge when the 1-form does not
    close (w is not a Hirota solution).
    """
    w = np.asarray(w, dtype=complex)
    Z = cm.Z
    f = _propagate(cm, f0, lambda p, c, fp: fp + (Z[c] - Z[p]) * w[p] * w[c])
    e = cm.cx.edges
    r = (f[e[:, 1]] - f[e[:, 0]]) - (Z[e[:, 1]] - Z[e[:, 0]]) * w[e[:, 0]] * w[e[:, 1]]
    k = int(np.argmax(np.abs(r)))
    scale = max(1.0, float(np.abs(f).max()))
    if abs(r[k]) > tol * scale:
        raise HolonomyError(f"Hirota 1-form not closed: mismatch {abs(r[k]):.3g} at edge {k}",
                            edge=k, mismatch=float(abs(r[k])))
    return f


def hirota_from_quadratic(cm: CriticalMap, f, w0: complex = 1.0) -> np.ndarray:
    """Hirota field of a quadratic holomorphic f, normalized by w(O) = w0.

    w(x) w(y) = (f(y) - f(x)) / (y - x) on every edge; the remaining
    freedom (lam on one color, 1/lam on the other) is fixed by w(O).
    """
    f = np.asarray(f, dtype=complex)
    Z = cm.Z
    return _propagate(cm, w0, lambda p, c, wp: (f[c] - f[p]) / ((Z[c] - Z[p]) * wp))


def circle_pattern_residual(cm: CriticalMap, w) -> float:
    """Check f(y) - f(x) = r(x) e^{i theta(y)} (y - x) with r = w on primal, e^{i theta} = w on dual.

    Requires w real on primal and unimodular on dual vertices; f is the
    Hirota integral of w.
    """
    w = np.asarray(w, dtype=complex)
    col = cm.cx.color
    prim, dual = col == 0, col == 1
    if np.abs(w[prim].imag).max(initial=0) > 1e-12 or np.abs(np.abs(w[dual]) - 1).max(initial=0) > 1e-12:
        raise ValueError("w must be real on primal and unimodular on dual vertices")
    f = hirota_integrate(cm, w)
    e = cm.cx.edges                      # (primal, dual)
    r = w[e[:, 0]].real
    phase = w[e[:, 1]]
    lhs = f[e[:, 1]] - f[e[:, 0]]
    rhs = r * phase * (cm.Z[e[:, 1]] - cm.Z[e[:, 0]])
    return float(np.abs(lhs - rhs).max())


# ----------------------------------------------------------------------
# Baecklund transformations
# ----------------------------------------------------------------------

def inverse_parameter(lam: complex, kind: str = LINEAR) -> complex:
    """Parameter mu with B_mu^{f(O)}(B_lam^u(f)) = f."""
    return -lam


def backlund_step(kind: str, fx, fy, gx, lam, zx, zy, tol: float = 1e-14):
    """g(y) from g(x) across the edge (x, y) with base values f(x), f(y)."""
    a = zy - zx
    if kind == LINEAR:
        den = lam + a
        num = lam - a
        if np.any(np.abs(den) < tol):
            raise DegenerateEdge("lambda + (y - x) vanishes")
        # (g(x) - f(y)) / (g(y) - f(x)) = (lam - a) / (lam + a)
        if np.any(np.abs(num) < tol):
            raise DegenerateEdge("lambda - (y - x) vanishes")
        return fx + (gx - fy) * den / num
    if kind == QUADRATIC:
        if np.any(np.abs(lam) < tol):
            raise DegenerateEdge("lambda vanishes")
        qv = a * a / (lam * lam)
        coef = (fx - fy) + qv * (gx - fx)
        if np.any(np.abs(coef) < tol):
            raise DegenerateEdge("degenerate quadratic step")
        return (gx * (fx - fy) + qv * (gx - fx) * fy) / coef
    raise ValueError(f"unknown kind {kind!r}")


def backlund_edge_residual(kind: str, f, g, lam, zx, zy, ex, ey):
    """Defect of the defining relation on edges (ex, ey)."""
    a = zy - zx
    fx, fy, gx, gy = f[ex], f[ey], g[ex], g[ey]
    if kind == LINEAR:
        return np.abs((gx - fy) * (lam + a) - (gy - fx) * (lam - a))
    qv = a * a / (lam * lam)
    return np.abs((gy - gx) * (fx - fy) - qv * (gx - fx) * (fy - gy))


@dataclass
class BacklundSheet:
    base: np.ndarray
    lam: complex
    u: complex
    values: np.ndarray
    kind: str
    edge_residual: float


def backlund(cm: CriticalMap, f, lam, u, kind: str = LINEAR,
             tol: Optional[float] = 1e-10) -> BacklundSheet:
    """B_lam^u(f) propagated by BFS from the origin.

    The defining relation is re-evaluated on every edge; a relative
    defect above tol raises InconsistentSheet.
    """
    f = np.asarray(f, dtype=complex)
    lam, u = complex(lam), complex(u)
    Z = cm.Z
    g = _propagate(cm, u, lambda p, c, gp: backlund_step(kind, f[p], f[c], gp, lam, Z[p], Z[c]))
    e = cm.cx.edges
    res = backlund_edge_residual(kind, f, g, lam, Z[e[:, 0]], Z[e[:, 1]], e[:, 0], e[:, 1])
    scale = max(1.0, float(np.abs(g).max()), float(np.abs(f).max())) ** 2 * max(1.0, abs(lam))
    rel = float(res.max() / scale)
    if tol is not None and (not np.isfinite(rel) or rel > tol):
        raise InconsistentSheet(f"Baecklund sheet inconsistent: edge defect {rel:.3g}", rel)
    return BacklundSheet(f, lam, u, g, kind, rel)


def roundtrip_error(cm: CriticalMap, f, lam, u, kind: str = LINEAR) -> float:
    """max |B_{-lam}^{f(O)}(B_lam^u(f)) - f| relative to max |f|."""
    f = np.asarray(f, dtype=complex)
    g = backlund(cm, f, lam, u, kind).values
    back = backlund(cm, g, inverse_parameter(lam, kind), f[cm.origin], kind).values
    return float(np.abs(back - f).max() / max(1.0, np.abs(f).max()))


def cube_consistency(face_z, face_f, lam, u, kind: str = LINEAR) -> float:
    """Disagreement of the two completions of the cube over one face.

    With g(x) = u, the value g(x') is obtained across (x, y), (y, x')
    and across (x, y'), (y', x'); the two values must agree.
    """
    x, y, x2, y2 = np.asarray(face_z, dtype=complex)
    fx, fy, fx2, fy2 = np.asarray(face_f, dtype=complex)
    gy = backlund_step(kind, fx, fy, u, lam, x, y)
    gy2 = backlund_step(kind, fx, fy2, u, lam, x, y2)
    a = backlund_step(kind, fy, fx2, gy, lam, y, x2)
    b = backlund_step(kind, fy2, fx2, gy2, lam, y2, x2)
    return float(abs(a - b) / max(1.0, abs(a)))


def random_critical_face(rng, delta: float = 1.0):
    """Rhombus (x, y, x', y') with random position, orientation and angle."""
    t = rng.uniform(0, 2 * np.pi)
    ang = rng.uniform(0.2, np.pi - 0.2)
    a = delta * np.exp(1j * t)
    b = delta * np.exp(1j * (t + ang))
    x = complex(rng.normal(), rng.normal())
    return np.array([x, x + a, x + a + b, x + b])


def complete_face(face_z, f3, kind: str = LINEAR) -> complex:
    """f(x') making the face linear (diagonal ratio) or quadratic (cross-ratio) holomorphic."""
    x, y, x2, y2 = face_z
    fx, fy, fy2 = f3
    if kind == LINEAR:
        return fx + (fy2 - fy) * (x2 - x) / (y2 - y)
    c = cross_ratio(x, y, x2, y2)
    # c (a - d)(c' - b) = (b - a)(d - c'): linear in c' = f(x')
    # c (fx - fy2)(X - fy) = (fy - fx)(fy2 - X)
    A = c * (fx - fy2) + (fy - fx)
    B = c * (fx - fy2) * fy + (fy - fx) * fy2
    return B / A


# ----------------------------------------------------------------------
# tangent exponential
# ----------------------------------------------------------------------

@dataclass
class TangentExponential:
    values: np.ndarray
    kernel_norm: float        # |dB_lam^u(f)[values]| relative to |values|
    epsg_residual: float
    step: float


def _log_derivative(cm: CriticalMap, f, e) -> np.ndarray:
    """g with (g(x) + g(y)) = (e(y) - e(x)) / (f(y) - f(x)) on tree edges, g(O) = 0."""
    f, e = np.asarray(f), np.asarray(e)
    return _propagate(cm, 0.0, lambda p, c, gp: (e[c] - e[p]) / (f[c] - f[p]) - gp)


def epsg_residual(cm: CriticalMap, f, g) -> float:
    """max over faces of |(g(y')-g(y))(f(x')-f(x)) - (f(y')-f(y))(g(x')-g(x))|, relative."""
    q = cm.cx.quads
    f, g = np.asarray(f), np.asarray(g)
    lhs = (g[q[:, 3]] - g[q[:, 1]]) * (f[q[:, 2]] - f[q[:, 0]])
    rhs = (f[q[:, 3]] - f[q[:, 1]]) * (g[q[:, 2]] - g[q[:, 0]])
    scale = max(1e-300, float(np.abs(lhs).max()), float(np.abs(rhs).max()))
    return float(np.abs(lhs - rhs).max() / scale)


def backlund_step_derivative(kind: str, fx, fy, gx, lam, zx, zy):
    """d g(y) / d g(x) for the homography of ``backlund_step``."""
    a = zy - zx
    if kind == LINEAR:
        return (lam + a) / (lam - a)
    qv = a * a / (lam * lam)
    al, be = (fx - fy) + qv * fy, -qv * fx * fy
    ga, de = qv, (fx - fy) - qv * fx
    return (al * de - be * ga) / (ga * gx + de) ** 2


def _initial_value_derivative(cm: CriticalMap, g, mu, v0, kind):
    """Exact d/dv of B_mu^v(g) at v = v0 by forward propagation."""
    Z = cm.Z
    vals = backlund(cm, g, mu, v0, kind, tol=None).values
    tree = cm.tree()
    out = np.zeros(cm.cx.V, dtype=complex)
    out[cm.origin] = 1.0
    for layer in tree.layers:
        par = tree.parent[layer]
        out[layer] = out[par] * backlund_step_derivative(kind, g[par], g[layer], vals[par],
                                                         mu, Z[par], Z[layer])
    return out


def tangent_exponential(cm: CriticalMap, f, lam, u, kind: str = LINEAR,
                        h: float = 1e-6, method: str = "central") -> TangentExponential:
    """Derivative in v of B_{-lam}^v(B_lam^u(f)) at v = f(O).

    method "central" takes a central difference of step h; "exact"
    differentiates the chain of edge homographies.  The result spans
    the kernel of dB_lam^u at f.  For the quadratic kind the returned
    epsg residual is that of the logarithmic derivative of the Hirota
    field; for the linear kind it is the diagonal-ratio defect of the
    deformation itself.
    """
    f = np.asarray(f, dtype=complex)
    g = backlund(cm, f, lam, u, kind).values
    mu = inverse_parameter(lam, kind)
    v0 = f[cm.origin]
    if method == "central":
        plus = backlund(cm, g, mu, v0 + h, kind).values
        minus = backlund(cm, g, mu, v0 - h, kind).values
        e = (plus - minus) / (2 * h)
    elif method == "exact":
        e = _initial_value_derivative(cm, g, mu, v0, kind)
    else:
        raise ValueError(f"unknown method {method!r}")
    # kernel: directional derivative of B_lam^u along e
    t = h
    bp = backlund(cm, f + t * e, lam, u, kind, tol=None).values
    bm = backlund(cm, f - t * e, lam, u, kind, tol=None).values
    kern = float(np.abs((bp - bm) / (2 * t)).max() / max(1.0, np.abs(e).max()))
    if kind == QUADRATIC:
        res = epsg_residual(cm, f, _log_derivative(cm, f, e))
    else:
        res = epsg_residual(cm, f, e)
    return TangentExponential(e, kern, res, h)


# ----------------------------------------------------------------------
# zero-curvature representation
# ----------------------------------------------------------------------

def transfer_linear(fx, fy, zx, zy, lam):
    """L((x,y); lam) for a holomorphic f and its lam-derivative."""
    a = zy - zx
    L = np.array([[lam + a, -2 * a * (fx + fy)], [0, lam - a]], dtype=complex)
    dL = np.array([[1, 0], [0, 1]], dtype=complex)
    return L, dL


def transfer_hirota(wx, wy, zx, zy, lam):
    """L((x,y); lam) for a Hirota field w and its lam-derivative."""
    a = zy - zx
    L = np.array([[1, -a * wy], [-lam * a / wx, wy / wx]], dtype=complex)
    dL = np.array([[0, 0], [-a / wx, 0]], dtype=complex)
    return L, dL


def _transfer(kind, data, p, c, Z, lam):
    if kind == LINEAR:
        return transfer_linear(data[p], data[c], Z[p], Z[c], lam)
    return transfer_hirota(data[p], data[c], Z[p], Z[c], lam)


@dataclass
class TransferData:
    kind: str
    lambdas: np.ndarray
    psi: np.ndarray           # (n_lam, V, 2, 2)
    dpsi: np.ndarray          # (n_lam, V, 2, 2)
    A: np.ndarray             # (n_lam, V, 2, 2) dpsi psi^-1
    face_mismatch: np.ndarray  # (n_lam,) max over faces, relative
    singular: list            # (lam index, vertex) where psi is singular

    def coefficients(self, cm: CriticalMap, data) -> np.ndarray:
        """Per-edge polynomial coefficients: array (E, 2, 2, 2), [..., j] of lam^j."""
        e = cm.cx.edges
        out = np.zeros((len(e), 2, 2, 2), dtype=complex)
        for k, (p, c) in enumerate(e):
            L0, dL = _transfer(self.kind, data, p, c, cm.Z, 0.0)
            out[k, :, :, 0] = L0
            out[k, :, :, 1] = dL
        return out


def face_products(cm: CriticalMap, data, lam, kind: str = LINEAR) -> float:
    """Largest relative mismatch of L(y,x')L(x,y) against L(y',x')L(x,y') over faces."""
    q = cm.cx.quads
    Z = cm.Z
    worst = 0.0
    for x, y, x2, y2 in q:
        P1 = _transfer(kind, data, y, x2, Z, lam)[0] @ _transfer(kind, data, x, y, Z, lam)[0]
        P2 = _transfer(kind, data, y2, x2, Z, lam)[0] @ _transfer(kind, data, x, y2, Z, lam)[0]
        s = max(np.abs(P1).max(), np.abs(P2).max(), 1e-300)
        worst = max(worst, float(np.abs(P1 - P2).max() / s))
    return worst


def transfer_matrices(cm: CriticalMap, data, lambdas, kind: str = LINEAR,
                      cond_limit: float = 1e12) -> TransferData:
    """Moving frame Psi(.; lam) with Psi(O) = I, its lam-derivative and A = Psi' Psi^-1.

    data is the holomorphic f (linear kind) or the Hirota field w.
    """
    data = np.asarray(data, dtype=complex)
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=complex))
    V = cm.cx.V
    tree = cm.tree()
    psi = np.zeros((len(lambdas), V, 2, 2), dtype=complex)
    dpsi = np.zeros_like(psi)
    A = np.full_like(psi, np.nan)
    singular = []
    mism = np.zeros(len(lambdas))
    for i, lam in enumerate(lambdas):
        psi[i, cm.origin] = np.eye(2)
        for v in tree.order[1:]:
            p = tree.parent[v]
            L, dL = _transfer(kind, data, p, v, cm.Z, lam)
            psi[i, v] = L @ psi[i, p]
            dpsi[i, v] = dL @ psi[i, p] + L @ dpsi[i, p]
        for v in range(V):
            if np.linalg.cond(psi[i, v]) > cond_limit:
                singular.append((i, v))
            else:
                A[i, v] = dpsi[i, v] @ np.linalg.inv(psi[i, v])
        mism[i] = face_products(cm, data, lam, kind)
    return TransferData(kind, lambdas, psi, dpsi, A, mism, singular)


def psi_along(cm: CriticalMap, data, lam, path, kind: str = LINEAR) -> np.ndarray:
    """Ordered product of transfer matrices along a vertex path starting at O."""
    M = np.eye(2, dtype=complex)
    for p, c in zip(path[:-1], path[1:]):
        M = _transfer(kind, data, p, c, cm.Z, lam)[0] @ M
    return M


def pole_estimates(A_samples, lambdas, degree: int = 4) -> np.ndarray:
    """Common poles of the entries of A(lam) from a linearized rational fit.

    Fits a_ij(lam) q(lam) = p_ij(lam) by least squares with q monic of the
    given degree and deg p_ij <= degree; returns the roots of q.  Poles
    of higher order need a degree counting multiplicities.
    """
    lambdas = np.asarray(lambdas, dtype=complex)
    R = float(np.abs(lambdas).max()) or 1.0
    lambdas = lambdas / R                      # keep the Vandermonde rows O(1)
    vals = np.asarray(A_samples).reshape(len(lambdas), -1)
    n, m = len(lambdas), vals.shape[1]
    P = np.vander(lambdas, degree + 1, increasing=True)   # 1, lam, .., lam^d
    # unknowns: q_0..q_{d-1}, then p coefficients for each entry
    rows, rhs = [], []
    for j in range(m):
        blk = np.zeros((n, degree + m * (degree + 1)), dtype=complex)
        blk[:, :degree] = vals[:, j:j + 1] * P[:, :degree]
        blk[:, degree + j * (degree + 1): degree + (j + 1) * (degree + 1)] = -P
        rows.append(blk)
        rhs.append(-vals[:, j] * P[:, degree])
    sol = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)[0]
    q = np.concatenate([sol[:degree], [1.0]])
    return R * np.roots(q[::-1])
