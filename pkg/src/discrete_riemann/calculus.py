"""
Discrete exterior calculus on a quad-graph and its double.

Forms on the double Lambda carry the Hodge star and the scalar product;
forms on the diamond carry the wedge product.  The averaging map A
carries diamond forms to Lambda forms and the heterogeneous wedge pairs
two Lambda 1-forms into a diamond 2-form.

Cochains are plain numpy arrays indexed as in :mod:`cellular`:

    Lambda 0- and 2-forms   length V  (2-cell at v is the dual face v*)
    Lambda 1-forms          length 2F (primal diagonals, then dual ones)
    diamond 0-forms         length V
    diamond 1-forms         length E  (edges oriented primal -> dual)
    diamond 2-forms         length F
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .cellular import DIAMOND, LAMBDA, PRIMAL, ComplexError, QuadComplex


class SolverError(RuntimeError):
    """An iterative solve failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotLiftable(ValueError):
    """A Lambda cocycle whose holonomies differ between the two graphs."""

    def __init__(self, message, cycle=None, mismatch=None):
        super().__init__(message)
        self.cycle = cycle
        self.mismatch = mismatch


def _require_closed(cx: QuadComplex, what: str):
    if not cx.closed:
        raise ComplexError(f"{what} needs a closed complex (dual cells are truncated at the boundary)")


# ----------------------------------------------------------------------
# Hodge star and Laplacians on Lambda
# ----------------------------------------------------------------------

def star_matrix1(cx: QuadComplex) -> sp.csr_matrix:
    """Hodge star on Lambda 1-forms; it squares to -1."""
    F = cx.F
    ar = np.arange(F)
    rows = np.concatenate([ar, F + ar])
    cols = np.concatenate([F + ar, ar])
    vals = np.concatenate([-1.0 / cx.rho, cx.rho])
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * F, 2 * F))


def hodge_star(cx: QuadComplex, values, degree: int) -> np.ndarray:
    """*: C^k(Lambda) -> C^{2-k}(Lambda)."""
    _require_closed(cx, "the Hodge star")
    values = np.asarray(values)
    if degree in (0, 2):
        return values.copy()
    if degree == 1:
        return star_matrix1(cx) @ values
    raise ValueError("degree must be 0, 1 or 2")


def weight_matrix(cx: QuadComplex) -> sp.dia_matrix:
    return sp.diags(cx.lambda_weights)


def laplacian_matrix(cx: QuadComplex, degree: int = 0) -> sp.csr_matrix:
    """Delta = -d*d* - *d*d on Lambda k-forms.

    On functions this is sum_k rho(x,x_k) (f(x) - f(x_k)) and it is also
    assembled this way on bounded complexes (boundary vertices keep
    their truncated star).
    """
    D0, D1 = cx.d0_lambda, cx.d1_lambda
    if degree == 0:
        return (D0.T @ weight_matrix(cx) @ D0).tocsr()
    _require_closed(cx, "the Laplacian on 1- and 2-forms")
    S = star_matrix1(cx)
    if degree == 1:
        return (-(D0 @ D1 @ S) - (S @ D0 @ D1)).tocsr()
    if degree == 2:
        return (-(D1 @ S @ D0)).tocsr()
    raise ValueError("degree must be 0, 1 or 2")


def laplacian(cx: QuadComplex, values, degree: int = 0) -> np.ndarray:
    return laplacian_matrix(cx, degree) @ np.asarray(values)


# ----------------------------------------------------------------------
# products
# ----------------------------------------------------------------------

def scalar_product(cx: QuadComplex, a, b) -> complex:
    """(a, b) = 1/2 sum over Lambda edges of rho (int a) conj(int b)."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != (2 * cx.F,) or b.shape != (2 * cx.F,):
        raise ValueError("both arguments must be Lambda 1-forms of this complex")
    return 0.5 * np.sum(cx.lambda_weights * a * np.conj(b))


def norm2(cx: QuadComplex, a) -> float:
    return float(np.real(scalar_product(cx, a, a)))


def wedge_hetero(cx: QuadComplex, a, b) -> np.ndarray:
    """Diamond 2-form a ^ b of two Lambda 1-forms, one value per quad.

    Only the two diagonals of a quad enter:
    (1/2)(a(e) b(e*) - a(e*) b(e)).
    """
    F = cx.F
    a, b = np.asarray(a), np.asarray(b)
    return 0.5 * (a[:F] * b[F:] - a[F:] * b[:F])


def iint(cx: QuadComplex, a, b) -> complex:
    """Double integral over the whole surface of a ^ b."""
    return complex(np.sum(wedge_hetero(cx, a, b)))


def side_values(cx: QuadComplex, nu) -> np.ndarray:
    """(F, 4) values of a diamond 1-form on sides (x,y),(x',y),(x',y'),(x,y')."""
    return np.asarray(nu)[cx.sides]


def _ccw_corner_steps(cx, nu):
    """Integrals along the CCW boundary steps x->y, y->x', x'->y', y'->x."""
    s = side_values(cx, nu)
    return np.stack([s[:, 0], -s[:, 1], s[:, 2], -s[:, 3]], axis=1)


def wedge_diamond(cx: QuadComplex, a, ka: int, b, kb: int) -> np.ndarray:
    """Wedge product of diamond cochains of degrees ka and kb."""
    a, b = np.asarray(a), np.asarray(b)
    if ka + kb > 2:
        raise ValueError("degree of the product exceeds 2")
    if ka > kb:
        out = wedge_diamond(cx, b, kb, a, ka)
        return -out if (ka == 1 and kb == 1) else out
    if ka == 0 and kb == 0:
        return a * b
    if ka == 0 and kb == 1:
        e = cx.edges
        return 0.5 * (a[e[:, 0]] + a[e[:, 1]]) * b
    if ka == 0 and kb == 2:
        return a[cx.quads].mean(axis=1) * b
    # 1 ^ 1: steps s_k go from corner k to corner k+1 (CCW)
    sa = _ccw_corner_steps(cx, a)
    sb = _ccw_corner_steps(cx, b)
    out = np.zeros(cx.F, dtype=np.result_type(a, b, float))
    for k in range(4):
        km = (k - 1) % 4
        # int_{(x_{k-1},x_k)} a * int_{(x_k,x_{k+1})} b - int_{(x_{k+1},x_k)} a * int_{(x_k,x_{k-1})} b
        out += sa[:, km] * sb[:, k] - (-sa[:, k]) * (-sb[:, km])
    return 0.25 * out


def diamond_d(cx: QuadComplex, values, degree: int) -> np.ndarray:
    if degree == 0:
        return cx.d0_diamond @ np.asarray(values)
    if degree == 1:
        return cx.d1_diamond @ np.asarray(values)
    raise ComplexError("no 3-cells")


# ----------------------------------------------------------------------
# averaging and the biconstant
# ----------------------------------------------------------------------

def biconstant(cx: QuadComplex) -> np.ndarray:
    """+1 on primal vertices, -1 on dual ones."""
    return np.where(cx.color == PRIMAL, 1.0, -1.0)


def average_matrix1(cx: QuadComplex) -> sp.csr_matrix:
    """A on 1-forms as a (2F, E) matrix."""
    F = cx.F
    S = cx.sides
    ar = np.arange(F)
    rows = np.concatenate([np.repeat(ar, 4), np.repeat(F + ar, 4)])
    cols = np.concatenate([S.ravel(), S.ravel()])
    ve = np.tile([0.5, -0.5, -0.5, 0.5], F)
    vs = np.tile([-0.5, -0.5, 0.5, 0.5], F)
    return sp.csr_matrix((np.concatenate([ve, vs]), (rows, cols)), shape=(2 * F, cx.E))


def average_matrix2(cx: QuadComplex) -> sp.csr_matrix:
    """A on 2-forms: half the sum over the quads around each vertex."""
    F = cx.F
    rows = cx.quads.ravel()
    cols = np.repeat(np.arange(F), 4)
    keep = cx.full_star[rows]
    return sp.csr_matrix((np.full(keep.sum(), 0.5), (rows[keep], cols[keep])), shape=(cx.V, F))


def average_A(cx: QuadComplex, values, degree: int) -> np.ndarray:
    values = np.asarray(values)
    if degree == 0:
        return values.copy()
    if degree == 1:
        return average_matrix1(cx) @ values
    if degree == 2:
        return average_matrix2(cx) @ values
    raise ValueError("degree must be 0, 1 or 2")


def lift_to_diamond(cx: QuadComplex, mu, cycles=None, tol: float = 1e-9) -> np.ndarray:
    """A diamond cocycle nu with A(nu) = mu.

    Inside a quad, nu is fixed by mu up to one value t_q; matching the
    shared sides fixes t_q from quad to quad.  The first quad gets t = 0
    (this selects one representative modulo d epsilon).  When the
    propagation closes up inconsistently, mu has different holonomies
    on the two graphs along some class; the offending cycle is located
    among ``cycles`` (diamond cycles as (edge, sign) lists) when given.
    """
    mu = np.asarray(mu)
    F = cx.F
    if np.max(np.abs(cx.d1_lambda @ mu), initial=0.0) > tol * max(1.0, np.abs(mu).max(initial=0.0)):
        raise NotLiftable("the form is not closed")
    me, ms = mu[:F], mu[F:]
    offs = np.stack([np.zeros(F), -me, ms - me, ms], axis=1).astype(mu.dtype)
    t = np.full(F, np.nan, dtype=complex if np.iscomplexobj(mu) else float)
    inc = cx.edge_faces
    nu = np.full(cx.E, np.nan, dtype=t.dtype)
    scale = max(1.0, float(np.abs(mu).max(initial=0.0)))
    worst = 0.0
    for root in range(F):
        if not np.isnan(t[root]):
            continue
        t[root] = 0.0
        stack = [root]
        while stack:
            q = stack.pop()
            for s in range(4):
                e = cx.sides[q, s]
                val = t[q] + offs[q, s]
                if np.isnan(nu[e]):
                    nu[e] = val
                else:
                    worst = max(worst, abs(nu[e] - val))
                for k in inc[e]:
                    if k < 0:
                        continue
                    q2, s2 = divmod(int(k), 4)
                    if np.isnan(t[q2]):
                        t[q2] = val - offs[q2, s2]
                        stack.append(q2)
    if worst > tol * scale:
        bad, gap = None, None
        if cycles:
            # a closed diamond nu would integrate the same around both
            # shifted copies; report the class with the largest gap
            from .homology import lambda_holonomy_gap
            gaps = [lambda_holonomy_gap(cx, mu, c) for c in cycles]
            k = int(np.argmax(np.abs(gaps)))
            bad, gap = k, gaps[k]
        raise NotLiftable(f"holonomies on the two graphs differ (edge mismatch {worst:.3g})",
                          cycle=bad, mismatch=gap if gap is not None else worst)
    return nu


# ----------------------------------------------------------------------
# energies
# ----------------------------------------------------------------------

@dataclass
class EnergyReport:
    dirichlet: float
    conformal: float
    area: float
    dirichlet_gamma: float
    dirichlet_gamma_star: float


def energies(cx: QuadComplex, f) -> EnergyReport:
    """Dirichlet energy, conformal energy and image area of a function."""
    f = np.asarray(f, dtype=complex)
    df = cx.d0_lambda @ f
    w = cx.lambda_weights
    F = cx.F
    ED = 0.5 * norm2(cx, df)
    dg = 0.5 * np.sum(w[:F] * np.abs(df[:F]) ** 2)
    dgs = 0.5 * np.sum(w[F:] * np.abs(df[F:]) ** 2)
    area = float(np.real(0.5j * np.sum(wedge_hetero(cx, df, np.conj(df)))))
    # * on 1-forms is local to a quad, so it is available on patches too
    g = df - 1j * (star_matrix1(cx) @ df)
    EC = 0.25 * norm2(cx, g)
    return EnergyReport(float(ED), float(EC), area, float(dg), float(dgs))


# ----------------------------------------------------------------------
# linear solves
# ----------------------------------------------------------------------

def _components(cx: QuadComplex, L) -> np.ndarray:
    n, labels = connected_components(abs(L) > 0, directed=False)
    return labels


def solve_laplacian(cx: QuadComplex, rhs, method: str = "cg", rtol: float = 1e-12,
                    L: Optional[sp.spmatrix] = None) -> np.ndarray:
    """Solve Delta_0 u = rhs, with the constant kernel removed per component.

    The right-hand side is projected onto the range first, the solution
    is normalized to zero mean on each component.
    """
    L = laplacian_matrix(cx, 0) if L is None else L
    labels = _components(cx, L)
    rhs = np.asarray(rhs)
    if np.iscomplexobj(rhs):
        return (solve_laplacian(cx, rhs.real, method, rtol, L)
                + 1j * solve_laplacian(cx, rhs.imag, method, rtol, L))
    rhs = rhs - _component_mean(rhs, labels)
    if not np.any(rhs):
        return np.zeros_like(rhs, dtype=float)
    if method == "direct":
        # ground one vertex per component
        n = L.shape[0]
        ground = np.array([np.flatnonzero(labels == c)[0] for c in np.unique(labels)])
        keep = np.setdiff1d(np.arange(n), ground)
        u = np.zeros(n)
        u[keep] = spla.spsolve(L[keep][:, keep].tocsc(), rhs[keep])
    elif method == "cg":
        n = L.shape[0]
        u, info = spla.cg(L, rhs, rtol=rtol, maxiter=10 * n)
        res = np.linalg.norm(L @ u - rhs) / np.linalg.norm(rhs)
        if info != 0 and res > 10 * rtol:
            raise SolverError(f"conjugate gradient stopped with relative residual {res:.3g}", res)
    else:
        raise ValueError(f"unknown method {method!r}")
    return u - _component_mean(u, labels)


def _component_mean(x, labels):
    sums = np.bincount(labels, weights=x)
    cnt = np.bincount(labels)
    return (sums / cnt)[labels]


# ----------------------------------------------------------------------
# Hodge decomposition
# ----------------------------------------------------------------------

@dataclass
class HodgeSplit:
    exact: np.ndarray
    coexact: np.ndarray
    harmonic: np.ndarray


def exact_part(cx: QuadComplex, beta, method="cg", L=None) -> np.ndarray:
    """Orthogonal projection of a Lambda 1-form onto im d."""
    D0 = cx.d0_lambda
    rhs = D0.T @ (cx.lambda_weights * np.asarray(beta))
    u = solve_laplacian(cx, rhs, method=method, L=L)
    return D0 @ u


def hodge_decompose(cx: QuadComplex, beta, method: str = "cg") -> HodgeSplit:
    """beta = du + (-*ds) + h with the three terms orthogonal."""
    _require_closed(cx, "the Hodge decomposition")
    beta = np.asarray(beta)
    L = laplacian_matrix(cx, 0)
    S = star_matrix1(cx)
    ex = exact_part(cx, beta, method, L)
    co = -(S @ exact_part(cx, S @ beta, method, L))
    return HodgeSplit(ex, co, beta - ex - co)


def harmonic_projection(cx: QuadComplex, beta, method: str = "cg") -> np.ndarray:
    return hodge_decompose(cx, beta, method).harmonic


def harmonic_dimension(cx: QuadComplex, tol: float = 1e-9) -> int:
    """dim ker Delta on Lambda 1-forms by a dense singular value probe."""
    L = laplacian_matrix(cx, 1).toarray()
    s = np.linalg.svd(L, compute_uv=False)
    return int(np.sum(s < tol * max(1.0, s.max())))


# ----------------------------------------------------------------------
# holomorphy, del and delbar
# ----------------------------------------------------------------------

def cr_residual(cx: QuadComplex, f) -> np.ndarray:
    """Per-quad defect of f(y')-f(y) = i rho (f(x')-f(x))."""
    f = np.asarray(f)
    q = cx.quads
    return (f[q[:, 3]] - f[q[:, 1]]) - 1j * cx.rho * (f[q[:, 2]] - f[q[:, 0]])


def face_areas(cx: QuadComplex) -> np.ndarray:
    """Shoelace area of every embedded quad (positive when CCW)."""
    cz = cx._need_embedding()
    x, y = cz.real, cz.imag
    return 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)


def del_matrices(cx: QuadComplex, tol: float = 1e-14):
    """(F, V) matrices of del and delbar from contour integrals over each quad.

    The contour integral of f dZ along a side uses the trapezoid rule.
    """
    cz = cx._need_embedding()
    area = face_areas(cx)
    if np.any(np.abs(area) <= tol * max(1.0, np.abs(cz).max())):
        bad = np.flatnonzero(np.abs(area) <= tol)
        raise ComplexError(f"singular faces with zero area: {bad[:10].tolist()}")
    F = cx.F
    # coefficient of f(c_k): (dZ of step k-1 + dZ of step k)/2
    step = np.roll(cz, -1, axis=1) - cz
    w = 0.5 * (step + np.roll(step, 1, axis=1))
    rows = np.repeat(np.arange(F), 4)
    cols = cx.quads.ravel()
    dz = (1j / (2 * area))[:, None] * np.conj(w)
    dzb = (-1j / (2 * area))[:, None] * w
    Dz = sp.csr_matrix((dz.ravel(), (rows, cols)), shape=(F, cx.V))
    Dzb = sp.csr_matrix((dzb.ravel(), (rows, cols)), shape=(F, cx.V))
    return Dz, Dzb


def del_delbar(cx: QuadComplex, f):
    """(del f, delbar f), one value per quad."""
    Dz, Dzb = del_matrices(cx)
    f = np.asarray(f)
    return Dz @ f, Dzb @ f


def del_delbar_faces_to_vertices(cx: QuadComplex):
    """Extensions of del and delbar from face functions to vertex functions.

    Both are transposes of the vertex-to-face operators with each face
    weighted by 8 times its area.  With the positive Laplacian used
    here, Delta = (del delbar + delbar del)/2 holds on rhombic faces.
    """
    Dz, Dzb = del_matrices(cx)
    W = sp.diags(8.0 * face_areas(cx))
    return (Dz.T @ W).tocsr(), (Dzb.T @ W).tocsr()


def laplacian_from_del(cx: QuadComplex) -> sp.csr_matrix:
    Dz, Dzb = del_matrices(cx)
    P, Pb = del_delbar_faces_to_vertices(cx)
    return (0.5 * (P @ Dzb + Pb @ Dz)).tocsr()


def d_prime(cx: QuadComplex, alpha) -> np.ndarray:
    """(1,0) part of a Lambda 1-form: its -i eigencomponent under *."""
    _require_closed(cx, "type decomposition")
    a = np.asarray(alpha, dtype=complex)
    return 0.5 * (a + 1j * (star_matrix1(cx) @ a))


def d_second(cx: QuadComplex, alpha) -> np.ndarray:
    """(0,1) part: the +i eigencomponent under *."""
    a = np.asarray(alpha, dtype=complex)
    return a - d_prime(cx, a)


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------

def _cell_ids(cx: QuadComplex, degree: int, tag: str) -> list:
    if degree == 0 or (degree == 2 and tag == LAMBDA):
        return list(range(cx.V))
    if degree == 2:
        return list(range(cx.F))
    if tag == LAMBDA:
        return [[int(a), int(b)] for a, b in cx.lambda_edges]
    return [[int(a), int(b)] for a, b in cx.edges]


def cochain_to_json(cx: QuadComplex, values, degree: int, tag: str = LAMBDA) -> dict:
    """{"degree", "complex", "values": [{"cell", "v": [re, im]}]}.

    Cells are vertex ids (0-forms, Lambda 2-forms), face ids (diamond
    2-forms) or [tail, head] vertex pairs of oriented edges.
    """
    if tag not in (LAMBDA, DIAMOND):
        raise ValueError(f"unknown complex {tag!r}")
    values = np.asarray(values)
    cells = _cell_ids(cx, degree, tag)
    if len(values) != len(cells):
        raise ValueError(f"expected {len(cells)} values, got {len(values)}")
    return {"degree": int(degree), "complex": tag,
            "values": [{"cell": c, "v": [float(np.real(w)), float(np.imag(w))]}
                       for c, w in zip(cells, values)]}


def cochain_from_json(cx: QuadComplex, data: dict) -> tuple:
    """Inverse of cochain_to_json; returns (values, degree, tag).

    Edge cells given in the reverse orientation contribute with a minus sign.
    """
    degree, tag = int(data["degree"]), data["complex"]
    cells = _cell_ids(cx, degree, tag)
    items = data["values"]
    if [it["cell"] for it in items] == cells:
        # canonical order; also the only safe reading when cells repeat
        return np.array([complex(*it["v"]) for it in items]), degree, tag
    out = np.zeros(len(cells), dtype=complex)
    if degree == 1:
        index = {tuple(c): k for k, c in enumerate(cells)}
    for item in items:
        w = complex(*item["v"])
        c = item["cell"]
        if degree == 1:
            key = tuple(c)
            if key in index:
                out[index[key]] = w
            elif key[::-1] in index:
                out[index[key[::-1]]] = -w
            else:
                raise ComplexError(f"no {tag} edge {c}")
        else:
            out[int(c)] = w
    return out, degree, tag
