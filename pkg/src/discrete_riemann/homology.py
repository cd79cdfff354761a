"""
Homology of quad-graphs: cycle bases, intersection numbers, left shifts
and the harmonic forms dual to a canonical basis.

A diamond cycle is either a path, a list of (edge, sign) pairs, or an
integer vector over the diamond edges.  Cycles on the double are integer
vectors of length 2F, split into a primal part [:F] and a dual part [F:].

The combinatorial intersection of two Lambda cycles is

    iota(a, b) = sum_q a_G[q] b_G*[q] - a_G*[q] b_G[q],

i.e. each primal edge crossing its dual edge from right to left counts
+1.  It only pairs primal cycles with dual ones.  The intersection of
two diamond cycles is iota of their left shifts.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .calculus import (harmonic_projection, iint, lift_to_diamond, wedge_diamond)
from .cellular import ComplexError, QuadComplex, _side_between, cycle_chain, cycle_vertices


@dataclass
class CycleBasis:
    """Diamond cycles with their intersection matrix."""
    chains: np.ndarray                   # (2g, E) integer chains
    intersection: np.ndarray             # (2g, 2g) integers
    canonical: bool = False
    loops: list = field(default_factory=list)          # simple loops the chains are built from
    transform: Optional[np.ndarray] = None             # chains = transform @ loop chains
    tree_edges: list = field(default_factory=list)     # generating edge e_k per loop

    @property
    def genus(self) -> int:
        return len(self.chains) // 2


@dataclass
class DoubledCycleBasis:
    """Cycles on the double in the order (G_k, G*_k, G*_{k+g}, G_{k+g})."""
    chains: np.ndarray      # (4g, 2F)
    intersection: np.ndarray
    diamond: CycleBasis


@dataclass
class HarmonicBasis:
    alpha: np.ndarray           # (4g, 2F)
    alpha_diamond: np.ndarray   # (2g, E)
    periods: np.ndarray         # (4g, 4g) integral of alpha_l over cycle k
    diamond_periods: np.ndarray  # (2g, 2g)
    cycles: DoubledCycleBasis

    @property
    def genus(self) -> int:
        return len(self.alpha) // 4


# ----------------------------------------------------------------------
# cycles as edge paths
# ----------------------------------------------------------------------

def _as_path(cx: QuadComplex, cycle):
    """Normalize a cycle to a list of (edge, sign) with backtracks removed."""
    path = [(int(e), int(s)) for e, s in cycle]
    changed = True
    while changed and path:
        changed = False
        out = []
        for step in path:
            if out and out[-1][0] == step[0] and out[-1][1] == -step[1]:
                out.pop()
                changed = True
            else:
                out.append(step)
        # cyclic cancellation at the seam
        while len(out) >= 2 and out[0][0] == out[-1][0] and out[0][1] == -out[-1][1]:
            out = out[1:-1]
            changed = True
        path = out
    if path:
        vs = cycle_vertices(cx, path)
        if vs[0] != vs[-1]:
            raise ComplexError("cycle is not closed")
    return path


def left_shift(cx: QuadComplex, cycle) -> tuple:
    """Primal and dual Lambda cycles running just to the left of a diamond cycle.

    At every vertex v of the cycle, the fan of quads on the left, between
    the outgoing and the incoming edge, contributes its diagonals that
    avoid v; they lie on the graph opposite to v.  Returns two integer
    vectors of length 2F (primal part, dual part).
    """
    path = _as_path(cx, cycle)
    F = cx.F
    shift = np.zeros(2 * F, dtype=np.int64)
    if not path:
        return shift.copy(), shift.copy()
    verts = cycle_vertices(cx, path)
    n = len(path)
    fans = cx.fans
    sign_of = {0: (-1, True), 1: (1, False), 2: (1, True), 3: (-1, False)}
    for i in range(n):
        v = verts[i + 1] if i + 1 < len(verts) else verts[0]
        e_in = path[i][0]
        e_out = path[(i + 1) % n][0]
        fan = fans[v]
        pos = {qj: k for k, qj in enumerate(fan)}
        start = None
        for (q, j) in fan:
            if cx.sides[q, _side_between(j, (j + 1) % 4)] == e_out:
                start = (q, j)
                break
        if start is None:
            raise ComplexError(f"edge {e_out} does not leave vertex {v}")
        k = pos[start]
        m = len(fan)
        for step in range(m + 1):
            q, j = fan[(k + step) % m]
            sg, dual = sign_of[j]
            shift[(F + q) if dual else q] += sg
            if cx.sides[q, _side_between(j, (j - 1) % 4)] == e_in:
                break
            if not cx.full_star[v] and (k + step + 1) >= m:
                raise ComplexError(f"left fan at vertex {v} leaves the surface")
        else:
            raise ComplexError(f"left fan at vertex {v} never reaches the incoming edge")
    g_part = shift.copy()
    g_part[F:] = 0
    s_part = shift.copy()
    s_part[:F] = 0
    return g_part, s_part


def lambda_intersection(cx: QuadComplex, a, b) -> int:
    F = cx.F
    a, b = np.asarray(a), np.asarray(b)
    return a[:F] @ b[F:] - a[F:] @ b[:F]


def diamond_intersection(cx: QuadComplex, a, b) -> int:
    """Intersection number of two diamond cycles given as paths."""
    ag, _ = left_shift(cx, a)
    _, bs = left_shift(cx, b)
    return int(lambda_intersection(cx, ag, bs))


def lambda_holonomy_gap(cx: QuadComplex, mu, cycle) -> complex:
    """Difference of the periods of mu along the two left shifts of a diamond cycle."""
    g, s = left_shift(cx, cycle)
    return complex(np.dot(g, mu) - np.dot(s, mu))


# ----------------------------------------------------------------------
# tree-cotree basis
# ----------------------------------------------------------------------

def _bfs_tree(cx: QuadComplex, root: int):
    """Parent edge of every vertex in a BFS tree of the diamond graph."""
    adj = [[] for _ in range(cx.V)]
    for e, (a, b) in enumerate(cx.edges):
        adj[a].append((e, int(b), 1))
        adj[b].append((e, int(a), -1))
    parent = [None] * cx.V
    depth = np.full(cx.V, -1)
    depth[root] = 0
    dq = deque([root])
    while dq:
        u = dq.popleft()
        for e, w, s in adj[u]:
            if depth[w] < 0:
                depth[w] = depth[u] + 1
                parent[w] = (e, u, s)  # edge e walked with sign s from u to w
                dq.append(w)
    if np.any(depth < 0):
        raise ComplexError("the diamond graph is not connected")
    return parent, depth


def _tree_path_up(parent, v, stop):
    """(edge, sign) steps from v up to the ancestor stop."""
    out = []
    while v != stop:
        e, u, s = parent[v]
        out.append((e, -s))
        v = u
    return out


def tree_cotree_loops(cx: QuadComplex, root: Optional[int] = None):
    """Simple loops T + e_k pruned at the lowest common ancestor."""
    if not cx.closed:
        raise ComplexError("a homology basis needs a closed complex")
    root = cx.origin if root is None else root
    root = 0 if root is None else int(root)
    parent, depth = _bfs_tree(cx, root)
    tree = np.zeros(cx.E, dtype=bool)
    for p in parent:
        if p is not None:
            tree[p[0]] = True
    # spanning tree of faces through non-tree edges
    inc = cx.edge_faces
    seen = np.zeros(cx.F, dtype=bool)
    cotree = np.zeros(cx.E, dtype=bool)
    seen[0] = True
    dq = deque([0])
    while dq:
        q = dq.popleft()
        for s in range(4):
            e = cx.sides[q, s]
            if tree[e]:
                continue
            for k in inc[e]:
                q2 = int(k) // 4
                if k >= 0 and not seen[q2]:
                    seen[q2] = True
                    cotree[e] = True
                    dq.append(q2)
    gens = np.flatnonzero(~tree & ~cotree)
    loops = []
    for e in gens:
        u, v = (int(t) for t in cx.edges[e])
        a, b = u, v
        while a != b:
            if depth[a] >= depth[b]:
                a = parent[a][1]
            else:
                b = parent[b][1]
        lca = a
        down_to_u = [(ed, -sg) for ed, sg in reversed(_tree_path_up(parent, u, lca))]
        loop = [(int(e), 1)] + _tree_path_up(parent, v, lca) + down_to_u
        loops.append(loop)
    return loops, [int(e) for e in gens]


def intersection_matrix(cx: QuadComplex, loops) -> np.ndarray:
    shifts = [left_shift(cx, c) for c in loops]
    n = len(loops)
    M = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            M[i, j] = lambda_intersection(cx, shifts[i][0], shifts[j][1])
    return M


def tree_cotree_basis(cx: QuadComplex, root: Optional[int] = None) -> CycleBasis:
    loops, gens = tree_cotree_loops(cx, root)
    chains = np.array([cycle_chain(cx, c) for c in loops], dtype=np.int64).reshape(-1, cx.E)
    return CycleBasis(chains=chains, intersection=intersection_matrix(cx, loops),
                      canonical=False, loops=loops, transform=np.eye(len(loops), dtype=np.int64),
                      tree_edges=gens)


def symplectic_normalize(basis: CycleBasis) -> CycleBasis:
    """Integer change of basis to intersection matrix [[0, I], [-I, 0]].

    Pairs are peeled off greedily: a cycle a and a partner b with
    a.b = 1 are chosen in index order (Euclid on the pairings produces a
    unit when none is present), and every other cycle c is replaced by
    c - (c.b) a + (c.a) b.
    """
    J = np.array(basis.intersection, dtype=np.int64)
    n = len(J)
    if n % 2:
        raise ComplexError("odd number of cycles")
    if n and round(abs(np.linalg.det(J.astype(float)))) != 1:
        raise ComplexError("intersection matrix is not unimodular")
    T = np.eye(n, dtype=np.int64)         # rows: current cycles in terms of the input
    rest = list(range(n))
    A_list, B_list = [], []

    def pair(i, j):
        return int(T[i] @ J @ T[j])

    while rest:
        a = rest[0]
        others = rest[1:]
        while True:
            vals = [(abs(pair(a, c)), c) for c in others if pair(a, c) != 0]
            if not vals:
                raise ComplexError("degenerate intersection matrix")
            m, b = min(vals)
            if m == 1:
                break
            # Euclid: reduce the other partners modulo b; unimodularity
            # guarantees a smaller nonzero remainder appears
            pb = pair(a, b)
            for c in others:
                if c != b and pair(a, c) != 0:
                    T[c] -= int(round(pair(a, c) / pb)) * T[b]
        if pair(a, b) == -1:
            T[b] = -T[b]
        rest.remove(a)
        rest.remove(b)
        for c in rest:
            ca, cb = pair(c, a), pair(c, b)
            T[c] = T[c] - cb * T[a] + ca * T[b]
        A_list.append(a)
        B_list.append(b)
    order = A_list + B_list
    T = T[order]
    chains = T @ basis.chains
    Jn = T @ J @ T.T
    transform = T @ basis.transform if basis.transform is not None else T
    return CycleBasis(chains=chains, intersection=Jn, canonical=_is_canonical(Jn),
                      loops=basis.loops, transform=transform, tree_edges=basis.tree_edges)


def _is_canonical(J) -> bool:
    n = len(J)
    g = n // 2
    Jc = np.zeros((n, n), dtype=np.int64)
    Jc[:g, g:] = np.eye(g, dtype=np.int64)
    Jc[g:, :g] = -np.eye(g, dtype=np.int64)
    return bool(np.array_equal(np.asarray(J), Jc))


def canonical_basis(cx: QuadComplex) -> CycleBasis:
    """Canonical basis; reference cycles of a generator are used when they are canonical."""
    if cx.cycles:
        loops = [_as_path(cx, c) for c in cx.cycles]
        J = intersection_matrix(cx, loops)
        if len(loops) == 2 * cx.genus and _is_canonical(J):
            chains = np.array([cycle_chain(cx, c) for c in loops], dtype=np.int64)
            return CycleBasis(chains=chains, intersection=J, canonical=True, loops=loops,
                              transform=np.eye(len(loops), dtype=np.int64),
                              tree_edges=[c[0][0] for c in loops])
    return symplectic_normalize(tree_cotree_basis(cx))


def shifted_chains(cx: QuadComplex, basis: CycleBasis):
    """Left shifts of every basis cycle, combined through the basis transform."""
    sh = [left_shift(cx, c) for c in basis.loops]
    if not sh:
        return np.zeros((0, 2 * cx.F), dtype=np.int64), np.zeros((0, 2 * cx.F), dtype=np.int64)
    G = np.array([s[0] for s in sh])
    S = np.array([s[1] for s in sh])
    return basis.transform @ G, basis.transform @ S


def doubled_basis(cx: QuadComplex, basis: CycleBasis) -> DoubledCycleBasis:
    g = basis.genus
    G, S = shifted_chains(cx, basis)
    chains = np.concatenate([G[:g], S[:g], S[g:], G[g:]]) if g else np.zeros((0, 2 * cx.F), dtype=np.int64)
    n = len(chains)
    M = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            M[i, j] = lambda_intersection(cx, chains[i], chains[j])
    return DoubledCycleBasis(chains=chains, intersection=M, diamond=basis)


# ----------------------------------------------------------------------
# dual harmonic forms
# ----------------------------------------------------------------------

def crossing_cocycle(cx: QuadComplex, chain) -> np.ndarray:
    """Integer 1-form whose period along A is iota(A, chain)."""
    F = cx.F
    c = np.asarray(chain)
    return np.concatenate([c[F:], -c[:F]]).astype(float)


def eta_form(cx: QuadComplex, chain, method: str = "cg") -> np.ndarray:
    """Harmonic representative of the crossing cocycle of a Lambda cycle."""
    if np.any(cx.d0_lambda.T @ np.asarray(chain)):
        raise ComplexError("chain is not closed")
    return harmonic_projection(cx, crossing_cocycle(cx, chain), method)


def eta_diamond(cx: QuadComplex, cycle, method: str = "cg") -> np.ndarray:
    """Diamond cocycle lifting eta of both left shifts of a diamond cycle."""
    g, s = left_shift(cx, cycle)
    return lift_to_diamond(cx, eta_form(cx, g, method) + eta_form(cx, s, method))


def intersection_number(cx: QuadComplex, a, b, method: str = "cg") -> dict:
    """Intersection of two diamond cycles, combinatorially and through eta forms."""
    comb = diamond_intersection(cx, a, b)
    ea, eb = eta_diamond(cx, a, method), eta_diamond(cx, b, method)
    return {"combinatorial": comb, "analytic": float(np.sum(wedge_diamond(cx, ea, 1, eb, 1)).real)}


def harmonic_basis(cx: QuadComplex, cycles: Optional[DoubledCycleBasis] = None,
                   method: str = "cg") -> HarmonicBasis:
    """Harmonic 1-forms dual to a canonical doubled basis.

    alpha_k = eta of cycle k+2g and alpha_{k+2g} = -eta of cycle k, so
    that the period of alpha_l along cycle k is the Kronecker delta.
    The diamond forms are lifts of alpha_k + alpha_{k+g}, normalized to
    vanish on the lowest-indexed diamond edge.
    """
    if cycles is None:
        cycles = doubled_basis(cx, canonical_basis(cx))
    C = cycles.chains
    n = len(C)
    g = n // 4
    etas = np.array([eta_form(cx, c, method) for c in C]).reshape(n, 2 * cx.F)
    if n:
        alpha = np.concatenate([etas[2 * g:], -etas[:2 * g]])
    else:
        alpha = etas
    periods = C @ alpha.T if n else np.zeros((0, 0))
    # diamond forms: alpha_k + alpha_{k+g} and alpha_{k+2g} + alpha_{k+3g}
    eps_edge = np.full(cx.E, -2.0)   # d(epsilon) on every primal->dual edge
    ad = []
    for k in range(2 * g):
        j = k if k < g else k + g
        mu = alpha[j] + alpha[j + g]
        nu = lift_to_diamond(cx, mu, cycles=cycles.diamond.loops)
        nu = nu - (nu[0] / eps_edge[0]) * eps_edge
        ad.append(nu)
    ad = np.array(ad).reshape(2 * g, cx.E)
    dper = cycles.diamond.chains @ ad.T if g else np.zeros((0, 0))
    return HarmonicBasis(alpha=alpha, alpha_diamond=ad, periods=periods,
                         diamond_periods=dper, cycles=cycles)


def lambda_intersection_from_forms(cx: QuadComplex, hb: HarmonicBasis) -> np.ndarray:
    """2 * iint alpha_k ^ alpha_l; equals the combinatorial matrix on the double."""
    n = len(hb.alpha)
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            M[i, j] = 2.0 * iint(cx, hb.alpha[i], hb.alpha[j]).real
    return M
