"""
Quad-graph cellular complexes and their doubles.

A quad-graph is stored face by face: each quad is the 4-tuple
(x, y, x', y') listed counterclockwise, with x, x' primal and y, y'
dual.  Every diamond edge joins a primal vertex to a dual vertex and is
oriented primal -> dual.  The four sides of a quad are stored in the
order (x,y), (x',y), (x',y'), (x,y'), so all of them carry that same
orientation.

The double Lambda has one primal diagonal (x -> x') and one dual
diagonal (y -> y') per quad.  Lambda edge q is the primal diagonal of
quad q and edge F+q its dual diagonal.  A Lambda 2-cell is the face v*
dual to a vertex v, so 0-forms and 2-forms on Lambda are both indexed
by vertices.

rho is kept on primal diagonals only; the dual diagonal carries 1/rho.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp

PRIMAL, DUAL = 0, 1
LAMBDA, DIAMOND = "lambda", "diamond"


class ComplexError(ValueError):
    """Invalid parameters or an ill-formed complex."""


@dataclass(eq=False)
class QuadComplex:
    color: np.ndarray                 # (V,) 0 primal, 1 dual
    quads: np.ndarray                 # (F, 4) vertex ids (x, y, x', y')
    edges: np.ndarray                 # (E, 2) (primal, dual)
    sides: np.ndarray                 # (F, 4) edge ids of (x,y),(x',y),(x',y'),(x,y')
    rho: np.ndarray                   # (F,) rho(x, x')
    corner_z: Optional[np.ndarray] = None   # (F, 4) embedded corners, per quad
    z: Optional[np.ndarray] = None           # (V,) representative coordinates
    origin: Optional[int] = None
    periods: Optional[tuple] = None          # lattice periods of a flat torus
    cycles: Optional[list] = None            # reference diamond cycles
    meta: dict = field(default_factory=dict)
    rho_star_input: Optional[np.ndarray] = None  # dual values as supplied by a file

    # -- sizes ---------------------------------------------------------
    @property
    def V(self) -> int:
        return len(self.color)

    @property
    def F(self) -> int:
        return len(self.quads)

    @property
    def E(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_faces(self) -> np.ndarray:
        """(E, 2) array of (quad, side) incidences flattened as 4*q+j, -1 if absent."""
        inc = -np.ones((self.E, 2), dtype=np.int64)
        cnt = np.zeros(self.E, dtype=np.int64)
        for q in range(self.F):
            for j in range(4):
                e = self.sides[q, j]
                if cnt[e] >= 2:
                    raise ComplexError(f"edge {e} lies in more than two quads")
                inc[e, cnt[e]] = 4 * q + j
                cnt[e] += 1
        return inc

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_faces[:, 1] < 0)

    @property
    def closed(self) -> bool:
        return len(self.boundary_edges) == 0

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        be = self.boundary_edges
        return np.unique(self.edges[be].ravel()) if len(be) else np.zeros(0, dtype=np.int64)

    @cached_property
    def full_star(self) -> np.ndarray:
        """Boolean mask of vertices whose quad fan closes up."""
        m = np.ones(self.V, dtype=bool)
        m[self.boundary_vertices] = False
        return m

    @property
    def euler_characteristic(self) -> int:
        return self.V - self.E + self.F

    @property
    def genus(self) -> int:
        if not self.closed:
            return 0
        return (2 - self.euler_characteristic) // 2

    @property
    def primal(self) -> np.ndarray:
        return np.flatnonzero(self.color == PRIMAL)

    @property
    def dual(self) -> np.ndarray:
        return np.flatnonzero(self.color == DUAL)

    # -- Lambda data ---------------------------------------------------
    @cached_property
    def lambda_edges(self) -> np.ndarray:
        """(2F, 2) oriented Lambda edges: primal diagonals then dual diagonals."""
        q = self.quads
        return np.vstack([q[:, [0, 2]], q[:, [1, 3]]])

    @cached_property
    def lambda_weights(self) -> np.ndarray:
        return np.concatenate([self.rho, 1.0 / self.rho])

    @cached_property
    def d0_lambda(self) -> sp.csr_matrix:
        n = 2 * self.F
        le = self.lambda_edges
        rows = np.repeat(np.arange(n), 2)
        cols = le.ravel()
        vals = np.tile([-1.0, 1.0], n)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, self.V))

    @cached_property
    def d1_lambda(self) -> sp.csr_matrix:
        """Coboundary from Lambda 1-cochains to 2-cochains on the cells v*.

        Rows of vertices without a full star are zero: their dual cells
        are truncated away.
        """
        F = self.F
        q = self.quads
        ar = np.arange(F)
        rows = np.concatenate([q[:, 3], q[:, 1], q[:, 0], q[:, 2]])
        cols = np.concatenate([ar, ar, F + ar, F + ar])
        vals = np.concatenate([np.ones(F), -np.ones(F), np.ones(F), -np.ones(F)])
        keep = self.full_star[rows]
        return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(self.V, 2 * F))

    # -- diamond data --------------------------------------------------
    @cached_property
    def d0_diamond(self) -> sp.csr_matrix:
        E = self.E
        rows = np.repeat(np.arange(E), 2)
        vals = np.tile([-1.0, 1.0], E)
        return sp.csr_matrix((vals, (rows, self.edges.ravel())), shape=(E, self.V))

    @cached_property
    def d1_diamond(self) -> sp.csr_matrix:
        F = self.F
        rows = np.repeat(np.arange(F), 4)
        vals = np.tile([1.0, -1.0, 1.0, -1.0], F)
        return sp.csr_matrix((vals, (rows, self.sides.ravel())), shape=(F, self.E))

    @cached_property
    def fans(self) -> list:
        """Counterclockwise list of (quad, corner) around every vertex.

        Open fans (boundary vertices) start at the most clockwise quad.
        """
        inc = self.edge_faces
        corners = [[] for _ in range(self.V)]
        for q in range(self.F):
            for j in range(4):
                corners[self.quads[q, j]].append((q, j))
        out = []
        for v in range(self.V):
            items = corners[v]
            if not items:
                out.append([])
                continue
            nxt = {}
            prv = {}
            for (q, j) in items:
                # side from v towards c_{j-1}; the next quad CCW shares it
                e = self.sides[q, _side_between(j, (j - 1) % 4)]
                other = _other_incidence(inc[e], q, (j - 1) % 4, j)
                if other is not None:
                    q2, s2 = other
                    j2 = _corner_of(self.quads[q2], v, s2)
                    nxt[(q, j)] = (q2, j2)
                    prv[(q2, j2)] = (q, j)
            start = items[0]
            if len(prv) < len(items):
                start = next(it for it in items if it not in prv)
            fan = [start]
            seen = {start}
            cur = start
            while cur in nxt and nxt[cur] not in seen:
                cur = nxt[cur]
                fan.append(cur)
                seen.add(cur)
            if len(fan) != len(items):
                raise ComplexError(f"vertex {v} is not a manifold point")
            out.append(fan)
        return out

    def side_z(self) -> np.ndarray:
        """(F, 4) values of the integral of dZ along the four stored sides."""
        cz = self._need_embedding()
        return np.stack([cz[:, 1] - cz[:, 0], cz[:, 1] - cz[:, 2],
                         cz[:, 3] - cz[:, 2], cz[:, 3] - cz[:, 0]], axis=1)

    def lambda_z(self) -> np.ndarray:
        """Integral of dZ along the 2F Lambda edges."""
        cz = self._need_embedding()
        return np.concatenate([cz[:, 2] - cz[:, 0], cz[:, 3] - cz[:, 1]])

    def edge_z(self) -> np.ndarray:
        """Integral of dZ along every diamond edge (primal -> dual)."""
        sz = self.side_z()
        out = np.empty(self.E, dtype=complex)
        out[self.sides.ravel()] = sz.ravel()
        return out

    def _need_embedding(self) -> np.ndarray:
        if self.corner_z is None:
            raise ComplexError("complex has no embedding")
        return self.corner_z


def _side_between(a: int, b: int) -> int:
    """Stored side index of the quad side joining corners a and b."""
    pair = frozenset((a, b))
    return {frozenset((0, 1)): 0, frozenset((1, 2)): 1,
            frozenset((2, 3)): 2, frozenset((3, 0)): 3}[pair]


_SIDE_CORNERS = ((0, 1), (2, 1), (2, 3), (0, 3))


def _corner_of(quad, v, side):
    a, b = _SIDE_CORNERS[side]
    return a if quad[a] == v else b


def _other_incidence(inc, q, a, b):
    s = _side_between(a, b)
    for k in inc:
        if k < 0:
            continue
        qq, ss = divmod(int(k), 4)
        if qq == q and ss == s:
            continue
        return qq, ss
    return None


# ----------------------------------------------------------------------
# assembly from lifted quads
# ----------------------------------------------------------------------

def _assemble(n_vertices, color, lifted_quads, rho, corner_z=None, z=None,
              origin=None, periods=None, meta=None):
    """Build a complex from quads given as 4 (vertex id, lift key) pairs.

    A lift key is an integer tuple locating a corner in a covering
    lattice; a diamond edge is identified by its primal end and the
    offset from that end to the dual end.  This keeps distinct edges
    apart on small tori where two edges may join the same two vertices.
    """
    F = len(lifted_quads)
    quads = np.zeros((F, 4), dtype=np.int64)
    sides = np.zeros((F, 4), dtype=np.int64)
    registry = {}
    edges = []
    for q, corners in enumerate(lifted_quads):
        quads[q] = [c[0] for c in corners]
        for s, (a, b) in enumerate(_SIDE_CORNERS):
            (pa, ka), (pb, kb) = corners[a], corners[b]
            key = (pa, tuple(int(u) - int(w) for u, w in zip(kb, ka)))
            if key not in registry:
                registry[key] = len(edges)
                edges.append((pa, pb))
            sides[q, s] = registry[key]
    meta = dict(meta or {})
    meta["_edge_keys"] = registry
    return QuadComplex(color=np.asarray(color, dtype=np.int8), quads=quads,
                       edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
                       sides=sides, rho=np.asarray(rho, dtype=float),
                       corner_z=corner_z, z=z, origin=origin, periods=periods,
                       meta=meta)


def _rho_from_corners(cz):
    return np.abs(cz[:, 3] - cz[:, 1]) / np.abs(cz[:, 2] - cz[:, 0])


def _cycle_from_steps(cx, start_lift, steps, lift_to_id):
    """Diamond cycle as (edge, sign) pairs following lattice steps."""
    out = []
    cur = tuple(start_lift)
    table = _edge_lookup(cx)
    for st in steps:
        nxt = tuple(c + s for c, s in zip(cur, st))
        a, b = lift_to_id(cur), lift_to_id(nxt)
        if cx.color[a] == PRIMAL:
            key = (a, tuple(u - w for u, w in zip(nxt, cur)))
            out.append((table[key], 1))
        else:
            key = (b, tuple(u - w for u, w in zip(cur, nxt)))
            out.append((table[key], -1))
        cur = nxt
    return out


def _edge_lookup(cx):
    return cx.meta["_edge_keys"]


# ----------------------------------------------------------------------
# generators
# ----------------------------------------------------------------------

def generate_square_torus(p: int, q: int, theta: float) -> QuadComplex:
    """Flat torus tiled by rhombi of side 1 and angle 2*theta.

    Diamond vertices are m e^{i theta} + n e^{-i theta}; the first
    reference cycle has period 2p e^{-i theta}, the second 2q e^{i theta},
    so the modulus is (q/p) e^{2 i theta}.  Horizontal primal diagonals
    get rho = tan(theta), vertical ones 1/tan(theta).
    """
    if int(p) != p or int(q) != q or p < 1 or q < 1:
        raise ComplexError("p and q must be positive integers")
    if not (0.0 < theta < math.pi / 2):
        raise ComplexError("theta must lie strictly between 0 and pi/2")
    p, q = int(p), int(q)
    M, N = 2 * q, 2 * p
    a, b = np.exp(1j * theta), np.exp(-1j * theta)

    def vid(m, n):
        return (m % M) * N + (n % N)

    color = np.array([(m + n) % 2 for m in range(M) for n in range(N)], dtype=np.int8)
    zrep = np.array([m * a + n * b for m in range(M) for n in range(N)])
    lifted, cz = [], []
    for m in range(M):
        for n in range(N):
            ring = [(m, n), (m, n + 1), (m + 1, n + 1), (m + 1, n)]
            if (m + n) % 2:
                ring = ring[1:] + ring[:1]
            lifted.append([(vid(*c), c) for c in ring])
            cz.append([c[0] * a + c[1] * b for c in ring])
    cz = np.array(cz)
    cx = _assemble(M * N, color, lifted, _rho_from_corners(cz), corner_z=cz, z=zrep,
                   origin=0, periods=(2 * p * b, 2 * q * a),
                   meta={"kind": "square-torus", "p": p, "q": q, "theta": theta})
    lift = lambda c: vid(*c)
    cx.cycles = [_cycle_from_steps(cx, (0, 0), [(0, 1)] * N, lift),
                 _cycle_from_steps(cx, (0, 0), [(1, 0)] * M, lift)]
    return cx



def trihex_shape(rhos):
    """Triangle (U, V) with angles arccot(rho) opposite the three edge kinds.

    rhos = (rho_-, rho_\\, rho_/) for the horizontal edge 0-U, the edge
    U-V and the edge 0-V.  Returns None when the triangle does not close
    (non-critical weights).
    """
    r_h, r_b, r_s = rhos
    ang = [math.atan2(1.0, r) for r in (r_h, r_b, r_s)]
    if abs(sum(ang) - math.pi) > 1e-10:
        return None
    a_h, a_b, a_s = ang
    U = 1.0 + 0j
    V = (math.sin(a_s) / math.sin(a_h)) * np.exp(1j * a_b)
    return U, V


def criticality_residual(rhos) -> float:
    r1, r2, r3 = rhos
    return abs(r1 * r2 + r2 * r3 + r3 * r1 - 1.0)


def _circumcenter(a, b, c):
    d = 2 * (a.real * (b.imag - c.imag) + b.real * (c.imag - a.imag) + c.real * (a.imag - b.imag))
    ux = ((abs(a) ** 2) * (b.imag - c.imag) + (abs(b) ** 2) * (c.imag - a.imag)
          + (abs(c) ** 2) * (a.imag - b.imag)) / d
    uy = ((abs(a) ** 2) * (c.real - b.real) + (abs(b) ** 2) * (a.real - c.real)
          + (abs(c) ** 2) * (b.real - a.real)) / d
    return complex(ux, uy)


def _trihex_quads(i, j, shape):
    """The three quads attached to the primal vertex (i, j), as lifted corners.

    Lift keys live on the lattice of thirds: primal (3i, 3j), upward
    triangle centers (3i+1, 3j+1), downward ones (3i+2, 3j+2).
    """
    P = lambda a, b: ("p", a, b)
    up = lambda a, b: ("u", a, b)
    dn = lambda a, b: ("d", a, b)
    return [
        ("-", [P(i, j), dn(i, j - 1), P(i + 1, j), up(i, j)]),
        ("/", [P(i, j), up(i, j), P(i, j + 1), dn(i - 1, j)]),
        ("\\", [P(i + 1, j), dn(i, j), P(i, j + 1), up(i, j)]),
    ]


def _trihex_key(c):
    t, a, b = c
    off = {"p": 0, "u": 1, "d": 2}[t]
    return (3 * a + off, 3 * b + off)


def _trihex_pos(c, shape):
    U, V = shape
    t, a, b = c
    if t == "p":
        return a * U + b * V
    if t == "u":
        return _circumcenter(a * U + b * V, (a + 1) * U + b * V, a * U + (b + 1) * V)
    return _circumcenter((a + 1) * U + b * V, (a + 1) * U + (b + 1) * V, a * U + (b + 1) * V)


def generate_trihex_torus(rows: int, cols: int, rhos) -> QuadComplex:
    """Torus whose primal graph is a triangular lattice and dual hexagonal.

    rhos = (rho_-, rho_\\, rho_/).  When rho_- rho_\\ + rho_\\ rho_/ +
    rho_/ rho_- = 1 the faces embed as rhombi (triangle vertices and
    circumcenters) and the embedding is attached; otherwise the complex
    is purely combinatorial and meta["critical"] is False.
    """
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise ComplexError("rows and cols must be positive integers")
    rhos = tuple(float(r) for r in rhos)
    if len(rhos) != 3 or min(rhos) <= 0 or not all(math.isfinite(r) for r in rhos):
        raise ComplexError("three positive finite rho values are required")
    R, C = int(rows), int(cols)
    res = criticality_residual(rhos)
    shape = trihex_shape(rhos) if res < 1e-9 else None

    def vid(c):
        t, a, b = c
        k = (a % C) * R + (b % R)
        if t == "p":
            return k
        return C * R + 2 * k + (0 if t == "u" else 1)

    n = 3 * C * R
    color = np.array([PRIMAL] * (C * R) + [DUAL] * (2 * C * R), dtype=np.int8)
    rho_of = {"-": rhos[0], "\\": rhos[1], "/": rhos[2]}
    lifted, rho, cz = [], [], []
    for i in range(C):
        for j in range(R):
            for kind, ring in _trihex_quads(i, j, shape):
                lifted.append([(vid(c), _trihex_key(c)) for c in ring])
                rho.append(rho_of[kind])
                if shape is not None:
                    cz.append([_trihex_pos(c, shape) for c in ring])
    meta = {"kind": "trihex-torus", "rows": R, "cols": C, "rhos": list(rhos),
            "critical": shape is not None, "criticality_residual": res}
    if shape is None:
        cx = _assemble(n, color, lifted, rho, meta=meta)
    else:
        cz = np.array(cz)
        U, V = shape
        zrep = np.zeros(n, dtype=complex)
        for i in range(C):
            for j in range(R):
                for c in (("p", i, j), ("u", i, j), ("d", i, j)):
                    zrep[vid(c)] = _trihex_pos(c, shape)
        cx = _assemble(n, color, lifted, _rho_from_corners(cz), corner_z=cz, z=zrep,
                       origin=0, periods=(C * U, R * V), meta=meta)
    # reference cycles: through the quads of horizontal, resp. "/" edges
    cyc1, cyc2 = [], []
    for i in range(C):
        q = 3 * (i * R + 0)
        cyc1 += [(cx.sides[q, 0], 1), (cx.sides[q, 1], -1)]
    for j in range(R):
        q = 3 * (0 * R + j) + 1
        cyc2 += [(cx.sides[q, 0], 1), (cx.sides[q, 1], -1)]
    cx.cycles = [cyc1, cyc2]
    return cx


def parse_permutation(perm_text, n=None):
    """Permutation of {0..n-1} from cycle notation "1 2 3 4" / "(1 2)(3 4)" or a list.

    A plain whitespace list is read as one cycle, matching the usual
    shorthand for origami data.  Points are 1-based in strings.
    """
    if isinstance(perm_text, str):
        s = perm_text.strip()
        groups = []
        if "(" in s:
            for part in s.replace(")", "").split("("):
                if part.strip():
                    groups.append([int(t) for t in part.replace(",", " ").split()])
        elif s:
            groups.append([int(t) for t in s.replace(",", " ").split()])
        pts = [x for g in groups for x in g]
        size = max(pts + [n or 0])
        perm = list(range(size))
        for g in groups:
            for k, a in enumerate(g):
                perm[a - 1] = g[(k + 1) % len(g)] - 1
        return perm
    perm = [int(x) for x in perm_text]
    if sorted(perm) != list(range(len(perm))):
        raise ComplexError("not a permutation of 0..n-1")
    return perm


def _orbits_transitive(h, v):
    n = len(h)
    seen = {0}
    stack = [0]
    while stack:
        s = stack.pop()
        for t in (h[s], v[s], h.index(s), v.index(s)):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return len(seen) == n


def generate_origami(h_perm, v_perm, rho_default: float = 1.0) -> QuadComplex:
    """Square-tiled surface: square s has h(s) on its right and v(s) on top.

    Every square is cut into four quads around its center; centers and
    corners are primal, side midpoints dual.
    """
    h = parse_permutation(h_perm)
    v = parse_permutation(v_perm)
    n = max(len(h), len(v))
    h += list(range(len(h), n))
    v += list(range(len(v), n))
    if sorted(h) != list(range(n)) or sorted(v) != list(range(n)):
        raise ComplexError("h and v must be permutations of the same set")
    if not (rho_default > 0 and math.isfinite(rho_default)):
        raise ComplexError("rho_default must be positive")
    if not _orbits_transitive(h, v):
        raise ComplexError("disconnected surface: <h, v> is not transitive")
    # corners: BL=0 BR=1 TR=2 TL=3 of each square, glued by union-find
    parent = list(range(4 * n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for s in range(n):
        union(4 * s + 1, 4 * h[s] + 0)
        union(4 * s + 2, 4 * h[s] + 3)
        union(4 * s + 3, 4 * v[s] + 0)
        union(4 * s + 2, 4 * v[s] + 1)
    roots = sorted({find(a) for a in range(4 * n)})
    corner_id = {r: k for k, r in enumerate(roots)}
    nc = len(roots)
    center = lambda s: nc + s
    midL = lambda s: nc + n + 2 * s          # left side midpoint of s
    midB = lambda s: nc + n + 2 * s + 1      # bottom side midpoint of s
    corner = lambda s, k: corner_id[find(4 * s + k)]
    V = nc + 3 * n
    color = np.array([PRIMAL] * (nc + n) + [DUAL] * (2 * n), dtype=np.int8)

    quads, sides, cz = [], [], []
    registry = {}
    edges = []

    def edge(key, a, b):
        if key not in registry:
            registry[key] = len(edges)
            edges.append((a, b))
        return registry[key]

    for s in range(n):
        c = center(s)
        L, B, R, T = midL(s), midB(s), midL(h[s]), midB(v[s])
        BL, BR, TR, TL = (corner(s, k) for k in range(4))
        o = complex(2 * s, 0)  # squares laid out side by side, unit size
        zc = {"BL": 0, "BR": 1, "TR": 1 + 1j, "TL": 1j, "B": 0.5, "R": 1 + 0.5j,
              "T": 0.5 + 1j, "L": 0.5j, "c": 0.5 + 0.5j}
        e_cB = edge(("c", s, "B"), c, B)
        e_cR = edge(("c", s, "R"), c, R)
        e_cT = edge(("c", s, "T"), c, T)
        e_cL = edge(("c", s, "L"), c, L)
        e_BL_B = edge(("B", s, 0), BL, B)
        e_BR_B = edge(("B", s, 1), BR, B)
        e_TL_T = edge(("B", v[s], 0), TL, T)
        e_TR_T = edge(("B", v[s], 1), TR, T)
        e_BL_L = edge(("L", s, 0), BL, L)
        e_TL_L = edge(("L", s, 1), TL, L)
        e_BR_R = edge(("L", h[s], 0), BR, R)
        e_TR_R = edge(("L", h[s], 1), TR, R)
        # (x, y, x', y') and sides (x,y), (x',y), (x',y'), (x,y')
        for ring, sd, names in (
            ((BL, B, c, L), (e_BL_B, e_cB, e_cL, e_BL_L), ("BL", "B", "c", "L")),
            ((BR, R, c, B), (e_BR_R, e_cR, e_cB, e_BR_B), ("BR", "R", "c", "B")),
            ((TR, T, c, R), (e_TR_T, e_cT, e_cR, e_TR_R), ("TR", "T", "c", "R")),
            ((TL, L, c, T), (e_TL_L, e_cL, e_cT, e_TL_T), ("TL", "L", "c", "T")),
        ):
            quads.append(ring)
            sides.append(sd)
            cz.append([o + zc[k] for k in names])
    cz = np.array(cz)
    cx = QuadComplex(color=color, quads=np.array(quads, dtype=np.int64),
                     edges=np.array(edges, dtype=np.int64), sides=np.array(sides, dtype=np.int64),
                     rho=np.full(4 * n, float(rho_default)), corner_z=cz, origin=nc,
                     meta={"kind": "origami", "h": [x + 1 for x in h], "v": [x + 1 for x in v],
                           "squares": n})
    return cx


def origami_genus_formula(h_perm, v_perm) -> int:
    """Genus from the cycle type of the commutator (one cone point per cycle)."""
    h = parse_permutation(h_perm)
    v = parse_permutation(v_perm)
    n = max(len(h), len(v))
    h += list(range(len(h), n))
    v += list(range(len(v), n))
    hinv = [h.index(s) for s in range(n)]
    vinv = [v.index(s) for s in range(n)]
    comm = [v[h[vinv[hinv[s]]]] for s in range(n)]
    ncyc = _count_cycles(comm)
    # chi = vertices - edges + faces of the square tiling
    return (2 - (ncyc - 2 * n + n)) // 2


def _count_cycles(perm):
    seen = set()
    c = 0
    for s in range(len(perm)):
        if s in seen:
            continue
        c += 1
        while s not in seen:
            seen.add(s)
            s = perm[s]
    return c


def generate_rhombic_patch(delta: float = 1.0, style: str = "square",
                           radius: Optional[float] = None,
                           size: Optional[tuple] = None) -> QuadComplex:
    """Simply connected planar patch of rhombi of side delta around O = 0.

    style "square": diamond vertices delta (m + i n), quads unit squares.
    style "trihex": equilateral triangular primal lattice with its
    hexagonal dual, rhombus angles pi/3 and 2 pi/3.
    Either radius (keep quads with all corners within radius*delta) or
    size=(n, m) (square style: vertex indices |m|, |n| <= (size-1)/2)
    selects the region.
    """
    if not (delta > 0 and math.isfinite(delta)):
        raise ComplexError("delta must be positive")
    if radius is None and size is None:
        raise ComplexError("give a radius or a size")
    rings = []
    if style == "square":
        if size is not None:
            nx, ny = size
            hx, hy = (nx - 1) // 2, (ny - 1) // 2
            xs, ys = range(-hx, nx - hx - 1), range(-hy, ny - hy - 1)
        else:
            r = int(math.ceil(radius)) + 1
            xs = ys = range(-r, r)
        for m in xs:
            for n in ys:
                ring = [(m, n), (m + 1, n), (m + 1, n + 1), (m, n + 1)]
                if (m + n) % 2:
                    ring = ring[1:] + ring[:1]
                pos = [delta * complex(*c) for c in ring]
                if radius is not None and max(abs(w) for w in pos) > radius * delta + 1e-9:
                    continue
                rings.append((ring, pos, lambda c: (c[0] + c[1]) % 2))
    elif style == "trihex":
        if radius is None:
            raise ComplexError("trihex patches take a radius")
        shape = (1.0 + 0j, complex(0.5, math.sqrt(3) / 2))
        scale = delta / abs(_trihex_pos(("u", 0, 0), shape))
        r = int(math.ceil(2 * radius / math.sqrt(3))) + 2
        for i in range(-r, r + 1):
            for j in range(-r, r + 1):
                for kind, ring in _trihex_quads(i, j, shape):
                    pos = [scale * _trihex_pos(c, shape) for c in ring]
                    if max(abs(w) for w in pos) > radius * delta + 1e-9:
                        continue
                    rings.append((ring, pos, lambda c: PRIMAL if c[0] == "p" else DUAL))
    else:
        raise ComplexError(f"unknown style {style!r}")
    if not rings:
        raise ComplexError("empty region")
    # vertex ids in order of appearance, then keep the component of O
    ids, color, zlist = {}, [], []
    lifted, cz = [], []
    for ring, pos, col in rings:
        row = []
        for c, w in zip(ring, pos):
            if c not in ids:
                ids[c] = len(ids)
                color.append(col(c))
                zlist.append(w)
            row.append((ids[c], _trihex_key(c) if style == "trihex" else c))
        lifted.append(row)
        cz.append(pos)
    z = np.array(zlist)
    origin = int(np.argmin(np.abs(z)))
    if abs(z[origin]) > 1e-12:
        raise ComplexError("region does not contain the origin")
    keep = _component_quads(lifted, origin)
    lifted = [lifted[k] for k in keep]
    cz = np.array([cz[k] for k in keep])
    used = sorted({v for row in lifted for v, _ in row})
    remap = {v: k for k, v in enumerate(used)}
    lifted = [[(remap[v], key) for v, key in row] for row in lifted]
    cx = _assemble(len(used), np.array(color)[used], lifted, _rho_from_corners(cz),
                   corner_z=cz, z=z[used], origin=remap[origin],
                   meta={"kind": "rhombic-patch", "style": style, "delta": delta,
                         "radius": radius, "size": list(size) if size else None})
    return cx


def _component_quads(lifted, origin):
    by_vertex = {}
    for k, row in enumerate(lifted):
        for v, _ in row:
            by_vertex.setdefault(v, []).append(k)
    seen_q, seen_v = set(), {origin}
    dq = deque([origin])
    while dq:
        v = dq.popleft()
        for k in by_vertex.get(v, []):
            if k in seen_q:
                continue
            seen_q.add(k)
            for w, _ in lifted[k]:
                if w not in seen_v:
                    seen_v.add(w)
                    dq.append(w)
    return sorted(seen_q)


# ----------------------------------------------------------------------
# chains and cochains
# ----------------------------------------------------------------------

@dataclass
class Chain:
    degree: int
    complex_tag: str
    coefficients: np.ndarray


@dataclass
class Cochain:
    degree: int
    complex_tag: str
    values: np.ndarray


def _cells(cx, tag, k):
    if tag == LAMBDA:
        return (cx.V, 2 * cx.F, cx.V)[k]
    return (cx.V, cx.E, cx.F)[k]


def _dmat(cx, tag, k):
    if tag == LAMBDA:
        return (cx.d0_lambda, cx.d1_lambda)[k]
    return (cx.d0_diamond, cx.d1_diamond)[k]


def boundary(cx: QuadComplex, c: Chain) -> Chain:
    """Boundary operator; the zero chain on vertices."""
    if c.degree == 0:
        return Chain(0, c.complex_tag, np.zeros_like(c.coefficients))
    D = _dmat(cx, c.complex_tag, c.degree - 1)
    return Chain(c.degree - 1, c.complex_tag, D.T @ c.coefficients)


def coboundary(cx: QuadComplex, f: Cochain) -> Cochain:
    """Coboundary defined by Stokes: (df)(c) = f(boundary c)."""
    if f.degree >= 2:
        raise ComplexError("no 3-cells: the coboundary of a 2-cochain is not representable")
    D = _dmat(cx, f.complex_tag, f.degree)
    return Cochain(f.degree + 1, f.complex_tag, D @ f.values)


def d(cx: QuadComplex, values, degree: int, tag: str = LAMBDA) -> np.ndarray:
    """Array form of the coboundary."""
    return coboundary(cx, Cochain(degree, tag, np.asarray(values))).values


def cycle_chain(cx: QuadComplex, cycle) -> np.ndarray:
    """Integer diamond 1-chain of a cycle given as (edge, sign) pairs."""
    c = np.zeros(cx.E, dtype=np.int64)
    for e, s in cycle:
        c[e] += s
    return c


def cycle_vertices(cx: QuadComplex, cycle) -> list:
    """Vertex sequence v0, v1, ..., vn of an (edge, sign) path."""
    out = []
    for e, s in cycle:
        a, b = cx.edges[e] if s > 0 else cx.edges[e][::-1]
        if not out:
            out.append(int(a))
        elif out[-1] != a:
            raise ComplexError("edge path is not connected")
        out.append(int(b))
    return out


# ----------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------

def validate(cx: QuadComplex) -> list:
    """List of invariant violations; empty means valid."""
    report = []
    col = cx.color
    q = cx.quads
    bad = np.flatnonzero((col[q[:, 0]] != PRIMAL) | (col[q[:, 2]] != PRIMAL)
                         | (col[q[:, 1]] != DUAL) | (col[q[:, 3]] != DUAL))
    for k in bad:
        report.append({"kind": "bipartite", "quad": int(k),
                       "message": f"quad {int(k)} does not alternate primal/dual"})
    for k, (a, b) in enumerate(cx.edges):
        if col[a] != PRIMAL or col[b] != DUAL:
            report.append({"kind": "bipartite", "edge": k,
                           "message": f"edge {k} does not join a primal to a dual vertex"})
    # side/vertex consistency
    for qq in range(cx.F):
        for s, (a, b) in enumerate(_SIDE_CORNERS):
            e = cx.sides[qq, s]
            if tuple(cx.edges[e]) != (q[qq, a], q[qq, b]):
                report.append({"kind": "incidence", "quad": qq,
                               "message": f"side {s} of quad {qq} does not match edge {e}"})
    try:
        inc = cx.edge_faces
    except ComplexError as exc:
        report.append({"kind": "manifold", "message": str(exc)})
        return report
    for e in range(cx.E):
        a, b = inc[e]
        if a < 0:
            report.append({"kind": "manifold", "edge": e, "message": f"edge {e} lies in no quad"})
            continue
        if b < 0:
            continue
        sa, sb = a % 4, b % 4
        if (sa % 2) == (sb % 2):
            report.append({"kind": "orientation", "edge": e,
                           "message": f"quads {a // 4} and {b // 4} induce the same orientation on edge {e}"})
    if cx.meta.get("closed", None) is True and not cx.closed:
        report.append({"kind": "closed", "message": "complex declared closed has boundary edges"})
    try:
        cx.fans
    except ComplexError as exc:
        report.append({"kind": "manifold", "message": str(exc)})
    if cx.closed:
        chi = cx.euler_characteristic
        if chi % 2 or chi > 2:
            report.append({"kind": "euler", "message": f"Euler characteristic {chi} is not 2-2g"})
        g = cx.meta.get("genus")
        if g is not None and g != cx.genus:
            report.append({"kind": "euler", "message": f"declared genus {g} but V-E+F gives {cx.genus}"})
    if np.any(~np.isfinite(cx.rho)) or np.any(cx.rho <= 0):
        for k in np.flatnonzero(~(cx.rho > 0) | ~np.isfinite(cx.rho)):
            report.append({"kind": "rho", "quad": int(k), "message": f"rho of quad {int(k)} is not positive"})
    if cx.rho_star_input is not None:
        rs = cx.rho_star_input
        for k in np.flatnonzero(np.isfinite(rs)):
            prod = cx.rho[k] * rs[k]
            if abs(prod - 1.0) > 1e-12:
                report.append({"kind": "reciprocity", "quad": int(k),
                               "message": f"rho(e) rho(e*) = {prod:.6g} on quad {int(k)}"})
    return report


# ----------------------------------------------------------------------
# JSON
# ----------------------------------------------------------------------

def _cpair(w):
    return [float(np.real(w)), float(np.imag(w))]


def to_json(cx: QuadComplex) -> dict:
    verts = []
    for v in range(cx.V):
        item = {"id": v, "color": "primal" if cx.color[v] == PRIMAL else "dual"}
        if cx.z is not None:
            item["z"] = _cpair(cx.z[v])
        verts.append(item)
    le = cx.lambda_edges
    meta = {"genus": cx.genus, "closed": bool(cx.closed)}
    if cx.origin is not None:
        meta["origin"] = int(cx.origin)
    meta["sides"] = cx.sides.tolist()
    if cx.corner_z is not None:
        meta["corner_z"] = [[_cpair(w) for w in row] for row in cx.corner_z]
    if cx.periods is not None:
        meta["periods"] = [_cpair(w) for w in cx.periods]
    if cx.cycles is not None:
        meta["cycles"] = [[[int(e), int(s)] for e, s in c] for c in cx.cycles]
    for k, v in cx.meta.items():
        if not k.startswith("_") and k not in meta:
            meta[k] = v
    return {"vertices": verts, "quads": cx.quads.tolist(),
            "rho": [{"edge": [int(le[k, 0]), int(le[k, 1])], "value": float(cx.rho[k])}
                    for k in range(cx.F)],
            "meta": meta}


def from_json(data: dict) -> QuadComplex:
    """Complex from its JSON form.

    Diamond edges come from meta["sides"] when present, otherwise from
    vertex pairs (rejected if a pair bounds more than two quad sides).
    """
    try:
        verts = sorted(data["vertices"], key=lambda r: r["id"])
        quads = np.asarray(data["quads"], dtype=np.int64).reshape(-1, 4)
    except (KeyError, TypeError, ValueError) as exc:
        raise ComplexError(f"malformed complex file: {exc}") from exc
    if [r["id"] for r in verts] != list(range(len(verts))):
        raise ComplexError("vertex ids must be 0..V-1")
    color = np.array([PRIMAL if r["color"] == "primal" else DUAL for r in verts], dtype=np.int8)
    z = None
    if all("z" in r for r in verts) and verts:
        z = np.array([complex(*r["z"]) for r in verts])
    meta = dict(data.get("meta", {}))
    F = len(quads)
    if "sides" in meta:
        sides = np.asarray(meta.pop("sides"), dtype=np.int64)
        E = int(sides.max()) + 1 if F else 0
        edges = np.zeros((E, 2), dtype=np.int64)
        for qq in range(F):
            for s, (a, b) in enumerate(_SIDE_CORNERS):
                edges[sides[qq, s]] = (quads[qq, a], quads[qq, b])
    else:
        registry, edges = {}, []
        sides = np.zeros((F, 4), dtype=np.int64)
        count = {}
        for qq in range(F):
            for s, (a, b) in enumerate(_SIDE_CORNERS):
                key = (int(quads[qq, a]), int(quads[qq, b]))
                count[key] = count.get(key, 0) + 1
                if count[key] > 2:
                    raise ComplexError(f"vertex pair {key} bounds more than two sides; "
                                       "edge identification needs meta.sides")
                if key not in registry:
                    registry[key] = len(edges)
                    edges.append(key)
                sides[qq, s] = registry[key]
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    corner_z = None
    if "corner_z" in meta:
        corner_z = np.array([[complex(*w) for w in row] for row in meta.pop("corner_z")])
    elif z is not None:
        corner_z = z[quads]
    rho = np.full(F, np.nan)
    rho_star = np.full(F, np.nan)
    prim = {(int(a), int(b)): k for k, (a, b) in enumerate(quads[:, [0, 2]])}
    dual = {(int(a), int(b)): k for k, (a, b) in enumerate(quads[:, [1, 3]])}
    for item in data.get("rho", []) or []:
        a, b = (int(t) for t in item["edge"])
        val = float(item["value"])
        for key in ((a, b), (b, a)):
            if key in prim:
                rho[prim[key]] = val
            elif key in dual:
                rho_star[dual[key]] = val
    miss = np.isnan(rho)
    fill = np.where(np.isfinite(rho_star), 1.0 / np.where(rho_star == 0, np.nan, rho_star), np.nan)
    rho = np.where(miss, fill, rho)
    if np.isnan(rho).any():
        if corner_z is None:
            raise ComplexError("rho missing and no embedding to derive it from")
        rho = np.where(np.isnan(rho), _rho_from_corners(corner_z), rho)
    periods = meta.pop("periods", None)
    if periods is not None:
        periods = tuple(complex(*w) for w in periods)
    cycles = meta.pop("cycles", None)
    if cycles is not None:
        cycles = [[(int(e), int(s)) for e, s in c] for c in cycles]
    origin = meta.pop("origin", None)
    has_star = np.isfinite(rho_star).any() and not miss.all()
    return QuadComplex(color=color, quads=quads, edges=edges, sides=sides, rho=rho,
                       corner_z=corner_z, z=z, origin=origin, periods=periods, cycles=cycles,
                       meta=meta, rho_star_input=rho_star if has_star else None)


def save(cx: QuadComplex, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json(cx), fh, indent=1, sort_keys=True)


def load(path) -> QuadComplex:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ComplexError(f"cannot read complex: {exc}") from exc
    return from_json(data)


def distances_from(cx: QuadComplex, src: int) -> np.ndarray:
    """Combinatorial distance on the diamond graph."""
    A = (cx.d0_diamond.T @ cx.d0_diamond).tocsr()
    dist = np.full(cx.V, -1, dtype=np.int64)
    dist[src] = 0
    dq = deque([src])
    indptr, indices = A.indptr, A.indices
    while dq:
        v = dq.popleft()
        for w in indices[indptr[v]:indptr[v + 1]]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                dq.append(w)
    return dist
