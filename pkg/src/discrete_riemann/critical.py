"""
Critical maps: quad-graphs embedded with every face a rhombus of side delta.

On such maps the discrete exponential exp(:lam:x) is the product of
(1 + lam u/2) / (1 - lam u/2) over the diamond steps u = Z(y) - Z(x) of
any path from the origin O to x.  Its Taylor coefficients in lam are the
monomials; here they are stored normalized, m_k = Z^{:k:} / k!.

Long series near the pole circle |lam| = 2/delta cancel badly (terms of
size 1e10 summing to 1e-10 on a radius-8 patch), so monomials and series
are evaluated in double-double arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .calculus import biconstant, cr_residual, laplacian_matrix
from .cellular import PRIMAL, ComplexError, QuadComplex, distances_from


class NotCritical(ComplexError):
    """Some faces are not rhombi of the common side."""

    def __init__(self, message, faces=None):
        super().__init__(message)
        self.faces = faces or []


class PoleError(ValueError):
    """lam hits a pole 2/u of the rational fraction."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class DivergenceError(ValueError):
    """Series requested outside its disc of convergence."""


class HolonomyError(ValueError):
    """A propagated quantity fails to close around some loop."""

    def __init__(self, message, edge=None, mismatch=None):
        super().__init__(message)
        self.edge = edge
        self.mismatch = mismatch


class QuadratureError(RuntimeError):
    """Successive quadrature refinements disagree."""


# ----------------------------------------------------------------------
# critical maps
# ----------------------------------------------------------------------

@dataclass
class _Tree:
    order: np.ndarray      # BFS order, order[0] = origin
    parent: np.ndarray     # (V,) parent vertex, -1 at the root
    step: np.ndarray       # (V,) Z(v) - Z(parent)
    depth: np.ndarray
    layers: list           # arrays of vertices with equal depth (>= 1)


@dataclass(eq=False)
class CriticalMap:
    cx: QuadComplex
    Z: np.ndarray
    delta: float
    theta_min: float               # minimum rhombus half-angle
    min_angle: float               # minimum rhombus angle
    directions: np.ndarray         # (E,) unit vectors of primal -> dual edges
    origin: int
    dist: np.ndarray               # combinatorial distance to the origin
    _trees: dict = field(default_factory=dict, repr=False)

    @property
    def epsilon(self) -> np.ndarray:
        """Biconstant normalized to +1 on the color of the origin."""
        e = biconstant(self.cx).astype(float)
        return e * e[self.origin]

    def tree(self, reverse: bool = False) -> _Tree:
        if reverse not in self._trees:
            self._trees[reverse] = _bfs_tree(self, reverse)
        return self._trees[reverse]

    def edge_steps(self) -> np.ndarray:
        e = self.cx.edges
        return self.Z[e[:, 1]] - self.Z[e[:, 0]]


def _bfs_tree(cm: CriticalMap, reverse: bool) -> _Tree:
    cx = cm.cx
    V = cx.V
    nbrs = [[] for _ in range(V)]
    for a, b in cx.edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    parent = np.full(V, -1)
    depth = np.full(V, -1)
    depth[cm.origin] = 0
    order = [cm.origin]
    i = 0
    while i < len(order):
        v = order[i]
        i += 1
        for w in (reversed(nbrs[v]) if reverse else nbrs[v]):
            if depth[w] < 0:
                depth[w] = depth[v] + 1
                parent[w] = v
                order.append(w)
    if len(order) != V:
        raise ComplexError("diamond graph is not connected")
    order = np.array(order)
    step = np.zeros(V, dtype=complex)
    nz = parent >= 0
    step[nz] = cm.Z[nz] - cm.Z[parent[nz]]
    layers = [order[depth[order] == k] for k in range(1, depth.max() + 1)]
    return _Tree(order, parent, step, depth, layers)


def check_critical(cx: QuadComplex, tol: float = 1e-12) -> CriticalMap:
    """Validate a rhombic embedding and build the CriticalMap.

    Raises NotCritical listing every face whose sides differ from the
    common length or whose rho disagrees with the diagonal ratio.
    """
    if cx.corner_z is None or cx.z is None:
        raise ComplexError("complex has no embedding")
    cz = np.asarray(cx.corner_z)
    sides = np.abs(np.roll(cz, -1, axis=1) - cz)        # (F, 4)
    delta = float(np.median(sides))
    bad = []
    off = np.abs(sides - delta).max(axis=1)
    for qi in np.flatnonzero(off > tol * delta):
        bad.append({"face": int(qi), "kind": "side", "defect": float(off[qi])})
    ratio = np.abs(cz[:, 3] - cz[:, 1]) / np.abs(cz[:, 2] - cz[:, 0])
    rdef = np.abs(ratio - cx.rho)
    for qi in np.flatnonzero(rdef > tol * np.maximum(1.0, cx.rho)):
        bad.append({"face": int(qi), "kind": "rho", "defect": float(rdef[qi])})
    if bad:
        raise NotCritical(f"{len({b['face'] for b in bad})} non-rhombic faces", bad)
    # planar: the representative coordinates reproduce every corner
    if np.abs(cx.z[cx.quads] - cz).max() > 1e-9 * max(delta, 1.0):
        raise NotCritical("embedding is not single valued (not a planar patch)")
    if cx.origin is None:
        raise ComplexError("complex has no origin")
    Z = np.asarray(cx.z, dtype=complex) - cx.z[cx.origin]
    e = cx.edges
    directions = (Z[e[:, 1]] - Z[e[:, 0]]) / delta
    # rhombus angle at the primal corner x, and its supplement
    a = np.abs(np.angle((cz[:, 3] - cz[:, 0]) / (cz[:, 1] - cz[:, 0])))
    min_angle = float(np.minimum(a, np.pi - a).min())
    return CriticalMap(cx, Z, delta, min_angle / 2, min_angle, directions,
                       int(cx.origin), distances_from(cx, int(cx.origin)))


def distance_bounds(cm: CriticalMap) -> dict:
    """Margins of d sin(theta_m)/4 <= |x|/delta <= d (theta_m the minimum angle)."""
    d = cm.dist.astype(float)
    r = np.abs(cm.Z) / cm.delta
    lower = r - d * math.sin(cm.min_angle) / 4
    upper = d - r
    return {"lower_margin": float(lower.min()), "upper_margin": float(upper.min()),
            "ok": bool(lower.min() >= -1e-12 and upper.min() >= -1e-12)}


def diam_lemma_check(corners, n_pairs: int = 200, rng=None) -> dict:
    """Sample point pairs on quadrilateral boundaries and compare MM'/l to sin(eta)/4.

    corners: (n, 4) complex array of polygons with orthogonal diagonals.
    l is the shorter way around the perimeter.
    """
    rng = np.random.default_rng(rng)
    cz = np.atleast_2d(np.asarray(corners, dtype=complex))
    worst = np.inf
    for poly in cz:
        nxt = np.roll(poly, -1)
        lens = np.abs(nxt - poly)
        per = lens.sum()
        cum = np.concatenate([[0.0], np.cumsum(lens)])
        prv = np.roll(poly, 1)
        ang = np.abs(np.angle((prv - poly) / (nxt - poly)))
        eta = min(ang.min(), (2 * np.pi - ang).min())
        s = rng.uniform(0, per, size=(n_pairs, 2))

        def point(t):
            k = np.minimum(np.searchsorted(cum, t, side="right") - 1, 3)
            return poly[k] + (t - cum[k]) / lens[k] * (nxt[k] - poly[k])

        m1, m2 = point(s[:, 0]), point(s[:, 1])
        arc = np.abs(s[:, 0] - s[:, 1])
        ell = np.minimum(arc, per - arc)
        keep = ell > 1e-12
        ratio = np.abs(m1 - m2)[keep] / ell[keep]
        if ratio.size:
            worst = min(worst, float((ratio / (math.sin(eta) / 4)).min()))
    return {"min_ratio_over_bound": worst, "ok": bool(worst >= 1 - 1e-12)}


# ----------------------------------------------------------------------
# exponentials
# ----------------------------------------------------------------------

def _step_factor(u, lam, tol=1e-14):
    den = 1 - lam * u / 2
    hit = np.abs(den) < tol
    if np.any(hit):
        uu = np.broadcast_to(u, np.shape(hit))[hit].ravel()[0]
        raise PoleError(f"lambda hits the pole of the step at angle {np.angle(uu):.12g}",
                        theta=float(np.angle(uu)))
    return (1 + lam * u / 2) / den


def _exp_on_tree(cm: CriticalMap, lam, tree: _Tree) -> np.ndarray:
    lam = np.asarray(lam, dtype=complex)
    out = np.ones(lam.shape + (cm.cx.V,), dtype=complex)
    for layer in tree.layers:
        fac = _step_factor(tree.step[layer], lam[..., None])
        out[..., layer] = out[..., tree.parent[layer]] * fac
    return out


def exp_rational(cm: CriticalMap, lam, x=None, check_paths: bool = False):
    """exp(:lam:x) as a product over a BFS path from the origin.

    lam may be an array; the result then has shape lam.shape + (V,) (or
    lam.shape when x is given).  With check_paths the value is recomputed
    on a second spanning tree and the relative discrepancy is returned as
    a second item.
    """
    vals = _exp_on_tree(cm, lam, cm.tree())
    gap = None
    if check_paths:
        other = _exp_on_tree(cm, lam, cm.tree(reverse=True))
        gap = float((np.abs(other - vals) / np.maximum(np.abs(vals), 1e-300)).max())
    if x is not None:
        vals = vals[..., x]
    return (vals, gap) if check_paths else vals


def exp_edge_residual(cm: CriticalMap, f, lam) -> np.ndarray:
    """Per-edge defect of f(y) - f(x) = lam (f(x) + f(y))/2 (Z(y) - Z(x))."""
    f = np.asarray(f)
    e = cm.cx.edges
    return (f[e[:, 1]] - f[e[:, 0]]) - lam * (f[e[:, 0]] + f[e[:, 1]]) / 2 * cm.edge_steps()


def exp_infinity_gap(cm: CriticalMap, scale: float = 1e6) -> float:
    """Distance between exp(:lam:) at lam = scale * 2/delta and the biconstant."""
    vals = exp_rational(cm, scale * 2 / cm.delta)
    return float(np.abs(vals - cm.epsilon).max())


def explimn_errors(lam, x, ns=(8, 16, 32)) -> np.ndarray:
    """|((1 + lam x/2n)/(1 - lam x/2n))^n - e^{lam x}| for straight n-step paths."""
    lam, x = complex(lam), complex(x)
    out = []
    for n in ns:
        h = lam * x / (2 * n)
        out.append(abs(((1 + h) / (1 - h)) ** n - np.exp(lam * x)))
    return np.array(out)


# ----------------------------------------------------------------------
# double-double complex arithmetic (vectorized)
# ----------------------------------------------------------------------

_SPLIT = 134217729.0


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_add(a, b):
    s, e = _two_sum(a[0], b[0])
    e = e + a[1] + b[1]
    hi = s + e
    return hi, e - (hi - s)


def _dd_mul(a, b):
    p, e = _two_prod(a[0], b[0])
    e = e + (a[0] * b[1] + a[1] * b[0])
    hi = p + e
    return hi, e - (hi - p)


def _dd_neg(a):
    return -a[0], -a[1]


class _CDD:
    """Complex double-double numbers stored as four float arrays."""

    __slots__ = ("re", "im")

    def __init__(self, re, im):
        self.re, self.im = re, im

    @classmethod
    def from_complex(cls, z):
        z = np.asarray(z, dtype=complex)
        zero = np.zeros(z.shape)
        return cls((z.real.copy(), zero), (z.imag.copy(), zero.copy()))

    def __add__(self, o):
        return _CDD(_dd_add(self.re, o.re), _dd_add(self.im, o.im))

    def __mul__(self, o):
        re = _dd_add(_dd_mul(self.re, o.re), _dd_neg(_dd_mul(self.im, o.im)))
        im = _dd_add(_dd_mul(self.re, o.im), _dd_mul(self.im, o.re))
        return _CDD(re, im)

    def __getitem__(self, idx):
        return _CDD((self.re[0][idx], self.re[1][idx]), (self.im[0][idx], self.im[1][idx]))

    def __setitem__(self, idx, val):
        self.re[0][idx], self.re[1][idx] = val.re
        self.im[0][idx], self.im[1][idx] = val.im

    def to_complex(self):
        return (self.re[0] + self.re[1]) + 1j * (self.im[0] + self.im[1])

    def abs_hi(self):
        return np.hypot(self.re[0], self.im[0])


# ----------------------------------------------------------------------
# monomials and series
# ----------------------------------------------------------------------

def _require_disc(cm: CriticalMap):
    cx = cm.cx
    if cx.closed or cx.euler_characteristic != 1:
        raise HolonomyError("patch is not simply connected")


def _monomials_dd(cm: CriticalMap, kmax: int) -> list:
    """Normalized monomials m_0..m_kmax as double-double arrays."""
    _require_disc(cm)
    V = cm.cx.V
    tree = cm.tree()
    half = [_CDD.from_complex(tree.step[layer] / 2) for layer in tree.layers]
    out = [_CDD.from_complex(np.ones(V))]
    for _ in range(kmax):
        prev = out[-1]
        cur = _CDD.from_complex(np.zeros(V))
        for layer, h in zip(tree.layers, half):
            par = tree.parent[layer]
            cur[layer] = cur[par] + (prev[par] + prev[layer]) * h
        out.append(cur)
    return out


def monomials(cm: CriticalMap, kmax: int, normalized: bool = True) -> np.ndarray:
    """Array (kmax+1, V) of Z^{:k:}/k! (or Z^{:k:} when normalized=False)."""
    m = np.array([c.to_complex() for c in _monomials_dd(cm, kmax)])
    if not normalized:
        m = m * np.array([float(math.factorial(k)) for k in range(kmax + 1)])[:, None]
    return m


def monomial_residuals(cm: CriticalMap, m: np.ndarray) -> dict:
    """Holomorphy and primitive-relation defects of normalized monomials.

    The primitive relation m_k(y) - m_k(x) = (m_{k-1}(x) + m_{k-1}(y)) u/2
    is checked on every edge, including those off the propagation tree.
    """
    e = cm.cx.edges
    u = cm.edge_steps()
    scale = np.maximum(np.abs(m).max(axis=1), 1e-300)
    cr = np.array([np.abs(cr_residual(cm.cx, mk)).max() for mk in m]) / scale
    prim = np.zeros(len(m))
    for k in range(1, len(m)):
        r = (m[k][e[:, 1]] - m[k][e[:, 0]]) - (m[k - 1][e[:, 0]] + m[k - 1][e[:, 1]]) * u / 2
        prim[k] = np.abs(r).max() / scale[k]
    return {"cr": cr, "primitive": prim}


@dataclass
class SeriesResult:
    values: np.ndarray
    terms: np.ndarray          # number of contributing terms per vertex
    converged: np.ndarray      # per vertex
    max_terms: int


def exp_series(cm: CriticalMap, lam, x=None, max_terms: int = 200,
               rel_tol: float = 1e-15, monos=None) -> SeriesResult:
    """Sum lam^k Z^{:k:}(x)/k! until two successive terms fall below rel_tol |partial|.

    Refuses |lam| >= 2/delta.  Sums are carried in double-double
    precision; pass precomputed double-double monomials (from
    ``series_monomials``) to amortize several lam values.
    """
    lam = complex(lam)
    if abs(lam) >= 2 / cm.delta:
        raise DivergenceError(f"|lambda| = {abs(lam):.6g} >= 2/delta; series diverges")
    if monos is None:
        monos = _monomials_dd(cm, max_terms)
    K = min(max_terms, len(monos) - 1)
    V = cm.cx.V
    idx = np.arange(V) if x is None else np.atleast_1d(x)
    total = monos[0][idx]
    total = _CDD((total.re[0].copy(), total.re[1].copy()), (total.im[0].copy(), total.im[1].copy()))
    n = len(idx)
    lam_dd = _CDD.from_complex(np.full(n, lam))
    power = _CDD.from_complex(np.ones(n))
    terms = np.ones(n, dtype=int)
    small = np.zeros(n, dtype=int)
    done = np.zeros(n, dtype=bool)
    for k in range(1, K + 1):
        power = power * lam_dd
        t = power * monos[k][idx]
        mag = t.abs_hi()
        active = ~done
        total_new = total + t
        total.re = (np.where(active, total_new.re[0], total.re[0]),
                    np.where(active, total_new.re[1], total.re[1]))
        total.im = (np.where(active, total_new.im[0], total.im[0]),
                    np.where(active, total_new.im[1], total.im[1]))
        tiny = mag <= rel_tol * total.abs_hi()
        small = np.where(tiny, small + 1, 0)
        terms = np.where(active & ~tiny, k + 1, terms)
        done |= small >= 2
        if done.all():
            break
    vals = total.to_complex()
    if x is not None and np.ndim(x) == 0:
        vals, terms, done = vals[0], terms[0], done[0]
    return SeriesResult(vals, terms, done, K)


def series_monomials(cm: CriticalMap, max_terms: int) -> list:
    """Double-double monomials reusable across exp_series calls."""
    return _monomials_dd(cm, max_terms)


def growth_bound(cm: CriticalMap, alphas=(1.5, 2.0, 3.0), kmax: int = 40, m=None) -> dict:
    """Largest |m_k(x)| / (((a+1)/(a-1))^d(x) (a delta/2)^k) over x, k <= kmax."""
    if m is None:
        m = monomials(cm, kmax)
    d = cm.dist.astype(float)
    out = {}
    for a in alphas:
        k = np.arange(kmax + 1)[:, None]
        logb = d[None, :] * math.log((a + 1) / (a - 1)) + k * math.log(a * cm.delta / 2)
        with np.errstate(divide="ignore"):
            ratio = np.exp(np.log(np.abs(m[:kmax + 1])) - logb)
        out[a] = float(ratio.max())
    out["ok"] = all(v <= 1 + 1e-12 for v in out.values())
    return out


# ----------------------------------------------------------------------
# duality, derivative, primitives
# ----------------------------------------------------------------------

def dagger(cm: CriticalMap, f) -> np.ndarray:
    """f^dag = epsilon * conj(f)."""
    return cm.epsilon * np.conj(np.asarray(f))


def primitive(cm: CriticalMap, f, tol: float = 1e-10) -> np.ndarray:
    """F with F(O) = 0 and F(y) - F(x) = (f(x) + f(y))/2 (Z(y) - Z(x)).

    Raises HolonomyError naming an edge where the propagated primitive
    does not close (f dZ not closed).
    """
    _require_disc(cm)
    f = np.asarray(f, dtype=complex)
    tree = cm.tree()
    F = np.zeros(cm.cx.V, dtype=complex)
    for layer in tree.layers:
        par = tree.parent[layer]
        F[layer] = F[par] + (f[par] + f[layer]) / 2 * tree.step[layer]
    e = cm.cx.edges
    r = (F[e[:, 1]] - F[e[:, 0]]) - (f[e[:, 0]] + f[e[:, 1]]) / 2 * cm.edge_steps()
    scale = max(1.0, float(np.abs(F).max()))
    k = int(np.argmax(np.abs(r)))
    if abs(r[k]) > tol * scale:
        raise HolonomyError(f"f dZ is not closed: mismatch {abs(r[k]):.3g} at edge {k}",
                            edge=k, mismatch=float(abs(r[k])))
    return F


@dataclass
class Derivative:
    dagger: np.ndarray
    raw: np.ndarray           # 4/delta^2 (int_O f^dag dZ)^dag
    canonical: np.ndarray     # raw minus its epsilon part at the origin's quad
    gauge: complex            # coefficient subtracted
    residual: float           # max |df - f' dZ| over edges


def _origin_quad(cm: CriticalMap) -> int:
    hit = np.flatnonzero((cm.cx.quads == cm.origin).any(axis=1))
    return int(hit[0])


def dagger_and_derivative(cm: CriticalMap, f, tol: float = 1e-9) -> Derivative:
    f = np.asarray(f, dtype=complex)
    scale = max(1.0, float(np.abs(f).max()))
    if np.abs(cr_residual(cm.cx, f)).max() > tol * scale:
        raise ValueError("f is not discrete holomorphic")
    fd = dagger(cm, f)
    raw = 4 / cm.delta ** 2 * dagger(cm, primitive(cm, fd))
    q = cm.cx.quads[_origin_quad(cm)]
    eps = cm.epsilon
    # epsilon part on one face: half the gap between the two diagonal means
    c = (raw[q[[0, 2]]].mean() * eps[q[0]] + raw[q[[1, 3]]].mean() * eps[q[1]]) / 2
    canon = raw - c * eps
    e = cm.cx.edges
    df = f[e[:, 1]] - f[e[:, 0]]
    res = df - (canon[e[:, 0]] + canon[e[:, 1]]) / 2 * cm.edge_steps()
    return Derivative(fd, raw, canon, complex(c), float(np.abs(res).max()))


# ----------------------------------------------------------------------
# train-tracks and the exponential basis
# ----------------------------------------------------------------------

@dataclass
class TrainTracks:
    tracks: list              # lists of (quad, pair) with pair 0 = sides {0,2}, 1 = {1,3}
    slopes: np.ndarray        # direction of crossed edges modulo pi
    closed: list              # whether each track is a loop
    self_crossing: list
    max_pair_crossings: int
    distinct_slopes: bool
    convex: bool
    rule: str


def train_tracks(cx: QuadComplex, rule: str = "slopes", tol: float = 1e-9) -> TrainTracks:
    """Chains of quads glued along opposite sides.

    rule "slopes": convex when different tracks have different slopes
    (modulo pi, within tol radians).  rule "crossings": convex when no
    track meets itself and two tracks share at most one quad.
    """
    if rule not in ("slopes", "crossings"):
        raise ValueError(f"unknown convexity rule {rule!r}")
    ef = cx.edge_faces                    # (E, 2) 4*q + side
    seen = np.zeros((cx.F, 2), dtype=bool)
    tracks, closed = [], []

    def across(q, s):
        e = cx.sides[q, s]
        a, b = ef[e]
        other = b if a == 4 * q + s else a
        return None if other < 0 else divmod(int(other), 4)

    for q0 in range(cx.F):
        for p in (0, 1):
            if seen[q0, p]:
                continue
            chain, loop = [(q0, p)], False
            seen[q0, p] = True
            for direction, first in ((0, p), (1, p + 2)):
                q, s = q0, first
                while True:
                    nxt = across(q, s)
                    if nxt is None:
                        break
                    q, s_in = nxt
                    pair = s_in % 2
                    if seen[q, pair]:
                        loop = loop or (q, pair) == (q0, p)
                        break
                    seen[q, pair] = True
                    if direction == 0:
                        chain.append((q, pair))
                    else:
                        chain.insert(0, (q, pair))
                    s = (s_in + 2) % 4
                if loop:
                    break
            tracks.append(chain)
            closed.append(loop)
    slopes = np.zeros(len(tracks))
    if cx.corner_z is not None:
        cz = cx.corner_z
        for k, chain in enumerate(tracks):
            q, p = chain[0]
            a, b = _SIDES[p]
            w = cz[q, b] - cz[q, a]
            slopes[k] = np.angle(w) % np.pi
    quad_tracks = [[] for _ in range(cx.F)]
    self_cross = []
    for k, chain in enumerate(tracks):
        qs = [q for q, _ in chain]
        self_cross.append(len(set(qs)) < len(qs))
        for q in set(qs):
            quad_tracks[q].append(k)
    pair_count = {}
    for lst in quad_tracks:
        if len(lst) == 2:
            key = tuple(sorted(lst))
            pair_count[key] = pair_count.get(key, 0) + 1
    max_pair = max(pair_count.values(), default=0)
    s = np.sort(slopes)
    gaps = np.diff(np.concatenate([s, [s[0] + np.pi]])) if len(s) else np.array([np.inf])
    distinct = bool(len(s) < 2 or gaps.min() > tol)
    crossing_ok = not any(self_cross) and max_pair <= 1
    convex = distinct if rule == "slopes" else crossing_ok
    return TrainTracks(tracks, slopes, closed, self_cross, max_pair, distinct, convex, rule)


# side (x,y) and its opposite (x',y') are pair 0, (x',y) and (x,y') pair 1;
# corner indices of the first side of each pair
_SIDES = ((0, 1), (2, 1))


def cr_system(cx: QuadComplex) -> sp.csr_matrix:
    """Sparse F x V matrix of the Cauchy-Riemann equations."""
    q = cx.quads
    F = cx.F
    rows = np.repeat(np.arange(F), 4)
    cols = q[:, [3, 1, 2, 0]].ravel()
    vals = np.stack([np.ones(F), -np.ones(F), -1j * cx.rho, 1j * cx.rho], axis=1).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(F, cx.V))


@dataclass
class BasisProbe:
    matrix: np.ndarray
    rank: int
    dim: int
    cr_rank: int
    is_basis: bool
    singular_values: np.ndarray


def exp_basis_probe(cm: CriticalMap, lambdas, rtol: float = 1e-10) -> BasisProbe:
    """Rank of exponentials exp(:lam_j:) against dim Omega = V - rank(CR)."""
    lambdas = np.asarray(lambdas, dtype=complex)
    M = exp_rational(cm, lambdas).T            # (V, n)
    cr = cr_system(cm.cx).toarray()
    s_cr = np.linalg.svd(cr, compute_uv=False)
    cr_rank = int((s_cr > rtol * s_cr.max()).sum()) if s_cr.size else 0
    dim = cm.cx.V - cr_rank
    s = np.linalg.svd(M, compute_uv=False)
    rank = int((s > rtol * s.max()).sum()) if s.size else 0
    return BasisProbe(M, rank, dim, cr_rank, bool(rank == dim == len(lambdas)), s)


# ----------------------------------------------------------------------
# Green function
# ----------------------------------------------------------------------

@dataclass
class GreenTable:
    values: np.ndarray
    radii: tuple               # (inner, outer) circle radii
    nodes: int
    ray_nodes: int
    branch: np.ndarray         # slit direction per vertex (argument, in the lam plane)
    refinement_gap: Optional[float] = None
    laplacian_residual: Optional[float] = None


def _exp_along_paths(cm: CriticalMap, lam, vertices=None):
    """exp(:lam:x) for the given vertices, lam of shape (n_vertices, n) or (n,)."""
    tree = cm.tree()
    lam = np.asarray(lam, dtype=complex)
    per_vertex = lam.ndim == 2
    vertices = np.arange(cm.cx.V) if vertices is None else np.asarray(vertices)
    out = np.ones((len(vertices), lam.shape[-1]), dtype=complex)
    # walk up each vertex's path in lockstep
    cur = vertices.copy()
    while True:
        live = tree.parent[cur] >= 0
        if not live.any():
            break
        v = np.flatnonzero(live)
        lv = lam[v] if per_vertex else lam[None, :]
        out[v] *= _step_factor(tree.step[cur[v]][:, None], lv)
        cur = np.where(live, tree.parent[cur], cur)
    return out


def _circle_integral(g, rho, phi, delta):
    """int over arg in [phi, phi + 2 pi) of g (log(delta lam/2)) dlam/lam, |lam| = rho.

    g holds samples at args 2 pi j/N (one row per vertex).  The
    non-periodic factor arg(lam) is integrated exactly against the
    Fourier coefficients of g.
    """
    N = g.shape[1]
    c = np.fft.fft(g, axis=1) / N
    n = np.fft.fftfreq(N, d=1.0 / N)
    c0 = c[:, 0]
    nz = n != 0
    tail = (c[:, nz] * np.exp(1j * np.outer(phi, n[nz])) / (1j * n[nz])).sum(axis=1)
    int_arg = c0 * (2 * np.pi * phi + 2 * np.pi ** 2) + 2 * np.pi * tail
    return 1j * (math.log(delta * rho / 2) * 2 * np.pi * c0 + 1j * int_arg)


def _green_once(cm: CriticalMap, N: int, n_ray: int, phi, r_in, r_out, vertices):
    t = 2 * np.pi * np.arange(N) / N
    I_out = _circle_integral(_exp_along_paths(cm, r_out * np.exp(1j * t), vertices),
                             r_out, phi, cm.delta)
    I_in = _circle_integral(_exp_along_paths(cm, r_in * np.exp(1j * t), vertices),
                            r_in, phi, cm.delta)
    xg, wg = np.polynomial.legendre.leggauss(n_ray)
    # integrate over log s so the 1/s weight is flat
    a, b = math.log(r_in), math.log(r_out)
    ls = (b - a) / 2 * xg + (b + a) / 2
    w = (b - a) / 2 * wg
    lam_ray = np.exp(ls)[None, :] * np.exp(1j * phi)[:, None]
    J = (_exp_along_paths(cm, lam_ray, vertices) * w[None, :]).sum(axis=1)
    total = I_out - I_in - 2j * np.pi * J
    return -total / (8j * np.pi ** 2)


def _green_all(cm, N, n_ray, phi, r_in, r_out, threads):
    V = cm.cx.V
    chunks = np.array_split(np.arange(V), max(1, min(threads, V)))
    run = lambda vs: _green_once(cm, N, n_ray, phi[vs], r_in, r_out, vs)
    if threads <= 1:
        parts = [run(vs) for vs in chunks]
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    return np.concatenate(parts)


def green_function(cm: CriticalMap, nodes: int = 4096, ray_nodes: Optional[int] = None,
                   check: bool = True, tol: float = 1e-6, threads: int = 1) -> GreenTable:
    """Green function G(O, x) from the keyhole contour integral of exp(:lam:x).

    The contour runs along |lam| = 4/delta counterclockwise, along both
    sides of the slit on the ray through -conj(x), and clockwise around
    |lam| = 1/delta, so it encloses the pole circle |lam| = 2/delta.
    The logarithm takes arguments in [phi, phi + 2 pi) from the slit.
    With check, the computation is repeated with twice the nodes and
    QuadratureError is raised when the two disagree by more than tol.
    Vertices are split into ``threads`` independent chunks.
    """
    Z = cm.Z
    phi = np.where(np.abs(Z) > 0, np.angle(-np.conj(Z)), np.pi)
    r_out, r_in = 4 / cm.delta, 1 / cm.delta
    if ray_nodes is None:
        ray_nodes = max(64, nodes // 32)
    G = _green_all(cm, nodes, ray_nodes, phi, r_in, r_out, threads)
    gap = None
    if check:
        G2 = _green_all(cm, 2 * nodes, 2 * ray_nodes, phi, r_in, r_out, threads)
        gap = float(np.abs(G2 - G).max())
        if gap > tol:
            raise QuadratureError(f"quadrature not converged: refinement gap {gap:.3g}")
    res = green_laplacian_residual(cm, G)
    return GreenTable(G, (r_in, r_out), nodes, ray_nodes, phi, gap, res)


def green_laplacian_residual(cm: CriticalMap, G, color: str = "origin") -> float:
    """max |Delta G - delta_O| over full-star vertices.

    color "origin" restricts to the color class of O, "other" to the
    opposite class, "all" takes every full-star vertex.  On the other
    class G carries the monodromy of the logarithm (i per turn around
    O), so its Laplacian is nonzero along the branch cut.
    """
    L = laplacian_matrix(cm.cx, 0)
    r = L @ np.asarray(G)
    r[cm.origin] -= 1
    mask = cm.cx.full_star.copy()
    same = cm.cx.color == cm.cx.color[cm.origin]
    if color == "origin":
        mask &= same
    elif color == "other":
        mask &= ~same
    elif color != "all":
        raise ValueError(f"unknown color selection {color!r}")
    return float(np.abs(r[mask]).max()) if mask.any() else 0.0


def green_cut_report(cm: CriticalMap, G, tol: float = 1e-6) -> dict:
    """Laplacian of G on the other color class, split by the branch cut.

    An edge of Lambda crosses the cut when the slit arguments of its two
    ends differ by more than pi (they wrap around).  Returns the largest
    residual off the cut and the residuals on it divided by i.
    """
    L = laplacian_matrix(cm.cx, 0).tocoo()
    r = laplacian_matrix(cm.cx, 0) @ np.asarray(G)
    phi = np.where(np.abs(cm.Z) > 0, np.angle(-np.conj(cm.Z)), np.pi)
    off = L.row != L.col
    jump = off & (np.abs(phi[L.row] - phi[L.col]) > np.pi)
    on_cut = np.zeros(cm.cx.V, dtype=bool)
    on_cut[L.row[jump]] = True
    same = cm.cx.color == cm.cx.color[cm.origin]
    sel = cm.cx.full_star & ~same
    return {"off_cut": float(np.abs(r[sel & ~on_cut]).max(initial=0.0)),
            "on_cut": (r[sel & on_cut] / 1j).tolist(),
            "cut_vertices": np.flatnonzero(sel & on_cut).tolist()}


def green_local_branch_residual(cm: CriticalMap, G, nodes: int = 4096,
                                ray_nodes: Optional[int] = None, threads: int = 1) -> dict:
    """max |Delta G - delta_O| over all full-star vertices, one branch per star.

    On the color of O the table G is single valued and used as is.  On
    the other color G is multivalued; for each full-star vertex x the
    values on x and its Lambda neighbours are recomputed with the slit
    of x, so the Laplacian sees a single branch of the logarithm.
    """
    cx = cm.cx
    L = laplacian_matrix(cx, 0).tocsr()
    same = cx.color == cx.color[cm.origin]
    r = L @ np.asarray(G)
    r[cm.origin] -= 1
    own = cx.full_star & same
    centers = np.flatnonzero(cx.full_star & ~same)
    if ray_nodes is None:
        ray_nodes = max(64, nodes // 32)
    Z = cm.Z
    phi_all = np.where(np.abs(Z) > 0, np.angle(-np.conj(Z)), np.pi)
    owner, verts = [], []
    for x in centers:
        star = L.indices[L.indptr[x]:L.indptr[x + 1]]
        owner.extend([x] * len(star))
        verts.extend(star.tolist())
    owner, verts = np.asarray(owner, dtype=int), np.asarray(verts, dtype=int)
    phi = phi_all[owner]
    r_out, r_in = 4 / cm.delta, 1 / cm.delta
    chunks = [c for c in np.array_split(np.arange(len(verts)), max(1, threads)) if len(c)]
    run = lambda ks: _green_once(cm, nodes, ray_nodes, phi[ks], r_in, r_out, verts[ks])
    if threads <= 1:
        parts = [run(ks) for ks in chunks]
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    vals = np.concatenate(parts) if parts else np.zeros(0, dtype=complex)
    other = np.zeros(len(centers), dtype=complex)
    pos = 0
    for k, x in enumerate(centers):
        lo, hi = L.indptr[x], L.indptr[x + 1]
        other[k] = np.dot(L.data[lo:hi], vals[pos:pos + hi - lo])
        pos += hi - lo
    o_max = float(np.abs(r[own]).max(initial=0.0))
    t_max = float(np.abs(other).max(initial=0.0))
    return {"origin_color": o_max, "other_color": t_max, "max": max(o_max, t_max),
            "vertices": int(own.sum() + len(centers))}


# ----------------------------------------------------------------------
# convergence of monomials
# ----------------------------------------------------------------------

def convergence_study(ks=range(2, 7), degree: int = 3, disc: float = 1.0) -> dict:
    """max over |z| <= disc of |Z^{:degree:} - z^degree| on square patches of side 2^-k."""
    from .cellular import generate_rhombic_patch
    deltas, errors = [], []
    for k in ks:
        delta = 2.0 ** -k
        cx = generate_rhombic_patch(delta, "square", radius=disc / delta + 2)
        cm = check_critical(cx)
        m = monomials(cm, degree, normalized=False)[degree]
        inside = np.abs(cm.Z) <= disc + 1e-12
        errors.append(float(np.abs(m[inside] - cm.Z[inside] ** degree).max()))
        deltas.append(delta)
    errors = np.array(errors)
    ratios = errors[:-1] / errors[1:]
    return {"deltas": deltas, "errors": errors.tolist(), "ratios": ratios.tolist()}
