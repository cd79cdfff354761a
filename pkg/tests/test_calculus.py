import math

import numpy as np
import pytest

from discrete_riemann import calculus, cellular, critical, homology
from discrete_riemann.calculus import NotLiftable
from discrete_riemann.cellular import DIAMOND, LAMBDA, ComplexError


def rand_c(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


@pytest.fixture(scope="module")
def torus22():
    return cellular.generate_square_torus(2, 2, math.pi / 4)


@pytest.fixture(scope="module")
def hb12(torus12):
    return homology.harmonic_basis(torus12)


# -- Hodge star --------------------------------------------------------

def test_star_of_constant(torus12):
    s = calculus.hodge_star(torus12, np.full(torus12.V, 2.5), 0)
    assert np.array_equal(s, np.full(torus12.V, 2.5))


def test_star_on_dual_edge(torus23):
    F = torus23.F
    alpha = np.zeros(2 * F)
    alpha[F] = 1.0
    out = calculus.hodge_star(torus23, alpha, 1)
    rho_star = 1.0 / torus23.rho[0]
    assert out[0] == pytest.approx(-rho_star, rel=1e-15)


def test_star_unit_example():
    # rho(e*) = 2 on the dual diagonal of the torus with tan(theta) = 1/2
    cx = cellular.generate_square_torus(1, 1, math.atan(0.5))
    F = cx.F
    k = int(np.flatnonzero(np.isclose(1 / cx.rho, 2.0))[0])
    alpha = np.zeros(2 * F)
    alpha[F + k] = 1.0
    assert calculus.hodge_star(cx, alpha, 1)[k] == pytest.approx(-2.0, abs=1e-14)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_star_squared(origami2, rng, k):
    n = 2 * origami2.F if k == 1 else origami2.V
    x = rng.normal(size=n)
    ss = calculus.hodge_star(origami2, calculus.hodge_star(origami2, x, k), 2 - k)
    assert np.abs(ss - (-1) ** k * x).max() <= 1e-14 * np.abs(x).max()


def test_star_needs_closed(patch4):
    with pytest.raises(ComplexError):
        calculus.hodge_star(patch4, np.zeros(2 * patch4.F), 1)


# -- Laplacian ---------------------------------------------------------

def test_laplacian_constant(origami2):
    assert np.abs(calculus.laplacian(origami2, np.ones(origami2.V))).max() < 1e-14


def test_laplacian_indicator(torus22):
    L = calculus.laplacian_matrix(torus22)
    x = 0
    f = np.zeros(torus22.V)
    f[x] = 1
    out = L @ f
    assert out[x] == pytest.approx(4.0)
    nbr = np.flatnonzero(out[np.arange(torus22.V) != x] != 0)
    assert len(nbr) == 4
    others = np.delete(out, x)
    assert np.allclose(others[others != 0], -1.0)


def test_laplacian_of_Z(cm4):
    cx = cm4.cx
    r = calculus.laplacian(cx, cm4.Z)
    assert np.abs(r[cx.full_star]).max() < 1e-12


def test_laplacian_from_del(torus23, cm4):
    for cx in (torus23,):
        d = calculus.laplacian_from_del(cx) - calculus.laplacian_matrix(cx)
        assert abs(d).max() < 1e-12
    cx = cm4.cx
    d = (calculus.laplacian_from_del(cx) - calculus.laplacian_matrix(cx)).tocsr()
    inner = np.flatnonzero(cx.full_star)
    assert abs(d[inner]).max() < 1e-12


# -- scalar product, wedge ---------------------------------------------

def test_norm_of_dZ(torus11):
    dZ = torus11.lambda_z()
    area = calculus.face_areas(torus11).sum()
    assert calculus.norm2(torus11, dZ) == pytest.approx(2 * area, rel=1e-12)


def test_scalar_product_is_wedge(origami2, rng):
    for _ in range(5):
        a, b = rand_c(rng, 2 * origami2.F), rand_c(rng, 2 * origami2.F)
        lhs = calculus.scalar_product(origami2, a, b)
        rhs = calculus.iint(origami2, a, calculus.hodge_star(origami2, np.conj(b), 1))
        assert abs(lhs - rhs) < 1e-12 * max(1, abs(lhs))


def test_wedge01(torus12, rng):
    f = rng.normal(size=torus12.V)
    a = rng.normal(size=torus12.E)
    out = calculus.wedge_diamond(torus12, f, 0, a, 1)
    e = torus12.edges
    assert np.allclose(out, (f[e[:, 0]] + f[e[:, 1]]) / 2 * a, atol=0, rtol=1e-15)


def test_leibniz(torus23, rng):
    f, g = rng.normal(size=torus23.V), rng.normal(size=torus23.V)
    a = rng.normal(size=torus23.E)
    d0 = torus23.d0_diamond
    # d(fg) = df g + f dg is not exact on the diamond; the averaged product is
    lhs = calculus.diamond_d(torus23, calculus.wedge_diamond(torus23, f, 0, a, 1), 1)
    rhs = (calculus.wedge_diamond(torus23, d0 @ f, 1, a, 1)
           + calculus.wedge_diamond(torus23, f, 0, calculus.diamond_d(torus23, a, 1), 2))
    assert np.abs(lhs - rhs).max() < 1e-13


def test_wedge_same_graph_vanishes(torus23, rng):
    F = torus23.F
    a, b = np.zeros(2 * F), np.zeros(2 * F)
    a[:F], b[:F] = rng.normal(size=F), rng.normal(size=F)
    assert not np.any(calculus.wedge_hetero(torus23, a, b))


def test_area_form():
    # one quad with diagonals 2 and 2i
    cz = np.array([[-1, -1j, 1, 1j]], dtype=complex)
    cx = cellular.QuadComplex(color=np.array([0, 1, 0, 1], dtype=np.int8),
                              quads=np.array([[0, 1, 2, 3]]),
                              edges=np.array([[0, 1], [2, 1], [2, 3], [0, 3]]),
                              sides=np.array([[0, 1, 2, 3]]), rho=np.array([1.0]),
                              corner_z=cz, z=cz[0])
    dZ = cx.lambda_z()
    w = calculus.wedge_hetero(cx, dZ, np.conj(dZ))
    assert w[0] == pytest.approx(-4j)
    assert calculus.face_areas(cx)[0] == pytest.approx(2.0)


# -- averaging, biconstant, lift -------------------------------------

def test_average_intertwines(origami2, rng):
    f = rng.normal(size=origami2.V)
    lhs = calculus.average_A(origami2, origami2.d0_diamond @ f, 1)
    assert np.allclose(lhs, origami2.d0_lambda @ f, atol=1e-14)
    eps = calculus.biconstant(origami2)
    assert np.abs(calculus.average_A(origami2, origami2.d0_diamond @ eps, 1)).max() == 0


def test_average_of_dZ(torus12):
    A = calculus.average_A(torus12, torus12.edge_z(), 1)
    assert np.allclose(A, torus12.lambda_z(), atol=1e-14)


def test_biconstant(origami2, torus12):
    eps = calculus.biconstant(origami2)
    assert np.all(eps[origami2.color == cellular.PRIMAL] == 1)
    assert np.abs(calculus.wedge_diamond(torus12, calculus.biconstant(torus12), 0,
                                         torus12.edge_z(), 1)).max() == 0


def test_lift_exact(origami2, rng):
    f = rng.normal(size=origami2.V)
    nu = calculus.lift_to_diamond(origami2, origami2.d0_lambda @ f)
    diff = nu - origami2.d0_diamond @ f
    deps = origami2.d0_diamond @ calculus.biconstant(origami2)
    c = diff[0] / deps[0]
    assert np.abs(diff - c * deps).max() < 1e-12


def test_lift_harmonic_pair(origami2, hb_origami2):
    g = hb_origami2.genus
    for k in range(2 * g):
        j = k if k < g else k + g
        mu = hb_origami2.alpha[j] + hb_origami2.alpha[j + g]
        nu = calculus.lift_to_diamond(origami2, mu)
        assert np.abs(origami2.d1_diamond @ nu).max() < 1e-9
        assert np.allclose(calculus.average_A(origami2, nu, 1), mu, atol=1e-9)
        assert np.allclose(hb_origami2.diamond_periods[:, k],
                           hb_origami2.cycles.diamond.chains @ nu, atol=1e-9)


def test_lift_unequal_holonomy(origami2, hb_origami2):
    with pytest.raises(NotLiftable):
        calculus.lift_to_diamond(origami2, hb_origami2.alpha[0])


# -- energies -----------------------------------------------------------

def test_energy_constant(origami2):
    e = calculus.energies(origami2, np.full(origami2.V, 3 + 1j))
    assert (e.dirichlet, e.conformal, e.area) == (0.0, 0.0, 0.0)


def test_energy_of_Z(cm4):
    e = calculus.energies(cm4.cx, cm4.Z)
    assert abs(e.conformal) < 1e-12
    assert e.dirichlet == pytest.approx(e.area, rel=1e-12)


def test_energy_identity(origami2, cm4, rng):
    for cx in (origami2, cm4.cx):
        for _ in range(20):
            f = rand_c(rng, cx.V)
            e = calculus.energies(cx, f)
            assert abs(e.conformal - (e.dirichlet - e.area)) < 1e-12 * e.dirichlet


# -- Hodge decomposition ----------------------------------------------

def test_hodge_exact(torus12, rng):
    f = rng.normal(size=torus12.V)
    df = torus12.d0_lambda @ f
    h = calculus.hodge_decompose(torus12, df)
    assert np.abs(h.exact - df).max() < 1e-9
    assert np.abs(h.coexact).max() < 1e-9 and np.abs(h.harmonic).max() < 1e-9


def test_hodge_harmonic(torus12, hb12):
    a = hb12.alpha[0]
    h = calculus.hodge_decompose(torus12, a)
    assert np.abs(h.harmonic - a).max() < 1e-9
    assert np.abs(h.exact).max() < 1e-9


def test_hodge_orthogonal(origami2, rng):
    beta = rng.normal(size=2 * origami2.F)
    h = calculus.hodge_decompose(origami2, beta)
    W = origami2.lambda_weights
    parts = (h.exact, h.coexact, h.harmonic)
    assert np.allclose(sum(parts), beta, atol=1e-10)
    for i in range(3):
        for j in range(i + 1, 3):
            assert abs(np.sum(W * parts[i] * parts[j])) < 1e-10


@pytest.mark.parametrize("name,g", [("torus11", 1), ("trihex", 1), ("origami2", 2)])
def test_harmonic_dimension(request, name, g):
    cx = request.getfixturevalue(name)
    assert calculus.harmonic_dimension(cx) == 4 * g


# -- del, delbar ---------------------------------------------------------

def test_del_of_Z(cm4):
    d, db = calculus.del_delbar(cm4.cx, cm4.Z)
    assert np.allclose(d, 1, atol=1e-13) and np.abs(db).max() < 1e-13
    d, db = calculus.del_delbar(cm4.cx, np.conj(cm4.Z))
    assert np.abs(d).max() < 1e-13 and np.allclose(db, 1, atol=1e-13)


def test_type_split(torus12, hb12, rng):
    a = rand_c(rng, 2 * torus12.F)
    p, s = calculus.d_prime(torus12, a), calculus.d_second(torus12, a)
    S = calculus.star_matrix1(torus12)
    assert np.allclose(S @ p, -1j * p, atol=1e-13)
    assert np.allclose(S @ s, 1j * s, atol=1e-13)


# -- cochain JSON --------------------------------------------------------

@pytest.mark.parametrize("degree,tag", [(0, LAMBDA), (1, LAMBDA), (2, LAMBDA),
                                        (1, DIAMOND), (2, DIAMOND)])
def test_cochain_json(origami2, rng, degree, tag):
    n = {(0, LAMBDA): origami2.V, (1, LAMBDA): 2 * origami2.F, (2, LAMBDA): origami2.V,
         (1, DIAMOND): origami2.E, (2, DIAMOND): origami2.F}[(degree, tag)]
    v = rand_c(rng, n)
    data = calculus.cochain_to_json(origami2, v, degree, tag)
    back, deg, t = calculus.cochain_from_json(origami2, data)
    assert deg == degree and t == tag
    assert np.array_equal(back, v)


def test_cochain_json_reversed_edge(patch4, rng):
    v = rand_c(rng, patch4.E)
    data = calculus.cochain_to_json(patch4, v, 1, DIAMOND)
    data["values"] = data["values"][::-1]
    item = data["values"][0]
    item["cell"] = item["cell"][::-1]
    item["v"] = [-item["v"][0], -item["v"][1]]
    back, _, _ = calculus.cochain_from_json(patch4, data)
    assert np.allclose(back, v)
