import math

import numpy as np
import pytest

from discrete_riemann import calculus, cellular, homology, periods


def square_torus_gram(p, q, theta, sign=-1.0):
    """Inner products of the explicit square-torus basis.

    sign=-1 gives the off-diagonal entries -cot(2 theta) produced by the
    canonical orientation of the cycles; sign=+1 the opposite convention.
    """
    s, c = math.sin(2 * theta), math.cos(2 * theta)
    G = np.zeros((4, 4))
    G[0, 0] = G[1, 1] = q / p
    G[2, 2] = G[3, 3] = p / q
    G[0, 3] = G[3, 0] = G[1, 2] = G[2, 1] = sign * c
    return G / s


def square_torus_pi(p, q, theta):
    s, c = math.sin(2 * theta), math.cos(2 * theta)
    return q / p * np.array([[1j * s, c], [c, 1j * s]])


CASES = [(1, 1, math.pi / 4), (1, 2, math.pi / 3), (2, 3, 1.0), (3, 1, 0.6)]


@pytest.fixture(scope="module", params=CASES, ids=lambda c: f"{c[0]}-{c[1]}-{c[2]:.3f}")
def torus_case(request):
    p, q, theta = request.param
    cx = cellular.generate_square_torus(p, q, theta)
    hb = homology.harmonic_basis(cx)
    gb = periods.gram_blocks(cx, hb)
    return (p, q, theta), cx, hb, gb, periods.period_matrix(cx, hb, gb)


def test_gram_square_torus(torus_case):
    (p, q, theta), cx, hb, gb, pd = torus_case
    assert np.abs(gb.full - square_torus_gram(p, q, theta)).max() < 1e-9
    assert np.abs(np.abs(gb.full) - np.abs(square_torus_gram(p, q, theta, +1))).max() < 1e-9


def test_gram_identity_case():
    cx = cellular.generate_square_torus(1, 1, math.pi / 4)
    gb = periods.gram_blocks(cx, homology.harmonic_basis(cx))
    assert np.abs(gb.full - np.eye(4)).max() < 1e-12


def test_gram_origami(origami2, hb_origami2):
    gb = periods.gram_blocks(origami2, hb_origami2)
    assert np.abs(gb.full - gb.full.T).max() < 1e-12
    assert np.linalg.eigvalsh(gb.full).min() > 0
    assert gb.discrepancy < 1e-9


def test_star_matrix_identity_case():
    cx = cellular.generate_square_torus(1, 1, math.pi / 4)
    gb = periods.gram_blocks(cx, homology.harmonic_basis(cx))
    S = periods.star_matrix(gb)
    J = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
    assert np.abs(S - J).max() < 1e-12


def test_star_matrix_squares_to_minus_one(origami2, hb_origami2):
    gb = periods.gram_blocks(origami2, hb_origami2)
    S = periods.star_matrix(gb)
    assert np.abs(S @ S + np.eye(len(S))).max() < 1e-9
    r = gb.structure_residuals()
    for key in ("B2_minus_CA_plus_I", "AB_minus_BtA", "CBt_minus_BC"):
        assert r[key] < 1e-9


def test_star_matrix_acts_on_forms(origami2, hb_origami2):
    gb = periods.gram_blocks(origami2, hb_origami2)
    S = periods.star_matrix(gb)
    st = (calculus.star_matrix1(origami2) @ hb_origami2.alpha.T).T
    # row l of S holds the coordinates of *alpha_l in the basis alpha
    assert np.abs(S @ hb_origami2.alpha - st).max() < 1e-9


def test_zeta_identity_case():
    cx = cellular.generate_square_torus(1, 1, math.pi / 4)
    hb = homology.harmonic_basis(cx)
    pd = periods.period_matrix(cx, hb)
    z1 = 1j * hb.alpha[2] - calculus.star_matrix1(cx) @ hb.alpha[2]
    assert np.abs(pd.zeta[0] - z1).max() < 1e-12
    per = hb.cycles.chains @ pd.zeta[0]
    assert np.allclose(per, [1, 0, 1j, 0], atol=1e-12)


def test_zeta_holomorphic(origami2, hb_origami2):
    pd = periods.period_matrix(origami2, hb_origami2)
    for z in pd.zeta:
        assert np.abs(origami2.d1_lambda @ z).max() < 1e-9
        assert np.abs(calculus.d_second(origami2, z)).max() < 1e-9
    assert pd.residuals["zeta_real_imaginary_split"] < 1e-10


def test_period_matrix_square_torus(torus_case):
    (p, q, theta), cx, hb, gb, pd = torus_case
    assert np.abs(pd.Pi - square_torus_pi(p, q, theta)).max() < 1e-9
    tau = q / p * np.exp(2j * theta)
    assert abs(pd.Pi_gamma[0, 0] - tau) < 1e-9
    assert abs(pd.Pi_gamma_star[0, 0] - tau) < 1e-9
    assert pd.diamond_applicable


def test_period_matrix_12():
    cx = cellular.generate_square_torus(1, 2, math.pi / 3)
    pd = periods.period_matrix(cx)
    r3 = math.sqrt(3)
    assert np.abs(pd.Pi - np.array([[1j * r3, -1], [-1, 1j * r3]])).max() < 1e-9
    assert abs(pd.Pi_gamma[0, 0] - 2 * np.exp(2j * math.pi / 3)) < 1e-9


@pytest.mark.parametrize("rows,cols", [(2, 2), (2, 3), (3, 2)])
def test_trihex_modulus(rows, cols):
    cx = cellular.generate_trihex_torus(rows, cols, [1 / math.sqrt(3)] * 3)
    pd = periods.period_matrix(cx)
    w1, w2 = cx.periods
    tau = w2 / w1
    assert abs(pd.Pi_gamma[0, 0] - tau) < 1e-8
    assert abs(pd.Pi_gamma_star[0, 0] - tau) < 1e-8


def test_genus2_period_matrix(origami2, hb_origami2):
    pd = periods.period_matrix(origami2, hb_origami2)
    Pi = pd.Pi
    assert np.abs(Pi - Pi.T).max() < 1e-8
    assert np.linalg.eigvalsh(Pi.imag).min() > 0
    assert pd.residuals["Pi_diagonal_blocks_real_part"] < 1e-10
    assert pd.residuals["Pi_offdiagonal_blocks_imag_part"] < 1e-10
    assert pd.residuals["Pi_vs_formula"] < 1e-9


def test_bilinear_antisymmetric(origami2, hb_origami2, rng):
    t = rng.normal(size=8) @ hb_origami2.alpha
    r = periods.bilinear_relation(origami2, t, t, hb_origami2)
    assert abs(r["lhs"]) < 1e-12 and abs(r["rhs"]) < 1e-12


def test_bilinear_random(origami2, hb_origami2, rng):
    for _ in range(10):
        t1 = rng.normal(size=8) @ hb_origami2.alpha + origami2.d0_lambda @ rng.normal(size=origami2.V)
        t2 = (rng.normal(size=8) + 1j * rng.normal(size=8)) @ hb_origami2.alpha
        assert periods.bilinear_relation(origami2, t1, t2, hb_origami2)["residual"] < 1e-9
        d1 = rng.normal(size=4) @ hb_origami2.alpha_diamond
        d2 = rng.normal(size=4) @ hb_origami2.alpha_diamond + origami2.d0_diamond @ rng.normal(size=origami2.V)
        r = periods.bilinear_relation(origami2, d1, d2, hb_origami2, kind="diamond")
        assert r["residual"] < 1e-9


def test_bilinear_rejects_non_closed(origami2, hb_origami2, rng):
    with pytest.raises(ValueError):
        periods.bilinear_relation(origami2, rng.normal(size=2 * origami2.F),
                                  hb_origami2.alpha[0], hb_origami2)


def test_norm_identity(origami2, hb_origami2):
    a = hb_origami2.alpha[0]
    r = periods.harmonic_norm_identity(origami2, a, hb_origami2)
    assert r["residual"] < 1e-9
    assert r["norm"] == pytest.approx(float(periods.gram_matrix(origami2, [a])[0, 0]), rel=1e-12)


def test_diamond_gram_identity_case():
    cx = cellular.generate_square_torus(1, 1, math.pi / 4)
    hb = homology.harmonic_basis(cx)
    dg = periods.diamond_gram(cx, hb, periods.gram_blocks(cx, hb))
    assert np.abs(dg["matrix"] - 2 * np.eye(2)).max() < 1e-12


def test_diamond_gram_origami(origami2, hb_origami2):
    dg = periods.diamond_gram(origami2, hb_origami2, periods.gram_blocks(origami2, hb_origami2))
    assert dg["face_formula_residual"] < 1e-10
    assert abs(dg["determinant"]) > 1e-6


def test_no_genus():
    from test_homology import cube_surface
    cx = cube_surface()
    pd = periods.period_matrix(cx)
    assert pd.Pi.shape == (0, 0)
