import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from discrete_riemann import calculus, cellular, critical, homology, integrable
from discrete_riemann.cellular import DIAMOND, LAMBDA

SETTINGS = settings(max_examples=25, deadline=None,
                    suppress_health_check=[HealthCheck.function_scoped_fixture])

tori = st.tuples(st.integers(1, 3), st.integers(1, 3),
                 st.floats(0.15, math.pi / 2 - 0.15))
seeds = st.integers(0, 2 ** 32 - 1)
small = st.floats(-2, 2, allow_nan=False)
cplx = st.builds(complex, small, small)


def perm_string(p):
    return " ".join(str(x + 1) for x in p)


origamis = st.integers(2, 5).flatmap(
    lambda n: st.tuples(st.permutations(range(n)), st.permutations(range(n))))


def transitive(h, v):
    n = len(h)
    seen, todo = {0}, [0]
    while todo:
        x = todo.pop()
        for y in (h[x], v[x]):
            if y not in seen:
                seen.add(y)
                todo.append(y)
    return len(seen) == n


# ----------------------------------------------------------------------
# discrete exterior calculus
# ----------------------------------------------------------------------

@SETTINGS
@given(origamis, seeds)
def test_dd_zero_on_origami(hv, seed):
    h, v = hv
    assume(transitive(h, v))
    cx = cellular.generate_origami(perm_string(h), perm_string(v))
    rng = np.random.default_rng(seed)
    f = rng.integers(-100, 100, size=cx.V).astype(float)
    for tag in (LAMBDA, DIAMOND):
        assert not np.any(cellular.d(cx, cellular.d(cx, f, 0, tag), 1, tag))
    # Euler characteristic of Lambda and of the diamond agree
    assert cx.genus == cellular.origami_genus_formula(perm_string(h), perm_string(v))


@SETTINGS
@given(tori, seeds)
def test_star_squares(pqt, seed):
    cx = cellular.generate_square_torus(*pqt)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=2 * cx.F)
    s1 = calculus.hodge_star(cx, calculus.hodge_star(cx, a, 1), 1)
    assert np.abs(s1 + a).max() < 1e-14 * max(1.0, np.abs(a).max())
    f = rng.normal(size=cx.V)
    assert np.array_equal(calculus.hodge_star(cx, calculus.hodge_star(cx, f, 0), 2), f)


@SETTINGS
@given(tori, seeds)
def test_scalar_product_is_wedge_with_star(pqt, seed):
    cx = cellular.generate_square_torus(*pqt)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=2 * cx.F) + 1j * rng.normal(size=2 * cx.F)
    b = rng.normal(size=2 * cx.F) + 1j * rng.normal(size=2 * cx.F)
    lhs = calculus.scalar_product(cx, a, b)
    rhs = calculus.iint(cx, a, calculus.hodge_star(cx, np.conj(b), 1))
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


@SETTINGS
@given(tori, seeds)
def test_conformal_energy_identity(pqt, seed):
    cx = cellular.generate_square_torus(*pqt)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=cx.V) + 1j * rng.normal(size=cx.V)
    e = calculus.energies(cx, f)
    assert abs(e.conformal - (e.dirichlet - e.area)) < 1e-12 * max(1.0, e.dirichlet)


@SETTINGS
@given(tori, seeds)
def test_hodge_orthogonal(pqt, seed):
    cx = cellular.generate_square_torus(*pqt)
    rng = np.random.default_rng(seed)
    beta = rng.normal(size=2 * cx.F)
    h = calculus.hodge_decompose(cx, beta)
    parts = (h.exact, h.coexact, h.harmonic)
    assert np.abs(sum(parts) - beta).max() < 1e-9
    scale = calculus.norm2(cx, beta)
    for i in range(3):
        for j in range(i):
            assert abs(calculus.scalar_product(cx, parts[i], parts[j])) < 1e-10 * max(1.0, scale)


# ----------------------------------------------------------------------
# homology
# ----------------------------------------------------------------------

@SETTINGS
@given(st.integers(1, 3), seeds)
def test_symplectic_normalize_random_basis(g, seed):
    # scramble a canonical intersection form by a random unimodular matrix
    rng = np.random.default_rng(seed)
    n = 2 * g
    J = np.block([[np.zeros((g, g)), np.eye(g)], [-np.eye(g), np.zeros((g, g))]]).astype(int)
    U = np.eye(n, dtype=int)
    for _ in range(3 * n):
        i, j = rng.choice(n, size=2, replace=False)
        U[i] += int(rng.integers(-2, 3)) * U[j]
    M = U @ J @ U.T
    basis = homology.CycleBasis(chains=U.astype(float), intersection=M, loops=[None] * n)
    T = homology.symplectic_normalize(basis).transform
    assert np.array_equal(T @ M @ T.T, J)
    assert round(abs(np.linalg.det(T))) == 1


# ----------------------------------------------------------------------
# critical maps and the integrable layer
# ----------------------------------------------------------------------

@SETTINGS
@given(cplx)
def test_exp_inverse_property(cm4, lam):
    assume(abs(abs(lam) - 2) > 1e-3)
    a = critical.exp_rational(cm4, lam)
    b = critical.exp_rational(cm4, -lam)
    assert np.abs(a * b - 1).max() < 1e-12 * max(1.0, np.abs(a).max() * np.abs(b).max())


@SETTINGS
@given(cplx)
def test_exp_path_independent_property(cm4, lam):
    assume(abs(abs(lam) - 2) > 1e-3)
    _, gap = critical.exp_rational(cm4, lam, check_paths=True)
    assert gap < 1e-12


@SETTINGS
@given(seeds, st.sampled_from([integrable.LINEAR, integrable.QUADRATIC]))
def test_cube_consistency_property(seed, kind):
    rng = np.random.default_rng(seed)
    z = integrable.random_critical_face(rng, delta=rng.uniform(0.2, 3))
    f3 = rng.normal(size=3) + 1j * rng.normal(size=3)
    face_f = np.array([f3[0], f3[1], integrable.complete_face(z, f3, kind), f3[2]])
    lam = complex(*rng.uniform(-2, 2, size=2))
    assert integrable.cube_consistency(z, face_f, lam, complex(*rng.normal(size=2)), kind) < 1e-9


@SETTINGS
@given(cplx, cplx)
def test_backlund_roundtrip_property(cm3, lam, u):
    assume(abs(lam) > 0.1)
    # keep lam away from the degenerate values +-(y - x)
    steps = cm3.edge_steps()
    assume(np.abs(lam - steps).min() > 0.05 and np.abs(lam + steps).min() > 0.05)
    assert integrable.roundtrip_error(cm3, cm3.Z, lam, u) < 1e-9


@SETTINGS
@given(st.floats(0.2, 3), st.floats(0, 2 * math.pi), cplx)
def test_mobius_invariance(cm3, a, t, b):
    A = a * np.exp(1j * t)
    f = (A * cm3.Z + b) / (0.1 * cm3.Z + 3)
    r = integrable.cross_ratio_residual(cm3, f)
    assert np.nanmax(r.cross_ratio) < 1e-11
