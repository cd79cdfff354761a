import numpy as np
import pytest

from discrete_riemann import critical, integrable
from discrete_riemann.critical import HolonomyError
from discrete_riemann.integrable import LINEAR, QUADRATIC


def mobius(z):
    return (2 * z + 1j) / (0.3 * z + 5)


# ----------------------------------------------------------------------
# cross-ratios and Hirota
# ----------------------------------------------------------------------

def test_cross_ratio_identity(cm4):
    r = integrable.cross_ratio_residual(cm4, cm4.Z)
    assert np.nanmax(r.cross_ratio) == 0
    assert np.nanmax(r.diagonal_ratio) < 1e-15
    assert r.singular.size == 0


def test_cross_ratio_mobius(cm4):
    r = integrable.cross_ratio_residual(cm4, mobius(cm4.Z))
    assert np.nanmax(r.cross_ratio) < 1e-12


def test_cross_ratio_conjugate(cm_trihex):
    r = integrable.cross_ratio_residual(cm_trihex, np.conj(cm_trihex.Z) ** 2 + cm_trihex.Z)
    assert np.nanmin(r.cross_ratio) > 1e-3


def test_cross_ratio_singular(cm4):
    r = integrable.cross_ratio_residual(cm4, np.zeros(cm4.cx.V))
    assert r.singular.size == cm4.cx.F


def test_hirota_unit_field(cm4):
    w = np.ones(cm4.cx.V)
    assert integrable.hirota_residual(cm4, w).max() < 1e-14
    assert np.abs(integrable.hirota_integrate(cm4, w) - cm4.Z).max() < 1e-13


def test_hirota_solve_corner(rng):
    for _ in range(20):
        z = integrable.random_critical_face(rng)
        w = rng.normal(size=3) + 1j * rng.normal(size=3)
        c = int(rng.integers(4))
        full = list(w)
        full.insert(c, integrable.hirota_solve_corner(z, w, c))
        full = np.array(full)
        r = sum((z[(k + 1) % 4] - z[k]) * full[k] * full[(k + 1) % 4] for k in range(4))
        assert abs(r) < 1e-12 * max(1, np.abs(full).max() ** 2)


def goursat_field(cm, rng, spread=0.2):
    """Hirota field from random data on the two coordinate axes."""
    w0 = np.full(cm.cx.V, np.nan, dtype=complex)
    Z = cm.Z
    axes = (np.abs(Z.real) < 1e-9) | (np.abs(Z.imag) < 1e-9)
    n = int(axes.sum())
    w0[axes] = 1 + spread * (rng.normal(size=n) + 1j * rng.normal(size=n))
    return integrable.hirota_goursat(cm, w0)


def test_hirota_goursat_integrates(cm3, rng):
    w = goursat_field(cm3, rng)
    assert not np.isnan(w).any()
    scale = np.abs(w).max() ** 2
    assert integrable.hirota_residual(cm3, w).max() < 1e-12 * scale
    f = integrable.hirota_integrate(cm3, w)
    r = integrable.cross_ratio_residual(cm3, f)
    assert np.nanmax(r.cross_ratio) < 1e-10


def test_hirota_rejects_random_field(cm3, rng):
    w = 1 + 0.3 * rng.normal(size=cm3.cx.V)
    with pytest.raises(HolonomyError):
        integrable.hirota_integrate(cm3, w)


def test_hirota_from_quadratic(cm4):
    f = mobius(cm4.Z)
    w = integrable.hirota_from_quadratic(cm4, f, w0=1.3)
    g = integrable.hirota_integrate(cm4, w, f0=f[cm4.origin])
    assert np.abs(g - f).max() < 1e-12
    # rescaling w(O) multiplies w by lam on one color and 1/lam on the other
    w2 = integrable.hirota_from_quadratic(cm4, f, w0=2.6)
    col = cm4.cx.color == cm4.cx.color[cm4.origin]
    assert np.allclose(w2[col] / w[col], 2, atol=1e-12)
    assert np.allclose(w2[~col] / w[~col], 0.5, atol=1e-12)


def test_circle_pattern(cm3, rng):
    V = cm3.cx.V
    # Goursat data real on primal, unimodular on dual
    w0 = np.full(V, np.nan, dtype=complex)
    Z = cm3.Z
    axes = (np.abs(Z.real) < 1e-9) | (np.abs(Z.imag) < 1e-9)
    prim = cm3.cx.color == 0
    w0[axes & prim] = 1 + 0.1 * rng.normal(size=(axes & prim).sum())
    w0[axes & ~prim] = np.exp(0.1j * rng.normal(size=(axes & ~prim).sum()))
    w = integrable.hirota_goursat(cm3, w0)
    assert np.abs(w[prim].imag).max() < 1e-12
    assert np.abs(np.abs(w[~prim]) - 1).max() < 1e-12
    w[prim] = w[prim].real
    w[~prim] /= np.abs(w[~prim])
    assert integrable.circle_pattern_residual(cm3, w) < 1e-12


# ----------------------------------------------------------------------
# Baecklund transformations
# ----------------------------------------------------------------------

def test_backlund_sheet(cm4):
    s = integrable.backlund(cm4, cm4.Z, 0.7, 0.0)
    assert s.values[cm4.origin] == 0
    assert s.edge_residual < 1e-12


@pytest.mark.parametrize("kind,base", [(LINEAR, lambda z: z), (QUADRATIC, mobius)])
def test_backlund_roundtrip(cm4, rng, kind, base):
    f = base(cm4.Z)
    for _ in range(10):
        lam = complex(*rng.uniform(-3, 3, size=2))
        u = complex(*rng.normal(size=2))
        assert integrable.roundtrip_error(cm4, f, lam, u, kind) < 1e-10


def test_backlund_linear_is_holomorphic(cm4):
    g = integrable.backlund(cm4, cm4.Z, 0.9 + 0.2j, 0.4 - 0.1j).values
    r = integrable.cross_ratio_residual(cm4, g)
    assert np.nanmax(r.diagonal_ratio) < 1e-10


def test_backlund_inconsistent_base(cm4, rng):
    f = cm4.Z + 0.2 * rng.normal(size=cm4.cx.V)
    with pytest.raises(integrable.InconsistentSheet):
        integrable.backlund(cm4, f, 0.7, 0.0)


def test_backlund_degenerate_edge(cm4):
    with pytest.raises(integrable.DegenerateEdge):
        integrable.backlund(cm4, cm4.Z, 1.0, 0.0)


@pytest.mark.parametrize("kind", [LINEAR, QUADRATIC])
def test_cube_consistency(rng, kind):
    for _ in range(50):
        z = integrable.random_critical_face(rng)
        f3 = rng.normal(size=3) + 1j * rng.normal(size=3)
        fx2 = integrable.complete_face(z, f3, kind)
        face_f = np.array([f3[0], f3[1], fx2, f3[2]])
        lam = complex(*rng.uniform(-2, 2, size=2))
        u = complex(*rng.normal(size=2))
        assert integrable.cube_consistency(z, face_f, lam, u, kind) < 1e-10


# ----------------------------------------------------------------------
# tangent exponential
# ----------------------------------------------------------------------

@pytest.mark.parametrize("kind,base", [(LINEAR, lambda z: z), (QUADRATIC, mobius)])
def test_tangent_exponential(cm3, kind, base):
    f = base(cm3.Z)
    t = integrable.tangent_exponential(cm3, f, 0.8 + 0.3j, 0.2, kind)
    assert t.kernel_norm < 1e-5
    assert t.epsg_residual < 1e-6
    ex = integrable.tangent_exponential(cm3, f, 0.8 + 0.3j, 0.2, kind, method="exact")
    assert np.abs(ex.values - t.values).max() < 1e-6 * np.abs(ex.values).max()
    assert ex.epsg_residual < 1e-10


def test_tangent_linearity(cm3):
    # for the linear kind the round trip is affine in v, so the derivative
    # does not depend on the step
    f = cm3.Z
    a = integrable.tangent_exponential(cm3, f, 0.8, 0.2, h=1e-6).values
    b = integrable.tangent_exponential(cm3, f, 0.8, 0.2, h=1e-3).values
    assert np.abs(a - b).max() < 1e-6 * np.abs(a).max()
    assert a[cm3.origin] == pytest.approx(1.0, abs=1e-8)


# ----------------------------------------------------------------------
# zero curvature
# ----------------------------------------------------------------------

def test_transfer_determinant():
    L, _ = integrable.transfer_linear(0.3, 1.2j, 0.0, 1.0 + 0.5j, 0.9)
    a = 1.0 + 0.5j
    assert np.linalg.det(L) == pytest.approx((0.9 + a) * (0.9 - a))


def test_zero_curvature_linear(cm4):
    td = integrable.transfer_matrices(cm4, cm4.Z, [0.3, 1.1, 2.7])
    assert td.face_mismatch.max() < 1e-10


def test_zero_curvature_hirota(cm3, rng):
    w = goursat_field(cm3, rng)
    td = integrable.transfer_matrices(cm3, w, [0.3, 1.1, 2.7], kind=QUADRATIC)
    assert td.face_mismatch.max() < 1e-10


def test_psi_path_independent(cm4):
    Z = cm4.Z
    far = int(np.argmin(np.abs(Z - (3 + 2j))))
    # staircase paths along the boundary of a rectangle in the diamond graph
    def path(order):
        pts, cur = [0j], 0j
        for step in order:
            cur += step
            pts.append(cur)
        return [int(np.argmin(np.abs(Z - p))) for p in pts]
    p1 = path([1, 1, 1, 1j, 1j])
    p2 = path([1j, 1j, 1, 1, 1])
    assert p1[-1] == p2[-1] == far
    for lam in (0.3, 1.1, 2.7):
        A = integrable.psi_along(cm4, Z, lam, p1)
        B = integrable.psi_along(cm4, Z, lam, p2)
        assert np.abs(A - B).max() / np.abs(A).max() < 1e-9


def test_psi_derivative(cm3):
    lam, h = 1.1, 1e-6
    td = integrable.transfer_matrices(cm3, cm3.Z, [lam - h, lam, lam + h])
    fd = (td.psi[2] - td.psi[0]) / (2 * h)
    assert np.abs(fd - td.dpsi[1]).max() < 1e-6 * np.abs(td.dpsi[1]).max()


def test_pole_estimates():
    lams = np.linspace(0.5, 3.0, 12) + 0.1j
    poles = np.array([1.7 + 0.4j, -0.5 - 0.9j])
    A = np.array([[[1 / (l - poles[0]), 2.0], [1 / (l - poles[1]), 0]] for l in lams])
    est = integrable.pole_estimates(A, lams, degree=2)
    assert np.sort_complex(est) == pytest.approx(np.sort_complex(poles), abs=1e-8)
