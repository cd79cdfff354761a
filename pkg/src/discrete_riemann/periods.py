"""
Gram matrices, holomorphic forms and period matrices.

The Gram matrix of the harmonic basis is taken with the weight

    G[k, l] = sum over unoriented Lambda edges of rho * alpha_k * alpha_l,

which is twice the scalar product of :mod:`calculus`.  In this
normalization it coincides with the period formulas
G[k, l] = +period of *alpha_l along cycle k+2g (k < 2g) and
G[k, l] = -period of *alpha_l along cycle k-2g (k >= 2g), and the
period matrix is C^-1 (i - B).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .calculus import iint, star_matrix1, wedge_diamond
from .cellular import QuadComplex
from .homology import HarmonicBasis, harmonic_basis


class ConsistencyError(RuntimeError):
    """Two independent evaluations of the same quantity disagree."""


@dataclass
class GramBlocks:
    full: np.ndarray
    g: int
    discrepancy: float = 0.0

    def _blk(self, i, j):
        n = 2 * self.g
        return self.full[i * n:(i + 1) * n, j * n:(j + 1) * n]

    @property
    def A(self):
        return self._blk(0, 0)

    @property
    def D(self):
        return self._blk(0, 1)

    @property
    def B(self):
        return self._blk(1, 0)

    @property
    def C(self):
        return self._blk(1, 1)

    # g x g sub-blocks
    @property
    def A_gamma(self):
        return self.A[:self.g, :self.g]

    @property
    def A_gamma_star(self):
        return self.A[self.g:, self.g:]

    @property
    def C_gamma_star(self):
        return self.C[:self.g, :self.g]

    @property
    def C_gamma(self):
        return self.C[self.g:, self.g:]

    @property
    def B_gs_g(self):
        """B_{Gamma*, Gamma}: upper right block of B."""
        return self.B[:self.g, self.g:]

    @property
    def B_g_gs(self):
        """B_{Gamma, Gamma*}: lower left block of B."""
        return self.B[self.g:, :self.g]

    def structure_residuals(self) -> dict:
        g = self.g
        A, B, C = self.A, self.B, self.C
        off = lambda M: max(np.abs(M[:g, g:]).max(initial=0), np.abs(M[g:, :g]).max(initial=0))
        diag = lambda M: max(np.abs(M[:g, :g]).max(initial=0), np.abs(M[g:, g:]).max(initial=0))
        I = np.eye(2 * g)
        return {
            "symmetry": float(np.abs(self.full - self.full.T).max(initial=0)),
            "min_eigenvalue": float(np.linalg.eigvalsh(self.full).min()) if g else 0.0,
            "A_block_diagonal": float(off(A)),
            "C_block_diagonal": float(off(C)),
            "B_block_antidiagonal": float(diag(B)),
            "B2_minus_CA_plus_I": float(np.abs(B @ B - C @ A + I).max(initial=0)),
            "AB_minus_BtA": float(np.abs(A @ B - B.T @ A).max(initial=0)),
            "CBt_minus_BC": float(np.abs(C @ B.T - B @ C).max(initial=0)),
        }


def gram_matrix(cx: QuadComplex, forms) -> np.ndarray:
    """sum over unoriented Lambda edges of rho * a_k * a_l."""
    W = cx.lambda_weights
    forms = np.asarray(forms)
    return (forms * W) @ forms.T


def gram_blocks(cx: QuadComplex, hb: HarmonicBasis, tol: float = 1e-9) -> GramBlocks:
    """Gram matrix by scalar products, checked against the period formulas."""
    g = hb.genus
    alpha = hb.alpha
    G = gram_matrix(cx, alpha)
    n = 4 * g
    if n:
        star = (star_matrix1(cx) @ alpha.T).T
        P = hb.cycles.chains @ star.T        # P[k, l] = period of *alpha_l along cycle k
        G2 = np.vstack([P[2 * g:], -P[:2 * g]])
        disc = float(np.abs(G - G2).max())
    else:
        disc = 0.0
    if disc > tol * max(1.0, np.abs(G).max(initial=0)):
        raise ConsistencyError(f"Gram matrix disagrees with its period formula by {disc:.3g}")
    return GramBlocks(full=G, g=g, discrepancy=disc)


def star_matrix(gb: GramBlocks) -> np.ndarray:
    """Hodge star acting on row coordinates in the basis alpha."""
    return np.block([[-gb.D, gb.A], [-gb.C, gb.B]])


def star_in_basis(cx: QuadComplex, hb: HarmonicBasis) -> np.ndarray:
    """Coordinates of *alpha_l: entry (l, k) is the period of *alpha_l along cycle k."""
    star = (star_matrix1(cx) @ hb.alpha.T).T
    return star @ hb.cycles.chains.T


@dataclass
class PeriodData:
    zeta: np.ndarray
    Pi: np.ndarray
    Pi_gamma: np.ndarray
    Pi_gamma_star: np.ndarray
    Pi_diamond: np.ndarray
    diamond_applicable: bool
    closeness: float
    gram: GramBlocks
    residuals: dict = field(default_factory=dict)

    @property
    def g(self):
        return self.gram.g

    def blocks(self):
        g = self.g
        P = self.Pi
        return {"i_star": P[:g, :g], "r": P[:g, g:], "r_star": P[g:, :g], "i": P[g:, g:]}


def holomorphic_basis(cx: QuadComplex, gb: GramBlocks, hb: HarmonicBasis,
                      cond_limit: float = 1e12) -> np.ndarray:
    """zeta_k = (i - *) sum_l C^-1[k, l] alpha_{l+2g}."""
    g = gb.g
    C = gb.C
    if g == 0:
        return np.zeros((0, 2 * cx.F), dtype=complex)
    cond = np.linalg.cond(C)
    if not np.isfinite(cond) or cond > cond_limit:
        raise ConsistencyError(f"C block is ill-conditioned (condition number {cond:.3g})")
    Cinv = np.linalg.inv(C)
    base = Cinv @ hb.alpha[2 * g:]
    S = star_matrix1(cx)
    return 1j * base - (S @ base.T).T


def period_matrix(cx: QuadComplex, hb: Optional[HarmonicBasis] = None,
                  gb: Optional[GramBlocks] = None, closeness_tol: float = 1e-6) -> PeriodData:
    """Period matrix of the holomorphic basis, from periods and from C^-1 (i - B)."""
    hb = harmonic_basis(cx) if hb is None else hb
    gb = gram_blocks(cx, hb) if gb is None else gb
    g = gb.g
    zeta = holomorphic_basis(cx, gb, hb)
    chains = hb.cycles.chains
    per = chains @ zeta.T if g else np.zeros((0, 0))      # per[k, l] = period of zeta_l on cycle k
    Pi = per[2 * g:] if g else np.zeros((0, 0), dtype=complex)
    Pi_formula = np.linalg.solve(gb.C, 1j * np.eye(2 * g) - gb.B) if g else Pi
    S = star_matrix1(cx)
    res = {
        "first_periods_identity": float(np.abs(per[:2 * g] - np.eye(2 * g)).max(initial=0)) if g else 0.0,
        "Pi_vs_formula": float(np.abs(Pi - Pi_formula).max(initial=0)),
        "Pi_symmetry": float(np.abs(Pi - Pi.T).max(initial=0)),
        "Im_Pi_min_eigenvalue": float(np.linalg.eigvalsh(0.5 * (Pi.imag + Pi.imag.T)).min()) if g else 0.0,
        "zeta_closed": float(np.abs(cx.d1_lambda @ zeta.T).max(initial=0)),
        "zeta_type_10": float(np.abs((S @ zeta.T) + 1j * zeta.T).max(initial=0)),
        "gram_discrepancy": gb.discrepancy,
    }
    F = cx.F
    ri = 0.0
    for k in range(2 * g):
        z = zeta[k]
        real_part, imag_part = (slice(0, F), slice(F, 2 * F)) if k < g else (slice(F, 2 * F), slice(0, F))
        ri = max(ri, np.abs(z[real_part].imag).max(), np.abs(z[imag_part].real).max())
    res["zeta_real_imaginary_split"] = float(ri)
    blk = {"i_star": Pi[:g, :g], "r": Pi[:g, g:], "r_star": Pi[g:, :g], "i": Pi[g:, g:]}
    res["Pi_diagonal_blocks_real_part"] = float(max(np.abs(blk["i_star"].real).max(initial=0),
                                                    np.abs(blk["i"].real).max(initial=0)))
    res["Pi_offdiagonal_blocks_imag_part"] = float(max(np.abs(blk["r"].imag).max(initial=0),
                                                       np.abs(blk["r_star"].imag).max(initial=0)))
    Pi_g = blk["r"] + blk["i_star"]
    Pi_gs = blk["r_star"] + blk["i"]
    close = float(np.linalg.norm(gb.C_gamma - gb.C_gamma_star) + np.linalg.norm(gb.B_g_gs - gb.B_gs_g))
    return PeriodData(zeta=zeta, Pi=Pi, Pi_gamma=Pi_g, Pi_gamma_star=Pi_gs,
                      Pi_diamond=0.5 * (Pi_g + Pi_gs), diamond_applicable=close < closeness_tol,
                      closeness=close, gram=gb, residuals=res)


# ----------------------------------------------------------------------
# bilinear relations
# ----------------------------------------------------------------------

def bilinear_relation(cx: QuadComplex, theta, theta2, hb: HarmonicBasis, kind: str = "lambda",
                      tol: float = 1e-9) -> dict:
    """Both sides of the Riemann bilinear relation for two closed forms.

    kind="lambda": forms on the double, 2g cycle pairs; the surface
    integral is doubled to match the period sums (see module doc).
    kind="diamond": forms on the diamond, g cycle pairs, no factor.
    """
    theta, theta2 = np.asarray(theta), np.asarray(theta2)
    g = hb.genus
    if kind == "lambda":
        D = cx.d1_lambda
        for t in (theta, theta2):
            if np.abs(D @ t).max(initial=0) > tol * max(1.0, np.abs(t).max(initial=0)):
                raise ValueError("form is not closed")
        C = hb.cycles.chains
        p1, p2 = C @ theta, C @ theta2
        n = 2 * g
        lhs = 2.0 * iint(cx, theta, theta2)
    elif kind == "diamond":
        D = cx.d1_diamond
        for t in (theta, theta2):
            if np.abs(D @ t).max(initial=0) > tol * max(1.0, np.abs(t).max(initial=0)):
                raise ValueError("form is not closed")
        C = hb.cycles.diamond.chains
        p1, p2 = C @ theta, C @ theta2
        n = g
        lhs = complex(np.sum(wedge_diamond(cx, theta, 1, theta2, 1)))
    else:
        raise ValueError("kind must be 'lambda' or 'diamond'")
    rhs = complex(np.sum(p1[:n] * p2[n:2 * n] - p1[n:2 * n] * p2[:n]))
    return {"lhs": complex(lhs), "rhs": rhs, "residual": abs(lhs - rhs)}


def harmonic_norm_identity(cx: QuadComplex, theta, hb: HarmonicBasis) -> dict:
    """Weighted norm of a harmonic form against its period expression."""
    theta = np.asarray(theta)
    g = hb.genus
    C = hb.cycles.chains
    st = star_matrix1(cx) @ np.conj(theta)
    p, q = C @ theta, C @ st
    n = 2 * g
    rhs = complex(np.sum(p[:n] * q[n:] - p[n:] * q[:n]))
    lhs = float(np.real(np.sum(cx.lambda_weights * theta * np.conj(theta))))
    return {"norm": lhs, "periods": rhs, "residual": abs(lhs - rhs)}


# ----------------------------------------------------------------------
# diamond Gram matrix and the parallel/perpendicular splitting
# ----------------------------------------------------------------------

def face_gram_matrix(cx: QuadComplex, a, b) -> complex:
    """Scalar product of two diamond 1-forms from the per-face 4x4 weights.

    The side integrals are taken along the CCW boundary (x,y), (y,x'),
    (x',y'), (y',x); the weights are (rho +- rho*) / 4 in the sign
    pattern of the averaged product.
    """
    s = cx.sides
    a, b = np.asarray(a), np.conj(np.asarray(b))
    va = np.stack([a[s[:, 0]], -a[s[:, 1]], a[s[:, 2]], -a[s[:, 3]]], axis=1)
    vb = np.stack([b[s[:, 0]], -b[s[:, 1]], b[s[:, 2]], -b[s[:, 3]]], axis=1)
    r, rs = cx.rho, 1.0 / cx.rho
    W = np.empty((cx.F, 4, 4))
    pattern = [[(1, 1), (1, -1), (-1, -1), (-1, 1)],
               [(1, -1), (1, 1), (-1, 1), (-1, -1)],
               [(-1, -1), (-1, 1), (1, 1), (1, -1)],
               [(-1, 1), (-1, -1), (1, -1), (1, 1)]]
    for i in range(4):
        for j in range(4):
            sr, ss = pattern[i][j]
            W[:, i, j] = sr * r + ss * rs
    return complex(0.25 * np.einsum("fi,fij,fj->", va, W, vb))


def diamond_gram(cx: QuadComplex, hb: HarmonicBasis, gb: GramBlocks) -> dict:
    """Gram matrix of the diamond basis, three ways."""
    g = gb.g
    ad = hb.alpha_diamond
    from .calculus import average_A
    avg = np.array([average_A(cx, a, 1) for a in ad]).reshape(2 * g, 2 * cx.F)
    G_avg = gram_matrix(cx, avg)
    G_blocks = np.block([[gb.A_gamma + gb.A_gamma_star, gb.B_g_gs.T + gb.B_gs_g.T],
                         [gb.B_g_gs + gb.B_gs_g, gb.C_gamma + gb.C_gamma_star]]) if g else np.zeros((0, 0))
    G_face = np.array([[face_gram_matrix(cx, ad[k], ad[l]).real for l in range(2 * g)]
                       for k in range(2 * g)]).reshape(2 * g, 2 * g)
    det = float(np.linalg.det(G_avg)) if g else 1.0
    return {"matrix": G_avg, "blocks_residual": float(np.abs(G_avg - G_blocks).max(initial=0)),
            "face_formula_residual": float(np.abs(G_avg - G_face).max(initial=0)),
            "determinant": det}


def splitting_report(cx: QuadComplex, hb: HarmonicBasis, gb: GramBlocks) -> dict:
    """Parallel/perpendicular splitting of the harmonic forms."""
    g = gb.g
    if g == 0:
        return {"orthogonality": 0.0, "condition": 1.0}
    al = hb.alpha
    idx = list(range(g)) + list(range(2 * g, 3 * g))
    S = star_matrix1(cx)
    par = np.array([al[k] + al[k + g] for k in idx])
    perp = np.array([S @ (al[k] - al[k + g]) for k in idx])
    W = cx.lambda_weights
    ortho = float(np.abs((par * W) @ perp.T).max())
    Bp, Bm = gb.B_g_gs + gb.B_gs_g, gb.B_g_gs - gb.B_gs_g
    Ap, Am = gb.A_gamma + gb.A_gamma_star, gb.A_gamma - gb.A_gamma_star
    Cp, Cm = gb.C_gamma + gb.C_gamma_star, gb.C_gamma - gb.C_gamma_star
    I, Z = np.eye(g), np.zeros((g, g))
    M = np.block([[I, Z, Bm.T, Am], [Z, I, Cm, Bm], [Z, Z, Bp.T, Ap], [Z, Z, Cp, Bp]])
    return {"orthogonality": ortho, "condition": float(np.linalg.cond(M)), "matrix": M}
