"""
Command line interface ``drs``.

Exit codes: 0 success, 1 bad input or failed validation, 2 a numerical
residual above tolerance.  Complex scalars are written ``re,im``;
angles are in radians.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import sys

import click
import numpy as np

from . import calculus, cellular, critical, homology, integrable, periods
from .cellular import ComplexError

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(click.ClickException):
    exit_code = EXIT_NUMERIC


class InputFailure(click.ClickException):
    exit_code = EXIT_INPUT


def parse_complex(text) -> complex:
    """'re,im' or a plain real number."""
    if isinstance(text, complex):
        return text
    parts = str(text).replace(" ", "").split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise InputFailure(f"cannot read complex number {text!r} (expected re,im)")


def _cpair(w):
    return [float(np.real(w)), float(np.imag(w))]


def _cmat(M):
    M = np.atleast_2d(np.asarray(M))
    return [[_cpair(w) for w in row] for row in M]


def _dump(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path in (None, "-"):
        click.echo(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _load(path) -> cellular.QuadComplex:
    try:
        return cellular.load(path)
    except ComplexError as exc:
        raise InputFailure(str(exc)) from exc


def _threads(value):
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("DRS_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise InputFailure(f"DRS_THREADS must be an integer, got {env!r}")


def _critical(cx) -> critical.CriticalMap:
    try:
        return critical.check_critical(cx)
    except critical.NotCritical as exc:
        raise InputFailure(f"{exc}: {exc.faces[:10]}") from exc
    except ComplexError as exc:
        raise InputFailure(str(exc)) from exc


def _plot(cx, values, path, title=""):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.collections import LineCollection

    matplotlib.rcParams["svg.hashsalt"] = "drs"
    cz = cx._need_embedding()
    fig, ax = plt.subplots(figsize=(6, 6))
    segs = [[(w.real, w.imag) for w in np.append(row, row[0])] for row in cz]
    ax.add_collection(LineCollection(segs, colors="0.7", linewidths=0.5))
    z = cx.z if cx.z is not None else cz[:, 0]
    v = np.asarray(values)
    shade = v.real if np.iscomplexobj(v) else v
    sc = ax.scatter(z.real, z.imag, c=shade, s=12, cmap="viridis")
    fig.colorbar(sc, ax=ax, shrink=0.8)
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


@click.group()
@click.option("--threads", type=int, default=None, help="worker threads (default: DRS_THREADS or 1)")
@click.pass_context
def cli(ctx, threads):
    """Discrete Riemann surfaces on quad-graphs."""
    ctx.obj = {"threads": _threads(threads)}


# ----------------------------------------------------------------------
# gen
# ----------------------------------------------------------------------

@cli.command()
@click.argument("kind", type=click.Choice(["square-torus", "trihex-torus", "origami", "rhombic-patch"]))
@click.option("--p", type=int, default=1)
@click.option("--q", type=int, default=1)
@click.option("--theta", type=float, default=math.pi / 4, help="radians")
@click.option("--rows", type=int, default=2)
@click.option("--cols", type=int, default=2)
@click.option("--rhos", default=None, help="three tri-hex weights a,b,c (default equilateral)")
@click.option("--h", "h_perm", default=None, help="horizontal permutation")
@click.option("--v", "v_perm", default=None, help="vertical permutation")
@click.option("--rho", type=float, default=1.0, help="origami weight")
@click.option("--style", type=click.Choice(["square", "trihex"]), default="square")
@click.option("--radius", type=float, default=None)
@click.option("--size", type=int, default=None, help="square patch of size x size vertices")
@click.option("--delta", type=float, default=1.0)
@click.option("-o", "--output", default="-")
def gen(kind, p, q, theta, rows, cols, rhos, h_perm, v_perm, rho, style, radius, size, delta, output):
    """Generate a complex and write it as JSON."""
    try:
        if kind == "square-torus":
            cx = cellular.generate_square_torus(p, q, theta)
        elif kind == "trihex-torus":
            r = [1 / math.sqrt(3)] * 3 if rhos is None else [float(t) for t in rhos.split(",")]
            if len(r) != 3:
                raise ComplexError("--rhos takes three values")
            cx = cellular.generate_trihex_torus(rows, cols, r)
        elif kind == "origami":
            if h_perm is None or v_perm is None:
                raise ComplexError("origami needs --h and --v")
            cx = cellular.generate_origami(h_perm, v_perm, rho)
        else:
            if radius is None and size is None:
                radius = 6.0
            cx = cellular.generate_rhombic_patch(delta, style, radius=radius,
                                                 size=(size, size) if size else None)
    except ComplexError as exc:
        raise InputFailure(str(exc)) from exc
    problems = cellular.validate(cx)
    if problems:
        raise InputFailure("generated complex fails validation: "
                           + "; ".join(p["message"] for p in problems[:5]))
    _dump(cellular.to_json(cx), output)


# ----------------------------------------------------------------------
# periods and harmonic basis
# ----------------------------------------------------------------------

def _closed_input(path):
    cx = _load(path)
    problems = cellular.validate(cx)
    if problems:
        raise InputFailure("; ".join(p["message"] for p in problems[:5]))
    if not cx.closed:
        raise InputFailure("periods need a closed surface")
    return cx


def _gram_json(gb):
    return {"A": gb.A.tolist(), "B": gb.B.tolist(), "C": gb.C.tolist(), "D": gb.D.tolist()}


@cli.command("periods")
@click.argument("input_path", metavar="INPUT")
@click.option("-o", "--output", default="periods.json")
@click.option("--tol", type=float, default=1e-8)
@click.option("--method", type=click.Choice(["cg", "direct"]), default="cg")
def periods_cmd(input_path, output, tol, method):
    """Period matrix of a closed complex; writes periods.json."""
    if not tol > 0:
        raise InputFailure("--tol must be positive")
    cx = _closed_input(input_path)
    try:
        hb = homology.harmonic_basis(cx, method=method)
        gb = periods.gram_blocks(cx, hb)
        pd = periods.period_matrix(cx, hb, gb)
    except (calculus.SolverError, periods.ConsistencyError) as exc:
        raise NumericalFailure(str(exc)) from exc
    g = gb.g
    res = dict(pd.residuals)
    res.update({k: float(v) for k, v in gb.structure_residuals().items()})
    flags = {"symmetric": res["Pi_symmetry"] < tol,
             "im_positive": res["Im_Pi_min_eigenvalue"] > 0 if g else True}
    out = {"g": g, "Pi": _cmat(pd.Pi), "Pi_Gamma": _cmat(pd.Pi_gamma),
           "Pi_GammaStar": _cmat(pd.Pi_gamma_star),
           "Pi_diamond": {"value": _cmat(pd.Pi_diamond), "applicable": bool(pd.diamond_applicable),
                          "closeness": pd.closeness},
           "gram": _gram_json(gb), "residuals": res, "flags": flags, "tolerance": tol}
    _dump(out, output)
    failing = _failing(res, tol)
    if failing or not all(flags.values()):
        raise NumericalFailure("residuals above tolerance: " + ", ".join(failing or ["flags"]))


def _failing(res, tol):
    bad = []
    for k, v in res.items():
        if k.endswith("min_eigenvalue"):
            continue
        if isinstance(v, (int, float)) and not v < tol:
            bad.append(k)
    return bad


@cli.command("harmonic-basis")
@click.argument("input_path", metavar="INPUT")
@click.option("-o", "--output", default="-")
@click.option("--method", type=click.Choice(["cg", "direct"]), default="cg")
def harmonic_basis_cmd(input_path, output, method):
    """Canonical cycles, intersection matrices and the harmonic forms."""
    cx = _closed_input(input_path)
    try:
        hb = homology.harmonic_basis(cx, method=method)
    except calculus.SolverError as exc:
        raise NumericalFailure(str(exc)) from exc
    cyc = hb.cycles
    out = {"g": hb.genus,
           "diamond_cycles": cyc.diamond.chains.astype(int).tolist(),
           "diamond_intersection": cyc.diamond.intersection.astype(int).tolist(),
           "lambda_cycles": cyc.chains.astype(int).tolist(),
           "lambda_intersection": cyc.intersection.astype(int).tolist(),
           "alpha": [calculus.cochain_to_json(cx, a, 1, cellular.LAMBDA) for a in hb.alpha],
           "alpha_diamond": [calculus.cochain_to_json(cx, a, 1, cellular.DIAMOND)
                             for a in hb.alpha_diamond],
           "period_table_residual": float(np.abs(hb.periods - np.eye(len(hb.periods))).max(initial=0))}
    _dump(out, output)


# ----------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------

def _suite_validate(cx, rng, tol):
    problems = cellular.validate(cx)
    return {"checks": {"validation_issues": len(problems)}, "issues": problems}, bool(problems)


def _suite_dec(cx, rng, tol):
    r = {}
    for tag in (cellular.LAMBDA, cellular.DIAMOND):
        d0 = cx.d0_lambda if tag == cellular.LAMBDA else cx.d0_diamond
        d1 = cx.d1_lambda if tag == cellular.LAMBDA else cx.d1_diamond
        r[f"d2_{tag}"] = float(abs(d1 @ d0).max()) if (d1 @ d0).nnz else 0.0
    if cx.closed:
        for k in (0, 1, 2):
            n = cx.V if k != 1 else 2 * cx.F
            x = rng.normal(size=n)
            ss = calculus.hodge_star(cx, calculus.hodge_star(cx, x, k), 2 - k)
            r[f"star_squared_{k}"] = float(np.abs(ss - (-1) ** k * x).max())
        a = rng.normal(size=2 * cx.F) + 1j * rng.normal(size=2 * cx.F)
        b = rng.normal(size=2 * cx.F) + 1j * rng.normal(size=2 * cx.F)
        sb = calculus.hodge_star(cx, np.conj(b), 1)
        r["scalar_vs_wedge"] = abs(calculus.scalar_product(cx, a, b) - calculus.iint(cx, a, sb))
        beta = rng.normal(size=2 * cx.F)
        hs = calculus.hodge_decompose(cx, beta)
        W = cx.lambda_weights
        parts = [hs.exact, hs.coexact, hs.harmonic]
        r["hodge_orthogonality"] = float(max(abs(np.sum(W * parts[i] * parts[j]))
                                             for i in range(3) for j in range(i + 1, 3)))
        r["harmonic_dimension_minus_4g"] = abs(calculus.harmonic_dimension(cx) - 4 * cx.genus)
    if cx.corner_z is not None:
        worst = 0.0
        for _ in range(20):
            f = rng.normal(size=cx.V) + 1j * rng.normal(size=cx.V)
            e = calculus.energies(cx, f)
            worst = max(worst, abs(e.conformal - (e.dirichlet - e.area)))
        r["energy_identity"] = worst
    failing = [k for k, v in r.items() if not v <= (0 if k.startswith("harmonic_dim") else tol)]
    return {"checks": r, "failing": failing}, bool(failing)


def _random_closed_forms(cx, hb, rng, n):
    """Random closed Lambda 1-forms: harmonic combinations plus exact parts."""
    forms = []
    for _ in range(n):
        c = rng.normal(size=len(hb.alpha))
        f = rng.normal(size=cx.V)
        forms.append(c @ hb.alpha + cx.d0_lambda @ f)
    return forms


def _suite_bilinear(cx, rng, tol, pairs=20):
    if not cx.closed or cx.genus == 0:
        return {"checks": {}, "note": "needs a closed surface of positive genus"}, False
    hb = homology.harmonic_basis(cx)
    forms = _random_closed_forms(cx, hb, rng, 2 * pairs)
    lam = [periods.bilinear_relation(cx, forms[2 * k], forms[2 * k + 1], hb)["residual"]
           for k in range(pairs)]
    dia = []
    for k in range(pairs):
        c1, c2 = rng.normal(size=len(hb.alpha_diamond)), rng.normal(size=len(hb.alpha_diamond))
        f1, f2 = rng.normal(size=cx.V), rng.normal(size=cx.V)
        t1 = c1 @ hb.alpha_diamond + cx.d0_diamond @ f1
        t2 = c2 @ hb.alpha_diamond + cx.d0_diamond @ f2
        dia.append(periods.bilinear_relation(cx, t1, t2, hb, kind="diamond")["residual"])
    r = {"lambda_max": float(max(lam)), "diamond_max": float(max(dia)),
         "lambda_residuals": [float(x) for x in lam], "diamond_residuals": [float(x) for x in dia]}
    bad = r["lambda_max"] > tol or r["diamond_max"] > tol
    return {"checks": r}, bad


def _suite_critical(cx, rng, tol):
    cm = critical.check_critical(cx)
    r = {}
    r["distance_bounds"] = critical.distance_bounds(cm)["ok"]
    e, gap = critical.exp_rational(cm, 1.0 + 0.5j, check_paths=True)
    r["exp_path_gap"] = gap
    r["exp_edge_residual"] = float(np.abs(critical.exp_edge_residual(cm, e, 1.0 + 0.5j)).max()
                                   / np.abs(e).max())
    m = critical.monomials(cm, 6)
    mr = critical.monomial_residuals(cm, m)
    r["monomial_cr"] = float(mr["cr"].max())
    r["monomial_primitive"] = float(mr["primitive"].max())
    failing = [k for k, v in r.items() if (v is False) or (not isinstance(v, bool) and v > tol)]
    return {"checks": r, "failing": failing}, bool(failing)


SUITES = {"validate": _suite_validate, "dec": _suite_dec, "bilinear": _suite_bilinear,
          "critical": _suite_critical}


@cli.command()
@click.argument("input_path", metavar="INPUT")
@click.option("--suite", type=click.Choice(sorted(SUITES) + ["all"]), default="all")
@click.option("--tol", type=float, default=1e-9)
@click.option("--seed", type=int, default=0)
@click.option("-o", "--output", default="-")
def verify(input_path, suite, tol, seed, output):
    """Run invariant suites; JSON report, exit 0 iff all pass."""
    if not tol > 0:
        raise InputFailure("--tol must be positive")
    cx = _load(input_path)
    report = {"input": os.path.basename(input_path), "seed": seed, "tolerance": tol, "suites": {}}
    problems = cellular.validate(cx)
    if problems:
        report["suites"]["validate"] = {"checks": {"validation_issues": len(problems)},
                                        "issues": problems}
        report["passed"] = False
        _dump(report, output)
        raise InputFailure("validation failed: " + "; ".join(p["message"] for p in problems[:5]))
    names = [suite] if suite != "all" else ["validate", "dec", "bilinear"] + (
        ["critical"] if cx.corner_z is not None and not cx.closed else [])
    failed = False
    for name in names:
        rng = np.random.default_rng(seed)
        try:
            out, bad = SUITES[name](cx, rng, tol)
        except (critical.NotCritical, ComplexError) as exc:
            out, bad = {"error": str(exc)}, True
        report["suites"][name] = out
        out["passed"] = not bad
        failed |= bad
    report["passed"] = not failed
    _dump(report, output)
    if failed:
        raise NumericalFailure("some invariants failed")


# ----------------------------------------------------------------------
# analytic commands
# ----------------------------------------------------------------------

def _patch(path, radius=4.0):
    if path is None:
        return cellular.generate_rhombic_patch(1.0, "square", radius=radius)
    return _load(path)


def _write_table(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    if path in (None, "-"):
        click.echo(buf.getvalue(), nl=False)
    else:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())


@cli.command("exp")
@click.option("--lambda", "lam", default="1", help="re,im")
@click.option("--patch", "patch_path", default=None)
@click.option("--series/--rational", default=False, help="evaluate the power series instead")
@click.option("--max-terms", type=int, default=200)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("-o", "--output", default="-")
@click.option("--plot", default=None, help="write an SVG figure")
def exp_cmd(lam, patch_path, series, max_terms, fmt, output, plot):
    """Table of exp(:lambda:x) over a critical patch."""
    lam = parse_complex(lam)
    cm = _critical(_patch(patch_path))
    try:
        if series:
            sr = critical.exp_series(cm, lam, max_terms=max_terms)
            vals = sr.values
            if not sr.converged.all():
                click.echo(f"warning: series not converged at {int((~sr.converged).sum())} vertices",
                           err=True)
        else:
            vals = critical.exp_rational(cm, lam)
    except (critical.PoleError, critical.DivergenceError) as exc:
        raise InputFailure(str(exc)) from exc
    if fmt == "json":
        _dump(calculus.cochain_to_json(cm.cx, vals, 0, cellular.DIAMOND), output)
    else:
        _write_table(output, ["vertex", "re_z", "im_z", "re_exp", "im_exp"],
                     [[v, cm.Z[v].real, cm.Z[v].imag, vals[v].real, vals[v].imag]
                      for v in range(cm.cx.V)])
    if plot:
        _plot(cm.cx, vals, plot, f"exp(:{lam}:Z)")


@cli.command()
@click.option("--patch", "patch_path", default=None)
@click.option("--size", type=int, default=15, help="square patch size when no --patch is given")
@click.option("--nodes", type=int, default=4096)
@click.option("-o", "--output", default="green.csv")
@click.option("--plot", default=None)
@click.pass_context
def green(ctx, patch_path, size, nodes, output, plot):
    """Green function G(O, x) by contour quadrature; writes green.csv."""
    if nodes < 16:
        raise InputFailure("--nodes must be at least 16")
    cx = _load(patch_path) if patch_path else cellular.generate_rhombic_patch(1.0, "square",
                                                                              size=(size, size))
    cm = _critical(cx)
    try:
        gt = critical.green_function(cm, nodes=nodes, threads=ctx.obj["threads"])
    except critical.QuadratureError as exc:
        raise NumericalFailure(str(exc)) from exc
    G = gt.values
    _write_table(output, ["vertex", "re_z", "im_z", "re_g", "im_g"],
                 [[v, cm.Z[v].real, cm.Z[v].imag, G[v].real, G[v].imag] for v in range(cx.V)])
    same = cx.color == cx.color[cm.origin]
    away = same & (np.arange(cx.V) != cm.origin)
    cut = critical.green_cut_report(cm, G)
    local = critical.green_local_branch_residual(cm, G, nodes=nodes, threads=ctx.obj["threads"])
    summary = {"laplacian_residual": local["max"],
               "laplacian_residual_origin_color": gt.laplacian_residual,
               "laplacian_residual_other_color_local_branch": local["other_color"],
               "laplacian_residual_other_color_off_cut": cut["off_cut"],
               "branch_cut_residuals_over_i": [_cpair(w) for w in cut["on_cut"]],
               "refinement_gap": gt.refinement_gap,
               "max_abs_im_origin_color": float(np.abs(G[same].imag).max()),
               "max_re_origin_color_away": float(G[away].real.max()) if away.any() else None,
               "nodes": nodes}
    click.echo(json.dumps(summary, indent=2, sort_keys=True), err=output in (None, "-"))
    if plot:
        _plot(cx, G.real, plot, "Re G(O, x)")
    if local["max"] > 1e-6:
        raise NumericalFailure("Laplacian residual above 1e-6")


def _base_function(cm, base, mu):
    Z = cm.Z
    if base == "z":
        return Z.astype(complex)
    if base == "exp":
        return critical.exp_rational(cm, mu)
    if base == "mobius":
        return (2 * Z + 1j) / (0.05 * Z + 3 + 1j)
    raise InputFailure(f"unknown base {base!r}")


@cli.command()
@click.option("--lambda", "lam", default="0.7", help="re,im")
@click.option("--u", "u", default="0", help="re,im")
@click.option("--kind", type=click.Choice([integrable.LINEAR, integrable.QUADRATIC]),
              default=integrable.LINEAR)
@click.option("--base", type=click.Choice(["z", "exp", "mobius"]), default="z")
@click.option("--mu", default="0.5,0.2", help="exponent of the exp base")
@click.option("--patch", "patch_path", default=None)
@click.option("--roundtrip", is_flag=True, help="report the inverse-transform round trip")
@click.option("--tol", type=float, default=1e-10)
@click.option("-o", "--output", default=None, help="write the sheet as a cochain JSON")
def backlund(lam, u, kind, base, mu, patch_path, roundtrip, tol, output):
    """Baecklund transform of a holomorphic function on a critical patch."""
    lam, u, mu = parse_complex(lam), parse_complex(u), parse_complex(mu)
    cm = _critical(_patch(patch_path))
    f = _base_function(cm, base, mu)
    if kind == integrable.QUADRATIC and base == "exp":
        raise InputFailure("the exp base is not quadratic holomorphic")
    try:
        sheet = integrable.backlund(cm, f, lam, u, kind, tol=tol)
        summary = {"kind": kind, "lambda": _cpair(lam), "u": _cpair(u),
                   "edge_residual": sheet.edge_residual}
        if roundtrip:
            summary["roundtrip_error"] = integrable.roundtrip_error(cm, f, lam, u, kind)
    except (integrable.DegenerateEdge, integrable.InconsistentSheet) as exc:
        raise NumericalFailure(str(exc)) from exc
    if output:
        _dump(calculus.cochain_to_json(cm.cx, sheet.values, 0, cellular.DIAMOND), output)
    click.echo(json.dumps(summary, indent=2, sort_keys=True))
    if roundtrip and summary["roundtrip_error"] > tol:
        raise NumericalFailure("round trip error above tolerance")


@cli.command()
@click.option("--patch", "patch_path", default=None)
@click.option("--seed", type=int, default=0)
@click.option("--spread", type=float, default=0.3, help="size of the random initial data around 1")
@click.option("--lambdas", default="0.3;1.1;2.7", help="semicolon separated re,im values")
@click.option("--tol", type=float, default=1e-10)
@click.option("-o", "--output", default=None, help="write w and f as cochain JSON")
def hirota(patch_path, seed, spread, lambdas, tol, output):
    """Random Hirota field (Goursat data on the axes), its potential and transfer matrices."""
    cm = _critical(_patch(patch_path))
    rng = np.random.default_rng(seed)
    Z = cm.Z
    w0 = np.full(cm.cx.V, np.nan + 0j)
    axis = (np.abs(Z.imag) < 1e-9 * cm.delta) | (np.abs(Z.real) < 1e-9 * cm.delta)
    n = int(axis.sum())
    w0[axis] = 1 + spread * (rng.normal(size=n) + 1j * rng.normal(size=n))
    w = integrable.hirota_goursat(cm, w0)
    if np.isnan(w).any():
        raise InputFailure("axis data do not determine the field on this patch")
    lams = [parse_complex(t) for t in lambdas.split(";") if t.strip()]
    try:
        f = integrable.hirota_integrate(cm, w, tol=tol)
    except critical.HolonomyError as exc:
        raise NumericalFailure(str(exc)) from exc
    cr = integrable.cross_ratio_residual(cm, f)
    td = integrable.transfer_matrices(cm, w, lams, kind="hirota")
    summary = {"hirota_residual": float(integrable.hirota_residual(cm, w).max()),
               "cross_ratio_residual": float(np.nanmax(cr.cross_ratio)),
               "zero_curvature": [float(x) for x in td.face_mismatch],
               "singular_frames": len(td.singular), "seed": seed}
    if output:
        _dump({"w": calculus.cochain_to_json(cm.cx, w, 0, cellular.DIAMOND),
               "f": calculus.cochain_to_json(cm.cx, f, 0, cellular.DIAMOND)}, output)
    click.echo(json.dumps(summary, indent=2, sort_keys=True))
    if summary["cross_ratio_residual"] > tol or max(summary["zero_curvature"]) > tol:
        raise NumericalFailure("residual above tolerance")


@cli.command()
@click.option("--kmin", type=int, default=2)
@click.option("--kmax", type=int, default=6)
@click.option("--degree", type=int, default=3)
@click.option("-o", "--output", default="-")
def convergence(kmin, kmax, degree, output):
    """Z^{:degree:} against z^degree on square patches of side 2^-k."""
    if kmin < 0 or kmax <= kmin or degree < 1:
        raise InputFailure("need 0 <= kmin < kmax and degree >= 1")
    res = critical.convergence_study(range(kmin, kmax + 1), degree)
    res["ratios_in_3_5"] = all(3 <= r <= 5 for r in res["ratios"])
    _dump(res, output)
    if not res["ratios_in_3_5"]:
        raise NumericalFailure("convergence ratios outside [3, 5]")


def main(argv=None):
    """Entry point mapping every failure onto the exit-code contract."""
    try:
        cli.main(args=argv, prog_name="drs", standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(EXIT_INPUT)
    except click.ClickException as exc:
        exc.show()
        code = exc.exit_code if exc.exit_code in (EXIT_INPUT, EXIT_NUMERIC) else EXIT_INPUT
        if isinstance(exc, click.UsageError):
            code = EXIT_INPUT
        sys.exit(code)
    except (ComplexError, ValueError) as exc:
        click.echo(f"Error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        click.echo(f"Error: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
