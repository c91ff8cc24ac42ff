"""Command-line front end.

Subcommands: phase-diagram, boundary, coefficients, correlations, xi,
trajectory, validate.  Options may come from a JSON config file
(--config) with flags overriding file values; unknown config keys are
rejected.  Every run writes a run_manifest.json echoing the fully
resolved configuration.  Exit codes: 0 success, 2 validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import gfp, lattice, params, rgflow
from .errors import NumericsError
from .output import write_csv, write_manifest
from .parallel import resolve_threads

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3


class ConfigError(ValueError):
    pass


def parse_grid(spec: str) -> list[float]:
    """Grid syntax lo:hi:n (inclusive endpoints) or a single value."""
    if spec is None:
        raise ConfigError("missing grid specification")
    parts = str(spec).split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise ConfigError(f"grid must be 'lo:hi:n' or a single value, got {spec!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise ConfigError("grid needs n >= 1 points")
    if n == 1:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def parse_quad(spec: str) -> rgflow.QuadSpec:
    try:
        n_r, n_chi, n_theta = (int(v) for v in str(spec).split(","))
    except ValueError as exc:
        raise ConfigError(f"--quad expects nR,nchi,ntheta, got {spec!r}") from exc
    return rgflow.QuadSpec(n_R=n_r, n_chi=n_chi, n_theta=n_theta)


def _add_common(sub):
    sub.add_argument("--config", type=Path, default=None)
    sub.add_argument("--out", type=Path, default=Path("."))
    sub.add_argument("--threads", type=int, default=None)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--quad", type=str, default="24,48,48")
    sub.add_argument("--ellmax", type=float, default=50.0)
    sub.add_argument("--refresh-f", choices=("auto", "always"), default="auto")
    sub.add_argument("--boundary-rule", choices=("re", "abs"), default="re")


_COMMAND_FLAGS = {
    "phase-diagram": ("gs", "gamma"),
    "boundary": ("gs", "gamma"),
    "coefficients": ("gs", "gamma"),
    "correlations": ("gs", "gamma", "x"),
    "xi": ("k_re", "k_im", "mlambda"),
    "trajectory": (
        "L", "t0", "Jz", "h", "alpha", "gamma", "dt", "tfinal", "ntraj",
        "nup", "ndn", "ntotal",
    ),
    "validate": (),
}
_COMMON_KEYS = (
    "config", "out", "threads", "seed", "quad", "ellmax", "refresh_f", "boundary_rule",
)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mll", description=__doc__)
    subs = ap.add_subparsers(dest="command", required=True)

    pd = subs.add_parser("phase-diagram", help="classify a (g_s, gamma) grid")
    pd.add_argument("--gs", type=str, default="1:3:41")
    pd.add_argument("--gamma", type=str, default="0:1:41")
    _add_common(pd)

    bd = subs.add_parser("boundary", help="numeric and analytic phase boundary")
    bd.add_argument("--gs", type=str, default="1.2:3:10")
    bd.add_argument("--gamma", type=str, default="0:1:21")
    _add_common(bd)

    co = subs.add_parser("coefficients", help="fixed-point correlation coefficients")
    co.add_argument("--gs", type=str, default="2")
    co.add_argument("--gamma", type=str, default="0:0.6:25")
    _add_common(co)

    cr = subs.add_parser("correlations", help="correlation matrix vs separation")
    cr.add_argument("--gs", type=str, default="2")
    cr.add_argument("--gamma", type=str, default="0.5")
    cr.add_argument("--x", type=str, default="1:16:16")
    _add_common(cr)

    xi = subs.add_parser("xi", help="strong-coupling correlation lengths")
    xi.add_argument("--k-re", dest="k_re", type=str, default="0.25:1:3")
    xi.add_argument("--k-im", dest="k_im", type=str, default="-0.3")
    xi.add_argument("--mlambda", type=str, default="0.5:2:3")
    _add_common(xi)

    tr = subs.add_parser("trajectory", help="lattice trajectory ensemble")
    tr.add_argument("--L", type=int, default=4)
    tr.add_argument("--t0", type=float, default=1.0)
    tr.add_argument("--Jz", type=float, default=0.5)
    tr.add_argument("--h", type=float, default=0.0)
    tr.add_argument("--alpha", type=float, default=0.0)
    tr.add_argument("--gamma", type=float, default=1.0)
    tr.add_argument("--dt", type=float, default=0.005)
    tr.add_argument("--tfinal", type=float, default=6.0)
    tr.add_argument("--ntraj", type=int, default=100)
    tr.add_argument("--nup", type=int, default=None)
    tr.add_argument("--ndn", type=int, default=None)
    tr.add_argument("--ntotal", type=int, default=None)
    _add_common(tr)

    va = subs.add_parser("validate", help="run the fast invariant suite")
    _add_common(va)
    return ap


def apply_config_file(args: argparse.Namespace, argv):
    """Merge JSON config under the explicit flags (flags win)."""
    if args.config is None:
        return args
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {k.replace("-", "_") for k in _COMMAND_FLAGS[args.command]}
    allowed.update(_COMMON_KEYS)
    allowed.add("command")
    # flags explicitly given on the command line take precedence
    given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv
             if a.startswith("--")}
    for key, val in raw.items():
        k = key.replace("-", "_")
        if k not in allowed:
            raise ConfigError(f"unknown config key {key!r} for {args.command}")
        if k == "command":
            if val != args.command:
                raise ConfigError(f"config is for command {val!r}, not {args.command!r}")
            continue
        if k in given:
            continue
        if k in ("out", "config"):
            val = Path(val)
        setattr(args, k, val)
    return args


def resolved_config(args: argparse.Namespace) -> dict:
    cfg = {}
    for key, val in sorted(vars(args).items()):
        if key == "config":
            continue
        cfg[key] = str(val) if isinstance(val, Path) else val
    cfg["threads"] = resolve_threads(args.threads)
    return cfg


def _solver(args) -> rgflow.StepSpec:
    return rgflow.StepSpec(refresh=args.refresh_f)


def cmd_phase_diagram(args) -> int:
    gs = parse_grid(args.gs)
    gamma = parse_grid(args.gamma)
    quad = parse_quad(args.quad)
    threads = resolve_threads(args.threads)
    points = rgflow.phase_diagram_scan(
        gs, gamma, ell_max=args.ellmax, quad=quad, solver=_solver(args), threads=threads
    )
    # fill the active coefficient in the algebraic region
    rows = []
    failures = []
    for pt in points:
        delta_sc = None
        if pt.phase is rgflow.Phase.ALGEBRAIC and pt.gamma > 0:
            try:
                c = params.bare_couplings(params.PhysicalParams(g_s=pt.g_s, gamma=pt.gamma))
                delta_sc = gfp.six_coefficients(c).delta_sc
            except NumericsError as exc:
                failures.append({"g_s": pt.g_s, "gamma": pt.gamma, "error": str(exc)})
        elif pt.phase is rgflow.Phase.ALGEBRAIC:
            delta_sc = 0.0
        if pt.error is not None:
            failures.append({"g_s": pt.g_s, "gamma": pt.gamma, "error": pt.error})
        rows.append(
            (
                pt.g_s,
                pt.gamma,
                pt.phase.value if pt.phase is not None else "",
                pt.lambda_ratio,
                delta_sc if pt.phase is rgflow.Phase.ALGEBRAIC else None,
            )
        )
    write_csv(
        args.out / "phase_diagram.csv",
        ("g_s", "gamma", "phase", "lambda_ratio", "delta_sc"),
        rows,
    )
    write_manifest(args.out / "run_manifest.json", resolved_config(args))
    if failures:
        write_manifest(args.out / "failures.json", {"failures": failures})
        return EXIT_NUMERICS
    return EXIT_OK


def cmd_boundary(args) -> int:
    gs = parse_grid(args.gs)
    gamma = parse_grid(args.gamma)
    quad = parse_quad(args.quad)
    rows = []
    status = EXIT_OK
    for g in gs:
        try:
            num = rgflow.numeric_boundary_column(
                g, gamma, ell_max=args.ellmax, quad=quad, solver=_solver(args)
            )
        except NumericsError:
            num = math.nan
            status = EXIT_NUMERICS
        try:
            ana = rgflow.analytic_boundary(g, rule=args.boundary_rule)
        except NumericsError:
            ana = math.nan
            status = EXIT_NUMERICS
        rows.append((g, num, ana))
    write_csv(args.out / "boundary.csv", ("g_s", "gamma_c_numeric", "gamma_c_analytic"), rows)
    write_manifest(args.out / "run_manifest.json", resolved_config(args))
    return status


def cmd_coefficients(args) -> int:
    gs = parse_grid(args.gs)
    gamma = parse_grid(args.gamma)
    rows = []
    status = EXIT_OK
    for g in gs:
        for gam in gamma:
            try:
                c = params.bare_couplings(params.PhysicalParams(g_s=g, gamma=gam))
                k = gfp.six_coefficients(c)
                rows.append(
                    (g, gam, k.sigma_plus_c, k.sigma_plus_s, k.sigma_minus_c,
                     k.sigma_minus_s, k.delta_cs, k.delta_sc, k.imag_leakage)
                )
            except NumericsError:
                status = EXIT_NUMERICS
                rows.append((g, gam, None, None, None, None, None, None, None))
    write_csv(
        args.out / "coefficients.csv",
        ("g_s", "gamma", "sigma_plus_c", "sigma_plus_s", "sigma_minus_c",
         "sigma_minus_s", "delta_cs", "delta_sc", "imag_leakage"),
        rows,
    )
    write_manifest(args.out / "run_manifest.json", resolved_config(args))
    return status


def cmd_correlations(args) -> int:
    g = parse_grid(args.gs)[0]
    gam = parse_grid(args.gamma)[0]
    xs = parse_grid(args.x)
    p = params.PhysicalParams(g_s=g, gamma=gam)
    c = params.bare_couplings(p)
    coeff = gfp.six_coefficients(c)
    labels = ("rho_c", "rho_s", "j_c", "j_s")
    rows = []
    for x in xs:
        C = gfp.correlation_matrix(coeff, c.kappa, p.v_F, x)
        for i, A in enumerate(labels):
            for j, B in enumerate(labels):
                rows.append((A, B, x, C[i, j]))
    write_csv(args.out / "correlations.csv", ("A", "B", "x", "value"), rows)
    write_manifest(args.out / "run_manifest.json", resolved_config(args))
    return EXIT_OK


def cmd_xi(args) -> int:
    k_res = parse_grid(args.k_re)
    k_ims = parse_grid(args.k_im)
    ms = parse_grid(args.mlambda)
    rows = []
    status = EXIT_OK
    for kre in k_res:
        for kim in k_ims:
            for m in ms:
                kt = complex(kre, kim)
                xi_f = 1.0 / gfp.branch_point(kt, m).imag
                try:
                    xi_n, _ = gfp.xi_fit(kt, m)
                except NumericsError:
                    xi_n = math.nan
                    status = EXIT_NUMERICS
                rows.append((kre, kim, m, xi_f, xi_n))
    write_csv(
        args.out / "xi.csv",
        ("k_re", "k_im", "m_lambda", "xi_formula", "xi_fit"),
        rows,
    )
    write_manifest(args.out / "run_manifest.json", resolved_config(args))
    return status


def cmd_trajectory(args) -> int:
    nup, ndn, ntotal = args.nup, args.ndn, args.ntotal
    if nup is None and ndn is None and ntotal is None:
        nup = ndn = args.L // 2
    p = lattice.LatticeParams(
        L=args.L, t0=args.t0, Jz=args.Jz, h=args.h, alpha=args.alpha,
        gamma=args.gamma, dt=args.dt, t_final=args.tfinal, n_traj=args.ntraj,
        seed=args.seed, n_up=nup, n_dn=ndn, n_total=ntotal,
    )
    res = lattice.run_ensemble(p, threads=resolve_threads(args.threads))
    rows = []
    for A in lattice.OBSERVABLE_LABELS:
        for B in lattice.OBSERVABLE_LABELS:
            for x in range(p.L):
                rows.append((A, B, x, res.correlators.value[A][B][x],
                             res.correlators.stderr[A][B][x]))
    write_csv(args.out / "trajectory_correlators.csv",
              ("A", "B", "x", "value", "stderr"), rows)
    write_csv(
        args.out / "purity.csv",
        ("time", "purity", "stderr"),
        list(zip(res.times, res.purity, res.purity_stderr)),
    )
    write_manifest(args.out / "run_manifest.json", resolved_config(args))
    return EXIT_OK


def cmd_validate(args) -> int:
    """Fast invariant sweep across the modules."""
    checks = []

    p = params.PhysicalParams(g_s=2.0, gamma=0.5)
    c = params.bare_couplings(p)
    checks.append(("k_tilde two ways", abs((c.k_c + c.kappa**2) - c.k_tilde_c) < 1e-14))

    spec = rgflow.StepSpec(freeze=True, rtol=1e-12, atol=1e-14,
                           escape_threshold=float("inf"), weak_threshold=0.0)
    trace = rgflow.integrate_flow(c, ell_max=5.0, solver=spec)
    dim = 2.0 - 1.0 / np.sqrt(complex(c.k_c)) - 1.0 / np.sqrt(complex(c.k_s))
    expected = abs(np.exp(dim * 5.0))
    checks.append(
        ("frozen-flow exponential", abs(trace.lambda_ratio - expected) / expected < 1e-8)
    )

    V = gfp.solve_V_plus(c)
    checks.append(("pseudo-unitarity", V.pseudo_unitarity_defect() < 1e-10))
    checks.append(("triangularization", V.residual < 1e-10))

    lp = lattice.LatticeParams(L=2, gamma=1.0, t0=1.0, dt=0.01, n_up=1, n_dn=0)
    checks.append(("lindblad identity", lattice.lindblad_identity_check(lp) < 1e-14))

    ops = lattice.build_operators(lp)
    K0, K1 = lattice.kraus_pair(ops.jumps[0][2], 0.01)
    eye = np.eye(ops.dim)
    defect = np.max(np.abs((K0.conj().T @ K0 + K1.conj().T @ K1).toarray() - eye))
    checks.append(("kraus completeness O(dt^2)", defect < 1e-3))

    failed = [name for name, ok in checks if not ok]
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}: {name}")
    write_manifest(args.out / "run_manifest.json", resolved_config(args))
    return EXIT_OK if not failed else EXIT_NUMERICS


_DISPATCH = {
    "phase-diagram": cmd_phase_diagram,
    "boundary": cmd_boundary,
    "coefficients": cmd_coefficients,
    "correlations": cmd_correlations,
    "xi": cmd_xi,
    "trajectory": cmd_trajectory,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = apply_config_file(args, argv)
        rc = _DISPATCH[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    return rc


if __name__ == "__main__":
    sys.exit(main())
