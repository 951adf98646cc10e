"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 usage or validation error,
3 numerical failure.  Data goes to stdout (or ``--out``), diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from typing import Sequence

import numpy as np

from .core import make_cell, quasimomentum, quasimomentum_from_t, spectral_point
from .errors import DomainError, HighContrastError, NonConvergence, PoleError, SingularDenominator
from .harness import DEFAULT_INI, SweepConfig, _list, emit, parse_complex, parse_real, run_convergence, run_spectral_convergence, slope_summary
from .kp_model import unitary_equivalence_check
from .mmatrix import btilde, m1, m2, mtilde
from .spectra import DispersionRelation, find_roots, non_bloch_eigenvalues
from .transforms import gelfand, inverse_gelfand, line_norm, sample_line

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
MODELS = {"limit": "limit_CC", "hom": "hom_bloch", "deltaprime": "deltaprime_bloch", "fibre": "fibre_detM1"}


class UsageError(Exception):
    pass


def _real(s: str) -> float:
    try:
        return parse_real(s)
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _cell(args, eps: float = 1.0):
    a3 = args.a3 if getattr(args, "a3", None) is not None else args.a
    return make_cell(args.a, a3, args.l1, args.l2, eps)


def _write(args, data: bytes) -> None:
    if getattr(args, "out", None):
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _csv(rows: Sequence[Sequence]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue().encode()


def _fmt(x: float) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------
# commands


def band_rows(model: str, cell, taus: Sequence[float], k_max: float) -> list[list]:
    """Rows ``tau, n_roots, roots`` for the bands command (library-level helper)."""
    kind = MODELS[model]
    rows = [["tau", "n_roots", "roots"]]
    for tau in taus:
        roots = find_roots(DispersionRelation(kind, cell, float(tau)), (0.0, k_max))
        rows.append([_fmt(tau), len(roots), ";".join(_fmt(k) for k in roots)])
    return rows


def cmd_bands(args) -> int:
    if args.model == "fibre" and args.eps is None:
        raise UsageError("--model fibre requires --eps")
    eps = args.eps if args.eps is not None else 1.0
    cell = _cell(args, eps)
    if args.t is not None:
        if args.model != "fibre":
            raise UsageError("--t is only meaningful with --model fibre")
        taus = [quasimomentum_from_t(args.t, eps).tau]
    else:
        if args.tau_grid < 1:
            raise UsageError("--tau-grid must be >= 1")
        taus = [2 * math.pi * j / args.tau_grid for j in range(args.tau_grid)]
    _write(args, _csv(band_rows(args.model, cell, taus, args.k_max)))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    if args.model == "fibre" and args.eps is None:
        raise UsageError("--model fibre requires --eps")
    cell = _cell(args, args.eps if args.eps is not None else 1.0)
    roots = find_roots(DispersionRelation(MODELS[args.model], cell, args.tau), (0.0, args.k_max))
    rows = [["kind", "k", "z"]] + [["bloch", _fmt(k), _fmt(k * k)] for k in roots]
    nb_model = {"limit": "hom", "hom": "hom", "deltaprime": "deltaprime"}.get(args.model)
    if nb_model:
        for k in non_bloch_eigenvalues(nb_model, args.tau, cell, (0.0, args.k_max)):
            rows.append(["non_bloch", _fmt(k), _fmt(k * k)])
    _write(args, _csv(rows))
    return EXIT_OK


def cmd_mmatrix(args) -> int:
    cell = _cell(args, args.eps)
    sp = spectral_point(args.z)
    q = quasimomentum(args.tau, args.eps)
    build = {"m1": m1, "m2": m2, "mtilde": mtilde, "btilde": btilde}[args.which]
    m = np.asarray(build(sp, q, cell))
    rows = [["i", "j", "re", "im"]]
    for (i, j), v in np.ndenumerate(m):
        rows.append([i + 1, j + 1, _fmt(v.real), _fmt(v.imag)])
    _write(args, _csv(rows))
    return EXIT_OK


def _converge_config(args) -> SweepConfig:
    text = DEFAULT_INI
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    over = dict(threads=args.threads)
    if args.eps_list:
        over["eps_list"] = tuple(_list(args.eps_list, parse_real))
    if args.tau_samples:
        over["tau_samples"] = tuple(_list(args.tau_samples, parse_real))
    if args.z_samples:
        over["z_samples"] = tuple(_list(args.z_samples, parse_complex))
    if args.grid_n:
        over["grid_n"] = args.grid_n
    if args.rho:
        over["rho"] = args.rho
    if args.no_budget:
        over["budget_check"] = False
    cfg = SweepConfig.from_ini(text, **over)
    cfg.validate()
    return cfg


def cmd_converge(args) -> int:
    cfg = _converge_config(args)
    if args.spectral:
        table = run_spectral_convergence(cfg)
        rows = [["eps", "tau", "distance", "n_fibre", "n_limit"]]
        rows += [[_fmt(r.eps), _fmt(r.tau), _fmt(r.distance), r.n_fibre, r.n_limit] for r in table.rows]
        _write(args, _csv(rows))
        for tau in sorted(table.slopes):
            s = table.slopes[tau]
            print(f"spectral tau={tau:.4f} slope={'n/a' if s is None else f'{s:.3f}'} monotone={table.monotone[tau]}", file=sys.stderr)
        return EXIT_OK if all(table.monotone.values()) and not table.empty else EXIT_CHECK
    result = run_convergence(cfg)
    _write(args, emit(result, args.format))
    print(slope_summary(result), file=sys.stderr)
    return EXIT_OK


def cmd_kp_check(args) -> int:
    cell = _cell(args)
    report = unitary_equivalence_check(args.tau, cell, (0.0, args.k_max), perturb=args.corrupt_coupling)
    _write(args, (report.summary() + "\n").encode())
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_gelfand_demo(args) -> int:
    def bump(y):
        inside = np.abs(y) < 1
        out = np.zeros_like(y, dtype=complex)
        out[inside] = np.exp(-1 / (1 - y[inside] ** 2)) * np.exp(2j * y[inside])
        return out

    g = gelfand(bump, args.N, args.m, args.m)
    cells = sample_line(bump, args.N, args.m)
    back = inverse_gelfand(g)
    nu = line_norm(cells)
    rows = [
        ["quantity", "value"],
        ["norm_line", _fmt(nu)],
        ["norm_transform", _fmt(g.norm())],
        ["plancherel_defect", _fmt(abs(g.norm() - nu) / nu)],
        ["roundtrip_error", _fmt(line_norm(back - cells) / nu)],
    ]
    _write(args, _csv(rows))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_cell(p, l1_default=None, l2_default=None):
    p.add_argument("--l1", type=_real, required=l1_default is None, default=l1_default)
    p.add_argument("--l2", type=_real, required=l2_default is None, default=l2_default)
    p.add_argument("--a", type=_real, default=1.0, help="stiff coefficient (a1, and a3 unless --a3)")
    p.add_argument("--a3", type=_real, default=None)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="highcontrast", description="High-contrast periodic graph toolkit.")
    p.add_argument("--threads", type=int, default=1, help="maximum worker processes")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bands", help="root lists over a tau grid")
    _add_cell(b)
    b.add_argument("--tau-grid", type=int, default=64)
    b.add_argument("--k-max", type=_real, default=20.0)
    b.add_argument("--model", choices=sorted(MODELS), default="limit")
    b.add_argument("--eps", type=_real, default=None)
    b.add_argument("--t", type=_real, default=None, help="single quasimomentum (fibre model)")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bands)

    s = sub.add_parser("spectrum", help="Bloch and non-Bloch eigenvalues at one tau")
    _add_cell(s)
    s.add_argument("--tau", type=_real, required=True)
    s.add_argument("--k-max", type=_real, default=20.0)
    s.add_argument("--model", choices=sorted(MODELS), default="hom")
    s.add_argument("--eps", type=_real, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    m = sub.add_parser("mmatrix", help="boundary matrix entries at one point")
    _add_cell(m)
    m.add_argument("--z", type=parse_complex, required=True)
    m.add_argument("--tau", type=_real, required=True)
    m.add_argument("--eps", type=_real, required=True)
    m.add_argument("--which", choices=["m1", "m2", "mtilde", "btilde"], default="m1")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mmatrix)

    c = sub.add_parser("converge", help="resolvent convergence sweep")
    c.add_argument("--config", help="INI file; the built-in default sweep otherwise")
    c.add_argument("--format", choices=["csv", "json"], default="csv")
    c.add_argument("--eps-list")
    c.add_argument("--tau-samples")
    c.add_argument("--z-samples")
    c.add_argument("--grid-n", type=int)
    c.add_argument("--rho", type=_real)
    c.add_argument("--no-budget", action="store_true", help="skip the doubled-grid budget check")
    c.add_argument("--spectral", action="store_true", help="run the spectral convergence study instead")
    c.add_argument("--out")
    c.set_defaults(func=cmd_converge)

    k = sub.add_parser("kp-check", help="spectral equivalence with the delta-prime model")
    _add_cell(k, 0.25, 0.5)
    k.add_argument("--tau", type=_real, default=math.pi / 2)
    k.add_argument("--k-max", type=_real, default=20.0)
    k.add_argument("--corrupt-coupling", type=float, default=1.0, help=argparse.SUPPRESS)
    k.add_argument("--out")
    k.set_defaults(func=cmd_kp_check)

    g = sub.add_parser("gelfand-demo", help="Plancherel and roundtrip of the truncated transform")
    g.add_argument("--N", type=int, default=2)
    g.add_argument("--m", type=int, default=256)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gelfand_demo)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularDenominator, NonConvergence, PoleError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, HighContrastError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
