"""Command-line interface.

Exit status: 0 when every check passes, 2 when a quantitative check fails
(the failing check is named on stderr), 1 for usage and I/O errors.
Every command except ``report`` appends a record to ``<out>/runs.jsonl``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import report as rp
from .config import DEFAULT, load_tolerances
from .debranges import build_E, kernel_formula, kernel_integral
from .nentire import ExtensionPair, c_conditions, minimal_n_estimate, verify_mf1, verify_mf2, verify_mf3
from .ode import dump_jet_csv, endpoint_solution, make_grid, regular_solution, second_solution
from .problem import ProblemError, builtin_problem, load_problem, parse_real
from .spectrum import eigen_count, eigenvalues, trace_identity
from .weyl import WeylGauge, build_weyl, residue_check, weyl_eval

log = logging.getLogger("singweyl")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_complex(text: str) -> complex:
    try:
        return complex(str(text).strip().replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise UsageError(f"cannot parse complex number {text!r}") from exc


def parse_z_grid(text: str) -> np.ndarray:
    """'start:stop:num[:imag]' -> num points start..stop shifted by i*imag."""
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise UsageError(f"--z-grid expects start:stop:num[:imag], got {text!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        im = float(parts[3]) if len(parts) == 4 else 0.0
    except ValueError as exc:
        raise UsageError(f"bad --z-grid {text!r}") from exc
    if n < 1:
        raise UsageError("--z-grid needs at least one point")
    return np.linspace(a, b, n) + 1j * im


def _read_pairs(path: Path) -> tuple[np.ndarray, np.ndarray]:
    w, z = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path} is empty")
    head = [h.strip() for h in rows[0]]
    if head == ["re_w", "im_w", "re_z", "im_z"]:
        rows = rows[1:]
    for r in rows:
        if not r:
            continue
        try:
            a, b, c, d = (float(v) for v in r[:4])
        except ValueError as exc:
            raise UsageError(f"bad row in {path}: {r}") from exc
        w.append(a + 1j * b)
        z.append(c + 1j * d)
    return np.array(w), np.array(z)


def _tag(problem) -> str:
    return problem.digest()[:10]


def _dump_jets(problem, z, J, out: Path, tol) -> list[str]:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    grid = make_grid(problem, z, J, tol)
    files = []
    for name, fn in (("phi", regular_solution), ("theta", second_solution), ("chi", endpoint_solution)):
        jet = fn(problem, z, J, grid, tol)
        p = out / f"jets_{name}_{_tag(problem)}.csv"
        dump_jet_csv(jet, p, 0)
        files.append(str(p))
    return files


# -- commands -------------------------------------------------------------------

EIG_COLS = ["k", "lambda", "gamma", "c", "wprime_residual"]


def cmd_eigs(args, problem, tol, out):
    sp = eigenvalues(problem, lmax=args.lmax, count=args.count, tol=tol)
    tag = _tag(problem)
    files = [str(rp.write_csv(out / f"eigs_{tag}.csv", EIG_COLS,
                              ([r[c] for c in EIG_COLS] for r in sp.rows())))]
    checks = []
    if sp.N:
        checks.append(rp.check_max("wprime_residual", float(np.max(sp.residuals)), 1e-6))
        lam = sp.eigenvalues
        probes = np.append(0.5 * (lam[:-1] + lam[1:]), lam[-1] + 0.5 * (lam[-1] - lam[-2]) if sp.N > 1
                           else lam[-1] + 1.0)
        cnt = eigen_count(problem, probes, tol)
        checks.append(rp.check_flag("oscillation_count_complete", bool(np.all(cnt == np.arange(1, sp.N + 1)))))
    summary = {"count": sp.N, "max_wprime_residual": float(np.max(sp.residuals)) if sp.N else 0.0,
               "tail_fit": sp.tail.to_dict() if sp.tail is not None else None,
               "max_relative_step": sp.meta.get("max_relative_step")}
    files.append(str(rp.write_json(out / f"eigs_{tag}.json", summary)))
    return checks, files, summary


def _gauge(args):
    if not args.gauge:
        return None
    try:
        return WeylGauge.from_dict(json.loads(Path(args.gauge).read_text(encoding="utf-8")))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read gauge file {args.gauge}: {exc}") from exc


def cmd_weyl(args, problem, tol, out):
    if not args.z_grid:
        raise UsageError("weyl needs --z-grid")
    zs = parse_z_grid(args.z_grid)
    gauge = _gauge(args)
    sp = eigenvalues(problem, count=args.count or 10, tol=tol)
    weyl = build_weyl(problem, sp, tol)
    M = np.full(zs.size, complex("nan"))
    lam = sp.eigenvalues
    rad = tol.pole_exclusion * (1.0 + np.abs(lam))
    ok = np.array([not np.any(np.abs(z - lam) < rad) for z in zs])
    if ok.any():
        M[ok] = weyl_eval(weyl, zs[ok], gauge, check=False)
    tag = _tag(problem)
    rows = [(z.real, z.imag, m.real, m.imag) for z, m in zip(zs, M)]
    files = [str(rp.write_csv(out / f"weyl_{tag}.csv", ["re_z", "im_z", "re_M", "im_M"], rows))]
    poles = []
    for k in range(1, min(sp.N, 5) + 1):
        res = residue_check(weyl, k, gauge)
        poles.append({"k": k, "lambda": float(lam[k - 1]), "gamma": float(sp.gammas[k - 1]),
                      "relative_residual": res})
    files.append(str(rp.write_json(out / f"weyl_poles_{tag}.json", {"sigma": weyl.sigma, "poles": poles,
                                                                    "gauge": None if gauge is None else gauge.to_dict()})))
    defect = weyl.defects["+1" if weyl.sigma == 1 else "-1"]
    checks = [rp.check_max("psi_chi_defect", defect, 1e-8)]
    if poles:
        checks.append(rp.check_max("residue_vs_gamma", max(p["relative_residual"] for p in poles), 1e-5))
    if args.dump_jets:
        files += _dump_jets(problem, zs[ok][:1] if ok.any() else [1j], 0, out, tol)
    summary = {"sigma": weyl.sigma, "psi_defect": defect, "points": int(zs.size), "skipped_near_poles": int((~ok).sum())}
    return checks, files, summary


def cmd_nentire(args, problem, tol, out):
    z = parse_complex(args.z) if args.z else -1.0 + 1.0j
    sp = eigenvalues(problem, count=args.count or 40, tol=tol)
    weyl = build_weyl(problem, sp, tol)
    rep = minimal_n_estimate(weyl, z, args.jmax, spectrum=sp)
    tag = _tag(problem)
    files = []
    for c in rep.classifications:
        p = out / f"nentire_ladder_{tag}_j{c.j}.csv"
        rp.write_csv(p, ["eps", "I"], zip(map(float, c.eps), map(float, c.I)))
        files.append(str(p))
    d = rep.to_dict()
    files.append(str(rp.write_json(out / f"nentire_{tag}.json", d)))
    checks = [
        rp.check_flag("no_marginal_verdict", all(c.verdict != "marginal" for c in rep.classifications)),
        rp.check_flag("integrable_order_found", rep.minimal_n is not None),
        rp.check_flag("threshold_direction", rep.minimal_n is not None and rep.minimal_n <= rep.threshold_n),
        rp.check_flag("monotone_in_j", rep.monotone),
    ]
    if rep.moment_n is not None:
        checks.append(rp.check_flag("moment_equivalence", rep.moment_n == rep.minimal_n))
    if args.dump_jets:
        files += _dump_jets(problem, [z], min(args.jmax, tol.jet_cap), out, tol)
    return checks, files, d


def cmd_verify(args, problem, tol, out):
    ident = args.identity
    z = parse_complex(args.z) if args.z else -1.0 + 0j
    w = parse_complex(args.w) if args.w else 0.5 + 0.25j
    j, k = args.j, args.k
    tag = _tag(problem)
    count = args.count or (200 if ident == "trace" else max(10, k))
    payload: dict
    if ident == "trace":
        sp = eigenvalues(problem, count=count, tol=tol)
        res = trace_identity(problem, sp, z, tol)
        payload = {"series": res.series, "integral": res.integral, "tail": res.tail, "residual": res.residual,
                   "abs_error": res.abs_error}
        checks = [rp.check_max("trace_abs_error", res.abs_error, 1e-4)]
        residual = res.abs_error
    elif ident == "kernel":
        E = build_E(problem, 0.0, tol)
        kf = complex(kernel_formula(E, [w], [z])[0])
        ki = complex(kernel_integral(problem, [w], [z], tol)[0])
        residual = abs(kf - ki) / max(abs(ki), 1e-300)
        payload = {"K_formula": kf, "K_integral": ki, "residual": residual}
        checks = [rp.check_max("kernel_route_difference", residual, 1e-6)]
    else:
        sp = eigenvalues(problem, count=count, tol=tol) if ident == "mf3" else None
        weyl = build_weyl(problem, sp, tol)
        if ident == "mf1":
            r = verify_mf1(weyl, w, z)
        elif ident == "mf2":
            r = verify_mf2(weyl, w, z, j)
        else:
            r = verify_mf3(weyl, k, z, j)
        payload = r.to_dict()
        residual = r.residual
        checks = [rp.check_max(f"{ident}_relative_residual", residual, 1e-5)] if r.applicable else []
    payload.update({"identity": ident, "z": z, "w": w, "j": j, "k": k})
    files = [str(rp.write_json(out / f"verify_{ident}_{tag}.json", payload))]
    if args.dump_jets:
        files += _dump_jets(problem, [z], j, out, tol)
    print(f"{ident}: residual {residual:.3e}" if math.isfinite(residual) else f"{ident}: not applicable")
    return checks, files, {"identity": ident, "residual": residual}


def cmd_cconds(args, problem, tol, out):
    if args.beta2 is None:
        raise UsageError("cconds needs --beta2")
    try:
        beta2 = parse_real(args.beta2)
    except ProblemError as exc:
        raise UsageError(str(exc)) from exc
    count = args.count or 200
    s1 = eigenvalues(problem, count=count, tol=tol)
    s2 = eigenvalues(problem.with_beta(beta2), count=count, tol=tol)
    pair = ExtensionPair(s1, s2)
    checks = [rp.check_flag("interlacing", pair.interlacing())]
    summary: dict = {"n": args.n, "beta2": beta2}
    if pair.interlacing():
        rep = c_conditions(pair, args.n, tol)
        summary.update(rep.to_dict())
        checks.append(rp.check_flag("c1_finite", math.isfinite(rep.c1_limit)))
        checks.append(rp.check_flag("c3_convergent", rep.c3_verdict == "convergent"))
    files = [str(rp.write_json(out / f"cconds_{_tag(problem)}.json", summary))]
    return checks, files, summary


def cmd_kernel(args, problem, tol, out):
    if not args.pairs:
        raise UsageError("kernel needs --pairs")
    try:
        w, z = _read_pairs(Path(args.pairs))
    except OSError as exc:
        raise UsageError(f"cannot read {args.pairs}: {exc}") from exc
    E = build_E(problem, 0.0, tol)
    kf = kernel_formula(E, w, z)
    ki = kernel_integral(problem, w, z, tol)
    rel = np.abs(kf - ki) / np.maximum(np.abs(ki), 1e-300)
    rows = [(a.real, a.imag, b.real, b.imag, repr(complex(i)), repr(complex(f)), float(r))
            for a, b, i, f, r in zip(w, z, ki, kf, rel)]
    files = [str(rp.write_csv(out / f"kernel_{_tag(problem)}.csv",
                              ["re_w", "im_w", "re_z", "im_z", "K_integral", "K_formula", "rel_diff"], rows))]
    mx = float(np.max(rel)) if rel.size else 0.0
    return [rp.check_max("kernel_route_difference", mx, 1e-6)], files, {"pairs": int(w.size), "max_rel_diff": mx}


COMMANDS = {"eigs": cmd_eigs, "weyl": cmd_weyl, "nentire": cmd_nentire, "verify": cmd_verify,
            "cconds": cmd_cconds, "kernel": cmd_kernel}


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        print(f"error: {run_dir} is not a directory", file=sys.stderr)
        return 1
    records = rp.load_records(run_dir)
    if not records:
        print(f"error: no run records in {run_dir}", file=sys.stderr)
        return 1
    text = rp.render_report(records)
    (run_dir / "report.md").write_text(text, encoding="utf-8")
    plots = rp.write_plot_data(records, run_dir)
    print(f"wrote {run_dir / 'report.md'} and {len(plots)} plot-data file(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="singweyl", description="Spectral diagnostics for perturbed Bessel operators.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--problem", required=True, help="problem JSON file or builtin:NAME")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--tol", help="JSON file with tolerance overrides")
        sp.add_argument("--dump-jets", action="store_true", help="write phi/theta/chi jets to CSV")
        sp.add_argument("--count", type=int, help="number of eigenvalues to compute")
        return sp

    e = common(sub.add_parser("eigs", help="eigenvalues and norming constants"))
    e.add_argument("--lmax", type=float)
    w = common(sub.add_parser("weyl", help="Weyl function on a grid"))
    w.add_argument("--z-grid", help="start:stop:num[:imag]")
    w.add_argument("--gauge", help="JSON file with gauge polynomials g, f")
    n = common(sub.add_parser("nentire", help="L2 classification of psi derivatives"))
    n.add_argument("--jmax", type=int, default=5)
    n.add_argument("--z")
    v = common(sub.add_parser("verify", help="check one integral identity"))
    v.add_argument("--identity", required=True, choices=["mf1", "mf2", "mf3", "trace", "kernel"])
    v.add_argument("--z")
    v.add_argument("--w")
    v.add_argument("--j", type=int, default=0)
    v.add_argument("--k", type=int, default=1)
    c = common(sub.add_parser("cconds", help="conditions C1-C3 for an extension pair"))
    c.add_argument("--beta2", help="boundary parameter of the second extension (accepts pi)")
    c.add_argument("--n", type=int, default=1)
    k = common(sub.add_parser("kernel", help="de Branges kernel by both routes"))
    k.add_argument("--pairs", help="CSV with columns re_w, im_w, re_z, im_z")
    r = sub.add_parser("report", help="Markdown summary of a run directory")
    r.add_argument("--run-dir", required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "report":
        return cmd_report(args)
    try:
        if args.problem.startswith("builtin:"):
            problem = builtin_problem(args.problem.split(":", 1)[1])
        else:
            problem = load_problem(Path(args.problem).read_text(encoding="utf-8"))
        tol = load_tolerances(args.tol) if args.tol else DEFAULT
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except (OSError, ProblemError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    params = {k: v for k, v in vars(args).items() if k not in ("command",)}
    t0 = time.perf_counter()
    try:
        checks, files, summary = COMMANDS[args.command](args, problem, tol, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        # a numerical stage could not deliver: report it as a failed check
        checks = [rp.check_flag(type(exc).__name__, False)]
        files, summary = [], {"error": str(exc)}
    rec = rp.RunRecord(problem.digest(), args.command, params, files, tol.to_dict(),
                       round(time.perf_counter() - t0, 3), [c.to_dict() for c in checks], summary)
    rp.append_record(out, rec)
    failed = [c for c in checks if not c.passed]
    for c in failed:
        print(f"FAIL {c.name}: value {c.value:.3e}, threshold {c.threshold:.3e}", file=sys.stderr)
    if failed:
        return 2
    print(f"{args.command}: all {len(checks)} check(s) passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
