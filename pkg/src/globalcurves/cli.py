"""Command-line front end.

    globalcurves run CONFIG [--jobs N] [--csv PATH] [--svg PATH] [--figure PATH] ...
    globalcurves profile CONFIG --at VALUE [--out PATH] [--figure PATH] ...

Exit codes: 0 success, 1 configuration error, 2 the sweep produced no
solution (first-point failure), 3 Newton failure while computing a profile.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from dataclasses import replace

from . import beam, harmonic, nonauto, plaplace, shootscale
from .config import ConfigError, RunConfig, load_config
from .expr import ExpressionError
from .model import Family, NewtonFailed, SolutionCurve, detect_folds
from .report import curve_branches, fmt, write_curve_csv, write_profile_csv, write_svg

log = logging.getLogger("globalcurves")

EXIT_OK, EXIT_CONFIG, EXIT_FIRST_POINT, EXIT_NEWTON = 0, 1, 2, 3

_AXES = {
    Family.HARMONIC_FORCED: ("xi", "mu"),
}


def _axes(family: Family) -> tuple[str, str]:
    return _AXES.get(family, ("lambda", "alpha = u(0)"))


def _abscissa(family: Family) -> str:
    return {Family.CLAMPED_BEAM: "x", Family.HARMONIC_FORCED: "x"}.get(family, "r")


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    tol = (
        args.tol_rel if getattr(args, "tol_rel", None) is not None else cfg.tol[0],
        args.tol_abs if getattr(args, "tol_abs", None) is not None else cfg.tol[1],
    )
    if not (tol[0] > 0 and tol[1] > 0):
        raise ConfigError("tolerances must be positive")
    options = dict(cfg.options)
    seed = dict(cfg.seed)
    if getattr(args, "mode", None):
        if cfg.family != Family.PLAPLACE_DIRICHLET:
            raise ConfigError("--mode applies to [plaplace] configs only")
        options["mode"] = args.mode
    if getattr(args, "seed_lambda", None) is not None:
        if cfg.family not in (Family.NONAUTONOMOUS_RADIAL, Family.CLAMPED_BEAM):
            raise ConfigError("--seed-lambda applies to [nonauto] and [beam] configs only")
        seed["lambda_init"] = args.seed_lambda
    return replace(cfg, tol=tol, options=options, seed=seed)


def _shoot_opts(cfg: RunConfig) -> dict:
    opts = {"tol": cfg.tol}
    for key in ("eps", "tend", "supercritical"):
        if key in cfg.options:
            opts[key] = cfg.options[key]
    return opts


def _beam_start(cfg: RunConfig, alpha: float):
    """User seed for the beam, completed from the small-alpha seed; None when no seed was given."""
    if "lambda_init" not in cfg.seed and "beta_init" not in cfg.seed:
        return None
    lam0, beta0 = cfg.seed.get("lambda_init"), cfg.seed.get("beta_init")
    if lam0 is None or beta0 is None:
        auto = beam.seed(alpha, cfg.problem.nonlinearity)
        lam0 = auto[0] if lam0 is None else lam0
        beta0 = auto[1] if beta0 is None else beta0
    return lam0, beta0


def compute_curve(cfg: RunConfig, jobs: int = 1) -> SolutionCurve:
    """Run the sweep described by ``cfg``; raises NewtonFailed when the first point fails."""
    start, step, count = cfg.grid
    p = cfg.problem
    jump = cfg.options.get("jump")
    fam = cfg.family
    if fam == Family.RADIAL_DIRICHLET:
        return shootscale.dirichlet_curve(p, start, step, count, jobs=jobs, jump=jump, **_shoot_opts(cfg))
    if fam == Family.RADIAL_NEUMANN:
        return shootscale.neumann_curve(p, start, step, count, jobs=jobs, jump=jump, **_shoot_opts(cfg))
    if fam == Family.PLAPLACE_DIRICHLET:
        opts = {"tol": cfg.tol}
        if "tend" in cfg.options:
            opts["tend"] = cfg.options["tend"]
        return plaplace.plaplace_curve(
            p, start, step, count, cfg.options.get("mode", "regularized"), cfg.options.get("h"), jobs=jobs, jump=jump, **opts
        )
    if jobs > 1:
        log.info("Newton continuation runs on a single worker; --jobs ignored")
    if fam == Family.NONAUTONOMOUS_RADIAL:
        opts = {"tol": cfg.tol}
        if "eps" in cfg.options:
            opts["eps"] = cfg.options["eps"]
        return nonauto.continue_in_alpha(p, start, step, count, cfg.seed.get("lambda_init"), jump=jump, **opts)
    if fam == Family.CLAMPED_BEAM:
        return beam.beam_curve(start, step, count, p.nonlinearity, _beam_start(cfg, start + step), jump=jump, tol=cfg.tol)
    if fam == Family.HARMONIC_FORCED:
        return harmonic.continue_in_xi(p, start, step, count, cfg.options.get("strategy", "warm"), jump=jump, tol=cfg.tol)
    raise ConfigError(f"unsupported family {fam}")


def _notes(curve: SolutionCurve, family: Family) -> list[str]:
    notes = list(curve.meta.get("notes", ()))
    if "note" in curve.meta:
        notes.append(curve.meta["note"])
    if family != Family.HARMONIC_FORCED:
        for fold in detect_folds(curve):
            notes.append(f"fold near alpha={fmt(fold.alpha)} lambda={fmt(fold.lam)}")
    return notes


def _status(curve: SolutionCurve) -> str:
    dropped = len(curve.meta.get("rejected", ())) + len(curve.meta.get("failed", ()))
    return f"ok: {len(curve)} points in {len(curve.branches)} branch(es); {dropped} grid point(s) without a solution"


@contextlib.contextmanager
def _open_out(path):
    if path is None or str(path) == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _render(cfg: RunConfig, curve: SolutionCurve, svg_path, figure_path):
    fam = cfg.family
    xlabel, ylabel = _axes(fam)
    branches = curve_branches(curve, lam_on_x=fam != Family.HARMONIC_FORCED)
    title = f"{fam.value}: f = {cfg.problem.nonlinearity.text}"
    if svg_path:
        with open(svg_path, "w") as fh:
            write_svg(branches, fh, xlabel, ylabel, title)
    if figure_path:
        from .plotting import plot_branches

        folds = []
        if fam != Family.HARMONIC_FORCED:
            folds = [(f.lam, f.alpha) for f in detect_folds(curve)]
        plot_branches(branches, figure_path, xlabel, ylabel, title, folds)


def cmd_run(cfg: RunConfig, args) -> int:
    csv_path = args.csv or cfg.outputs.get("csv")
    svg_path = args.svg or cfg.outputs.get("svg")
    figure_path = args.figure or cfg.outputs.get("figure")
    try:
        curve = compute_curve(cfg, args.jobs)
    except NewtonFailed as exc:
        empty = SolutionCurve((), (), cfg.problem, {})
        with _open_out(csv_path) as out:
            write_curve_csv(empty, cfg.family, out, status=f"failed at the first grid point: {exc}")
        log.error("first grid point failed: %s", exc)
        return EXIT_FIRST_POINT
    if len(curve) == 0:
        with _open_out(csv_path) as out:
            write_curve_csv(curve, cfg.family, out, status="failed: no grid point produced a solution")
        log.error("no grid point produced a solution")
        return EXIT_FIRST_POINT
    with _open_out(csv_path) as out:
        write_curve_csv(curve, cfg.family, out, status=_status(curve), notes=_notes(curve, cfg.family))
    _render(cfg, curve, svg_path, figure_path)
    return EXIT_OK


def _grid_before(cfg: RunConfig, target: float) -> int:
    start, step, count = cfg.grid
    return sum(1 for i in range(1, count + 1) if start + i * step < target)


def compute_profile(cfg: RunConfig, at: float, npts: int = 401):
    """``(x, u, header)`` for the solution with parameter value ``at``; raises NewtonFailed."""
    fam = cfg.family
    p = cfg.problem
    start, step, _ = cfg.grid
    if fam in (Family.RADIAL_DIRICHLET, Family.RADIAL_NEUMANN):
        r, u, lam = shootscale.profile(p, at, npts, **_shoot_opts(cfg))
        return r, u, {"alpha": at, "lambda": lam}
    if fam == Family.PLAPLACE_DIRICHLET:
        kw = {"tol": cfg.tol}
        if "h" in cfg.options:
            kw["h"] = cfg.options["h"]
        r, u, lam = plaplace.profile(p, at, npts, cfg.options.get("mode", "regularized"), **kw)
        return r, u, {"alpha": at, "lambda": lam}
    m = _grid_before(cfg, at)
    if fam == Family.NONAUTONOMOUS_RADIAL:
        guess = cfg.seed.get("lambda_init")
        if m:
            curve = nonauto.continue_in_alpha(p, start, step, m, guess, tol=cfg.tol)
            guess = curve.points[-1].lam
        elif guess is None:
            guess = nonauto.autonomous_guess(p, at)
            if guess is None:
                raise ConfigError("no starting lambda available; pass --seed-lambda")
        r, u, lam, report = nonauto.profile(p, at, guess, npts, tol=cfg.tol)
        return r, u, {"alpha": at, "lambda": lam, "newton_steps": report.steps}
    if fam == Family.CLAMPED_BEAM:
        f = p.nonlinearity
        st = _beam_start(cfg, start + step if m else at)
        if m:
            curve = beam.beam_curve(start, step, m, f, st, tol=cfg.tol)
            last = curve.points[-1]
            st = (last.lam, last.beta)
        elif st is None:
            st = beam.seed(at, f)
        x, u, state = beam.profile(at, st, f, npts, tol=cfg.tol)
        return x, u, {"alpha": at, "lambda": state.lam, "beta": state.beta}
    if fam == Family.HARMONIC_FORCED:
        strategy = cfg.options.get("strategy", "warm")
        warm = None
        if m and strategy == "warm":
            curve = harmonic.continue_in_xi(p, start, step, m, strategy, tol=cfg.tol)
            warm = curve.meta["solutions"][-1]
        x, u, sol = harmonic.profile(p, at, warm, npts, strategy)
        return x, u, {"xi": at, "mu": sol.mu, "uprime0": sol.uprime0}
    raise ConfigError(f"unsupported family {fam}")


def cmd_profile(cfg: RunConfig, args) -> int:
    try:
        x, u, header = compute_profile(cfg, args.at)
    except NewtonFailed as exc:
        log.error("Newton failed: %s", exc)
        return EXIT_NEWTON
    except ValueError as exc:
        # no root for the requested alpha (shooting families)
        log.error("%s", exc)
        return EXIT_FIRST_POINT
    with _open_out(args.out) as out:
        write_profile_csv(x, u, out, names=(_abscissa(cfg.family), "u"), header=header)
    figure_path = args.figure
    if figure_path:
        from .plotting import plot_profile

        title = ", ".join(f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {v}" for k, v in header.items())
        plot_profile(x, u, figure_path, _abscissa(cfg.family), title)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="globalcurves", description="Global solution curves by continuation in a global parameter.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="INI problem configuration")
        sp.add_argument("--tol-rel", type=float, help="integrator relative tolerance")
        sp.add_argument("--tol-abs", type=float, help="integrator absolute tolerance")
        sp.add_argument("--seed-lambda", type=float, help="starting lambda for Newton continuation")
        sp.add_argument("--mode", choices=("naive", "regularized"), help="p-Laplace shooting mode")
        sp.add_argument("--figure", help="write a matplotlib PNG here")

    run = sub.add_parser("run", help="compute a solution curve and write CSV (and optional SVG/PNG)")
    common(run)
    run.add_argument("--jobs", type=int, default=1, help="worker processes for shoot-and-scale sweeps")
    run.add_argument("--csv", help="CSV output path (default: [output] csv, else stdout)")
    run.add_argument("--svg", help="SVG output path")

    prof = sub.add_parser("profile", help="write the solution profile at one parameter value")
    common(prof)
    prof.add_argument("--at", type=float, required=True, help="alpha (radial, beam) or xi (harmonic)")
    prof.add_argument("--out", help="CSV output path (default: stdout)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        if args.command == "run" and args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.command == "run":
            return cmd_run(cfg, args)
        return cmd_profile(cfg, args)
    except (ConfigError, ExpressionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
