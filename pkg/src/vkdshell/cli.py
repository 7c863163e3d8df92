"""Command-line driver.

Exit status is 0 on success, 2 on invalid input and 3 when a solver fails; the
error name is printed on stderr as ``error: <Name>: <message>``.
"""

from __future__ import annotations

import os

_threads = os.environ.get("VKD_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import io as vio  # noqa: E402
from . import pipelines as pl  # noqa: E402
from .descent import FlowConfig, lagrange_load, sdm_run  # noqa: E402
from .errors import SolverError, ValidationError, VkdError  # noqa: E402
from .mountainpass import MpConfig, cmpa_run, init_path, mpa_run  # noqa: E402
from .newton import continuation_run, newton_fixed_load, newton_fixed_shortening  # noqa: E402
from .seeds import SEED_CATALOG, multi_bump  # noqa: E402

log = logging.getLogger("vkdshell")

COMMANDS = (
    "sdm",
    "mpa",
    "csdm",
    "cmpa",
    "newton-lambda",
    "newton-s",
    "continue",
    "study-bias",
    "study-convergence",
    "study-domain",
)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vkdshell", description="Buckling states of an axially compressed cylinder.")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("grid")
    g.add_argument("--a", type=float, default=100.0, help="half-length in x")
    g.add_argument("--b", type=float, default=100.0, help="half-length in y")
    g.add_argument("--dx", type=float, default=0.5)
    g.add_argument("--dy", type=float, default=None)
    g.add_argument("--domain", choices=("quarter", "full"), default="quarter")
    g.add_argument("--scheme", choices=("left", "right", "spectral"), default="left")
    m = common.add_argument_group("method")
    m.add_argument("--lambda", dest="lam", type=float, default=None)
    m.add_argument("--C", type=float, default=None, help="shortening level")
    m.add_argument("--tol", type=float, default=None)
    m.add_argument("--max-iter", type=int, default=None)
    m.add_argument("--seed", default="single-peak", help="seed name (see --seed-file)")
    m.add_argument("--seed-file", type=Path, default=None, help="JSON catalog {name: [[amp, radius, [cx, cy]], ...]}")
    m.add_argument("--amplitude", type=float, default=None)
    m.add_argument("--radius", type=float, default=None)
    m.add_argument("--p", type=int, default=40, help="path segments")
    m.add_argument("--step", type=float, default=0.1, help="deformation step")
    m.add_argument("--redistribute-every", type=int, default=0)
    m.add_argument("--w1", type=Path, default=None)
    m.add_argument("--w2", type=Path, default=None)
    m.add_argument("--start", type=Path, default=None, help="starting field file")
    m.add_argument("--no-polish", action="store_true", help="skip the Newton refinement")
    m.add_argument("--s-max", type=float, default=10.0)
    m.add_argument("--ds", type=float, default=0.5)
    m.add_argument("--theta", type=float, default=0.5)
    m.add_argument("--direction", type=int, choices=(-1, 1), default=-1)
    m.add_argument("--steps", type=float, nargs="+", default=[0.5, 0.4, 0.3], help="mesh widths for study-convergence")
    o = common.add_argument_group("output")
    o.add_argument("--out", type=Path, default=Path("."))
    o.add_argument("-v", "--verbose", action="count", default=0)

    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


# -- helpers -----------------------------------------------------------------------


def _problem(args) -> pl.ProblemConfig:
    return pl.ProblemConfig(args.a, args.b, args.dx, args.dy, args.domain, args.scheme)


def _need(args, attr, flag):
    v = getattr(args, attr)
    if v is None:
        raise ValidationError(f"{flag} is required for '{args.command}'")
    return v


def _lam(args):
    lam = _need(args, "lam", "--lambda")
    if not 0.0 < lam < 2.0:
        raise ValidationError(f"--lambda must lie in (0, 2), got {lam}")
    return lam


def _C(args):
    C = _need(args, "C", "--C")
    if not C > 0:
        raise ValidationError(f"--C must be positive, got {C}")
    return C


def _file(path, flag):
    if path is None:
        raise ValidationError(f"{flag} is required")
    if not Path(path).is_file():
        raise ValidationError(f"{flag}: no such file {path}")
    return path


def _seed_field(args, grid, default_amp, default_rad):
    amp = args.amplitude if args.amplitude is not None else default_amp
    rad = args.radius if args.radius is not None else default_rad
    catalog = dict(SEED_CATALOG)
    if args.seed_file is not None:
        with open(_file(args.seed_file, "--seed-file")) as fh:
            catalog.update(json.load(fh))
    if args.seed == "single-peak" and args.seed_file is None:
        return pl.SeedConfig(amp, rad).field(grid)
    if args.seed not in catalog:
        raise ValidationError(f"unknown seed {args.seed!r}; known: {sorted(catalog)}")
    # catalog amplitudes are relative; an explicit --radius overrides every entry
    return multi_bump(grid, [(a * amp, rad if args.radius is not None else r, tuple(c)) for a, r, c in catalog[args.seed]])


def _flow(args, tol):
    return FlowConfig(tol=args.tol or tol, max_iter=args.max_iter or 200_000)


def _mp(args):
    return MpConfig(p=args.p, step=args.step, tol=args.tol or 1e-6, max_deform=args.max_iter or 20_000, redistribute_every=args.redistribute_every)


def _summary(cp, extra=""):
    f = cp.functionals
    line = (
        f"method={cp.method} status={cp.status} lambda={f.lam!r} S={f.S!r} E={f.E!r} F={f.F!r} "
        f"norm_X_sq={cp.norm_X_sq!r} iterations={cp.iterations} residual={cp.residual:.3e}"
    )
    print(line + extra)


def _write_history(out: Path, name, history):
    rows = [(h[0], h[1], h[2]) if isinstance(h, tuple) else (i, h, h) for i, h in enumerate(history)]
    vio.write_csv(out / f"{name}_iterations.csv", ("iteration", "objective", "grad_norm"), rows)


def _finish(args, ctx, cp, histories):
    out = args.out
    vio.save_field(cp.w, out / f"{args.command}.field", ctx.grid)
    vio.save_field(cp.phi, out / f"{args.command}_phi.field", ctx.grid)
    for name, h in histories.items():
        _write_history(out, name, h)
    _summary(cp)


def _critical_from_flow(ctx, res, method):
    from .mountainpass import CriticalPoint

    st = ctx.state(res.w, res.lam)
    return CriticalPoint(res.w, st.phi, res.lam, res.functionals, ctx.norm_X_squared(res.w), method, res.iterations, res.grad_norm, res.status.value, res.history)


def _polish_lambda(args, ctx, cp, hist):
    if args.no_polish or not pl.newton_capable(ctx):
        return cp
    try:
        n = newton_fixed_load(cp.w, cp.phi, cp.lam, ctx)
    except SolverError as exc:
        log.warning("Newton polish failed: %s", exc)
        return cp
    hist["newton"] = n.history
    return n


def _polish_S(args, ctx, cp, C, hist):
    if args.no_polish or not pl.newton_capable(ctx):
        return cp
    try:
        n = newton_fixed_shortening(cp.w, cp.phi, cp.lam, C, ctx)
    except SolverError as exc:
        log.warning("fixed-S Newton polish failed: %s", exc)
        return cp
    hist["newton"] = n.history
    return n


# -- commands ----------------------------------------------------------------------


def cmd_sdm(args):
    lam = _lam(args)
    ctx = _problem(args).context()
    w0 = _seed_field(args, ctx.grid, 8.0, 5.0)
    res = sdm_run(w0, lam, _flow(args, 1e-6), ctx)
    cp = _critical_from_flow(ctx, res, "SDM")
    _finish(args, ctx, cp, {"sdm": res.history})


def cmd_mpa(args):
    lam = _lam(args)
    ctx = _problem(args).context()
    hist = {}
    if args.w2 is not None:
        w2 = vio.load_field(_file(args.w2, "--w2"), ctx.grid)
    else:
        amp = args.amplitude if args.amplitude is not None else 8.0
        rad = args.radius if args.radius is not None else 5.0
        basin = pl.basin_point(ctx, lam, pl.SeedConfig(amp, rad))
        hist["sdm"] = basin.history
        w2 = basin.w
        vio.save_field(w2, args.out / "mpa_w2.field", ctx.grid)
    w1 = np.zeros(ctx.grid.size) if args.w1 is None else vio.load_field(_file(args.w1, "--w1"), ctx.grid)
    cfg = _mp(args)
    cp = mpa_run(init_path(w1, w2, cfg.p, ctx, lam=lam), lam, cfg, ctx)
    hist["mpa"] = [(h[0], h[1], h[2]) for h in cp.history]
    cp = _polish_lambda(args, ctx, cp, hist)
    _finish(args, ctx, cp, hist)


def cmd_csdm(args):
    C = _C(args)
    ctx = _problem(args).context()
    w0 = _seed_field(args, ctx.grid, 1.0, 10.0)
    hist = {}
    cp = pl.constrained_minimizer(ctx, C, w0, _flow(args, 1e-3), polish=False)
    hist["csdm"] = cp.history
    cp = _polish_S(args, ctx, cp, C, hist)
    _finish(args, ctx, cp, hist)


def cmd_cmpa(args):
    C = _C(args)
    ctx = _problem(args).context()
    w1 = vio.load_field(_file(args.w1, "--w1"), ctx.grid)
    w2 = vio.load_field(_file(args.w2, "--w2"), ctx.grid)
    cfg = _mp(args)
    cp = cmpa_run(init_path(w1, w2, cfg.p, ctx, C=C), C, cfg, ctx)
    hist = {"cmpa": [(h[0], h[1], h[2]) for h in cp.history]}
    cp = _polish_S(args, ctx, cp, C, hist)
    _finish(args, ctx, cp, hist)


def cmd_newton_lambda(args):
    lam = _lam(args)
    ctx = _problem(args).context()
    w = vio.load_field(_file(args.start, "--start"), ctx.grid)
    cp = newton_fixed_load(w, None, lam, ctx, tol=args.tol or 1e-10, max_iter=args.max_iter or 30)
    _finish(args, ctx, cp, {"newton": cp.history})


def cmd_newton_s(args):
    C = _C(args)
    ctx = _problem(args).context()
    w = vio.load_field(_file(args.start, "--start"), ctx.grid)
    lam0 = args.lam if args.lam is not None else lagrange_load(w, ctx)
    cp = newton_fixed_shortening(w, None, lam0, C, ctx, tol=args.tol or 1e-10, max_iter=args.max_iter or 30)
    _finish(args, ctx, cp, {"newton": cp.history})


def cmd_continue(args):
    lam = _lam(args)
    ctx = _problem(args).context()
    w = vio.load_field(_file(args.start, "--start"), ctx.grid)
    start = newton_fixed_load(w, None, lam, ctx)
    branch = continuation_run(start, args.s_max, args.ds, ctx, theta=args.theta, direction=args.direction)
    vio.write_branch(args.out / "branch.csv", branch)
    k = pl.find_fold(branch)
    fold = f" fold_lambda={branch[k].lam!r}" if k is not None else ""
    print(f"points={len(branch)} s_end={branch[-1].s!r} lambda_end={branch[-1].lam!r}{fold}")
    if branch.error is not None:
        print(f"error: {branch.error.name}: {branch.error}", file=sys.stderr)
        return 3
    return 0


def cmd_study_bias(args):
    lam = args.lam or 1.4
    rows, profiles = pl.study_bias(args.a, args.b, args.dx, lam, mp=_mp(args), polish=not args.no_polish, progress=lambda r: print(*r.row(), sep=","))
    vio.write_table(args.out / "bias.csv", [r.row() for r in rows], ("configuration", "lambda", "S", "E", "F"))
    for label, (y, p) in profiles.items():
        vio.write_csv(args.out / f"profile_{label.replace('/', '_')}.csv", ("y", "w"), zip(y, p))


def cmd_study_convergence(args):
    lam = args.lam or 1.4
    rows = pl.study_convergence(args.a, args.b, tuple(args.steps), lam, mp=_mp(args), polish=not args.no_polish, progress=print)
    cols = ("dx", "diff_left", "diff_right", "S_left", "S_right", "S_spectral")
    vio.write_table(args.out / "convergence.csv", [[r[c] for c in cols] for r in rows], cols)


def cmd_study_domain(args):
    lam = args.lam or 1.4
    rows = pl.study_domain(dx=args.dx, lam=lam, scheme=args.scheme, mp=_mp(args), polish=not args.no_polish, progress=print)
    cols = ("a", "b", "E", "S", "rel_xx", "rel_yy", "ref_xx", "ref_yy")
    vio.write_table(args.out / "domain.csv", [[r[c] for c in cols] for r in rows], cols)


HANDLERS = {
    "sdm": cmd_sdm,
    "mpa": cmd_mpa,
    "csdm": cmd_csdm,
    "cmpa": cmd_cmpa,
    "newton-lambda": cmd_newton_lambda,
    "newton-s": cmd_newton_s,
    "continue": cmd_continue,
    "study-bias": cmd_study_bias,
    "study-convergence": cmd_study_convergence,
    "study-domain": cmd_study_domain,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](args) or 0
    except ValidationError as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return 3
    except VkdError as exc:  # pragma: no cover - every concrete error is one of the above
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
