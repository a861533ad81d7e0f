"""Command-line front end.

Every command prints a fixed-order key=value table (or CSV with
--format csv).  With --outdir the outputs are written to files together
with a `manifest` holding the resolved configuration and sha256 checksums.
Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys

import numpy as np

from . import asymptotics, bubble, fracop, greens, solver, special
from .fracop import format_float

COMMANDS = ("constants", "bubble-check", "greens", "solve", "continuation", "kernel", "pohozaev")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def read_config(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _common(p):
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--outdir", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fraclab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("constants", help="closed-form constants")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--s", type=float, default=0.25)
    p.add_argument("--q", type=float, default=5.0)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--radius", type=float, default=1.0)
    _common(p)

    p = sub.add_parser("bubble-check", help="identities of the entire-space bubble")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--s", type=float, default=0.25)
    _common(p)

    p = sub.add_parser("greens", help="ball Green function, Robin function and R constant")
    p.add_argument("--domain", choices=("ball", "interval"), default="ball")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--s", type=float, default=0.25)
    p.add_argument("--x0", type=float, nargs="+", default=None)
    p.add_argument("--samples", type=int, default=21)
    _common(p)

    for name in ("solve", "pohozaev"):
        p = sub.add_parser(name, help="constrained minimization" if name == "solve" else "Pohozaev identity")
        p.add_argument("--n", type=int, default=1)
        p.add_argument("--s", type=float, default=0.25)
        p.add_argument("--p", type=float, default=None)
        p.add_argument("--q", type=float, default=5.0)
        p.add_argument("--eps", type=float, default=0.3)
        p.add_argument("--domain", choices=fracop.KINDS, default="interval")
        p.add_argument("--radius", type=float, default=1.0)
        p.add_argument("--h", type=float, default=1 / 128)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iter", type=int, default=50000)
        if name == "solve":
            p.add_argument("--restarts", type=int, default=0)
        _common(p)

    p = sub.add_parser("continuation", help="eps continuation toward blow-up")
    p.add_argument("--s", type=float, default=0.25)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--q", type=float, default=5.0)
    p.add_argument("--eps0", type=float, default=0.5)
    p.add_argument("--ratio", type=float, default=0.7)
    p.add_argument("--steps", type=int, default=12)
    p.add_argument("--h", type=float, default=1 / 2048)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-9)
    _common(p)

    p = sub.add_parser("kernel", help="near-zero spectrum of the linearization at the bubble")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--s", type=float, default=0.25)
    p.add_argument("--half-width", type=float, default=24.0)
    p.add_argument("--h", type=float, default=1 / 32)
    p.add_argument("--zero-gap", type=float, default=0.1)
    _common(p)
    return parser


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(f"a command is required: one of {', '.join(COMMANDS)}")
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, val in cfg.items():
            if key not in known or key in ("help", "config"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            act = known[key]
            conv = act.type or str
            try:
                defaults[key] = [conv(t) for t in val.split()] if act.nargs == "+" else conv(val)
            except ValueError as exc:
                raise UsageError(f"bad value for {key}: {val!r}") from exc
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)  # explicit flags override the file
    return args


def _exponents(N, s, p, q, args=None) -> special.Exponents:
    if not 0 < s < 1:
        raise UsageError("s must lie in (0, 1)")
    if N < 1 or not N > 2 * s:
        raise UsageError("need a positive dimension with N > 2s")
    pc = (N + 2 * s) / (N - 2 * s)
    p = pc if p is None else p
    if p < pc * (1 - 1e-14):
        raise UsageError(f"p must be at least the critical value {pc!r}")
    if not q > p:
        raise UsageError(f"need q > p (got p={p!r}, q={q!r})")
    if args is not None and hasattr(args, "p"):
        args.p = p  # record the resolved value in the manifest
    return special.Exponents(N, s, p, q)


def _positive(**kw):
    for k, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise UsageError(f"{k} must be positive")


# ------------------------------------------------------------ commands
# Each returns (rows, tables, ok).  rows: ordered (key, value) pairs;
# tables: {filename: csv text}.


def cmd_constants(a):
    e = _exponents(a.n, a.s, a.p, a.q, a)
    _positive(radius=a.radius)
    c = special.closed_form_constants(e)
    rows = [("N", e.N), ("s", e.s), ("p", e.p), ("q", e.q),
            ("critical_power", e.critical_power)]
    if not e.is_critical:
        rows.append(("l_exponent", e.l_exponent))
    rows += [
            ("sphere_area", c.sphere_area), ("amplitude", c.amplitude),
            ("fundamental_coeff", c.fundamental_coeff), ("width", c.width),
            ("boundary_coeff", c.boundary_coeff),
            ("bubble_critical_mass", special.bubble_critical_mass(e.N, e.s)),
            ("sobolev_constant", special.sobolev_constant(e.N, e.s))]
    if e.is_critical and e.q * e.decay > e.N + 2 * e.s:
        R = greens.boundary_r_constant(np.zeros(e.N), greens.GreenKernelBall(e.N, e.s, a.radius))
        rows += [("r_constant", R), ("blowup_limit", c.blowup_limit(R)),
                 ("blowup_limit_profile_form", special.blowup_limit_from_profile(e, R))]
    return rows, {}, True


def cmd_bubble_check(a):
    N, s = a.n, a.s
    e = _exponents(N, s, None, (N + 2 * s) / (N - 2 * s) + 1)
    rng = np.random.default_rng(a.seed)
    std = bubble.BubbleProfile.standard(e)
    f = lambda x: bubble.eval_bubble(std, x)
    pts = rng.uniform(-5, 5, (100, N))
    pts = pts[:, 0] if N == 1 else pts
    kel = bubble.kelvin_transform(f, e)(pts)
    kelvin_err = float(np.max(np.abs(kel / f(pts) - 1)))
    lhs, rhs = bubble.identity_nov39(e)
    nov_err = abs(lhs - rhs) / abs(rhs)
    c = special.closed_form_constants(e)
    d = e.decay
    mass_q = bubble.radial_integral(lambda r: (c.amplitude * (1 + r * r) ** (-d / 2)) ** e.critical_power, N)
    mass_c = special.bubble_critical_mass(N, s)
    g0_q = bubble.radial_integral(lambda r: (1 + r * r / c.width) ** (-d * e.p / 2), N)
    z0 = float(bubble.eval_limit_profile(e, np.zeros(N)))
    checks = [
        ("kelvin_invariance", kelvin_err, kelvin_err <= 1e-12),
        ("identity_radial_forms", nov_err, nov_err <= 1e-8 and rhs < 0),
        ("critical_mass_quadrature", abs(mass_q / mass_c - 1), abs(mass_q / mass_c - 1) <= 1e-8),
        ("boundary_coeff_quadrature", abs(g0_q / c.boundary_coeff - 1), abs(g0_q / c.boundary_coeff - 1) <= 1e-8),
        ("limit_profile_at_origin", abs(z0 - 1), abs(z0 - 1) <= 1e-14),
    ]
    rows = [("N", N), ("s", s), ("identity_lhs", lhs), ("identity_rhs", rhs), ("critical_mass", mass_c)]
    for name, resid, ok in checks:
        rows += [(f"{name}.residual", resid), (f"{name}.status", "pass" if ok else "fail")]
    return rows, {}, all(ok for *_, ok in checks)


def cmd_greens(a):
    N = 1 if a.domain == "interval" else a.n
    _positive(radius=a.radius)
    if not (0 < a.s < 1 and N > 2 * a.s):
        raise UsageError("need 0 < s < 1 and N > 2s")
    k = greens.GreenKernelBall(N, a.s, a.radius)
    x0 = np.zeros(N) if a.x0 is None else np.asarray(a.x0, dtype=float)
    if x0.shape != (N,):
        raise UsageError(f"--x0 needs {N} coordinates")
    if np.linalg.norm(x0) >= a.radius:
        raise UsageError("--x0 must be interior")
    R = greens.boundary_r_constant(x0, k)
    # samples along the first axis, avoiding x0 itself
    t = a.radius * np.linspace(-1, 1, a.samples + 2)[1:-1]
    pts = np.zeros((len(t), N))
    pts[:, 0] = t
    pts = pts[np.linalg.norm(pts - x0, axis=1) > 1e-12]
    G = greens.green_ball(pts, x0, k)
    Rf = greens.robin_function(pts, k)
    lines = [f"# radius={_fmt(a.radius)} N={N} s={_fmt(a.s)} x0={' '.join(_fmt(v) for v in x0)} r_constant={_fmt(R)}",
             ",".join([f"x{i + 1}" for i in range(N)] + ["green", "robin"])]
    for x, g, r in zip(pts, G, Rf):
        lines.append(",".join([_fmt(v) for v in x] + [_fmt(g), _fmt(r)]))
    rows = [("N", N), ("s", a.s), ("radius", a.radius), ("r_constant", R),
            ("robin_at_x0", float(greens.robin_function(x0, k))),
            ("fundamental_coeff", k.fundamental_coeff)]
    return rows, {"greens.csv": "\n".join(lines) + "\n"}, True


def _solve_setup(a):
    e = _exponents(a.n, a.s, a.p, a.q, a)
    _positive(eps=a.eps, h=a.h, radius=a.radius)
    if a.n == 1 and a.domain not in ("interval", "box"):
        a.domain = "interval"
    try:
        dom = fracop.DiscreteDomain(a.domain, a.h, a.radius, a.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    tol = a.tol if a.tol is not None else (1e-7 if a.n == 1 else 1e-5)
    if tol <= 0 or a.max_iter < 1:
        raise UsageError("need tol > 0 and max-iter >= 1")
    return e, fracop.assemble(dom, e.s), tol


def cmd_solve(a):
    e, op, tol = _solve_setup(a)
    prob = solver.ManifoldProblem(op, e, a.eps)
    res = solver.minimize_manifold(prob, tol=tol, max_iter=a.max_iter)
    rows = [("N", e.N), ("s", e.s), ("p", e.p), ("q", e.q), ("eps", a.eps), ("h", op.domain.h),
            ("nodes", op.domain.size), ("lambda", res.lam), ("energy", res.energy),
            ("iterations", res.iterations), ("residual", res.residual),
            ("eps_effective", res.eps_effective), ("sup_u", float(np.max(res.u.values))),
            ("min_w", float(np.min(res.w.values)))]
    if a.restarts:
        rng = np.random.default_rng(a.seed)
        base = solver.bubble_init(prob)
        energies = []
        for _ in range(a.restarts):
            init = base * (1 + 0.2 * rng.standard_normal(base.shape))
            energies.append(solver.minimize_manifold(prob, np.abs(init), tol=tol, max_iter=a.max_iter).energy)
        rows.append(("restart_energy_spread", float(np.max(np.abs(np.array(energies) - res.energy)))))
    return rows, {"solution_u.csv": res.u.to_csv(), "solution_w.csv": res.w.to_csv()}, True


def cmd_pohozaev(a):
    if a.n != 1:
        raise UsageError("the Pohozaev check runs on intervals (--n 1)")
    e, op, tol = _solve_setup(a)
    if not e.is_critical:
        raise UsageError("the Pohozaev check uses the critical exponent")
    res = solver.minimize_manifold(solver.ManifoldProblem(op, e, a.eps), tol=tol, max_iter=a.max_iter)
    lhs, rhs = asymptotics.pohozaev_check(res.u, e, res.eps_effective)
    mism = abs(lhs - rhs) / abs(rhs)
    rows = [("eps", a.eps), ("eps_effective", res.eps_effective), ("lhs", lhs), ("rhs", rhs),
            ("relative_mismatch", mism), ("status", "pass" if mism <= 0.1 else "fail")]
    return rows, {}, mism <= 0.1


def cmd_continuation(a):
    e = _exponents(1, a.s, a.p, a.q, a)
    if not e.is_critical:
        raise UsageError("the blow-up study requires the critical exponent p = (N+2s)/(N-2s)")
    _positive(eps0=a.eps0, h=a.h, radius=a.radius, tol=a.tol)
    if not 0 < a.ratio < 1 or a.steps < 0:
        raise UsageError("need 0 < ratio < 1 and steps >= 0")
    op = fracop.assemble(fracop.DiscreteDomain("interval", a.h, a.radius), e.s)
    R = greens.boundary_r_constant([0.0], greens.GreenKernelBall(1, e.s, a.radius))
    recs, failure = asymptotics.blowup_study(op, e, asymptotics.geometric_schedule(a.eps0, a.ratio, a.steps))
    limit = special.blowup_limit(e, R)
    text = asymptotics.records_to_csv(recs)
    rows = [("records", len(recs)), ("blowup_limit", limit), ("r_constant", R),
            ("complete", failure is None)]
    if recs:
        rows.append(("final_ratio_to_limit", recs[-1].blowupProduct / limit))
    if failure:
        rows.append(("stopped", failure))
    return rows, {"continuation.csv": text}, True


def cmd_kernel(a):
    e = _exponents(a.n, a.s, None, (a.n + 2 * a.s) / (a.n - 2 * a.s) + 1)
    _positive(h=a.h, half_width=a.half_width, zero_gap=a.zero_gap)
    spec = solver.linearized_kernel(e, a.half_width, a.h, a.zero_gap)
    rows = [("near_zero_count", spec.near_zero_count), ("expected", e.N + 1),
            ("gap", spec.gap), ("threshold", spec.threshold)]
    rows += [(f"eigenvalue_{i}", v) for i, v in enumerate(spec.eigenvalues)]
    rows += [(f"cosine_mode_{i + 1}", c) for i, c in enumerate(spec.cosines)]
    rows += [(f"boundary_amplitude_{i}", b) for i, b in enumerate(spec.boundary_amplitude)]
    return rows, {}, True


DISPATCH = {"constants": cmd_constants, "bubble-check": cmd_bubble_check, "greens": cmd_greens,
            "solve": cmd_solve, "continuation": cmd_continuation, "kernel": cmd_kernel,
            "pohozaev": cmd_pohozaev}


def render(rows, fmt: str) -> str:
    if fmt == "csv":
        return "key,value\n" + "".join(f"{k},{_fmt(v)}\n" for k, v in rows)
    return "".join(f"{k}={_fmt(v)}\n" for k, v in rows)


def write_outputs(outdir: str, args, rows, tables, fmt: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    files = dict(tables)
    files["result.csv" if fmt == "csv" else "result.txt"] = render(rows, fmt)
    lines = [f"command={args.command}"]
    for key in sorted(vars(args)):
        if key in ("command", "outdir", "config"):
            continue
        val = getattr(args, key)
        val = " ".join(_fmt(v) for v in val) if isinstance(val, list) else _fmt(val)
        lines.append(f"{key}={val}")
    for name in sorted(files):
        data = files[name].encode("utf-8")
        with open(os.path.join(outdir, name), "wb") as fh:
            fh.write(data)
        lines.append(f"sha256.{name}={hashlib.sha256(data).hexdigest()}")
    with open(os.path.join(outdir, "manifest"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse(argv)
        rows, tables, ok = DISPATCH[args.command](args)
    except UsageError as exc:
        print(f"error=usage message={str(exc)!r}", file=sys.stderr)
        return 2
    except (solver.ConvergenceError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"error=numerical message={str(exc)!r}", file=sys.stderr)
        return 1
    sys.stdout.write(render(rows, args.format))
    if args.outdir:
        write_outputs(args.outdir, args, rows, tables, args.format)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
