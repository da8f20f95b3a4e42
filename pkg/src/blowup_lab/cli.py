"""Command line entry point: ``blowup-lab <command> ...``.

Every command writes one CSV whose first line is ``# manifest: {...}``
(the resolved parameters and the package version, no timestamps) followed
by a header row.  The same manifest is written next to the CSV as
``<out>.manifest.json``.  Exit status: 0 success, 1 invalid input or failed
validation, 2 numerical fault, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import InvalidProfileError, NumericalFault

EXIT_OK, EXIT_INVALID, EXIT_FAULT, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# inputs

def parse_grid(text: str, scale: str = "log") -> np.ndarray:
    """``a:b:n`` as ``n`` points from ``a`` to ``b`` (geometric for ``log``)."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise UsageError(f"grid {text!r} is not of the form a:b:n") from None
    if n < 1:
        raise UsageError("grid needs at least one point")
    if scale == "log":
        if a <= 0 or b <= 0:
            raise UsageError("log grids need positive end points")
        return np.geomspace(a, b, n)
    return np.linspace(a, b, n)


def read_profile_file(path: str) -> dict:
    """``key=value`` lines (``kind``, ``coeffs``, ``rho_m_hint``); ``#`` starts a comment."""
    spec = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidProfileError(f"profile line without '=': {line!r}")
            key, value = (x.strip() for x in line.split("=", 1))
            spec[key.lower()] = value
    return spec


def load_profile(name: str):
    """``sphere`` or a profile description file; returns ``(surface, description)``."""
    from .surface import make_from_series, make_sphere

    if name == "sphere":
        return make_sphere(), {"kind": "sphere"}
    if not os.path.exists(name):
        raise InvalidProfileError(f"profile file {name!r} not found")
    spec = read_profile_file(name)
    kind = spec.get("kind", "series")
    if kind == "sphere":
        return make_sphere(), {"kind": "sphere"}
    if kind != "series":
        raise InvalidProfileError(f"unknown profile kind {kind!r}")
    try:
        coeffs = [float(c) for c in spec["coeffs"].split(",") if c.strip()]
        hint = float(spec.get("rho_m_hint", "3.0"))
    except (KeyError, ValueError) as exc:
        raise InvalidProfileError(f"bad series profile: {exc}") from None
    if len(coeffs) < 2:
        raise InvalidProfileError("a series profile needs at least two coefficients")
    return make_from_series(coeffs, hint), {"kind": "series", "coeffs": coeffs, "rho_m_hint": hint}


def read_function_csv(path: str):
    """Columns ``r, f`` and optionally ``weight``; comment lines start with ``#``."""
    with open(path) as fh:
        rows = [line for line in fh if line.strip() and not line.startswith("#")]
    reader = csv.DictReader(rows)
    data = {k: [] for k in reader.fieldnames or []}
    for row in reader:
        for k in data:
            data[k].append(float(row[k]))
    if "r" not in data or "f" not in data:
        raise InvalidProfileError("input CSV needs columns r and f")
    r = np.asarray(data["r"])
    f = np.asarray(data["f"])
    if "weight" in data:
        w = np.asarray(data["weight"])
    else:
        if np.any(np.diff(r) <= 0):
            raise InvalidProfileError("r must be increasing")
        w = np.zeros_like(r)
        dr = np.diff(r)
        w[:-1] += 0.5 * dr
        w[1:] += 0.5 * dr
    return r, f, w


# output

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path: str, manifest: dict, header, rows) -> None:
    buf = io.StringIO()
    buf.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    text = buf.getvalue()
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)
    with open(path + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")


def base_manifest(args, command: str, **resolved) -> dict:
    m = {"program": "blowup-lab", "version": __version__, "command": command,
         "threads": args.threads}
    m.update(resolved)
    return m


def _potential(args):
    from .harmonic_map import solve_harmonic_map
    from .spectral import Potential

    if args.free:
        return Potential.free(), {"kind": "free"}
    if args.profile is None:
        raise UsageError("--profile or --free is required")
    surface, desc = load_profile(args.profile)
    return Potential(solve_harmonic_map(surface)), desc


def _need_profile(args):
    if args.profile is None:
        raise UsageError("--profile is required")
    return load_profile(args.profile)


# commands

def cmd_surface_validate(args) -> int:
    from .surface import validate

    surface, desc = _need_profile(args)
    rep = validate(surface, args.samples)
    m = base_manifest(args, "surface validate", profile=desc, samples=args.samples)
    write_csv(args.out, m, ["assumption", "status", "worst_rho", "worst_value"], rep.as_rows())
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_harmonic_map(args) -> int:
    from .harmonic_map import solve_harmonic_map

    surface, desc = _need_profile(args)
    hm = solve_harmonic_map(surface, s_min=args.s_min, s_max=args.s_max, tol=args.tol)
    r = parse_grid(args.r_grid, "log")
    rows = zip(r, hm.eval_Q(r), hm.eval_Qprime(r), hm.eval_Qsecond(r))
    m = base_manifest(args, "harmonic-map", profile=desc, r_grid=args.r_grid, s_min=args.s_min,
                      s_max=args.s_max, tol=args.tol, Q0_coeff=hm.A0, Qinf_coeff=hm.B0)
    write_csv(args.out, m, ["r", "Q", "Qprime", "Qsecond"], rows)
    return EXIT_OK


def cmd_profile_errors(args) -> int:
    from .harmonic_map import solve_harmonic_map
    from .profile import BlowupFrame, solve_corrector, sup_errors

    surface, desc = _need_profile(args)
    hm = solve_harmonic_map(surface)
    frame = BlowupFrame(args.nu)
    corr = solve_corrector(frame, hm)
    rows = []
    for t in parse_grid(args.t_grid, args.scale):
        e0, e1 = sup_errors(frame, hm, corr, float(t))
        rows.append((t, e0, e1, e1 / e0))
    m = base_manifest(args, "profile errors", profile=desc, nu=args.nu, t_grid=args.t_grid,
                      scale=args.scale, r_fraction=0.5)
    write_csv(args.out, m, ["t", "sup_e0", "sup_e1", "ratio"], rows)
    return EXIT_OK


def cmd_profile_local_energy(args) -> int:
    from .harmonic_map import solve_harmonic_map
    from .profile import BlowupFrame, local_energy_of_profile

    surface, desc = _need_profile(args)
    hm = solve_harmonic_map(surface)
    frame = BlowupFrame(args.nu)
    EQ = surface.energy_of_harmonic_map()
    rows = [(t, local_energy_of_profile(frame, hm, float(t)), EQ)
            for t in parse_grid(args.t_grid, args.scale)]
    m = base_manifest(args, "profile local-energy", profile=desc, nu=args.nu, t_grid=args.t_grid,
                      scale=args.scale)
    write_csv(args.out, m, ["t", "Eloc_u0", "E_Q"], rows)
    return EXIT_OK


def cmd_spectral_measure(args) -> int:
    from .spectral.measure import build_spectral_data

    pot, desc = _potential(args)
    xi = parse_grid(args.xi_grid, args.scale)
    data = build_spectral_data(pot, xi, j0=args.j0, q_min=args.q_min)
    m = base_manifest(args, "spectral measure", profile=desc, xi_grid=args.xi_grid,
                      scale=args.scale, j0=args.j0, q_min=args.q_min,
                      density="1/(4 pi |a|^2)")
    write_csv(args.out, m, ["xi", "re_a", "im_a", "rho"],
              zip(data.xi, data.a.real, data.a.imag, data.rho))
    return EXIT_OK


def cmd_spectral_basis(args) -> int:
    from .spectral.measure import build_spectral_data

    pot, desc = _potential(args)
    if not args.xi > 0:
        raise UsageError("--xi must be positive")
    data = build_spectral_data(pot, np.array([args.xi]))
    r = parse_grid(args.r_grid, args.scale)
    phi, dphi = data.phi(0, r)
    m = base_manifest(args, "spectral basis", profile=desc, xi=args.xi, r_grid=args.r_grid,
                      scale=args.scale, a=[data.a[0].real, data.a[0].imag], rho=data.rho[0])
    write_csv(args.out, m, ["r", "phi", "dphi"], zip(r, phi, dphi))
    return EXIT_OK


def cmd_spectral_transform(args) -> int:
    from .spectral.transform import build_transform_data, forward_transform, plancherel_norm

    pot, desc = _potential(args)
    r, f, w = read_function_csv(args.inp)
    data = build_transform_data(pot, args.xi_min, args.xi_max)
    t = forward_transform(data, r, f, w)
    norm = float(np.dot(w, f * f))
    defect = abs(plancherel_norm(data, t) - norm) / norm if norm > 0 else 0.0
    if defect > args.tol:
        raise NumericalFault(f"Plancherel defect {defect:.3e} exceeds {args.tol:g}")
    m = base_manifest(args, "spectral transform", profile=desc, input=os.path.basename(args.inp),
                      xi_min=args.xi_min, xi_max=args.xi_max, fhat_at_zero=t.fhat0,
                      plancherel_defect=defect)
    write_csv(args.out, m, ["xi", "weight", "rho", "fhat"], zip(data.xi, data.weights, data.rho, t.fhat))
    return EXIT_OK


def cmd_transference_kernel(args) -> int:
    from .spectral.measure import build_spectral_data
    from .transference import build_kernel_table

    pot, desc = _potential(args)
    xi = parse_grid(args.grid, args.scale)
    data = build_spectral_data(pot, xi)
    table = build_kernel_table(data, tol=args.tol)
    rows = []
    n = xi.size
    for i in range(n):
        for j in range(n):
            try:
                k0 = table.K0(i, j)
            except ValueError:
                k0 = math.nan
            diag = table.diag[i] if i == j else math.nan
            rows.append((xi[i], xi[j], table.F[i, j], k0, diag))
    m = base_manifest(args, "transference kernel", profile=desc, grid=args.grid, scale=args.scale,
                      tol=args.tol, R_cut=table.R_cut, exclusion_spacings=table.exclusion,
                      K0_convention="K0(eta,xi) = rho(xi) F(xi,eta) / (eta - xi)")
    write_csv(args.out, m, ["xi", "eta", "F", "K0_or_nan", "diag_if_diagonal"], rows)
    return EXIT_OK


def cmd_evolve(args) -> int:
    from .evolution import run_blowup_experiment
    from .harmonic_map import solve_harmonic_map

    surface, desc = _need_profile(args)
    hm = solve_harmonic_map(surface)
    res = run_blowup_experiment(hm, nu=args.nu, t_start=args.t_start, t_end=args.t_end, n=args.n,
                                cfl=args.cfl, control=args.control, amplitude=args.amplitude)
    m = base_manifest(args, "evolve", profile=desc, complete=res.complete, note=res.note,
                      E_Q=res.E_Q, **res.params)
    write_csv(args.out, m, ["t", "E_total", "Eloc_cone", "sup_u", "min_dt_used"],
              [(r.t, r.E_total, r.Eloc_cone, r.sup_u, r.min_dt_used) for r in res.rows])
    return EXIT_OK if res.complete else EXIT_FAULT


# parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: $BLOWUP_LAB_THREADS or 1)")
    common.add_argument("--out", default="-", help="output CSV (default: stdout)")

    prof = _Parser(add_help=False)
    prof.add_argument("--profile", help="'sphere' or a profile description file")

    spec = _Parser(add_help=False)
    spec.add_argument("--profile", help="'sphere' or a profile description file")
    spec.add_argument("--free", action="store_true", help="use the free operator (V = 0)")

    scale = _Parser(add_help=False)
    scale.add_argument("--scale", choices=("log", "linear"), default="log",
                       help="spacing of a:b:n grids")

    p = _Parser(prog="blowup-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("surface", help="surface profiles")
    ss = s.add_subparsers(dest="action", parser_class=_Parser)
    ss.required = True
    v = ss.add_parser("validate", parents=[common, prof])
    v.add_argument("--samples", type=int, default=1000)
    v.set_defaults(func=cmd_surface_validate)

    h = sub.add_parser("harmonic-map", parents=[common, prof])
    h.add_argument("--r-grid", default="1e-3:1e3:121")
    h.add_argument("--s-min", type=float, default=-14.0)
    h.add_argument("--s-max", type=float, default=14.0)
    h.add_argument("--tol", type=float, default=1e-12)
    h.set_defaults(func=cmd_harmonic_map)

    pr = sub.add_parser("profile", help="blow-up profile diagnostics")
    ps = pr.add_subparsers(dest="action", parser_class=_Parser)
    ps.required = True
    e = ps.add_parser("errors", parents=[common, prof, scale])
    e.add_argument("--nu", type=float, required=True)
    e.add_argument("--t-grid", default="1e-3:1e-1:9")
    e.set_defaults(func=cmd_profile_errors)
    le = ps.add_parser("local-energy", parents=[common, prof, scale])
    le.add_argument("--nu", type=float, required=True)
    le.add_argument("--t-grid", default="1e-3:1:7")
    le.set_defaults(func=cmd_profile_local_energy)

    sp = sub.add_parser("spectral", help="spectral theory of the linearized operator")
    sps = sp.add_subparsers(dest="action", parser_class=_Parser)
    sps.required = True
    me = sps.add_parser("measure", parents=[common, spec, scale])
    me.add_argument("--xi-grid", default="1e-6:1e3:91")
    me.add_argument("--j0", type=int, default=8)
    me.add_argument("--q-min", type=float, default=10.0)
    me.set_defaults(func=cmd_spectral_measure)
    ba = sps.add_parser("basis", parents=[common, spec, scale])
    ba.add_argument("--xi", type=float, required=True)
    ba.add_argument("--r-grid", default="1e-2:1e2:81")
    ba.set_defaults(func=cmd_spectral_basis)
    tr = sps.add_parser("transform", parents=[common, spec])
    tr.add_argument("--in", dest="inp", required=True, help="CSV with columns r, f[, weight]")
    tr.add_argument("--xi-min", type=float, default=1e-12)
    tr.add_argument("--xi-max", type=float, default=2500.0)
    tr.add_argument("--tol", type=float, default=1e-3, help="Plancherel defect limit")
    tr.set_defaults(func=cmd_spectral_transform)

    tf = sub.add_parser("transference", help="transference kernel")
    tfs = tf.add_subparsers(dest="action", parser_class=_Parser)
    tfs.required = True
    k = tfs.add_parser("kernel", parents=[common, spec, scale])
    k.add_argument("--grid", default="1e-3:1e2:40")
    k.add_argument("--tol", type=float, default=1e-8)
    k.set_defaults(func=cmd_transference_kernel)

    ev = sub.add_parser("evolve", parents=[common, prof])
    ev.add_argument("--nu", type=float, default=1.0)
    ev.add_argument("--t-start", type=float, default=0.2)
    ev.add_argument("--t-end", type=float, default=0.05)
    ev.add_argument("--n", type=int, default=None, help="number of cells (default: resolve the core)")
    ev.add_argument("--cfl", type=float, default=0.5)
    ev.add_argument("--control", action="store_true", help="sub-threshold control data")
    ev.add_argument("--amplitude", type=float, default=0.1)
    ev.set_defaults(func=cmd_evolve)
    return p


def resolve_threads(value) -> int:
    if value is None:
        env = os.environ.get("BLOWUP_LAB_THREADS")
        try:
            value = int(env) if env else 1
        except ValueError:
            raise UsageError(f"BLOWUP_LAB_THREADS={env!r} is not an integer") from None
    if value < 1:
        raise UsageError("--threads must be at least 1")
    return value


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        args.threads = resolve_threads(args.threads)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads):
            return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"blowup-lab: error: {exc}\n")
        return EXIT_USAGE
    except (InvalidProfileError, ValueError, OSError) as exc:
        sys.stderr.write(f"blowup-lab: invalid input: {exc}\n")
        return EXIT_INVALID
    except NumericalFault as exc:
        sys.stderr.write(f"blowup-lab: numerical fault: {exc}\n")
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
