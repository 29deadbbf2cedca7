"""Experiment command line: convergence, stability, and energy sweeps to CSV."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .energy import energy_pipeline, vacuum_potential_fast, vacuum_potential_lod
from .geometry import parse_pqr, parse_system_table
from .grid import relative_norms
from .problem import (make_grid, make_vacuum_problem, parse_config,
                      protein_problem, sphere_benchmark, sphere_exact_field)
from .schemes import MarchConfig, SchemeVariant, march, parse_variant

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2

ENERGY_COLUMNS = ["label", "variant", "scheme", "dt", "T", "alpha",
                  "delta_g_kcal", "diverged", "wall_time_s"]


@dataclass
class ExperimentSpec:
    """One experiment: parameter ladders plus the output path.

    Ladders are stored coarse-to-fine (descending) and must be non-empty.
    """

    kind: str
    schemes: tuple = ()
    h_values: tuple = ()
    dt_values: tuple = ()
    H: float = 1.0
    T: float | None = None
    alpha: float | None = None
    domain: tuple[float, float] = (-3.0, 3.0)
    out: Path | None = None
    variants: tuple = ("Plain",)
    euler_dt: float | None = None
    system: object = None
    h: float = 0.5
    padding: float = 6.0
    eps_m: float = 1.0
    eps_s: float = 80.0
    kappa_bar: float = 0.1261

    def __post_init__(self):
        self.schemes = tuple(parse_variant(s) for s in self.schemes)
        self.h_values = tuple(sorted((float(v) for v in self.h_values), reverse=True))
        self.dt_values = tuple(sorted((float(v) for v in self.dt_values), reverse=True))
        if self.kind in ("SphereSpatial",) and not self.h_values:
            raise ValueError("spatial sweep needs a non-empty h ladder")
        if self.kind in ("SphereTemporal", "StabilitySweep") and not self.dt_values:
            raise ValueError(f"{self.kind} needs a non-empty dt ladder")


def _order(err_coarse, err_fine, x_coarse, x_fine):
    if not (np.isfinite(err_coarse) and np.isfinite(err_fine)) or err_fine <= 0 or err_coarse <= 0:
        return float("nan")
    return float(np.log(err_coarse / err_fine) / np.log(x_coarse / x_fine))


def _fit_order(xs, errs):
    pairs = [(x, e) for x, e in zip(xs, errs) if np.isfinite(e) and e > 0]
    if len(pairs) < 2:
        return float("nan")
    lx = np.log([p[0] for p in pairs])
    le = np.log([p[1] for p in pairs])
    return float(np.polyfit(lx, le, 1)[0])


def _sphere_setup(spec, h):
    grid = make_grid((spec.domain[0],) * 3, (spec.domain[1],) * 3, h)
    problem = sphere_benchmark(grid, spec.H, alpha=spec.alpha or 1.0)
    exact = sphere_exact_field(grid, problem.eps_s / problem.eps_m, 1.0)
    exclude = np.zeros(grid.shape, dtype=bool)
    exclude[grid.origin_index()] = True
    return problem, exact, exclude


def run_sphere_spatial(spec: ExperimentSpec):
    """March the sphere benchmark over an h ladder with dt = h^2/20.

    Errors are relative to the closed-form potential with the singular
    origin node excluded; per-rung orders and a least-squares overall order
    are reported per scheme.
    """
    T = spec.T if spec.T is not None else 10.0
    runs = {}
    for h in spec.h_values:
        problem, exact, exclude = _sphere_setup(spec, h)
        for scheme in spec.schemes:
            cfg = MarchConfig(dt=h * h / 20.0, T=T, variant=scheme)
            rep = march(problem, cfg)
            if rep.diverged:
                l2 = linf = float("nan")
            else:
                norms = relative_norms(exact, rep.final, exclude=exclude)
                l2, linf = norms.l2, norms.linf
            runs[(scheme, h)] = (cfg.dt, l2, linf, rep.diverged)

    rows = []
    for scheme in spec.schemes:
        hs = list(spec.h_values)
        l2s = [runs[(scheme, h)][1] for h in hs]
        fit = _fit_order(hs, l2s)
        for idx, h in enumerate(hs):
            dt, l2, linf, diverged = runs[(scheme, h)]
            if idx + 1 < len(hs):
                h2 = hs[idx + 1]
                l2o = _order(l2, runs[(scheme, h2)][1], h, h2)
                lio = _order(linf, runs[(scheme, h2)][2], h, h2)
            else:
                l2o = lio = float("nan")
            rows.append({
                "scheme": scheme.value, "h": h, "dt": dt, "T": T, "H": spec.H,
                "l2": l2, "l2_order": l2o, "linf": linf, "linf_order": lio,
                "fit_l2_order": fit, "diverged": diverged,
            })
    return rows


def run_sphere_temporal(spec: ExperimentSpec):
    """Self-referenced temporal ladder at fixed h.

    The smallest dt of the ladder is the reference; every scheme is compared
    against its own reference run, so the reference row reads exactly zero.
    """
    T = spec.T if spec.T is not None else 10.0
    h_list = spec.h_values or (0.125,)
    rows = []
    for h in h_list:
        problem, _exact, _excl = _sphere_setup(spec, h)
        dts = list(spec.dt_values)
        ref_dt = dts[-1]
        for scheme in spec.schemes:
            finals = {}
            for dt in dts:
                rep = march(problem, MarchConfig(dt=dt, T=T, variant=scheme))
                finals[dt] = rep
            ref = finals[ref_dt].final
            errs = {}
            for dt in dts:
                rep = finals[dt]
                if rep.diverged or finals[ref_dt].diverged:
                    errs[dt] = (float("nan"), float("nan"), True)
                elif dt == ref_dt:
                    errs[dt] = (0.0, 0.0, False)
                else:
                    norms = relative_norms(ref, rep.final)
                    errs[dt] = (norms.l2, norms.linf, False)
            fit = _fit_order(dts[:-1], [errs[dt][0] for dt in dts[:-1]])
            for idx, dt in enumerate(dts):
                l2, linf, diverged = errs[dt]
                if idx + 1 < len(dts) - 1:
                    nxt = dts[idx + 1]
                    l2o = _order(l2, errs[nxt][0], dt, nxt)
                    lio = _order(linf, errs[nxt][1], dt, nxt)
                else:
                    l2o = lio = float("nan")
                rows.append({
                    "scheme": scheme.value, "h": h, "dt": dt, "T": T, "H": spec.H,
                    "l2": l2, "l2_order": l2o, "linf": linf, "linf_order": lio,
                    "fit_l2_order": fit, "diverged": diverged,
                })
    return rows


def _range_string(dts_ascending, stable_by_dt):
    lo = None
    hi = None
    for dt in dts_ascending:
        if stable_by_dt[dt]:
            if lo is None:
                lo = dt
            hi = dt
        elif lo is not None:
            break
    if lo is None:
        return "[]"
    return f"[{lo:g},{hi:g}]"


def run_stability_sweep(spec: ExperimentSpec):
    """Classify stable/diverged per (scheme, dt) with T = 1e4*dt per cell.

    A cell is stable iff the march stayed finite (max |u| below the
    divergence threshold for every step).  The contiguous stable range
    starting from the smallest sampled dt is summarized per scheme.
    """
    h = spec.h_values[0] if spec.h_values else 0.25
    problem, exact, exclude = _sphere_setup(spec, h)
    dts = list(spec.dt_values)
    rows = []
    for scheme in spec.schemes:
        cells = {}
        for dt in dts:
            T = spec.T if spec.T is not None else 1e4 * dt
            cfg = MarchConfig(dt=dt, T=T, variant=scheme)
            rep = march(problem, cfg)
            if rep.diverged:
                l2 = float("nan")
            else:
                l2 = relative_norms(exact, rep.final, exclude=exclude).l2
            cells[dt] = (rep, l2, T)
        asc = sorted(dts)
        rng = _range_string(asc, {dt: not cells[dt][0].diverged for dt in dts})
        for dt in asc:
            rep, l2, T = cells[dt]
            rows.append({
                "scheme": scheme.value, "h": h, "H": spec.H, "dt": dt, "T": T,
                "steps": rep.steps_taken, "stable": not rep.diverged,
                "final_l2": l2,
                "diverged_step": rep.diverged_step if rep.diverged else -1,
                "stable_range": rng,
            })
    return rows


def run_protein_energy(spec: ExperimentSpec):
    """Energy pipeline rows for the requested variants, plus an optional
    explicit-Euler reference row used for percent errors."""
    if spec.system is None:
        raise ValueError("protein energy run needs a molecular system")
    problem = protein_problem(spec.system, h=spec.h, padding=spec.padding,
                              kappa_bar=spec.kappa_bar, eps_m=spec.eps_m,
                              eps_s=spec.eps_s, alpha=1.0)
    T = spec.T if spec.T is not None else 10.0
    scheme = spec.schemes[0] if spec.schemes else SchemeVariant.LODIE2
    dt = spec.dt_values[0] if spec.dt_values else 0.4

    rows = []
    euler_dg = None
    if spec.euler_dt is not None:
        cfg = MarchConfig(dt=spec.euler_dt, T=T, variant=SchemeVariant.ExplicitEuler)
        res = energy_pipeline(problem, cfg, "Plain")
        euler_dg = res.delta_g
        rows.append(_energy_row(problem.label, "Euler", res))
    for variant in spec.variants:
        cfg = MarchConfig(dt=dt, T=T, variant=scheme, alpha=spec.alpha)
        res = energy_pipeline(problem, cfg, variant)
        rows.append(_energy_row(problem.label, variant, res))
        if euler_dg is not None and np.isfinite(res.delta_g) and euler_dg != 0:
            pct = 100.0 * abs(res.delta_g - euler_dg) / abs(euler_dg)
            print(f"{problem.label} {variant} {scheme.value} dt={dt:g}: "
                  f"dG={res.delta_g:.4f} kcal/mol, {pct:.2f}% vs Euler")
    return rows


def _energy_row(label, variant, res):
    return {
        "label": label, "variant": variant, "scheme": res.provenance["scheme"],
        "dt": res.provenance["dt"], "T": res.provenance["T"],
        "alpha": res.provenance["alpha"], "delta_g_kcal": res.delta_g,
        "diverged": res.diverged, "wall_time_s": res.wall_time,
    }


def run_vacuum_check(spec: ExperimentSpec):
    """Compare the LODIE2 vacuum march against the direct Poisson solve."""
    if spec.system is None:
        raise ValueError("vacuum check needs a molecular system")
    problem = protein_problem(spec.system, h=spec.h, padding=spec.padding,
                              kappa_bar=spec.kappa_bar, eps_m=spec.eps_m,
                              eps_s=spec.eps_s, alpha=1.0)
    vacuum = make_vacuum_problem(problem)
    fast = vacuum_potential_fast(problem.rho, problem.grid, problem.eps_m,
                                 vacuum.boundary)
    T = spec.T if spec.T is not None else 10.0
    rows = []
    for dt in (spec.dt_values or (0.4,)):
        rep = vacuum_potential_lod(vacuum, dt, T, spec.alpha)
        if rep.diverged:
            l2 = linf = float("nan")
        else:
            norms = relative_norms(fast, rep.final)
            l2, linf = norms.l2, norms.linf
        rows.append({
            "label": problem.label, "dt": dt,
            "alpha": spec.alpha if spec.alpha is not None else problem.alpha,
            "T": T, "l2_vs_fast": l2, "linf_vs_fast": linf,
            "diverged": rep.diverged,
        })
    return rows


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{v:.12e}"
    return str(v)


def emit_report(rows, header, path) -> None:
    """Write rows as CSV: fixed column order, 12-digit floats, deterministic."""
    if not rows:
        raise ValueError("no rows to write")
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_value(row[col]) for col in header))
    Path(path).write_text("\n".join(lines) + "\n")


SPATIAL_COLUMNS = ["scheme", "h", "dt", "T", "H", "l2", "l2_order", "linf",
                   "linf_order", "fit_l2_order", "diverged"]
STABILITY_COLUMNS = ["scheme", "h", "H", "dt", "T", "steps", "stable", "final_l2",
                     "diverged_step", "stable_range"]
VACUUM_COLUMNS = ["label", "dt", "alpha", "T", "l2_vs_fast", "linf_vs_fast", "diverged"]


def _float_list(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pbsplit",
        description="Operator-splitting pseudo-time experiments for the "
                    "nonlinear Poisson-Boltzmann equation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="key = value defaults file")
        p.add_argument("--out", type=Path, help="output CSV path")
        p.add_argument("--scheme", help="comma-separated scheme names")
        p.add_argument("--dt", help="comma-separated time increments")
        p.add_argument("--h", dest="h_list", help="comma-separated spacings")
        p.add_argument("--H", type=float, dest="H", help="initial hump magnitude")
        p.add_argument("--T", type=float, help="stopping time")
        p.add_argument("--alpha", type=float, help="pseudo-time scaling")
        p.add_argument("--domain", help="cube bounds as 'lo,hi'")

    for name in ("sphere-spatial", "sphere-temporal", "stability"):
        common(sub.add_parser(name))

    for name in ("protein", "vacuum-check"):
        p = sub.add_parser(name)
        common(p)
        p.add_argument("--pqr", type=Path, help="PQR input file")
        p.add_argument("--system", type=Path, help="synthetic 'atom x y z q r' file")
        p.add_argument("--padding", type=float)
        p.add_argument("--eps-m", type=float, dest="eps_m")
        p.add_argument("--eps-s", type=float, dest="eps_s")
        p.add_argument("--kappa-bar", type=float, dest="kappa_bar")
        if name == "protein":
            p.add_argument("--variant", help="comma-separated: Plain,RE,REplusV")
            p.add_argument("--euler-dt", type=float, dest="euler_dt",
                           help="also run an explicit-Euler reference at this dt")
    return parser


def _resolve(args, cfg, key, cast=None, default=None):
    val = getattr(args, key, None)
    if val is None:
        val = cfg.get(key, default)
        if val is not None and cast is not None and not isinstance(val, tuple):
            val = cast(val)
    return val


def _load_system(args):
    if getattr(args, "pqr", None) is not None:
        return parse_pqr(Path(args.pqr).read_text())
    if getattr(args, "system", None) is not None:
        path = Path(args.system)
        return parse_system_table(path.read_text(), label=path.stem)
    return None


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = {}
        if args.config is not None:
            cfg = parse_config(Path(args.config).read_text())

        schemes = _resolve(args, cfg, "scheme")
        if isinstance(schemes, str):
            schemes = tuple(s.strip() for s in schemes.split(","))
        elif schemes is None:
            schemes = ("LODIE2",) if args.command == "protein" else ("LODIE1",)
        dt_values = getattr(args, "dt", None) or cfg.get("dt")
        dt_values = _float_list(dt_values) if isinstance(dt_values, str) \
            else ((dt_values,) if isinstance(dt_values, float) else (dt_values or ()))
        h_values = getattr(args, "h_list", None) or cfg.get("h")
        h_values = _float_list(h_values) if isinstance(h_values, str) \
            else ((h_values,) if isinstance(h_values, float) else (h_values or ()))
        domain = _resolve(args, cfg, "domain")
        if isinstance(domain, str):
            lo, hi = _float_list(domain)
            domain = (lo, hi)
        domain = domain or (-3.0, 3.0)

        kwargs = dict(
            schemes=schemes, dt_values=dt_values, h_values=h_values,
            H=_resolve(args, cfg, "H", float, 1.0),
            T=_resolve(args, cfg, "T", float),
            alpha=_resolve(args, cfg, "alpha", float),
            domain=domain, out=args.out,
        )

        command = args.command
        if command in ("protein", "vacuum-check"):
            system = _load_system(args)
            if system is None:
                raise ValueError("provide a molecular system via --pqr or --system")
            kwargs.update(
                system=system,
                h=(h_values[0] if h_values else _resolve(args, cfg, "h", float, 0.5)),
                padding=_resolve(args, cfg, "padding", float, 6.0),
                eps_m=_resolve(args, cfg, "eps_m", float, 1.0),
                eps_s=_resolve(args, cfg, "eps_s", float, 80.0),
                kappa_bar=_resolve(args, cfg, "kappa_bar", float, 0.1261),
            )

        if command == "sphere-spatial":
            spec = ExperimentSpec(kind="SphereSpatial", **kwargs)
            rows, cols = run_sphere_spatial(spec), SPATIAL_COLUMNS
        elif command == "sphere-temporal":
            if not kwargs["h_values"]:
                kwargs["h_values"] = (0.125,)
            spec = ExperimentSpec(kind="SphereTemporal", **kwargs)
            rows, cols = run_sphere_temporal(spec), SPATIAL_COLUMNS
        elif command == "stability":
            spec = ExperimentSpec(kind="StabilitySweep", **kwargs)
            rows, cols = run_stability_sweep(spec), STABILITY_COLUMNS
        elif command == "protein":
            variants = getattr(args, "variant", None)
            variants = tuple(v.strip() for v in variants.split(",")) if variants \
                else ("Plain",)
            spec = ExperimentSpec(kind="ProteinEnergy", variants=variants,
                                  euler_dt=getattr(args, "euler_dt", None), **kwargs)
            rows, cols = run_protein_energy(spec), ENERGY_COLUMNS
        else:
            spec = ExperimentSpec(kind="VacuumCheck", **kwargs)
            rows, cols = run_vacuum_check(spec), VACUUM_COLUMNS

        if args.out is not None:
            emit_report(rows, cols, args.out)
        else:
            print(",".join(cols))
            for row in rows:
                print(",".join(_format_value(row[c]) for c in cols))
        return EXIT_OK
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
