"""Batch front end: simulate, compute limit objects, run verification suites.

All numerics live in the library; this layer parses configs, derives seeds,
writes CSV/JSON and maps failures to exit codes (0 success, 1 failed
verification criterion, 2 config error, 3 numeric failure).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import chain, limits, ou, verify, zigzag
from .config import RunConfig, fmt_float, load_config, write_csv, write_manifest
from .errors import ConfigError, FreezeMCError
from .generators import poisson_solution, spectral_gap, stationary_distribution
from .rng import derived_rng
from .schedules import p_at


def _resolve_checkpoints(cfg: RunConfig) -> np.ndarray | None:
    spec = cfg.checkpoints
    if spec is None:
        return None
    if isinstance(spec, str):
        if spec == "log10":
            return chain.log_checkpoints(min(10, cfg.n_steps), cfg.n_steps, per_decade=10)
        raise ConfigError(f"unknown checkpoint spec {spec!r}")
    return np.asarray(spec, dtype=np.int64)


def cmd_simulate_chain(cfg: RunConfig, out_dir: Path) -> list[str]:
    cps = _resolve_checkpoints(cfg)
    ens = chain.run_ensemble(
        cfg.generator,
        cfg.schedule,
        cfg.n_steps,
        cfg.n_replicates,
        master_seed=cfg.seed,
        init=cfg.init,
        checkpoints=cps,
        workers=cfg.threads,
    )
    nu = stationary_distribution(cfg.generator)
    d = cfg.generator.dim
    header = (
        ["replicate", "n", "i"]
        + [f"x_{k + 1}" for k in range(d)]
        + [f"y_{k + 1}" for k in range(d)]
    )
    rows = []
    for rep in range(ens.n_replicates):
        if ens.checkpoint_n is not None:
            for c, n in enumerate(ens.checkpoint_n):
                x = ens.checkpoint_x[rep, c]
                y = chain.fluctuation(x, nu, cfg.schedule, n=int(n), offset=ens.schedule_offset)
                rows.append([rep, int(n), int(ens.checkpoint_i[rep, c]), *x, *y])
        x = ens.x_final[rep]
        y = chain.fluctuation(x, nu, cfg.schedule, n=cfg.n_steps, offset=ens.schedule_offset)
        rows.append([rep, cfg.n_steps, int(ens.i_final[rep]), *x, *y])
    path = out_dir / "chain.csv"
    write_csv(path, header, rows)
    return [str(path)]


def cmd_simulate_ezz(cfg: RunConfig, out_dir: Path) -> list[str]:
    d = cfg.generator.dim
    header = ["replicate", "t_event", "i_after"] + [f"x_{k + 1}" for k in range(d)]
    rows = []
    nu = stationary_distribution(cfg.generator)
    for rep in range(cfg.n_replicates):
        rng = derived_rng(cfg.seed, rep)
        if cfg.init == "nu":
            x0, i0 = nu, nu
        elif cfg.init == "fixed":
            x0, i0 = np.full(d, 1.0 / d), 0
        elif isinstance(cfg.init, dict):
            x0 = np.asarray(cfg.init["x0"], dtype=float)
            i0 = int(cfg.init["i0"])
        else:
            raise ConfigError(f"unknown ezz init {cfg.init!r}")
        path = zigzag.simulate_ezz(cfg.generator, cfg.a, x0, i0, cfg.horizon, rng)
        rows.append([rep, 0.0, path.i0, *path.x0])
        xs = path.epoch_states()
        for k in range(path.n_jumps):
            rows.append([rep, float(path.jump_times[k]), int(path.jump_targets[k]), *xs[k]])
    out = out_dir / "ezz.csv"
    write_csv(out, header, rows)
    return [str(out)]


def cmd_simulate_ou(cfg: RunConfig, out_dir: Path) -> list[str]:
    nu = stationary_distribution(cfg.generator)
    h = poisson_solution(cfg.generator, nu)
    spec = ou.sigma_matrix(cfg.generator, nu, h, p=cfg.p, upsilon=cfg.upsilon)
    gauss = ou.psd_sqrt(spec)
    draws = ou.stationary_sample(gauss, cfg.n_replicates, derived_rng(cfg.seed, 0))
    d = cfg.generator.dim
    out_samples = out_dir / "ou_samples.csv"
    write_csv(
        out_samples,
        ["replicate"] + [f"y_{k + 1}" for k in range(d)],
        ([rep, *draws[rep]] for rep in range(cfg.n_replicates)),
    )
    out_sigma = out_dir / "sigma.csv"
    write_csv(out_sigma, [f"s_{k + 1}" for k in range(d)], spec.matrix)
    return [str(out_samples), str(out_sigma)]


def _simplex_grid(dim: int, resolution: int) -> np.ndarray:
    """Interior lattice {k/resolution} on the simplex."""
    pts = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            if remaining >= 1:
                pts.append(prefix + [remaining])
            return
        for k in range(1, remaining - slots + 2):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], resolution, dim)
    return np.asarray(pts, dtype=float) / resolution


def cmd_limits(cfg: RunConfig, out_dir: Path) -> list[str]:
    gen = cfg.generator
    nu = stationary_distribution(gen)
    h = poisson_solution(gen, nu)
    rho = spectral_gap(gen)
    spec = ou.sigma_matrix(gen, nu, h, p=cfg.p, upsilon=cfg.upsilon)
    payload = {
        "nu": nu.tolist(),
        "rho": rho,
        "h": h.tolist(),
        "sigma": spec.matrix.tolist(),
        "p": cfg.p,
        "upsilon": cfg.upsilon,
    }
    outputs = []
    theta = cfg.raw.get("generator", {}).get("complete_graph_theta")
    if theta is not None:
        theta = np.asarray(theta, dtype=float)
        mix = limits.dirichlet_mixture(theta, cfg.a)
        payload["mixture"] = {
            "a": cfg.a,
            "weights": mix.weights.tolist(),
            "alphas": mix.alphas.tolist(),
        }
        phi = limits.phi_complete_graph(theta, cfg.a)
        grid = _simplex_grid(gen.dim, int(cfg.raw.get("density_resolution", 50)))
        rows = []
        for x in grid:
            rows.append(list(x) + [phi.value(x, i) for i in range(gen.dim)])
        table = out_dir / "density_table.csv"
        write_csv(
            table,
            [f"x_{k + 1}" for k in range(gen.dim)]
            + [f"phi_{k + 1}" for k in range(gen.dim)],
            rows,
        )
        outputs.append(str(table))
    out_json = out_dir / "limits.json"
    out_json.parent.mkdir(parents=True, exist_ok=True)
    with open(out_json, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    out_sigma = out_dir / "sigma.csv"
    write_csv(out_sigma, [f"s_{k + 1}" for k in range(gen.dim)], spec.matrix)
    return [str(out_json), str(out_sigma)] + outputs


def cmd_verify(names, quick: bool, seed: int, workers: int, out_dir: Path | None) -> int:
    try:
        results = verify.run_suites(names, quick=quick, seed=seed, workers=workers)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    for r in results:
        print(r.line())
    report = {
        "passed": all(r.passed for r in results),
        "quick": quick,
        "seed": seed,
        "results": [dataclasses.asdict(r) for r in results],
    }
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "verify_report.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
    return 0 if report["passed"] else 1


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.bool_,)):
        return bool(v)
    raise TypeError(f"not JSON serializable: {type(v)}")


def cmd_rate_fit(input_path: Path, kind: str) -> int:
    from .stats import rate_fit

    data = np.loadtxt(input_path, delimiter=",", skiprows=1)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ConfigError("rate-fit input needs two columns: abscissa, distance")
    fit = rate_fit(data[:, 0], data[:, 1], kind=kind)
    print(
        json.dumps(
            {
                "slope": fit.slope,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
                "kind": kind,
            },
            sort_keys=True,
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freezemc",
        description="Freezing Markov chains: simulation, limit objects, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON config or manifest")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--threads", type=int, default=None, help="worker count")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--quick", action="store_true", help="reduced-size smoke run")

    for name in ("simulate-chain", "simulate-ezz", "simulate-ou", "limits"):
        add_common(sub.add_parser(name))

    pv = sub.add_parser("verify", help="run named verification suites")
    pv.add_argument(
        "suite",
        nargs="+",
        help="suite names, 'all' for the acceptance gate, or 'printed-constants'",
    )
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--threads", type=int, default=1)
    pv.add_argument("--out", default=None)
    pv.add_argument("--quick", action="store_true")

    pr = sub.add_parser("rate-fit", help="least-squares rate fit of a two-column CSV")
    pr.add_argument("--input", required=True)
    pr.add_argument("--kind", choices=("poly", "exp"), default="poly")
    return parser


_QUICK_CAPS = {"chain": (20_000, 50), "ezz": (None, 50), "ou": (None, 1000)}


def _apply_quick(cfg: RunConfig) -> RunConfig:
    caps = _QUICK_CAPS.get(cfg.experiment)
    if caps is None:
        return cfg
    n_cap, m_cap = caps
    if n_cap is not None and cfg.n_steps > n_cap:
        cfg.n_steps = n_cap
    if cfg.n_replicates > m_cap:
        cfg.n_replicates = m_cap
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args.suite, args.quick, args.seed, args.threads, Path(args.out) if args.out else None)
    if args.command == "rate-fit":
        try:
            return cmd_rate_fit(Path(args.input), args.kind)
        except (ConfigError, OSError, ValueError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
    try:
        overrides = {"seed": args.seed, "threads": args.threads}
        cfg = load_config(args.config, overrides)
        cfg.experiment = {
            "simulate-chain": "chain",
            "simulate-ezz": "ezz",
            "simulate-ou": "ou",
            "limits": "limits",
        }[args.command]
        if args.command == "simulate-chain" and cfg.schedule is None:
            raise ConfigError("chain simulation needs a 'schedule' section")
        if args.quick:
            cfg = _apply_quick(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    handler = {
        "simulate-chain": cmd_simulate_chain,
        "simulate-ezz": cmd_simulate_ezz,
        "simulate-ou": cmd_simulate_ou,
        "limits": cmd_limits,
    }[args.command]
    try:
        outputs = handler(cfg, out_dir)
    except FreezeMCError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    write_manifest(out_dir, cfg, outputs)
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
