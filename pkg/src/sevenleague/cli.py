"""``sevenleague`` command line: data generation, training, simulation, pricing and studies.

All experiment parameters live in JSON config files (``builtin:<name>`` loads a
bundled one); flags only control seeds, output location, threads and dry runs.
Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as C
from .cdc import CdcMatrix, build_matrix, simulate_cdc
from .dataset import LabeledDataset, ParamDomain, generate_labels, merge, split
from .harness import (ks_over_time, strong_weak_errors, timing_benchmark, write_manifest,
                      write_rows_csv)
from .interpolation import Extrapolation, InterpKind
from .models import ModelKind, SdeParams, TimeGrid
from .neural import MlpSurrogate, TrainConfig, default_layer_sizes, glorot_init, metrics, train
from .paths import PathEnsemble
from .pricing import OptionSpec, price
from .probability import gauss_hermite_normal, ks_two_sample
from .schemes import Scheme, simulate_paths
from .sensitivity import asian_vega, asian_vega_fd_exact
from .seven_league import SevenLeagueSampler

log = logging.getLogger("sevenleague")

COMMANDS = ("gen-data", "train", "simulate", "build-cdc", "price", "study", "ks")


@dataclass
class Context:
    cfg: dict
    base_dir: Path
    out_dir: Path
    seed: int
    threads: int
    dry_run: bool

    def out(self, name: str) -> Path:
        return self.out_dir / name

    def find(self, name: str, producer: str) -> Path:
        return C.resolve_input(name, self.out_dir, self.base_dir, producer)


@contextlib.contextmanager
def _semantic():
    """Treat value errors raised while interpreting the config as config errors."""
    try:
        yield
    except (ValueError, TypeError, KeyError) as exc:
        raise C.ConfigError(f"invalid config value: {exc}") from exc


def _params(ctx: Context) -> SdeParams:
    with _semantic():
        return SdeParams.from_dict(ctx.cfg["model_params"])


def _option(ctx: Context) -> OptionSpec:
    with _semantic():
        return OptionSpec.from_dict(ctx.cfg["option"])


def _samplers(ctx: Context, params: SdeParams, need_marginal: bool = False):
    """``(sampler, marginal_surrogate)`` from the ``sampler`` section."""
    sc = ctx.cfg.get("sampler")
    if sc is None:
        raise C.ConfigError("this scheme needs a 'sampler' section with a trained surrogate")
    net = MlpSurrogate.load(ctx.find(sc["surrogate"], "train"))
    marginal = None
    if need_marginal:
        marginal = MlpSurrogate.load(ctx.find(sc.get("marginal_surrogate", sc["surrogate"]), "train"))
    with _semantic():
        sampler = SevenLeagueSampler(net, gauss_hermite_normal(net.n_outputs), params,
                                     InterpKind(sc.get("interpolant", "pchip")),
                                     Extrapolation(sc.get("extrapolation", "clamp")),
                                     clamp_inputs=sc.get("clamp_inputs", True),
                                     prescale=sc.get("prescale", False))
    return sampler, marginal


def _anchor_extrapolation(ctx: Context) -> str:
    return ctx.cfg.get("sampler", {}).get("anchor_extrapolation", "clamp")


def _simulate(ctx: Context, params: SdeParams, scheme: str, grid: TimeGrid, n_paths: int) -> PathEnsemble:
    if scheme in ("euler", "milstein", "exact"):
        return simulate_paths(params, grid, Scheme(scheme), n_paths, ctx.seed)
    sampler, marginal = _samplers(ctx, params, need_marginal=scheme == "7lcdc")
    if scheme == "7l":
        return sampler.simulate(grid, n_paths, ctx.seed)
    matrix = build_matrix(sampler, marginal, grid, anchor_extrapolation=_anchor_extrapolation(ctx))
    return simulate_cdc(matrix, n_paths, ctx.seed)


def _plan(ctx: Context, lines: list[str]) -> int:
    print(f"[dry-run] {ctx.cfg['command']} (seed {ctx.seed}, output dir {ctx.out_dir})")
    for line in lines:
        print(f"  {line}")
    return 0


def _finish(ctx: Context, artifacts: list[Path]) -> None:
    cfg = dict(ctx.cfg, seed=ctx.seed)
    name = f"{Path(artifacts[0]).stem}.manifest.json"
    m = write_manifest(ctx.out_dir, cfg["command"], cfg, ctx.seed, artifacts, name)
    for a in artifacts:
        print(f"wrote {a}")
    print(f"wrote {m}")


def cmd_gen_data(ctx: Context) -> int:
    cfg = ctx.cfg
    with _semantic():
        domains = [ParamDomain(kind=ModelKind(cfg["model"]), **d) for d in cfg["domains"]]
        rule = gauss_hermite_normal(cfg.get("m", 5))
        scheme = Scheme(cfg.get("scheme", "euler"))
    out = ctx.out(cfg["output"])
    if ctx.dry_run:
        rows = [f"domain {k}: {d.n_lhs} LHS points x {d.n_tau} times = {d.n_lhs * d.n_tau} rows, "
                f"{d.n_mc_paths} paths each, seed {ctx.seed + k}" for k, d in enumerate(domains)]
        return _plan(ctx, rows + [f"would write {out} and {out.with_suffix('.json')}"])
    parts = []
    for k, d in enumerate(domains):
        t0 = time.perf_counter()
        parts.append(generate_labels(d, rule, scheme, seed=ctx.seed + k, workers=ctx.threads))
        log.info("domain %d labelled in %.1fs", k, time.perf_counter() - t0)
    ds = parts[0] if len(parts) == 1 else merge(*parts)
    ds.meta["seed"] = ctx.seed
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    sidecar = ds.save(out)
    print(f"{len(ds)} rows, {ds.m} targets")
    for j, name in enumerate(ds.target_names):
        print(f"  {name}: [{ds.targets[:, j].min():.6g}, {ds.targets[:, j].max():.6g}]")
    _finish(ctx, [out, sidecar])
    return 0


def cmd_train(ctx: Context) -> int:
    cfg = ctx.cfg
    data_path = ctx.find(cfg["dataset"], "gen-data")
    with _semantic():
        tc = TrainConfig(epochs_phase1=cfg.get("epochs_phase1", 1000), epochs_phase2=cfg.get("epochs_phase2", 500),
                         lr_phase1=cfg.get("lr_phase1", 1e-3), lr_phase2=cfg.get("lr_phase2", 1e-4),
                         batch_size=cfg.get("batch_size", 512), seed=ctx.seed)
    out = ctx.out(cfg["output"])
    if ctx.dry_run:
        return _plan(ctx, [f"dataset {data_path}", f"schedule {tc}", f"would write {out}"])
    ds = LabeledDataset.load(data_path)
    tr, te = split(ds, 1.0 - cfg.get("test_fraction", 0.1), ctx.seed)
    sizes = default_layer_sizes(ds.inputs.shape[1], ds.m, tuple(cfg.get("hidden", (50, 50, 50, 50))))
    with _semantic():
        net = glorot_init(sizes, seed=ctx.seed, output_mode=cfg.get("output_mode", "absolute"),
                          meta={k: ds.meta[k] for k in ("model_kind", "nodes") if k in ds.meta})
    t0 = time.perf_counter()
    net, history = train(net, tr.inputs, tr.targets, tc)
    seconds = time.perf_counter() - t0
    r2, mae = metrics(net, te.inputs, te.targets)
    net.meta.update({"dataset": str(data_path), "input_names": ds.input_names, "seed": ctx.seed,
                     "train_seconds": seconds})
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    net.save(out)
    hist = write_rows_csv(out.with_suffix(".loss.csv"),
                          [{"epoch": i + 1, "loss": float(v)} for i, v in enumerate(history)])
    met = out.with_suffix(".metrics.json")
    met.write_text(json.dumps({"r2": r2.tolist(), "mae": mae.tolist(), "n_train": len(tr), "n_test": len(te),
                               "train_seconds": seconds}, indent=2))
    for j in range(ds.m):
        print(f"  y_hat_{j + 1}: R2 {r2[j]:.6f}  MAE {mae[j]:.4f}")
    _finish(ctx, [out, hist, met])
    return 0


def cmd_simulate(ctx: Context) -> int:
    cfg = ctx.cfg
    params = _params(ctx)
    with _semantic():
        grid = TimeGrid.uniform(cfg["horizon"], cfg["dt"])
    out = ctx.out(cfg["output"])
    if ctx.dry_run:
        return _plan(ctx, [f"{cfg['scheme']} on {grid.n_steps} steps of {grid.dt}, {cfg['n_paths']} paths",
                           f"would write {out}"])
    ens = _simulate(ctx, params, cfg["scheme"], grid, cfg["n_paths"])
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.get("format", "csv") == "binary":
        ens.to_binary(out)
    else:
        ens.to_csv(out)
    print(f"terminal mean {ens.terminal.mean():.6g}, std {ens.terminal.std(ddof=1):.6g}")
    _finish(ctx, [out])
    return 0


def cmd_build_cdc(ctx: Context) -> int:
    cfg = ctx.cfg
    params = _params(ctx)
    with _semantic():
        grid = TimeGrid.uniform(cfg["horizon"], cfg["dt"])
    stem = ctx.out(cfg["output"])
    if ctx.dry_run:
        return _plan(ctx, [f"{grid.n_steps} x M_s x M_c matrix", f"would write {stem}.json"])
    sampler, marginal = _samplers(ctx, params, need_marginal=True)
    m = build_matrix(sampler, marginal, grid, anchor_extrapolation=_anchor_extrapolation(ctx))
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    head, binp = m.save(stem)
    print(f"matrix {m.n_times} x {m.m_s} x {m.m_c} built in {m.meta['build_seconds']:.3f}s")
    _finish(ctx, [head, binp])
    return 0


def cmd_price(ctx: Context) -> int:
    cfg = ctx.cfg
    params = _params(ctx)
    spec = _option(ctx)
    grid = TimeGrid(spec.dt, spec.n_dates)
    out = ctx.out(cfg["output"])
    if ctx.dry_run:
        return _plan(ctx, [f"{spec.kind.value} via {cfg['scheme']}, {cfg['n_paths']} paths",
                           f"would write {out}"])
    kw = {"policy": cfg["policy"]} if "policy" in cfg and spec.kind.value == "bermudan_put" else {}
    if "matrix" in cfg:
        matrix = CdcMatrix.load(ctx.find(cfg["matrix"], "build-cdc"))
        ens = simulate_cdc(matrix, cfg["n_paths"], ctx.seed)
    else:
        ens = _simulate(ctx, params, cfg["scheme"], grid, cfg["n_paths"])
    res = price(ens, spec, **kw)
    if cfg.get("reference", False):
        ref = price(simulate_paths(params, grid, Scheme.EXACT, cfg["n_paths"], ctx.seed), spec, **kw)
        res.extra.update(reference_price=ref.price, reference_stderr=ref.stderr,
                         relative_error=res.relative_error(ref.price))
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    out.write_text(res.to_json())
    print(f"price {res.price:.8f} (stderr {res.stderr:.2e})"
          + (f", exact {res.extra['reference_price']:.8f}, rel. error {100 * res.extra['relative_error']:.3f}%"
             if "reference_price" in res.extra else ""))
    _finish(ctx, [out])
    return 0


def cmd_study(ctx: Context) -> int:
    cfg = ctx.cfg
    params = _params(ctx)
    study = cfg["study"]
    out = ctx.out(cfg["output"])
    schemes = cfg.get("schemes", ["euler", "milstein"])
    if ctx.dry_run:
        return _plan(ctx, [f"{study} study over {', '.join(schemes)}", f"would write {out}"])
    needs_net = study in ("timing", "vega") or any(s in ("7l", "7lcdc") for s in schemes)
    kw = {}
    if needs_net:
        sampler, marginal = _samplers(ctx, params, need_marginal=True)
        kw = {"sampler": sampler, "marginal_surrogate": marginal,
              "anchor_extrapolation": _anchor_extrapolation(ctx)}
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"study": study}
    try:
        if study == "convergence":
            rows = []
            for s in schemes:
                rep = strong_weak_errors(s, params, cfg["horizon"], cfg["dt_values"], cfg["n_paths"], ctx.seed,
                                         **(kw if s in ("7l", "7lcdc") else {}))
                rows += rep.rows()
                summary[s] = {"strong_slope": rep.strong_slope, "weak_slope": rep.weak_slope}
                print(f"{s}: strong slope {rep.strong_slope:.3f}, weak slope {rep.weak_slope:.3f}")
        elif study == "ks":
            rows = []
            for s in schemes:
                rep = ks_over_time(s, params, cfg["dt"], cfg["horizon"], cfg["n_paths"], ctx.seed,
                                   cfg.get("reference", "crn"), **(kw if s in ("7l", "7lcdc") else {}))
                rows += rep.rows()
                summary[s] = rep.statistics.tolist()
                print(f"{s}: KS " + " ".join(f"{d:.4f}" for d in rep.statistics))
        elif study == "timing":
            res = timing_benchmark(kw["sampler"], kw["marginal_surrogate"], cfg["horizon"], cfg["dt"],
                                   cfg["n_paths"], ctx.seed, cfg.get("interpolants", ["pchip"]))
            rows = res["rows"]
            summary.update({k: v for k, v in res.items() if k != "rows"})
            for r in rows:
                print(f"{r['scheme']:>6} {r['interpolant']:>12}: create C {r['create_c']:.3f}s, "
                      f"decompress {r['decompress']:.3f}s, total {r['total']:.3f}s")
        else:
            spec = _option(ctx)
            v = asian_vega(kw["sampler"], spec, cfg["n_paths"], ctx.seed)
            fd = asian_vega_fd_exact(params, spec, cfg["n_paths"], ctx.seed)
            rows = [{"estimator": "pathwise_7l", "vega": v}, {"estimator": "fd_exact", "vega": fd}]
            summary.update(vega=v, fd_vega=fd, relative_difference=abs(v - fd) / abs(fd))
            print(f"pathwise vega {v:.6f}, finite-difference (exact) {fd:.6f}")
    except KeyError as exc:
        raise C.ConfigError(f"study '{study}' needs field {exc}") from exc
    write_rows_csv(out, rows)
    side = out.with_suffix(".json")
    side.write_text(json.dumps(summary, indent=2))
    _finish(ctx, [out, side])
    return 0


def _load_ensemble(path: Path) -> PathEnsemble:
    return PathEnsemble.from_binary(path) if path.suffix == ".bin" else PathEnsemble.from_csv(path)


def cmd_ks(ctx: Context) -> int:
    cfg = ctx.cfg
    a = ctx.find(cfg["samples_a"], "simulate")
    b = ctx.find(cfg["samples_b"], "simulate")
    out = ctx.out(cfg["output"])
    if ctx.dry_run:
        return _plan(ctx, [f"KS per time between {a} and {b}", f"would write {out}"])
    ea, eb = _load_ensemble(a), _load_ensemble(b)
    if ea.times.shape != eb.times.shape or not np.allclose(ea.times, eb.times):
        raise ValueError("the two ensembles use different time grids")
    rows = []
    for i in range(1, ea.times.size):
        d, p = ks_two_sample(ea.states[:, i], eb.states[:, i])
        rows.append({"t": float(ea.times[i]), "statistic": d, "p_value": p})
        print(f"t={ea.times[i]:.4g}: D={d:.5f} p={p:.4f}")
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out, rows)
    _finish(ctx, [out])
    return 0


HANDLERS = {"gen-data": cmd_gen_data, "train": cmd_train, "simulate": cmd_simulate,
            "build-cdc": cmd_build_cdc, "price": cmd_price, "study": cmd_study, "ks": cmd_ks}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sevenleague", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=f"run '{name}' from a config file")
        s.add_argument("config", help="config JSON path or builtin:<name>")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--out-dir", help=f"output directory (default ${C.OUTPUT_ENV} or ./runs)")
        s.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads")
        s.add_argument("--dry-run", action="store_true", help="print the plan without writing anything")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "study":
            s.add_argument("--schemes", help="comma-separated scheme ids overriding the config list")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, base = C.read_config(args.config)
        if cfg.get("command") != args.command:
            raise C.ConfigError(f"config is for {cfg.get('command')!r}, not {args.command!r}")
        C.validate(cfg, args.command)
        if args.threads < 1:
            raise C.ConfigError("--threads must be at least 1")
        if getattr(args, "schemes", None):
            cfg["schemes"] = [x.strip() for x in args.schemes.split(",") if x.strip()]
            C.validate(cfg, args.command)
        seed = cfg["seed"] if args.seed is None else args.seed
        ctx = Context(cfg, base, C.output_dir(args.out_dir), seed, args.threads, args.dry_run)
        return HANDLERS[args.command](ctx)
    except C.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except C.MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report and exit non-zero
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
