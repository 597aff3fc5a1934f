"""Command-line entry point: train, run, inspect and validate-fixtures."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, ExperimentConfig, TrainConfig, load_config, resolve_estimator
from .rsa import (
    NON_VIDEO,
    VIDEO,
    ConnectionRequest,
    CostWeights,
    Established,
    RsaEngine,
)
from .simulator import CSV_COLUMNS, LoadResult, ScenarioConfig, csv_rows, run_load
from .spectrum import SpectrumGrid
from .topology import TopologyError, load_topology
from .video import (
    EstimatorError,
    GopModel,
    build_dataset,
    dataset_mse,
    fit_estimator,
    learning_curve,
    split_dataset,
)

FIXTURE = "sixnode"


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- train ------------------------------------------------------------------


@dataclass
class TrainResult:
    estimator: object
    samples: list
    curve: list
    train_mse: float
    test_mse: float


def train_model(gop: GopModel, cfg: TrainConfig) -> TrainResult:
    bers = np.logspace(math.log10(cfg.ber_min), math.log10(cfg.ber_max), cfg.ber_points)
    samples = build_dataset(gop, bers, cfg.gop_count, cfg.seed)
    train, test = split_dataset(samples, cfg.seed, cfg.train_fraction)
    meta = {"seed": cfg.seed, "gop_count": cfg.gop_count, "ber_points": cfg.ber_points}
    est, fit = fit_estimator(train, cfg.spread, cfg.mse_goal, cfg.max_neurons, metadata=meta,
                             monotone=cfg.monotone)
    curve = learning_curve(fit, est, test)
    return TrainResult(est, samples, curve, dataset_mse(est, train), dataset_mse(est, test))


def cmd_train(args, exp: ExperimentConfig) -> int:
    cfg = exp.train
    if args.seed is not None:
        cfg = TrainConfig(**{**cfg.__dict__, "seed": args.seed[0]})
    try:
        result = train_model(exp.gop, cfg)
    except EstimatorError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.estimator.save(out / "model.json")
    with open(out / "ground_truth.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ber", "psnr", "dfr"])
        for s in result.samples:
            w.writerow([_fmt(s.ber), _fmt(s.psnr), _fmt(s.dfr)])
    with open(out / "train_report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["neurons", "train_mse", "test_mse"])
        for row in result.curve:
            w.writerow([_fmt(x) for x in row])
    print(f"neurons={len(result.estimator.centers)} train_mse={result.train_mse:.6g} "
          f"test_mse={result.test_mse:.6g} -> {out / 'model.json'}")
    return 0


# -- run --------------------------------------------------------------------


def _replicate(job):
    config, load, model_ref, base_dir = job
    estimator = resolve_estimator(model_ref, base_dir) if config.p_video > 0 else None
    return run_load(config, load, estimator=estimator)


def scenario_from_args(args, exp: ExperimentConfig) -> ScenarioConfig:
    sc = exp.scenario
    if args.topology:
        sc = sc.with_(topology=args.topology)
    if args.loads:
        sc = sc.with_(load_points=_floats(args.loads))
    if args.beta is not None:
        sc = sc.with_(weights=CostWeights(sc.weights.alpha, args.beta))
    if getattr(args, "model", None):
        sc = sc.with_(estimator=args.model)
    sc.check()
    return sc


def cmd_run(args, exp: ExperimentConfig) -> int:
    sc = scenario_from_args(args, exp)
    load_topology(sc.topology)  # fail early on a bad name or file
    if sc.p_video > 0:
        resolve_estimator(sc.estimator, exp.base_dir)
    seeds = tuple(args.seed) if args.seed else (sc.seed,)
    if args.replications:
        seeds = tuple(seeds[0] + i for i in range(args.replications))
    if args.validate_every is not None:
        sc = sc.with_(validate_every=args.validate_every)
    model_ref = sc.estimator
    base_dir = exp.base_dir
    jobs = [(sc.with_(seed=s), load, model_ref, base_dir) for load in sc.load_points for s in seeds]

    results: list[Optional[LoadResult]] = []
    failures = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_replicate, job) for job in jobs]
            for job, fut in zip(jobs, futures):
                try:
                    results.append(fut.result())
                except Exception as exc:  # reported below, run continues
                    failures.append((job[0].seed, job[1], repr(exc)))
    else:
        for job in jobs:
            try:
                results.append(_replicate(job))
            except Exception as exc:
                failures.append((job[0].seed, job[1], repr(exc)))
    for r in results:
        if r.violations:
            failures.append((r.seed, r.load, f"{r.violations} constraint violations"))

    topo_name = load_topology(sc.topology).name
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in results:
            for row in csv_rows(topo_name, r):
                w.writerow({k: _fmt(v) for k, v in row.items()})
    summary = {
        "topology": topo_name,
        "weights": {"alpha": sc.weights.alpha, "beta": sc.weights.beta},
        "seeds": list(seeds),
        "load_points": list(sc.load_points),
        "replications": [r.summary() for r in results],
        "failures": [{"seed": s, "load": l, "error": e} for s, l, e in failures],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, allow_nan=True) + "\n")
    for s, l, e in failures:
        print(f"replication seed={s} load={l} failed: {e}", file=sys.stderr)
    print(f"{len(results)} replications -> {out / 'results.csv'}")
    return 1 if failures else 0


# -- inspect ----------------------------------------------------------------


def _load_grid(ref: Optional[str], topo, slot_count: int) -> SpectrumGrid:
    if ref is None:
        return SpectrumGrid.for_topology(topo, slot_count)
    if ref == FIXTURE:
        text = resources.files("eonvideo.data").joinpath("sixnode_grid.txt").read_text()
    else:
        text = Path(ref).read_text()
    return SpectrumGrid.from_text(text, topo.link_ids)


def inspect_trace(engine: RsaEngine, grid: SpectrumGrid, request: ConnectionRequest) -> list[str]:
    """Human-readable trace of every candidate considered for ``request`` and the decision."""
    lines = [f"request {request.id}: {request.src} -> {request.dst}, {request.slots} slots, {request.kind}"]
    video = request.is_video
    seen = set()
    for path, starts, f_net, f_cost, n_c, n_m, n_nl, q in engine.candidates(grid, request):
        seen.add(path.nodes)
        head = f"path {path.label()} ({path.length_km:g} km, {path.hops} hops) OSNR={q.osnr_db:.3f} dB"
        if video:
            head += (f" BER={q.ber:.3e} PSNR={q.psnr:.3f} DFR={q.dfr:.4f} "
                     f"U={q.utility:.3f} F_video={q.f_video:.4f}")
        lines.append(head)
        for i, s in enumerate(starts):
            block = "{" + ", ".join(str(x + 1) for x in range(s, s + request.slots)) + "}"
            lines.append(
                f"  block {block}: N_c={n_c[i]} N_m={n_m[i]} N_NL={n_nl} "
                f"F_network={f_net[i]:.4f} F_cost={f_cost[i]:.4f}"
            )
    for path, *_ in engine.routes(grid, request.src, request.dst):
        if path.nodes not in seen:
            lines.append(f"path {path.label()}: no free block of {request.slots} slots")
    outcome = engine.select(grid, request)
    if isinstance(outcome, Established):
        lines.append(f"decision: established on {outcome.path.label()} {outcome.block.label()} "
                     f"F_cost={outcome.cost.f_cost:.4f}")
    elif outcome.path is not None:
        lines.append(f"decision: blocked ({outcome.reason}); winner {outcome.path.label()} "
                     f"{outcome.block.label()} U={outcome.cost.utility:.3f} < u_th={request.u_th:g}")
    else:
        lines.append(f"decision: blocked ({outcome.reason})")
    return lines


def cmd_inspect(args, exp: ExperimentConfig) -> int:
    sc = exp.scenario
    topo = load_topology(args.topology or (FIXTURE if args.grid == FIXTURE else sc.topology))
    for node in (args.src, args.dst):
        if node not in topo.nodes:
            raise TopologyError(f"unknown node {node!r} in {topo.name}")
    grid = _load_grid(args.grid, topo, args.slot_count or sc.slot_count)
    weights = sc.weights if args.beta is None else CostWeights(sc.weights.alpha, args.beta)
    estimator = resolve_estimator(sc.estimator, exp.base_dir) if args.kind == VIDEO else None
    engine = RsaEngine(topo, sc.fiber, estimator, weights, args.k or sc.k, sc.gate_fallback)
    request = ConnectionRequest(0, args.src, args.dst, args.slots, args.kind, u_th=sc.u_th)
    print("\n".join(inspect_trace(engine, grid, request)))
    return 0


# -- validate-fixtures ------------------------------------------------------

# expected values for the bundled six-node example: (nodes, 1-based slots) -> (N_c, N_m, F_network)
FIXTURE_CHECKS = (
    (("A", "C", "E", "F"), (8, 9), 2, 6, 2.5),
    (("A", "C", "E", "F"), (9, 10), 0, 8, 2 / 3),
    (("A", "B", "D", "F"), (5, 6), 1, -6, 0.4),
)
FIXTURE_WINNER = (("A", "B", "D", "F"), (5, 6))


def validate_fixtures() -> list[tuple[str, bool, str]]:
    from .rsa import evaluate_candidate
    from .spectrum import SpectrumBlock

    topo = load_topology(FIXTURE)
    grid = _load_grid(FIXTURE, topo, 0)
    request = ConnectionRequest(0, "A", "F", 2, NON_VIDEO)
    checks = []
    for nodes, slots, n_c, n_m, f_net in FIXTURE_CHECKS:
        path = topo.path_from_nodes(nodes)
        block = SpectrumBlock(slots[0] - 1, len(slots))
        cost = evaluate_candidate(grid, topo, ScenarioConfig().fiber, None, request, path, block, CostWeights())
        name = f"{path.label()} {block.label()}"
        checks.append((f"{name} N_c", cost.n_cuts == n_c, f"got {cost.n_cuts}, expected {n_c}"))
        checks.append((f"{name} N_m", cost.n_misalign == n_m, f"got {cost.n_misalign}, expected {n_m}"))
        ok = math.isclose(cost.f_network, f_net, rel_tol=1e-9)
        checks.append((f"{name} F_network", ok,
                       f"got {cost.f_network:.4f} (N_NL={cost.n_neighbors}), expected {f_net:.4f}"))
    # the worked example considers its two shortest routes only
    engine = RsaEngine(topo, ScenarioConfig().fiber, None, CostWeights(), k=2)
    outcome = engine.select(grid, request)
    want_path, want_slots = FIXTURE_WINNER
    ok = (isinstance(outcome, Established) and outcome.path.nodes == want_path
          and outcome.block.start == want_slots[0] - 1)
    got = f"{outcome.path.label()} {outcome.block.label()}" if isinstance(outcome, Established) else "blocked"
    checks.append(("winner", ok, f"got {got}"))
    return checks


def cmd_validate_fixtures(args, exp: ExperimentConfig) -> int:
    checks = validate_fixtures()
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in checks) else 1


# -- entry ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--out", default="out", help="output directory (files are rewritten)")
    common.add_argument("--seed", type=_ints, help="seed, or comma-separated seeds for run")
    common.add_argument("--loads", help="comma-separated Erlang loads")
    common.add_argument("--topology", help="bundled name (nsfnet, usbackbone, sixnode) or JSON path")
    common.add_argument("--beta", type=float, help="video cost weight (0 gives the general RSA)")

    parser = argparse.ArgumentParser(prog="eonvideo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common], help="generate ground truth and fit the quality estimator")

    run = sub.add_parser("run", parents=[common], help="simulate every (load, seed) replication")
    run.add_argument("--replications", type=int, help="use seeds seed, seed+1, ... (count)")
    run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    run.add_argument("--model", help="estimator JSON (overrides the configured one)")
    run.add_argument("--validate-every", type=int, help="audit spectrum constraints every N events")

    insp = sub.add_parser("inspect", parents=[common], help="trace the decision for one request")
    insp.add_argument("--src", required=True)
    insp.add_argument("--dst", required=True)
    insp.add_argument("--slots", type=int, required=True)
    insp.add_argument("--kind", choices=(VIDEO, NON_VIDEO), default=NON_VIDEO)
    insp.add_argument("--grid", help=f"grid snapshot file, or '{FIXTURE}' for the bundled example")
    insp.add_argument("--slot-count", type=int, help="slots per link for an empty grid")
    insp.add_argument("--k", type=int, help="candidate paths")

    sub.add_parser("validate-fixtures", parents=[common], help="replay the six-node worked example")
    return parser


COMMANDS = {
    "train": cmd_train,
    "run": cmd_run,
    "inspect": cmd_inspect,
    "validate-fixtures": cmd_validate_fixtures,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        exp = load_config(args.config)
        return COMMANDS[args.command](args, exp)
    except (ConfigError, TopologyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
