"""Experiment runner: strict flat key=value configs, JSONL metrics, sweeps.

Config files are plain ``key=value`` lines (blank lines and ``#`` comments
ignored). Unknown keys are rejected so sweep scripts fail loudly. Every
defaulted value is echoed to the log, each metrics record carries the
config hash, and a record stream is flushed line by line so an interrupted
run still leaves a parseable file.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import data as dat
from .cluster import ClusterSim
from .driver import SCHEDULE_MODES, CodaConfig, run_coda
from .objective import default_l_v, make_primal
from .scorer import ScorerSpec, init_params, lipschitz_bound, smoothness_bound

log = logging.getLogger(__name__)

__all__ = ["RunConfig", "parse_config", "serialize_config", "config_hash",
           "run_experiment", "sweep", "main"]

ALGOS = ("coda", "np_ppdsg", "ppdsg")


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


# name -> (type, default); order defines the serialized layout
SCHEMA = {
    "dataset": (str, "synth"),
    "data_path": (str, ""),
    "dim_hint": (int, 0),
    "n": (int, 20000),
    "d": (int, 20),
    "p": (float, 0.71),
    "separation": (float, 3.0),
    "test_n": (int, 5000),
    "test_fraction": (float, 0.2),
    "target_p": (float, 0.0),
    "scorer": (str, "linear_sigmoid"),
    "hidden": (int, 16),
    "algo": (str, "coda"),
    "workers": (int, 4),
    "stages": (int, 3),
    "schedule": (str, "geometric3"),
    "eta0": (float, 0.01),
    "T0": (int, 2000),
    "comm_interval": (int, 0),
    "L_v": (float, 0.0),
    "mu": (float, 0.1),
    "G_h": (float, 0.0),
    "eta_cap": (float, 0.0),
    "batch": (int, 1),
    "seed": (int, 0),
    "eval_every": (int, 200),
    "track_phi": (_parse_bool, False),
    "timings": (_parse_bool, False),
    "out": (str, "runs/metrics.jsonl"),
}


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    data_path: str
    dim_hint: int
    n: int
    d: int
    p: float
    separation: float
    test_n: int
    test_fraction: float
    target_p: float
    scorer: str
    hidden: int
    algo: str
    workers: int
    stages: int
    schedule: str
    eta0: float
    T0: int
    comm_interval: int
    L_v: float
    mu: float
    G_h: float
    eta_cap: float
    batch: int
    seed: int
    eval_every: int
    track_phi: bool
    timings: bool
    out: str

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.dataset not in ("synth", "libsvm", "csv"):
        raise ValueError(f"dataset must be synth|libsvm|csv, got {cfg.dataset!r}")
    if cfg.dataset != "synth" and not cfg.data_path:
        raise ValueError(f"dataset={cfg.dataset} needs data_path")
    if cfg.scorer not in ("linear_sigmoid", "mlp_sigmoid"):
        raise ValueError(f"unknown scorer {cfg.scorer!r}")
    if cfg.algo not in ALGOS:
        raise ValueError(f"algo must be one of {ALGOS}, got {cfg.algo!r}")
    if cfg.schedule not in SCHEDULE_MODES:
        raise ValueError(f"schedule must be one of {SCHEDULE_MODES}, got {cfg.schedule!r}")
    if cfg.algo == "ppdsg":
        if cfg.workers != 1:
            raise ValueError("ppdsg requires K=1")
        if cfg.comm_interval not in (0, 1):
            raise ValueError("ppdsg requires I=1")
        cfg = cfg.replace(comm_interval=1)
    elif cfg.algo == "np_ppdsg":
        if cfg.comm_interval not in (0, 1):
            raise ValueError("np_ppdsg requires I=1")
        cfg = cfg.replace(comm_interval=1)
    if cfg.workers < 1 or cfg.stages < 1 or cfg.batch < 1:
        raise ValueError("workers, stages and batch must be >= 1")
    if cfg.eta0 <= 0.0:
        raise ValueError(f"eta0 must be positive, got {cfg.eta0}")
    return cfg


def parse_kv_text(text: str, context: str = "<config>") -> dict:
    """Strict flat key=value parser; unknown keys and bad values are rejected."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"{context}:{ln}: expected key=value, got {raw!r}")
        key = key.strip()
        val = val.strip()
        if key not in SCHEMA:
            raise ValueError(f"{context}:{ln}: unknown key {key!r}")
        if key in out:
            raise ValueError(f"{context}:{ln}: duplicate key {key!r}")
        typ, _ = SCHEMA[key]
        try:
            out[key] = typ(val)
        except ValueError as e:
            raise ValueError(f"{context}:{ln}: bad value for {key}: {e}") from None
    return out


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a validated RunConfig from an optional file plus flag overrides.

    Defaulted keys are echoed to the log so every run is fully reconstructable
    from its log alone.
    """
    values = {}
    if path is not None:
        values.update(parse_kv_text(Path(path).read_text(), context=str(path)))
    for key, val in (overrides or {}).items():
        if key not in SCHEMA:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = val
    filled = {}
    for key, (_, default) in SCHEMA.items():
        if key in values:
            filled[key] = values[key]
        else:
            filled[key] = default
            log.info("config default applied: %s=%s", key, default)
    return _validate(RunConfig(**filled))


def serialize_config(cfg: RunConfig) -> str:
    lines = [f"{key}={getattr(cfg, key)}" for key in SCHEMA]
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:16]


def _load_data(cfg: RunConfig):
    """Training and test datasets per the config; rebalancing touches only training data."""
    if cfg.dataset == "synth":
        train = dat.synth_gaussians(cfg.n, cfg.d, cfg.p, cfg.separation, cfg.seed)
        test = dat.synth_gaussians(cfg.test_n, cfg.d, cfg.p, cfg.separation, cfg.seed + 1)
    else:
        loader = dat.load_libsvm if cfg.dataset == "libsvm" else dat.load_csv
        if cfg.dataset == "libsvm" and cfg.dim_hint > 0:
            full = loader(cfg.data_path, dim_hint=cfg.dim_hint)
        else:
            full = loader(cfg.data_path)
        train, test = dat.train_test_split(full, cfg.test_fraction, cfg.seed + 1)
    if cfg.target_p > 0.0:
        train = dat.rebalance(train, cfg.target_p, cfg.seed + 2)
    return train, test


def _build_problem(cfg: RunConfig, train):
    """Scorer spec, initial primal point, and resolved constants for a run."""
    hidden = cfg.hidden if cfg.scorer == "mlp_sigmoid" else None
    spec = ScorerSpec(kind=cfg.scorer, dim=train.dim, hidden=hidden)
    w0 = init_params(spec, seed=cfg.seed + 3)
    g_h = cfg.G_h if cfg.G_h > 0.0 else lipschitz_bound(spec, train, params=w0)
    if cfg.L_v > 0.0:
        l_v = cfg.L_v
    else:
        l_h = smoothness_bound(spec, train, params=w0)
        l_v = default_l_v(train.positive_ratio, g_h, l_h)
        log.info("resolved L_v=%.4g from G_h=%.4g, L_h=%.4g", l_v, g_h, l_h)
    v0 = make_primal(w0) if cfg.scorer == "mlp_sigmoid" else None
    coda = CodaConfig(
        workers=cfg.workers, stages=cfg.stages, eta0=cfg.eta0,
        l_v=l_v, mu=cfg.mu, g_h=g_h, p=train.positive_ratio, seed=cfg.seed,
        schedule_mode=cfg.schedule, t0=cfg.T0,
        comm_interval_override=cfg.comm_interval if cfg.comm_interval > 0 else None,
        eta_max=cfg.eta_cap if cfg.eta_cap > 0.0 else None,
        batch=cfg.batch, v0=v0,
    )
    return spec, coda


def run_experiment(cfg: RunConfig) -> int:
    """Execute one configured run end to end; returns a process exit status."""
    h = config_hash(cfg)
    out_path = Path(cfg.out)
    try:
        train, test = _load_data(cfg)
        log.info("train: %r  test: %r  config=%s", train, test, h)
        spec, coda = _build_problem(cfg, train)
        cluster = ClusterSim.build(train, cfg.workers, cfg.seed)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w") as fh:
            def sink(rec):
                fh.write(json.dumps(rec.to_record(config_hash=h, include_timing=cfg.timings),
                                    sort_keys=True) + "\n")
                fh.flush()

            v, metrics = run_coda(coda, cluster, spec, test_ds=test,
                                  eval_every=cfg.eval_every,
                                  track_phi=cfg.track_phi, sink=sink)
            summary = {
                "type": "summary",
                "final_auc": metrics[-1].test_auc,
                "total_iterations": metrics[-1].cumulative_iterations,
                "total_rounds": cluster.ledger.rounds,
                "scalars_up": cluster.ledger.scalars_up,
                "scalars_down": cluster.ledger.scalars_down,
                "config_hash": h,
            }
            fh.write(json.dumps(summary, sort_keys=True) + "\n")
        print(f"final_auc={summary['final_auc']:.6f} rounds={summary['total_rounds']} "
              f"iterations={summary['total_iterations']} config={h} out={out_path}")
        return 0
    except Exception as e:  # noqa: BLE001 - structured error contract
        err = {"type": "error", "error": type(e).__name__, "message": str(e), "config_hash": h}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        log.exception("run failed")
        return 1


def _sweep_value(cfg: RunConfig, key: str, raw: str) -> RunConfig:
    typ, _ = SCHEMA[key]
    return cfg.replace(**{key: typ(raw)})


def sweep(cfg: RunConfig, vary: str, parallel: int = 0,
          target_auc: float | None = None) -> int:
    """Run one tagged experiment per value of ``--vary key=v1,v2,...``.

    Writes a per-run metrics file plus a summary table with final AUC,
    rounds, and (when a target is given) iterations to first reach it.
    """
    key, sep, vals = vary.partition("=")
    key = key.strip()
    if not sep or key not in SCHEMA:
        raise ValueError(f"--vary needs key=v1,v2,... with a known key, got {vary!r}")
    values = [v.strip() for v in vals.split(",") if v.strip()]
    if not values:
        raise ValueError("--vary got an empty value list")
    base_out = Path(cfg.out)
    configs = []
    for raw in values:
        tagged = _sweep_value(cfg, key, raw)
        tagged = tagged.replace(out=str(base_out.with_name(
            f"{base_out.stem}__{key}_{raw}{base_out.suffix or '.jsonl'}")))
        configs.append(tagged)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            statuses = list(pool.map(run_experiment, configs))
    else:
        statuses = [run_experiment(c) for c in configs]

    rows = []
    for raw, tagged, status in zip(values, configs, statuses):
        row = {"type": "sweep_row", "key": key, "value": raw,
               "status": status, "out": tagged.out,
               "config_hash": config_hash(tagged)}
        if status == 0:
            recs = [json.loads(line) for line in Path(tagged.out).read_text().splitlines()]
            summary = recs[-1]
            row["final_auc"] = summary["final_auc"]
            row["total_rounds"] = summary["total_rounds"]
            row["total_iterations"] = summary["total_iterations"]
            if target_auc is not None:
                hit = [r for r in recs if r.get("type") == "metrics"
                       and r["test_auc"] >= target_auc]
                row["iterations_to_target"] = hit[0]["cumulative_iterations"] if hit else None
                row["target_auc"] = target_auc
        rows.append(row)
    table_path = base_out.with_name(f"{base_out.stem}__sweep_{key}.jsonl")
    table_path.parent.mkdir(parents=True, exist_ok=True)
    with open(table_path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    for row in rows:
        itt = row.get("iterations_to_target")
        print(f"{key}={row['value']}: final_auc={row.get('final_auc', float('nan')):.6f} "
              f"rounds={row.get('total_rounds', -1)}"
              + (f" iterations_to_target={itt}" if target_auc is not None else ""))
    return max(statuses)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="distauc",
                                     description="distributed AUC maximization simulator")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", default=None, help="flat key=value config file")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--algo", choices=ALGOS, default=None)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--comm-interval", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="run a one-key sweep")
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--vary", required=True, help="key=v1,v2,...")
    p_sweep.add_argument("--parallel", type=int, default=0,
                         help="run sweep points in this many processes")
    p_sweep.add_argument("--target-auc", type=float, default=None)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    for flag, key in (("seed", "seed"), ("out", "out"), ("algo", "algo"),
                      ("workers", "workers"), ("comm_interval", "comm_interval")):
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = val
    try:
        cfg = parse_config(args.config, overrides)
        if args.cmd == "run":
            return run_experiment(cfg)
        return sweep(cfg, args.vary, parallel=args.parallel, target_auc=args.target_auc)
    except (ValueError, OSError) as e:
        print(json.dumps({"type": "error", "error": type(e).__name__, "message": str(e)},
                         sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
