"""Command line entry point: ``eqdag <command> ...``.

Every command resolves its settings from built-in defaults, then an optional
YAML config file (``--config`` or the ``EQDAG_CONFIG`` environment
variable), then explicit command-line flags.  The resolved settings are
stored in ``manifest.json`` in the output directory, and ``eqdag rerun``
replays a manifest.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import yaml

from . import io
from .dataset import DataError, load_matrix
from .evaluate import (exact_posterior, gelman_rubin, gr_summary, metrics,
                       summarize_reports)
from .graph import Dag
from .mcmc import ChainConfig, MultiChainError, mean_pip, run_multichain
from .score import Hyperparams
from .selection import SelectionCache
from .simulate import (SWEEP_B, SimConfig, heterogeneity_sweep, make_rng, preset,
                       sample_truth, gen_data, strong_truth_p4, with_data)
from .topdown import itd

log = logging.getLogger("eqdag")

CONFIG_ENV = "EQDAG_CONFIG"

HYPER_DEFAULTS = {"c0": 3.0, "alpha": 0.99, "gamma": 0.01, "kappa": 0.0, "d_in": None}
DATA_DEFAULTS = {"data": None, "header": False, "standardize": False}

DEFAULTS = {
    "simulate": {
        "preset": None, "p": 40, "n": 500, "edge_prob": None,
        "weights": ["uniform", 0.3, 1.0], "variances": ["equal", 1.0],
        "seed": 0, "sweep": False, "replicates": 1,
    },
    "learn": {
        **DATA_DEFAULTS, "iterations": 3000, "burn_in": None, "neighborhood": "adjacent",
        "score": "nondecomposable", "chains": 1, "seed": 0, "init": "itd",
        "rb_stride": 1, "sample_stride": 1, "max_outer": 20, "threshold": None,
        "hyper": HYPER_DEFAULTS,
    },
    "eval": {"truth": None, "learn": None, "threshold": None},
    "diagnose": {"learn_dirs": [], "cutoff": 1.1},
    "oracle": {
        **DATA_DEFAULTS, "score": "nondecomposable", "hyper": HYPER_DEFAULTS,
        "trend": False, "ns": [50, 200, 1000], "replicates": 20, "seed": 0,
    },
    "topdown": {**DATA_DEFAULTS, "max_outer": 20, "hyper": HYPER_DEFAULTS},
}


class ConfigError(ValueError):
    pass


class UsageError(RuntimeError):
    pass


def _tool_version() -> str:
    try:
        return version("eqdag")
    except PackageNotFoundError:
        return "unknown"


# ---------------------------------------------------------------- config


def _key_line(text: str, path: list) -> int | None:
    """Line (1-based) of a nested mapping key in a YAML document."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return None
    for key in path:
        if not isinstance(node, yaml.MappingNode):
            return None
        for k, v in node.value:
            if k.value == key:
                line = k.start_mark.line + 1
                node = v
                break
        else:
            return None
    return line


def load_config(path, command: str) -> dict:
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"{path}: invalid YAML{where}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    # a config may hold settings for several commands under their names
    if command in doc and isinstance(doc[command], dict):
        section, prefix = doc[command], [command]
    else:
        section, prefix = doc, []
    _check_keys(section, DEFAULTS[command], text, path, prefix)
    return section


def _check_keys(section: dict, defaults: dict, text: str, path, prefix: list):
    for key, value in section.items():
        if key in DEFAULTS and not prefix and key not in defaults:
            continue  # another command's section
        if key not in defaults:
            line = _key_line(text, prefix + [key])
            where = f" line {line}" if line else ""
            raise ConfigError(f"{path}:{where}: unknown key {'.'.join(prefix + [key])!r}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: key {key!r} must be a mapping")
            _check_keys(value, defaults[key], text, path, prefix + [key])


def resolve(command: str, config_path, overrides: dict) -> dict:
    """Defaults, then config file, then command-line flags.

    For ``simulate`` a named preset replaces the defaults of the fields it
    defines; the result is fully explicit so a manifest can replay it.
    """
    cfg = copy.deepcopy(DEFAULTS[command])
    given: dict = {}
    if config_path is None:
        config_path = os.environ.get(CONFIG_ENV) or None
    if config_path is not None:
        given.update(copy.deepcopy(load_config(config_path, command)))
    for key, value in overrides.items():
        if value is None:
            continue
        if key in HYPER_DEFAULTS and "hyper" in cfg:
            given.setdefault("hyper", {})[key] = value
        else:
            given[key] = value
    if command == "simulate" and given.get("preset"):
        try:
            cfg.update(preset(given["preset"]).to_dict())
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    for key, value in given.items():
        if isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    return cfg


def _hyper(cfg: dict) -> Hyperparams:
    try:
        return Hyperparams(**cfg["hyper"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"hyper: {exc}") from None


def _data(cfg: dict):
    if not cfg.get("data"):
        raise ConfigError("no data file given")
    data = load_matrix(cfg["data"], has_header=cfg["header"])
    return data.standardized() if cfg["standardize"] else data


def _write_manifest(out: Path, command: str, cfg: dict, artifacts: list, start: float):
    io.write_json(out / "manifest.json", {
        "command": command,
        "config": cfg,
        "seed": cfg.get("seed"),
        "artifacts": sorted(str(a) for a in artifacts),
        "version": _tool_version(),
        "wall_time": time.perf_counter() - start,
    })


# --------------------------------------------------------------- commands


def _write_truth(out: Path, truth, sim_cfg: SimConfig) -> list:
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "data.csv": lambda f: io.write_matrix(f, truth.data.values),
        "dag.txt": lambda f: io.write_edge_list(f, truth.dag),
        "weights.csv": lambda f: io.write_matrix(f, truth.weights),
        "variances.csv": lambda f: io.write_matrix(f, truth.variances[None, :]),
        "ordering.json": lambda f: f.write_text(json.dumps([v + 1 for v in truth.ordering]) + "\n"),
    }
    for name, write in files.items():
        write(out / name)
    io.write_json(out / "truth.json", sim_cfg.to_dict())
    return list(files) + ["truth.json"]


def _sim_config(cfg: dict) -> SimConfig:
    fields = {k: cfg[k] for k in ("p", "n", "edge_prob", "weights", "variances", "seed")}
    try:
        return SimConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def cmd_simulate(cfg: dict, out: Path) -> list:
    base = _sim_config(cfg)
    if cfg["sweep"]:
        targets = [(f"b{b:.1f}", c) for b, c in zip(SWEEP_B, heterogeneity_sweep(base))]
    else:
        targets = [("", base)]
    reps = int(cfg["replicates"])
    if reps < 1:
        raise ConfigError("replicates must be at least 1")
    artifacts = []
    for sub, sc in targets:
        for r in range(reps):
            rep_cfg = SimConfig(**{**sc.to_dict(), "seed": sc.seed + r})
            where = out / sub if sub else out
            if reps > 1:
                where = where / f"rep{r:03d}"
            rng = make_rng(rep_cfg.seed)
            truth = sample_truth(rep_cfg, rng)
            truth.data = gen_data(truth, rep_cfg.n, rng)
            names = _write_truth(where, truth, rep_cfg)
            artifacts += [str((where / n).relative_to(out)) for n in names]
    return artifacts


def _learn_one(cfg: dict, data, out: Path, jobs: int) -> list:
    h = _hyper(cfg)
    try:
        chain_cfg = ChainConfig(
            iterations=int(cfg["iterations"]), burn_in=cfg["burn_in"],
            neighborhood=cfg["neighborhood"], seed=int(cfg["seed"]), init=cfg["init"],
            hyper=h, score_kind=cfg["score"], rb_stride=int(cfg["rb_stride"]),
            sample_stride=int(cfg["sample_stride"]), max_outer=int(cfg["max_outer"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    outputs = run_multichain(chain_cfg, int(cfg["chains"]), data, jobs=jobs)
    out.mkdir(parents=True, exist_ok=True)
    pip = mean_pip(outputs)
    io.write_matrix(out / "pip.csv", pip)
    io.write_trace(out / "trace.csv", [o.trace for o in outputs])
    io.write_edge_list(out / "dag.txt", outputs[0].final_dag)
    io.write_ordering(out / "start_ordering.json", outputs[0].initial_ordering)
    artifacts = ["pip.csv", "trace.csv", "dag.txt", "start_ordering.json"]
    if chain_cfg.sample_stride:
        io.write_samples(out / "samples.jsonl", outputs)
        artifacts.append("samples.jsonl")
    if cfg["threshold"] is not None:
        called = np.argwhere(pip > float(cfg["threshold"]))
        io.write_edges(out / "dag_thresholded.txt", pip.shape[0], called.tolist())
        artifacts.append("dag_thresholded.txt")
    io.write_json(out / "summary.json", {
        "chains": len(outputs),
        "acceptance_rate": [o.acceptance_rate for o in outputs],
        "effective_iterations": [o.effective_iterations for o in outputs],
        "final_log_score": [float(o.trace["log_score"][-1]) if len(o.trace) else o.initial_log_score
                            for o in outputs],
    })
    return artifacts + ["summary.json"]


def cmd_learn(cfg: dict, out: Path, jobs: int = 1) -> list:
    return _learn_one(cfg, _data(cfg), out, jobs)


def _eval_pair(truth_dir: Path, learn_dir: Path, threshold):
    for f in (truth_dir / "dag.txt", learn_dir / "pip.csv"):
        if not f.exists():
            raise FileNotFoundError(f"missing {f}")
    pip = io.read_matrix(learn_dir / "pip.csv")
    truth = io.read_edge_list(truth_dir / "dag.txt", p=pip.shape[0]).adjacency()
    if truth.shape != pip.shape:
        raise DataError(f"dimension mismatch: truth {truth.shape} vs estimate {pip.shape}")
    return metrics(truth, pip, threshold=threshold)


def cmd_eval(cfg: dict, out: Path) -> list:
    if not cfg["truth"] or not cfg["learn"]:
        raise ConfigError("eval needs a truth directory and a learn directory")
    tdir, ldir = Path(cfg["truth"]), Path(cfg["learn"])
    for d in (tdir, ldir):
        if not d.is_dir():
            raise FileNotFoundError(f"missing directory {d}")
    out.mkdir(parents=True, exist_ok=True)
    if (tdir / "dag.txt").exists():
        report = _eval_pair(tdir, ldir, cfg["threshold"]).to_dict()
    else:
        reps = sorted(d.name for d in tdir.iterdir() if (d / "dag.txt").exists())
        if not reps:
            raise FileNotFoundError(f"no dag.txt in {tdir} or its subdirectories")
        per = {name: _eval_pair(tdir / name, ldir / name, cfg["threshold"]) for name in reps}
        report = summarize_reports(list(per.values()))
        report["per_replicate"] = {k: v.to_dict() for k, v in per.items()}
    io.write_json(out / "report.json", report)
    print(json.dumps(report if "per_replicate" not in report
                     else {k: v for k, v in report.items() if k != "per_replicate"}, indent=2))
    return ["report.json"]


def cmd_diagnose(cfg: dict, out: Path) -> list:
    streams = []
    p = None
    for d in map(Path, cfg["learn_dirs"]):
        if not (d / "samples.jsonl").exists():
            raise FileNotFoundError(f"missing {d / 'samples.jsonl'}")
        q = io.read_matrix(d / "pip.csv").shape[0]
        if p is not None and q != p:
            raise DataError("learn directories disagree on p")
        p = q
        chains = io.samples_to_indicators(io.read_samples(d / "samples.jsonl"), p)
        streams += [chains[k] for k in sorted(chains)]
    if len(streams) < 2:
        raise UsageError(f"need at least two chains, found {len(streams)}")
    r = gelman_rubin(streams)
    out.mkdir(parents=True, exist_ok=True)
    io.write_matrix(out / "gr.csv", r)
    summary = gr_summary(r, float(cfg["cutoff"]))
    summary["chains"] = len(streams)
    io.write_json(out / "gr_summary.json", summary)
    print(json.dumps(summary, indent=2))
    return ["gr.csv", "gr_summary.json"]


def _write_oracle_tables(out: Path, post) -> list:
    order_rows = sorted(post.order_probs.items(), key=lambda kv: kv[0].perm)
    with open(out / "orderings.csv", "w") as fh:
        fh.write("ordering,probability,log_score,map_edges\n")
        for sigma, prob in order_rows:
            g = post.map_dag_by_order[sigma]
            edges = ";".join(f"{i + 1}>{j + 1}" for i, j in g.edges())
            perm = "-".join(str(v + 1) for v in sigma.perm)
            fh.write(f"{perm},{prob!r},{post.order_log_scores[sigma]!r},{edges}\n")
    with open(out / "dags.csv", "w") as fh:
        fh.write("edges,probability\n")
        for masks, prob in sorted(post.dag_probs.items(), key=lambda kv: -kv[1]):
            edges = ";".join(f"{i + 1}>{j + 1}" for i, j in Dag.from_masks(masks).edges())
            fh.write(f"{edges},{prob!r}\n")
    return ["orderings.csv", "dags.csv"]


def cmd_oracle(cfg: dict, out: Path) -> list:
    h = _hyper(cfg)
    out.mkdir(parents=True, exist_ok=True)
    if not cfg["trend"]:
        post = exact_posterior(_data(cfg), h, cfg["score"])
        return _write_oracle_tables(out, post)
    truth = strong_truth_p4()
    ns = [int(v) for v in cfg["ns"]]
    reps = int(cfg["replicates"])
    table = np.empty((reps, len(ns)))
    for c, n in enumerate(ns):
        for r in range(reps):
            tr = with_data(truth, n, int(cfg["seed"]) + 1000 * c + r)
            table[r, c] = exact_posterior(tr.data, h, cfg["score"]).dag_prob(truth.dag)
    with open(out / "trend.csv", "w") as fh:
        fh.write("replicate," + ",".join(f"n{n}" for n in ns) + "\n")
        for r in range(reps):
            fh.write(f"{r}," + ",".join(repr(float(v)) for v in table[r]) + "\n")
    medians = {str(n): float(np.median(table[:, c])) for c, n in enumerate(ns)}
    io.write_json(out / "trend_summary.json", {"median_true_dag_prob": medians})
    print(json.dumps(medians))
    return ["trend.csv", "trend_summary.json"]


def cmd_topdown(cfg: dict, out: Path) -> list:
    data = _data(cfg)
    res = itd(data, SelectionCache(data, _hyper(cfg)), max_outer=int(cfg["max_outer"]))
    out.mkdir(parents=True, exist_ok=True)
    io.write_ordering(out / "ordering.json", res.ordering)
    io.write_json(out / "topdown.json", {
        "ordering": [v + 1 for v in res.ordering.perm],
        "rss": res.rss.tolist(),
        "outer_iterations": res.outer_iterations,
        "converged": res.converged,
    })
    print(json.dumps([v + 1 for v in res.ordering.perm]))
    return ["ordering.json", "topdown.json"]


COMMANDS = {
    "simulate": cmd_simulate,
    "learn": cmd_learn,
    "eval": cmd_eval,
    "diagnose": cmd_diagnose,
    "oracle": cmd_oracle,
    "topdown": cmd_topdown,
}


def execute(command: str, cfg: dict, out: Path, jobs: int = 1) -> list:
    start = time.perf_counter()
    out.mkdir(parents=True, exist_ok=True)
    if command == "learn":
        artifacts = cmd_learn(cfg, out, jobs)
    else:
        artifacts = COMMANDS[command](cfg, out)
    _write_manifest(out, command, cfg, artifacts, start)
    return artifacts


# ------------------------------------------------------------------ parser


def _pair(text: str):
    parts = text.split(":")
    name = parts[0]
    return [name] + [float(v) for v in parts[1:]]


def _add_data_args(sp):
    sp.add_argument("data", nargs="?", help="CSV data file, one observation per row")
    sp.add_argument("--header", action="store_true", default=None, help="first row holds names")
    sp.add_argument("--standardize", action="store_true", default=None,
                    help="center and scale columns before learning")


def _add_hyper_args(sp):
    sp.add_argument("--c0", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--d-in", dest="d_in", type=int, help="maximum in-degree")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eqdag", description="Order MCMC for equal-variance Gaussian DAGs.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help=f"YAML config (default: ${CONFIG_ENV})")
        sp.add_argument("--out", "-o", required=True, help="output directory")

    sp = sub.add_parser("simulate", help="simulate a random SEM and data")
    common(sp)
    sp.add_argument("--preset")
    sp.add_argument("--p", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--edge-prob", dest="edge_prob", type=float)
    sp.add_argument("--weights", type=_pair, help="uniform:LO:HI or normal")
    sp.add_argument("--variances", type=_pair, help="equal:OMEGA or heterogeneous:B")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--sweep", action="store_true", default=None,
                    help="one subdirectory per heterogeneity level b = 0, 0.1, ..., 0.9")
    sp.add_argument("--replicates", type=int)

    sp = sub.add_parser("learn", help="run the order sampler on a data file")
    common(sp)
    _add_data_args(sp)
    _add_hyper_args(sp)
    sp.add_argument("--iterations", "-T", type=int)
    sp.add_argument("--burn-in", dest="burn_in", type=int)
    sp.add_argument("--neighborhood", choices=["adjacent", "transposition", "shuffle",
                                                "adj", "rtp", "rrs"])
    sp.add_argument("--score", choices=["nondecomposable", "decomposable"])
    sp.add_argument("--chains", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--init", choices=["itd", "random"])
    sp.add_argument("--rb-stride", dest="rb_stride", type=int)
    sp.add_argument("--sample-stride", dest="sample_stride", type=int)
    sp.add_argument("--max-outer", dest="max_outer", type=int)
    sp.add_argument("--threshold", type=float, help="PIP cutoff for a hard edge list")
    sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("eval", help="score a learned PIP matrix against the truth")
    common(sp)
    sp.add_argument("truth")
    sp.add_argument("learn")
    sp.add_argument("--threshold", type=float)

    sp = sub.add_parser("diagnose", help="per-edge Gelman-Rubin factors across chains")
    common(sp)
    sp.add_argument("learn_dirs", nargs="+")
    sp.add_argument("--cutoff", type=float)

    sp = sub.add_parser("oracle", help="exact posterior by enumeration (p <= 6)")
    common(sp)
    _add_data_args(sp)
    _add_hyper_args(sp)
    sp.add_argument("--score", choices=["nondecomposable", "decomposable"])
    sp.add_argument("--trend", action="store_true", default=None,
                    help="posterior of the fixed four-node truth across sample sizes")
    sp.add_argument("--ns", type=lambda s: [int(v) for v in s.split(",")])
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("topdown", help="iterated top-down ordering estimate")
    common(sp)
    _add_data_args(sp)
    _add_hyper_args(sp)
    sp.add_argument("--max-outer", dest="max_outer", type=int)

    sp = sub.add_parser("rerun", help="replay a run from its manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", "-o", help="output directory (default: the manifest's)")
    sp.add_argument("--jobs", type=int, default=1)
    return ap


_NOT_CONFIG = {"command", "config", "out", "verbose", "jobs"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "rerun":
            man = io.read_json(args.manifest)
            out = Path(args.out) if args.out else Path(args.manifest).parent
            execute(man["command"], man["config"], out, args.jobs)
            return 0
        overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
        cfg = resolve(args.command, args.config, overrides)
        execute(args.command, cfg, Path(args.out), getattr(args, "jobs", 1))
    except (ConfigError, UsageError, DataError, FileNotFoundError, MultiChainError,
            ValueError) as exc:
        print(f"eqdag {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
