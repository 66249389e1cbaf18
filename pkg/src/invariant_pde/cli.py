"""Command-line front end: dataset generation, training, reports, verification.

Subcommands
-----------
gen-data          solve the configured experiment for all seeds, write PDED
                  trajectory files plus a JSON manifest
train             fit the configured network to a generated dataset; writes
                  model.pdem, loss_history.csv, report.json, pde.txt
report            aggregate coefficient tables and remaining-term counts
                  (thresholds 1e-6 and 1e-2) across model files
verify-invariance frame-boost covariance checks of a model or known truth
                  against a trajectory file; emits a CSV of verdicts
expand            dump the candidate-term expansion of a model file

Every command is deterministic given config and seed; reruns are bitwise
identical except the manifest timestamp.  Exit codes: 0 success, 1 runtime
failure (divergence, blow-up), 2 usage or config errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from invariant_pde import grid as gridmod
from invariant_pde import invariance as inv
from invariant_pde import solvers, train as trainmod
from invariant_pde.modelio import read_model, write_model
from invariant_pde.rollout import RolloutConfig
from invariant_pde.symnet import NetConfig, expand_to_terms, linear_readout_params, parse_term
from invariant_pde.train import DiscoveredPDE, TrainConfig, extract_pde


class ConfigError(ValueError):
    pass


EXPERIMENTS = ("burgers", "sine_gordon", "custom")

DEFAULT_CONFIGS = {
    "burgers": {
        "experiment": "burgers",
        "kind": "galileo",
        "seed": 0,
        "grid": {"n": 64, "length": 2.0 * math.pi},
        "solver": {
            "nu": 0.05,
            "t_end": 1.0,
            "solver_dt": 0.0025,
            "save_every": 4,
            "n_trajectories": 10,
            "ic_modes": 4,
            "ic_amplitude": 0.7,
            "ic_offset": 0.4,
        },
        "net": {"k": 2, "max_deriv": 3, "include_sin_exp": None},
        "train": {
            "epochs": 3000,
            "learning_rate": 1e-3,
            "l1_weight": 1e-6,
            "n_blocks": 4,
            "batch_size": 8,
            "hard_threshold": 1e-3,
            "threshold_epoch": None,
        },
    },
    "sine_gordon": {
        "experiment": "sine_gordon",
        "kind": "lorentz",
        "seed": 0,
        "grid": {"n": 64, "length": 2.0 * math.pi},
        "solver": {
            "m2": 10.0,
            "c2": 0.5,
            "t_end": 1.0,
            "solver_dt": 0.00125,
            "save_every": 4,
            "n_trajectories": 10,
            "ic_modes": 4,
            "ic_amplitude": 2.0,
            "ic_offset": 0.5,
        },
        "net": {"k": 2, "max_deriv": 3, "include_sin_exp": None},
        "train": {
            "epochs": 4000,
            "learning_rate": 5e-3,
            "l1_weight": 1e-8,
            "n_blocks": 4,
            "batch_size": 8,
            "hard_threshold": 1e-3,
            "threshold_epoch": None,
        },
    },
}

ALLOWED_KINDS = {
    "burgers": ("galileo", "baseline"),
    "sine_gordon": ("lorentz", "baseline"),
    "custom": ("galileo", "baseline", "lorentz"),
}

TRUTH_TERMS = {
    "burgers": [
        {"u*u_x": -1.0, "v*u_y": -1.0, "u_xx": 0.05, "u_yy": 0.05},
        {"u*v_x": -1.0, "v*v_y": -1.0, "v_xx": 0.05, "v_yy": 0.05},
    ],
    "sine_gordon": [{"sin(u)": 10.0, "u_xx": 0.5, "u_yy": 0.5}],
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = val
    return out


def load_config(path=None, experiment=None, seed=None) -> dict:
    override = {}
    if path is not None:
        with open(path) as fh:
            override = json.load(fh)
    exp = experiment or override.get("experiment")
    if exp is None:
        raise ConfigError("an experiment name is required (--experiment or config file)")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}")
    if exp == "custom":
        raise ConfigError("custom experiments need a full config file with solver settings")
    cfg = _merge(DEFAULT_CONFIGS[exp], override)
    if seed is not None:
        cfg["seed"] = seed
    kind = cfg["kind"]
    if kind not in ALLOWED_KINDS[exp]:
        raise ConfigError(f"kind {kind!r} is not allowed for experiment {exp!r}")
    return cfg


def _grid_from_config(cfg: dict) -> gridmod.GridSpec:
    return gridmod.square_grid(cfg["grid"]["n"], cfg["grid"]["length"])


def _net_config(cfg: dict) -> NetConfig:
    n = 2 if cfg["experiment"] == "burgers" else 1
    return NetConfig(
        kind=cfg["kind"],
        n=n,
        k=cfg["net"]["k"],
        ndim=2,
        max_deriv=cfg["net"]["max_deriv"],
        include_sin_exp=cfg["net"]["include_sin_exp"],
    )


def _train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        epochs=t["epochs"],
        learning_rate=t["learning_rate"],
        l1_weight=t["l1_weight"],
        n_blocks=t["n_blocks"],
        batch_size=t["batch_size"],
        seed=cfg["seed"],
        hard_threshold=t["hard_threshold"],
        threshold_epoch=t["threshold_epoch"],
    )


def scheme_for(experiment: str) -> str:
    return "second" if experiment == "sine_gordon" else "first"


def generate_trajectory(cfg: dict, seed: int) -> gridmod.Trajectory:
    g = _grid_from_config(cfg)
    s = cfg["solver"]
    if cfg["experiment"] == "burgers":
        spec = solvers.BurgersSpec(
            nu=s["nu"], grid=g, t_end=s["t_end"], solver_dt=s["solver_dt"], save_every=s["save_every"]
        )
        ic = gridmod.sample_initial_condition(
            g, n=2, seed=seed, n_modes=s["ic_modes"], amplitude=s["ic_amplitude"],
            offset=s.get("ic_offset", 0.0),
        )
        return solvers.solve_burgers2d(spec, ic)
    spec = solvers.SineGordonSpec(
        m2=s["m2"], c2=s["c2"], grid=g, t_end=s["t_end"], solver_dt=s["solver_dt"], save_every=s["save_every"]
    )
    ic = gridmod.sample_initial_condition(
        g, n=1, seed=seed, n_modes=s["ic_modes"], amplitude=s["ic_amplitude"],
        offset=s.get("ic_offset", 0.0),
    )
    return solvers.solve_sine_gordon2d(spec, ic)


def cmd_gen_data(cfg: dict, out_dir: Path, force: bool = False) -> list[Path]:
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise ConfigError(f"output directory {out_dir} is not empty (use --force)")
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    entries = []
    n_traj = cfg["solver"]["n_trajectories"]
    for i in range(n_traj):
        seed = cfg["seed"] * 10000 + i
        traj = generate_trajectory(cfg, seed)
        name = f"traj_{i:03d}.pded"
        gridmod.write_trajectory(traj, out_dir / name)
        files.append(out_dir / name)
        entries.append(
            {
                "file": name,
                "seed": seed,
                "nx": traj.spec.nx,
                "ny": traj.spec.ny,
                "n_components": traj.n_components,
                "n_snapshots": traj.n_snapshots,
                "dt": traj.dt,
            }
        )
    manifest = {
        "experiment": cfg["experiment"],
        "config": cfg,
        "files": entries,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return files


def load_dataset(data_dir: Path) -> tuple[dict, list[gridmod.Trajectory]]:
    data_dir = Path(data_dir)
    manifest_path = data_dir / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest.json in {data_dir}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    trajs = [gridmod.read_trajectory(data_dir / e["file"]) for e in manifest["files"]]
    return manifest, trajs


def _format_equation(comp: int, terms: dict, scheme: str, display_threshold: float = 1e-2) -> str:
    from invariant_pde.symnet import comp_name

    lhs = f"{comp_name(comp)}_t" + ("t" if scheme == "second" else "")
    shown = [(t.name, c) for t, c in terms.items() if abs(c) >= display_threshold]
    shown.sort(key=lambda kv: -abs(kv[1]))
    if not shown:
        return f"{lhs} = 0"
    parts = []
    for name, c in shown:
        sign = "-" if c < 0 else "+"
        mag = f"{abs(c):.4f}"
        body = mag if name == "1" else f"{mag}*{name}"
        parts.append(f"{sign} {body}" if parts else (f"-{body}" if c < 0 else body))
    return f"{lhs} = " + " ".join(parts)


def cmd_train(cfg: dict, data_dir: Path, out_dir: Path) -> DiscoveredPDE:
    manifest, trajs = load_dataset(data_dir)
    if manifest["experiment"] != cfg["experiment"]:
        raise ConfigError(
            f"dataset is for {manifest['experiment']!r}, config is {cfg['experiment']!r}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    net_cfg = _net_config(cfg)
    train_cfg = _train_config(cfg)
    scheme = scheme_for(cfg["experiment"])
    try:
        result = trainmod.train_model(net_cfg, train_cfg, trajs, scheme=scheme)
    except trainmod.TrainingDivergedError as exc:
        trainmod.write_loss_csv(out_dir / "loss_history.csv", exc.history)
        raise
    trainmod.write_loss_csv(out_dir / "loss_history.csv", result.history)
    write_model(out_dir / "model.pdem", net_cfg, result.nets, cfg["experiment"])
    pde = extract_pde(result.nets, net_cfg, report_threshold=1e-6)
    trainmod.write_pde_report(out_dir / "report.json", pde)
    with open(out_dir / "pde.txt", "w") as fh:
        for comp in range(net_cfg.n):
            fh.write(_format_equation(comp, pde.terms[comp], scheme) + "\n")
    return pde


def cmd_report(model_paths: list[Path], out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    models = []
    experiment = None
    for p in model_paths:
        cfg, nets, exp = read_model(p)
        if experiment is None:
            experiment = exp
        elif exp != experiment:
            raise ConfigError(f"model {p} is for {exp!r}, others are for {experiment!r}")
        models.append((Path(p).stem + f"[{cfg.kind}]", cfg, nets))

    from invariant_pde.symnet import comp_name

    expansions = {}
    for name, cfg, nets in models:
        for c in range(cfg.n):
            terms = expand_to_terms(replace(cfg, equation_index=c), nets[c])
            expansions[(name, c)] = terms

    all_rows = sorted(
        {(c, t.name) for (name, c), terms in expansions.items() for t in terms}
    )
    with open(out_dir / "coefficients.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "term"] + [name for name, _, _ in models])
        for c, tname in all_rows:
            row = [comp_name(c), tname]
            for name, cfg, _ in models:
                terms = expansions.get((name, c), {})
                val = next((v for t, v in terms.items() if t.name == tname), 0.0)
                row.append(repr(val))
            writer.writerow(row)

    with open(out_dir / "counts.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "threshold_1e-06", "threshold_1e-02"])
        for name, cfg, nets in models:
            counts = []
            for thr in (1e-6, 1e-2):
                pde = extract_pde(nets, cfg, report_threshold=thr)
                counts.append(pde.remaining_count)
            writer.writerow([name] + counts)


def _terms_for_verification(args) -> tuple[list[dict], str]:
    if args.model:
        cfg, nets, experiment = read_model(args.model)
        sets = []
        for c in range(cfg.n):
            terms = expand_to_terms(replace(cfg, equation_index=c), nets[c])
            sets.append({t: v for t, v in terms.items()})
        kind = "lorentz" if cfg.kind == "lorentz" else "galileo"
        return sets, kind
    truth = TRUTH_TERMS[args.truth]
    kind = "lorentz" if args.truth == "sine_gordon" else "galileo"
    return [dict(t) for t in truth], kind


def cmd_verify_invariance(args, out_path: Path) -> bool:
    traj = gridmod.read_trajectory(args.data)
    term_sets, group = _terms_for_verification(args)
    for spec in args.inject or []:
        name, _, val = spec.partition("=")
        for ts in term_sets:
            ts[parse_term(name.strip())] = float(val) if val else 1.0

    rows = []
    all_pass = True
    if group == "galileo":
        term_threshold = args.threshold if args.threshold is not None else 1e-6
        seen = set()
        for ts in term_sets:
            for term in ts:
                key = term.name if not isinstance(term, str) else term
                if key in seen:
                    continue
                seen.add(key)
                dev = inv.galileo_term_transform_deviation(traj, args.boost_c, term)
                rows.append((key, dev, term_threshold, dev <= term_threshold))
        self_res = inv.galileo_self_residual(traj, term_sets)
        res_threshold = max(10.0 * self_res, 1e-12)
        dev = inv.check_galileo_covariance(traj, args.boost_c, term_sets)
        rows.append(("(residual)", dev, res_threshold, dev <= res_threshold))
    else:
        bp = inv.BoostParams(c=args.boost_c, c0=args.c0)
        term_threshold = args.threshold if args.threshold is not None else 0.1
        seen = set()
        for ts in term_sets:
            for term in ts:
                t = parse_term(term) if isinstance(term, str) else term
                if t.name in seen or any(a.kind == "deriv" for a in t.factors):
                    continue
                seen.add(t.name)
                dev = inv.lorentz_term_transform_deviation(traj, bp, t)
                rows.append((t.name, dev, term_threshold, dev <= term_threshold))
        self_res = inv.lorentz_self_residual(traj, term_sets)
        res_threshold = max(args.residual_factor * self_res, 1e-12)
        dev = inv.check_lorentz_covariance(traj, bp, term_sets)
        rows.append(("(residual)", dev, res_threshold, dev <= res_threshold))

    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["term_name", "frame_deviation", "pass_threshold", "verdict"])
        for name, dev, thr, ok in rows:
            writer.writerow([name, repr(float(dev)), repr(float(thr)), "pass" if ok else "fail"])
            all_pass = all_pass and ok
    return all_pass


def cmd_expand(model_path: Path, out=None) -> dict:
    cfg, nets, experiment = read_model(model_path)
    pde = extract_pde(nets, cfg, report_threshold=1e-6)
    doc = pde.to_json_dict()
    doc["experiment"] = experiment
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)
    return doc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invariant-pde",
        description="Discover governing PDEs with invariance-constrained symbolic networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate solver datasets")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("train", help="train a model on a dataset")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--config", type=Path)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--kind", choices=("galileo", "lorentz", "baseline"))

    p = sub.add_parser("report", help="aggregate coefficient and count tables")
    p.add_argument("models", nargs="+", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("verify-invariance", help="frame-boost covariance checks")
    p.add_argument("--data", type=Path, required=True, help="one PDED trajectory file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", type=Path)
    group.add_argument("--truth", choices=("burgers", "sine_gordon"))
    p.add_argument("--boost-c", type=float, default=0.0)
    p.add_argument("--c0", type=float, default=math.sqrt(0.5))
    p.add_argument("--threshold", type=float, default=None, help="per-term pass threshold")
    p.add_argument("--residual-factor", type=float, default=10.0)
    p.add_argument("--inject", action="append", help="extra term as name=coeff (negative control)")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("expand", help="dump the term expansion of a model file")
    p.add_argument("model", type=Path)
    p.add_argument("--out", type=Path)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen-data":
            cfg = load_config(args.config, args.experiment, args.seed)
            cmd_gen_data(cfg, args.out, force=args.force)
            return 0
        if args.command == "train":
            cfg = load_config(args.config, args.experiment, args.seed)
            if args.kind:
                cfg["kind"] = args.kind
                if args.kind not in ALLOWED_KINDS[cfg["experiment"]]:
                    raise ConfigError(
                        f"kind {args.kind!r} is not allowed for {cfg['experiment']!r}"
                    )
            cmd_train(cfg, args.data, args.out)
            return 0
        if args.command == "report":
            cmd_report(args.models, args.out)
            return 0
        if args.command == "verify-invariance":
            cmd_verify_invariance(args, args.out)
            return 0
        if args.command == "expand":
            cmd_expand(args.model, args.out)
            return 0
        return 2
    except (ConfigError, FileNotFoundError, inv.BoostAlignmentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        trainmod.TrainingDivergedError,
        solvers.BlowUpError,
        solvers.StabilityError,
        inv.BoostRangeError,
    ) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
