"""Command line entry point.

One ``seco`` command with a subcommand per pipeline stage:

    synth-gen         render a synthetic scene dataset
    make-pairs        mine context-object pairs into a manifest
    train             fit the two-stream model on mined pairs
    probe             fit a linear readout on frozen context features
    flap-eval         top-1 accuracy on flapped test scenes
    priming-map       multi-scale expectation map for one image and class
    compare-maps      rmse between two saved maps
    memory-probe      per-class memory usage divergence matrix
    process-clicks    turn click logs into human priming maps
    serve-collection  run the click-collection HTTP service

Configuration comes from one JSON file (``--config``), optionally
reshaped by ``--preset`` and dotted ``--set`` overrides. Every command
records a ``run.json`` provenance file in the output directory. Exit
codes: 0 success, 1 configuration problem (every violation listed),
2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import blobio
from . import config as cfgmod
from .collection import CollectionConfig, build_collection_manifest, serve_collection
from .datasets import SceneDataset
from .evaluation import (
    LinearProbe,
    dataset_flap_samples,
    lift_the_flap,
    make_flap_scorer,
    memory_probe,
    priming_map,
    rmse,
    save_kl_csv,
    save_probe,
    load_probe,
    train_probe,
)
from .humanmaps import clicks_to_map, human_agreement, read_click_logs
from .imageops import save_heatmap_png
from .model import init_model, load_checkpoint, save_checkpoint
from .pairs import mine_regions, read_pair_manifest, write_pair_manifest
from .synthworld import generate_dataset
from .trainer import fit

__all__ = ["main", "entrypoint"]


def _git_revision() -> str | None:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True,
            text=True,
            timeout=10,
            check=False,
        )
    except OSError:
        return None
    rev = out.stdout.strip()
    return rev if out.returncode == 0 and rev else None


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["run"]["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _data_path(cfg: dict, given: str | None, default: Path) -> Path:
    """Resolve an input path: explicit flag, else default under out_dir.

    Relative explicit paths resolve against the configured data root
    when one is set.
    """
    if given is None:
        return default
    p = Path(given)
    data_dir = cfg["run"]["data_dir"]
    if not p.is_absolute() and data_dir:
        return Path(data_dir) / p
    return p


def _write_run_record(cfg: dict, command: str, argv: list[str], outputs: list) -> Path:
    out = _out_dir(cfg)
    record = {
        "command": command,
        "argv": argv,
        "config": cfg,
        "config_sha256": cfgmod.config_hash(cfg),
        "git_revision": _git_revision(),
        "seed": cfg["run"]["seed"],
        "outputs": [str(o) for o in outputs],
    }
    path = out / "run.json"
    path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


# ------------------------------------------------------------- commands


def _cmd_synth_gen(cfg: dict, args) -> list:
    ccfg = cfgmod.cooc_config(cfg)
    out = _data_path(cfg, args.out, _out_dir(cfg) / "dataset")
    root = generate_dataset(
        ccfg,
        cfg["synthworld"]["n_train"],
        cfg["synthworld"]["n_test"],
        out,
        seed=cfg["run"]["seed"],
        overwrite=args.overwrite,
    )
    print(f"dataset: {root}")
    return [root]


def _load_split(cfg: dict, args) -> SceneDataset:
    root = _data_path(cfg, args.dataset, _out_dir(cfg) / "dataset")
    return SceneDataset(Path(root) / args.split)


def _cmd_make_pairs(cfg: dict, args) -> list:
    pcfg = cfgmod.proposal_config(cfg)
    dataset = _load_split(cfg, args)
    out = Path(args.out) if args.out else _out_dir(cfg) / f"pairs_{args.split}.jsonl"
    seed = cfg["run"]["seed"]
    entries = []
    for image_id in dataset.image_ids:
        image = dataset.load_image(image_id)
        rng = np.random.default_rng(np.random.SeedSequence((seed, image_id)))
        gt = [b for b, _ in dataset.boxes(image_id)]
        for roi in mine_regions(image, pcfg, rng, gt_boxes=gt):
            entries.append({"image_id": image_id, "roi": roi, "source": pcfg.source})
    n = write_pair_manifest(out, entries)
    print(f"pairs: {n} -> {out}")
    return [out]


def _cmd_train(cfg: dict, args) -> list:
    tcfg = cfgmod.train_config(cfg)
    acfg = cfgmod.augment_config(cfg)
    weights = cfgmod.loss_weights(cfg)
    dataset = _load_split(cfg, args)
    pairs_path = (
        Path(args.pairs) if args.pairs else _out_dir(cfg) / f"pairs_{args.split}.jsonl"
    )
    manifest = read_pair_manifest(pairs_path)
    model = init_model(**cfgmod.model_kwargs(cfg))
    out = Path(args.out) if args.out else _out_dir(cfg) / "train"
    result = fit(dataset, manifest, model, tcfg, acfg, weights, out)
    final_loss = result.history[-1]["total"] if result.history else float("nan")
    print(f"final loss: {final_loss:.6f}")
    print(f"checkpoint: {result.final_checkpoint}")
    return [result.final_checkpoint, out / "train_log.jsonl"]


def _latest_checkpoint(cfg: dict, args) -> Path:
    if args.checkpoint:
        return Path(args.checkpoint)
    train_dir = _out_dir(cfg) / "train" / "checkpoints"
    candidates = sorted(train_dir.glob("epoch_*"))
    if not candidates:
        raise FileNotFoundError(f"no checkpoints under {train_dir}; pass --checkpoint")
    return candidates[-1]


def _cmd_probe(cfg: dict, args) -> list:
    pcfg = cfgmod.probe_config(cfg)
    acfg = cfgmod.augment_config(cfg)
    dataset = _load_split(cfg, args)
    model, _ = load_checkpoint(_latest_checkpoint(cfg, args))
    samples = dataset_flap_samples(dataset)
    probe = train_probe(model, samples, acfg, pcfg, classes=sorted(dataset.categories))
    out = Path(args.out) if args.out else _out_dir(cfg) / "probe"
    save_probe(probe, out)
    acc, _ = lift_the_flap(model, probe, samples, acfg)
    print(f"probe fit accuracy: {acc:.4f}")
    print(f"probe: {out}")
    return [out]


def _untrained_probe(dataset: SceneDataset, model, mode: str) -> LinearProbe:
    dim = {"h_c": model.feature_dim, "s_c": model.cfg.h}.get(
        mode, model.feature_dim + model.cfg.h
    )
    classes = sorted(dataset.categories)
    return LinearProbe(
        weight=np.zeros((len(classes), dim)),
        bias=np.zeros(len(classes)),
        classes=classes,
        input_mode=mode,
        feat_mean=np.zeros(dim),
        feat_std=np.ones(dim),
    )


def _cmd_flap_eval(cfg: dict, args) -> list:
    acfg = cfgmod.augment_config(cfg)
    pcfg = cfgmod.probe_config(cfg)
    dataset = _load_split(cfg, args)
    model, _ = load_checkpoint(_latest_checkpoint(cfg, args))
    probe = (
        load_probe(args.probe)
        if args.probe
        else _untrained_probe(dataset, model, pcfg.input_mode)
    )
    samples = dataset_flap_samples(dataset)
    acc, preds = lift_the_flap(model, probe, samples, acfg)
    out = _out_dir(cfg) / f"flap_eval_{args.split}.json"
    out.write_text(
        json.dumps(
            {
                "accuracy": acc,
                "n_samples": len(samples),
                "predictions": [int(p) for p in preds],
            },
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"accuracy: {acc:.4f} over {len(samples)} samples")
    return [out]


def _class_id(dataset: SceneDataset, name_or_id: str) -> int:
    by_name = {v: k for k, v in dataset.categories.items()}
    if name_or_id in by_name:
        return by_name[name_or_id]
    try:
        cid = int(name_or_id)
    except ValueError:
        raise ValueError(
            f"unknown class {name_or_id!r}; choose from {sorted(by_name)}"
        ) from None
    if cid not in dataset.categories:
        raise ValueError(f"unknown class id {cid}; have {sorted(dataset.categories)}")
    return cid


def _cmd_priming_map(cfg: dict, args) -> list:
    acfg = cfgmod.augment_config(cfg)
    dataset = _load_split(cfg, args)
    model, _ = load_checkpoint(_latest_checkpoint(cfg, args))
    probe = load_probe(args.probe) if args.probe else None
    if probe is None:
        raise ValueError("priming-map needs --probe")
    target = _class_id(dataset, args.target_class)
    image = dataset.load_image(args.image_id)
    scorer = make_flap_scorer(model, probe, target, acfg, window=args.window)
    grid = priming_map(
        image,
        scorer,
        grid_sizes=tuple(cfg["evaluation"]["grid_sizes"]),
        out_size=image.shape[0],
    )
    stem = f"priming_{args.image_id:08d}_{dataset.categories[target]}"
    out = _out_dir(cfg) / "priming"
    out.mkdir(parents=True, exist_ok=True)
    blobio.write_blob(out / f"{stem}.bin", grid)
    save_heatmap_png(out / f"{stem}.png", grid)
    print(f"map: {out / (stem + '.bin')}")
    return [out / f"{stem}.bin", out / f"{stem}.png"]


def _cmd_compare_maps(cfg: dict, args) -> list:
    a = blobio.read_blob(args.a)
    b = blobio.read_blob(args.b)
    value = rmse(a, b)
    print(f"rmse: {value}")
    return []


def _cmd_memory_probe(cfg: dict, args) -> list:
    acfg = cfgmod.augment_config(cfg)
    dataset = _load_split(cfg, args)
    model, _ = load_checkpoint(_latest_checkpoint(cfg, args))
    samples = dataset_flap_samples(dataset)
    klm = memory_probe(model, samples, acfg, classes=sorted(dataset.categories))
    out = Path(args.out) if args.out else _out_dir(cfg) / "memory_kl.csv"
    save_kl_csv(out, klm, names=dataset.categories)
    finite = klm.matrix[np.isfinite(klm.matrix)]
    off = finite[finite > 0] if finite.size else finite
    mean_kl = float(np.mean(off)) if off.size else float("nan")
    print(f"classes: {len(klm.classes)} valid: {sum(klm.valid)}")
    print(f"mean off-diagonal kl: {mean_kl:.6f}")
    print(f"matrix: {out}")
    return [out]


def _cmd_process_clicks(cfg: dict, args) -> list:
    hcfg = cfgmod.humanmap_config(cfg)
    logs = read_click_logs(args.log)
    out = Path(args.out) if args.out else _out_dir(cfg) / "humanmaps"
    out.mkdir(parents=True, exist_ok=True)
    groups = defaultdict(list)
    for log in logs:
        groups[(log.image_id, log.target_class)].append(log)
    outputs = []
    agreement = {}
    for (image_id, target_class), group in sorted(groups.items()):
        stem = f"human_{image_id:08d}_{target_class}"
        grid = clicks_to_map(group, hcfg)
        blobio.write_blob(out / f"{stem}.bin", grid)
        save_heatmap_png(out / f"{stem}.png", grid)
        outputs.extend([out / f"{stem}.bin", out / f"{stem}.png"])
        subjects = sorted({g.subject_id for g in group})
        if len(subjects) == 3:
            per_subject = [
                clicks_to_map([g for g in group if g.subject_id == s], hcfg)
                for s in subjects
            ]
            agreement[stem] = human_agreement(per_subject)
    summary = out / "agreement.json"
    summary.write_text(json.dumps(agreement, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    outputs.append(summary)
    print(f"maps: {len(groups)} -> {out}")
    return outputs


def _cmd_serve_collection(cfg: dict, args) -> list:
    ccfg = CollectionConfig(**cfg["collection"])
    if args.port is not None:
        ccfg.port = args.port
    workdir = Path(args.workdir) if args.workdir else _out_dir(cfg) / "collection"
    if args.dataset_build:
        dataset = SceneDataset(Path(args.dataset_build))
        build_collection_manifest(dataset, workdir, ccfg, seed=cfg["run"]["seed"])
        print(f"manifest: {workdir / 'collection_manifest.json'}")
    _write_run_record(cfg, "serve-collection", args.argv, [workdir])

    def on_start(server):
        # port 0 binds ephemerally; report the address actually bound
        port = server.server_address[1]
        print(f"serving on http://127.0.0.1:{port}", flush=True)
        if args.started_cb is not None:
            args.started_cb(server)

    serve_collection(
        workdir,
        ccfg,
        ui_dir=args.ui,
        seed=cfg["run"]["seed"],
        started_cb=on_start,
    )
    return [workdir]


_COMMANDS = {
    "synth-gen": _cmd_synth_gen,
    "make-pairs": _cmd_make_pairs,
    "train": _cmd_train,
    "probe": _cmd_probe,
    "flap-eval": _cmd_flap_eval,
    "priming-map": _cmd_priming_map,
    "compare-maps": _cmd_compare_maps,
    "memory-probe": _cmd_memory_probe,
    "process-clicks": _cmd_process_clicks,
    "serve-collection": _cmd_serve_collection,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seco", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (sparse; merged over defaults)")
        p.add_argument(
            "--set",
            dest="sets",
            action="append",
            default=[],
            metavar="PATH=VALUE",
            help="dotted config override, value parsed as JSON",
        )
        p.add_argument(
            "--preset",
            dest="presets",
            action="append",
            default=[],
            help=f"named option bundle, one of {sorted(cfgmod.PRESETS)}",
        )
        p.add_argument(
            "--print-config",
            action="store_true",
            help="dump the effective config and exit",
        )

    p = sub.add_parser("synth-gen", help="render a synthetic scene dataset")
    common(p)
    p.add_argument("--out", help="dataset root (default {out_dir}/dataset)")
    p.add_argument("--overwrite", action="store_true")

    for name, extra in (
        ("make-pairs", "mine context-object pairs"),
        ("train", "fit the model on mined pairs"),
        ("probe", "fit the linear readout"),
        ("flap-eval", "top-1 accuracy on flapped scenes"),
        ("priming-map", "one expectation map"),
        ("memory-probe", "memory usage divergence matrix"),
    ):
        p = sub.add_parser(name, help=extra)
        common(p)
        p.add_argument("--dataset", help="dataset root (default {out_dir}/dataset)")
        p.add_argument(
            "--split",
            default="train" if name in ("make-pairs", "train", "probe") else "test",
        )
        if name == "make-pairs":
            p.add_argument("--out", help="manifest path (default {out_dir}/pairs_{split}.jsonl)")
        if name == "train":
            p.add_argument("--pairs", help="pair manifest (default {out_dir}/pairs_{split}.jsonl)")
            p.add_argument("--out", help="training output dir (default {out_dir}/train)")
        if name in ("probe", "flap-eval", "priming-map", "memory-probe"):
            p.add_argument("--checkpoint", help="checkpoint dir (default: latest under {out_dir}/train)")
        if name == "probe":
            p.add_argument("--out", help="probe output dir (default {out_dir}/probe)")
        if name in ("flap-eval", "priming-map"):
            p.add_argument("--probe", help="saved probe dir")
        if name == "priming-map":
            p.add_argument("--image-id", type=int, required=True)
            p.add_argument("--target-class", required=True)
            p.add_argument(
                "--window",
                type=int,
                help="score each flap on a local square context window of this side",
            )
        if name == "memory-probe":
            p.add_argument("--out", help="csv path (default {out_dir}/memory_kl.csv)")

    p = sub.add_parser("compare-maps", help="rmse between two saved maps")
    common(p)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)

    p = sub.add_parser("process-clicks", help="click logs to human priming maps")
    common(p)
    p.add_argument("--log", required=True, help="click log jsonl")
    p.add_argument("--out", help="output dir (default {out_dir}/humanmaps)")

    p = sub.add_parser("serve-collection", help="run the click-collection service")
    common(p)
    p.add_argument("--workdir", help="stimulus dir (default {out_dir}/collection)")
    p.add_argument("--port", type=int, help="override collection.port")
    p.add_argument("--ui", help="static frontend dir to serve at /")
    p.add_argument(
        "--dataset-build",
        help="dataset split dir; build the stimulus manifest before serving",
    )

    return parser


def _assemble_config(args) -> dict:
    cfg = cfgmod.load_config(args.config)
    for preset in args.presets:
        cfg = cfgmod.apply_preset(cfg, preset)
    if args.sets:
        cfg = cfgmod.apply_overrides(cfg, args.sets)
    problems = cfgmod.validate_config(cfg)
    if problems:
        raise cfgmod.ConfigError(problems)
    # value-level checks: every typed section must build
    cfgmod.cooc_config(cfg)
    cfgmod.proposal_config(cfg)
    cfgmod.augment_config(cfg)
    cfgmod.loss_weights(cfg)
    cfgmod.train_config(cfg)
    cfgmod.probe_config(cfg)
    cfgmod.humanmap_config(cfg)
    CollectionConfig(**cfg["collection"]).validate()
    return cfg


def main(argv: list[str] | None = None, started_cb=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    args.started_cb = started_cb

    try:
        cfg = _assemble_config(args)
    except cfgmod.ConfigError as e:
        for problem in e.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1

    if args.print_config:
        print(json.dumps(cfg, sort_keys=True, indent=2))
        return 0

    try:
        outputs = _COMMANDS[args.command](cfg, args)
        if args.command != "serve-collection":
            _write_run_record(cfg, args.command, argv, outputs)
    except KeyboardInterrupt:
        return 0
    except Exception as e:  # noqa: BLE001 - boundary: report and signal failure
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())
