"""``afdc`` command line: gen, train, eval, predict, naca, replay.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
from pathlib import Path

from . import __version__, dataset, geometry, oracle, raster, svg, training
from .errors import AfdcError, AllSamplesFailed
from .model import ModelConfig, PRESETS, build_model, load_weights, save_weights

RUN_MANIFEST = "run_manifest.json"
SKIP_REPORT = "skip_report.json"


class UsageError(Exception):
    pass


# argument helpers -------------------------------------------------------------------

def _angles(text):
    try:
        a, b, c = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:end:step, got {text!r}")
    try:
        return dataset.sweep_angles(a, b, c)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _floats(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals or any(not (math.isfinite(v) and v > 0) for v in vals):
        raise argparse.ArgumentTypeError(f"clearances must be positive numbers, got {text!r}")
    return vals


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return v


def _grid(n):
    try:
        return raster.GridSpec(n, n)
    except ValueError as exc:
        raise UsageError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="afdc", description="Airfoil image surrogate pipeline.")
    p.add_argument("--version", action="version", version=f"afdc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sweep .dat files into a labeled, split dataset")
    g.add_argument("--airfoils", required=True, type=Path, help="directory of .dat files")
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--angles", type=_angles, default="0:20:0.25", help="start:end:step in degrees")
    g.add_argument("--clearances", type=_floats, default="0.2,0.5,1.0",
                   help="comma-separated ground clearances in chords")
    g.add_argument("--grid", type=_positive_int, default=128, help="image side in pixels")
    g.add_argument("--panels", type=_positive_int, default=200)
    g.add_argument("--target", choices=dataset.TARGETS, default="clcd")
    g.add_argument("--morph", choices=sorted(raster.MORPHOLOGY), default="closing")
    g.add_argument("--seed", type=int, default=0, help="split seed")
    g.add_argument("--free-air", action="store_true", help="label without ground effect")

    t = sub.add_parser("train", help="train a model on a dataset directory")
    t.add_argument("--data", required=True, type=Path)
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--epochs", type=_positive_int, default=100)
    t.add_argument("--batch-size", type=_positive_int, default=50)
    t.add_argument("--lr", type=_positive_float, default=5e-5)
    t.add_argument("--blocks", type=int, choices=sorted(PRESETS), default=2)
    t.add_argument("--fc-hidden", type=_positive_int, default=128)
    t.add_argument("--optimizer", choices=training.OPTIMIZERS, default="adam")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--no-shuffle", action="store_true")
    t.add_argument("--no-wallclock", action="store_true",
                   help="write 0 in the seconds column so reruns are byte-identical")

    e = sub.add_parser("eval", help="evaluate weights on a split")
    e.add_argument("--data", required=True, type=Path)
    e.add_argument("--weights", required=True, type=Path)
    e.add_argument("--split", choices=dataset.SPLITS, default="test")
    e.add_argument("--out", required=True, type=Path)
    e.add_argument("--bins", type=_positive_int, default=None,
                   help="draw the scatter as a K x K heat map")

    r = sub.add_parser("predict", help="predict one coefficient for a .dat file")
    r.add_argument("--weights", required=True, type=Path)
    r.add_argument("--dat", required=True, type=Path)
    r.add_argument("--aoa", required=True, type=float)
    r.add_argument("--clearance", type=float, default=0.5)
    r.add_argument("--with-oracle", action="store_true")
    r.add_argument("--target", choices=dataset.TARGETS, default="clcd")
    r.add_argument("--panels", type=_positive_int, default=200)
    r.add_argument("--morph", choices=sorted(raster.MORPHOLOGY), default="closing")

    n = sub.add_parser("naca", help="write NACA 4-digit sections as Selig .dat files")
    n.add_argument("codes", nargs="+")
    n.add_argument("--out", required=True, type=Path)
    n.add_argument("--points", type=_positive_int, default=80, help="points per surface")

    rp = sub.add_parser("replay", help="rerun a command from its run manifest")
    rp.add_argument("manifest", type=Path)
    return p


# run manifest -----------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_run_manifest(out_dir: Path, args, argv, inputs, outputs, extra=None) -> Path:
    cfg = {k: _jsonable(v) for k, v in vars(args).items()}
    doc = {
        "command": args.command,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "config": cfg,
        "seed": cfg.get("seed"),
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        doc.update(extra)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RUN_MANIFEST
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return path


# commands ---------------------------------------------------------------------------

def _load_airfoils(directory: Path):
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".dat")
    good, bad = [], []
    for f in files:
        try:
            g = geometry.load_dat(f)
            good.append(geometry.AirfoilGeometry(f.stem, g.points))
        except (AfdcError, ValueError, UnicodeDecodeError) as exc:
            bad.append({"file": str(f), "error": type(exc).__name__, "message": str(exc)})
    return files, good, bad


def cmd_gen(args, argv) -> int:
    if not args.airfoils.is_dir():
        raise UsageError(f"--airfoils {args.airfoils} is not a directory")
    grid = _grid(args.grid)
    out = args.out
    write_run_manifest(out, args, argv, [args.airfoils], [out / dataset.MANIFEST_NAME,
                                                           out / dataset.IMAGES_NAME,
                                                           out / SKIP_REPORT])
    files, airfoils, bad = _load_airfoils(args.airfoils)
    report = {"unreadable_files": bad, "skipped_samples": []}
    try:
        if not airfoils:
            raise AllSamplesFailed(f"no readable .dat files among {len(files)} in {args.airfoils}")
        cfg = oracle.OracleConfig(panels=args.panels, ground_effect=not args.free_air)
        ds = dataset.build(airfoils, args.angles, args.clearances, grid, cfg, args.target, args.morph)
        report["skipped_samples"] = [k.to_dict() for k in ds.skipped]
        ds = dataset.split(ds, seed=args.seed)
    finally:
        (out / SKIP_REPORT).write_text(json.dumps(report, indent=1) + "\n", encoding="utf-8")
    dataset.write(ds, out)
    counts = {k: len(ds.indices(k)) for k in dataset.SPLITS}
    print(f"samples={len(ds)} skipped={len(ds.skipped)} unreadable={len(bad)} "
          f"train={counts['train']} valid={counts['valid']} test={counts['test']}")
    return 0


def cmd_train(args, argv) -> int:
    out = args.out
    paths = [out / "weights.afw", out / "best_weights.afw", out / "metrics.csv", out / "loss.svg"]
    ds = dataset.read(args.data)
    cfg = training.TrainConfig(args.batch_size, args.lr, args.epochs, args.seed, args.optimizer,
                               not args.no_shuffle)
    mcfg = ModelConfig.preset(args.blocks, fc_hidden=args.fc_hidden,
                              input_shape=(1, ds.grid.height, ds.grid.width))
    write_run_manifest(out, args, argv, [args.data], paths,
                       {"train_config": cfg.to_dict(), "model_config": mcfg.to_dict()})
    model = build_model(mcfg, args.seed)
    result = training.train(model, ds, cfg, record_time=not args.no_wallclock)
    save_weights(result.model, paths[0])
    save_weights(result.best_model, paths[1])
    result.history.write_csv(paths[2])
    paths[3].write_text(svg.loss_curves(result.history.train_mse, result.history.valid_mse),
                        encoding="utf-8")
    h = result.history
    print(f"epochs={len(h)} final_train_mse={h.train_mse[-1]:.17g} "
          f"final_valid_mse={h.valid_mse[-1]:.17g} best_epoch={h.best_epoch}")
    return 0


def summary_line(split, mse, pairs) -> str:
    mae = sum(abs(t - p) for t, p in pairs) / len(pairs)
    return f"split={split} mse={mse:.17g} mae={mae:.17g} count={len(pairs)}"


def cmd_eval(args, argv) -> int:
    out = args.out
    paths = [out / "scatter.svg", out / "overlay.svg", out / "pairs.csv", out / "summary.txt"]
    write_run_manifest(out, args, argv, [args.data, args.weights], paths)
    model = load_weights(args.weights)
    ds = dataset.read(args.data)
    mse, pairs = training.evaluate(model, ds, args.split)
    truth = [t for t, _ in pairs]
    pred = [p for _, p in pairs]
    paths[0].write_text(svg.scatter_density(truth, pred, bins=args.bins), encoding="utf-8")
    paths[1].write_text(svg.overlay(truth, pred, ylabel=ds.target), encoding="utf-8")
    idx = ds.indices(args.split)
    with open(paths[2], "w", encoding="utf-8", newline="\n") as f:
        f.write("index,airfoil_id,aoa_deg,ground_clearance,truth,prediction\n")
        for i, (t, p) in zip(idx, pairs):
            s = ds.sample(i)
            f.write(f"{i},{s.airfoil_id},{s.aoa_deg!r},{s.ground_clearance!r},{t:.17g},{p:.17g}\n")
    line = summary_line(args.split, mse, pairs)
    paths[3].write_text(line + "\n", encoding="utf-8")
    print(line)
    return 0


def cmd_predict(args, argv) -> int:
    model = load_weights(args.weights)
    g = geometry.normalize(geometry.load_dat(args.dat))
    _, h, w = model.config.input_shape
    grid = raster.GridSpec(w, h)
    img = raster.MORPHOLOGY[args.morph](raster.rasterize(geometry.pose(g, args.aoa, args.clearance),
                                                         grid, True))
    pred = float(model.predict_denormalized(raster.to_tensor(img)[None])[0])
    if not args.with_oracle:
        print(f"pred={pred:.17g}")
        return 0
    lab = oracle.label(g, args.aoa, args.clearance, args.panels)
    truth = dataset.target_value(lab, args.target)
    print(f"pred={pred:.17g} oracle={truth:.17g} abs_err={abs(pred - truth):.17g}")
    return 0


def cmd_naca(args, argv) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    for code in args.codes:
        try:
            g = geometry.naca4(code, n_side=args.points)
        except ValueError as exc:
            raise UsageError(str(exc))
        (args.out / f"naca{code}.dat").write_text(geometry.serialize_selig(g), encoding="utf-8")
    print(f"wrote {len(args.codes)} files to {args.out}")
    return 0


def cmd_replay(args, argv) -> int:
    try:
        doc = json.loads(args.manifest.read_text(encoding="utf-8"))
        replay_argv = doc["argv"]
    except (OSError, ValueError, KeyError) as exc:
        raise AfdcError(f"unreadable run manifest {args.manifest}: {exc}")
    if replay_argv and replay_argv[0] == "replay":
        raise UsageError("refusing to replay a replay")
    here = os.getcwd()
    os.chdir(doc.get("cwd", here))
    try:
        return main(replay_argv)
    finally:
        os.chdir(here)


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "predict": cmd_predict,
            "naca": cmd_naca, "replay": cmd_replay}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"afdc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (AfdcError, OSError, ValueError, FloatingPointError) as exc:
        print(f"afdc {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
