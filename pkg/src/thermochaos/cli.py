"""Command-line entry point: ``thermochaos <subcommand> ...``.

Exit codes: 0 success, 1 data error, 2 usage error. All outputs are written
atomically and carry no timestamps, so identical inputs and seed give
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import classify, diffusion, genmetrics, imaging, io, nonlinear, plots, synth
from .errors import ThermoError

SCHEMA_VERSION = 1


class UsageError(Exception):
    """Inconsistent flags; reported like an argparse error (exit 2)."""


def _report(args, result) -> str:
    config = {k: (str(v) if isinstance(v, Path) else v)
              for k, v in sorted(vars(args).items()) if k != "func"}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool": "thermochaos",
        "version": __version__,
        "command": args.command + (f" {args.sub}" if getattr(args, "sub", None) else ""),
        "seed": getattr(args, "seed", None),
        "config": config,
        "result": result,
    }
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        io.atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- features


def cmd_features(args) -> None:
    ids = args.id or [Path(m).stem for m in args.mask]
    if len(ids) != len(args.mask):
        raise UsageError("--id must be given once per --mask")
    rows = []
    for ident, path in zip(ids, args.mask):
        rows.append((ident, nonlinear.extract_features(io.read_mask(path))))
    io.atomic_write(args.out, io.features_csv(rows))


def cmd_signal(args) -> None:
    contour = imaging.trace_contour(io.read_mask(args.mask))
    sig = imaging.radial_signal(contour)
    io.write_column_csv(args.out, sig.values, "r")
    if args.svg:
        io.atomic_write(args.svg, plots.line_svg(
            sig.values, title="Radial signal", xlabel="contour index", ylabel="distance (px)"))
    if args.divergence_svg:
        t1 = nonlinear.default_fit_window(len(sig))[1]
        curve = nonlinear.divergence_curve(sig.values, args.m, 1, t1)
        io.atomic_write(args.divergence_svg, plots.line_svg(
            curve, title=f"Mean log divergence (m={args.m})", xlabel="t (samples)",
            ylabel="<ln d(t)>"))


# ---------------------------------------------------------------- diffusion


def cmd_diffuse(args) -> None:
    s = diffusion.linear_schedule(args.steps, args.beta_start, args.beta_end)
    d = diffusion.GaussianOptimalDenoiser.default(s)
    rng = np.random.default_rng(args.seed)
    x0 = diffusion.sample(d, (args.size, args.size), args.cond, s, rng)
    io.write_pgm(args.out, io.unit_to_pgm(x0))
    if args.schedule_out:
        io.atomic_write(args.schedule_out, s.to_csv())
    if args.report:
        io.atomic_write(args.report, _report(args, {
            "mean": float(x0.mean()), "std": float(x0.std()),
            "alpha_bar_T": float(s.alpha_bars[-1]),
        }))


# ---------------------------------------------------------------- metrics


def cmd_metrics(args) -> None:
    if args.sub in ("fid", "sfid"):
        a, b = io.read_matrix_csv(args.real), io.read_matrix_csv(args.gen)
        value = genmetrics.frechet_distance(genmetrics.fit_gaussian(a), genmetrics.fit_gaussian(b))
        result = {args.sub: value, "n_real": len(a), "n_gen": len(b), "dim": a.shape[1]}
    else:
        p = io.read_matrix_csv(args.probs)
        mean, std = genmetrics.inception_score(p, args.splits)
        result = {"is_mean": mean, "is_std": std, "n": len(p), "classes": p.shape[1]}
    _emit(args, _report(args, result))


# ---------------------------------------------------------------- classify


def _load_dataset(args):
    """Join deep/hand tables on id; returns ids, X, y, synthetic."""
    deep = io.read_deep_csv(args.deep, args.deep_dim) if args.deep else None
    hand = io.read_hand_csv(args.hand) if args.hand else None
    if args.mode in ("fused", "deep") and deep is None:
        raise UsageError(f"--mode {args.mode} needs --deep")
    if args.mode in ("fused", "hand") and hand is None:
        raise UsageError(f"--mode {args.mode} needs --hand")
    primary = deep if deep is not None else hand
    ids = primary["ids"]
    if "y" not in primary:
        raise ThermoError("labels missing: supply --deep or a 'label' column in --hand")
    y = primary["y"]
    synthetic = primary.get("synthetic")
    if args.mode == "deep":
        X = deep["X"]
    else:
        pos = {k: i for i, k in enumerate(hand["ids"])}
        missing = [k for k in ids if k not in pos]
        if missing:
            raise ThermoError(f"hand-feature table lacks ids {missing[:5]}")
        H = hand["X"][[pos[k] for k in ids]]
        X = classify.fuse(deep["X"] if args.mode == "fused" else None, H, args.deep_dim)
    return ids, X, y, synthetic


def _config(args) -> classify.GbdtConfig:
    return classify.GbdtConfig(args.rounds, args.eta, args.max_depth, args.reg_lambda, args.gamma)


def cmd_train(args) -> None:
    _, X, y, _ = _load_dataset(args)
    model = classify.train(X, y, _config(args), args.seed)
    model.meta = {"mode": args.mode, "deep_dim": args.deep_dim, "seed": args.seed,
                  "version": __version__}
    io.atomic_write(args.out, model.to_json() + "\n")


def cmd_cv(args) -> None:
    _, X, y, synthetic = _load_dataset(args)
    report = classify.stratified_kfold(X, y, args.folds, _config(args), args.seed,
                                       synthetic=synthetic,
                                       include_synthetic=args.include_synthetic)
    result = report.as_dict()
    result["summary"] = {k: f"{report.mean[k]:.2f}±{report.std[k]:.2f}" for k in report.mean}
    result["n_samples"] = int(len(y))
    result["n_features"] = int(X.shape[1])
    _emit(args, _report(args, result))


def cmd_predict(args) -> None:
    model = classify.GbdtModel.from_json(Path(args.model).read_text())
    args.mode = model.meta.get("mode", args.mode)
    args.deep_dim = int(model.meta.get("deep_dim", args.deep_dim))
    deep = io.read_deep_csv(args.deep, args.deep_dim) if args.deep else None
    hand = io.read_hand_csv(args.hand) if args.hand else None
    primary = deep if deep is not None else hand
    if primary is None:
        raise UsageError("predict needs --deep and/or --hand")
    ids = primary["ids"]
    if args.mode == "deep":
        X = deep["X"]
    else:
        if hand is None:
            raise UsageError(f"model mode {args.mode!r} needs --hand")
        pos = {k: i for i, k in enumerate(hand["ids"])}
        if any(k not in pos for k in ids):
            raise ThermoError("hand-feature table lacks some ids")
        H = hand["X"][[pos[k] for k in ids]]
        if args.mode == "fused" and deep is None:
            raise UsageError("model mode 'fused' needs --deep")
        X = classify.fuse(deep["X"] if args.mode == "fused" else None, H, args.deep_dim)
    p = classify.predict_proba(model, X)
    lines = ["id,probability,label"]
    lines += [f"{k},{io.fmt(v)},{int(v >= 0.5)}" for k, v in zip(ids, p)]
    io.atomic_write(args.out, "\n".join(lines) + "\n")


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> None:
    if args.sub == "contour":
        p = synth.ContourParams(args.kind, args.radius, args.n_points, args.amp, args.decay, args.seed)
        lesion = synth.gen_contour(p)
        io.write_mask_pgm(args.out, lesion.mask)
        if args.contour_out:
            io.atomic_write(args.contour_out, "x,y\n" + "".join(f"{x},{y}\n" for x, y in lesion.contour))
    elif args.sub == "koch":
        pts = synth.koch_curve(args.level)
        io.atomic_write(args.out, "x,y\n" + "".join(f"{io.fmt(a)},{io.fmt(b)}\n" for a, b in pts))
    elif args.sub == "logistic":
        io.write_column_csv(args.out, synth.logistic_series(args.r, args.n, args.x0, args.burn_in), "x")
    elif args.sub == "henon":
        io.write_column_csv(args.out, synth.henon_series(args.n, args.a, args.b, args.burn_in), "x")
    elif args.sub == "noise":
        io.write_column_csv(args.out, synth.white_noise(args.n, args.seed), "x")
    elif args.sub == "corpus":
        ids, y, H, D = synth.corpus_tables(args.n_per_class, args.seed, args.deep_dim)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        io.atomic_write(out / "deep.csv", io.deep_csv(ids, y, D))
        rows = [(k, nonlinear.NonlinearFeatures(*h)) for k, h in zip(ids, H)]
        io.atomic_write(out / "hand.csv", io.features_csv(rows, labels=y))


# ---------------------------------------------------------------- parser


def _add_gbdt(p: argparse.ArgumentParser) -> None:
    p.add_argument("--deep", help="deep-feature CSV: id,label,f0..f2047")
    p.add_argument("--hand", help="handcrafted-feature CSV: id,bcd,lle,le,apen")
    p.add_argument("--mode", choices=("fused", "deep", "hand"), default="fused")
    p.add_argument("--deep-dim", type=int, default=classify.DEEP_DIM)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rounds", type=int, default=200)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--lambda", dest="reg_lambda", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thermochaos", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="nonlinear features of tumour masks")
    p.add_argument("--mask", action="append", required=True, help="mask PGM or 0/1 CSV (repeatable)")
    p.add_argument("--id", action="append", help="row id per mask (default: file stem)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("signal", help="radial boundary signal of a mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True, help="single-column CSV with header r")
    p.add_argument("--svg", help="plot of the radial signal")
    p.add_argument("--divergence-svg", help="plot of the mean log-divergence curve")
    p.add_argument("--m", type=int, default=3, help="embedding dimension for the divergence plot")
    p.set_defaults(func=cmd_signal)

    p = sub.add_parser("diffuse", help="sample a class-conditioned patch with the analytic denoiser")
    p.add_argument("--steps", type=int, default=diffusion.DEFAULT_STEPS)
    p.add_argument("--beta-start", type=float, default=diffusion.BETA_START)
    p.add_argument("--beta-end", type=float, default=diffusion.BETA_END)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cond", choices=tuple(diffusion.LABELS), default="normal")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--out", required=True, help="output PGM")
    p.add_argument("--schedule-out", help="schedule CSV t,beta,alpha_bar")
    p.add_argument("--report", help="JSON report path")
    p.set_defaults(func=cmd_diffuse)

    p = sub.add_parser("metrics", help="FID / sFID / Inception Score from CSV matrices")
    msub = p.add_subparsers(dest="sub", required=True)
    for name in ("fid", "sfid"):
        q = msub.add_parser(name)
        q.add_argument("--real", required=True)
        q.add_argument("--gen", required=True)
        q.add_argument("--out")
        q.set_defaults(func=cmd_metrics)
    q = msub.add_parser("is")
    q.add_argument("--probs", required=True)
    q.add_argument("--splits", type=int, default=1)
    q.add_argument("--out")
    q.set_defaults(func=cmd_metrics)

    p = sub.add_parser("train", help="fit the boosted-tree classifier")
    _add_gbdt(p)
    p.add_argument("--out", required=True, help="model JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="stratified k-fold evaluation")
    _add_gbdt(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--include-synthetic", action="store_true",
                   help="let synthetic-tagged samples enter held-out folds")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("predict", help="score samples with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--deep")
    p.add_argument("--hand")
    p.add_argument("--mode", choices=("fused", "deep", "hand"), default="fused")
    p.add_argument("--deep-dim", type=int, default=classify.DEEP_DIM)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="ground-truth generators")
    ssub = p.add_subparsers(dest="sub", required=True)
    q = ssub.add_parser("contour")
    q.add_argument("--kind", choices=(synth.BENIGN, synth.MALIGNANT), default=synth.BENIGN)
    q.add_argument("--radius", type=float, default=40.0)
    q.add_argument("--n-points", type=int, default=256)
    q.add_argument("--amp", type=float, default=0.15)
    q.add_argument("--decay", type=float, default=0.8)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True, help="mask PGM")
    q.add_argument("--contour-out", help="traced contour CSV x,y")
    q = ssub.add_parser("koch")
    q.add_argument("--level", type=int, default=6)
    q.add_argument("--out", required=True)
    q = ssub.add_parser("logistic")
    q.add_argument("--r", type=float, default=4.0)
    q.add_argument("--n", type=int, default=5000)
    q.add_argument("--x0", type=float, default=0.1234)
    q.add_argument("--burn-in", type=int, default=100)
    q.add_argument("--out", required=True)
    q = ssub.add_parser("henon")
    q.add_argument("--n", type=int, default=5000)
    q.add_argument("--a", type=float, default=1.4)
    q.add_argument("--b", type=float, default=0.3)
    q.add_argument("--burn-in", type=int, default=100)
    q.add_argument("--out", required=True)
    q = ssub.add_parser("noise")
    q.add_argument("--n", type=int, default=1000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q = ssub.add_parser("corpus")
    q.add_argument("--n-per-class", type=int, default=200)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--deep-dim", type=int, default=classify.DEEP_DIM)
    q.add_argument("--out-dir", required=True)
    for q in ssub.choices.values():
        q.set_defaults(func=cmd_synth)
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.func(args)
    except UsageError as e:
        print(f"thermochaos {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (ThermoError, OSError) as e:
        print(f"thermochaos {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
