"""Command-line entry point: ``mgcn {train,ablate,gradcheck,export,sweep,sbm-gen}``.

Exit codes: 0 success, 1 check failure, 2 usage/config error, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import ndiff as nd
from .encoder import EncoderConfig, EncoderParams
from .graphdata import DatasetError, generate_sbm, load_dataset, save_dataset
from .trainer import (
    NonFiniteLossError,
    TrainConfig,
    default_lr,
    export_embeddings,
    export_similarity,
    gradient_check,
    run_ablation,
    run_multi,
    write_ablation_csv,
    write_metrics,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(Exception):
    pass


def _split(text):
    if isinstance(text, (list, tuple)):
        return list(text)
    return [v for v in str(text).split(",") if v.strip()]


def _floats(text):
    return [float(v) for v in _split(text)]


def _ints(text):
    return [int(v) for v in _split(text)]


def _batch(text):
    return "all" if str(text) == "all" else int(text)


# key -> (parser, default); every key is settable from the config file and as --key-name
SETTINGS = {
    "dataset": (str, "sbm"),
    "sbm_blocks": (_ints, "100,100,100"),
    "sbm_pin": (float, 0.1),
    "sbm_pout": (float, 0.01),
    "sbm_dim": (int, 16),
    "sbm_shift": (float, 2.0),
    "sbm_seed": (int, 0),
    "train_frac": (float, 0.025),
    "val_frac": (float, 0.025),
    "lambda": (float, 0.9),
    "alpha": (float, 0.5),
    "lr": (float, None),
    "epochs": (int, 1000),
    "weight_decay": (float, 5e-4),
    "seed": (int, 0),
    "runs": (int, 10),
    "hidden_dim": (int, 64),
    "embed_dim": (int, None),
    "K": (int, 10),
    "ppr_alpha": (float, 0.1),
    "dropout": (float, 0.5),
    "backbone": (str, "gpr"),
    "correlation_batch": (_batch, "all"),
    "ablation": (str, "full"),
    "eq7_form": (str, "decomposed"),
    "workers": (int, 1),
}


def _flag(key):
    return "--" + key.replace("_", "-")


def add_settings(parser, keys=SETTINGS):
    parser.add_argument("--config", help="flat key = value TOML file; flags override it")
    for key in keys:
        dest = "lam" if key == "lambda" else key
        parser.add_argument(_flag(key), dest=dest, default=None, metavar=key.upper())


def resolve(args):
    """Merge defaults, config file and flags into a typed settings dict."""
    raw = {}
    if getattr(args, "config", None):
        if not os.path.isfile(args.config):
            raise ConfigError(f"config: file not found: {args.config}")
        try:
            with open(args.config, "rb") as fh:
                raw.update(tomllib.load(fh))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config: cannot parse {args.config}: {exc}") from None
        unknown = sorted(set(raw) - set(SETTINGS))
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown config key")
    for key in SETTINGS:
        val = getattr(args, "lam" if key == "lambda" else key, None)
        if val is not None:
            raw[key] = val
    out = {}
    for key, (parse, default) in SETTINGS.items():
        if key not in raw:
            out[key] = parse(default) if default is not None else None
            continue
        try:
            out[key] = parse(raw[key])
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: cannot parse value {raw[key]!r}") from None
    return out


def build_dataset(s):
    fractions = (s["train_frac"], s["val_frac"])
    try:
        if s["dataset"] == "sbm":
            ds = generate_sbm(s["sbm_blocks"], s["sbm_pin"], s["sbm_pout"], s["sbm_dim"],
                              s["sbm_shift"], seed=s["sbm_seed"], fractions=fractions,
                              split_seed=s["seed"])
        else:
            ds = load_dataset(s["dataset"], fractions=fractions, split_seed=s["seed"])
    except ValueError as exc:
        raise ConfigError(f"dataset: {exc}") from None
    for part, key in (("val", "val_frac"), ("test", "train_frac")):
        if len(getattr(ds.splits, part)) == 0:
            raise ConfigError(f"{key}: split leaves the {part} set empty")
    return ds


def build_config(s, dataset_name):
    checks = [("lambda", 0.0 <= s["lambda"] <= 1.0, "must be in [0, 1]"),
              ("alpha", s["alpha"] >= 0, "must be >= 0"),
              ("epochs", s["epochs"] >= 1, "must be >= 1"),
              ("runs", s["runs"] >= 1, "must be >= 1"),
              ("dropout", 0.0 <= s["dropout"] < 1.0, "must be in [0, 1)")]
    if s["lr"] is not None:
        checks.append(("lr", s["lr"] > 0, "must be > 0"))
    for key, ok, why in checks:
        if not ok:
            raise ConfigError(f"{key}: {why}, got {s[key]}")
    try:
        enc = EncoderConfig(hidden_dim=s["hidden_dim"], K=s["K"], ppr_alpha=s["ppr_alpha"],
                            dropout=s["dropout"], backbone=s["backbone"],
                            embed_dim=s["embed_dim"])
        return TrainConfig(lam=s["lambda"], alpha=s["alpha"],
                           lr=s["lr"] if s["lr"] is not None else default_lr(dataset_name),
                           epochs=s["epochs"], weight_decay=s["weight_decay"], encoder=enc,
                           seed=s["seed"], runs=s["runs"],
                           correlation_batch=s["correlation_batch"], ablation=s["ablation"],
                           eq7_form=s["eq7_form"],
                           split_fractions=(s["train_frac"], s["val_frac"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _write_record(s, path):
    with open(path, "w", encoding="utf-8") as fh:
        for key, val in s.items():
            if val is None:
                continue
            if isinstance(val, list):
                val = ",".join(str(v) for v in val)
            fh.write(f"{key} = {val!r}\n" if isinstance(val, str) else f"{key} = {val}\n")


def _setup(args):
    s = resolve(args)
    ds = build_dataset(s)
    config = build_config(s, ds.name)
    os.makedirs(args.out, exist_ok=True)
    _write_record(s, os.path.join(args.out, "config.toml"))
    return s, ds, config


def cmd_train(args):
    s, ds, config = _setup(args)
    res = run_multi(ds, config, workers=s["workers"])
    with open(os.path.join(args.out, "metrics.jsonl"), "w", encoding="utf-8") as fh:
        write_metrics(res.results, fh)
    for r in res.results:
        nd.save_checkpoint(r.params.parameters(),
                           os.path.join(args.out, f"checkpoint_run{r.run}.json"))
    print(f"test_acc {res.mean:.4f}±{res.std:.4f}")
    return 0


def cmd_ablate(args):
    s, ds, config = _setup(args)
    rows = run_ablation(ds, config, workers=s["workers"])
    write_ablation_csv(rows, os.path.join(args.out, "ablation.csv"))
    for label, mean, std, runs, res in rows:
        tag = label.replace("+", "_")
        with open(os.path.join(args.out, f"metrics_{tag}.jsonl"), "w", encoding="utf-8") as fh:
            write_metrics(res.results, fh)
        print(f"{label:5s} {mean:.4f}±{std:.4f} ({runs} runs)")
    return 0


def cmd_sweep(args):
    if args.param not in ("alpha", "lambda"):
        raise ConfigError(f"param: unknown sweep parameter {args.param!r} (use alpha or lambda)")
    try:
        grid = _floats(args.grid)
    except ValueError:
        raise ConfigError(f"grid: cannot parse {args.grid!r}") from None
    s, ds, config = _setup(args)
    field = "lam" if args.param == "lambda" else "alpha"
    lines = ["value,mean,std"]
    for value in grid:
        try:
            cfg = replace(config, **{field: value})
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None
        res = run_multi(ds, cfg, workers=s["workers"])
        lines.append(f"{value!r},{res.mean!r},{res.std!r}")
        print(f"{args.param}={value}: {res.mean:.4f}±{res.std:.4f}")
    with open(os.path.join(args.out, f"sweep_{args.param}.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return 0


def cmd_gradcheck(args):
    err = gradient_check(seed=args.seed, eps=args.eps,
                         corrupt=2.0 if args.corrupt_grad else 1.0, backbone=args.backbone)
    print(f"max_rel_error {err!r}")
    return 0 if err < 1e-4 else 1


def cmd_export(args):
    if not os.path.isfile(args.checkpoint):
        raise ConfigError(f"checkpoint: file not found: {args.checkpoint}")
    s = resolve(args)
    ds = build_dataset(s)
    config = build_config(s, ds.name)
    params = EncoderParams.from_arrays(nd.load_checkpoint(args.checkpoint), s["backbone"])
    if not (args.similarity or args.embeddings):
        raise ConfigError("export: pass --similarity and/or --embeddings")
    if args.similarity:
        export_similarity(params, ds, args.similarity, config.encoder)
    if args.embeddings:
        export_embeddings(params, ds, args.embeddings, config.encoder)
    return 0


def cmd_sbm_gen(args):
    s = resolve(args)
    ds = build_dataset(dict(s, dataset="sbm"))
    save_dataset(ds, args.out)
    print(f"wrote {ds.num_nodes} nodes, {ds.graph.num_edges} edges to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="mgcn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (("train", cmd_train, "train over several seeds"),
                            ("ablate", cmd_ablate, "run the B / B+I / B+C / Ours ablation"),
                            ("sweep", cmd_sweep, "sweep alpha or lambda over a grid")):
        p = sub.add_parser(name, help=help_)
        add_settings(p)
        p.add_argument("--out", default="mgcn_out", help="output directory")
        if name == "sweep":
            p.add_argument("--param", required=True, help="alpha or lambda")
            p.add_argument("--grid", required=True, help="comma-separated values")
        p.set_defaults(func=fn)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full loss")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--backbone", choices=("gpr", "gcn2"), default="gpr")
    p.add_argument("--corrupt-grad", action="store_true",
                   help="double the analytic gradient; the check must then fail")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("export", help="similarity / embedding CSVs from a checkpoint")
    add_settings(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--similarity")
    p.add_argument("--embeddings")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("sbm-gen", help="write a synthetic SBM dataset directory")
    add_settings(p, [k for k in SETTINGS if k.startswith("sbm_")])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sbm_gen)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return args.func(args)
    except (ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NonFiniteLossError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
