"""Command line interface.

Exit codes: 0 success, 2 bad arguments, 3 model/data I/O failure,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .imgio import load_image, save_image
from .model import WeightFileError, build_network, load_weights, param_count, save_weights
from .pipeline import EditRequest, edit_wb, evaluate
from .synthdata import load_dataset, make_dataset, save_dataset
from .tensor import NumericalError
from .training import (
    TrainConfig,
    desk_profile,
    fit,
    full_profile,
    save_loss_history,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wbstudio",
                                     description="White-balance editing studio")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--scenes", type=int, required=True)
    p.add_argument("--size", type=int, required=True, help="square image size (multiple of 16)")
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("train", help="train a model on a dataset directory")
    p.add_argument("--config", help="JSON file overriding profile settings")
    p.add_argument("--profile", choices=["desk", "full"], default="desk")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--loss-csv", help="also write the loss history CSV here")
    p.add_argument("--log-every", type=int, default=100)

    p = sub.add_parser("edit", help="re-render an image under a WB setting")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--wb", choices=["awb", "tungsten", "shade"])
    group.add_argument("--temp", type=float, help="color temperature in Kelvin")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a model on a dataset directory")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True, help="CSV report path")
    p.add_argument("--settings", default="awb,tungsten,shade",
                   help="comma list of presets and/or Kelvin temperatures")

    p = sub.add_parser("serve", help="run the HTTP editing service")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    return parser


def _load_train_config(args) -> tuple:
    net_cfg, train_cfg = desk_profile() if args.profile == "desk" else full_profile()
    if args.config:
        with open(args.config) as f:
            overrides = json.load(f)
        net_over = overrides.get("net", {})
        train_over = overrides.get("train", {})
        if net_over:
            from .model import NetConfig
            base = {"levels": net_cfg.levels, "base_channels": net_cfg.base_channels,
                    "decoder_ids": tuple(net_cfg.decoder_ids),
                    "conv_kernel": net_cfg.conv_kernel,
                    "architecture": net_cfg.architecture}
            base.update(net_over)
            if "decoder_ids" in net_over:
                base["decoder_ids"] = tuple(net_over["decoder_ids"])
            net_cfg = NetConfig(**base)
        if train_over:
            fields = {k: getattr(train_cfg, k) for k in TrainConfig.__dataclass_fields__}
            fields.update(train_over)
            train_cfg = TrainConfig(**fields)
    return net_cfg, train_cfg


def cmd_gen_data(args) -> int:
    examples = make_dataset(seed=args.seed, n_scenes=args.scenes, image_size=args.size)
    save_dataset(examples, args.out, seed=args.seed, image_size=args.size)
    print(f"wrote {len(examples)} scenes to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    net_cfg, train_cfg = _load_train_config(args)
    dataset = load_dataset(args.data)
    net = build_network(net_cfg, seed=train_cfg.seed)
    print(f"training {net_cfg.architecture} net ({param_count(net)} parameters) "
          f"for {train_cfg.iterations} iterations")
    net, history = fit(net, dataset, train_cfg, log_every=args.log_every)
    out_dir = os.path.dirname(args.out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    epoch = history[-1].iteration * train_cfg.batch_size // (
        len(dataset) * train_cfg.patches_per_image) if history else 0
    save_weights(net, args.out, train_state={
        "iteration": history[-1].iteration if history else 0, "epoch": epoch})
    if args.loss_csv:
        save_loss_history(history, args.loss_csv, decoder_ids=net_cfg.decoder_ids)
    if history:
        print(f"final loss {history[-1].total:.5f}; checkpoint at {args.out}")
    return EXIT_OK


def cmd_edit(args) -> int:
    net = load_weights(args.model)
    image = load_image(args.input)
    target = args.wb if args.wb else args.temp
    result = edit_wb(net, EditRequest(image=image, target=target))
    save_image(result.output, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    net = load_weights(args.model)
    dataset = load_dataset(args.data)
    settings = []
    for token in args.settings.split(","):
        token = token.strip()
        if not token:
            continue
        settings.append(token if token in ("awb", "tungsten", "shade") else float(token))
    report = evaluate(net, dataset, settings)
    report.write_csv(args.report)
    agg = report.aggregate
    for metric in ("mse", "mae", "deltaE2000"):
        a = agg[metric]
        print(f"{metric:>11}: mean {a['mean']:.4f}  q1 {a['q1']:.4f}  "
              f"q2 {a['q2']:.4f}  q3 {a['q3']:.4f}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve
    net = load_weights(args.model)
    serve(net, model_id=os.path.basename(args.model), host=args.host, port=args.port)
    return EXIT_OK


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "edit": cmd_edit,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (WeightFileError, OSError, json.JSONDecodeError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
