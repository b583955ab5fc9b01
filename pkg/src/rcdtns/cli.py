"""Command-line client for the classifier service.

Subcommands drive the HTTP API: against a remote server when ``--server`` is
given, otherwise against an in-process instance of the service app, so both
paths exercise identical request handling.

Exit codes: 0 on success, 2 for configuration or input-format errors, 3 for
runtime failures.  stdout carries only the primary output path; diagnostics
go to stderr.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from .errors import InvalidInput
from .runconfig import DatasetRef, RunConfig, load_run_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_TIMEOUT = httpx.Timeout(timeout=None)


class CliError(Exception):
    def __init__(self, message, exit_code):
        super().__init__(message)
        self.exit_code = exit_code


def _request(method: str, path: str, payload: dict, server: str | None) -> dict:
    """POST/GET against the remote server or the in-process service app."""

    async def _go():
        if server is not None:
            async with httpx.AsyncClient(base_url=server, timeout=_TIMEOUT) as client:
                return await client.request(method, path, json=payload)
        from .service.app import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://rcdtns.local", timeout=_TIMEOUT
        ) as client:
            return await client.request(method, path, json=payload)

    try:
        response = asyncio.run(_go())
    except httpx.HTTPError as exc:
        raise CliError(f"cannot reach service: {exc}", EXIT_RUNTIME) from exc
    if response.status_code >= 500:
        raise CliError(_error_detail(response), EXIT_RUNTIME)
    if response.status_code >= 400:
        raise CliError(_error_detail(response), EXIT_CONFIG)
    return response.json()


def _error_detail(response: httpx.Response) -> str:
    try:
        body = response.json()
    except ValueError:
        return f"HTTP {response.status_code}: {response.text[:500]}"
    detail = body.get("detail", body)
    return f"HTTP {response.status_code}: {json.dumps(detail) if not isinstance(detail, str) else detail}"


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_run_config(args.config)
    return RunConfig()


def _dataset_ref(args, config: RunConfig, which: str) -> dict:
    """Build a DatasetRef payload from flags, falling back to the config paths."""
    if args.data and (args.idx_images or args.idx_labels):
        raise CliError("--data and --idx-images/--idx-labels are mutually exclusive", EXIT_CONFIG)
    if args.data:
        ref = DatasetRef(manifest=args.data)
    elif args.idx_images or args.idx_labels:
        if not (args.idx_images and args.idx_labels):
            raise CliError("--idx-images and --idx-labels must be given together", EXIT_CONFIG)
        ref = DatasetRef(idx_images=args.idx_images, idx_labels=args.idx_labels)
    else:
        fallback = getattr(config.paths, which)
        if fallback is None:
            raise CliError(
                f"no dataset given: pass --data or --idx-images/--idx-labels, "
                f"or set paths.{which} in the config",
                EXIT_CONFIG,
            )
        ref = fallback
    return ref.model_dump()


def _resolve_out(args, config: RunConfig, default: str | None = None) -> str:
    out = args.out or config.paths.out or default
    if out is None:
        raise CliError("no output path: pass --out or set paths.out in the config", EXIT_CONFIG)
    return out


def _resolve_model_path(args, config: RunConfig, required=True) -> str | None:
    path = getattr(args, "model", None) or config.paths.model
    if path is None and required:
        raise CliError("no model path: pass --model or set paths.model in the config", EXIT_CONFIG)
    return path


def cmd_gen(args) -> int:
    config = _load_config(args)
    seed = args.seed if args.seed is not None else config.seed
    out_dir = _resolve_out(args, config)
    body = _request(
        "POST",
        "/datasets/generate",
        {"out_dir": out_dir, "generate": config.generate.model_dump(), "seed": seed},
        args.server,
    )
    if body["n_samples"] == 0:
        print("warning: generated an empty dataset (count_per_class=0)", file=sys.stderr)
    print(body["manifest_path"])
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_config(args)
    seed = args.seed if args.seed is not None else config.seed
    model_path = args.out or config.paths.model or config.paths.out
    if model_path is None:
        raise CliError("no model output path: pass --out", EXIT_CONFIG)
    body = _request(
        "POST",
        "/models/train",
        {
            "data": _dataset_ref(args, config, "train_data"),
            "model_path": model_path,
            "transform": config.transform.model_dump(),
            "train": config.train.model_dump(),
            "seed": seed,
        },
        args.server,
    )
    for cls in body["classes"]:
        q = cls["distance_quantiles"]
        print(
            f"class {cls['label']}: fit={cls['n_fit']} val={cls['n_validation']} "
            f"rank={cls['rank']} median_distance={q['median']:.4g}",
            file=sys.stderr,
        )
    print(body["model_path"])
    return EXIT_OK


def cmd_predict(args) -> int:
    config = _load_config(args)
    body = _request(
        "POST",
        "/models/predict",
        {
            "model_path": _resolve_model_path(args, config),
            "image_path": args.image,
            "alpha": args.alpha if args.alpha is not None else 0.0,
        },
        args.server,
    )
    out = Path(args.out or "prediction.json")
    out.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    print(out)
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load_config(args)
    alphas = args.alpha if args.alpha else config.alphas
    out_dir = _resolve_out(args, config)
    body = _request(
        "POST",
        "/models/evaluate",
        {
            "data": _dataset_ref(args, config, "test_data"),
            "model_path": _resolve_model_path(args, config),
            "alphas": alphas,
            "out_dir": out_dir,
        },
        args.server,
    )
    for run in body["runs"]:
        print(
            f"alpha={run['alpha']}: accuracy={run['accuracy_percent']:.2f}% "
            f"rejected={run['n_rejected']}/{run['n_samples']}",
            file=sys.stderr,
        )
    print(body["report_path"])
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcdtns",
        description="Transform-space nearest-subspace classifier with rejection of unfamiliar classes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_data=False, with_model=False):
        p.add_argument("--config", help="JSON run config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", help="output path")
        p.add_argument("--server", help="base URL of a running service (default: in-process)")
        if with_data:
            p.add_argument("--data", help="dataset manifest CSV")
            p.add_argument("--idx-images", help="IDX image file")
            p.add_argument("--idx-labels", help="IDX label file")
        if with_model:
            p.add_argument("--model", help="trained model file")

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset")
    common(p_gen)
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train", help="train a model")
    common(p_train, with_data=True)
    p_train.set_defaults(func=cmd_train)

    p_predict = sub.add_parser("predict", help="classify one PGM image")
    common(p_predict, with_model=True)
    p_predict.add_argument("--image", required=True, help="PGM image to classify")
    p_predict.add_argument("--alpha", type=float, default=None, help="rejection threshold")
    p_predict.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("eval", help="evaluate a model on a labeled dataset")
    common(p_eval, with_data=True, with_model=True)
    p_eval.add_argument(
        "--alpha",
        type=float,
        action="append",
        default=None,
        help="rejection threshold (repeatable; default: config alphas)",
    )
    p_eval.set_defaults(func=cmd_eval)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
