"""python -m livegate_engine --name my-model \
       --gateway ws://127.0.0.1:8780/engine --module my_model:predict"""

import argparse
import asyncio
import importlib
import sys

from . import serve


def load_callable(spec: str):
    module_name, _, attr = spec.partition(":")
    if not module_name or not attr:
        raise SystemExit(f"--module must look like package.module:function, got {spec!r}")
    module = importlib.import_module(module_name)
    return getattr(module, attr)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="livegate_engine")
    parser.add_argument("--name", required=True)
    parser.add_argument("--gateway", required=True, help="ws://host:port/engine")
    parser.add_argument("--module", required=True, help="module.path:predict_fn")
    parser.add_argument("--stage-role", default="classification")
    args = parser.parse_args(argv)

    predict_fn = load_callable(args.module)
    try:
        asyncio.run(serve(predict_fn, args.name, args.gateway,
                          stage_role=args.stage_role))
    except KeyboardInterrupt:
        pass
    except ConnectionError as exc:
        print(exc, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
