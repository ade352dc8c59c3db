"""Standalone encoder command: ``itemalign-encode <subcommand> INPUT OUTPUT``.

Flags mirror ProviderConfig one-to-one.  Exit codes follow the pipeline
convention: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .encoder import (
    POOLINGS,
    ProviderConfig,
    ProviderError,
    encode_file,
    render_token_csv,
    token_report,
)

_COMMANDS = {
    "encode": "Encode composed item text into an embedding file.",
    "token-report": "Per-item exact subword counts and truncation flags as CSV.",
}


def _parse_args(argv: list[str] | None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="itemalign-encode",
        description="Transformer sentence encoder for itemalign file formats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in _COMMANDS.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("input", help="composed-input file (itemalign compose output)")
        cmd.add_argument("output", help="file to write")
        cmd.add_argument("--model", required=True,
                         help="model identifier or local checkpoint path")
        cmd.add_argument("--pooling", choices=POOLINGS, default="cls")
        cmd.add_argument("--max-tokens", type=int, default=512)
        cmd.add_argument("--batch-size", type=int, default=32)
        cmd.add_argument("--device", default="cpu")
        cmd.add_argument("--prefix", default="",
                         help="instruction prefix prepended to every text")
    return parser.parse_args(argv)


def _fail(exc: Exception, code: int) -> int:
    message = " ".join(str(exc).split())
    print(f"error: {message}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = _parse_args(argv)
    try:
        import transformers

        transformers.utils.logging.set_verbosity_error()
        transformers.utils.logging.disable_progress_bar()
        config = ProviderConfig(model=args.model, pooling=args.pooling,
                                max_tokens=args.max_tokens,
                                batch_size=args.batch_size, device=args.device,
                                prefix=args.prefix)
        if args.command == "encode":
            embeddings = encode_file(args.input, args.output, config)
            print(f"wrote {args.output} "
                  f"({len(embeddings)} vectors, dim {embeddings.dim})")
        else:
            in_path, out_path = Path(args.input), Path(args.output)
            if in_path.resolve() == out_path.resolve():
                raise ProviderError(
                    f"output {out_path} would overwrite the input file")
            rows = token_report(args.input, config)
            out_path.write_text(render_token_csv(rows), encoding="utf-8")
            over = sum(r.truncated for r in rows)
            print(f"wrote {args.output} ({len(rows)} rows, {over} over budget)")
    except OSError as exc:
        return _fail(exc, 2)
    except ValueError as exc:
        return _fail(exc, 1)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
