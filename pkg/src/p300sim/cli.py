"""Command-line entry point: ``p300sim run --config <path>`` plus overrides.

Exit codes: 0 success, 2 config error, 3 data error, 4 partial batch
failure (some subjects failed, results for the rest were written).
"""

from __future__ import annotations

import argparse
import logging
import shlex
import sys

from .decoder import DecoderConfig
from .harness import SimConfig, run_batch

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PARTIAL = 4

_DECODER_KEYS = {
    "p_thresh": float,
    "max_scans": int,
    "backspace_prior": float,
    "min_scans": int,
}
_CONFIG_KEYS = {
    "scheme": str,
    "cv_mode": str,
    "passage_path": str,
    "corpus_path": str,
    "subjects_path": str,
    "seed": int,
    "suggestions_n": int,
    "soa_seconds": float,
    "abandon_scans": int,
    "max_word_len": int,
    "layout_rebuild": str,
    "suggester_tcp": str,
    "out_path": str,
    "trace_dir": str,
}


def parse_config_file(path) -> dict:
    """Flat key=value file; blank lines and # comments ignored."""
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if key in _CONFIG_KEYS:
                values[key] = _CONFIG_KEYS[key](raw)
            elif key in _DECODER_KEYS:
                values.setdefault("decoder", {})[key] = _DECODER_KEYS[key](raw)
            elif key == "suggester_cmd":
                values[key] = shlex.split(raw)
            else:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    return values


def build_config(args) -> SimConfig:
    values = parse_config_file(args.config) if args.config else {}
    overrides = {
        "scheme": args.scheme,
        "cv_mode": args.cv,
        "subjects_path": args.subjects,
        "passage_path": args.passage,
        "corpus_path": args.corpus,
        "seed": args.seed,
        "out_path": args.out,
        "trace_dir": args.trace,
        "suggester_tcp": args.suggester_tcp,
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    if args.suggester_cmd is not None:
        values["suggester_cmd"] = shlex.split(args.suggester_cmd)
    decoder_kwargs = values.pop("decoder", {})
    values["decoder"] = DecoderConfig(**decoder_kwargs)
    return SimConfig(**values)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="p300sim")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="simulate passage typing for a batch of subjects")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--scheme", choices=None)
    run.add_argument("--cv", choices=("wscv", "ascv"))
    run.add_argument("--subjects", help="directory of subject data files")
    run.add_argument("--passage", help="plain-text passage to type")
    run.add_argument("--corpus", help="plain-text training corpus")
    run.add_argument("--seed", type=int)
    run.add_argument("--suggester-cmd", help="argv for a stdio word suggester")
    run.add_argument("--suggester-tcp", help="host:port of a TCP word suggester")
    run.add_argument("--out", help="results CSV path")
    run.add_argument("--trace", help="directory for per-selection trace logs")
    run.add_argument("-v", "--verbose", action="count", default=0)
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        config = build_config(args)
        for key in ("corpus_path", "passage_path", "subjects_path"):
            if not getattr(config, key):
                raise ValueError(f"missing required setting {key}")
    except (OSError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        results, failed = run_batch(config)
    except (OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    for r in results:
        print(
            f"{r.subject_id} {r.scheme}: itr={r.itr_bits_per_min:.2f} bits/min "
            f"retry={r.retry_rate:.4f} abandoned={r.abandoned}"
        )
    if failed:
        print("some subjects failed; see log", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
