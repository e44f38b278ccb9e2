"""``hbmecc`` command: run one experiment config and write its CSV."""

import argparse
import sys

from .experiments import U64, ConfigError, load_config, run_config, with_overrides

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < U64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _jobs(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("jobs must be >= 1")
    return value


def build_parser():
    p = argparse.ArgumentParser(prog="hbmecc", description=__doc__)
    p.add_argument("--config", required=True, help="TOML experiment config")
    p.add_argument("--out", help="CSV path (overrides the config's output)")
    p.add_argument("--seed", type=_seed, help="override master_seed")
    p.add_argument("--jobs", type=_jobs, default=1, help="worker processes for the sweep")
    p.add_argument("--print-config", action="store_true",
                   help="print the parsed config with defaults filled in, then exit")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; bad flags are config errors here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        config = with_overrides(load_config(args.config), args.seed, args.out)
    except ConfigError as exc:
        for line in exc.diagnostics:
            print(f"{args.config}: {line}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        sys.stdout.write(config.echo())
        return EXIT_OK
    try:
        text = run_config(config, config.output, args.jobs)
    except Exception as exc:  # noqa: BLE001 - any failure mid-run maps to one exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if config.output is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {text.count(chr(10)) - 1} rows to {config.output}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
