"""CLI: ``plot --spec <plotspec.json>`` renders one chart (PNG plus SVG)."""
from __future__ import annotations

import argparse
import json
import sys


def cli_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render experiment summary CSVs into charts."
    )
    parser.add_argument("--spec", required=True, help="path to a plot-spec JSON file")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    from .render import PlotSpecError, render_file

    try:
        written = render_file(args.spec)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(
            f"error: malformed JSON in {args.spec} at line {exc.lineno}, column {exc.colno}",
            file=sys.stderr,
        )
        return 1
    except PlotSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
