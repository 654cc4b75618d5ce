"""figures <figure_id> --in <csv> --out <image>

Exit codes: 0 success, 1 rendering failure, 2 usage/schema error.
"""

from __future__ import annotations

import argparse
import sys

from .render import SCHEMAS, FigureJob, SchemaError, render


def build_parser():
    ap = argparse.ArgumentParser(prog="figures", description=__doc__)
    ap.add_argument("figure_id", choices=sorted(SCHEMAS))
    ap.add_argument("--in", dest="input_csv", required=True, help="input CSV path")
    ap.add_argument("--out", dest="output_image", required=True, help="output image path")
    ap.add_argument("--style", default="default")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = FigureJob(
            figure_id=args.figure_id,
            input_csv=args.input_csv,
            output_image=args.output_image,
            style=args.style,
        )
        render(job)
        return 0
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # rendering problem
        print(f"rendering failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
