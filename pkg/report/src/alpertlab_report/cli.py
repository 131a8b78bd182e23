"""alpertlab-report <decay|sweep|summary> PATH [--out PATH]"""

from __future__ import annotations

import argparse
import sys

from .plots import render_decay_plot, render_eta_sweep
from .summary import NoInputsError, render_summary
from .tables import SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="alpertlab-report",
        description="render alpertlab CSV/JSON outputs as SVG figures and an HTML report",
    )
    parser.add_argument("what", choices=["decay", "sweep", "summary"])
    parser.add_argument("path", help="CSV file (decay/sweep) or output directory (summary)")
    parser.add_argument("--out", help="output directory (figures) or file (summary)")
    args = parser.parse_args(argv)
    try:
        if args.what == "decay":
            out = render_decay_plot(args.path, out_dir=args.out)
        elif args.what == "sweep":
            out = render_eta_sweep(args.path, out_dir=args.out)
        else:
            out = render_summary(args.path, out_path=args.out)
    except (SchemaError, NoInputsError, FileNotFoundError) as exc:
        print(f"alpertlab-report: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
