"""Command-line entry points: plot, table."""

from __future__ import annotations

import argparse
import sys

from .charts import PlotSpec, plot_metric_vs_n
from .tables import parse_filter, table_summary


def _cmd_plot(args) -> int:
    spec = PlotSpec(csv_path=args.csv, metric=args.metric, out_path=args.out,
                    subset=args.subset, weighting=args.weighting,
                    strategies=tuple(args.strategies.split(",")) if args.strategies else ())
    path = plot_metric_vs_n(spec)
    print(f"wrote {path}")
    return 0


def _cmd_table(args) -> int:
    markdown = table_summary(args.csv, parse_filter(args.filter))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(markdown)
        print(f"wrote {args.out}")
    else:
        print(markdown, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aqplots",
                                     description="Charts and tables from results CSVs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plot", help="faceted metric-vs-sensor-count chart")
    p.add_argument("--csv", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--subset", default="overall")
    p.add_argument("--weighting", default="population_density")
    p.add_argument("--strategies", help="comma-separated subset of strategies")
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("table", help="markdown scenario summary table")
    p.add_argument("--csv", required=True)
    p.add_argument("--filter", default="", help='e.g. "weighting=population_density,n_lcs=100"')
    p.add_argument("--out")
    p.set_defaults(func=_cmd_table)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
