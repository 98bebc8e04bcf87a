"""Console entry points: render-specchart / render-bumpline."""

import argparse
import sys

from .documents import SchemaError, load_document
from .render import render_bumpline, render_spec_chart


def _parser(kind: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=f"Render a {kind} JSON document")
    p.add_argument("file", help="path to the JSON document")
    p.add_argument("--out", required=True, help="output image path (.png or .svg)")
    p.add_argument("--title", default=None)
    return p


def _run(render, kind: str, argv) -> int:
    args = _parser(kind).parse_args(argv)
    try:
        doc = load_document(args.file)
        summary = render(doc, args.out, title=args.title)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}: {summary['n_columns']} columns")
    return 0


def main_specchart(argv=None) -> int:
    return _run(render_spec_chart, "specification chart", argv)


def main_bumpline(argv=None) -> int:
    return _run(render_bumpline, "bumpline", argv)


if __name__ == "__main__":
    sys.exit(main_specchart())
