"""Command-line entry point: clip-export --manifest m.json --out emb.json."""

from __future__ import annotations

import argparse
import sys

from .errors import ClipExportError
from .export import export
from .manifest import load_manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clip-export",
        description="Encode images and text prompts into a unit-norm EMB1 embedding table",
    )
    parser.add_argument("--manifest", required=True, help="export manifest JSON")
    parser.add_argument("--out", default=None,
                        help="output EMB1 path (defaults to the manifest's output_path)")
    parser.add_argument("--dump-images", default=None, metavar="DIR",
                        help="also write each decoded image as an EMT1 tensor in [0,1]")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = load_manifest(args.manifest)
        result = export(manifest, out_path=args.out, image_dump_dir=args.dump_images)
    except ClipExportError as exc:
        print(f"clip-export: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(result.ids)} embeddings (dim {result.dim}) to {result.output_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
