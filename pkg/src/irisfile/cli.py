"""Command-line lifecycle tool for slide containers.

Subcommands cover the whole loop: create a synthetic slide, inspect it,
validate it, extract tile payloads, inject corruption for testing,
repair a damaged file, and benchmark random access. Exit codes: 0
success, 1 validation errors found, 2 usage error, 3 I/O error, 4
unrecoverable corruption. --json switches reports to machine-readable
output with stable keys.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bench import bench_random_access, format_report
from .encode import AttributeInput, EncodeParams, encode_slide, synthetic_source
from .errors import IrisFileError, OpenError, UnrecoverableError
from .recovery import repair
from .reader import SPARSE
from .slide import open_slide
from .validation import ValidationLevel, validate
from .wire import EncodingFormat, PixelFormat

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_UNRECOVERABLE = 4

_FORMATS = {
    "raw-test": EncodingFormat.RAW_TEST,
    "jpeg": EncodingFormat.JPEG,
    "avif": EncodingFormat.AVIF,
}
_PIXELS = {"rgb": PixelFormat.R8G8B8, "rgba": PixelFormat.R8G8B8A8}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irisfile",
        description="Create, inspect, validate, corrupt, repair and benchmark "
                    "slide container files.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("create", help="encode a new slide container")
    p.add_argument("--synthetic", required=True, metavar="SPEC",
                   help="procedural source, e.g. seed=7,layers=1x1:2x2:4x4")
    p.add_argument("--format", choices=sorted(_FORMATS), default="raw-test")
    p.add_argument("--pixel", choices=sorted(_PIXELS), default="rgb")
    p.add_argument("--quality", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--placement", choices=["start", "end"], default="start")
    p.add_argument("--sparse", metavar="I,J,...", default="",
                   help="global tile indices to leave sparse")
    p.add_argument("--attr", action="append", default=[], metavar="KEY=VALUE",
                   help="attach an attribute (repeatable)")
    p.add_argument("output")

    p = sub.add_parser("validate", help="run deep validation and report findings")
    p.add_argument("path")
    p.add_argument("--level", choices=["structure", "full"], default="full")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("info", help="summarize a container")
    p.add_argument("path")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("extract", help="write one tile's compressed payload to a file")
    p.add_argument("path")
    p.add_argument("--tile", type=int, required=True, metavar="INDEX")
    p.add_argument("--out", required=True)

    p = sub.add_parser("corrupt", help="damage a copy of a file (test fixture)")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--flip-byte", type=int, default=None, metavar="N",
                   help="XOR the byte at offset N with 0xFF")
    p.add_argument("--zero-range", default=None, metavar="A:B",
                   help="zero bytes in [A, B)")
    p.add_argument("--truncate", type=int, default=None, metavar="N",
                   help="keep only the first N bytes")

    p = sub.add_parser("repair", help="scan a damaged file and salvage a valid copy")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("bench", help="measure random tile access throughput")
    p.add_argument("path")
    p.add_argument("--batch-size", type=int, default=10_000)
    p.add_argument("--batches", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["compressed", "decoded", "both"], default="both")
    p.add_argument("--json", action="store_true")

    return parser


def _parse_synthetic(spec: str):
    fields = dict(part.split("=", 1) for part in spec.split(",") if part)
    seed = int(fields.pop("seed", "0"))
    layers_spec = fields.pop("layers", None)
    if layers_spec is None:
        raise ValueError("--synthetic needs layers=WxH:WxH:...")
    if fields:
        raise ValueError(f"unknown --synthetic fields: {', '.join(sorted(fields))}")
    layers = []
    for part in layers_spec.split(":"):
        x, y = part.lower().split("x")
        layers.append((int(x), int(y)))
    return seed, layers


def _cmd_create(args) -> int:
    seed, layers = _parse_synthetic(args.synthetic)
    sparse = [int(i) for i in args.sparse.split(",") if i.strip()]
    attributes = []
    for pair in args.attr:
        key, _, value = pair.partition("=")
        attributes.append(AttributeInput(key, value))
    source = synthetic_source(seed, layers, pixel_format=_PIXELS[args.pixel],
                              sparse=sparse, attributes=attributes)
    params = EncodeParams(encoding_format=_FORMATS[args.format],
                          quality=args.quality, worker_count=args.workers,
                          placement=args.placement)
    report = encode_slide(source, params, args.output)
    print(f"{args.output}: {report.file_size} bytes, "
          f"{report.layout.total_tiles} tiles ({report.sparse_count} sparse), "
          f"{report.layout.layer_count} layers, {args.workers} worker(s), "
          f"{report.elapsed_s:.2f}s")
    return EXIT_OK


def _cmd_validate(args) -> int:
    level = ValidationLevel.FULL if args.level == "full" else ValidationLevel.STRUCTURE
    try:
        report = validate(args.path, level)
    except OpenError as exc:
        if args.json:
            print(json.dumps({"ok": False, "open_error": str(exc)}))
        else:
            print(f"{args.path}: {exc}")
        return EXIT_VALIDATION
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(f"{args.path}: {report.summary()}")
        for f in report.findings:
            print(f"  {f.severity.value.upper():<7} {f.code} at offset {f.offset}: "
                  f"{f.message}")
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _cmd_info(args) -> int:
    with open_slide(args.path) as slide:
        fmt = EncodingFormat(slide.encoding_format).name \
            if slide.encoding_format in EncodingFormat._value2member_map_ \
            else hex(slide.encoding_format)
        payload = {
            "path": args.path,
            "file_size": len(slide.view),
            "encoding_format": fmt,
            "pixel_format": slide.pixel_format.name,
            "tile_dimension": slide.tile_dimension,
            "layers": [{"x_tiles": e.x_tiles, "y_tiles": e.y_tiles, "scale": e.scale}
                       for e in slide.layout.layers],
            "total_tiles": slide.total_tiles,
            "sparse_tiles": slide.sparse_count,
            "attribute_keys": list(slide.attribute_keys),
            "associated_image_labels": list(slide.associated_image_labels),
            "annotation_count": len(slide.annotation_ids),
            "annotation_group_names": list(slide.group_names),
        }
        if args.json:
            print(json.dumps(payload, indent=2))
            return EXIT_OK
        print(f"{args.path}: {payload['file_size']} bytes")
        print(f"  encoding {fmt}, pixels {payload['pixel_format']}, "
              f"tiles {payload['tile_dimension']}x{payload['tile_dimension']}")
        print("  layers (lowest resolution first):")
        for i, layer in enumerate(payload["layers"]):
            print(f"    {i}: {layer['x_tiles']}x{layer['y_tiles']} tiles, "
                  f"scale {layer['scale']:g}")
        print(f"  tiles: {payload['total_tiles']} total, "
              f"{payload['sparse_tiles']} sparse")
        print(f"  attributes: {', '.join(payload['attribute_keys']) or '(none)'}")
        print(f"  associated images: "
              f"{', '.join(payload['associated_image_labels']) or '(none)'}")
        print(f"  annotations: {payload['annotation_count']} "
              f"in {len(payload['annotation_group_names'])} group(s)")
    return EXIT_OK


def _cmd_extract(args) -> int:
    with open_slide(args.path) as slide:
        data = slide.read_tile_compressed(args.tile)
        if data is SPARSE:
            print(f"tile {args.tile} is sparse; nothing to extract", file=sys.stderr)
            return EXIT_VALIDATION
        with open(args.out, "wb") as f:
            f.write(data)
        print(f"{args.out}: {len(data)} bytes (tile {args.tile})")
    return EXIT_OK


def _cmd_corrupt(args) -> int:
    if args.flip_byte is None and args.zero_range is None and args.truncate is None:
        print("corrupt: give at least one of --flip-byte, --zero-range, --truncate",
              file=sys.stderr)
        return EXIT_USAGE
    with open(args.input, "rb") as f:
        data = bytearray(f.read())
    if args.flip_byte is not None:
        data[args.flip_byte] ^= 0xFF
    if args.zero_range is not None:
        a, _, b = args.zero_range.partition(":")
        data[int(a):int(b)] = bytes(int(b) - int(a))
    if args.truncate is not None:
        del data[args.truncate:]
    with open(args.output, "wb") as f:
        f.write(data)
    print(f"{args.output}: {len(data)} bytes")
    return EXIT_OK


def _cmd_repair(args) -> int:
    report = repair(args.input, args.output)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(f"{args.output}: {report.summary()}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    paths = ("compressed", "decoded") if args.mode == "both" else (args.mode,)
    with open_slide(args.path) as slide:
        result = bench_random_access(slide, batch_size=args.batch_size,
                                     batches=args.batches, seed=args.seed,
                                     paths=paths)
    if args.json:
        print(json.dumps(result.to_dict(), indent=2))
    else:
        print(format_report(result))
    return EXIT_OK


_COMMANDS = {
    "create": _cmd_create,
    "validate": _cmd_validate,
    "info": _cmd_info,
    "extract": _cmd_extract,
    "corrupt": _cmd_corrupt,
    "repair": _cmd_repair,
    "bench": _cmd_bench,
}


def run(argv=None) -> int:
    """Parse and dispatch; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UnrecoverableError as exc:
        print(f"unrecoverable: {exc}", file=sys.stderr)
        return EXIT_UNRECOVERABLE
    except OpenError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, IndexError, KeyError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IrisFileError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
