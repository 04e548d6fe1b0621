"""Command-line entry point: ``singlehuff <command> ...`` or ``python -m singlehuff``.

Exit codes: 0 success, 1 usage error, 2 data or format error.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from collections import defaultdict
from pathlib import Path

from .collective import MODES, all_gather, compare_modes, format_table, make_nodes
from .errors import SingleHuffError
from .formats import Dtype
from .framing import Frame, decode_frame, encode_frame
from .registry import Registry, TensorKind
from .shardio import MANIFEST_NAME, encode_shard, read_manifest, read_shard, read_shard_dir, write_shard_dir
from .stats import ShardReport, histogram, reports_to_csv, to_pmf
from .symbolize import SYMBOL_WIDTHS, ShardId, default_symbol_width
from .synthetic import DISTRIBUTIONS, SyntheticConfig, generate_synthetic_shards

DEFAULT_SEED = 20250101
FRAME_SUFFIX = ".hfr"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _kind_name(shard_id) -> str:
    return shard_id.kind if isinstance(shard_id, ShardId) else "default"


def _load_corpus(shard_dir):
    shard_dir = Path(shard_dir)
    if not shard_dir.is_dir():
        raise UsageError(f"{shard_dir} is not a directory")
    if not (shard_dir / MANIFEST_NAME).exists():
        raise UsageError(f"{shard_dir} has no {MANIFEST_NAME}; nothing to read")
    shards = read_shard_dir(shard_dir)
    if not shards:
        raise UsageError(f"{shard_dir} lists no shards")
    return shards


def _check_symbol_width(args) -> None:
    if args.symbol_width is not None and args.symbol_width != default_symbol_width(args.dtype):
        raise UsageError(f"--dtype {args.dtype} uses {default_symbol_width(args.dtype)}-bit symbols, "
                         f"not {args.symbol_width}")


def _registry_from_shards(shards) -> Registry:
    reg = Registry()
    by_kind = defaultdict(list)
    for s in shards:
        by_kind[_kind_name(s.shard_id)].append(s)
    for name in sorted(by_kind):
        group = by_kind[name]
        kind = TensorKind(name, group[0].source_dtype, group[0].symbol_width)
        for s in group:
            reg.accumulate(kind, histogram(s))
    reg.build_all()
    return reg


def cmd_gen_synthetic(args) -> int:
    _check_symbol_width(args)
    cfg = SyntheticConfig(
        layers=args.layers, shards_per_layer=args.shards_per_layer, elements=args.elements,
        seed=args.seed, distribution=args.distribution, jitter=args.jitter,
        dtype=args.dtype, kind=args.kind,
    )
    write_shard_dir(args.out, generate_synthetic_shards(cfg))
    print(f"# seed={args.seed}")
    print(f"wrote {cfg.layers * cfg.shards_per_layer} shards to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    shards = _load_corpus(args.shard_dir)
    reg = _registry_from_shards(shards)
    hists = [histogram(s) for s in shards]
    averages = {cid: to_pmf(reg.histogram(cid)) for cid in reg.ids}
    reports = []
    for s, h in zip(shards, hists):
        if h.total == 0:
            raise SingleHuffError(f"shard {s.shard_id} is empty")
        cid = reg.id_for(_kind_name(s.shard_id))
        reports.append(ShardReport.compute(s.shard_id, h, averages[cid], reg.codebook(cid)))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(reports_to_csv(reports, summary=True))
    pmf_path = Path(args.pmf_out) if args.pmf_out else out.with_suffix(".avg_pmf.json")
    pmf_path.write_text(json.dumps(
        {reg.kind(cid).name: {"symbol_width": p.symbol_width, "probs": p.probs.tolist()}
         for cid, p in averages.items()},
        sort_keys=True,
    ) + "\n")
    if args.histograms_out:
        Path(args.histograms_out).write_text(json.dumps(
            {str(s.shard_id): h.counts.tolist() for s, h in zip(shards, hists)}, sort_keys=True
        ) + "\n")
    print(f"analyzed {len(reports)} shards -> {out}")
    return 0


def cmd_build_codebooks(args) -> int:
    shards = _load_corpus(args.shard_dir)
    reg = _registry_from_shards(shards)
    Path(args.out).write_bytes(reg.export())
    for cid in reg.ids:
        kind = reg.kind(cid)
        print(f"codebook {cid}: {kind.name} ({kind.dtype}, {kind.symbol_width}-bit symbols)")
    return 0


def _load_registry(path) -> Registry:
    try:
        return Registry.load(path)
    except OSError as exc:
        raise SingleHuffError(f"{path}: {exc.strerror or exc}") from None


def cmd_compress(args) -> int:
    src, dst = Path(args.input), Path(args.out)
    reg = _load_registry(args.registry)
    manifest = read_manifest(src)
    if not manifest:
        raise UsageError(f"{src} lists no shards")
    dst.mkdir(parents=True, exist_ok=True)
    total_in = total_out = 0
    for key in sorted(manifest):
        rel = manifest[key]
        stream = read_shard(src / rel)
        if args.codebook_id is not None:
            frame = encode_frame(stream, reg, codebook_id=args.codebook_id)
        elif args.no_select:
            sid = ShardId.parse(key) if "/" in key else None
            frame = encode_frame(stream, reg, codebook_id=reg.id_for(_kind_name(sid)))
        else:
            frame = encode_frame(stream, reg)
        target = dst / (rel + FRAME_SUFFIX)
        target.parent.mkdir(parents=True, exist_ok=True)
        data = frame.to_bytes()
        target.write_bytes(data)
        total_in += (src / rel).stat().st_size
        total_out += len(data)
    shutil.copyfile(src / MANIFEST_NAME, dst / MANIFEST_NAME)
    print(f"compressed {len(manifest)} shards: {total_in} -> {total_out} bytes")
    return 0


def cmd_decompress(args) -> int:
    src, dst = Path(args.input), Path(args.out)
    reg = _load_registry(args.registry)
    manifest = read_manifest(src)
    dst.mkdir(parents=True, exist_ok=True)
    for key in sorted(manifest):
        rel = manifest[key]
        path = src / (rel + FRAME_SUFFIX)
        try:
            frame = Frame.from_bytes(path.read_bytes())
            stream = decode_frame(frame, reg)
            data = encode_shard(stream)
        except OSError as exc:
            raise SingleHuffError(f"{path}: {exc.strerror or exc}") from None
        except SingleHuffError as exc:
            raise type(exc)(f"{path}: {exc}") from None
        target = dst / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
    shutil.copyfile(src / MANIFEST_NAME, dst / MANIFEST_NAME)
    print(f"decompressed {len(manifest)} shards into {dst}")
    return 0


def cmd_simulate(args) -> int:
    _check_symbol_width(args)
    if args.nodes < 2:
        raise UsageError("--nodes must be at least 2")
    base = dict(layers=args.nodes, shards_per_layer=args.shards_per_node, elements=args.elements,
                dtype=args.dtype, distribution=args.distribution)
    # codebooks come from an earlier batch, never from the data being sent
    history = generate_synthetic_shards(SyntheticConfig(seed=args.seed + 1, **base))
    reg = _registry_from_shards(history)
    current = generate_synthetic_shards(SyntheticConfig(seed=args.seed, **base))
    per_node = [current[r * args.shards_per_node:(r + 1) * args.shards_per_node] for r in range(args.nodes)]
    nodes = make_nodes(per_node, reg)

    if args.mode == "all":
        reports = compare_modes(nodes)
    else:
        reports = {args.mode: all_gather(nodes, args.mode)[1]}

    if args.json:
        print(json.dumps({"seed": args.seed, "nodes": args.nodes,
                          "reports": [r.to_dict() for r in reports.values()]}, sort_keys=True))
    else:
        print(f"# seed={args.seed} nodes={args.nodes} shards_per_node={args.shards_per_node} "
              f"elements={args.elements} dtype={Dtype.parse(args.dtype)}")
        print(format_table(reports))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="singlehuff", description="Fixed-codebook Huffman compression for tensor shards.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-synthetic", help="write a synthetic shard directory")
    g.add_argument("--out", required=True)
    g.add_argument("--layers", type=int, default=18)
    g.add_argument("--shards-per-layer", type=int, default=64)
    g.add_argument("--elements", type=int, default=100_000)
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("--dtype", default="bf16", choices=[d.short_name for d in Dtype])
    g.add_argument("--symbol-width", type=int, choices=SYMBOL_WIDTHS, help="must match --dtype")
    g.add_argument("--distribution", default="gaussian", choices=DISTRIBUTIONS)
    g.add_argument("--jitter", type=float, default=0.02)
    g.add_argument("--kind", default="ffn1_activation")
    g.set_defaults(func=cmd_gen_synthetic)

    a = sub.add_parser("analyze", help="per-shard entropy, compressibility and KL report")
    a.add_argument("shard_dir")
    a.add_argument("--out", required=True, help="CSV path")
    a.add_argument("--pmf-out", help="average PMF JSON (default: next to the CSV)")
    a.add_argument("--histograms-out", help="optional per-shard histogram JSON")
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("build-codebooks", help="build the shared codebook registry")
    b.add_argument("shard_dir")
    b.add_argument("--out", required=True, help="registry file")
    b.set_defaults(func=cmd_build_codebooks)

    c = sub.add_parser("compress", help="one single-stage frame per shard")
    c.add_argument("input")
    c.add_argument("--registry", required=True)
    c.add_argument("--out", required=True)
    sel = c.add_mutually_exclusive_group()
    sel.add_argument("--codebook-id", type=int, help="skip selection and use this codebook")
    sel.add_argument("--no-select", action="store_true", help="use the codebook of each shard's tensor kind")
    c.set_defaults(func=cmd_compress)

    d = sub.add_parser("decompress", help="restore shard files from frames")
    d.add_argument("input")
    d.add_argument("--registry", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_decompress)

    s = sub.add_parser("simulate", help="ring AllGather traffic comparison")
    s.add_argument("--nodes", type=int, default=8)
    s.add_argument("--mode", default="all", choices=MODES + ("all",))
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--elements", type=int, default=32_768)
    s.add_argument("--shards-per-node", type=int, default=1)
    s.add_argument("--dtype", default="bf16", choices=[d.short_name for d in Dtype])
    s.add_argument("--symbol-width", type=int, choices=SYMBOL_WIDTHS, help="must match --dtype")
    s.add_argument("--distribution", default="gaussian", choices=DISTRIBUTIONS)
    s.add_argument("--json", action="store_true", help="print JSON instead of a table")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"singlehuff {args.command}: {exc}", file=sys.stderr)
        return 1
    except (SingleHuffError, OSError) as exc:
        print(f"singlehuff {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
