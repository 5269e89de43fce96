"""Command-line frontend: build, query, inspect, traverse, generate.

Exit codes: 0 success, 1 usage, 2 bad input, 3 internal invariant
failure.  Query commands report load time and query time separately on
stderr; stdout carries only the answer.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import zlib
from dataclasses import asdict

from .corpus import TreeGenSpec, gen_label_table, gen_tree, gen_xmark_like
from .eval_count import count_query
from .eval_print import materialize_query, serialize_query
from .grammar import (
    GrammarInvalid,
    GrammarStats,
    Symbols,
    binarize,
    build_dag,
    compress_repair,
    stats,
    to_bcnf,
)
from .index import (
    IndexFormatError,
    build_index,
    index_size_report,
    load_index,
    load_texts,
    save_index,
    save_texts,
    unpack_rule,
)
from .navigation import Navigator, NodePool, dflr_iterative, dflr_recursive
from .xml_model import (
    IndexOutOfRange,
    MalformedXml,
    UnsupportedConstruct,
    document_to_string,
    parse_document,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print("%s: error: %s" % (self.prog, message), file=sys.stderr)
        raise SystemExit(1)


def _say(msg):
    print(msg, file=sys.stderr)


def _load(path):
    t0 = time.perf_counter()
    ix = load_index(path)
    return ix, time.perf_counter() - t0


def _index_grammar_stats(ix) -> GrammarStats:
    """GrammarStats of the bCNF grammar the index encodes."""
    ar, null = ix.ar, ix.null_id
    first_nt = null + 1
    size = max(0, len(ix.start_tags) - 1)
    rank = 0
    refs = []
    for k in range(len(ix.rules)):
        x, _, y, r = unpack_rule(ix.rules[k])
        size += ar[x] + ar[y]
        rank = max(rank, r)
        refs.append([s - first_nt for s in (x, y) if s >= first_nt])
    depth_of = [0] * len(ix.rules)
    for k in range(len(ix.rules)):
        stack = [k]
        while stack:
            v = stack[-1]
            pending = [w for w in refs[v] if not depth_of[w]]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            depth_of[v] = 1 + max((depth_of[w] for w in refs[v]), default=0)
    top = max((depth_of[s - first_nt] for s in ix.start_tags
               if s >= first_nt), default=0)
    return GrammarStats(size=size, num_rules=len(ix.rules), rank=rank,
                        depth=top + 1,
                        start_rhs_size=max(0, len(ix.start_tags) - 1))


def _report_components(ix, out):
    rows = index_size_report(ix)
    for name, nbytes in rows:
        out("%-12s %10.1f KB" % (name, nbytes / 1024.0))


def cmd_build(args):
    if args.max_rank < 0:
        raise ValueError("--max-rank must be >= 0")
    out = args.out or os.path.splitext(args.input)[0] + ".tt"
    texts_path = args.texts or out + ".texts"
    with open(args.input, "rb") as f:
        data = f.read()

    phases = []

    def phase(name, fn):
        t0 = time.perf_counter()
        r = fn()
        phases.append((name, time.perf_counter() - t0))
        return r

    st, tc, labels = phase("parse", lambda: parse_document(data))
    sym = Symbols.for_labels(list(labels.names))
    bt = binarize(st)
    if args.compressor == "dag":
        g = phase("compress", lambda: build_dag(bt, sym))
    else:
        g = phase("compress",
                  lambda: compress_repair(bt, sym, max_rank=args.max_rank))
    gstats = stats(g)
    b = phase("bcnf", lambda: to_bcnf(g))
    bstats = stats(b)
    ix = phase("index", lambda: build_index(b))

    def store():
        save_index(ix, out)
        save_texts(tc, texts_path)

    phase("save", store)
    index_bytes = os.path.getsize(out)

    if args.json:
        doc = {
            "input": args.input,
            "input_bytes": len(data),
            "nodes": len(st.label),
            "phases": {n: t for n, t in phases},
            "grammar": asdict(gstats),
            "bcnf": asdict(bstats),
            "components": {n: b_ for n, b_ in index_size_report(ix)},
            "index_bytes": index_bytes,
            "out": out,
            "texts": texts_path,
        }
        print(json.dumps(doc, indent=2))
        return 0
    _say("input %d bytes, %d nodes, %d labels"
         % (len(data), len(st.label), len(labels)))
    for name, t in phases:
        _say("%-9s %8.3f s" % (name, t))
    _say("grammar  %s" % (gstats,))
    _say("bcnf     %s" % (bstats,))
    _report_components(ix, _say)
    _say("wrote %s (%d bytes), texts %s" % (out, index_bytes, texts_path))
    return 0


def cmd_count(args):
    ix, t_load = _load(args.index)
    t0 = time.perf_counter()
    n = count_query(ix, args.xpath, jump=args.jump, skip=not args.no_skip)
    t_query = time.perf_counter() - t0
    print(n)
    _say("load %.1f ms, query %.1f ms" % (t_load * 1e3, t_query * 1e3))
    return 0


def cmd_serialize(args):
    ix, t_load = _load(args.index)
    texts = load_texts(args.texts)
    sink = open(args.out, "w") if args.out else sys.stdout
    try:
        t0 = time.perf_counter()
        n = serialize_query(ix, texts, args.xpath, sink.write)
        t_query = time.perf_counter() - t0
    finally:
        if args.out:
            sink.close()
        else:
            sink.flush()
    _say("%d results; load %.1f ms, query %.1f ms"
         % (n, t_load * 1e3, t_query * 1e3))
    return 0


def cmd_materialize(args):
    ix, t_load = _load(args.index)
    t0 = time.perf_counter()
    out = materialize_query(ix, args.xpath, sink=sys.stdout.write)
    t_query = time.perf_counter() - t0
    _say("%d results; load %.1f ms, query %.1f ms"
         % (len(out), t_load * 1e3, t_query * 1e3))
    return 0


def cmd_stats(args):
    ix, _ = _load(args.index)
    g = _index_grammar_stats(ix)
    if args.json:
        doc = {
            "grammar": asdict(g),
            "labels": len(ix.labels),
            "elements": ix.n_elements,
            "texts": ix.n_texts,
            "components": {n: b for n, b in index_size_report(ix)},
        }
        print(json.dumps(doc, indent=2))
        return 0
    print("bcnf     %s" % (g,))
    print("labels %d, elements %d, texts %d"
          % (len(ix.labels), ix.n_elements, ix.n_texts))
    _report_components(ix, print)
    return 0


def cmd_traverse(args):
    ix, t_load = _load(args.index)
    nav = Navigator(ix)
    if args.mode == "dflr-rec":
        sys.setrecursionlimit(max(sys.getrecursionlimit(), 200000))
        labels = dflr_recursive(nav)
    else:
        labels = dflr_iterative(nav, pool=NodePool())
    crc = 0
    n = 0
    t0 = time.perf_counter()
    for lab in labels:
        crc = zlib.crc32(lab.to_bytes(4, "little"), crc)
        n += 1
    dt = time.perf_counter() - t0
    rate = n / dt if dt > 0 else float("inf")
    if args.json:
        print(json.dumps({"mode": args.mode, "nodes": n, "seconds": dt,
                          "nodes_per_second": rate,
                          "checksum": "%08x" % crc}))
        return 0
    print("nodes %d" % n)
    print("nodes/s %.0f" % rate)
    print("checksum %08x" % crc)
    _say("load %.1f ms, traverse %.1f ms" % (t_load * 1e3, dt * 1e3))
    return 0


def cmd_gen(args):
    if args.kind == "xmark":
        data = gen_xmark_like(args.scale, seed=args.seed)
    else:
        spec = TreeGenSpec(seed=args.seed, node_budget=args.budget,
                           label_count=args.labels,
                           text_probability=args.text_prob,
                           repetition_bias=args.bias)
        st, tc = gen_tree(spec)
        data = document_to_string(st, tc,
                                  gen_label_table(args.labels)).encode()
    if args.out:
        with open(args.out, "wb") as f:
            f.write(data)
        _say("wrote %s (%d bytes)" % (args.out, len(data)))
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    return 0


def _build_parser():
    p = _Parser(prog="sltindex",
                description="Grammar-compressed structural XML self-index.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="parse, compress and index a document")
    b.add_argument("input")
    b.add_argument("--out", help="index file (default: <input>.tt)")
    b.add_argument("--texts", help="text file (default: <out>.texts)")
    b.add_argument("--compressor", choices=("repair", "dag"),
                   default="repair")
    b.add_argument("--max-rank", type=int, default=2)
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_build)

    c = sub.add_parser("count", help="number of nodes an XPath query selects")
    c.add_argument("index")
    c.add_argument("xpath")
    c.add_argument("--jump", choices=("off", "relevant", "f"), default="f")
    c.add_argument("--no-skip", action="store_true")
    c.set_defaults(func=cmd_count)

    s = sub.add_parser("serialize", help="write each selected subtree as XML")
    s.add_argument("index")
    s.add_argument("texts")
    s.add_argument("xpath")
    s.add_argument("--out")
    s.set_defaults(func=cmd_serialize)

    m = sub.add_parser("materialize",
                       help="pre-order numbers of selected nodes")
    m.add_argument("index")
    m.add_argument("xpath")
    m.set_defaults(func=cmd_materialize)

    t = sub.add_parser("stats", help="grammar statistics and table sizes")
    t.add_argument("index")
    t.add_argument("--json", action="store_true")
    t.set_defaults(func=cmd_stats)

    v = sub.add_parser("traverse", help="full dflr traversal benchmark")
    v.add_argument("index")
    v.add_argument("--mode", choices=("dflr-rec", "dflr-it"),
                   default="dflr-it")
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_traverse)

    g = sub.add_parser("gen", help="generate a test document")
    gs = g.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    gx = gs.add_parser("xmark", help="auction-site benchmark document")
    gx.add_argument("--scale", type=float, default=1.0)
    gx.add_argument("--seed", type=int, default=0)
    gx.add_argument("--out")
    gx.set_defaults(func=cmd_gen, kind="xmark")
    gt = gs.add_parser("tree", help="random structure tree as XML")
    gt.add_argument("--budget", type=int, default=1000)
    gt.add_argument("--labels", type=int, default=4)
    gt.add_argument("--text-prob", type=float, default=0.2)
    gt.add_argument("--bias", type=float, default=0.0)
    gt.add_argument("--seed", type=int, default=0)
    gt.add_argument("--out")
    gt.set_defaults(func=cmd_gen, kind="tree")

    return p


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    try:
        return args.func(args)
    except BrokenPipeError:
        return 0
    except GrammarInvalid as e:
        print("internal error: %s" % e, file=sys.stderr)
        return 3
    except (MalformedXml, UnsupportedConstruct, IndexFormatError,
            IndexOutOfRange, OSError, ValueError) as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    except Exception as e:
        print("internal error: %s: %s" % (type(e).__name__, e),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
