"""Acceptance gate: six criteria, one PASS/FAIL line each.

Each criterion is one test.  The verdict lines are printed in the
terminal summary after the run; everything else is ordinary asserts,
so a FAIL line always comes with a failing test.
"""

import contextlib
import os
import random
import time

import pytest

import conftest

from sltindex.automata import compile_query, parse_xpath
from sltindex.corpus import (
    BENCHMARK_QUERIES,
    TreeGenSpec,
    gen_label_table,
    gen_tree,
    gen_xmark_like,
)
from sltindex.eval_count import CountEvaluator, count_query
from sltindex.eval_print import PrintEvaluator, serialize_query
from sltindex.grammar import (
    SltGrammar,
    Symbols,
    binarize,
    build_dag,
    compress_repair,
    expand,
    stats,
    to_bcnf,
    trivial_grammar,
)
from sltindex.index import build_index, save_index, size_formulas
from sltindex.navigation import Navigator
from sltindex.xml_model import (
    TextCollection,
    document_to_string,
    emit_xml,
    parse_document,
)

from oracles import (
    DOCISH_LABELS,
    A,
    B,
    C,
    F,
    g1_grammar,
    is_element_name,
    naive_xpath_nodes,
    rand_document,
    rand_query,
    rand_structure_tree,
    sec2_symbols,
    sec2_tree,
)

SUITE_BUDGET = 60.0

DOC = (b'<g>This<f><f><a><b>is</b></a><c>a test</c></f>'
       b'<a><c>document</c></a><c>for the purpose</c></f>'
       b'<a><c>of explaining</c></a><c>serialization</c></g>')


@contextlib.contextmanager
def _criterion(num, desc):
    try:
        yield
    except BaseException:
        conftest.acceptance_lines.append("criterion %d: FAIL - %s" % (num, desc))
        raise
    conftest.acceptance_lines.append("criterion %d: PASS - %s" % (num, desc))


def flat(bt, sym):
    return trivial_grammar(bt, sym).start


# ------------------------------------------------- structural bound checks
#
# These run on every randomized case of the oracle suites below, and once
# more in bulk under criterion 3.

def check_bcnf_bounds(g, bc):
    """Every non-start rule holds exactly two nodes; rule count is bounded."""
    for rhs in bc.rules.values():
        nodes = 0
        stack = [rhs]
        while stack:
            p = stack.pop()
            if isinstance(p, tuple):
                nodes += 1
                stack.extend(p[1:])
            elif p >= 0:
                nodes += 1
        assert nodes == 2, rhs
    assert len(bc.rules) <= 2 * stats(g).size


def check_query_bounds(query, names):
    dfa = compile_query(query, names)
    assert dfa.n_states <= 2 * len(parse_xpath(query)), query
    return dfa


def check_behaviour_bound(ev, dfa, ix):
    """At most one behaviour computation per (state, rule) pair."""
    assert ev.stats.behaviours <= dfa.n_states * ix.n_rules()


# -------------------------------------------------------------- criterion 1

def test_criterion_1_worked_examples():
    with _criterion(1, "worked examples: dag size, normal form, counts, "
                       "serialization, size formulas"):
        # minimal dag of the size-10 example tree shares a(c,c) and c
        sym = sec2_symbols()
        bt = sec2_tree()
        assert len(flat(bt, sym)) - 1 == 10
        assert stats(build_dag(bt, sym)).size == 8

        # normal form of the rank-1 sharing grammar: size 9, 3 two-node rules
        g1 = g1_grammar()
        s = stats(g1)
        assert s.size == 9
        assert s.num_rules == 3
        check_bcnf_bounds(g1, g1)

        # counting over grammars without expansion
        assert count_query(build_index(g1), "//f//b") == 1
        a0 = sym.fresh_nt(1)
        aab = SltGrammar(sym, [a0, a0, B], {a0: (F, -1, (A, C, C))})
        assert count_query(build_index(to_bcnf(aab)), "/b") == 0

        # serialization of the running document
        st, tc, labels = parse_document(DOC)
        dsym = Symbols.for_labels(list(labels.names))
        ix = build_index(to_bcnf(compress_repair(binarize(st), dsym, 2)))
        ev = PrintEvaluator(ix, compile_query("//c", ix.labels))
        out = []
        assert ev.serialize(tc, out.append) == 5
        assert [(p, t) for p, t, _ in ev.results] == [
            (1, 2), (4, 3), (7, 4), (10, 5), (13, 6)]
        assert "".join(out) == (
            "<c>a test</c><c>document</c><c>for the purpose</c>"
            "<c>of explaining</c><c>serialization</c>")
        out = []
        assert serialize_query(ix, tc, "//b", out.append) == 1
        assert "".join(out) == "<b>is</b>"
        assert tc.get_text(6) == "serialization"

        # accounted sizes for a 39631-rule, 89-label index
        rows = dict(size_formulas(39631, 89, 1000, 100))
        assert rows["rules"] == 39631 * 8.0
        assert round(rows["rules"] / 1024, 1) == 309.6
        assert rows["jump"] * 8 == 39631 * 89
        assert round(rows["jump"] / 1024) == 431


# -------------------------------------------------------------- criterion 2

def _compressor(bt, sym, k):
    if k == 0:
        return trivial_grammar(bt, sym)
    if k == 1:
        return build_dag(bt, sym)
    return compress_repair(bt, sym, max_rank=k - 2)


def _suite_expand_compress(n_cases):
    rng = random.Random(0xACC2A)
    sym = Symbols.for_labels(["l%d" % i for i in range(5)])
    for case in range(n_cases):
        st = rand_structure_tree(rng, max_nodes=40)
        bt = binarize(st)
        base = flat(bt, sym)
        g = _compressor(bt, sym, case % 6)
        assert flat(expand(g), g.sym) == base
        bc = to_bcnf(g)
        assert flat(expand(bc), bc.sym) == base
        check_bcnf_bounds(g, bc)


def _rand_doc_index(rng, case):
    data = rand_document(rng)
    st, tc, labels = parse_document(data)
    names = list(labels.names)
    sym = Symbols.for_labels(names)
    g = _compressor(binarize(st), sym, case % 5)
    return build_index(to_bcnf(g)), st, tc, labels, names


def _suite_count(n_cases):
    rng = random.Random(0xACC2B)
    for case in range(n_cases):
        ix, st, tc, labels, names = _rand_doc_index(rng, case)
        query = rand_query(rng, names)
        dfa = check_query_bounds(query, ix.labels)
        want = len(naive_xpath_nodes(st, names, parse_xpath(query)))
        for jump in ("off", "relevant", "f"):
            for skip in (False, True):
                ev = CountEvaluator(ix, dfa, jump=jump, skip=skip)
                assert ev.count() == want, (query, jump, skip)
                check_behaviour_bound(ev, dfa, ix)


def _suite_serialize(n_cases):
    rng = random.Random(0xACC2C)
    for case in range(n_cases):
        ix, st, tc, labels, names = _rand_doc_index(rng, case)
        query = rand_query(rng, names)
        hits = sorted(naive_xpath_nodes(st, names, parse_xpath(query)))
        frags = []
        for v in hits:
            chunks = []
            emit_xml(st, tc, labels, chunks.append, root=v)
            frags.append("".join(chunks))
        got = []
        ev = PrintEvaluator(ix, compile_query(query, ix.labels))
        assert ev.serialize(tc, got.append) == len(hits)
        assert "".join(got) == "".join(frags)
        # each fragment of the output is well formed on its own
        for frag in frags:
            wrapped = ("<w>" + frag + "</w>").encode()
            st2, tc2, lab2 = parse_document(wrapped)
            assert document_to_string(st2, tc2, lab2) == wrapped.decode()
        pre = [sum(1 for w in range(v) if is_element_name(names[st.label[w]]))
               for v in hits]
        assert ev.materialize() == pre
        assert len(hits) == count_query(ix, query)


def _check_navigation(ix, bc):
    """Exhaustive oracle check of every move from every node."""
    bt = expand(bc)
    n = bt.n_nodes()
    sz = [1] * n
    for v in reversed(range(n)):
        for c in (bt.left[v], bt.right[v]):
            if c >= 0:
                sz[v] += sz[c]
    lsz = [sz[bt.left[v]] if bt.left[v] >= 0 else 0 for v in range(n)]
    bparent = [-1] * n
    bslot = [0] * n
    for v in range(n):
        for slot, c in ((1, bt.left[v]), (2, bt.right[v])):
            if c >= 0:
                bparent[c] = v
                bslot[c] = slot

    nav = Navigator(ix)
    nids = []
    stack = [nav.find_root()]
    while stack:
        nid = stack.pop()
        if nid is None:
            continue
        nids.append(nid)
        stack.append(nav.next_sibling(nid))
        stack.append(nav.first_child(nid))
    assert len(nids) == n
    assert [nav.label(x) for x in nids] == bt.label

    for v in range(n):
        u = v
        while u >= 0 and bslot[u] == 2:
            u = bparent[u]
        dp = bparent[u] if u >= 0 else -1
        fc, ns = bt.left[v], bt.right[v]
        assert nav.first_child(nids[v]) == (nids[fc] if fc >= 0 else None)
        assert nav.next_sibling(nids[v]) == (nids[ns] if ns >= 0 else None)
        assert nav.parent(nids[v]) == (nids[dp] if dp >= 0 else None)

    # descendant and following jumps against next-occurrence tables
    for b in range(ix.n_labels):
        nxt = [n] * (n + 1)
        for v in reversed(range(n)):
            nxt[v] = v if bt.label[v] == b else nxt[v + 1]
        for v in range(n):
            stop = v + 1 + lsz[v]
            w = nxt[v + 1]
            assert nav.tagged_desc(nids[v], b) == (nids[w] if w < stop else None)
            w = nxt[stop] if stop <= n else n
            assert nav.tagged_foll(nids[v], b) == (nids[w] if w < n else None)
    return n


def _suite_navigation(n_cases):
    rng = random.Random(0xACC2D)
    checked = 0
    for case in range(n_cases):
        if case % 10 == 9:
            st = rand_structure_tree(rng, max_nodes=rng.randint(120, 200),
                                     n_labels=7)
            sym = Symbols.for_labels(DOCISH_LABELS)
        elif case % 10 == 8:
            st, tc, labels = parse_document(rand_document(rng))
            sym = Symbols.for_labels(list(labels.names))
        else:
            st = rand_structure_tree(rng, max_nodes=rng.randint(1, 60))
            sym = Symbols.for_labels(["l%d" % i for i in range(5)])
        assert len(st.label) <= 200
        bt = binarize(st)
        bc = to_bcnf(_compressor(bt, sym, case % 3))
        checked += _check_navigation(build_index(bc), bc)
    assert checked >= 10 * n_cases


def test_criterion_2_oracle_suites():
    suites = [
        ("expand after compress", _suite_expand_compress),
        ("count vs naive, all option combos", _suite_count),
        ("serialize and materialize vs naive", _suite_serialize),
        ("navigation vs exhaustive oracle", _suite_navigation),
    ]
    with _criterion(2, "oracle suites: 1000 randomized cases each, "
                       "under %.0fs per suite" % SUITE_BUDGET):
        for name, suite in suites:
            t0 = time.monotonic()
            suite(1000)
            dt = time.monotonic() - t0
            assert dt < SUITE_BUDGET, (name, dt)


# -------------------------------------------------------------- criterion 3

def test_criterion_3_structural_bounds():
    with _criterion(3, "structural bounds: two-node rules, rule count, "
                       "automaton states, one behaviour per state/rule pair"):
        rng = random.Random(0xACC3)
        for case in range(1000):
            ix, st, tc, labels, names = _rand_doc_index(rng, case)
            g = _compressor(binarize(st), Symbols.for_labels(names), case % 5)
            check_bcnf_bounds(g, to_bcnf(g))
            query = rand_query(rng, names)
            dfa = check_query_bounds(query, ix.labels)
            ev = CountEvaluator(ix, dfa, jump=("off", "relevant", "f")[case % 3])
            ev.count()
            check_behaviour_bound(ev, dfa, ix)


# -------------------------------------------------------------- criterion 4

def _index_for(data):
    st, tc, labels = parse_document(data)
    sym = Symbols.for_labels(list(labels.names))
    g = compress_repair(binarize(st), sym, max_rank=2)
    return build_index(to_bcnf(g)), st, tc, labels


def _check_rebuild(data):
    ix, st, tc, labels = _index_for(data)
    root_query = "/" + labels.names[st.label[0]]
    out = []
    assert serialize_query(ix, tc, root_query, out.append) == 1
    rebuilt = "".join(out)
    assert rebuilt == document_to_string(st, tc, labels)
    st2, tc2, labels2 = parse_document(rebuilt.encode())
    assert list(labels2.names) == list(labels.names)
    assert st2.label == st.label
    assert st2.first_child == st.first_child
    assert st2.next_sibling == st.next_sibling
    assert [tc2.get_text(i) for i in range(len(tc2))] == \
           [tc.get_text(i) for i in range(len(tc))]


def test_criterion_4_self_index_rebuild():
    with _criterion(4, "root query reproduces every corpus document"):
        _check_rebuild(DOC)
        rng = random.Random(0xACC4)
        for _ in range(60):
            _check_rebuild(rand_document(rng))
        for scale, seed in ((0.02, 0), (0.05, 1), (0.1, 2)):
            _check_rebuild(gen_xmark_like(scale=scale, seed=seed))
        for budget, tp, bias in ((200, 0.3, 0.0), (800, 0.5, 0.6),
                                 (2000, 0.2, 0.8)):
            spec = TreeGenSpec(seed=budget, node_budget=budget,
                               text_probability=tp, repetition_bias=bias)
            st, tc = gen_tree(spec)
            doc = document_to_string(st, tc, gen_label_table(spec.label_count))
            _check_rebuild(doc.encode())


# ---------------------------------------------------------- criteria 5 and 6

@pytest.fixture(scope="module")
def big_corpus(tmp_path_factory):
    data = gen_xmark_like(scale=12.0, seed=0)
    st, tc, labels = parse_document(data)
    sym = Symbols.for_labels(list(labels.names))
    bt = binarize(st)
    rep = to_bcnf(compress_repair(bt, sym, max_rank=2))
    dag = build_dag(bt, sym)
    ix = build_index(rep)
    path = tmp_path_factory.mktemp("acc") / "big.tt"
    save_index(ix, str(path))
    return {
        "data": data,
        "nodes": len(st.label),
        "repair_rules": len(rep.rules),
        "dag_rules": len(dag.rules),
        "dag_bcnf_rules": len(to_bcnf(dag).rules),
        "depth": stats(rep).depth,
        "index_bytes": os.path.getsize(path),
        "structure_xml_bytes": len(document_to_string(
            st, TextCollection([""] * len(tc)), labels)),
        "ix": ix,
    }


def test_criterion_5_compression_sanity(big_corpus):
    with _criterion(5, "10MB corpus: repair rules < dag rules < node count, "
                       "index under 15% of structure XML"):
        assert 8_000_000 <= len(big_corpus["data"]) <= 13_000_000
        assert (big_corpus["repair_rules"] < big_corpus["dag_rules"]
                < big_corpus["nodes"])
        assert big_corpus["repair_rules"] < big_corpus["dag_bcnf_rules"]
        assert (big_corpus["index_bytes"]
                < 0.15 * big_corpus["structure_xml_bytes"])


def test_criterion_6_performance_smoke(big_corpus):
    with _criterion(6, "jumping never adds transitions; top-level path "
                       "query touches O(depth) rules"):
        ix = big_corpus["ix"]
        for name, query in BENCHMARK_QUERIES.items():
            dfa = compile_query(query, ix.labels)
            fast = CountEvaluator(ix, dfa, jump="f")
            base = CountEvaluator(ix, dfa, jump="off")
            assert fast.count() == base.count() > 0, name
            assert fast.stats.transitions <= base.stats.transitions, name

        dfa = compile_query(BENCHMARK_QUERIES["Q01"], ix.labels)
        ev = CountEvaluator(ix, dfa, jump="f")
        assert ev.count() == 1
        touched = ev.stats.transitions + ev.stats.behaviours
        assert touched <= 2 * big_corpus["depth"] + 8
