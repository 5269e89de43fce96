"""End-to-end CLI coverage on the worked mini-document and generated corpora."""

import json
import os

import pytest

from sltindex.cli import main
from sltindex.grammar import Symbols, binarize, compress_repair, stats, to_bcnf
from sltindex.index import load_index, save_index
from sltindex.xml_model import parse_document

MINI = (b'<g>This<f><f><a><b>is</b></a><c>a test</c></f>'
        b'<a><c>document</c></a><c>for the purpose</c></f>'
        b'<a><c>of explaining</c></a><c>serialization</c></g>')


@pytest.fixture(scope="module")
def mini(tmp_path_factory):
    d = tmp_path_factory.mktemp("mini")
    (d / "mini.xml").write_bytes(MINI)
    assert main(["build", str(d / "mini.xml"), "--out",
                 str(d / "mini.tt")]) == 0
    return d


def test_build_file_round_trip(mini, tmp_path):
    ix = load_index(str(mini / "mini.tt"))
    again = tmp_path / "again.tt"
    save_index(ix, str(again))
    assert again.read_bytes() == (mini / "mini.tt").read_bytes()


def test_count_all_option_combinations(mini, capsys):
    for jump in ("off", "relevant", "f"):
        for extra in ([], ["--no-skip"]):
            rc = main(["count", str(mini / "mini.tt"), "//c",
                       "--jump", jump] + extra)
            assert rc == 0
            assert capsys.readouterr().out == "5\n"


def test_serialize_goldens(mini, capsys):
    assert main(["serialize", str(mini / "mini.tt"),
                 str(mini / "mini.tt.texts"), "//b"]) == 0
    assert capsys.readouterr().out == "<b>is</b>"
    assert main(["serialize", str(mini / "mini.tt"),
                 str(mini / "mini.tt.texts"), "//c"]) == 0
    assert capsys.readouterr().out == (
        "<c>a test</c><c>document</c><c>for the purpose</c>"
        "<c>of explaining</c><c>serialization</c>")


def test_serialize_to_file(mini, tmp_path):
    out = tmp_path / "frag.xml"
    assert main(["serialize", str(mini / "mini.tt"),
                 str(mini / "mini.tt.texts"), "//b",
                 "--out", str(out)]) == 0
    assert out.read_bytes() == b"<b>is</b>"


def test_materialize(mini, capsys):
    assert main(["materialize", str(mini / "mini.tt"), "//c"]) == 0
    assert capsys.readouterr().out == "5\n7\n8\n10\n11\n"


def test_stats_matches_direct_grammar(mini, capsys):
    assert main(["stats", str(mini / "mini.tt"), "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    st, tc, labels = parse_document(MINI)
    sym = Symbols.for_labels(list(labels.names))
    b = to_bcnf(compress_repair(binarize(st), sym, max_rank=2))
    want = stats(b)
    assert doc["grammar"] == {
        "size": want.size, "num_rules": want.num_rules, "rank": want.rank,
        "depth": want.depth, "start_rhs_size": want.start_rhs_size}
    assert doc["elements"] == 12 and doc["texts"] == 7


def test_traverse_modes_agree(mini, capsys):
    out = {}
    for mode in ("dflr-rec", "dflr-it"):
        assert main(["traverse", str(mini / "mini.tt"),
                     "--mode", mode, "--json"]) == 0
        out[mode] = json.loads(capsys.readouterr().out)
    assert out["dflr-rec"]["checksum"] == out["dflr-it"]["checksum"]
    assert out["dflr-rec"]["nodes"] == out["dflr-it"]["nodes"] == 19


def test_gen_tree_deterministic(tmp_path):
    a, b = tmp_path / "a.xml", tmp_path / "b.xml"
    args = ["gen", "tree", "--budget", "80", "--text-prob", "0.3",
            "--seed", "5"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    parse_document(a.read_bytes())


def test_gen_build_query_pipeline(tmp_path, capsys):
    xml = tmp_path / "c.xml"
    assert main(["gen", "xmark", "--scale", "0.05", "--out", str(xml)]) == 0
    assert main(["build", str(xml)]) == 0
    idx = tmp_path / "c.tt"
    assert idx.exists() and (tmp_path / "c.tt.texts").exists()
    capsys.readouterr()
    assert main(["count", str(idx), "/site/regions"]) == 0
    assert capsys.readouterr().out == "1\n"


def test_max_rank_zero_gives_rank_zero(tmp_path, capsys):
    xml = tmp_path / "c.xml"
    main(["gen", "xmark", "--scale", "0.02", "--out", str(xml)])
    assert main(["build", str(xml), "--compressor", "repair",
                 "--max-rank", "0", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["grammar"]["rank"] == 0


def test_repair_rule_table_not_larger_than_dag(tmp_path, capsys):
    xml = tmp_path / "c.xml"
    main(["gen", "xmark", "--scale", "0.2", "--out", str(xml)])
    sizes = {}
    for comp in ("repair", "dag"):
        assert main(["build", str(xml), "--compressor", comp, "--out",
                     str(tmp_path / (comp + ".tt")), "--json"]) == 0
        sizes[comp] = json.loads(capsys.readouterr().out)["components"]["rules"]
    assert sizes["repair"] <= sizes["dag"]


def test_build_json_report(mini, tmp_path, capsys):
    assert main(["build", str(mini / "mini.xml"), "--out",
                 str(tmp_path / "m.tt"), "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc["phases"]) == {"parse", "compress", "bcnf", "index",
                                  "save"}
    assert doc["index_bytes"] == os.path.getsize(tmp_path / "m.tt")
    assert doc["nodes"] == 19


def test_exit_codes(tmp_path, capsys):
    assert main(["count"]) == 1
    assert main(["build", str(tmp_path / "absent.xml")]) == 2
    bad = tmp_path / "bad.xml"
    bad.write_bytes(b"<a><b></a>")
    assert main(["build", str(bad)]) == 2
    (tmp_path / "mini.xml").write_bytes(MINI)
    assert main(["build", str(tmp_path / "mini.xml")]) == 0
    idx = str(tmp_path / "mini.tt")
    assert main(["count", idx, "///"]) == 2
    assert main(["count", idx, "//c", "--jump", "sideways"]) == 1
    truncated = tmp_path / "trunc.tt"
    truncated.write_bytes((tmp_path / "mini.tt").read_bytes()[:40])
    assert main(["count", str(truncated), "//c"]) == 2
    capsys.readouterr()


def test_serialize_wrong_texts_is_input_error(tmp_path, capsys):
    (tmp_path / "mini.xml").write_bytes(MINI)
    assert main(["build", str(tmp_path / "mini.xml")]) == 0
    other = tmp_path / "other.xml"
    other.write_bytes(b"<r>one</r>")
    assert main(["build", str(other)]) == 0
    rc = main(["serialize", str(tmp_path / "mini.tt"),
               str(tmp_path / "other.tt.texts"), "//b"])
    assert rc == 2
    capsys.readouterr()
