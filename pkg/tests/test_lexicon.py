import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from verbadapt.lexicon import (
    ConstraintSet,
    LexiconError,
    LexiconParseError,
    VerbLexicon,
    VerbPair,
    generate_positive_pairs,
    lexicon_stats,
    load_lexicon,
    normalize_lemma,
)


class TestVerbPair:
    def test_canonical_sorts_members(self):
        assert VerbPair("walk", "amble").canonical() == VerbPair("amble", "walk")

    def test_canonical_is_idempotent(self):
        p = VerbPair("amble", "walk")
        assert p.canonical() is p

    def test_degenerate_pair_rejected(self):
        with pytest.raises(ValueError):
            VerbPair("walk", "walk")

    def test_key_is_order_free(self):
        assert VerbPair("b", "a").key == VerbPair("a", "b").key == ("a", "b")


class TestNormalizeLemma:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("run.v", "run"),
            ("Run.V", "run"),
            ("strike.n", "strike"),
            ("run_02", "run"),
            ("break_down", "break_down"),
            ("break_down.v", "break_down"),
            ("  walk  ", "walk"),
            ("free", "free"),
        ],
    )
    def test_cases(self, raw, expected):
        assert normalize_lemma(raw) == expected


class TestGenericClassMap:
    def test_parse(self, tmp_path):
        f = tmp_path / "lex.txt"
        f.write_text("# comment\nc1: walk amble stroll\nc2: walk run\n")
        lex = load_lexicon(f, format="generic-class-map")
        assert lex.entries["walk"] == {"c1", "c2"}
        assert lex.classes()["c1"] == {"walk", "amble", "stroll"}

    def test_missing_separator_is_parse_error(self, tmp_path):
        f = tmp_path / "lex.txt"
        f.write_text("c1 walk amble\n")
        with pytest.raises(LexiconParseError):
            load_lexicon(f, format="generic-class-map")

    def test_empty_class_dropped_with_warning(self, tmp_path, caplog):
        f = tmp_path / "lex.txt"
        f.write_text("c1:\nc2: walk run\n")
        lex = load_lexicon(f, format="generic-class-map")
        assert "c1" not in lex.classes()
        assert any("no members" in r.message for r in caplog.records)

    def test_empty_file_is_error(self, tmp_path):
        f = tmp_path / "lex.txt"
        f.write_text("# nothing here\n")
        with pytest.raises(LexiconError):
            load_lexicon(f, format="generic-class-map")

    def test_missing_path_is_error(self, tmp_path):
        with pytest.raises(LexiconError):
            load_lexicon(tmp_path / "nope.txt", format="generic-class-map")

    def test_unknown_format_is_error(self, tmp_path):
        f = tmp_path / "lex.txt"
        f.write_text("c1: a b\n")
        with pytest.raises(LexiconError):
            load_lexicon(f, format="tsv")


VN_XML = """<VNCLASS ID="free-80">
  <MEMBERS><MEMBER name="free"/><MEMBER name="liberate"/></MEMBERS>
  <SUBCLASSES>
    <VNSUBCLASS ID="free-80-1">
      <MEMBERS><MEMBER name="release"/></MEMBERS>
    </VNSUBCLASS>
  </SUBCLASSES>
</VNCLASS>
"""

FN_XML = """<luIndex>
  <lu name="run.v" frameName="Self_motion"/>
  <lu name="strike.n" frameName="Attack"/>
  <lu name="walk.v" frameName="Self_motion"/>
</luIndex>
"""


class TestXmlFormats:
    def test_verbnet_subclasses_flattened(self, tmp_path):
        f = tmp_path / "free-80.xml"
        f.write_text(VN_XML)
        lex = load_lexicon(f, format="verbnet-xml")
        assert lex.classes() == {"free-80": {"free", "liberate", "release"}}

    def test_verbnet_directory_of_files(self, tmp_path):
        (tmp_path / "a.xml").write_text(VN_XML)
        (tmp_path / "b.xml").write_text('<VNCLASS ID="run-51"><MEMBERS><MEMBER name="jog"/><MEMBER name="run"/></MEMBERS></VNCLASS>')
        lex = load_lexicon(tmp_path, format="verbnet-xml")
        assert set(lex.classes()) == {"free-80", "run-51"}

    def test_verbnet_malformed_xml(self, tmp_path):
        f = tmp_path / "bad.xml"
        f.write_text("<VNCLASS")
        with pytest.raises(LexiconParseError):
            load_lexicon(f, format="verbnet-xml")

    def test_verbnet_member_without_name(self, tmp_path):
        f = tmp_path / "bad.xml"
        f.write_text('<VNCLASS ID="x-1"><MEMBERS><MEMBER/></MEMBERS></VNCLASS>')
        with pytest.raises(LexiconParseError):
            load_lexicon(f, format="verbnet-xml")

    def test_framenet_keeps_only_verbs(self, tmp_path):
        f = tmp_path / "lu.xml"
        f.write_text(FN_XML)
        lex = load_lexicon(f, format="framenet-lu")
        assert set(lex.entries) == {"run", "walk"}
        assert lex.entries["run"] == {"Self_motion"}


class TestPairGeneration:
    def test_hand_computed_overlap_dedup(self):
        # c1 = {a,b,c} -> ab ac bc ; c2 = {b,c,d} -> bc bd cd ; union has 5 pairs
        lex = VerbLexicon(entries={"a": {"c1"}, "b": {"c1", "c2"}, "c": {"c1", "c2"}, "d": {"c2"}})
        pairs = generate_positive_pairs(lex)
        assert {p.key for p in pairs.pairs} == {
            ("a", "b"), ("a", "c"), ("b", "c"), ("b", "d"), ("c", "d")}

    def test_empty_lexicon_is_error(self):
        with pytest.raises(LexiconError):
            generate_positive_pairs(VerbLexicon(entries={}))

    def test_stats_forecast_matches_generation(self, small_lexicon):
        stats = lexicon_stats(small_lexicon)
        assert stats.pair_forecast == len(generate_positive_pairs(small_lexicon))
        assert stats.class_count == 4
        assert stats.lemma_count == 16
        assert stats.member_histogram == {4: 4}

    @given(sizes=st.lists(st.integers(min_value=1, max_value=8), min_size=1, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_disjoint_pair_count_identity(self, sizes):
        entries = {}
        n = 0
        for c, size in enumerate(sizes):
            for i in range(size):
                entries[f"v{n + i:03d}"] = {f"c{c}"}
            n += size
        lex = VerbLexicon(entries=entries)
        expected = sum(s * (s - 1) // 2 for s in sizes)
        if expected == 0:
            return  # only singleton classes: nothing to pair
        assert len(generate_positive_pairs(lex)) == expected

    @given(assignment=st.lists(st.tuples(st.integers(0, 9), st.integers(0, 3)),
                               min_size=2, max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_closure_members_share_a_class(self, assignment):
        entries = {}
        for verb_id, class_id in assignment:
            entries.setdefault(f"v{verb_id}", set()).add(f"c{class_id}")
        lex = VerbLexicon(entries=entries)
        classes = lex.classes()
        if all(len(m) < 2 for m in classes.values()):
            return
        for p in generate_positive_pairs(lex).pairs:
            assert entries[p.first] & entries[p.second]

    def test_determinism(self, tmp_path):
        f = tmp_path / "lex.txt"
        f.write_text("c1: walk amble stroll\nc2: run jog\n")
        a = generate_positive_pairs(load_lexicon(f, format="generic-class-map"))
        b = generate_positive_pairs(load_lexicon(f, format="generic-class-map"))
        assert a.pairs == b.pairs


class TestConstraintSet:
    def test_canonicalizes_on_build(self):
        cs = ConstraintSet({VerbPair("b", "a")})
        assert VerbPair("a", "b") in cs.pairs

    def test_contains_accepts_tuples_and_pairs(self):
        cs = ConstraintSet({VerbPair("a", "b")})
        assert ("b", "a") in cs
        assert VerbPair("b", "a") in cs
        assert ("a", "a") not in cs
        assert ("a", "c") not in cs

    def test_tsv_round_trip(self, tmp_path, small_constraints):
        f = tmp_path / "pairs.tsv"
        small_constraints.save_tsv(f)
        loaded = ConstraintSet.load_tsv(f)
        assert loaded.pairs == small_constraints.pairs

    def test_tsv_bad_columns(self, tmp_path):
        f = tmp_path / "pairs.tsv"
        f.write_text("a\tb\tc\n")
        with pytest.raises(LexiconParseError):
            ConstraintSet.load_tsv(f)

    def test_lemmas(self):
        cs = ConstraintSet({VerbPair("a", "b"), VerbPair("b", "c")})
        assert cs.lemmas() == {"a", "b", "c"}
