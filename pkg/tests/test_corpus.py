"""Tokenization, vocabularies, encoding, dataset files and the generator."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rac import corpus
from rac.corpus import (
    PAD,
    UNK,
    CodeTitle,
    CodeTitleTable,
    CorpusError,
    Document,
    Vocabulary,
    build_title_matrix,
    encode_document,
    generate_synthetic,
    load_dataset,
    split_dataset,
    tokenize,
)


class TestTokenize:
    def test_empty(self):
        assert tokenize("") == []

    def test_lowercase_and_punctuation_split(self):
        assert tokenize("Chest X-ray: CLEAR.") == ["chest", "x", "ray", "clear"]

    def test_digit_only_tokens_dropped(self):
        assert tokenize("BP 120/80 stable") == ["bp", "stable"]

    def test_mixed_alphanumeric_kept(self):
        assert tokenize("x2 dose") == ["x2", "dose"]

    def test_idempotent_on_own_output(self):
        text = "Pt c/o SOB x3 days; EKG neg.\nPlan: repeat troponin 0.04"
        once = tokenize(text)
        assert tokenize(" ".join(once)) == once

    @given(st.text(max_size=200))
    @settings(max_examples=200, deadline=None)
    def test_idempotence_property(self, text):
        once = tokenize(text)
        assert tokenize(" ".join(once)) == once


def docs_from_texts(*texts):
    return [Document.make(f"d{i}", t, []) for i, t in enumerate(texts)]


class TestVocabulary:
    def test_min_count_boundary(self):
        docs = docs_from_texts(*(["fever"] * 10 + ["rare"] * 9))
        vocab = Vocabulary.build(docs, min_count=10)
        assert "fever" in vocab
        assert "rare" not in vocab

    def test_empty_corpus_has_only_specials(self):
        vocab = Vocabulary.build([], min_count=10)
        assert len(vocab) == 2
        assert vocab.index_to_token == [corpus.PAD_TOKEN, corpus.UNK_TOKEN]

    def test_ordering_frequency_then_token(self):
        docs = docs_from_texts("b b b a a c c", "a c")
        vocab = Vocabulary.build(docs, min_count=1)
        # counts: a=3, b=3, c=3 -> ties by token; then index 2.. follows
        assert vocab.index_to_token[2:] == ["a", "b", "c"]
        docs = docs_from_texts("z z z y x")
        vocab = Vocabulary.build(docs, min_count=1)
        assert vocab.index_to_token[2:] == ["z", "x", "y"]

    def test_permutation_invariance(self):
        docs = docs_from_texts("alpha beta", "beta gamma gamma", "alpha alpha")
        fwd = Vocabulary.build(docs, min_count=1)
        rev = Vocabulary.build(list(reversed(docs)), min_count=1)
        assert fwd.index_to_token == rev.index_to_token

    def test_encode_decode_round_trip(self):
        docs = docs_from_texts("one two three two")
        vocab = Vocabulary.build(docs, min_count=1)
        ids = vocab.encode(["two", "unknownword", "three"])
        assert ids[1] == UNK
        assert vocab.decode(ids) == ["two", "three"]

    def test_save_load(self, tmp_path):
        vocab = Vocabulary.build(docs_from_texts("a a b"), min_count=1)
        vocab.save(tmp_path / "vocab.json")
        loaded = Vocabulary.load(tmp_path / "vocab.json")
        assert loaded.index_to_token == vocab.index_to_token
        assert loaded.fingerprint() == vocab.fingerprint()


def toy_table():
    return CodeTitleTable([
        CodeTitle("427.81", "Sinoatrial node dysfunction", "Sinoatrial node dysfunc"),
        CodeTitle("008.45", "Intestinal infection due to Clostridium difficile", "Int inf clstrdium dfcile"),
        CodeTitle("C3", "", ""),
    ])


class TestEncoding:
    def test_padding_suffix(self):
        vocab = Vocabulary.build(docs_from_texts("aa bb"), min_count=1)
        doc = Document.make("x", "aa bb", [])
        ex = encode_document(doc, vocab, toy_table(), n_x=5)
        assert ex.token_ids.tolist()[2:] == [PAD, PAD, PAD]
        assert ex.token_ids[0] != PAD

    def test_truncation_keeps_prefix(self):
        words = " ".join(f"t{i}x" for i in range(60))
        vocab = Vocabulary.build(docs_from_texts(words), min_count=1)
        doc = Document.make("x", words, [])
        ex = encode_document(doc, vocab, toy_table(), n_x=16)
        assert len(ex.token_ids) == 16
        assert (ex.token_ids != PAD).all()

    def test_one_hot_label_placement(self):
        table = CodeTitleTable([CodeTitle(f"c{i}", f"title {i}", "") for i in range(5)])
        vocab = Vocabulary.build([], min_count=1)
        ex = encode_document(Document.make("x", "", ["c3"]), vocab, table, n_x=4)
        assert ex.label_vector.tolist() == [0, 0, 0, 1, 0]

    def test_unknown_code_rejected(self):
        vocab = Vocabulary.build([], min_count=1)
        with pytest.raises(CorpusError, match="999.999"):
            encode_document(Document.make("x", "", ["999.999"]), vocab, toy_table(), n_x=4)

    def test_decoded_prefix_matches_tokenize(self):
        text = "chest pain radiating to left arm"
        vocab = Vocabulary.build(docs_from_texts(text), min_count=1)
        ex = encode_document(Document.make("x", text, []), vocab, toy_table(), n_x=10)
        decoded = vocab.decode(ex.token_ids.tolist())
        assert decoded == tokenize(text)


class TestTitleMatrix:
    def test_shape_is_n_y_by_n_t(self):
        vocab = Vocabulary.build([], min_count=1)
        tm = build_title_matrix(toy_table(), vocab, n_t=36)
        assert tm.ids.shape == (3, 36)

    def test_known_title_row(self):
        table = toy_table()
        vocab = Vocabulary.build(
            docs_from_texts("sinoatrial node dysfunction sinoatrial node dysfunc"), min_count=1
        )
        tm = build_title_matrix(table, vocab, n_t=8)
        row = tm.ids[0]
        n_real = len(tokenize(table.concatenated_titles[0]))
        assert (row[:n_real] != PAD).all()
        assert (row[n_real:] == PAD).all()

    def test_empty_title_row_all_pad(self):
        vocab = Vocabulary.build([], min_count=1)
        tm = build_title_matrix(toy_table(), vocab, n_t=6)
        assert (tm.ids[2] == PAD).all()

    def test_identical_titles_identical_rows(self):
        table = CodeTitleTable([
            CodeTitle("a", "same title", "short"),
            CodeTitle("b", "same title", "short"),
        ])
        vocab = Vocabulary.build(docs_from_texts("same title short"), min_count=1)
        tm = build_title_matrix(table, vocab, n_t=6)
        assert np.array_equal(tm.ids[0], tm.ids[1])


class TestDatasetFiles:
    def _write(self, tmp_path, lines, codes="code\tlong_title\tshort_title\nc1\tfirst code\tfc\nc2\tsecond code\tsc\n"):
        notes = tmp_path / "notes.jsonl"
        notes.write_text("\n".join(lines) + "\n", encoding="utf-8")
        codes_path = tmp_path / "codes.tsv"
        codes_path.write_text(codes, encoding="utf-8")
        return notes, codes_path

    def test_load_round_trip(self, tmp_path):
        notes, codes = self._write(tmp_path, [
            json.dumps({"id": "a", "text": "note one", "codes": ["c1"]}),
            json.dumps({"id": "b", "text": "note two", "codes": []}),
        ])
        docs, table = load_dataset(notes, codes)
        assert [d.id for d in docs] == ["a", "b"]
        assert docs[0].codes == {"c1"}
        assert len(table) == 2

    def test_malformed_line_names_line_number(self, tmp_path):
        notes, codes = self._write(tmp_path, [
            json.dumps({"id": "a", "text": "x", "codes": []}),
            "{not json",
        ])
        with pytest.raises(CorpusError, match="2"):
            load_dataset(notes, codes)

    def test_unknown_code_names_code(self, tmp_path):
        notes, codes = self._write(tmp_path, [
            json.dumps({"id": "a", "text": "x", "codes": ["zz9"]}),
        ])
        with pytest.raises(CorpusError, match="zz9"):
            load_dataset(notes, codes)

    def test_duplicate_id_rejected(self, tmp_path):
        notes, codes = self._write(tmp_path, [
            json.dumps({"id": "a", "text": "x", "codes": []}),
            json.dumps({"id": "a", "text": "y", "codes": []}),
        ])
        with pytest.raises(CorpusError, match="duplicate"):
            load_dataset(notes, codes)

    def test_title_table_requires_header(self, tmp_path):
        notes, codes = self._write(tmp_path, [json.dumps({"id": "a", "text": "x", "codes": []})],
                                   codes="c1\tfirst\tf\n")
        with pytest.raises(CorpusError, match="header"):
            load_dataset(notes, codes)

    def test_split_sizes(self):
        docs = [Document.make(i, "t", []) for i in "abcd"]
        splits = split_dataset(docs, {"train": ["a", "b"], "val": ["c"], "test": ["d"]})
        assert [len(splits[k]) for k in ("train", "val", "test")] == [2, 1, 1]

    def test_overlapping_manifest_rejected(self):
        docs = [Document.make(i, "t", []) for i in "ab"]
        with pytest.raises(CorpusError, match="more than one split"):
            split_dataset(docs, {"train": ["a"], "val": ["a"], "test": ["b"]})

    def test_manifest_unknown_id_rejected(self):
        docs = [Document.make("a", "t", [])]
        with pytest.raises(CorpusError, match="zz"):
            split_dataset(docs, {"train": ["zz"], "val": [], "test": []})


class TestSynthetic:
    def test_deterministic_and_byte_identical(self, tmp_path):
        a = generate_synthetic(n_docs=12, n_codes=4, vocab_size=30, seed=9)
        b = generate_synthetic(n_docs=12, n_codes=4, vocab_size=30, seed=9)
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        corpus.save_documents(a.documents, pa)
        corpus.save_documents(b.documents, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_labeled_docs_contain_their_triggers(self):
        ds = generate_synthetic(n_docs=20, n_codes=5, vocab_size=30, seed=2)
        for doc in ds.documents:
            tokens = tokenize(doc.text)
            bigrams = set(zip(tokens, tokens[1:]))
            for code in doc.codes:
                assert ds.triggers[code] in bigrams

    def test_trigger_rule_scores_perfect_micro_f1(self):
        # the planted decision rule "code iff trigger bigram present" is exact
        from oracles import oracle_f1

        ds = generate_synthetic(n_docs=40, n_codes=8, vocab_size=40, seed=3)
        codes = ds.code_table.codes
        preds, labels = [], []
        for doc in ds.documents:
            tokens = tokenize(doc.text)
            bigrams = set(zip(tokens, tokens[1:]))
            preds.append([1 if ds.triggers[c] in bigrams else 0 for c in codes])
            labels.append([1 if c in doc.codes else 0 for c in codes])
        _, micro = oracle_f1(preds, labels)
        assert micro == 1.0

    def test_round_trips_through_files(self, tmp_path):
        ds = generate_synthetic(n_docs=10, n_codes=3, vocab_size=25, seed=4)
        notes, codes = tmp_path / "n.jsonl", tmp_path / "c.tsv"
        corpus.save_documents(ds.documents, notes)
        ds.code_table.to_tsv(codes)
        docs, table = load_dataset(notes, codes)
        assert [(d.id, d.text, d.codes) for d in docs] == \
               [(d.id, d.text, d.codes) for d in ds.documents]
        assert table.codes == ds.code_table.codes

    def test_vocab_too_small_rejected(self):
        with pytest.raises(CorpusError, match="too small"):
            generate_synthetic(n_docs=5, n_codes=10, vocab_size=12, seed=0)

    def test_split_manifest_partition(self):
        ds = generate_synthetic(n_docs=10, n_codes=3, vocab_size=25, seed=4)
        manifest = ds.split_manifest(6, 2, 2)
        all_ids = manifest["train"] + manifest["val"] + manifest["test"]
        assert len(all_ids) == len(set(all_ids)) == 10

    def test_label_skew_orders_frequencies(self):
        ds = generate_synthetic(n_docs=200, n_codes=10, vocab_size=40, seed=6,
                                min_labels=2, max_labels=4, label_skew=1.2)
        counts = np.zeros(10)
        for doc in ds.documents:
            for c in doc.codes:
                counts[ds.code_table.index_of(c)] += 1
        assert counts[0] > counts[-1] * 2
