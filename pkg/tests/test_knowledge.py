"""Retrieval: chunk arithmetic, scoring against a naive oracle, determinism."""

import json
import math
import re
from collections import Counter
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soilcopilot.errors import DataError
from soilcopilot.knowledge import (
    TOPICS,
    ArticleDoc,
    chunk_document,
    index_corpus,
    load_corpus,
    scoring_terms,
)

CORPUS_DIR = Path(__file__).resolve().parent.parent / "corpus"


def doc(doc_id, body, topic="Drought", title=None, citation=None):
    return ArticleDoc(
        doc_id=doc_id,
        title=title or f"Article {doc_id}",
        topic=topic,
        citation=citation or f"Cite {doc_id} (2024).",
        body=body,
    )


def words(n, base="tok"):
    return " ".join(f"{base}{i}" for i in range(n))


# -- independent scoring oracle ----------------------------------------------

K1, B = 1.5, 0.75


def naive_ranking(docs, query, budget, overlap, topic=None):
    """Straight-line reimplementation of chunking + scoring for comparison."""
    chunks = []
    for d in sorted(docs, key=lambda d: d.doc_id):
        spans = [m.span() for m in re.finditer(r"\S+", d.body)]
        start, idx = 0, 0
        while start < len(spans):
            stop = min(start + budget, len(spans))
            chunks.append((d, idx, d.body[spans[start][0]:spans[stop - 1][1]]))
            idx += 1
            start += budget - overlap
    counts = [Counter(re.findall(r"[a-z0-9]+", text.lower()))
              for _, _, text in chunks]
    lengths = [sum(c.values()) for c in counts]
    avg = sum(lengths) / len(lengths)
    n = len(chunks)
    ranked = []
    for cid, (d, idx, _) in enumerate(chunks):
        if topic is not None and d.topic != topic:
            continue
        score = 0.0
        matched = False
        for term in sorted(set(re.findall(r"[a-z0-9]+", query.lower()))):
            tf = counts[cid][term]
            if tf == 0:
                continue
            matched = True
            df = sum(1 for c in counts if term in c)
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            score += idf * tf * (K1 + 1.0) / (
                tf + K1 * (1.0 - B + B * lengths[cid] / avg))
        if matched:
            ranked.append((d.doc_id, idx, score))
    ranked.sort(key=lambda r: (-r[2], r[0], r[1]))
    return ranked


class TestChunking:
    def test_short_doc_single_chunk(self):
        chunks = chunk_document(doc("a", words(10)), 100, 20)
        assert len(chunks) == 1
        assert chunks[0].token_count == 10
        assert chunks[0].chunk_index == 0

    def test_stride_arithmetic(self):
        # 250 tokens, budget 100, overlap 20 -> starts at 0, 80, 160, 240.
        chunks = chunk_document(doc("a", words(250)), 100, 20)
        assert len(chunks) == 4
        assert [c.token_count for c in chunks] == [100, 100, 90, 10]
        assert chunks[2].text.startswith("tok160")
        assert chunks[3].text == "tok240 tok241 tok242 tok243 tok244 " \
                                 "tok245 tok246 tok247 tok248 tok249"

    def test_zero_overlap(self):
        chunks = chunk_document(doc("a", words(10)), 4, 0)
        assert [c.token_count for c in chunks] == [4, 4, 2]

    def test_empty_body(self):
        assert chunk_document(doc("a", "   "), 100, 20) == []

    def test_verbatim_substring_with_odd_whitespace(self):
        body = "alpha\t beta\n\n  gamma delta   epsilon zeta"
        for chunk in chunk_document(doc("a", body), 3, 1):
            assert chunk.text in body

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.sampled_from(["soil", "carbon", "fire", "x1"]),
                    min_size=1, max_size=50),
           st.integers(min_value=2, max_value=12),
           st.integers(min_value=0, max_value=1))
    def test_chunks_are_verbatim_and_cover(self, body_words, budget, overlap):
        body = "  ".join(body_words)
        d = doc("a", body)
        chunks = chunk_document(d, budget, overlap)
        for c in chunks:
            assert c.text in body
            assert c.token_count <= budget
        # Union of chunk token spans covers every token: the final chunk must
        # reach the last token.
        assert chunks[-1].text.endswith(body_words[-1])
        total = sum(len(c.text.split()) for c in chunks)
        assert total >= len(body_words)


class TestIndexBuild:
    def test_empty_corpus(self):
        with pytest.raises(DataError, match="empty corpus"):
            index_corpus([])

    def test_all_bodies_empty(self):
        with pytest.raises(DataError, match="bodies are empty"):
            index_corpus([doc("a", " ")])

    def test_budget_must_exceed_overlap(self):
        with pytest.raises(ValueError, match="exceed"):
            index_corpus([doc("a", words(5))], chunk_tokens=50,
                         overlap_tokens=50)

    def test_negative_overlap(self):
        with pytest.raises(ValueError, match=">= 0"):
            index_corpus([doc("a", words(5))], chunk_tokens=50,
                         overlap_tokens=-1)

    def test_duplicate_doc_id(self):
        with pytest.raises(DataError, match="duplicate"):
            index_corpus([doc("a", words(5)), doc("a", words(6))])

    def test_invalid_topic_rejected_at_doc(self):
        with pytest.raises(DataError, match="topic"):
            doc("a", "text", topic="Volcano")

    def test_reindex_identical(self):
        docs = [doc("a", words(40)), doc("b", words(25), topic="Crop")]
        i1 = index_corpus(docs, 10, 2)
        i2 = index_corpus(docs, 10, 2)
        assert i1.chunks == i2.chunks
        assert i1.postings == i2.postings

    def test_empty_doc_contributes_no_chunks(self):
        index = index_corpus([doc("a", ""), doc("b", words(5))], 10, 2)
        assert {c.doc_id for c in index.chunks} == {"b"}


class TestScoring:
    def test_exact_two_doc_scores(self):
        docs = [doc("d1", "red soil"), doc("d2", "red red carbon")]
        index = index_corpus(docs, chunk_tokens=100, overlap_tokens=10)
        hits = index.support_arguments("red", k=5)
        assert [h.doc_id for h in hits] == ["d2", "d1"]
        idf = math.log(1.2)  # N=2, df=2
        avg = 2.5
        d1 = idf * 1 * 2.5 / (1 + K1 * (1 - B + B * 2 / avg))
        d2 = idf * 2 * 2.5 / (2 + K1 * (1 - B + B * 3 / avg))
        assert hits[0].score == pytest.approx(d2, abs=1e-12)
        assert hits[1].score == pytest.approx(d1, abs=1e-12)

    def test_rare_term_outweighs_common(self):
        docs = [doc(f"common{i}", "soil water soil water") for i in range(6)]
        docs.append(doc("rare", "soil obsidian"))
        index = index_corpus(docs)
        hits = index.support_arguments("obsidian", k=3)
        assert [h.doc_id for h in hits] == ["rare"]

    def test_score_additive_over_terms(self):
        docs = [doc("a", "drought fire soil"), doc("b", "drought drought x")]
        index = index_corpus(docs)
        both = {h.doc_id: h.score
                for h in index.support_arguments("drought fire", k=5)}
        d_only = {h.doc_id: h.score
                  for h in index.support_arguments("drought", k=5)}
        f_only = {h.doc_id: h.score
                  for h in index.support_arguments("fire", k=5)}
        assert both["a"] == pytest.approx(d_only["a"] + f_only["a"], abs=1e-12)
        assert both["b"] == pytest.approx(d_only["b"], abs=1e-12)

    def test_duplicate_query_terms_collapse(self):
        docs = [doc("a", "drought soil"), doc("b", "soil fire")]
        index = index_corpus(docs)
        once = [(h.doc_id, h.score) for h in index.support_arguments("drought")]
        thrice = [(h.doc_id, h.score)
                  for h in index.support_arguments("drought DROUGHT drought!")]
        assert once == thrice

    def test_tie_break_doc_then_chunk(self):
        body = words(30, "same") + " drought " + words(30, "same")
        docs = [doc("beta", body), doc("alpha", body)]
        index = index_corpus(docs, chunk_tokens=200, overlap_tokens=0)
        hits = index.support_arguments("drought same0", k=10)
        assert [h.doc_id for h in hits] == ["alpha", "beta"]
        assert hits[0].score == hits[1].score

    def test_tie_break_within_doc(self):
        # Two chunks of one doc with identical term statistics.
        body = "drought " + words(4, "pad") + " drought " + words(4, "pad")
        index = index_corpus([doc("a", body)], chunk_tokens=6,
                             overlap_tokens=1)
        hits = index.support_arguments("drought", k=10)
        chunk_order = [h.chunk.chunk_index for h in hits]
        assert chunk_order == sorted(chunk_order)

    def test_no_match_empty(self):
        index = index_corpus([doc("a", "soil water")])
        assert index.support_arguments("zirconium") == []

    def test_k_limits(self):
        docs = [doc(f"d{i}", "soil carbon") for i in range(5)]
        index = index_corpus(docs)
        assert len(index.support_arguments("soil", k=2)) == 2
        with pytest.raises(ValueError, match="k must be"):
            index.support_arguments("soil", k=0)

    def test_empty_query(self):
        index = index_corpus([doc("a", "soil")])
        with pytest.raises(DataError, match="no searchable terms"):
            index.support_arguments("  !!! ")

    @settings(max_examples=80, deadline=None)
    @given(st.data())
    def test_matches_naive_oracle(self, data):
        vocab = ["soil", "carbon", "fire", "drought", "crop", "melt", "ash"]
        n_docs = data.draw(st.integers(min_value=1, max_value=4))
        docs = []
        for i in range(n_docs):
            body_words = data.draw(st.lists(st.sampled_from(vocab),
                                            min_size=1, max_size=30))
            topic = data.draw(st.sampled_from(TOPICS))
            docs.append(doc(f"d{i}", " ".join(body_words), topic=topic))
        budget = data.draw(st.integers(min_value=2, max_value=10))
        overlap = data.draw(st.integers(min_value=0, max_value=budget - 1))
        query = " ".join(data.draw(st.lists(st.sampled_from(vocab),
                                            min_size=1, max_size=3)))
        topic = data.draw(st.sampled_from((None,) + TOPICS))

        index = index_corpus(docs, chunk_tokens=budget,
                             overlap_tokens=overlap)
        got = index.support_arguments(query, topic_filter=topic, k=10_000)
        expected = naive_ranking(docs, query, budget, overlap, topic=topic)
        assert [(h.doc_id, h.chunk.chunk_index) for h in got] == \
            [(d, i) for d, i, _ in expected]
        for hit, (_, _, score) in zip(got, expected):
            assert hit.score == pytest.approx(score, abs=1e-12)


class TestTopicFilter:
    @pytest.fixture()
    def index(self):
        return index_corpus([
            doc("d0", "soil drought moisture", topic="Drought"),
            doc("d1", "soil fire ash", topic="Wildfire"),
            doc("d2", "soil crop rotation", topic="Crop"),
        ])

    def test_filter_restricts_topic(self, index):
        hits = index.support_arguments("soil", topic_filter="Wildfire", k=10)
        assert [h.doc_id for h in hits] == ["d1"]
        assert all(h.topic == "Wildfire" for h in hits)

    def test_filter_case_insensitive(self, index):
        hits = index.support_arguments("soil", topic_filter="wildfire", k=10)
        assert [h.doc_id for h in hits] == ["d1"]

    def test_unmatched_topic_is_empty_not_error(self, index):
        hits = index.support_arguments("ash", topic_filter="Crop", k=10)
        assert hits == []

    def test_unknown_topic_rejected(self, index):
        with pytest.raises(DataError, match="unknown topic"):
            index.support_arguments("soil", topic_filter="Volcano")


@pytest.fixture(scope="module")
def shipped_index():
    return index_corpus(load_corpus(CORPUS_DIR))


class TestShippedCorpus:
    def test_loads_sorted_with_valid_topics(self):
        docs = load_corpus(CORPUS_DIR)
        assert len(docs) == 9
        assert [d.doc_id for d in docs] == sorted(d.doc_id for d in docs)
        assert {d.topic for d in docs} == set(TOPICS)
        assert all(d.citation for d in docs)

    def test_two_docs_per_topic_at_least(self):
        by_topic = Counter(d.topic for d in load_corpus(CORPUS_DIR))
        assert all(by_topic[t] >= 2 for t in TOPICS)

    def test_drought_query_hits_drought_doc(self, shipped_index):
        hits = shipped_index.support_arguments("drought microbial",
                                       topic_filter="Drought", k=3)
        assert hits
        assert all(h.topic == "Drought" for h in hits)
        assert all(h.citation for h in hits)
        assert hits[0].chunk.text in \
            shipped_index.doc_meta[hits[0].doc_id].body

    def test_identical_query_identical_ranking(self, shipped_index):
        a = [(h.doc_id, h.chunk.chunk_index, h.score)
             for h in shipped_index.support_arguments("wildfire soil carbon", k=6)]
        b = [(h.doc_id, h.chunk.chunk_index, h.score)
             for h in shipped_index.support_arguments("wildfire soil carbon", k=6)]
        assert a == b

    def test_hit_payload_shape(self, shipped_index):
        hit = shipped_index.support_arguments("no-till carbon",
                                      topic_filter="Practices", k=1)[0]
        payload = hit.to_dict()
        assert set(payload) == {"doc_id", "chunk_index", "title", "topic",
                                "citation", "score", "text"}


class TestLoadCorpusErrors:
    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_corpus(tmp_path / "nope")

    def test_empty_directory(self, tmp_path):
        with pytest.raises(DataError, match="no .json docs"):
            load_corpus(tmp_path)

    def test_missing_keys(self, tmp_path):
        (tmp_path / "bad.json").write_text(json.dumps({"title": "x"}))
        with pytest.raises(DataError, match="missing keys"):
            load_corpus(tmp_path)

    def test_unparsable_json(self, tmp_path):
        (tmp_path / "bad.json").write_text("{nope")
        with pytest.raises(DataError, match="unparsable"):
            load_corpus(tmp_path)

    def test_scoring_terms_helper(self):
        assert scoring_terms("No-Till, SOIL!") == ["no", "till", "soil"]
