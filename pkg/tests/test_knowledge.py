import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from numpy.testing import assert_allclose

from kinject.errors import SourceUnavailableError
from kinject.keyphrase import KeyPhrase
from kinject.knowledge import (
    NONPARAMETRIC,
    PARAMETRIC,
    PROMPTS,
    KnowledgeSnippet,
    LocalGenerator,
    RemoteGenerator,
    build_prompts,
    encode_snippet,
    filter_snippets,
    nonparametric_snippets,
    parametric_snippets,
    truncate_text,
)
from kinject.lm import init_params, log_prob
from kinject.tfidf import Document, ingest
from kinject.vocab import EOS, KNOWLEDGE_SEP, RESERVED, Vocab

WORDS = ["cafe", "cheap", "food", "good", "great", "is", "place", "the"]


def vocab():
    return Vocab(RESERVED + WORDS)


def params():
    return init_params(len(RESERVED) + len(WORDS), dim=4, seed=0, scale=0.4)


class ScriptedGenerator:
    """Returns canned completions and records every call."""

    def __init__(self, completions):
        self.completions = completions
        self.calls = []

    def complete(self, prompt, n, seed):
        self.calls.append((prompt, n, seed))
        return list(self.completions)


class TestPromptTemplates:
    def test_nine_templates(self):
        assert len(PROMPTS) == 9
        assert len(set(PROMPTS)) == 9

    def test_build_prompts_substitutes_phrase(self):
        prompts = build_prompts(KeyPhrase(text="cheap cafe", score=0.1))
        assert len(prompts) == 9
        assert all("cheap cafe" in p for p in prompts)
        assert "{kp}" not in "".join(prompts)


class TestSnippetEncoding:
    def test_knowledge_block_framing(self):
        v = vocab()
        ids = encode_snippet(v, "good food")
        assert ids[0] == KNOWLEDGE_SEP
        assert ids[-1] == EOS
        assert ids[1:-1] == v.encode("good food")


class TestTruncate:
    def test_short_text_unchanged(self):
        assert truncate_text("short bit of text", limit=10) == \
            "short bit of text"

    def test_cuts_at_sentence_boundary(self):
        text = "one two three. four five six. seven eight nine."
        assert truncate_text(text, limit=7) == "one two three. four five six."

    def test_single_long_sentence_hard_cuts(self):
        text = "a b c d e f g h"
        assert truncate_text(text, limit=3) == "a b c"


class TestParametricSnippets:
    def test_snippets_scored_by_likelihood_after_history(self):
        v, p = vocab(), params()
        gen = ScriptedGenerator(["good food"])
        phrases = [KeyPhrase(text="the cafe", score=0.1)]
        hist = v.encode("cheap food place")
        snippets, missing = parametric_snippets(p, v, phrases, hist, 1, 0, gen)
        assert not missing
        assert len(snippets) == 9  # one survivor per prompt template
        for s in snippets:
            assert s.source == PARAMETRIC
            want = log_prob(p, encode_snippet(v, s.text), hist)
            assert_allclose(s.raw_score, want, rtol=0, atol=0)

    def test_sorted_best_first(self):
        v, p = vocab(), params()
        gen = ScriptedGenerator(["good food", "great place"])
        snippets, _ = parametric_snippets(
            p, v, [KeyPhrase(text="cafe", score=0.1)], v.encode("food"), 2, 0, gen)
        scores = [s.raw_score for s in snippets]
        assert scores == sorted(scores, reverse=True)

    def test_duplicate_texts_kept_once(self):
        v, p = vocab(), params()
        gen = ScriptedGenerator(["good food", "good food"])
        snippets, _ = parametric_snippets(
            p, v, [KeyPhrase(text="cafe", score=0.1)], v.encode("food"), 2, 0, gen)
        texts = [s.text for s in snippets]
        assert len(texts) == len(set(texts))

    def test_no_phrases_flags_empty_pool(self):
        snippets, missing = parametric_snippets(
            params(), vocab(), [], [7], 1, 0, ScriptedGenerator([]))
        assert snippets == [] and missing

    def test_distinct_seeds_per_prompt_slot(self):
        v, p = vocab(), params()
        gen = ScriptedGenerator(["good food"])
        parametric_snippets(p, v, [KeyPhrase(text="cafe", score=0.1),
                                   KeyPhrase(text="food", score=0.2)],
                            v.encode("food"), 1, 7, gen)
        seeds = [seed for _, _, seed in gen.calls]
        assert len(seeds) == 18
        assert len(set(seeds)) == 18

    def test_per_phrase_must_be_positive(self):
        with pytest.raises(ValueError):
            parametric_snippets(params(), vocab(), [], [7], 0, 0,
                                ScriptedGenerator([]))

    def test_local_generator_produces_decodable_text(self):
        v, p = vocab(), params()
        gen = LocalGenerator(p, v, top_p=0.9, max_len=8)
        outs = gen.complete("the cafe is", n=3, seed=5)
        assert len(outs) == 3
        assert outs == gen.complete("the cafe is", n=3, seed=5)


class TestNonparametricSnippets:
    def index(self):
        return ingest([
            Document("r1", "the cafe is cheap"),
            Document("r2", "great food place"),
            Document("r3", "good food here"),
        ])

    def test_query_concatenates_history_and_draft(self):
        snippets = nonparametric_snippets(
            self.index(), "the cafe", "good food", top_n=3)
        assert all(s.source == NONPARAMETRIC for s in snippets)
        ids = {s.origin for s in snippets}
        assert "r1" in ids and "r3" in ids

    def test_scores_are_cosines_descending(self):
        snippets = nonparametric_snippets(
            self.index(), "great food place", "", top_n=3)
        assert snippets[0].origin == "r2"
        assert_allclose(snippets[0].raw_score, 1.0, rtol=0, atol=1e-9)
        scores = [s.raw_score for s in snippets]
        assert scores == sorted(scores, reverse=True)


class TestFilterSnippets:
    def snip(self, text):
        return KnowledgeSnippet(text=text, source=NONPARAMETRIC,
                                origin="x", raw_score=0.0)

    def test_blocklisted_token_drops_snippet(self):
        kept, dropped = filter_snippets(
            [self.snip("a nice place"), self.snip("an awful place")],
            frozenset({"awful"}))
        assert [s.text for s in kept] == ["a nice place"]
        assert dropped == 1

    def test_matching_is_token_level(self):
        kept, dropped = filter_snippets(
            [self.snip("scrawful is not a word")], frozenset({"awful"}))
        assert dropped == 0

    def test_empty_blocklist_keeps_everything(self):
        snippets = [self.snip("anything")]
        kept, dropped = filter_snippets(snippets, frozenset())
        assert kept == snippets and dropped == 0


class _Handler(BaseHTTPRequestHandler):
    behavior = "ok"

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        if self.behavior == "ok":
            reply = {"completions": [f"echo {body['prompt']}"] * body["n"]}
            data = json.dumps(reply).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(data)
        elif self.behavior == "malformed":
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b'{"completions": "oops"}')
        else:
            self.send_response(500)
            self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture
def http_service():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", _Handler
    server.shutdown()
    thread.join()


class TestRemoteGenerator:
    def test_round_trip(self, http_service):
        url, handler = http_service
        handler.behavior = "ok"
        gen = RemoteGenerator(url)
        outs = gen.complete("the cafe", n=2, seed=0)
        assert outs == ["echo the cafe", "echo the cafe"]

    def test_http_error_maps_to_source_unavailable(self, http_service):
        url, handler = http_service
        handler.behavior = "error"
        with pytest.raises(SourceUnavailableError):
            RemoteGenerator(url).complete("x", n=1, seed=0)

    def test_malformed_body_maps_to_source_unavailable(self, http_service):
        url, handler = http_service
        handler.behavior = "malformed"
        with pytest.raises(SourceUnavailableError):
            RemoteGenerator(url).complete("x", n=1, seed=0)

    def test_unreachable_host_maps_to_source_unavailable(self):
        gen = RemoteGenerator("http://127.0.0.1:9", timeout=0.2)
        with pytest.raises(SourceUnavailableError):
            gen.complete("x", n=1, seed=0)
