"""Mask infilling: request contracts, baseline sampler, remote client, hybrid."""

import pytest

from humorkit.errors import DataError
from humorkit.infill import (
    BaselineInfiller,
    InfillRequest,
    InfillResult,
    RemoteInfiller,
    RemoteInfillError,
    build_pos_vocabulary,
    hybrid_generate,
    infill_baseline,
    infill_remote,
    template_request,
    validate_result,
)
from humorkit.template import MASK_PLACEHOLDER, WeightConfig, extract_template
from stub_server import StubMlmServer
from test_template import make_doc

M = MASK_PLACEHOLDER


def masked_request(**overrides):
    base = dict(
        tokens=("why", "did", "the", M, "cross", "the", "road", "?"),
        mask_positions=(3,),
        top_k=5,
        forbid=(frozenset({"chicken"}),),
        mask_pos_tags=("NOUN",),
    )
    base.update(overrides)
    return InfillRequest(**base)


@pytest.fixture(scope="module")
def pos_vocab(golden_docs):
    return build_pos_vocabulary(golden_docs)


class TestInfillRequest:
    def test_rejects_top_k_below_one(self):
        with pytest.raises(DataError):
            masked_request(top_k=0)

    def test_rejects_mask_position_mismatch(self):
        with pytest.raises(DataError):
            masked_request(mask_positions=(2,))

    def test_rejects_unlisted_sentinel(self):
        with pytest.raises(DataError):
            InfillRequest(tokens=(M, M), mask_positions=(0,), forbid=(frozenset(),))

    def test_rejects_forbid_length_mismatch(self):
        with pytest.raises(DataError):
            masked_request(forbid=())

    def test_rejects_tag_length_mismatch(self):
        with pytest.raises(DataError):
            masked_request(mask_pos_tags=("NOUN", "VERB"))


class TestValidateResult:
    def result(self, **overrides):
        base = dict(
            filled_tokens=("why", "did", "the", "wall", "cross", "the", "road", "?"),
            candidates=((("wall", 0.6), ("semen", 0.4)),),
            infiller_id="test",
        )
        base.update(overrides)
        return InfillResult(**base)

    def test_accepts_valid_result(self):
        validate_result(self.result(), masked_request())

    def test_rejects_leftover_sentinel(self):
        bad = self.result(filled_tokens=("why", "did", "the", M, "cross", "the", "road", "?"))
        with pytest.raises(DataError):
            validate_result(bad, masked_request())

    def test_rejects_length_change(self):
        with pytest.raises(DataError):
            validate_result(self.result(filled_tokens=("too", "short")), masked_request())

    def test_rejects_missing_candidate_list(self):
        with pytest.raises(DataError):
            validate_result(self.result(candidates=()), masked_request())

    def test_rejects_excess_candidates(self):
        cands = (tuple((f"w{i}", 1.0 - i / 10) for i in range(6)),)
        with pytest.raises(DataError):
            validate_result(self.result(candidates=cands), masked_request())

    def test_rejects_increasing_scores(self):
        cands = ((("a", 0.2), ("b", 0.9)),)
        with pytest.raises(DataError):
            validate_result(self.result(candidates=cands), masked_request())

    def test_rejects_forbidden_fill_case_blind(self):
        bad = self.result(filled_tokens=("why", "did", "the", "Chicken", "cross", "the", "road", "?"))
        with pytest.raises(DataError):
            validate_result(bad, masked_request())


class TestPosVocabulary:
    def test_drops_punctuation(self, pos_vocab):
        assert "?" not in pos_vocab
        assert "." not in pos_vocab

    def test_majority_tag_and_count(self, pos_vocab):
        assert pos_vocab["the"] == ("DET", 2)  # twice in the chicken joke
        assert pos_vocab["chicken"] == ("NOUN", 1)

    def test_lowercases_surfaces(self, pos_vocab):
        assert "submarine" in pos_vocab
        assert "Submarine" not in pos_vocab

    def test_majority_tie_breaks_alphabetically(self):
        docs = [
            make_doc([("show", "NOUN", "dep", False)]),
            make_doc([("show", "VERB", "dep", False)]),
        ]
        vocab = build_pos_vocabulary(docs)
        assert vocab["show"] == ("NOUN", 2)


class TestBaseline:
    def test_golden_fill(self, pos_vocab):
        result = infill_baseline(masked_request(), pos_vocab, rng_seed=0)
        assert " ".join(result.filled_tokens) == "why did the semen cross the road ?"
        assert result.infiller_id == "baseline"

    def test_golden_candidates(self, pos_vocab):
        result = infill_baseline(masked_request(), pos_vocab, rng_seed=0)
        assert result.candidates == (
            (("road", pytest.approx(1 / 3)), ("semen", pytest.approx(1 / 3)),
             ("wall", pytest.approx(1 / 3))),
        )

    def test_seeds_change_the_draw(self, pos_vocab):
        fills = {infill_baseline(masked_request(), pos_vocab, s).filled_tokens[3] for s in range(6)}
        assert len(fills) > 1
        assert fills <= {"road", "semen", "wall"}

    def test_deterministic_per_seed(self, pos_vocab):
        a = infill_baseline(masked_request(), pos_vocab, rng_seed=3)
        b = infill_baseline(masked_request(), pos_vocab, rng_seed=3)
        assert a == b

    def test_pos_bucket_honored(self, pos_vocab):
        for s in range(10):
            fill = infill_baseline(masked_request(), pos_vocab, s).filled_tokens[3]
            assert pos_vocab[fill][0] == "NOUN"
            assert fill != "chicken"

    def test_empty_bucket_falls_back_to_any_pos(self, pos_vocab):
        req = masked_request(mask_pos_tags=("SYM",))
        result = infill_baseline(req, pos_vocab, rng_seed=0)
        assert result.filled_tokens[3] in pos_vocab

    def test_all_forbidden_rejected(self):
        vocab = {"only": ("NOUN", 1)}
        req = masked_request(forbid=(frozenset({"only"}),))
        with pytest.raises(DataError):
            infill_baseline(req, vocab, rng_seed=0)

    def test_empty_vocab_rejected(self):
        with pytest.raises(DataError):
            infill_baseline(masked_request(), {}, rng_seed=0)

    def test_zero_mask_request_is_identity(self, pos_vocab):
        req = InfillRequest(tokens=("no", "masks", "here"), mask_positions=(), forbid=())
        result = infill_baseline(req, pos_vocab, rng_seed=0)
        assert result.filled_tokens == ("no", "masks", "here")
        assert result.candidates == ()


class TestTemplateRequest:
    def test_positions_forbid_and_tags(self, golden_docs, lexicons):
        doc = golden_docs[2]
        tpl = extract_template(doc, lexicons, WeightConfig(mask_value=1.0))
        req = template_request(tpl, doc, top_k=7)
        assert req.tokens == ("why", "did", "the", M, "cross", "the", "road", "?")
        assert req.mask_positions == (3,)
        assert req.forbid == (frozenset({"chicken"}),)
        assert req.mask_pos_tags == ("NOUN",)
        assert req.top_k == 7

    def test_without_annotations_tags_are_none(self, golden_docs, lexicons):
        tpl = extract_template(golden_docs[2], lexicons, WeightConfig(mask_value=1.0))
        req = template_request(tpl)
        assert req.mask_pos_tags == (None,)


class FakeResponse:
    def __init__(self, payload, status_code=200, text=""):
        self._payload = payload
        self.status_code = status_code
        self.text = text

    def json(self):
        return self._payload


class TestRemote:
    def two_mask_request(self):
        return InfillRequest(
            tokens=("a", M, "b", M),
            mask_positions=(1, 3),
            top_k=3,
            forbid=(frozenset({"alpha1"}), frozenset()),
        )

    def test_round_trip_per_mask(self):
        with StubMlmServer() as server:
            result = infill_remote(self.two_mask_request(), endpoint=server.url)
            # best candidate alpha1 is forbidden at mask 0, so beta1 fills it
            assert result.filled_tokens == ("a", "beta1", "b", "alpha3")
            assert result.infiller_id == f"remote:{server.url}"
            assert len(server.requests) == 2
            assert server.requests[0]["mask_positions"] == [1, 3]
            assert server.requests[1]["mask_positions"] == [3]
            assert server.requests[1]["tokens"][1] == "beta1"
            assert server.requests[0]["forbid"] == {"1": ["alpha1"], "3": []}
            assert server.requests[1]["forbid"] == {"3": []}

    def test_endpoint_from_environment(self, monkeypatch):
        with StubMlmServer() as server:
            monkeypatch.setenv("HUMOR_MLM_URL", server.url)
            result = infill_remote(self.two_mask_request())
            assert result.filled_tokens[3] == "alpha3"

    def test_missing_endpoint_rejected(self, monkeypatch):
        monkeypatch.delenv("HUMOR_MLM_URL", raising=False)
        with pytest.raises(RemoteInfillError):
            infill_remote(self.two_mask_request())

    def test_http_error_surfaces_endpoint_and_mask(self):
        req = InfillRequest(tokens=("trigger500", M), mask_positions=(1,), forbid=(frozenset(),))
        with StubMlmServer() as server:
            with pytest.raises(RemoteInfillError) as excinfo:
                infill_remote(req, endpoint=server.url)
            message = str(excinfo.value)
            assert server.url in message
            assert "mask 0" in message
            assert "500" in message

    def test_non_json_response_rejected(self):
        req = InfillRequest(tokens=("triggerjson", M), mask_positions=(1,), forbid=(frozenset(),))
        with StubMlmServer() as server:
            with pytest.raises(RemoteInfillError, match="not valid JSON"):
                infill_remote(req, endpoint=server.url)

    def test_sentinel_candidate_rejected(self):
        req = InfillRequest(tokens=("triggersentinel", M), mask_positions=(1,), forbid=(frozenset(),))
        with StubMlmServer() as server:
            with pytest.raises(RemoteInfillError, match="sentinel"):
                infill_remote(req, endpoint=server.url)

    def test_empty_candidates_rejected(self):
        req = InfillRequest(tokens=("triggerempty", M), mask_positions=(1,), forbid=(frozenset(),))
        with StubMlmServer() as server:
            with pytest.raises(RemoteInfillError, match="no candidates"):
                infill_remote(req, endpoint=server.url)

    def test_unreachable_endpoint_rejected(self):
        req = InfillRequest(tokens=(M,), mask_positions=(0,), forbid=(frozenset(),))
        with pytest.raises(RemoteInfillError, match="request failed"):
            infill_remote(req, endpoint="http://127.0.0.1:9", timeout=0.5)

    def test_client_skips_forbidden_candidates(self, monkeypatch):
        def fake_post(url, json=None, timeout=None):
            pos = json["mask_positions"][0]
            return FakeResponse({"candidates": {str(pos): [
                {"token": "taboo", "score": 0.9},
                {"token": "fine", "score": 0.5},
            ]}})

        monkeypatch.setattr("humorkit.infill.requests.post", fake_post)
        req = InfillRequest(tokens=("x", M), mask_positions=(1,), forbid=(frozenset({"taboo"}),))
        result = infill_remote(req, endpoint="http://fake")
        assert result.filled_tokens == ("x", "fine")

    def test_all_candidates_forbidden_rejected(self, monkeypatch):
        def fake_post(url, json=None, timeout=None):
            pos = json["mask_positions"][0]
            return FakeResponse({"candidates": {str(pos): [{"token": "taboo", "score": 0.9}]}})

        monkeypatch.setattr("humorkit.infill.requests.post", fake_post)
        req = InfillRequest(tokens=("x", M), mask_positions=(1,), forbid=(frozenset({"taboo"}),))
        with pytest.raises(RemoteInfillError, match="all candidates forbidden"):
            infill_remote(req, endpoint="http://fake")

    def test_ascending_scores_rejected(self, monkeypatch):
        def fake_post(url, json=None, timeout=None):
            pos = json["mask_positions"][0]
            return FakeResponse({"candidates": {str(pos): [
                {"token": "a", "score": 0.1},
                {"token": "b", "score": 0.9},
            ]}})

        monkeypatch.setattr("humorkit.infill.requests.post", fake_post)
        req = InfillRequest(tokens=(M,), mask_positions=(0,), forbid=(frozenset(),))
        with pytest.raises(RemoteInfillError, match="not descending"):
            infill_remote(req, endpoint="http://fake")


def scripted_infiller(words):
    """In-process infiller that fills masks left to right from a fixed list."""

    def fill(req, rng_seed):
        filled = list(req.tokens)
        cands = []
        for i, pos in enumerate(req.mask_positions):
            filled[pos] = words[i]
            cands.append(((words[i], 1.0),))
        return InfillResult(tuple(filled), tuple(cands), "scripted")

    return fill


class TestHybridGenerate:
    def test_scripted_golden(self, golden_docs, lexicons):
        out = hybrid_generate(
            golden_docs[0], lexicons, infiller=scripted_infiller(["thin", "life", "smile"])
        )
        assert out["template_string"] == "what s long and [MASK] and full of [MASK] ? a [MASK] ."
        assert out["generated"] == "what s long and thin and full of life ? a smile ."
        assert out["original"] == "What s long and hard and full of semen ? A Submarine ."
        assert out["diagnostics"]["mask_count"] == 3
        assert out["diagnostics"]["infiller_id"] == "scripted"
        assert not out["diagnostics"]["no_op"]

    def test_baseline_golden(self, golden_docs, lexicons, pos_vocab):
        out = hybrid_generate(
            golden_docs[2], lexicons, WeightConfig(mask_value=1.0),
            BaselineInfiller(pos_vocab), rng_seed=0,
        )
        assert out["generated"] == "why did the semen cross the road ?"

    def test_zero_mask_no_op(self, lexicons):
        doc = make_doc([("Hello", "INTJ", "dep", False), (".", "PUNCT", "dep", False)])
        called = []

        def never(req, rng_seed):
            called.append(req)
            raise AssertionError("infiller must not run for a zero-mask template")

        out = hybrid_generate(doc, lexicons, infiller=never)
        assert out["generated"] == out["template_string"] == "hello ."
        assert out["diagnostics"]["no_op"]
        assert out["diagnostics"]["flagged"]
        assert out["diagnostics"]["infiller_id"] is None
        assert called == []

    def test_remote_infiller_through_stub(self, golden_docs, lexicons):
        with StubMlmServer() as server:
            out = hybrid_generate(
                golden_docs[2], lexicons, WeightConfig(mask_value=1.0),
                RemoteInfiller(endpoint=server.url),
            )
        assert out["generated"] == "why did the alpha3 cross the road ?"
        assert out["diagnostics"]["infiller_id"] == f"remote:{server.url}"

    def test_requires_infiller(self, golden_docs, lexicons):
        with pytest.raises(DataError):
            hybrid_generate(golden_docs[0], lexicons)

    def test_deterministic_per_seed(self, golden_docs, lexicons, pos_vocab):
        kwargs = dict(cfg=WeightConfig(), infiller=BaselineInfiller(pos_vocab), rng_seed=9)
        a = hybrid_generate(golden_docs[1], lexicons, **kwargs)
        b = hybrid_generate(golden_docs[1], lexicons, **kwargs)
        assert a == b
