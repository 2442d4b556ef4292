from __future__ import annotations

import json
import threading

import httpx
import numpy as np
import pytest

from chunkbench.embedding import (
    EmbeddingCache,
    HttpEmbedder,
    MockEmbedder,
    Vector,
    cosine_sim,
    embed_texts,
    mock_embed,
)
from chunkbench.errors import ContractError, ProviderError
from chunkbench.llm import HttpChatProvider, extract_json_object


def test_identical_texts_identical_vectors():
    a, b = embed_texts(MockEmbedder(), ["x", "x"])
    assert a == b


def test_vectors_are_unit_norm():
    for v in embed_texts(MockEmbedder(), ["alpha", "a much longer piece of text", "Ωmega"]):
        assert abs(float(np.linalg.norm(v.values.astype(np.float64))) - 1.0) < 1e-6


def test_batch_equals_single_calls():
    emb = MockEmbedder()
    texts = ["one fish", "two fish", "red fish"]
    batch = embed_texts(emb, texts)
    singles = [embed_texts(MockEmbedder(), [t])[0] for t in texts]
    assert batch == singles


def test_mock_embed_properties():
    assert mock_embed("hello") == mock_embed("hello")
    assert cosine_sim(mock_embed("abc"), mock_embed("xyz")) < cosine_sim(mock_embed("abc"), mock_embed("abc"))
    # " abcabc " and " abc " share " ab", "abc"; " xyz " shares nothing with " abcabc ".
    assert cosine_sim(mock_embed("abcabc"), mock_embed("abc")) > cosine_sim(mock_embed("abcabc"), mock_embed("xyz"))
    with pytest.raises(ContractError):
        mock_embed("x", dim=4)


def test_cosine():
    assert cosine_sim([1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0)
    assert cosine_sim([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert cosine_sim([1.0, 1.0], [2.0, 2.0]) == pytest.approx(1.0)
    with pytest.raises(ContractError):
        cosine_sim([1.0, 0.0], [1.0, 0.0, 0.0])
    with pytest.raises(ContractError):
        cosine_sim([0.0, 0.0], [1.0, 0.0])


def test_cosine_symmetry_and_scale():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b = rng.normal(size=16), rng.normal(size=16)
        assert cosine_sim(a, b) == cosine_sim(b, a)
        assert abs(cosine_sim(3.5 * a, b) - cosine_sim(a, b)) < 1e-9


def test_vector_rejects_bad_input():
    for bad in ([], [0.0, 0.0], [1.0, float("nan")]):
        with pytest.raises(ContractError):
            Vector.normalized(bad, "m")


def test_cache_transparency_and_reuse(tmp_path):
    texts = ["alpha", "beta", "alpha", "gamma"]
    plain = embed_texts(MockEmbedder(), texts)
    emb = MockEmbedder()
    cache = EmbeddingCache(tmp_path / "cache")
    assert embed_texts(emb, texts, cache=cache) == plain
    calls = emb.calls
    assert embed_texts(emb, texts, cache=cache) == plain
    assert emb.calls == calls
    # a fresh cache object on the same directory reads vectors back from disk
    fresh = MockEmbedder()
    assert embed_texts(fresh, texts, cache=EmbeddingCache(tmp_path / "cache")) == plain
    assert fresh.calls == 0


def test_cache_key_includes_model():
    cache = EmbeddingCache()
    a = embed_texts(MockEmbedder(dim=16), ["same"], cache=cache)[0]
    b = embed_texts(MockEmbedder(dim=32), ["same"], cache=cache)[0]
    assert a.dim == 16 and b.dim == 32


def test_concurrent_identical_requests_embed_once():
    class Slow(MockEmbedder):
        def embed_batch(self, texts):
            threading.Event().wait(0.05)
            return super().embed_batch(texts)

    emb = Slow()
    cache = EmbeddingCache()
    results = []
    threads = [threading.Thread(target=lambda: results.append(embed_texts(emb, ["shared"], cache=cache)[0])) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert emb.calls == 1
    assert all(r == results[0] for r in results)


def embeddings_transport(dim=4, fail_times=0, status=500, log=None):
    state = {"fails": fail_times}

    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        if log is not None:
            log.append((request, body))
        if state["fails"] > 0:
            state["fails"] -= 1
            return httpx.Response(status, json={"error": "busy"})
        data = [
            {"index": i, "embedding": [float(len(t)), 1.0] + [0.5] * (dim - 2)} for i, t in enumerate(body["input"])
        ]
        return httpx.Response(200, json={"data": list(reversed(data))})

    return httpx.MockTransport(handler)


def test_http_embedder_wire_format_and_order():
    log = []
    client = httpx.Client(transport=embeddings_transport(log=log))
    emb = HttpEmbedder("m1", base_url="http://embed.test/v1/", api_key="k", client=client)
    vecs = embed_texts(emb, ["a", "bbb"])
    request, body = log[0]
    assert str(request.url) == "http://embed.test/v1/embeddings"
    assert request.headers["authorization"] == "Bearer k"
    assert body == {"model": "m1", "input": ["a", "bbb"]}
    assert emb.dim == 4
    assert vecs[0] != vecs[1]
    assert vecs[1] == Vector.normalized([3.0, 1.0, 0.5, 0.5], "m1")


def test_http_embedder_retries_then_succeeds():
    sleeps = []
    client = httpx.Client(transport=embeddings_transport(fail_times=2))
    emb = HttpEmbedder("m", base_url="http://x", client=client, sleep=sleeps.append)
    assert len(embed_texts(emb, ["a"])) == 1
    assert sleeps == [0.25, 0.5]


def test_http_embedder_reports_failing_batch():
    client = httpx.Client(transport=embeddings_transport(fail_times=100, status=503))
    emb = HttpEmbedder("m", base_url="http://x", client=client, sleep=lambda s: None, batch_size=2)
    with pytest.raises(ProviderError) as info:
        embed_texts(emb, ["a", "b", "c"])
    assert info.value.batch_index == 0


def test_http_embedder_dimension_contract():
    client = httpx.Client(transport=embeddings_transport(dim=4))
    emb = HttpEmbedder("m", base_url="http://x", client=client, dim=8)
    with pytest.raises(ContractError):
        embed_texts(emb, ["a"])


def test_http_embedder_needs_endpoint(monkeypatch):
    monkeypatch.delenv("EMBED_API_BASE", raising=False)
    with pytest.raises(ProviderError):
        HttpEmbedder("m")


def test_chat_provider_payload_and_reply(monkeypatch):
    seen = []

    def handler(request):
        seen.append(json.loads(request.content))
        return httpx.Response(200, json={"choices": [{"message": {"content": '{"score": 1, "reason": "r"}'}}]})

    monkeypatch.setenv("JUDGE_API_BASE", "http://judge.test")
    monkeypatch.delenv("JUDGE_MODEL", raising=False)
    chat = HttpChatProvider(client=httpx.Client(transport=httpx.MockTransport(handler)))
    assert chat.complete("hello") == '{"score": 1, "reason": "r"}'
    assert seen[0] == {
        "model": "mistralai/mixtral-8x22b-instruct-v0.1",
        "messages": [{"role": "user", "content": "hello"}],
        "temperature": 0.0,
        "top_p": 0.1,
    }


def test_extract_json_object():
    assert extract_json_object('```json\n{"p": 0.5}\n```') == {"p": 0.5}
    assert extract_json_object('Sure: {"score": 2} done') == {"score": 2}
    with pytest.raises(ValueError):
        extract_json_object("no json here")
