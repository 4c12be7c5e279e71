import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mefa.domain import DependencyLevel, MefaConfig, ProbTriple, UNIFORM
from mefa.gateway import (
    BackendError,
    BackendSpec,
    CacheMissError,
    DiskCache,
    Gateway,
    TransportError,
    cache_key,
    gather_evidence,
)
from mefa.prompts import SubTask, render

TEMP_FWD = "BEFORE: 1.0\nAFTER: 0.0\nSIMULTANEOUS: 0.0"
TEMP_REV = "BEFORE: 0.0\nAFTER: 1.0\nSIMULTANEOUS: 0.0"


def _completion(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


def http_gateway(handler, tmp_path=None, **kw):
    spec = BackendSpec("http", model="m", endpoint="http://llm.test/v1",
                       cache_dir=tmp_path, api_key_env="MEFA_TEST_KEY")
    return Gateway(spec, transport=httpx.MockTransport(handler), backoff=0.0, **kw)


class TestBackendSpec:
    def test_http_needs_endpoint(self):
        with pytest.raises(ValueError):
            BackendSpec("http", model="m")

    def test_replay_needs_cache(self):
        with pytest.raises(ValueError):
            BackendSpec("replay")

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            BackendSpec("grpc")

    def test_describe_has_no_secret(self, monkeypatch):
        monkeypatch.setenv("MEFA_TEST_KEY", "sk-secret")
        spec = BackendSpec("http", model="m", endpoint="http://x", api_key_env="MEFA_TEST_KEY")
        assert "sk-secret" not in json.dumps(spec.describe())

    def test_with_temperature(self):
        spec = BackendSpec("scripted", responses={})
        assert spec.with_temperature(0.7).temperature == 0.7 and spec.temperature == 0.1


class TestCacheKey:
    base = ("m", 0.1, 0.7, "prompt", 1)

    def test_stable(self):
        assert cache_key(*self.base) == cache_key(*self.base)
        assert len(cache_key(*self.base)) == 64

    @given(st.integers(0, 4), st.data())
    def test_any_field_change_changes_key(self, field, data):
        alt = {0: st.text(min_size=1), 1: st.floats(0, 2), 2: st.floats(0, 1),
               3: st.text(), 4: st.integers(1, 10)}[field]
        value = data.draw(alt.filter(lambda v: v != self.base[field]))
        changed = list(self.base)
        changed[field] = value
        assert cache_key(*changed) != cache_key(*self.base)


class TestDiskCache:
    def test_put_get_round_trip(self, tmp_path):
        cache = DiskCache(tmp_path)
        cache.put("k", "answer")
        assert cache.get("k").raw_response == "answer"
        assert cache.get("other") is None

    def test_first_write_wins(self, tmp_path):
        cache = DiskCache(tmp_path)
        cache.put("k", "first")
        assert cache.put("k", "second").raw_response == "first"

    def test_no_temp_files_left(self, tmp_path):
        DiskCache(tmp_path).put("k", "x")
        assert [p.name for p in tmp_path.iterdir()] == ["k.json"]

    def test_clear(self, tmp_path):
        cache = DiskCache(tmp_path)
        cache.put("a", "1")
        cache.put("b", "2")
        assert len(cache.entries()) == 2
        assert cache.clear() == 2 and cache.entries() == []


class TestGateway:
    def test_cache_hit_makes_no_network_call(self, tmp_path):
        calls = []

        def handler(request):
            calls.append(request)
            return httpx.Response(200, json=_completion("Coreference: NO"))

        gw = http_gateway(handler, tmp_path)
        assert gw.query_text("p", 1) == "Coreference: NO"
        fresh = http_gateway(handler, tmp_path)
        assert fresh.query_text("p", 1) == "Coreference: NO"
        assert len(calls) == 1
        assert fresh.stats == {"hits": 1, "misses": 0, "network_calls": 0}

    def test_replay_miss(self, tmp_path):
        gw = Gateway(BackendSpec("replay", cache_dir=tmp_path))
        with pytest.raises(CacheMissError):
            gw.query_text("never seen", 1)

    def test_replay_hit(self, tmp_path):
        spec = BackendSpec("replay", model="m", cache_dir=tmp_path)
        gw = Gateway(spec)
        DiskCache(tmp_path).put(gw.key_for("p", 2), "cached")
        assert gw.query_text("p", 2) == "cached"

    def test_rounds_are_distinct_entries(self, tmp_path):
        gw = Gateway(BackendSpec("scripted", responses={"lbl": ["one", "two"]}, cache_dir=tmp_path))
        assert gw.query_text("p", 1, "lbl") == "one"
        assert gw.query_text("p", 2, "lbl") == "two"
        assert len(DiskCache(tmp_path).entries()) == 2

    def test_scripted_callable(self):
        gw = Gateway(BackendSpec("scripted", responses=lambda prompt, label, r: f"{label}#{r}"))
        assert gw.query_text("p", 3, "x") == "x#3"

    def test_scripted_missing(self):
        with pytest.raises(BackendError):
            Gateway(BackendSpec("scripted", responses={})).query_text("p", 1)

    def test_round_index_starts_at_one(self):
        with pytest.raises(ValueError):
            Gateway(BackendSpec("scripted", responses={"p": "x"})).query_text("p", 0)

    def test_request_shape(self, monkeypatch):
        monkeypatch.setenv("MEFA_TEST_KEY", "sk-123")
        seen = {}

        def handler(request):
            seen["url"] = str(request.url)
            seen["auth"] = request.headers.get("authorization")
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json=_completion("ok"))

        http_gateway(handler).query_text("hello", 1)
        assert seen["url"] == "http://llm.test/v1/chat/completions"
        assert seen["auth"] == "Bearer sk-123"
        assert seen["body"] == {"model": "m", "messages": [{"role": "user", "content": "hello"}],
                                "temperature": 0.1, "top_p": 0.7}

    def test_retries_transient_failures(self):
        attempts = []

        def handler(request):
            attempts.append(1)
            if len(attempts) == 1:
                raise httpx.ConnectError("refused")
            if len(attempts) == 2:
                return httpx.Response(503, text="busy")
            return httpx.Response(200, json=_completion("fine"))

        gw = http_gateway(handler, retries=2)
        assert gw.query_text("p", 1) == "fine"
        assert gw.stats["network_calls"] == 3

    def test_transport_error_after_retries(self):
        def handler(request):
            raise httpx.ConnectError("refused")

        gw = http_gateway(handler, retries=2)
        with pytest.raises(TransportError):
            gw.query_text("p", 1)
        assert gw.stats["network_calls"] == 3

    def test_persistent_rate_limit(self):
        gw = http_gateway(lambda r: httpx.Response(429, text="slow down"), retries=1)
        with pytest.raises(BackendError, match="429"):
            gw.query_text("p", 1)

    def test_client_error_not_retried(self):
        gw = http_gateway(lambda r: httpx.Response(401, text="bad key"), retries=3)
        with pytest.raises(BackendError, match="401"):
            gw.query_text("p", 1)
        assert gw.stats["network_calls"] == 1

    def test_malformed_body(self):
        gw = http_gateway(lambda r: httpx.Response(200, json={"nope": 1}))
        with pytest.raises(BackendError, match="malformed"):
            gw.query_text("p", 1)


def _pair_table(temp_rounds, **overrides):
    table = {
        "temporality:struck:damage": temp_rounds,
        "necessity:struck:damage": "PRECONDITION: 0.6\nREV_PRECONDITION: 0.2\nNONE: 0.2",
        "sufficiency:struck:damage": "SUFFICIENCY: 0.5\nREV_SUFFICIENCY: 0.0\nNONE: 0.5",
        "dependency:struck:damage": "Dependency: strong",
        "causal_clue:struck:damage": "Causal Clues: [caused]",
        "coreference:struck:damage": "Coreference: NO",
    }
    table.update(overrides)
    return table


class TestGatherEvidence:
    def _gather(self, corpus6, table, rounds):
        doc = corpus6[0]
        gw = Gateway(BackendSpec("scripted", responses=table))
        return gather_evidence(gw, doc, (doc.events[0], doc.events[1]), MefaConfig(rounds=rounds))

    def test_single_round(self, corpus6):
        b = self._gather(corpus6, _pair_table(TEMP_FWD), 1)
        assert b.t == ProbTriple(1.0, 0.0, 0.0)
        assert b.n.as_tuple() == pytest.approx((0.6, 0.2, 0.2))
        assert b.d is DependencyLevel.STRONG and b.clues == ("caused",) and b.coref is False
        assert b.degraded == frozenset()

    def test_rounds_are_averaged(self, corpus6):
        b = self._gather(corpus6, _pair_table([TEMP_FWD, TEMP_REV]), 2)
        assert b.t.as_tuple() == pytest.approx((0.5, 0.5, 0.0))
        assert b.rounds_used == 2

    def test_failed_round_is_dropped(self, corpus6):
        b = self._gather(corpus6, _pair_table([TEMP_FWD, "I am not sure.", TEMP_FWD]), 3)
        assert b.t.as_tuple() == pytest.approx((1.0, 0.0, 0.0))
        assert b.degraded == {"temporality"}

    def test_all_rounds_failed(self, corpus6):
        b = self._gather(corpus6, _pair_table(["??", "!!"]), 2)
        assert b.t == UNIFORM and "temporality" in b.degraded

    def test_aux_fallbacks(self, corpus6):
        table = _pair_table(TEMP_FWD, **{
            "dependency:struck:damage": "It depends.",
            "coreference:struck:damage": "Unclear.",
        })
        b = self._gather(corpus6, table, 1)
        assert b.d is DependencyLevel.NONE and b.coref is False
        assert b.degraded == {"dependency", "coreference"}

    def test_transport_errors_propagate(self, corpus6):
        def handler(request):
            raise httpx.ReadTimeout("slow")

        doc = corpus6[0]
        gw = http_gateway(handler, retries=0)
        with pytest.raises(TransportError):
            gather_evidence(gw, doc, (doc.events[0], doc.events[1]), MefaConfig())

    def test_queries_hit_rendered_prompts(self, corpus6):
        doc = corpus6[0]
        pair = (doc.events[0], doc.events[1])
        prompt = render(SubTask.TEMPORALITY, doc, pair).rendered
        table = _pair_table(TEMP_REV)
        table[prompt] = TEMP_FWD  # exact prompt text takes precedence over the label
        b = self._gather(corpus6, table, 1)
        assert b.t == ProbTriple(1.0, 0.0, 0.0)
