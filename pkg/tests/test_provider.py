import threading
import time

import httpx
import pytest

from autoarabic.provider import (
    CredentialsError,
    HttpTransport,
    MockTransport,
    ProviderClient,
    ProviderConfig,
    ProviderError,
    RateLimiter,
    TransportError,
)


def make_config(**overrides):
    defaults = dict(
        model="m1",
        temperature=0.7,
        top_p=1.0,
        max_parallel=4,
        max_attempts=3,
        backoff_base_seconds=1.0,
        rate_limit_requests=1000,
        rate_limit_window_seconds=60.0,
    )
    defaults.update(overrides)
    return ProviderConfig(**defaults)


def make_client(transport, config, sleeps=None):
    recorded = sleeps if sleeps is not None else []
    return ProviderClient(
        transport, config, clock=time.monotonic, sleep=recorded.append
    )


TRANSLATION_PROMPT = "Translate.\nThe English caption: A man walks.\nArabic caption:"


def test_mock_is_deterministic():
    a = MockTransport(seed=5).complete(TRANSLATION_PROMPT, make_config())
    b = MockTransport(seed=5).complete(TRANSLATION_PROMPT, make_config())
    assert a == b
    assert a.strip()


def test_mock_seed_changes_output():
    prompts = [
        f"Translate.\nThe English caption: sentence {i}\nArabic caption:"
        for i in range(20)
    ]
    cfg = make_config()
    outs_a = [MockTransport(seed=1).complete(p, cfg) for p in prompts]
    outs_b = [MockTransport(seed=2).complete(p, cfg) for p in prompts]
    assert outs_a != outs_b


def test_mock_camera_sources_get_loanword():
    prompt = "Translate.\nThe English caption: The camera pans left.\nArabic caption:"
    out = MockTransport(seed=3).complete(prompt, make_config())
    assert "كاميرا" in out


def test_mock_judge_prompts_get_flags_line():
    prompt = "Judge this.\nFLAGS: tokens or none.\nArabic translation: نص\n"
    out = MockTransport(seed=3).complete(prompt, make_config())
    assert out.startswith("FLAGS:")


def test_mock_response_override():
    transport = MockTransport(responses={TRANSLATION_PROMPT: "نص ثابت"})
    assert transport.complete(TRANSLATION_PROMPT, make_config()) == "نص ثابت"


def test_client_retries_then_succeeds():
    transport = MockTransport(seed=0, fail_times=2)
    sleeps = []
    client = make_client(transport, make_config(max_attempts=3), sleeps)
    out = client.complete(TRANSLATION_PROMPT)
    assert out
    assert len(transport.calls) == 3
    # Exponential backoff before the second and third tries.
    assert sleeps == [1.0, 2.0]


def test_client_gives_up_after_max_attempts():
    transport = MockTransport(seed=0, fail_times=99)
    client = make_client(transport, make_config(max_attempts=3))
    with pytest.raises(TransportError, match="3 attempts"):
        client.complete(TRANSLATION_PROMPT)
    assert len(transport.calls) == 3


def test_backoff_is_capped():
    transport = MockTransport(seed=0, fail_times=99)
    sleeps = []
    client = make_client(
        transport,
        make_config(max_attempts=6, backoff_base_seconds=10.0, backoff_cap_seconds=25.0),
        sleeps,
    )
    with pytest.raises(TransportError):
        client.complete(TRANSLATION_PROMPT)
    assert sleeps == [10.0, 20.0, 25.0, 25.0, 25.0]


def test_empty_response_is_retried():
    class EmptyOnce:
        def __init__(self):
            self.calls = 0

        def complete(self, prompt, config):
            self.calls += 1
            return "" if self.calls == 1 else "نص"

    transport = EmptyOnce()
    client = make_client(transport, make_config())
    assert client.complete(TRANSLATION_PROMPT) == "نص"
    assert transport.calls == 2


def test_cache_round_trip(tmp_path):
    config = make_config(cache_dir=str(tmp_path / "cache"))
    transport = MockTransport(seed=1)
    client = make_client(transport, config)
    first = client.complete(TRANSLATION_PROMPT)
    second = client.complete(TRANSLATION_PROMPT)
    assert first == second
    assert len(transport.calls) == 1

    # A new client over the same directory reuses the entry.
    transport2 = MockTransport(seed=1)
    client2 = make_client(transport2, config)
    assert client2.complete(TRANSLATION_PROMPT) == first
    assert transport2.calls == []


def test_cache_key_covers_sampling_params(tmp_path):
    base = make_config(cache_dir=str(tmp_path))
    variants = [
        make_config(cache_dir=str(tmp_path), model="m2"),
        make_config(cache_dir=str(tmp_path), temperature=0.1),
        make_config(cache_dir=str(tmp_path), top_p=0.9),
    ]
    keys = {cfg.cache_key(TRANSLATION_PROMPT) for cfg in [base] + variants}
    assert len(keys) == 4
    assert base.cache_key("other prompt") != base.cache_key(TRANSLATION_PROMPT)


def test_corrupt_cache_entry_is_refetched(tmp_path, caplog):
    config = make_config(cache_dir=str(tmp_path))
    transport = MockTransport(seed=1)
    client = make_client(transport, config)
    text = client.complete(TRANSLATION_PROMPT)
    path = tmp_path / (config.cache_key(TRANSLATION_PROMPT) + ".txt")
    path.write_bytes(b"\xff\xfe\x00broken")
    with caplog.at_level("WARNING"):
        again = client.complete(TRANSLATION_PROMPT)
    assert again == text
    assert len(transport.calls) == 2
    assert any("cache" in r.message for r in caplog.records)


def test_cache_disabled_without_dir():
    transport = MockTransport(seed=1)
    client = make_client(transport, make_config())
    client.complete(TRANSLATION_PROMPT)
    client.complete(TRANSLATION_PROMPT)
    assert len(transport.calls) == 2


def test_rate_limiter_blocks_at_window_edge():
    now = [0.0]
    sleeps = []

    def clock():
        return now[0]

    def sleep(seconds):
        sleeps.append(seconds)
        now[0] += seconds

    limiter = RateLimiter(3, 10.0, clock=clock, sleep=sleep)
    for _ in range(3):
        limiter.acquire()
    assert sleeps == []
    limiter.acquire()
    assert sleeps == [10.0]
    # The window rolled forward during that sleep; two more slots are free.
    limiter.acquire()
    limiter.acquire()
    assert sleeps == [10.0]
    limiter.acquire()
    assert sleeps == [10.0, 10.0]


def test_rate_limiter_rejects_zero():
    with pytest.raises(ValueError):
        RateLimiter(0, 1.0)


def test_max_parallel_is_enforced():
    active = [0]
    peak = [0]
    gate = threading.Lock()

    class SlowTransport:
        def complete(self, prompt, config):
            with gate:
                active[0] += 1
                peak[0] = max(peak[0], active[0])
            time.sleep(0.002)
            with gate:
                active[0] -= 1
            return "نص"

    client = ProviderClient(SlowTransport(), make_config(max_parallel=4))
    threads = [
        threading.Thread(target=client.complete, args=(f"prompt {i}",))
        for i in range(100)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak[0] <= 4


def test_http_transport_requires_credentials(monkeypatch):
    monkeypatch.delenv("AUTOARABIC_TRANSLATE_KEY", raising=False)
    with pytest.raises(CredentialsError, match="AUTOARABIC_TRANSLATE_KEY"):
        HttpTransport("http://example.test/v1", "AUTOARABIC_TRANSLATE_KEY")


def _http_transport_with(monkeypatch, handler):
    monkeypatch.setenv("AUTOARABIC_TRANSLATE_KEY", "sk-test")
    transport = HttpTransport("http://example.test/v1", "AUTOARABIC_TRANSLATE_KEY")
    transport._client = httpx.Client(transport=httpx.MockTransport(handler))
    return transport


def test_http_transport_success(monkeypatch):
    seen = {}

    def handler(request):
        seen["auth"] = request.headers["authorization"]
        seen["body"] = request.read()
        return httpx.Response(200, json={"text": "نص مترجم"})

    transport = _http_transport_with(monkeypatch, handler)
    out = transport.complete("p", make_config())
    assert out == "نص مترجم"
    assert seen["auth"] == "Bearer sk-test"
    assert b'"temperature": 0.7' in seen["body"] or b'"temperature":0.7' in seen["body"]


def test_http_transport_retryable_statuses(monkeypatch):
    for code in (429, 500, 503):
        transport = _http_transport_with(
            monkeypatch, lambda request, code=code: httpx.Response(code)
        )
        with pytest.raises(TransportError):
            transport.complete("p", make_config())


def test_http_transport_client_error_is_fatal(monkeypatch):
    transport = _http_transport_with(
        monkeypatch, lambda request: httpx.Response(401, text="bad key")
    )
    with pytest.raises(ProviderError) as exc:
        transport.complete("p", make_config())
    assert not isinstance(exc.value, TransportError)


def test_http_transport_malformed_body(monkeypatch):
    transport = _http_transport_with(
        monkeypatch, lambda request: httpx.Response(200, text="not json")
    )
    with pytest.raises(TransportError):
        transport.complete("p", make_config())
