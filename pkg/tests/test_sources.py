import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from conftest import compiled
from steerex.sources import (
    ProtocolFault,
    RemoteSource,
    RemoteSourceConfig,
    SourceTimeout,
    TableSource,
    UniformSource,
    VocabMismatch,
    parse_source,
)
from steerex.steering import GenerationFault, SteeringParams, generate_batch
from steerex.vocab import build_index


def test_uniform_is_zero():
    src = UniformSource(7)
    assert src.next_logits("p", [1, 2]).tolist() == [0.0] * 7
    with pytest.raises(ValueError):
        UniformSource(0)


def test_table_lookup_by_last_token():
    src = TableSource([1.0, 2.0, 3.0], {1: [9.0, 9.0, 9.0]})
    assert src.next_logits("", []).tolist() == [1.0, 2.0, 3.0]
    assert src.next_logits("", [0, 1]).tolist() == [9.0, 9.0, 9.0]
    assert src.next_logits("", [1, 2]).tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        TableSource([1.0, 2.0], {0: [1.0]})


def test_constant_table_equals_uniform(char40):
    dfa = compiled("[a-f]{2,6}")
    idx = build_index(dfa, char40)
    flat = TableSource(np.full(len(char40), 2.0))
    params = SteeringParams(mode="baseline")
    a = generate_batch(flat, dfa, idx, params, "", 100, 3)
    b = generate_batch(UniformSource(len(char40)), dfa, idx, params, "", 100, 3)
    assert [s.token_ids for s in a.samples] == [s.token_ids for s in b.samples]


def test_random_table_is_seeded(tmp_path):
    a = TableSource.random(30, 5, eos=29, eos_bias=2.0)
    b = TableSource.random(30, 5, eos=29, eos_bias=2.0)
    assert a.to_json() == b.to_json()
    assert a.to_json() != TableSource.random(30, 6).to_json()
    path = tmp_path / "t.json"
    path.write_text(json.dumps(a.to_json()))
    c = TableSource.load(path)
    assert np.array_equal(c.next_logits("", [4]), a.next_logits("", [4]))


def test_eos_bias_shifts_one_column():
    plain = TableSource.random(10, 1, scale=1.0)
    biased = TableSource.random(10, 1, scale=1.0, eos=9, eos_bias=4.0)
    diff = biased.next_logits("", [3]) - plain.next_logits("", [3])
    assert diff[:9].tolist() == [0.0] * 9
    assert diff[9] == pytest.approx(4.0)


def test_parse_source_errors():
    with pytest.raises(ValueError):
        parse_source("bogus", 3, "h")
    with pytest.raises(ValueError):
        parse_source("table:", 3, "h")
    assert isinstance(parse_source("uniform", 3, "h"), UniformSource)


def test_parse_table_checks_width(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps(TableSource.random(4, 0).to_json()))
    assert parse_source(f"table:{path}", 4, "h").vocab_size == 4
    with pytest.raises(ValueError):
        parse_source(f"table:{path}", 5, "h")


# ---------------------------------------------------------------------------
# loopback server
# ---------------------------------------------------------------------------


class _Server:
    def __init__(self, vocab_hash, logits, behaviour="ok"):
        self.vocab_hash = vocab_hash
        self.logits = logits
        self.behaviour = behaviour
        self.requests = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _reply(self, body: bytes, code=200):
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                self._reply(json.dumps({"hash": outer.vocab_hash}).encode())

            def do_POST(self):
                length = int(self.headers["Content-Length"])
                doc = json.loads(self.rfile.read(length))
                outer.requests.append((doc, self.headers.get("X-Key")))
                mode = outer.behaviour
                if mode == "slow":
                    time.sleep(0.5)
                if mode == "short":
                    self._reply(json.dumps({"logits": outer.logits[:-1]}).encode())
                elif mode == "garbage":
                    self._reply(b"not json")
                elif mode == "error":
                    self._reply(b"{}", code=500)
                elif mode == "nan":
                    self._reply(b'{"logits": [NaN' + b", 0" * (len(outer.logits) - 1) + b"]}")
                else:
                    self._reply(json.dumps({"logits": outer.logits}).encode())

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def abac_index(tiny_vocab):
    return build_index(compiled("ab|ac"), tiny_vocab)


def test_remote_echo_matches_table(abac_index):
    vocab = abac_index.vocab
    row = [0.5, -1.0, 2.0, 0.0, 1.5, -0.25, 0.75]
    with _Server(vocab.digest(), row) as server:
        remote = RemoteSource(RemoteSourceConfig(server.url, auth_header="X-Key: secret"), vocab.digest(), len(vocab))
        for mode in ("baseline", "diverse"):
            params = SteeringParams(mode=mode)
            a = generate_batch(remote, abac_index.dfa, abac_index, params, "hi", 20, 1)
            b = generate_batch(TableSource(row), abac_index.dfa, abac_index, params, "hi", 20, 1)
            assert [s.token_ids for s in a.samples] == [s.token_ids for s in b.samples]
        doc, key = server.requests[0]
        assert doc == {"prompt": "hi", "tokens": []}
        assert key == "secret"


def test_remote_hash_mismatch_names_both(abac_index):
    with _Server("f" * 64, [0.0] * 7) as server:
        with pytest.raises(VocabMismatch) as info:
            RemoteSource(RemoteSourceConfig(server.url), "a" * 64, 7)
    assert "f" * 64 in str(info.value) and "a" * 64 in str(info.value)


@pytest.mark.parametrize("behaviour", ["short", "garbage", "error", "nan"])
def test_remote_protocol_faults(abac_index, behaviour):
    vocab = abac_index.vocab
    with _Server(vocab.digest(), [0.0] * 7, behaviour) as server:
        remote = RemoteSource(RemoteSourceConfig(server.url, retries=0), vocab.digest(), 7)
        with pytest.raises(GenerationFault) as info:
            generate_batch(remote, abac_index.dfa, abac_index, SteeringParams(), "", 3, 0)
    assert isinstance(info.value.__cause__, ProtocolFault)
    assert info.value.sample == 0 and info.value.step == 0


def test_remote_timeout(abac_index):
    vocab = abac_index.vocab
    with _Server(vocab.digest(), [0.0] * 7, "slow") as server:
        remote = RemoteSource(RemoteSourceConfig(server.url, timeout=0.1, retries=1), vocab.digest(), 7)
        with pytest.raises(SourceTimeout):
            remote.next_logits("", [])
        assert len(server.requests) == 2


def test_remote_unreachable():
    with pytest.raises(SourceTimeout):
        RemoteSource(RemoteSourceConfig("http://127.0.0.1:9", timeout=0.2, retries=0), "h", 3)


def test_remote_config_validation():
    with pytest.raises(ValueError):
        RemoteSourceConfig("http://x", timeout=0)
    with pytest.raises(ValueError):
        RemoteSourceConfig("http://x", retries=-1)
