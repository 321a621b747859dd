from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

import sacpdp
from sacpdp.bundle import build_store, load_bundle
from sacpdp.registry import build_access_request
from sacpdp.service import Gateway, load_gateway_config
from sacpdp.xmlio import parse_xacml_request

FIXTURES = Path(sacpdp.__file__).parent / "fixtures"
EHEALTH = FIXTURES / "ehealth"
GOLDEN = FIXTURES / "golden"


@pytest.fixture(scope="session")
def ehealth_bundle():
    return load_bundle(EHEALTH)


@pytest.fixture(scope="session")
def ehealth(ehealth_bundle):
    return build_store(ehealth_bundle)


@pytest.fixture(scope="session")
def canned_requests(ehealth_bundle, ehealth):
    store, kb = ehealth
    out = []
    for path in ehealth_bundle.request_paths():
        wire = parse_xacml_request(path.read_text(encoding="utf-8"))
        request, _ = build_access_request(wire, kb, store)
        out.append((path.stem, request))
    return out


class StubUpstream:
    """Counts hits and answers 200 with a recognizable JSON body."""

    def __init__(self):
        self.hits = []
        self.lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, format, *args):  # noqa: A002
                pass

            def _answer(self):
                length = int(self.headers.get("Content-Length") or 0)
                body_in = self.rfile.read(length) if length else b""
                with stub.lock:
                    stub.hits.append((self.command, self.path, body_in))
                body = json.dumps({"upstream": True, "path": self.path}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                if self.command != "HEAD":
                    self.wfile.write(body)

            do_GET = do_HEAD = do_POST = do_PUT = do_PATCH = do_DELETE = _answer

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        self.thread = threading.Thread(
            target=self.server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )
        self.thread.start()

    @property
    def port(self) -> int:
        return self.server.server_address[1]

    @property
    def hit_count(self) -> int:
        with self.lock:
            return len(self.hits)

    def stop(self):
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)


@pytest.fixture
def stub_upstream():
    stub = StubUpstream()
    yield stub
    stub.stop()


def write_gateway_conf(tmp_path: Path, upstream_port: int, bundle_dir: Path = EHEALTH) -> Path:
    conf = tmp_path / "gateway.conf"
    lines = [
        f"so = {bundle_dir / 'ehealth_so.xml'}",
        f"oo = {bundle_dir / 'ehealth_oo.xml'}",
        f"ao = {bundle_dir / 'ehealth_ao.xml'}",
        f"ato = {bundle_dir / 'ehealth_ato.xml'}",
        f"purposes = {bundle_dir / 'ehealth_purposes.xml'}",
        f"policy = {bundle_dir / 'ehealth_policy.xml'}",
        f"registry = {bundle_dir / 'ehealth_registry.xml'}",
        "trusted_soas = hospital_ADMIN",
        "listen = 127.0.0.1:0",
        f"upstream = http://127.0.0.1:{upstream_port}",
        f"audit_log = {tmp_path / 'audit.jsonl'}",
    ]
    conf.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return conf


@pytest.fixture
def gateway(tmp_path, stub_upstream):
    conf = write_gateway_conf(tmp_path, stub_upstream.port)
    gw = Gateway(load_gateway_config(conf))
    port = gw.start()
    yield gw, f"http://127.0.0.1:{port}", stub_upstream, tmp_path / "audit.jsonl"
    gw.stop()
