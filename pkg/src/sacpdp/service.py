"""HTTP gateway: enforcement proxy, decision endpoint, live admin reloads.

The gateway sits in front of an upstream service.  Every request under /proxy/
is turned into an access request, decided against the active store, and only
forwarded upstream on Permit.  POST /pdp/decide answers wire requests directly.
PUT /admin/... swaps one document at a time; the whole assembly is revalidated
and the swap is atomic, so concurrent decisions always see one consistent
store version.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

import requests as _requests

from .bundle import Bundle, build_store, load_bundle, parse_kv_config
from .errors import ActivationError, ConfigError, SacError, UnknownPurposeError
from .ontology import ONTOLOGY_KINDS, AttributeDescriptor, load_ontology
from .pdp import Decision, DecisionValue, PolicyStore, activate_store, decide, explain
from .registry import KnowledgeBase, build_access_request, parse_registry
from .xmlio import (
    XacmlRequestDoc,
    parse_policy,
    parse_purposes,
    parse_xacml_request,
    response_doc_for,
    serialize_xacml_response,
)

# HTTP method to action concept, for requests arriving at the proxy.
METHOD_ACTIONS = {
    "GET": "read",
    "HEAD": "read",
    "POST": "write",
    "PUT": "write",
    "PATCH": "write",
    "DELETE": "delete",
}
FALLBACK_ACTION = "execute"


@dataclass(frozen=True)
class GatewayConfig:
    bundle: Bundle
    listen_host: str
    listen_port: int
    upstream: str
    audit_log: Path | None


def load_gateway_config(path: str | Path) -> GatewayConfig:
    """The gateway config is a bundle file with listen/upstream/audit_log keys."""
    path = Path(path)
    if path.is_dir():
        path = path / "bundle.conf"
    bundle = load_bundle(path)
    values = parse_kv_config(path)
    listen = values.get("listen", "127.0.0.1:8080")
    host, _, port_text = listen.rpartition(":")
    if not host:
        host, port_text = listen, "8080"
    try:
        port = int(port_text)
    except ValueError as exc:
        raise ConfigError(f"{path}: bad listen address {listen!r}") from exc
    upstream = values.get("upstream", "http://127.0.0.1:9000").rstrip("/")
    audit = (bundle.root / values["audit_log"]) if "audit_log" in values else None
    return GatewayConfig(
        bundle=bundle, listen_host=host, listen_port=port, upstream=upstream, audit_log=audit
    )


def _parse_attribute_header(raw: str) -> AttributeDescriptor:
    """``name; soa=...; e=enabled`` presented by the caller."""
    parts = [p.strip() for p in raw.split(";")]
    name = parts[0]
    if not name:
        raise ValueError(f"attribute header missing name: {raw!r}")
    soa = ""
    enabled = False
    for part in parts[1:]:
        if not part:
            continue
        key, _, value = part.partition("=")
        key, value = key.strip(), value.strip()
        if key == "soa":
            soa = value
        elif key == "e":
            enabled = value.lower() == "enabled"
        else:
            raise ValueError(f"unknown attribute header field {key!r}")
    return AttributeDescriptor(attribute_id=name, name=name, soa_id=soa, equivalence_enabled=enabled)


def _parse_context_header(raw: str) -> tuple[str, object]:
    """``key=value; type=int`` context values; type defaults to string."""
    head, _, tail = raw.partition(";")
    key, eq, value = head.partition("=")
    key, value = key.strip(), value.strip()
    if not eq or not key:
        raise ValueError(f"context header needs key=value: {raw!r}")
    kind = "string"
    if tail.strip():
        tkey, _, tvalue = tail.strip().partition("=")
        if tkey.strip() != "type":
            raise ValueError(f"unknown context header field {tkey.strip()!r}")
        kind = tvalue.strip()
    if kind == "int":
        return key, int(value)
    if kind == "decimal":
        return key, float(value)
    if kind == "bool":
        if value not in ("true", "false"):
            raise ValueError(f"bad bool context value {value!r}")
        return key, value == "true"
    if kind == "string":
        return key, value
    raise ValueError(f"unknown context value type {kind!r}")


class Gateway:
    """Holds the active (store, knowledge base) snapshot and the audit stream."""

    def __init__(self, config: GatewayConfig):
        self.config = config
        store, kb = build_store(config.bundle)
        # One tuple attribute so readers always see a matched pair.
        self._state: tuple[PolicyStore, KnowledgeBase] = (store, kb)
        self._swap_lock = threading.Lock()
        self._audit_lock = threading.Lock()
        self._audit_handle = None
        if config.audit_log is not None:
            config.audit_log.parent.mkdir(parents=True, exist_ok=True)
            self._audit_handle = open(config.audit_log, "a", encoding="utf-8")
        self._server: GatewayServer | None = None
        self._thread: threading.Thread | None = None

    # -- state ---------------------------------------------------------------

    def snapshot(self) -> tuple[PolicyStore, KnowledgeBase]:
        return self._state

    @property
    def version(self) -> int:
        return self._state[0].version

    def admin_load(self, slot: str, text: str) -> int:
        """Replace one document; revalidate everything; swap or reject whole.

        Returns the new store version.  Raises ActivationError with the full
        findings report when the candidate assembly does not validate; the
        previous state stays active in that case.
        """
        with self._swap_lock:
            store, kb = self._state
            graphs = dict(store.graphs)
            policy, purposes = store.policy, store.purposes
            new_kb = kb
            try:
                if slot == "policy":
                    policy = parse_policy(text, source="admin upload")
                elif slot in ONTOLOGY_KINDS:
                    graph = load_ontology(text)
                    if graph.kind != slot:
                        raise ActivationError(
                            [f"uploaded ontology declares kind {graph.kind}, expected {slot}"]
                        )
                    graphs[slot] = graph
                elif slot == "purposes":
                    purposes = parse_purposes(text)
                elif slot == "registry":
                    new_kb = parse_registry(text)
                else:
                    raise ActivationError([f"unknown admin slot {slot!r}"])
            except ActivationError:
                raise
            except SacError as exc:
                raise ActivationError([str(exc)]) from exc
            findings: list[str] = []
            try:
                candidate = activate_store(
                    policy, graphs, purposes, store.trusted_soas, version=store.version + 1
                )
            except ActivationError as exc:
                findings.extend(exc.findings)
                candidate = None
            findings.extend(new_kb.validate(graphs))
            if findings or candidate is None:
                raise ActivationError(findings or ["activation failed"])
            self._state = (candidate, new_kb)
            return candidate.version

    # -- audit ---------------------------------------------------------------

    def audit(self, record: dict) -> None:
        if self._audit_handle is None:
            return
        with self._audit_lock:
            self._audit_handle.write(json.dumps(record, sort_keys=True) + "\n")
            self._audit_handle.flush()

    # -- server lifecycle ----------------------------------------------------

    def start(self) -> int:
        """Bind and serve on a background thread; returns the bound port."""
        self._server = GatewayServer((self.config.listen_host, self.config.listen_port), self)
        # short poll so stop() returns promptly
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )
        self._thread.start()
        return self.bound_port

    @property
    def bound_port(self) -> int:
        if self._server is None:
            raise RuntimeError("gateway not started")
        return self._server.server_address[1]

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        if self._audit_handle is not None:
            self._audit_handle.close()
            self._audit_handle = None

    def serve_forever(self) -> None:
        """Foreground variant used by the command line."""
        self._server = GatewayServer((self.config.listen_host, self.config.listen_port), self)
        try:
            self._server.serve_forever()
        finally:
            self._server.server_close()


class GatewayServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], gateway: Gateway):
        self.gateway = gateway
        super().__init__(address, GatewayHandler)


class GatewayHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: GatewayServer

    def log_message(self, format: str, *args) -> None:  # noqa: A002
        pass  # decisions go to the audit log, not stderr

    # Every supported method funnels into one router.
    def do_GET(self) -> None:
        self._route("GET")

    def do_HEAD(self) -> None:
        self._route("HEAD")

    def do_POST(self) -> None:
        self._route("POST")

    def do_PUT(self) -> None:
        self._route("PUT")

    def do_PATCH(self) -> None:
        self._route("PATCH")

    def do_DELETE(self) -> None:
        self._route("DELETE")

    def do_OPTIONS(self) -> None:
        self._route("OPTIONS")

    # -- plumbing ------------------------------------------------------------

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _send(
        self,
        status: int,
        body: bytes,
        content_type: str = "text/plain; charset=utf-8",
        extra: dict | None = None,
    ) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        for key, value in (extra or {}).items():
            self.send_header(key, value)
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    def _route(self, method: str) -> None:
        parts = urlsplit(self.path)
        path = parts.path
        try:
            if path == "/healthz" and method in ("GET", "HEAD"):
                self._send(200, b"ok\n")
            elif path == "/admin/version" and method in ("GET", "HEAD"):
                body = json.dumps({"version": self.server.gateway.version}).encode() + b"\n"
                self._send(200, body, "application/json")
            elif path.startswith("/admin/") and method == "PUT":
                self._admin(path[len("/admin/") :])
            elif path == "/pdp/decide" and method == "POST":
                self._pdp_decide()
            elif path == "/proxy" or path.startswith("/proxy/"):
                self._proxy(method, parts)
            else:
                self._send(404, b"not found\n")
        except BrokenPipeError:  # client went away mid-response
            pass

    # -- endpoints -----------------------------------------------------------

    def _admin(self, slot: str) -> None:
        if slot.startswith("ontology/"):
            slot = slot[len("ontology/") :]
        if slot not in ("policy", "purposes", "registry") and slot not in ONTOLOGY_KINDS:
            self._send(404, f"unknown admin slot {slot!r}\n".encode())
            return
        try:
            text = self._body().decode("utf-8")
        except UnicodeDecodeError:
            self._send(400, b"body is not valid UTF-8\n")
            return
        try:
            version = self.server.gateway.admin_load(slot, text)
        except ActivationError as exc:
            report = "\n".join(exc.findings) + "\n"
            self._send(422, report.encode())
            return
        body = json.dumps({"version": version}).encode() + b"\n"
        self._send(200, body, "application/json")

    def _pdp_decide(self) -> None:
        gateway = self.server.gateway
        started = time.monotonic()
        store, kb = gateway.snapshot()
        try:
            wire = parse_xacml_request(self._body().decode("utf-8", errors="replace"))
        except SacError as exc:
            self._audit_error(gateway, None, None, None, None, started)
            self._send(400, f"{exc}\n".encode())
            return
        try:
            request, conflicts = build_access_request(wire, kb, store)
        except UnknownPurposeError as exc:
            self._audit_error(
                gateway, wire.subject_id, wire.resource_id, wire.action_id, wire.purpose_id, started
            )
            self._send(400, f"{exc}\n".encode())
            return
        decision = decide(store, request)
        self._audit_decision(gateway, request, decision, started, conflicts)
        doc = response_doc_for(decision)
        body = serialize_xacml_response(doc).encode("utf-8")
        self._send(200, body, "application/xml", {"X-Decision": decision.value.value})

    def _proxy(self, method: str, parts) -> None:
        gateway = self.server.gateway
        started = time.monotonic()
        store, kb = gateway.snapshot()
        object_id = parts.path[len("/proxy/") :] if parts.path.startswith("/proxy/") else ""
        query = parse_qs(parts.query)
        purpose = (query.get("purpose") or [self.headers.get("X-Purpose", "")])[0]
        subject_id = self.headers.get("X-Subject", "anonymous")
        action_id = METHOD_ACTIONS.get(method, FALLBACK_ACTION)
        body = self._body()

        problems: list[str] = []
        if not object_id:
            problems.append("no object named after /proxy/")
        if not purpose:
            problems.append("no purpose: pass ?purpose=... or an X-Purpose header")
        attrs = []
        environment: dict[str, object] = {}
        try:
            for raw in self.headers.get_all("X-Attribute") or []:
                attrs.append(_parse_attribute_header(raw))
            for raw in self.headers.get_all("X-Context") or []:
                key, value = _parse_context_header(raw)
                environment[key] = value
        except ValueError as exc:
            problems.append(str(exc))
        if problems:
            self._audit_error(gateway, subject_id, object_id or None, action_id, purpose or None, started)
            self._send(400, ("\n".join(problems) + "\n").encode())
            return

        wire = XacmlRequestDoc(
            subject_id=subject_id,
            subject_attributes=tuple(attrs),
            resource_id=object_id,
            action_id=action_id,
            purpose_id=purpose,
            environment=environment,
        )
        try:
            request, conflicts = build_access_request(wire, kb, store)
        except UnknownPurposeError as exc:
            self._audit_error(gateway, subject_id, object_id, action_id, purpose, started)
            self._send(400, f"{exc}\n".encode())
            return
        decision = decide(store, request)
        self._audit_decision(gateway, request, decision, started, conflicts)

        if decision.value is not DecisionValue.PERMIT:
            # masked refusals must be byte-exact "access denied", so no newline here
            self._send(
                403, explain(decision).encode(), extra={"X-Decision": decision.value.value}
            )
            return

        upstream_url = f"{gateway.config.upstream}/{object_id}"
        forward_headers = {
            k: v
            for k, v in self.headers.items()
            if k.lower() not in ("host", "connection", "content-length")
        }
        try:
            upstream = _requests.request(
                method,
                upstream_url,
                params=parts.query or None,
                data=body or None,
                headers=forward_headers,
                timeout=10,
            )
        except _requests.RequestException as exc:
            self._send(
                502,
                f"upstream unreachable: {exc}\n".encode(),
                extra={"X-Decision": "Permit"},
            )
            return
        content_type = upstream.headers.get("Content-Type", "application/octet-stream")
        self._send(
            upstream.status_code,
            upstream.content,
            content_type,
            {"X-Decision": "Permit"},
        )

    # -- audit records -------------------------------------------------------

    @staticmethod
    def _now() -> str:
        return datetime.now(timezone.utc).isoformat(timespec="milliseconds")

    def _audit_decision(self, gateway, request, decision: Decision, started, conflicts) -> None:
        record = {
            "ts": self._now(),
            "subject": request.subject_id,
            "object": request.object_id,
            "action": request.action.id,
            "purpose": request.purpose,
            "decision": decision.value.value,
            "masked": decision.masked,
            "matched_rule": None if decision.masked else decision.matched_rule,
            "latency_ms": round((time.monotonic() - started) * 1000, 3),
        }
        if conflicts:
            record["conflicts"] = list(conflicts)
        gateway.audit(record)

    def _audit_error(self, gateway, subject, obj, action, purpose, started) -> None:
        gateway.audit(
            {
                "ts": self._now(),
                "subject": subject,
                "object": obj,
                "action": action,
                "purpose": purpose,
                "decision": "error",
                "masked": False,
                "matched_rule": None,
                "latency_ms": round((time.monotonic() - started) * 1000, 3),
            }
        )
