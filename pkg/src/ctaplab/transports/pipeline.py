"""Client <-> [MitM hook] <-> authenticator pipeline.

Hooks work on decoded messages.  The pipeline decodes what the client sent,
asks the hook what to do, re-encodes whatever reaches the device and records
both legs: ``trace`` is the device leg (what the authenticator saw),
``client_trace`` is the client leg (what the honest client saw).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Generator, Optional

from ..codec import CtapRequest, CtapResponse, Status, cbor, decode_request, decode_response
from ..codec.messages import encode_request, encode_response
from . import apdu as ap
from .ctaphid import HidCommand, ctaphid_send
from .trace import TransportFrame


class PipelineError(RuntimeError):
    """A message could not be decoded on its way through the pipeline."""


@dataclass
class Pass:
    pass


@dataclass
class Replace:
    request: CtapRequest


@dataclass
class Inject:
    """Run a generator against the device: ``resp = yield req``; its return
    value is the response handed to the client."""
    steps: Generator


@dataclass
class Drop:
    status: Status = Status.TIMEOUT


@dataclass
class Relay:
    """Yield this from an Inject generator to forward a request under the
    honest client's identity (an untouched relay)."""
    request: CtapRequest


class MitmHook:
    client_id = "attacker-device"

    def intercept(self, req: CtapRequest, pipeline: "Pipeline"):
        return Pass()

    def response_filter(self, req: CtapRequest, resp: CtapResponse) -> CtapResponse:
        return resp


class Pipeline:
    def __init__(self, link, hook: Optional[MitmHook] = None, client_id: str = "platform"):
        self.link = link
        self.hook = hook
        self.client_id = client_id
        self.client_trace: list[TransportFrame] = []
        self.device_log: list[tuple[CtapRequest, CtapResponse, str]] = []

    @property
    def transport(self) -> str:
        return self.link.transport

    @property
    def trace(self) -> list:
        return self.link.trace

    @property
    def clock(self):
        return self.link.clock

    def to_device(self, req: CtapRequest, client_id: Optional[str] = None) -> CtapResponse:
        cid = client_id or self.client_id
        raw = self.link.transact(encode_request(req), cid)
        try:
            resp = decode_response(raw)
        except (ValueError, cbor.CborError) as exc:
            raise PipelineError(f"undecodable response: {exc}") from exc
        self.device_log.append((req, resp, cid))
        return resp

    def exchange(self, req: CtapRequest) -> CtapResponse:
        if self.hook is None:
            return self.to_device(req)
        data = encode_request(req)
        self._record_client("c2a", data)
        try:
            req = decode_request(data)
        except (ValueError, cbor.CborError) as exc:
            raise PipelineError(f"client sent an undecodable request: {exc}") from exc
        action = self.hook.intercept(req, self)
        if isinstance(action, Pass):
            resp = self.to_device(req)
        elif isinstance(action, Replace):
            resp = self.to_device(action.request, self.hook.client_id)
        elif isinstance(action, Drop):
            resp = CtapResponse(action.status)
        elif isinstance(action, Inject):
            resp = self._run(action.steps)
        else:
            raise TypeError(f"hook returned {action!r}")
        resp = self.hook.response_filter(req, resp)
        self._record_client("a2c", encode_response(resp))
        return resp

    def _run(self, gen) -> CtapResponse:
        try:
            step = next(gen)
            while True:
                if isinstance(step, Relay):
                    out = self.to_device(step.request)
                else:
                    out = self.to_device(step, self.hook.client_id)
                step = gen.send(out)
        except StopIteration as stop:
            if not isinstance(stop.value, CtapResponse):
                raise TypeError("Inject generator must return a CtapResponse") from None
            return stop.value

    def _record_client(self, direction: str, data: bytes):
        t = self.clock.now
        if self.transport == "usb":
            cid = getattr(self.link, "cid", None) or 0
            units = [f.to_bytes() for f in ctaphid_send(cid, data, HidCommand.CBOR)]
        elif direction == "c2a":
            units = [a.to_bytes() for a in ap.apdu_wrap(data)]
        else:
            units = [r.to_bytes() for r in ap.split_response(data)]
        for u in units:
            self.client_trace.append(TransportFrame(t, self.transport, direction, u))
