"""A deterministic user who only authorizes what the flow they started would need.

The user cannot see which API asked for a touch or a PIN; they only know which
flow they started in the client UI and how many prompts that flow normally
produces.  Anything beyond that is declined, and usually logged as an alarm.
"""

from __future__ import annotations

from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class FlowExpectation:
    name: str
    uv: bool = False
    max_up_grants: int = 0
    # short API name -> how many calls the flow makes (None = any number)
    calls: dict = field(default_factory=dict)
    destructive: bool = False


def expectation(name: str, uv=False, up=0, destructive=False, **calls) -> FlowExpectation:
    return FlowExpectation(name, uv, up, dict(calls), destructive)


# What each honest flow looks like from the user's chair.
FLOW_REGISTER = expectation("register", uv=True, up=1, CP=2, MC=1)
FLOW_LOGIN_UV = expectation("authenticate", uv=True, up=1, CP=2, GA=1)
FLOW_LOGIN = expectation("authenticate", up=1, GA=1)
FLOW_MANAGE = expectation("manage", uv=True, CP=2, CM=None, destructive=True)
FLOW_VERIFY_PIN = expectation("verify-pin", uv=True, CP=2)
FLOW_SET_PIN = expectation("set-pin", CP=None)
FLOW_RESET = expectation("reset", up=1, Re=1, destructive=True)
FLOW_RESET_UV = expectation("reset", uv=True, up=1, CP=2, Re=1, destructive=True)
FLOW_SELECTION = expectation("selection", up=1, Se=1)
FLOW_INFO = expectation("info", GI=1)


@dataclass
class Alarm:
    kind: str  # "uv", "up" or "feedback"
    detail: str
    flow: Optional[str]
    at: Optional[int] = None


class UserModel:
    def __init__(self, pin: str = "1234", destructive_pin: Optional[str] = None,
                 present: bool = True, holding: bool = True, clock=None):
        self.pin = pin
        self.destructive_pin = destructive_pin
        self.present = present
        self.holding = holding  # can see the LED
        self.clock = clock
        self.alarm_log: list[Alarm] = []
        self.observed_feedback: list = []
        self.active: Optional[FlowExpectation] = None
        self.up_used = 0
        self.uv_used = 0
        self.up_grants_total = 0
        self.uv_grants_total = 0
        self.max_up_in_flow = 0
        self._seen = Counter()

    def _now(self):
        return self.clock.now if self.clock is not None else None

    def _alarm(self, kind, detail):
        flow = self.active.name if self.active else None
        self.alarm_log.append(Alarm(kind, detail, flow, self._now()))

    # -- flows ---------------------------------------------------------------

    def begin_flow(self, exp: FlowExpectation):
        self.active = exp
        self.up_used = self.uv_used = 0
        self._seen = Counter()

    def end_flow(self):
        self.active = None

    @contextmanager
    def flow(self, exp: FlowExpectation):
        self.begin_flow(exp)
        try:
            yield self
        finally:
            self.end_flow()

    # -- authorization ---------------------------------------------------------

    def user_grant(self, kind: str, requested_by_flow: Optional[str] = None, detail: str = "") -> bool:
        if not self.present:
            return False
        exp = self.active
        if exp is None:
            # nothing was started: an unsolicited PIN dialog is alarming,
            # a blinking key is just ignored
            if kind == "uv":
                self._alarm("uv", f"PIN requested while idle {detail}".strip())
            return False
        if requested_by_flow is not None and requested_by_flow != exp.name:
            self._alarm(kind, f"{kind} requested by {requested_by_flow} during {exp.name}")
            return False
        if kind == "uv":
            if not exp.uv:
                self._alarm("uv", f"PIN requested during {exp.name}")
                return False
            if self.uv_used >= 1:
                self._alarm("uv", f"second PIN request during {exp.name}")
                return False
            self.uv_used += 1
            self.uv_grants_total += 1
            return True
        if exp.max_up_grants == 0:
            return False
        if self.up_used >= exp.max_up_grants:
            self._alarm("up", f"extra touch requested during {exp.name}")
            return False
        self.up_used += 1
        self.up_grants_total += 1
        self.max_up_in_flow = max(self.max_up_in_flow, self.up_used)
        return True

    def up_granter(self, prompt) -> bool:
        return self.user_grant("up", None, getattr(prompt, "api", ""))

    # -- C2 feedback ---------------------------------------------------------

    def observe(self, event):
        """LED feedback listener; only noticed while holding the key."""
        self.observed_feedback.append(event)
        if not (self.present and self.holding):
            return
        exp = self.active
        if exp is None:
            self._alarm("feedback", f"key blinked for {event.api} while idle")
            return
        if event.blinks >= 2 and not exp.destructive:
            self._alarm("feedback", f"destructive blink ({event.detail}) during {exp.name}")
            return
        self._seen[event.api] += 1
        limit = exp.calls.get(event.api, 0)
        if limit is not None and self._seen[event.api] > limit:
            self._alarm("feedback", f"unexpected {event.detail} during {exp.name}")

    @property
    def stealthy(self) -> bool:
        return not self.alarm_log
