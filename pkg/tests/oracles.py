"""Independent reference models the tests compare the implementation against.

Nothing here imports ctaplab logic: each model is re-derived from the protocol
rules directly, so a shared bug cannot make both sides agree.
"""

from dataclasses import dataclass, replace

# -- PIN lockout ----------------------------------------------------------------

MAX_RETRIES = 8
SOFT_AFTER = 3


@dataclass(frozen=True)
class PinModel:
    """Lock state after a sequence of W (wrong), R (right) and P (power cycle)."""
    failures: int = 0
    consecutive: int = 0
    soft: bool = False
    hard: bool = False

    @property
    def retries(self) -> int:
        return MAX_RETRIES - self.failures

    def step(self, move: str):
        """Returns (next model, expected status name or None for a power cycle)."""
        if move == "P":
            return replace(self, consecutive=0, soft=False), None
        if self.hard:
            return self, "PIN_BLOCKED"
        if self.soft:
            return self, "PIN_AUTH_BLOCKED"
        if move == "R":
            return replace(self, consecutive=0), "OK"
        nxt = replace(self, failures=self.failures + 1, consecutive=self.consecutive + 1)
        if nxt.failures >= MAX_RETRIES:
            return replace(nxt, hard=True), "PIN_BLOCKED"
        if nxt.consecutive >= SOFT_AFTER:
            return replace(nxt, soft=True), "PIN_AUTH_BLOCKED"
        return nxt, "PIN_INVALID"


# -- API confusion ----------------------------------------------------------------

APIS = ["MC", "GA", "CM", "CP", "Re", "Se", "GI"]   # rows, API A
COLUMNS = ["CM", "Re", "GA", "MC", "CP", "Se", "GI"]  # columns, API B

# Per-API flags: (needs UV, needs UP) for a call to do its job.
# ClientPin, Selection and GetInfo do their job (key agreement, blinking,
# returning info) with neither; GetAssertion checks UP only as a formality
# the attacker can switch off with up=false.
API_AUTH = {
    "MC": (True, True),
    "GA": (True, False),
    "CM": (True, False),
    "CP": (False, False),
    "Re": (False, True),
    "Se": (False, False),
    "GI": (False, False),
}
# what the user hands over while running the honest flow for each API
FLOW_HANDS_OVER = {
    "MC": (True, True),
    "GA": (True, True),
    "CM": (True, False),
    "CP": (True, False),
    "Re": (False, True),
    "Se": (False, True),
    "GI": (False, False),
}


def confusion_cell(a: str, b: str, nfc: bool, weak: bool) -> bool:
    """Can the attacker run b inside the user's flow for a?"""
    if a == b:
        return False
    uv_need, up_need = API_AUTH[b]
    if b == "GA" and weak:
        uv_need = False
    uv_have, up_have = FLOW_HANDS_OVER[a]
    up_have = up_have or nfc
    return (uv_have or not uv_need) and (up_have or not up_need)


def confusion_totals(nfc: bool, weak: bool):
    return [sum(confusion_cell(a, b, nfc, weak) for a in APIS) for b in COLUMNS]


# -- framing arithmetic ----------------------------------------------------------------

HID_INIT_DATA = 64 - 7
HID_CONT_DATA = 64 - 5
APDU_CHUNK = 255


def hid_frame_count(n: int) -> int:
    if n <= HID_INIT_DATA:
        return 1
    rest = n - HID_INIT_DATA
    return 1 + -(-rest // HID_CONT_DATA)


def apdu_count(n: int) -> int:
    return max(1, -(-n // APDU_CHUNK))


# -- P-256 ECDH and AES-CBC, written out by hand ----------------------------------------

P256_P = 2**256 - 2**224 + 2**192 + 2**96 - 1
P256_A = P256_P - 3
P256_G = (0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296,
          0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5)


def _ec_add(p, q):
    if p is None:
        return q
    if q is None:
        return p
    (x1, y1), (x2, y2) = p, q
    if x1 == x2 and (y1 + y2) % P256_P == 0:
        return None
    if p == q:
        lam = (3 * x1 * x1 + P256_A) * pow(2 * y1, -1, P256_P)
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, P256_P)
    x3 = (lam * lam - x1 - x2) % P256_P
    return x3, (lam * (x1 - x3) - y1) % P256_P


def ec_mul(k: int, point):
    acc = None
    while k:
        if k & 1:
            acc = _ec_add(acc, point)
        point = _ec_add(point, point)
        k >>= 1
    return acc


def ecdh_shared(scalar: int, peer_xy) -> bytes:
    """PIN protocol v1 shared secret: SHA-256 of the x coordinate."""
    import hashlib
    x, _ = ec_mul(scalar, peer_xy)
    return hashlib.sha256(x.to_bytes(32, "big")).digest()


def aes_cbc_decrypt_zero_iv(key: bytes, data: bytes) -> bytes:
    from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
    ecb = Cipher(algorithms.AES(key), modes.ECB()).decryptor()
    out, prev = b"", b"\x00" * 16
    for i in range(0, len(data), 16):
        block = data[i:i + 16]
        plain = ecb.update(block)
        out += bytes(a ^ b for a, b in zip(plain, prev))
        prev = block
    return out
