"""PIN/UV auth protocol v1 primitives and P-256 helpers.

Used by the authenticator and by every client (honest or not), so both ends
of the ceremony run the same code.  Tests check it against an independently
written oracle.
"""

import hashlib
import hmac as _hmac

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import decode_dss_signature
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.exceptions import InvalidSignature

CURVE = ec.SECP256R1()
CURVE_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551

COSE_ES256 = -7
COSE_ECDH_ES_HKDF_256 = -25
PIN_PADDED_LEN = 64
PIN_MIN_CHARS, PIN_MAX_CHARS = 4, 63


def scalar_from_seed(seed: bytes) -> bytes:
    # map arbitrary bytes onto [1, n-1]
    k = int.from_bytes(seed, "big") % (CURVE_ORDER - 1) + 1
    return k.to_bytes(32, "big")


def private_key(scalar: bytes) -> ec.EllipticCurvePrivateKey:
    return ec.derive_private_key(int.from_bytes(scalar, "big"), CURVE)


def random_scalar(rng) -> bytes:
    return scalar_from_seed(rng.randbytes(40))


def cose_public(pub: ec.EllipticCurvePublicKey, alg: int = COSE_ES256) -> dict:
    nums = pub.public_numbers()
    return {1: 2, 3: alg, -1: 1, -2: nums.x.to_bytes(32, "big"), -3: nums.y.to_bytes(32, "big")}


def public_from_cose(cose) -> ec.EllipticCurvePublicKey:
    if not isinstance(cose, dict) or cose.get(1) != 2 or cose.get(-1) != 1:
        raise ValueError("not an EC2 P-256 COSE key")
    x, y = cose.get(-2), cose.get(-3)
    if not (isinstance(x, bytes) and isinstance(y, bytes) and len(x) == len(y) == 32):
        raise ValueError("bad COSE coordinates")
    # from_encoded_point validates the point is on the curve
    return ec.EllipticCurvePublicKey.from_encoded_point(CURVE, b"\x04" + x + y)


def shared_secret(priv: ec.EllipticCurvePrivateKey, peer: ec.EllipticCurvePublicKey) -> bytes:
    return hashlib.sha256(priv.exchange(ec.ECDH(), peer)).digest()


def _cipher(key: bytes):
    return Cipher(algorithms.AES(key), modes.CBC(b"\x00" * 16))


def encrypt(key: bytes, data: bytes) -> bytes:
    if len(data) % 16:
        raise ValueError("plaintext must be block aligned")
    enc = _cipher(key).encryptor()
    return enc.update(data) + enc.finalize()


def decrypt(key: bytes, data: bytes) -> bytes:
    if not data or len(data) % 16:
        raise ValueError("ciphertext must be block aligned")
    dec = _cipher(key).decryptor()
    return dec.update(data) + dec.finalize()


def authenticate(key: bytes, message: bytes) -> bytes:
    return _hmac.new(key, message, hashlib.sha256).digest()[:16]


def verify_auth(key: bytes, message: bytes, tag) -> bool:
    return isinstance(tag, bytes) and _hmac.compare_digest(authenticate(key, message), tag)


def pin_hash(pin: str) -> bytes:
    return hashlib.sha256(pin.encode("utf-8")).digest()[:16]


def pad_pin(pin: str) -> bytes:
    raw = pin.encode("utf-8")
    if len(raw) >= PIN_PADDED_LEN:
        raise ValueError("PIN too long to pad")
    return raw + b"\x00" * (PIN_PADDED_LEN - len(raw))


def unpad_pin(padded: bytes) -> str:
    """Inverse of pad_pin; raises ValueError for anything that violates PIN policy."""
    if len(padded) < PIN_PADDED_LEN or len(padded) % 16:
        raise ValueError("padded PIN must be at least 64 bytes")
    raw = padded.rstrip(b"\x00")
    pin = raw.decode("utf-8")
    if not PIN_MIN_CHARS <= len(pin) <= PIN_MAX_CHARS or len(raw) > 63:
        raise ValueError("PIN length outside policy")
    return pin


def sign(scalar: bytes, data: bytes) -> bytes:
    return private_key(scalar).sign(data, ec.ECDSA(hashes.SHA256(), deterministic_signing=True))


def verify(pub: ec.EllipticCurvePublicKey, signature: bytes, data: bytes) -> bool:
    try:
        decode_dss_signature(signature)
        pub.verify(signature, data, ec.ECDSA(hashes.SHA256()))
    except (InvalidSignature, ValueError):
        return False
    return True


def mac(key: bytes, message: bytes) -> bytes:
    return _hmac.new(key, message, hashlib.sha256).digest()
