from . import cbor
from .cbor import CborError, MalformedCbor, NonCanonical, decode_canonical, encode_canonical
from .constants import (
    BY_SHORT_NAME,
    SHORT_NAMES,
    ClientPinSub,
    Command,
    Countermeasure,
    CredMgmtSub,
    GetAssertionSub,
    Status,
)
from .messages import (
    CtapRequest,
    CtapResponse,
    InvalidMessage,
    UnknownCommand,
    UnknownStatus,
    UnknownSubcommand,
    decode_request,
    decode_response,
    encode_request,
    encode_response,
)
