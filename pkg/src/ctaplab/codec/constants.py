"""Command, subcommand and status codes shared by the codec and the dissector.

Byte values follow the public CTAP2.1 tables.  ``CLIENT_NOT_TRUSTED`` and
``RATE_LIMITED`` live in the vendor-specific range (0xF0-0xFF) because they
only exist when the lab's countermeasure toggles are switched on.
"""

from enum import Enum, IntEnum


class Command(IntEnum):
    MAKE_CREDENTIAL = 0x01
    GET_ASSERTION = 0x02
    GET_INFO = 0x04
    CLIENT_PIN = 0x06
    RESET = 0x07
    CREDENTIAL_MANAGEMENT = 0x0A
    SELECTION = 0x0B

    @property
    def short(self) -> str:
        return SHORT_NAMES[self]


GET_NEXT_ASSERTION_BYTE = 0x08

SHORT_NAMES = {
    Command.MAKE_CREDENTIAL: "MC",
    Command.GET_ASSERTION: "GA",
    Command.CREDENTIAL_MANAGEMENT: "CM",
    Command.CLIENT_PIN: "CP",
    Command.RESET: "Re",
    Command.SELECTION: "Se",
    Command.GET_INFO: "GI",
}
BY_SHORT_NAME = {v: k for k, v in SHORT_NAMES.items()}

# Column order of the published confusion table.
TABLE_ORDER = ["CM", "Re", "GA", "MC", "CP", "Se", "GI"]
ROW_ORDER = ["MC", "GA", "CM", "CP", "Re", "Se", "GI"]

PARAMETERLESS = frozenset({Command.RESET, Command.SELECTION, Command.GET_INFO})


class GetAssertionSub(IntEnum):
    GET_NEXT_ASSERTION = 0x08


class ClientPinSub(IntEnum):
    GET_RETRIES = 0x01
    KEY_AGREEMENT = 0x02
    SET_PIN = 0x03
    CHANGE_PIN = 0x04
    GET_PIN_TOKEN = 0x05


class CredMgmtSub(IntEnum):
    GET_CREDS_METADATA = 0x01
    ENUM_RPS_BEGIN = 0x02
    ENUM_RPS_GET_NEXT_RP = 0x03
    ENUM_CREDS_BEGIN = 0x04
    ENUM_CREDS_GET_NEXT = 0x05
    DELETE_CREDENTIAL = 0x06


# Map key carrying the subcommand inside the parameter map.
SUBCOMMAND_KEY = {
    Command.CLIENT_PIN: 0x02,
    Command.CREDENTIAL_MANAGEMENT: 0x01,
}
SUBCOMMAND_ENUM = {
    Command.CLIENT_PIN: ClientPinSub,
    Command.CREDENTIAL_MANAGEMENT: CredMgmtSub,
    Command.GET_ASSERTION: GetAssertionSub,
}


class Status(IntEnum):
    OK = 0x00
    INVALID_COMMAND = 0x01
    INVALID_PARAMETER = 0x02
    INVALID_LENGTH = 0x03
    INVALID_SEQ = 0x04
    TIMEOUT = 0x05
    CHANNEL_BUSY = 0x06
    LOCK_REQUIRED = 0x0A
    INVALID_CHANNEL = 0x0B
    CBOR_UNEXPECTED_TYPE = 0x11
    INVALID_CBOR = 0x12
    MISSING_PARAMETER = 0x14
    LIMIT_EXCEEDED = 0x15
    CREDENTIAL_EXCLUDED = 0x19
    PROCESSING = 0x21
    INVALID_CREDENTIAL = 0x22
    USER_ACTION_PENDING = 0x23
    OPERATION_PENDING = 0x24
    NO_OPERATIONS = 0x25
    UNSUPPORTED_ALGORITHM = 0x26
    OPERATION_DENIED = 0x27
    KEY_STORE_FULL = 0x28
    UNSUPPORTED_OPTION = 0x2B
    INVALID_OPTION = 0x2C
    KEEPALIVE_CANCEL = 0x2D
    NO_CREDENTIALS = 0x2E
    USER_ACTION_TIMEOUT = 0x2F
    NOT_ALLOWED = 0x30
    PIN_INVALID = 0x31
    PIN_BLOCKED = 0x32
    PIN_AUTH_INVALID = 0x33
    PIN_AUTH_BLOCKED = 0x34
    PIN_NOT_SET = 0x35
    PIN_REQUIRED = 0x36
    PIN_POLICY_VIOLATION = 0x37
    REQUEST_TOO_LARGE = 0x39
    ACTION_TIMEOUT = 0x3A
    UP_REQUIRED = 0x3B
    UV_BLOCKED = 0x3C
    INTEGRITY_FAILURE = 0x3D
    INVALID_SUBCOMMAND = 0x3E
    UV_INVALID = 0x3F
    UNAUTHORIZED_PERMISSION = 0x40
    OTHER = 0x7F
    CLIENT_NOT_TRUSTED = 0xF0
    RATE_LIMITED = 0xF1


# Statuses that mean "the caller lacked an authorization", as opposed to
# malformed input or an empty store.
AUTHORIZATION_ERRORS = frozenset({
    Status.PIN_REQUIRED,
    Status.PIN_AUTH_INVALID,
    Status.PIN_INVALID,
    Status.PIN_BLOCKED,
    Status.PIN_AUTH_BLOCKED,
    Status.PIN_NOT_SET,
    Status.UP_REQUIRED,
    Status.USER_ACTION_TIMEOUT,
    Status.OPERATION_DENIED,
    Status.NOT_ALLOWED,
    Status.CLIENT_NOT_TRUSTED,
    Status.RATE_LIMITED,
    Status.UNAUTHORIZED_PERMISSION,
})


class Countermeasure(str, Enum):
    C1 = "C1"  # trusted CTAP clients only
    C2 = "C2"  # LED feedback per API call
    C3 = "C3"  # button press required for UP over NFC
    C4 = "C4"  # separate PIN for destructive calls
    C5 = "C5"  # rotating CredId / UserId
    C6 = "C6"  # Reset requires UV
    C7 = "C7"  # CredMgmt deletion requires UP per call
    C8 = "C8"  # Selection rate limit

    def __str__(self) -> str:
        return self.value


def parse_countermeasures(names) -> frozenset:
    return frozenset(Countermeasure(str(n).upper()) for n in names)
