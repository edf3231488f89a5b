from . import pinproto
from .clock import LogicalClock
from .config import PROFILE_ORDER, PROFILES, AuthenticatorConfig, profile_config
from .device import (
    RESET_WINDOW_MS,
    UP_TIMEOUT_MS,
    USER_PRESS_MS,
    Authenticator,
    Denial,
    Outcome,
    Phase,
    is_destructive,
    rp_id_hash,
)
from .snapshot import SnapshotError
from .state import (
    AuthenticatorState,
    Credential,
    CredProtect,
    FeedbackEvent,
    PinState,
    PinUvToken,
    TokenScope,
    TransportContext,
    UpPrompt,
)
