from . import client
from .client import CtapError
from .relying_party import (
    AssertionRecord,
    CredentialKind,
    CredentialRecord,
    RelyingParty,
    RelyingPartyTemplate,
    builtin_templates,
    load_templates,
    template,
)
from .session import ClientSession, FlowDeclined, enumerate_credentials
from .user import Alarm, FlowExpectation, UserModel, expectation
from .world import World
