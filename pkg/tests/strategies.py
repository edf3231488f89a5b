"""Hypothesis strategies shared by the codec, framing and acceptance tests."""

from hypothesis import strategies as st

from ctaplab.codec import ClientPinSub, Command, CredMgmtSub, CtapRequest, CtapResponse, Status
from ctaplab.codec.constants import GetAssertionSub

cbor_ints = st.integers(min_value=-(1 << 64), max_value=(1 << 64) - 1)
cbor_keys = st.one_of(cbor_ints, st.text(max_size=12))
cbor_scalars = st.one_of(
    cbor_ints, st.binary(max_size=40), st.text(max_size=20), st.booleans(), st.none()
)

cbor_values = st.recursive(
    cbor_scalars,
    lambda children: st.one_of(
        st.lists(children, max_size=5),
        st.dictionaries(cbor_keys, children, max_size=5),
    ),
    max_leaves=20,
)

cbor_maps = st.dictionaries(cbor_keys, cbor_values, max_size=6)
uint_keyed_maps = st.dictionaries(st.integers(0, 1000), cbor_values, max_size=6)


@st.composite
def ctap_requests(draw):
    command = draw(st.sampled_from(list(Command)))
    if command in (Command.RESET, Command.SELECTION, Command.GET_INFO):
        return CtapRequest(command)
    if command is Command.GET_ASSERTION and draw(st.booleans()):
        return CtapRequest(command, None, GetAssertionSub.GET_NEXT_ASSERTION)
    params = draw(uint_keyed_maps)
    if command is Command.CLIENT_PIN:
        return CtapRequest.build(command, params, draw(st.sampled_from(list(ClientPinSub))))
    if command is Command.CREDENTIAL_MANAGEMENT:
        return CtapRequest.build(command, params, draw(st.sampled_from(list(CredMgmtSub))))
    if not params:
        params = {1: draw(cbor_values)}
    return CtapRequest(command, params)


@st.composite
def ctap_responses(draw):
    status = draw(st.sampled_from(list(Status)))
    if status is Status.OK and draw(st.booleans()):
        return CtapResponse(status, draw(uint_keyed_maps))
    return CtapResponse(status)


# -- plain seeded generators ----------------------------------------------------------------------
# Hypothesis spends ~10 ms drawing one nested value; the 10k-sample acceptance
# runs use these instead, mirroring the strategies above.

def random_int(rng):
    bits = rng.choice((5, 8, 16, 32, 64))
    n = rng.getrandbits(bits)
    return n if rng.random() < 0.5 else -1 - n


def random_scalar(rng):
    kind = rng.randrange(5)
    if kind == 0:
        return random_int(rng)
    if kind == 1:
        return rng.randbytes(rng.randrange(41))
    if kind == 2:
        return "".join(chr(rng.choice((rng.randrange(32, 127), rng.randrange(0xA0, 0x3000))))
                       for _ in range(rng.randrange(21)))
    if kind == 3:
        return rng.random() < 0.5
    return None


def random_key(rng):
    if rng.random() < 0.5:
        return random_int(rng)
    return "".join(chr(rng.randrange(97, 123)) for _ in range(rng.randrange(13)))


def random_cbor(rng, depth=3):
    if depth == 0 or rng.random() < 0.5:
        return random_scalar(rng)
    if rng.random() < 0.5:
        return [random_cbor(rng, depth - 1) for _ in range(rng.randrange(6))]
    return {random_key(rng): random_cbor(rng, depth - 1) for _ in range(rng.randrange(6))}


def random_uint_map(rng):
    return {rng.randrange(1001): random_cbor(rng, 2) for _ in range(rng.randrange(7))}


def random_request(rng):
    command = rng.choice(list(Command))
    if command in (Command.RESET, Command.SELECTION, Command.GET_INFO):
        return CtapRequest(command)
    if command is Command.GET_ASSERTION and rng.random() < 0.5:
        return CtapRequest(command, None, GetAssertionSub.GET_NEXT_ASSERTION)
    params = random_uint_map(rng)
    if command is Command.CLIENT_PIN:
        return CtapRequest.build(command, params, rng.choice(list(ClientPinSub)))
    if command is Command.CREDENTIAL_MANAGEMENT:
        return CtapRequest.build(command, params, rng.choice(list(CredMgmtSub)))
    return CtapRequest(command, params or {1: random_cbor(rng)})


def random_response(rng):
    status = rng.choice(list(Status))
    if status is Status.OK and rng.random() < 0.5:
        return CtapResponse(status, random_uint_map(rng))
    return CtapResponse(status)
