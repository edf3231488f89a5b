from .apdu import (
    Apdu,
    ApduResponse,
    BadStatusWord,
    BrokenChain,
    apdu_unwrap,
    apdu_wrap,
    collect_response,
    split_response,
)
from .ctaphid import (
    BROADCAST_CID,
    MAX_PAYLOAD,
    ChannelBusy,
    CtapHidFrame,
    FramingError,
    HidCommand,
    HidError,
    KeepaliveStatus,
    Reassembler,
    SeqGap,
    ctaphid_recv,
    ctaphid_send,
    keepalive_frame,
    parse_init_response,
)
from .devices import HidDevice, NfcDevice, keepalive_times
from .links import HidLink, NfcLink, TransportFailure
from .pipeline import Drop, Inject, MitmHook, Pass, Pipeline, PipelineError, Relay, Replace
from .trace import TransportFrame, TraceFormatError, format_trace, parse_trace_lines, write_trace


def emit_keepalive(channel_id: int, status: KeepaliveStatus) -> CtapHidFrame:
    return keepalive_frame(channel_id, status)


def ctaphid_init(device: HidDevice, channel: int = BROADCAST_CID) -> dict:
    return device.ctaphid_init(channel)


def open_channel(auth, transport: str, button=None, trace=None, seed=0, client_id="platform"):
    """Build device + link for one transport and bring the key up."""
    if transport == "usb":
        device = HidDevice(auth, button, seed)
        device.plug_in()
        link = HidLink(device, auth.clock, trace, seed)
        link.connect(client_id)
    elif transport == "nfc":
        device = NfcDevice(auth, button)
        link = NfcLink(device, auth.clock, trace)
        link.connect(client_id)
    else:
        raise ValueError(f"unknown transport {transport!r}")
    return device, link
