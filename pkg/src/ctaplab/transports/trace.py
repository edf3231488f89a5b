"""Transport frames and the one-line-per-frame trace format:

    <timestamp-ms> <usb|nfc> <c2a|a2c> <hex-bytes>
"""

from dataclasses import dataclass
from pathlib import Path

DIRECTIONS = ("c2a", "a2c")


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TransportFrame:
    timestamp: int
    transport: str
    direction: str  # c2a = to authenticator, a2c = to client
    raw: bytes

    def to_line(self) -> str:
        return f"{self.timestamp} {self.transport} {self.direction} {self.raw.hex()}"

    @classmethod
    def from_line(cls, line: str) -> "TransportFrame":
        parts = line.split()
        if len(parts) != 4:
            raise TraceFormatError(f"expected 4 fields, got {len(parts)}")
        ts, transport, direction, hexdata = parts
        if not ts.isdigit():
            raise TraceFormatError(f"bad timestamp {ts!r}")
        if transport not in ("usb", "nfc"):
            raise TraceFormatError(f"bad transport {transport!r}")
        if direction not in DIRECTIONS:
            raise TraceFormatError(f"bad direction {direction!r}")
        try:
            raw = bytes.fromhex(hexdata)
        except ValueError:
            raise TraceFormatError("bad hex payload") from None
        return cls(int(ts), transport, direction, raw)


def format_trace(frames) -> str:
    return "".join(f.to_line() + "\n" for f in frames)


def write_trace(frames, path) -> None:
    Path(path).write_text(format_trace(frames), encoding="utf-8")


def parse_trace_lines(lines):
    """Yields (line number, TransportFrame or TraceFormatError); blank lines skipped."""
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            yield n, TransportFrame.from_line(line)
        except TraceFormatError as exc:
            yield n, exc
