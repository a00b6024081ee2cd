"""Binary command/response framing for the device serial link.

Frame layout, all multi-byte payload fields little-endian:

    [0xA5 sync] [1B opcode] [2B length LE] [payload ...] [2B CRC]

The CRC is CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection,
no final xor; check("123456789") == 0x29B1) computed over opcode, length
and payload, and transmitted big-endian.  docs/protocol.md has a worked
example.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .errors import FrameError

SYNC = 0xA5
MAX_PAYLOAD = 0xFFFF
_OVERHEAD = 6  # sync + opcode + length + crc


class Opcode(IntEnum):
    # host -> device
    SET_MODE = 0x01
    READ_RECORD = 0x02
    READ_MEM = 0x03
    FORMAT_MEM = 0x04
    WRITE_SETTINGS = 0x05
    READ_SETTINGS = 0x06
    STATUS = 0x07
    # device -> host
    ACK = 0x80
    NAK = 0x81
    RECORD_DATA = 0x82
    SETTINGS_DATA = 0x83
    STATUS_DATA = 0x84


class NakCode(IntEnum):
    UNKNOWN_OPCODE = 0x01
    WRONG_MODE = 0x02
    BAD_PAYLOAD = 0x03
    NO_DATA = 0x04


def _build_crc_table(poly: int = 0x1021) -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ poly) if crc & 0x8000 else (crc << 1)
        table.append(crc & 0xFFFF)
    return tuple(table)


_CRC_TABLE = _build_crc_table()


def crc16_ccitt_false(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE over `data`; pass a previous result to continue."""
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[((crc >> 8) ^ byte) & 0xFF]
    return crc


@dataclass(frozen=True)
class Frame:
    """One decoded link frame: opcode plus opaque payload bytes."""

    opcode: int
    payload: bytes = b""

    def encode(self) -> bytes:
        if not 0 <= self.opcode <= 0xFF:
            raise FrameError(f"opcode {self.opcode} out of range")
        if len(self.payload) > MAX_PAYLOAD:
            raise FrameError(f"payload too long: {len(self.payload)}")
        body = bytes([self.opcode]) + len(self.payload).to_bytes(2, "little") + self.payload
        return bytes([SYNC]) + body + crc16_ccitt_false(body).to_bytes(2, "big")

    @classmethod
    def decode(cls, buf: bytes) -> "Frame":
        """Decode exactly one frame; raises FrameError on any defect."""
        frame, consumed = cls.decode_prefix(buf)
        if consumed != len(buf):
            raise FrameError(f"{len(buf) - consumed} trailing byte(s) after frame")
        return frame

    @classmethod
    def decode_prefix(cls, buf: bytes) -> tuple["Frame", int]:
        """Decode one frame from the head of `buf`; returns (frame, bytes used)."""
        if len(buf) < _OVERHEAD:
            raise FrameError(f"buffer too short for a frame: {len(buf)} bytes")
        if buf[0] != SYNC:
            raise FrameError(f"bad sync byte 0x{buf[0]:02X}")
        length = int.from_bytes(buf[2:4], "little")
        end = _OVERHEAD + length
        if len(buf) < end:
            raise FrameError(f"truncated frame: need {end} bytes, have {len(buf)}")
        body = buf[1:4 + length]
        received = int.from_bytes(buf[4 + length:end], "big")
        computed = crc16_ccitt_false(body)
        if received != computed:
            raise FrameError(
                f"CRC mismatch: received 0x{received:04X}, computed 0x{computed:04X}"
            )
        return cls(opcode=buf[1], payload=bytes(buf[4:4 + length])), end


def iter_frames(buf: bytes):
    """Yield consecutive frames from a back-to-back stream (e.g. a memory dump).

    Raises FrameError (with the byte offset in the message) on the first
    defect; bytes before the defect have already been yielded.
    """
    offset = 0
    while offset < len(buf):
        try:
            frame, used = Frame.decode_prefix(buf[offset:])
        except FrameError as exc:
            raise FrameError(f"at byte {offset}: {exc}") from exc
        yield frame
        offset += used


class FrameParser:
    """Incremental parser with resynchronization for a noisy byte stream.

    Garbage before a sync byte is skipped; a sync byte that does not start
    a valid frame (bad CRC or malformed header once enough bytes arrived)
    is skipped too, and `error_count` is incremented once per such defect.
    """

    def __init__(self):
        self._buf = bytearray()
        self.error_count = 0

    @property
    def pending(self) -> int:
        """Bytes buffered but not yet consumed by a complete frame."""
        return len(self._buf)

    def feed(self, data: bytes) -> list[Frame]:
        self._buf.extend(data)
        frames: list[Frame] = []
        while True:
            sync_at = self._buf.find(SYNC)
            if sync_at < 0:
                if self._buf:
                    self.error_count += 1
                    self._buf.clear()
                break
            if sync_at > 0:
                del self._buf[:sync_at]
                self.error_count += 1
            if len(self._buf) < _OVERHEAD:
                break
            length = int.from_bytes(self._buf[2:4], "little")
            end = _OVERHEAD + length
            if len(self._buf) < end:
                break
            try:
                frame, used = Frame.decode_prefix(bytes(self._buf[:end]))
            except FrameError:
                # skip this sync byte and rescan from the next
                del self._buf[:1]
                self.error_count += 1
                continue
            frames.append(frame)
            del self._buf[:used]
        return frames
