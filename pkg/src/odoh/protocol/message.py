"""The on-wire encrypted envelope.

    +--------------+----------------------+------------------------------+
    | type (1B)    | key id (u16 + bytes) | encrypted message (u16 + b.) |
    +--------------+----------------------+------------------------------+

type 0x01 carries a sealed query (key id = 32-byte digest, encrypted
message = enc || ct); type 0x02 carries a sealed answer (empty key id,
encrypted message = AEAD ciphertext).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import MalformedMessageError

MESSAGE_TYPE_QUERY = 0x01
MESSAGE_TYPE_RESPONSE = 0x02


@dataclass(frozen=True)
class ObliviousMessage:
    message_type: int
    key_id: bytes
    encrypted_message: bytes


def serialize_message(msg: ObliviousMessage) -> bytes:
    return (
        struct.pack(">BH", msg.message_type, len(msg.key_id))
        + msg.key_id
        + struct.pack(">H", len(msg.encrypted_message))
        + msg.encrypted_message
    )


def parse_message(data: bytes) -> ObliviousMessage:
    if len(data) < 5:
        raise MalformedMessageError("envelope shorter than 5 bytes")
    message_type, key_id_len = struct.unpack(">BH", data[:3])
    if message_type not in (MESSAGE_TYPE_QUERY, MESSAGE_TYPE_RESPONSE):
        raise MalformedMessageError(f"bad message type 0x{message_type:02x}")
    offset = 3
    if len(data) < offset + key_id_len + 2:
        raise MalformedMessageError("truncated key id")
    key_id = data[offset : offset + key_id_len]
    offset += key_id_len
    (enc_len,) = struct.unpack(">H", data[offset : offset + 2])
    offset += 2
    if len(data) != offset + enc_len:
        raise MalformedMessageError("encrypted message length mismatch")
    if message_type == MESSAGE_TYPE_RESPONSE and key_id_len != 0:
        raise MalformedMessageError("responses must carry an empty key id")
    return ObliviousMessage(
        message_type=message_type,
        key_id=key_id,
        encrypted_message=data[offset:],
    )
