"""Query/response sealing: the client and target halves of the protocol.

A sealed query carries a fresh one-shot response key inside the HPKE
plaintext; the target encrypts its answer under that key with an all-zero
nonce, which is safe precisely because each key encrypts exactly one
message (enforced by QueryContext).
"""

from __future__ import annotations

import secrets
import struct
from dataclasses import dataclass, field

from . import hpke
from .config import TargetKeyConfig, TargetKeyPair, derive_key_id
from .errors import (
    BadKeyLengthError,
    ContextConsumedError,
    MalformedDnsError,
    MalformedPlaintextError,
    UnknownKeyIdError,
)
from .message import (
    MESSAGE_TYPE_QUERY,
    MESSAGE_TYPE_RESPONSE,
    ObliviousMessage,
)
from .suites import CipherSuite

QUERY_INFO = b"odoh query"
DNS_HEADER_SIZE = 12


@dataclass
class QueryContext:
    """Per-query secret binding one sealed query to one sealed answer.

    Not safe to share across concurrent decrypt attempts: single consumer.
    """

    response_key: bytes = field(repr=False)
    suite: CipherSuite
    consumed: bool = False


def _encode_plaintext(response_key: bytes, dns_message: bytes, padding_len: int = 0) -> bytes:
    return (
        struct.pack(">H", len(response_key))
        + response_key
        + struct.pack(">H", len(dns_message))
        + dns_message
        + struct.pack(">H", padding_len)
        + b"\x00" * padding_len
    )


def _decode_plaintext(data: bytes) -> tuple[bytes, bytes]:
    offset = 0

    def take(n: int) -> bytes:
        nonlocal offset
        if len(data) - offset < n:
            raise MalformedPlaintextError("query plaintext truncated")
        out = data[offset : offset + n]
        offset += n
        return out

    (key_len,) = struct.unpack(">H", take(2))
    response_key = take(key_len)
    (dns_len,) = struct.unpack(">H", take(2))
    dns_message = take(dns_len)
    (pad_len,) = struct.unpack(">H", take(2))
    padding = take(pad_len)
    if offset != len(data):
        raise MalformedPlaintextError("trailing bytes after padding")
    if padding.count(0) != pad_len:
        raise MalformedPlaintextError("padding bytes must be zero")
    if dns_len < DNS_HEADER_SIZE:
        raise MalformedPlaintextError("inner DNS message shorter than a header")
    return response_key, dns_message


def seal_query(
    config: TargetKeyConfig, dns_query: bytes, *, padding_len: int = 0
) -> tuple[ObliviousMessage, QueryContext]:
    """Encrypt `dns_query` to the target's published key.

    Draws a fresh response key from the CSPRNG; the returned context is the
    only thing able to open the matching answer.
    """
    if len(dns_query) < DNS_HEADER_SIZE:
        raise MalformedDnsError(
            f"DNS query must be at least {DNS_HEADER_SIZE} bytes, got {len(dns_query)}"
        )
    suite = config.suite
    response_key = secrets.token_bytes(suite.key_size)
    key_id = derive_key_id(config)
    sealed = hpke.seal(
        suite,
        config.public_key,
        _encode_plaintext(response_key, dns_query, padding_len),
        info=QUERY_INFO,
        aad=key_id,
    )
    msg = ObliviousMessage(
        message_type=MESSAGE_TYPE_QUERY, key_id=key_id, encrypted_message=sealed
    )
    return msg, QueryContext(response_key=response_key, suite=suite)


def open_query(pair: TargetKeyPair, msg: ObliviousMessage) -> tuple[bytes, bytes]:
    """Decrypt a sealed query; returns (dns_query, response_key)."""
    if msg.message_type != MESSAGE_TYPE_QUERY:
        raise MalformedPlaintextError("not a query envelope")
    key_id = derive_key_id(pair.config)
    if msg.key_id != key_id:
        raise UnknownKeyIdError("query sealed to a different key config")
    plaintext = hpke.open_sealed(
        pair.config.suite,
        pair.secret_key,
        msg.encrypted_message,
        info=QUERY_INFO,
        aad=key_id,
    )
    response_key, dns_query = _decode_plaintext(plaintext)
    if len(response_key) != pair.config.suite.key_size:
        raise MalformedPlaintextError("response key has wrong length for suite")
    return dns_query, response_key


def seal_response(
    response_key: bytes, suite: CipherSuite, dns_response: bytes
) -> ObliviousMessage:
    """Encrypt an answer under the client's one-shot key.

    Nonce is all zeros: each response key encrypts exactly one message, so
    the nonce need not be transmitted and the overhead is exactly the tag.
    """
    if len(response_key) != suite.key_size:
        raise BadKeyLengthError(
            f"response key must be {suite.key_size} bytes for {suite}, "
            f"got {len(response_key)}"
        )
    nonce = b"\x00" * suite.nonce_size
    ct = hpke.aead_seal(suite, response_key, nonce, dns_response)
    return ObliviousMessage(
        message_type=MESSAGE_TYPE_RESPONSE, key_id=b"", encrypted_message=ct
    )


def open_response(ctx: QueryContext, msg: ObliviousMessage) -> bytes:
    """Decrypt a sealed answer; consumes the context."""
    if msg.message_type != MESSAGE_TYPE_RESPONSE:
        raise MalformedPlaintextError("not a response envelope")
    if ctx.consumed:
        raise ContextConsumedError("query context already decrypted a response")
    nonce = b"\x00" * ctx.suite.nonce_size
    plaintext = hpke.aead_open(ctx.suite, ctx.response_key, nonce, msg.encrypted_message)
    ctx.consumed = True
    return plaintext


def query_overhead(suite: CipherSuite) -> int:
    """Constant |sealed query| - |dns query| for a suite.

    envelope (1 + 2 + 32 + 2) + enc + plaintext framing (3 x u16) +
    response key + AEAD tag.
    """
    return 37 + suite.enc_size + 6 + suite.key_size + suite.tag_size
