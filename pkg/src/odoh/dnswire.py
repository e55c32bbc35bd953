"""Minimal DNS wire format support.

Enough to build queries, parse responses (with name compression), pull
TTLs for caching, and apply/verify randomized 0x20 name casing. Not a
general-purpose DNS library: no EDNS0, no DNSSEC, no TCP fallback.
"""

from __future__ import annotations

import secrets
import struct
from dataclasses import dataclass, field

from .protocol.errors import MalformedDnsError, ProtocolError

QTYPE_A = 1
QTYPE_TXT = 16
QTYPE_AAAA = 28
QTYPE_HTTPS = 65
QCLASS_IN = 1

QTYPE_NAMES = {QTYPE_A: "A", QTYPE_TXT: "TXT", QTYPE_AAAA: "AAAA", QTYPE_HTTPS: "HTTPS"}
QTYPE_IDS = {v: k for k, v in QTYPE_NAMES.items()}

RCODE_NOERROR = 0
RCODE_NXDOMAIN = 3

MAX_MESSAGE_SIZE = 4096
MAX_NAME_LENGTH = 253
MAX_LABEL_LENGTH = 63
DEFAULT_EMPTY_MIN_TTL = 30


class NameTooLongError(ProtocolError):
    pass


class LabelTooLongError(ProtocolError):
    pass


@dataclass(frozen=True)
class DnsQuestion:
    """A single question; qname is lowercase, display_name keeps the caller's casing."""

    qname: str
    qtype: int = QTYPE_A
    qclass: int = QCLASS_IN
    display_name: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        raw = self.qname.rstrip(".")
        object.__setattr__(self, "display_name", raw if raw != raw.lower() else None)
        object.__setattr__(self, "qname", raw.lower())


def encode_qname(name: str) -> bytes:
    name = name.rstrip(".")
    if len(name) > MAX_NAME_LENGTH:
        raise NameTooLongError(f"name exceeds {MAX_NAME_LENGTH} bytes: {name[:40]}...")
    if not name:
        return b"\x00"
    out = bytearray()
    for label in name.split("."):
        encoded = label.encode("ascii")
        if not encoded:
            raise MalformedDnsError(f"empty label in {name!r}")
        if len(encoded) > MAX_LABEL_LENGTH:
            raise LabelTooLongError(f"label exceeds {MAX_LABEL_LENGTH} bytes: {label[:70]}")
        out.append(len(encoded))
        out += encoded
    out.append(0)
    return bytes(out)


def randomize_case(name: str) -> str:
    """Flip each alphabetic byte's case by CSPRNG coin toss (0x20 encoding)."""
    out = []
    for ch in name:
        if ch.isalpha():
            out.append(ch.upper() if secrets.randbits(1) else ch.lower())
        else:
            out.append(ch)
    return "".join(out)


def build_query(question: DnsQuestion, msg_id: int, use_0x20: bool = False) -> bytes:
    """Standard RD=1 query: 12-byte header + one question."""
    name = question.display_name or question.qname
    if use_0x20:
        name = randomize_case(question.qname)
    header = struct.pack(">HHHHHH", msg_id, 0x0100, 1, 0, 0, 0)
    return header + encode_qname(name) + struct.pack(">HH", question.qtype, question.qclass)


def _parse_name(data: bytes, offset: int) -> tuple[str, int]:
    """Returns (name with case preserved, offset after the name in-place).

    Follows compression pointers with a jump budget so crafted loops fail
    instead of spinning.
    """
    labels: list[str] = []
    jumps = 0
    end = None  # offset after the name at its original position
    pos = offset
    while True:
        if pos >= len(data):
            raise MalformedDnsError("name runs past end of message")
        length = data[pos]
        if length & 0xC0 == 0xC0:
            if pos + 1 >= len(data):
                raise MalformedDnsError("truncated compression pointer")
            pointer = ((length & 0x3F) << 8) | data[pos + 1]
            if end is None:
                end = pos + 2
            jumps += 1
            if jumps > 32:
                raise MalformedDnsError("compression pointer loop")
            if pointer >= len(data):
                raise MalformedDnsError("compression pointer out of range")
            pos = pointer
            continue
        if length & 0xC0:
            raise MalformedDnsError(f"reserved label type 0x{length:02x}")
        pos += 1
        if length == 0:
            break
        if pos + length > len(data):
            raise MalformedDnsError("label runs past end of message")
        labels.append(data[pos : pos + length].decode("ascii", errors="replace"))
        pos += length
    return ".".join(labels), end if end is not None else pos


@dataclass(frozen=True)
class ResourceRecord:
    name: str
    rtype: int
    rclass: int
    ttl: int
    rdata: bytes


@dataclass(frozen=True)
class DnsResponseSummary:
    msg_id: int
    rcode: int
    question_name: str  # case as it appears on the wire
    question_type: int
    answers: tuple[ResourceRecord, ...]
    min_ttl: int


def parse_query_info(data: bytes) -> tuple[int, int, str, int, int]:
    """(msg_id, qdcount, qname display-case, qtype, qclass) of a query message."""
    if len(data) < 12:
        raise MalformedDnsError("message shorter than a DNS header")
    msg_id, _flags, qdcount = struct.unpack(">HHH", data[:6])
    if qdcount < 1:
        raise MalformedDnsError("message has no question")
    qname, offset = _parse_name(data, 12)
    if offset + 4 > len(data):
        raise MalformedDnsError("truncated question")
    qtype, qclass = struct.unpack(">HH", data[offset : offset + 4])
    return msg_id, qdcount, qname, qtype, qclass


def parse_response(data: bytes, *, empty_min_ttl: int = DEFAULT_EMPTY_MIN_TTL) -> DnsResponseSummary:
    if len(data) < 12:
        raise MalformedDnsError("message shorter than a DNS header")
    if len(data) > MAX_MESSAGE_SIZE:
        raise MalformedDnsError(f"message exceeds {MAX_MESSAGE_SIZE} bytes")
    msg_id, flags, qdcount, ancount = struct.unpack(">HHHH", data[:8])
    rcode = flags & 0x000F
    offset = 12
    question_name = ""
    question_type = 0
    for i in range(qdcount):
        qname, offset = _parse_name(data, offset)
        if offset + 4 > len(data):
            raise MalformedDnsError("truncated question")
        qtype, _qclass = struct.unpack(">HH", data[offset : offset + 4])
        offset += 4
        if i == 0:
            question_name, question_type = qname, qtype
    answers = []
    for _ in range(ancount):
        name, offset = _parse_name(data, offset)
        if offset + 10 > len(data):
            raise MalformedDnsError("truncated resource record")
        rtype, rclass, ttl, rdlength = struct.unpack(">HHIH", data[offset : offset + 10])
        offset += 10
        if offset + rdlength > len(data):
            raise MalformedDnsError("rdata runs past end of message")
        answers.append(ResourceRecord(name, rtype, rclass, ttl, data[offset : offset + rdlength]))
        offset += rdlength
    min_ttl = min((r.ttl for r in answers), default=empty_min_ttl)
    return DnsResponseSummary(
        msg_id=msg_id,
        rcode=rcode,
        question_name=question_name,
        question_type=question_type,
        answers=tuple(answers),
        min_ttl=min_ttl,
    )


def verify_0x20(query_sent: bytes, response: bytes) -> bool:
    """True iff the response echoes the sent question name case-exactly."""
    _, _, sent_name, _, _ = parse_query_info(query_sent)
    summary = parse_response(response)
    return summary.question_name == sent_name


def rewrite_id(message: bytes, new_id: int) -> bytes:
    if len(message) < 2:
        raise MalformedDnsError("message too short for an ID")
    return struct.pack(">H", new_id) + message[2:]


def echo_question_casing(response: bytes, query: bytes) -> bytes:
    """Overwrite the response's question name bytes with the query's.

    Served-from-cache responses keep whatever casing the priming query used;
    real resolvers echo the current query's casing, which is what 0x20
    verification checks. Falls back to the response untouched if the encoded
    extents differ.
    """
    try:
        _, q_end = _parse_name(query, 12)
        _, r_end = _parse_name(response, 12)
    except MalformedDnsError:
        return response
    if q_end != r_end or q_end > len(response) or q_end > len(query):
        return response
    return response[:12] + query[12:q_end] + response[q_end:]


def rdata_to_text(rtype: int, rdata: bytes) -> str:
    if rtype == QTYPE_A and len(rdata) == 4:
        return ".".join(str(b) for b in rdata)
    if rtype == QTYPE_AAAA and len(rdata) == 16:
        import ipaddress

        return str(ipaddress.IPv6Address(rdata))
    if rtype == QTYPE_TXT and rdata:
        return rdata[1 : 1 + rdata[0]].decode("ascii", errors="replace")
    return rdata.hex()
