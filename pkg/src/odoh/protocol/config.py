"""Target key configs: the published suite + public key, and their wire form.

Config list layout (all integers big-endian):

    u16 total-length
    per config:
        u16 version (0x0001)
        u16 contents-length
        u16 kem_id | u16 kdf_id | u16 aead_id | u16 pk-length | pk bytes
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from . import hpke
from .errors import MalformedConfigError, UnsupportedSuiteError
from .suites import CipherSuite

CONFIG_VERSION = 0x0001
KEY_ID_SIZE = 32


@dataclass(frozen=True)
class TargetKeyConfig:
    """A target's published HPKE suite and public key."""

    suite: CipherSuite
    public_key: bytes
    version: int = CONFIG_VERSION

    def __post_init__(self) -> None:
        if len(self.public_key) != self.suite.public_key_size:
            raise MalformedConfigError(
                f"public key must be {self.suite.public_key_size} bytes for "
                f"{self.suite}, got {len(self.public_key)}"
            )

    def contents(self) -> bytes:
        """Canonical contents block (everything after the version/length header)."""
        return (
            struct.pack(
                ">HHHH",
                self.suite.kem_id,
                self.suite.kdf_id,
                self.suite.aead_id,
                len(self.public_key),
            )
            + self.public_key
        )

    def serialize(self) -> bytes:
        contents = self.contents()
        return struct.pack(">HH", self.version, len(contents)) + contents


@dataclass(frozen=True)
class TargetKeyPair:
    """A key config together with the KEM secret able to open queries to it.

    The secret never appears in any serialized config; repr is redacted so it
    cannot leak through logs either.
    """

    config: TargetKeyConfig
    secret_key: bytes = field(repr=False)


def generate_key_pair(suite: CipherSuite) -> TargetKeyPair:
    """Fresh KEM key pair for `suite`."""
    secret, public = hpke.generate_key_pair_bytes(suite.kem_id)
    return TargetKeyPair(config=TargetKeyConfig(suite=suite, public_key=public), secret_key=secret)


def derive_key_id(config: TargetKeyConfig) -> bytes:
    """Deterministic 32-byte digest binding a query to the key that opens it."""
    return hashlib.sha256(config.contents()).digest()


def serialize_config_list(configs: list[TargetKeyConfig]) -> bytes:
    if not configs:
        raise MalformedConfigError("config list must not be empty")
    body = b"".join(c.serialize() for c in configs)
    return struct.pack(">H", len(body)) + body


def parse_config_list(data: bytes) -> list[TargetKeyConfig]:
    """Parse every config whose suite we support.

    Structurally valid entries carrying unregistered algorithm ids are
    skipped, not rejected: a target may publish suites newer than this
    client. Framing errors and unknown versions are malformed.
    """
    if len(data) < 2:
        raise MalformedConfigError("config list shorter than its length prefix")
    (total,) = struct.unpack(">H", data[:2])
    if len(data) != 2 + total:
        raise MalformedConfigError("config list length mismatch")
    configs = []
    offset = 2
    end = 2 + total
    while offset < end:
        if end - offset < 4:
            raise MalformedConfigError("truncated config header")
        version, length = struct.unpack(">HH", data[offset : offset + 4])
        offset += 4
        if version != CONFIG_VERSION:
            raise MalformedConfigError(f"unsupported config version 0x{version:04x}")
        if end - offset < length or length < 8:
            raise MalformedConfigError("truncated config contents")
        kem_id, kdf_id, aead_id, pk_len = struct.unpack(">HHHH", data[offset : offset + 8])
        if length != 8 + pk_len:
            raise MalformedConfigError("config contents length mismatch")
        public_key = data[offset + 8 : offset + 8 + pk_len]
        try:
            suite = CipherSuite(kem_id, kdf_id, aead_id)
        except UnsupportedSuiteError:
            offset += length
            continue
        configs.append(TargetKeyConfig(suite=suite, public_key=public_key))
        offset += length
    return configs


# ---------------------------------------------------------------------------
# Key-pair files (target provisioning): one `kem kdf aead secret-hex` per line.


def save_key_pairs(path: str, pairs: list[TargetKeyPair]) -> None:
    lines = [
        f"{p.config.suite.kem_id:#06x} {p.config.suite.kdf_id:#06x} "
        f"{p.config.suite.aead_id:#06x} {p.secret_key.hex()}"
        for p in pairs
    ]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_key_pairs(path: str) -> list[TargetKeyPair]:
    pairs = []
    with open(path, encoding="ascii") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                kem, kdf, aead, secret_hex = line.split()
                suite = CipherSuite(int(kem, 16), int(kdf, 16), int(aead, 16))
                secret = bytes.fromhex(secret_hex)
                public = hpke.public_key_from_secret(suite.kem_id, secret)
            except (ValueError, UnsupportedSuiteError) as exc:
                raise MalformedConfigError(f"bad key file line {line!r}: {exc}") from exc
            pairs.append(
                TargetKeyPair(
                    config=TargetKeyConfig(suite=suite, public_key=public),
                    secret_key=secret,
                )
            )
    if not pairs:
        raise MalformedConfigError(f"no key pairs in {path}")
    return pairs
