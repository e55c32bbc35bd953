"""Cipher suite registry.

Algorithm identifiers follow the HPKE IANA registry (RFC 9180). Every
derived size (key, nonce, tag, encapsulated key) is a total function of
the three identifiers, so a suite is fully described by its id triple.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnsupportedSuiteError

# KEM id -> (name, public key / encapsulated key size, KEM-internal hash, shared secret size)
KEMS = {
    0x0010: ("P-256", 65, "sha256", 32),
    0x0012: ("P-521", 133, "sha512", 64),
    0x0020: ("X25519", 32, "sha256", 32),
    0x0021: ("X448", 56, "sha512", 64),
}

# KDF id -> (name, digest size)
KDFS = {
    0x0001: ("HKDF-SHA256", 32),
    0x0002: ("HKDF-SHA384", 48),
    0x0003: ("HKDF-SHA512", 64),
}

# AEAD id -> (name, key size, nonce size, tag size)
AEADS = {
    0x0001: ("AES-128-GCM", 16, 12, 16),
    0x0002: ("AES-256-GCM", 32, 12, 16),
    0x0003: ("ChaCha20-Poly1305", 32, 12, 16),
}


@dataclass(frozen=True)
class CipherSuite:
    """An HPKE (KEM, KDF, AEAD) triple with its derived sizes."""

    kem_id: int
    kdf_id: int
    aead_id: int

    def __post_init__(self) -> None:
        if self.kem_id not in KEMS:
            raise UnsupportedSuiteError(f"unknown KEM id 0x{self.kem_id:04x}")
        if self.kdf_id not in KDFS:
            raise UnsupportedSuiteError(f"unknown KDF id 0x{self.kdf_id:04x}")
        if self.aead_id not in AEADS:
            raise UnsupportedSuiteError(f"unknown AEAD id 0x{self.aead_id:04x}")

    @property
    def key_size(self) -> int:
        return AEADS[self.aead_id][1]

    @property
    def nonce_size(self) -> int:
        return AEADS[self.aead_id][2]

    @property
    def tag_size(self) -> int:
        return AEADS[self.aead_id][3]

    @property
    def enc_size(self) -> int:
        """Size of the KEM encapsulated key (== public key size for DHKEMs)."""
        return KEMS[self.kem_id][1]

    @property
    def public_key_size(self) -> int:
        return KEMS[self.kem_id][1]

    @property
    def name(self) -> str:
        return "/".join(
            (KEMS[self.kem_id][0], KDFS[self.kdf_id][0], AEADS[self.aead_id][0])
        )

    def __str__(self) -> str:
        return self.name


# The most performant suite; used everywhere a default is needed.
DEFAULT_SUITE = CipherSuite(0x0020, 0x0001, 0x0001)


def all_suites() -> list[CipherSuite]:
    """Every registered (KEM, KDF, AEAD) combination."""
    return [
        CipherSuite(kem, kdf, aead)
        for kem in KEMS
        for kdf in KDFS
        for aead in AEADS
    ]
