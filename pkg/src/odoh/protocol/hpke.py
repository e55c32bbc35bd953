"""Single-shot hybrid public key encryption (RFC 9180, base mode).

Only the composition lives here; every primitive operation (Diffie-Hellman,
HMAC, AEAD) is delegated to vetted providers (`cryptography`, stdlib
`hmac`/`hashlib`). Sealed output is the encapsulated key immediately
followed by the AEAD ciphertext: enc || ct.
"""

from __future__ import annotations

import hashlib
import hmac

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ec, x448, x25519
from cryptography.hazmat.primitives.ciphers.aead import AESGCM, ChaCha20Poly1305

from .errors import CryptoFailure, DecryptFailure, UnsupportedSuiteError
from .suites import KEMS, CipherSuite

_MODE_BASE = b"\x00"
_VERSION_LABEL = b"HPKE-v1"

# KEM id -> EC curve for the NIST KEMs; field size in bytes for scalar encoding.
_EC_CURVES = {0x0010: (ec.SECP256R1(), 32), 0x0012: (ec.SECP521R1(), 66)}


def _hash_for_kdf(kdf_id: int) -> str:
    return {0x0001: "sha256", 0x0002: "sha384", 0x0003: "sha512"}[kdf_id]


def _hkdf_extract(hash_name: str, salt: bytes, ikm: bytes) -> bytes:
    if not salt:
        salt = b"\x00" * hashlib.new(hash_name).digest_size
    return hmac.new(salt, ikm, hash_name).digest()


def _hkdf_expand(hash_name: str, prk: bytes, info: bytes, length: int) -> bytes:
    out = b""
    block = b""
    counter = 1
    while len(out) < length:
        block = hmac.new(prk, block + info + bytes([counter]), hash_name).digest()
        out += block
        counter += 1
    return out[:length]


def _labeled_extract(
    hash_name: str, suite_id: bytes, salt: bytes, label: bytes, ikm: bytes
) -> bytes:
    return _hkdf_extract(hash_name, salt, _VERSION_LABEL + suite_id + label + ikm)


def _labeled_expand(
    hash_name: str, suite_id: bytes, prk: bytes, label: bytes, info: bytes, length: int
) -> bytes:
    labeled_info = length.to_bytes(2, "big") + _VERSION_LABEL + suite_id + label + info
    return _hkdf_expand(hash_name, prk, labeled_info, length)


# ---------------------------------------------------------------------------
# DHKEM


def generate_key_pair_bytes(kem_id: int) -> tuple[bytes, bytes]:
    """Return (secret, public) encodings of a fresh KEM key pair."""
    if kem_id == 0x0020:
        sk = x25519.X25519PrivateKey.generate()
        return sk.private_bytes_raw(), sk.public_key().public_bytes_raw()
    if kem_id == 0x0021:
        sk = x448.X448PrivateKey.generate()
        return sk.private_bytes_raw(), sk.public_key().public_bytes_raw()
    if kem_id in _EC_CURVES:
        curve, field = _EC_CURVES[kem_id]
        sk = ec.generate_private_key(curve)
        secret = sk.private_numbers().private_value.to_bytes(field, "big")
        return secret, _ec_public_bytes(sk.public_key())
    raise UnsupportedSuiteError(f"unknown KEM id 0x{kem_id:04x}")


def public_key_from_secret(kem_id: int, secret: bytes) -> bytes:
    """Recompute the public encoding from a stored secret key."""
    return _load_secret(kem_id, secret)[1]


def _ec_public_bytes(pub) -> bytes:
    return pub.public_bytes(
        serialization.Encoding.X962, serialization.PublicFormat.UncompressedPoint
    )


def _load_public(kem_id: int, data: bytes):
    if len(data) != KEMS[kem_id][1]:
        raise ValueError("bad public key length")
    if kem_id == 0x0020:
        return x25519.X25519PublicKey.from_public_bytes(data)
    if kem_id == 0x0021:
        return x448.X448PublicKey.from_public_bytes(data)
    curve, _ = _EC_CURVES[kem_id]
    return ec.EllipticCurvePublicKey.from_encoded_point(curve, data)


def _load_secret(kem_id: int, secret: bytes):
    if kem_id == 0x0020:
        sk = x25519.X25519PrivateKey.from_private_bytes(secret)
        return sk, sk.public_key().public_bytes_raw()
    if kem_id == 0x0021:
        sk = x448.X448PrivateKey.from_private_bytes(secret)
        return sk, sk.public_key().public_bytes_raw()
    curve, _ = _EC_CURVES[kem_id]
    sk = ec.derive_private_key(int.from_bytes(secret, "big"), curve)
    return sk, _ec_public_bytes(sk.public_key())


def _dh(kem_id: int, sk, pk) -> bytes:
    if kem_id in (0x0020, 0x0021):
        return sk.exchange(pk)
    return sk.exchange(ec.ECDH(), pk)


def _extract_and_expand(kem_id: int, dh: bytes, kem_context: bytes) -> bytes:
    _, _, hash_name, nsecret = KEMS[kem_id]
    suite_id = b"KEM" + kem_id.to_bytes(2, "big")
    eae_prk = _labeled_extract(hash_name, suite_id, b"", b"eae_prk", dh)
    return _labeled_expand(
        hash_name, suite_id, eae_prk, b"shared_secret", kem_context, nsecret
    )


def _encap(kem_id: int, public_key: bytes) -> tuple[bytes, bytes]:
    pk_r = _load_public(kem_id, public_key)
    sk_e_bytes, enc = generate_key_pair_bytes(kem_id)
    sk_e, _ = _load_secret(kem_id, sk_e_bytes)
    dh = _dh(kem_id, sk_e, pk_r)
    shared = _extract_and_expand(kem_id, dh, enc + public_key)
    return shared, enc


def _decap(kem_id: int, secret_key: bytes, enc: bytes) -> bytes:
    sk_r, pk_r_bytes = _load_secret(kem_id, secret_key)
    pk_e = _load_public(kem_id, enc)
    dh = _dh(kem_id, sk_r, pk_e)
    return _extract_and_expand(kem_id, dh, enc + pk_r_bytes)


# ---------------------------------------------------------------------------
# Key schedule + AEAD


def _aead(suite: CipherSuite, key: bytes):
    if suite.aead_id == 0x0003:
        return ChaCha20Poly1305(key)
    return AESGCM(key)


def _key_schedule(suite: CipherSuite, shared_secret: bytes, info: bytes) -> tuple[bytes, bytes]:
    hash_name = _hash_for_kdf(suite.kdf_id)
    suite_id = (
        b"HPKE"
        + suite.kem_id.to_bytes(2, "big")
        + suite.kdf_id.to_bytes(2, "big")
        + suite.aead_id.to_bytes(2, "big")
    )
    psk_id_hash = _labeled_extract(hash_name, suite_id, b"", b"psk_id_hash", b"")
    info_hash = _labeled_extract(hash_name, suite_id, b"", b"info_hash", info)
    context = _MODE_BASE + psk_id_hash + info_hash
    secret = _labeled_extract(hash_name, suite_id, shared_secret, b"secret", b"")
    key = _labeled_expand(hash_name, suite_id, secret, b"key", context, suite.key_size)
    base_nonce = _labeled_expand(
        hash_name, suite_id, secret, b"base_nonce", context, suite.nonce_size
    )
    return key, base_nonce


def seal(
    suite: CipherSuite,
    public_key: bytes,
    plaintext: bytes,
    *,
    info: bytes = b"",
    aad: bytes = b"",
) -> bytes:
    """Encrypt to `public_key`; returns enc || ct."""
    try:
        shared, enc = _encap(suite.kem_id, public_key)
        key, base_nonce = _key_schedule(suite, shared, info)
        ct = _aead(suite, key).encrypt(base_nonce, plaintext, aad)
    except (ValueError, TypeError) as exc:
        raise CryptoFailure(f"seal failed: {exc}") from exc
    return enc + ct


def open_sealed(
    suite: CipherSuite,
    secret_key: bytes,
    data: bytes,
    *,
    info: bytes = b"",
    aad: bytes = b"",
) -> bytes:
    """Inverse of seal(); raises DecryptFailure on any tampering or key mismatch."""
    if len(data) < suite.enc_size + suite.tag_size:
        raise DecryptFailure("sealed message shorter than enc + tag")
    enc, ct = data[: suite.enc_size], data[suite.enc_size :]
    try:
        shared = _decap(suite.kem_id, secret_key, enc)
        key, base_nonce = _key_schedule(suite, shared, info)
        return _aead(suite, key).decrypt(base_nonce, ct, aad)
    except (InvalidTag, ValueError, TypeError) as exc:
        raise DecryptFailure("open failed") from exc


def aead_seal(suite: CipherSuite, key: bytes, nonce: bytes, plaintext: bytes) -> bytes:
    """Bare AEAD encryption with the suite's cipher (empty AAD)."""
    return _aead(suite, key).encrypt(nonce, plaintext, b"")


def aead_open(suite: CipherSuite, key: bytes, nonce: bytes, ciphertext: bytes) -> bytes:
    """Bare AEAD decryption; raises DecryptFailure on tampering or wrong key."""
    try:
        return _aead(suite, key).decrypt(nonce, ciphertext, b"")
    except (InvalidTag, ValueError) as exc:
        raise DecryptFailure("AEAD open failed") from exc
