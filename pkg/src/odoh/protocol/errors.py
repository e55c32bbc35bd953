"""Exception types raised by the protocol core."""


class ProtocolError(Exception):
    """Base class for all protocol-level failures."""


class UnsupportedSuiteError(ProtocolError):
    """A KEM/KDF/AEAD identifier is not in the registry."""


class MalformedConfigError(ProtocolError):
    """A serialized key config could not be parsed."""


class MalformedMessageError(ProtocolError):
    """A serialized envelope could not be parsed."""


class MalformedPlaintextError(ProtocolError):
    """Decrypted query plaintext has inconsistent framing or bad padding."""


class MalformedDnsError(ProtocolError):
    """A DNS payload is too short or otherwise unusable."""


class UnknownKeyIdError(ProtocolError):
    """The envelope's key id does not match any held key pair."""


class DecryptFailure(ProtocolError):
    """AEAD/HPKE open failed: tampered ciphertext or wrong key."""


class CryptoFailure(ProtocolError):
    """The underlying cryptographic provider reported an error."""


class BadKeyLengthError(ProtocolError):
    """A symmetric key does not match the suite's key size."""


class ContextConsumedError(ProtocolError):
    """A one-shot query context was asked to decrypt a second response."""
