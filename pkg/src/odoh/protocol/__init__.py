"""Protocol core: suites, key configs, envelopes, and seal/open operations."""

from .config import (
    CONFIG_VERSION,
    KEY_ID_SIZE,
    TargetKeyConfig,
    TargetKeyPair,
    derive_key_id,
    generate_key_pair,
    load_key_pairs,
    parse_config_list,
    save_key_pairs,
    serialize_config_list,
)
from .errors import (
    BadKeyLengthError,
    ContextConsumedError,
    CryptoFailure,
    DecryptFailure,
    MalformedConfigError,
    MalformedDnsError,
    MalformedMessageError,
    MalformedPlaintextError,
    ProtocolError,
    UnknownKeyIdError,
    UnsupportedSuiteError,
)
from .message import (
    MESSAGE_TYPE_QUERY,
    MESSAGE_TYPE_RESPONSE,
    ObliviousMessage,
    parse_message,
    serialize_message,
)
from .ops import (
    QueryContext,
    open_query,
    open_response,
    query_overhead,
    seal_query,
    seal_response,
)
from .suites import AEADS, DEFAULT_SUITE, KDFS, KEMS, CipherSuite, all_suites

__all__ = [
    "AEADS",
    "BadKeyLengthError",
    "CONFIG_VERSION",
    "CipherSuite",
    "ContextConsumedError",
    "CryptoFailure",
    "DEFAULT_SUITE",
    "DecryptFailure",
    "KDFS",
    "KEMS",
    "KEY_ID_SIZE",
    "MESSAGE_TYPE_QUERY",
    "MESSAGE_TYPE_RESPONSE",
    "MalformedConfigError",
    "MalformedDnsError",
    "MalformedMessageError",
    "MalformedPlaintextError",
    "ObliviousMessage",
    "ProtocolError",
    "QueryContext",
    "TargetKeyConfig",
    "TargetKeyPair",
    "UnknownKeyIdError",
    "UnsupportedSuiteError",
    "all_suites",
    "derive_key_id",
    "generate_key_pair",
    "load_key_pairs",
    "open_query",
    "open_response",
    "parse_config_list",
    "parse_message",
    "query_overhead",
    "save_key_pairs",
    "seal_query",
    "seal_response",
    "serialize_config_list",
    "serialize_message",
]
