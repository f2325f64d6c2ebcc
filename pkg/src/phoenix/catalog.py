"""Built-in attack-variant catalog, benign seed sessions, and layer alphabets.

Attack sessions are abstract skeletons (message labels plus payload
predicates), one per variant, for the control-plane misbehaviors the trace
generator can splice into benign traffic.  Benign seed sessions model the
ordinary procedures of each layer, including legitimate uses of the messages
the attacks abuse (a protected information request, a post-security
measurement report) so that learned signatures cannot simply key on a
message's existence.

Each catalog entry also carries a hand-written reference signature in formula
syntax, used by the default signature database and as a labeling oracle in
tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .pltl import Alphabet
from .traces import Event, Session, TraceFormatError, VariantCatalog, parse_traces

__all__ = [
    "AttackInfo",
    "ATTACKS",
    "LAYERS",
    "layer_alphabet",
    "layer_labels",
    "layer_predicates",
    "benign_seed_sessions",
    "builtin_catalog",
    "load_catalog",
    "reference_signature",
]

LAYERS = ("NAS", "RRC")

_RRC_LABELS = [
    "rrcConnectionRequest",
    "rrcConnectionSetup",
    "rrcConnectionSetupComplete",
    "securityModeCommand",
    "securityModeComplete",
    "ueCapabilityEnquiry",
    "ueCapabilityInformation",
    "ueInformationRequest",
    "ueInformationResponse",
    "rlfReport",
    "measurementReport",
    "rrcConnectionReconfiguration",
    "rrcConnectionReconfigurationComplete",
    "rrcConnectionRelease",
    "paging",
    "identityRequest",
    "identityResponse",
]
_RRC_PREDICATES = ["imsi"]

_NAS_LABELS = [
    "attachRequest",
    "attachAccept",
    "attachComplete",
    "attachReject",
    "authenticationRequest",
    "authenticationResponse",
    "authenticationReject",
    "securityModeCommand",
    "securityModeComplete",
    "identityRequest",
    "identityResponse",
    "emmInformation",
    "serviceRequest",
    "serviceAccept",
    "serviceReject",
    "tauRequest",
    "tauAccept",
    "tauReject",
    "detachRequest",
]
_NAS_PREDICATES = ["imsi", "imei", "guti", "integrityProtected", "nullEncryption", "malformedId"]


def layer_labels(layer: str) -> list[str]:
    return list(_RRC_LABELS if layer == "RRC" else _NAS_LABELS)


def layer_predicates(layer: str) -> list[str]:
    return list(_RRC_PREDICATES if layer == "RRC" else _NAS_PREDICATES)


def layer_alphabet(layer: str) -> Alphabet:
    if layer not in LAYERS:
        raise ValueError(f"unknown layer {layer!r}")
    return Alphabet(layer_labels(layer) + layer_predicates(layer))


def _s(*events: Union[str, tuple]) -> Session:
    out = []
    for e in events:
        if isinstance(e, str):
            out.append(Event(e))
        else:
            label, preds = e
            out.append(Event(label, preds))
    return Session(out)


# -- Benign seed sessions ----------------------------------------------------

_RRC_CONNECT = (
    "rrcConnectionRequest",
    "rrcConnectionSetup",
    "rrcConnectionSetupComplete",
)
_RRC_SECURED = _RRC_CONNECT + ("securityModeCommand", "securityModeComplete")

_RRC_BENIGN = [
    # plain connect / reconfigure / release
    _s(*_RRC_SECURED, "rrcConnectionReconfiguration",
       "rrcConnectionReconfigurationComplete", "rrcConnectionRelease"),
    # capability exchange
    _s(*_RRC_SECURED, "ueCapabilityEnquiry", "ueCapabilityInformation",
       "rrcConnectionReconfiguration", "rrcConnectionReconfigurationComplete"),
    # protected UE information exchange
    _s(*_RRC_SECURED, "ueInformationRequest", "ueInformationResponse"),
    # protected UE information request answered with an RLF report, with the
    # capability exchange in between (the request is not adjacent to
    # securityModeComplete)
    _s(*_RRC_SECURED, "ueCapabilityEnquiry", "ueCapabilityInformation",
       "ueInformationRequest", "rlfReport"),
    # measurement reporting after reconfiguration
    _s(*_RRC_SECURED, "rrcConnectionReconfiguration",
       "rrcConnectionReconfigurationComplete", "measurementReport"),
    # paging without exposing a permanent identity
    _s(*_RRC_SECURED, "paging", "rrcConnectionRelease"),
    # short-lived session
    _s(*_RRC_SECURED, "rrcConnectionRelease"),
]

_NAS_ATTACH = (
    "attachRequest",
    "authenticationRequest",
    "authenticationResponse",
    "securityModeCommand",
    "securityModeComplete",
)

_NAS_BENIGN = [
    _s(*_NAS_ATTACH, "attachAccept", "attachComplete"),
    # identity requested with the temporary identifier before authentication
    _s("attachRequest", ("identityRequest", {"guti": True}), "identityResponse",
       "authenticationRequest", "authenticationResponse",
       "securityModeCommand", "securityModeComplete", "attachAccept", "attachComplete"),
    # operator information delivered protected
    _s(*_NAS_ATTACH, "attachAccept", "attachComplete",
       ("emmInformation", {"integrityProtected": True})),
    _s("serviceRequest", "serviceAccept"),
    _s("serviceRequest", "securityModeCommand", "securityModeComplete", "serviceAccept"),
    _s("tauRequest", "tauAccept"),
    _s(*_NAS_ATTACH, "attachAccept", "attachComplete", "detachRequest"),
]


def benign_seed_sessions(layer: str) -> list[Session]:
    if layer not in LAYERS:
        raise ValueError(f"unknown layer {layer!r}")
    return list(_RRC_BENIGN if layer == "RRC" else _NAS_BENIGN)


# -- Attack catalog ----------------------------------------------------------

@dataclass(frozen=True)
class AttackInfo:
    name: str
    layer: str
    severity: str
    remedy: str
    signature: str  # reference PLTL signature, formula syntax
    variants: tuple[Session, ...]


_UEINFO_PLAIN = ("ueInformationRequest", "rlfReport")

ATTACKS: dict[str, AttackInfo] = {}


def _attack(name, layer, severity, remedy, signature, variants):
    ATTACKS[name] = AttackInfo(name, layer, severity, remedy, signature, tuple(variants))


_attack(
    "rlf_report", "RRC", "high",
    "do not answer unprotected UE information requests; reconnect",
    "(imp (prop ueInformationRequest) (S (not (prop rrcConnectionRequest)) (prop securityModeComplete)))",
    [
        # canonical: security mode skipped, plaintext request answered
        _s(*_RRC_CONNECT, *_UEINFO_PLAIN),
        # identity-request prelude before the skip
        _s(*_RRC_CONNECT, "identityRequest", "identityResponse", *_UEINFO_PLAIN),
        # capability enquiry interlude after the skip
        _s(*_RRC_CONNECT, "ueCapabilityEnquiry", "ueCapabilityInformation", *_UEINFO_PLAIN),
        # both variations combined
        _s(*_RRC_CONNECT, "identityRequest", "identityResponse",
           "ueCapabilityEnquiry", "ueCapabilityInformation", *_UEINFO_PLAIN),
    ],
)

_attack(
    "measurement_report", "RRC", "high",
    "suppress measurement reports until a security context exists",
    "(imp (prop measurementReport) (S (not (prop rrcConnectionRequest)) (prop securityModeComplete)))",
    [
        _s(*_RRC_CONNECT, "rrcConnectionReconfiguration", "measurementReport"),
        _s(*_RRC_CONNECT, "ueCapabilityEnquiry", "ueCapabilityInformation",
           "rrcConnectionReconfiguration", "measurementReport"),
        _s(*_RRC_CONNECT, "identityRequest", "identityResponse",
           "rrcConnectionReconfiguration", "measurementReport"),
    ],
)

_attack(
    "aka_bypass", "RRC", "high",
    "terminate the connection; re-authenticate",
    "(imp (prop rrcConnectionReconfiguration) (S (not (prop rrcConnectionRequest)) (prop securityModeComplete)))",
    [
        # protected procedure driven without a security context
        _s(*_RRC_CONNECT, "rrcConnectionReconfiguration",
           "rrcConnectionReconfigurationComplete"),
        _s(*_RRC_CONNECT, "ueCapabilityEnquiry", "ueCapabilityInformation",
           "rrcConnectionReconfiguration", "rrcConnectionReconfigurationComplete"),
    ],
)

_attack(
    "paging_with_imsi", "RRC", "medium",
    "ignore pages addressed by permanent identity",
    "(not (and (prop paging) (prop imsi)))",
    [
        _s(*_RRC_SECURED, ("paging", {"imsi": True})),
        _s(*_RRC_SECURED, "rrcConnectionReconfiguration",
           "rrcConnectionReconfigurationComplete", ("paging", {"imsi": True})),
    ],
)

_attack(
    "imsi_cracking", "RRC", "medium",
    "report the cell; ignore permanent-identity pages",
    "(not (and (prop paging) (prop imsi)))",
    [
        _s(*_RRC_CONNECT, ("paging", {"imsi": True}), "rrcConnectionRelease"),
        _s(*_RRC_CONNECT, ("paging", {"imsi": True}),
           ("paging", {"imsi": True}), "rrcConnectionRelease"),
    ],
)

_attack(
    "imsi_catching", "NAS", "high",
    "withhold the permanent identity; reconnect",
    "(not (and (prop identityRequest) (prop imsi)))",
    [
        _s("attachRequest", ("identityRequest", {"imsi": True}), "identityResponse"),
        _s("attachRequest", "authenticationRequest", "authenticationResponse",
           ("identityRequest", {"imsi": True}), "identityResponse"),
    ],
)

_attack(
    "imei_catching", "NAS", "high",
    "withhold the equipment identity; reconnect",
    "(not (and (prop identityRequest) (prop imei)))",
    [
        _s("attachRequest", ("identityRequest", {"imei": True}), "identityResponse"),
        _s("attachRequest", "authenticationRequest", "authenticationResponse",
           ("identityRequest", {"imei": True}), "identityResponse"),
    ],
)

_attack(
    "null_encryption", "NAS", "high",
    "refuse the null ciphering algorithm",
    "(not (and (prop securityModeCommand) (prop nullEncryption)))",
    [
        _s("attachRequest", "authenticationRequest", "authenticationResponse",
           ("securityModeCommand", {"nullEncryption": True}), "securityModeComplete"),
        _s("attachRequest", "authenticationRequest", "authenticationResponse",
           ("securityModeCommand", {"nullEncryption": True}), "securityModeComplete",
           "attachAccept", "attachComplete"),
    ],
)

_attack(
    "emm_information", "NAS", "low",
    "discard unprotected operator information",
    "(imp (prop emmInformation) (prop integrityProtected))",
    [
        _s("attachRequest", ("emmInformation", {"integrityProtected": False})),
        _s("attachRequest", "authenticationRequest", "authenticationResponse",
           ("emmInformation", {"integrityProtected": False})),
    ],
)

_attack(
    "numb", "NAS", "high",
    "re-insert the SIM or reboot the device",
    "(not (prop authenticationReject))",
    [
        _s("attachRequest", "authenticationRequest", "authenticationReject"),
        _s("attachRequest", "authenticationRequest", "authenticationResponse",
           "authenticationReject"),
    ],
)

_attack(
    "attach_reject", "NAS", "high",
    "retry attach on a different cell",
    "(not (prop attachReject))",
    [
        _s("attachRequest", "attachReject"),
        _s("attachRequest", "authenticationRequest", "attachReject"),
    ],
)

_attack(
    "tau_reject", "NAS", "medium",
    "re-run the tracking-area update after reconnecting",
    "(not (prop tauReject))",
    [
        _s("tauRequest", "tauReject"),
    ],
)

_attack(
    "service_reject", "NAS", "medium",
    "retry the service request after reconnecting",
    "(not (prop serviceReject))",
    [
        _s("serviceRequest", "serviceReject"),
    ],
)

_attack(
    "malformed_identity_request", "NAS", "medium",
    "ignore identity requests with an improper type",
    "(not (and (prop identityRequest) (prop malformedId)))",
    [
        _s("attachRequest", ("identityRequest", {"malformedId": True}), "identityResponse"),
        _s("attachRequest", "authenticationRequest",
           ("identityRequest", {"malformedId": True}), "identityResponse"),
    ],
)


def builtin_catalog(layer: Optional[str] = None) -> VariantCatalog:
    """Catalog of all built-in attacks, optionally restricted to one layer."""
    cat = VariantCatalog()
    for info in ATTACKS.values():
        if layer is not None and info.layer != layer:
            continue
        for v in info.variants:
            cat.add(info.name, v)
    return cat


def reference_signature(attack: str) -> str:
    return ATTACKS[attack].signature


def load_catalog(directory: Union[str, Path, None] = None,
                 layer: Optional[str] = None) -> VariantCatalog:
    """Built-in defaults, extended/overridden by `<attack>.trc` files.

    Each file holds the variant sessions for one attack (file stem = attack
    name), one session per blank-line-separated block; `---` separators are
    also accepted.  Variants from files are appended to the defaults for
    known attacks and define new attacks otherwise.
    """
    cat = builtin_catalog(layer)
    if directory is None:
        return cat
    directory = Path(directory)
    for path in sorted(directory.glob("*.trc")):
        attack = path.stem
        try:
            skeletons = parse_traces(path)
        except TraceFormatError as exc:
            raise TraceFormatError(f"{path}: {exc}") from exc
        for skel in skeletons:
            for session in skel.sessions:
                cat.add(attack, session)
    return cat
