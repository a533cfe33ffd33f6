"""Self-signed router identities and the SecureMux handshake messages.

Identities are Ed25519 key pairs. A certificate is the subject name plus
the raw public key, self-signed; its fingerprint is the SHA-256 of that
blob. Peers are authenticated by signing the handshake transcript, so a
node that merely replays someone else's certificate cannot complete a
handshake.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

ALPN_BGP = "roq-bgp/1"
ALPN_OSPF = "roq-ospf/1"

NONCE_LEN = 16
KX_LEN = 32
_SIG_LEN = 64
_CERT_MAGIC = b"ROQ1"


class HandshakeError(ValueError):
    pass


@dataclass(frozen=True)
class Certificate:
    subject: str
    public_key: bytes
    blob: bytes

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.blob).hexdigest()

    @classmethod
    def parse(cls, blob: bytes) -> "Certificate":
        if not blob.startswith(_CERT_MAGIC) or len(blob) < 5:
            raise HandshakeError("not a certificate")
        n = blob[4]
        subject = blob[5:5 + n]
        pub = blob[5 + n:5 + n + 32]
        sig = blob[5 + n + 32:]
        if len(pub) != 32 or len(sig) != _SIG_LEN:
            raise HandshakeError("truncated certificate")
        try:
            Ed25519PublicKey.from_public_bytes(pub).verify(sig, blob[:5 + n + 32])
        except InvalidSignature:
            raise HandshakeError("bad certificate self-signature") from None
        return cls(subject.decode(), pub, blob)


class Identity:
    """A router's key pair and self-signed certificate."""

    def __init__(self, subject: str, private_key: Ed25519PrivateKey):
        self.subject = subject
        self._key = private_key
        pub = private_key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        name = subject.encode()
        if len(name) > 255:
            raise ValueError("subject too long")
        tbs = _CERT_MAGIC + bytes([len(name)]) + name + pub
        self.certificate = Certificate(subject, pub, tbs + private_key.sign(tbs))

    @classmethod
    def generate(cls, subject: str, seed: int | bytes | None = None) -> "Identity":
        """Create an identity. With ``seed`` the key pair is reproducible."""
        if seed is None:
            return cls(subject, Ed25519PrivateKey.generate())
        if isinstance(seed, int):
            seed = seed.to_bytes(8, "big", signed=False)
        material = hashlib.sha256(b"roq-identity|" + subject.encode() + b"|" + seed).digest()
        return cls(subject, Ed25519PrivateKey.from_private_bytes(material))

    @property
    def fingerprint(self) -> str:
        return self.certificate.fingerprint

    def sign(self, data: bytes) -> bytes:
        return self._key.sign(data)

    def __repr__(self) -> str:
        return f"Identity({self.subject!r}, {self.fingerprint[:12]})"


@dataclass(frozen=True)
class AcceptAny:
    def allows(self, fingerprint: str) -> bool:
        return True


@dataclass(frozen=True)
class PinnedFingerprints:
    fingerprints: frozenset[str]

    def __init__(self, fingerprints):
        object.__setattr__(self, "fingerprints", frozenset(fingerprints))

    def allows(self, fingerprint: str) -> bool:
        return fingerprint in self.fingerprints


@dataclass(frozen=True)
class SecurityConfig:
    identity: Identity
    trust: AcceptAny | PinnedFingerprints = field(default_factory=AcceptAny)
    alpn: str = ALPN_BGP


def _verify(pub: bytes, sig: bytes, data: bytes) -> None:
    try:
        Ed25519PublicKey.from_public_bytes(pub).verify(sig, data)
    except InvalidSignature:
        raise HandshakeError("handshake signature invalid") from None


class KeyShare:
    """Ephemeral X25519 key used to agree on the per-connection frame key."""

    def __init__(self, secret: bytes):
        self._key = X25519PrivateKey.from_private_bytes(secret)
        self.public = self._key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    def agree(self, peer_public: bytes) -> bytes:
        return self._key.exchange(X25519PublicKey.from_public_bytes(peer_public))


@dataclass(frozen=True)
class ClientHello:
    port: int
    alpn: str
    nonce: bytes
    kx_public: bytes
    cert: Certificate

    @staticmethod
    def transcript(conn_id: int, port: int, alpn: str, nonce: bytes, kx: bytes) -> bytes:
        return (b"client|" + struct.pack(">QH", conn_id, port) + alpn.encode() + b"|"
                + nonce + kx)

    @classmethod
    def build(cls, conn_id: int, port: int, sec: SecurityConfig, nonce: bytes,
              kx_public: bytes) -> bytes:
        alpn = sec.alpn.encode()
        cert = sec.identity.certificate.blob
        sig = sec.identity.sign(cls.transcript(conn_id, port, sec.alpn, nonce, kx_public))
        return (struct.pack(">HB", port, len(alpn)) + alpn + nonce + kx_public
                + struct.pack(">H", len(cert)) + cert + sig)

    @classmethod
    def parse(cls, conn_id: int, data: bytes) -> "ClientHello":
        try:
            port, n = struct.unpack_from(">HB", data)
            pos = 3
            alpn = data[pos:pos + n].decode()
            pos += n
            nonce = data[pos:pos + NONCE_LEN]
            pos += NONCE_LEN
            kx = data[pos:pos + KX_LEN]
            pos += KX_LEN
            (clen,) = struct.unpack_from(">H", data, pos)
            pos += 2
            cert = Certificate.parse(data[pos:pos + clen])
            sig = data[pos + clen:]
        except (struct.error, UnicodeDecodeError) as exc:
            raise HandshakeError(f"malformed client hello: {exc}") from None
        if len(nonce) != NONCE_LEN or len(kx) != KX_LEN or len(sig) != _SIG_LEN:
            raise HandshakeError("malformed client hello")
        _verify(cert.public_key, sig, cls.transcript(conn_id, port, alpn, nonce, kx))
        return cls(port, alpn, nonce, kx, cert)


@dataclass(frozen=True)
class ServerHello:
    nonce: bytes
    kx_public: bytes
    cert: Certificate

    @staticmethod
    def transcript(conn_id: int, client_nonce: bytes, client_kx: bytes,
                   server_nonce: bytes, server_kx: bytes, alpn: str) -> bytes:
        return (b"server|" + conn_id.to_bytes(8, "big") + client_nonce + client_kx
                + server_nonce + server_kx + alpn.encode())

    @classmethod
    def build(cls, conn_id: int, hello: ClientHello, sec: SecurityConfig, nonce: bytes,
              kx_public: bytes) -> bytes:
        cert = sec.identity.certificate.blob
        sig = sec.identity.sign(cls.transcript(conn_id, hello.nonce, hello.kx_public,
                                               nonce, kx_public, sec.alpn))
        return nonce + kx_public + struct.pack(">H", len(cert)) + cert + sig

    @classmethod
    def parse(cls, conn_id: int, data: bytes, client_nonce: bytes, client_kx: bytes,
              alpn: str) -> "ServerHello":
        try:
            nonce = data[:NONCE_LEN]
            kx = data[NONCE_LEN:NONCE_LEN + KX_LEN]
            pos = NONCE_LEN + KX_LEN
            (clen,) = struct.unpack_from(">H", data, pos)
            pos += 2
            cert = Certificate.parse(data[pos:pos + clen])
            sig = data[pos + clen:]
        except struct.error as exc:
            raise HandshakeError(f"malformed server hello: {exc}") from None
        if len(nonce) != NONCE_LEN or len(kx) != KX_LEN or len(sig) != _SIG_LEN:
            raise HandshakeError("malformed server hello")
        _verify(cert.public_key, sig,
                cls.transcript(conn_id, client_nonce, client_kx, nonce, kx, alpn))
        return cls(nonce, kx, cert)


def session_key(shared: bytes, client_nonce: bytes, server_nonce: bytes) -> bytes:
    return hashlib.blake2b(shared + client_nonce + server_nonce, digest_size=32,
                           person=b"roq-session").digest()
