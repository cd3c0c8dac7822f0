"""Active copyright protection: the authorization control center.

A request carries a key image and an 8-character credential. The per-user
detector (a binary classifier) must accept the key image, and the validator
must find XOR(credential bits, key-image perceptual hash) in the enrolled
identity base. Authorized queries get the true model's prediction;
everything else gets a seeded uniformly random class, so the response shape
never betrays which branch ran.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import media, phash, tinynn
from .errors import CollisionError, InvalidInputError
from .tinynn import LabeledDataset, ModelSnapshot, TrainConfig

HEX_ALPHABET = "0123456789abcdef"
CREDENTIAL_LENGTH = 8

# Verdict thresholds for leak tracing: the leaker's key must unlock nearly
# full accuracy while every other key stays near the random-guess floor.
TRACE_ACCEPT = 0.80
TRACE_REJECT = 0.30
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Credential:
    username: str
    encrypted_username: str
    k1: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "k1", tuple(self.k1))
        if len(self.encrypted_username) != CREDENTIAL_LENGTH:
            raise InvalidInputError("encrypted_username must be 8 characters")
        if any(c not in HEX_ALPHABET for c in self.encrypted_username):
            raise InvalidInputError("encrypted_username must use the SHA-256 hex alphabet")
        if len(self.k1) != CREDENTIAL_LENGTH or len(set(self.k1)) != CREDENTIAL_LENGTH:
            raise InvalidInputError("k1 must hold 8 distinct indices")
        if any(not 0 <= i < 64 for i in self.k1):
            raise InvalidInputError("k1 indices must lie in [0, 64)")


def make_credential(username: str, owner_fp: str, k1) -> Credential:
    """Derive the 8-character credential from SHA-256(owner_fp + "_" + username).

    k1 lists which digest positions are extracted, in extraction order.
    """
    k1 = tuple(int(i) for i in k1)
    if len(k1) != CREDENTIAL_LENGTH or len(set(k1)) != CREDENTIAL_LENGTH:
        raise InvalidInputError("k1 must hold 8 distinct indices")
    if any(not 0 <= i < 64 for i in k1):
        raise InvalidInputError("k1 indices must lie in [0, 64)")
    try:
        digest_input = f"{owner_fp}_{username}".encode("ascii")
    except UnicodeEncodeError as exc:
        raise InvalidInputError("owner_fp and username must be ASCII") from exc
    m = hashlib.sha256(digest_input).hexdigest()
    encrypted = "".join(m[i] for i in k1)
    return Credential(username=username, encrypted_username=encrypted, k1=k1)


def credential_bits(encrypted_username: str) -> int:
    """Pack the 8 ASCII bytes into 64 bits, first character most significant."""
    if len(encrypted_username) != CREDENTIAL_LENGTH:
        raise InvalidInputError(
            f"credential must be 8 characters, got {len(encrypted_username)}"
        )
    return int.from_bytes(encrypted_username.encode("ascii"), "big")


@dataclass(frozen=True)
class IdentityBase:
    """Enrolled verification values: I -> user_id."""

    entries: dict[int, str] = field(default_factory=dict)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for value in sorted(self.entries):
                fh.write(
                    json.dumps(
                        {"user_id": self.entries[value], "i_hex": phash.to_hex(value)},
                        separators=(",", ":"),
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path: str | Path) -> "IdentityBase":
        entries: dict[int, str] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            entries[phash.from_hex(obj["i_hex"])] = obj["user_id"]
        return cls(entries=entries)


def verification_value(encrypted_username: str, key_image: np.ndarray) -> int:
    """I = credential bits XOR perceptual hash of the key image."""
    return credential_bits(encrypted_username) ^ phash.phash_image(key_image)


def enroll(
    base: IdentityBase,
    credential: Credential,
    key_image: np.ndarray,
    user_id: str,
) -> IdentityBase:
    """Register a (credential, key image) pair; returns a new base."""
    value = verification_value(credential.encrypted_username, key_image)
    if value in base.entries:
        raise CollisionError(
            f"verification value collision between {base.entries[value]!r} "
            f"and {user_id!r}"
        )
    return IdentityBase(entries={**base.entries, value: user_id})


def validate(
    base: IdentityBase,
    encrypted_username: str,
    key_image: np.ndarray,
) -> str | None:
    """Membership test in the identity base; returns the user_id or None.

    A malformed credential length raises InvalidInputError rather than
    returning None, so callers can distinguish bad requests from failed
    authentication.
    """
    return base.entries.get(verification_value(encrypted_username, key_image))


@dataclass(frozen=True)
class UserKeyBundle:
    """Everything issued to one user: key images, detector, credential."""

    user_id: str
    key_images: list[np.ndarray]
    detector: ModelSnapshot
    credential: Credential

    def __post_init__(self):
        if self.detector.num_classes != 2:
            raise InvalidInputError("detector must be a 2-class model")


def detector_layers() -> tuple[tinynn.LayerSpec, ...]:
    """Compact CNN for the binary key-image decision."""
    return (
        tinynn.Conv2d(8, 3),
        tinynn.Relu(),
        tinynn.MaxPool2d(2),
        tinynn.Conv2d(16, 3),
        tinynn.Relu(),
        tinynn.MaxPool2d(2),
        tinynn.Dense(32),
        tinynn.Relu(),
        tinynn.Dense(2),
        tinynn.SoftmaxOutput(),
    )


def train_detector(
    key_images: list[np.ndarray],
    other_images: list[np.ndarray],
    cfg: TrainConfig,
    input_shape: tuple[int, ...] = (1, 28, 28),
) -> ModelSnapshot:
    """Train a binary classifier: class 1 = key image, class 0 = anything else."""
    if not key_images or not other_images:
        raise InvalidInputError("need at least one key image and one other image")
    inputs = np.stack(
        [media.to_model_input(img, input_shape) for img in key_images]
        + [media.to_model_input(img, input_shape) for img in other_images]
    )
    labels = np.concatenate(
        [np.ones(len(key_images), dtype=np.int64), np.zeros(len(other_images), dtype=np.int64)]
    )
    data = LabeledDataset(inputs=inputs, labels=labels, num_classes=2)
    model = tinynn.init_model(input_shape, detector_layers(), num_classes=2, seed=cfg.seed)
    return tinynn.train(model, data, cfg)


def detector_accepts(detector: ModelSnapshot, key_image: np.ndarray) -> bool:
    """Accept rule: P(key) > 0.5."""
    probs = tinynn.forward(detector, media.to_model_input(key_image, detector.input_shape))
    return float(probs[1]) > 0.5


def authorize(
    bundles: list[UserKeyBundle],
    base: IdentityBase,
    encrypted_username: str,
    key_image: np.ndarray,
    query_input: np.ndarray,
    model: ModelSnapshot,
    rng: int | np.random.Generator,
) -> int:
    """Answer one inference request with a class index.

    Authorization needs some bundle whose detector accepts the key image
    while the validator maps the same (credential, key image) pair to that
    bundle's user. Unauthorized queries draw a uniformly random class from
    the seeded stream; the return type is a bare class index either way.
    """
    query = np.asarray(query_input)
    if query.shape != model.input_shape:
        raise InvalidInputError(
            f"query shape {query.shape} does not match model input {model.input_shape}"
        )
    validated_user = validate(base, encrypted_username, key_image)
    authorized = validated_user is not None and any(
        bundle.user_id == validated_user and detector_accepts(bundle.detector, key_image)
        for bundle in bundles
    )
    if authorized:
        return int(np.argmax(tinynn.forward(model, query)))
    gen = np.random.default_rng(rng) if isinstance(rng, int) else rng
    return int(gen.integers(0, model.num_classes))


@dataclass(frozen=True)
class AcptTraceReport:
    per_user_accuracy: dict[str, float]
    verdict: str


def trace_acpt(
    bundles: list[UserKeyBundle],
    base: IdentityBase,
    model: ModelSnapshot,
    probes: dict[str, tuple[str, np.ndarray]],
    test: LabeledDataset,
    seed: int = 0,
) -> AcptTraceReport:
    """Probe a leaked deployment with every user's (credential, key image).

    The verdict names the unique user whose probe unlocks accuracy of at
    least TRACE_ACCEPT while every other probe stays at or below
    TRACE_REJECT; anything else is inconclusive.
    """
    if len(probes) < 2:
        raise InvalidInputError("need probes for at least two users")
    accuracy: dict[str, float] = {}
    for user_id, (encrypted_username, key_image) in probes.items():
        gen = np.random.default_rng(
            int.from_bytes(hashlib.sha256(f"{seed}:{user_id}".encode()).digest()[:8], "big")
        )
        hits = 0
        for i in range(len(test)):
            pred = authorize(
                bundles, base, encrypted_username, key_image, test.inputs[i], model, gen
            )
            hits += int(pred == test.labels[i])
        accuracy[user_id] = hits / len(test)

    verdict = INCONCLUSIVE
    for user, acc in accuracy.items():
        others_low = all(a <= TRACE_REJECT for u, a in accuracy.items() if u != user)
        if acc >= TRACE_ACCEPT and others_low:
            verdict = user
            break
    return AcptTraceReport(per_user_accuracy=accuracy, verdict=verdict)
