"""Counter-based random streams keyed by (master seed, labels)"""
import hashlib
from typing import Union

import numpy as np

Label = Union[int, str]


def _label_word(label: Label) -> int:
    """라벨을 32비트 정수로 변환 (문자열은 blake2b 해시)"""
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"정수 라벨은 음수가 될 수 없습니다: {label}")
        return int(label)
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def seed_sequence(master_seed: int, *labels: Label) -> np.random.SeedSequence:
    """스트림 식별자는 (master seed, labels)에만 의존"""
    return np.random.SeedSequence(
        entropy=int(master_seed),
        spawn_key=tuple(_label_word(label) for label in labels),
    )


def stream(master_seed: int, *labels: Label) -> np.random.Generator:
    """Philox 기반 독립 난수 스트림"""
    return np.random.Generator(np.random.Philox(seed_sequence(master_seed, *labels)))


def derive_seed(master_seed: int, *labels: Label) -> int:
    """하위 단계에 넘길 64비트 시드"""
    state = seed_sequence(master_seed, *labels).generate_state(1, dtype=np.uint64)
    return int(state[0])
