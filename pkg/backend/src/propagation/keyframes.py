from dataclasses import dataclass

from ..errors import InputError

DEFAULT_KEYFRAMES = 7


@dataclass(frozen=True)
class KeyFramePlan:
    """Uniformly sampled key frames of one video."""

    num_frames: int
    indices: tuple[int, ...]

    def __contains__(self, frame: int) -> bool:
        return frame in self.indices


def sample_key_frames(num_frames: int, k: int = DEFAULT_KEYFRAMES) -> KeyFramePlan:
    """
    Pick K evenly spaced frames out of T.

    Index i is round(i * (T - 1) / (K - 1)) with halves rounded up, so the
    first and last frames are always included when K > 1. K = 1 picks the
    middle frame; K > T degenerates to every frame.
    """
    if num_frames < 1:
        raise InputError(f"Cannot sample key frames from {num_frames} frames")
    if k < 1:
        raise InputError(f"Number of key frames must be at least 1, got {k}")
    if k == 1:
        return KeyFramePlan(num_frames, (num_frames // 2,))

    indices: list[int] = []
    for i in range(k):
        # floor(i * (T - 1) / (K - 1) + 1/2) without floating point
        index = (2 * i * (num_frames - 1) + (k - 1)) // (2 * (k - 1))
        if not indices or indices[-1] != index:
            indices.append(index)
    return KeyFramePlan(num_frames, tuple(indices))
