from typing import Union

from Crypto.Hash import keccak

from .typing import Seed


def keccak256(data: Union[str, bytes, bytearray]) -> bytes:
    if isinstance(data, str):
        data = data.encode()
    return keccak.new(digest_bits=256).update(data).digest()


def derive_seed(root_seed: int, name: str, replicate: int = 0) -> Seed:
    """
    Counter-based job seed: the first 8 bytes of keccak256(root seed, name, replicate).
    The result depends only on its arguments, never on scheduling.
    >>> assert derive_seed(42, "min-law") == derive_seed(42, "min-law")
    """
    digest = keccak256(f"{root_seed}/{name}/{replicate}")
    return Seed(int.from_bytes(digest[:8], "big"))
