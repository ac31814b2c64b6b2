"""Keccak-256 (the pre-NIST padding variant used for Ethereum-style addresses).

Pure-Python sponge over keccak-f[1600].  Note this is NOT hashlib's sha3_256:
the two differ in the padding domain byte (0x01 here vs. 0x06 for SHA-3), so
digests are incompatible.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1

_ROUND_CONSTANTS = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A,
    0x8000000080008000, 0x000000000000808B, 0x0000000080000001,
    0x8000000080008081, 0x8000000000008009, 0x000000000000008A,
    0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089,
    0x8000000000008003, 0x8000000000008002, 0x8000000000000080,
    0x000000000000800A, 0x800000008000000A, 0x8000000080008081,
    0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# Lane i holds A[x][y] with i = x + 5*y.  Rotation offsets (rho) and the
# destination index of the pi permutation are precomputed per flat index.
_ROT = (
    0, 1, 62, 28, 27,
    36, 44, 6, 55, 20,
    3, 10, 43, 25, 39,
    41, 45, 15, 21, 8,
    18, 2, 61, 56, 14,
)
_PI = tuple((i // 5) + 5 * ((2 * (i % 5) + 3 * (i // 5)) % 5) for i in range(25))

_RATE = 136  # bytes; capacity 512 bits for a 256-bit digest


def _keccak_f(state: list[int]) -> list[int]:
    s = state
    for rc in _ROUND_CONSTANTS:
        # theta
        c = [s[x] ^ s[x + 5] ^ s[x + 10] ^ s[x + 15] ^ s[x + 20] for x in range(5)]
        d = [
            c[(x + 4) % 5] ^ (((c[(x + 1) % 5] << 1) | (c[(x + 1) % 5] >> 63)) & _MASK)
            for x in range(5)
        ]
        s = [s[i] ^ d[i % 5] for i in range(25)]
        # rho + pi
        b = [0] * 25
        for i in range(25):
            r = _ROT[i]
            b[_PI[i]] = ((s[i] << r) | (s[i] >> (64 - r))) & _MASK if r else s[i]
        # chi
        s = [
            b[i] ^ ((~b[(i % 5 + 1) % 5 + 5 * (i // 5)] & _MASK)
                    & b[(i % 5 + 2) % 5 + 5 * (i // 5)])
            for i in range(25)
        ]
        # iota
        s[0] ^= rc
    return s


def keccak256(data: bytes) -> bytes:
    """Return the 32-byte Keccak-256 digest of ``data``."""
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("keccak256 expects bytes")
    data = bytes(data)

    pad_len = _RATE - (len(data) % _RATE)
    if pad_len == 1:
        padded = data + b"\x81"
    else:
        padded = data + b"\x01" + b"\x00" * (pad_len - 2) + b"\x80"

    state = [0] * 25
    for off in range(0, len(padded), _RATE):
        block = padded[off:off + _RATE]
        for i in range(_RATE // 8):
            state[i] ^= int.from_bytes(block[8 * i:8 * i + 8], "little")
        state = _keccak_f(state)

    out = bytearray()
    for i in range(4):
        out += state[i].to_bytes(8, "little")
    return bytes(out)
