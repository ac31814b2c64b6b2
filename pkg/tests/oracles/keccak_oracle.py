"""Independent Keccak-256 reference for cross-checking the packaged one.

Deliberately written as the textbook 5x5-matrix round function with explicit
(x, y) loops, no precomputed permutation tables, and a separate padding step,
so it shares no structure with blade.crypto.keccak.
"""


def _rot(value, amount):
    amount %= 64
    return ((value << amount) | (value >> (64 - amount))) & 0xFFFFFFFFFFFFFFFF


def _round_constants():
    # LFSR-generated rc bits, computed rather than tabulated.
    constants = []
    state = 1
    for _ in range(24):
        rc = 0
        for j in range(7):
            if state & 1:
                rc |= 1 << ((1 << j) - 1)
            # x^8 + x^6 + x^5 + x^4 + 1 over GF(2)
            state = ((state << 1) ^ (0x71 if state & 0x80 else 0)) & 0xFF
        constants.append(rc)
    return constants


_RC = _round_constants()


def _permute(lanes):
    a = [[lanes[x][y] for y in range(5)] for x in range(5)]
    for round_index in range(24):
        c = [a[x][0] ^ a[x][1] ^ a[x][2] ^ a[x][3] ^ a[x][4] for x in range(5)]
        d = [c[(x - 1) % 5] ^ _rot(c[(x + 1) % 5], 1) for x in range(5)]
        for x in range(5):
            for y in range(5):
                a[x][y] ^= d[x]
        b = [[0] * 5 for _ in range(5)]
        for x in range(5):
            for y in range(5):
                # rho offset (x, y) generated by the standard index walk below
                b[y][(2 * x + 3 * y) % 5] = _rot(a[x][y], _RHO[x][y])
        for x in range(5):
            for y in range(5):
                a[x][y] = b[x][y] ^ ((~b[(x + 1) % 5][y]) & b[(x + 2) % 5][y])
        a[0][0] ^= _RC[round_index]
    return a


def _rho_offsets():
    # Offsets generated by the (x, y) -> (y, 2x+3y) walk from (1, 0).
    offsets = [[0] * 5 for _ in range(5)]
    x, y = 1, 0
    for t in range(24):
        offsets[x][y] = ((t + 1) * (t + 2) // 2) % 64
        x, y = y, (2 * x + 3 * y) % 5
    return offsets


_RHO = _rho_offsets()


def keccak256_reference(data: bytes) -> bytes:
    rate = 136
    padded = bytearray(data)
    padded.append(0x01)
    while len(padded) % rate:
        padded.append(0x00)
    padded[-1] ^= 0x80

    lanes = [[0] * 5 for _ in range(5)]
    for block_start in range(0, len(padded), rate):
        for i in range(rate // 8):
            x, y = i % 5, i // 5
            lane = int.from_bytes(
                padded[block_start + 8 * i:block_start + 8 * i + 8], "little"
            )
            lanes[x][y] ^= lane
        lanes = _permute(lanes)

    digest = bytearray()
    for i in range(4):
        digest += lanes[i % 5][i // 5].to_bytes(8, "little")
    return bytes(digest)
