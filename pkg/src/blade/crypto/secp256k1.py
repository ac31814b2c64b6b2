"""secp256k1 elliptic-curve arithmetic and recoverable ECDSA.

Pure Python.  Points are affine (x, y) int pairs; internal arithmetic runs in
Jacobian coordinates to avoid a field inversion per group operation.  Signing
uses deterministic nonces (HMAC-SHA256 derivation per RFC 6979) and always
emits low-s signatures; verification and recovery reject high-s forms.
"""

from __future__ import annotations

import hashlib
import hmac
from typing import Iterator, Optional

# Curve parameters: y^2 = x^3 + 7 over F_P, group order N.
P = 2**256 - 2**32 - 977
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

HALF_N = N // 2

Point = tuple[int, int]
_Jac = tuple[int, int, int]

_JAC_INF: _Jac = (0, 1, 0)


def is_on_curve(point: Point) -> bool:
    x, y = point
    if not (0 <= x < P and 0 <= y < P):
        return False
    return (y * y - (x * x * x + 7)) % P == 0


def _to_jac(point: Point) -> _Jac:
    return (point[0], point[1], 1)


def _from_jac(p: _Jac) -> Point:
    x, y, z = p
    if z == 0:
        raise ZeroDivisionError("point at infinity has no affine form")
    zinv = pow(z, -1, P)
    zinv2 = (zinv * zinv) % P
    return (x * zinv2 % P, y * zinv2 % P * zinv % P)


def _jac_double(p: _Jac) -> _Jac:
    x1, y1, z1 = p
    if z1 == 0 or y1 == 0:
        return _JAC_INF
    a = x1 * x1 % P
    b = y1 * y1 % P
    c = b * b % P
    d = 2 * ((x1 + b) * (x1 + b) - a - c) % P
    e = 3 * a % P
    f = e * e % P
    x3 = (f - 2 * d) % P
    y3 = (e * (d - x3) - 8 * c) % P
    z3 = 2 * y1 * z1 % P
    return (x3, y3, z3)


def _jac_add(p: _Jac, q: _Jac) -> _Jac:
    x1, y1, z1 = p
    x2, y2, z2 = q
    if z1 == 0:
        return q
    if z2 == 0:
        return p
    z1z1 = z1 * z1 % P
    z2z2 = z2 * z2 % P
    u1 = x1 * z2z2 % P
    u2 = x2 * z1z1 % P
    s1 = y1 * z2 * z2z2 % P
    s2 = y2 * z1 * z1z1 % P
    if u1 == u2:
        if s1 != s2:
            return _JAC_INF
        return _jac_double(p)
    h = (u2 - u1) % P
    i = 4 * h * h % P
    j = h * i % P
    r = 2 * (s2 - s1) % P
    v = u1 * i % P
    x3 = (r * r - j - 2 * v) % P
    y3 = (r * (v - x3) - 2 * s1 * j) % P
    z3 = 2 * h * z1 * z2 % P
    return (x3, y3, z3)


def _window_table(p: _Jac) -> list[_Jac]:
    table = [_JAC_INF, p]
    for _ in range(14):
        table.append(_jac_add(table[-1], p))
    return table


_G_TABLE = _window_table(_to_jac((GX, GY)))


def _mul_jac(k: int, table: list[_Jac]) -> _Jac:
    """4-bit fixed-window scalar multiplication of the table's base point."""
    acc = _JAC_INF
    for shift in range(252, -4, -4):
        if acc[2] != 0:
            acc = _jac_double(_jac_double(_jac_double(_jac_double(acc))))
        nib = (k >> shift) & 0xF
        if nib:
            acc = _jac_add(acc, table[nib])
    return acc


def scalar_mult(k: int, point: Optional[Point] = None) -> Optional[Point]:
    """k * point (generator when point is None); None encodes infinity."""
    k %= N
    if k == 0:
        return None
    table = _G_TABLE if point is None else _window_table(_to_jac(point))
    return _from_jac(_mul_jac(k, table))


def _double_mult(a: int, b: int, q: Point) -> Optional[Point]:
    """a*G + b*Q via an interleaved window walk (one shared doubling chain)."""
    a %= N
    b %= N
    q_table = _window_table(_to_jac(q))
    acc = _JAC_INF
    for shift in range(252, -4, -4):
        if acc[2] != 0:
            acc = _jac_double(_jac_double(_jac_double(_jac_double(acc))))
        nib_a = (a >> shift) & 0xF
        if nib_a:
            acc = _jac_add(acc, _G_TABLE[nib_a])
        nib_b = (b >> shift) & 0xF
        if nib_b:
            acc = _jac_add(acc, q_table[nib_b])
    if acc[2] == 0:
        return None
    return _from_jac(acc)


def lift_x(x: int, odd: bool) -> Optional[Point]:
    """Decompress an x coordinate to the curve point with the given y parity."""
    if not (0 <= x < P):
        return None
    y_sq = (pow(x, 3, P) + 7) % P
    y = pow(y_sq, (P + 1) // 4, P)
    if y * y % P != y_sq:
        return None
    if (y & 1) != (1 if odd else 0):
        y = P - y
    return (x, y)


def _rfc6979_nonces(private_key: int, digest: bytes) -> Iterator[int]:
    """Deterministic nonce candidates for (key, digest), per RFC 6979."""
    def mac(key: bytes, data: bytes) -> bytes:
        return hmac.new(key, data, hashlib.sha256).digest()

    x = private_key.to_bytes(32, "big")
    h = (int.from_bytes(digest, "big") % N).to_bytes(32, "big")
    v = b"\x01" * 32
    k = b"\x00" * 32
    k = mac(k, v + b"\x00" + x + h)
    v = mac(k, v)
    k = mac(k, v + b"\x01" + x + h)
    v = mac(k, v)
    while True:
        v = mac(k, v)
        candidate = int.from_bytes(v, "big")
        if 1 <= candidate < N:
            yield candidate
        k = mac(k, v + b"\x00")
        v = mac(k, v)


def sign(private_key: int, digest: bytes) -> tuple[int, int, int]:
    """Sign a 32-byte digest; returns (r, s, recovery_id) with s <= N/2.

    Deterministic: the same (key, digest) pair always yields the same
    signature.  Nonce candidates that would produce r == 0, s == 0, or an
    r >= N recovery ambiguity are skipped.
    """
    if len(digest) != 32:
        raise ValueError("digest must be exactly 32 bytes")
    if not (1 <= private_key < N):
        raise ValueError("private key out of range")
    z = int.from_bytes(digest, "big")
    for k in _rfc6979_nonces(private_key, digest):
        rx, ry = _from_jac(_mul_jac(k, _G_TABLE))
        if rx >= N:
            continue  # keeps the recovery id in {0, 1}
        r = rx
        if r == 0:
            continue
        s = pow(k, -1, N) * (z + r * private_key) % N
        if s == 0:
            continue
        rec_id = ry & 1
        if s > HALF_N:
            s = N - s
            rec_id ^= 1
        return (r, s, rec_id)
    raise RuntimeError("unreachable: nonce stream exhausted")


def recover(digest: bytes, r: int, s: int, rec_id: int) -> Optional[Point]:
    """Recover the signing public key, or None if the signature is invalid.

    Enforces low-s: signatures with s > N/2 are rejected outright.
    """
    if len(digest) != 32:
        raise ValueError("digest must be exactly 32 bytes")
    if rec_id not in (0, 1):
        return None
    if not (1 <= r < N and 1 <= s <= HALF_N):
        return None
    point_r = lift_x(r, odd=bool(rec_id))
    if point_r is None:
        return None
    z = int.from_bytes(digest, "big")
    r_inv = pow(r, -1, N)
    u1 = (-z * r_inv) % N
    u2 = (s * r_inv) % N
    q = _double_mult(u1, u2, point_r)
    if q is None:
        return None
    return q


def public_key(private_key: int) -> Point:
    if not (1 <= private_key < N):
        raise ValueError("private key out of range")
    return _from_jac(_mul_jac(private_key, _G_TABLE))
