"""Pure-Python block-cipher kernels (fallback when the compiled core is absent).

Both backends expose the same three callables:

``xts_decrypt(key, data, first_sector, sector_size=512)``
    AES-XTS decryption of whole sectors with a plain64 (little-endian sector
    number) tweak. ``key`` holds both halves (data key first, tweak key second).
``aes_encrypt_block(key, block)`` / ``aes_decrypt_block(key, block)``
    Single 16-byte block primitives, used by the tests and the benchmark.
``af_merge(material, block_size, stripes, hash_name)``
    Anti-forensic merge of ``stripes`` diffused blocks back into one key.
"""

from __future__ import annotations

import hashlib

SBOX = bytes.fromhex(
    "637c777bf26b6fc53001672bfed7ab76ca82c97dfa5947f0add4a2af9ca472c0"
    "b7fd9326363ff7cc34a5e5f171d8311504c723c31896059a071280e2eb27b275"
    "09832c1a1b6e5aa0523bd6b329e32f8453d100ed20fcb15b6acbbe394a4c58cf"
    "d0efaafb434d338545f9027f503c9fa851a3408f929d38f5bcb6da2110fff3d2"
    "cd0c13ec5f974417c4a77e3d645d197360814fdc222a908846eeb814de5e0bdb"
    "e0323a0a4906245cc2d3ac629195e479e7c8376d8dd54ea96c56f4ea657aae08"
    "ba78252e1ca6b4c6e8dd741f4bbd8b8a703eb5664803f60e613557b986c11d9e"
    "e1f8981169d98e949b1e87e9ce5528df8ca1890dbfe6426841992d0fb054bb16"
)
INV_SBOX = bytes(SBOX.index(i) for i in range(256))


def _xtime(b: int) -> int:
    b <<= 1
    return (b ^ 0x11B) if b & 0x100 else b


def _gmul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a = _xtime(a)
        b >>= 1
    return out


def _ror(w: int, n: int) -> int:
    return ((w >> n) | (w << (32 - n))) & 0xFFFFFFFF


def _build_tables():
    te0, td0 = [], []
    for x in range(256):
        s = SBOX[x]
        te0.append((_gmul(s, 2) << 24) | (s << 16) | (s << 8) | _gmul(s, 3))
        si = INV_SBOX[x]
        td0.append((_gmul(si, 14) << 24) | (_gmul(si, 9) << 16) | (_gmul(si, 13) << 8) | _gmul(si, 11))
    te = [te0] + [[_ror(w, 8 * k) for w in te0] for k in (1, 2, 3)]
    td = [td0] + [[_ror(w, 8 * k) for w in td0] for k in (1, 2, 3)]
    return te, td


(TE0, TE1, TE2, TE3), (TD0, TD1, TD2, TD3) = _build_tables()

_RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36)


def expand_key(key: bytes) -> list[int]:
    """AES key schedule as a flat list of 32-bit big-endian round-key words."""
    nk = len(key) // 4
    if len(key) not in (16, 24, 32):
        raise ValueError(f"AES key must be 16, 24 or 32 bytes, got {len(key)}")
    nr = nk + 6
    w = [int.from_bytes(key[4 * i:4 * i + 4], "big") for i in range(nk)]
    for i in range(nk, 4 * (nr + 1)):
        t = w[i - 1]
        if i % nk == 0:
            t = ((t << 8) | (t >> 24)) & 0xFFFFFFFF
            t = (SBOX[t >> 24] << 24) | (SBOX[(t >> 16) & 255] << 16) | (SBOX[(t >> 8) & 255] << 8) | SBOX[t & 255]
            t ^= _RCON[i // nk - 1] << 24
        elif nk > 6 and i % nk == 4:
            t = (SBOX[t >> 24] << 24) | (SBOX[(t >> 16) & 255] << 16) | (SBOX[(t >> 8) & 255] << 8) | SBOX[t & 255]
        w.append(w[i - nk] ^ t)
    return w


def _inv_mix(w: int) -> int:
    return TD0[SBOX[w >> 24]] ^ TD1[SBOX[(w >> 16) & 255]] ^ TD2[SBOX[(w >> 8) & 255]] ^ TD3[SBOX[w & 255]]


def expand_decrypt_key(key: bytes) -> list[int]:
    """Round keys for the equivalent inverse cipher, in application order."""
    rk = expand_key(key)
    nr = len(rk) // 4 - 1
    dk = list(rk[4 * nr:4 * nr + 4])
    for r in range(nr - 1, 0, -1):
        dk.extend(_inv_mix(x) for x in rk[4 * r:4 * r + 4])
    dk.extend(rk[0:4])
    return dk


def _encrypt(rk: list[int], block: bytes) -> bytes:
    nr = len(rk) // 4 - 1
    s0 = int.from_bytes(block[0:4], "big") ^ rk[0]
    s1 = int.from_bytes(block[4:8], "big") ^ rk[1]
    s2 = int.from_bytes(block[8:12], "big") ^ rk[2]
    s3 = int.from_bytes(block[12:16], "big") ^ rk[3]
    k = 4
    for _ in range(nr - 1):
        t0 = TE0[s0 >> 24] ^ TE1[(s1 >> 16) & 255] ^ TE2[(s2 >> 8) & 255] ^ TE3[s3 & 255] ^ rk[k]
        t1 = TE0[s1 >> 24] ^ TE1[(s2 >> 16) & 255] ^ TE2[(s3 >> 8) & 255] ^ TE3[s0 & 255] ^ rk[k + 1]
        t2 = TE0[s2 >> 24] ^ TE1[(s3 >> 16) & 255] ^ TE2[(s0 >> 8) & 255] ^ TE3[s1 & 255] ^ rk[k + 2]
        t3 = TE0[s3 >> 24] ^ TE1[(s0 >> 16) & 255] ^ TE2[(s1 >> 8) & 255] ^ TE3[s2 & 255] ^ rk[k + 3]
        s0, s1, s2, s3 = t0, t1, t2, t3
        k += 4
    S = SBOX
    return b"".join(
        (((S[a >> 24] << 24) | (S[(b >> 16) & 255] << 16) | (S[(c >> 8) & 255] << 8) | S[d & 255]) ^ rk[k + i]).to_bytes(4, "big")
        for i, (a, b, c, d) in enumerate(((s0, s1, s2, s3), (s1, s2, s3, s0), (s2, s3, s0, s1), (s3, s0, s1, s2)))
    )


def _decrypt(dk: list[int], block: bytes) -> bytes:
    nr = len(dk) // 4 - 1
    s0 = int.from_bytes(block[0:4], "big") ^ dk[0]
    s1 = int.from_bytes(block[4:8], "big") ^ dk[1]
    s2 = int.from_bytes(block[8:12], "big") ^ dk[2]
    s3 = int.from_bytes(block[12:16], "big") ^ dk[3]
    k = 4
    for _ in range(nr - 1):
        t0 = TD0[s0 >> 24] ^ TD1[(s3 >> 16) & 255] ^ TD2[(s2 >> 8) & 255] ^ TD3[s1 & 255] ^ dk[k]
        t1 = TD0[s1 >> 24] ^ TD1[(s0 >> 16) & 255] ^ TD2[(s3 >> 8) & 255] ^ TD3[s2 & 255] ^ dk[k + 1]
        t2 = TD0[s2 >> 24] ^ TD1[(s1 >> 16) & 255] ^ TD2[(s0 >> 8) & 255] ^ TD3[s3 & 255] ^ dk[k + 2]
        t3 = TD0[s3 >> 24] ^ TD1[(s2 >> 16) & 255] ^ TD2[(s1 >> 8) & 255] ^ TD3[s0 & 255] ^ dk[k + 3]
        s0, s1, s2, s3 = t0, t1, t2, t3
        k += 4
    S = INV_SBOX
    return b"".join(
        (((S[a >> 24] << 24) | (S[(b >> 16) & 255] << 16) | (S[(c >> 8) & 255] << 8) | S[d & 255]) ^ dk[k + i]).to_bytes(4, "big")
        for i, (a, b, c, d) in enumerate(((s0, s3, s2, s1), (s1, s0, s3, s2), (s2, s1, s0, s3), (s3, s2, s1, s0)))
    )


def aes_encrypt_block(key: bytes, block: bytes) -> bytes:
    if len(block) != 16:
        raise ValueError("AES block must be 16 bytes")
    return _encrypt(expand_key(key), block)


def aes_decrypt_block(key: bytes, block: bytes) -> bytes:
    if len(block) != 16:
        raise ValueError("AES block must be 16 bytes")
    return _decrypt(expand_decrypt_key(key), block)


_MASK128 = (1 << 128) - 1


def xts_decrypt(key: bytes, data: bytes, first_sector: int = 0, sector_size: int = 512) -> bytes:
    if len(key) not in (32, 48, 64):
        raise ValueError(f"XTS key must be 32, 48 or 64 bytes, got {len(key)}")
    if sector_size % 16 or len(data) % sector_size:
        raise ValueError("data length must be a whole number of sectors")
    half = len(key) // 2
    dk = expand_decrypt_key(key[:half])
    tk = expand_key(key[half:])
    out = bytearray(len(data))
    view = memoryview(data)
    for n in range(len(data) // sector_size):
        iv = ((first_sector + n) & 0xFFFFFFFFFFFFFFFF).to_bytes(16, "little")
        tweak = int.from_bytes(_encrypt(tk, iv), "little")
        base = n * sector_size
        for off in range(base, base + sector_size, 16):
            x = (int.from_bytes(view[off:off + 16], "little") ^ tweak).to_bytes(16, "little")
            p = int.from_bytes(_decrypt(dk, x), "little") ^ tweak
            out[off:off + 16] = p.to_bytes(16, "little")
            tweak = ((tweak << 1) & _MASK128) ^ (0x87 if tweak >> 127 else 0)
    return bytes(out)


def _diffuse(block: bytes, hash_name: str) -> bytes:
    digest_size = hashlib.new(hash_name).digest_size
    out = bytearray()
    for i in range(0, len(block), digest_size):
        chunk = block[i:i + digest_size]
        h = hashlib.new(hash_name)
        h.update((i // digest_size).to_bytes(4, "big"))
        h.update(chunk)
        out += h.digest()[:len(chunk)]
    return bytes(out)


def af_merge(material: bytes, block_size: int, stripes: int, hash_name: str) -> bytes:
    if len(material) < block_size * stripes:
        raise ValueError("key material shorter than stripes * block size")
    acc = bytes(block_size)
    for i in range(stripes - 1):
        stripe = material[i * block_size:(i + 1) * block_size]
        acc = _diffuse(bytes(a ^ b for a, b in zip(acc, stripe)), hash_name)
    last = material[(stripes - 1) * block_size:stripes * block_size]
    return bytes(a ^ b for a, b in zip(acc, last))
