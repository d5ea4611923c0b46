# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled AES-XTS / AF-merge core. Same surface as ``_pykernels``."""

import hashlib

from libc.stdint cimport uint8_t, uint32_t, uint64_t

from nyonscope._pykernels import SBOX as _PY_SBOX, INV_SBOX as _PY_INV_SBOX
from nyonscope._pykernels import TE0 as _PTE0, TD0 as _PTD0
from nyonscope._pykernels import expand_key as _py_expand_key
from nyonscope._pykernels import expand_decrypt_key as _py_expand_decrypt_key

cdef uint8_t S[256]
cdef uint8_t SI[256]
cdef uint32_t TE[4][256]
cdef uint32_t TD[4][256]

cdef inline uint32_t _ror(uint32_t w, int n) noexcept nogil:
    return (w >> n) | (w << (32 - n))

cdef void _init_tables():
    cdef int x, k
    for x in range(256):
        S[x] = _PY_SBOX[x]
        SI[x] = _PY_INV_SBOX[x]
        TE[0][x] = _PTE0[x]
        TD[0][x] = _PTD0[x]
        for k in range(1, 4):
            TE[k][x] = _ror(TE[0][x], 8 * k)
            TD[k][x] = _ror(TD[0][x], 8 * k)

_init_tables()


cdef inline uint32_t _load(const uint8_t* p) noexcept nogil:
    return (<uint32_t>p[0] << 24) | (<uint32_t>p[1] << 16) | (<uint32_t>p[2] << 8) | p[3]

cdef inline void _store(uint8_t* p, uint32_t w) noexcept nogil:
    p[0] = w >> 24
    p[1] = (w >> 16) & 255
    p[2] = (w >> 8) & 255
    p[3] = w & 255


cdef void _enc(const uint32_t* rk, int nr, const uint8_t* inp, uint8_t* out) noexcept nogil:
    cdef uint32_t s0 = _load(inp) ^ rk[0]
    cdef uint32_t s1 = _load(inp + 4) ^ rk[1]
    cdef uint32_t s2 = _load(inp + 8) ^ rk[2]
    cdef uint32_t s3 = _load(inp + 12) ^ rk[3]
    cdef uint32_t t0, t1, t2, t3
    cdef int r, k = 4
    for r in range(nr - 1):
        t0 = TE[0][s0 >> 24] ^ TE[1][(s1 >> 16) & 255] ^ TE[2][(s2 >> 8) & 255] ^ TE[3][s3 & 255] ^ rk[k]
        t1 = TE[0][s1 >> 24] ^ TE[1][(s2 >> 16) & 255] ^ TE[2][(s3 >> 8) & 255] ^ TE[3][s0 & 255] ^ rk[k + 1]
        t2 = TE[0][s2 >> 24] ^ TE[1][(s3 >> 16) & 255] ^ TE[2][(s0 >> 8) & 255] ^ TE[3][s1 & 255] ^ rk[k + 2]
        t3 = TE[0][s3 >> 24] ^ TE[1][(s0 >> 16) & 255] ^ TE[2][(s1 >> 8) & 255] ^ TE[3][s2 & 255] ^ rk[k + 3]
        s0 = t0; s1 = t1; s2 = t2; s3 = t3
        k += 4
    _store(out, ((<uint32_t>S[s0 >> 24] << 24) | (<uint32_t>S[(s1 >> 16) & 255] << 16) | (<uint32_t>S[(s2 >> 8) & 255] << 8) | S[s3 & 255]) ^ rk[k])
    _store(out + 4, ((<uint32_t>S[s1 >> 24] << 24) | (<uint32_t>S[(s2 >> 16) & 255] << 16) | (<uint32_t>S[(s3 >> 8) & 255] << 8) | S[s0 & 255]) ^ rk[k + 1])
    _store(out + 8, ((<uint32_t>S[s2 >> 24] << 24) | (<uint32_t>S[(s3 >> 16) & 255] << 16) | (<uint32_t>S[(s0 >> 8) & 255] << 8) | S[s1 & 255]) ^ rk[k + 2])
    _store(out + 12, ((<uint32_t>S[s3 >> 24] << 24) | (<uint32_t>S[(s0 >> 16) & 255] << 16) | (<uint32_t>S[(s1 >> 8) & 255] << 8) | S[s2 & 255]) ^ rk[k + 3])


cdef void _dec(const uint32_t* dk, int nr, const uint8_t* inp, uint8_t* out) noexcept nogil:
    cdef uint32_t s0 = _load(inp) ^ dk[0]
    cdef uint32_t s1 = _load(inp + 4) ^ dk[1]
    cdef uint32_t s2 = _load(inp + 8) ^ dk[2]
    cdef uint32_t s3 = _load(inp + 12) ^ dk[3]
    cdef uint32_t t0, t1, t2, t3
    cdef int r, k = 4
    for r in range(nr - 1):
        t0 = TD[0][s0 >> 24] ^ TD[1][(s3 >> 16) & 255] ^ TD[2][(s2 >> 8) & 255] ^ TD[3][s1 & 255] ^ dk[k]
        t1 = TD[0][s1 >> 24] ^ TD[1][(s0 >> 16) & 255] ^ TD[2][(s3 >> 8) & 255] ^ TD[3][s2 & 255] ^ dk[k + 1]
        t2 = TD[0][s2 >> 24] ^ TD[1][(s1 >> 16) & 255] ^ TD[2][(s0 >> 8) & 255] ^ TD[3][s3 & 255] ^ dk[k + 2]
        t3 = TD[0][s3 >> 24] ^ TD[1][(s2 >> 16) & 255] ^ TD[2][(s1 >> 8) & 255] ^ TD[3][s0 & 255] ^ dk[k + 3]
        s0 = t0; s1 = t1; s2 = t2; s3 = t3
        k += 4
    _store(out, ((<uint32_t>SI[s0 >> 24] << 24) | (<uint32_t>SI[(s3 >> 16) & 255] << 16) | (<uint32_t>SI[(s2 >> 8) & 255] << 8) | SI[s1 & 255]) ^ dk[k])
    _store(out + 4, ((<uint32_t>SI[s1 >> 24] << 24) | (<uint32_t>SI[(s0 >> 16) & 255] << 16) | (<uint32_t>SI[(s3 >> 8) & 255] << 8) | SI[s2 & 255]) ^ dk[k + 1])
    _store(out + 8, ((<uint32_t>SI[s2 >> 24] << 24) | (<uint32_t>SI[(s1 >> 16) & 255] << 16) | (<uint32_t>SI[(s0 >> 8) & 255] << 8) | SI[s3 & 255]) ^ dk[k + 2])
    _store(out + 12, ((<uint32_t>SI[s3 >> 24] << 24) | (<uint32_t>SI[(s2 >> 16) & 255] << 16) | (<uint32_t>SI[(s1 >> 8) & 255] << 8) | SI[s0 & 255]) ^ dk[k + 3])


cdef int _fill(list words, uint32_t* dst):
    cdef int i
    for i in range(len(words)):
        dst[i] = words[i]
    return len(words) // 4 - 1


def aes_encrypt_block(bytes key, bytes block):
    if len(block) != 16:
        raise ValueError("AES block must be 16 bytes")
    cdef uint32_t rk[60]
    cdef int nr = _fill(_py_expand_key(key), rk)
    cdef uint8_t out[16]
    _enc(rk, nr, <const uint8_t*>block, out)
    return (<char*>out)[:16]


def aes_decrypt_block(bytes key, bytes block):
    if len(block) != 16:
        raise ValueError("AES block must be 16 bytes")
    cdef uint32_t dk[60]
    cdef int nr = _fill(_py_expand_decrypt_key(key), dk)
    cdef uint8_t out[16]
    _dec(dk, nr, <const uint8_t*>block, out)
    return (<char*>out)[:16]


def xts_decrypt(key, data, unsigned long long first_sector=0, int sector_size=512):
    key = bytes(key)
    if len(key) not in (32, 48, 64):
        raise ValueError(f"XTS key must be 32, 48 or 64 bytes, got {len(key)}")
    cdef const uint8_t[::1] src = memoryview(data).cast("B")
    cdef Py_ssize_t n = src.shape[0]
    if sector_size % 16 or n % sector_size:
        raise ValueError("data length must be a whole number of sectors")
    cdef int half = len(key) // 2
    cdef uint32_t dk[60]
    cdef uint32_t tk[60]
    cdef int nr = _fill(_py_expand_decrypt_key(key[:half]), dk)
    _fill(_py_expand_key(key[half:]), tk)
    out = bytearray(n)
    cdef uint8_t[::1] dst = out
    cdef uint8_t iv[16]
    cdef uint8_t tw[16]
    cdef uint8_t buf[16]
    cdef uint64_t lo, hi, carry, sector
    cdef Py_ssize_t s, off, j
    cdef Py_ssize_t nsec = n // sector_size if n else 0
    with nogil:
        for s in range(nsec):
            sector = first_sector + <uint64_t>s
            for j in range(8):
                iv[j] = (sector >> (8 * j)) & 255
                iv[8 + j] = 0
            _enc(tk, nr, iv, tw)
            lo = 0
            hi = 0
            for j in range(8):
                lo |= (<uint64_t>tw[j]) << (8 * j)
                hi |= (<uint64_t>tw[8 + j]) << (8 * j)
            off = s * sector_size
            while off < (s + 1) * sector_size:
                for j in range(8):
                    buf[j] = src[off + j] ^ ((lo >> (8 * j)) & 255)
                    buf[8 + j] = src[off + 8 + j] ^ ((hi >> (8 * j)) & 255)
                _dec(dk, nr, buf, buf)
                for j in range(8):
                    dst[off + j] = buf[j] ^ ((lo >> (8 * j)) & 255)
                    dst[off + 8 + j] = buf[8 + j] ^ ((hi >> (8 * j)) & 255)
                carry = hi >> 63
                hi = (hi << 1) | (lo >> 63)
                lo = lo << 1
                if carry:
                    lo ^= 0x87
                off += 16
    return bytes(out)


def af_merge(material, int block_size, int stripes, str hash_name):
    cdef const uint8_t[::1] mat = memoryview(material).cast("B")
    if mat.shape[0] < <Py_ssize_t>block_size * stripes:
        raise ValueError("key material shorter than stripes * block size")
    cdef int digest_size = hashlib.new(hash_name).digest_size
    acc = bytearray(block_size)
    cdef uint8_t[::1] a = acc
    cdef int i, j, chunk, nblk
    cdef Py_ssize_t base
    for i in range(stripes - 1):
        base = <Py_ssize_t>i * block_size
        for j in range(block_size):
            a[j] ^= mat[base + j]
        diffused = bytearray()
        nblk = (block_size + digest_size - 1) // digest_size
        for j in range(nblk):
            chunk = min(digest_size, block_size - j * digest_size)
            h = hashlib.new(hash_name)
            h.update(j.to_bytes(4, "big"))
            h.update(acc[j * digest_size:j * digest_size + chunk])
            diffused += h.digest()[:chunk]
        acc[:] = diffused
    base = <Py_ssize_t>(stripes - 1) * block_size
    for j in range(block_size):
        a[j] ^= mat[base + j]
    return bytes(acc)
