import os
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from nyonscope import _pykernels, kernels
from nyonscope.forge import luks_ref

cryptography = pytest.importorskip("cryptography")
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes  # noqa: E402

BACKENDS = sorted(kernels.backends().items())
IDS = [name for name, _ in BACKENDS]


def _ecb(key, block):
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


def test_fips197_vector():
    key = bytes(range(16))
    pt = bytes.fromhex("00112233445566778899aabbccddeeff")
    for _, mod in BACKENDS:
        assert mod.aes_encrypt_block(key, pt).hex() == "69c4e0d86a7b0430d8cdb78070b4c55a"
        assert mod.aes_decrypt_block(key, bytes.fromhex("69c4e0d86a7b0430d8cdb78070b4c55a")) == pt


@pytest.mark.parametrize("name,mod", BACKENDS, ids=IDS)
@settings(max_examples=40, deadline=None)
@given(key=st.sampled_from([16, 24, 32]).flatmap(lambda n: st.binary(min_size=n, max_size=n)), block=st.binary(min_size=16, max_size=16))
def test_block_matches_openssl(name, mod, key, block):
    ct = _ecb(key, block)
    assert mod.aes_encrypt_block(key, block) == ct
    assert mod.aes_decrypt_block(key, ct) == block


@pytest.mark.parametrize("name,mod", BACKENDS, ids=IDS)
@settings(max_examples=25, deadline=None)
@given(key=st.sampled_from([32, 64]).flatmap(lambda n: st.binary(min_size=n, max_size=n)).filter(lambda k: k[:len(k) // 2] != k[len(k) // 2:]),
       sectors=st.integers(1, 4), first=st.integers(0, 2 ** 40))
def test_xts_inverts_reference(name, mod, key, sectors, first):
    plain = os.urandom(sectors * 512)
    ct = luks_ref.xts_encrypt(key, plain, first)
    assert mod.xts_decrypt(key, ct, first, 512) == plain


@settings(max_examples=20, deadline=None)
@given(secret=st.binary(min_size=32, max_size=32), stripes=st.integers(1, 40), seed=st.integers(0, 1000),
       hash_name=st.sampled_from(["sha256", "sha1"]))
def test_af_merge_inverts_reference_split(secret, stripes, seed, hash_name):
    import random
    split = luks_ref.af_split(secret, stripes, hash_name, random.Random(seed))
    for _, mod in BACKENDS:
        assert mod.af_merge(split, 32, stripes, hash_name) == secret


def test_backends_agree_on_large_buffer():
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    key, data = os.urandom(64), os.urandom(8 * 512)
    outs = {mod.xts_decrypt(key, data, 12345, 512) for _, mod in BACKENDS}
    assert len(outs) == 1


def test_env_var_forces_fallback():
    code = "from nyonscope import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, NYONSCOPE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_fallback_module_is_selectable():
    assert _pykernels.xts_decrypt is not None
    assert kernels.BACKEND in ("python", "compiled")
