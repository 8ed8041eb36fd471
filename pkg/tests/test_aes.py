import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from towerbox import aes, gf
from towerbox.lfsr import RandomizationContext

# FIPS-197 appendix C.1 and SP 800-38A F.1.1
KATS = [
    ("000102030405060708090a0b0c0d0e0f", "00112233445566778899aabbccddeeff",
     "69c4e0d86a7b0430d8cdb78070b4c55a"),
    ("2b7e151628aed2a6abf7158809cf4f3c", "6bc1bee22e409f96e93d7e117393172a",
     "3ad77bb40d7a3660a89ecaf32466ef97"),
    ("2b7e151628aed2a6abf7158809cf4f3c", "ae2d8a571e03ac9c9eb76fac45af8e51",
     "f5d3d58503b9699de785895a96fdbaaf"),
]

blocks16 = st.binary(min_size=16, max_size=16)


def test_sbox_known_entries():
    assert aes.sbox_lut(0x00) == 0x63
    assert aes.sbox_lut(0x53) == 0xED
    assert aes.sbox_lut(0xFF) == 0x16
    assert aes.inv_sbox_lut(0x63) == 0x00
    assert sorted(aes.SBOX.tolist()) == list(range(256))


def test_affine_inverse():
    for b in range(256):
        assert aes.inv_affine(aes.affine(b)) == b


def test_key_expansion_fips_example():
    rk = aes.key_expand(bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c"))
    assert bytes(rk[10]).hex() == "d014f9a8c9ee2589e13f0cc8b6630ca6"
    assert bytes(rk[1]).hex() == "a0fafe1788542cb123a339392a6c7605"


def test_composite_sbox_every_set(catalog):
    for ps in catalog:
        for x in range(256):
            y = aes.sbox_composite(x, ps)
            assert y == aes.sbox_lut(x)
            assert aes.inv_sbox_composite(y, ps) == x


def test_stage_intermediates_do_not_change_output(catalog):
    ps = catalog[3]
    for x in range(256):
        st_ = aes.sbox_composite_stages(x, ps)
        assert st_.mapped == gf.matvec_gf2(ps.delta, x)
        assert st_.pre_affine == gf.gf8_inv(x)
        assert st_.out == aes.sbox_lut(x)


@pytest.mark.parametrize("key,pt,ct", KATS)
def test_kat_all_backends(key, pt, ct, catalog):
    k, p = bytes.fromhex(key), bytes.fromhex(pt)
    assert aes.encrypt_block(p, k).hex() == ct
    assert aes.decrypt_block(bytes.fromhex(ct), k) == p
    for ps in catalog:
        assert aes.encrypt_block(p, k, ps).hex() == ct
        assert aes.decrypt_block(bytes.fromhex(ct), k, ps) == p
    ctx = RandomizationContext.from_seed(0x12345678, catalog)
    assert aes.encrypt_block(p, k, ctx).hex() == ct


def test_against_cryptography_library(rng):
    ciphers = pytest.importorskip("cryptography.hazmat.primitives.ciphers")
    key = rng.bytes(16)
    data = rng.bytes(16 * 500)
    enc = ciphers.Cipher(ciphers.algorithms.AES(key), ciphers.modes.ECB()).encryptor()
    ref = enc.update(data) + enc.finalize()
    blocks = np.frombuffer(data, dtype=np.uint8).reshape(-1, 16)
    assert aes.encrypt_blocks(blocks, key).tobytes() == ref


def test_randomized_matches_lut(catalog, rng):
    blocks = rng.integers(0, 256, (10_000, 16), dtype=np.uint8)
    key = rng.bytes(16)
    ref = aes.encrypt_blocks(blocks, key)
    ctx = RandomizationContext.from_seed(0xBEEF0042, catalog)
    assert np.array_equal(aes.encrypt_blocks(blocks, key, ctx), ref)
    ctx = RandomizationContext.from_seed(0xBEEF0042, catalog)
    assert np.array_equal(aes.decrypt_blocks(ref, key, ctx), blocks)


def test_round_trip_many_keys(catalog, rng):
    n = 10_000
    blocks = rng.integers(0, 256, (n, 16), dtype=np.uint8)
    keys = rng.integers(0, 256, (n, 16), dtype=np.uint8)
    for backend in ("lut", catalog[0], catalog[31]):
        ct = aes.encrypt_blocks(blocks, keys, backend)
        assert np.array_equal(aes.decrypt_blocks(ct, keys, backend), blocks)
    packed = aes.packed_for(tuple(catalog))
    idx = rng.integers(0, 32, n)
    ct = aes.encrypt_blocks(blocks, keys, packed, idx)
    assert np.array_equal(ct, aes.encrypt_blocks(blocks, keys))
    assert np.array_equal(aes.decrypt_blocks(ct, keys, packed, idx), blocks)


@given(blocks16, blocks16)
def test_round_trip_property(pt, key):
    assert aes.decrypt_block(aes.encrypt_block(pt, key), key) == pt


@given(blocks16)
def test_shift_rows_and_mix_columns_invert(b):
    s = np.frombuffer(b, dtype=np.uint8).reshape(1, 16)
    assert np.array_equal(aes.inv_shift_rows(aes.shift_rows(s)), s)
    assert np.array_equal(aes.inv_mix_columns(aes.mix_columns(s)), s)


def test_mix_columns_known_column():
    col = np.array([[0xDB, 0x13, 0x53, 0x45] * 4], dtype=np.uint8)
    assert bytes(aes.mix_columns(col)[0, :4]).hex() == "8e4da1bc"


def test_input_validation():
    with pytest.raises(ValueError):
        aes.encrypt_block(b"short", bytes(16))
    with pytest.raises(ValueError):
        aes.encrypt_blocks(np.zeros((2, 15), dtype=np.uint8), bytes(16))
    with pytest.raises(ValueError):
        aes.encrypt_blocks(np.zeros((2, 16), dtype=np.uint8), bytes(16), "fast")
