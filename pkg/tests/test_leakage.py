import numpy as np
import pytest

from towerbox import aes, leakage
from towerbox.leakage import HW, LeakConfig, generate_set, read_traces, sample_trace, write_traces

KEY = bytes.fromhex("3c1f8a52e06b9d47c2a5f0137e8b64d9")


def test_hw_table():
    assert HW.tolist() == [bin(v).count("1") for v in range(256)]


def test_leak_points_zero_path():
    assert leakage.leak_points(0, 0) == [(0,), (0x63,)]


def test_leak_points_protected(catalog):
    a, b = catalog[0], catalog[7]
    pa = leakage.leak_points(0x5A, 0x3C, a)
    pb = leakage.leak_points(0x5A, 0x3C, b)
    assert len(pa) == len(leakage.PROTECTED_POINTS)
    assert pa[0] == pb[0] == (0x5A ^ 0x3C,)
    assert pa[-1] == pb[-1] == (aes.sbox_lut(0x5A ^ 0x3C),)
    assert pa[1] != pb[1]
    with_decoys = leakage.leak_points(0x5A, 0x3C, a, [catalog[1], catalog[2]])
    assert len(with_decoys[-1]) == 3 and with_decoys[-1][0] == pa[-1][0]


def test_config_validation():
    with pytest.raises(ValueError):
        LeakConfig("masked")
    with pytest.raises(ValueError):
        LeakConfig(noise_sigma=-1)
    with pytest.raises(ValueError):
        LeakConfig(target_byte=16)
    assert LeakConfig("protected").samples_per_trace == 10
    assert LeakConfig().sbox_sample == 1


def test_noiseless_unprotected_is_exact_hw():
    ts = generate_set(20000, KEY, LeakConfig(target_byte=5), seed=0x11112222)
    x = ts.plaintexts[:, 5] ^ KEY[5]
    assert np.array_equal(ts.samples[:, 0], HW[x])
    assert np.array_equal(ts.samples[:, 1], HW[aes.SBOX[x]])


def test_model_soundness_all_pairs():
    for k in range(256):
        for pt in range(256):
            assert leakage.leak_points(pt, k)[1] == (aes.sbox_lut(pt ^ k),)


def test_decoy_point_range(catalog):
    ts = generate_set(5000, KEY, LeakConfig("protected", decoys=True), 0x0BAD0C0D, catalog)
    s = ts.samples
    assert s.min() >= 0 and s[:, :9].max() <= 8 and s[:, 9].max() <= 24
    assert s[:, 9].max() > 8
    off = generate_set(5000, KEY, LeakConfig("protected", decoys=False), 0x0BAD0C0D, catalog)
    assert off.samples[:, 9].max() <= 8


@pytest.mark.parametrize("mode", ["unprotected", "protected"])
def test_vectorized_matches_serial(mode, catalog):
    cfg = LeakConfig(mode, True, 2.5, 3, algorithmic_noise=True)
    seed = 0x1234ABCD
    ts = generate_set(300, KEY, cfg, seed, catalog)
    pt_rng, noise_rng = leakage._streams(seed)
    ctx = leakage.make_context(seed, catalog)
    for i in range(300):
        tr = sample_trace(pt_rng.bytes(16), KEY, cfg, ctx if mode == "protected" else None,
                          noise_rng)
        assert tr.plaintext == bytes(ts.plaintexts[i])
        assert tr.ciphertext == bytes(ts.ciphertexts[i])
        np.testing.assert_allclose(tr.samples, ts.samples[i], rtol=1e-6)
        if mode == "protected":
            assert tr.set_id == ts.set_ids[i]


def test_prefix_consistency(catalog):
    cfg = LeakConfig("protected", True, 3.0)
    big = generate_set(1000, KEY, cfg, 0x00770077, catalog)
    small = generate_set(400, KEY, cfg, 0x00770077, catalog)
    assert np.array_equal(big.samples[:400], small.samples)
    assert np.array_equal(big.plaintexts[:400], small.plaintexts)


def test_paired_plaintexts_and_compatible_ciphertexts(catalog):
    u = generate_set(500, KEY, LeakConfig(noise_sigma=1.0), 0x5EED0001)
    p = generate_set(500, KEY, LeakConfig("protected", noise_sigma=1.0), 0x5EED0001, catalog)
    assert np.array_equal(u.plaintexts, p.plaintexts)
    assert np.array_equal(u.ciphertexts, p.ciphertexts)
    assert np.array_equal(u.ciphertexts, aes.encrypt_blocks(u.plaintexts, KEY))


def test_same_plaintext_different_sets_differ(catalog):
    cfg = LeakConfig("protected", False, 0.0)
    ctx = leakage.make_context(0x31415926, catalog)
    rng = np.random.default_rng(0)
    pt = bytes(16)
    traces = [sample_trace(pt, KEY, cfg, ctx, rng) for _ in range(40)]
    by_set = {t.set_id: t.samples for t in traces}
    assert len(by_set) > 2
    vecs = list(by_set.values())
    assert any(not np.array_equal(vecs[0], v) for v in vecs[1:])
    assert len({t.samples[-1] for t in traces}) == 1


def test_snr_decreases_with_sigma():
    corrs = []
    for sigma in (0.0, 1.0, 2.0, 4.0, 8.0, 16.0):
        ts = generate_set(20000, KEY, LeakConfig(noise_sigma=sigma), 0x00420042)
        pred = HW[aes.SBOX[ts.plaintexts[:, 0] ^ KEY[0]]]
        corrs.append(np.corrcoef(pred, ts.samples[:, 1])[0, 1])
    assert corrs[0] == pytest.approx(1.0)
    assert all(a > b for a, b in zip(corrs, corrs[1:]))


def test_determinism_and_file_round_trip(tmp_path, catalog):
    cfg = LeakConfig("protected", True, 4.0, 2)
    a = generate_set(256, KEY, cfg, 0xCAFE0001, catalog)
    b = generate_set(256, KEY, cfg, 0xCAFE0001, catalog)
    write_traces(a, tmp_path / "a.bin")
    write_traces(b, tmp_path / "b.bin")
    raw = (tmp_path / "a.bin").read_bytes()
    assert raw == (tmp_path / "b.bin").read_bytes()
    assert raw[:8] == b"SCTRACE1"
    assert len(raw) == 8 + 4 * 3 + 2 + 8 + 1 + 16 + 256 * (32 + 4 * 10)
    back = read_traces(tmp_path / "a.bin")
    assert back.config == cfg
    assert np.array_equal(back.samples, a.samples)
    assert np.array_equal(back.plaintexts, a.plaintexts)
    assert back.key_fingerprint == leakage.key_fingerprint(KEY)
    assert KEY not in raw


def test_read_rejects_corrupt_files(tmp_path):
    ts = generate_set(10, KEY, LeakConfig(), 0x00010001)
    path = tmp_path / "t.bin"
    write_traces(ts, path)
    raw = path.read_bytes()
    cases = {
        "magic": b"XXTRACE1" + raw[8:],
        "truncated": raw[:-3],
        "header": raw[:20],
        "version": raw[:8] + (2).to_bytes(4, "little") + raw[12:],
    }
    for name, data in cases.items():
        bad = tmp_path / f"{name}.bin"
        bad.write_bytes(data)
        with pytest.raises(leakage.TraceFileError):
            read_traces(bad)


def test_generate_set_rejects_bad_input(catalog):
    with pytest.raises(ValueError):
        generate_set(0, KEY, LeakConfig(), 0x00010001)
    with pytest.raises(ValueError):
        generate_set(5, KEY[:8], LeakConfig(), 0x00010001)
    with pytest.raises(ValueError):
        generate_set(5, KEY, LeakConfig("protected"), 0x00010001)
