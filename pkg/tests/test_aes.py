import numpy as np
import pytest

from coldboot import aes


# ---------------------------------------------------------------------------
# independent reference key expansion (byte-oriented, RCON derived by GF
# doubling) used as the oracle for expand_key


def _xtime(a):
    a <<= 1
    return (a ^ 0x1B) & 0xFF if a & 0x100 else a


def reference_expand(key: bytes) -> bytes:
    assert len(key) == 32
    out = list(key)
    rcon = 1
    i = 32
    while len(out) < 240:
        t = out[-4:]
        if i % 32 == 0:
            t = t[1:] + t[:1]
            t = [int(aes.SBOX[b]) for b in t]
            t[0] ^= rcon
            rcon = _xtime(rcon)
        elif i % 32 == 16:
            t = [int(aes.SBOX[b]) for b in t]
        out.extend(out[i - 32 + j] ^ t[j] for j in range(4))
        i += 4
    return bytes(out)


def test_sbox_known_values():
    assert aes.sbox(0x00) == 0x63
    assert aes.sbox(0x01) == 0x7C
    assert aes.sbox(0x53) == 0xED


def test_sbox_table_matches_algebraic_construction():
    for x in range(256):
        assert aes.sbox(x) == aes.sbox_algebraic(x), f"mismatch at {x:#04x}"


def test_sbox_is_bijection():
    assert len({aes.sbox(x) for x in range(256)}) == 256


def test_sbox_rejects_out_of_range():
    with pytest.raises(ValueError):
        aes.sbox(256)
    with pytest.raises(ValueError):
        aes.sbox_algebraic(-1)


def test_rot_word():
    assert aes.rot_word(0x00000000) == 0x00000000
    assert aes.rot_word(0x01020304) == 0x02030401
    w = 0xDEADBEEF
    for _ in range(4):
        w = aes.rot_word(w)
    assert w == 0xDEADBEEF


def test_expand_key_shape_and_prefix():
    rng = np.random.default_rng(1)
    key = aes.random_key(rng)
    sched = aes.expand_key(key)
    assert sched.shape == (1920,)
    assert np.array_equal(sched[:256], key)


def test_expand_key_matches_reference_all_zero():
    sched = aes.expand_key(np.zeros(256, dtype=np.uint8))
    ref = reference_expand(bytes(32))
    assert aes.bytes_from_bits(sched) == ref


def test_expand_key_matches_reference_random():
    rng = np.random.default_rng(42)
    for _ in range(100):
        key = aes.random_key(rng)
        sched = aes.expand_key(key)
        assert aes.bytes_from_bits(sched) == reference_expand(aes.bytes_from_bits(key))


def test_expand_key_deterministic():
    rng = np.random.default_rng(7)
    key = aes.random_key(rng)
    assert np.array_equal(aes.expand_key(key), aes.expand_key(key))


def test_verify_constraints_accepts_valid_schedules():
    rng = np.random.default_rng(3)
    for _ in range(50):
        assert aes.verify_constraints(aes.expand_key(aes.random_key(rng)))


def test_verify_constraints_rejects_single_bit_flips():
    rng = np.random.default_rng(4)
    sched = aes.expand_key(aes.random_key(rng))
    for i in range(0, 1920, 7):  # stride keeps runtime sane; full sweep in acceptance
        flipped = sched.copy()
        flipped[i] ^= 1
        assert not aes.verify_constraints(flipped), f"flip at {i} undetected"


def test_verify_constraints_rejects_all_zero_vector():
    # RCON constants force nonzero bits in even-round constraints
    assert not aes.verify_constraints(np.zeros(1920, dtype=np.uint8))


def test_hex_round_trip():
    rng = np.random.default_rng(5)
    key = aes.random_key(rng)
    assert np.array_equal(aes.key_from_hex(aes.key_to_hex(key)), key)
    sched = aes.expand_key(key)
    assert np.array_equal(aes.schedule_from_hex(aes.schedule_to_hex(sched)), sched)
    with pytest.raises(ValueError):
        aes.key_from_hex("ab")


def test_rcon_bit_layout():
    # round 2 uses c_1 = 0x01: only bit 7 of the word is set
    assert [aes.rcon_bit(2, j) for j in range(32)] == [0] * 7 + [1] + [0] * 24
    # round 4 uses c_2 = 0x02: bit 6
    assert aes.rcon_bit(4, 6) == 1
    with pytest.raises(ValueError):
        aes.rcon_word(3)
