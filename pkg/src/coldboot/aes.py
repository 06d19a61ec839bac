"""AES-256 key schedule arithmetic.

Exact S-box, round constants, key expansion and constraint verification.
This module is the ground-truth oracle for everything else in the package.

Bit conventions (shared by all modules):
  * the expanded key is a vector of n = 1920 bits, w_0 .. w_1919
  * bit index within a byte is most-significant-first, i.e. byte value
    0x80 has bit 0 set
  * byte W_i = (w_i .. w_{i+7}), double word W'_i = (w_i .. w_{i+31})
"""

from __future__ import annotations

import numpy as np

KEY_BITS = 256          # initial key size k
N_BITS = 1920           # expanded key size n
BLOCK_BITS = 128        # bits produced per expansion round b
NUM_ROUNDS = N_BITS // BLOCK_BITS           # 15 rounds of 128 bits (rounds 0..14)
NUM_CONSTRAINTS = N_BITS - KEY_BITS         # 1664 bit constraints

# Rijndael S-box lookup table.
SBOX = np.array([
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
], dtype=np.uint8)

# RCON bytes c_1..c_10 (AES-256 key expansion only consumes c_1..c_7).
RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36)


def _gf_mul(a: int, b: int) -> int:
    """Multiply in GF(2^8) with the Rijndael polynomial x^8+x^4+x^3+x+1."""
    p = 0
    for _ in range(8):
        if b & 1:
            p ^= a
        hi = a & 0x80
        a = (a << 1) & 0xFF
        if hi:
            a ^= 0x1B
        b >>= 1
    return p


def _gf_inv(a: int) -> int:
    """Multiplicative inverse in GF(2^8); 0 maps to 0 by convention."""
    if a == 0:
        return 0
    # a^254 = a^-1 in GF(2^8)
    result = 1
    power = a
    e = 254
    while e:
        if e & 1:
            result = _gf_mul(result, power)
        power = _gf_mul(power, power)
        e >>= 1
    return result


def sbox_algebraic(byte: int) -> int:
    """S-box from first principles: GF(2^8) inversion followed by the affine map."""
    if not 0 <= byte <= 255:
        raise ValueError(f"S-box input out of range: {byte}")
    x = _gf_inv(byte)
    # y_i = x_i ^ x_{i+4} ^ x_{i+5} ^ x_{i+6} ^ x_{i+7} ^ c_i, indices mod 8 (LSB-first), c = 0x63
    y = 0
    for i in range(8):
        bit = ((x >> i) ^ (x >> ((i + 4) % 8)) ^ (x >> ((i + 5) % 8))
               ^ (x >> ((i + 6) % 8)) ^ (x >> ((i + 7) % 8)) ^ (0x63 >> i)) & 1
        y |= bit << i
    return y


def sbox(byte: int) -> int:
    """Rijndael S-box via the lookup table."""
    if not 0 <= byte <= 255:
        raise ValueError(f"S-box input out of range: {byte}")
    return int(SBOX[byte])


def rot_word(word: int) -> int:
    """One-byte left rotation: (B0,B1,B2,B3) -> (B1,B2,B3,B0)."""
    word &= 0xFFFFFFFF
    return ((word << 8) | (word >> 24)) & 0xFFFFFFFF


def sub_word(word: int) -> int:
    """Apply the S-box to each byte of a 32-bit word."""
    return (sbox((word >> 24) & 0xFF) << 24 | sbox((word >> 16) & 0xFF) << 16
            | sbox((word >> 8) & 0xFF) << 8 | sbox(word & 0xFF))


def rcon_word(round_index: int) -> int:
    """32-bit round-constant word for an even expansion round.

    The constant byte c_{r/2} sits in the first byte position (bits 0..7 of
    the word, MSB-first); the remaining 24 bits are zero.
    """
    if round_index % 2 != 0 or not 2 <= round_index < NUM_ROUNDS:
        raise ValueError(f"no round constant for round {round_index}")
    return RCON[round_index // 2 - 1] << 24


def rcon_bit(round_index: int, j: int) -> int:
    """Bit j (0..31, MSB-first) of the round-constant word for an even round."""
    return (rcon_word(round_index) >> (31 - j)) & 1


# ---------------------------------------------------------------------------
# bit/byte/hex plumbing

def bits_from_bytes(data: bytes | np.ndarray) -> np.ndarray:
    """Unpack bytes to a bit vector, most significant bit first."""
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))


def bytes_from_bits(bits: np.ndarray) -> bytes:
    if len(bits) % 8 != 0:
        raise ValueError("bit vector length must be a multiple of 8")
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def key_from_hex(text: str) -> np.ndarray:
    """Parse a 64-hex-char initial key into a 256-bit vector."""
    text = text.strip()
    if len(text) != KEY_BITS // 4:
        raise ValueError(f"initial key must be {KEY_BITS // 4} hex chars, got {len(text)}")
    return bits_from_bytes(bytes.fromhex(text))


def key_to_hex(bits: np.ndarray) -> str:
    check_bits(bits, KEY_BITS)
    return bytes_from_bits(bits).hex()


def schedule_from_hex(text: str) -> np.ndarray:
    """Parse a 480-hex-char expanded key into a 1920-bit vector."""
    text = text.strip()
    if len(text) != N_BITS // 4:
        raise ValueError(f"expanded key must be {N_BITS // 4} hex chars, got {len(text)}")
    return bits_from_bytes(bytes.fromhex(text))


def schedule_to_hex(bits: np.ndarray) -> str:
    check_bits(bits, N_BITS)
    return bytes_from_bits(bits).hex()


def check_bits(bits: np.ndarray, expected_len: int) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.shape != (expected_len,):
        raise ValueError(f"expected {expected_len} bits, got shape {bits.shape}")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bit vector must be binary")
    return bits.astype(np.uint8)


# ---------------------------------------------------------------------------
# key expansion

def expand_key(key_bits: np.ndarray) -> np.ndarray:
    """Expand a 256-bit initial key into the 1920-bit AES-256 key schedule."""
    key_bits = check_bits(key_bits, KEY_BITS)
    key = bytes_from_bits(key_bits)
    nk = 8
    num_words = N_BITS // 32  # 60
    words = [int.from_bytes(key[4 * i: 4 * i + 4], "big") for i in range(nk)]
    for i in range(nk, num_words):
        temp = words[i - 1]
        if i % nk == 0:
            temp = sub_word(rot_word(temp)) ^ (RCON[i // nk - 1] << 24)
        elif i % nk == 4:
            temp = sub_word(temp)
        words.append(words[i - nk] ^ temp)
    out = b"".join(w.to_bytes(4, "big") for w in words)
    return bits_from_bytes(out)


def source_word(bits: np.ndarray, round_index: int) -> int:
    """The 32-bit double word feeding round `round_index`'s S-boxes (bits i_start-32 .. i_start-1)."""
    start = round_index * BLOCK_BITS - 32
    return int.from_bytes(bytes_from_bits(bits[start: start + 32]), "big")


def round_sbox_word(bits: np.ndarray, round_index: int) -> int:
    """Exact S-box output word consumed by round `round_index` (rotation pre-applied on even rounds)."""
    w = source_word(bits, round_index)
    if round_index % 2 == 0:
        w = rot_word(w)
    return sub_word(w)


def verify_constraints(bits: np.ndarray) -> bool:
    """Check all 1664 bit constraints of the key expansion against the exact S-box."""
    bits = check_bits(bits, N_BITS)
    # XOR rows: i % b > 31
    idx = np.arange(KEY_BITS, N_BITS)
    xor_idx = idx[idx % BLOCK_BITS > 31]
    if np.any(bits[xor_idx] != (bits[xor_idx - KEY_BITS] ^ bits[xor_idx - 32])):
        return False
    # S-box rows, 32 per round
    for r in range(2, NUM_ROUNDS):
        sw = round_sbox_word(bits, r)
        const = rcon_word(r) if r % 2 == 0 else 0
        i0 = r * BLOCK_BITS
        for j in range(32):
            s_bit = (sw >> (31 - j)) & 1
            c_bit = (const >> (31 - j)) & 1
            if bits[i0 + j] != bits[i0 + j - KEY_BITS] ^ s_bit ^ c_bit:
                return False
    return True


def random_key(rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=KEY_BITS, dtype=np.uint8)
