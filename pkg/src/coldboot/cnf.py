"""Weighted partial CNF encoding of the key-recovery problem.

Three formula families:
  * the key-expansion constraints (hard): XOR triples for the linear rows,
    and per-S-box auxiliary output variables constrained by 256x8 table
    implication clauses, linked into the round equations by XOR triples
  * the memory observation: one unit clause per observed 1 (hard in the
    theoretical model, soft in the realistic one)
  * the decoder's confident assertions: weighted soft unit clauses

Variable numbering (deterministic): key bit i <-> variable i+1 (1..1920);
S-box output bit j of Z block t <-> variable 1921 + 32t + j (1921..2336).
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import aes
from .codegraph import VariableLayout, exact_z_blocks
from .decay import CorruptedObservation

Clause = tuple[int, ...]

NUM_KEY_VARS = aes.N_BITS          # 1..1920
NUM_VARS = aes.N_BITS + 32 * 13    # + auxiliary S-box outputs = 2336

DEFAULT_W_MEM = 2
DEFAULT_W_NN = 1


def key_var(i: int) -> int:
    """SAT variable for key bit i."""
    return i + 1


def z_var(t: int, j: int) -> int:
    """SAT variable for bit j of Z block t."""
    return NUM_KEY_VARS + 32 * t + j + 1


def validate_clause(clause: Clause) -> None:
    if not clause:
        raise ValueError("empty clause")
    seen = set(clause)
    if len(seen) != len(clause):
        raise ValueError(f"duplicate literal in {clause}")
    if any(-lit in seen for lit in clause):
        raise ValueError(f"complementary literals in {clause}")


def _xor3(a: int, b: int, c: int, parity: int) -> list[Clause]:
    """CNF for a xor b xor c = parity: block the four violating assignments."""
    clauses = []
    for x in range(2):
        for y in range(2):
            for z in range(2):
                if x ^ y ^ z != parity:
                    clauses.append((
                        -a if x else a,
                        -b if y else b,
                        -c if z else c,
                    ))
    return clauses


@dataclass(frozen=True)
class SboxInstance:
    """One S-box evaluation: 8 input key-bit variables, 8 auxiliary outputs."""

    input_vars: tuple[int, ...]
    output_vars: tuple[int, ...]


@functools.lru_cache(maxsize=1)
def encode_aes() -> tuple[tuple[Clause, ...], tuple[SboxInstance, ...]]:
    """Hard clause set for the key-expansion constraints, built once and cached."""
    layout = VariableLayout()
    clauses: list[Clause] = []
    # linear rows
    for i in range(layout.k, layout.n):
        if i % layout.b > 31:
            clauses.extend(_xor3(key_var(i - layout.k), key_var(i - 32), key_var(i), 0))
    # S-box instances: 4 per Z block, byte order pre-rotated on even rounds
    instances: list[SboxInstance] = []
    for t in range(layout.num_z_blocks):
        start = layout.source_bit_start(t)
        for m in range(4):
            src_byte = (m + 1) % 4 if layout.rotated(t) else m
            inputs = tuple(key_var(start + 8 * src_byte + q) for q in range(8))
            outputs = tuple(z_var(t, 8 * m + q) for q in range(8))
            instances.append(SboxInstance(inputs, outputs))
            for pattern in range(256):
                antecedent = tuple(
                    -v if (pattern >> (7 - q)) & 1 else v for q, v in enumerate(inputs)
                )
                out = aes.sbox(pattern)
                for q, ov in enumerate(outputs):
                    lit = ov if (out >> (7 - q)) & 1 else -ov
                    clauses.append(antecedent + (lit,))
    # linking rows: w_i xor w_{i-k} xor z = rcon bit
    for i in range(layout.k, layout.n):
        if i % layout.b <= 31:
            r = i // layout.b
            t = (i - layout.k) // layout.b
            parity = aes.rcon_bit(r, i % 32) if r % 2 == 0 else 0
            clauses.extend(_xor3(key_var(i - layout.k), z_var(t, i % 32), key_var(i), parity))
    return tuple(clauses), tuple(instances)


def encode_memory(obs: CorruptedObservation) -> list[Clause]:
    """One unit clause per observed 1-bit."""
    return [(key_var(int(i)),) for i in np.flatnonzero(obs.bits == 1)]


def encode_nn(assertions: list[tuple[int, int]]) -> list[Clause]:
    """One unit clause per decoder assertion (bit index, asserted value)."""
    idx = [i for i, _ in assertions]
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate assertion indices")
    return [(key_var(i) if val else -key_var(i),) for i, val in assertions]


@dataclass
class WcnfInstance:
    """Weighted partial CNF: hard clauses plus weighted soft clauses."""

    num_vars: int
    hard: list[Clause]
    soft: list[tuple[Clause, int]] = field(default_factory=list)

    def __post_init__(self):
        for clause, weight in self.soft:
            if weight < 1:
                raise ValueError(f"soft weight must be >= 1, got {weight}")

    @property
    def top(self) -> int:
        return 1 + sum(w for _, w in self.soft)

    def num_clauses(self) -> int:
        return len(self.hard) + len(self.soft)


def build_instance(
    obs: CorruptedObservation,
    assertions: list[tuple[int, int]] | None = None,
    w_mem: int = DEFAULT_W_MEM,
    w_nn: int = DEFAULT_W_NN,
) -> WcnfInstance:
    """Assemble the full attack instance for one observation.

    The expansion constraints are always hard; the memory clauses are hard in
    the theoretical model and soft (weight w_mem) in the realistic one; the
    decoder assertions are soft (weight w_nn).
    """
    hard_aes, _ = encode_aes()
    hard = list(hard_aes)
    soft: list[tuple[Clause, int]] = []
    memory = encode_memory(obs)
    if obs.params.theoretical:
        hard.extend(memory)
    else:
        soft.extend((c, w_mem) for c in memory)
    if assertions:
        soft.extend((c, w_nn) for c in encode_nn(assertions))
    return WcnfInstance(num_vars=NUM_VARS, hard=hard, soft=soft)


# ---------------------------------------------------------------------------
# evaluation against ground truth

def induced_assignment(schedule: np.ndarray) -> np.ndarray:
    """Boolean value per variable (index 1..NUM_VARS; slot 0 unused) for a valid schedule."""
    schedule = aes.check_bits(schedule, aes.N_BITS)
    assign = np.zeros(NUM_VARS + 1, dtype=np.uint8)
    assign[1: NUM_KEY_VARS + 1] = schedule
    assign[NUM_KEY_VARS + 1:] = exact_z_blocks(schedule)
    return assign


def _pack_clauses(clauses: list[Clause]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(c) for c in clauses)
    arr = np.zeros((len(clauses), width), dtype=np.int64)
    for row, clause in enumerate(clauses):
        arr[row, : len(clause)] = clause
    return np.abs(arr), arr < 0


def clauses_satisfied(clauses: list[Clause], assignment: np.ndarray) -> np.ndarray:
    """Vectorized per-clause satisfaction (padding literal 0 evaluates false)."""
    if not clauses:
        return np.zeros(0, dtype=bool)
    var_idx, negated = _pack_clauses(clauses)
    values = assignment[var_idx].astype(bool) ^ negated
    values &= var_idx != 0
    return values.any(axis=1)


def satisfies(clauses: list[Clause], assignment: np.ndarray) -> bool:
    return bool(clauses_satisfied(clauses, assignment).all())


def soft_cost(soft: list[tuple[Clause, int]], assignment: np.ndarray) -> int:
    """Total weight of falsified soft clauses."""
    if not soft:
        return 0
    sat = clauses_satisfied([c for c, _ in soft], assignment)
    weights = np.array([w for _, w in soft], dtype=np.int64)
    return int(weights[~sat].sum())


# ---------------------------------------------------------------------------
# DIMACS WCNF serialization (classic dialect)

def serialize_wcnf(instance: WcnfInstance) -> str:
    top = instance.top
    lines = [f"p wcnf {instance.num_vars} {instance.num_clauses()} {top}"]
    for clause in instance.hard:
        lines.append(f"{top} " + " ".join(map(str, clause)) + " 0")
    for clause, weight in instance.soft:
        lines.append(f"{weight} " + " ".join(map(str, clause)) + " 0")
    return "\n".join(lines) + "\n"


def parse_wcnf(text: str) -> WcnfInstance:
    """Parse classic DIMACS WCNF (for round-trip tests and the embedded solver)."""
    num_vars = top = None
    hard: list[Clause] = []
    soft: list[tuple[Clause, int]] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 5 or parts[1] != "wcnf":
                raise ValueError(f"bad header: {line}")
            num_vars, top = int(parts[2]), int(parts[4])
            continue
        if top is None:
            raise ValueError("clause before header")
        tokens = list(map(int, line.split()))
        if tokens[-1] != 0:
            raise ValueError(f"clause not zero-terminated: {line}")
        weight, clause = tokens[0], tuple(tokens[1:-1])
        if weight >= top:
            hard.append(clause)
        else:
            soft.append((clause, weight))
    if num_vars is None:
        raise ValueError("missing header")
    return WcnfInstance(num_vars=num_vars, hard=hard, soft=soft)


def save_variable_map(path: str | Path) -> None:
    """JSON sidecar describing the variable numbering, for decoding solver output."""
    layout = VariableLayout()
    meta = {
        "num_vars": NUM_VARS,
        "key_bits": {"first_var": 1, "count": NUM_KEY_VARS},
        "z_blocks": [
            {
                "block": t,
                "first_var": z_var(t, 0),
                "count": 32,
                "round": layout.block_round(t),
                "rotated": layout.rotated(t),
            }
            for t in range(layout.num_z_blocks)
        ],
    }
    Path(path).write_text(json.dumps(meta, indent=2) + "\n")
