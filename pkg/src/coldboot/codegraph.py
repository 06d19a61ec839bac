"""GF(2) parity-check formalization of the AES-256 key schedule.

The nonlinear S-box rows become linear by a change of variables: for each of
the 13 expansion rounds that evaluate S-boxes, a block of 32 auxiliary "Z"
columns holds the S-box output word for that round (rotation pre-applied on
even rounds, so every row is a plain XOR). A final constant-1 bias column
absorbs the RCON constants, giving a homogeneous system H.[x,1] = 0.

Two matrices are built here:
  * full H:     1664 rows x 2337 columns (key bits + 13*32 Z columns + bias)
  * linear H'': the 1248 XOR-only rows over the 1920 key columns (the
    "linear constraints only" ablation)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import aes


@dataclass(frozen=True)
class VariableLayout:
    """Column layout of the extended variable vector [w, Z_0..Z_12, bias]."""

    n: int = aes.N_BITS
    k: int = aes.KEY_BITS
    b: int = aes.BLOCK_BITS

    def __post_init__(self):
        if (self.n - self.k) % self.b != 0:
            raise ValueError("block size must divide n - k")

    @property
    def num_z_blocks(self) -> int:
        return (self.n - self.k) // self.b  # 13 for AES-256

    @property
    def bias_col(self) -> int:
        return self.n + 32 * self.num_z_blocks  # 2336

    @property
    def total_cols(self) -> int:
        return self.bias_col + 1  # 2337

    def z_col(self, t: int, j: int) -> int:
        """Column of bit j (0..31) of Z block t."""
        return self.n + 32 * t + j

    def block_round(self, t: int) -> int:
        """Expansion round consuming Z block t (rounds 2..14)."""
        return t + 2

    def rotated(self, t: int) -> bool:
        """Whether block t stores S(R(W')) rather than S(W')."""
        return self.block_round(t) % 2 == 0

    def source_bit_start(self, t: int) -> int:
        """First bit index of the double word feeding block t."""
        return self.k + t * self.b - 32


@dataclass
class CodeGraph:
    """Sparse GF(2) parity-check matrix with Tanner-graph adjacency."""

    layout: VariableLayout
    num_cols: int
    rows: list[np.ndarray]                       # sorted column indices per row
    # edge e runs over rows in order; edge_check[e], edge_var[e] name its endpoints
    edge_check: np.ndarray = field(init=False)
    edge_var: np.ndarray = field(init=False)

    def __post_init__(self):
        checks, variables = [], []
        for c, cols in enumerate(self.rows):
            checks.extend([c] * len(cols))
            variables.extend(cols)
        self.edge_check = np.asarray(checks, dtype=np.int64)
        self.edge_var = np.asarray(variables, dtype=np.int64)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    @property
    def num_edges(self) -> int:
        return len(self.edge_var)

    def check_degrees(self) -> np.ndarray:
        return np.array([len(r) for r in self.rows])

    def variable_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_var, minlength=self.num_cols)

    def variable_adjacency(self) -> list[np.ndarray]:
        """Edge indices incident to each variable."""
        order = np.argsort(self.edge_var, kind="stable")
        bounds = np.searchsorted(self.edge_var[order], np.arange(self.num_cols + 1))
        return [order[bounds[v]: bounds[v + 1]] for v in range(self.num_cols)]

    def check_adjacency(self) -> list[np.ndarray]:
        """Edge indices incident to each check (edges are row-major, so contiguous)."""
        bounds = np.searchsorted(self.edge_check, np.arange(self.num_rows + 1))
        return [np.arange(bounds[c], bounds[c + 1]) for c in range(self.num_rows)]

    def syndrome(self, x: np.ndarray) -> np.ndarray:
        """H.x over GF(2) for a full column assignment."""
        x = aes.check_bits(x, self.num_cols)
        return np.array([x[cols].sum() & 1 for cols in self.rows], dtype=np.uint8)

    def export_text(self, path: str | Path) -> None:
        """Header "rows cols", then one line of column indices per row."""
        lines = [f"{self.num_rows} {self.num_cols}"]
        lines += [" ".join(map(str, cols)) for cols in self.rows]
        Path(path).write_text("\n".join(lines) + "\n")


def is_sbox_row(i: int, layout: VariableLayout) -> bool:
    """Whether key bit i (k <= i < n) is constrained through an S-box."""
    return i % layout.b <= 31


def build_full(layout: VariableLayout | None = None) -> CodeGraph:
    """Extended matrix H over [w, Z blocks, bias]; every valid schedule satisfies H.[x,1]=0."""
    layout = layout or VariableLayout()
    rows = []
    for i in range(layout.k, layout.n):
        r = i // layout.b
        if is_sbox_row(i, layout):
            t = (i - layout.k) // layout.b
            cols = [i - layout.k, i, layout.z_col(t, i % 32)]
            if r % 2 == 0 and aes.rcon_bit(r, i % 32):
                cols.append(layout.bias_col)
        else:
            cols = [i - layout.k, i - 32, i]
        rows.append(np.array(sorted(cols), dtype=np.int64))
    return CodeGraph(layout=layout, num_cols=layout.total_cols, rows=rows)


def build_linear(layout: VariableLayout | None = None) -> CodeGraph:
    """XOR-only ablation H'': the 1248 linear rows over the 1920 key columns."""
    layout = layout or VariableLayout()
    rows = [
        np.array(sorted((i - layout.k, i - 32, i)), dtype=np.int64)
        for i in range(layout.k, layout.n)
        if not is_sbox_row(i, layout)
    ]
    return CodeGraph(layout=layout, num_cols=layout.n, rows=rows)


def exact_z_blocks(schedule: np.ndarray, layout: VariableLayout | None = None) -> np.ndarray:
    """13*32 exact Z bits for a schedule (rotation pre-applied per block)."""
    layout = layout or VariableLayout()
    schedule = aes.check_bits(schedule, layout.n)
    out = np.zeros(32 * layout.num_z_blocks, dtype=np.uint8)
    for t in range(layout.num_z_blocks):
        word = aes.round_sbox_word(schedule, layout.block_round(t))
        for j in range(32):
            out[32 * t + j] = (word >> (31 - j)) & 1
    return out


def extend_assignment(schedule: np.ndarray, layout: VariableLayout | None = None) -> np.ndarray:
    """Full 2337-bit column assignment [w, exact Z, 1] for a valid schedule."""
    layout = layout or VariableLayout()
    return np.concatenate([
        aes.check_bits(schedule, layout.n),
        exact_z_blocks(schedule, layout),
        np.array([1], dtype=np.uint8),
    ])
