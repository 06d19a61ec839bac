"""Cold-boot memory corruption models and soft-input (LLR) construction.

Two channel models over the 1920-bit expanded key:
  * theoretical: 1-bits decay to the ground state 0 with probability delta0,
    0-bits never flip (delta1 = 0)
  * realistic:   additionally, 0-bits read back as 1 with probability delta1
    (typical values 0.0005 or 0.001)

The RNG is numpy's PCG64, seeded explicitly; every observation records its
seed so runs are reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import aes

# LLR magnitude cap before scaling; tanh(LLR_MAX/2) saturates harmlessly in
# double precision.
LLR_MAX = 20.0
DEFAULT_SCALE = 0.12


@dataclass(frozen=True)
class DecayParams:
    """Per-bit corruption probabilities; ground state is 0."""

    delta0: float
    delta1: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.delta0 <= 1.0:
            raise ValueError(f"delta0 out of [0,1]: {self.delta0}")
        if not 0.0 <= self.delta1 <= 1.0:
            raise ValueError(f"delta1 out of [0,1]: {self.delta1}")

    @property
    def theoretical(self) -> bool:
        return self.delta1 == 0.0


@dataclass(frozen=True)
class CorruptedObservation:
    """Observed bit vector plus the decay parameters and seed that produced it."""

    bits: np.ndarray
    params: DecayParams
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "bits", aes.check_bits(self.bits, aes.N_BITS))


def corrupt(schedule: np.ndarray, params: DecayParams, seed: int) -> CorruptedObservation:
    """Apply the asymmetric decay channel to an expanded key, bit-independently."""
    schedule = aes.check_bits(schedule, aes.N_BITS)
    rng = np.random.default_rng(seed)
    u = rng.random(aes.N_BITS)
    ones = schedule == 1
    out = schedule.copy()
    out[ones & (u < params.delta0)] = 0
    out[~ones & (u < params.delta1)] = 1
    return CorruptedObservation(bits=out, params=params, seed=seed)


def llr_pair(params: DecayParams) -> tuple[float, float]:
    """Unscaled LLRs (value for observed 0, value for observed 1).

    Sign convention: positive means the original bit is more likely 1.
    With a uniform prior on key bits the channel likelihood ratio is the
    posterior ratio:
      observed 1: log((1-delta0)/delta1)   (+LLR_MAX when delta1 = 0)
      observed 0: log(delta0/(1-delta1))   (-LLR_MAX when delta0 = 0)
    """
    d0, d1 = params.delta0, params.delta1
    if d0 == 0.0 or (1.0 - d1) == 0.0:
        llr0 = -LLR_MAX
    else:
        llr0 = float(np.clip(np.log(d0 / (1.0 - d1)), -LLR_MAX, LLR_MAX))
    if d1 == 0.0 or (1.0 - d0) == 0.0:
        llr1 = LLR_MAX if d1 == 0.0 else -LLR_MAX
    else:
        llr1 = float(np.clip(np.log((1.0 - d0) / d1), -LLR_MAX, LLR_MAX))
    return llr0, llr1


def to_soft_input(obs: CorruptedObservation, scale: float = DEFAULT_SCALE) -> np.ndarray:
    """Scaled per-bit LLR vector for the decoder."""
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    llr0, llr1 = llr_pair(obs.params)
    return np.where(obs.bits == 1, llr1, llr0) * scale


def save_observation(obs: CorruptedObservation, path: str | Path) -> None:
    """Write the observation as hex, with a JSON sidecar holding the parameters."""
    path = Path(path)
    path.write_text(aes.schedule_to_hex(obs.bits) + "\n")
    sidecar = {"delta0": obs.params.delta0, "delta1": obs.params.delta1, "seed": obs.seed}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar) + "\n")


def load_observation(path: str | Path) -> CorruptedObservation:
    path = Path(path)
    bits = aes.schedule_from_hex(path.read_text())
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return CorruptedObservation(
        bits=bits,
        params=DecayParams(delta0=meta["delta0"], delta1=meta["delta1"]),
        seed=meta["seed"],
    )
