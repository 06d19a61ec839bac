"""End-to-end key recovery: decay simulation, decoding, MaxSAT search.

A single attack takes a corrupted key schedule, optionally runs a trained
belief-propagation decoder over it, turns the most confident decoder outputs
into soft assertions, and hands the whole thing to the MaxSAT solver.
Success means the first 256 recovered bits expand to a schedule identical to
the ground truth.

Campaigns run many keys with per-key seeds derived from one master seed, so
the same seed always produces the same keys, the same corruptions, and a
byte-identical results CSV.  Wall-clock times go to a separate timing file
to keep the main CSV reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import aes, cnf, decay, decoder
from . import solver as solver_mod

MAXSAT_ONLY = "MAXSAT_ONLY"
MODES = decoder.VARIANTS + (MAXSAT_ONLY,)


@dataclass(frozen=True)
class AttackConfig:
    mode: str = "FULL"  # decoder variant, or MAXSAT_ONLY to skip the decoder
    delta0: float = 0.5
    delta1: float = 0.0
    n_l: int = 30
    n_h: int = 0
    invert_polarity: bool = False
    scale: float = decay.DEFAULT_SCALE
    w_mem: int = cnf.DEFAULT_W_MEM
    w_nn: int = cnf.DEFAULT_W_NN
    solver: solver_mod.SolverConfig = field(default_factory=solver_mod.SolverConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def params(self) -> decay.DecayParams:
        return decay.DecayParams(self.delta0, self.delta1)


@dataclass(frozen=True)
class AttackResult:
    success: bool
    status: str
    solver_cost: int | None
    recovered_key: np.ndarray | None
    assertions_correct: int | None  # out of n_l + n_h, None for MAXSAT_ONLY
    wall_time: float


def derive_seed(master_seed: int, index: int, label: str = "key") -> int:
    """Stable per-key seed; independent of how many keys ran before this one."""
    digest = hashlib.sha256(f"{master_seed}:{index}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def load_decoder(mode: str) -> decoder.NbpDecoder | None:
    if mode == MAXSAT_ONLY:
        return None
    return decoder.load_pretrained_decoder(mode)


def run_attack(
    obs: decay.CorruptedObservation,
    config: AttackConfig,
    true_schedule: np.ndarray | None = None,
    model: decoder.NbpDecoder | None = None,
) -> AttackResult:
    """Attack one observation.  Pass ``true_schedule`` to score the result."""
    start = time.monotonic()
    assertions: list[tuple[int, int]] = []
    assertions_correct = None
    if config.mode != MAXSAT_ONLY:
        if model is None:
            model = load_decoder(config.mode)
        l = decay.to_soft_input(obs, config.scale)
        result = decoder.decode(model, l)
        assertions = decoder.select_confident(
            result, obs, config.n_l, config.n_h, config.invert_polarity
        )
        if true_schedule is not None:
            assertions_correct = sum(
                1 for i, v in assertions if int(true_schedule[i]) == v
            )
    instance = cnf.build_instance(obs, assertions, config.w_mem, config.w_nn)
    outcome = solver_mod.solve_external(instance, config.solver)
    wall = time.monotonic() - start
    if not outcome.ok:
        return AttackResult(False, outcome.status, None, None, assertions_correct, wall)
    recovered = outcome.assignment[1 : aes.KEY_BITS + 1].astype(np.uint8)
    success = False
    if true_schedule is not None:
        success = bool((aes.expand_key(recovered) == true_schedule).all())
    return AttackResult(success, outcome.status, outcome.cost, recovered, assertions_correct, wall)


CAMPAIGN_FIELDS = (
    "index",
    "seed",
    "mode",
    "delta0",
    "delta1",
    "n_l",
    "n_h",
    "success",
    "status",
    "solver_cost",
    "assertions_correct",
)


def run_campaign(
    config: AttackConfig,
    num_keys: int,
    master_seed: int = 0,
    output_dir: str | Path | None = None,
    model: decoder.NbpDecoder | None = None,
) -> list[AttackResult]:
    """Attack ``num_keys`` independently drawn keys.

    Writes ``campaign.csv`` (deterministic given the seed and config) and
    ``timings.csv`` (wall times, run-dependent) when ``output_dir`` is given.
    """
    if model is None and config.mode != MAXSAT_ONLY:
        model = load_decoder(config.mode)
    results = []
    rows = []
    timing_rows = []
    for index in range(num_keys):
        seed = derive_seed(master_seed, index)
        rng = np.random.default_rng(seed)
        key = aes.random_key(rng)
        schedule = aes.expand_key(key)
        obs = decay.corrupt(schedule, config.params, seed=derive_seed(master_seed, index, "decay"))
        result = run_attack(obs, config, schedule, model=model)
        results.append(result)
        rows.append(
            {
                "index": index,
                "seed": seed,
                "mode": config.mode,
                "delta0": config.delta0,
                "delta1": config.delta1,
                "n_l": config.n_l if config.mode != MAXSAT_ONLY else "",
                "n_h": config.n_h if config.mode != MAXSAT_ONLY else "",
                "success": int(result.success),
                "status": result.status,
                "solver_cost": "" if result.solver_cost is None else result.solver_cost,
                "assertions_correct": ""
                if result.assertions_correct is None
                else result.assertions_correct,
            }
        )
        timing_rows.append({"index": index, "wall_time": f"{result.wall_time:.3f}"})
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "campaign.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CAMPAIGN_FIELDS)
            writer.writeheader()
            writer.writerows(rows)
        with open(out / "timings.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=("index", "wall_time"))
            writer.writeheader()
            writer.writerows(timing_rows)
        summary = {
            "mode": config.mode,
            "delta0": config.delta0,
            "num_keys": num_keys,
            "master_seed": master_seed,
            "successes": sum(int(r.success) for r in results),
        }
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return results


def success_rate(results: list[AttackResult]) -> float:
    return sum(int(r.success) for r in results) / len(results)


def assertion_accuracy(
    model: decoder.NbpDecoder,
    delta0: float,
    n_l: int,
    num_keys: int,
    master_seed: int = 0,
    delta1: float = 0.0,
    scale: float = decay.DEFAULT_SCALE,
    invert_polarity: bool = False,
) -> float:
    """Fraction of the n_l most confident assertions that match the truth."""
    params = decay.DecayParams(delta0, delta1)
    correct = 0
    total = 0
    for index in range(num_keys):
        rng = np.random.default_rng(derive_seed(master_seed, index))
        schedule = aes.expand_key(aes.random_key(rng))
        obs = decay.corrupt(schedule, params, seed=derive_seed(master_seed, index, "decay"))
        result = decoder.decode(model, decay.to_soft_input(obs, scale))
        for i, v in decoder.select_confident(result, obs, n_l, 0, invert_polarity):
            correct += int(schedule[i]) == v
            total += 1
    return correct / total


def confidence_curve(
    delta0: float,
    num_keys: int,
    n_l_values: tuple[int, ...] = tuple(range(5, 101, 5)),
    variants: tuple[str, ...] = ("FULL", "OBPNN"),
    master_seed: int = 0,
    output_path: str | Path | None = None,
) -> dict[str, dict[int, float]]:
    """Assertion accuracy versus assertion count for each decoder variant.

    Every variant sees the same keys and corruptions, so the curves are
    directly comparable.
    """
    params = decay.DecayParams(delta0, 0.0)
    curves: dict[str, dict[int, float]] = {}
    for variant in variants:
        model = load_decoder(variant)
        correct = {n_l: 0 for n_l in n_l_values}
        for index in range(num_keys):
            rng = np.random.default_rng(derive_seed(master_seed, index))
            schedule = aes.expand_key(aes.random_key(rng))
            obs = decay.corrupt(schedule, params, seed=derive_seed(master_seed, index, "decay"))
            result = decoder.decode(model, decay.to_soft_input(obs))
            # rankings nest, so score the largest request once
            picks = decoder.select_confident(result, obs, max(n_l_values))
            hits = np.cumsum([int(schedule[i]) == v for i, v in picks])
            for n_l in n_l_values:
                correct[n_l] += int(hits[n_l - 1])
        curves[variant] = {n_l: correct[n_l] / (n_l * num_keys) for n_l in n_l_values}
    if output_path is not None:
        with open(output_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["variant", "n_l", "accuracy"])
            for variant, curve in curves.items():
                for n_l, acc in curve.items():
                    writer.writerow([variant, n_l, f"{acc:.6f}"])
    return curves
