"""Dispatch weighted partial MaxSAT instances to a solver and verify the answer.

The heavy lifting is done by an external binary speaking the classic DIMACS
WCNF dialect (``p wcnf <vars> <clauses> <top>``) and MaxSAT-evaluation output
(``s`` / ``o`` / ``v`` lines).  A Rust implementation built on CaDiCaL lives
in ``solver/`` at the repository root; any solver with the same interface
works.  Whatever the binary claims, we re-check the model against the hard
clauses and recompute the soft cost locally before reporting success.

A tiny exact branch-and-bound solver is included for tests that need an
independent optimum on small instances.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cnf

_REPO_SOLVER = Path(__file__).resolve().parents[2] / "solver" / "target" / "release" / "wcnf-oll"

OPTIMUM = "OPTIMUM"
SATISFIABLE = "SATISFIABLE"
UNSATISFIABLE = "UNSATISFIABLE"
TIMEOUT = "TIMEOUT"
ERROR = "ERROR"


def default_command() -> list[str]:
    """Locate the bundled solver binary, falling back to PATH."""
    if _REPO_SOLVER.exists():
        return [str(_REPO_SOLVER), "{instance}"]
    found = shutil.which("wcnf-oll")
    if found:
        return [found, "{instance}"]
    raise FileNotFoundError(
        "wcnf-oll binary not found; build it with `cargo build --release` in solver/"
    )


@dataclass(frozen=True)
class SolverConfig:
    """How to invoke the external solver.

    ``command`` is an argv list where the token ``{instance}`` is replaced
    with the path of the WCNF file.  ``timeout`` is in seconds.
    """

    command: tuple[str, ...] = ()
    timeout: float = 600.0

    def argv(self, instance_path: str) -> list[str]:
        command = list(self.command) or default_command()
        if "{instance}" not in command:
            raise ValueError("solver command must contain an {instance} placeholder")
        return [instance_path if tok == "{instance}" else tok for tok in command]


@dataclass(frozen=True)
class SolveOutcome:
    status: str
    assignment: np.ndarray | None  # 1-indexed, slot 0 unused
    cost: int | None
    wall_time: float
    raw_status_line: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMUM, SATISFIABLE)


def _parse_output(text: str, num_vars: int) -> tuple[str, np.ndarray | None, int | None]:
    status = ""
    cost = None
    assignment = None
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("s "):
            status = line[2:].strip()
        elif line.startswith("o "):
            cost = int(line[2:])
        elif line.startswith("v "):
            body = line[2:].strip()
            assignment = np.zeros(num_vars + 1, dtype=np.uint8)
            tokens = body.split()
            if len(tokens) == 1 and set(tokens[0]) <= {"0", "1"}:
                # newer evaluations emit the model as a 0/1 string
                bits = tokens[0][:num_vars]
                assignment[1 : len(bits) + 1] = np.frombuffer(
                    bits.encode(), dtype=np.uint8
                ) - ord("0")
            else:
                for tok in tokens:
                    lit = int(tok)
                    var = abs(lit)
                    if 1 <= var <= num_vars and lit > 0:
                        assignment[var] = 1
    return status, assignment, cost


def solve_external(
    instance: cnf.WcnfInstance,
    config: SolverConfig | None = None,
    keep_instance: str | Path | None = None,
) -> SolveOutcome:
    """Run the external solver and return a locally verified outcome.

    The reported model is checked against every hard clause and its soft
    cost recomputed; a solver that lies gets an ERROR outcome, not a pass.
    ``keep_instance`` optionally saves the WCNF file for post-mortems.
    """
    config = config or SolverConfig()
    text = cnf.serialize_wcnf(instance)
    if keep_instance is not None:
        path = str(keep_instance)
        Path(path).write_text(text)
        cleanup = False
    else:
        fd, path = tempfile.mkstemp(suffix=".wcnf")
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        cleanup = True
    start = time.monotonic()
    try:
        proc = subprocess.run(
            config.argv(path),
            capture_output=True,
            text=True,
            timeout=config.timeout,
        )
    except subprocess.TimeoutExpired:
        return SolveOutcome(TIMEOUT, None, None, time.monotonic() - start)
    finally:
        if cleanup:
            os.unlink(path)
    wall = time.monotonic() - start

    status_line, assignment, cost = _parse_output(proc.stdout, instance.num_vars)
    if status_line == "UNSATISFIABLE":
        return SolveOutcome(UNSATISFIABLE, None, None, wall, status_line)
    if status_line not in ("OPTIMUM FOUND", "SATISFIABLE") or assignment is None:
        return SolveOutcome(ERROR, None, None, wall, status_line or proc.stderr[:200])

    if not cnf.satisfies(instance.hard, assignment):
        return SolveOutcome(ERROR, None, None, wall, "model violates hard clauses")
    true_cost = cnf.soft_cost(instance.soft, assignment)
    if cost is not None and cost != true_cost:
        return SolveOutcome(ERROR, None, None, wall, f"claimed cost {cost} != {true_cost}")
    status = OPTIMUM if status_line == "OPTIMUM FOUND" else SATISFIABLE
    return SolveOutcome(status, assignment, true_cost, wall, status_line)


def solve_embedded(instance: cnf.WcnfInstance, max_vars: int = 30) -> SolveOutcome:
    """Exact branch and bound over all variables, for small instances only."""
    if instance.num_vars > max_vars:
        raise ValueError(f"embedded solver limited to {max_vars} variables")
    start = time.monotonic()
    hard = [list(c) for c in instance.hard]
    soft = [(list(c), w) for c, w in instance.soft]
    n = instance.num_vars
    best_cost: list[int | None] = [None]
    best_assign = [None]
    assign = np.zeros(n + 1, dtype=np.int8)  # 0 unset, 1 true, -1 false

    def clause_state(clause: list[int]) -> int:
        # 1 satisfied, -1 falsified, 0 undetermined
        open_ = False
        for lit in clause:
            v = assign[abs(lit)]
            if v == 0:
                open_ = True
            elif (v > 0) == (lit > 0):
                return 1
        return 0 if open_ else -1

    def recurse(var: int) -> None:
        if any(clause_state(c) == -1 for c in hard):
            return
        falsified = sum(w for c, w in soft if clause_state(c) == -1)
        if best_cost[0] is not None and falsified >= best_cost[0]:
            return
        if var > n:
            best_cost[0] = falsified
            best_assign[0] = (assign == 1).astype(np.uint8).copy()
            return
        for value in (1, -1):
            assign[var] = value
            recurse(var + 1)
            assign[var] = 0

    recurse(1)
    wall = time.monotonic() - start
    if best_cost[0] is None:
        return SolveOutcome(UNSATISFIABLE, None, None, wall)
    return SolveOutcome(OPTIMUM, best_assign[0], best_cost[0], wall)
