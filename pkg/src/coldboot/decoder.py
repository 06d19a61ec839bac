"""Trainable belief-propagation decoder over the key-schedule code graph.

Three variants:
  * FULL:  full matrix H, S-box layer applied before the first iteration and
    again after each marginalization (the recomputed marginals replace the
    static channel prior for the next iteration)
  * OBPNN: full matrix H, S-box layer only before the first iteration
  * LC:    linear-rows-only matrix H'', no S-box surrogate at all

Message passing follows the weighted sum-product recursion: per-iteration
variable update x_e = tanh((prior_v + sum of weighted incoming)/2), check
update x_e = 2 atanh(prod of incoming), marginalization through a sigmoid.
External LLR sign convention is positive == bit is 1; internally messages
use the opposite sign so the textbook even-parity check update applies
unchanged, with the constant-1 bias column acting as a frozen variable that
flips the parity of its (RCON) rows.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import aes, codegraph, sboxnet
from .decay import LLR_MAX, CorruptedObservation, DecayParams, corrupt, to_soft_input

VARIANTS = ("FULL", "OBPNN", "LC")
ATANH_EPS = 1e-7
_MAG_FLOOR = 1e-30


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class DecodeResult:
    """Posterior probability (of bit = 1) per key bit, plus per-iteration history."""

    o: np.ndarray                      # final marginals, first 1920 variables
    per_iteration: list[np.ndarray]    # same, one entry per unrolled iteration
    saturation_count: int              # check messages that hit the atanh clamp


class NbpDecoder(nn.Module):
    """Unrolled weighted BP with optional interleaved S-box layers."""

    def __init__(
        self,
        variant: str,
        graph: codegraph.CodeGraph | None = None,
        sbox_net: sboxnet.SboxNet | None = None,
        num_iterations: int = 3,
    ):
        super().__init__()
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if num_iterations < 1:
            raise ValueError("need at least one iteration")
        if graph is None:
            graph = codegraph.build_linear() if variant == "LC" else codegraph.build_full()
        self.variant = variant
        self.graph = graph
        self.layout = graph.layout
        self.num_iterations = num_iterations
        if variant == "LC":
            if graph.num_cols != self.layout.n:
                raise ValueError("LC variant requires the linear-only matrix")
            self.sbox_net = None
        else:
            if graph.num_cols != self.layout.total_cols:
                raise ValueError(f"{variant} variant requires the full matrix")
            if sbox_net is None:
                raise ValueError(f"{variant} variant requires the S-box surrogate")
            self.sbox_net = sbox_net
        self.register_buffer("edge_var", torch.from_numpy(graph.edge_var))
        self.register_buffer("edge_check", torch.from_numpy(graph.edge_check))
        if variant == "LC":
            self.register_buffer("bias_edges", torch.zeros(0, dtype=torch.long))
        else:
            bias = torch.nonzero(self.edge_var == self.layout.bias_col).reshape(-1)
            self.register_buffer("bias_edges", bias)
        e = graph.num_edges
        self.w = nn.Parameter(torch.ones(num_iterations, e))
        self.wbar = nn.Parameter(torch.ones(num_iterations, e))

    @property
    def num_vars(self) -> int:
        return self.graph.num_cols

    def initial_prior(self, l: torch.Tensor) -> torch.Tensor:
        """Per-variable prior LLRs (positive == 1) for the first iteration."""
        if self.variant == "LC":
            return l
        ext = sboxnet.sbox_layer(self.sbox_net, torch.sigmoid(l), self.layout)
        return sboxnet.probs_to_llr(ext)

    def forward(self, l: torch.Tensor) -> tuple[list[torch.Tensor], int]:
        """Unrolled decoding pass.

        Returns per-iteration marginal probability vectors over all graph
        variables, and the number of saturated check messages.
        """
        if l.shape != (self.layout.n,):
            raise ValueError(f"expected {self.layout.n} soft inputs, got {tuple(l.shape)}")
        prior = self.initial_prior(l)
        msg_c2v = torch.zeros(self.graph.num_edges, dtype=l.dtype)
        marginals: list[torch.Tensor] = []
        saturated = 0
        # tanh-domain value of the frozen bias variable (certainty of 1,
        # internal sign convention is flipped)
        pinned = math.tanh(-LLR_MAX / 2)
        for j in range(self.num_iterations):
            prior_int = -prior  # internal sign flip: positive == bit 0
            # variable layer (extrinsic sums via total minus own message)
            weighted = self.w[j] * msg_c2v
            totals = torch.zeros(self.num_vars, dtype=l.dtype).index_add_(0, self.edge_var, weighted)
            pre = prior_int[self.edge_var] + totals[self.edge_var] - weighted
            x = torch.tanh(0.5 * pre)
            if len(self.bias_edges):
                x = x.index_put((self.bias_edges,), torch.tensor(pinned, dtype=l.dtype))
            # check layer, products in sign/log-magnitude form
            mag = x.abs().clamp(_MAG_FLOOR, 1.0 - ATANH_EPS)
            logmag = torch.log(mag)
            neg = (x < 0).to(l.dtype)
            logmag_tot = torch.zeros(self.graph.num_rows, dtype=l.dtype).index_add_(0, self.edge_check, logmag)
            neg_tot = torch.zeros(self.graph.num_rows, dtype=l.dtype).index_add_(0, self.edge_check, neg)
            sign_excl = 1.0 - 2.0 * ((neg_tot[self.edge_check] - neg) % 2.0)
            prod_excl = sign_excl * torch.exp(logmag_tot[self.edge_check] - logmag)
            prod_excl = prod_excl.clamp(-1.0 + ATANH_EPS, 1.0 - ATANH_EPS)
            saturated += int((prod_excl.abs() >= 1.0 - 2 * ATANH_EPS).sum())
            msg_c2v = 2.0 * torch.atanh(prod_excl)
            # marginalization
            post = torch.zeros(self.num_vars, dtype=l.dtype).index_add_(
                0, self.edge_var, self.wbar[j] * msg_c2v
            )
            o = torch.sigmoid(-(prior_int + post))
            marginals.append(o)
            if self.variant == "FULL" and j + 1 < self.num_iterations:
                ext = sboxnet.sbox_layer(self.sbox_net, o[: self.layout.n], self.layout)
                prior = sboxnet.probs_to_llr(ext)
        return marginals, saturated


def decode(model: NbpDecoder, l: np.ndarray | torch.Tensor) -> DecodeResult:
    """Inference-mode decode of a 1920-long soft-input vector."""
    lt = torch.as_tensor(np.asarray(l), dtype=torch.float32)
    with torch.no_grad():
        marginals, saturated = model(lt)
    n = model.layout.n
    per_iter = [m[:n].numpy().copy() for m in marginals]
    return DecodeResult(o=per_iter[-1], per_iteration=per_iter, saturation_count=saturated)


def multiloss(marginals: list[torch.Tensor], schedule: torch.Tensor, n: int) -> torch.Tensor:
    """Sum of per-iteration cross-entropies against the true key bits.

    Only the first n (codeword) variables enter the loss; auxiliary Z and
    bias marginals are computed but not penalized.
    """
    bce = nn.functional.binary_cross_entropy
    return sum(bce(m[:n].clamp(1e-7, 1 - 1e-7), schedule) for m in marginals)


def curriculum_range(delta0: float) -> tuple[float, float]:
    """Training corruption rates are drawn uniformly from [d0/4, 1-(1-d0)/4]."""
    return delta0 / 4.0, 1.0 - (1.0 - delta0) / 4.0


def train_decoder(
    model: NbpDecoder,
    delta0: float,
    steps: int,
    delta1: float = 0.0,
    batch_size: int = 4,
    lr: float = 1e-4,
    seed: int = 0,
    scale: float = 0.12,
    log_path: str | Path | None = None,
) -> list[float]:
    """Train the edge weights by unrolled gradient descent; returns the loss curve."""
    rng = np.random.default_rng(seed)
    # the surrogate is a fixed reference; only the edge weights are learnable
    opt = torch.optim.Adam([model.w, model.wbar], lr=lr)
    lo, hi = curriculum_range(delta0)
    history: list[float] = []
    rows = []
    initial_loss = None
    for step in range(steps):
        opt.zero_grad()
        batch_loss = torch.tensor(0.0)
        rates = []
        for _ in range(batch_size):
            key = aes.random_key(rng)
            schedule = aes.expand_key(key)
            d0 = float(rng.uniform(lo, hi))
            rates.append(d0)
            obs = corrupt(schedule, DecayParams(d0, delta1), seed=int(rng.integers(2**63)))
            l = torch.from_numpy(to_soft_input(obs, scale).astype(np.float32))
            marginals, _ = model(l)
            target = torch.from_numpy(schedule.astype(np.float32))
            batch_loss = batch_loss + multiloss(marginals, target, model.layout.n)
        batch_loss = batch_loss / batch_size
        loss_val = batch_loss.item()
        history.append(loss_val)
        if initial_loss is None:
            initial_loss = loss_val
        if loss_val > 10 * initial_loss:
            raise TrainingDiverged(f"loss {loss_val:.4f} exceeds 10x initial {initial_loss:.4f}")
        batch_loss.backward()
        opt.step()
        rows.append((step, loss_val, float(np.mean(rates))))
    if log_path is not None:
        with open(log_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "loss", "mean_corruption_rate"])
            writer.writerows(rows)
    return history


def select_confident(
    result: DecodeResult,
    obs: CorruptedObservation,
    n_l: int,
    n_h: int = 0,
    invert_polarity: bool = False,
) -> list[tuple[int, int]]:
    """Pick the assertions the decoder is most confident about.

    Default polarity: among observed-zero positions, the n_l indices with the
    strongest evidence the original bit is 1 (asserted 1), and the n_h with
    the strongest evidence it is 0 (asserted 0). `invert_polarity` swaps the
    asserted values.
    """
    if n_l + n_h > len(result.o):
        raise ValueError("cannot assert more bits than exist")
    candidates = np.flatnonzero(obs.bits == 0)
    order = candidates[np.argsort(-result.o[candidates], kind="stable")]
    high = order[:n_l]                       # most likely original 1s
    low = order[::-1][:n_h]                  # most likely true 0s
    one, zero = (0, 1) if invert_polarity else (1, 0)
    return [(int(i), one) for i in high] + [(int(i), zero) for i in low]


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1


def save_checkpoint(model: NbpDecoder, path: str | Path) -> None:
    state = {
        "version": CHECKPOINT_VERSION,
        "variant": model.variant,
        "num_iterations": model.num_iterations,
        "w": [round(float(v), 9) for v in model.w.detach().reshape(-1)],
        "wbar": [round(float(v), 9) for v in model.wbar.detach().reshape(-1)],
    }
    Path(path).write_text(json.dumps(state))


def load_checkpoint(path: str | Path, sbox_net: sboxnet.SboxNet | None = None) -> NbpDecoder:
    state = json.loads(Path(path).read_text())
    if state.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {state.get('version')}")
    model = NbpDecoder(state["variant"], sbox_net=sbox_net, num_iterations=state["num_iterations"])
    with torch.no_grad():
        model.w.copy_(torch.tensor(state["w"]).reshape(model.w.shape))
        model.wbar.copy_(torch.tensor(state["wbar"]).reshape(model.wbar.shape))
    return model


def pretrained_decoder_path(variant: str) -> Path:
    return Path(__file__).parent / "pretrained" / f"decoder_{variant.lower()}.json"


def load_pretrained_decoder(variant: str, sbox_net: sboxnet.SboxNet | None = None) -> NbpDecoder:
    path = pretrained_decoder_path(variant)
    if not path.exists():
        raise FileNotFoundError(
            f"no pretrained {variant} decoder at {path}; run `coldboot train-decoder` first"
        )
    if variant != "LC" and sbox_net is None:
        sbox_net = sboxnet.load_pretrained()
    return load_checkpoint(path, sbox_net=sbox_net)
