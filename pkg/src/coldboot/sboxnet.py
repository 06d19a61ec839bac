"""Differentiable S-box surrogate.

An 8 -> 512 -> 512 -> 512 -> 256 ReLU classifier trained on all 256 byte
inputs until it reproduces the Rijndael S-box exactly under argmax, and
extends it continuously to soft inputs. Soft outputs are the per-bit
marginals of the softmax class distribution.

Convention: soft bits are probabilities in [0,1] that the bit is 1; the
decoder converts to/from LLR space at the boundary (p = sigmoid(llr)).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import aes
from .codegraph import VariableLayout
from .decay import LLR_MAX

WEIGHTS_VERSION = 1
ARCH = (8, 512, 512, 512, 256)

# BIT_MASKS[c, j] = bit j (MSB-first) of class byte c; marginal of output
# bit j is the softmax mass of classes with that bit set.
BIT_MASKS = torch.from_numpy(
    np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).astype(np.float32)
)

_SBOX_TARGETS = torch.from_numpy(aes.SBOX.astype(np.int64))
_BYTE_INPUTS = BIT_MASKS.clone()  # all 256 inputs as 8-bit vectors


class SboxNet(nn.Module):
    """Three hidden ReLU layers of width 512, 256-way class logits."""

    def __init__(self):
        super().__init__()
        self.layers = nn.Sequential(
            nn.Linear(8, 512), nn.ReLU(),
            nn.Linear(512, 512), nn.ReLU(),
            nn.Linear(512, 512), nn.ReLU(),
            nn.Linear(512, 256),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.layers(x)

    def argmax_accuracy(self) -> int:
        """Number of byte inputs (out of 256) classified to the exact S-box output."""
        with torch.no_grad():
            pred = self(_BYTE_INPUTS).argmax(dim=1)
        return int((pred == _SBOX_TARGETS).sum())


class TrainingFailed(RuntimeError):
    pass


def train_sbox(
    seed: int = 0,
    lr: float = 1e-3,
    batch_size: int = 32,
    max_epochs: int = 20000,
    refine_loss: float | None = None,
) -> SboxNet:
    """Train the surrogate on all 256 inputs until argmax accuracy is 256/256.

    With `refine_loss` set, training continues past full accuracy until the
    mean cross-entropy drops below it, which saturates the softmax so binary
    inputs yield marginals within ~refine_loss of {0,1}.
    """
    torch.manual_seed(seed)
    net = SboxNet()
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    gen = torch.Generator().manual_seed(seed)
    epoch_losses = []
    for epoch in range(max_epochs):
        perm = torch.randperm(256, generator=gen)
        total = 0.0
        for s in range(0, 256, batch_size):
            idx = perm[s: s + batch_size]
            opt.zero_grad()
            loss = loss_fn(net(_BYTE_INPUTS[idx]), _SBOX_TARGETS[idx])
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        epoch_losses.append(total / 256)
        if net.argmax_accuracy() == 256:
            if refine_loss is None or epoch_losses[-1] < refine_loss:
                net.epoch_losses = epoch_losses
                return net
    raise TrainingFailed(
        f"S-box surrogate did not converge within {max_epochs} epochs "
        f"(accuracy {net.argmax_accuracy()}/256, last loss {epoch_losses[-1]:.3e})"
    )


def forward_soft(net: SboxNet, soft_bits) -> torch.Tensor:
    """Per-bit output marginals for a batch of soft byte inputs.

    Accepts shape (8,) or (B, 8), values in [0,1]; returns the same leading
    shape. Marginal j = sum of softmax probabilities over classes whose
    output bit j is 1.
    """
    x = torch.as_tensor(soft_bits, dtype=torch.float32) if not torch.is_tensor(soft_bits) else soft_bits
    if x.shape[-1] != 8:
        raise ValueError(f"expected trailing dimension 8, got {tuple(x.shape)}")
    if (x < 0).any() or (x > 1).any():
        raise ValueError("soft bits must lie in [0,1]")
    probs = torch.softmax(net(x), dim=-1)
    return probs @ BIT_MASKS.to(probs.dtype)


def sbox_layer(net: SboxNet, soft_w: torch.Tensor, layout: VariableLayout | None = None) -> torch.Tensor:
    """Extend 1920 soft key bits to the full 2337 soft variable vector.

    Copies the input, computes every Z block by applying the surrogate to
    the 4 bytes of its source double word (byte order pre-rotated when the
    consuming round is even), and appends the constant bias 1.
    """
    layout = layout or VariableLayout()
    if soft_w.shape != (layout.n,):
        raise ValueError(f"expected {layout.n} soft bits, got {tuple(soft_w.shape)}")
    byte_inputs = []
    for t in range(layout.num_z_blocks):
        start = layout.source_bit_start(t)
        word = soft_w[start: start + 32].reshape(4, 8)
        if layout.rotated(t):
            word = torch.roll(word, shifts=-1, dims=0)
        byte_inputs.append(word)
    z = forward_soft(net, torch.cat(byte_inputs, dim=0))          # (52, 8)
    bias = torch.ones(1, dtype=soft_w.dtype)
    return torch.cat([soft_w, z.reshape(-1).to(soft_w.dtype), bias])


def probs_to_llr(p: torch.Tensor, llr_max: float = LLR_MAX) -> torch.Tensor:
    """log(p/(1-p)) with the module-wide clamp."""
    eps = 1.0 / (1.0 + math.exp(llr_max))
    # float64 internally: 1 - eps is not representable in float32 for llr_max = 20
    p64 = p.double().clamp(eps, 1.0 - eps)
    llr = torch.log(p64 / (1.0 - p64)).clamp(-llr_max, llr_max)
    return llr.to(p.dtype) if p.dtype.is_floating_point else llr


def save_weights(net: SboxNet, path: str | Path) -> None:
    """Versioned JSON: shape header + flat weight arrays."""
    state = {"version": WEIGHTS_VERSION, "arch": list(ARCH), "layers": []}
    for module in net.layers:
        if isinstance(module, nn.Linear):
            state["layers"].append({
                "weight_shape": list(module.weight.shape),
                "weight": [round(float(v), 9) for v in module.weight.detach().reshape(-1)],
                "bias": [round(float(v), 9) for v in module.bias.detach()],
            })
    Path(path).write_text(json.dumps(state))


def load_weights(path: str | Path) -> SboxNet:
    state = json.loads(Path(path).read_text())
    if state.get("version") != WEIGHTS_VERSION:
        raise ValueError(f"unsupported weights version: {state.get('version')}")
    if tuple(state["arch"]) != ARCH:
        raise ValueError(f"architecture mismatch: {state['arch']}")
    net = SboxNet()
    linears = [m for m in net.layers if isinstance(m, nn.Linear)]
    with torch.no_grad():
        for module, layer in zip(linears, state["layers"]):
            module.weight.copy_(torch.tensor(layer["weight"]).reshape(layer["weight_shape"]))
            module.bias.copy_(torch.tensor(layer["bias"]))
    return net


def pretrained_path() -> Path:
    return Path(__file__).parent / "pretrained" / "sboxnet.json"


def load_pretrained() -> SboxNet:
    path = pretrained_path()
    if not path.exists():
        raise FileNotFoundError(
            f"no pretrained S-box surrogate at {path}; run `coldboot train-sbox` first"
        )
    return load_weights(path)
