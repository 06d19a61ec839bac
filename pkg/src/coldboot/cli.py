"""Command line front end.

Subcommands cover the pipeline stages: training the S-box surrogate and the
decoder, attacking a single image or a whole campaign of simulated keys,
plotting-ready assertion accuracy curves, and plain encode/verify utilities
for key schedules.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import aes, attack, decay, decoder, sboxnet
from . import solver as solver_mod


@click.group()
def main():
    """Recover AES-256 keys from bit-decayed memory images."""


@main.command("train-sbox")
@click.option("--seed", default=0, show_default=True)
@click.option("--refine-loss", default=1e-7, show_default=True, type=float)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Weights file [default: the packaged pretrained path].")
def train_sbox(seed, refine_loss, out):
    """Train the S-box surrogate network to zero argmax error."""
    net = sboxnet.train_sbox(seed=seed, refine_loss=refine_loss)
    path = Path(out) if out else sboxnet.pretrained_path()
    sboxnet.save_weights(net, path)
    click.echo(f"trained in {len(net.epoch_losses)} epochs, saved {path}")


@main.command("train-decoder")
@click.argument("variant", type=click.Choice(decoder.VARIANTS))
@click.option("--delta0", default=0.6, show_default=True)
@click.option("--steps", default=2000, show_default=True)
@click.option("--batch-size", default=4, show_default=True)
@click.option("--lr", default=1e-4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--log", type=click.Path(dir_okay=False), default=None,
              help="CSV training log.")
def train_decoder_cmd(variant, delta0, steps, batch_size, lr, seed, out, log):
    """Train decoder edge weights over a corruption-rate curriculum."""
    sbox_net = None if variant == "LC" else sboxnet.load_pretrained()
    model = decoder.NbpDecoder(variant, sbox_net=sbox_net)
    history = decoder.train_decoder(
        model, delta0, steps, batch_size=batch_size, lr=lr, seed=seed, log_path=log
    )
    path = Path(out) if out else decoder.pretrained_decoder_path(variant)
    decoder.save_checkpoint(model, path)
    click.echo(f"loss {history[0]:.4f} -> {history[-1]:.4f}, saved {path}")


def _solver_config(timeout):
    return solver_mod.SolverConfig(timeout=timeout)


@main.command("attack")
@click.argument("observation", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", default="FULL", show_default=True,
              type=click.Choice(attack.MODES))
@click.option("--n-l", default=30, show_default=True)
@click.option("--n-h", default=0, show_default=True)
@click.option("--timeout", default=600.0, show_default=True)
@click.option("--truth", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Hex file with the true schedule, to score the attempt.")
def attack_cmd(observation, mode, n_l, n_h, timeout, truth):
    """Attack a saved observation (hex file with JSON sidecar)."""
    obs = decay.load_observation(observation)
    config = attack.AttackConfig(
        mode=mode,
        delta0=obs.params.delta0,
        delta1=obs.params.delta1,
        n_l=n_l,
        n_h=n_h,
        solver=_solver_config(timeout),
    )
    schedule = None
    if truth:
        schedule = aes.schedule_from_hex(Path(truth).read_text())
    result = attack.run_attack(obs, config, true_schedule=schedule)
    if result.recovered_key is None:
        click.echo(f"status: {result.status}")
        sys.exit(1)
    click.echo(f"status: {result.status}  cost: {result.solver_cost}")
    click.echo(f"key: {aes.key_to_hex(result.recovered_key)}")
    if schedule is not None:
        click.echo(f"success: {result.success}")
        sys.exit(0 if result.success else 1)


@main.command("campaign")
@click.option("--mode", default="FULL", show_default=True,
              type=click.Choice(attack.MODES))
@click.option("--delta0", default=0.5, show_default=True)
@click.option("--delta1", default=0.0, show_default=True)
@click.option("--keys", default=20, show_default=True)
@click.option("--n-l", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--timeout", default=600.0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def campaign_cmd(mode, delta0, delta1, keys, n_l, seed, timeout, out):
    """Attack many simulated keys; writes campaign.csv, timings.csv, summary.json."""
    config = attack.AttackConfig(
        mode=mode, delta0=delta0, delta1=delta1, n_l=n_l, solver=_solver_config(timeout)
    )
    results = attack.run_campaign(config, keys, master_seed=seed, output_dir=out)
    rate = attack.success_rate(results)
    click.echo(f"{sum(r.success for r in results)}/{keys} recovered ({rate:.0%})")


@main.command("curve")
@click.option("--delta0", default=0.65, show_default=True)
@click.option("--keys", default=20, show_default=True)
@click.option("--variants", default="FULL,OBPNN", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def curve_cmd(delta0, keys, variants, seed, out):
    """Assertion accuracy versus assertion count, per decoder variant."""
    curves = attack.confidence_curve(
        delta0, keys, variants=tuple(variants.split(",")), master_seed=seed, output_path=out
    )
    for variant, curve in curves.items():
        best = max(curve.values())
        click.echo(f"{variant}: accuracy {min(curve.values()):.3f}..{best:.3f}")


@main.command("encode")
@click.argument("key_hex")
def encode_cmd(key_hex):
    """Expand a 64-hex-digit key into its 480-hex-digit schedule."""
    try:
        key = aes.key_from_hex(key_hex)
    except ValueError as exc:
        raise click.BadParameter(str(exc))
    click.echo(aes.schedule_to_hex(aes.expand_key(key)))


@main.command("verify")
@click.argument("schedule_hex")
def verify_cmd(schedule_hex):
    """Check a 480-hex-digit schedule against the expansion constraints."""
    try:
        bits = aes.schedule_from_hex(schedule_hex)
    except ValueError as exc:
        raise click.BadParameter(str(exc))
    ok = aes.verify_constraints(bits)
    click.echo("valid" if ok else "invalid")
    sys.exit(0 if ok else 1)


@main.command("corrupt")
@click.argument("key_hex")
@click.option("--delta0", required=True, type=float)
@click.option("--delta1", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def corrupt_cmd(key_hex, delta0, delta1, seed, out):
    """Simulate decay on a key's schedule and save the observation."""
    try:
        key = aes.key_from_hex(key_hex)
    except ValueError as exc:
        raise click.BadParameter(str(exc))
    obs = decay.corrupt(aes.expand_key(key), decay.DecayParams(delta0, delta1), seed=seed)
    decay.save_observation(obs, out)
    click.echo(f"saved {out}")


if __name__ == "__main__":
    main()
