import numpy as np
import pytest
import torch

from coldboot import aes, codegraph, sboxnet


@pytest.fixture(scope="module")
def net():
    # fast-converging training (argmax-exact, softmax not saturated);
    # saturation properties are checked on the pretrained artifact in acceptance
    return sboxnet.train_sbox(seed=0)


def test_training_reaches_full_accuracy(net):
    assert net.argmax_accuracy() == 256


def test_training_deterministic():
    a = sboxnet.train_sbox(seed=1, max_epochs=50)
    b = sboxnet.train_sbox(seed=1, max_epochs=50)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)


def test_loss_decreases_over_first_epochs(net):
    losses = net.epoch_losses[:10]
    assert all(x > y for x, y in zip(losses, losses[1:]))


def test_training_failure_diagnostic():
    with pytest.raises(sboxnet.TrainingFailed, match="did not converge"):
        sboxnet.train_sbox(seed=0, max_epochs=1)


def test_forward_soft_rounds_to_exact_sbox(net):
    marg = sboxnet.forward_soft(net, sboxnet._BYTE_INPUTS)
    pred = torch.round(marg).to(torch.uint8).numpy()
    expect = np.unpackbits(aes.SBOX[:, None], axis=1)
    assert np.array_equal(pred, expect)


def test_forward_soft_range_and_marginal_consistency(net):
    x = torch.full((8,), 0.5)
    marg = sboxnet.forward_soft(net, x)
    assert ((marg >= 0) & (marg <= 1)).all()
    # marginals must equal direct summation of softmax masses
    probs = torch.softmax(net(x), dim=-1)
    for j in range(8):
        direct = sum(probs[c] for c in range(256) if (c >> (7 - j)) & 1)
        assert torch.isclose(marg[j], direct, atol=1e-6)


def test_forward_soft_rejects_out_of_range(net):
    with pytest.raises(ValueError):
        sboxnet.forward_soft(net, torch.full((8,), 1.5))
    with pytest.raises(ValueError):
        sboxnet.forward_soft(net, torch.full((4,), 0.5))


def test_forward_soft_continuity(net):
    torch.manual_seed(0)
    x = torch.rand(8) * 0.8 + 0.1
    base = sboxnet.forward_soft(net, x)
    for i in range(8):
        y = x.clone()
        y[i] += 1e-6
        assert (sboxnet.forward_soft(net, y) - base).abs().max() < 1e-3


def test_input_gradients_match_finite_differences(net):
    import copy

    torch.manual_seed(3)
    h = 1e-5  # small enough that ReLU kink crossings are vanishingly rare
    netd = copy.deepcopy(net).double()
    for _ in range(10):
        x = (torch.rand(8, dtype=torch.float64) * 0.8 + 0.1).requires_grad_(True)
        out = sboxnet.forward_soft(netd, x).sum()
        (grad,) = torch.autograd.grad(out, x)
        for i in range(8):
            xp, xm = x.detach().clone(), x.detach().clone()
            xp[i] += h
            xm[i] -= h
            with torch.no_grad():
                fd = (
                    sboxnet.forward_soft(netd, xp).sum() - sboxnet.forward_soft(netd, xm).sum()
                ).item() / (2 * h)
            an = grad[i].item()
            denom = max(abs(fd), abs(an), 1e-8)
            assert abs(fd - an) / denom < 1e-4


def test_sbox_layer_matches_exact_construction(net):
    rng = np.random.default_rng(17)
    sched = aes.expand_key(aes.random_key(rng))
    soft = torch.from_numpy(sched.astype(np.float32))
    out = sboxnet.sbox_layer(net, soft).detach()
    assert out.shape == (2337,)
    assert out[-1].item() == 1.0
    exact = codegraph.extend_assignment(sched)
    assert np.array_equal(torch.round(out).to(torch.uint8).numpy(), exact)


def test_sbox_layer_rejects_wrong_length(net):
    with pytest.raises(ValueError):
        sboxnet.sbox_layer(net, torch.zeros(100))


def test_weights_round_trip(tmp_path, net):
    path = tmp_path / "w.json"
    sboxnet.save_weights(net, path)
    back = sboxnet.load_weights(path)
    assert back.argmax_accuracy() == 256
    x = torch.full((8,), 0.3)
    assert (sboxnet.forward_soft(back, x) - sboxnet.forward_soft(net, x)).abs().max() < 1e-6


def test_probs_to_llr_clamps():
    p = torch.tensor([0.0, 0.5, 1.0])
    llr = sboxnet.probs_to_llr(p)
    assert torch.isfinite(llr).all()
    assert float(llr[1]) == pytest.approx(0.0, abs=1e-6)
    assert float(llr[0]) == pytest.approx(-20.0, abs=1e-3)
    assert float(llr[2]) == pytest.approx(20.0, abs=1e-3)
