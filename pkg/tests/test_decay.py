import numpy as np
import pytest

from coldboot import aes, decay


def make_schedule(seed=0):
    rng = np.random.default_rng(seed)
    return aes.expand_key(aes.random_key(rng))


def test_zero_decay_is_identity():
    sched = make_schedule()
    obs = decay.corrupt(sched, decay.DecayParams(0.0, 0.0), seed=1)
    assert np.array_equal(obs.bits, sched)


def test_total_decay_gives_ground_state():
    sched = make_schedule()
    obs = decay.corrupt(sched, decay.DecayParams(1.0, 0.0), seed=1)
    assert not obs.bits.any()


def test_corrupt_reproducible():
    sched = make_schedule()
    p = decay.DecayParams(0.6, 0.001)
    a = decay.corrupt(sched, p, seed=99)
    b = decay.corrupt(sched, p, seed=99)
    assert np.array_equal(a.bits, b.bits)
    c = decay.corrupt(sched, p, seed=100)
    assert not np.array_equal(a.bits, c.bits)


def test_theoretical_never_flips_up():
    sched = make_schedule()
    obs = decay.corrupt(sched, decay.DecayParams(0.6, 0.0), seed=2)
    assert np.all(obs.bits <= sched)


def test_empirical_decay_rate():
    # pool ~10^5 one-bits across many schedules; survival should be 0.4 +/- 0.01
    p = decay.DecayParams(0.6, 0.0)
    survived = total_ones = 0
    rng = np.random.default_rng(8)
    for i in range(110):
        sched = aes.expand_key(aes.random_key(rng))
        obs = decay.corrupt(sched, p, seed=1000 + i)
        total_ones += int((sched == 1).sum())
        survived += int((obs.bits[sched == 1] == 1).sum())
    assert total_ones > 100_000
    assert abs(survived / total_ones - 0.4) < 0.01


def test_empirical_flip_rates_within_3_sigma():
    p = decay.DecayParams(0.5, 0.001)
    rng = np.random.default_rng(11)
    n0 = n1 = f0 = f1 = 0
    for i in range(110):
        sched = aes.expand_key(aes.random_key(rng))
        obs = decay.corrupt(sched, p, seed=2000 + i)
        ones, zeros = sched == 1, sched == 0
        n1 += int(ones.sum())
        n0 += int(zeros.sum())
        f0 += int((obs.bits[ones] == 0).sum())
        f1 += int((obs.bits[zeros] == 1).sum())
    for flips, n, rate in ((f0, n1, p.delta0), (f1, n0, p.delta1)):
        sigma = np.sqrt(rate * (1 - rate) / n)
        assert abs(flips / n - rate) <= 3 * sigma


def test_soft_input_theoretical_observed_one_is_max_positive():
    sched = make_schedule()
    obs = decay.corrupt(sched, decay.DecayParams(0.6, 0.0), seed=3)
    l = decay.to_soft_input(obs, scale=0.12)
    assert np.all(l[obs.bits == 1] == decay.LLR_MAX * 0.12)
    assert np.all(l[obs.bits == 0] < 0)


def test_soft_input_realistic_channel_formula():
    sched = make_schedule()
    p = decay.DecayParams(0.5, 0.001)
    obs = decay.corrupt(sched, p, seed=4)
    l = decay.to_soft_input(obs, scale=0.12)
    expect1 = 0.12 * np.log(0.5 / 0.001)
    expect0 = 0.12 * np.log(0.5 / 0.999)
    assert np.allclose(l[obs.bits == 1], expect1)
    assert np.allclose(l[obs.bits == 0], expect0)
    assert np.isfinite(l).all()


def test_soft_input_rejects_bad_scale():
    obs = decay.corrupt(make_schedule(), decay.DecayParams(0.5), seed=5)
    with pytest.raises(ValueError):
        decay.to_soft_input(obs, scale=0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        decay.DecayParams(1.5)
    with pytest.raises(ValueError):
        decay.DecayParams(0.5, -0.1)


def test_observation_file_round_trip(tmp_path):
    sched = make_schedule()
    obs = decay.corrupt(sched, decay.DecayParams(0.6, 0.001), seed=77)
    path = tmp_path / "obs.hex"
    decay.save_observation(obs, path)
    back = decay.load_observation(path)
    assert np.array_equal(back.bits, obs.bits)
    assert back.params == obs.params
    assert back.seed == 77
