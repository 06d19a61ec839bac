import itertools

import numpy as np
import pytest

from coldboot import aes, cnf, decay


def random_schedule(seed):
    rng = np.random.default_rng(seed)
    return aes.expand_key(aes.random_key(rng))


def brute_force_clause_check(clauses, assignment):
    # independent per-literal evaluation (oracle for the vectorized path)
    for clause in clauses:
        if not any(assignment[abs(l)] == (l > 0) for l in clause):
            return False
    return True


def test_xor3_truth_table():
    clauses = cnf._xor3(1, 2, 3, 0)
    assert len(clauses) == 4
    n_sat = 0
    for bits in itertools.product((0, 1), repeat=3):
        assign = np.array([0, *bits], dtype=np.uint8)
        ok = cnf.satisfies(clauses, assign)
        assert ok == (bits[0] ^ bits[1] ^ bits[2] == 0)
        n_sat += ok
    assert n_sat == 4


def test_xor3_odd_parity():
    clauses = cnf._xor3(1, 2, 3, 1)
    for bits in itertools.product((0, 1), repeat=3):
        assign = np.array([0, *bits], dtype=np.uint8)
        assert cnf.satisfies(clauses, assign) == (bits[0] ^ bits[1] ^ bits[2] == 1)


def test_encode_aes_counts_and_validity():
    clauses, instances = cnf.encode_aes()
    assert len(instances) == 52
    # 1248 xor rows * 4 + 52 s-boxes * 2048 + 416 linking rows * 4
    assert len(clauses) == 1248 * 4 + 52 * 2048 + 416 * 4 == 113152
    for clause in clauses[:100]:
        cnf.validate_clause(clause)
    vars_seen = {abs(l) for c in clauses for l in c}
    assert max(vars_seen) == cnf.NUM_VARS
    assert min(vars_seen) == 1


def test_encode_aes_satisfied_by_valid_schedules():
    clauses, _ = cnf.encode_aes()
    for seed in range(25):
        assign = cnf.induced_assignment(random_schedule(seed))
        assert cnf.satisfies(list(clauses), assign)
    assert brute_force_clause_check(clauses[:2000], assign)


def test_encode_aes_rejects_flipped_bit():
    clauses, _ = cnf.encode_aes()
    assign = cnf.induced_assignment(random_schedule(99))
    assign[300] ^= 1
    assert not cnf.satisfies(list(clauses), assign)


def test_encode_memory():
    sched = random_schedule(1)
    obs = decay.corrupt(sched, decay.DecayParams(0.6), seed=5)
    mem = cnf.encode_memory(obs)
    assert len(mem) == int(obs.bits.sum())
    assert all(len(c) == 1 and c[0] > 0 for c in mem)
    # theoretical model: ground truth satisfies memory clauses
    assert cnf.satisfies(mem, cnf.induced_assignment(sched))
    empty = decay.corrupt(sched, decay.DecayParams(1.0), seed=5)
    assert cnf.encode_memory(empty) == []


def test_encode_nn():
    assert cnf.encode_nn([]) == []
    clauses = cnf.encode_nn([(0, 1), (5, 0), (17, 1)])
    assert clauses == [(1,), (-6,), (18,)]
    with pytest.raises(ValueError):
        cnf.encode_nn([(0, 1), (0, 0)])


def test_build_instance_theoretical_vs_realistic():
    sched = random_schedule(2)
    obs_t = decay.corrupt(sched, decay.DecayParams(0.6, 0.0), seed=6)
    inst_t = cnf.build_instance(obs_t, assertions=[(3, 1)])
    n_ones = int(obs_t.bits.sum())
    aes_clauses, _ = cnf.encode_aes()
    assert len(inst_t.hard) == len(aes_clauses) + n_ones
    assert len(inst_t.soft) == 1

    obs_r = decay.corrupt(sched, decay.DecayParams(0.6, 0.001), seed=6)
    inst_r = cnf.build_instance(obs_r, assertions=[(3, 1)])
    assert len(inst_r.hard) == len(aes_clauses)
    assert len(inst_r.soft) == int(obs_r.bits.sum()) + 1
    weights = {w for _, w in inst_r.soft}
    assert weights == {cnf.DEFAULT_W_MEM, cnf.DEFAULT_W_NN}


def test_ground_truth_satisfies_theoretical_instance():
    sched = random_schedule(3)
    obs = decay.corrupt(sched, decay.DecayParams(0.5), seed=7)
    inst = cnf.build_instance(obs)
    assert cnf.satisfies(inst.hard, cnf.induced_assignment(sched))


def test_soft_cost():
    soft = [((1,), 2), ((-2,), 3), ((3,), 5)]
    assign = np.array([0, 1, 1, 0], dtype=np.uint8)
    # clause (-2) falsified (var2=1) and (3) falsified (var3=0)
    assert cnf.soft_cost(soft, assign) == 8
    assert cnf.soft_cost([], assign) == 0


def test_serialize_round_trip():
    inst = cnf.WcnfInstance(num_vars=2, hard=[(1, -2)], soft=[((2,), 3)])
    text = cnf.serialize_wcnf(inst)
    lines = text.splitlines()
    assert lines[0] == "p wcnf 2 2 4"
    assert lines[1] == "4 1 -2 0"
    assert lines[2] == "3 2 0"
    back = cnf.parse_wcnf(text)
    assert back.num_vars == 2
    assert back.hard == [(1, -2)]
    assert back.soft == [((2,), 3)]
    assert inst.top > sum(w for _, w in inst.soft)


def test_serialize_deterministic():
    sched = random_schedule(4)
    obs = decay.corrupt(sched, decay.DecayParams(0.6), seed=8)
    a = cnf.serialize_wcnf(cnf.build_instance(obs, assertions=[(1, 1)]))
    b = cnf.serialize_wcnf(cnf.build_instance(obs, assertions=[(1, 1)]))
    assert a == b


def test_parse_wcnf_errors():
    with pytest.raises(ValueError):
        cnf.parse_wcnf("p cnf 3 1\n1 2 0\n")
    with pytest.raises(ValueError):
        cnf.parse_wcnf("1 2 0\n")
    with pytest.raises(ValueError):
        cnf.parse_wcnf("p wcnf 2 1 5\n5 1 2\n")


def test_clause_validation():
    with pytest.raises(ValueError):
        cnf.validate_clause(())
    with pytest.raises(ValueError):
        cnf.validate_clause((1, 1))
    with pytest.raises(ValueError):
        cnf.validate_clause((1, -1))
    cnf.validate_clause((1, -2, 3))


def test_soft_weight_validation():
    with pytest.raises(ValueError):
        cnf.WcnfInstance(num_vars=1, hard=[], soft=[((1,), 0)])


def test_variable_map_sidecar(tmp_path):
    import json

    path = tmp_path / "vars.json"
    cnf.save_variable_map(path)
    meta = json.loads(path.read_text())
    assert meta["num_vars"] == 2336
    assert len(meta["z_blocks"]) == 13
    assert meta["z_blocks"][0]["first_var"] == 1921
    assert meta["z_blocks"][0]["rotated"] is True
