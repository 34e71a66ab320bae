import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqsphoton.errors import DisjointSupportError, InconsistentRecordError
from pqsphoton.estimator import (
    SummarySeries,
    backward_filter,
    combine_pqs,
    forward_filter,
    jump_time,
    map_jumps,
    smooth,
    summarize,
)
from pqsphoton.fock import ModelParams, Sample, fock_state, measurement_update, relaxation_step, thermal, uniform
from pqsphoton.record import DetectionRecord

from oracles import exact_mean_decay, path_sum_marginals, random_params, random_record


def empty_record(params, S):
    z = np.zeros(S, dtype=int)
    return DetectionRecord(params, np.arange(S) % params.n_phases, z, z)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_exhaustive_path_sum(seed):
    r = np.random.default_rng(seed)
    params = random_params(r)
    S = int(r.integers(2, 7))
    record = random_record(r, params, S)
    prior = r.random(params.n_max) + 0.05
    prior /= prior.sum()
    fwd_o, bwd_o, smo_o = path_sum_marginals(params, record, prior, uniform(params.n_max))
    traj = smooth(params, record, prior=prior)
    np.testing.assert_allclose(traj.forward, fwd_o, rtol=1e-9, atol=1e-300)
    np.testing.assert_allclose(traj.backward, bwd_o, rtol=1e-9, atol=1e-300)
    np.testing.assert_allclose(traj.pqs, smo_o, rtol=1e-9, atol=1e-300)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_adjoint_pairing_constant(seed):
    r = np.random.default_rng(seed)
    params = ModelParams()
    record = random_record(r, params, 200, max_atoms=2)
    profile = smooth(params, record).log_likelihood_profile()
    # log-domain spread translates to relative spread of the likelihood itself
    assert np.ptp(profile) < 1e-9


def test_unnormalized_pairing_by_direct_products(rng):
    params = ModelParams(n_max=6)
    record = random_record(rng, params, 12)
    W = record.measurement_weights()
    rho = [uniform(6)]
    for s in range(12):
        rho.append(W[s] * relaxation_step(params, rho[-1]))
    eff = [uniform(6)]
    for s in range(11, -1, -1):
        eff.insert(0, relaxation_step(params, W[s] * eff[0], forward=False))
    pair = [a @ b for a, b in zip(rho, eff)]
    np.testing.assert_allclose(pair, pair[0], rtol=1e-12)
    traj = smooth(params, record)
    np.testing.assert_allclose(np.exp(traj.log_likelihood_profile()), pair[0], rtol=1e-12)


def test_forward_empty_record_keeps_thermal(params):
    p = thermal(params.n_max, params.n_thermal)
    dists, _ = forward_filter(params, empty_record(params, 500), prior=p)
    assert np.max(np.abs(dists - p)) < 1e-9


def test_forward_decay_from_one_photon(params):
    S = 2000
    dists, _ = forward_filter(params, empty_record(params, S), prior=fock_state(params.n_max, 1))
    mean = summarize(dists).mean_n
    t = np.arange(S + 1) * params.t_sample
    exact = exact_mean_decay(params, fock_state(params.n_max, 1), t[::200])
    np.testing.assert_allclose(mean[::200], exact, rtol=1e-3)
    # closed form of the linear birth-death mean
    nb = params.n_thermal
    np.testing.assert_allclose(mean[::200], nb + (1 - nb) * np.exp(-t[::200] / params.t_cavity), rtol=1e-3)


def test_backward_empty_record_stays_uniform(params):
    dists, norms = backward_filter(params, empty_record(params, 1000))
    assert np.max(np.abs(dists - 1 / params.n_max)) < 1e-6


def test_backward_single_sample(params):
    record = DetectionRecord.from_samples(params, [Sample([("g", 2)])])
    dists, _ = backward_filter(params, record)
    expected = relaxation_step(params, measurement_update(params, record.samples[0], uniform(25)), forward=False)
    np.testing.assert_allclose(dists[0], expected / expected.sum(), rtol=1e-13)
    np.testing.assert_array_equal(dists[1], uniform(25))


def test_forward_step_order(params):
    record = DetectionRecord.from_samples(params, [Sample([("e", 1)])])
    prior = fock_state(25, 3)
    dists, norms = forward_filter(params, record, prior=prior)
    expected = measurement_update(params, record.samples[0], relaxation_step(params, prior))
    np.testing.assert_allclose(dists[1], expected / expected.sum(), rtol=1e-13)
    assert norms[1] == pytest.approx(math.log(expected.sum()), rel=1e-13)


def test_resonant_sample_is_identity(params):
    plain = DetectionRecord.from_samples(params, [Sample(), Sample([("g", 1)]), Sample()])
    flagged = DetectionRecord.from_samples(
        params, [Sample(), Sample([("g", 1)], resonant_injection=True), Sample()]
    )
    empty = empty_record(params, 3)
    a, b, c = smooth(params, plain), smooth(params, flagged), smooth(params, empty)
    np.testing.assert_array_equal(b.pqs, c.pqs)
    assert not np.allclose(a.pqs, c.pqs)


def test_annihilating_sample_raises():
    params = ModelParams(n_max=4, fringe_offset=0.29, fringe_contrast=0.71, phases=(-math.pi / 2,), n_thermal=0.0)
    record = DetectionRecord.from_samples(params, [Sample([("e", 0)])])
    with pytest.raises(InconsistentRecordError):
        forward_filter(params, record, prior=fock_state(4, 0))
    with pytest.raises(InconsistentRecordError):
        backward_filter(params, record, terminal=fock_state(4, 0))


def test_combine_with_uniform_backward(rng):
    p = rng.random(25)
    p /= p.sum()
    np.testing.assert_allclose(combine_pqs(p, uniform(25)), p, rtol=1e-14)


def test_combine_sharpens(rng):
    p = rng.random(25) + 0.01
    p /= p.sum()
    out = combine_pqs(p, p)
    np.testing.assert_allclose(out, p**2 / (p**2).sum(), rtol=1e-14)
    assert summarize(out).map_prob[0] > summarize(p).map_prob[0]


def test_combine_disjoint_raises():
    with pytest.raises(DisjointSupportError):
        combine_pqs(fock_state(5, 0), fock_state(5, 1))


def test_combine_lifts_ambiguity():
    fwd = np.zeros(25)
    fwd[[1, 9]] = 0.5
    bwd = np.full(25, 1e-3)
    bwd[8:11] = [0.2, 0.5, 0.2]
    bwd /= bwd.sum()
    out = combine_pqs(fwd, bwd)
    assert out[9] > 0.99


def test_summarize_fock():
    s = summarize(fock_state(25, 7))
    assert (s.mean_n[0], s.std_n[0], s.map_n[0], s.map_prob[0]) == (7, 0, 7, 1)


def test_summarize_uniform():
    s = summarize(uniform(25))
    assert s.mean_n[0] == pytest.approx(12, rel=1e-14)
    assert s.std_n[0] == pytest.approx(math.sqrt(52), rel=1e-13)
    assert s.map_n[0] == 0  # ties go to the smaller n


def test_summarize_thermal():
    s = summarize(thermal(25, 0.074))
    assert s.mean_n[0] == pytest.approx(0.074, rel=1e-12)
    assert s.std_n[0] == pytest.approx(math.sqrt(0.074**2 + 0.074), rel=1e-10)
    assert s.std_n[0] == pytest.approx(0.2819148807707745, rel=1e-10)


def _series(values, dt=1.0):
    values = np.asarray(values, dtype=float)
    t = np.arange(len(values)) * dt
    return SummarySeries(t, values, 0 * values, values.astype(int), values)


def test_jump_time_none_when_flat():
    assert jump_time(_series([0.0] * 10), 0.5, "rising") is None


def test_jump_time_interpolates():
    dt = 86e-6
    assert jump_time(_series([0, 0, 0, 1, 1], dt), 0.5, "rising") == pytest.approx(2 * dt + 0.5 * dt, rel=1e-12)
    assert jump_time(_series([1, 1, 0.2, 0], dt), 0.5, "falling") == pytest.approx(1 * dt + 0.625 * dt, rel=1e-12)
    assert jump_time(_series([1, 1, 0.2, 0], dt), 0.5, "rising") is None


def test_jump_time_first_crossing():
    assert jump_time(_series([0, 1, 0, 1]), 0.5) == pytest.approx(0.5)


def test_jump_time_bad_direction():
    with pytest.raises(ValueError):
        jump_time(_series([0, 1]), 0.5, "sideways")


def test_map_jumps_counts_large_steps():
    s = _series([0, 1, 9, 9, 1, 2, 10])
    assert map_jumps(s) == 3


def test_pqs_endpoints(params, rng):
    record = random_record(rng, params, 300, max_atoms=1)
    traj = smooth(params, record)
    np.testing.assert_allclose(traj.pqs[0], traj.backward[0], rtol=1e-13)
    np.testing.assert_allclose(traj.pqs[-1], traj.forward[-1], rtol=1e-13)
    for name in ("forward", "backward", "pqs"):
        np.testing.assert_allclose(getattr(traj, name).sum(axis=1), 1, atol=1e-10)


def test_deterministic(params, rng):
    record = random_record(rng, params, 400, max_atoms=2)
    a, b = smooth(params, record), smooth(params, record)
    for name in ("forward", "backward", "pqs", "log_norms_forward", "log_norms_backward"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_estimator_ignores_truth(params):
    from pqsphoton.simulate import SimConfig, InitialState, simulate_run

    cfg = SimConfig(params, InitialState.coherent(5.0), 500)
    rec = simulate_run(cfg, np.random.default_rng(1))
    a = smooth(params, rec)
    b = smooth(params, rec.without_truth())
    assert a.pqs.tobytes() == b.pqs.tobytes()
