from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obspart import builtin_frw
from obspart.engine import BLANK, exact_distribution
from obspart.rng import SeededGenerator, splitmix64, uniforms
from obspart.sampler import (
    DegenerateStateError,
    batch_counts,
    fill_blanks,
    halt_trials,
    run_until_halt,
    sample_batch,
    sample_many,
    sample_round,
    simulate,
    to_records,
    uniformize_blanks,
)
from obspart.linalg import StateVector
from obspart.scenario import PartitionPrior

MASK = (1 << 64) - 1


GAMMA = 0x9E3779B97F4A7C15


def _mix(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def _splitmix_reference(state, n):
    out = []
    for _ in range(n):
        state = (state + GAMMA) & MASK
        out.append(_mix(state))
    return out


def test_splitmix64_published_vector():
    want = [6457827717110365317, 3203168211198807973, 9817491932198370423, 4593380528125082431, 16408922859458223821]
    assert splitmix64(1234567, 5) == want
    assert _splitmix_reference(1234567, 5) == want


@given(st.integers(0, MASK), st.integers(0, 1000), st.integers(0, 50))
def test_counter_addressing_matches_sequential(seed, stream, j):
    g = SeededGenerator(seed, stream)
    # stream start: mix(mix(seed) + GAMMA * (stream + 1)), then plain SplitMix64
    state0 = _mix((_mix(seed) + GAMMA * (stream + 1)) & MASK)
    assert g.raw(j) == _splitmix_reference(state0, j + 1)[j]
    assert 0 <= g.uniform(j) < 1
    assert g.uniform(j) == (g.raw(j) >> 11) * 2.0**-53


def test_streams_differ():
    u = uniforms(7, np.arange(1000), 0)
    assert len(set(u.tolist())) == 1000
    assert SeededGenerator(7, 3).substream(4) == SeededGenerator(7, 4)


def test_same_seed_same_records(frw):
    prior = PartitionPrior.uniform(frw.partitions())
    a = sample_many(frw, prior, SeededGenerator(42), 500, record_partition=True)
    b = sample_many(frw, prior, SeededGenerator(42), 500, record_partition=True)
    c = sample_many(frw, prior, SeededGenerator(43), 500, record_partition=True)
    assert a == b
    assert a != c


def test_batch_size_and_threads_do_not_matter(frw):
    prior = PartitionPrior.uniform(frw.partitions())
    base = sample_batch(frw, prior, 5, 3000)
    for chunk, jobs in ((1, 1), (7, 3), (1000, 4), (4096, 2)):
        other = sample_batch(frw, prior, 5, 3000, jobs=jobs, chunk=chunk)
        assert np.array_equal(base.outcomes, other.outcomes)
        assert np.array_equal(base.partition, other.partition)


def test_single_round_matches_batch(frw):
    prior = PartitionPrior.uniform(frw.partitions())
    batch = to_records(frw, sample_batch(frw, prior, 11, 50), record_partition=True)
    for r in (0, 17, 49):
        assert sample_round(frw, prior, SeededGenerator(11, r), record_partition=True) == batch[r]


def test_blanks_follow_partition(frw):
    prior = PartitionPrior.uniform(frw.partitions())
    for rec in sample_many(frw, prior, SeededGenerator(3), 400, record_partition=True):
        for sid, lab in zip(frw.step_ids, rec.outcomes):
            assert (lab == BLANK) == (sid in rec.partition)


def test_halt_flag_consistent(frw):
    prior = PartitionPrior.uniform(frw.partitions())
    for rec in sample_many(frw, prior, SeededGenerator(9), 2000):
        assert rec.halted == (rec.outcomes[2] == "okbar" and rec.outcomes[3] == "ok")


def test_impossible_outcomes_never_sampled(frw):
    batch = sample_batch(frw, PartitionPrior.point(frozenset()), 1, 20000)
    exact = exact_distribution(frw, frozenset())
    for t, n in batch_counts(frw, batch).items():
        assert exact.prob(t) > 0, t


def test_wigner_frequencies(wigner):
    batch = sample_batch(wigner, PartitionPrior.point(frozenset()), 2024, 20000)
    freq = np.mean(batch.outcomes[:, 1] == 0)
    assert abs(freq - 0.5) <= 3 * np.sqrt(0.25 / 20000)
    merged = sample_batch(wigner, PartitionPrior.point({"M"}), 2024, 5000)
    assert np.all(merged.outcomes[:, 1] == 0)
    assert np.all(merged.outcomes[:, 0] == -1)


def test_frequencies_match_exact(frw):
    n = 40000
    batch = sample_batch(frw, PartitionPrior.point({"I"}), 77, n)
    exact = exact_distribution(frw, {"I"})
    counts = batch_counts(frw, batch)
    for t, p in exact.entries.items():
        assert abs(counts.get(t, 0) / n - p) <= 4 * np.sqrt(p * (1 - p) / n) + 1e-12


def test_fill_blanks_uniform(frw):
    batch = fill_blanks(frw, sample_batch(frw, PartitionPrior.point({"I", "II"}), 4, 20000), 4)
    assert np.all(batch.outcomes >= 0)
    for k in (0, 1):
        assert abs(np.mean(batch.outcomes[:, k] == 0) - 0.5) < 0.02


def test_uniformize_records_matches_fill_blanks(frw):
    prior = PartitionPrior.uniform(frw.partitions())
    raw = sample_batch(frw, prior, 8, 300)
    recs = uniformize_blanks(frw, to_records(frw, raw), SeededGenerator(8))
    assert recs == to_records(frw, fill_blanks(frw, raw, 8))
    assert all(BLANK not in r.outcomes for r in recs)


def test_run_until_halt_matches_trials(frw):
    prior = PartitionPrior.point({"I", "II"})
    trials = halt_trials(frw, prior, 31, 500, 40)
    for t in range(40):
        res = run_until_halt(frw, prior, SeededGenerator(31, t), 500)
        assert res.rounds == trials[t]
        assert res.records[-1].halted
        assert not any(r.halted for r in res.records[:-1])
        assert len(res.records) == res.rounds


def test_halt_exhaustion(frw):
    step2 = replace(frw.step("II"), merged=None)
    s = replace(frw, steps=(frw.steps[0], step2) + frw.steps[2:], halt_target={"II": "down", "III": "okbar"})
    res = run_until_halt(s, PartitionPrior.point({"I"}), SeededGenerator(1), 200)
    assert res.exhausted
    assert len(res.records) == 200
    assert halt_trials(s, PartitionPrior.point({"I"}), 1, 50, 3) == [None, None, None]


def test_halt_needs_target(wigner):
    with pytest.raises(ValueError):
        run_until_halt(wigner, PartitionPrior.point(frozenset()), SeededGenerator(0), 10)


def test_degenerate_state_raises(frw):
    bad = replace(frw, initial=StateVector(np.zeros(2)))
    with pytest.raises(DegenerateStateError, match="stream 0"):
        simulate(bad, PartitionPrior.point(frozenset()), 0, [0])


@given(st.integers(0, 2**63), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_sampled_tuples_have_positive_probability(seed, stream):
    s = builtin_frw()
    rec = sample_round(s, PartitionPrior.uniform(s.partitions()), SeededGenerator(seed, stream))
    # replay the round with the exact engine: every sampled tuple has positive probability
    part = frozenset(sid for sid, lab in zip(s.step_ids, rec.outcomes) if lab == BLANK)
    assert exact_distribution(s, part).prob(rec.outcomes) > 0
