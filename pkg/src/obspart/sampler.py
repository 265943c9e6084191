"""Seeded Monte Carlo rounds under a partition prior.

Each round draws its partition from the prior, then walks the steps: a
merged step applies its isometry, a measured step draws outcome ``k`` with
probability ``||A_k v||^2 / ||v||^2`` and continues from the renormalized
``A_k v``.

Round ``r`` of a batch uses stream ``r`` of the seed, with fixed draw
slots: slot 0 picks the partition, slot ``1 + k`` the outcome of step ``k``,
and slot ``1 + n_steps + k`` fills a blank on step ``k``. Rows are updated
with elementwise arithmetic in a fixed order, so a round's result does not
depend on which batch or thread computed it.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import BLANK
from .rng import SeededGenerator, uniforms
from .scenario import Partition, PartitionPrior, Scenario, check_partition

DEGENERATE_NORM = 1e-12
CHUNK = 1 << 16


class DegenerateStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    outcomes: tuple[str, ...]
    halted: bool
    partition: Partition | None = None

    def to_json(self, scenario: Scenario) -> str:
        rec = {
            "round": self.round_index,
            "outcomes": dict(zip(scenario.step_ids, self.outcomes)),
            "halted": self.halted,
        }
        if self.partition is not None:
            rec["partition"] = [sid for sid in scenario.step_ids if sid in self.partition]
        return json.dumps(rec, ensure_ascii=False)


@dataclass
class Batch:
    """Column-oriented result of simulating a set of rounds."""

    streams: np.ndarray  # stream index of each round
    partition: np.ndarray  # index into ``partitions``
    outcomes: np.ndarray  # (n, n_steps) branch index, -1 for blank
    halted: np.ndarray
    partitions: list

    def __len__(self):
        return len(self.streams)


def _prior_table(s: Scenario, prior: PartitionPrior):
    bad = prior.violations()
    if bad:
        raise ValueError("; ".join(bad))
    items = prior.support(s)
    parts = [check_partition(p, s) for p, _ in items]
    cum = np.cumsum([w for _, w in items])
    return parts, cum


def _apply_rows(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.zeros((v.shape[0], m.shape[0]), dtype=complex)
    for r in range(m.shape[0]):
        for c in range(m.shape[1]):
            if m[r, c] != 0:
                out[:, r] += m[r, c] * v[:, c]
    return out


def _sq_norm(v: np.ndarray) -> np.ndarray:
    out = np.zeros(v.shape[0])
    for c in range(v.shape[1]):
        out += v[:, c].real ** 2 + v[:, c].imag ** 2
    return out


def simulate(s: Scenario, prior: PartitionPrior, seed: int, streams) -> Batch:
    """Simulate one round per entry of ``streams``."""
    streams = np.asarray(streams, dtype=np.uint64)
    n = streams.size
    parts, cum = _prior_table(s, prior)
    u = uniforms(seed, streams, 0)
    pidx = np.searchsorted(cum, u * cum[-1], side="right")
    pidx = np.minimum(pidx, len(parts) - 1)
    merged_mask = np.array([[st.id in p for st in s.steps] for p in parts], dtype=bool).reshape(len(parts), len(s.steps))

    v = np.tile(s.initial.amps, (n, 1)).astype(complex)
    outcomes = np.full((n, len(s.steps)), -1, dtype=np.int64)
    for k, st in enumerate(s.steps):
        merged_rows = merged_mask[pidx, k] if len(parts) else np.zeros(n, bool)
        rows, cols = st.shape
        if v.shape[1] != cols:
            raise ValueError(f"step {st.id} expects dimension {cols}, state has {v.shape[1]}")
        new = np.zeros((n, rows), dtype=complex)
        meas = ~merged_rows
        if merged_rows.any():
            new[merged_rows] = _apply_rows(st.merged.entries, v[merged_rows])
        if meas.any():
            vm = v[meas]
            total = _sq_norm(vm)
            if np.any(total < DEGENERATE_NORM**2):
                bad = np.flatnonzero(meas)[np.argmax(total < DEGENERATE_NORM**2)]
                raise DegenerateStateError(
                    f"round with stream {int(streams[bad])}: state norm below {DEGENERATE_NORM} before step {st.id}"
                )
            branch_out = [_apply_rows(m.entries, vm) for _, m in st.branches]
            probs = np.stack([_sq_norm(w) for w in branch_out], axis=1)
            target = uniforms(seed, streams[meas], 1 + k) * total
            acc = np.zeros(vm.shape[0])
            choice = np.full(vm.shape[0], -1, dtype=np.int64)
            for b in range(len(st.branches)):
                acc = acc + probs[:, b]
                pick = (choice < 0) & (target < acc)
                choice[pick] = b
            # round-off left target >= final sum: take the last branch with weight
            left = choice < 0
            if left.any():
                last = len(st.branches) - 1 - np.argmax(probs[left][:, ::-1] > 0, axis=1)
                choice[left] = last
            stacked = np.stack(branch_out, axis=1)
            picked = stacked[np.arange(vm.shape[0]), choice]
            pn = probs[np.arange(vm.shape[0]), choice]
            new[meas] = picked / np.sqrt(pn)[:, None]
            outcomes[np.flatnonzero(meas), k] = choice
        v = new

    halted = _halt_flags(s, outcomes)
    return Batch(streams, pidx, outcomes, halted, parts)


def _halt_flags(s: Scenario, outcomes: np.ndarray) -> np.ndarray:
    n = outcomes.shape[0]
    if not s.halt_target:
        return np.zeros(n, dtype=bool)
    ok = np.ones(n, dtype=bool)
    for sid, lab in s.halt_target.items():
        k = s.step_ids.index(sid)
        ok &= outcomes[:, k] == s.steps[k].outcomes.index(lab)
    return ok


def fill_blanks(s: Scenario, batch: Batch, seed: int) -> Batch:
    """Replace blanks with uniformly drawn outcomes (slot ``1 + n_steps + k``)."""
    out = batch.outcomes.copy()
    for k, st in enumerate(s.steps):
        blank = out[:, k] < 0
        if blank.any():
            u = uniforms(seed, batch.streams[blank], 1 + len(s.steps) + k)
            out[blank, k] = np.minimum((u * len(st.branches)).astype(np.int64), len(st.branches) - 1)
    return Batch(batch.streams, batch.partition, out, batch.halted, batch.partitions)


def to_records(s: Scenario, batch: Batch, record_partition: bool = False, round_offset: int = 0) -> list[RoundRecord]:
    labels = [st.outcomes + (BLANK,) for st in s.steps]  # index -1 -> BLANK
    recs = []
    for i in range(len(batch)):
        outs = tuple(labels[k][batch.outcomes[i, k]] for k in range(len(s.steps)))
        part = batch.partitions[batch.partition[i]] if record_partition else None
        recs.append(RoundRecord(int(batch.streams[i]) - round_offset, outs, bool(batch.halted[i]), part))
    return recs


def sample_round(s: Scenario, prior: PartitionPrior, g: SeededGenerator, record_partition: bool = False) -> RoundRecord:
    batch = simulate(s, prior, g.seed, [g.stream])
    return to_records(s, batch, record_partition)[0]


def sample_batch(s: Scenario, prior: PartitionPrior, seed: int, n_rounds: int, jobs: int = 1, chunk: int = CHUNK) -> Batch:
    """Rounds ``0 .. n_rounds-1``; ``jobs`` threads give the same result as one."""
    if n_rounds < 1:
        raise ValueError("n_rounds must be at least 1")
    starts = list(range(0, n_rounds, chunk))

    def run(a):
        return simulate(s, prior, seed, np.arange(a, min(a + chunk, n_rounds), dtype=np.uint64))

    if jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(run, starts))
    else:
        parts = [run(a) for a in starts]
    return Batch(
        np.concatenate([b.streams for b in parts]),
        np.concatenate([b.partition for b in parts]),
        np.concatenate([b.outcomes for b in parts]),
        np.concatenate([b.halted for b in parts]),
        parts[0].partitions,
    )


def sample_many(
    s: Scenario, prior: PartitionPrior, g: SeededGenerator, n_rounds: int, record_partition: bool = False, jobs: int = 1
) -> list[RoundRecord]:
    """Rounds with ``stream = round index``; ``g.stream`` is not used."""
    return to_records(s, sample_batch(s, prior, g.seed, n_rounds, jobs), record_partition)


def uniformize_blanks(s: Scenario, records: list[RoundRecord], g: SeededGenerator) -> list[RoundRecord]:
    out = []
    n = len(s.steps)
    for rec in records:
        if BLANK not in rec.outcomes:
            out.append(rec)
            continue
        outs = list(rec.outcomes)
        for k, lab in enumerate(outs):
            if lab == BLANK:
                labs = s.steps[k].outcomes
                u = uniforms(g.seed, [rec.round_index], 1 + n + k)[0]
                outs[k] = labs[min(int(u * len(labs)), len(labs) - 1)]
        out.append(RoundRecord(rec.round_index, tuple(outs), rec.halted, rec.partition))
    return out


@dataclass(frozen=True)
class HaltResult:
    rounds: int | None  # 1-based index of the first halted round; None when exhausted
    records: list

    @property
    def exhausted(self) -> bool:
        return self.rounds is None


def run_until_halt(s: Scenario, prior: PartitionPrior, g: SeededGenerator, max_rounds: int) -> HaltResult:
    """Repeat rounds until the halt target shows up.

    Round ``r`` of trial ``g.stream`` uses stream ``g.stream * max_rounds + r``.
    """
    if not s.halt_target:
        raise ValueError(f"scenario {s.name!r} has no halt target")
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    base = g.stream * max_rounds
    recs: list[RoundRecord] = []
    r, block = 0, 16
    while r < max_rounds:
        stop = min(r + block, max_rounds)
        batch = simulate(s, prior, g.seed, np.arange(base + r, base + stop, dtype=np.uint64))
        new = to_records(s, batch, round_offset=base)
        hit = np.flatnonzero(batch.halted)
        if hit.size:
            recs.extend(new[: hit[0] + 1])
            return HaltResult(r + int(hit[0]) + 1, recs)
        recs.extend(new)
        r = stop
        block *= 2
    return HaltResult(None, recs)


def halt_trials(s: Scenario, prior: PartitionPrior, seed: int, max_rounds: int, trials: int, jobs: int = 1) -> list:
    """Round counts of ``trials`` independent halting runs (None = exhausted).

    Trial ``t`` is exactly ``run_until_halt`` with stream ``t``; all trials are
    advanced together in blocks.
    """
    if not s.halt_target:
        raise ValueError(f"scenario {s.name!r} has no halt target")
    if max_rounds < 1 or trials < 1:
        raise ValueError("max_rounds and trials must be at least 1")
    result: list = [None] * trials
    active = np.arange(trials, dtype=np.uint64)
    r, block = 0, 32

    def run(streams):
        return simulate(s, prior, seed, streams).halted

    while r < max_rounds and active.size:
        stop = min(r + block, max_rounds)
        width = stop - r
        streams = (active[:, None] * np.uint64(max_rounds) + np.arange(r, stop, dtype=np.uint64)[None, :]).ravel()
        pieces = np.array_split(streams, max(1, min(jobs, streams.size // CHUNK + 1)))
        if jobs > 1 and len(pieces) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as ex:
                halted = np.concatenate(list(ex.map(run, pieces)))
        else:
            halted = np.concatenate([run(p) for p in pieces])
        halted = halted.reshape(active.size, width)
        any_hit = halted.any(axis=1)
        first = np.argmax(halted, axis=1)
        for t, f in zip(active[any_hit], first[any_hit]):
            result[int(t)] = r + int(f) + 1
        active = active[~any_hit]
        r = stop
        block = min(block * 2, 4096)
    return result


def batch_counts(s: Scenario, batch: Batch) -> dict:
    """Outcome-tuple counts of a batch (blanks appear as ``BLANK``)."""
    labels = [st.outcomes + (BLANK,) for st in s.steps]
    rows, counts = np.unique(batch.outcomes, axis=0, return_counts=True)
    return {tuple(labels[k][r[k]] for k in range(len(s.steps))): int(c) for r, c in zip(rows, counts)}
