"""Exact outcome distributions by enumerating Born chains.

For a partition ``o`` (the steps done inside a single observer) the
probability of an outcome tuple is the squared norm of

    M_n ... M_1 |initial>

where ``M_k`` is the branch operator of the recorded outcome, or the merged
isometry when step ``k`` is in ``o``. Merged steps carry no outcome and are
marked ``BLANK`` in the tuple.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .scenario import (
    Partition,
    PartitionPrior,
    Scenario,
    check_partition,
    format_partition,
    n_fill,
)

BLANK = "-"
MAX_STEPS = 16
ZERO_CUTOFF = 1e-15


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class OutcomeDistribution:
    step_ids: tuple[str, ...]
    partition: Partition | None  # None for a partition mixture
    entries: dict

    def prob(self, outcome) -> float:
        return self.entries.get(tuple(outcome), 0.0)

    def total(self) -> float:
        return float(sum(self.entries[t] for t in sorted(self.entries)))

    def marginal(self, step_ids) -> dict:
        idx = [self.step_ids.index(s) for s in step_ids]
        out: dict = {}
        for t in sorted(self.entries):
            key = tuple(t[i] for i in idx)
            out[key] = out.get(key, 0.0) + self.entries[t]
        return out

    def to_tsv(self) -> str:
        lines = ["\t".join(self.step_ids + ("prob",))]
        for t in sorted(self.entries):
            lines.append("\t".join(t) + "\t" + repr(float(self.entries[t])))
        return "\n".join(lines) + "\n"


def _check_steps(s: Scenario):
    if len(s.steps) > MAX_STEPS:
        raise ContractError(f"scenario has {len(s.steps)} steps; at most {MAX_STEPS} are supported")


def chain_amplitude(s: Scenario, o, outcome) -> float:
    """Probability ``||M_n ... M_1 |initial>||^2`` of one outcome tuple."""
    o = check_partition(o, s)
    outcome = tuple(outcome)
    if len(outcome) != len(s.steps):
        raise ContractError(f"outcome tuple has {len(outcome)} entries for {len(s.steps)} steps")
    v = s.initial.amps
    for st, lab in zip(s.steps, outcome):
        if st.id in o:
            if lab != BLANK:
                raise ContractError(f"step {st.id} is merged in {format_partition(o, s)} but has outcome {lab!r}")
            m = st.merged
        else:
            if lab == BLANK:
                raise ContractError(f"step {st.id} is measured in {format_partition(o, s)} but is blank")
            try:
                m = st.op(lab)
            except KeyError as e:
                raise ContractError(str(e.args[0])) from None
        if m.cols != v.size:
            raise ContractError(f"step {st.id} expects dimension {m.cols}, state has {v.size}")
        v = m.entries @ v
    return float(np.vdot(v, v).real)


def exact_distribution(s: Scenario, o) -> OutcomeDistribution:
    """All outcome tuples for partition ``o``, including zero-probability ones."""
    _check_steps(s)
    o = check_partition(o, s)
    entries: dict = {}

    def walk(k, v, prefix):
        if k == len(s.steps):
            p = float(np.vdot(v, v).real)
            entries[prefix] = 0.0 if p < ZERO_CUTOFF else p
            return
        st = s.steps[k]
        if st.id in o:
            walk(k + 1, st.merged.entries @ v, prefix + (BLANK,))
        else:
            for lab, m in st.branches:
                walk(k + 1, m.entries @ v, prefix + (lab,))

    walk(0, s.initial.amps, ())
    return OutcomeDistribution(s.step_ids, o, entries)


def full_support(s: Scenario) -> list[tuple[str, ...]]:
    """Every fully labelled outcome tuple, sorted."""
    return sorted(product(*(st.outcomes for st in s.steps)))


def visible(t, o, s: Scenario) -> tuple[str, ...]:
    return tuple(BLANK if st.id in o else lab for st, lab in zip(s.steps, t))


def mixture_distribution(s: Scenario, prior: PartitionPrior) -> OutcomeDistribution:
    """P(t) = sum_o p_o / n_o * P_o(visible(t)) over fully labelled tuples.

    ``n_o`` is the number of ways to fill the blanks of ``o``, i.e. blanks are
    filled uniformly.
    """
    _check_steps(s)
    bad = prior.violations()
    if bad:
        raise ContractError("; ".join(bad))
    support = full_support(s)
    entries = dict.fromkeys(support, 0.0)
    for p, w in prior.support(s):
        p = check_partition(p, s)
        comp = exact_distribution(s, p)
        scale = w / n_fill(s, p)
        for t in support:
            entries[t] += scale * comp.entries[visible(t, p, s)]
    return OutcomeDistribution(s.step_ids, None, entries)


def halt_probability(s: Scenario, prior: PartitionPrior) -> float:
    if not s.halt_target:
        raise ContractError(f"scenario {s.name!r} has no halt target")
    mix = mixture_distribution(s, prior)
    idx = [(s.step_ids.index(sid), lab) for sid, lab in s.halt_target.items()]
    return float(sum(p for t, p in sorted(mix.entries.items()) if all(t[i] == lab for i, lab in idx)))
