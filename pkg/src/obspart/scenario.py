"""Observer-partition experiments: factors, steps, partitions and priors.

A scenario is an initial state plus an ordered list of measurement steps.
Each step has one branch operator per outcome and, if mergeable, an
isometry used when the step happens inside a single observer (no collapse).
Branch operators act on the whole joint space; a step may enlarge the space
by attaching the next declared factor (as the first FRW step does).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import prod

import numpy as np

from . import linalg as la
from .exact import Surd
from .linalg import LinearMap, StateVector

Partition = frozenset


@dataclass(frozen=True)
class FactorSpace:
    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def dim(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class MeasurementStep:
    id: str
    observer: str
    branches: tuple[tuple[str, LinearMap], ...]
    merged: LinearMap | None = None

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple((str(k), m) for k, m in self.branches))

    @property
    def mergeable(self) -> bool:
        return self.merged is not None

    @property
    def outcomes(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.branches)

    def op(self, outcome: str) -> LinearMap:
        for k, m in self.branches:
            if k == outcome:
                return m
        raise KeyError(f"step {self.id} has no outcome {outcome!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.branches[0][1].shape


@dataclass(frozen=True)
class Scenario:
    name: str
    factors: tuple[FactorSpace, ...]
    initial: StateVector
    steps: tuple[MeasurementStep, ...]
    halt_target: dict[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.halt_target is not None:
            object.__setattr__(self, "halt_target", dict(self.halt_target))

    @property
    def step_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.steps)

    def step(self, step_id: str) -> MeasurementStep:
        for s in self.steps:
            if s.id == step_id:
                return s
        raise KeyError(f"unknown step id {step_id!r}")

    def mergeable_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.steps if s.mergeable)

    def partitions(self) -> list[Partition]:
        """Every subset of the mergeable steps, smallest first."""
        ids = self.mergeable_ids()
        return [Partition(c) for r in range(len(ids) + 1) for c in combinations(ids, r)]

    def factor_prefix(self, dim: int) -> int | None:
        """Number of leading factors whose joint dimension is ``dim``."""
        d = 1
        for k, f in enumerate(self.factors):
            d *= f.dim
            if d == dim:
                return k + 1
        return None

    def basis_labels(self, nfactors: int) -> list[tuple[str, ...]]:
        out = [()]
        for f in self.factors[:nfactors]:
            out = [t + (x,) for t in out for x in f.labels]
        return out


def partition_key(p, scenario: Scenario) -> tuple[int, ...]:
    order = {sid: k for k, sid in enumerate(scenario.step_ids)}
    return (len(p),) + tuple(sorted(order.get(s, len(order)) for s in p))


def format_partition(p, scenario: Scenario | None = None) -> str:
    ids = sorted(p, key=scenario.step_ids.index) if scenario else sorted(p)
    return "{" + ",".join(ids) + "}"


def check_partition(p, scenario: Scenario) -> Partition:
    p = Partition(p)
    for sid in p:
        try:
            st = scenario.step(sid)
        except KeyError:
            raise KeyError(f"partition refers to unknown step {sid!r}") from None
        if not st.mergeable:
            raise ValueError(f"partition includes step {sid!r}, which is not mergeable")
    return p


@dataclass(frozen=True)
class PartitionPrior:
    weights: dict = field(default_factory=dict)

    def __post_init__(self):
        w = {Partition(k): float(v) for k, v in self.weights.items()}
        object.__setattr__(self, "weights", w)

    @classmethod
    def point(cls, p) -> PartitionPrior:
        return cls({Partition(p): 1.0})

    @classmethod
    def uniform(cls, partitions) -> PartitionPrior:
        parts = [Partition(p) for p in partitions]
        return cls({p: 1.0 / len(parts) for p in parts})

    def total(self) -> float:
        return float(sum(self.weights.values()))

    def violations(self, tol: float = la.STRUCT_TOL) -> list[str]:
        out = [f"weight of {format_partition(p)} is negative ({w})" for p, w in self.weights.items() if w < 0]
        s = self.total()
        if abs(s - 1.0) > tol:
            out.append(f"weights sum to {s:.17g}, not 1")
        return out

    def support(self, scenario: Scenario) -> list[tuple[Partition, float]]:
        """Nonzero-weight partitions in canonical order."""
        items = [(p, w) for p, w in self.weights.items() if w > 0]
        return sorted(items, key=lambda pw: partition_key(pw[0], scenario))


@dataclass(frozen=True)
class Violation:
    where: str
    field: str
    magnitude: float
    message: str
    leak: float | None = None

    def __str__(self):
        return f"{self.where}: {self.field}: {self.message} (defect {self.magnitude:.3g})"


def validate(s: Scenario, tol: float = la.STRUCT_TOL) -> list[Violation]:
    out: list[Violation] = []

    names = [f.name for f in s.factors]
    for f in s.factors:
        if names.count(f.name) > 1:
            out.append(Violation(f"factor {f.name}", "name", 1.0, "duplicate factor name"))
        if len(f.labels) < 2:
            out.append(Violation(f"factor {f.name}", "labels", 1.0, "fewer than two basis labels"))
        if len(set(f.labels)) != len(f.labels):
            out.append(Violation(f"factor {f.name}", "labels", 1.0, "duplicate basis label"))

    defect = abs(np.sqrt(la.norm2(s.initial)) - 1.0)
    if defect > tol:
        out.append(Violation("init", "norm", defect, "initial state is not normalized"))

    if not s.steps:
        out.append(Violation("scenario", "steps", 1.0, "no measurement steps"))
    ids = [st.id for st in s.steps]
    dim = s.initial.dim
    for k, st in enumerate(s.steps):
        where = f"step {st.id}"
        if ids.count(st.id) > 1:
            out.append(Violation(where, "id", 1.0, "duplicate step id"))
        if len(st.branches) < 2:
            out.append(Violation(where, "branches", 1.0, "fewer than two branches"))
        if not st.branches:
            continue
        labels = st.outcomes
        if len(set(labels)) != len(labels):
            out.append(Violation(where, "branches", 1.0, "duplicate outcome label"))
        shapes = {m.shape for _, m in st.branches}
        if len(shapes) > 1:
            out.append(Violation(where, "branches", 1.0, f"branch operators have differing shapes {sorted(shapes)}"))
            continue
        rows, cols = st.shape
        if cols != dim:
            out.append(Violation(where, "shape", abs(cols - dim), f"expects input dimension {cols}, receives {dim}"))
        gram = sum(m.entries.conj().T @ m.entries for _, m in st.branches)
        deficit = np.eye(cols) - gram
        d = float(np.linalg.norm(deficit, 2))
        if d > tol:
            leak = None
            if k == 0 and cols == s.initial.dim:
                v = s.initial.amps
                leak = float(np.vdot(v, deficit @ v).real)
            out.append(Violation(where, "completeness", d, "sum of adjoint(A)A differs from identity", leak))
        if st.merged is not None:
            if st.merged.shape != (rows, cols):
                out.append(Violation(where, "merged", 1.0, f"merged map shape {st.merged.shape}, branches {(rows, cols)}"))
            else:
                d = la.isometry_defect(st.merged)
                if d > tol:
                    out.append(Violation(where, "merged", d, "merged map is not an isometry"))
        if s.factor_prefix(rows) is None:
            out.append(Violation(where, "shape", 1.0, f"output dimension {rows} matches no prefix of the declared factors"))
        dim = rows

    if s.factor_prefix(s.initial.dim) is None:
        out.append(Violation("init", "shape", 1.0, f"dimension {s.initial.dim} matches no prefix of the declared factors"))

    if s.halt_target is not None:
        for sid, label in s.halt_target.items():
            if sid not in ids:
                out.append(Violation("halt", sid, 1.0, "unknown step"))
                continue
            st = s.step(sid)
            if st.mergeable:
                out.append(Violation("halt", sid, 1.0, "halt target on a mergeable step"))
            if label not in st.outcomes:
                out.append(Violation("halt", sid, 1.0, f"unknown outcome {label!r}"))
    return out


# ---------------------------------------------------------------------------
# construction helpers


def ket(scenario_factors, *labels) -> StateVector:
    """Exact basis ket over the leading ``len(labels)`` factors."""
    vec = None
    for f, lab in zip(scenario_factors, labels):
        b = la.basis(f.dim, f.labels.index(lab), f.labels)
        vec = b if vec is None else la.tensor(vec, b)
    return vec


def combo(*terms) -> StateVector:
    """Sum of ``(Surd, StateVector)`` pairs, kept exact."""
    exact = None
    for c, v in terms:
        e = c * v.exact
        exact = e if exact is None else exact + e
    return StateVector.from_exact(list(exact), terms[0][1].labels)


def lift(op: LinearMap, factors, position: int, nfactors: int) -> LinearMap:
    """Embed a single-factor operator at ``position`` among the leading factors."""
    out = None
    for k in range(nfactors):
        m = op if k == position else la.identity(factors[k].dim)
        out = m if out is None else la.kron(out, m)
    return out


def builtin_frw() -> Scenario:
    coin = FactorSpace("coin", ("h", "t"))
    spin = FactorSpace("spin", ("down", "up"))
    fs = (coin, spin)
    r2 = Surd.inv_sqrt(2)
    h, t = ket(fs, "h"), ket(fs, "t")
    down, up = ket(fs[1:], "down"), ket(fs[1:], "up")

    initial = combo((Surd.inv_sqrt(3), h), (Surd.sqrt(Fraction(2, 3)), t))
    right = combo((r2, up), (r2, down))

    a_h = la.outer(la.tensor(h, down), h)
    a_t = la.outer(la.tensor(t, right), t)
    step1 = MeasurementStep("I", "F̄", (("h", a_h), ("t", a_t)), merged=la.add(a_h, a_t))

    p_down = lift(la.outer(down, down), fs, 1, 2)
    p_up = lift(la.outer(up, up), fs, 1, 2)
    step2 = MeasurementStep("II", "F", (("down", p_down), ("up", p_up)), merged=la.identity(4))

    okbar = combo((r2, h), (-r2, t))
    failbar = combo((r2, h), (r2, t))
    step3 = MeasurementStep(
        "III",
        "W̄",
        (("okbar", lift(la.outer(okbar, okbar), fs, 0, 2)), ("failbar", lift(la.outer(failbar, failbar), fs, 0, 2))),
    )

    ok = combo((r2, down), (-r2, up))
    fail = combo((r2, down), (r2, up))
    step4 = MeasurementStep(
        "IV",
        "W",
        (("ok", lift(la.outer(ok, ok), fs, 1, 2)), ("fail", lift(la.outer(fail, fail), fs, 1, 2))),
    )
    return Scenario("FRW", fs, initial, (step1, step2, step3, step4), {"III": "okbar", "IV": "ok"})


def builtin_wigner() -> Scenario:
    spin = FactorSpace("spin", ("up", "down"))
    fs = (spin,)
    r2 = Surd.inv_sqrt(2)
    up, down = ket(fs, "up"), ket(fs, "down")
    s = combo((r2, up), (r2, down))
    s_perp = combo((r2, up), (-r2, down))
    lab = MeasurementStep(
        "M", "F", (("up", la.outer(up, up)), ("down", la.outer(down, down))), merged=la.identity(2)
    )
    wigner = MeasurementStep("W", "W", (("s", la.outer(s, s)), ("sperp", la.outer(s_perp, s_perp))))
    return Scenario("Wigner", fs, s, (lab, wigner))


BUILTINS = {"frw": builtin_frw, "wigner": builtin_wigner}


def joint_dims(s: Scenario) -> list[int]:
    """Dimension schedule: input of step 1, then output of each step."""
    return [s.initial.dim] + [st.shape[0] for st in s.steps]


def n_fill(s: Scenario, p) -> int:
    """Number of equally weighted completions of a tuple with blanks on ``p``."""
    return prod(len(s.step(sid).branches) for sid in p)
