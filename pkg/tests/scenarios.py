"""Random valid scenarios and token-stream fuzz inputs for DSL tests."""

import numpy as np

from obspart import linalg as la
from obspart.exact import Surd
from obspart.scenario import FactorSpace, MeasurementStep, Scenario

VOCAB = [
    "scenario", "factor", "init", "step", "observer", "mergeable", "branch", "halt",
    "sqrt", "i", "{", "}", ",", "=", "|", "<", ">", ":", "+", "-", "*", "/", "(", ")",
    '"F"', '"W"', '"x', "0", "1", "2", "3", "0.5", "1e400", "1.5e-3", "h", "t", "up", "down",
    "coin", "spin", "I", "II", "#", "\n", "@", "\\",
]


def _isometry(rng, rows, cols):
    z = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    q, _ = np.linalg.qr(z)
    return q


def _exact_projectors(d):
    """Computational-basis projectors as exact maps."""
    out = []
    for k in range(d):
        grid = [[Surd.rational(1 if r == c == k else 0) for c in range(d)] for r in range(d)]
        out.append(la.LinearMap.from_exact(grid))
    return out


def random_scenario(seed: int, max_dim: int = 12) -> Scenario:
    rng = np.random.default_rng(seed)
    sizes = [int(rng.integers(2, 4))]
    while len(sizes) < 3 and rng.random() < 0.6 and np.prod(sizes) * 2 <= max_dim:
        sizes.append(int(rng.integers(2, 1 + min(3, max_dim // int(np.prod(sizes))))))
    nf = len(sizes)
    factors = tuple(FactorSpace(f"f{j}", tuple(f"q{j}_{k}" for k in range(d))) for j, d in enumerate(sizes))
    dims = np.cumprod([f.dim for f in factors])

    n_in = int(rng.integers(1, nf + 1))
    d_in = int(dims[n_in - 1])
    if rng.random() < 0.3:
        initial = la.StateVector.from_exact([Surd.inv_sqrt(d_in)] * d_in)
    else:
        z = rng.normal(size=d_in) + 1j * rng.normal(size=d_in) * (rng.random() < 0.5)
        initial = la.StateVector(z / np.linalg.norm(z))

    steps = []
    for k in range(int(rng.integers(1, 5))):
        n_out = int(rng.integers(n_in, nf + 1))
        d_out = int(dims[n_out - 1])
        if d_out == d_in and rng.random() < 0.3:
            ops = _exact_projectors(d_in)
            merged = la.identity(d_in) if rng.random() < 0.5 else None
        else:
            nb = int(rng.integers(2, 4))
            v = _isometry(rng, nb * d_out, d_in)
            ops = [la.LinearMap(v[b * d_out:(b + 1) * d_out]) for b in range(nb)]
            merged = la.LinearMap(_isometry(rng, d_out, d_in)) if rng.random() < 0.5 else None
        branches = tuple((f"o{b}", m) for b, m in enumerate(ops))
        steps.append(MeasurementStep(f"S{k}", f"obs {k}", branches, merged))
        n_in, d_in = n_out, d_out

    halt = None
    measured = [st for st in steps if not st.mergeable]
    if measured and rng.random() < 0.5:
        st = measured[int(rng.integers(len(measured)))]
        halt = {st.id: st.outcomes[0]}
    return Scenario(f"random {seed}", factors, initial, tuple(steps), halt)


def max_difference(a: Scenario, b: Scenario) -> float:
    """Largest entrywise gap between two structurally equal scenarios (inf if not equal)."""
    if (a.name, a.factors, a.step_ids, a.halt_target) != (b.name, b.factors, b.step_ids, b.halt_target):
        return np.inf
    if a.initial.amps.shape != b.initial.amps.shape:
        return np.inf
    gap = float(np.max(np.abs(a.initial.amps - b.initial.amps)))
    for sa, sb in zip(a.steps, b.steps):
        if (sa.observer, sa.outcomes, sa.mergeable) != (sb.observer, sb.outcomes, sb.mergeable):
            return np.inf
        pairs = [(ma, mb) for (_, ma), (_, mb) in zip(sa.branches, sb.branches)]
        if sa.mergeable:
            pairs.append((sa.merged, sb.merged))
        for ma, mb in pairs:
            if ma.shape != mb.shape:
                return np.inf
            gap = max(gap, float(np.max(np.abs(ma.entries - mb.entries))))
    return gap


def random_tokens(rng) -> str:
    n = int(rng.integers(0, 40))
    seps = [" ", " ", " ", "\n", ""]
    return "".join(VOCAB[int(rng.integers(len(VOCAB)))] + seps[int(rng.integers(len(seps)))] for _ in range(n))


def mutate(rng, text: str) -> str:
    """Delete, duplicate or replace a few whitespace-separated chunks of ``text``."""
    words = text.replace("\n", " \n ").split(" ")
    for _ in range(int(rng.integers(1, 4))):
        if not words:
            break
        j = int(rng.integers(len(words)))
        op = rng.integers(3)
        if op == 0:
            del words[j]
        elif op == 1:
            words.insert(j, words[j])
        else:
            words[j] = VOCAB[int(rng.integers(len(VOCAB)))]
    return " ".join(words)
