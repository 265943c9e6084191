"""Brute-force reference for the FRW and Wigner experiments.

Built straight from the kets of the protocol with plain numpy (kron, outer)
and enumerated with nested loops. Shares no code with the package.
"""

import itertools

import numpy as np

r2 = 1 / np.sqrt(2)

# coin basis (h, t), spin basis (down, up)
h, t = np.array([1, 0], complex), np.array([0, 1], complex)
down, up = np.array([1, 0], complex), np.array([0, 1], complex)
right = r2 * (up + down)
okbar, failbar = r2 * (h - t), r2 * (h + t)
ok, fail = r2 * (down - up), r2 * (down + up)
i_state = np.sqrt(1 / 3) * h + np.sqrt(2 / 3) * t
I2 = np.eye(2)


def ketbra(k, b):
    return np.outer(k, b.conj())


A1 = {"h": ketbra(np.kron(h, down), h), "t": ketbra(np.kron(t, right), t)}
A2 = {"down": np.kron(I2, ketbra(down, down)), "up": np.kron(I2, ketbra(up, up))}
A3 = {"okbar": np.kron(ketbra(okbar, okbar), I2), "failbar": np.kron(ketbra(failbar, failbar), I2)}
A4 = {"ok": np.kron(I2, ketbra(ok, ok)), "fail": np.kron(I2, ketbra(fail, fail))}
U1 = A1["h"] + A1["t"]
U2 = np.eye(4)
BRA3 = {"okbar": okbar, "failbar": failbar}
BRA4 = {"ok": ok, "fail": fail}


def frw_partition(merged):
    """{(x, y, z, w): P} with '-' for merged steps, by nested loops."""
    out = {}
    xs = ["-"] if "I" in merged else ["h", "t"]
    ys = ["-"] if "II" in merged else ["down", "up"]
    for x in xs:
        for y in ys:
            for z in ("okbar", "failbar"):
                for w in ("ok", "fail"):
                    v = i_state
                    v = (U1 if x == "-" else A1[x]) @ v
                    v = (U2 if y == "-" else A2[y]) @ v
                    v = A3[z] @ v
                    v = A4[w] @ v
                    out[(x, y, z, w)] = float(np.vdot(v, v).real)
    return out


def frw_bra_form(x, y, z, w):
    """|<z|<w| A4_w A3_z A2_y A1_x |i>|^2, the literal contraction."""
    v = A4[w] @ A3[z] @ A2[y] @ A1[x] @ i_state
    bra = np.kron(BRA3[z], BRA4[w])
    return abs(np.vdot(bra, v)) ** 2


FRW_PARTITIONS = [frozenset(), frozenset({"I"}), frozenset({"II"}), frozenset({"I", "II"})]
N_FILL = {frozenset(): 1, frozenset({"I"}): 2, frozenset({"II"}): 2, frozenset({"I", "II"}): 4}


def frw_mixture(weights):
    """Full-tuple mixture with blanks filled uniformly."""
    out = {}
    for x, y, z, w in itertools.product(("h", "t"), ("down", "up"), ("okbar", "failbar"), ("ok", "fail")):
        total = 0.0
        for p, pw in weights.items():
            comp = frw_partition(p)
            key = ("-" if "I" in p else x, "-" if "II" in p else y, z, w)
            total += pw / N_FILL[p] * comp[key]
        out[(x, y, z, w)] = total
    return out


# Wigner: spin basis (up, down)
w_up, w_down = np.array([1, 0], complex), np.array([0, 1], complex)
s_state = r2 * (w_up + w_down)
s_perp = r2 * (w_up - w_down)


def wigner_partition(merged):
    out = {}
    ms = ["-"] if "M" in merged else ["up", "down"]
    for m in ms:
        for w, bw in (("s", s_state), ("sperp", s_perp)):
            v = s_state if m == "-" else ketbra(w_up if m == "up" else w_down, w_up if m == "up" else w_down) @ s_state
            v = ketbra(bw, bw) @ v
            out[(m, w)] = float(np.vdot(v, v).real)
    return out
