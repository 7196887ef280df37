"""Exact RSA tables for the 2x2 box domain, used as frozen test constants.

Programs are (left, right, top, bottom, object) with left <= right and
top <= bottom; utterance ((y*2 + x)*2 + object) reveals an object at (x, y).
Everything is computed with rational arithmetic and printed as Rust arrays.
"""
from fractions import Fraction
from itertools import product

PROGRAMS = [p for p in product(range(2), repeat=5) if p[0] <= p[1] and p[2] <= p[3]]
UTTERANCES = range(8)


def utt(x, y, obj):
    return (y * 2 + x) * 2 + obj


def truths(p):
    l, r, t, b, o = p
    return {utt(x, y, o) for y in range(t, b + 1) for x in range(l, r + 1)}


TRUTHS = [truths(p) for p in PROGRAMS]


def consistent(spec):
    return [h for h in range(len(PROGRAMS)) if set(spec) <= TRUTHS[h]]


def l0(h, spec):
    c = consistent(spec)
    return Fraction(1, len(c)) if h in c else Fraction(0)


def s1(u, h, prefix):
    alts = [v for v in UTTERANCES if v not in prefix]
    den = sum(l0(h, prefix + [v]) for v in alts)
    return l0(h, prefix + [u]) / den


def joint_l1(spec):
    w = []
    for h in range(len(PROGRAMS)):
        p = Fraction(1)
        for t, u in enumerate(spec):
            if p == 0 or not set(spec[: t + 1]) <= TRUTHS[h]:
                p = Fraction(0)
                break
            p *= s1(u, h, spec[:t])
        w.append(p)
    z = sum(w)
    return [x / z for x in w]


def lex(i, j, spec):
    c = consistent(spec)
    if not c:
        return Fraction(0)
    return Fraction(sum(1 for h in c if PROGRAMS[h][i] == j), len(c))


def factored_s1(i, j, u, prefix):
    alts = [v for v in UTTERANCES if v not in prefix]
    den = sum(lex(i, j, prefix + [v]) for v in alts)
    return lex(i, j, prefix + [u]) / den if den else Fraction(0)


def factored_l1(spec):
    out = []
    for i in range(5):
        w = []
        for j in range(2):
            p = Fraction(1)
            for t, u in enumerate(spec):
                p *= factored_s1(i, j, u, spec[:t])
            w.append(p)
        z = sum(w)
        out.append([x / z for x in w])
    return out


SPECS = [
    [utt(0, 0, 0)],
    [utt(0, 0, 0), utt(1, 0, 0)],
    [utt(1, 1, 1), utt(0, 1, 1)],
    [utt(0, 1, 0), utt(0, 0, 0)],
    [utt(0, 0, 1), utt(1, 1, 1), utt(0, 1, 1)],
]


def fmt(x):
    return repr(float(x))


if __name__ == "__main__":
    for spec in SPECS:
        print("spec", spec)
        print("joint", "[" + ", ".join(fmt(x) for x in joint_l1(spec)) + "]")
        print("factored", "[" + ", ".join("[" + ", ".join(fmt(x) for x in f) + "]" for f in factored_l1(spec)) + "]")
