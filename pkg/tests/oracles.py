"""Naive reference implementations used as independent oracles in tests."""

import math


def xi_linear_loop(e, v, gamma):
    n, t = len(e), len(v)
    out = []
    for i in range(n):
        acc = 0.0
        for s in range(t):
            acc += v[s] * gamma[i] * e[i][s]
        out.append(acc / math.sqrt(t))
    return out


def xi_quadratic_loop(e, w):
    n, t = len(e), len(w)
    out = []
    for i in range(n):
        acc = 0.0
        for s in range(t):
            for r in range(s):
                acc += w[s][r] * e[i][r] * e[i][s]
        out.append(acc / t)
    return out


def aggregate_loop(values):
    total = 0.0
    for x in values:
        total += x
    return total / math.sqrt(len(values))


def gram_loop(pairs):
    n = len(pairs)
    s = [[0.0, 0.0], [0.0, 0.0]]
    for a, b in pairs:
        s[0][0] += a * a
        s[0][1] += a * b
        s[1][0] += b * a
        s[1][1] += b * b
    return [[x / n for x in row] for row in s]


def slope_loop(y, x):
    # no-intercept least squares slope
    num = sum(a * b for a, b in zip(y, x))
    den = sum(b * b for b in x)
    return num / den


def mean_loop(row):
    return sum(row) / len(row)
