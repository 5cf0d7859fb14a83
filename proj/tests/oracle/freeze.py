"""Independent reference values for the C++ tests.

Transport costs come from scipy's HiGHS LP on the sink-augmented
transportation problem; DLVP sums use exact rationals and closed-form tails.
Run: python3 tests/oracle/freeze.py
"""
from fractions import Fraction

import mpmath
import numpy as np
from scipy.optimize import linprog

# Shared test cost: breakpoints, values, final slope.
TEST_BP = [0.0, 1.0, 2.0, 4.0]
TEST_VAL = [0.0, 1.0, 1.5, 2.2]
TEST_SLOPE = 0.3


def test_cost(r):
    if r >= TEST_BP[-1]:
        return TEST_VAL[-1] + TEST_SLOPE * (r - TEST_BP[-1])
    k = np.searchsorted(TEST_BP, r, side="right")
    x0, x1 = TEST_BP[k - 1], TEST_BP[k]
    return TEST_VAL[k - 1] + (r - x0) / (x1 - x0) * (TEST_VAL[k] - TEST_VAL[k - 1])


def torus_dist(a, b, L):
    d = np.abs(np.asarray(a, float) - np.asarray(b, float)) % L
    d = np.minimum(d, L - d)
    return float(np.sqrt(np.sum(d * d)))


def semicoupling_cost(mu, nu, L, cost):
    """min sum q_ij c_ij s.t. row sums <= mu_i, column sums = nu_j."""
    m, n = len(mu), len(nu)
    c = np.array([[cost(torus_dist(x, y, L)) for (y, _) in nu] for (x, _) in mu]).ravel()
    a_ub = np.zeros((m, m * n))
    for i in range(m):
        a_ub[i, i * n:(i + 1) * n] = 1.0
    a_eq = np.zeros((n, m * n))
    for j in range(n):
        a_eq[j, j::n] = 1.0
    res = linprog(c, A_ub=a_ub, b_ub=[w for _, w in mu], A_eq=a_eq, b_eq=[w for _, w in nu],
                  bounds=(0, None), method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                                               "dual_feasibility_tolerance": 1e-10})
    assert res.status == 0
    return res.fun


def dlvp(tail, n_max):
    """Thresholds N_k: smallest N with tail(N) <= 2^-k, gaps nondecreasing."""
    th, prev, gap, k = [], 0, 1, 1
    while True:
        bound = Fraction(1, 2 ** k)
        first = next((n for n in range(1, n_max + 1) if tail_le(tail(n), bound)), None)
        if first is None:
            if th:
                break
            first = n_max + 1
        nxt = max(prev + gap, first)
        gap, prev = nxt - prev, nxt
        th.append(nxt)
        if nxt > n_max:
            break
        k += 1
    return th, gap


def tail_le(t, bound):
    if isinstance(t, Fraction):
        return t <= bound
    return t <= mpmath.mpf(bound.numerator) / bound.denominator


def dlvp_eval(th, gap, x):
    pts = [0] + th
    for k in range(1, len(pts)):
        if x <= pts[k]:
            return (k - 1) + mpmath.mpf(x - pts[k - 1]) / (pts[k] - pts[k - 1])
    return len(th) + mpmath.mpf(x - pts[-1]) / gap


def dlvp_sums(a, tail, moment, n_max):
    """Partial sum over n < n_max and the full series sum_n a_n theta(n + 1)."""
    th, gap = dlvp(tail, n_max)
    partial = mpmath.fsum(a(n) * dlvp_eval(th, gap, n + 1) for n in range(n_max))
    # Past the last threshold theta is linear: theta(x) = K + (x - N_K) / gap.
    big = th[-1]
    head = mpmath.fsum(a(n) * dlvp_eval(th, gap, n + 1) for n in range(big))
    rest = len(th) * tail_mp(tail, big) + (moment(big) - big * tail_mp(tail, big)) / gap
    return th, partial, head + rest


def tail_mp(tail, n):
    t = tail(n)
    return mpmath.mpf(t.numerator) / t.denominator if isinstance(t, Fraction) else t


def main():
    mpmath.mp.dps = 40
    print("semicoupling_1d", semicoupling_cost([((0.0,), 1.0), ((3.0,), 1.0)], [((1.0,), 1.0)], 10.0, test_cost))
    mu2 = [((0.1, 0.2), 0.7), ((0.8, 0.9), 1.1), ((0.45, 0.5), 0.4), ((0.3, 0.75), 0.9)]
    nu2 = [((0.95, 0.1), 1.0), ((0.5, 0.55), 0.8), ((0.2, 0.6), 0.6)]
    print("semicoupling_2d", semicoupling_cost(mu2, nu2, 1.0, test_cost))
    print("distance_3atom", semicoupling_cost([((0.1,), 1.0), ((0.6,), 2.0)], [((0.3,), 1.5), ((0.9,), 1.5)],
                                              1.0, lambda r: r))
    left = [(((i + 0.5) * 0.25,), 0.25) for i in range(4)]
    right = [(((i + 4.5) * 0.25,), 0.25) for i in range(4)]
    print("halves_test_cost", semicoupling_cost(left, right, 2.0, test_cost))
    print("halves_linear", semicoupling_cost(left, right, 2.0, lambda r: r))

    n_geo = 60
    th, partial, full = dlvp_sums(lambda n: mpmath.mpf(2) ** -n, lambda n: Fraction(2, 2 ** n),
                                  lambda n: mpmath.mpf(n + 2) / mpmath.mpf(2) ** (n - 1), n_geo)
    print("geometric thresholds", th[:6], "count", len(th))
    print("geometric partial", mpmath.nstr(partial, 20), "full", mpmath.nstr(full, 20))

    n_cube = 4096
    z3 = mpmath.zeta(3)
    # tail(N) = sum_{m > N} m^-3 kept as an exact-enough mpf.
    tails = {}

    def cube_tail(n):
        if n not in tails:
            tails[n] = z3 - mpmath.fsum(mpmath.mpf(m) ** -3 for m in range(1, n + 1)) if n < 64 else \
                mpmath.zeta(3, n + 1)
        return tails[n]

    th, partial, full = dlvp_sums(lambda n: mpmath.mpf(n + 1) ** -3, cube_tail,
                                  lambda n: mpmath.zeta(2, n + 1), n_cube)
    print("cubic thresholds", th[:8], "count", len(th), "last", th[-1])
    print("cubic partial", mpmath.nstr(partial, 20), "full", mpmath.nstr(full, 20))
    print("cubic remainder", mpmath.nstr(mpmath.zeta(3, n_cube + 1), 20),
          "moment", mpmath.nstr(mpmath.zeta(2, n_cube + 1), 20))


if __name__ == "__main__":
    main()
