"""Independent straight-line reference implementations used as oracles.

Everything here evaluates the defining formulas with plain Python loops
and linear algebra by Gauss-Jordan elimination; no numpy, and nothing
imports the package under test.  Given Fraction inputs all results are
exact rationals, which pins the reference-instance constants without
float rounding questions.

Matrices are lists of row lists; vectors are lists.  Weights passed in
are raw and normalized internally.
"""

from __future__ import annotations

from fractions import Fraction


def transpose(a):
    return [list(col) for col in zip(*a)]


def mat_mul(a, b):
    bt = transpose(b)
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def mat_vec(a, v):
    return [sum(x * y for x, y in zip(row, v)) for row in a]


def solve(a, rhs):
    """Solve a @ x = rhs for one or more right-hand sides by Gauss-Jordan.

    `rhs` is a matrix (list of rows).  Exact under Fraction inputs.
    """
    n = len(a)
    aug = [list(a[i]) + list(rhs[i]) for i in range(n)]
    width = len(aug[0])
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(aug[r][col]))
        if aug[pivot][col] == 0:
            raise ZeroDivisionError("singular matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        div = aug[col][col]
        aug[col] = [v / div for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [v - factor * w for v, w in zip(aug[r], aug[col])]
    return [row[n:width] for row in aug]


def inverse(a):
    n = len(a)
    identity = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    return solve(a, identity)


def normalized(weights):
    total = sum(weights)
    return [w / total for w in weights]


def ols_beta(x, y):
    xt = transpose(x)
    gram = mat_mul(xt, x)
    rhs = [[v] for v in mat_vec(xt, y)]
    return [row[0] for row in solve(gram, rhs)]


def ols_leverage(x):
    p = len(x[0])
    gram_inv = inverse(mat_mul(transpose(x), x))
    return [
        sum(xrow[j] * gram_inv[j][k] * xrow[k] for j in range(p) for k in range(p))
        for xrow in x
    ]


def sigma_tilde(x, y, d):
    """Moment estimator before truncation: (RSS - sum D_i (1-h_ii)) / (m-p)."""
    m, p = len(x), len(x[0])
    beta = ols_beta(x, y)
    resid = [yi - sum(xj * bj for xj, bj in zip(xrow, beta)) for xrow, yi in zip(x, y)]
    rss = sum(r * r for r in resid)
    lev = ols_leverage(x)
    d_term = sum(di * (1 - hi) for di, hi in zip(d, lev))
    return (rss - d_term) / (m - p)


def sigma_hat(x, y, d):
    s = sigma_tilde(x, y, d)
    return s if s > 0 else 0 * s


def gls_beta(x, y, d, s2):
    p = len(x[0])
    v = [s2 + di for di in d]
    gram = [
        [
            sum(xrow[j] * xrow[k] / vi for xrow, vi in zip(x, v))
            for k in range(p)
        ]
        for j in range(p)
    ]
    rhs = [
        [sum(xrow[j] * yi / vi for xrow, yi, vi in zip(x, y, v))]
        for j in range(p)
    ]
    return [row[0] for row in solve(gram, rhs)]


def shrinkage(d, s2):
    return [di / (s2 + di) for di in d]


def eb_estimates(x, y, d, s2):
    beta = gls_beta(x, y, d, s2)
    b = shrinkage(d, s2)
    return [
        (1 - bi) * yi + bi * sum(xj * bj for xj, bj in zip(xrow, beta))
        for xrow, yi, bi in zip(x, y, b)
    ]


def benchmark_offset(y, eb, weights):
    w = normalized(weights)
    target = sum(wi * yi for wi, yi in zip(w, y))
    return target - sum(wi * ei for wi, ei in zip(w, eb))


def benchmarked(y, eb, weights):
    off = benchmark_offset(y, eb, weights)
    return [ei + off for ei in eb]


def h_v_matrix(x, d, s2):
    """GLS hat kernel h_ij = x_i' (X' V^-1 X)^-1 x_j as a full matrix."""
    p = len(x[0])
    v = [s2 + di for di in d]
    gram = [
        [
            sum(xrow[j] * xrow[k] / vi for xrow, vi in zip(x, v))
            for k in range(p)
        ]
        for j in range(p)
    ]
    gram_inv = inverse(gram)
    return [
        [
            sum(
                xi[j] * gram_inv[j][k] * xj[k]
                for j in range(p)
                for k in range(p)
            )
            for xj in x
        ]
        for xi in x
    ]


def var_sigma_tilde(d, s2, p):
    m = len(d)
    return 2 * sum((s2 + di) ** 2 for di in d) / (m - p) ** 2


def g1(d, s2):
    return [s2 * di / (s2 + di) for di in d]


def g2(x, d, s2):
    h = h_v_matrix(x, d, s2)
    b = shrinkage(d, s2)
    return [bi * bi * h[i][i] for i, bi in enumerate(b)]


def g3(x, d, s2):
    p = len(x[0])
    var = var_sigma_tilde(d, s2, p)
    b = shrinkage(d, s2)
    return [bi**3 / di * var for bi, di in zip(b, d)]


def g4_double_sum(x, d, weights, s2):
    """sum_i w_i^2 B_i^2 V_i - sum_i sum_j w_i w_j B_i B_j h_ij, O(m^2)."""
    w = normalized(weights)
    b = shrinkage(d, s2)
    v = [s2 + di for di in d]
    h = h_v_matrix(x, d, s2)
    m = len(d)
    term1 = sum(w[i] ** 2 * b[i] ** 2 * v[i] for i in range(m))
    term2 = sum(
        w[i] * w[j] * b[i] * b[j] * h[i][j] for i in range(m) for j in range(m)
    )
    return term1 - term2


def g5(x, y, d, s2):
    beta = gls_beta(x, y, d, s2)
    b = shrinkage(d, s2)
    return [
        bi**4 / di**2 * (yi - sum(xj * bj for xj, bj in zip(xrow, beta))) ** 2
        for xrow, yi, bi, di in zip(x, y, b, d)
    ]


def mse_pr(x, d, s2):
    return [
        a + bq + 2 * c for a, bq, c in zip(g1(d, s2), g2(x, d, s2), g3(x, d, s2))
    ]


def mse_benchmarked(x, d, weights, s2):
    penalty = g4_double_sum(x, d, weights, s2)
    return [v + penalty for v in mse_pr(x, d, s2)]


def reference_instance():
    """The m=3 intercept-only instance with exact rational results."""
    x = [[Fraction(1)], [Fraction(1)], [Fraction(1)]]
    y = [Fraction(0), Fraction(2), Fraction(7)]
    d = [Fraction(1), Fraction(2), Fraction(3)]
    w = [Fraction(1), Fraction(1), Fraction(1)]
    return x, y, d, w
