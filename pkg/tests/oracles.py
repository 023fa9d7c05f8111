"""Brute-force reference computations, deliberately naive.

Everything here enumerates whole sequence pairs and works in mpmath at
high precision, sharing no code with the package beyond the channel data.
"""

import itertools
from collections import defaultdict

import mpmath

mpmath.mp.dps = 60
SNAP = mpmath.mpf(10) ** -40


def mp(p):
    return mpmath.mpf(p.numerator) / p.denominator


def q_floor(v, delta):
    """floor(v / delta), snapping values that sit on an edge to that edge."""
    r = v / mp(delta)
    k = mpmath.nint(r)
    if abs(r - k) < SNAP:
        return int(k)
    return int(mpmath.floor(r))


def py(dmc):
    return [sum(mp(dmc.px[a]) * mp(dmc.pyx[a][b]) for a in range(dmc.x_size))
            for b in range(dmc.y_size)]


def block_bin(dmc, delta, x, y, p_y=None):
    p_y = p_y or py(dmc)
    llr = mpmath.mpf(0)
    for a, b in zip(x, y):
        llr += mpmath.log(mp(dmc.pyx[a][b]) / p_y[b], 2)
    return q_floor(llr, delta)


def gamma_given_x(dmc, delta, x):
    p_y = py(dmc)
    out = defaultdict(lambda: mpmath.mpf(0))
    for y in itertools.product(range(dmc.y_size), repeat=len(x)):
        p = mpmath.fprod(mp(dmc.pyx[a][b]) for a, b in zip(x, y))
        if p > 0:
            out[block_bin(dmc, delta, x, y, p_y)] += p
    return dict(out)


def inputs(dmc, n):
    for x in itertools.product(range(dmc.x_size), repeat=n):
        p = mpmath.fprod(mp(dmc.px[a]) for a in x)
        if p > 0:
            yield x, p


def gamma_marginal(dmc, delta, n):
    out = defaultdict(lambda: mpmath.mpf(0))
    for x, px in inputs(dmc, n):
        for j, p in gamma_given_x(dmc, delta, x).items():
            out[j] += px * p
    return dict(out)


def neglog_bin(p, delta):
    return q_floor(-mpmath.log(p, 2), delta)


def triples_given_x(dmc, delta, x, marg):
    cond = gamma_given_x(dmc, delta, x)
    pairs = {j: (neglog_bin(p, delta), neglog_bin(marg[j], delta)) for j, p in cond.items()}
    mass = defaultdict(lambda: mpmath.mpf(0))
    for j, pr in pairs.items():
        mass[pr] += cond[j]
    return cond, {j: (g1, g2, neglog_bin(mass[(g1, g2)], delta)) for j, (g1, g2) in pairs.items()}


def triple_marginal(dmc, delta, n):
    marg = gamma_marginal(dmc, delta, n)
    out = defaultdict(lambda: mpmath.mpf(0))
    for x, px in inputs(dmc, n):
        cond, trip = triples_given_x(dmc, delta, x, marg)
        for j, tr in trip.items():
            out[tr] += px * cond[j]
    return dict(out)


def entropy(pmf):
    return float(-sum(p * mpmath.log(p, 2) for p in pmf.values() if p > 0))


# vectorised enumeration for larger n ---------------------------------------------

def _fast_floor(v, delta, tol=1e-9):
    import numpy as np
    r = np.asarray(v, dtype=np.float64) / float(delta)
    k = np.rint(r)
    return np.where(np.abs(r - k) < tol, k, np.floor(r)).astype(np.int64)


def brute_tables(dmc, delta, n):
    """Every law the quantized-LLR module exposes, by enumerating all sequence pairs.

    Per-letter LLRs come from mpmath; block sums and binning are vectorised.
    Returns dict with 'cond' (x -> {bin: p}), 'marg', 'triple' (x -> {bin: triple}),
    'triple_marg' and 'pair_cond' ((x, g1, g2) -> {bin: p}).
    """
    import numpy as np
    nx, ny = dmc.x_size, dmc.y_size
    p_y = py(dmc)
    lam = np.zeros((nx, ny))
    for a in range(nx):
        for b in range(ny):
            if dmc.pyx[a][b] > 0 and p_y[b] > 0:
                lam[a, b] = float(mpmath.log(mp(dmc.pyx[a][b]) / p_y[b], 2))
    pyx = np.array([[float(v) for v in row] for row in dmc.pyx])
    xs = np.array(list(itertools.product(range(nx), repeat=n)), dtype=np.int64).reshape(-1, n)
    ys = np.array(list(itertools.product(range(ny), repeat=n)), dtype=np.int64).reshape(-1, n)
    L = np.zeros((len(xs), len(ys)))
    P = np.ones((len(xs), len(ys)))
    for i in range(n):
        L += lam[xs[:, i][:, None], ys[:, i][None, :]]
        P *= pyx[xs[:, i][:, None], ys[:, i][None, :]]
    B = _fast_floor(L, delta)
    pxs = np.prod(np.array([float(v) for v in dmc.px])[xs], axis=1)
    cond, triple, pair_cond = {}, {}, {}
    marg = defaultdict(float)
    for k, x in enumerate(map(tuple, xs)):
        if pxs[k] == 0:
            continue
        live = P[k] > 0
        c = defaultdict(float)
        for j, p in zip(B[k][live], P[k][live]):
            c[int(j)] += p
        cond[x] = dict(c)
        for j, p in c.items():
            marg[j] += pxs[k] * p
    nlb = lambda p: int(_fast_floor(-np.log2(p), delta))
    triple_marg = defaultdict(float)
    for k, x in enumerate(map(tuple, xs)):
        if x not in cond:
            continue
        c = cond[x]
        pairs = {j: (nlb(p), nlb(marg[j])) for j, p in c.items()}
        mass = defaultdict(float)
        for j, pr in pairs.items():
            mass[pr] += c[j]
        triple[x] = {j: (g1, g2, nlb(mass[(g1, g2)])) for j, (g1, g2) in pairs.items()}
        for j, tr in triple[x].items():
            triple_marg[tr] += pxs[k] * c[j]
        for (g1, g2), m in mass.items():
            pair_cond[(x, g1, g2)] = {j: c[j] / m for j, pr in pairs.items() if pr == (g1, g2)}
    return {"cond": cond, "marg": dict(marg), "triple": triple,
            "triple_marg": dict(triple_marg), "pair_cond": pair_cond}
