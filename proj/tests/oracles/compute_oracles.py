"""Reference values frozen into the C++ tests. Computed with numpy/scipy,
independently of the C++ code. Run: python3 compute_oracles.py"""
import math

import numpy as np
from scipy import optimize, stats

LN9 = math.log(9.0)


def show(name, value):
    print(f"{name} = {value!r}")


# distributions
show("normal_cdf(1.3)", stats.norm.cdf(1.3))
show("tn_logpdf(0.5; 0.2, 0.7, [0, 1.15])",
     stats.truncnorm.logpdf(0.5, (0 - 0.2) / 0.7, (1.15 - 0.2) / 0.7, loc=0.2, scale=0.7))
show("tn_logpdf(9.0; 0, 1, [8.5, inf))",
     stats.truncnorm.logpdf(9.0, 8.5, np.inf, loc=0.0, scale=1.0))
show("t_logpdf(0.3; 0.1, scale2 0.0665, nu 2)",
     stats.t.logpdf(0.3, 2, loc=0.1, scale=math.sqrt(0.0665)))


# Phase II decrement, printed midpoint convention
def decrement(f, w, d, cumulative=False):
    m1 = w[1] + w[2] + w[3] + (0.5 if cumulative else -0.5) * w[0]
    m2 = w[3] + 0.5 * w[2]
    return (-d / (1 + math.exp(-2 * LN9 * (f - m1) / w[0]))
            + d / (1 + math.exp(-2 * LN9 * (f - m2) / w[2])))


for f in (0.5, 1.0, 2.0, 2.5, 3.0, 4.0, 6.0):
    show(f"r({f}; 1,1,1,1, d=1)", decrement(f, (1, 1, 1, 1), 1.0))
for f in (1.5, 3.0, 5.5):
    show(f"r_cum({f}; 1,2,1,1.5, d=0.8)", decrement(f, (1, 2, 1, 1.5), 0.8, True))


# e0 gain
def gain(l, s, k, z, a1=4.4, a2=0.5):
    e = k / (1 + math.exp(-a1 / s[1] * (l - s[0] - a2 * s[1])))
    t = (z - k) / (1 + math.exp(-a1 / s[3] * (l - s[0] - s[1] - s[2] - a2 * s[3])))
    return e + t


for l in (30.0, 45.0, 60.0, 72.5, 85.0):
    show(f"g({l}; 10,20,5,15, k=3, z=0.6)", gain(l, (10, 20, 5, 15), 3.0, 0.6))


# Leslie example and spectral radius
P = np.array([[0.0, 0.4, 0.3, 0.0], [0.95, 0, 0, 0], [0, 0.9, 0, 0], [0, 0, 0.8, 0.3]])
show("spectral_radius(P)", max(abs(np.linalg.eigvals(P))))


# Life table from the bundled standard (trapezoid, open group by last closed rate)
def read_standard(path, sex):
    rows = [line.strip().split(",") for line in open(path).read().splitlines()[1:]]
    return np.array([float(r[2]) for r in rows if r[0] == sex])


def life_table(lx, k=5):
    n = len(lx)
    L = np.zeros(n)
    L[:-1] = 0.5 * k * (lx[:-1] + lx[1:])
    rate = max((lx[-2] - lx[-1]) / L[-2], 1e-6)
    L[-1] = lx[-1] / rate
    T = np.cumsum(L[::-1])[::-1]
    return L, T, T[0] / lx[0]


def brass(ls, alpha):
    out = np.ones_like(ls)
    logit = 0.5 * np.log((1 - ls[1:]) / ls[1:])
    out[1:] = 1 / (1 + np.exp(2 * (alpha + logit)))
    return out


for sex in ("female", "male"):
    ls = read_standard("../../data/standard_life_table.csv", sex)
    L, T, e0 = life_table(ls)
    show(f"e0 standard {sex}", e0)
    show(f"S_0 standard {sex}", L[1] / L[0])
    show(f"S_top standard {sex}", T[-1] / T[-2])
    show(f"birth survival {sex}", L[0] / 5.0)
ls = read_standard("../../data/standard_life_table.csv", "female")
show("e0 female alpha=-0.5", life_table(brass(ls, -0.5))[2])
show("e0 female alpha=0.7", life_table(brass(ls, 0.7))[2])


# Phase III MLE on a toy fixture (mu fixed at 2.1)
series = [[1.5, 1.6, 1.72, 1.79], [1.9, 1.85, 1.95], [1.3, 1.45, 1.5, 1.62, 1.7]]
x = np.concatenate([np.array(s[:-1]) - 2.1 for s in series])
y = np.concatenate([np.array(s[1:]) - 2.1 for s in series])
rho = float(x @ y / (x @ x))
sigma = math.sqrt(float(((y - rho * x) ** 2).mean()))
show("phase3 mle rho", rho)
show("phase3 mle sigma", sigma)
show("phase3 mle se_rho", sigma / math.sqrt(float(x @ x)))
show("phase3 loglik", float(stats.norm.logpdf(y, rho * x, sigma).sum()))

# empirical quantiles (numpy default = linear between order statistics)
sample = [3.2, -1.0, 0.5, 7.7, 2.2, 2.2, 9.1]
for p in (0.025, 0.1, 0.5, 0.9, 0.975):
    show(f"quantile p={p}", float(np.quantile(sample, p)))

# gap MLE: synthetic e0 fixture written to ../fixtures/gap_e0.csv, then the
# t likelihood is maximized directly
rng = np.random.default_rng(20240611)
beta_true = np.array([0.8, -0.01, 0.9, 0.005, -0.02])
gamma_true = 0.95
rows_below, rows_above = [], []
with open("../fixtures/gap_e0.csv", "w") as out:
    out.write("country_id,period_start,sex,e0\n")
    for c in range(12):
        l = 45.0 + 3.5 * c
        g = 3.0 + 0.3 * c
        l0 = l
        for t in range(10):
            year = 1950 + 5 * t
            out.write(f"c{c:02d},{year},female,{float(l)!r}\n")
            out.write(f"c{c:02d},{year},male,{float(l - g)!r}\n")
            if t == 9:
                break
            if l > 86.2:
                nxt = gamma_true * g + 0.05 * rng.standard_t(2)
                rows_above.append((g, nxt))
            else:
                mean = beta_true @ np.array([1, l0, g, l, max(l - 75, 0)])
                nxt = mean + 0.05 * rng.standard_t(2)
                rows_below.append((l0, g, l, nxt))
            g = float(nxt)
            l += 1.8


def read_fixture():
    rows = [r.split(",") for r in open("../fixtures/gap_e0.csv").read().splitlines()[1:]]
    series = {}
    for cid, year, sex, v in rows:
        series.setdefault(cid, {}).setdefault(int(year), {})[sex] = float(v)
    below, above = [], []
    for cid, periods in series.items():
        years = sorted(periods)
        l0 = periods[years[0]]["female"]
        for a, b in zip(years, years[1:]):
            fa, ga = periods[a]["female"], periods[a]["female"] - periods[a]["male"]
            gb = periods[b]["female"] - periods[b]["male"]
            if fa > 86.2:
                above.append((ga, gb))
            else:
                below.append((l0, ga, fa, gb))
    return below, above


rows_below, rows_above = read_fixture()
show("gap transitions below/above", (len(rows_below), len(rows_above)))


def design():
    x = np.zeros((len(rows_below) + len(rows_above), 6))
    y = np.zeros(x.shape[0])
    for i, r in enumerate(rows_below):
        x[i, :5] = [1, r[0], r[1], r[2], max(r[2] - 75, 0)]
        y[i] = r[3]
    for j, r in enumerate(rows_above):
        x[len(rows_below) + j, 5] = r[0]
        y[len(rows_below) + j] = r[1]
    return x, y


X, Y = design()
C = 2 * 0.0665


def negll(theta):
    return -stats.t.logpdf(Y - X @ theta, 2, scale=math.sqrt(0.0665)).sum()


def negll_grad(theta):
    r = Y - X @ theta
    return -X.T @ (3 * r / (C + r * r))


def negll_hess(theta):
    r = Y - X @ theta
    w = 3 * (C - r * r) / (C + r * r) ** 2
    return (X * w[:, None]).T @ X


# trust region Newton with the analytic derivatives; BFGS stalls on the
# badly scaled covariates
fit = optimize.minimize(negll, np.r_[beta_true, gamma_true], method="trust-exact",
                        jac=negll_grad, hess=negll_hess, options={"gtol": 1e-9})
assert fit.success, fit.message
show("gap mle theta", list(map(float, fit.x)))
show("gap mle negll", float(fit.fun))
