# Frozen values for test_schedule.cpp (50-digit mpmath).
from mpmath import mp, mpf, cos, pi

mp.dps = 50
T, s = 1000, mpf("0.008")


def f(t):
    return cos((mpf(t) / T + s) / (1 + s) * pi / 2) ** 2


ab = [mpf(1)]
for t in range(1, T + 1):
    beta = min(max(1 - f(t) / f(t - 1), mpf(0)), mpf("0.999"))
    ab.append(ab[-1] * (1 - beta))
for t in (1, 250, 500, 750, 999, 1000):
    print(t, mp.nstr(ab[t], 20))
