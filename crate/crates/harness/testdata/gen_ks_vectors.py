# Reference values for the two-sample KS test, from scipy.
# Samples: a_i = ((i*pa + oa) % ma) / da, b_j = ((j*pb + ob) % mb) / db.
import math
from scipy import stats

cases = [
    (200, 37, 0, 101, 7.0, 150, 53, 11, 97, 6.5),
    (500, 13, 5, 211, 10.0, 400, 17, 3, 211, 10.0),
    (60, 7, 1, 31, 1.0, 80, 11, 2, 29, 1.3),
    (1000, 101, 7, 1009, 100.0, 1000, 103, 9, 1009, 95.0),
]
print("# n pa oa ma da m pb ob mb db statistic kolmogorov_sf(sqrt(nm/(n+m))*D)")
for (n, pa, oa, ma, da, m, pb, ob, mb, db) in cases:
    a = [((i * pa + oa) % ma) / da for i in range(n)]
    b = [((j * pb + ob) % mb) / db for j in range(m)]
    d = stats.ks_2samp(a, b, method="asymp").statistic
    lam = math.sqrt(n * m / (n + m)) * d
    print(n, pa, oa, ma, da, m, pb, ob, mb, db, repr(float(d)), repr(float(stats.kstwobign.sf(lam))))
for lam in [0.3, 0.5, 0.8, 1.0, 1.2, 1.5, 2.0, 3.0]:
    print("sf", lam, repr(float(stats.kstwobign.sf(lam))))
