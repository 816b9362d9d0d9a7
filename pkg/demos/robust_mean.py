"""Compare the mean estimators on one MAR Gaussian sample, with bootstrap intervals.

Run with ``python demos/robust_mean.py``.
"""

import warnings

import numpy as np

from mmgimpute.estimators import bootstrap, make_estimator, with_interval
from mmgimpute.simulation import PRECISION_5VAR, mask_mar, named_graph, sample_ggm

rng = np.random.default_rng(3)
data = mask_mar(sample_ggm(PRECISION_5VAR, 1.5, 2000, rng), -1.0, rng)
g = named_graph("ggm5", 5)
print(f"target X1 missing in {np.mean(~data.mask[:, 0]):.1%} of rows; true mean 1.5\n")

for method in ("cc", "ra", "ipw", "aipw"):
    est = make_estimator(g, 0, method)
    rep = est(data)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lo, hi = bootstrap(est, data, 200, seed=11)
    rep = with_interval(rep, lo, hi, 0.95)
    print(f"{method:5s} {rep.point:7.4f}   95% interval ({rep.ci[0]:.4f}, {rep.ci[1]:.4f})")
