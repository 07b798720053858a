"""Regenerates welch_reference.json with scipy's Welch t-test as the oracle."""
import json
import pathlib

import numpy as np
from scipy import stats

rng = np.random.default_rng(20240601)
pairs = []
for k in range(50):
    na, nb = rng.integers(2, 31, size=2)
    a = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 4), size=na)
    b = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 4), size=nb)
    res = stats.ttest_ind(a, b, equal_var=False)
    pairs.append({"a": a.tolist(), "b": b.tolist(),
                  "t": float(res.statistic), "p": float(res.pvalue)})

a = rng.normal(0, 1, size=10)
b = rng.normal(5, 1, size=10)
res = stats.ttest_ind(a, b, equal_var=False)
separated = {"a": a.tolist(), "b": b.tolist(), "t": float(res.statistic), "p": float(res.pvalue)}

out = pathlib.Path(__file__).with_name("welch_reference.json")
out.write_text(json.dumps({"pairs": pairs, "separated": separated}, indent=1) + "\n")
