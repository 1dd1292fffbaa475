"""
Testing the gap between the two methods
=======================================

The statistics behind the report: a pooled two-sample t-test and
Cohen's d on per-essay absolute differences from the learner.
"""

import numpy as np

from peermirror.evaluate import cohens_d, published_aggregates_report, render_report, t_test_two_sample

rng = np.random.default_rng(0)

# simulated absolute error differences for 32 essays
comparison = np.abs(rng.normal(6.0, 1.5, 32))
proposed = np.abs(rng.normal(2.0, 1.5, 32))

res = t_test_two_sample(comparison, proposed)
print(f"t = {res.statistic:.2f}, df = {res.df}, p = {res.p:.3g}")
print(f"d = {cohens_d(comparison, proposed):.2f}")

# shifting both samples changes nothing
print(f"shifted d = {cohens_d(comparison + 10, proposed + 10):.2f}")

# the published aggregates, re-rendered
print()
print(render_report(published_aggregates_report(), "markdown"))
