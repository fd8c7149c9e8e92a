#!/usr/bin/env python3
"""Meta-evaluation tour: how well does a metric track human judgments?

Covers the two protocols the harness implements: Kendall tau-b against graded
human scores (Composite/Flickr8k style) and pairwise accuracy against human
preferences (Pascal50s style), with t-test significance.
"""

import random

from qace.metaeval import (
    Pascal50sTriplet,
    kendall_tau,
    pascal50s_accuracy,
    t_test_significance,
)

rng = random.Random(7)

# --- graded judgments: Kendall tau-b --------------------------------------------
# a noisy metric that mostly tracks the 1..5 human scores
human = [rng.randint(1, 5) for _ in range(200)]
metric = [h / 5 + rng.gauss(0, 0.25) for h in human]

result = kendall_tau(metric, human)
sig = t_test_significance(result.value, result.n)
print(f"noisy-but-related metric: tau-b = {result.value:.3f} over n = {result.n}")
print(f"  t = {sig.t_statistic:.3f}, two-tailed p = {sig.p_value:.2e}")

# pure noise for contrast
noise = [rng.random() for _ in human]
result = kendall_tau(noise, human)
sig = t_test_significance(result.value, result.n)
print(f"unrelated metric:        tau-b = {result.value:.3f}, p = {sig.p_value:.3f}")

# tau-b only sees ranks: any strictly increasing rescale leaves it unchanged
rescaled = [100 * m**3 + 7 for m in metric]
assert kendall_tau(rescaled, human).value == kendall_tau(metric, human).value
print("monotone rescale of the metric leaves tau-b untouched")

# --- pairwise preferences: Pascal50s accuracy ------------------------------------
triplets = []
scores_b, scores_c = {}, {}
for i in range(50):
    choice = "B" if rng.random() < 0.5 else "C"
    triplets.append(Pascal50sTriplet(
        triplet_id=f"t{i}",
        references=("a reference caption",),
        candidate_b="caption b",
        candidate_c="caption c",
        human_choice=choice,
    ))
    # metric agrees with the human preference 80% of the time
    agree = rng.random() < 0.8
    better, worse = rng.uniform(0.6, 1.0), rng.uniform(0.0, 0.4)
    if (choice == "B") == agree:
        scores_b[f"t{i}"], scores_c[f"t{i}"] = better, worse
    else:
        scores_b[f"t{i}"], scores_c[f"t{i}"] = worse, better

result = pascal50s_accuracy(triplets, scores_b, scores_c)
print(f"\npascal50s-style accuracy = {result.value:.3f} over {result.n} triplets")

ties = {t.triplet_id: 0.5 for t in triplets}
print("all-ties metric accuracy =",
      pascal50s_accuracy(triplets, ties, dict(ties)).value,
      "(ties count as incorrect)")
