"""
Comparing models across repeated runs
=====================================

Metrics from repeated runs are summarized as mean with a sample
standard deviation and compared pairwise with Student's t-test. The
p-value comes from a self-contained regularized incomplete beta,
evaluated by a continued fraction, so results do not depend on any
statistics library.
"""

from capseg import format_mean_sd, significance_table, summarize, t_test

# F1 scores of three hypothetical models over five seeded runs.
runs = {
    "points_only": [0.716, 0.724, 0.731, 0.722, 0.727],
    "box_only": [0.812, 0.821, 0.818, 0.826, 0.823],
    "box_and_points": [0.829, 0.836, 0.831, 0.840, 0.834],
}

for name, values in runs.items():
    stats = summarize(values)
    print(f"{name:>15}: {format_mean_sd(stats.mean, stats.sd)} over n={stats.n}")

# Unpaired test between the two box modes.
result = t_test(runs["box_only"], runs["box_and_points"])
print(f"box_only vs box_and_points: t={result.statistic:.3f}, df={result.df}, "
      f"p={result.p_value:.4f}")

# Paired by seed: each run of one model pairs with the same-seed run of
# the other, which removes between-run variance.
paired = t_test(runs["box_only"], runs["box_and_points"], paired=True)
print(f"same comparison, paired: t={paired.statistic:.3f}, df={paired.df}, "
      f"p={paired.p_value:.6f}")

# Identical samples are a fixed point: p is exactly 1.
assert t_test(runs["box_only"], list(runs["box_only"])).p_value == 1.0

# The significance table runs every pairwise comparison at once.
for row in significance_table(runs, paired=True, alpha=0.05):
    mark = "*" if row.significant else " "
    print(f"{mark} {row.label_a} vs {row.label_b}: p={row.result.p_value:.6f}")
