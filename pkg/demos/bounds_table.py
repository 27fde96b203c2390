"""Closed-form detection thresholds at a few design points.

Rows that fall outside a formula's validity range are kept, with the
reason in the ``status`` column.
"""
import sys

from haystack import BoundInputs, bounds_table, bounds_table_csv, miss_probability_bound

inputs = [
    BoundInputs(5000, 9, 2 * 14768, p=0.2, epsilon=0.05),
    BoundInputs(1024, 4, 1024, p=0.0, epsilon=0.01),
    BoundInputs(1024, 4, 256, p=1.0, epsilon=0.05),
    BoundInputs(10_000, 1, 1250, p=0.1, epsilon=0.05),
]
bounds_table_csv(bounds_table(inputs), fh=sys.stdout)

exact, bound = miss_probability_bound(100, 5, 20)
print(f"\nprobability that 20 distinct probes all miss 5 of 100: {exact:.4f} (closed-form floor {bound:.4f})")
