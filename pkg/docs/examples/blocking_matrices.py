"""
Binary and interpolated blocking matrices
=========================================

A 24-step horizon with six blocks of lengths 1, 2, 3, 4, 5, 9. Binary
blocking copies each reduced move across its block; the interpolated
matrix ramps linearly between consecutive block starts instead.
"""

import numpy as np

from wdsmpc import binary_blocking_matrix, expand, interpolation_matrix, schedule_from_lengths

np.set_printoptions(precision=2, suppress=True, linewidth=100)

sched = schedule_from_lengths([1, 2, 3, 4, 5, 9], 24)
print("block starts:", sched.starts)

B = binary_blocking_matrix(sched)
W = interpolation_matrix(sched)
print("\nfirst ten rows, binary:\n", B.W[:10])
print("\nfirst ten rows, interpolated:\n", W.W[:10])

# expand six reduced rate values for one input channel
reduced = np.array([[4.0], [-2.0], [1.0], [3.0], [0.0], [-1.0]])
print("\nbinary expansion      :", expand(B, reduced).ravel())
print("interpolated expansion:", expand(W, reduced).ravel())

# each interpolated row is a convex combination of at most two anchors
assert np.allclose(W.W.sum(axis=1), 1.0)
