"""
How many columns per support are enough?
========================================

Compare the per-support column counts needed by fully random Gaussian
sampling and by the hybrid fixed-plus-varying scheme, at one small size.
"""

from blindcs.bounds import ell_bound_gaussian, ell_bound_hybrid, lowrank_measurement_bound, n_bound_gaussian
from blindcs.errors import DomainError

d, m, k = 16, 6, 2

# Gaussian sampling: the count blows up as p drops towards 2k
for p in range(5, 17):
    try:
        print(f"p={p:2d}  gaussian ell >= {ell_bound_gaussian(d, m, k, p):6d}  "
              f"n(beta=.5) >= {n_bound_gaussian(d, m, k, p, 0.5)}")
    except DomainError as e:
        print(f"p={p:2d}  gaussian bound undefined ({e})")

# hybrid: k+1 fixed rows for grouping, the rest varying
for p in range(8, 17):
    try:
        print(f"p={p:2d}  hybrid ell >= {ell_bound_hybrid(d, k, p)}")
    except DomainError as e:
        print(f"p={p:2d}  hybrid bound undefined ({e})")

# rows per column needed to pin a rank-k group of 10 columns
print(lowrank_measurement_bound(d, 10, k))
