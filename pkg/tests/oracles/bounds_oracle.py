"""Brute-force oracle for the sample-count bounds.

Independent of blindcs.bounds: binomials are counted by enumerating
subsets, and each ceiling is found by walking up the integers until the
defining inequality (cross-multiplied, integers only) holds.

Run directly to print the frozen acceptance values.
"""

import itertools


def count_subsets(m, k):
    return sum(1 for _ in itertools.combinations(range(m), k))


def smallest_int_at_least(num, den):
    """Smallest integer x with x * den >= num (den > 0), by linear search."""
    x = 0
    while x * den < num:
        x += 1
    return x


def ell_gaussian(d, m, k, p):
    # ell * (p - 2k) >= (2k(d-2k)+1) * C(m,k)
    return smallest_int_at_least((2 * k * (d - 2 * k) + 1) * count_subsets(m, k), p - 2 * k)


def n_gaussian(d, m, k, p, beta_num, beta_den):
    # n * beta * (p - 2k) >= (2k(d-2k)+1) * C(m,k)^2 with beta = num/den
    c = count_subsets(m, k)
    return smallest_int_at_least((2 * k * (d - 2 * k) + 1) * c * c * beta_den, beta_num * (p - 2 * k))


def ell_hybrid(d, k, p):
    return smallest_int_at_least(2 * k * (d - 2 * k) + 1, p - 3 * k - 1)


def lowrank_per_column(d, ell, r):
    # p * ell >= 2r(d + ell - 2r) + 1
    return smallest_int_at_least(2 * r * (d + ell - 2 * r) + 1, ell)


if __name__ == "__main__":
    print("ell_bound_gaussian(16,6,2,8) =", ell_gaussian(16, 6, 2, 8))
    print("n_bound_gaussian(16,6,2,8,1/2) =", n_gaussian(16, 6, 2, 8, 1, 2))
    print("n_bound_gaussian(16,6,2,8,1/10) =", n_gaussian(16, 6, 2, 8, 1, 10))
    print("ell_bound_gaussian(4,5,1,4) =", ell_gaussian(4, 5, 1, 4))
    print("ell_bound_hybrid(16,2,12) =", ell_hybrid(16, 2, 12))
    print("ell_bound_hybrid(16,2,9) =", ell_hybrid(16, 2, 9))
    print("lowrank per-column(16,10,2) =", lowrank_per_column(16, 10, 2))
