"""Order-fixed pairwise reductions.

All reductions whose result ends up in a report go through ``tree_sum`` so the
rounding pattern depends only on array length, never on how work was scheduled.
"""

import numpy as np


def tree_sum(values, axis=0):
    """Sum along ``axis`` with a fixed balanced binary tree.

    The array is zero-padded to a power-of-two length, then halves are added
    until one slice remains. Zero padding is exact, so the result only depends
    on the input values and their order.
    """
    a = np.moveaxis(np.asarray(values), axis, 0)
    n = a.shape[0]
    if n == 0:
        return np.zeros(a.shape[1:], dtype=a.dtype if a.dtype.kind in "fc" else float)
    size = 1 << (n - 1).bit_length()
    if size != n:
        pad = np.zeros((size - n,) + a.shape[1:], dtype=a.dtype)
        a = np.concatenate([a, pad], axis=0)
    while a.shape[0] > 1:
        half = a.shape[0] // 2
        a = a[:half] + a[half:]
    return a[0]
