"""Independent brute-force oracles used only by the test suite."""

import itertools

import numpy as np


def f2_rank_dense(matrix) -> int:
    """Gaussian elimination over F2 on a dense numpy array."""
    M = np.array(matrix, dtype=np.uint8) % 2
    rows, cols = M.shape
    rank = 0
    pivot_row = 0
    for j in range(cols):
        pivot = None
        for i in range(pivot_row, rows):
            if M[i, j]:
                pivot = i
                break
        if pivot is None:
            continue
        M[[pivot_row, pivot]] = M[[pivot, pivot_row]]
        for i in range(rows):
            if i != pivot_row and M[i, j]:
                M[i] ^= M[pivot_row]
        pivot_row += 1
        rank += 1
    return rank


def brute_force_betti(points, eps, max_dim):
    """Betti numbers of the Rips complex at eps by direct enumeration.

    Builds every simplex up to max_dim from pairwise distances, forms
    dense boundary matrices, and computes nullity(d_k) - rank(d_k+1).
    """
    points = np.asarray(points, dtype=float)
    m = len(points)
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    simplices = {0: [(i,) for i in range(m)]}
    for k in range(1, max_dim + 1):
        simplices[k] = [
            s
            for s in itertools.combinations(range(m), k + 1)
            if max(dist[a, b] for a, b in itertools.combinations(s, 2)) <= eps + 1e-12
        ]
    ranks = {}
    for k in range(1, max_dim + 1):
        rows = {s: i for i, s in enumerate(simplices[k - 1])}
        M = np.zeros((len(rows), len(simplices[k])), dtype=np.uint8)
        for j, s in enumerate(simplices[k]):
            for facet in itertools.combinations(s, k):
                M[rows[facet], j] = 1
        ranks[k] = f2_rank_dense(M) if M.size else 0
    ranks[max_dim + 1] = 0
    betti = []
    for k in range(max_dim + 1):
        nullity = len(simplices[k]) - ranks.get(k, 0)
        betti.append(nullity - ranks[k + 1])
    return betti


def hexagon_points():
    """Regular hexagon with unit side, vertex i at angle i * 60 degrees."""
    angles = np.arange(6) * np.pi / 3.0
    return np.column_stack([np.cos(angles), np.sin(angles)])


# Row/column orders of the printed boundary tables (0-indexed labels).
HEXAGON_FACES = [(0, 1, 2), (1, 2, 3), (2, 3, 4), (3, 4, 5), (4, 5, 0), (5, 0, 1)]
HEXAGON_EDGES = [
    (0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0),
    (0, 2), (2, 4), (4, 0), (5, 1), (1, 3), (3, 5),
]
HEXAGON_VERTICES = [(i,) for i in range(6)]

HEXAGON_DEL2_TABLE = np.array(
    [
        [1, 0, 0, 0, 0, 1],
        [1, 1, 0, 0, 0, 0],
        [0, 1, 1, 0, 0, 0],
        [0, 0, 1, 1, 0, 0],
        [0, 0, 0, 1, 1, 0],
        [0, 0, 0, 0, 1, 1],
        [1, 0, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 0],
        [0, 0, 0, 0, 1, 0],
        [0, 0, 0, 0, 0, 1],
        [0, 1, 0, 0, 0, 0],
        [0, 0, 0, 1, 0, 0],
    ],
    dtype=np.uint8,
)

HEXAGON_DEL1_TABLE = np.array(
    [
        [1, 0, 0, 0, 0, 1, 1, 0, 1, 0, 0, 0],
        [1, 1, 0, 0, 0, 0, 0, 0, 0, 1, 1, 0],
        [0, 1, 1, 0, 0, 0, 1, 1, 0, 0, 0, 0],
        [0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1],
        [0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0],
        [0, 0, 0, 0, 1, 1, 0, 0, 0, 1, 0, 1],
    ],
    dtype=np.uint8,
)
