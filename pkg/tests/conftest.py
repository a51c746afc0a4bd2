import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cofigel import RatingMatrix, apply_rating

# The worked seven-user, six-item example: 18 rated cells (16 positive, 2
# negative), 16 predictable, 8 unpredictable.
TABLE1_ROWS = [
    (1, 1, 1), (2, 1, 1),
    (3, 1, 1), (3, 2, 1), (3, 6, 1),
    (4, 2, 1), (4, 4, 1), (4, 5, 1), (4, 6, 1),
    (5, 3, 1), (5, 4, 1),
    (6, 1, 1), (6, 5, 1), (6, 6, 1),
    (7, 1, 1), (7, 2, 0), (7, 5, 0), (7, 6, 1),
]
TABLE1_USERS = list(range(1, 8))
TABLE1_ITEMS = list(range(1, 7))
TABLE1_PREDICTED = {
    (1, 2), (1, 5), (1, 6), (2, 2), (2, 5), (2, 6), (3, 4), (3, 5),
    (4, 1), (4, 3), (5, 2), (5, 5), (5, 6), (6, 2), (6, 4), (7, 4),
}
TABLE1_UNPREDICTABLE = {
    (1, 3), (1, 4), (2, 3), (2, 4), (3, 3), (5, 1), (6, 3), (7, 3),
}


def build_matrix(rows, users=(), items=()):
    matrix = RatingMatrix(users=users, items=items)
    for u, i, v in rows:
        apply_rating(matrix, u, i, v, 0.0)
    return matrix


@pytest.fixture
def table1():
    return build_matrix(TABLE1_ROWS, TABLE1_USERS, TABLE1_ITEMS)


def random_rated(rng, n_users, n_items, density=0.4, positive=0.7):
    """Random rated-entry dict over 1-based user and item ids."""
    rated = {}
    for u in range(1, n_users + 1):
        for i in range(1, n_items + 1):
            if rng.random() < density:
                rated[(u, i)] = 1 if rng.random() < positive else 0
    return rated


def matrix_from_rated(rated, n_users, n_items):
    matrix = RatingMatrix(users=range(1, n_users + 1),
                          items=range(1, n_items + 1))
    for (u, i), v in rated.items():
        apply_rating(matrix, u, i, v, 0.0)
    return matrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
