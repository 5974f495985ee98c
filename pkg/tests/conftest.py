from fractions import Fraction

import numpy as np
import pytest

from ranksub import SampleMatrix


@pytest.fixture
def table1_sample() -> SampleMatrix:
    """The worked 4-observation, 2-dimensional example."""
    return SampleMatrix(
        np.array(
            [
                [2.29, -0.97],
                [-1.20, -0.95],
                [-0.69, 0.75],
                [-0.41, -0.12],
            ]
        )
    )


@pytest.fixture
def table2_expected() -> dict[tuple[int, int], Fraction]:
    """Exhaustive m=3 rank grid of the worked example, exact."""
    return {
        (1, 1): Fraction(1, 12),
        (2, 1): Fraction(0),
        (3, 1): Fraction(3, 12),
        (1, 2): Fraction(2, 12),
        (2, 2): Fraction(1, 12),
        (3, 2): Fraction(1, 12),
        (1, 3): Fraction(1, 12),
        (2, 3): Fraction(3, 12),
        (3, 3): Fraction(0),
    }
