import os

import numpy as np
import pytest

import rstensor as rt

FIXTURES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                        "fixtures")


@pytest.fixture(scope="session")
def born_mol():
    return rt.parse_pqr(os.path.join(FIXTURES, "born.pqr"))


@pytest.fixture(scope="session")
def ligand_mol():
    return rt.parse_pqr(os.path.join(FIXTURES, "ligand18.pqr"))


def rand_canonical(rng, n, r):
    return rt.CanonicalTensor3(rng.standard_normal(r),
                               tuple(rng.standard_normal((n, r))
                                     for _ in range(3)))
