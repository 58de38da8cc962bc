import pytest

from planchain.model import (
    ChainingInstance,
    Plan,
    TravelCost,
    TravelMatrix,
    Vehicle,
)

# Canonical reference instance used throughout the tests: three locations
# on a line at coordinates 0, 2, 4 with travel time equal to distance.
E1_MATRIX = [[0, 2, 4], [2, 0, 2], [4, 2, 0]]
E1_P1 = Plan(id=1, origin_location=0, destination_location=1, t_or=5, t_de=10, d_max=0)
E1_P2 = Plan(id=2, origin_location=2, destination_location=0, t_or=11, t_de=20, d_max=3)
E1_V1 = Vehicle(id=1, start_location=0, t_st=0)


def make_e1(policy=None, vehicles=(E1_V1,)):
    return ChainingInstance(
        plans=(E1_P1, E1_P2),
        vehicles=tuple(vehicles),
        travel=TravelMatrix(E1_MATRIX),
        policy=policy if policy is not None else TravelCost(),
    )


@pytest.fixture
def e1():
    return make_e1()
