import numpy as np
import pytest

from fpsim.core import AccessGraph, CategoryMap, FloorPlan, SemanticImage
from fpsim.extract import extract_access_graph
from fpsim.rank import GedMemo, pairwise_miou
from fpsim.synth import BATH, EXT_WALL, EXTERNAL, INT_DOOR, INT_WALL, KITCHEN, LIVING, MASTER, synthetic_corpus

CORPUS_SEED = 0


@pytest.fixture(scope="session")
def categories():
    return CategoryMap.default()


def moved_door_graphs():
    """Living room, bathroom and bedroom. First graph: doors living-bath and living-bed;
    second graph: doors living-bath and bath-bed."""
    g1 = AccessGraph.build([LIVING, BATH, MASTER], [(0, 1), (0, 2)])
    g2 = AccessGraph.build([LIVING, BATH, MASTER], [(0, 1), (1, 2)])
    return g1, g2


def three_in_a_row() -> np.ndarray:
    """12 x 4: rooms at columns 0-2, 4-7 and 9-11, doors through the walls at columns 3 and 8."""
    img = np.full((4, 12), INT_WALL, dtype=np.uint8)
    img[:, 0:3] = LIVING
    img[:, 4:8] = KITCHEN
    img[:, 9:12] = BATH
    img[1:3, 3] = INT_DOOR
    img[1:3, 8] = INT_DOOR
    return img


def two_rooms(door: bool) -> np.ndarray:
    img = np.full((6, 11), EXTERNAL, dtype=np.uint8)
    img[0, :] = img[-1, :] = EXT_WALL
    img[:, 0] = img[:, -1] = EXT_WALL
    img[1:5, 1:5] = LIVING
    img[1:5, 5] = INT_WALL
    img[1:5, 6:10] = KITCHEN
    if door:
        img[2:4, 5] = INT_DOOR
    return img


def plan_from(pid, labels, categories):
    img = SemanticImage(labels)
    return FloorPlan(pid, img, extract_access_graph(img, categories))


@pytest.fixture(scope="session")
def corpus200():
    return synthetic_corpus(200, seed=CORPUS_SEED)


@pytest.fixture(scope="session")
def cache200(corpus200, categories):
    cache, skipped = pairwise_miou(corpus200, categories)
    assert not skipped
    return cache


@pytest.fixture(scope="session")
def memo200():
    return GedMemo()
