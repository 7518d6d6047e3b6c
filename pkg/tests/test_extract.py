import numpy as np
import pytest

from fpsim.core import NoRooms, SemanticImage, UnknownLabel
from fpsim.extract import ExtractionParams, extract_access_graph, label_components
from fpsim.synth import BATH, EXT_WALL, EXTERNAL, FRONT_DOOR, INT_WALL, KITCHEN, LIVING, synthetic_images

from conftest import three_in_a_row, two_rooms


def test_uniform_area_single_component(categories):
    lab = label_components(SemanticImage(np.full((4, 4), LIVING)), {"area"}, categories)
    assert len(lab.components) == 1 and lab.components[0].size == 16
    assert lab.components[0].bbox == (0, 0, 4, 4)


def test_diagonal_blocks_are_separate(categories):
    img = np.full((4, 4), EXTERNAL, dtype=np.uint8)
    img[0:2, 0:2] = LIVING
    img[2:4, 2:4] = LIVING
    lab = label_components(SemanticImage(img), {"area"}, categories)
    assert [c.size for c in lab.components] == [4, 4]


def test_checkerboard_gives_sixteen_components(categories):
    img = np.where((np.add.outer(np.arange(4), np.arange(4)) % 2) == 0, LIVING, KITCHEN)
    lab = label_components(SemanticImage(img), {"area"}, categories)
    assert len(lab.components) == 16
    # raster order: ids increase along rows
    assert lab.ids.ravel().tolist() == list(range(1, 17))


def test_label_components_non_role_pixels_are_zero(categories):
    img = SemanticImage(two_rooms(door=True))
    lab = label_components(img, {"opening"}, categories)
    assert set(np.unique(lab.ids)) == {0, 1}
    assert (lab.ids > 0).sum() == 2


def test_label_components_errors(categories):
    with pytest.raises(ValueError):
        label_components(SemanticImage(np.zeros((2, 2))), set(), categories)
    with pytest.raises(UnknownLabel):
        label_components(SemanticImage(np.full((2, 2), 200)), {"area"}, categories)


def test_two_rooms_with_door(categories):
    g = extract_access_graph(SemanticImage(two_rooms(door=True)), categories)
    assert g.order == 2
    assert [(e.a, e.b, e.connectivity) for e in g.edges] == [(0, 1, "door")]
    assert [n.pixel_area for n in g.nodes] == [16, 16]


def test_two_rooms_without_door(categories):
    g = extract_access_graph(SemanticImage(two_rooms(door=False)), categories)
    assert [(e.a, e.b, e.connectivity) for e in g.edges] == [(0, 1, "adjacent")]


def test_three_rooms_in_a_row(categories):
    g = extract_access_graph(SemanticImage(three_in_a_row()), categories)
    assert [n.room_type for n in g.nodes] == [LIVING, KITCHEN, BATH]
    assert [(e.a, e.b, e.connectivity) for e in g.edges] == [(0, 1, "door"), (1, 2, "door")]


def test_exterior_door_touching_one_room_adds_no_edge(categories):
    img = two_rooms(door=False)
    img[0, 2:4] = FRONT_DOOR
    g = extract_access_graph(SemanticImage(img), categories)
    assert all(e.connectivity == "adjacent" for e in g.edges)


def test_small_rooms_discarded(categories):
    img = two_rooms(door=True)
    img[4, 8] = BATH  # one-pixel speck
    g = extract_access_graph(SemanticImage(img), categories)
    assert g.order == 2
    g = extract_access_graph(SemanticImage(img), categories, ExtractionParams(min_room_area=1))
    assert g.order == 3


def test_gap_controls_adjacency(categories):
    img = np.full((4, 9), INT_WALL, dtype=np.uint8)
    img[:, 0:3] = LIVING
    img[:, 6:9] = KITCHEN  # three wall columns between the rooms
    g_near = extract_access_graph(SemanticImage(img), categories, ExtractionParams(adjacency_gap=4))
    g_far = extract_access_graph(SemanticImage(img), categories, ExtractionParams(adjacency_gap=3))
    assert len(g_near.edges) == 1 and len(g_far.edges) == 0


def test_no_rooms(categories):
    with pytest.raises(NoRooms):
        extract_access_graph(SemanticImage(np.full((3, 3), EXT_WALL)), categories)


def test_synthetic_plans_extract_deterministically(categories):
    for _, img in synthetic_images(12, seed=5):
        g1 = extract_access_graph(img, categories)
        g2 = extract_access_graph(img, categories)
        assert g1 == g2
        assert g1.door_connected()
        pairs = [e.pair for e in g1.edges]
        assert len(pairs) == len(set(pairs))
