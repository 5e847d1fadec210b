import numpy as np
import pytest

from endlessloop.autodirect import (
    CornerSet,
    best_buddies,
    detect_corners,
    suggest_directions,
    vote_directions,
)
from endlessloop.descriptors import compute_descriptors
from endlessloop.raster import RasterImage
from tests.conftest import make_lattice


class TestDetectCorners:
    def test_constant_image_empty(self):
        img = RasterImage(np.full((40, 40, 3), 0.5))
        assert detect_corners(img).count == 0

    def test_white_square_four_corners(self):
        data = np.zeros((60, 60, 3))
        data[20:40, 20:40] = 1.0
        corners = detect_corners(RasterImage(data), n=4)
        assert corners.count == 4
        expect = {(20, 20), (20, 39), (39, 20), (39, 39)}
        for x, y in corners.points:
            assert min(abs(x - ex) + abs(y - ey) for ex, ey in expect) <= 2

    def test_n_one_returns_global_best(self):
        img = make_lattice()
        one = detect_corners(img, n=1)
        many = detect_corners(img, n=50)
        assert one.count == 1
        assert tuple(one.points[0]) == tuple(many.points[0])

    def test_min_spacing(self):
        img = make_lattice()
        corners = detect_corners(img, n=120)
        pts = corners.points.astype(float)
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        np.fill_diagonal(d, np.inf)
        assert d.min() >= 8.0

    def test_rejects_bad_n(self):
        with pytest.raises(ValueError):
            detect_corners(RasterImage(np.zeros((5, 5, 3))), n=0)


class TestBestBuddies:
    def test_two_corners_always_pair(self):
        img = make_lattice()
        desc = compute_descriptors(img)
        corners = CornerSet(points=np.array([[20, 20], [52, 20]]), scores=np.array([1.0, 0.9]))
        pairs = best_buddies(corners, desc)
        assert pairs.shape == (1, 2)

    def test_lattice_pairs_along_axis(self):
        img = make_lattice(px=16, py=40)
        desc = compute_descriptors(img)
        corners = detect_corners(img, n=120)
        pairs = best_buddies(corners, desc)
        assert pairs.shape[0] >= 10
        offs = corners.points[pairs[:, 1]] - corners.points[pairs[:, 0]]
        ang = np.degrees(np.arctan2(offs[:, 1], offs[:, 0])) % 180.0
        along = (ang <= 15) | (ang >= 165)
        assert along.mean() >= 0.8

    def test_identical_descriptors_tie_break(self):
        desc_data = np.zeros((30, 30, 4))
        desc_data[..., 0] = 1.0
        from endlessloop.descriptors import DescriptorField

        desc = DescriptorField(desc_data)
        corners = CornerSet(
            points=np.array([[5, 5], [10, 5], [15, 5]]), scores=np.array([3.0, 2.0, 1.0])
        )
        pairs = best_buddies(corners, desc)
        # all distances tie; everyone's NN is index 0 except 0 itself -> (0, 1)
        assert pairs.tolist() == [[0, 1]]


class TestVoteDirections:
    def _corners_with_offsets(self, offsets):
        pts = [[0, 0]]
        pairs = []
        for k, (dx, dy) in enumerate(offsets):
            pts.append([pts[0][0] + dx, pts[0][1] + dy])
            pairs.append([0, k + 1])
        return (
            CornerSet(points=np.array(pts), scores=np.ones(len(pts))),
            np.array(pairs),
        )

    def test_horizontal_offsets_one_winner(self):
        corners, pairs = self._corners_with_offsets([(20, 0)] * 6)
        vote = vote_directions(pairs, corners)
        assert len(vote.winners) == 1
        x, y, votes = vote.winners[0]
        assert abs(np.degrees(np.arctan2(y, x))) <= 10

    def test_two_axes_two_winners(self):
        corners, pairs = self._corners_with_offsets([(20, 0)] * 5 + [(0, 20)] * 5)
        vote = vote_directions(pairs, corners)
        assert len(vote.winners) == 2
        angs = sorted(abs(np.degrees(np.arctan2(y, x))) for x, y, _ in vote.winners)
        assert angs[0] <= 10 and 80 <= angs[1] <= 100

    def test_folding_invariance(self):
        corners, pairs = self._corners_with_offsets(
            [(20, 0), (-20, 0), (18, 5), (-18, -5), (20, 2)]
        )
        vote = vote_directions(pairs, corners)
        neg_corners, neg_pairs = self._corners_with_offsets(
            [(-20, 0), (20, 0), (-18, -5), (18, 5), (-20, -2)]
        )
        vote2 = vote_directions(neg_pairs, neg_corners)
        assert [(round(x, 6), round(y, 6)) for x, y, _ in vote.winners] == [
            (round(x, 6), round(y, 6)) for x, y, _ in vote2.winners
        ]

    def test_vote_floor_stops_rounds(self):
        corners, pairs = self._corners_with_offsets([(20, 0)] * 6 + [(0, 20)] * 1)
        vote = vote_directions(pairs, corners)
        # the vertical bin holds 1 vote + smear < 3: suppressed
        assert len(vote.winners) == 1

    def test_positive_x_sign_convention(self):
        corners, pairs = self._corners_with_offsets([(-20, -1)] * 5)
        vote = vote_directions(pairs, corners)
        assert vote.winners[0][0] > 0


class TestSuggestDirections:
    def test_lattice_axis_and_rotation(self):
        img = make_lattice(px=16, py=40)
        desc = compute_descriptors(img)
        winners = suggest_directions(img, desc)
        assert winners
        x, y, _ = winners[0]
        ang = np.degrees(np.arctan2(y, x)) % 180.0
        assert min(ang, 180 - ang) <= 10

        rot = RasterImage(np.rot90(img.data, k=1).copy())
        winners_rot = suggest_directions(rot, compute_descriptors(rot))
        xr, yr, _ = winners_rot[0]
        ang_r = np.degrees(np.arctan2(yr, xr)) % 180.0
        assert abs(ang_r - 90) <= 10

    def test_at_most_three(self):
        img = make_lattice()
        winners = suggest_directions(img, compute_descriptors(img))
        assert 1 <= len(winners) <= 3
