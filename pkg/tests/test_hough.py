import math

import numpy as np
import pytest

from meshinspect.hough import (CircleParam, HoughConfig, LineParam,
                               broken_line_prior, circle_perimeter_offsets,
                               draw_primitives, hough_circles, hough_lines,
                               rasterize_circle, rasterize_line)
from meshinspect.synth import DefectSpec, MeshSpec, generate
from oracles import recount_line_votes


def contains_line(lines, rho, theta, rho_tol=1.0, theta_tol=math.radians(1.0)):
    return any(abs(l.rho - rho) <= rho_tol
               and min(abs(l.theta - theta), math.pi - abs(l.theta - theta)) <= theta_tol
               for l in lines)


class TestHoughLines:
    def test_vertical_line(self):
        mask = np.zeros((32, 32), dtype=bool)
        mask[:, 10] = True
        lines = hough_lines(mask, HoughConfig(vote_threshold=16))
        assert contains_line(lines, rho=10, theta=0.0)

    def test_horizontal_line(self):
        mask = np.zeros((32, 32), dtype=bool)
        mask[7, :] = True
        lines = hough_lines(mask, HoughConfig(vote_threshold=16))
        assert contains_line(lines, rho=7, theta=math.pi / 2)

    def test_two_parallel_lines_recounted(self):
        mask = np.zeros((32, 32), dtype=bool)
        mask[:, 5] = True
        mask[:, 20] = True
        lines = hough_lines(mask, HoughConfig(vote_threshold=16))
        assert contains_line(lines, 5, 0.0) and contains_line(lines, 20, 0.0)
        for rho in (5, 20):
            found = [l for l in lines if abs(l.rho - rho) <= 1 and l.theta == 0.0]
            assert found[0].votes == 32  # votes equal the line's pixel count
            assert found[0].votes == recount_line_votes(mask, found[0].rho,
                                                        found[0].theta)

    def test_empty_mask(self):
        assert hough_lines(np.zeros((16, 16), dtype=bool)) == []

    def test_sorted_by_votes_desc(self):
        mask = np.zeros((40, 40), dtype=bool)
        mask[:, 8] = True
        mask[:25, 30] = True
        lines = hough_lines(mask, HoughConfig(vote_threshold=10))
        votes = [l.votes for l in lines]
        assert votes == sorted(votes, reverse=True)

    def test_rotation_consistency(self):
        mask = np.zeros((48, 48), dtype=bool)
        mask[:, 13] = True  # vertical x=13
        rotated = np.rot90(mask)  # becomes a horizontal line
        ys, xs = np.nonzero(rotated)
        assert len(set(ys)) == 1
        expected_rho = ys[0]
        lines = hough_lines(rotated, HoughConfig(vote_threshold=24))
        assert contains_line(lines, expected_rho, math.pi / 2)

    def test_votes_match_recount_on_mesh(self):
        img, _, _ = generate(MeshSpec(period=8, noise_sigma=0.0,
                                      illumination_gradient=0.0),
                             DefectSpec(count=0))
        mask = img > 0.5
        lines = hough_lines(mask)
        assert lines
        for line in lines[:10]:
            assert line.votes == recount_line_votes(mask, line.rho, line.theta)


class TestHoughCircles:
    def test_rasterized_circle_recovered(self):
        mask = rasterize_circle((32, 32), CircleParam(cx=16, cy=16, r=8))
        found = hough_circles(mask, HoughConfig(radius_range=(4, 12)))
        assert found
        best = found[0]
        assert abs(best.cx - 16) <= 1 and abs(best.cy - 16) <= 1 and abs(best.r - 8) <= 1

    def test_empty_mask(self):
        assert hough_circles(np.zeros((16, 16), dtype=bool),
                             HoughConfig(radius_range=(3, 6))) == []

    def test_radius_range_excludes_circle(self):
        mask = rasterize_circle((32, 32), CircleParam(cx=16, cy=16, r=8))
        found = hough_circles(mask, HoughConfig(radius_range=(3, 5)))
        assert all(abs(c.r - 8) > 1 for c in found)

    def test_offsets_radius(self):
        for r in (1, 3, 8):
            off = circle_perimeter_offsets(r)
            radii = np.hypot(off[:, 0], off[:, 1])
            assert np.all(np.abs(radii - r) <= 0.5 + 1e-9)


class TestRasterize:
    def test_vertical_line_exact_column(self):
        img = np.zeros((16, 16))
        out = draw_primitives(img, lines=[LineParam(rho=3, theta=0.0)])
        expected = np.zeros_like(img)
        expected[:, 3] = 1.0
        np.testing.assert_array_equal(out, expected)

    def test_no_primitives_unchanged(self):
        rng = np.random.default_rng(0)
        img = rng.uniform(size=(8, 8))
        np.testing.assert_array_equal(draw_primitives(img), img)

    def test_line_plus_circle_union(self):
        img = np.zeros((32, 32))
        line = LineParam(rho=3, theta=0.0)
        circle = CircleParam(cx=16, cy=16, r=5)
        both = draw_primitives(img, lines=[line], circles=[circle])
        union = (rasterize_line(img.shape, line)
                 | rasterize_circle(img.shape, circle))
        np.testing.assert_array_equal(both == 1.0, union)

    def test_line_outside_image_empty(self):
        raster = rasterize_line((16, 16), LineParam(rho=40, theta=0.0))
        assert not raster.any()


class TestBrokenLinePrior:
    def test_clean_square_mesh_sparse(self):
        img, _, _ = generate(MeshSpec(period=8), DefectSpec(count=0))
        prior = broken_line_prior(img, "square")
        assert prior.mean() <= 0.10

    def test_square_gap_flagged(self):
        img, gt, _ = generate(MeshSpec(period=8),
                              DefectSpec(kind="broken", extent=30))
        prior = broken_line_prior(img, "square")
        assert (prior & gt).sum() / gt.sum() >= 0.5

    def test_gap_strictly_increases_density(self):
        clean, _, _ = generate(MeshSpec(period=8), DefectSpec(count=0))
        broken, _, _ = generate(MeshSpec(period=8),
                                DefectSpec(kind="broken", extent=30))
        assert (broken_line_prior(broken, "square").sum()
                > broken_line_prior(clean, "square").sum())

    def test_circular_arc_flagged(self):
        mesh = MeshSpec(mesh_type="circular", period=16)
        img, gt, _ = generate(mesh, DefectSpec(kind="broken", extent=12))
        prior = broken_line_prior(img, "circular", HoughConfig(radius_range=(4, 8)))
        assert (prior & gt).sum() / gt.sum() >= 0.5

    def test_unknown_mesh_type(self):
        with pytest.raises(ValueError, match="mesh_type"):
            broken_line_prior(np.zeros((8, 8)), "hex")
