#include <doctest.h>

#include "eclab/geometry.hpp"
#include "eclab/rng.hpp"
#include "test_helpers.hpp"

using namespace eclab;
using geom::BoundingBox;

TEST_CASE("area of simple boxes") {
  CHECK(geom::area(BoundingBox{0, 0, 10, 10}) == 100);
  CHECK(geom::area(BoundingBox{0, 0, 1, 1}) == 1);
  CHECK(geom::area(BoundingBox{2, 3, 5, 9}) == 18);
}

TEST_CASE("iou examples") {
  const BoundingBox a{0, 0, 10, 10};
  CHECK(geom::iou(a, a) == doctest::Approx(1.0));
  CHECK(geom::iou(BoundingBox{0, 0, 2, 2}, BoundingBox{4, 4, 6, 6}) == 0.0);
  // intersection 1, union 4 + 4 - 1 = 7
  CHECK(geom::iou(BoundingBox{0, 0, 2, 2}, BoundingBox{1, 1, 3, 3}) ==
        doctest::Approx(1.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("box validity") {
  CHECK(geom::is_valid(BoundingBox{0, 0, 16, 16}, 16));
  CHECK_FALSE(geom::is_valid(BoundingBox{0, 0, 0, 5}, 16));   // zero width
  CHECK_FALSE(geom::is_valid(BoundingBox{3, 2, 2, 5}, 16));   // reversed
  CHECK_FALSE(geom::is_valid(BoundingBox{-1, 0, 4, 5}, 16));  // off grid
  CHECK_FALSE(geom::is_valid(BoundingBox{0, 0, 17, 5}, 16));
}

TEST_CASE("iou properties against the cell-counting oracle") {
  RngStream rng(101);
  for (int grid : {8, 16, 32}) {
    for (int i = 0; i < 300; ++i) {
      const BoundingBox a = test::random_box(rng, grid);
      const BoundingBox b = test::random_box(rng, grid);
      const double ab = geom::iou(a, b);
      CHECK(ab == geom::iou(b, a));  // symmetric
      CHECK(ab >= 0.0);
      CHECK(ab <= 1.0);
      CHECK(geom::iou(a, a) == 1.0);
      // closed form equals brute-force cell counting exactly: both divide the
      // same two integers
      CHECK(ab == test::cell_count_iou(a, b, grid));
      if (geom::intersection_area(a, b) == 0)
        CHECK(ab == 0.0);
      else
        CHECK(ab > 0.0);
    }
  }
}
