#pragma once

#include <cstdint>

namespace eclab::geom {

// Axis-aligned box on the integer grid. Half-open convention: the box covers
// the cells [x1,x2) x [y1,y2), so area and cell counting coincide exactly.
struct BoundingBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// positive area, all coordinates within [0, grid]
bool is_valid(const BoundingBox& b, int grid);

std::int64_t area(const BoundingBox& b);

// intersection area; 0 when disjoint
std::int64_t intersection_area(const BoundingBox& a, const BoundingBox& b);

// intersection over union in [0, 1]; symmetric; 0 iff disjoint
double iou(const BoundingBox& a, const BoundingBox& b);

}  // namespace eclab::geom
