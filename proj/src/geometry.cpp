#include "eclab/geometry.hpp"

#include <algorithm>

namespace eclab::geom {

bool is_valid(const BoundingBox& b, int grid) {
  return b.x1 < b.x2 && b.y1 < b.y2 && b.x1 >= 0 && b.y1 >= 0 && b.x2 <= grid && b.y2 <= grid;
}

std::int64_t area(const BoundingBox& b) {
  return static_cast<std::int64_t>(b.x2 - b.x1) * static_cast<std::int64_t>(b.y2 - b.y1);
}

std::int64_t intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const int ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const int iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0;
  return static_cast<std::int64_t>(ix) * static_cast<std::int64_t>(iy);
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const std::int64_t inter = intersection_area(a, b);
  if (inter == 0) return 0.0;
  const std::int64_t uni = area(a) + area(b) - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace eclab::geom
