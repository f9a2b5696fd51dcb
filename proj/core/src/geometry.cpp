#include "trafficmon/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "trafficmon/errors.hpp"

namespace trafficmon {

bool BoundingBox::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) &&
         std::isfinite(h) && w > 0.0 && h > 0.0;
}

void validate(const BoundingBox& box) {
  if (!box.valid()) {
    throw InvalidGeometryError("degenerate or non-finite bounding box");
  }
}

double iou_unchecked(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  if (iw <= 0.0) return 0.0;
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (ih <= 0.0) return 0.0;
  // Rounding in right()/bottom() can push the ratio past 1 for equal or
  // nearly equal boxes.
  if (a == b) return 1.0;
  const double inter = iw * ih;
  return std::min(inter / (a.area() + b.area() - inter), std::nextafter(1.0, 0.0));
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  validate(a);
  validate(b);
  return iou_unchecked(a, b);
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw InvalidInputError("cosine_distance: dimension mismatch");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    throw InvalidInputError("cosine_distance: zero vector");
  }
  const double cos = std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
  return 1.0 - cos;
}

BitMask::BitMask(std::int32_t width, std::int32_t height)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw InvalidGeometryError("mask dimensions must be non-negative");
  }
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

bool BitMask::test(std::int32_t x, std::int32_t y) const {
  if (!contains(x, y)) return false;
  return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
}

void BitMask::set(std::int32_t x, std::int32_t y) {
  if (!contains(x, y)) {
    throw InvalidGeometryError("pixel outside mask bounds");
  }
  auto& bit = bits_[static_cast<std::size_t>(y) * width_ + x];
  if (bit == 0) {
    bit = 1;
    ++count_;
  }
}

std::vector<Pixel> BitMask::pixels() const {
  std::vector<Pixel> out;
  out.reserve(count_);
  for (std::int32_t y = 0; y < height_; ++y) {
    const std::uint8_t* row = bits_.data() + static_cast<std::size_t>(y) * width_;
    for (std::int32_t x = 0; x < width_; ++x) {
      if (row[x]) out.push_back({x, y});
    }
  }
  return out;
}

}  // namespace trafficmon
