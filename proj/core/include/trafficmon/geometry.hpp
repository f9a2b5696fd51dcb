#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace trafficmon {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

// Axis-aligned box in image pixels. Origin is the top-left corner of the
// image and y grows downward.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  Point center() const { return {x + 0.5 * w, y + 0.5 * h}; }
  bool valid() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Throws InvalidGeometryError unless w > 0, h > 0 and all fields are finite.
void validate(const BoundingBox& box);

// Intersection over union. Both boxes must be valid.
double iou(const BoundingBox& a, const BoundingBox& b);

// Same as iou() without validation; for hot loops over boxes already checked
// at ingest.
double iou_unchecked(const BoundingBox& a, const BoundingBox& b);

// 1 - cos(angle(u, v)). Throws InvalidInputError on a zero vector or a
// dimension mismatch.
double cosine_distance(std::span<const double> u, std::span<const double> v);

struct Pixel {
  std::int32_t x = 0;
  std::int32_t y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

// Binary mask over a width x height grid.
class BitMask {
 public:
  BitMask() = default;
  BitMask(std::int32_t width, std::int32_t height);

  std::int32_t width() const { return width_; }
  std::int32_t height() const { return height_; }

  bool contains(std::int32_t x, std::int32_t y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool test(std::int32_t x, std::int32_t y) const;
  // Throws InvalidGeometryError when (x, y) is outside the grid.
  void set(std::int32_t x, std::int32_t y);

  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }

  // Set pixels in row-major order.
  std::vector<Pixel> pixels() const;

  friend bool operator==(const BitMask&, const BitMask&) = default;

 private:
  std::int32_t width_ = 0;
  std::int32_t height_ = 0;
  std::size_t count_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace trafficmon
