#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nct/error.hpp"

namespace nct {

/// A named block inside a flat parameter vector. Matrices are stored
/// row-major with shape {rows, cols}; vectors use shape {n}.
struct Segment {
  std::string name;
  std::vector<std::size_t> shape;

  std::size_t size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }
  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }

  bool operator==(const Segment&) const = default;
};

using Layout = std::vector<Segment>;

inline std::size_t layout_size(const Layout& layout) {
  std::size_t n = 0;
  for (const auto& s : layout) n += s.size();
  return n;
}

/// Flat float64 storage with a segment layout. Every optimizer, checkpoint
/// and gradient oracle works on this one representation.
class ParameterVector {
 public:
  ParameterVector() = default;

  explicit ParameterVector(Layout layout)
      : layout_(std::move(layout)), values_(layout_size(layout_), 0.0) {
    build_offsets();
  }

  ParameterVector(Layout layout, std::vector<double> values)
      : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_size(layout_)) {
      throw ConfigError("parameter vector holds " +
                        std::to_string(values_.size()) +
                        " values but its layout requires " +
                        std::to_string(layout_size(layout_)));
    }
    build_offsets();
  }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const Layout& layout() const { return layout_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }
  const std::vector<double>& storage() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::size_t segment_index(std::string_view name) const {
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      if (layout_[i].name == name) return i;
    }
    throw ConfigError("no parameter segment named '" + std::string(name) + "'");
  }

  std::size_t offset(std::size_t segment) const { return offsets_.at(segment); }

  std::span<double> segment(std::size_t i) {
    return std::span<double>(values_).subspan(offsets_.at(i), layout_[i].size());
  }
  std::span<const double> segment(std::size_t i) const {
    return std::span<const double>(values_).subspan(offsets_.at(i),
                                                    layout_[i].size());
  }
  std::span<double> segment(std::string_view name) {
    return segment(segment_index(name));
  }
  std::span<const double> segment(std::string_view name) const {
    return segment(segment_index(name));
  }

  bool same_layout(const ParameterVector& other) const {
    return layout_ == other.layout_;
  }

  /// Index of the first non-finite value, or size() if all are finite.
  std::size_t first_non_finite() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) return i;
    }
    return values_.size();
  }

  double norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

  ParameterVector zeros_like() const { return ParameterVector(layout_); }

  bool operator==(const ParameterVector& other) const {
    return layout_ == other.layout_ && values_ == other.values_;
  }

 private:
  void build_offsets() {
    offsets_.clear();
    std::size_t off = 0;
    for (const auto& s : layout_) {
      offsets_.push_back(off);
      off += s.size();
    }
  }

  Layout layout_;
  std::vector<double> values_;
  std::vector<std::size_t> offsets_;
};

/// Concatenates layouts and values; segment names must already be distinct.
inline ParameterVector concat(const ParameterVector& a, const ParameterVector& b) {
  Layout layout = a.layout();
  layout.insert(layout.end(), b.layout().begin(), b.layout().end());
  std::vector<double> values = a.storage();
  values.insert(values.end(), b.storage().begin(), b.storage().end());
  return ParameterVector(std::move(layout), std::move(values));
}

}  // namespace nct
