#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "latcorr/gradkit/tape.hpp"

namespace latcorr::gradkit {

using Vector = Eigen::VectorXd;

/// Named matrix-shaped slice of a flat parameter array.
struct Slice {
  std::string name;
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;

  [[nodiscard]] Index size() const { return rows * cols; }
};

/// Ordered, disjoint, contiguous slices covering [0, size()).
class ParamLayout {
 public:
  /// Appends a slice; names must be unique.
  const Slice& add(const std::string& name, Index rows, Index cols);
  [[nodiscard]] const Slice& at(const std::string& name) const;
  [[nodiscard]] bool contains(const std::string& name) const;
  [[nodiscard]] std::size_t index_of(const std::string& name) const;
  [[nodiscard]] const std::vector<Slice>& slices() const { return slices_; }
  [[nodiscard]] Index size() const { return size_; }

  friend bool operator==(const ParamLayout& a, const ParamLayout& b);

 private:
  std::vector<Slice> slices_;
  std::unordered_map<std::string, std::size_t> index_;
  Index size_ = 0;
};

/// Flat real parameters with a named layout. Slices are stored column-major.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(ParamLayout layout);
  ParamVector(ParamLayout layout, Vector values);

  [[nodiscard]] const ParamLayout& layout() const { return layout_; }
  [[nodiscard]] const Vector& values() const { return values_; }
  [[nodiscard]] Vector& values() { return values_; }
  [[nodiscard]] Index size() const { return values_.size(); }

  [[nodiscard]] Eigen::Map<const Matrix> matrix(const std::string& name) const;
  [[nodiscard]] Eigen::Map<Matrix> matrix(const std::string& name);

  /// Throws NumericError naming the first slice holding a non-finite value.
  void require_finite() const;

 private:
  ParamLayout layout_;
  Vector values_;
};

/// Tape variables for every slice of a ParamVector.
class BoundParams {
 public:
  /// Slices for which `frozen(name)` is true are recorded as constants.
  BoundParams(Tape& tape, const ParamVector& params,
              const std::function<bool(const std::string&)>& frozen = nullptr);

  [[nodiscard]] Var operator[](const std::string& name) const;
  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] const ParamVector& params() const { return *params_; }

  /// Flat gradient after tape.backward(); frozen slices receive zeros.
  [[nodiscard]] Vector gradient() const;

 private:
  Tape* tape_;
  const ParamVector* params_;
  std::vector<Var> vars_;
};

}  // namespace latcorr::gradkit
