#include "latcorr/gradkit/params.hpp"

#include <cmath>

#include "latcorr/errors.hpp"

namespace latcorr::gradkit {

const Slice& ParamLayout::add(const std::string& name, Index rows, Index cols) {
  if (rows <= 0 || cols <= 0) throw ConfigError("parameter slice '" + name + "' has an empty shape");
  if (index_.count(name) != 0) throw ConfigError("duplicate parameter slice '" + name + "'");
  index_.emplace(name, slices_.size());
  slices_.push_back(Slice{name, size_, rows, cols});
  size_ += rows * cols;
  return slices_.back();
}

const Slice& ParamLayout::at(const std::string& name) const { return slices_[index_of(name)]; }

bool ParamLayout::contains(const std::string& name) const { return index_.count(name) != 0; }

std::size_t ParamLayout::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter slice '" + name + "'");
  return it->second;
}

bool operator==(const ParamLayout& a, const ParamLayout& b) {
  if (a.slices_.size() != b.slices_.size()) return false;
  for (std::size_t i = 0; i < a.slices_.size(); ++i) {
    const Slice& x = a.slices_[i];
    const Slice& y = b.slices_[i];
    if (x.name != y.name || x.offset != y.offset || x.rows != y.rows || x.cols != y.cols) return false;
  }
  return true;
}

ParamVector::ParamVector(ParamLayout layout)
    : layout_(std::move(layout)), values_(Vector::Zero(layout_.size())) {}

ParamVector::ParamVector(ParamLayout layout, Vector values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_.size()) throw ConfigError("parameter values do not match layout size");
}

Eigen::Map<const Matrix> ParamVector::matrix(const std::string& name) const {
  const Slice& s = layout_.at(name);
  return Eigen::Map<const Matrix>(values_.data() + s.offset, s.rows, s.cols);
}

Eigen::Map<Matrix> ParamVector::matrix(const std::string& name) {
  const Slice& s = layout_.at(name);
  return Eigen::Map<Matrix>(values_.data() + s.offset, s.rows, s.cols);
}

void ParamVector::require_finite() const {
  for (const Slice& s : layout_.slices()) {
    if (!values_.segment(s.offset, s.size()).allFinite()) {
      throw NumericError("non-finite parameter in slice '" + s.name + "'");
    }
  }
}

BoundParams::BoundParams(Tape& tape, const ParamVector& params,
                         const std::function<bool(const std::string&)>& frozen)
    : tape_(&tape), params_(&params) {
  vars_.reserve(params.layout().slices().size());
  for (const Slice& s : params.layout().slices()) {
    Matrix m = params.matrix(s.name);
    vars_.push_back(frozen && frozen(s.name) ? tape.constant(std::move(m)) : tape.variable(std::move(m)));
  }
}

Var BoundParams::operator[](const std::string& name) const {
  return vars_[params_->layout().index_of(name)];
}

Vector BoundParams::gradient() const {
  Vector g = Vector::Zero(params_->size());
  const auto& slices = params_->layout().slices();
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const Var v = vars_[i];
    if (!tape_->needs_grad(v)) continue;
    const Matrix gm = tape_->grad(v);
    g.segment(slices[i].offset, slices[i].size()) = Eigen::Map<const Vector>(gm.data(), gm.size());
  }
  return g;
}

}  // namespace latcorr::gradkit
