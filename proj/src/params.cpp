#include "ofp/params.hpp"

#include <stdexcept>

namespace ofp {

std::size_t ParamStore::add(std::string name, std::size_t rows, std::size_t cols) {
  blocks_.push_back(ParamBlock{std::move(name), rows, cols, values_.size()});
  values_.resize(values_.size() + rows * cols, 0.0);
  return blocks_.size() - 1;
}

std::span<double> ParamStore::block(std::size_t i) {
  const ParamBlock& b = blocks_.at(i);
  return {values_.data() + b.offset, b.size()};
}

std::span<const double> ParamStore::block(std::size_t i) const {
  const ParamBlock& b = blocks_.at(i);
  return {values_.data() + b.offset, b.size()};
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& a = blocks_[i];
    const auto& b = other.blocks_[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) return false;
  }
  return true;
}

std::vector<ad::Var> ParamStore::bind(ad::Tape& tape, bool track) const {
  std::vector<ad::Var> vars;
  vars.reserve(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    vars.push_back(tape.view(block(i), {blocks_[i].rows, blocks_[i].cols}, track));
  }
  return vars;
}

std::vector<ad::ParamRef> ParamStore::refs() {
  std::vector<ad::ParamRef> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    out.push_back({blocks_[i].name, {blocks_[i].rows, blocks_[i].cols}, block(i)});
  }
  return out;
}

std::vector<double> ParamStore::flat_gradient(const ad::Gradients& grads,
                                              const std::vector<ad::Var>& bound) const {
  if (bound.size() != blocks_.size()) {
    throw std::invalid_argument("bound variables do not match parameter layout");
  }
  std::vector<double> flat(values_.size(), 0.0);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto g = grads.view(bound[i]);
    if (g.empty()) continue;
    std::copy(g.begin(), g.end(), flat.begin() + static_cast<std::ptrdiff_t>(blocks_[i].offset));
  }
  return flat;
}

}  // namespace ofp
