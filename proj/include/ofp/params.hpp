#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ofp/autodiff/grad_check.hpp"
#include "ofp/autodiff/tape.hpp"

namespace ofp {

struct ParamBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return rows * cols; }
};

// Flat parameter vector partitioned into named matrix blocks, in declaration
// order. The student weights and the EMA shadow are both ParamStores with the
// same layout.
class ParamStore {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols);

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::span<double> block(std::size_t i);
  std::span<const double> block(std::size_t i) const;
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  bool same_layout(const ParamStore& other) const;

  // Leaves viewing this store's storage; the store must outlive the tape and
  // must not be resized while the tape is alive.
  std::vector<ad::Var> bind(ad::Tape& tape, bool track) const;
  std::vector<ad::ParamRef> refs();

  // Concatenates per-block gradients into one flat vector in layout order.
  std::vector<double> flat_gradient(const ad::Gradients& grads,
                                    const std::vector<ad::Var>& bound) const;

 private:
  std::vector<ParamBlock> blocks_;
  std::vector<double> values_;
};

}  // namespace ofp
