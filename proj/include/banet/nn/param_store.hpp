#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "banet/common.hpp"

namespace banet::nn {

using BlockId = int;

// Flat parameter/gradient storage. Layers register named blocks at build time
// and keep BlockIds; optimizers and the gradient checker see one contiguous
// array. Registration order is deterministic, which makes serialization and
// parameter enumeration stable.
class ParamStore {
public:
  struct Block {
    std::string name;
    int rows = 0, cols = 0;
    size_t offset = 0;
  };

  BlockId add(std::string name, int rows, int cols) {
    if (rows <= 0 || cols <= 0) throw usage_error("ParamStore::add: bad shape for " + name);
    Block b{std::move(name), rows, cols, values_.size()};
    values_.resize(values_.size() + static_cast<size_t>(rows) * cols, 0.0);
    grads_.resize(values_.size(), 0.0);
    blocks_.push_back(std::move(b));
    return static_cast<BlockId>(blocks_.size() - 1);
  }

  size_t size() const { return values_.size(); }
  size_t block_count() const { return blocks_.size(); }
  const Block& block(BlockId id) const { return blocks_[static_cast<size_t>(id)]; }

  std::span<double> values(BlockId id) {
    const Block& b = blocks_[static_cast<size_t>(id)];
    return {values_.data() + b.offset, static_cast<size_t>(b.rows) * b.cols};
  }
  std::span<const double> values(BlockId id) const {
    const Block& b = blocks_[static_cast<size_t>(id)];
    return {values_.data() + b.offset, static_cast<size_t>(b.rows) * b.cols};
  }
  std::span<double> grads(BlockId id) {
    const Block& b = blocks_[static_cast<size_t>(id)];
    return {grads_.data() + b.offset, static_cast<size_t>(b.rows) * b.cols};
  }

  std::span<double> all_values() { return values_; }
  std::span<const double> all_values() const { return values_; }
  std::span<double> all_grads() { return grads_; }
  std::span<const double> all_grads() const { return grads_; }

  void zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // "block_name[i]" for diagnostics (gradient checker reports).
  std::string param_name(size_t flat_index) const {
    for (const Block& b : blocks_) {
      const size_t n = static_cast<size_t>(b.rows) * b.cols;
      if (flat_index >= b.offset && flat_index < b.offset + n)
        return b.name + "[" + std::to_string(flat_index - b.offset) + "]";
    }
    return "param[" + std::to_string(flat_index) + "]";
  }

private:
  std::vector<double> values_, grads_;
  std::vector<Block> blocks_;
};

} // namespace banet::nn
