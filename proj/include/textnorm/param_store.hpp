#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "textnorm/errors.hpp"
#include "textnorm/rng.hpp"

namespace textnorm {

// Named parameter buffers plus a gradient slot per parameter. Iteration
// order is insertion order and is the canonical order for checkpoints,
// gradient collection and optimizer state.
template <typename Real>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<size_t> shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    bool trainable = true;
  };

  Entry& add(const std::string& name, std::vector<size_t> shape,
             std::vector<Real> value, bool trainable = true) {
    if (index_.count(name)) {
      throw UsageError("duplicate parameter name: " + name);
    }
    size_t n = 1;
    for (size_t d : shape) n *= d;
    if (value.size() != n) {
      throw DimensionError("parameter " + name + " value/shape mismatch");
    }
    index_[name] = entries_.size();
    entries_.push_back(Entry{name, std::move(shape), std::move(value),
                             std::vector<Real>(n, Real(0)), trainable});
    return entries_.back();
  }

  Entry& add_uniform(const std::string& name, std::vector<size_t> shape,
                     Rng& rng, double lo, double hi, bool trainable = true) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    std::vector<Real> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = static_cast<Real>(rng.uniform(lo, hi));
    return add(name, std::move(shape), std::move(v), trainable);
  }

  Entry& add_zeros(const std::string& name, std::vector<size_t> shape,
                   bool trainable = true) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return add(name, std::move(shape), std::vector<Real>(n, Real(0)), trainable);
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Entry& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter: " + name);
    return entries_[it->second];
  }
  const Entry& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter: " + name);
    return entries_[it->second];
  }

  void zero_grads() {
    for (auto& e : entries_) std::fill(e.grad.begin(), e.grad.end(), Real(0));
  }

  size_t total_params() const {
    size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace textnorm
