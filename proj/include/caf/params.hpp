#pragma once

#include <string>
#include <utility>
#include <vector>

#include "caf/tensor.hpp"

namespace caf {

// Named parameter tensors with a deterministic (insertion) order. The order
// drives Adam updates and checkpoint layout, so it must not depend on
// anything but the model configuration.
template <typename T>
class ParamStore {
 public:
  void add(const std::string& name, Tensor<T> t) {
    require(find(name) < 0, Errc::invalid_argument, "duplicate parameter " + name);
    items_.emplace_back(name, std::move(t));
  }

  Tensor<T>& get(const std::string& name) {
    int i = find(name);
    require(i >= 0, Errc::invalid_argument, "unknown parameter " + name);
    return items_[size_t(i)].second;
  }
  const Tensor<T>& get(const std::string& name) const {
    return const_cast<ParamStore*>(this)->get(name);
  }
  bool has(const std::string& name) const { return find(name) >= 0; }

  size_t count() const { return items_.size(); }
  const std::string& name(size_t i) const { return items_[i].first; }
  Tensor<T>& tensor(size_t i) { return items_[i].second; }
  const Tensor<T>& tensor(size_t i) const { return items_[i].second; }

  size_t total_elements() const {
    size_t n = 0;
    for (const auto& [name, t] : items_) n += t.size();
    return n;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, t] : items_) out.add(name, t.template cast<U>());
    return out;
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  int find(const std::string& name) const {
    for (size_t i = 0; i < items_.size(); ++i)
      if (items_[i].first == name) return int(i);
    return -1;
  }

  std::vector<std::pair<std::string, Tensor<T>>> items_;
};

}  // namespace caf
