#pragma once

#include "semcom/autograd.hpp"
#include "semcom/rng.hpp"

#include <map>
#include <string>
#include <vector>

namespace semcom {

// Named, ordered collection of trainable tensors. Names are hierarchical
// ("stage2.block0.attn.qkv.weight") and stable across runs.
class ParamStore {
 public:
  enum class Init { Zeros, Ones, TruncNormal };

  ag::Var create(const std::string& name, Shape shape, Init init, Rng& rng, double std = 0.02);

  const ag::Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }
  std::size_t numel() const;
  // Number of scalars in parameters whose name starts with prefix.
  std::size_t numel_with_prefix(const std::string& prefix) const;

  void zero_grad();

 private:
  std::vector<std::string> order_;
  std::map<std::string, ag::Var> index_;
};

}  // namespace semcom
