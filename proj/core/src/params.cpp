#include "semcom/params.hpp"

#include "semcom/error.hpp"

namespace semcom {

ag::Var ParamStore::create(const std::string& name, Shape shape, Init init, Rng& rng, double std) {
  if (index_.count(name)) throw UsageError("duplicate parameter " + name);
  Tensor t(shape);
  switch (init) {
    case Init::Zeros:
      break;
    case Init::Ones:
      t.data.setOnes();
      break;
    case Init::TruncNormal:
      for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data.data()[i] = truncated_normal(rng, std);
      break;
  }
  auto v = ag::leaf(std::move(t), true);
  order_.push_back(name);
  index_.emplace(name, v);
  return v;
}

const ag::Var& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter " + name);
  return it->second;
}

std::size_t ParamStore::numel() const {
  std::size_t total = 0;
  for (const auto& [_, v] : index_) total += static_cast<std::size_t>(v->value.size());
  return total;
}

std::size_t ParamStore::numel_with_prefix(const std::string& prefix) const {
  std::size_t total = 0;
  for (const auto& [name, v] : index_) {
    if (name.rfind(prefix, 0) == 0) total += static_cast<std::size_t>(v->value.size());
  }
  return total;
}

void ParamStore::zero_grad() {
  for (auto& [_, v] : index_) v->grad.resize(0, 0);
}

}  // namespace semcom
