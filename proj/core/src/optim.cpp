#include "semcom/optim.hpp"

#include "semcom/error.hpp"

#include <algorithm>
#include <cmath>

namespace semcom {

void AdamConfig::validate() const {
  if (!(lr >= 0)) throw ConfigError("train.lr must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("Adam betas must be in [0, 1)");
  if (!(eps > 0)) throw ConfigError("Adam eps must be > 0");
  if (warmup_iterations < 0) throw ConfigError("train.warmup must be >= 0");
  if (clip_norm < 0) throw ConfigError("train.clip_norm must be >= 0");
}

Adam::Adam(ParamStore& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
  cfg_.validate();
  for (const auto& name : params_.names()) {
    const auto& v = params_.get(name);
    m_[name] = Mat::Zero(v->value.rows(), v->value.cols());
    v_[name] = Mat::Zero(v->value.rows(), v->value.cols());
  }
}

double Adam::current_lr() const {
  if (cfg_.warmup_iterations > 0 && t_ < static_cast<std::uint64_t>(cfg_.warmup_iterations)) {
    return cfg_.lr * static_cast<double>(t_ + 1) / cfg_.warmup_iterations;
  }
  return cfg_.lr;
}

double Adam::step() {
  double sq = 0.0;
  for (const auto& name : params_.names()) {
    const auto& p = params_.get(name);
    if (p->has_grad()) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  double clip = 1.0;
  if (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) clip = cfg_.clip_norm / norm;

  const double lr = current_lr();
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& name : params_.names()) {
    const auto& p = params_.get(name);
    Mat& m = m_.at(name);
    Mat& v = v_.at(name);
    if (p->has_grad()) {
      const Mat g = p->grad * clip;
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    } else {
      m *= cfg_.beta1;
      v *= cfg_.beta2;
    }
    if (lr == 0.0) continue;
    p->value.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
  }
  return norm;
}

std::map<std::string, Mat> Adam::state() const {
  std::map<std::string, Mat> s;
  for (const auto& [k, m] : m_) s["m." + k] = m;
  for (const auto& [k, v] : v_) s["v." + k] = v;
  return s;
}

void Adam::set_state(const std::map<std::string, Mat>& state, std::uint64_t steps) {
  for (auto& [k, m] : m_) {
    auto it = state.find("m." + k);
    if (it == state.end() || it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw DataError("optimizer state missing or mis-shaped for " + k);
    }
    m = it->second;
  }
  for (auto& [k, v] : v_) {
    auto it = state.find("v." + k);
    if (it == state.end() || it->second.rows() != v.rows() || it->second.cols() != v.cols()) {
      throw DataError("optimizer state missing or mis-shaped for " + k);
    }
    v = it->second;
  }
  t_ = steps;
}

}  // namespace semcom
