#include "mgvc/optimizer.hpp"

#include <cmath>
#include <map>

#include "mgvc/errors.hpp"

namespace mgvc {

double global_grad_norm(const std::vector<NamedParameter>& params) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.param->grad.size() == p.param->value.size()) sq += p.param->grad.squaredNorm();
  return std::sqrt(sq);
}

Adam::Adam(std::vector<NamedParameter> scope, AdamOptions options)
    : scope_(std::move(scope)), options_(options) {
  for (const auto& p : scope_) {
    m_.push_back(Matrix::Zero(p.param->value.rows(), p.param->value.cols()));
    v_.push_back(Matrix::Zero(p.param->value.rows(), p.param->value.cols()));
  }
}

double Adam::step() {
  for (auto& p : scope_)
    if (p.param->grad.rows() != p.param->value.rows() || p.param->grad.cols() != p.param->value.cols())
      p.param->zero_grad();
  const double norm = global_grad_norm(scope_);
  const double clip =
      (options_.clip_norm > 0.0 && norm > options_.clip_norm) ? options_.clip_norm / norm : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < scope_.size(); ++k) {
    Parameter& p = *scope_[k].param;
    const Matrix g = p.grad * clip;
    m_[k] = options_.beta1 * m_[k] + (1.0 - options_.beta1) * g;
    v_[k] = options_.beta2 * v_[k] + (1.0 - options_.beta2) * g.cwiseProduct(g);
    p.value.array() -= options_.lr * (m_[k].array() / bc1) /
                       ((v_[k].array() / bc2).sqrt() + options_.eps);
  }
  return norm;
}

std::vector<std::pair<std::string, Matrix>> Adam::state(const std::string& prefix) const {
  std::vector<std::pair<std::string, Matrix>> out;
  for (std::size_t k = 0; k < scope_.size(); ++k) {
    out.emplace_back(prefix + ".m." + scope_[k].name, m_[k]);
    out.emplace_back(prefix + ".v." + scope_[k].name, v_[k]);
  }
  return out;
}

void Adam::load_state(const std::string& prefix,
                      const std::vector<std::pair<std::string, Matrix>>& tensors,
                      std::int64_t steps) {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& [name, m] : tensors) by_name[name] = &m;
  for (std::size_t k = 0; k < scope_.size(); ++k) {
    for (auto [tag, dst] : {std::pair{".m.", &m_[k]}, std::pair{".v.", &v_[k]}}) {
      const std::string name = prefix + tag + scope_[k].name;
      auto it = by_name.find(name);
      if (it == by_name.end()) throw FormatError("checkpoint: missing optimizer tensor '" + name + "'");
      if (it->second->rows() != dst->rows() || it->second->cols() != dst->cols())
        throw FormatError("checkpoint: optimizer tensor '" + name + "' has the wrong shape");
      *dst = *it->second;
    }
  }
  t_ = steps;
}

}  // namespace mgvc
