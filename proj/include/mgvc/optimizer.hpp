#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgvc/autograd.hpp"

namespace mgvc {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global L2 norm over the scope; <= 0 disables
};

// Adaptive-moment optimizer over a fixed set of parameters. Parameters
// outside the scope are never touched.
class Adam {
 public:
  Adam(std::vector<NamedParameter> scope, AdamOptions options);

  // Clips and applies Parameter::grad of every parameter in scope. Returns
  // the gradient norm before clipping.
  double step();

  const std::vector<NamedParameter>& scope() const { return scope_; }
  std::int64_t steps() const { return t_; }

  // Moment tensors as (name, tensor) pairs, names prefixed with `prefix`.
  std::vector<std::pair<std::string, Matrix>> state(const std::string& prefix) const;
  // Restores moments written by state(); throws FormatError on missing or
  // misshaped entries.
  void load_state(const std::string& prefix,
                  const std::vector<std::pair<std::string, Matrix>>& tensors, std::int64_t steps);

 private:
  std::vector<NamedParameter> scope_;
  AdamOptions options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t t_ = 0;
};

double global_grad_norm(const std::vector<NamedParameter>& params);

}  // namespace mgvc
