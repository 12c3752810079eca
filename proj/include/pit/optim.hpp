#pragma once

#include <vector>

#include "pit/tensor.hpp"

namespace pit {

/// A trainable tensor. The first `frozen_prefix` elements are never updated
/// (used for the constant beta[0] and gamma[0] mask parameters).
struct ParamRef {
  Tensor tensor;
  std::size_t frozen_prefix = 0;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<ParamRef> params, AdamOptions options);

  /// One update from the gradients currently stored on the parameters.
  /// Parameters without a gradient are skipped.
  void step();
  void zero_grad();
  std::size_t steps() const { return t_; }

 private:
  std::vector<ParamRef> params_;
  AdamOptions opt_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

class Sgd {
 public:
  Sgd(std::vector<ParamRef> params, double lr, double momentum = 0.0);
  void step();
  void zero_grad();

 private:
  std::vector<ParamRef> params_;
  double lr_;
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace pit
