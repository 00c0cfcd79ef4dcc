#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "qmgen/tensor_nn.hpp"

namespace test_util {

// Forward builder: assembles a scalar loss from the given tape/registry.
// Parameters are whatever the builder binds through the registry.
using LossBuilder = std::function<int(qmgen::nn::Tape&, qmgen::nn::ParamRegistry&)>;

// Max relative error between tape gradients and central finite
// differences over every bound parameter element.
inline double gradient_check(const LossBuilder& build, double h = 1e-6) {
  using qmgen::nn::ParamRegistry;
  using qmgen::nn::Tape;
  using qmgen::nn::Tensor;

  Tape tape;
  ParamRegistry reg;
  int loss = build(tape, reg);
  std::vector<int> wrt;
  for (const auto& [param, id] : reg.entries()) wrt.push_back(id);
  auto grads = tape.gradients(loss, wrt);

  auto eval = [&]() {
    Tape t2;
    ParamRegistry r2;
    return t2.value(build(t2, r2)).data[0];
  };

  double worst = 0.0;
  const auto& entries = reg.entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    Tensor* param = entries[e].first;
    const Tensor& analytic = tape.value(grads[e]);
    for (std::size_t i = 0; i < param->data.size(); ++i) {
      const double keep = param->data[i];
      param->data[i] = keep + h;
      const double fp = eval();
      param->data[i] = keep - h;
      const double fm = eval();
      param->data[i] = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double a = analytic.data[i];
      const double scale = std::max({std::abs(fd), std::abs(a), 1.0});
      worst = std::max(worst, std::abs(a - fd) / scale);
    }
  }
  return worst;
}

}  // namespace test_util
