// SPDX-License-Identifier: Apache-2.0
#include "gradcheck.hpp"

#include <cmath>

#include "oracles.hpp"

namespace acstep::oracle {

GradCheckResult check_store_gradients(ParamStore& store, const std::function<double()>& loss,
                                      const std::function<void()>& backward, double h,
                                      double floor) {
  store.zero_grad();
  backward();
  GradCheckResult res;
  for (auto& [name, param] : store.entries()) {
    auto values = param.value.data();
    auto grads = param.grad.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double numeric = central_difference(loss, values[i], h);
      const double analytic = grads[i];
      ++res.checked;
      if (std::fabs(numeric) < floor && std::fabs(analytic) < floor) continue;
      const double err = relative_error(numeric, analytic, floor);
      if (err > res.worst) {
        res.worst = err;
        res.where = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace acstep::oracle
