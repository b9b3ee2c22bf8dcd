#pragma once
// Deterministic regression fixtures of 200 rows each.

#include <string>
#include <vector>

namespace fixtures {

struct Regression {
  std::string name;
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  // Training RMSE of scikit-learn 1.7.2 GradientBoostingRegressor with
  // n_estimators=100, max_depth=3, learning_rate=0.1, min_samples_leaf=1,
  // subsample=1.0, criterion="squared_error", random_state=0.
  double reference_rmse;
};

inline std::vector<Regression> gbt_fixtures() {
  std::vector<Regression> out;
  Regression linear{"linear", {}, {}, 0.0015990588970966229};
  Regression quadratic{"quadratic", {}, {}, 0.003201086993494117};
  Regression interaction{"interaction", {}, {}, 0.0056966517936809175};
  for (int i = 0; i < 200; ++i) {
    const double a = i / 199.0;
    linear.x.push_back({a});
    linear.y.push_back(a);
    const double b = 2.0 * i / 199.0 - 1.0;
    quadratic.x.push_back({b});
    quadratic.y.push_back(b * b);
    const double x1 = (i % 20) / 19.0;
    const double x2 = (i / 20) / 9.0;
    interaction.x.push_back({x1, x2});
    interaction.y.push_back(x1 * x2);
  }
  out.push_back(std::move(linear));
  out.push_back(std::move(quadratic));
  out.push_back(std::move(interaction));
  return out;
}

}  // namespace fixtures
