#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "strokeppg/attribution.hpp"
#include "strokeppg/prng.hpp"

using namespace strokeppg;

namespace {

// Permutation-enumeration Shapley for tiny F: average marginal contribution
// over all F! orderings.
std::vector<double> shapley_permutation(
    const std::function<double(const std::vector<double>&)>& fn,
    const std::vector<double>& x, const std::vector<double>& bg) {
  int F = static_cast<int>(x.size());
  std::vector<int> order(F);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(F, 0.0);
  long n_perm = 0;
  do {
    std::vector<double> point = bg;
    double prev = fn(point);
    for (int f : order) {
      point[f] = x[f];
      double cur = fn(point);
      phi[f] += cur - prev;
      prev = cur;
    }
    ++n_perm;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& v : phi) v /= static_cast<double>(n_perm);
  return phi;
}

}  // namespace

TEST_CASE("efficiency: contributions sum to f(x) - f(background) on 100 cases") {
  Prng g(41);
  for (int trial = 0; trial < 100; ++trial) {
    int F = 2 + static_cast<int>(g.next_below(9));
    std::vector<double> w(F), x(F), bg(F);
    for (int f = 0; f < F; ++f) {
      w[f] = g.next_normal();
      x[f] = g.next_normal();
      bg[f] = g.next_normal();
    }
    // Nonlinear score with pairwise interactions.
    auto fn = [&](const std::vector<double>& p) {
      double s = 0.0;
      for (int f = 0; f < F; ++f) s += w[f] * p[f];
      for (int f = 0; f + 1 < F; ++f) s += 0.3 * p[f] * p[f + 1];
      return std::tanh(s);
    };
    AttributionResult r = exact_shapley(fn, x, {bg});
    double total = std::accumulate(r.phi.begin(), r.phi.end(), 0.0);
    CHECK(std::abs(total - (r.fx - r.base_value)) < 1e-9);
  }
}

TEST_CASE("exact match with the permutation oracle at F = 3") {
  Prng g(42);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x{g.next_normal(), g.next_normal(), g.next_normal()};
    std::vector<double> bg{g.next_normal(), g.next_normal(), g.next_normal()};
    double a = g.next_normal(), b = g.next_normal(), c = g.next_normal();
    auto fn = [&](const std::vector<double>& p) {
      return a * p[0] + b * p[1] * p[2] + c * std::sin(p[0] + p[2]);
    };
    AttributionResult r = exact_shapley(fn, x, {bg});
    auto oracle = shapley_permutation(fn, x, bg);
    for (int f = 0; f < 3; ++f) CHECK(std::abs(r.phi[f] - oracle[f]) < 1e-12);
  }
}

TEST_CASE("dummy features receive exactly zero attribution") {
  auto fn = [](const std::vector<double>& p) { return 2.0 * p[0] - p[2]; };
  std::vector<double> x{1.0, 5.0, -2.0, 9.0};  // p[1], p[3] unused
  std::vector<double> bg{0.0, -3.0, 0.5, 1.0};
  AttributionResult r = exact_shapley(fn, x, {bg});
  CHECK(r.phi[1] == 0.0);
  CHECK(r.phi[3] == 0.0);
}

TEST_CASE("linear models split attributions by w_i (x_i - bg_i)") {
  std::vector<double> w{1.5, -2.0, 0.25};
  auto fn = [&](const std::vector<double>& p) {
    return w[0] * p[0] + w[1] * p[1] + w[2] * p[2] + 7.0;
  };
  std::vector<double> x{1.0, 2.0, 3.0};
  std::vector<double> bg{0.5, 0.5, 0.5};
  AttributionResult r = exact_shapley(fn, x, {bg});
  for (int f = 0; f < 3; ++f)
    CHECK(r.phi[f] == doctest::Approx(w[f] * (x[f] - bg[f])).epsilon(1e-12));
}

TEST_CASE("symmetry: interchangeable features share credit equally") {
  auto fn = [](const std::vector<double>& p) { return p[0] + p[1]; };
  std::vector<double> x{2.0, 2.0};
  std::vector<double> bg{0.0, 0.0};
  AttributionResult r = exact_shapley(fn, x, {bg});
  CHECK(r.phi[0] == doctest::Approx(r.phi[1]));
}

TEST_CASE("multi-row backgrounds are averaged per feature") {
  auto fn = [](const std::vector<double>& p) { return p[0]; };
  std::vector<double> x{4.0};
  AttributionResult r = exact_shapley(fn, x, {{1.0}, {3.0}});
  CHECK(r.base_value == doctest::Approx(2.0));
  CHECK(r.phi[0] == doctest::Approx(2.0));
}

TEST_CASE("feature-count guard and input validation") {
  auto fn = [](const std::vector<double>& p) { return p[0]; };
  std::vector<double> big(21, 1.0);
  CHECK_THROWS_AS(exact_shapley(fn, big, {std::vector<double>(21, 0.0)}),
                  std::invalid_argument);
  CHECK_THROWS_AS(exact_shapley(fn, {1.0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(exact_shapley(fn, {1.0}, {{1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("model explanations satisfy efficiency against the positive logit") {
  ArchSpec arch;
  arch.in_channels = 4;
  arch.input_len = 10;
  arch.stem_ch = 4;
  arch.stem_k = 3;
  arch.blocks = {{4, 3, 1}};
  Network net(arch);
  ModelCheckpoint ckpt;
  ckpt.arch = arch;
  ckpt.params = net.init_params(8);
  ckpt.running_stats = net.init_stats();
  ckpt.feature_names = {"a", "b", "c", "d"};

  Prng g(9);
  std::vector<double> window(static_cast<size_t>(arch.in_channels) * arch.input_len);
  for (auto& v : window) v = g.next_normal();
  std::vector<double> bg{0.0, 0.1, -0.1, 0.05};

  AttributionResult r = explain_window(ckpt, window, bg);
  double total = std::accumulate(r.phi.begin(), r.phi.end(), 0.0);
  CHECK(std::abs(total - (r.fx - r.base_value)) < 1e-9);

  // fx really is the positive-class logit of the unmasked window.
  auto stats = ckpt.running_stats;
  auto logits = net.forward(ckpt.params, stats, window, 1, false);
  CHECK(r.fx == doctest::Approx(logits[1]).epsilon(1e-12));
}

TEST_CASE("summary ranks features by mean |phi| and preserves the waterfall sum") {
  std::vector<AttributionResult> results;
  AttributionResult a;
  a.phi = {0.1, -0.5, 0.2};
  a.base_value = 1.0;
  a.fx = 0.8;
  AttributionResult b;
  b.phi = {0.0, 0.4, -0.1};
  b.base_value = 1.0;
  b.fx = 1.3;
  results = {a, b};
  AttributionSummary s = attribution_summary(results, {"x", "y", "z"}, 0);
  CHECK(s.ranking.front() == 1);  // mean |phi| = 0.45
  CHECK(s.ranking.back() == 0);   // mean |phi| = 0.05
  double wf = 0.0;
  for (const auto& [name, phi] : s.waterfall) wf += phi;
  CHECK(wf == doctest::Approx(a.fx - a.base_value));
}
