#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "doq/model.hpp"
#include "doq/rng.hpp"
#include "support/oracles.hpp"

using namespace doq;

namespace {

CMatrix make_matrix(std::size_t rows, std::size_t cols,
                    std::initializer_list<std::complex<double>> entries) {
  CMatrix h(rows, cols);
  std::copy(entries.begin(), entries.end(), h.data.begin());
  return h;
}

}  // namespace

TEST_CASE("multi-band EE matches direct term-by-term evaluation") {
  const MultiBandEEConfig cfg{2, 1.0, 10.0};
  const double got = eval_multiband_ee(PowerVector{{2.0, 3.0}}, {1.0, 2.0}, cfg);
  const double expected = (std::exp(-5.0) + std::exp(-5.0 / 3.0)) / 5.0;  // 0.0391227
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  CHECK(got == doctest::Approx(0.0391227).epsilon(1e-5));
}

TEST_CASE("multi-band EE: zero-power bands contribute nothing") {
  const MultiBandEEConfig cfg{2, 0.0, 10.0};
  CHECK(eval_multiband_ee(PowerVector{{2.0, 0.0}}, {1.0, 5.0}, cfg) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("multi-band EE: single band closed form") {
  const MultiBandEEConfig cfg{1, 1.0, 10.0};
  CHECK(eval_multiband_ee(PowerVector{{2.0}}, {5.0}, cfg) ==
        doctest::Approx(std::exp(-1.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("multi-band EE error paths") {
  const MultiBandEEConfig cfg{2, 1.0, 10.0};
  CHECK_THROWS_AS(eval_multiband_ee(PowerVector{{0.0, 0.0}}, {1.0, 2.0}, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(eval_multiband_ee(PowerVector{{1.0, 1.0}}, {1.0, 0.0}, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(eval_multiband_ee(PowerVector{{1.0}}, {1.0, 1.0}, cfg), std::invalid_argument);
}

TEST_CASE("multi-band EE depends on (p_i*g_i, sum p) only: joint band permutation") {
  Rng rng(11);
  const MultiBandEEConfig cfg{3, 1.3, 7.0};
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> p(3), g(3);
    for (auto& v : p) v = rng.uniform(0.1, 5.0);
    for (auto& v : g) v = rng.uniform(0.05, 4.0);
    const double base = eval_multiband_ee(PowerVector{p}, g, cfg);

    std::vector<std::size_t> perm{2, 0, 1};
    std::vector<double> pp(3), gp(3);
    for (std::size_t i = 0; i < 3; ++i) {
      pp[i] = p[perm[i]];
      gp[i] = g[perm[i]];
    }
    CHECK(eval_multiband_ee(PowerVector{pp}, gp, cfg) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("sum rate matches direct evaluation and handles idle bands") {
  const SumRateConfig cfg{2, 10.0, 5.0};
  CHECK(eval_sum_rate(PowerVector{{2.0, 3.0}}, {1.0, 2.0}, cfg) ==
        doctest::Approx(std::log(1.2) + std::log(1.6)).epsilon(1e-12));
  CHECK(eval_sum_rate(PowerVector{{0.0, 0.0}}, {1.0, 2.0}, cfg) == 0.0);
  CHECK(eval_sum_rate(PowerVector{{5.0, 0.0}}, {2.0, 1.0}, cfg) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(eval_sum_rate(PowerVector{{-1.0, 1.0}}, {1.0, 2.0}, cfg),
                  std::invalid_argument);
}

TEST_CASE("sum rate is monotone in powers and gains") {
  Rng rng(13);
  const SumRateConfig cfg{2, 10.0, 5.0};
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> p{rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0)};
    std::vector<double> g{rng.uniform(0.05, 4.0), rng.uniform(0.05, 4.0)};
    const double base = eval_sum_rate(PowerVector{p}, g, cfg);
    auto p_up = p;
    p_up[rep % 2] += rng.uniform(0.0, 2.0);
    CHECK(eval_sum_rate(PowerVector{p_up}, g, cfg) >= base);
    auto g_up = g;
    g_up[rep % 2] += rng.uniform(0.0, 2.0);
    CHECK(eval_sum_rate(PowerVector{p}, g_up, cfg) >= base);
  }
}

TEST_CASE("MIMO EE: scalar reduction") {
  const MimoEEConfig cfg{2, 1, 1e6, 5.0, 10.0, 12.0};
  const CMatrix h = make_matrix(1, 2, {1.0, 0.0});
  const EgtDecision d{12.0, {1, 0}};
  const double expected = 1e6 * std::log2(1.0 + 0.2 * 12.0) / 22.0;  // 80251.6
  CHECK(eval_mimo_ee(d, h, cfg) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(eval_mimo_ee(d, h, cfg) == doctest::Approx(80251.5).epsilon(1e-4));
}

TEST_CASE("MIMO EE: zero channel gives zero utility") {
  const MimoEEConfig cfg{3, 2, 1e6, 5.0, 10.0, 10.0};
  const CMatrix h(2, 3);
  CHECK(eval_mimo_ee(EgtDecision{10.0, {1, 1, 0}}, h, cfg) == 0.0);
}

TEST_CASE("MIMO EE: rank-one identity for a single receive antenna") {
  Rng rng(7);
  const MimoEEConfig cfg{4, 1, 1e6, 5.0, 10.0, 12.0};
  for (int rep = 0; rep < 100; ++rep) {
    CMatrix h(1, 4);
    for (auto& z : h.data) z = rng.complex_normal_unit();
    std::vector<std::uint8_t> mask(4, 0);
    int l = 0;
    for (auto& b : mask) {
      b = rng.below(2) ? 1 : 0;
      l += b;
    }
    if (l == 0) {
      mask[0] = 1;
      l = 1;
    }
    const EgtDecision d{12.0, mask};
    double sum_h2 = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      if (mask[i]) sum_h2 += std::norm(h(0, i));
    }
    const double expected =
        1e6 * std::log2(1.0 + (12.0 / l) * sum_h2 / 5.0) / (12.0 + 10.0);
    CHECK(eval_mimo_ee(d, h, cfg) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("MIMO EE: Cholesky route matches the eigenvalue oracle") {
  Rng rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const int nr = 1 + static_cast<int>(rng.below(3));
    const int nt = 1 + static_cast<int>(rng.below(4));
    MimoEEConfig cfg{nt, nr, 1e6, 5.0, 10.0, 12.0};
    CMatrix h(static_cast<std::size_t>(nr), static_cast<std::size_t>(nt));
    for (auto& z : h.data) z = rng.complex_normal_unit();
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(nt), 0);
    mask[rng.below(static_cast<std::uint64_t>(nt))] = 1;
    for (auto& b : mask) {
      if (!b && rng.below(2)) b = 1;
    }
    const EgtDecision d{12.0, mask};
    const double fast = eval_mimo_ee(d, h, cfg);
    const double oracle = testing::mimo_ee_eigen_oracle(d, h, cfg);
    CHECK(fast == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("MIMO EE error paths") {
  const MimoEEConfig cfg{2, 1, 1e6, 5.0, 10.0, 12.0};
  const CMatrix h = make_matrix(1, 2, {1.0, 1.0});
  CHECK_THROWS_AS(eval_mimo_ee(EgtDecision{13.0, {1, 0}}, h, cfg), std::invalid_argument);
  CHECK_THROWS_AS(eval_mimo_ee(EgtDecision{12.0, {1, 0, 0}}, h, cfg), std::invalid_argument);
  CHECK_THROWS_AS(eval_mimo_ee(EgtDecision{12.0, {0, 0}}, h, cfg), std::invalid_argument);
  const CMatrix wrong(2, 2);
  CHECK_THROWS_AS(eval_mimo_ee(EgtDecision{12.0, {1, 0}}, wrong, cfg), std::invalid_argument);
}

TEST_CASE("MIMO EE is invariant under matched column/mask permutations") {
  Rng rng(23);
  const MimoEEConfig cfg{3, 2, 1e6, 5.0, 10.0, 10.0};
  const std::vector<std::size_t> perm{2, 0, 1};
  for (int rep = 0; rep < 100; ++rep) {
    CMatrix h(2, 3);
    for (auto& z : h.data) z = rng.complex_normal_unit();
    std::vector<std::uint8_t> mask{1, 0, 1};
    const double base = eval_mimo_ee(EgtDecision{10.0, mask}, h, cfg);

    CMatrix hp(2, 3);
    std::vector<std::uint8_t> mp(3);
    for (std::size_t j = 0; j < 3; ++j) {
      mp[j] = mask[perm[j]];
      for (std::size_t i = 0; i < 2; ++i) hp(i, j) = h(i, perm[j]);
    }
    CHECK(eval_mimo_ee(EgtDecision{10.0, mp}, hp, cfg) ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("sampling is deterministic and matches the declared distributions") {
  const ParameterSampler sampler{ExponentialGains{2}, 424242};
  const SampleSet a = sample_params(sampler, 1000);
  const SampleSet b = sample_params(sampler, 1000);
  REQUIRE(a.size() == 1000);
  CHECK(a.features == b.features);
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(std::get<std::vector<double>>(a.params[t]) ==
          std::get<std::vector<double>>(b.params[t]));
  }

  const SampleSet big = sample_params(sampler, 100000);
  double mean0 = 0.0, mean1 = 0.0;
  for (const auto& f : big.features) {
    CHECK(f[0] > 0.0);  // exponential gains are strictly positive
    CHECK(f[1] > 0.0);
    mean0 += f[0];
    mean1 += f[1];
  }
  mean0 /= static_cast<double>(big.size());
  mean1 /= static_cast<double>(big.size());
  CHECK(mean0 > 0.99);
  CHECK(mean0 < 1.01);
  CHECK(mean1 > 0.99);
  CHECK(mean1 < 1.01);
}

TEST_CASE("complex Gaussian entries have unit second moment") {
  const ParameterSampler sampler{ComplexGaussianMatrix{2, 3}, 99};
  const SampleSet set = sample_params(sampler, 100000);
  std::vector<double> second_moment(6, 0.0);
  for (const auto& p : set.params) {
    const auto& h = std::get<CMatrix>(p);
    for (std::size_t k = 0; k < 6; ++k) second_moment[k] += std::norm(h.data[k]);
  }
  for (double& m : second_moment) {
    m /= static_cast<double>(set.size());
    CHECK(m > 0.98);
    CHECK(m < 1.02);
  }
}

TEST_CASE("feature encoding: identity on gains, row-major (Re, Im) on matrices") {
  CHECK(encode_features(Parameter{std::vector<double>{1.5, 0.2}}) ==
        std::vector<double>{1.5, 0.2});
  CHECK(encode_features(Parameter{make_matrix(1, 1, {{1.0, 2.0}})}) ==
        std::vector<double>{1.0, 2.0});
  CHECK(encode_features(Parameter{make_matrix(1, 2, {{0.0, 1.0}, {3.0, 0.0}})}) ==
        std::vector<double>{0.0, 1.0, 3.0, 0.0});
}

TEST_CASE("feature decoding inverts encoding") {
  Rng rng(5);
  CMatrix h(2, 3);
  for (auto& z : h.data) z = rng.complex_normal_unit();
  const Parameter p{h};
  const Parameter back = decode_features(encode_features(p), p);
  CHECK(std::get<CMatrix>(back) == h);

  const Parameter gains{std::vector<double>{0.3, 0.7}};
  CHECK(std::get<std::vector<double>>(decode_features(encode_features(gains), gains)) ==
        std::get<std::vector<double>>(gains));
}

TEST_CASE("EGT decision set enumeration: count, order, traces") {
  const MimoEEConfig cfg{2, 1, 1e6, 5.0, 10.0, 12.0};
  const DecisionSet d = build_egt_decision_set(cfg, 4.0);
  REQUIRE(d.size() == 3);
  CHECK(decision_embedding(d[0]) == std::vector<double>{4.0, 0.0});
  CHECK(decision_embedding(d[1]) == std::vector<double>{0.0, 4.0});
  CHECK(decision_embedding(d[2]) == std::vector<double>{2.0, 2.0});
  validate_decision_set(d);

  const MimoEEConfig single{1, 1, 1e6, 5.0, 10.0, 12.0};
  const DecisionSet d1 = build_egt_decision_set(single, 3.0);
  REQUIRE(d1.size() == 1);
  CHECK(decision_embedding(d1[0]) == std::vector<double>{3.0});

  for (int nt = 1; nt <= 5; ++nt) {
    MimoEEConfig c{nt, 1, 1e6, 5.0, 10.0, 12.0};
    const DecisionSet set = build_egt_decision_set(c, 7.5);
    CHECK(set.size() == (std::size_t{1} << nt) - 1);
    for (const auto& dec : set.decisions) {
      double trace = 0.0;
      for (double v : decision_embedding(dec)) trace += v;
      CHECK(trace == doctest::Approx(7.5).epsilon(1e-12));
    }
    validate_decision_set(set);
  }
}

TEST_CASE("nested decision chains: nesting, exhaustion, determinism") {
  const MimoEEConfig cfg{4, 1, 1e6, 5.0, 10.0, 12.0};
  const DecisionSet full = build_egt_decision_set(cfg, 12.0);
  const auto chain = grow_nested_decision_sets(full, full.size(), 31);
  REQUIRE(chain.size() == full.size());
  for (std::size_t k = 0; k < chain.size(); ++k) {
    CHECK(chain[k].size() == k + 1);
    if (k > 0) {
      for (std::size_t i = 0; i < chain[k - 1].size(); ++i) {
        CHECK(chain[k][i] == chain[k - 1][i]);  // prefix nesting
      }
    }
  }
  // final set equals the full set as a set
  std::set<std::vector<double>> want, got;
  for (const auto& dec : full.decisions) want.insert(decision_embedding(dec));
  for (const auto& dec : chain.back().decisions) got.insert(decision_embedding(dec));
  CHECK(want == got);

  const auto chain2 = grow_nested_decision_sets(full, full.size(), 31);
  for (std::size_t k = 0; k < chain.size(); ++k) {
    for (std::size_t i = 0; i <= k; ++i) CHECK(chain[k][i] == chain2[k][i]);
  }
  CHECK_THROWS_AS(grow_nested_decision_sets(full, full.size() + 1, 31), std::invalid_argument);
}

TEST_CASE("find_pstar: singleton grid and tie-to-smaller rule") {
  const MimoEEConfig cfg{2, 1, 1e6, 5.0, 10.0, 12.0};
  const SampleSet samples = sample_params({ComplexGaussianMatrix{1, 2}, 3}, 100);
  CHECK(find_pstar(cfg, {10.0}, samples) == 10.0);
  CHECK_THROWS_AS(find_pstar(cfg, {}, samples), std::invalid_argument);
}

TEST_CASE("find_pstar reproduces the reported MISO and MIMO budgets") {
  // MISO 4x1, sigma2 = 5 mW, P0 = 10 mW: the best budget is near 12 mW.
  {
    const MimoEEConfig cfg{4, 1, 1e6, 5.0, 10.0, 20.0};
    const SampleSet samples = sample_params({ComplexGaussianMatrix{1, 4}, 2024}, 20000);
    const double pstar = find_pstar(cfg, default_pstar_grid(cfg), samples);
    CHECK(pstar >= 10.0);
    CHECK(pstar <= 14.0);
  }
  // MIMO 3x2, same protocol: near 10 mW.
  {
    const MimoEEConfig cfg{3, 2, 1e6, 5.0, 10.0, 20.0};
    const SampleSet samples = sample_params({ComplexGaussianMatrix{2, 3}, 2025}, 10000);
    const double pstar = find_pstar(cfg, default_pstar_grid(cfg), samples);
    CHECK(pstar >= 8.0);
    CHECK(pstar <= 12.0);
  }
}

TEST_CASE("simplex projection: feasibility and fixed points") {
  const auto p = project_to_simplex({3.0, -1.0, 0.5}, 2.0);
  double sum = 0.0;
  for (double v : p) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(2.0).epsilon(1e-12));

  const auto q = project_to_simplex({0.5, 1.5}, 2.0);  // already feasible
  CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("utility model dispatch rejects mismatched kinds") {
  const UtilityModel mb{MultiBandEEConfig{2, 1.0, 10.0}};
  CHECK_THROWS_AS(mb.evaluate(EgtDecision{1.0, {1, 0}}, Parameter{std::vector<double>{1.0, 2.0}}),
                  std::invalid_argument);
  const UtilityModel mimo{MimoEEConfig{2, 1, 1e6, 5.0, 10.0, 12.0}};
  CHECK_THROWS_AS(mimo.evaluate(PowerVector{{1.0, 1.0}}, Parameter{std::vector<double>{1.0, 2.0}}),
                  std::invalid_argument);
  CHECK(mb.parameter_dim() == 2);
  CHECK(mimo.parameter_dim() == 4);
  const UtilityModel nsd{NegSquaredDistanceConfig{2}};
  CHECK(nsd.evaluate(PowerVector{{1.0, 2.0}}, Parameter{std::vector<double>{1.0, 1.0}}) ==
        doctest::Approx(-1.0).epsilon(1e-15));
}
