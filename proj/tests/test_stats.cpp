#include <cmath>
#include <vector>

#include "doctest.h"
#include "repdyn/stats.hpp"

using namespace repdyn;

TEST_CASE("population std") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(population_std(v) == 2.0);
  const std::vector<double> one{3.5};
  CHECK(population_std(one) == 0.0);
}

TEST_CASE("consecutive difference std constants") {
  const std::vector<double> ramp{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1};
  CHECK(consecutive_difference_std(ramp) == 0.0);

  const std::vector<double> half{0.0, 0.5, 0.0, 0.5, 0.0};
  CHECK(consecutive_difference_std(half) == 0.5);

  const std::vector<double> tenth{0.2, 0.3, 0.2, 0.3, 0.2, 0.3, 0.2};
  CHECK(consecutive_difference_std(tenth) == 0.1);

  const std::vector<double> flat{0.7, 0.7, 0.7};
  CHECK(consecutive_difference_std(flat) == 0.0);

  const std::vector<double> two{0.1, 0.2};
  CHECK_THROWS(consecutive_difference_std(two));
}

TEST_CASE("consecutive difference std against direct evaluation") {
  const std::vector<double> s{0.61, 0.64, 0.72, 0.70, 0.81, 0.83};
  std::vector<double> d;
  for (std::size_t i = 1; i < s.size(); ++i) d.push_back(s[i] - s[i - 1]);
  double mu = 0;
  for (double x : d) mu += x;
  mu /= double(d.size());
  double v = 0;
  for (double x : d) v += (x - mu) * (x - mu);
  CHECK(consecutive_difference_std(s) == doctest::Approx(std::sqrt(v / double(d.size()))).epsilon(1e-12));
}

TEST_CASE("spearman with average ranks") {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{5, 6, 7, 8, 7};
  CHECK(spearman(x, y) == doctest::Approx(0.8207826816681233).epsilon(1e-14));
  const std::vector<double> rev{5, 4, 3, 2, 1};
  CHECK(spearman(x, rev) == doctest::Approx(-1.0));
  CHECK(spearman(x, x) == doctest::Approx(1.0));
}

TEST_CASE("mean") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(mean(v) == 2.5);
}
