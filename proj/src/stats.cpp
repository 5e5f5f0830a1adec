#include "repdyn/stats.hpp"

#include <algorithm>
#include <boost/multiprecision/cpp_dec_float.hpp>
#include <charconv>
#include <cmath>
#include <numeric>
#include <string>
#include <system_error>

#include "repdyn/error.hpp"

namespace repdyn {

namespace {

using Decimal = boost::multiprecision::cpp_dec_float_50;

Decimal to_decimal(double v) {
  if (!std::isfinite(v)) throw UsageError("statistic input must be finite");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return Decimal(std::string(buf, res.ptr));
}

double to_double(const Decimal& d) {
  const std::string s = d.str(40, std::ios_base::scientific);
  double out = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc{}) throw std::logic_error("decimal conversion failed: " + s);
  return out;
}

double decimal_std(const std::vector<Decimal>& xs) {
  // n*sum(x^2) - sum(x)^2 is exact for short decimal inputs, so equal values give exactly zero.
  const auto n = static_cast<long long>(xs.size());
  Decimal sum = 0, sq = 0;
  for (const auto& x : xs) {
    sum += x;
    sq += x * x;
  }
  const Decimal ss = sq * n - sum * sum;
  if (ss <= 0) return 0.0;
  return to_double(boost::multiprecision::sqrt(ss) / n);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double population_std(std::span<const double> values) {
  if (values.empty()) throw UsageError("standard deviation of an empty sample");
  std::vector<Decimal> xs;
  xs.reserve(values.size());
  for (double v : values) xs.push_back(to_decimal(v));
  return decimal_std(xs);
}

double consecutive_difference_std(std::span<const double> series) {
  if (series.size() < 3)
    throw UsageError("series needs at least 3 values, got " + std::to_string(series.size()));
  std::vector<Decimal> diffs;
  diffs.reserve(series.size() - 1);
  Decimal prev = to_decimal(series[0]);
  for (std::size_t i = 1; i < series.size(); ++i) {
    Decimal cur = to_decimal(series[i]);
    diffs.push_back(cur - prev);
    prev = cur;
  }
  return decimal_std(diffs);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw UsageError("mean of an empty sample");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("spearman needs two equal series of length >= 2");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = mean(rx), my = mean(ry);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace repdyn
