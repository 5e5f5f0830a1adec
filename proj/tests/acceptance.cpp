// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "repdyn/error.hpp"
#include "repdyn/imbalance.hpp"
#include "repdyn/lowlevel.hpp"
#include "repdyn/probes.hpp"
#include "repdyn/rng.hpp"
#include "repdyn/stats.hpp"
#include "repdyn/synth.hpp"
#include "oracles.hpp"

using namespace repdyn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("repdyn_accept_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "repdyn");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << "  cli failure (" << code << "): " << err.str();
  return code;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), dir).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

// 1
Outcome identity_law() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::size_t cases = 0;
  for (std::size_t n : {10, 100, 1000})
    for (std::size_t d : {2, 64})
      for (Metric metric : {Metric::euclidean, Metric::cosine}) {
        const auto a = gen_gaussian(n, d, derive_seed(1, {n, d}));
        worst = std::max(worst, std::abs(information_imbalance(a, a, metric) - 2.0 / double(n)));
        ++cases;
      }
  const double t = seconds_since(t0);
  return {worst <= 1e-12 && t < 5.0,
          std::to_string(cases) + " cases, max |delta - 2/N| = " + fmt(worst) + ", " + fmt(t) + " s (limit 5 s)"};
}

// 2
Outcome shuffle_law() {
  const auto t0 = Clock::now();
  double sum = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = gen_gaussian(1000, 16, derive_seed(2, {s}));
    sum += information_imbalance(a, gen_shuffled_copy(a, derive_seed(3, {s})), Metric::euclidean);
  }
  const double mean = sum / 20, t = seconds_since(t0);
  return {mean >= 0.95 && mean <= 1.05 && t < 10.0,
          "mean over 20 seeds = " + fmt(mean) + " (want [0.95, 1.05]), " + fmt(t) + " s (limit 10 s)"};
}

// 4
Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(4);
  std::size_t mismatches = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = 10 + rng.below(191), d = 1 + rng.below(8);
    const Metric metric = inst % 2 ? Metric::cosine : Metric::euclidean;
    const bool integer = inst % 4 < 2;  // integer coordinates produce exact ties
    auto make = [&](std::uint64_t seed) {
      Rng g(seed);
      std::vector<float> v(n * d);
      for (auto& x : v) x = integer ? float(int(g.below(7)) - 3) : float(g.normal());
      if (integer)
        for (std::size_t i = 0; i < n; ++i) v[i * d] = float(1 + i % 3);
      return EmbeddingMatrix(n, d, std::move(v));
    };
    const auto a = make(derive_seed(5, {std::uint64_t(inst)}));
    const auto b = make(derive_seed(6, {std::uint64_t(inst)}));
    const DistanceEngine engine(a, metric);
    for (std::size_t q = 0; q < n; ++q) {
      const auto expected = oracle::sorted_row(a, q, metric);
      const auto got = rank_array(engine, q);
      for (std::size_t r = 0; r < expected.size(); ++r) mismatches += got.ordered[r].index != expected[r].second;
      const auto knn = k_nearest(a, q, std::min<std::size_t>(10, n - 1), metric);
      for (std::size_t r = 0; r < knn.size(); ++r) mismatches += knn[r] != expected[r].second;
    }
    mismatches += information_imbalance(a, b, metric) != oracle::delta(a, b, metric);
    mismatches += information_imbalance(b, a, metric) != oracle::delta(b, a, metric);
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 30.0,
          "50 instances, " + std::to_string(mismatches) + " mismatches, " + fmt(t) + " s (limit 30 s)"};
}

// 5
Outcome asymmetry() {
  int wins = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = gen_gaussian(2000, 2, derive_seed(7, {s}));
    std::vector<float> proj(2000);
    for (std::size_t i = 0; i < 2000; ++i) proj[i] = a.row(i)[0];
    const EmbeddingMatrix b(2000, 1, std::move(proj));
    const auto r = imbalance_both(a, b, Metric::euclidean);
    wins += r.delta_ab < r.delta_ba;
  }
  return {wins >= 9, "full->projection smaller in " + std::to_string(wins) + "/10 seeds (want >= 9)"};
}

// 6
Outcome noise_monotonicity() {
  const std::vector<double> sigmas{0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2};
  int good = 0;
  double worst = 1;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = gen_gaussian(2000, 8, derive_seed(8, {s}));
    std::vector<double> deltas;
    for (double sigma : sigmas)
      deltas.push_back(information_imbalance(a, gen_noisy_copy(a, sigma, derive_seed(9, {s})), Metric::euclidean));
    const double rho = spearman(sigmas, deltas);
    worst = std::min(worst, rho);
    good += rho >= 0.9;
  }
  return {good == 10, std::to_string(good) + "/10 seeds with spearman >= 0.9, lowest " + fmt(worst)};
}

// 7
Outcome two_process() {
  int final_exact = 0, first_far = 0, distance_rule = 0;
  double lowest_first = 2;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto tp = gen_two_process(2000, derive_seed(10, {s}));
    const auto fin = imbalance_both(tp.a[2], tp.b[2], Metric::euclidean);
    final_exact += fin.delta_ab == 2.0 / 2000 && fin.delta_ba == 2.0 / 2000;
    const auto first = imbalance_both(tp.a[0], tp.b[0], Metric::euclidean);
    lowest_first = std::min({lowest_first, first.delta_ab, first.delta_ba});
    first_far += first.delta_ab >= 0.3 && first.delta_ba >= 0.3;
    bool rule = true;
    for (const auto* st : {&tp.a, &tp.b}) {
      const auto& l = *st;
      rule &= information_imbalance(l[0], l[1], Metric::euclidean) < information_imbalance(l[0], l[2], Metric::euclidean);
      rule &= information_imbalance(l[2], l[1], Metric::euclidean) < information_imbalance(l[2], l[0], Metric::euclidean);
    }
    distance_rule += rule;
  }
  return {final_exact == 10 && first_far >= 9 && distance_rule == 10,
          "final layers 2/n in " + std::to_string(final_exact) + "/10; first-layer >= 0.3 in " +
              std::to_string(first_far) + "/10 (lowest " + fmt(lowest_first) + "); distance rule in " +
              std::to_string(distance_rule) + "/10"};
}

// 8
Outcome smoothness_constants() {
  const std::vector<double> ramp{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1};
  const std::vector<double> half{0.0, 0.5, 0.0, 0.5, 0.0};
  const std::vector<double> tenth{0.2, 0.3, 0.2, 0.3, 0.2};
  const double r = smoothness(ramp), h = roughness(half), t = smoothness(tenth);
  return {r == 0.0 && h == 0.5 && t == 0.1 && roughness(ramp) == 0.0 && smoothness(half) == 0.5,
          "ramp " + fmt(r) + ", +-0.5 " + fmt(h) + ", +-0.1 " + fmt(t)};
}

// 9
Outcome lowlevel_fixtures() {
  ImageParams p;
  const auto flat = gen_synthetic_image(ImageKind::constant, 32, 32, p, 0);
  const bool flat_ok = edge_density(flat) == 0.0 && texture_complexity(flat) == 0.0;
  p.color = {255, 0, 0};
  const double red = color_warmth(gen_synthetic_image(ImageKind::solid_color, 16, 16, p, 0));
  p.color = {0, 0, 255};
  const double blue = color_warmth(gen_synthetic_image(ImageKind::solid_color, 16, 16, p, 0));
  const auto step = gen_synthetic_image(ImageKind::step_edge, 64, 64, {}, 0);
  const auto edges = canny_edges(step);
  std::size_t count = 0, outside = 0;
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      if (edges[y * 64 + x]) {
        ++count;
        outside += x < 31 || x > 32;  // boundary lies between columns 31 and 32
      }
  return {flat_ok && red == 255.0 && blue == -255.0 && count > 0 && outside == 0,
          std::string("constant image ") + (flat_ok ? "0/0" : "nonzero") + ", warmth " + fmt(red) + "/" + fmt(blue) +
              ", step edge " + std::to_string(count) + " edge pixels, " + std::to_string(outside) + " off-boundary"};
}

// 10
Outcome random_baseline_check() {
  std::vector<CategoryMask> disjoint;
  for (int c = 0; c < 9; ++c)
    for (int i = 0; i < 100; ++i) disjoint.push_back(static_cast<CategoryMask>(1u << c));
  BaselineOptions bo;
  bo.trials = 20;
  bo.seed = 10;
  const double mc = random_baseline(disjoint, bo);
  const double target = 99.0 / 899.0;

  // Three properties, three levels of 100 each; the first two properties overlap.
  std::vector<CategoryMask> overlap(900, 0);
  for (int level = 0; level < 3; ++level)
    for (int i = 0; i < 100; ++i) {
      overlap[100 * level + i] |= category_bit(Property::edges, static_cast<Level>(level));
      overlap[50 + 100 * level + i] |= category_bit(Property::warmth, static_cast<Level>(level));
      overlap[600 + 100 * level + i] |= category_bit(Property::texture, static_cast<Level>(level));
    }
  const double mc_overlap = random_baseline(overlap, bo);
  return {std::abs(mc - target) <= 0.005 && mc_overlap > mc && analytic_baseline(overlap) > analytic_baseline(disjoint),
          "disjoint MC " + fmt(100 * mc) + "% vs analytic " + fmt(100 * target) + "% (tolerance 0.5 pp); overlapping " +
              fmt(100 * mc_overlap) + "%"};
}

// 11
Outcome probe_separability() {
  auto gaussian_pair = [](std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(1000 * 10);
    std::vector<std::uint8_t> y(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
      y[i] = i % 2;
      for (std::size_t j = 0; j < 10; ++j) v[i * 10 + j] = float(rng.normal() + (j == 0 ? (y[i] ? 3.0 : -3.0) : 0.0));
    }
    return std::pair{EmbeddingMatrix(1000, 10, std::move(v)), y};
  };
  auto [x, y] = gaussian_pair(11);
  ProbeHyperparams hp;
  hp.seed = 11;
  const auto fit = train_probe(x, y, hp);
  const auto refit = train_probe(x, y, hp);
  std::vector<std::uint8_t> shuffled(y.size());
  const auto perm = random_permutation(y.size(), 12);
  for (std::size_t i = 0; i < y.size(); ++i) shuffled[i] = y[perm[i]];
  const auto null_fit = train_probe(x, shuffled, hp);
  const bool deterministic = refit.model == fit.model && refit.heldout_accuracy == fit.heldout_accuracy;
  return {fit.heldout_accuracy >= 0.99 && std::abs(null_fit.heldout_accuracy - 0.5) <= 0.1 && deterministic,
          "separated " + fmt(fit.heldout_accuracy) + ", shuffled " + fmt(null_fit.heldout_accuracy) +
              (deterministic ? ", rerun identical" : ", rerun differs")};
}

// 12
Outcome subsample_convergence() {
  const auto t0 = Clock::now();
  const auto a = gen_gaussian(20000, 8, 13);
  const auto b = gen_noisy_copy(a, 0.5, 14);
  const std::size_t sizes[] = {100, 10000};
  const auto stats = subsample_std(a, b, sizes, 10, Metric::euclidean, 15);
  return {stats[1].std < stats[0].std, "std at N=100 " + fmt(stats[0].std) + ", at N=10000 " + fmt(stats[1].std) +
                                           ", " + fmt(seconds_since(t0)) + " s"};
}

// 13
Outcome performance() {
  const unsigned cores = std::thread::hardware_concurrency();
  const auto a = gen_gaussian(10000, 1024, 16);
  const auto b = gen_noisy_copy(a, 0.5, 17);
  auto t0 = Clock::now();
  const auto r = imbalance_both(a, b, Metric::euclidean);
  const double pair_time = seconds_since(t0);

  const auto dir = scratch("perf");
  const std::string d = dir.string();
  bool ok = cli({"--n", "2000", "--seed", "1", "--out", d, "synth", "--kind", "drift", "--layers", "12", "--models", "2",
                 "--d", "128"}) == 0;
  t0 = Clock::now();
  ok &= cli({"--manifest", (dir / "manifest.json").string(), "--n", "2000", "--out", d, "imbalance", "--model-a", "m0",
             "--model-b", "m1", "--anchors", "all"}) == 0;
  const double grid_time = seconds_since(t0);
  fs::remove_all(dir);
  return {ok && pair_time < 60.0 && grid_time < 300.0 && r.delta_ab > 0,
          "N=10^4 d=1024 both directions " + fmt(pair_time) + " s (limit 60 s), 12x12 all-anchor grid " +
              fmt(grid_time) + " s (limit 300 s), on " + std::to_string(cores) + " hardware thread(s)"};
}

// 14
Outcome end_to_end_determinism() {
  const auto root = scratch("rerun");
  std::size_t compared = 0, differing = 0;
  std::vector<std::string> failed;
  for (int run = 0; run < 2; ++run) {
    const fs::path base = root / ("run" + std::to_string(run));
    auto dir = [&](const std::string& s) { return (base / s).string(); };
    auto m = [&](const std::string& s) { return (base / s / "manifest.json").string(); };
    bool ok = true;
    ok &= cli({"--n", "400", "--seed", "3", "--out", dir("tp"), "synth", "--kind", "two_process"}) == 0;
    ok &= cli({"--n", "300", "--seed", "3", "--out", dir("drift"), "synth", "--kind", "drift", "--layers", "5"}) == 0;
    ok &= cli({"--n", "300", "--seed", "3", "--out", dir("cl"), "synth", "--kind", "clusters", "--layers", "4"}) == 0;
    ok &= cli({"--n", "500", "--seed", "3", "--out", dir("noisy"), "synth", "--kind", "noisy", "--d", "6"}) == 0;
    ok &= cli({"--n", "120", "--seed", "3", "--out", dir("img"), "synth", "--kind", "images", "--group-size", "12"}) == 0;
    fs::create_directories(base / "ing");
    {
      std::ofstream csv(base / "ing" / "x.csv");
      for (int i = 0; i < 20; ++i) csv << i % 7 << ',' << (i * 3) % 5 << ',' << 0.25 * i << '\n';
      std::ofstream ids(base / "ing" / "ids.txt");
      for (int i = 0; i < 20; ++i) ids << "s" << i << '\n';
    }
    ok &= cli({"--manifest", m("ing"), "--out", dir("ing"), "ingest", "--input", (base / "ing" / "x.csv").string(),
               "--model", "x", "--layer", "0", "--layer-count", "1", "--image-ids", (base / "ing" / "ids.txt").string()}) == 0;
    ok &= cli({"--manifest", m("tp"), "--n", "300", "--seed", "4", "--out", dir("tp"), "imbalance", "--model-a", "A",
               "--model-b", "B"}) == 0;
    ok &= cli({"--manifest", m("drift"), "--out", dir("drift"), "neighbors", "--queries", "img000001,img000002"}) == 0;
    ok &= cli({"--manifest", m("img"), "--out", dir("img"), "--seed", "4", "lowlevel", "--images", dir("img") + "/images",
               "--group-size", "12", "--per-property", "--baseline-trials", "3"}) == 0;
    const std::string labels = (base / "cl" / "labels.json").string();
    ok &= cli({"--manifest", m("cl"), "--out", dir("cl"), "--seed", "4", "coherence", "--labels", labels, "--model",
               "clusters"}) == 0;
    ok &= cli({"--manifest", m("cl"), "--out", dir("cl") + "/bin", "--seed", "4", "probe", "--labels", labels,
               "--epochs", "40"}) == 0;
    ok &= cli({"--manifest", m("cl"), "--out", dir("cl") + "/multi", "--seed", "4", "probe", "--labels", labels,
               "--mode", "multiclass", "--epochs", "40"}) == 0;
    ok &= cli({"--manifest", m("noisy"), "--out", dir("noisy"), "--seed", "4", "subsample", "--model-a", "base",
               "--layer-a", "0", "--model-b", "noisy", "--layer-b", "0", "--sizes", "50,400", "--trials", "4"}) == 0;
    if (!ok) failed.push_back("run " + std::to_string(run));
  }
  const auto first = snapshot(root / "run0"), second = snapshot(root / "run1");
  for (const auto& [name, content] : first) {
    ++compared;
    auto it = second.find(name);
    if (it == second.end() || it->second != content) {
      ++differing;
      failed.push_back(name);
    }
  }
  fs::remove_all(root);
  std::string detail = std::to_string(compared) + " output files compared across 8 commands, " +
                       std::to_string(differing) + " differ";
  for (const auto& f : failed) detail += " [" + f + "]";
  return {failed.empty() && compared == second.size() && compared > 0, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "identity law", identity_law},
      {2, "shuffle law", shuffle_law},
      {4, "oracle equivalence", oracle_equivalence},
      {5, "asymmetry witness", asymmetry},
      {6, "noise monotonicity", noise_monotonicity},
      {7, "two-process experiment", two_process},
      {8, "smoothness and roughness constants", smoothness_constants},
      {9, "low-level fixtures", lowlevel_fixtures},
      {10, "random-placement baseline", random_baseline_check},
      {11, "probe separability", probe_separability},
      {12, "subsample convergence", subsample_convergence},
      {13, "performance", performance},
      {14, "end-to-end determinism", end_to_end_determinism},
  };

  std::map<int, Outcome> results;
  bool range_violation = false;
  std::string range_detail;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    try {
      results[c.id] = c.run();
    } catch (const std::logic_error& e) {
      if (std::string(e.what()).find("imbalance") != std::string::npos) {
        range_violation = true;
        range_detail = e.what();
      }
      results[c.id] = {false, std::string("exception: ") + e.what()};
    } catch (const std::exception& e) {
      results[c.id] = {false, std::string("exception: ") + e.what()};
    }
    results[c.id].detail += " [" + fmt(seconds_since(t0)) + " s]";
  }
  // Range law: reported last so it covers every value computed above.
  const auto checks = imbalance_range_checks();
  results[3] = {!range_violation && checks > 0,
                std::to_string(checks) + " imbalance values checked against [2/N, 2(N-1)/N]" +
                    (range_violation ? ", violation: " + range_detail : ", none outside")};

  std::map<int, const char*> names{{3, "range law"}};
  for (const auto& c : criteria) names[c.id] = c.name;
  bool all = true;
  for (const auto& [id, outcome] : results) {
    std::printf("CRITERION %2d %s  %s: %s\n", id, outcome.pass ? "PASS" : "FAIL", names[id], outcome.detail.c_str());
    all &= outcome.pass;
  }
  std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return all ? 0 : 1;
}
