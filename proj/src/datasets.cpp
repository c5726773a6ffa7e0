// Copyright 2026 The aggstab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "aggstab/datasets.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "aggstab/error.hpp"
#include "aggstab/rng.hpp"

namespace aggstab {
namespace {

struct PairHash {
  std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& p) const {
    return static_cast<std::size_t>(MixSeed(static_cast<std::uint64_t>(p.first) * 0x100000001b3ULL ^
                                            static_cast<std::uint64_t>(p.second)));
  }
};

bool ParseInt(const std::string& s, std::int64_t& out) {
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end == s.c_str() || *end != '\0') return false;
  out = v;
  return true;
}

bool ParseReal(const std::string& s, double& out) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) return false;
  out = v;
  return true;
}

// Ratings of one item, sorted by user id.
using ItemColumn = std::vector<std::pair<std::int64_t, double>>;

double Pearson(const ItemColumn& a, const ItemColumn& b, int min_common) {
  std::vector<double> ra, rb;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      ra.push_back(a[i].second);
      rb.push_back(b[j].second);
      ++i;
      ++j;
    }
  }
  if (static_cast<int>(ra.size()) < min_common) return 0.0;
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    const double da = ra[k] - ma, db = rb[k] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;  // constant ratings: correlation undefined
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

RatingsTable::RatingsTable(std::vector<Rating> entries) : entries_(std::move(entries)) {
  std::set<std::int64_t> users, items;
  std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::size_t, PairHash> seen;
  seen.reserve(entries_.size());
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const Rating& r = entries_[k];
    if (!(r.rating >= 1.0 && r.rating <= 5.0)) {
      FailData("rating " + std::to_string(r.rating) + " outside [1,5]");
    }
    if (!seen.emplace(std::make_pair(r.user, r.item), k).second) {
      FailData("duplicate rating for user " + std::to_string(r.user) + ", item " +
               std::to_string(r.item));
    }
    users.insert(r.user);
    items.insert(r.item);
  }
  user_count_ = static_cast<int>(users.size());
  item_count_ = static_cast<int>(items.size());
}

RatingsTable ParseMovieLensText(const std::string& text) {
  std::vector<Rating> entries;
  std::istringstream in(text);
  std::string line;
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string u, i, r, t, extra;
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (!(fields >> u >> i >> r >> t) || (fields >> extra)) {
      Fail(where + "expected 4 fields 'user item rating timestamp'");
    }
    Rating rating;
    if (!ParseInt(u, rating.user) || !ParseInt(i, rating.item) || !ParseReal(r, rating.rating) ||
        !ParseInt(t, rating.timestamp)) {
      Fail(where + "malformed field");
    }
    if (!(rating.rating >= 1.0 && rating.rating <= 5.0)) {
      Fail(where + "rating " + r + " out of range [1,5]");
    }
    if (!seen.emplace(rating.user, rating.item).second) {
      Fail(where + "duplicate (user, item) pair");
    }
    entries.push_back(rating);
  }
  return RatingsTable(std::move(entries));
}

RatingsTable ParseMovieLens(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail("cannot open ratings file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseMovieLensText(buf.str());
}

std::string SerializeMovieLens(const RatingsTable& table) {
  std::string out;
  char buf[128];
  for (const Rating& r : table.entries()) {
    std::snprintf(buf, sizeof(buf), "%lld\t%lld\t%.17g\t%lld\n", static_cast<long long>(r.user),
                  static_cast<long long>(r.item), r.rating, static_cast<long long>(r.timestamp));
    out += buf;
  }
  return out;
}

void SimilarityGraphConfig::Validate() const {
  if (min_common < 2) Fail("min_common must be >= 2");
  if (top_k && *top_k < 1) Fail("top_k must be >= 1");
}

Graph PearsonSimilarityGraph(const RatingsTable& table, const std::vector<std::int64_t>& movies,
                             const SimilarityGraphConfig& cfg) {
  cfg.Validate();
  if (movies.empty()) Fail("movie list is empty");
  std::map<std::int64_t, ItemColumn> columns;
  for (std::int64_t m : movies) columns[m];
  if (columns.size() != movies.size()) Fail("movie list has duplicates");
  for (const Rating& r : table.entries()) {
    auto it = columns.find(r.item);
    if (it != columns.end()) it->second.emplace_back(r.user, r.rating);
  }
  for (auto& [id, col] : columns) {
    if (col.empty()) FailData("movie " + std::to_string(id) + " is absent from the ratings table");
    std::sort(col.begin(), col.end());
  }

  const int n = static_cast<int>(movies.size());
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double r = Pearson(columns[movies[i]], columns[movies[j]], cfg.min_common);
      r = cfg.negative_policy == NegativePolicy::kZero ? std::max(r, 0.0) : std::abs(r);
      w(i, j) = w(j, i) = r;
    }
  }

  if (cfg.top_k && *cfg.top_k < n - 1) {
    Matrix kept = Matrix::Zero(n, n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w(i, a) > w(i, b); });
      int taken = 0;
      for (int j : order) {
        if (taken == *cfg.top_k) break;
        if (j == i || w(i, j) <= 0.0) continue;
        kept(i, j) = w(i, j);
        ++taken;
      }
    }
    w = kept.cwiseMax(kept.transpose());
  }

  std::vector<std::string> labels;
  for (std::int64_t m : movies) labels.push_back(std::to_string(m));
  return BuildShiftFromAdjacency(w, Normalization::kNone, std::move(labels));
}

std::vector<std::int64_t> MostRatedItems(const RatingsTable& table, int count) {
  std::map<std::int64_t, int> counts;
  for (const Rating& r : table.entries()) ++counts[r.item];
  std::vector<std::pair<std::int64_t, int>> v(counts.begin(), counts.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::int64_t> out;
  for (int k = 0; k < count && k < static_cast<int>(v.size()); ++k) out.push_back(v[k].first);
  return out;
}

void RegressionTask::Validate() const {
  const int n = graph.n();
  for (const Sample& s : samples) {
    if (s.input.size() != n) Fail("sample signal length does not match the graph");
    if (!s.input.allFinite() || !std::isfinite(s.target)) Fail("sample has non-finite values");
    for (int m : s.mask)
      if (m < 0 || m >= n) Fail("sample mask index out of range");
  }
  std::vector<char> used(samples.size(), 0);
  for (const auto* split : {&train, &test}) {
    for (int idx : *split) {
      if (idx < 0 || idx >= static_cast<int>(samples.size()) || used[idx]) {
        Fail("train/test split is not a partition of the samples");
      }
      used[idx] = 1;
    }
  }
  if (std::find(used.begin(), used.end(), 0) != used.end()) {
    Fail("train/test split does not cover every sample");
  }
}

void SplitTrainTest(RegressionTask& task, std::uint64_t seed) {
  const int n = static_cast<int>(task.samples.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(seed, {0x5711}));
  std::shuffle(order.begin(), order.end(), rng);
  const int train = (9 * n + 9) / 10;
  task.train.assign(order.begin(), order.begin() + train);
  task.test.assign(order.begin() + train, order.end());
}

RegressionTask BuildRatingTask(const RatingsTable& table, const Graph& graph,
                               std::int64_t target_item, int min_ratings_per_user,
                               std::uint64_t seed) {
  const int target_node = graph.FindLabel(std::to_string(target_item));
  if (target_node < 0) Fail("target item " + std::to_string(target_item) + " is not a graph node");
  std::unordered_map<std::string, int> node_of;
  for (int i = 0; i < graph.n(); ++i) node_of[graph.labels()[i]] = i;

  std::map<std::int64_t, std::vector<const Rating*>> by_user;
  for (const Rating& r : table.entries()) by_user[r.user].push_back(&r);

  RegressionTask task;
  task.graph = graph;
  for (const auto& [user, ratings] : by_user) {
    if (static_cast<int>(ratings.size()) < min_ratings_per_user) continue;
    Sample sample;
    sample.input = Signal::Zero(graph.n());
    bool rated_target = false;
    for (const Rating* r : ratings) {
      if (r->item == target_item) {
        rated_target = true;
        sample.target = r->rating;
        continue;
      }
      auto it = node_of.find(std::to_string(r->item));
      if (it != node_of.end()) sample.input(it->second) = r->rating;
    }
    if (!rated_target) continue;
    sample.mask = {target_node};
    task.samples.push_back(std::move(sample));
  }
  if (task.samples.empty()) {
    FailData("no qualifying user rated target item " + std::to_string(target_item));
  }
  SplitTrainTest(task, seed);
  return task;
}

RegressionTask SyntheticSourceLocalization(const Graph& graph, int diffusion_steps, int samples,
                                           std::uint64_t seed) {
  if (diffusion_steps < 0) Fail("diffusion_steps must be >= 0");
  if (samples < 1) Fail("samples must be >= 1");
  const int n = graph.n();
  Rng rng(seed);
  std::uniform_int_distribution<int> source(0, n - 1);
  std::uniform_int_distribution<int> steps(0, diffusion_steps);
  RegressionTask task;
  task.graph = graph;
  for (int k = 0; k < samples; ++k) {
    const int s = source(rng);
    const int t = steps(rng);
    Signal x = Signal::Zero(n);
    x(s) = 1.0;
    for (int step = 0; step < t; ++step) x = graph.shift() * x;
    task.samples.push_back({std::move(x), static_cast<double>(s), {}});
  }
  SplitTrainTest(task, seed);
  return task;
}

}  // namespace aggstab
