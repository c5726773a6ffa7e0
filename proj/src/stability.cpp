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

#include "aggstab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include "json.hpp"

#include "aggstab/error.hpp"
#include "aggstab/rng.hpp"

namespace aggstab {
namespace {

double FeatureDistance(const NodeFeatures& a, const NodeFeatures& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]).squaredNorm();
  return std::sqrt(sq);
}

// Every eigenvalue of m must fall in [lo, hi] (real part) and within the
// interval's radius (modulus).
void CheckCoverage(const Matrix& m, const LipschitzEstimate& est, const char* what) {
  const double radius = std::max(std::abs(est.omega_lo), std::abs(est.omega_hi));
  const double tol = 1e-12 * (1.0 + radius);
  Eigen::EigenSolver<Matrix> solver(m, false);
  if (solver.info() != Eigen::Success) FailNumeric("eigensolver failed during coverage check");
  for (const auto& mu : solver.eigenvalues()) {
    if (mu.real() < est.omega_lo - tol || mu.real() > est.omega_hi + tol ||
        std::abs(mu) > radius + tol) {
      std::ostringstream os;
      os.precision(17);
      os << "omega [" << est.omega_lo << ", " << est.omega_hi << "] does not cover eigenvalue "
         << mu.real() << (mu.imag() >= 0 ? "+" : "") << mu.imag() << "i of " << what;
      FailNumeric(os.str());
    }
  }
}

double Median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::string FormatReal(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const char* ToString(BoundLayer v) {
  return v == BoundLayer::kFirstLayer ? "first_layer" : "full_network";
}

BoundLayer ParseBoundLayer(const std::string& s) {
  if (s == "first_layer") return BoundLayer::kFirstLayer;
  if (s == "full_network") return BoundLayer::kFullNetwork;
  Fail("unknown bound_layer '" + s + "'");
}

void SweepConfig::Validate() const {
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    if (!std::isfinite(epsilons[k]) || epsilons[k] < 0.0) Fail("epsilons must be finite and >= 0");
    if (k > 0 && epsilons[k] < epsilons[k - 1]) Fail("epsilons must be sorted ascending");
  }
  if (trials < 1) Fail("trials must be >= 1");
  if (probe_signals < 1) Fail("probe_signals must be >= 1");
  if (threads < 1) Fail("threads must be >= 1");
}

std::vector<Signal> RandomProbes(int n, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Signal> probes;
  probes.reserve(count);
  for (int k = 0; k < count; ++k) {
    Signal x(n);
    do {
      for (int i = 0; i < n; ++i) x(i) = normal(rng);
    } while (x.norm() == 0.0);
    probes.push_back(x / x.norm());
  }
  return probes;
}

double OutputDifference(const AggGnnModel& model, const Matrix& s, const Matrix& s_tilde,
                        const std::vector<Signal>& probes, BoundLayer layer) {
  if (s.rows() != s_tilde.rows() || s.cols() != s_tilde.cols()) Fail("shift size mismatch");
  double worst = 0.0;
  for (const Signal& x : probes) {
    if (x.size() != s.rows()) Fail("probe length does not match the graph");
    const double norm = x.norm();
    if (norm == 0.0) Fail("probe signals must be nonzero");
    double diff = 0.0;
    if (layer == BoundLayer::kFirstLayer) {
      diff = FeatureDistance(model.FirstLayerOutput(s, x), model.FirstLayerOutput(s_tilde, x));
    } else {
      diff = (model.Forward(s, x).per_node - model.Forward(s_tilde, x).per_node).norm();
    }
    worst = std::max(worst, diff / norm);
  }
  return worst;
}

std::pair<double, double> SplitEpsilon(PerturbationKind kind, double epsilon) {
  switch (kind) {
    case PerturbationKind::kAdditive: return {epsilon, 0.0};
    case PerturbationKind::kMultiplicative: return {0.0, epsilon};
    case PerturbationKind::kMixed: return {0.5 * epsilon, 0.5 * epsilon};
  }
  return {0.0, 0.0};
}

std::vector<double> BoundMultipliers(const AggGnnModel& model, BoundLayer layer) {
  std::vector<double> out;
  const int f1 = model.layer(0).features_out;
  if (f1 > 1) out.push_back(std::sqrt(static_cast<double>(f1)));
  if (layer == BoundLayer::kFullNetwork) {
    for (int l = 1; l < model.num_layers(); ++l) out.push_back(SpectralNorm(model.LayerOperatorMatrix(l)));
  }
  return out;
}

std::vector<StabilityRecord> RunSweep(const AggGnnModel& model, const Graph& graph,
                                      const SweepConfig& cfg, const LipschitzEstimate& estimate) {
  cfg.Validate();
  CheckCoverage(graph.shift(), estimate, "S");
  const std::vector<double> multipliers = BoundMultipliers(model, cfg.bound_layer);
  const std::size_t total = cfg.epsilons.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<StabilityRecord> records(total);
  std::vector<std::exception_ptr> errors(total);

  auto run_one = [&](std::size_t k) {
    try {
      const std::size_t e = k / cfg.trials;
      const int trial = static_cast<int>(k % cfg.trials);
      const double eps = cfg.epsilons[e];
      const std::uint64_t trial_seed = DeriveSeed(cfg.seed, {e, static_cast<std::uint64_t>(trial)});
      const auto [t0, t1] = SplitEpsilon(cfg.kind, eps);
      const PerturbationRealization pr =
          RealizePerturbation({cfg.kind, t0, t1, DeriveSeed(trial_seed, {1})}, graph);
      CheckCoverage(pr.perturbed_shift, estimate, "the perturbed shift");
      const auto probes = RandomProbes(graph.n(), cfg.probe_signals, DeriveSeed(trial_seed, {2}));
      StabilityRecord& r = records[k];
      r.epsilon = eps;
      r.trial = trial;
      r.kind = cfg.kind;
      r.empirical = OutputDifference(model, graph.shift(), pr.perturbed_shift, probes, cfg.bound_layer);
      const StabilityBound base = ComputeStabilityBound(graph.n(), model.a(), estimate.l0, estimate.l1,
                                                        SpectralNorm(pr.t0), SpectralNorm(pr.t1));
      r.bound = MultilayerBound(base, multipliers).total;
      r.ratio = r.bound > 0.0 ? r.empirical / r.bound : std::numeric_limits<double>::infinity();
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  const int workers = std::min<int>(cfg.threads, static_cast<int>(std::max<std::size_t>(total, 1)));
  if (workers <= 1) {
    for (std::size_t k = 0; k < total; ++k) run_one(k);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < total; k += workers) run_one(k);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
  return records;
}

std::vector<StabilityRecord> BoundCheck(const std::vector<StabilityRecord>& records, double slack) {
  std::vector<StabilityRecord> out;
  for (const auto& r : records) {
    const bool violated = r.bound > 0.0 ? r.ratio > slack : r.empirical > 1e-12;
    if (violated) out.push_back(r);
  }
  return out;
}

std::vector<EpsilonSummary> MediansByEpsilon(const std::vector<StabilityRecord>& records) {
  std::vector<EpsilonSummary> out;
  std::size_t k = 0;
  while (k < records.size()) {
    std::vector<double> values;
    const double eps = records[k].epsilon;
    for (; k < records.size() && records[k].epsilon == eps; ++k) values.push_back(records[k].empirical);
    out.push_back({eps, Median(std::move(values))});
  }
  return out;
}

std::string RecordsCsv(const std::vector<StabilityRecord>& records) {
  std::string out = "epsilon,trial,kind,empirical,bound,ratio\n";
  for (const auto& r : records) {
    out += FormatReal(r.epsilon) + "," + std::to_string(r.trial) + "," + ToString(r.kind) + "," +
           FormatReal(r.empirical) + "," + FormatReal(r.bound) + "," + FormatReal(r.ratio) + "\n";
  }
  return out;
}

std::vector<StabilityRecord> ParseRecordsCsv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "epsilon,trial,kind,empirical,bound,ratio") {
    Fail("records CSV has an unexpected header");
  }
  std::vector<StabilityRecord> out;
  for (int line_no = 2; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 6) Fail("records CSV line " + std::to_string(line_no) + ": expected 6 fields");
    StabilityRecord r;
    r.epsilon = std::strtod(fields[0].c_str(), nullptr);
    r.trial = std::atoi(fields[1].c_str());
    r.kind = ParsePerturbationKind(fields[2]);
    r.empirical = std::strtod(fields[3].c_str(), nullptr);
    r.bound = std::strtod(fields[4].c_str(), nullptr);
    r.ratio = std::strtod(fields[5].c_str(), nullptr);
    out.push_back(r);
  }
  return out;
}

std::string SummaryJson(const std::vector<StabilityRecord>& records, double slack) {
  nlohmann::ordered_json j;
  j["count"] = records.size();
  if (records.empty()) return j.dump(2) + "\n";
  double max_ratio = -1.0;
  for (const auto& r : records)
    if (r.bound > 0.0) max_ratio = std::max(max_ratio, r.ratio);
  j["max_ratio"] = max_ratio >= 0.0 ? nlohmann::ordered_json(max_ratio) : nlohmann::ordered_json();
  j["slack"] = slack;
  j["violations"] = BoundCheck(records, slack).size();
  auto medians = nlohmann::ordered_json::array();
  for (const auto& m : MediansByEpsilon(records)) medians.push_back({{"epsilon", m.epsilon}, {"median", m.median}});
  j["medians"] = std::move(medians);
  return j.dump(2) + "\n";
}

std::string MediansDat(const std::vector<StabilityRecord>& records) {
  std::string out = "# epsilon median_empirical\n";
  for (const auto& m : MediansByEpsilon(records)) out += FormatReal(m.epsilon) + " " + FormatReal(m.median) + "\n";
  return out;
}

std::string MediansSvg(const std::vector<StabilityRecord>& records) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& m : MediansByEpsilon(records))
    if (m.epsilon > 0.0 && m.median > 0.0) pts.emplace_back(std::log10(m.epsilon), std::log10(m.median));
  constexpr double kW = 480, kH = 320, kPad = 48;
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\""
     << kH - kPad << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
     << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">log10 epsilon</text>\n"
     << "<text x=\"14\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 14 " << kH / 2
     << ")\" text-anchor=\"middle\">log10 median difference</text>\n";
  if (!pts.empty()) {
    double x0 = pts.front().first, x1 = x0, y0 = pts.front().second, y1 = y0;
    for (const auto& [x, y] : pts) {
      x0 = std::min(x0, x); x1 = std::max(x1, x);
      y0 = std::min(y0, y); y1 = std::max(y1, y);
    }
    if (x1 == x0) { x0 -= 0.5; x1 += 0.5; }
    if (y1 == y0) { y0 -= 0.5; y1 += 0.5; }
    auto px = [&](double x) { return kPad + (x - x0) / (x1 - x0) * (kW - 2 * kPad); };
    auto py = [&](double y) { return kH - kPad - (y - y0) / (y1 - y0) * (kH - 2 * kPad); };
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) os << px(x) << "," << py(y) << " ";
    os << "\"/>\n";
    for (const auto& [x, y] : pts) os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\"/>\n";
    os << "<text x=\"" << kPad << "\" y=\"" << kH - kPad + 16 << "\">" << x0 << "</text>\n"
       << "<text x=\"" << kW - kPad << "\" y=\"" << kH - kPad + 16 << "\" text-anchor=\"end\">" << x1
       << "</text>\n"
       << "<text x=\"" << kPad + 4 << "\" y=\"" << kPad + 4 << "\">" << y1 << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void EmitReport(const std::vector<StabilityRecord>& records, const std::string& prefix, bool with_dat,
                double slack) {
  auto write = [](const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) Fail("cannot write '" + path + "'");
    out << body;
    if (!out) Fail("write failed for '" + path + "'");
  };
  write(prefix + ".csv", RecordsCsv(records));
  write(prefix + ".summary.json", SummaryJson(records, slack));
  if (with_dat) write(prefix + ".dat", MediansDat(records));
}

AggGnnModel ScaleToCertify(const AggGnnModel& model, const Omega& omega, double l0_target,
                           double l1_target, double* factor_out) {
  const LipschitzEstimate est = EstimateLipschitz(model.FirstLayerFilters(), omega);
  double factor = 1.0;
  if (est.l0 > l0_target) factor = std::min(factor, l0_target / est.l0);
  if (est.l1 > l1_target) factor = std::min(factor, l1_target / est.l1);
  if (factor_out) *factor_out = factor;
  std::vector<std::vector<double>> weights;
  for (int l = 0; l < model.num_layers(); ++l) weights.push_back(model.layer_weights(l));
  for (double& w : weights[0]) w *= factor;
  return AggGnnModel::FromWeights(model.config(), std::move(weights), model.readout_weights());
}

TrendTable CompareAggregationCounts(const Graph& graph, const RegressionTask* task,
                                    const TrendConfig& trend, const SweepConfig& cfg,
                                    bool constrained) {
  cfg.Validate();
  TrendTable table;
  table.a_values = trend.a_values;
  table.epsilons = cfg.epsilons;
  double max_t0 = 0.0, max_t1 = 0.0;
  for (double eps : cfg.epsilons) {
    const auto [t0, t1] = SplitEpsilon(cfg.kind, eps);
    max_t0 = std::max(max_t0, t0);
    max_t1 = std::max(max_t1, t1);
  }
  const Omega omega = CoveringOmega(graph.shift(), max_t0, max_t1);

  for (int a : trend.a_values) {
    AggGnnModel::Config mc = trend.model;
    mc.a = a;
    AggGnnModel model = AggGnnModel::Initialize(mc, trend.model_seed);
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    if (task) {
      LossSpec loss = trend.loss;
      if (!constrained) loss.penalty_l0_weight = loss.penalty_l1_weight = 0.0;
      TrainResult tr = Train(std::move(model), *task, loss, trend.optimizer, trend.epochs,
                             trend.batch_size, trend.model_seed);
      model = std::move(tr.model);
      if (!tr.history.empty()) final_loss = tr.history.back().train_loss;
    } else if (constrained) {
      model = ScaleToCertify(model, omega, trend.l0_target, trend.l1_target);
    }
    const LipschitzEstimate est = EstimateLipschitz(model.FirstLayerFilters(), omega);
    const auto records = RunSweep(model, graph, cfg, est);
    std::vector<double> medians;
    for (const auto& m : MediansByEpsilon(records)) medians.push_back(m.median);
    table.medians.push_back(std::move(medians));
    table.final_train_loss.push_back(final_loss);
  }

  std::vector<std::size_t> order(trend.a_values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return trend.a_values[x] < trend.a_values[y]; });
  for (std::size_t k = 1; k < order.size(); ++k)
    for (std::size_t e = 0; e < table.medians[order[k]].size(); ++e)
      if (table.medians[order[k]][e] < table.medians[order[k - 1]][e]) table.nondecreasing = false;
  return table;
}

}  // namespace aggstab
