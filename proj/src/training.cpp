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

#include "aggstab/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "aggstab/error.hpp"
#include "aggstab/rng.hpp"

namespace aggstab {
namespace {

double NonlinearityGrad(double pre, Nonlinearity kind) {
  switch (kind) {
    case Nonlinearity::kRelu: return pre > 0.0 ? 1.0 : 0.0;
    case Nonlinearity::kAbs: return pre > 0.0 ? 1.0 : (pre < 0.0 ? -1.0 : 0.0);
    case Nonlinearity::kTanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Nonlinearity::kIdentity: return 1.0;
  }
  return 0.0;
}

Matrix PoolBackward(const Matrix& act, const Matrix& grad_out, const Pool& pool) {
  if (pool.kind == PoolKind::kNone) return grad_out;
  const int len = static_cast<int>(act.cols());
  Matrix grad = Matrix::Zero(act.rows(), len);
  for (Eigen::Index c = 0; c < act.rows(); ++c) {
    for (Eigen::Index w = 0; w < grad_out.cols(); ++w) {
      const int begin = static_cast<int>(w) * pool.stride;
      const int count = std::min(pool.stride, len - begin);
      if (pool.kind == PoolKind::kAvg) {
        for (int q = begin; q < begin + count; ++q) grad(c, q) += grad_out(c, w) / count;
      } else {
        int best = begin;
        for (int q = begin + 1; q < begin + count; ++q)
          if (act(c, q) > act(c, best)) best = q;
        grad(c, best) += grad_out(c, w);
      }
    }
  }
  return grad;
}

// Accumulates dL/dw into grad_w and returns dL/dinput.
Matrix ConvBackward(const Matrix& in, std::span<const double> w, const Matrix& grad_out, int taps,
                    double* grad_w, bool need_input_grad) {
  const int fin = static_cast<int>(in.rows());
  const int len = static_cast<int>(in.cols());
  const int fout = static_cast<int>(grad_out.rows());
  Matrix grad_in = Matrix::Zero(need_input_grad ? fin : 0, need_input_grad ? len : 0);
  for (int o = 0; o < fout; ++o) {
    for (int i = 0; i < fin; ++i) {
      const std::size_t base = (static_cast<std::size_t>(o) * fin + i) * taps;
      for (int j = 0; j < taps; ++j) {
        double acc = 0.0;
        const double wj = w[base + j];
        for (int q = 0; q < len; ++q) {
          const int src = q + j < len ? q + j : q + j - len;
          acc += grad_out(o, q) * in(i, src);
          if (need_input_grad) grad_in(i, src) += grad_out(o, q) * wj;
        }
        grad_w[base + j] += acc;
      }
    }
  }
  return grad_in;
}

struct ActivationSignature {
  std::vector<signed char> signs;
  std::vector<int> argmax;
  bool operator==(const ActivationSignature&) const = default;
};

ActivationSignature Signature(const AggGnnModel& model, const Matrix& s, const Batch& batch) {
  ActivationSignature sig;
  for (const Sample* sample : batch) {
    const ForwardTrace trace = model.ForwardWithTrace(s, sample->input);
    for (int l = 0; l < model.num_layers(); ++l) {
      const auto& spec = model.layer(l);
      const bool kinked = spec.nonlinearity == Nonlinearity::kRelu || spec.nonlinearity == Nonlinearity::kAbs;
      for (std::size_t i = 0; i < trace.layers[l].pre.size(); ++i) {
        if (kinked) {
          const Matrix& pre = trace.layers[l].pre[i];
          for (Eigen::Index k = 0; k < pre.size(); ++k) {
            const double v = pre.data()[k];
            sig.signs.push_back(std::abs(v) < 1e-6 ? 2 : (v > 0.0 ? 1 : -1));
          }
        }
        if (spec.pool.kind == PoolKind::kMax) {
          const Matrix& act = trace.layers[l].act[i];
          const int len = static_cast<int>(act.cols());
          for (Eigen::Index c = 0; c < act.rows(); ++c) {
            for (int begin = 0; begin < len; begin += spec.pool.stride) {
              int best = begin;
              for (int q = begin + 1; q < std::min(len, begin + spec.pool.stride); ++q)
                if (act(c, q) > act(c, best)) best = q;
              sig.argmax.push_back(best);
            }
          }
        }
      }
    }
  }
  return sig;
}

}  // namespace

void LossSpec::Validate() const {
  if (!(smooth_l1_beta > 0.0)) Fail("smooth_l1_beta must be positive");
  if (!(penalty_l0_weight >= 0.0) || !(penalty_l1_weight >= 0.0)) Fail("penalty weights must be >= 0");
  if (!(l0_target >= 0.0) || !(l1_target >= 0.0)) Fail("penalty targets must be >= 0");
  omega.Validate();
}

void OptimizerState::Validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) Fail("learning rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    Fail("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) Fail("Adam eps must be positive");
}

double SmoothL1(double pred, double target, double beta) {
  const double d = std::abs(pred - target);
  return d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
}

double SmoothL1Grad(double pred, double target, double beta) {
  const double d = pred - target;
  if (std::abs(d) < beta) return d / beta;
  return d > 0.0 ? 1.0 : -1.0;
}

PenaltyResult LipschitzPenaltyWithGrad(const std::vector<PolyFilter>& filters, const LossSpec& spec) {
  spec.Validate();
  PenaltyResult result;
  result.grads.reserve(filters.size());
  for (const auto& f : filters) result.grads.emplace_back(f.size(), 0.0);
  if (!spec.HasPenalty()) return result;

  const int samples = spec.omega.SampleCount();
  const double inv = 1.0 / samples;
  for (std::size_t fi = 0; fi < filters.size(); ++fi) {
    const auto& h = filters[fi].coeffs();
    const int n = static_cast<int>(h.size());
    auto& grad = result.grads[fi];
    std::vector<double> dpow(n, 0.0);  // k l^{k-1}
    for (int j = 0; j < samples; ++j) {
      const double lambda = spec.omega.At(j);
      double p = 1.0;
      for (int k = 1; k < n; ++k) {
        dpow[k] = k * p;
        p *= lambda;
      }
      for (int m = 0; m < n; ++m) {
        // p_m'(l) = sum_k k h_{(k-m) mod n} l^{k-1}
        double g = 0.0;
        for (int k = 1; k < n; ++k) g += dpow[k] * h[(k - m + n) % n];
        const double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
        double dg = 0.0;
        const double e0 = std::abs(g) - spec.l0_target;
        if (spec.penalty_l0_weight > 0.0 && e0 > 0.0) {
          result.value += spec.penalty_l0_weight * e0 * e0 * inv;
          dg += spec.penalty_l0_weight * 2.0 * e0 * sign * inv;
        }
        const double e1 = std::abs(lambda * g) - spec.l1_target;
        if (spec.penalty_l1_weight > 0.0 && e1 > 0.0) {
          result.value += spec.penalty_l1_weight * e1 * e1 * inv;
          dg += spec.penalty_l1_weight * 2.0 * e1 * std::abs(lambda) * sign * inv;
        }
        if (dg == 0.0) continue;
        for (int k = 1; k < n; ++k) grad[(k - m + n) % n] += dg * dpow[k];
      }
    }
  }
  return result;
}

double LipschitzPenalty(const std::vector<PolyFilter>& filters, const LossSpec& spec) {
  return LipschitzPenaltyWithGrad(filters, spec).value;
}

double Objective(const AggGnnModel& model, const Matrix& s, const Batch& batch, const LossSpec& spec) {
  if (batch.empty()) Fail("batch is empty");
  double loss = 0.0;
  for (const Sample* sample : batch) {
    loss += SmoothL1(model.Forward(s, sample->input).readout, sample->target, spec.smooth_l1_beta);
  }
  loss /= static_cast<double>(batch.size());
  return loss + LipschitzPenalty(model.FirstLayerFilters(), spec);
}

LossGradient Backward(const AggGnnModel& model, const Matrix& s, const Batch& batch,
                      const LossSpec& spec) {
  spec.Validate();
  if (batch.empty()) Fail("batch is empty");
  LossGradient out;
  out.grad.assign(model.ParameterCount(), 0.0);
  std::vector<std::size_t> offsets(model.num_layers() + 1, 0);
  for (int l = 0; l < model.num_layers(); ++l) offsets[l + 1] = offsets[l] + model.layer_weights(l).size();
  double* readout_grad = out.grad.data() + offsets.back();

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const int channels = model.OutputChannels();
  const int out_len = model.OutputLength();
  const auto readout = model.config().readout;

  for (const Sample* sample : batch) {
    const ForwardTrace trace = model.ForwardWithTrace(s, sample->input);
    const double pred = trace.result.readout;
    out.data_loss += SmoothL1(pred, sample->target, spec.smooth_l1_beta) * inv_batch;
    const double g = SmoothL1Grad(pred, sample->target, spec.smooth_l1_beta) * inv_batch;
    if (g == 0.0) continue;
    const int n = static_cast<int>(trace.result.per_node.rows());

    for (int i = 0; i < n; ++i) {
      Matrix grad = Matrix::Zero(channels, out_len);
      switch (readout) {
        case ReadoutKind::kSum:
          grad.row(channels - 1).setConstant(g);
          break;
        case ReadoutKind::kMean:
          grad.row(channels - 1).setConstant(g / static_cast<double>(n * out_len));
          break;
        case ReadoutKind::kLinear: {
          const auto& w = model.readout_weights();
          for (int c = 0; c < channels; ++c) {
            for (int q = 0; q < out_len; ++q) {
              const std::size_t idx = ReadoutIndex(i, c, q, channels, out_len);
              grad(c, q) = g * w[idx];
              readout_grad[idx] += g * trace.result.per_node(i, c * out_len + q);
            }
          }
          break;
        }
      }
      for (int l = model.num_layers() - 1; l >= 0; --l) {
        const auto& spec_l = model.layer(l);
        const LayerTrace& lt = trace.layers[l];
        Matrix g_act = PoolBackward(lt.act[i], grad, spec_l.pool);
        Matrix g_pre = g_act.binaryExpr(
            lt.pre[i], [&](double ga, double pre) { return ga * NonlinearityGrad(pre, spec_l.nonlinearity); });
        const auto w = model.WeightsFor(l, i);
        double* grad_w = out.grad.data() + offsets[l] +
                         (w.data() - model.layer_weights(l).data());
        grad = ConvBackward(lt.input[i], w, g_pre, spec_l.taps, grad_w, l > 0);
      }
    }
  }

  if (spec.HasPenalty()) {
    const PenaltyResult pen = LipschitzPenaltyWithGrad(model.FirstLayerFilters(), spec);
    out.penalty = pen.value;
    const int taps = model.layer(0).taps;
    for (std::size_t f = 0; f < pen.grads.size(); ++f)
      for (int k = 0; k < taps; ++k) out.grad[f * taps + k] += pen.grads[f][k];
  }
  out.objective = out.data_loss + out.penalty;
  return out;
}

void AdamStep(OptimizerState& state, std::span<double> weights, std::span<const double> grads) {
  state.Validate();
  if (weights.size() != grads.size()) Fail("Adam weight/gradient shape mismatch");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(weights.size(), 0.0);
    state.v.assign(weights.size(), 0.0);
  }
  if (state.m.size() != weights.size() || state.v.size() != weights.size()) {
    Fail("Adam state shape mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < weights.size(); ++k) {
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * grads[k];
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * grads[k] * grads[k];
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    weights[k] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

double MeanLoss(const AggGnnModel& model, const RegressionTask& task, const std::vector<int>& indices,
                double beta) {
  if (indices.empty()) return std::numeric_limits<double>::quiet_NaN();
  double loss = 0.0;
  for (int idx : indices) {
    const Sample& s = task.samples[idx];
    loss += SmoothL1(model.Forward(task.graph.shift(), s.input).readout, s.target, beta);
  }
  return loss / static_cast<double>(indices.size());
}

TrainResult Train(AggGnnModel model, const RegressionTask& task, const LossSpec& spec,
                  OptimizerState optimizer, int epochs, int batch_size, std::uint64_t seed) {
  spec.Validate();
  optimizer.Validate();
  if (epochs < 0) Fail("epochs must be >= 0");
  if (batch_size < 1) Fail("batch_size must be >= 1");
  if (task.train.empty()) FailData("training split is empty");

  TrainResult result;
  Rng rng(DeriveSeed(seed, {0x7a11}));
  std::vector<int> order = task.train;
  std::vector<double> params = model.FlatParameters();
  const Matrix& s = task.graph.shift();
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      Batch batch;
      for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k) {
        batch.push_back(&task.samples[order[k]]);
      }
      const LossGradient lg = Backward(model, s, batch, spec);
      AdamStep(optimizer, params, lg.grad);
      model.SetFlatParameters(params);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = MeanLoss(model, task, task.train, spec.smooth_l1_beta);
    stats.penalty = LipschitzPenalty(model.FirstLayerFilters(), spec);
    stats.test_loss = MeanLoss(model, task, task.test, spec.smooth_l1_beta);
    result.history.push_back(stats);
  }
  result.model = std::move(model);
  return result;
}

GradCheckReport GradCheck(const AggGnnModel& model, const Matrix& s, const Batch& batch,
                          const LossSpec& spec, double fd_step, std::uint64_t seed, int probes) {
  if (!(fd_step > 0.0)) Fail("fd_step must be positive");
  if (probes < 1) Fail("probe count must be positive");
  GradCheckReport report;
  const LossGradient lg = Backward(model, s, batch, spec);
  const std::vector<double> base = model.FlatParameters();
  if (base.empty()) return report;
  const ActivationSignature base_sig = Signature(model, s, batch);

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, base.size() - 1);
  AggGnnModel probe = model;
  std::vector<double> w = base;
  const int max_attempts = probes * 20;
  for (int attempt = 0; attempt < max_attempts && report.probe_count < probes; ++attempt) {
    const std::size_t idx = pick(rng);
    w[idx] = base[idx] + fd_step;
    probe.SetFlatParameters(w);
    const double plus = Objective(probe, s, batch, spec);
    const bool plus_ok = Signature(probe, s, batch) == base_sig;
    w[idx] = base[idx] - fd_step;
    probe.SetFlatParameters(w);
    const double minus = Objective(probe, s, batch, spec);
    const bool minus_ok = Signature(probe, s, batch) == base_sig;
    w[idx] = base[idx];
    if (!plus_ok || !minus_ok) {
      ++report.excluded;
      continue;
    }
    const double fd = (plus - minus) / (2.0 * fd_step);
    const double rel = std::abs(lg.grad[idx] - fd) / std::max(std::abs(lg.grad[idx]), 1e-8);
    if (rel >= report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_parameter = model.ParameterName(idx);
    }
    ++report.probe_count;
  }
  return report;
}

std::string HistoryCsv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,penalty,test_loss\n";
  char buf[160];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.penalty,
                  e.test_loss);
    out += buf;
  }
  return out;
}

}  // namespace aggstab
