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

#include "aggstab/serialize.hpp"

#include <fstream>
#include <sstream>

#include "aggstab/error.hpp"

namespace aggstab {
namespace {

template <typename F>
auto Guard(const char* what, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const nlohmann::json::exception& e) {
    Fail(std::string("invalid ") + what + " JSON: " + e.what());
  }
}

Json MatrixToJson(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json VectorToJson(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector VectorFromJson(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Json LayerSpecToJson(const CnnLayerSpec& spec) {
  return Json{{"taps", spec.taps},
              {"features_in", spec.features_in},
              {"features_out", spec.features_out},
              {"nonlinearity", ToString(spec.nonlinearity)},
              {"pool", {{"kind", ToString(spec.pool.kind)}, {"stride", spec.pool.stride}}}};
}

CnnLayerSpec LayerSpecFromJson(const Json& j) {
  CnnLayerSpec spec;
  spec.taps = j.at("taps").get<int>();
  spec.features_in = j.value("features_in", 1);
  spec.features_out = j.value("features_out", 1);
  spec.nonlinearity = ParseNonlinearity(j.value("nonlinearity", std::string("identity")));
  if (j.contains("pool")) {
    const Json& p = j.at("pool");
    if (p.is_string()) {
      spec.pool.kind = ParsePoolKind(p.get<std::string>());
    } else {
      spec.pool.kind = ParsePoolKind(p.value("kind", std::string("none")));
      spec.pool.stride = p.value("stride", 1);
    }
  }
  return spec;
}

}  // namespace

Json GraphToJson(const Graph& g) {
  Json j;
  j["n"] = g.n();
  j["shift"] = MatrixToJson(g.shift());
  j["labels"] = g.labels();
  return j;
}

Graph GraphFromJson(const Json& j) {
  return Guard("graph", [&] {
    const int n = j.at("n").get<int>();
    const Json& rows = j.at("shift");
    if (n < 1 || !rows.is_array() || static_cast<int>(rows.size()) != n) {
      Fail("graph JSON: 'shift' must have n rows");
    }
    Matrix s(n, n);
    for (int i = 0; i < n; ++i) {
      const auto row = rows[i].get<std::vector<double>>();
      if (static_cast<int>(row.size()) != n) Fail("graph JSON: 'shift' must be n x n");
      for (int k = 0; k < n; ++k) s(i, k) = row[k];
    }
    std::vector<std::string> labels;
    if (j.contains("labels")) labels = j.at("labels").get<std::vector<std::string>>();
    return Graph::FromShift(std::move(s), std::move(labels));
  });
}

Json FilterToJson(const PolyFilter& f) { return Json(f.coeffs()); }

PolyFilter FilterFromJson(const Json& j) {
  return Guard("filter", [&] { return PolyFilter(j.get<std::vector<double>>()); });
}

Json TaskToJson(const RegressionTask& task) {
  Json j;
  j["graph"] = GraphToJson(task.graph);
  Json samples = Json::array();
  for (const Sample& s : task.samples) {
    samples.push_back({{"input", VectorToJson(s.input)}, {"target", s.target}, {"mask", s.mask}});
  }
  j["samples"] = std::move(samples);
  j["train"] = task.train;
  j["test"] = task.test;
  return j;
}

RegressionTask TaskFromJson(const Json& j) {
  return Guard("task", [&] {
    RegressionTask task;
    task.graph = GraphFromJson(j.at("graph"));
    for (const Json& s : j.at("samples")) {
      Sample sample;
      sample.input = VectorFromJson(s.at("input"));
      sample.target = s.at("target").get<double>();
      if (s.contains("mask")) sample.mask = s.at("mask").get<std::vector<int>>();
      task.samples.push_back(std::move(sample));
    }
    task.train = j.at("train").get<std::vector<int>>();
    task.test = j.at("test").get<std::vector<int>>();
    task.Validate();
    return task;
  });
}

Json ModelToJson(const AggGnnModel& model) {
  const auto& c = model.config();
  Json j;
  j["a"] = c.a;
  j["nodes"] = c.nodes;
  j["first_layer_mode"] = ToString(c.first_layer_mode);
  Json layers = Json::array();
  for (int l = 0; l < model.num_layers(); ++l) {
    Json layer = LayerSpecToJson(model.layer(l));
    layer["weights"] = model.layer_weights(l);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  j["readout"] = ToString(c.readout);
  if (c.readout == ReadoutKind::kLinear) j["readout_weights"] = model.readout_weights();
  return j;
}

AggGnnModel::Config ModelConfigFromJson(const Json& j) {
  return Guard("model", [&] {
    AggGnnModel::Config c;
    c.a = j.at("a").get<int>();
    c.nodes = j.value("nodes", 0);
    c.first_layer_mode = ParseFirstLayerMode(j.value("first_layer_mode", std::string("shared")));
    for (const Json& layer : j.at("layers")) c.layers.push_back(LayerSpecFromJson(layer));
    c.readout = ParseReadoutKind(j.value("readout", std::string("sum")));
    return c;
  });
}

AggGnnModel ModelFromJson(const Json& j) {
  return Guard("model", [&] {
    const AggGnnModel::Config c = ModelConfigFromJson(j);
    std::vector<std::vector<double>> weights;
    for (const Json& layer : j.at("layers")) weights.push_back(layer.at("weights").get<std::vector<double>>());
    std::vector<double> readout;
    if (j.contains("readout_weights")) readout = j.at("readout_weights").get<std::vector<double>>();
    return AggGnnModel::FromWeights(c, std::move(weights), std::move(readout));
  });
}

Json CertificationToJson(const Certification& c) {
  Json j;
  j["L0"] = c.estimate.l0;
  j["L1"] = c.estimate.l1;
  j["pass"] = c.pass;
  j["omega"] = {c.estimate.omega_lo, c.estimate.omega_hi};
  return j;
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Json ReadJsonFile(const std::string& path) {
  const std::string text = ReadTextFile(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Fail("'" + path + "' is not valid JSON: " + e.what());
  }
}

void WriteTextFile(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail("cannot write '" + path + "'");
  out << body;
  if (!out) Fail("write failed for '" + path + "'");
}

std::string DumpJson(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace aggstab
