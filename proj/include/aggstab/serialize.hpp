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

#ifndef AGGSTAB_SERIALIZE_HPP_
#define AGGSTAB_SERIALIZE_HPP_

#include <string>

#include "aggstab/agg_gnn.hpp"
#include "aggstab/datasets.hpp"
#include "aggstab/filters.hpp"
#include "aggstab/graph.hpp"
#include "json.hpp"

namespace aggstab {

using Json = nlohmann::ordered_json;

// {"n": int, "shift": [[...], ...], "labels": [...]}, row-major.
Json GraphToJson(const Graph& g);
Graph GraphFromJson(const Json& j);

// A filter is a bare JSON array of coefficients.
Json FilterToJson(const PolyFilter& f);
PolyFilter FilterFromJson(const Json& j);

// {"graph": ..., "samples": [{"input": [...], "target": x, "mask": [...]}], "train": [...], "test": [...]}
Json TaskToJson(const RegressionTask& task);
RegressionTask TaskFromJson(const Json& j);

// {"a", "nodes", "first_layer_mode", "layers": [{"taps", "features_in",
//  "features_out", "weights", "nonlinearity", "pool": {"kind", "stride"}}],
//  "readout", "readout_weights"}
Json ModelToJson(const AggGnnModel& model);
AggGnnModel ModelFromJson(const Json& j);

// Model architecture without weights (the same document minus "weights").
AggGnnModel::Config ModelConfigFromJson(const Json& j);

Json CertificationToJson(const Certification& c);

Json ReadJsonFile(const std::string& path);
std::string ReadTextFile(const std::string& path);
void WriteTextFile(const std::string& path, const std::string& body);

// Canonical text form: two-space indentation, trailing newline.
std::string DumpJson(const Json& j);

}  // namespace aggstab

#endif  // AGGSTAB_SERIALIZE_HPP_
