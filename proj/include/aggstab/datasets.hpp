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

#ifndef AGGSTAB_DATASETS_HPP_
#define AGGSTAB_DATASETS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aggstab/graph.hpp"

namespace aggstab {

struct Rating {
  std::int64_t user = 0;
  std::int64_t item = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;
};

class RatingsTable {
 public:
  RatingsTable() = default;

  // Rejects ratings outside [1, 5] and duplicate (user, item) pairs.
  explicit RatingsTable(std::vector<Rating> entries);

  const std::vector<Rating>& entries() const { return entries_; }
  int user_count() const { return user_count_; }
  int item_count() const { return item_count_; }

 private:
  std::vector<Rating> entries_;
  int user_count_ = 0;
  int item_count_ = 0;
};

// u.data format: whitespace-separated "user item rating timestamp" per line.
RatingsTable ParseMovieLens(const std::string& path);
RatingsTable ParseMovieLensText(const std::string& text);
std::string SerializeMovieLens(const RatingsTable& table);

enum class NegativePolicy { kZero, kAbsolute };

struct SimilarityGraphConfig {
  int min_common = 2;
  std::optional<int> top_k = 40;
  NegativePolicy negative_policy = NegativePolicy::kZero;

  void Validate() const;
};

// Pearson correlation over co-raters; node i is movies[i], labelled by its id.
Graph PearsonSimilarityGraph(const RatingsTable& table, const std::vector<std::int64_t>& movies,
                             const SimilarityGraphConfig& cfg);

// Items ordered by descending rating count (ties by ascending id).
std::vector<std::int64_t> MostRatedItems(const RatingsTable& table, int count);

struct Sample {
  Signal input;
  double target = 0.0;
  std::vector<int> mask;  // nodes the target refers to; may be empty
};

struct RegressionTask {
  Graph graph;
  std::vector<Sample> samples;
  std::vector<int> train;
  std::vector<int> test;

  void Validate() const;
};

// Seeded shuffle, then the first ceil(0.9 n) indices train.
void SplitTrainTest(RegressionTask& task, std::uint64_t seed);

RegressionTask BuildRatingTask(const RatingsTable& table, const Graph& graph,
                               std::int64_t target_item, int min_ratings_per_user,
                               std::uint64_t seed = 0);

// Input S^t delta_s for a random source s and t in [0, diffusion_steps];
// target is the source index.
RegressionTask SyntheticSourceLocalization(const Graph& graph, int diffusion_steps, int samples,
                                           std::uint64_t seed);

}  // namespace aggstab

#endif  // AGGSTAB_DATASETS_HPP_
