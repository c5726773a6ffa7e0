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

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "aggstab/aggstab.h"
#include "doctest.h"
#include "json.hpp"

namespace {

using Json = nlohmann::json;

std::string Take(char* s) {
  std::string out = s ? s : "";
  aggstab_string_free(s);
  return out;
}

std::string Fixture() { return std::string(AGGSTAB_TEST_DATA_DIR) + "/ml_fixture.data"; }

TEST_CASE("version and error state") {
  CHECK(std::strlen(aggstab_version()) > 0);
  aggstab_graph* g = nullptr;
  CHECK(aggstab_graph_random_er(4, 2.0, 1, 0, &g) == AGGSTAB_ERR_INPUT);
  CHECK(g == nullptr);
  CHECK(std::string(aggstab_last_error()).find("probab") != std::string::npos);
  CHECK(aggstab_graph_random_er(4, 0.5, 1, 0, &g) == AGGSTAB_OK);
  CHECK(std::string(aggstab_last_error()).empty());
  aggstab_graph_free(g);
  CHECK(aggstab_graph_random_er(4, 0.5, 1, 0, nullptr) == AGGSTAB_ERR_INPUT);
}

TEST_CASE("graph handles") {
  const double adj[4] = {0, 2, 2, 0};
  aggstab_graph* g = nullptr;
  REQUIRE(aggstab_graph_from_adjacency(adj, 2, 1, &g) == AGGSTAB_OK);
  CHECK(aggstab_graph_node_count(g) == 2);
  double shift[4];
  REQUIRE(aggstab_graph_shift(g, shift) == AGGSTAB_OK);
  CHECK(shift[1] == doctest::Approx(1.0));
  double norm = 0.0;
  REQUIRE(aggstab_graph_spectral_norm(g, &norm) == AGGSTAB_OK);
  CHECK(norm == doctest::Approx(1.0));
  char* text = nullptr;
  REQUIRE(aggstab_graph_to_json(g, &text) == AGGSTAB_OK);
  const std::string json = Take(text);
  aggstab_graph* back = nullptr;
  REQUIRE(aggstab_graph_from_json(json.c_str(), &back) == AGGSTAB_OK);
  CHECK(aggstab_graph_node_count(back) == 2);
  aggstab_graph_free(back);
  CHECK(aggstab_graph_from_json("{nope", &back) == AGGSTAB_ERR_INPUT);
  CHECK(aggstab_graph_load("/nonexistent.json", &back) == AGGSTAB_ERR_INPUT);
  const double asym[4] = {0, 1, 0, 0};
  CHECK(aggstab_graph_from_adjacency(asym, 2, 0, &back) == AGGSTAB_ERR_INPUT);
  CHECK(aggstab_graph_from_adjacency(adj, 2, 7, &back) == AGGSTAB_ERR_INPUT);
  aggstab_graph_free(g);
  aggstab_graph_free(nullptr);
  aggstab_graph* sbm = nullptr;
  CHECK(aggstab_graph_random_sbm(8, 2, 0.9, 0.1, 3, 0, &sbm) == AGGSTAB_OK);
  aggstab_graph_free(sbm);
}

TEST_CASE("ratings and tasks") {
  aggstab_ratings* r = nullptr;
  REQUIRE(aggstab_ratings_load(Fixture().c_str(), &r) == AGGSTAB_OK);
  CHECK(aggstab_ratings_entry_count(r) == 100);
  CHECK(aggstab_ratings_user_count(r) == 10);
  CHECK(aggstab_ratings_item_count(r) == 15);
  int64_t ids[6];
  int written = 0;
  REQUIRE(aggstab_ratings_most_rated(r, 6, ids, &written) == AGGSTAB_OK);
  CHECK(written == 6);
  CHECK(ids[0] == 1);
  aggstab_graph* g = nullptr;
  REQUIRE(aggstab_similarity_graph(r, ids, 6, 2, 3, 0, 0, &g) == AGGSTAB_OK);
  CHECK(aggstab_graph_node_count(g) == 6);
  aggstab_task* t = nullptr;
  REQUIRE(aggstab_task_rating(r, g, 1, 0, 5, &t) == AGGSTAB_OK);
  CHECK(aggstab_task_sample_count(t) == 10);
  CHECK(aggstab_task_train_count(t) == 9);
  aggstab_task_free(t);
  CHECK(aggstab_task_rating(r, g, 404, 0, 5, &t) == AGGSTAB_ERR_INPUT);
  const int64_t missing[2] = {1, 999};
  aggstab_graph* bad = nullptr;
  CHECK(aggstab_similarity_graph(r, missing, 2, 2, 0, 0, 0, &bad) == AGGSTAB_ERR_DATA);
  aggstab_graph_free(g);
  aggstab_ratings_free(r);
  CHECK(aggstab_ratings_load("/nonexistent/u.data", &r) == AGGSTAB_ERR_INPUT);
}

TEST_CASE("models, training, certification and sweeps") {
  aggstab_graph* g = nullptr;
  REQUIRE(aggstab_graph_random_er(8, 0.4, 2, 1, &g) == AGGSTAB_OK);
  aggstab_task* t = nullptr;
  REQUIRE(aggstab_task_source_localization(g, 3, 40, 1, &t) == AGGSTAB_OK);

  const char* arch = R"({"a":4,"nodes":8,"layers":[
      {"taps":3,"features_in":1,"features_out":2,"nonlinearity":"tanh","pool":{"kind":"avg","stride":2}}],
      "readout":"linear"})";
  aggstab_model* m = nullptr;
  REQUIRE(aggstab_model_init(arch, 3, &m) == AGGSTAB_OK);
  CHECK(aggstab_model_order(m) == 4);
  std::vector<double> x(8, 0.0);
  x[0] = 1.0;
  double y0 = 0.0;
  REQUIRE(aggstab_model_forward(m, g, x.data(), &y0) == AGGSTAB_OK);

  char* history = nullptr;
  REQUIRE(aggstab_train(m, t, R"({"penalty_l0_weight":0.1,"l0_target":1})", nullptr, 3, 10, 4, &history) ==
          AGGSTAB_OK);
  const std::string csv = Take(history);
  CHECK(csv.rfind("epoch,train_loss,penalty,test_loss\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(aggstab_train(m, t, R"({"bogus":1})", nullptr, 1, 10, 4, nullptr) == AGGSTAB_ERR_INPUT);

  char* cert = nullptr;
  REQUIRE(aggstab_certify(m, -2, 2, 256, 100, 100, 0, &cert) == AGGSTAB_OK);
  const Json cj = Json::parse(Take(cert));
  CHECK(cj["pass"] == true);
  CHECK(cj["nodes"] == 8);
  CHECK(cj["C0"].get<double>() == doctest::Approx(8 * std::sqrt(5.0) * cj["L0"].get<double>()));

  char *rec = nullptr, *sum = nullptr, *dat = nullptr;
  REQUIRE(aggstab_sweep(m, g, R"({"epsilons":[0.001,0.01,0.1],"trials":10,"kind":"mixed"})", &rec, &sum,
                        &dat) == AGGSTAB_OK);
  const std::string records = Take(rec);
  CHECK(std::count(records.begin(), records.end(), '\n') == 31);
  CHECK(Json::parse(Take(sum))["count"] == 30);
  CHECK(Take(dat).find("0.01") != std::string::npos);
  CHECK(aggstab_sweep(m, g, R"({"epsilons":[0.1],"omega":{"lo":-0.01,"hi":0.01}})", nullptr, nullptr,
                      nullptr) == AGGSTAB_ERR_NUMERIC);
  CHECK(aggstab_sweep(m, g, R"({"epsilons":[0.1],"kind":"sideways"})", nullptr, nullptr, nullptr) ==
        AGGSTAB_ERR_INPUT);

  char *s2 = nullptr, *d2 = nullptr, *svg = nullptr;
  REQUIRE(aggstab_report(records.c_str(), 1.1, &s2, &d2, &svg) == AGGSTAB_OK);
  CHECK(Json::parse(Take(s2))["count"] == 30);
  Take(d2);
  CHECK(Take(svg).rfind("<svg", 0) == 0);

  char* mj = nullptr;
  REQUIRE(aggstab_model_to_json(m, &mj) == AGGSTAB_OK);
  aggstab_model* copy = nullptr;
  REQUIRE(aggstab_model_from_json(Take(mj).c_str(), &copy) == AGGSTAB_OK);
  double y1 = 0.0, y2 = 0.0;
  aggstab_model_forward(m, g, x.data(), &y1);
  aggstab_model_forward(copy, g, x.data(), &y2);
  CHECK(y1 == y2);
  aggstab_model_free(copy);

  aggstab_graph* small = nullptr;
  REQUIRE(aggstab_graph_random_er(3, 0.5, 1, 0, &small) == AGGSTAB_OK);
  CHECK(aggstab_model_forward(m, small, x.data(), &y1) == AGGSTAB_ERR_INPUT);
  aggstab_graph_free(small);

  aggstab_model_free(m);
  aggstab_task_free(t);
  aggstab_graph_free(g);
}

TEST_CASE("save and load through files") {
  const auto dir = std::filesystem::temp_directory_path() / "aggstab_capi_test";
  std::filesystem::create_directories(dir);
  aggstab_graph* g = nullptr;
  REQUIRE(aggstab_graph_random_er(5, 0.5, 9, 0, &g) == AGGSTAB_OK);
  const std::string gp = (dir / "g.json").string();
  REQUIRE(aggstab_graph_save(g, gp.c_str()) == AGGSTAB_OK);
  aggstab_graph* g2 = nullptr;
  REQUIRE(aggstab_graph_load(gp.c_str(), &g2) == AGGSTAB_OK);
  aggstab_task* t = nullptr;
  REQUIRE(aggstab_task_source_localization(g2, 1, 5, 2, &t) == AGGSTAB_OK);
  const std::string tp = (dir / "t.json").string();
  REQUIRE(aggstab_task_save(t, tp.c_str()) == AGGSTAB_OK);
  aggstab_task* t2 = nullptr;
  REQUIRE(aggstab_task_load(tp.c_str(), &t2) == AGGSTAB_OK);
  CHECK(aggstab_task_sample_count(t2) == 5);
  aggstab_graph* tg = nullptr;
  REQUIRE(aggstab_task_graph(t2, &tg) == AGGSTAB_OK);
  CHECK(aggstab_graph_node_count(tg) == 5);
  aggstab_model* m = nullptr;
  REQUIRE(aggstab_model_init(R"({"a":2,"layers":[{"taps":2}]})", 1, &m) == AGGSTAB_OK);
  const std::string mp = (dir / "m.json").string();
  REQUIRE(aggstab_model_save(m, mp.c_str()) == AGGSTAB_OK);
  aggstab_model* m2 = nullptr;
  REQUIRE(aggstab_model_load(mp.c_str(), &m2) == AGGSTAB_OK);
  CHECK(aggstab_model_order(m2) == 2);
  CHECK(aggstab_model_load("/nonexistent.json", &m2) == AGGSTAB_ERR_INPUT);
  for (auto* p : {m, m2}) aggstab_model_free(p);
  for (auto* p : {g, g2, tg}) aggstab_graph_free(p);
  for (auto* p : {t, t2}) aggstab_task_free(p);
  std::filesystem::remove_all(dir);
}

}  // namespace
