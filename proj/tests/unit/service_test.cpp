/*
Copyright 2026 The roomsound Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/


#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <set>
#include <thread>

#include "roomsound/service.hpp"
#include "test_support.hpp"
// Last: httplib pulls in <resolv.h>, whose _res macro breaks Eigen headers.
#include "httplib.h"

namespace roomsound {
namespace {

class Service : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const Dataset ds = testing::synthetic_dataset();
    service_ = new PredictionService(testing::db(), testing::small_surrogates(ds, 5));
  }
  static void TearDownTestSuite() { delete service_; }
  static PredictionService* service_;

  static std::string body() { return to_json(testing::classroom()).dump(); }
};

PredictionService* Service::service_ = nullptr;

std::set<std::string> error_fields(const ApiResponse& r) {
  std::set<std::string> out;
  for (const auto& f : r.body.at("fields")) out.insert(f.at("field").get<std::string>());
  return out;
}

TEST_F(Service, PredictReturnsEveryTarget) {
  const ApiResponse r = service_->handle("POST", "/api/predict", body());
  ASSERT_EQ(r.status, 200) << r.body.dump();
  for (const auto& name : AcousticIndices::names()) {
    EXPECT_TRUE(r.body.at("predictions").at(name).is_number()) << name;
    EXPECT_TRUE(r.body.at("extrapolated").at(name).is_boolean()) << name;
  }
  EXPECT_EQ(r.body.at("request_hash"), request_hash(nlohmann::json::parse(body())));
  EXPECT_FALSE(r.body.at("model_version").get<std::string>().empty());
  EXPECT_GE(r.body.at("latency_ms").get<double>(), 0.0);
}

TEST_F(Service, RequestHashIgnoresKeyOrder) {
  const auto a = nlohmann::json::parse(R"({"wwr": 0.5, "length": 6})");
  const auto b = nlohmann::json::parse(R"({"length": 6, "wwr": 0.5})");
  EXPECT_EQ(request_hash(a), request_hash(b));
  EXPECT_NE(request_hash(a), request_hash(nlohmann::json::parse(R"({"length": 6, "wwr": 0.2})")));
}

TEST_F(Service, InvalidFieldsAreListed) {
  auto doc = to_json(testing::classroom());
  doc["wwr"] = 1.5;
  doc.erase("height");
  doc["colour"] = "red";
  const ApiResponse r = service_->predict(doc.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body.at("error"), "invalid_request");
  const auto fields = error_fields(r);
  EXPECT_TRUE(fields.count("height"));
  EXPECT_TRUE(fields.count("colour"));
}

TEST_F(Service, OutOfRangeValueNamesField) {
  auto doc = to_json(testing::classroom());
  doc["wwr"] = 1.5;
  const ApiResponse r = service_->predict(doc.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(error_fields(r), std::set<std::string>{"wwr"});
}

TEST_F(Service, WrongTypesAndBadJson) {
  auto doc = to_json(testing::classroom());
  doc["length"] = "six";
  EXPECT_EQ(error_fields(service_->predict(doc.dump())), std::set<std::string>{"length"});
  EXPECT_EQ(service_->predict("{not json").status, 400);
  EXPECT_EQ(service_->predict("[1, 2]").status, 400);
}

TEST_F(Service, UnknownMaterialIs422) {
  auto doc = to_json(testing::classroom());
  doc["ceiling"] = "marble";
  const ApiResponse r = service_->predict(doc.dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body.at("error"), "material_not_found");
  EXPECT_EQ(r.body.at("material"), "marble");
  EXPECT_EQ(r.body.at("valid_names").get<std::vector<std::string>>(), testing::db().names());
}

TEST_F(Service, RoutingErrors) {
  EXPECT_EQ(service_->handle("GET", "/api/nothing", "").status, 404);
  EXPECT_EQ(service_->handle("GET", "/api/predict", "").status, 405);
  EXPECT_EQ(service_->handle("POST", "/api/materials", "").status, 405);
}

TEST_F(Service, CatalogueEndpoints) {
  const ApiResponse materials = service_->handle("GET", "/api/materials", "");
  ASSERT_EQ(materials.status, 200);
  EXPECT_EQ(materials.body.at("materials").size(), testing::db().materials().size());
  const ApiResponse models = service_->handle("GET", "/api/models", "");
  ASSERT_EQ(models.status, 200);
  EXPECT_EQ(models.body.at("models").size(), 7u);
  const ApiResponse health = service_->handle("GET", "/api/health", "");
  EXPECT_EQ(health.body.at("models_loaded"), true);
}

TEST(ServiceWithoutModels, PredictIs503) {
  const PredictionService service(testing::db(), std::nullopt);
  const ApiResponse r = service.handle("POST", "/api/predict", to_json(testing::classroom()).dump());
  EXPECT_EQ(r.status, 503);
  EXPECT_EQ(r.body.at("error"), "models_not_loaded");
  EXPECT_EQ(service.handle("GET", "/api/health", "").body.at("models_loaded"), false);
  EXPECT_EQ(service.handle("GET", "/api/materials", "").status, 200);
}

// The published schema has to describe what the service actually emits.
TEST_F(Service, MatchesPublishedSchema) {
  std::ifstream in(ROOMSOUND_SCHEMA_FILE);
  ASSERT_TRUE(in) << ROOMSOUND_SCHEMA_FILE;
  const auto schema = nlohmann::json::parse(in).at("$defs");

  const auto& req = schema.at("PredictionRequest");
  std::set<std::string> required(req.at("required").begin(), req.at("required").end());
  const auto request = nlohmann::json::parse(body());
  std::set<std::string> sent;
  for (const auto& [k, v] : request.items()) sent.insert(k);
  EXPECT_EQ(required, sent);

  const std::regex target(schema.at("targetName").at("pattern").get<std::string>());
  for (const auto& name : AcousticIndices::names()) EXPECT_TRUE(std::regex_match(name, target)) << name;

  auto has_required = [&](const char* def, const ApiResponse& r) {
    for (const auto& key : schema.at(def).at("required")) {
      EXPECT_TRUE(r.body.contains(key.get<std::string>())) << def << " " << key;
    }
  };
  has_required("PredictionResponse", service_->handle("POST", "/api/predict", body()));
  has_required("FieldErrorResponse", service_->handle("POST", "/api/predict", "{}"));
  has_required("MaterialsResponse", service_->handle("GET", "/api/materials", ""));
  has_required("ModelsResponse", service_->handle("GET", "/api/models", ""));
  has_required("HealthResponse", service_->handle("GET", "/api/health", ""));
  auto bad = nlohmann::json::parse(body());
  bad["wall"] = "marble";
  has_required("MaterialNotFoundResponse", service_->handle("POST", "/api/predict", bad.dump()));
}

TEST_F(Service, SocketRoundTrip) {
  ApiServer server(*service_);
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread loop([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);
  const auto ok = client.Post("/api/predict", body(), "application/json");
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);
  const auto doc = nlohmann::json::parse(ok->body);
  EXPECT_EQ(doc.at("predictions").size(), 25u);
  const auto bad = client.Post("/api/predict", R"({"length": "x"})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  const auto health = client.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  server.stop();
  loop.join();
}

}  // namespace
}  // namespace roomsound
