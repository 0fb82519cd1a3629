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


#include "roomsound/service.hpp"

#include <chrono>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "httplib.h"
#include "roomsound/indices.hpp"
#include "roomsound/rng.hpp"

namespace roomsound {

namespace {

const std::set<std::string>& request_fields() {
  static const std::set<std::string> fields = {"length", "width", "height", "wwr", "shading",
                                               "furniture_fraction", "wall", "floor", "ceiling", "window"};
  return fields;
}

ApiResponse field_errors(const std::vector<FieldError>& errors) {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& e : errors) fields.push_back({{"field", e.field}, {"message", e.message}});
  return {400, {{"error", "invalid_request"}, {"fields", fields}}};
}

nlohmann::json material_doc(const MaterialSpec& m) {
  return {{"name", m.name}, {"absorption", m.absorption}, {"scattering", m.scattering}};
}

}  // namespace

std::string request_hash(const nlohmann::json& request) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(request.dump())));
  return buf;
}

PredictionService::PredictionService(MaterialDatabase db, std::optional<SurrogateSet> models)
    : db_(std::move(db)), models_(std::move(models)) {}

ApiResponse PredictionService::predict(const std::string& body) const {
  const auto start = std::chrono::steady_clock::now();
  if (!models_) return {503, {{"error", "models_not_loaded"}, {"message", "no surrogate models are loaded"}}};

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    return field_errors({{"", "body is not valid JSON (byte " + std::to_string(e.byte) + ")"}});
  }
  if (!doc.is_object()) return field_errors({{"", "body must be a JSON object"}});

  std::vector<FieldError> unknown;
  for (const auto& [key, value] : doc.items()) {
    if (!request_fields().count(key)) unknown.push_back({key, "unknown field"});
  }

  RoomConfig config;
  try {
    config = config_from_json(doc, db_);
  } catch (const ConfigError& e) {
    auto errors = e.errors();
    errors.insert(errors.end(), unknown.begin(), unknown.end());
    return field_errors(errors);
  } catch (const MaterialNotFound& e) {
    return {422, {{"error", "material_not_found"}, {"material", e.name()}, {"valid_names", e.valid_names()}}};
  }
  if (!unknown.empty()) return field_errors(unknown);

  const SurrogatePrediction p = models_->predict(config);
  nlohmann::json predictions = nlohmann::json::object();
  nlohmann::json flags = nlohmann::json::object();
  const auto& names = AcousticIndices::names();
  for (std::size_t t = 0; t < names.size(); ++t) {
    predictions[names[t]] = p.values[t];
    flags[names[t]] = p.extrapolated[t];
  }
  const double latency =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {200,
          {{"request_hash", request_hash(doc)},
           {"model_version", models_->version()},
           {"predictions", predictions},
           {"extrapolated", flags},
           {"latency_ms", latency}}};
}

ApiResponse PredictionService::materials() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& m : db_.materials()) list.push_back(material_doc(m));
  return {200, {{"materials", list}}};
}

ApiResponse PredictionService::models() const {
  if (!models_) return {503, {{"error", "models_not_loaded"}, {"message", "no surrogate models are loaded"}}};
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [id, m] : models_->models()) {
    nlohmann::json entry = {{"id", id},
                            {"hidden_layers", m.spec.hidden_layers},
                            {"hidden_units", m.spec.hidden_units},
                            {"epochs", m.spec.epochs},
                            {"batch_size", m.spec.batch_size},
                            {"targets", m.target_names}};
    if (m.test_report) {
      nlohmann::json mae = nlohmann::json::object();
      nlohmann::json r2 = nlohmann::json::object();
      for (std::size_t t = 0; t < m.test_report->names.size(); ++t) {
        mae[m.test_report->names[t]] = m.test_report->mae[t];
        r2[m.test_report->names[t]] = m.test_report->r2[t];
      }
      entry["test_mae"] = mae;
      entry["test_r2"] = r2;
    }
    list.push_back(std::move(entry));
  }
  return {200, {{"model_version", models_->version()}, {"models", list}}};
}

ApiResponse PredictionService::health() const {
  return {200, {{"status", "ok"}, {"models_loaded", models_.has_value()}}};
}

ApiResponse PredictionService::handle(const std::string& method, const std::string& path,
                                      const std::string& body) const {
  struct Route {
    const char* path;
    const char* method;
  };
  static const Route routes[] = {
      {"/api/predict", "POST"}, {"/api/materials", "GET"}, {"/api/models", "GET"}, {"/api/health", "GET"}};
  for (const auto& r : routes) {
    if (path != r.path) continue;
    if (method != r.method) return {405, {{"error", "method_not_allowed"}, {"allowed", r.method}}};
    if (path == "/api/predict") return predict(body);
    if (path == "/api/materials") return materials();
    if (path == "/api/models") return models();
    return health();
  }
  return {404, {{"error", "not_found"}, {"path", path}}};
}

struct ApiServer::Impl {
  httplib::Server server;
};

ApiServer::ApiServer(const PredictionService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>()) {
  auto reply = [&service](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto& s = impl_->server;
  s.Post("/api/predict", reply);
  for (const char* path : {"/api/materials", "/api/models", "/api/health"}) s.Get(path, reply);
  if (static_dir && !s.set_mount_point("/", static_dir->string())) {
    throw std::runtime_error("static directory not found: " + static_dir->string());
  }
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

void ApiServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace roomsound
