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


#ifndef ROOMSOUND_SERVICE_HPP_
#define ROOMSOUND_SERVICE_HPP_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "roomsound/room_model.hpp"
#include "roomsound/surrogate.hpp"

namespace roomsound {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// Hex FNV-1a digest of the request document in canonical (sorted-key) form.
std::string request_hash(const nlohmann::json& request);

/// Request handling for the prediction API, independent of the transport.
/// Stateless per request.
class PredictionService {
 public:
  PredictionService(MaterialDatabase db, std::optional<SurrogateSet> models);

  ApiResponse predict(const std::string& body) const;
  ApiResponse materials() const;
  ApiResponse models() const;
  ApiResponse health() const;
  // Routes by method and path; 404 / 405 for anything else.
  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

 private:
  MaterialDatabase db_;
  std::optional<SurrogateSet> models_;
};

/// HTTP front end (cpp-httplib) for PredictionService.
class ApiServer {
 public:
  explicit ApiServer(const PredictionService& service, std::optional<std::filesystem::path> static_dir = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds the socket; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace roomsound

#endif  // ROOMSOUND_SERVICE_HPP_
