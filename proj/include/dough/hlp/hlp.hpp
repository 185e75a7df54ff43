// Copyright 2026 The DoughPlan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dough/errors.hpp"
#include "dough/geometry/point_cloud.hpp"
#include "dough/geometry/shape_program.hpp"

namespace dough {

/// One stage of a staged manipulation plan: a single tool and the subgoal
/// shape it should produce.
struct StagePlan {
  std::string explanation;
  std::string tool_name;
  ShapeProgram shape_program = Sphere{};
  std::vector<std::string> input_vars;
  std::vector<std::string> output_vars;
  std::map<std::string, Vec3> locations;
  std::map<std::string, double> volumes;
};

/// Plan document. Coordinates are in the table frame: the table top is the
/// plane y = 0 and the dough starts centred over the origin.
struct PlanResponse {
  std::string task;
  std::string initial_var = "dough";
  std::optional<ShapeProgram> initial_shape;
  std::vector<StagePlan> stages;
  std::string raw_text;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::string> warnings;  // ignored fields and the like
};

/// parse_plan failure. stage() is -1 for document-level problems.
class PlanParseError : public DomainError {
 public:
  PlanParseError(const std::string& what, int stage)
      : DomainError(stage < 0 ? what : "stage " + std::to_string(stage) + ": " + what),
        stage_(stage) {}
  int stage() const noexcept { return stage_; }

 private:
  int stage_;
};

/// Live requests need an API key; absence is a configuration problem.
class MissingCredentialError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class FixtureNotFoundError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LlmTimeoutError : public LlmError {
 public:
  LlmTimeoutError(const std::string& what, int attempts)
      : LlmError(what + " after " + std::to_string(attempts) + " attempt(s)"),
        attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class LlmHttpError : public LlmError {
 public:
  LlmHttpError(const std::string& what, int status) : LlmError(what), status_(status) {}
  int status() const noexcept { return status_; }  // 0 when no response

 private:
  int status_;
};

struct LlmClientConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4";
  std::string api_key_env = "DOUGH_LLM_API_KEY";
  double timeout_s = 120.0;
  int max_retries = 2;  // extra attempts after the first
  double retry_backoff_s = 1.0;  // doubled after each failed attempt
  double temperature = 0.0;
  /// When set, plans are read from <fixture_dir>/<task>.json instead of
  /// the network.
  std::optional<std::filesystem::path> fixture_dir;

  /// Throws ConfigError.
  void validate() const;
};

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  double timeout_s = 0.0;
};

struct HttpResult {
  int status = 0;  // 0 when no response arrived
  std::string body;
  bool timed_out = false;
  std::string error;
};

/// Blocking POST. Replaceable for tests.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post(const HttpRequest& request) = 0;
};

/// cpp-httplib client; https needs the OpenSSL build.
std::unique_ptr<HttpTransport> make_http_transport();

/// Tool names known to the planner, in catalog order.
std::vector<std::string> default_tool_catalog();
std::vector<std::string> default_guidelines();

/// Prompt text for a task. Throws ConfigError for an unknown tool.
std::string build_prompt(const std::string& task_text, const std::vector<std::string>& tools,
                         const std::vector<std::string>& guidelines);

/// Raw completion text for the prompt, or the fixture file for `task` in
/// fixture mode (no transport is touched then). Timeouts and 5xx/429
/// responses are retried max_retries times.
std::string request_plan(const LlmClientConfig& cfg, const std::string& prompt,
                         const std::string& task, HttpTransport* transport = nullptr);

/// Accepts a bare plan document or completion text wrapping one in a
/// ```json fenced block. Unknown fields are ignored with a warning.
PlanResponse parse_plan(const std::string& raw);

nlohmann::json to_json(const PlanResponse& plan);

struct StageVolume {
  int stage = 0;
  double input_volume = 0.0;     // declared volumes of the consumed variables
  double declared_output = 0.0;  // declared volumes of the produced variables
  double program_volume = 0.0;   // analytic/MC volume of the stage shape
  double change = 0.0;           // relative change input -> program volume
};

enum class Verdict { kPass, kWarn, kReject };
std::string to_string(Verdict v);

struct ValidationReport {
  std::vector<StageVolume> stages;
  double end_to_end_change = 0.0;  // initial volume -> final stage shape
  bool flow_ok = true;
  std::vector<std::string> flow_errors;
  std::vector<std::string> messages;
  Verdict verdict = Verdict::kPass;
};

struct VolumeThresholds {
  double warn = 0.10;
  double reject = 0.50;
};

/// Volume bookkeeping and variable flow. The verdict follows the largest of
/// the per-stage and end-to-end changes; a broken flow rejects.
ValidationReport validate_plan(const PlanResponse& plan, double initial_volume,
                               const VolumeThresholds& thresholds = {});

nlohmann::json to_json(const ValidationReport& report);

/// One subgoal cloud per stage (stage k uses seed + k). dim 2 samples the
/// z = 0 cross-section instead of the volume.
std::vector<PointCloud> compile_subgoals(const PlanResponse& plan, std::size_t n_points,
                                         std::uint64_t seed, int dim = 3);

}  // namespace dough
