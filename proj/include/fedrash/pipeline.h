/*
 * Copyright 2026 The Fedrash Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDRASH_PIPELINE_H_
#define FEDRASH_PIPELINE_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "fedrash/config.h"

namespace fedrash {

// Stage names in execution order, followed by "run-all".
const std::vector<std::string>& StageNames();

struct RunOptions {
  std::string stage = "run-all";
  bool force = false;  // Re-run the requested stages even when cached.
  int workers = 1;
  std::filesystem::path output;
};

struct StageOutcome {
  std::string stage;
  bool cached = false;
};

struct RunSummary {
  std::filesystem::path output;
  std::vector<StageOutcome> stages;
};

// Runs one stage, or every stage for "run-all", against the artifact
// directory. A stage whose recorded input key matches the current one and
// whose outputs are intact is skipped. A single stage requires its upstream
// stages to be current. Failures name the stage.
absl::StatusOr<RunSummary> RunPipeline(const ExperimentConfig& config,
                                       const RunOptions& options);

// Command-line entry point. Returns 0 on success, 2 on a configuration or
// usage error and 3 when a stage fails.
int RunCli(int argc, const char* const* argv);

}  // namespace fedrash

#endif  // FEDRASH_PIPELINE_H_
