// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>

#include "sgad/config.hpp"

namespace sgad {

// Subcommand bodies shared by the CLI binary and the tests. Each returns the
// process exit code (0 success, 1 usage/config, 2 missing artifact, 3
// internal invariant) and reports failures on err.
int cmd_gen_data(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_train(const RunConfig& cfg, const std::string& variant,
              std::ostream& out, std::ostream& err);
int cmd_sample(const RunConfig& cfg, const std::string& caption,
               const std::string& out_dir, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& cfg, const std::string& out_dir,
             std::ostream& out, std::ostream& err);
int cmd_inspect_mask(const std::string& caption, const std::string& kind,
                     bool json_only, std::ostream& out, std::ostream& err);
int cmd_grad_check(std::ostream& out, std::ostream& err);
int cmd_experiment(const RunConfig& cfg, const std::string& out_dir,
                   int scenarios, int samples_per_scenario, bool verbose,
                   std::ostream& out, std::ostream& err);

}  // namespace sgad
