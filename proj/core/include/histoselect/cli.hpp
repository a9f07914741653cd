// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace histoselect::cli {

// Entry point behind the histoselect binary. Subcommands: gen, segment,
// select, train, bench, gradcheck, heatmap, rates. Returns the process exit
// status: 0 success, 1 validation/runtime failure (and gradcheck tolerance
// failure), 2 usage error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without the program name

}  // namespace histoselect::cli
