// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#include "histoselect/cli.hpp"

int main(int argc, char** argv) {
    return histoselect::cli::run(argc, argv);
}
