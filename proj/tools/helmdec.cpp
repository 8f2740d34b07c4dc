// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#include "helmdec/config.hpp"

int main(int argc, char** argv) { return helmdec::cli::run(argc, argv); }
