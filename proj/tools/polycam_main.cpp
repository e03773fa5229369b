// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "polycam/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return polycam::run_cli(args, std::cout, std::cerr);
}
