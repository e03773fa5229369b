// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace polycam {

// Argument validation failures use std::invalid_argument directly.

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an explanation has zero norm and a relative measure is undefined.
class DegenerateExplanationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace polycam
