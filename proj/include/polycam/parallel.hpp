// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace polycam {

/// Worker count from POLYCAM_WORKERS, else the hardware concurrency.
std::size_t worker_count();

/// Runs task(i) for i in [0, n) over worker_count() threads. Each index is
/// visited exactly once; the first exception thrown is rethrown after join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace polycam
