#pragma once

#include "sipo/core.hpp"

#include <functional>

namespace sipo {

/// Worker count for operator applications. Honours SIPO_THREADS when set,
/// otherwise std::thread::hardware_concurrency().
int thread_count();

/// Override the worker count for this process (0 restores the default).
void set_thread_count(int n);

/// Runs body(chunk, begin, end) for `chunks` contiguous pieces of [0, n).
/// Chunk boundaries depend only on n and chunks, never on the worker count,
/// so callers that reduce per-chunk results in chunk order stay bit-identical
/// across thread settings.
void parallel_chunks(Index n, Index chunks, const std::function<void(Index, Index, Index)>& body);

}  // namespace sipo
