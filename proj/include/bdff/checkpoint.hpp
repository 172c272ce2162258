#pragma once

#include <string>
#include <vector>

#include "bdff/graph.hpp"

namespace bdff::nn {

// Checkpoint file: little-endian binary. Layout:
//   magic "BDFFCKPT", u32 version (1), u32 block count,
//   per block: u32 name length, UTF-8 name, u32 rank, u32 extents[rank],
//              f32 data[product(extents)].
// Parameter blocks use their graph names; batch-norm running statistics and
// Adam moments are stored as additional named blocks:
//   <bn layer>.running_mean / .running_var / .num_updates
//   adam.m:<param> / adam.v:<param> / adam.step

struct CheckpointBlock {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

void write_checkpoint(const std::string& path, const std::vector<CheckpointBlock>& blocks);
std::vector<CheckpointBlock> read_checkpoint(const std::string& path);

template <class T>
void save_runtime(const GraphRuntime<T>& runtime, const std::string& path,
                  const AdamState<T>* adam = nullptr);

struct LoadReport {
  std::vector<std::string> loaded;
  std::vector<std::string> unused_file_blocks;  // file blocks with no target
  bool adam_loaded = false;
};

// Assigns file blocks to runtime parameters/running stats after prepending
// `target_prefix` to every block name. Every runtime parameter under any of
// `expected_prefixes` (default: just target_prefix, "" meaning the whole
// graph) must receive data; otherwise throws UsageError listing the missing
// blocks.
template <class T>
LoadReport load_runtime(GraphRuntime<T>& runtime, const std::string& path,
                        const std::string& target_prefix = "", AdamState<T>* adam = nullptr,
                        const std::vector<std::string>& expected_prefixes = {});

}  // namespace bdff::nn
