#include "bdff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

namespace bdff::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'B', 'D', 'F', 'F', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& is, const std::string& path) {
  uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw IoError("checkpoint " + path + ": truncated file");
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<CheckpointBlock>& blocks) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, kVersion);
  write_u32(os, static_cast<uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    write_u32(os, static_cast<uint32_t>(b.name.size()));
    os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    write_u32(os, static_cast<uint32_t>(b.shape.size()));
    for (int e : b.shape) write_u32(os, static_cast<uint32_t>(e));
    os.write(reinterpret_cast<const char*>(b.data.data()),
             static_cast<std::streamsize>(b.data.size() * sizeof(float)));
  }
  if (!os) throw IoError("failed while writing checkpoint: " + path);
}

std::vector<CheckpointBlock> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("checkpoint " + path + ": bad magic");
  }
  const uint32_t version = read_u32(is, path);
  if (version != kVersion) {
    throw IoError("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  const uint32_t count = read_u32(is, path);
  std::vector<CheckpointBlock> blocks;
  blocks.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointBlock b;
    const uint32_t name_len = read_u32(is, path);
    b.name.resize(name_len);
    if (!is.read(b.name.data(), name_len)) throw IoError("checkpoint " + path + ": truncated");
    const uint32_t rank = read_u32(is, path);
    int64_t numel = 1;
    b.shape.resize(rank);
    for (uint32_t r = 0; r < rank; ++r) {
      b.shape[r] = static_cast<int>(read_u32(is, path));
      numel *= b.shape[r];
    }
    b.data.resize(static_cast<size_t>(numel));
    if (!is.read(reinterpret_cast<char*>(b.data.data()),
                 static_cast<std::streamsize>(b.data.size() * sizeof(float)))) {
      throw IoError("checkpoint " + path + ": truncated block " + b.name);
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

namespace {

template <class T>
CheckpointBlock to_block(const std::string& name, const TensorT<T>& t) {
  CheckpointBlock b;
  b.name = name;
  b.shape = t.shape;
  b.data.resize(t.values.size());
  for (size_t i = 0; i < t.values.size(); ++i) b.data[i] = static_cast<float>(t.values[i]);
  return b;
}

template <class T>
void assign_from_block(TensorT<T>& t, const CheckpointBlock& b, const std::string& path) {
  if (t.shape != b.shape) {
    throw UsageError("checkpoint " + path + ": block " + b.name + " has shape " +
                     TensorT<T>::dims_str(b.shape) + ", expected " + t.dims());
  }
  for (size_t i = 0; i < b.data.size(); ++i) t.values[i] = static_cast<T>(b.data[i]);
}

}  // namespace

template <class T>
void save_runtime(const GraphRuntime<T>& runtime, const std::string& path,
                  const AdamState<T>* adam) {
  std::vector<CheckpointBlock> blocks;
  const auto names = runtime.param_names();
  for (const auto& name : names) blocks.push_back(to_block(name, runtime.param(name)));
  for (const auto& [prefix, st] : runtime.bn_states()) {
    blocks.push_back(to_block(prefix + ".running_mean", st.running_mean));
    blocks.push_back(to_block(prefix + ".running_var", st.running_var));
    CheckpointBlock nb;
    nb.name = prefix + ".num_updates";
    nb.shape = {1};
    nb.data = {static_cast<float>(st.num_updates)};
    blocks.push_back(std::move(nb));
  }
  if (adam && !adam->m.empty()) {
    for (size_t i = 0; i < names.size(); ++i) {
      blocks.push_back(to_block("adam.m:" + names[i], adam->m[i]));
      blocks.push_back(to_block("adam.v:" + names[i], adam->v[i]));
    }
    CheckpointBlock sb;
    sb.name = "adam.step";
    sb.shape = {1};
    sb.data = {static_cast<float>(adam->step)};
    blocks.push_back(std::move(sb));
  }
  write_checkpoint(path, blocks);
}

template <class T>
LoadReport load_runtime(GraphRuntime<T>& runtime, const std::string& path,
                        const std::string& target_prefix, AdamState<T>* adam,
                        const std::vector<std::string>& expected_prefixes) {
  const auto blocks = read_checkpoint(path);
  LoadReport report;

  const std::vector<std::string> prefixes =
      expected_prefixes.empty() ? std::vector<std::string>{target_prefix} : expected_prefixes;
  std::set<std::string> expected;
  for (const auto& name : runtime.param_names()) {
    for (const auto& pre : prefixes) {
      if (name.rfind(pre, 0) == 0) {
        expected.insert(name);
        break;
      }
    }
  }
  if (expected.empty()) {
    throw UsageError("checkpoint " + path + ": no runtime parameters under prefix '" +
                     target_prefix + "'");
  }

  if (adam) adam->init(runtime.param_ptrs());
  const auto names = runtime.param_names();
  auto param_index = [&](const std::string& n) -> int64_t {
    auto it = std::lower_bound(names.begin(), names.end(), n);
    if (it == names.end() || *it != n) return -1;
    return it - names.begin();
  };

  for (const auto& b : blocks) {
    const std::string target = target_prefix + b.name;
    if (runtime.has_param(target)) {
      assign_from_block(runtime.param(target), b, path);
      expected.erase(target);
      report.loaded.push_back(target);
      continue;
    }
    bool consumed = false;
    for (auto suffix : {".running_mean", ".running_var", ".num_updates"}) {
      const std::string s(suffix);
      if (target.size() > s.size() && target.compare(target.size() - s.size(), s.size(), s) == 0) {
        const std::string prefix = target.substr(0, target.size() - s.size());
        auto it = runtime.bn_states().find(prefix);
        if (it != runtime.bn_states().end()) {
          if (s == ".running_mean") {
            assign_from_block(it->second.running_mean, b, path);
          } else if (s == ".running_var") {
            assign_from_block(it->second.running_var, b, path);
          } else {
            it->second.num_updates = static_cast<int64_t>(b.data.at(0));
          }
          report.loaded.push_back(target);
          consumed = true;
        }
        break;
      }
    }
    if (consumed) continue;
    if (adam && b.name.rfind("adam.m:", 0) == 0) {
      const int64_t idx = param_index(target_prefix + b.name.substr(7));
      if (idx >= 0) {
        assign_from_block(adam->m[idx], b, path);
        report.adam_loaded = true;
        continue;
      }
    }
    if (adam && b.name.rfind("adam.v:", 0) == 0) {
      const int64_t idx = param_index(target_prefix + b.name.substr(7));
      if (idx >= 0) {
        assign_from_block(adam->v[idx], b, path);
        report.adam_loaded = true;
        continue;
      }
    }
    if (adam && b.name == "adam.step") {
      adam->step = static_cast<int64_t>(b.data.at(0));
      report.adam_loaded = true;
      continue;
    }
    report.unused_file_blocks.push_back(b.name);
  }

  if (!expected.empty()) {
    std::string msg = "checkpoint " + path + ": missing parameter blocks:";
    for (const auto& m : expected) msg += " " + m;
    throw UsageError(msg);
  }
  return report;
}

#define BDFF_INSTANTIATE(T)                                                                 \
  template void save_runtime<T>(const GraphRuntime<T>&, const std::string&,                \
                                const AdamState<T>*);                                      \
  template LoadReport load_runtime<T>(GraphRuntime<T>&, const std::string&,                \
                                      const std::string&, AdamState<T>*,                    \
                                      const std::vector<std::string>&);

BDFF_INSTANTIATE(float)
BDFF_INSTANTIATE(double)

#undef BDFF_INSTANTIATE

}  // namespace bdff::nn
