#include "bdff/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include "bdff/checkpoint.hpp"
#include "bdff/rng.hpp"

namespace bdff::train {

namespace fs = std::filesystem;
using data::CompactSample;
using data::PatchExample;
using data::PatchTarget;
using nets::WidthConfig;
using nn::Mode;

namespace {
nn::AdamState<float>* const kNoAdam = nullptr;
}  // namespace

const char* net_name(NetKind kind) {
  switch (kind) {
    case NetKind::Edof: return "edof";
    case NetKind::Focus: return "focus";
    case NetKind::Focus2: return "focus2";
    case NetKind::Stereo: return "stereo";
    case NetKind::Bdff: return "bdff";
  }
  return "?";
}

NetKind net_from_name(const std::string& name) {
  for (NetKind k : {NetKind::Edof, NetKind::Focus, NetKind::Focus2, NetKind::Stereo,
                    NetKind::Bdff}) {
    if (name == net_name(k)) return k;
  }
  throw ConfigError("unknown network '" + name + "' (use edof|focus|focus2|stereo|bdff)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lambda", lambda},
          {"beta1", beta1},
          {"beta2", beta2},
          {"lr", lr},
          {"bn_momentum", bn_momentum},
          {"epochs", epochs},
          {"iters_per_epoch", iters_per_epoch},
          {"batch_size", batch_size},
          {"patch_focus", patch_focus},
          {"patch_stereo", patch_stereo},
          {"width", width},
          {"seed", seed},
          {"freeze_pretrained", freeze_pretrained},
          {"val_fraction_percent", val_fraction_percent},
          {"val_patches_per_sample", val_patches_per_sample}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lambda = j.value("lambda", c.lambda);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.lr = j.value("lr", c.lr);
  c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
  c.epochs = j.value("epochs", c.epochs);
  c.iters_per_epoch = j.value("iters_per_epoch", c.iters_per_epoch);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patch_focus = j.value("patch_focus", c.patch_focus);
  c.patch_stereo = j.value("patch_stereo", c.patch_stereo);
  c.width = j.value("width", c.width);
  c.seed = j.value("seed", c.seed);
  c.freeze_pretrained = j.value("freeze_pretrained", c.freeze_pretrained);
  c.val_fraction_percent = j.value("val_fraction_percent", c.val_fraction_percent);
  c.val_patches_per_sample = j.value("val_patches_per_sample", c.val_patches_per_sample);
  return c;
}

double mae(const ImageF& pred, const ImageF& gt) {
  if (pred.c != gt.c || pred.h != gt.h || pred.w != gt.w) {
    throw ShapeError("mae: shape mismatch " + std::to_string(pred.h) + "x" +
                     std::to_string(pred.w) + " vs " + std::to_string(gt.h) + "x" +
                     std::to_string(gt.w));
  }
  double sum = 0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    sum += std::fabs(static_cast<double>(pred.v[i]) - gt.v[i]);
  }
  return sum / pred.v.size();
}

namespace {

Tensor stack_to_tensor(const std::vector<ImageU8>& slices) {
  const int h = slices[0].h, w = slices[0].w;
  const int n = static_cast<int>(slices.size());
  Tensor t({1, n * 3, h, w});
  constexpr float kInv = 1.0f / 255.0f;
  for (int s = 0; s < n; ++s)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) t.at4(0, s * 3 + c, y, x) = slices[s].at(c, y, x) * kInv;
  return t;
}

Tensor stack_to_tensor(const optics::FocalStack& stack) {
  const int h = stack.slices[0].h, w = stack.slices[0].w;
  const int n = static_cast<int>(stack.slices.size());
  Tensor t({1, n * 3, h, w});
  for (int s = 0; s < n; ++s) {
    std::copy(stack.slices[s].v.begin(), stack.slices[s].v.end(),
              t.values.begin() + static_cast<int64_t>(s) * 3 * h * w);
  }
  return t;
}

Tensor image_to_tensor(const ImageF& img) {
  Tensor t({1, img.c, img.h, img.w});
  std::copy(img.v.begin(), img.v.end(), t.values.begin());
  return t;
}

ImageF tensor_to_image(const Tensor& t, int batch_index = 0) {
  const int c = t.shape[1], h = t.shape[2], w = t.shape[3];
  ImageF img(c, h, w);
  const int64_t plane = static_cast<int64_t>(c) * h * w;
  std::copy_n(t.values.begin() + batch_index * plane, plane, img.v.begin());
  return img;
}

// pair patch for stereo training on cached EDoF images; a horizontal flip
// swaps the eyes and takes the right-view ground truth
void extract_pair_patch(const ImageF& edof_l, const ImageF& edof_r, const ImageF& gt_l,
                        const ImageF& gt_r, int p, int y0, int x0, bool hflip, bool vflip,
                        Tensor& input6, Tensor& target) {
  input6 = Tensor({1, 6, p, p});
  target = Tensor({1, 1, p, p});
  const ImageF& first = hflip ? edof_r : edof_l;
  const ImageF& second = hflip ? edof_l : edof_r;
  const ImageF& gt = hflip ? gt_r : gt_l;
  for (int y = 0; y < p; ++y) {
    const int sy = vflip ? y0 + p - 1 - y : y0 + y;
    for (int x = 0; x < p; ++x) {
      const int sx = hflip ? x0 + p - 1 - x : x0 + x;
      for (int c = 0; c < 3; ++c) {
        input6.at4(0, c, y, x) = first.at(c, sy, sx);
        input6.at4(0, 3 + c, y, x) = second.at(c, sy, sx);
      }
      target.at4(0, 0, y, x) = gt.at(0, sy, sx);
    }
  }
}

struct Batch {
  std::map<std::string, Tensor> inputs;
  Tensor target;
};

void append_to_batch(Tensor& dst, const Tensor& one, int index) {
  const int64_t plane = one.numel();
  std::copy(one.values.begin(), one.values.end(), dst.values.begin() + index * plane);
}

Tensor batch_like(const Tensor& one, int batch) {
  std::vector<int> shape = one.shape;
  shape[0] = batch;
  return Tensor(shape);
}

struct DataBundle {
  std::vector<CompactSample> train, val;
  // caches filled per stage
  std::vector<ImageF> edof_left, edof_right;          // stereo stage
  std::vector<ImageF> edof_left_val, edof_right_val;  // stereo stage
  std::vector<ImageF> head_in, head_in_val;           // frozen bdff stage
};

int stereo_patch_extent(const TrainConfig& config, int h, int w) {
  int p = std::min({config.patch_stereo, h, w});
  p -= p % 16;  // hourglass pooling depth
  if (p < 16) throw ConfigError("stereo patch too small after rounding to /16");
  return p;
}

Batch make_batch(NetKind kind, const DataBundle& data, const TrainConfig& config,
                 RandomStream& rng) {
  Batch batch;
  const int B = config.batch_size;
  for (int b = 0; b < B; ++b) {
    const int idx = static_cast<int>(rng.uniform_int(0, data.train.size() - 1));
    const CompactSample& s = data.train[idx];
    const int h = s.gt_disparity.h, w = s.gt_disparity.w;
    const bool hflip = rng.uniform() < 0.5, vflip = rng.uniform() < 0.5;

    auto place = [&](const char* name, const Tensor& one) {
      auto it = batch.inputs.find(name);
      if (it == batch.inputs.end()) {
        it = batch.inputs.emplace(name, batch_like(one, B)).first;
      }
      append_to_batch(it->second, one, b);
    };
    auto place_target = [&](const Tensor& one) {
      if (batch.target.numel() == 0) batch.target = batch_like(one, B);
      append_to_batch(batch.target, one, b);
    };

    switch (kind) {
      case NetKind::Edof:
      case NetKind::Focus:
      case NetKind::Focus2: {
        const int p = config.patch_focus;
        const int y0 = static_cast<int>(rng.uniform_int(0, h - p));
        const int x0 = static_cast<int>(rng.uniform_int(0, w - p));
        PatchExample ex = data::extract_patch(s, PatchTarget::Focus, p, y0, x0, hflip, vflip);
        place(nets::tensors::kStack, ex.left);
        place_target(kind == NetKind::Edof ? ex.target_color : ex.target_disparity);
        break;
      }
      case NetKind::Stereo: {
        const int p = stereo_patch_extent(config, h, w);
        const int y0 = static_cast<int>(rng.uniform_int(0, h - p));
        const int x0 = static_cast<int>(rng.uniform_int(0, w - p));
        Tensor in6, target;
        extract_pair_patch(data.edof_left[idx], data.edof_right[idx], s.gt_disparity,
                           s.gt_disparity_right, p, y0, x0, hflip, vflip, in6, target);
        place(nets::tensors::kEdofPair, in6);
        place_target(target);
        break;
      }
      case NetKind::Bdff: {
        if (config.freeze_pretrained) {
          const int p = config.patch_focus;
          const int y0 = static_cast<int>(rng.uniform_int(0, h - p));
          const int x0 = static_cast<int>(rng.uniform_int(0, w - p));
          const ImageF& hi = data.head_in[idx];
          Tensor in({1, 5, p, p}), target({1, 1, p, p});
          for (int y = 0; y < p; ++y) {
            const int sy = vflip ? y0 + p - 1 - y : y0 + y;
            for (int x = 0; x < p; ++x) {
              const int sx = hflip ? x0 + p - 1 - x : x0 + x;
              for (int c = 0; c < 5; ++c) in.at4(0, c, y, x) = hi.at(c, sy, sx);
              target.at4(0, 0, y, x) = s.gt_disparity.at(0, sy, sx);
            }
          }
          place(nets::tensors::kHeadIn, in);
          place_target(target);
        } else {
          const int p = stereo_patch_extent(config, h, w);
          const int y0 = static_cast<int>(rng.uniform_int(0, h - p));
          const int x0 = static_cast<int>(rng.uniform_int(0, w - p));
          PatchExample ex =
              data::extract_patch(s, PatchTarget::Stereo, p, y0, x0, hflip, vflip);
          place(nets::tensors::kStackLeft, ex.left);
          place(nets::tensors::kStackRight, ex.right);
          place_target(ex.target_disparity);
        }
        break;
      }
    }
  }
  return batch;
}

// fixed validation patches, data term only
struct ValPatch {
  int sample = 0, y0 = 0, x0 = 0;
};

std::vector<ValPatch> make_val_patches(NetKind kind, const DataBundle& data,
                                       const TrainConfig& config) {
  RandomStream rng(config.seed, "val_patches");
  std::vector<ValPatch> out;
  for (size_t i = 0; i < data.val.size(); ++i) {
    const int h = data.val[i].gt_disparity.h, w = data.val[i].gt_disparity.w;
    int p = config.patch_focus;
    if (kind == NetKind::Stereo || (kind == NetKind::Bdff && !config.freeze_pretrained)) {
      p = stereo_patch_extent(config, h, w);
    }
    for (int k = 0; k < config.val_patches_per_sample; ++k) {
      ValPatch v;
      v.sample = static_cast<int>(i);
      v.y0 = static_cast<int>(rng.uniform_int(0, h - p));
      v.x0 = static_cast<int>(rng.uniform_int(0, w - p));
      out.push_back(v);
    }
  }
  return out;
}

Batch val_batch(NetKind kind, const DataBundle& data, const TrainConfig& config,
                const ValPatch& v) {
  Batch batch;
  const CompactSample& s = data.val[v.sample];
  const int h = s.gt_disparity.h, w = s.gt_disparity.w;
  switch (kind) {
    case NetKind::Edof:
    case NetKind::Focus:
    case NetKind::Focus2: {
      PatchExample ex = data::extract_patch(s, PatchTarget::Focus, config.patch_focus, v.y0,
                                            v.x0, false, false);
      batch.inputs[nets::tensors::kStack] = ex.left;
      batch.target = kind == NetKind::Edof ? ex.target_color : ex.target_disparity;
      break;
    }
    case NetKind::Stereo: {
      const int p = stereo_patch_extent(config, h, w);
      Tensor in6, target;
      extract_pair_patch(data.edof_left_val[v.sample], data.edof_right_val[v.sample],
                         s.gt_disparity, s.gt_disparity_right, p, v.y0, v.x0, false, false,
                         in6, target);
      batch.inputs[nets::tensors::kEdofPair] = in6;
      batch.target = target;
      break;
    }
    case NetKind::Bdff: {
      if (config.freeze_pretrained) {
        const int p = config.patch_focus;
        const ImageF& hi = data.head_in_val[v.sample];
        Tensor in({1, 5, p, p}), target({1, 1, p, p});
        for (int y = 0; y < p; ++y)
          for (int x = 0; x < p; ++x) {
            for (int c = 0; c < 5; ++c) in.at4(0, c, y, x) = hi.at(c, v.y0 + y, v.x0 + x);
            target.at4(0, 0, y, x) = s.gt_disparity.at(0, v.y0 + y, v.x0 + x);
          }
        batch.inputs[nets::tensors::kHeadIn] = in;
        batch.target = target;
      } else {
        const int p = stereo_patch_extent(config, h, w);
        PatchExample ex = data::extract_patch(s, PatchTarget::Stereo, p, v.y0, v.x0, false,
                                              false);
        batch.inputs[nets::tensors::kStackLeft] = ex.left;
        batch.inputs[nets::tensors::kStackRight] = ex.right;
        batch.target = ex.target_disparity;
      }
      break;
    }
  }
  return batch;
}

WidthConfig width_of(const TrainConfig& config) {
  WidthConfig w;
  w.base = config.width;
  return w;
}

nn::NetworkGraph graph_for_training(NetKind kind, const TrainConfig& config) {
  const WidthConfig w = width_of(config);
  switch (kind) {
    case NetKind::Edof: return nets::build_edofnet(w);
    case NetKind::Focus: return nets::build_focusnet(w);
    case NetKind::Focus2: return nets::build_focusnet_v2(w);
    case NetKind::Stereo: return nets::build_stereonet(w);
    case NetKind::Bdff:
      return config.freeze_pretrained ? nets::build_bdff_head(w) : nets::build_bdffnet(w);
  }
  throw ConfigError("bad net kind");
}

std::string require_ckpt(const std::map<std::string, std::string>& ckpts,
                         const std::string& key, const char* stage) {
  auto it = ckpts.find(key);
  if (it == ckpts.end()) {
    throw UsageError(std::string("stage ") + stage + " requires a pretrained '" + key +
                     "' checkpoint");
  }
  return it->second;
}

}  // namespace

TrainResult train_network(NetKind kind, const data::Manifest& manifest,
                          const TrainConfig& config,
                          const std::map<std::string, std::string>& init_ckpts,
                          const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "checkpoints");

  DataBundle data;
  {
    const int n = static_cast<int>(manifest.train_ids.size());
    const int n_val = std::max(1, n * config.val_fraction_percent / 100);
    for (int i = 0; i < n; ++i) {
      CompactSample s = data::load_compact_sample(manifest.sample_dir(manifest.train_ids[i]));
      if (i < n - n_val) {
        data.train.push_back(std::move(s));
      } else {
        data.val.push_back(std::move(s));
      }
    }
  }
  if (data.train.empty()) throw UsageError("train: no training samples in manifest");

  nn::NetworkGraph graph = graph_for_training(kind, config);
  nn::Runtime32 rt(graph);
  rt.init_params(mix_seed(config.seed ^ hash_name(net_name(kind))));
  rt.set_bn_momentum(config.bn_momentum);

  // pretrained initialization per stage
  if (kind == NetKind::Focus2 && !init_ckpts.empty()) {
    nn::load_runtime(rt, require_ckpt(init_ckpts, "focus", "focus2"), "focus.");
    nn::load_runtime(rt, require_ckpt(init_ckpts, "edof", "focus2"), "edof.");
  }
  if (kind == NetKind::Bdff && !config.freeze_pretrained) {
    nn::load_runtime(rt, require_ckpt(init_ckpts, "edof", "bdff"), "edof.");
    nn::load_runtime(rt, require_ckpt(init_ckpts, "focus2", "bdff"), "", kNoAdam,
                     {"focus.", "edof.", "fuse."});
    nn::load_runtime(rt, require_ckpt(init_ckpts, "stereo", "bdff"), "stereo.");
  }

  // stage caches
  if (kind == NetKind::Stereo) {
    const std::string edof_path = require_ckpt(init_ckpts, "edof", "stereo");
    nn::Runtime32 edof_rt(nets::build_edofnet(width_of(config)));
    edof_rt.init_params(1);
    nn::load_runtime(edof_rt, edof_path);
    auto run = [&](const std::vector<ImageU8>& slices) {
      const Tensor in = stack_to_tensor(slices);
      return tensor_to_image(edof_rt.forward({{nets::tensors::kStack, in}}, Mode::Infer));
    };
    for (const auto& s : data.train) {
      data.edof_left.push_back(run(s.left_slices));
      data.edof_right.push_back(run(s.right_slices));
    }
    for (const auto& s : data.val) {
      data.edof_left_val.push_back(run(s.left_slices));
      data.edof_right_val.push_back(run(s.right_slices));
    }
  }
  if (kind == NetKind::Bdff && config.freeze_pretrained) {
    // precompute the 5-channel head input with the frozen sub-nets
    nn::Runtime32 full(nets::build_bdffnet(width_of(config)));
    full.init_params(1);
    nn::load_runtime(full, require_ckpt(init_ckpts, "edof", "bdff"), "edof.");
    nn::load_runtime(full, require_ckpt(init_ckpts, "focus2", "bdff"), "", kNoAdam,
                     {"focus.", "edof.", "fuse."});
    nn::load_runtime(full, require_ckpt(init_ckpts, "stereo", "bdff"), "stereo.");
    const auto& outs = full.graph().outputs;  // [head out, stereo, depth2, edofL]
    const std::vector<std::string> taps_only = {outs[1], outs[2], outs[3]};
    auto run = [&](const CompactSample& s) {
      std::map<std::string, Tensor> in;
      in[nets::tensors::kStackLeft] = stack_to_tensor(s.left_slices);
      in[nets::tensors::kStackRight] = stack_to_tensor(s.right_slices);
      full.forward(in, Mode::Infer, taps_only);
      const ImageF disp = tensor_to_image(full.activation(outs[1]));
      const ImageF depth2 = tensor_to_image(full.activation(outs[2]));
      const ImageF edof = tensor_to_image(full.activation(outs[3]));
      ImageF head(5, disp.h, disp.w);
      std::copy(disp.v.begin(), disp.v.end(), head.plane(0));
      std::copy(depth2.v.begin(), depth2.v.end(), head.plane(1));
      for (int c = 0; c < 3; ++c) {
        std::copy_n(edof.plane(c), edof.pixels(), head.plane(2 + c));
      }
      return head;
    };
    for (const auto& s : data.train) data.head_in.push_back(run(s));
    for (const auto& s : data.val) data.head_in_val.push_back(run(s));
  }

  // snapshots
  {
    std::ofstream os(fs::path(out_dir) / (std::string("graph_") + net_name(kind) + ".json"));
    os << graph.to_json() << "\n";
  }

  nn::AdamState<float> adam;
  adam.config.lr = config.lr;
  adam.config.beta1 = config.beta1;
  adam.config.beta2 = config.beta2;
  adam.config.weight_decay = config.lambda;

  const auto param_names = rt.param_names();
  auto params = rt.param_ptrs();

  RandomStream batch_rng(config.seed, "batches");
  const auto val_patches = make_val_patches(kind, data, config);
  const auto& taps = graph.taps;

  TrainResult result;
  result.checkpoint =
      (fs::path(out_dir) / "checkpoints" / (std::string(net_name(kind)) + ".ckpt")).string();
  double best_val = std::numeric_limits<double>::infinity();
  bool saved = false;

  auto eval_val = [&]() {
    if (val_patches.empty()) return 0.0;
    double total = 0;
    for (const auto& v : val_patches) {
      Batch b = val_batch(kind, data, config, v);
      rt.forward(b.inputs, Mode::Infer);
      double loss = 0;
      for (const auto& tap : taps) {
        loss += nn::mse_l2_loss<float>(rt.activation(tap), b.target, {}, 0.0);
      }
      total += loss / taps.size();
    }
    return total / val_patches.size();
  };

  for (int epoch = 1; epoch <= config.epochs && !result.aborted; ++epoch) {
    double epoch_loss = 0;
    for (int iter = 0; iter < config.iters_per_epoch; ++iter) {
      Batch batch = make_batch(kind, data, config, batch_rng);
      rt.zero_grad();
      rt.forward(batch.inputs, Mode::Train);
      double loss = 0;
      std::map<std::string, Tensor> grads;
      for (const auto& tap : taps) {
        loss += nn::mse_l2_loss<float>(rt.activation(tap), batch.target, {}, 0.0) /
                taps.size();
        grads[tap] = nn::mse_grad<float>(rt.activation(tap), batch.target, 1.0 / taps.size());
      }
      if (config.lambda > 0) {
        double reg = 0;
        for (const auto* p : rt.param_cptrs()) {
          for (float v : p->values) reg += static_cast<double>(v) * v;
        }
        loss += 0.5 * config.lambda * reg;
      }
      if (!std::isfinite(loss)) {
        std::cerr << net_name(kind) << ": non-finite loss at epoch " << epoch
                  << ", keeping last good checkpoint\n";
        result.aborted = true;
        break;
      }
      rt.backward(grads);
      nn::add_l2_grad(params, config.lambda);
      try {
        nn::adam_step(params, adam, param_names);
      } catch (const DomainError& e) {
        std::cerr << net_name(kind) << ": " << e.what() << ", stopping\n";
        result.aborted = true;
        break;
      }
      epoch_loss += loss;
    }
    epoch_loss /= config.iters_per_epoch;
    const double val_loss = eval_val();
    result.train_loss.push_back(epoch_loss);
    result.val_loss.push_back(val_loss);
    std::cout << net_name(kind) << " epoch " << epoch << "/" << config.epochs << " train "
              << epoch_loss << " val " << val_loss << std::endl;
    if (val_loss < best_val || val_patches.empty()) {
      best_val = val_loss;
      result.best_epoch = epoch;
      nn::save_runtime(rt, result.checkpoint, &adam);
      saved = true;
    }
  }
  if (!saved) nn::save_runtime(rt, result.checkpoint, &adam);

  // frozen-head training yields a partial model: assemble and save the full
  // composite so downstream consumers load one checkpoint
  if (kind == NetKind::Bdff && config.freeze_pretrained) {
    nn::Runtime32 full(nets::build_bdffnet(width_of(config)));
    full.init_params(1);
    nn::load_runtime(full, require_ckpt(init_ckpts, "edof", "bdff"), "edof.");
    nn::load_runtime(full, require_ckpt(init_ckpts, "focus2", "bdff"), "", kNoAdam,
                     {"focus.", "edof.", "fuse."});
    nn::load_runtime(full, require_ckpt(init_ckpts, "stereo", "bdff"), "stereo.");
    nn::load_runtime(full, result.checkpoint, "", kNoAdam, {"head."});
    nn::save_runtime(full, result.checkpoint);
  }

  // loss curves
  {
    std::ofstream os(fs::path(out_dir) / (std::string("loss_") + net_name(kind) + ".csv"));
    os << "epoch,train_loss,val_loss\n";
    for (size_t i = 0; i < result.train_loss.size(); ++i) {
      os << (i + 1) << "," << result.train_loss[i] << "," << result.val_loss[i] << "\n";
    }
  }
  return result;
}

// --------------------------------------------------------------------------
// Inference bundles and evaluation
// --------------------------------------------------------------------------

namespace {

nn::NetworkGraph graph_for_inference(NetKind kind, const WidthConfig& w) {
  switch (kind) {
    case NetKind::Edof: return nets::build_edofnet(w);
    case NetKind::Focus: return nets::build_focusnet(w);
    case NetKind::Focus2: return nets::build_focusnet_v2(w);
    case NetKind::Stereo: return nets::build_stereo_with_edof(w);
    case NetKind::Bdff: return nets::build_bdffnet(w);
  }
  throw ConfigError("bad net kind");
}

}  // namespace

ModelBundle::ModelBundle(NetKind kind, const WidthConfig& width,
                         const std::map<std::string, std::string>& ckpts)
    : kind_(kind), graph_(graph_for_inference(kind, width)), runtime_(graph_) {
  runtime_.init_params(1);
  switch (kind) {
    case NetKind::Edof:
      nn::load_runtime(runtime_, ckpts.at("edof"));
      break;
    case NetKind::Focus:
      nn::load_runtime(runtime_, ckpts.at("focus"));
      break;
    case NetKind::Focus2:
      nn::load_runtime(runtime_, ckpts.at("focus2"));
      break;
    case NetKind::Stereo:
      nn::load_runtime(runtime_, ckpts.at("edof"), "edof.");
      nn::load_runtime(runtime_, ckpts.at("stereo"), "stereo.");
      break;
    case NetKind::Bdff:
      nn::load_runtime(runtime_, ckpts.at("bdff"));
      break;
  }
}

std::map<std::string, Tensor> ModelBundle::inputs_for(const data::SamplePair& sample) const {
  std::map<std::string, Tensor> in;
  if (kind_ == NetKind::Stereo || kind_ == NetKind::Bdff) {
    in[nets::tensors::kStackLeft] = stack_to_tensor(sample.left_stack);
    in[nets::tensors::kStackRight] = stack_to_tensor(sample.right_stack);
  } else {
    in[nets::tensors::kStack] = stack_to_tensor(sample.left_stack);
  }
  return in;
}

ImageF ModelBundle::infer(const data::SamplePair& sample) {
  const Tensor& out = runtime_.forward(inputs_for(sample), Mode::Infer);
  ImageF img = tensor_to_image(out);
  for (auto& v : img.v) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

ImageF ModelBundle::infer_edof(const data::SamplePair& sample) {
  runtime_.forward(inputs_for(sample), Mode::Infer);
  std::string tensor_name;
  if (kind_ == NetKind::Edof) {
    tensor_name = graph_.outputs[0];
  } else if (kind_ == NetKind::Stereo || kind_ == NetKind::Bdff) {
    tensor_name = graph_.outputs[1 + (kind_ == NetKind::Bdff ? 2 : 0)];
  } else if (kind_ == NetKind::Focus2) {
    tensor_name = graph_.outputs[2];
  } else {
    throw UsageError("this model does not expose an EDoF image");
  }
  ImageF img = tensor_to_image(runtime_.activation(tensor_name));
  for (auto& v : img.v) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

double ModelBundle::benchmark_seconds(int h, int w, int runs) {
  RandomStream rng(7, "benchmark");
  std::map<std::string, Tensor> in;
  for (const auto& gi : graph_.inputs) {
    Tensor t({1, gi.channels, h, w});
    for (auto& v : t.values) v = static_cast<float>(rng.uniform());
    in[gi.name] = std::move(t);
  }
  runtime_.forward(in, Mode::Infer);  // warmup
  std::vector<double> times;
  for (int r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    runtime_.forward(in, Mode::Infer);
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"model", r.model}, {"mae", r.mae}, {"time_s", r.seconds}});
  }
  return {{"rows", rows_json},
          {"warnings", warnings},
          {"eval_resolution", {eval_h, eval_w}},
          {"config_hash", config_hash},
          {"reference",
           {{"note", "Table-1 full-scale values, citation only, not reproduced"},
            {"FocusNet", 0.045},
            {"FocusNet-v2", 0.031},
            {"StereoNet", 0.024},
            {"BDfFNet", 0.021}}}};
}

std::string EvalReport::to_csv() const {
  std::string csv = "model,mae,time_s\n";
  for (const auto& r : rows) {
    csv += r.model + "," + std::to_string(r.mae) + "," + std::to_string(r.seconds) + "\n";
  }
  csv += "reference (full-scale paper values; citation only; not reproduced),"
         "0.045/0.031/0.024/0.021,0.6/0.9/2.8/9.7\n";
  return csv;
}

EvalReport compare_models(const data::Manifest& manifest,
                          const std::map<std::string, std::string>& ckpts,
                          const TrainConfig& config) {
  for (const char* key : {"edof", "focus", "focus2", "stereo", "bdff"}) {
    if (!ckpts.count(key)) throw UsageError(std::string("compare_models: missing checkpoint ") + key);
  }
  EvalReport report;
  report.config_hash = manifest.config_hash;

  std::vector<data::SamplePair> test;
  for (const auto& id : manifest.test_ids) {
    test.push_back(data::load_sample(manifest.sample_dir(id)));
  }
  if (test.empty()) throw UsageError("compare_models: empty test split");
  report.eval_h = test[0].gt_disparity.h - test[0].gt_disparity.h % 8;
  report.eval_w = test[0].gt_disparity.w - test[0].gt_disparity.w % 8;

  const std::pair<NetKind, const char*> models[] = {{NetKind::Focus, "FocusNet"},
                                                    {NetKind::Focus2, "FocusNet-v2"},
                                                    {NetKind::Stereo, "StereoNet"},
                                                    {NetKind::Bdff, "BDfFNet"}};
  for (const auto& [kind, name] : models) {
    nets::WidthConfig w;
    w.base = config.width;
    ModelBundle bundle(kind, w, ckpts);
    double sum = 0;
    for (const auto& sample : test) {
      ImageF pred = bundle.infer(sample);
      sum += mae(pred, sample.gt_disparity);
    }
    EvalRow row;
    row.model = name;
    row.mae = sum / test.size();
    row.seconds = bundle.benchmark_seconds(report.eval_h, report.eval_w);
    report.rows.push_back(row);
  }

  // soft ordering check, best to worst: bdff <= stereo <= focus2 <= focus
  const double focus = report.rows[0].mae, focus2 = report.rows[1].mae;
  const double stereo = report.rows[2].mae, bdff = report.rows[3].mae;
  auto warn_if = [&](double a, double b, const char* pair) {
    if (a > b) {
      report.warnings.push_back(std::string("quality ordering violated: ") + pair + " (" +
                                std::to_string(a) + " > " + std::to_string(b) + ")");
    }
  };
  warn_if(bdff, stereo, "BDfFNet > StereoNet");
  warn_if(stereo, focus2, "StereoNet > FocusNet-v2");
  warn_if(focus2, focus, "FocusNet-v2 > FocusNet");
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  return report;
}

}  // namespace bdff::train
