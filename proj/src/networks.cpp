#include "bdff/networks.hpp"

#include <algorithm>
#include <map>

namespace bdff::nets {

using nn::GraphBuilder;
using nn::LayerKind;
using nn::LayerSpec;
using nn::NetworkGraph;

void WidthConfig::validate() const {
  if (base < 1) throw ConfigError("width config: base channels must be >= 1");
  if (rounds < 1) throw ConfigError("width config: rounds must be >= 1");
  if (hourglass_scales < 1) throw ConfigError("width config: hourglass scales must be >= 1");
}

namespace {

// Layer names inside composites are <prefix><local name>; when
// share_prefix is non-empty the layers reuse that subgraph's parameters.
std::string append_edofnet(GraphBuilder& b, const std::string& prefix, const std::string& in,
                           const WidthConfig& width, const std::string& share_prefix = "") {
  auto share = [&](const std::string& local) {
    return share_prefix.empty() ? std::string() : share_prefix + local;
  };
  const int w = width.base;
  std::string t = in;
  for (int i = 1; i <= 19; ++i) {
    const std::string local = "c" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    const int in_ch = (i == 1) ? kStackChannels : w;
    t = b.conv_bn_prelu(prefix + local, t, in_ch, w, 3, 1, 1, share(local));
  }
  return b.conv(prefix + "c20.c", t, w, 3, 3, 1, 1, share("c20.c"));
}

std::string append_focusnet(GraphBuilder& b, const std::string& prefix, const std::string& in,
                            const WidthConfig& width) {
  const int w = width.base;
  // branch 1: full resolution
  std::string t1 = b.conv_bn_prelu(prefix + "b1c1", in, kStackChannels, w, 3);
  t1 = b.conv_bn_prelu(prefix + "b1c2", t1, w, w, 3);
  t1 = b.conv_bn_prelu(prefix + "b1c3", t1, w, w, 3);
  // branches 2-4: strided sampling with larger kernels, two 3x3 stages at
  // scale, deconvolution back to full resolution
  struct BranchCfg {
    const char* name;
    int stride, down_k, up_k, mult;
  };
  const BranchCfg branches[] = {
      {"b2", 2, 4, 4, 2}, {"b3", 4, 6, 8, 4}, {"b4", 8, 10, 16, 8}};
  std::vector<std::string> outs = {t1};
  for (const auto& br : branches) {
    const int bw = w * br.mult;
    std::string t = b.conv_bn_prelu(prefix + br.name + "d", in, kStackChannels, bw, br.down_k,
                                    br.stride, 1);
    t = b.conv_bn_prelu(prefix + br.name + "c1", t, bw, bw, 3);
    t = b.conv_bn_prelu(prefix + br.name + "c2", t, bw, bw, 3);
    t = b.deconv_bn_prelu(prefix + br.name + "u", t, bw, w, br.up_k, br.stride);
    outs.push_back(t);
  }
  std::string cat = b.concat(prefix + "cat", outs, {w, w, w, w});
  std::string f = b.conv_bn_prelu(prefix + "f1", cat, 4 * w, 2 * w, 3);
  f = b.conv_bn_prelu(prefix + "f2", f, 2 * w, 2 * w, 3);
  return b.conv(prefix + "f3.c", f, 2 * w, 1, 3, 1, 1);
}

std::string append_fusion(GraphBuilder& b, const std::string& prefix, const std::string& in,
                          int in_ch, const WidthConfig& width) {
  const int w = width.base;
  std::string t = b.conv_bn_prelu(prefix + "f01", in, in_ch, w, 3);
  for (int i = 2; i <= 9; ++i) {
    t = b.conv_bn_prelu(prefix + "f0" + std::to_string(i), t, w, w, 3);
  }
  return b.conv(prefix + "f10.c", t, w, 1, 3, 1, 1);
}

std::string append_bdff_head(GraphBuilder& b, const std::string& in,
                             const WidthConfig& width) {
  const int w = width.base;
  std::string t = b.conv_bn_prelu("head.h1", in, 5, w, 3);
  t = b.conv_bn_prelu("head.h2", t, w, w, 3);
  t = b.conv_bn_prelu("head.h3", t, w, w, 3);
  return b.conv("head.h4.c", t, w, 1, 3, 1, 1);
}

struct HourglassResult {
  std::string features;
  std::vector<std::string> taps;
};

// Stacked hourglass: per round, max pooling interleaved with residual
// modules on the way down, mirrored deconvolutions on the way up, residual
// skip connections merged by elementwise addition at every scale, and a
// 1x1 disparity head supervised after each round. Round weights are
// independent.
HourglassResult append_stereonet(GraphBuilder& b, const std::string& prefix,
                                 const std::string& in, const WidthConfig& width, int rounds) {
  const int w = width.base;
  const int scales = width.hourglass_scales;
  auto ch = [&](int scale) { return std::min(w << scale, 4 * w); };

  std::string feat = b.conv_bn_prelu(prefix + "stem", in, 6, w, 3);
  feat = b.residual_module(prefix + "stem.r", feat, w, w);

  HourglassResult result;
  for (int r = 1; r <= rounds; ++r) {
    const std::string rp = prefix + "r" + std::to_string(r) + ".";
    std::vector<std::string> skips(scales);
    std::string x = feat;
    for (int i = 0; i < scales; ++i) {
      skips[i] = b.residual_module(rp + "s" + std::to_string(i), x, ch(i), ch(i));
      std::string p = b.maxpool(rp + "p" + std::to_string(i + 1), x, ch(i));
      x = b.residual_module(rp + "d" + std::to_string(i + 1), p, ch(i), ch(i + 1));
    }
    x = b.residual_module(rp + "bottom", x, ch(scales), ch(scales));
    for (int i = scales - 1; i >= 0; --i) {
      std::string u = b.deconv_bn_prelu(rp + "u" + std::to_string(i), x, ch(i + 1), ch(i), 4, 2);
      x = b.add(rp + "m" + std::to_string(i), u, skips[i], ch(i));
      x = b.residual_module(rp + "g" + std::to_string(i), x, ch(i), ch(i));
    }
    result.taps.push_back(b.conv(rp + "head.c", x, w, 1, 1, 1, 0));
    feat = x;
  }
  result.features = feat;
  return result;
}

}  // namespace

NetworkGraph build_edofnet(const WidthConfig& width) {
  width.validate();
  GraphBuilder b("edofnet");
  std::string in = b.add_input(tensors::kStack, kStackChannels);
  std::string out = append_edofnet(b, "", in, width);
  b.mark_output(out);
  b.mark_tap(out);
  return std::move(b).build();
}

NetworkGraph build_focusnet(const WidthConfig& width) {
  width.validate();
  GraphBuilder b("focusnet");
  std::string in = b.add_input(tensors::kStack, kStackChannels);
  std::string out = append_focusnet(b, "", in, width);
  b.mark_output(out);
  b.mark_tap(out);
  return std::move(b).build();
}

NetworkGraph build_focusnet_v2(const WidthConfig& width) {
  width.validate();
  GraphBuilder b("focusnet_v2");
  std::string in = b.add_input(tensors::kStack, kStackChannels);
  std::string depth = append_focusnet(b, "focus.", in, width);
  std::string edof = append_edofnet(b, "edof.", in, width);
  std::string cat = b.concat("fuse.cat", {depth, edof}, {1, 3});
  std::string out = append_fusion(b, "fuse.", cat, 4, width);
  b.mark_output(out);
  b.mark_output(depth);  // sub-net taps, retrievable for inspection
  b.mark_output(edof);
  b.mark_tap(out);
  return std::move(b).build();
}

NetworkGraph build_stereonet(const WidthConfig& width, int rounds) {
  WidthConfig cfg = width;
  cfg.rounds = rounds;
  cfg.validate();
  GraphBuilder b("stereonet");
  std::string in = b.add_input(tensors::kEdofPair, 6);
  HourglassResult hg = append_stereonet(b, "", in, cfg, rounds);
  b.mark_output(hg.taps.back());
  for (const auto& t : hg.taps) b.mark_tap(t);
  return std::move(b).build();
}

NetworkGraph build_bdff_head(const WidthConfig& width) {
  width.validate();
  GraphBuilder b("bdff_head");
  std::string in = b.add_input(tensors::kHeadIn, 5);
  std::string out = append_bdff_head(b, in, width);
  b.mark_output(out);
  b.mark_tap(out);
  return std::move(b).build();
}

NetworkGraph build_stereo_with_edof(const WidthConfig& width) {
  width.validate();
  GraphBuilder b("stereo_with_edof");
  std::string left = b.add_input(tensors::kStackLeft, kStackChannels);
  std::string right = b.add_input(tensors::kStackRight, kStackChannels);
  std::string edof_left = append_edofnet(b, "edof.", left, width);
  std::string edof_right = append_edofnet(b, "edofR.", right, width, "edof.");
  std::string pair = b.concat("stereo.cat", {edof_left, edof_right}, {3, 3});
  HourglassResult hg = append_stereonet(b, "stereo.", pair, width, width.rounds);
  b.mark_output(hg.taps.back());
  b.mark_output(edof_left);
  for (const auto& t : hg.taps) b.mark_tap(t);
  return std::move(b).build();
}

NetworkGraph build_bdffnet(const WidthConfig& width) {
  width.validate();
  GraphBuilder b("bdffnet");
  std::string left = b.add_input(tensors::kStackLeft, kStackChannels);
  std::string right = b.add_input(tensors::kStackRight, kStackChannels);

  std::string edof_left = append_edofnet(b, "edof.", left, width);
  // right eye runs the same EDoF weights
  std::string edof_right = append_edofnet(b, "edofR.", right, width, "edof.");

  std::string depth = append_focusnet(b, "focus.", left, width);
  std::string fuse_cat = b.concat("fuse.cat", {depth, edof_left}, {1, 3});
  std::string depth2 = append_fusion(b, "fuse.", fuse_cat, 4, width);

  std::string pair = b.concat("stereo.cat", {edof_left, edof_right}, {3, 3});
  HourglassResult hg = append_stereonet(b, "stereo.", pair, width, width.rounds);

  std::string head_in =
      b.concat("head.cat", {hg.taps.back(), depth2, edof_left}, {1, 1, 3});
  std::string out = append_bdff_head(b, head_in, width);

  b.mark_output(out);
  b.mark_output(hg.taps.back());
  b.mark_output(depth2);
  b.mark_output(edof_left);
  b.mark_tap(out);
  return std::move(b).build();
}

// --------------------------------------------------------------------------
// Receptive field by interval propagation: walk the layers in reverse,
// tracking the input-index interval that influences output pixel 0.
// --------------------------------------------------------------------------

namespace {

int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
int64_t ceil_div(int64_t a, int64_t b) { return -floor_div(-a, b); }

struct Interval {
  int64_t lo = 0, hi = 0;
};

}  // namespace

int receptive_field(const nn::NetworkGraph& graph) {
  graph.validate();
  std::map<std::string, Interval> need;
  need[graph.outputs.at(0)] = {0, 0};

  auto merge = [&](const std::string& name, Interval iv) {
    auto it = need.find(name);
    if (it == need.end()) {
      need[name] = iv;
    } else {
      it->second.lo = std::min(it->second.lo, iv.lo);
      it->second.hi = std::max(it->second.hi, iv.hi);
    }
  };

  for (size_t li = graph.layers.size(); li-- > 0;) {
    const LayerSpec& l = graph.layers[li];
    auto it = need.find(l.output);
    if (it == need.end()) continue;
    const Interval out = it->second;
    Interval in;
    switch (l.kind) {
      case LayerKind::Conv2D:
        in = {out.lo * l.stride - l.padding, out.hi * l.stride - l.padding + l.kernel - 1};
        break;
      case LayerKind::MaxPool2x2:
        in = {out.lo * 2, out.hi * 2 + 1};
        break;
      case LayerKind::Deconv2D: {
        const int crop = nn::deconv2d_crop(l.kernel, l.stride);
        in = {ceil_div(out.lo + crop - l.kernel + 1, l.stride),
              floor_div(out.hi + crop, l.stride)};
        break;
      }
      default:
        in = out;
        break;
    }
    for (const auto& iname : l.inputs) merge(iname, in);
  }

  int64_t rf = 1;
  for (const auto& gin : graph.inputs) {
    auto it = need.find(gin.name);
    if (it == need.end()) continue;
    rf = std::max(rf, it->second.hi - it->second.lo + 1);
  }
  return static_cast<int>(rf);
}

}  // namespace bdff::nets
