#include "bdff/graph.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "bdff/rng.hpp"

namespace bdff::nn {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::Deconv2D: return "Deconv2D";
    case LayerKind::PReLU: return "PReLU";
    case LayerKind::BatchNorm: return "BatchNorm";
    case LayerKind::MaxPool2x2: return "MaxPool2x2";
    case LayerKind::Concat: return "Concat";
    case LayerKind::Add: return "Add";
  }
  return "?";
}

void NetworkGraph::validate() const {
  std::set<std::string> known, layer_names;
  for (const auto& in : inputs) {
    if (in.channels <= 0) throw ConfigError("graph input " + in.name + ": channels must be > 0");
    if (!known.insert(in.name).second) throw ConfigError("duplicate graph input " + in.name);
  }
  for (const auto& l : layers) {
    if (!layer_names.insert(l.name).second) throw ConfigError("duplicate layer name " + l.name);
    for (const auto& in : l.inputs) {
      if (!known.count(in)) {
        throw ConfigError("layer " + l.name + " consumes tensor '" + in +
                          "' before it is produced");
      }
    }
    if (!l.share_params_with.empty()) {
      bool found = false;
      for (const auto& other : layers) {
        if (other.name == l.share_params_with) {
          if (other.kind != l.kind || other.kernel != l.kernel ||
              other.in_channels != l.in_channels || other.out_channels != l.out_channels) {
            throw ConfigError("layer " + l.name + " cannot share parameters with " +
                              other.name + ": geometry differs");
          }
          found = true;
          break;
        }
        if (other.name == l.name) break;  // share target must come earlier
      }
      if (!found) {
        throw ConfigError("layer " + l.name + " shares parameters with unknown layer " +
                          l.share_params_with);
      }
    }
    if (!known.insert(l.output).second) {
      throw ConfigError("layer " + l.name + " redefines tensor '" + l.output + "'");
    }
  }
  for (const auto& out : outputs) {
    if (!known.count(out)) throw ConfigError("graph output '" + out + "' is never produced");
  }
  for (const auto& tap : taps) {
    if (!known.count(tap)) throw ConfigError("supervision tap '" + tap + "' is never produced");
  }
  if (outputs.empty()) throw ConfigError("graph " + name + " declares no outputs");
}

int NetworkGraph::input_channels(const std::string& input_name) const {
  for (const auto& in : inputs) {
    if (in.name == input_name) return in.channels;
  }
  throw ConfigError("unknown graph input " + input_name);
}

int64_t NetworkGraph::total_param_count() const {
  int64_t n = 0;
  for (const auto& l : layers) {
    if (!l.share_params_with.empty()) continue;
    switch (l.kind) {
      case LayerKind::Conv2D:
      case LayerKind::Deconv2D:
        n += static_cast<int64_t>(l.in_channels) * l.out_channels * l.kernel * l.kernel +
             l.out_channels;
        break;
      case LayerKind::PReLU: n += l.out_channels; break;
      case LayerKind::BatchNorm: n += 2 * static_cast<int64_t>(l.out_channels); break;
      default: break;
    }
  }
  return n;
}

std::map<std::string, Shape4> infer_shapes(const NetworkGraph& graph, int batch, int h, int w) {
  graph.validate();
  std::map<std::string, Shape4> shapes;
  for (const auto& in : graph.inputs) shapes[in.name] = {batch, in.channels, h, w};

  auto get = [&](const std::string& name) -> const Shape4& { return shapes.at(name); };

  for (const auto& l : graph.layers) {
    Shape4 out;
    switch (l.kind) {
      case LayerKind::Conv2D: {
        const Shape4& in = get(l.inputs[0]);
        if (in.c != l.in_channels) {
          throw ShapeError("layer " + l.name + ": input channels " + std::to_string(in.c) +
                           " do not match expected " + std::to_string(l.in_channels));
        }
        const int oh = (in.h + 2 * l.padding - l.kernel) / l.stride + 1;
        const int ow = (in.w + 2 * l.padding - l.kernel) / l.stride + 1;
        if (oh <= 0 || ow <= 0) {
          throw ShapeError("layer " + l.name + ": non-positive output extent from input " +
                           std::to_string(in.h) + "x" + std::to_string(in.w));
        }
        if ((in.h + 2 * l.padding - l.kernel) % l.stride != 0 ||
            (in.w + 2 * l.padding - l.kernel) % l.stride != 0) {
          throw ShapeError("layer " + l.name + ": input " + std::to_string(in.h) + "x" +
                           std::to_string(in.w) + " is not divisible by stride " +
                           std::to_string(l.stride) + " with kernel " +
                           std::to_string(l.kernel) + ", padding " + std::to_string(l.padding));
        }
        out = {in.n, l.out_channels, oh, ow};
        break;
      }
      case LayerKind::Deconv2D: {
        const Shape4& in = get(l.inputs[0]);
        if (in.c != l.in_channels) {
          throw ShapeError("layer " + l.name + ": input channels " + std::to_string(in.c) +
                           " do not match expected " + std::to_string(l.in_channels));
        }
        deconv2d_crop(l.kernel, l.stride);  // validates the configuration
        out = {in.n, l.out_channels, in.h * l.stride, in.w * l.stride};
        break;
      }
      case LayerKind::PReLU:
      case LayerKind::BatchNorm: {
        const Shape4& in = get(l.inputs[0]);
        if (in.c != l.out_channels) {
          throw ShapeError("layer " + l.name + ": channel count " + std::to_string(in.c) +
                           " does not match expected " + std::to_string(l.out_channels));
        }
        out = in;
        break;
      }
      case LayerKind::MaxPool2x2: {
        const Shape4& in = get(l.inputs[0]);
        if (in.h % 2 != 0 || in.w % 2 != 0) {
          throw ShapeError("layer " + l.name + ": pooling requires even extents, got " +
                           std::to_string(in.h) + "x" + std::to_string(in.w));
        }
        out = {in.n, in.c, in.h / 2, in.w / 2};
        break;
      }
      case LayerKind::Concat: {
        int c = 0;
        const Shape4& first = get(l.inputs[0]);
        for (const auto& iname : l.inputs) {
          const Shape4& in = get(iname);
          if (in.h != first.h || in.w != first.w || in.n != first.n) {
            throw ShapeError("layer " + l.name + ": concat input " + iname +
                             " extents differ from " + l.inputs[0]);
          }
          c += in.c;
        }
        if (c != l.out_channels) {
          throw ShapeError("layer " + l.name + ": concat channels sum to " + std::to_string(c) +
                           ", expected " + std::to_string(l.out_channels));
        }
        out = {first.n, c, first.h, first.w};
        break;
      }
      case LayerKind::Add: {
        const Shape4& a = get(l.inputs[0]);
        const Shape4& b = get(l.inputs[1]);
        if (!(a == b)) {
          throw ShapeError("layer " + l.name + ": add inputs differ in shape");
        }
        out = a;
        break;
      }
    }
    shapes[l.output] = out;
  }
  return shapes;
}

std::string NetworkGraph::to_json(int ref_h, int ref_w) const {
  nlohmann::json j;
  j["name"] = name;
  j["outputs"] = outputs;
  j["taps"] = taps;
  nlohmann::json jin = nlohmann::json::array();
  for (const auto& in : inputs) jin.push_back({{"name", in.name}, {"channels", in.channels}});
  j["inputs"] = jin;
  std::map<std::string, Shape4> shapes;
  bool have_shapes = true;
  try {
    shapes = infer_shapes(*this, 1, ref_h, ref_w);
  } catch (const ShapeError&) {
    have_shapes = false;
  }
  nlohmann::json jl = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json e;
    e["name"] = l.name;
    e["kind"] = layer_kind_name(l.kind);
    e["inputs"] = l.inputs;
    e["output"] = l.output;
    if (l.kernel > 0) {
      e["kernel"] = l.kernel;
      e["stride"] = l.stride;
      if (l.kind == LayerKind::Conv2D) e["padding"] = l.padding;
    }
    e["in_channels"] = l.in_channels;
    e["out_channels"] = l.out_channels;
    if (!l.share_params_with.empty()) e["share_params_with"] = l.share_params_with;
    int64_t pc = 0;
    if (l.share_params_with.empty()) {
      switch (l.kind) {
        case LayerKind::Conv2D:
        case LayerKind::Deconv2D:
          pc = static_cast<int64_t>(l.in_channels) * l.out_channels * l.kernel * l.kernel +
               l.out_channels;
          break;
        case LayerKind::PReLU: pc = l.out_channels; break;
        case LayerKind::BatchNorm: pc = 2 * static_cast<int64_t>(l.out_channels); break;
        default: break;
      }
    }
    e["params"] = pc;
    if (have_shapes) {
      const Shape4& s = shapes.at(l.output);
      e["output_shape"] = {s.n, s.c, s.h, s.w};
    }
    jl.push_back(e);
  }
  j["layers"] = jl;
  j["total_params"] = total_param_count();
  j["ref_extent"] = {ref_h, ref_w};
  return j.dump(2);
}

// --------------------------------------------------------------------------
// GraphBuilder
// --------------------------------------------------------------------------

std::string GraphBuilder::fresh_tensor(const std::string& layer_name) {
  return layer_name + ":" + std::to_string(tensor_counter_++);
}

std::string GraphBuilder::add_input(const std::string& name, int channels) {
  graph_.inputs.push_back({name, channels});
  return name;
}

std::string GraphBuilder::conv(const std::string& name, const std::string& in, int in_ch,
                               int out_ch, int k, int stride, int padding,
                               const std::string& share) {
  LayerSpec l;
  l.kind = LayerKind::Conv2D;
  l.name = name;
  l.inputs = {in};
  l.output = fresh_tensor(name);
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel = k;
  l.stride = stride;
  l.padding = padding < 0 ? (k - 1) / 2 : padding;
  l.share_params_with = share;
  graph_.layers.push_back(std::move(l));
  return graph_.layers.back().output;
}

std::string GraphBuilder::deconv(const std::string& name, const std::string& in, int in_ch,
                                 int out_ch, int k, int stride, const std::string& share) {
  LayerSpec l;
  l.kind = LayerKind::Deconv2D;
  l.name = name;
  l.inputs = {in};
  l.output = fresh_tensor(name);
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel = k;
  l.stride = stride;
  l.share_params_with = share;
  graph_.layers.push_back(std::move(l));
  return graph_.layers.back().output;
}

std::string GraphBuilder::prelu(const std::string& name, const std::string& in, int ch,
                                const std::string& share) {
  LayerSpec l;
  l.kind = LayerKind::PReLU;
  l.name = name;
  l.inputs = {in};
  l.output = fresh_tensor(name);
  l.in_channels = ch;
  l.out_channels = ch;
  l.share_params_with = share;
  graph_.layers.push_back(std::move(l));
  return graph_.layers.back().output;
}

std::string GraphBuilder::batchnorm(const std::string& name, const std::string& in, int ch,
                                    const std::string& share) {
  LayerSpec l;
  l.kind = LayerKind::BatchNorm;
  l.name = name;
  l.inputs = {in};
  l.output = fresh_tensor(name);
  l.in_channels = ch;
  l.out_channels = ch;
  l.share_params_with = share;
  graph_.layers.push_back(std::move(l));
  return graph_.layers.back().output;
}

std::string GraphBuilder::maxpool(const std::string& name, const std::string& in, int ch) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool2x2;
  l.name = name;
  l.inputs = {in};
  l.output = fresh_tensor(name);
  l.in_channels = ch;
  l.out_channels = ch;
  l.kernel = 2;
  l.stride = 2;
  graph_.layers.push_back(std::move(l));
  return graph_.layers.back().output;
}

std::string GraphBuilder::concat(const std::string& name, const std::vector<std::string>& ins,
                                 const std::vector<int>& in_chs) {
  LayerSpec l;
  l.kind = LayerKind::Concat;
  l.name = name;
  l.inputs = ins;
  l.output = fresh_tensor(name);
  l.in_channels = 0;
  for (int c : in_chs) l.in_channels += c;
  l.out_channels = l.in_channels;
  graph_.layers.push_back(std::move(l));
  return graph_.layers.back().output;
}

std::string GraphBuilder::add(const std::string& name, const std::string& a,
                              const std::string& b, int ch) {
  LayerSpec l;
  l.kind = LayerKind::Add;
  l.name = name;
  l.inputs = {a, b};
  l.output = fresh_tensor(name);
  l.in_channels = ch;
  l.out_channels = ch;
  graph_.layers.push_back(std::move(l));
  return graph_.layers.back().output;
}

std::string GraphBuilder::conv_bn_prelu(const std::string& name, const std::string& in,
                                        int in_ch, int out_ch, int k, int stride, int padding,
                                        const std::string& share_prefix) {
  auto share = [&](const char* part) {
    return share_prefix.empty() ? std::string() : share_prefix + part;
  };
  std::string t = conv(name + ".c", in, in_ch, out_ch, k, stride, padding, share(".c"));
  t = batchnorm(name + ".bn", t, out_ch, share(".bn"));
  return prelu(name + ".a", t, out_ch, share(".a"));
}

std::string GraphBuilder::deconv_bn_prelu(const std::string& name, const std::string& in,
                                          int in_ch, int out_ch, int k, int stride,
                                          const std::string& share_prefix) {
  auto share = [&](const char* part) {
    return share_prefix.empty() ? std::string() : share_prefix + part;
  };
  std::string t = deconv(name + ".c", in, in_ch, out_ch, k, stride, share(".c"));
  t = batchnorm(name + ".bn", t, out_ch, share(".bn"));
  return prelu(name + ".a", t, out_ch, share(".a"));
}

std::string GraphBuilder::residual_module(const std::string& name, const std::string& in,
                                          int in_ch, int out_ch,
                                          const std::string& share_prefix) {
  auto share = [&](const char* part) {
    return share_prefix.empty() ? std::string() : share_prefix + part;
  };
  const int mid = std::max(out_ch / 2, 1);
  std::string t = conv_bn_prelu(name + ".r1", in, in_ch, mid, 1, 1, 0, share(".r1"));
  t = conv_bn_prelu(name + ".r2", t, mid, mid, 3, 1, 1, share(".r2"));
  t = conv(name + ".r3.c", t, mid, out_ch, 1, 1, 0, share(".r3.c"));
  t = batchnorm(name + ".r3.bn", t, out_ch, share(".r3.bn"));
  std::string skip = in;
  if (in_ch != out_ch) {
    skip = conv(name + ".skip.c", in, in_ch, out_ch, 1, 1, 0, share(".skip.c"));
    skip = batchnorm(name + ".skip.bn", skip, out_ch, share(".skip.bn"));
  }
  t = add(name + ".add", t, skip, out_ch);
  return prelu(name + ".a", t, out_ch, share(".a"));
}

void GraphBuilder::mark_output(const std::string& tensor) { graph_.outputs.push_back(tensor); }
void GraphBuilder::mark_tap(const std::string& tensor) { graph_.taps.push_back(tensor); }

NetworkGraph GraphBuilder::build() && {
  graph_.validate();
  return std::move(graph_);
}

// --------------------------------------------------------------------------
// GraphRuntime
// --------------------------------------------------------------------------

template <class T>
GraphRuntime<T>::GraphRuntime(NetworkGraph graph) : graph_(std::move(graph)) {
  graph_.validate();
  bn_caches_.resize(graph_.layers.size());
  pool_argmax_.resize(graph_.layers.size());
}

template <class T>
void GraphRuntime<T>::init_params(uint64_t seed) {
  params_.clear();
  bn_states_.clear();
  for (const auto& l : graph_.layers) {
    if (!l.share_params_with.empty() || !l.has_params()) continue;
    const uint64_t lseed = mix_seed(seed ^ hash_name(graph_.name + "/" + l.name));
    switch (l.kind) {
      case LayerKind::Conv2D: {
        const int64_t fan_in = static_cast<int64_t>(l.in_channels) * l.kernel * l.kernel;
        params_[l.name + ".weight"] =
            he_init<T>({l.out_channels, l.in_channels, l.kernel, l.kernel}, fan_in, lseed);
        params_[l.name + ".bias"] = TensorT<T>({l.out_channels});
        break;
      }
      case LayerKind::Deconv2D: {
        const int64_t fan_in = static_cast<int64_t>(l.in_channels) * l.kernel * l.kernel;
        params_[l.name + ".weight"] =
            he_init<T>({l.in_channels, l.out_channels, l.kernel, l.kernel}, fan_in, lseed);
        params_[l.name + ".bias"] = TensorT<T>({l.out_channels});
        break;
      }
      case LayerKind::PReLU: {
        params_[l.name + ".slope"] = TensorT<T>::full({l.out_channels}, T(0.25));
        break;
      }
      case LayerKind::BatchNorm: {
        params_[l.name + ".gamma"] = TensorT<T>::full({l.out_channels}, T(1));
        params_[l.name + ".beta"] = TensorT<T>({l.out_channels});
        BatchNormState<T> st;
        st.running_mean = TensorT<T>({l.out_channels});
        st.running_var = TensorT<T>::full({l.out_channels}, T(1));
        bn_states_[l.name] = std::move(st);
        break;
      }
      default: break;
    }
  }
}

template <class T>
const TensorT<T>& GraphRuntime<T>::forward(const std::map<std::string, TensorT<T>>& inputs,
                                           Mode mode, const std::vector<std::string>& only) {
  acts_.clear();
  for (const auto& in : graph_.inputs) {
    auto it = inputs.find(in.name);
    if (it == inputs.end()) throw UsageError("forward: missing graph input " + in.name);
    if (it->second.rank() != 4 || it->second.shape[1] != in.channels) {
      throw ShapeError("forward: input " + in.name + " has shape " + it->second.dims() +
                       ", expected " + std::to_string(in.channels) + " channels");
    }
    acts_[in.name] = it->second;
  }
  // restrict execution to the ancestors of the requested tensors
  std::vector<char> enabled(graph_.layers.size(), 1);
  if (!only.empty()) {
    std::set<std::string> needed(only.begin(), only.end());
    for (size_t li = graph_.layers.size(); li-- > 0;) {
      const LayerSpec& l = graph_.layers[li];
      if (needed.count(l.output)) {
        for (const auto& in : l.inputs) needed.insert(in);
      } else {
        enabled[li] = 0;
      }
    }
  }
  for (size_t li = 0; li < graph_.layers.size(); ++li) {
    if (!enabled[li]) continue;
    const LayerSpec& l = graph_.layers[li];
    const std::string& prefix = l.param_prefix();
    const TensorT<T>& x = acts_.at(l.inputs[0]);
    TensorT<T> y;
    switch (l.kind) {
      case LayerKind::Conv2D:
        y = conv2d_forward(x, params_.at(prefix + ".weight"), params_.at(prefix + ".bias"),
                           l.stride, l.padding);
        break;
      case LayerKind::Deconv2D:
        y = deconv2d_forward(x, params_.at(prefix + ".weight"), params_.at(prefix + ".bias"),
                             l.stride);
        break;
      case LayerKind::PReLU:
        y = prelu_forward(x, params_.at(prefix + ".slope"));
        break;
      case LayerKind::BatchNorm:
        y = batchnorm_forward(x, params_.at(prefix + ".gamma"), params_.at(prefix + ".beta"),
                              bn_states_.at(prefix), mode, &bn_caches_[li]);
        break;
      case LayerKind::MaxPool2x2: {
        auto r = maxpool2x2_forward(x);
        pool_argmax_[li] = std::move(r.argmax);
        y = std::move(r.output);
        break;
      }
      case LayerKind::Concat: {
        std::vector<const TensorT<T>*> ins;
        ins.reserve(l.inputs.size());
        for (const auto& iname : l.inputs) ins.push_back(&acts_.at(iname));
        y = concat_channels(ins);
        break;
      }
      case LayerKind::Add:
        y = add_forward(x, acts_.at(l.inputs[1]));
        break;
    }
    acts_[l.output] = std::move(y);
  }
  forward_done_ = true;
  return acts_.at(only.empty() ? graph_.outputs[0] : only.front());
}

template <class T>
const TensorT<T>& GraphRuntime<T>::activation(const std::string& tensor_name) const {
  auto it = acts_.find(tensor_name);
  if (it == acts_.end()) {
    throw UsageError("activation '" + tensor_name + "' not available; run forward first");
  }
  return it->second;
}

template <class T>
void GraphRuntime<T>::zero_grad() {
  for (auto& [name, p] : params_) {
    p.ensure_grad();
    p.zero_grad();
  }
}

template <class T>
void GraphRuntime<T>::backward(const std::map<std::string, TensorT<T>>& out_grads) {
  if (!forward_done_) throw UsageError("backward called before forward");
  std::unordered_map<std::string, TensorT<T>> tgrads;
  for (const auto& [name, g] : out_grads) {
    const TensorT<T>& act = activation(name);
    require_same_shape(g, act, "backward");
    tgrads[name] = g;
  }
  auto accumulate = [&](const std::string& name, TensorT<T>&& g) {
    auto it = tgrads.find(name);
    if (it == tgrads.end()) {
      tgrads.emplace(name, std::move(g));
    } else {
      TensorT<T>& dst = it->second;
      for (int64_t i = 0; i < dst.numel(); ++i) dst.values[i] += g.values[i];
    }
  };
  auto param_grad = [&](const std::string& name, const TensorT<T>& g) {
    TensorT<T>& p = params_.at(name);
    p.ensure_grad();
    for (int64_t i = 0; i < p.numel(); ++i) p.grad[i] += g.values[i];
  };

  for (size_t li = graph_.layers.size(); li-- > 0;) {
    const LayerSpec& l = graph_.layers[li];
    auto it = tgrads.find(l.output);
    if (it == tgrads.end()) continue;  // no loss flows through this tensor
    TensorT<T> gout = std::move(it->second);
    tgrads.erase(it);
    const std::string& prefix = l.param_prefix();
    switch (l.kind) {
      case LayerKind::Conv2D: {
        auto g = conv2d_backward(gout, acts_.at(l.inputs[0]), params_.at(prefix + ".weight"),
                                 l.stride, l.padding);
        param_grad(prefix + ".weight", g.weight_grad);
        param_grad(prefix + ".bias", g.bias_grad);
        accumulate(l.inputs[0], std::move(g.input_grad));
        break;
      }
      case LayerKind::Deconv2D: {
        auto g = deconv2d_backward(gout, acts_.at(l.inputs[0]), params_.at(prefix + ".weight"),
                                   l.stride);
        param_grad(prefix + ".weight", g.weight_grad);
        param_grad(prefix + ".bias", g.bias_grad);
        accumulate(l.inputs[0], std::move(g.input_grad));
        break;
      }
      case LayerKind::PReLU: {
        auto g = prelu_backward(gout, acts_.at(l.inputs[0]), params_.at(prefix + ".slope"));
        param_grad(prefix + ".slope", g.slope_grad);
        accumulate(l.inputs[0], std::move(g.input_grad));
        break;
      }
      case LayerKind::BatchNorm: {
        auto g = batchnorm_backward(gout, params_.at(prefix + ".gamma"), bn_caches_[li]);
        param_grad(prefix + ".gamma", g.gamma_grad);
        param_grad(prefix + ".beta", g.beta_grad);
        accumulate(l.inputs[0], std::move(g.input_grad));
        break;
      }
      case LayerKind::MaxPool2x2: {
        accumulate(l.inputs[0],
                   maxpool2x2_backward(gout, pool_argmax_[li], acts_.at(l.inputs[0]).shape));
        break;
      }
      case LayerKind::Concat: {
        std::vector<const TensorT<T>*> ins;
        for (const auto& iname : l.inputs) ins.push_back(&acts_.at(iname));
        auto gs = concat_channels_backward(gout, ins);
        for (size_t k = 0; k < l.inputs.size(); ++k) accumulate(l.inputs[k], std::move(gs[k]));
        break;
      }
      case LayerKind::Add: {
        TensorT<T> copy = gout;
        accumulate(l.inputs[0], std::move(copy));
        accumulate(l.inputs[1], std::move(gout));
        break;
      }
    }
  }
}

template <class T>
std::vector<std::string> GraphRuntime<T>::param_names() const {
  std::vector<std::string> names;
  names.reserve(params_.size());
  for (const auto& [name, p] : params_) names.push_back(name);
  return names;
}

template <class T>
TensorT<T>& GraphRuntime<T>::param(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw UsageError("unknown parameter " + name);
  return it->second;
}

template <class T>
const TensorT<T>& GraphRuntime<T>::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw UsageError("unknown parameter " + name);
  return it->second;
}

template <class T>
std::vector<TensorT<T>*> GraphRuntime<T>::param_ptrs() {
  std::vector<TensorT<T>*> out;
  out.reserve(params_.size());
  for (auto& [name, p] : params_) out.push_back(&p);
  return out;
}

template <class T>
std::vector<const TensorT<T>*> GraphRuntime<T>::param_cptrs() const {
  std::vector<const TensorT<T>*> out;
  out.reserve(params_.size());
  for (const auto& [name, p] : params_) out.push_back(&p);
  return out;
}

template <class T>
int64_t GraphRuntime<T>::param_count() const {
  int64_t n = 0;
  for (const auto& [name, p] : params_) n += p.numel();
  return n;
}

template <class T>
void GraphRuntime<T>::set_bn_momentum(double momentum) {
  for (auto& [name, st] : bn_states_) st.momentum = momentum;
}

template class GraphRuntime<float>;
template class GraphRuntime<double>;

}  // namespace bdff::nn
