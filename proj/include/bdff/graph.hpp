#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "bdff/layers.hpp"
#include "bdff/optim.hpp"
#include "bdff/tensor.hpp"

namespace bdff::nn {

enum class LayerKind { Conv2D, Deconv2D, PReLU, BatchNorm, MaxPool2x2, Concat, Add };

const char* layer_kind_name(LayerKind k);

// One node of a declarative layer graph. Layers are stored in topological
// order: every input tensor name is produced by an earlier layer or is a
// graph input. Kernels are square. `share_params_with` names another layer
// whose parameter blocks this layer reuses (same kind and geometry).
struct LayerSpec {
  LayerKind kind = LayerKind::Conv2D;
  std::string name;
  std::vector<std::string> inputs;
  std::string output;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  std::string share_params_with;

  // Parameter blocks live under this prefix.
  const std::string& param_prefix() const {
    return share_params_with.empty() ? name : share_params_with;
  }
  bool has_params() const {
    return kind == LayerKind::Conv2D || kind == LayerKind::Deconv2D ||
           kind == LayerKind::PReLU || kind == LayerKind::BatchNorm;
  }
};

struct InputSpec {
  std::string name;
  int channels = 0;
};

struct NetworkGraph {
  std::string name;
  std::vector<InputSpec> inputs;
  std::vector<LayerSpec> layers;
  std::vector<std::string> outputs;  // primary output first
  std::vector<std::string> taps;     // supervision taps (receive loss)

  void validate() const;
  int input_channels(const std::string& input_name) const;
  int64_t total_param_count() const;
  // Layer list with shapes at a reference input size, parameter counts and
  // totals, serialized as JSON for inspection and regression snapshots.
  std::string to_json(int ref_h = 64, int ref_w = 64) const;
};

struct Shape4 {
  int n = 0, c = 0, h = 0, w = 0;
  bool operator==(const Shape4&) const = default;
};

// Resolves every tensor shape for a given batch and spatial extent; throws
// ShapeError with a diagnostic when any layer contract fails.
std::map<std::string, Shape4> infer_shapes(const NetworkGraph& graph, int batch, int h, int w);

// Assembles a NetworkGraph. Composite helpers (conv_bn_prelu, the residual
// module) expand deterministically into primitives.
class GraphBuilder {
 public:
  explicit GraphBuilder(std::string graph_name) { graph_.name = std::move(graph_name); }

  std::string add_input(const std::string& name, int channels);

  std::string conv(const std::string& name, const std::string& in, int in_ch, int out_ch, int k,
                   int stride = 1, int padding = -1, const std::string& share = "");
  std::string deconv(const std::string& name, const std::string& in, int in_ch, int out_ch, int k,
                     int stride, const std::string& share = "");
  std::string prelu(const std::string& name, const std::string& in, int ch,
                    const std::string& share = "");
  std::string batchnorm(const std::string& name, const std::string& in, int ch,
                        const std::string& share = "");
  std::string maxpool(const std::string& name, const std::string& in, int ch);
  std::string concat(const std::string& name, const std::vector<std::string>& ins,
                     const std::vector<int>& in_chs);
  std::string add(const std::string& name, const std::string& a, const std::string& b, int ch);

  // conv -> batchnorm -> PReLU (the normalization sits between convolution
  // and activation). Sub-layer names: <name>.c / <name>.bn / <name>.a.
  std::string conv_bn_prelu(const std::string& name, const std::string& in, int in_ch, int out_ch,
                            int k, int stride = 1, int padding = -1,
                            const std::string& share_prefix = "");
  std::string deconv_bn_prelu(const std::string& name, const std::string& in, int in_ch,
                              int out_ch, int k, int stride,
                              const std::string& share_prefix = "");

  // Bottleneck residual module: 1x1 (half) -> 3x3 (half) -> 1x1 (out), each
  // conv followed by batch norm, PReLU on the first two; identity skip
  // (1x1 conv + norm when channel counts differ); elementwise add; PReLU.
  std::string residual_module(const std::string& name, const std::string& in, int in_ch,
                              int out_ch, const std::string& share_prefix = "");

  void mark_output(const std::string& tensor);
  void mark_tap(const std::string& tensor);

  NetworkGraph build() &&;

 private:
  std::string fresh_tensor(const std::string& layer_name);
  NetworkGraph graph_;
  int tensor_counter_ = 0;
};

// ---------------------------------------------------------------------------
// Runtime: owns parameters, per-layer state, forward/backward over a graph.
// float backs training; the double instantiation backs gradient checks.
// Inference-mode forward does not mutate any state and is safe to share
// read-only across threads; training mutations happen between batches in a
// single writer.
// ---------------------------------------------------------------------------

template <class T>
class GraphRuntime {
 public:
  explicit GraphRuntime(NetworkGraph graph);

  void init_params(uint64_t seed);

  // Runs the graph; activations stay available until the next forward.
  // Returns the activation of the first declared output. `only` restricts
  // execution to the layers feeding those tensors (empty = whole graph).
  const TensorT<T>& forward(const std::map<std::string, TensorT<T>>& inputs, Mode mode,
                            const std::vector<std::string>& only = {});
  const TensorT<T>& activation(const std::string& tensor_name) const;

  void zero_grad();
  // out_grads: tensor name -> gradient. Accumulates into parameter grads.
  void backward(const std::map<std::string, TensorT<T>>& out_grads);

  const NetworkGraph& graph() const { return graph_; }
  std::vector<std::string> param_names() const;  // sorted
  bool has_param(const std::string& name) const { return params_.count(name) != 0; }
  TensorT<T>& param(const std::string& name);
  const TensorT<T>& param(const std::string& name) const;
  std::vector<TensorT<T>*> param_ptrs();  // sorted by name
  std::vector<const TensorT<T>*> param_cptrs() const;
  int64_t param_count() const;

  // Batch-norm running state, keyed by canonical layer prefix.
  std::map<std::string, BatchNormState<T>>& bn_states() { return bn_states_; }
  const std::map<std::string, BatchNormState<T>>& bn_states() const { return bn_states_; }

  void set_bn_momentum(double momentum);

 private:
  NetworkGraph graph_;
  std::map<std::string, TensorT<T>> params_;
  std::map<std::string, BatchNormState<T>> bn_states_;
  std::unordered_map<std::string, TensorT<T>> acts_;
  std::vector<BatchNormCache<T>> bn_caches_;
  std::vector<std::vector<int64_t>> pool_argmax_;
  bool forward_done_ = false;
};

using Runtime32 = GraphRuntime<float>;
using Runtime64 = GraphRuntime<double>;

}  // namespace bdff::nn
