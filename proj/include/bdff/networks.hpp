#pragma once

#include "bdff/graph.hpp"

namespace bdff::nets {

// Stack slices are concatenated along channels: 16 slices x RGB.
constexpr int kStackSlices = 16;
constexpr int kStackChannels = kStackSlices * 3;

struct WidthConfig {
  int base = 8;          // feature maps at full resolution
  int rounds = 2;        // hourglass rounds
  int hourglass_scales = 4;

  void validate() const;
};

// 20 convolutions (3x3, resolution preserving) with batch norm + PReLU
// between them; maps a 48-channel stack to a 3-channel all-in-focus image.
// Receptive field 41.
nn::NetworkGraph build_edofnet(const WidthConfig& width);

// Four branches at strides {1,2,4,8}; sampling layers use kernels
// {-,4,6,10}, mirrored deconvolutions restore full resolution; branch
// outputs concatenate into a per-pixel feature vector fused to one channel.
nn::NetworkGraph build_focusnet(const WidthConfig& width);

// FocusNet and EDoFNet side by side, their outputs concatenated and fused
// by a 10-layer convolutional network into a refined depth map. Sub-graph
// parameters live under the "focus." / "edof." prefixes so individually
// pretrained checkpoints load directly.
nn::NetworkGraph build_focusnet_v2(const WidthConfig& width);

// Stacked hourglass on a concatenated left/right all-in-focus pair; one
// supervised disparity tap per round. Inputs are never pre-downsampled and
// all kernels are 3x3 or 1x1 except the sampling layers.
nn::NetworkGraph build_stereonet(const WidthConfig& width, int rounds = 2);

// EDoFNet (shared weights over both stacks) feeding the hourglass: the
// inference path for stereo disparity straight from binocular focal stacks.
nn::NetworkGraph build_stereo_with_edof(const WidthConfig& width);

// Full composite: shared EDoFNet over both stacks, FocusNet + fusion on the
// left stack, the hourglass on the EDoF pair, and a convolutional head over
// the concatenated disparity / depth / EDoF results.
nn::NetworkGraph build_bdffnet(const WidthConfig& width);

// The fusion head of BDfFNet as a standalone graph over a precomputed
// 5-channel input (disparity + depth + EDoF), layer names matching the
// full composite so trained heads transfer by checkpoint.
nn::NetworkGraph build_bdff_head(const WidthConfig& width);

// Receptive-field extent along one axis for the first declared output,
// computed by exact interval propagation through the graph.
int receptive_field(const nn::NetworkGraph& graph);

// Named tensors shared by the constructors above.
namespace tensors {
inline constexpr const char* kStack = "stack";
inline constexpr const char* kStackLeft = "stack_left";
inline constexpr const char* kStackRight = "stack_right";
inline constexpr const char* kEdofPair = "edof_pair";
inline constexpr const char* kHeadIn = "head_in";
}  // namespace tensors

}  // namespace bdff::nets
