#pragma once

#include <string>

#include "fieldshift/layers.hpp"

namespace fieldshift {

/// ResNet encoder-decoder generator: three downsampling conv stages, a stack
/// of residual blocks at the bottleneck, two fractionally strided upsampling
/// stages and a tanh head remapped onto [0,1].
inline NetworkSpec build_resnet_generator(int in_channels = 1, int base_filters = 64,
                                          int n_blocks = 9, int image_size = 256) {
  if (image_size % 4 != 0)
    throw ConfigError("build_resnet_generator: image_size must be divisible by 4, got " +
                      std::to_string(image_size));
  if (base_filters < 1 || n_blocks < 1)
    throw ConfigError("build_resnet_generator: base_filters and n_blocks must be >= 1");
  NetworkSpec spec;
  spec.name = "resnet_generator";
  spec.input_shape = {in_channels, image_size, image_size};
  auto& L = spec.layers;
  // encoder (convs feed instance norms, so no biases)
  L.push_back(LayerSpec::conv2d(base_filters, 7, 1, 3, false));
  L.push_back(LayerSpec::instance_norm());
  L.push_back(LayerSpec::activation(ActKind::relu));
  L.push_back(LayerSpec::conv2d(base_filters * 2, 3, 2, 1, false));
  L.push_back(LayerSpec::instance_norm());
  L.push_back(LayerSpec::activation(ActKind::relu));
  L.push_back(LayerSpec::conv2d(base_filters * 4, 3, 2, 1, false));
  L.push_back(LayerSpec::instance_norm());
  L.push_back(LayerSpec::activation(ActKind::relu));
  // bottleneck
  for (int i = 0; i < n_blocks; ++i)
    L.push_back(LayerSpec::residual_block(base_filters * 4));
  // decoder
  L.push_back(LayerSpec::conv_transpose2d(base_filters * 2, 3, 2, 1, 1, false));
  L.push_back(LayerSpec::instance_norm());
  L.push_back(LayerSpec::activation(ActKind::relu));
  L.push_back(LayerSpec::conv_transpose2d(base_filters, 3, 2, 1, 1, false));
  L.push_back(LayerSpec::instance_norm());
  L.push_back(LayerSpec::activation(ActKind::relu));
  // head
  L.push_back(LayerSpec::conv2d(in_channels, 7, 1, 3));
  L.push_back(LayerSpec::activation(ActKind::tanh01));
  return spec;
}

/// 70x70 PatchGAN: filter counts 64,128,256,512,1; 4x4 kernels throughout;
/// strides 2,2,2,1,1; instance normalization on layers 2-4; linear patch
/// scores (the squashing lives in the loss).
inline NetworkSpec build_patch_discriminator(int in_channels = 1, int base_filters = 64,
                                             int image_size = 256) {
  NetworkSpec spec;
  spec.name = "patch_discriminator";
  spec.input_shape = {in_channels, image_size, image_size};
  auto& L = spec.layers;
  L.push_back(LayerSpec::conv2d(base_filters, 4, 2, 1));
  L.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  L.push_back(LayerSpec::conv2d(base_filters * 2, 4, 2, 1, false));
  L.push_back(LayerSpec::instance_norm());
  L.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  L.push_back(LayerSpec::conv2d(base_filters * 4, 4, 2, 1, false));
  L.push_back(LayerSpec::instance_norm());
  L.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  L.push_back(LayerSpec::conv2d(base_filters * 8, 4, 1, 1, false));
  L.push_back(LayerSpec::instance_norm());
  L.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  L.push_back(LayerSpec::conv2d(1, 4, 1, 1));
  return spec;
}

/// DCGAN generator: dense seed to an 8x8x256 volume, three stride-2
/// transposed convolutions up to 64x64, sigmoid head.
inline NetworkSpec build_dcgan_generator(int latent_dim = 100, int image_size = 64) {
  if (image_size != 64)
    throw ConfigError("build_dcgan_generator: image_size is fixed at 64 "
                      "(three stride-2 upsamplings from an 8x8 seed), got " +
                      std::to_string(image_size));
  if (latent_dim < 1)
    throw ConfigError("build_dcgan_generator: latent_dim must be >= 1");
  NetworkSpec spec;
  spec.name = "dcgan_generator";
  spec.input_shape = {latent_dim, 1, 1};
  auto& L = spec.layers;
  L.push_back(LayerSpec::dense_reshaped(8 * 8 * 256, 256, 8, 8));
  L.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  L.push_back(LayerSpec::conv_transpose2d(256, 4, 2, 1, 0));
  L.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  L.push_back(LayerSpec::conv_transpose2d(128, 4, 2, 1, 0));
  L.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  L.push_back(LayerSpec::conv_transpose2d(64, 4, 2, 1, 0));
  L.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  L.push_back(LayerSpec::conv2d(1, 3, 1, 1));
  L.push_back(LayerSpec::activation(ActKind::sigmoid));
  return spec;
}

/// DCGAN discriminator: three stride-2 4x4 convolutions with LeakyReLU and
/// dropout 0.4, then flatten and a sigmoid dense head.
inline NetworkSpec build_dcgan_discriminator(int image_size = 64) {
  if (image_size % 8 != 0)
    throw ConfigError("build_dcgan_discriminator: image_size must be divisible by 8");
  NetworkSpec spec;
  spec.name = "dcgan_discriminator";
  spec.input_shape = {1, image_size, image_size};
  auto& L = spec.layers;
  L.push_back(LayerSpec::conv2d(64, 4, 2, 1));
  L.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  L.push_back(LayerSpec::dropout(0.4));
  L.push_back(LayerSpec::conv2d(128, 4, 2, 1));
  L.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  L.push_back(LayerSpec::dropout(0.4));
  L.push_back(LayerSpec::conv2d(256, 4, 2, 1));
  L.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  L.push_back(LayerSpec::dropout(0.4));
  L.push_back(LayerSpec::flatten());
  L.push_back(LayerSpec::dense(1));
  L.push_back(LayerSpec::activation(ActKind::sigmoid));
  return spec;
}

/// Receptive field of one output unit, by the recurrence
/// rf <- rf + (k-1)*jump, jump <- jump*stride over the conv layers.
/// Supports purely convolutional stacks (norm/activation/dropout pass
/// through); anything else is rejected.
inline int receptive_field(const NetworkSpec& spec) {
  long rf = 1;
  long jump = 1;
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::conv:
        rf += static_cast<long>(l.kh - 1) * jump;
        jump *= l.sh;
        break;
      case LayerKind::instance_norm:
      case LayerKind::activation:
      case LayerKind::dropout:
        break;
      default:
        throw ParameterError(std::string("receptive_field: unsupported layer kind ") +
                             layer_kind_name(l.kind));
    }
  }
  return static_cast<int>(rf);
}

}  // namespace fieldshift
