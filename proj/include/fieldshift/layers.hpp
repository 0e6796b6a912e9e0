#pragma once

#include <string>
#include <vector>

#include "fieldshift/ops.hpp"

namespace fieldshift {

enum class LayerKind {
  conv,
  conv_transpose,
  instance_norm,
  activation,
  dropout,
  dense,
  flatten,
  residual_block,
};

inline const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::conv_transpose: return "conv_transpose";
    case LayerKind::instance_norm: return "instance_norm";
    case LayerKind::activation: return "activation";
    case LayerKind::dropout: return "dropout";
    case LayerKind::dense: return "dense";
    case LayerKind::flatten: return "flatten";
    case LayerKind::residual_block: return "residual_block";
  }
  return "?";
}

/// One declarative layer; only the fields relevant to `kind` are meaningful.
struct LayerSpec {
  LayerKind kind = LayerKind::activation;

  // conv / conv_transpose
  int kh = 0, kw = 0;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;
  int oph = 0, opw = 0;  // conv_transpose output padding
  int out_channels = 0;  // also dense out_features, residual channels

  ActKind act = ActKind::none;
  double alpha = 0.2;  // leaky_relu slope
  double rate = 0.0;   // dropout
  double eps = 1e-5;   // instance_norm

  // Convs feeding straight into instance_norm drop their bias: the norm
  // subtracts the plane mean, so such a bias would be dead weight with an
  // exactly-zero gradient.
  bool use_bias = true;

  // optional reshape of a dense output to (c,h,w); all zero = keep (out,1,1)
  int reshape_c = 0, reshape_h = 0, reshape_w = 0;

  static LayerSpec conv2d(int out_channels, int k, int s, int p, bool bias = true) {
    LayerSpec l;
    l.kind = LayerKind::conv;
    l.out_channels = out_channels;
    l.kh = l.kw = k;
    l.sh = l.sw = s;
    l.ph = l.pw = p;
    l.use_bias = bias;
    return l;
  }

  static LayerSpec conv_transpose2d(int out_channels, int k, int s, int p, int op,
                                    bool bias = true) {
    LayerSpec l;
    l.kind = LayerKind::conv_transpose;
    l.out_channels = out_channels;
    l.kh = l.kw = k;
    l.sh = l.sw = s;
    l.ph = l.pw = p;
    l.oph = l.opw = op;
    l.use_bias = bias;
    return l;
  }

  static LayerSpec instance_norm(double eps = 1e-5) {
    LayerSpec l;
    l.kind = LayerKind::instance_norm;
    l.eps = eps;
    return l;
  }

  static LayerSpec activation(ActKind kind, double alpha = 0.2) {
    LayerSpec l;
    l.kind = LayerKind::activation;
    l.act = kind;
    l.alpha = alpha;
    return l;
  }

  static LayerSpec dropout(double rate) {
    LayerSpec l;
    l.kind = LayerKind::dropout;
    l.rate = rate;
    return l;
  }

  static LayerSpec dense(int out_features) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.out_channels = out_features;
    return l;
  }

  static LayerSpec dense_reshaped(int out_features, int c, int h, int w) {
    LayerSpec l = dense(out_features);
    l.reshape_c = c;
    l.reshape_h = h;
    l.reshape_w = w;
    return l;
  }

  static LayerSpec flatten() {
    LayerSpec l;
    l.kind = LayerKind::flatten;
    return l;
  }

  static LayerSpec residual_block(int channels) {
    LayerSpec l;
    l.kind = LayerKind::residual_block;
    l.out_channels = channels;
    l.kh = l.kw = 3;
    l.sh = l.sw = 1;
    l.ph = l.pw = 1;
    return l;
  }
};

/// Per-sample activation shape (batch excluded).
struct Shape3 {
  int c = 0, h = 0, w = 0;
  bool operator==(const Shape3&) const = default;
  std::string str() const {
    return std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w);
  }
};

inline void validate_layer(const LayerSpec& l) {
  const bool is_conv = l.kind == LayerKind::conv || l.kind == LayerKind::conv_transpose;
  if (is_conv) {
    if (l.kh < 1 || l.kw < 1 || l.sh < 1 || l.sw < 1 || l.ph < 0 || l.pw < 0)
      throw ConfigError(std::string(layer_kind_name(l.kind)) +
                        ": kernel/stride/padding must be set");
    if (l.out_channels < 1)
      throw ConfigError(std::string(layer_kind_name(l.kind)) + ": out_channels must be >= 1");
  } else if (l.kh != 0 && l.kind != LayerKind::residual_block) {
    throw ConfigError(std::string(layer_kind_name(l.kind)) +
                      ": kernel fields only apply to conv layers");
  }
  if (l.kind == LayerKind::activation && l.act == ActKind::leaky_relu &&
      !(l.alpha > 0.0 && l.alpha < 1.0))
    throw ConfigError("leaky_relu: alpha must lie in (0,1)");
  if (l.kind == LayerKind::dropout && (l.rate < 0.0 || l.rate >= 1.0))
    throw ConfigError("dropout: rate must lie in [0,1)");
}

inline Shape3 layer_output_shape(const LayerSpec& l, const Shape3& in) {
  validate_layer(l);
  switch (l.kind) {
    case LayerKind::conv:
      return {l.out_channels, conv_output_dim(in.h, l.kh, l.sh, l.ph, "h"),
              conv_output_dim(in.w, l.kw, l.sw, l.pw, "w")};
    case LayerKind::conv_transpose:
      return {l.out_channels,
              conv_transpose_output_dim(in.h, l.kh, l.sh, l.ph, l.oph, "h"),
              conv_transpose_output_dim(in.w, l.kw, l.sw, l.pw, l.opw, "w")};
    case LayerKind::instance_norm:
    case LayerKind::activation:
    case LayerKind::dropout:
    case LayerKind::residual_block:
      return in;
    case LayerKind::dense: {
      if (l.reshape_c > 0) {
        if (l.reshape_c * l.reshape_h * l.reshape_w != l.out_channels)
          throw ConfigError("dense: reshape target does not match out_features");
        return {l.reshape_c, l.reshape_h, l.reshape_w};
      }
      return {l.out_channels, 1, 1};
    }
    case LayerKind::flatten:
      return {in.c * in.h * in.w, 1, 1};
  }
  throw ConfigError("layer_output_shape: unknown layer kind");
}

/// Declarative network: named ordered layer list plus the input shape it
/// was built for. Output shape is always recomputed by chaining.
struct NetworkSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  Shape3 input_shape;

  Shape3 output_shape() const { return output_shape_for(input_shape); }

  Shape3 output_shape_for(Shape3 in) const {
    for (const auto& l : layers) in = layer_output_shape(l, in);
    return in;
  }
};

}  // namespace fieldshift
