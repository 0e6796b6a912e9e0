#pragma once

#include <string>
#include <vector>

#include "fieldshift/gradcheck.hpp"
#include "fieldshift/layers.hpp"
#include "fieldshift/ops.hpp"
#include "fieldshift/rng.hpp"

namespace fieldshift {

/// One learnable tensor plus its gradient accumulator. Rank-4 parameters
/// (conv/dense weights) live in `tensor`, rank-1 ones (bias, gamma, beta)
/// in `vec`; exactly one of the two is populated.
template <typename T>
struct Param {
  std::string name;
  Tensor4<T> tensor;
  std::vector<T> vec;
  Tensor4<T> tensor_grad;
  std::vector<T> vec_grad;

  bool is_tensor() const { return !tensor.empty(); }
  size_t size() const { return is_tensor() ? tensor.size() : vec.size(); }
  T* data() { return is_tensor() ? tensor.data() : vec.data(); }
  const T* data() const { return is_tensor() ? tensor.data() : vec.data(); }
  T* grad_data() { return is_tensor() ? tensor_grad.data() : vec_grad.data(); }
  const T* grad_data() const {
    return is_tensor() ? tensor_grad.data() : vec_grad.data();
  }

  std::vector<int> dims() const {
    if (is_tensor()) return {tensor.n(), tensor.c(), tensor.h(), tensor.w()};
    return {static_cast<int>(vec.size())};
  }

  void zero_grad() {
    if (is_tensor())
      tensor_grad.fill(T(0));
    else
      vec_grad.assign(vec_grad.size(), T(0));
  }

  static Param make_tensor(const std::string& name, int n, int c, int h, int w) {
    Param p;
    p.name = name;
    p.tensor = Tensor4<T>(n, c, h, w);
    p.tensor_grad = Tensor4<T>(n, c, h, w);
    return p;
  }

  static Param make_vec(const std::string& name, int len, T fill = T(0)) {
    Param p;
    p.name = name;
    p.vec.assign(len, fill);
    p.vec_grad.assign(len, T(0));
    return p;
  }
};

/// A NetworkSpec bound to concrete parameter values.
template <typename T>
struct NetworkState {
  NetworkSpec spec;
  std::vector<Param<T>> params;
  std::vector<int> layer_param_begin;  // spec.layers.size()+1 offsets into params
  uint64_t init_seed = 0;

  Param<T>& param(const std::string& name) {
    for (auto& p : params)
      if (p.name == name) return p;
    throw ParameterError("NetworkState: no parameter named " + name);
  }
};

enum class Mode { train, infer };

namespace detail {

template <typename T>
void append_layer_params(const NetworkSpec& spec, int layer_idx, Shape3 in,
                         std::vector<Param<T>>& out) {
  const LayerSpec& l = spec.layers[layer_idx];
  const std::string prefix = "l" + std::to_string(layer_idx) + ".";
  switch (l.kind) {
    case LayerKind::conv:
      out.push_back(Param<T>::make_tensor(prefix + "weight", l.out_channels, in.c, l.kh, l.kw));
      if (l.use_bias)
        out.push_back(Param<T>::make_vec(prefix + "bias", l.out_channels));
      break;
    case LayerKind::conv_transpose:
      out.push_back(Param<T>::make_tensor(prefix + "weight", in.c, l.out_channels, l.kh, l.kw));
      if (l.use_bias)
        out.push_back(Param<T>::make_vec(prefix + "bias", l.out_channels));
      break;
    case LayerKind::instance_norm:
      out.push_back(Param<T>::make_vec(prefix + "gamma", in.c, T(1)));
      out.push_back(Param<T>::make_vec(prefix + "beta", in.c));
      break;
    case LayerKind::dense:
      out.push_back(Param<T>::make_tensor(prefix + "weight", l.out_channels,
                                          in.c * in.h * in.w, 1, 1));
      out.push_back(Param<T>::make_vec(prefix + "bias", l.out_channels));
      break;
    case LayerKind::residual_block: {
      // both convs feed instance norms, so neither carries a bias
      const int ch = in.c;
      out.push_back(Param<T>::make_tensor(prefix + "conv1.weight", ch, ch, 3, 3));
      out.push_back(Param<T>::make_vec(prefix + "norm1.gamma", ch, T(1)));
      out.push_back(Param<T>::make_vec(prefix + "norm1.beta", ch));
      out.push_back(Param<T>::make_tensor(prefix + "conv2.weight", ch, ch, 3, 3));
      out.push_back(Param<T>::make_vec(prefix + "norm2.gamma", ch, T(1)));
      out.push_back(Param<T>::make_vec(prefix + "norm2.beta", ch));
      break;
    }
    case LayerKind::activation:
    case LayerKind::dropout:
    case LayerKind::flatten:
      break;
  }
}

}  // namespace detail

/// Gaussian(0, 0.02) conv/dense weights, zero biases, gamma=1, beta=0.
/// Sampling order is fixed so the same seed gives bit-identical parameters.
template <typename T>
NetworkState<T> init_parameters(const NetworkSpec& spec, uint64_t seed) {
  NetworkState<T> state;
  state.spec = spec;
  state.init_seed = seed;
  Rng rng(seed);
  Shape3 in = spec.input_shape;
  state.layer_param_begin.push_back(0);
  for (int i = 0; i < static_cast<int>(spec.layers.size()); ++i) {
    detail::append_layer_params(spec, i, in, state.params);
    state.layer_param_begin.push_back(static_cast<int>(state.params.size()));
    in = layer_output_shape(spec.layers[i], in);
  }
  for (auto& p : state.params) {
    const bool is_weight = p.name.size() > 6 &&
                           p.name.compare(p.name.size() - 6, 6, "weight") == 0;
    if (is_weight) {
      T* d = p.data();
      for (size_t i = 0; i < p.size(); ++i)
        d[i] = static_cast<T>(rng.normal(0.0, 0.02));
    }
  }
  return state;
}

template <typename T>
size_t parameter_count(const NetworkState<T>& state) {
  size_t total = 0;
  for (const auto& p : state.params) total += p.size();
  return total;
}

template <typename T>
void zero_grads(NetworkState<T>& state) {
  for (auto& p : state.params) p.zero_grad();
}

template <typename T>
std::vector<ParamView<T>> param_views(NetworkState<T>& state) {
  std::vector<ParamView<T>> views;
  views.reserve(state.params.size());
  for (auto& p : state.params)
    views.push_back({p.name, p.data(), p.size(), p.grad_data()});
  return views;
}

template <typename T>
void accumulate(Param<T>& p, const Tensor4<T>& grad) {
  T* dst = p.tensor_grad.data();
  for (size_t i = 0; i < grad.size(); ++i) dst[i] += grad[i];
}

template <typename T>
void accumulate(Param<T>& p, const std::vector<T>& grad) {
  for (size_t i = 0; i < grad.size(); ++i) p.vec_grad[i] += grad[i];
}

/// Saved forward intermediates for one layer.
template <typename T>
struct LayerCache {
  Tensor4<T> input;
  Tensor4<T> mask;   // dropout
  InstanceNormCache<T> norm1;
  // residual block extras
  Tensor4<T> pre_relu;
  Tensor4<T> relu_out;
  InstanceNormCache<T> norm2;
};

template <typename T>
struct Tape {
  std::vector<LayerCache<T>> layers;
};

/// Run the network. Pass a Tape to record intermediates for backward();
/// rng is required only when mode == train and the spec contains dropout.
template <typename T>
Tensor4<T> forward(const NetworkState<T>& state, const Tensor4<T>& x, Mode mode,
                   Rng* rng = nullptr, Tape<T>* tape = nullptr) {
  const NetworkSpec& spec = state.spec;
  if (x.c() != spec.input_shape.c)
    throw DimensionError(spec.name + ": input channel axis (" + std::to_string(x.c()) +
                         ") does not match spec (" + std::to_string(spec.input_shape.c) + ")");
  if (tape != nullptr) {
    tape->layers.clear();
    tape->layers.resize(spec.layers.size());
  }
  Tensor4<T> cur = x;
  for (int li = 0; li < static_cast<int>(spec.layers.size()); ++li) {
    const LayerSpec& l = spec.layers[li];
    const int pb = state.layer_param_begin[li];
    LayerCache<T>* cache = tape ? &tape->layers[li] : nullptr;
    static const std::vector<T> no_bias;
    switch (l.kind) {
      case LayerKind::conv: {
        if (cache) cache->input = cur;
        cur = conv2d(cur, state.params[pb].tensor,
                     l.use_bias ? state.params[pb + 1].vec : no_bias,
                     {l.sh, l.sw}, {l.ph, l.pw});
        break;
      }
      case LayerKind::conv_transpose: {
        if (cache) cache->input = cur;
        cur = conv_transpose2d(cur, state.params[pb].tensor,
                               l.use_bias ? state.params[pb + 1].vec : no_bias,
                               {l.sh, l.sw}, {l.ph, l.pw}, {l.oph, l.opw});
        break;
      }
      case LayerKind::instance_norm: {
        cur = instance_norm(cur, state.params[pb].vec, state.params[pb + 1].vec,
                            static_cast<T>(l.eps), cache ? &cache->norm1 : nullptr);
        break;
      }
      case LayerKind::activation: {
        if (cache) cache->input = cur;
        cur = apply_activation(cur, l.act, static_cast<T>(l.alpha));
        break;
      }
      case LayerKind::dropout: {
        if (mode == Mode::train && l.rate > 0.0 && rng == nullptr)
          throw ParameterError(spec.name + ": dropout in train mode needs an rng");
        Rng unused;
        cur = dropout(cur, l.rate, rng ? *rng : unused, mode == Mode::train,
                      cache ? &cache->mask : nullptr);
        break;
      }
      case LayerKind::dense: {
        const Tensor4<T> flat = cur.reshaped(cur.n(), cur.c() * cur.h() * cur.w(), 1, 1);
        if (cache) cache->input = flat;
        cur = dense(flat, state.params[pb].tensor, state.params[pb + 1].vec);
        if (l.reshape_c > 0)
          cur = cur.reshaped(cur.n(), l.reshape_c, l.reshape_h, l.reshape_w);
        break;
      }
      case LayerKind::flatten: {
        if (cache) cache->input = cur;
        cur = cur.reshaped(cur.n(), cur.c() * cur.h() * cur.w(), 1, 1);
        break;
      }
      case LayerKind::residual_block: {
        const Tensor4<T>& block_in = cur;
        Tensor4<T> t = conv2d(block_in, state.params[pb].tensor, no_bias, {1, 1}, {1, 1});
        t = instance_norm(t, state.params[pb + 1].vec, state.params[pb + 2].vec,
                          static_cast<T>(l.eps), cache ? &cache->norm1 : nullptr);
        if (cache) cache->pre_relu = t;
        t = apply_activation(t, ActKind::relu, T(0));
        if (cache) cache->relu_out = t;
        t = conv2d(t, state.params[pb + 3].tensor, no_bias, {1, 1}, {1, 1});
        t = instance_norm(t, state.params[pb + 4].vec, state.params[pb + 5].vec,
                          static_cast<T>(l.eps), cache ? &cache->norm2 : nullptr);
        if (cache) cache->input = block_in;
        for (size_t i = 0; i < t.size(); ++i) t[i] += block_in[i];
        cur = t;
        break;
      }
    }
  }
  return cur;
}

/// Backpropagate grad_out through the taped forward pass. Returns the
/// gradient with respect to the network input; parameter gradients are
/// accumulated (+=) unless accumulate_param_grads is false.
template <typename T>
Tensor4<T> backward(NetworkState<T>& state, const Tape<T>& tape,
                    const Tensor4<T>& grad_out,
                    bool accumulate_param_grads = true) {
  const NetworkSpec& spec = state.spec;
  if (tape.layers.size() != spec.layers.size())
    throw ParameterError(spec.name + ": tape does not match network");
  Tensor4<T> g = grad_out;
  const bool want = accumulate_param_grads;
  for (int li = static_cast<int>(spec.layers.size()) - 1; li >= 0; --li) {
    const LayerSpec& l = spec.layers[li];
    const int pb = state.layer_param_begin[li];
    const LayerCache<T>& cache = tape.layers[li];
    switch (l.kind) {
      case LayerKind::conv: {
        auto grads = conv2d_backward(cache.input, state.params[pb].tensor,
                                     {l.sh, l.sw}, {l.ph, l.pw}, g, true, want);
        if (want) {
          accumulate(state.params[pb], grads.weights);
          if (l.use_bias) accumulate(state.params[pb + 1], grads.bias);
        }
        g = std::move(grads.input);
        break;
      }
      case LayerKind::conv_transpose: {
        auto grads = conv_transpose2d_backward(cache.input, state.params[pb].tensor,
                                               {l.sh, l.sw}, {l.ph, l.pw}, g, true, want);
        if (want) {
          accumulate(state.params[pb], grads.weights);
          if (l.use_bias) accumulate(state.params[pb + 1], grads.bias);
        }
        g = std::move(grads.input);
        break;
      }
      case LayerKind::instance_norm: {
        auto grads = instance_norm_backward(cache.norm1, state.params[pb].vec, g);
        if (want) {
          accumulate(state.params[pb], grads.gamma);
          accumulate(state.params[pb + 1], grads.beta);
        }
        g = std::move(grads.input);
        break;
      }
      case LayerKind::activation: {
        g = activation_backward(cache.input, l.act, static_cast<T>(l.alpha), g);
        break;
      }
      case LayerKind::dropout: {
        if (!cache.mask.empty()) g = dropout_backward(cache.mask, g);
        break;
      }
      case LayerKind::dense: {
        Tensor4<T> gflat = g.reshaped(g.n(), g.c() * g.h() * g.w(), 1, 1);
        auto grads = dense_backward(cache.input, state.params[pb].tensor, gflat,
                                    true, want);
        if (want) {
          accumulate(state.params[pb], grads.weights);
          accumulate(state.params[pb + 1], grads.bias);
        }
        g = std::move(grads.input);
        break;
      }
      case LayerKind::flatten: {
        const Tensor4<T>& in = cache.input;
        g = g.reshaped(in.n(), in.c(), in.h(), in.w());
        break;
      }
      case LayerKind::residual_block: {
        auto g_norm2 = instance_norm_backward(cache.norm2, state.params[pb + 4].vec, g);
        if (want) {
          accumulate(state.params[pb + 4], g_norm2.gamma);
          accumulate(state.params[pb + 5], g_norm2.beta);
        }
        auto g_conv2 = conv2d_backward(cache.relu_out, state.params[pb + 3].tensor,
                                       {1, 1}, {1, 1}, g_norm2.input, true, want);
        if (want) accumulate(state.params[pb + 3], g_conv2.weights);
        Tensor4<T> g_relu =
            activation_backward(cache.pre_relu, ActKind::relu, T(0), g_conv2.input);
        auto g_norm1 = instance_norm_backward(cache.norm1, state.params[pb + 1].vec, g_relu);
        if (want) {
          accumulate(state.params[pb + 1], g_norm1.gamma);
          accumulate(state.params[pb + 2], g_norm1.beta);
        }
        auto g_conv1 = conv2d_backward(cache.input, state.params[pb].tensor,
                                       {1, 1}, {1, 1}, g_norm1.input, true, want);
        if (want) accumulate(state.params[pb], g_conv1.weights);
        // skip connection adds the incoming gradient through unchanged
        for (size_t i = 0; i < g.size(); ++i)
          g[i] = g[i] + g_conv1.input[i];
        break;
      }
    }
  }
  return g;
}

}  // namespace fieldshift
