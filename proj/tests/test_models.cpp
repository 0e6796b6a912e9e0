#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fieldshift/models.hpp"
#include "fieldshift/network.hpp"

using namespace fieldshift;

namespace {

/// Interval oracle for receptive fields: the input span [lo,hi] feeding one
/// output unit, chained conv by conv and clipped to the image.
struct Span {
  long lo, hi;
};

Span input_span(const NetworkSpec& spec, int unit, int input_extent) {
  Span s{unit, unit};
  // walk output->input, so accumulate in reverse
  std::vector<const LayerSpec*> convs;
  for (const auto& l : spec.layers)
    if (l.kind == LayerKind::conv) convs.push_back(&l);
  for (auto it = convs.rbegin(); it != convs.rend(); ++it) {
    const LayerSpec& l = **it;
    s.lo = s.lo * l.sh - l.ph;
    s.hi = s.hi * l.sh - l.ph + l.kh - 1;
  }
  s.lo = std::max(s.lo, 0L);
  s.hi = std::min(s.hi, static_cast<long>(input_extent - 1));
  return s;
}

}  // namespace

TEST_CASE("patch discriminator: 256 input gives a 30x30 score map") {
  auto spec = build_patch_discriminator();
  auto out = spec.output_shape();
  CHECK(out.c == 1);
  CHECK(out.h == 30);
  CHECK(out.w == 30);
}

TEST_CASE("patch discriminator receptive field is exactly 70") {
  auto spec = build_patch_discriminator();
  CHECK(receptive_field(spec) == 70);
  // recurrence trace: 4 -> 10 -> 22 -> 46 -> 70 over the five convs
}

TEST_CASE("patch discriminator on a 70x70 input") {
  auto spec = build_patch_discriminator(1, 64, 70);
  auto out = spec.output_shape();
  // shape chain 70 -> 35 -> 17 -> 8 -> 7 -> 6
  CHECK(out.h == 6);
  CHECK(out.w == 6);
  // every unit's unclipped span is exactly the 70-pixel receptive field and
  // a central unit sees all but one boundary row (padding shifts the grid
  // half a stride, so exact [0,69] coverage is unattainable)
  long best_cover = 0;
  for (int unit = 0; unit < out.h; ++unit) {
    Span raw{unit, unit};
    std::vector<const LayerSpec*> convs;
    for (const auto& l : spec.layers)
      if (l.kind == LayerKind::conv) convs.push_back(&l);
    for (auto it = convs.rbegin(); it != convs.rend(); ++it) {
      raw.lo = raw.lo * (*it)->sh - (*it)->ph;
      raw.hi = raw.hi * (*it)->sh - (*it)->ph + (*it)->kh - 1;
    }
    CHECK(raw.hi - raw.lo + 1 == 70);
    const Span clipped = input_span(spec, unit, 70);
    best_cover = std::max(best_cover, clipped.hi - clipped.lo + 1);
  }
  CHECK(best_cover >= 69);
}

TEST_CASE("receptive_field examples and errors") {
  NetworkSpec one;
  one.input_shape = {1, 32, 32};
  one.layers.push_back(LayerSpec::conv2d(8, 4, 2, 1));
  CHECK(receptive_field(one) == 4);

  NetworkSpec two;
  two.input_shape = {1, 32, 32};
  two.layers.push_back(LayerSpec::conv2d(8, 3, 1, 1));
  two.layers.push_back(LayerSpec::conv2d(8, 3, 1, 1));
  CHECK(receptive_field(two) == 5);

  NetworkSpec with_dense = two;
  with_dense.layers.push_back(LayerSpec::flatten());
  with_dense.layers.push_back(LayerSpec::dense(1));
  CHECK_THROWS_AS(receptive_field(with_dense), ParameterError);
}

TEST_CASE("resnet generator preserves shape and hits the bottleneck") {
  auto spec = build_resnet_generator(1, 64, 9, 256);
  auto out = spec.output_shape();
  CHECK(out.c == 1);
  CHECK(out.h == 256);
  CHECK(out.w == 256);

  // bottleneck activation shape: two stride-2 halvings, 4x base filters
  Shape3 shape = spec.input_shape;
  int last_res_c = 0, last_res_h = 0;
  for (const auto& l : spec.layers) {
    shape = layer_output_shape(l, shape);
    if (l.kind == LayerKind::residual_block) {
      last_res_c = shape.c;
      last_res_h = shape.h;
    }
  }
  CHECK(last_res_c == 256);
  CHECK(last_res_h == 64);

  CHECK_THROWS_AS(build_resnet_generator(1, 64, 9, 254), ConfigError);
}

TEST_CASE("resnet generator is resolution flexible") {
  for (int size : {64, 128, 256}) {
    auto spec = build_resnet_generator(1, 16, 2, size);
    auto st = init_parameters<float>(spec, 3);
    Tensor4<float> x(1, 1, size, size, 0.4f);
    auto y = forward(st, x, Mode::infer);
    CHECK(y.h() == size);
    CHECK(y.w() == size);
    CHECK(y.all_finite());
  }
}

TEST_CASE("residual block with zero conv weights is an identity map") {
  auto spec = build_resnet_generator(1, 8, 2, 32);
  auto st = init_parameters<double>(spec, 5);
  // zero the final residual block's conv weights; the block must pass its
  // input through untouched
  int res_layer = -1;
  for (int i = 0; i < static_cast<int>(spec.layers.size()); ++i)
    if (spec.layers[i].kind == LayerKind::residual_block) res_layer = i;
  REQUIRE(res_layer >= 0);
  const std::string prefix = "l" + std::to_string(res_layer) + ".";
  st.param(prefix + "conv1.weight").tensor.fill(0.0);
  st.param(prefix + "conv2.weight").tensor.fill(0.0);

  // compare activations entering and leaving that block
  NetworkSpec before = spec;
  before.layers.resize(res_layer);
  NetworkSpec upto = spec;
  upto.layers.resize(res_layer + 1);
  NetworkState<double> st_before = st, st_upto = st;
  st_before.spec = before;
  st_before.params.erase(st_before.params.begin() + st.layer_param_begin[res_layer],
                         st_before.params.end());
  st_before.layer_param_begin.resize(res_layer + 1);
  st_upto.spec = upto;
  st_upto.params.erase(st_upto.params.begin() + st.layer_param_begin[res_layer + 1],
                       st_upto.params.end());
  st_upto.layer_param_begin.resize(res_layer + 2);

  Rng rng(6);
  Tensor4<double> x(1, 1, 32, 32);
  for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform01();
  auto a = forward(st_before, x, Mode::infer);
  auto b = forward(st_upto, x, Mode::infer);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]));
}

TEST_CASE("dcgan generator shape and range") {
  auto spec = build_dcgan_generator();
  auto st = init_parameters<float>(spec, 7);
  Rng rng(8);
  Tensor4<float> z(4, 100, 1, 1);
  for (size_t i = 0; i < z.size(); ++i) z[i] = static_cast<float>(rng.normal());
  auto imgs = forward(st, z, Mode::infer);
  CHECK(imgs.n() == 4);
  CHECK(imgs.c() == 1);
  CHECK(imgs.h() == 64);
  CHECK(imgs.w() == 64);
  for (size_t i = 0; i < imgs.size(); ++i) {
    CHECK(imgs[i] > 0.0f);
    CHECK(imgs[i] < 1.0f);
  }

  // zero latent on a fresh net stays finite
  Tensor4<float> z0(1, 100, 1, 1, 0.0f);
  CHECK(forward(st, z0, Mode::infer).all_finite());

  CHECK_THROWS_AS(build_dcgan_generator(100, 128), ConfigError);
}

TEST_CASE("dcgan generator is a non-constant map over latents") {
  auto spec = build_dcgan_generator();
  for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    auto st = init_parameters<float>(spec, seed);
    Rng rng(seed + 100);
    Tensor4<float> z1(1, 100, 1, 1), z2(1, 100, 1, 1);
    for (size_t i = 0; i < z1.size(); ++i) z1[i] = static_cast<float>(rng.normal());
    for (size_t i = 0; i < z2.size(); ++i) z2[i] = static_cast<float>(rng.normal());
    auto a = forward(st, z1, Mode::infer);
    auto b = forward(st, z2, Mode::infer);
    double diff = 0.0;
    for (size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
    CHECK(diff > 0.0);
  }
}

TEST_CASE("dcgan discriminator shape, range and flatten width") {
  auto spec = build_dcgan_discriminator();
  // flatten feeds 256*8*8 = 16384 features into the dense head
  Shape3 shape = spec.input_shape;
  int flat_width = 0;
  for (const auto& l : spec.layers) {
    shape = layer_output_shape(l, shape);
    if (l.kind == LayerKind::flatten) flat_width = shape.c;
  }
  CHECK(flat_width == 16384);

  auto st = init_parameters<float>(spec, 9);
  Tensor4<float> x(4, 1, 64, 64, 0.5f);
  auto p = forward(st, x, Mode::infer);
  CHECK(p.n() == 4);
  CHECK(p.c() == 1);
  for (size_t i = 0; i < p.size(); ++i) {
    CHECK(p[i] > 0.0f);
    CHECK(p[i] < 1.0f);
  }

  // dropout is inactive at inference: two calls agree exactly
  auto p2 = forward(st, x, Mode::infer);
  for (size_t i = 0; i < p.size(); ++i) CHECK(p[i] == p2[i]);
}

TEST_CASE("init_parameters is deterministic and Gaussian(0, 0.02)") {
  auto spec = build_patch_discriminator(1, 64, 64);
  auto a = init_parameters<float>(spec, 42);
  auto b = init_parameters<float>(spec, 42);
  REQUIRE(a.params.size() == b.params.size());
  for (size_t i = 0; i < a.params.size(); ++i) {
    REQUIRE(a.params[i].size() == b.params[i].size());
    for (size_t j = 0; j < a.params[i].size(); ++j)
      CHECK(a.params[i].data()[j] == b.params[i].data()[j]);
  }

  // sample std of the 512x256x4x4 weight tensor: 0.02 +/- 0.001
  auto& big = a.param("l8.weight");
  REQUIRE(big.size() == 512u * 256 * 4 * 4);
  double mean = 0.0;
  for (size_t i = 0; i < big.size(); ++i) mean += big.data()[i];
  mean /= static_cast<double>(big.size());
  double var = 0.0;
  for (size_t i = 0; i < big.size(); ++i) {
    const double d = big.data()[i] - mean;
    var += d * d;
  }
  const double sd = std::sqrt(var / static_cast<double>(big.size() - 1));
  CHECK(sd == doctest::Approx(0.02).epsilon(0.05));
  CHECK(std::abs(mean) < 1e-3);
}

TEST_CASE("generator parameter count matches the closed-form layer sum") {
  const int bf = 16, blocks = 3;
  auto spec = build_resnet_generator(1, bf, blocks, 64);
  auto st = init_parameters<float>(spec, 1);
  // encoder convs (no bias before the norms) + their norms
  size_t expect = 0;
  expect += static_cast<size_t>(bf) * 1 * 7 * 7 + 2 * bf;              // conv7 + IN
  expect += static_cast<size_t>(2 * bf) * bf * 3 * 3 + 2 * (2 * bf);   // conv3 s2 + IN
  expect += static_cast<size_t>(4 * bf) * (2 * bf) * 3 * 3 + 2 * (4 * bf);
  // residual blocks: two 3x3 convs at 4bf channels + two norms each
  expect += static_cast<size_t>(blocks) *
            (2 * (static_cast<size_t>(4 * bf) * (4 * bf) * 3 * 3) + 4 * (4 * bf));
  // decoder transposed convs + norms
  expect += static_cast<size_t>(4 * bf) * (2 * bf) * 3 * 3 + 2 * (2 * bf);
  expect += static_cast<size_t>(2 * bf) * bf * 3 * 3 + 2 * bf;
  // head conv keeps its bias
  expect += static_cast<size_t>(1) * bf * 7 * 7 + 1;
  CHECK(parameter_count(st) == expect);
}

TEST_CASE("forward output shape equals the symbolic chain for random specs") {
  Rng rng(55);
  for (int trial = 0; trial < 8; ++trial) {
    NetworkSpec spec;
    spec.name = "random";
    const int c0 = 1 + static_cast<int>(rng.bounded(3));
    spec.input_shape = {c0, 16, 16};
    int channels = c0;
    const int n_layers = 1 + static_cast<int>(rng.bounded(4));
    for (int li = 0; li < n_layers; ++li) {
      const int kind = static_cast<int>(rng.bounded(3));
      if (kind == 0) {
        const int oc = 1 + static_cast<int>(rng.bounded(6));
        spec.layers.push_back(LayerSpec::conv2d(oc, 3, 1 + (int)rng.bounded(2), 1));
        channels = oc;
      } else if (kind == 1) {
        spec.layers.push_back(LayerSpec::instance_norm());
      } else {
        spec.layers.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
      }
    }
    auto st = init_parameters<float>(spec, trial);
    Tensor4<float> x(2, c0, 16, 16, 0.3f);
    auto y = forward(st, x, Mode::infer);
    auto sym = spec.output_shape();
    CHECK(y.c() == sym.c);
    CHECK(y.h() == sym.h);
    CHECK(y.w() == sym.w);
    CHECK(channels == sym.c);
  }
}
