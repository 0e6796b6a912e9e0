#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "fieldshift/checkpoint.hpp"
#include "fieldshift/gan.hpp"
#include "fieldshift/gradcheck.hpp"
#include "fieldshift/phantom.hpp"
#include "fieldshift/train.hpp"

using namespace fieldshift;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& leaf) {
  auto dir = fs::temp_directory_path() / "fieldshift_gantrain_tests" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TrainConfig tiny_cyclegan_config(uint64_t seed) {
  TrainConfig cfg;
  cfg.image_size = 32;
  cfg.base_filters = 8;
  cfg.n_blocks = 1;
  cfg.disc_filters = 8;
  cfg.seed = seed;
  return cfg;
}

template <typename T>
Tensor4<T> phantom_batch(DomainTag domain, uint64_t seed, int n, int size) {
  auto ds = make_phantom_dataset(std::max(n, 2), size, domain, seed);
  BatchIterator<T> it(ds.train, n, false, 0, 0);
  Tensor4<T> b;
  it.next(b);
  return b;
}

template <typename T>
bool params_equal(const NetworkState<T>& a, const NetworkState<T>& b) {
  if (a.params.size() != b.params.size()) return false;
  for (size_t i = 0; i < a.params.size(); ++i) {
    if (a.params[i].size() != b.params[i].size()) return false;
    if (std::memcmp(a.params[i].data(), b.params[i].data(),
                    a.params[i].size() * sizeof(T)) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("adversarial generator loss examples") {
  Tensor4<double> ones(1, 1, 2, 2, 1.0);
  CHECK(adversarial_loss_generator(ones) == doctest::Approx(0.0));
  Tensor4<double> zeros(1, 1, 2, 2, 0.0);
  CHECK(adversarial_loss_generator(zeros) == doctest::Approx(1.0));
  Tensor4<double> mixed(1, 1, 1, 2);
  mixed[0] = 0.0;
  mixed[1] = 2.0;
  CHECK(adversarial_loss_generator(mixed) == doctest::Approx(1.0));
}

TEST_CASE("adversarial discriminator loss examples") {
  Tensor4<double> r1(1, 1, 2, 2, 1.0), f0(1, 1, 2, 2, 0.0);
  CHECK(adversarial_loss_discriminator(r1, f0) == doctest::Approx(0.0));
  Tensor4<double> r0(1, 1, 2, 2, 0.0), f1(1, 1, 2, 2, 1.0);
  CHECK(adversarial_loss_discriminator(r0, f1) == doctest::Approx(1.0));
  Tensor4<double> h(1, 1, 2, 2, 0.5);
  CHECK(adversarial_loss_discriminator(h, h) == doctest::Approx(0.25));
}

TEST_CASE("cycle loss examples and metric properties") {
  Tensor4<double> x(1, 1, 2, 2);
  x[0] = 0.1, x[1] = 0.4, x[2] = 0.7, x[3] = 0.9;
  CHECK(cycle_loss(x, x) == doctest::Approx(0.0));

  Tensor4<double> shifted = x;
  for (size_t i = 0; i < shifted.size(); ++i) shifted[i] += 0.1;
  CHECK(cycle_loss(x, shifted) == doctest::Approx(0.1));
  // symmetric
  CHECK(cycle_loss(shifted, x) == doctest::Approx(cycle_loss(x, shifted)));

  Tensor4<double> a(1, 1, 1, 2), b(1, 1, 1, 2);
  a[0] = 0, a[1] = 1;
  b[0] = 1, b[1] = 0;
  CHECK(cycle_loss(a, b) == doctest::Approx(1.0));

  Tensor4<double> wrong(1, 1, 2, 1);
  CHECK_THROWS_AS(cycle_loss(a, wrong), DimensionError);
}

TEST_CASE("bce loss examples") {
  Tensor4<double> p(1, 1, 1, 1, 0.5), y1(1, 1, 1, 1, 1.0);
  CHECK(bce_loss(p, y1) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

  Tensor4<double> near1(1, 1, 1, 1, 1.0);  // clamped to 1 - 1e-7
  CHECK(bce_loss(near1, y1) < 1e-6);

  Tensor4<double> preds(1, 1, 1, 2), labels(1, 1, 1, 2);
  preds[0] = 0.9, preds[1] = 0.1;
  labels[0] = 1.0, labels[1] = 0.0;
  CHECK(bce_loss(preds, labels) == doctest::Approx(-std::log(0.9)).epsilon(1e-9));
}

TEST_CASE("all losses are non-negative on random inputs") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor4<double> s(1, 1, 3, 3), t(1, 1, 3, 3);
    for (size_t i = 0; i < s.size(); ++i) {
      s[i] = rng.normal();
      t[i] = rng.uniform01();
    }
    CHECK(adversarial_loss_generator(s) >= 0.0);
    CHECK(adversarial_loss_discriminator(s, s) >= 0.0);
    CHECK(cycle_loss(t, s) >= 0.0);
    Tensor4<double> labels(1, 1, 3, 3, 1.0);
    Tensor4<double> probs = t;
    CHECK(bce_loss(probs, labels) >= 0.0);
  }
}

TEST_CASE("image pool: fill phase returns fresh images and fills to capacity") {
  ImagePool<float> pool(50, 1);
  for (int batch = 0; batch < 25; ++batch) {
    Tensor4<float> fresh(2, 1, 4, 4, static_cast<float>(batch));
    auto out = pool.query(fresh);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == fresh[i]);
  }
  CHECK(pool.size() == 50);
  // buffer never exceeds capacity
  Tensor4<float> more(4, 1, 4, 4, 99.0f);
  pool.query(more);
  CHECK(pool.size() == 50);
}

TEST_CASE("image pool: capacity zero always returns fresh") {
  ImagePool<float> pool(0, 2);
  Tensor4<float> fresh(3, 1, 2, 2, 7.0f);
  auto out = pool.query(fresh);
  CHECK(pool.size() == 0);
  for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 7.0f);
}

TEST_CASE("image pool: swap fraction concentrates at one half") {
  ImagePool<float> pool(50, 3);
  // fill with marker value -1
  for (int i = 0; i < 50; ++i) {
    Tensor4<float> f(1, 1, 1, 1, -1.0f);
    pool.query(f);
  }
  int swapped = 0;
  const int queries = 10000;
  for (int i = 0; i < queries; ++i) {
    Tensor4<float> f(1, 1, 1, 1, static_cast<float>(i));
    auto out = pool.query(f);
    if (out[0] != static_cast<float>(i)) ++swapped;
  }
  const double fraction = static_cast<double>(swapped) / queries;
  CHECK(fraction > 0.48);
  CHECK(fraction < 0.52);
}

TEST_CASE("frozen discriminator emitting 1 gives zero generator gradient") {
  // with lambda_cyc = 0, scores == 1 mean the adversarial term sits at its
  // minimum; the gradient into the generator is exactly zero
  Tensor4<double> scores(2, 1, 3, 3, 1.0);
  auto g = adversarial_loss_generator_grad(scores);
  for (size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);

  auto spec = build_resnet_generator(1, 4, 1, 16);
  auto st = init_parameters<double>(spec, 3);
  Tensor4<double> x(1, 1, 16, 16, 0.5);
  Tape<double> tape;
  forward(st, x, Mode::train, nullptr, &tape);
  zero_grads(st);
  backward(st, tape, Tensor4<double>(1, 1, 16, 16, 0.0));
  for (const auto& p : st.params)
    for (size_t i = 0; i < p.size(); ++i) CHECK(p.grad_data()[i] == 0.0);
}

TEST_CASE("generator and discriminator updates touch disjoint parameter sets") {
  TrainConfig cfg = tiny_cyclegan_config(11);
  auto state = make_cyclegan_state<float>(cfg);
  auto bx = phantom_batch<float>(DomainTag::source_3T, 11, 2, cfg.image_size);
  auto by = phantom_batch<float>(DomainTag::target_1p5T, 11, 2, cfg.image_size);

  // generator-side backward through a discriminator with frozen parameters
  // leaves every discriminator gradient untouched
  zero_grads(state.G);
  zero_grads(state.D_Y);
  Tape<float> tg, td;
  auto fake = forward(state.G, bx, Mode::train, &state.rng, &tg);
  auto scores = forward(state.D_Y, fake, Mode::train, &state.rng, &td);
  auto g_in = backward(state.D_Y, td, adversarial_loss_generator_grad(scores), false);
  backward(state.G, tg, g_in, true);
  for (const auto& p : state.D_Y.params)
    for (size_t i = 0; i < p.size(); ++i) CHECK(p.grad_data()[i] == 0.0f);
  bool any_g_grad = false;
  for (const auto& p : state.G.params)
    for (size_t i = 0; i < p.size(); ++i)
      if (p.grad_data()[i] != 0.0f) any_g_grad = true;
  CHECK(any_g_grad);

  // and the discriminator update must leave generator parameters untouched
  auto snapshot = state.G;
  {
    zero_grads(state.D_Y);
    Tape<float> tr, tf;
    auto rs = forward(state.D_Y, by, Mode::train, &state.rng, &tr);
    auto fs2 = forward(state.D_Y, fake, Mode::train, &state.rng, &tf);
    backward(state.D_Y, tr, adversarial_loss_discriminator_grad_real(rs), true);
    backward(state.D_Y, tf, adversarial_loss_discriminator_grad_fake(fs2), true);
    state.adam_DY.step(state.D_Y);
  }
  CHECK(params_equal(snapshot, state.G));
}

TEST_CASE("cyclegan step: losses finite and bit-identical across reruns") {
  TrainConfig cfg = tiny_cyclegan_config(5);
  auto bx = phantom_batch<float>(DomainTag::source_3T, 5, 2, cfg.image_size);
  auto by = phantom_batch<float>(DomainTag::target_1p5T, 5, 2, cfg.image_size);

  auto s1 = make_cyclegan_state<float>(cfg);
  auto r1 = cyclegan_train_step(s1, bx, by);
  auto s2 = make_cyclegan_state<float>(cfg);
  auto r2 = cyclegan_train_step(s2, bx, by);

  CHECK(r1.all_finite());
  CHECK(r1.loss_g_adv == r2.loss_g_adv);
  CHECK(r1.loss_f_adv == r2.loss_f_adv);
  CHECK(r1.loss_cycle_forward == r2.loss_cycle_forward);
  CHECK(r1.loss_cycle_backward == r2.loss_cycle_backward);
  CHECK(r1.loss_d_x == r2.loss_d_x);
  CHECK(r1.loss_d_y == r2.loss_d_y);
  CHECK(params_equal(s1.G, s2.G));
  CHECK(params_equal(s1.D_X, s2.D_X));
  CHECK(s1.step == 1);
}

TEST_CASE("cyclegan generator objective passes a compact gradient check") {
  // tiny configuration: 8x8 images, 1 residual block, 2-layer discriminator
  TrainConfig cfg;
  cfg.image_size = 8;
  cfg.base_filters = 4;
  cfg.n_blocks = 1;
  cfg.seed = 17;
  auto G = init_parameters<double>(build_resnet_generator(1, 4, 1, 8), 21);
  auto F = init_parameters<double>(build_resnet_generator(1, 4, 1, 8), 22);
  NetworkSpec dspec;
  dspec.name = "tiny_disc";
  dspec.input_shape = {1, 8, 8};
  dspec.layers.push_back(LayerSpec::conv2d(4, 4, 2, 1));
  dspec.layers.push_back(LayerSpec::activation(ActKind::leaky_relu, 0.2));
  dspec.layers.push_back(LayerSpec::conv2d(1, 4, 1, 1));
  auto DY = init_parameters<double>(dspec, 23);
  auto DX = init_parameters<double>(dspec, 24);

  Rng rng(25);
  Tensor4<double> x(1, 1, 8, 8), y(1, 1, 8, 8);
  for (size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.uniform01();
    y[i] = rng.uniform01();
  }
  const double lambda = 10.0;

  // scalar objective; the projection trick is unnecessary because the
  // objective is already scalar, so forward() returns it in a 1x1 tensor
  auto objective = [&]() {
    Tensor4<double> out(1, 1, 1, 1);
    Tensor4<double> fy = forward(G, x, Mode::infer);
    Tensor4<double> rx = forward(F, fy, Mode::infer);
    Tensor4<double> fx = forward(F, y, Mode::infer);
    Tensor4<double> ry = forward(G, fx, Mode::infer);
    out[0] = adversarial_loss_generator(forward(DY, fy, Mode::infer)) +
             adversarial_loss_generator(forward(DX, fx, Mode::infer)) +
             lambda * (cycle_loss(x, rx) + cycle_loss(y, ry));
    return out;
  };
  auto backward_all = [&](const Tensor4<double>& proj) {
    zero_grads(G);
    zero_grads(F);
    const double scale = proj[0];  // d(total)/d(objective)
    Tape<double> tg1, tf1, tf2, tg2, tdy, tdx;
    Tensor4<double> fy = forward(G, x, Mode::infer, nullptr, &tg1);
    Tensor4<double> rx = forward(F, fy, Mode::infer, nullptr, &tf1);
    Tensor4<double> fx = forward(F, y, Mode::infer, nullptr, &tf2);
    Tensor4<double> ry = forward(G, fx, Mode::infer, nullptr, &tg2);
    Tensor4<double> sy = forward(DY, fy, Mode::infer, nullptr, &tdy);
    Tensor4<double> sx = forward(DX, fx, Mode::infer, nullptr, &tdx);

    Tensor4<double> g_rx = cycle_loss_grad(x, rx);
    for (size_t i = 0; i < g_rx.size(); ++i) g_rx[i] *= lambda * scale;
    Tensor4<double> g_fy = backward(F, tf1, g_rx, true);
    Tensor4<double> g_sy = adversarial_loss_generator_grad(sy);
    for (size_t i = 0; i < g_sy.size(); ++i) g_sy[i] *= scale;
    Tensor4<double> g_fy_adv = backward(DY, tdy, g_sy, false);
    for (size_t i = 0; i < g_fy.size(); ++i) g_fy[i] += g_fy_adv[i];
    backward(G, tg1, g_fy, true);

    Tensor4<double> g_ry = cycle_loss_grad(y, ry);
    for (size_t i = 0; i < g_ry.size(); ++i) g_ry[i] *= lambda * scale;
    Tensor4<double> g_fx = backward(G, tg2, g_ry, true);
    Tensor4<double> g_sx = adversarial_loss_generator_grad(sx);
    for (size_t i = 0; i < g_sx.size(); ++i) g_sx[i] *= scale;
    Tensor4<double> g_fx_adv = backward(DX, tdx, g_sx, false);
    for (size_t i = 0; i < g_fx.size(); ++i) g_fx[i] += g_fx_adv[i];
    backward(F, tf2, g_fx, true);
  };

  std::vector<ParamView<double>> views;
  for (auto& p : G.params) views.push_back({"G." + p.name, p.data(), p.size(), p.grad_data()});
  for (auto& p : F.params) views.push_back({"F." + p.name, p.data(), p.size(), p.grad_data()});
  GradCheckOptions opt;
  opt.eps = 1e-5;
  opt.max_coords_per_param = 6;
  auto rep = grad_check<double>(objective, backward_all, views, opt);
  CHECK_MESSAGE(rep.max_rel_error < 1e-4, rep.worst_param);
}

TEST_CASE("dcgan step: first-step losses near -ln(0.5), outputs in range") {
  TrainConfig cfg;
  cfg.seed = 31;
  cfg.image_size = 64;
  auto state = make_dcgan_state<float>(cfg);
  auto real = phantom_batch<float>(DomainTag::target_1p5T, 31, 4, 64);

  auto rec = dcgan_train_step(state, real);
  CHECK(rec.all_finite());
  CHECK(rec.loss_d > 0.3);
  CHECK(rec.loss_d < 3.0);
  CHECK(rec.loss_g > 0.3);
  CHECK(rec.loss_g < 3.0);

  // generator output stays in (0,1) after updates
  Rng rng(32);
  auto z = sample_latent<float>(2, 100, rng);
  auto imgs = forward(state.G, z, Mode::infer);
  for (size_t i = 0; i < imgs.size(); ++i) {
    CHECK(imgs[i] > 0.0f);
    CHECK(imgs[i] < 1.0f);
  }

  // same seed gives an identical record
  auto state2 = make_dcgan_state<float>(cfg);
  auto rec2 = dcgan_train_step(state2, real);
  CHECK(rec.loss_d == rec2.loss_d);
  CHECK(rec.loss_g == rec2.loss_g);
}

TEST_CASE("checkpoint: save/load round trip is bit-identical") {
  TrainConfig cfg = tiny_cyclegan_config(41);
  auto state = make_cyclegan_state<float>(cfg);
  auto bx = phantom_batch<float>(DomainTag::source_3T, 41, 2, cfg.image_size);
  auto by = phantom_batch<float>(DomainTag::target_1p5T, 41, 2, cfg.image_size);
  cyclegan_train_step(state, bx, by);
  cyclegan_train_step(state, bx, by);

  const auto dir = temp_dir("ckpt_roundtrip");
  save_checkpoint(state, dir.string());
  auto loaded = load_cyclegan_checkpoint<float>(dir.string());

  CHECK(loaded.step == state.step);
  CHECK(params_equal(loaded.G, state.G));
  CHECK(params_equal(loaded.F, state.F));
  CHECK(params_equal(loaded.D_X, state.D_X));
  CHECK(params_equal(loaded.D_Y, state.D_Y));
  CHECK(loaded.rng == state.rng);
  CHECK(loaded.pool_X.size() == state.pool_X.size());
  for (size_t i = 0; i < state.pool_X.buffer().size(); ++i)
    CHECK(std::memcmp(loaded.pool_X.buffer()[i].data(), state.pool_X.buffer()[i].data(),
                      state.pool_X.buffer()[i].size() * sizeof(float)) == 0);

  // identical forward passes on a fixed input
  auto y1 = forward(state.G, bx, Mode::infer);
  auto y2 = forward(loaded.G, bx, Mode::infer);
  CHECK(std::memcmp(y1.data(), y2.data(), y1.size() * sizeof(float)) == 0);

  // optimizer slots restored: one more step matches exactly
  auto r1 = cyclegan_train_step(state, bx, by);
  auto r2 = cyclegan_train_step(loaded, bx, by);
  CHECK(r1.loss_g_adv == r2.loss_g_adv);
  CHECK(r1.loss_d_x == r2.loss_d_x);
}

TEST_CASE("checkpoint: fresh save equals re-initialization with the same seed") {
  TrainConfig cfg = tiny_cyclegan_config(43);
  auto state = make_cyclegan_state<float>(cfg);
  const auto dir = temp_dir("ckpt_fresh");
  save_checkpoint(state, dir.string());
  auto loaded = load_cyclegan_checkpoint<float>(dir.string());
  auto reinit = make_cyclegan_state<float>(cfg);
  CHECK(params_equal(loaded.G, reinit.G));
  CHECK(params_equal(loaded.D_Y, reinit.D_Y));
}

TEST_CASE("checkpoint: truncated blob is rejected with no partial state") {
  TrainConfig cfg = tiny_cyclegan_config(47);
  auto state = make_cyclegan_state<float>(cfg);
  const auto dir = temp_dir("ckpt_trunc");
  save_checkpoint(state, dir.string());

  const auto blob = dir / "weights.bin";
  const auto size = fs::file_size(blob);
  fs::resize_file(blob, size - 64);
  CHECK_THROWS_AS(load_cyclegan_checkpoint<float>(dir.string()), CorruptionError);
}

TEST_CASE("checkpoint: unknown format version is rejected") {
  TrainConfig cfg = tiny_cyclegan_config(49);
  auto state = make_cyclegan_state<float>(cfg);
  const auto dir = temp_dir("ckpt_version");
  save_checkpoint(state, dir.string());

  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  nlohmann::json manifest;
  in >> manifest;
  in.close();
  manifest["format_version"] = 99;
  std::ofstream out(manifest_path);
  out << manifest.dump(1);
  out.close();
  CHECK_THROWS_AS(load_cyclegan_checkpoint<float>(dir.string()), VersionError);
}

TEST_CASE("train loop: step accounting, history rows and resume") {
  TrainConfig cfg = tiny_cyclegan_config(53);
  cfg.epochs = 1;
  cfg.checkpoint_every = 1;
  auto dsx = make_phantom_dataset(8, cfg.image_size, DomainTag::source_3T, 53);
  auto dsy = make_phantom_dataset(8, cfg.image_size, DomainTag::target_1p5T, 53);
  // 8 phantoms split 70/30 -> 5 train; batch 4 -> 2 steps per epoch
  const auto dir = temp_dir("loop");
  auto hist = train_cyclegan<float>(dsx, dsy, cfg, dir.string());
  CHECK(hist.cycle.size() == 2);
  CHECK(hist.cycle.back().step == 2);

  std::ifstream h(dir / "history.csv");
  std::string line;
  int rows = -1;  // header
  while (std::getline(h, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);

  // resume continues the counter without re-initialization
  TrainConfig more = cfg;
  more.epochs = 2;
  const auto ckpt = dir / "checkpoints" / "step_000002";
  REQUIRE(fs::exists(ckpt));
  auto hist2 = train_cyclegan<float>(dsx, dsy, more, dir.string(), ckpt.string());
  REQUIRE(!hist2.cycle.empty());
  CHECK(hist2.cycle.front().step == 3);
  CHECK(hist2.cycle.back().step == 4);
}

TEST_CASE("non-finite loss raises a divergence error carrying the step index") {
  TrainConfig cfg = tiny_cyclegan_config(61);
  auto state = make_cyclegan_state<float>(cfg);
  auto bx = phantom_batch<float>(DomainTag::source_3T, 61, 2, cfg.image_size);
  auto by = phantom_batch<float>(DomainTag::target_1p5T, 61, 2, cfg.image_size);
  cyclegan_train_step(state, bx, by);
  // poison the discriminator's final linear conv: its scores feed the
  // adversarial losses directly, with no squashing nonlinearity to mask
  // the infinity
  auto& weight = state.D_Y.param("l11.weight").tensor;
  for (size_t i = 0; i < weight.size(); ++i)
    weight[i] = std::numeric_limits<float>::infinity();
  try {
    cyclegan_train_step(state, bx, by);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step == 2);
  }
}

TEST_CASE("dcgan training: losses stay finite over a few epochs") {
  TrainConfig cfg;
  cfg.seed = 57;
  cfg.image_size = 64;
  cfg.max_steps = 4;
  cfg.checkpoint_every = 1000;
  auto ds = make_phantom_dataset(8, 64, DomainTag::target_1p5T, 57);
  const auto dir = temp_dir("dcgan_loop");
  auto hist = train_dcgan<float>(ds, cfg, dir.string());
  CHECK(hist.dcgan.size() == 4);
  for (const auto& r : hist.dcgan) CHECK(r.all_finite());
}
