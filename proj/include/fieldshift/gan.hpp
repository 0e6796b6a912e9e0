#pragma once

#include <cmath>
#include <string>

#include "fieldshift/adam.hpp"
#include "fieldshift/data_types.hpp"
#include "fieldshift/losses.hpp"
#include "fieldshift/models.hpp"
#include "fieldshift/network.hpp"
#include "fieldshift/pool.hpp"

namespace fieldshift {

/// Every training hyperparameter; defaults follow the reference schedule
/// (50 epochs, batch 4, Adam lr 2e-4 with beta1 0.5).
struct TrainConfig {
  int epochs = 50;
  int batch_size = 4;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lambda_cyc = 10.0;
  double lambda_identity = 0.0;  // off by default; flag enables it
  int pool_size = 50;
  uint64_t seed = 0;
  int image_size = 256;
  int checkpoint_every = 10;  // epochs between checkpoints

  // architecture knobs
  int base_filters = 64;
  int n_blocks = 9;
  int disc_filters = 64;
  int latent_dim = 100;

  int max_steps = 0;  // 0 = epochs decide; smoke runs cap the step count

  void validate() const {
    if (epochs < 1 || batch_size < 1 || pool_size < 0 || image_size < 4)
      throw ConfigError("TrainConfig: epochs/batch_size/pool_size/image_size out of range");
    if (!(lr > 0.0 && lr < 1.0))
      throw ConfigError("TrainConfig: lr must lie in (0,1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("TrainConfig: betas must lie in [0,1)");
    if (lambda_cyc < 0.0 || lambda_identity < 0.0)
      throw ConfigError("TrainConfig: loss weights must be non-negative");
  }
};

struct CycleLossRecord {
  long step = 0;
  int epoch = 0;
  double loss_g_adv = 0, loss_f_adv = 0;
  double loss_cycle_forward = 0, loss_cycle_backward = 0;
  double loss_d_x = 0, loss_d_y = 0;

  bool all_finite() const {
    return std::isfinite(loss_g_adv) && std::isfinite(loss_f_adv) &&
           std::isfinite(loss_cycle_forward) && std::isfinite(loss_cycle_backward) &&
           std::isfinite(loss_d_x) && std::isfinite(loss_d_y);
  }
};

struct DcganLossRecord {
  long step = 0;
  int epoch = 0;
  double loss_d = 0, loss_g = 0;

  bool all_finite() const { return std::isfinite(loss_d) && std::isfinite(loss_g); }
};

// ---------------------------------------------------------------------------
// CycleGAN
// ---------------------------------------------------------------------------

/// G maps source to target, F maps target to source; D_X judges the source
/// domain, D_Y the target domain.
template <typename T>
struct CycleGanState {
  TrainConfig config;
  NetworkState<T> G, F, D_X, D_Y;
  Adam<T> adam_G, adam_F, adam_DX, adam_DY;
  ImagePool<T> pool_X, pool_Y;
  long step = 0;
  Rng rng;
};

template <typename T>
CycleGanState<T> make_cyclegan_state(const TrainConfig& config) {
  config.validate();
  CycleGanState<T> s;
  s.config = config;
  const auto gen_spec = [&](const char* name) {
    NetworkSpec spec = build_resnet_generator(1, config.base_filters,
                                              config.n_blocks, config.image_size);
    spec.name = name;
    return spec;
  };
  const auto disc_spec = [&](const char* name) {
    NetworkSpec spec = build_patch_discriminator(1, config.disc_filters,
                                                 config.image_size);
    spec.name = name;
    return spec;
  };
  s.G = init_parameters<T>(gen_spec("G"), mix_seed(config.seed, 1));
  s.F = init_parameters<T>(gen_spec("F"), mix_seed(config.seed, 2));
  s.D_X = init_parameters<T>(disc_spec("D_X"), mix_seed(config.seed, 3));
  s.D_Y = init_parameters<T>(disc_spec("D_Y"), mix_seed(config.seed, 4));
  s.adam_G = Adam<T>(config.lr, config.beta1, config.beta2);
  s.adam_F = Adam<T>(config.lr, config.beta1, config.beta2);
  s.adam_DX = Adam<T>(config.lr, config.beta1, config.beta2);
  s.adam_DY = Adam<T>(config.lr, config.beta1, config.beta2);
  s.adam_G.attach(s.G);
  s.adam_F.attach(s.F);
  s.adam_DX.attach(s.D_X);
  s.adam_DY.attach(s.D_Y);
  s.pool_X = ImagePool<T>(config.pool_size, mix_seed(config.seed, 5));
  s.pool_Y = ImagePool<T>(config.pool_size, mix_seed(config.seed, 6));
  s.rng = Rng(mix_seed(config.seed, 7));
  return s;
}

/// One minimax step: (1) joint G,F update on the combined adversarial +
/// cycle objective, (2) D_Y update with real y and pooled G(x), (3) D_X
/// update with real x and pooled F(y).
template <typename T>
CycleLossRecord cyclegan_train_step(CycleGanState<T>& state,
                                    const Tensor4<T>& batch_x,
                                    const Tensor4<T>& batch_y) {
  if (batch_x.n() != batch_y.n())
    throw DimensionError("cyclegan_train_step: batch axis mismatch (" +
                         std::to_string(batch_x.n()) + " vs " +
                         std::to_string(batch_y.n()) + ")");
  const double lambda = state.config.lambda_cyc;
  const double lambda_id = state.config.lambda_identity;
  CycleLossRecord rec;
  rec.step = state.step + 1;

  zero_grads(state.G);
  zero_grads(state.F);

  // ---- generator objective, forward cycle: x -> G -> F ----
  Tape<T> tape_g1;
  Tensor4<T> fake_y = forward(state.G, batch_x, Mode::train, &state.rng, &tape_g1);
  Tensor4<T> grad_fake_y(fake_y.n(), fake_y.c(), fake_y.h(), fake_y.w());
  {
    Tape<T> tape_f1;
    Tensor4<T> rec_x = forward(state.F, fake_y, Mode::train, &state.rng, &tape_f1);
    rec.loss_cycle_forward = cycle_loss(batch_x, rec_x);
    Tensor4<T> g_rec = cycle_loss_grad(batch_x, rec_x);
    for (size_t i = 0; i < g_rec.size(); ++i) g_rec[i] *= static_cast<T>(lambda);
    grad_fake_y = backward(state.F, tape_f1, g_rec, true);
  }
  {
    Tape<T> tape_dy;
    Tensor4<T> scores = forward(state.D_Y, fake_y, Mode::train, &state.rng, &tape_dy);
    rec.loss_g_adv = adversarial_loss_generator(scores);
    Tensor4<T> g_adv = backward(state.D_Y, tape_dy,
                                adversarial_loss_generator_grad(scores), false);
    for (size_t i = 0; i < grad_fake_y.size(); ++i) grad_fake_y[i] += g_adv[i];
  }
  backward(state.G, tape_g1, grad_fake_y, true);
  tape_g1.layers.clear();

  // ---- generator objective, backward cycle: y -> F -> G ----
  Tape<T> tape_f2;
  Tensor4<T> fake_x = forward(state.F, batch_y, Mode::train, &state.rng, &tape_f2);
  Tensor4<T> grad_fake_x(fake_x.n(), fake_x.c(), fake_x.h(), fake_x.w());
  {
    Tape<T> tape_g2;
    Tensor4<T> rec_y = forward(state.G, fake_x, Mode::train, &state.rng, &tape_g2);
    rec.loss_cycle_backward = cycle_loss(batch_y, rec_y);
    Tensor4<T> g_rec = cycle_loss_grad(batch_y, rec_y);
    for (size_t i = 0; i < g_rec.size(); ++i) g_rec[i] *= static_cast<T>(lambda);
    grad_fake_x = backward(state.G, tape_g2, g_rec, true);
  }
  {
    Tape<T> tape_dx;
    Tensor4<T> scores = forward(state.D_X, fake_x, Mode::train, &state.rng, &tape_dx);
    rec.loss_f_adv = adversarial_loss_generator(scores);
    Tensor4<T> g_adv = backward(state.D_X, tape_dx,
                                adversarial_loss_generator_grad(scores), false);
    for (size_t i = 0; i < grad_fake_x.size(); ++i) grad_fake_x[i] += g_adv[i];
  }
  backward(state.F, tape_f2, grad_fake_x, true);
  tape_f2.layers.clear();

  // ---- optional identity terms: G(y) ~ y and F(x) ~ x ----
  if (lambda_id > 0.0) {
    Tape<T> tape_idg;
    Tensor4<T> id_y = forward(state.G, batch_y, Mode::train, &state.rng, &tape_idg);
    Tensor4<T> g_id = cycle_loss_grad(batch_y, id_y);
    for (size_t i = 0; i < g_id.size(); ++i) g_id[i] *= static_cast<T>(lambda_id);
    backward(state.G, tape_idg, g_id, true);
    tape_idg.layers.clear();
    Tape<T> tape_idf;
    Tensor4<T> id_x = forward(state.F, batch_x, Mode::train, &state.rng, &tape_idf);
    Tensor4<T> f_id = cycle_loss_grad(batch_x, id_x);
    for (size_t i = 0; i < f_id.size(); ++i) f_id[i] *= static_cast<T>(lambda_id);
    backward(state.F, tape_idf, f_id, true);
  }

  // joint Adam step over the combined objective
  state.adam_G.step(state.G);
  state.adam_F.step(state.F);

  // ---- D_Y update: real y vs pooled G(x) ----
  {
    Tensor4<T> pooled = state.pool_Y.query(fake_y);
    zero_grads(state.D_Y);
    Tape<T> tape_real, tape_fake;
    Tensor4<T> real_scores = forward(state.D_Y, batch_y, Mode::train, &state.rng, &tape_real);
    Tensor4<T> fake_scores = forward(state.D_Y, pooled, Mode::train, &state.rng, &tape_fake);
    rec.loss_d_y = adversarial_loss_discriminator(real_scores, fake_scores);
    backward(state.D_Y, tape_real,
             adversarial_loss_discriminator_grad_real(real_scores), true);
    backward(state.D_Y, tape_fake,
             adversarial_loss_discriminator_grad_fake(fake_scores), true);
    state.adam_DY.step(state.D_Y);
  }

  // ---- D_X update: real x vs pooled F(y) ----
  {
    Tensor4<T> pooled = state.pool_X.query(fake_x);
    zero_grads(state.D_X);
    Tape<T> tape_real, tape_fake;
    Tensor4<T> real_scores = forward(state.D_X, batch_x, Mode::train, &state.rng, &tape_real);
    Tensor4<T> fake_scores = forward(state.D_X, pooled, Mode::train, &state.rng, &tape_fake);
    rec.loss_d_x = adversarial_loss_discriminator(real_scores, fake_scores);
    backward(state.D_X, tape_real,
             adversarial_loss_discriminator_grad_real(real_scores), true);
    backward(state.D_X, tape_fake,
             adversarial_loss_discriminator_grad_fake(fake_scores), true);
    state.adam_DX.step(state.D_X);
  }

  if (!rec.all_finite())
    throw DivergenceError(rec.step, "cyclegan_train_step: non-finite loss at step " +
                                        std::to_string(rec.step));
  state.step = rec.step;
  return rec;
}

// ---------------------------------------------------------------------------
// DCGAN
// ---------------------------------------------------------------------------

template <typename T>
struct DcganState {
  TrainConfig config;
  NetworkState<T> G, D;
  Adam<T> adam_G, adam_D;
  long step = 0;
  Rng rng;
  DomainTag domain = DomainTag::synthetic;  // which field strength it models
};

template <typename T>
DcganState<T> make_dcgan_state(const TrainConfig& config) {
  config.validate();
  DcganState<T> s;
  s.config = config;
  s.G = init_parameters<T>(build_dcgan_generator(config.latent_dim, 64),
                           mix_seed(config.seed, 11));
  s.D = init_parameters<T>(build_dcgan_discriminator(64), mix_seed(config.seed, 12));
  s.adam_G = Adam<T>(config.lr, config.beta1, config.beta2);
  s.adam_D = Adam<T>(config.lr, config.beta1, config.beta2);
  s.adam_G.attach(s.G);
  s.adam_D.attach(s.D);
  s.rng = Rng(mix_seed(config.seed, 13));
  return s;
}

template <typename T>
Tensor4<T> sample_latent(int batch, int latent_dim, Rng& rng) {
  Tensor4<T> z(batch, latent_dim, 1, 1);
  for (size_t i = 0; i < z.size(); ++i) z[i] = static_cast<T>(rng.normal());
  return z;
}

/// One DCGAN step: D on real vs G(z), then G through a frozen D; fresh
/// dropout masks on every forward pass.
template <typename T>
DcganLossRecord dcgan_train_step(DcganState<T>& state, const Tensor4<T>& real_batch) {
  DcganLossRecord rec;
  rec.step = state.step + 1;
  const int batch = real_batch.n();

  Tensor4<T> z = sample_latent<T>(batch, state.config.latent_dim, state.rng);
  Tensor4<T> ones(batch, 1, 1, 1, T(1));
  Tensor4<T> zeros(batch, 1, 1, 1, T(0));

  // discriminator update
  {
    Tensor4<T> fake = forward(state.G, z, Mode::train, &state.rng);  // detached
    zero_grads(state.D);
    Tape<T> tape_real, tape_fake;
    Tensor4<T> p_real = forward(state.D, real_batch, Mode::train, &state.rng, &tape_real);
    Tensor4<T> p_fake = forward(state.D, fake, Mode::train, &state.rng, &tape_fake);
    rec.loss_d = bce_loss(p_real, ones) + bce_loss(p_fake, zeros);
    backward(state.D, tape_real, bce_loss_grad(p_real, ones), true);
    backward(state.D, tape_fake, bce_loss_grad(p_fake, zeros), true);
    state.adam_D.step(state.D);
  }

  // generator update through the (frozen) discriminator
  {
    zero_grads(state.G);
    Tape<T> tape_g, tape_d;
    Tensor4<T> fake = forward(state.G, z, Mode::train, &state.rng, &tape_g);
    Tensor4<T> p = forward(state.D, fake, Mode::train, &state.rng, &tape_d);
    rec.loss_g = bce_loss(p, ones);
    Tensor4<T> g_fake = backward(state.D, tape_d, bce_loss_grad(p, ones), false);
    backward(state.G, tape_g, g_fake, true);
    state.adam_G.step(state.G);
  }

  if (!rec.all_finite())
    throw DivergenceError(rec.step, "dcgan_train_step: non-finite loss at step " +
                                        std::to_string(rec.step));
  state.step = rec.step;
  return rec;
}

}  // namespace fieldshift
