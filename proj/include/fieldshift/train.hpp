#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fieldshift/checkpoint.hpp"
#include "fieldshift/datapipe.hpp"
#include "fieldshift/gan.hpp"
#include "fieldshift/imageops.hpp"

namespace fieldshift {

struct TrainingHistory {
  std::vector<CycleLossRecord> cycle;
  std::vector<DcganLossRecord> dcgan;
};

namespace detail {

inline std::string fmt_loss(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::ofstream open_history(const std::filesystem::path& path,
                                  const std::string& header, bool resuming) {
  const bool exists = std::filesystem::exists(path) && resuming;
  std::ofstream out(path, exists ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError("train: cannot open " + path.string());
  if (!exists) out << header << '\n';
  return out;
}

template <typename T>
std::vector<float> tensor_image(const Tensor4<T>& batch, int index) {
  std::vector<float> img(batch.plane_size());
  const T* src = batch.data() + batch.index(index, 0, 0, 0);
  for (size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(src[i]);
  return img;
}

/// 4x2 grid of [input | translation] pairs from the first images of a part.
template <typename T>
void write_cyclegan_samples(const CycleGanState<T>& state,
                            const std::vector<SliceImage>& part,
                            const std::filesystem::path& path) {
  if (part.empty()) return;
  const int rows = 4, cols = 2;
  std::vector<std::vector<float>> tiles;
  for (int r = 0; r < rows; ++r) {
    const SliceImage& img = part[r % part.size()];
    Tensor4<T> x(1, 1, img.height, img.width);
    for (size_t i = 0; i < img.pixels.size(); ++i) x[i] = static_cast<T>(img.pixels[i]);
    Tensor4<T> y = forward(state.G, x, Mode::infer);
    tiles.push_back(img.pixels);
    tiles.push_back(tensor_image(y, 0));
  }
  int gh, gw;
  auto grid = tile_grid(tiles, part.front().height, part.front().width, rows, cols, gh, gw);
  write_pgm16(path.string(), grid, gh, gw);
}

/// 4x2 grid of generated samples from fixed latents.
template <typename T>
void write_dcgan_samples(const DcganState<T>& state, const std::filesystem::path& path) {
  const int rows = 4, cols = 2;
  Rng rng(mix_seed(state.config.seed, 0x5a3));
  Tensor4<T> z = sample_latent<T>(rows * cols, state.config.latent_dim, rng);
  Tensor4<T> imgs = forward(state.G, z, Mode::infer);
  std::vector<std::vector<float>> tiles;
  for (int k = 0; k < rows * cols; ++k) tiles.push_back(tensor_image(imgs, k));
  int gh, gw;
  auto grid = tile_grid(tiles, imgs.h(), imgs.w(), rows, cols, gh, gw);
  write_pgm16(path.string(), grid, gh, gw);
}

inline std::filesystem::path checkpoint_dir(const std::filesystem::path& out_dir,
                                            long step) {
  char name[32];
  std::snprintf(name, sizeof(name), "step_%06ld", step);
  return out_dir / "checkpoints" / name;
}

}  // namespace detail

inline constexpr const char* kCycleHistoryHeader =
    "step,epoch,loss_G_adv,loss_F_adv,loss_cycle_forward,loss_cycle_backward,"
    "loss_D_X,loss_D_Y";
inline constexpr const char* kDcganHistoryHeader = "step,epoch,loss_D,loss_G";

/// Runs the CycleGAN schedule over two unpaired domains. Appends one
/// history.csv row per step, checkpoints every `checkpoint_every` epochs and
/// at the end, and writes a 4x2 sample grid beside each checkpoint.
/// `resume_from` continues a saved run (step counter included).
template <typename T>
TrainingHistory train_cyclegan(const SliceDataset& domain_x,
                               const SliceDataset& domain_y,
                               const TrainConfig& config,
                               const std::string& out_dir,
                               const std::string& resume_from = "") {
  namespace fs = std::filesystem;
  config.validate();
  if (domain_x.train.empty() || domain_y.train.empty())
    throw DatasetError("train_cyclegan: empty training split");
  fs::create_directories(out_dir);

  CycleGanState<T> state = resume_from.empty()
                               ? make_cyclegan_state<T>(config)
                               : load_cyclegan_checkpoint<T>(resume_from);
  if (!resume_from.empty()) state.config = config;

  std::ofstream history = detail::open_history(fs::path(out_dir) / "history.csv",
                                               kCycleHistoryHeader, !resume_from.empty());
  TrainingHistory result;
  const long steps_per_epoch = static_cast<long>(std::min(
      (domain_x.train.size() + config.batch_size - 1) / config.batch_size,
      (domain_y.train.size() + config.batch_size - 1) / config.batch_size));
  const long total_steps = config.max_steps > 0
                               ? config.max_steps
                               : steps_per_epoch * config.epochs;

  int epoch = static_cast<int>(state.step / steps_per_epoch);
  while (state.step < total_steps) {
    ++epoch;
    BatchIterator<T> iter_x(domain_x.train, config.batch_size, true,
                            mix_seed(config.seed, 0xA), epoch);
    BatchIterator<T> iter_y(domain_y.train, config.batch_size, true,
                            mix_seed(config.seed, 0xB), epoch);
    Tensor4<T> bx, by;
    while (state.step < total_steps && iter_x.next(bx) && iter_y.next(by)) {
      if (bx.n() != by.n()) {
        // trailing partial batches of unequal size: trim to the smaller
        const int b = std::min(bx.n(), by.n());
        Tensor4<T> tx(b, 1, bx.h(), bx.w()), ty(b, 1, by.h(), by.w());
        std::copy(bx.data(), bx.data() + tx.size(), tx.data());
        std::copy(by.data(), by.data() + ty.size(), ty.data());
        bx = tx;
        by = ty;
      }
      CycleLossRecord rec;
      try {
        rec = cyclegan_train_step(state, bx, by);
      } catch (const DivergenceError&) {
        history.flush();
        throw;
      }
      rec.epoch = epoch;
      result.cycle.push_back(rec);
      history << rec.step << ',' << rec.epoch << ','
              << detail::fmt_loss(rec.loss_g_adv) << ','
              << detail::fmt_loss(rec.loss_f_adv) << ','
              << detail::fmt_loss(rec.loss_cycle_forward) << ','
              << detail::fmt_loss(rec.loss_cycle_backward) << ','
              << detail::fmt_loss(rec.loss_d_x) << ','
              << detail::fmt_loss(rec.loss_d_y) << '\n';
      history.flush();
    }
    const bool last = state.step >= total_steps;
    if (epoch % config.checkpoint_every == 0 || last) {
      const fs::path ckpt = detail::checkpoint_dir(out_dir, state.step);
      save_checkpoint(state, ckpt.string());
      detail::write_cyclegan_samples(state, domain_x.test.empty() ? domain_x.train
                                                                  : domain_x.test,
                                     ckpt / "samples.pgm");
    }
  }
  return result;
}

/// DCGAN schedule over a single domain (64x64 images).
template <typename T>
TrainingHistory train_dcgan(const SliceDataset& dataset, const TrainConfig& config,
                            const std::string& out_dir,
                            const std::string& resume_from = "") {
  namespace fs = std::filesystem;
  config.validate();
  if (dataset.train.empty()) throw DatasetError("train_dcgan: empty training split");
  fs::create_directories(out_dir);

  DcganState<T> state = resume_from.empty() ? make_dcgan_state<T>(config)
                                            : load_dcgan_checkpoint<T>(resume_from);
  if (!resume_from.empty()) state.config = config;
  if (resume_from.empty()) state.domain = dataset.domain;

  std::ofstream history = detail::open_history(fs::path(out_dir) / "history.csv",
                                               kDcganHistoryHeader, !resume_from.empty());
  TrainingHistory result;
  const long steps_per_epoch = static_cast<long>(
      (dataset.train.size() + config.batch_size - 1) / config.batch_size);
  const long total_steps = config.max_steps > 0
                               ? config.max_steps
                               : steps_per_epoch * config.epochs;

  int epoch = static_cast<int>(state.step / steps_per_epoch);
  while (state.step < total_steps) {
    ++epoch;
    BatchIterator<T> iter(dataset.train, config.batch_size, true,
                          mix_seed(config.seed, 0xC), epoch);
    Tensor4<T> batch;
    while (state.step < total_steps && iter.next(batch)) {
      DcganLossRecord rec;
      try {
        rec = dcgan_train_step(state, batch);
      } catch (const DivergenceError&) {
        history.flush();
        throw;
      }
      rec.epoch = epoch;
      result.dcgan.push_back(rec);
      history << rec.step << ',' << rec.epoch << ',' << detail::fmt_loss(rec.loss_d)
              << ',' << detail::fmt_loss(rec.loss_g) << '\n';
      history.flush();
    }
    const bool last = state.step >= total_steps;
    if (epoch % config.checkpoint_every == 0 || last) {
      const fs::path ckpt = detail::checkpoint_dir(out_dir, state.step);
      save_checkpoint(state, ckpt.string());
      detail::write_dcgan_samples(state, ckpt / "samples.pgm");
    }
  }
  return result;
}

}  // namespace fieldshift
