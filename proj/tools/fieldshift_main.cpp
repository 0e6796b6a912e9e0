// fieldshift: train and evaluate MRI field-strength translation models at
// the command line. Subcommands: prepare | train | translate | evaluate |
// report. Exit codes: 0 success, 2 usage or input error, 3 training
// divergence.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fieldshift/fieldshift.hpp"

namespace fs = std::filesystem;
using namespace fieldshift;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

struct PhantomSpec {
  int n = 0;
  int size = 0;
  uint64_t seed = 0;
  bool enabled() const { return n > 0; }
};

PhantomSpec parse_phantom(const std::string& text) {
  PhantomSpec spec;
  unsigned long long seed = 0;
  if (std::sscanf(text.c_str(), "%d,%d,%llu", &spec.n, &spec.size, &seed) != 3 ||
      spec.n < 2 || spec.size < 16)
    throw ConfigError("--phantom expects n,size,seed with n >= 2 and size >= 16");
  spec.seed = seed;
  return spec;
}

std::string slice_filename(DomainTag domain, const std::string& split, int index) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s_%s_%04d.pgm", domain_name(domain),
                split.c_str(), index);
  return buf;
}

void write_split(const std::vector<SliceImage>& part, const std::string& split,
                 const fs::path& out_dir, std::vector<ManifestRow>& manifest) {
  int index = 0;
  for (const auto& img : part) {
    ManifestRow row;
    row.file = slice_filename(img.domain, split, index);
    row.domain = img.domain;
    row.split = split;
    row.source_id = img.source_id;
    row.slice_index = img.slice_index;
    write_pgm16((out_dir / row.file).string(), img.pixels, img.height, img.width);
    manifest.push_back(row);
    ++index;
  }
}

void write_dataset(const SliceDataset& ds, const fs::path& out_dir,
                   std::vector<ManifestRow>& manifest) {
  write_split(ds.train, "train", out_dir, manifest);
  write_split(ds.test, "test", out_dir, manifest);
}

SliceDataset load_domain(const fs::path& data_dir, DomainTag domain) {
  const auto rows = read_manifest((data_dir / "manifest.csv").string());
  SliceDataset ds;
  ds.domain = domain;
  for (const auto& row : rows) {
    if (row.domain != domain) continue;
    SliceImage img;
    img.pixels = read_pgm16((data_dir / row.file).string(), img.height, img.width);
    img.source_id = row.source_id;
    img.slice_index = row.slice_index;
    img.domain = row.domain;
    (row.split == "train" ? ds.train : ds.test).push_back(std::move(img));
  }
  return ds;
}

SliceDataset resize_dataset(SliceDataset ds, int image_size) {
  auto fix = [image_size](std::vector<SliceImage>& part) {
    for (auto& img : part)
      if (img.height != image_size || img.width != image_size) img = standardize(img, image_size);
  };
  fix(ds.train);
  fix(ds.test);
  return ds;
}

/// Bind a generator network to a plain image->image function.
Translator make_translator(const NetworkState<float>& net) {
  return [&net](const std::vector<float>& pixels, int h, int w) {
    Tensor4<float> x(1, 1, h, w);
    for (size_t i = 0; i < pixels.size(); ++i) x[i] = pixels[i];
    Tensor4<float> y = forward(net, x, Mode::infer);
    return std::vector<float>(y.data(), y.data() + y.size());
  };
}

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--epochs", cfg.epochs, "training epochs (reference schedule: 50)")
      ->capture_default_str();
  cmd->add_option("--batch", cfg.batch_size, "batch size (reference schedule: 4)")
      ->capture_default_str();
  cmd->add_option("--lr", cfg.lr, "Adam learning rate (reference schedule: 0.0002)")
      ->capture_default_str();
  cmd->add_option("--beta1", cfg.beta1, "Adam first-moment decay (reference schedule: 0.5)")
      ->capture_default_str();
  cmd->add_option("--beta2", cfg.beta2, "Adam second-moment decay (default 0.999)")
      ->capture_default_str();
  cmd->add_option("--lambda-cyc", cfg.lambda_cyc,
                  "cycle-consistency weight (reference value 10)")
      ->capture_default_str();
  cmd->add_option("--lambda-identity", cfg.lambda_identity,
                  "identity-loss weight (0 disables, the default)")
      ->capture_default_str();
  cmd->add_option("--pool-size", cfg.pool_size, "image history pool capacity (50)")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "run seed; fixes every random choice")
      ->capture_default_str();
  cmd->add_option("--image-size", cfg.image_size,
                  "working resolution (reference: 256; DCGAN trains at 64)")
      ->capture_default_str();
  cmd->add_option("--checkpoint-every", cfg.checkpoint_every,
                  "epochs between checkpoints")
      ->capture_default_str();
  cmd->add_option("--base-filters", cfg.base_filters,
                  "generator base filter count (reference: 64)")
      ->capture_default_str();
  cmd->add_option("--n-blocks", cfg.n_blocks, "residual blocks (reference: 9)")
      ->capture_default_str();
  cmd->add_option("--disc-filters", cfg.disc_filters,
                  "discriminator base filter count (reference: 64)")
      ->capture_default_str();
  cmd->add_option("--latent-dim", cfg.latent_dim, "DCGAN latent size (100)")
      ->capture_default_str();
  cmd->add_option("--max-steps", cfg.max_steps,
                  "stop after this many steps (0 = run all epochs)")
      ->capture_default_str();
}

int cmd_prepare(const std::string& input_dir, const std::string& phantom_arg,
                const std::string& output_dir, const std::string& domain_arg,
                double train_fraction, uint64_t seed, int image_size,
                int slices_per_volume, bool by_volume) {
  fs::create_directories(output_dir);
  std::vector<ManifestRow> manifest;

  if (!phantom_arg.empty()) {
    const PhantomSpec spec = parse_phantom(phantom_arg);
    for (DomainTag domain : {DomainTag::source_3T, DomainTag::target_1p5T}) {
      SliceDataset ds = make_phantom_dataset(spec.n, spec.size, domain, spec.seed);
      write_dataset(ds, output_dir, manifest);
      std::printf("%s: %zu train / %zu test (phantom)\n", domain_name(domain),
                  ds.train.size(), ds.test.size());
    }
    write_manifest((fs::path(output_dir) / "manifest.csv").string(), manifest);
    return kExitOk;
  }

  if (input_dir.empty()) {
    std::fprintf(stderr, "prepare: provide --input or --phantom\n");
    return kExitUsage;
  }
  const DomainTag domain = parse_domain(domain_arg);
  std::vector<SliceImage> slices;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input_dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const std::string ext = file.extension().string();
    if (ext == ".nii") {
      Volume vol = read_nifti(file.string());
      vol.source_id = file.stem().string();
      for (auto& s : extract_slices(vol, slices_per_volume)) {
        s.domain = domain;
        slices.push_back(standardize(s, image_size));
      }
    } else if (ext == ".pgm") {
      SliceImage img;
      img.pixels = read_pgm16(file.string(), img.height, img.width);
      img.source_id = file.stem().string();
      img.domain = domain;
      slices.push_back(standardize(img, image_size));
    }
  }
  if (slices.empty()) {
    std::fprintf(stderr, "prepare: no volumes found in %s\n", input_dir.c_str());
    return kExitUsage;
  }
  SliceDataset ds = by_volume ? split_dataset_by_volume(slices, train_fraction, seed)
                              : split_dataset(slices, train_fraction, seed);
  ds.domain = domain;
  write_dataset(ds, output_dir, manifest);
  write_manifest((fs::path(output_dir) / "manifest.csv").string(), manifest);
  std::printf("%s: %zu train / %zu test\n", domain_name(domain), ds.train.size(),
              ds.test.size());
  return kExitOk;
}

int cmd_train(const std::string& model, const std::string& data_dir,
              const std::string& out_dir, const std::string& resume,
              const std::string& phantom_arg, bool phantom_smoke, TrainConfig cfg) {
  SliceDataset ds_x, ds_y;
  if (phantom_smoke) {
    // canonical CI path: 16 phantom images per domain at 64x64, 100 steps,
    // reduced widths so the run stays desk-sized
    cfg.image_size = 64;
    cfg.max_steps = cfg.max_steps > 0 ? cfg.max_steps : 100;
    cfg.base_filters = std::min(cfg.base_filters, 32);
    cfg.disc_filters = std::min(cfg.disc_filters, 32);
    cfg.n_blocks = std::min(cfg.n_blocks, 3);
    ds_x = make_phantom_dataset(16, 64, DomainTag::source_3T, cfg.seed);
    ds_y = make_phantom_dataset(16, 64, DomainTag::target_1p5T, cfg.seed);
  } else if (!phantom_arg.empty()) {
    const PhantomSpec spec = parse_phantom(phantom_arg);
    cfg.image_size = spec.size;
    ds_x = make_phantom_dataset(spec.n, spec.size, DomainTag::source_3T, spec.seed);
    ds_y = make_phantom_dataset(spec.n, spec.size, DomainTag::target_1p5T, spec.seed);
  } else if (!data_dir.empty()) {
    ds_x = load_domain(data_dir, DomainTag::source_3T);
    ds_y = load_domain(data_dir, DomainTag::target_1p5T);
  } else {
    std::fprintf(stderr, "train: provide --data, --phantom or --phantom-smoke\n");
    return kExitUsage;
  }

  try {
    if (model == "cyclegan") {
      ds_x = resize_dataset(std::move(ds_x), cfg.image_size);
      ds_y = resize_dataset(std::move(ds_y), cfg.image_size);
      if (ds_x.train.empty() || ds_y.train.empty()) {
        std::fprintf(stderr, "train: a domain has an empty training split\n");
        return kExitUsage;
      }
      train_cyclegan<float>(ds_x, ds_y, cfg, out_dir, resume);
    } else if (model == "dcgan-1.5t" || model == "dcgan-3t") {
      cfg.image_size = 64;  // DCGAN resolution is fixed by the architecture
      SliceDataset& ds = model == "dcgan-3t" ? ds_x : ds_y;
      ds = resize_dataset(std::move(ds), 64);
      if (ds.train.empty()) {
        std::fprintf(stderr, "train: empty training split for %s\n", model.c_str());
        return kExitUsage;
      }
      train_dcgan<float>(ds, cfg, out_dir, resume);
    } else {
      std::fprintf(stderr, "train: unknown model '%s' (cyclegan|dcgan-1.5t|dcgan-3t)\n",
                   model.c_str());
      return kExitUsage;
    }
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "train: %s (history preserved in %s)\n", e.what(),
                 out_dir.c_str());
    return kExitDiverged;
  }
  std::printf("training complete; artifacts in %s\n", out_dir.c_str());
  return kExitOk;
}

int cmd_translate(const std::string& checkpoint, const std::string& input,
                  const std::string& out_dir, const std::string& direction) {
  if (checkpoint_run_kind(checkpoint) != "cyclegan") {
    std::fprintf(stderr, "translate: checkpoint %s is not a cyclegan run\n",
                 checkpoint.c_str());
    return kExitUsage;
  }
  CycleGanState<float> state = load_cyclegan_checkpoint<float>(checkpoint);
  const bool forward_dir = direction == "forward";
  fs::create_directories(out_dir);

  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input))
      if (entry.path().extension() == ".pgm") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(input);
  }
  if (files.empty()) {
    std::fprintf(stderr, "translate: no .pgm inputs under %s\n", input.c_str());
    return kExitUsage;
  }

  const auto& first_net = forward_dir ? state.G : state.F;
  const auto& second_net = forward_dir ? state.F : state.G;
  for (const auto& file : files) {
    SliceImage img;
    img.pixels = read_pgm16(file.string(), img.height, img.width);
    if (img.height != state.config.image_size || img.width != state.config.image_size) {
      std::fprintf(stderr, "translate: resizing %s from %dx%d to %d\n",
                   file.filename().c_str(), img.height, img.width,
                   state.config.image_size);
      img = standardize(img, state.config.image_size);
    }
    auto translate1 = make_translator(first_net);
    auto translate2 = make_translator(second_net);
    auto translated = translate1(img.pixels, img.height, img.width);
    auto reconstructed = translate2(translated, img.height, img.width);
    const std::string stem = file.stem().string();
    write_pgm16((fs::path(out_dir) / (stem + "_translated.pgm")).string(), translated,
                img.height, img.width);
    write_pgm16((fs::path(out_dir) / (stem + "_reconstructed.pgm")).string(),
                reconstructed, img.height, img.width);
    int gh, gw;
    auto trip = tile_grid<float>({img.pixels, translated, reconstructed}, img.height,
                                 img.width, 1, 3, gh, gw);
    write_pgm16((fs::path(out_dir) / (stem + "_triptych.pgm")).string(), trip, gh, gw);
  }
  std::printf("translated %zu image(s) into %s\n", files.size(), out_dir.c_str());
  return kExitOk;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data_dir,
                 int n, uint64_t seed, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<MetricsReport> reports;
  const std::string kind = checkpoint_run_kind(checkpoint);
  if (kind == "cyclegan") {
    CycleGanState<float> state = load_cyclegan_checkpoint<float>(checkpoint);
    SliceDataset ds_x = resize_dataset(load_domain(data_dir, DomainTag::source_3T),
                                       state.config.image_size);
    SliceDataset ds_y = resize_dataset(load_domain(data_dir, DomainTag::target_1p5T),
                                       state.config.image_size);
    if (ds_x.test.empty() || ds_y.test.empty()) {
      std::fprintf(stderr, "evaluate: empty test split in %s\n", data_dir.c_str());
      return kExitUsage;
    }
    auto g = make_translator(state.G);
    auto f = make_translator(state.F);
    reports.push_back(evaluate_cycle(g, f, ds_x, true, n, seed, "CycleGAN 3T to 1.5T"));
    reports.push_back(evaluate_cycle(g, f, ds_y, false, n, mix_seed(seed, 1),
                                     "CycleGAN 1.5T to 3T"));
  } else if (kind == "dcgan") {
    DcganState<float> state = load_dcgan_checkpoint<float>(checkpoint);
    // pair synthesized images against the test split of the domain the
    // model was trained on (recorded in the checkpoint)
    const DomainTag domain = state.domain == DomainTag::synthetic
                                 ? DomainTag::target_1p5T
                                 : state.domain;
    SliceDataset ds = load_domain(data_dir, domain);
    const std::string label =
        domain == DomainTag::source_3T ? "DCGAN 3T" : "DCGAN 1.5T";
    if (ds.test.empty()) {
      std::fprintf(stderr, "evaluate: empty %s test split in %s\n",
                   domain_name(domain), data_dir.c_str());
      return kExitUsage;
    }
    const auto& net = state.G;
    const int latent = state.config.latent_dim;
    Synthesizer synth = [&net, latent](Rng& rng, int& h, int& w) {
      Tensor4<float> z = sample_latent<float>(1, latent, rng);
      Tensor4<float> img = forward(net, z, Mode::infer);
      h = img.h();
      w = img.w();
      return std::vector<float>(img.data(), img.data() + img.size());
    };
    reports.push_back(evaluate_synthesis(synth, ds, n, seed, label));
  } else {
    std::fprintf(stderr, "evaluate: unknown run kind '%s'\n", kind.c_str());
    return kExitUsage;
  }

  const std::string text = format_report_text(reports);
  std::fputs(text.c_str(), stdout);
  std::ofstream csv(fs::path(out_dir) / "report.csv");
  csv << format_report_csv(reports);
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_path) {
  // merge rows of existing report.csv files back into one table
  std::vector<MetricsReport> reports;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) {
      std::fprintf(stderr, "report: cannot open %s\n", path.c_str());
      return kExitUsage;
    }
    std::string line;
    if (!std::getline(in, line) || line.rfind("model,", 0) != 0) {
      std::fprintf(stderr, "report: %s is not a report.csv\n", path.c_str());
      return kExitUsage;
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::string cell;
      std::istringstream ls(line);
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      cells.resize(10);
      MetricsReport r;
      r.model_label = cells[0];
      auto num = [](const std::string& s) {
        return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
      };
      r.mae.mean = num(cells[1]);
      r.mae.sd = num(cells[2]);
      r.mse_stat.mean = num(cells[3]);
      r.mse_stat.sd = num(cells[4]);
      r.psnr_stat.mean = num(cells[5]);
      r.psnr_stat.sd = num(cells[6]);
      r.n_samples = cells[7].empty() ? 0 : std::stoi(cells[7]);
      r.n_infinite_psnr = cells[8].empty() ? 0 : std::stoi(cells[8]);
      r.mae_mean_per_pixel = cells[9].empty() ? 0.0 : std::stod(cells[9]);
      reports.push_back(std::move(r));
    }
  }
  const std::string text = format_report_text(reports);
  std::fputs(text.c_str(), stdout);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << format_report_csv(reports);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MRI field-strength translation: CycleGAN and DCGAN baselines"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "build a slice dataset + manifest");
  std::string prep_input, prep_phantom, prep_output = "data", prep_domain = "source_3T";
  double prep_fraction = 0.7;
  uint64_t prep_seed = 0;
  int prep_size = 256, prep_slices = 10;
  prepare->add_option("--input", prep_input, ".nii or .pgm directory");
  prepare->add_option("--phantom", prep_phantom,
                      "generate phantoms instead: n,size,seed (both domains)");
  prepare->add_option("--output", prep_output, "output dataset directory")
      ->capture_default_str();
  prepare->add_option("--domain", prep_domain, "domain tag for --input data")
      ->capture_default_str();
  prepare->add_option("--train-fraction", prep_fraction,
                      "training share of the split (reference: 0.7)")
      ->capture_default_str();
  prepare->add_option("--seed", prep_seed, "split shuffle seed")->capture_default_str();
  prepare->add_option("--image-size", prep_size, "standardized size (reference: 256)")
      ->capture_default_str();
  prepare->add_option("--slices-per-volume", prep_slices,
                      "slices extracted per volume (reference: 10)")
      ->capture_default_str();
  bool prep_by_volume = false;
  prepare->add_flag("--split-by-volume", prep_by_volume,
                    "keep whole volumes on one side of the split (leakage control; "
                    "default splits by slice)");

  // train
  auto* train = app.add_subcommand("train", "run a training schedule");
  std::string train_model, train_data, train_out = "run", train_resume, train_phantom;
  bool phantom_smoke = false;
  TrainConfig cfg;
  train->add_option("--model", train_model, "cyclegan | dcgan-1.5t | dcgan-3t")
      ->required();
  train->add_option("--data", train_data, "prepared dataset directory");
  train->add_option("--out", train_out, "output directory")->capture_default_str();
  train->add_option("--resume", train_resume, "checkpoint directory to resume from");
  train->add_option("--phantom", train_phantom, "train on phantoms: n,size,seed");
  train->add_flag("--phantom-smoke", phantom_smoke,
                  "canonical CI preset: 16 phantoms per domain, 64x64, 100 steps");
  train->set_config("--config", "",
                    "flat key=value file; precedence: flags > file > defaults");
  add_train_flags(train, cfg);

  // translate
  auto* translate = app.add_subcommand("translate", "run a checkpoint over images");
  std::string tr_ckpt, tr_input, tr_out = "translated", tr_direction = "forward";
  translate->add_option("--checkpoint", tr_ckpt, "cyclegan checkpoint directory")
      ->required();
  translate->add_option("--input", tr_input, ".pgm file or directory")->required();
  translate->add_option("--out", tr_out, "output directory")->capture_default_str();
  translate->add_option("--direction", tr_direction, "forward (3T->1.5T) | backward")
      ->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "compute MAE/MSE/PSNR reports");
  std::string ev_ckpt, ev_data, ev_out = "eval";
  int ev_n = 1000;
  uint64_t ev_seed = 0;
  evaluate->add_option("--checkpoint", ev_ckpt, "checkpoint directory")->required();
  evaluate->add_option("--data", ev_data, "prepared dataset directory")->required();
  evaluate->add_option("--n", ev_n, "sample count (reference protocol: 1000)")
      ->capture_default_str();
  evaluate->add_option("--seed", ev_seed, "sampling seed")->capture_default_str();
  evaluate->add_option("--out", ev_out, "output directory for report.csv")
      ->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "merge report.csv files into one table");
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  report->add_option("--inputs", rep_inputs, "report.csv files")->required();
  report->add_option("--out", rep_out, "merged CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (prepare->parsed())
      return cmd_prepare(prep_input, prep_phantom, prep_output, prep_domain,
                         prep_fraction, prep_seed, prep_size, prep_slices,
                         prep_by_volume);
    if (train->parsed())
      return cmd_train(train_model, train_data, train_out, train_resume,
                       train_phantom, phantom_smoke, cfg);
    if (translate->parsed())
      return cmd_translate(tr_ckpt, tr_input, tr_out, tr_direction);
    if (evaluate->parsed()) return cmd_evaluate(ev_ckpt, ev_data, ev_n, ev_seed, ev_out);
    if (report->parsed()) return cmd_report(rep_inputs, rep_out);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDiverged;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitOk;
}
