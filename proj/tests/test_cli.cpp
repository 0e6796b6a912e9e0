#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "fieldshift/datapipe.hpp"
#include "fieldshift/nifti.hpp"
#include "fieldshift/phantom.hpp"

using namespace fieldshift;
namespace fs = std::filesystem;

namespace {

const char* kCli = FIELDSHIFT_CLI_PATH;

fs::path work_dir(const std::string& leaf) {
  auto dir = fs::temp_directory_path() / "fieldshift_cli_tests" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(kCli) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("help exits 0 and lists every subcommand") {
  CHECK(run("--help") == 0);
  for (const char* sub : {"prepare", "train", "translate", "evaluate", "report"})
    CHECK(run(std::string(sub) + " --help") == 0);
}

TEST_CASE("unknown model and missing inputs exit 2") {
  const auto dir = work_dir("usage");
  CHECK(run("train --model vae --phantom-smoke --out " + (dir / "r").string()) == 2);
  CHECK(run("train --model cyclegan --out " + (dir / "r2").string()) == 2);
  CHECK(run("bogus-subcommand") == 2);
}

TEST_CASE("prepare: empty directory exits 2") {
  const auto dir = work_dir("prep_empty");
  fs::create_directories(dir / "in");
  CHECK(run("prepare --input " + (dir / "in").string() + " --output " +
            (dir / "out").string()) == 2);
}

TEST_CASE("prepare: phantom dataset writes both domains and a manifest") {
  const auto dir = work_dir("prep_phantom");
  CHECK(run("prepare --phantom 16,64,7 --output " + dir.string()) == 0);
  auto rows = read_manifest((dir / "manifest.csv").string());
  // 16 per domain, split 11/5
  int src_train = 0, src_test = 0, tgt_train = 0, tgt_test = 0;
  for (const auto& r : rows) {
    if (r.domain == DomainTag::source_3T)
      (r.split == "train" ? src_train : src_test)++;
    else if (r.domain == DomainTag::target_1p5T)
      (r.split == "train" ? tgt_train : tgt_test)++;
    CHECK(fs::exists(dir / r.file));
  }
  CHECK(src_train == 11);
  CHECK(src_test == 5);
  CHECK(tgt_train == 11);
  CHECK(tgt_test == 5);

  // reproducible: same seed gives identical slice bytes
  const auto dir2 = work_dir("prep_phantom2");
  CHECK(run("prepare --phantom 16,64,7 --output " + dir2.string()) == 0);
  CHECK(slurp(dir / rows[0].file) == slurp(dir2 / rows[0].file));
}

TEST_CASE("prepare: volume directory honors the 70/30 split counts") {
  const auto dir = work_dir("prep_vols");
  fs::create_directories(dir / "in");
  // 35 synthetic volumes x 10 slices -> 350 slices -> 245/105
  for (int i = 0; i < 35; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "vol_%02d.nii", i);
    write_nifti(make_phantom_volume(50, 32, 32, 1000 + i), (dir / "in" / name).string());
  }
  CHECK(run("prepare --input " + (dir / "in").string() + " --domain source_3T" +
            " --image-size 32 --output " + (dir / "out").string()) == 0);
  auto rows = read_manifest((dir / "out" / "manifest.csv").string());
  int train = 0, test = 0;
  for (const auto& r : rows) (r.split == "train" ? train : test)++;
  CHECK(train == 245);
  CHECK(test == 105);
}

TEST_CASE("train + evaluate + translate round trip on a tiny run") {
  const auto dir = work_dir("train_smoke");
  const std::string data = (dir / "data").string();
  CHECK(run("prepare --phantom 12,32,3 --output " + data) == 0);

  // tiny cyclegan: 2 steps (8 train images, batch 4), minimal widths
  const std::string out = (dir / "run").string();
  CHECK(run("train --model cyclegan --data " + data + " --out " + out +
            " --image-size 32 --base-filters 8 --n-blocks 1 --disc-filters 8"
            " --max-steps 2 --checkpoint-every 1 --seed 5") == 0);
  CHECK(fs::exists(fs::path(out) / "history.csv"));
  {
    std::ifstream h(fs::path(out) / "history.csv");
    std::string line;
    int rows = -1;
    while (std::getline(h, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 2);
  }
  const std::string ckpt = (fs::path(out) / "checkpoints" / "step_000002").string();
  REQUIRE(fs::exists(ckpt));
  CHECK(fs::exists(fs::path(ckpt) / "manifest.json"));
  CHECK(fs::exists(fs::path(ckpt) / "weights.bin"));
  CHECK(fs::exists(fs::path(ckpt) / "samples.pgm"));

  // evaluate twice with one seed: byte-identical report.csv
  const std::string ev1 = (dir / "ev1").string(), ev2 = (dir / "ev2").string();
  CHECK(run("evaluate --checkpoint " + ckpt + " --data " + data +
            " --n 10 --seed 1 --out " + ev1) == 0);
  CHECK(run("evaluate --checkpoint " + ckpt + " --data " + data +
            " --n 10 --seed 1 --out " + ev2) == 0);
  const std::string csv1 = slurp(fs::path(ev1) / "report.csv");
  CHECK(!csv1.empty());
  CHECK(csv1 == slurp(fs::path(ev2) / "report.csv"));
  CHECK(csv1.find("CycleGAN 3T to 1.5T") != std::string::npos);
  CHECK(csv1.find("CycleGAN 1.5T to 3T") != std::string::npos);

  // translate an image from the prepared data
  auto rows = read_manifest(fs::path(data) / "manifest.csv");
  std::string input_file;
  for (const auto& r : rows)
    if (r.domain == DomainTag::source_3T && r.split == "test") {
      input_file = (fs::path(data) / r.file).string();
      break;
    }
  REQUIRE(!input_file.empty());
  const std::string tr = (dir / "tr").string();
  CHECK(run("translate --checkpoint " + ckpt + " --input " + input_file +
            " --direction forward --out " + tr) == 0);
  int pgms = 0;
  for (const auto& e : fs::directory_iterator(tr))
    if (e.path().extension() == ".pgm") ++pgms;
  CHECK(pgms == 3);  // translated, reconstructed, triptych

  // report merges the eval CSV back into a table
  CHECK(run("report --inputs " + (fs::path(ev1) / "report.csv").string() + " --out " +
            (dir / "merged.csv").string()) == 0);
  CHECK(fs::exists(dir / "merged.csv"));

  // corrupted checkpoint is rejected with exit 2
  fs::resize_file(fs::path(ckpt) / "weights.bin", 100);
  CHECK(run("evaluate --checkpoint " + ckpt + " --data " + data +
            " --n 4 --seed 1 --out " + (dir / "ev3").string()) == 2);
}

TEST_CASE("train: divergence exits 3 and preserves the partial history") {
  const auto dir = work_dir("diverge");
  const std::string out = (dir / "run").string();
  const std::string common =
      " --phantom 8,32,11 --base-filters 8 --n-blocks 1 --disc-filters 8"
      " --image-size 32 --checkpoint-every 1";
  CHECK(run("train --model cyclegan --out " + out + common + " --max-steps 1") == 0);
  const fs::path ckpt = fs::path(out) / "checkpoints" / "step_000001";
  REQUIRE(fs::exists(ckpt));

  // poison the discriminator's final conv weights with +inf (valid f32
  // bytes, manifest intact): resuming must detect the non-finite loss and
  // exit 3
  {
    std::ifstream mf(ckpt / "manifest.json");
    nlohmann::json manifest;
    mf >> manifest;
    uint64_t offset = 0, length = 0;
    for (const auto& entry : manifest.at("tensors")) {
      if (entry.at("name") == "D_Y.l11.weight") {
        offset = entry.at("offset").get<uint64_t>();
        length = entry.at("length").get<uint64_t>();
      }
    }
    REQUIRE(length > 0);
    std::fstream blob(ckpt / "weights.bin",
                      std::ios::binary | std::ios::in | std::ios::out);
    REQUIRE(blob.good());
    blob.seekp(static_cast<std::streamoff>(offset));
    const uint32_t inf_bits = 0x7f800000u;
    for (uint64_t i = 0; i < length / 4; ++i)
      blob.write(reinterpret_cast<const char*>(&inf_bits), 4);
  }
  CHECK(run("train --model cyclegan --out " + out + common +
            " --max-steps 2 --resume " + ckpt.string()) == 3);
  CHECK(fs::exists(fs::path(out) / "history.csv"));
}

TEST_CASE("train: dcgan history schema and sample grid") {
  const auto dir = work_dir("dcgan_smoke");
  const std::string data = (dir / "data").string();
  CHECK(run("prepare --phantom 8,64,9 --output " + data) == 0);
  const std::string out = (dir / "run").string();
  CHECK(run("train --model dcgan-1.5t --data " + data + " --out " + out +
            " --max-steps 2 --checkpoint-every 1 --seed 4") == 0);
  std::ifstream h(fs::path(out) / "history.csv");
  std::string header;
  std::getline(h, header);
  CHECK(header == "step,epoch,loss_D,loss_G");
  CHECK(fs::exists(fs::path(out) / "checkpoints" / "step_000002" / "samples.pgm"));
}

TEST_CASE("spelling out the built-in defaults is a no-op") {
  const auto dir = work_dir("noop_flags");
  const std::string common =
      " --phantom 8,32,2 --base-filters 8 --n-blocks 1 --disc-filters 8"
      " --max-steps 1 --seed 3 --image-size 32";
  CHECK(run("train --model cyclegan --out " + (dir / "a").string() + common) == 0);
  CHECK(run("train --model cyclegan --out " + (dir / "b").string() + common +
            " --lr 0.0002 --beta1 0.5 --epochs 50 --batch 4") == 0);
  CHECK(slurp(dir / "a" / "history.csv") == slurp(dir / "b" / "history.csv"));
}

TEST_CASE("prepare: --split-by-volume keeps volumes on one side") {
  const auto dir = work_dir("by_volume");
  fs::create_directories(dir / "in");
  for (int i = 0; i < 6; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "vol_%02d.nii", i);
    write_nifti(make_phantom_volume(20, 24, 24, 2000 + i), (dir / "in" / name).string());
  }
  CHECK(run("prepare --input " + (dir / "in").string() +
            " --domain target_1p5T --image-size 24 --split-by-volume --output " +
            (dir / "out").string()) == 0);
  auto rows = read_manifest((dir / "out" / "manifest.csv").string());
  std::map<std::string, std::set<std::string>> splits_by_vol;
  for (const auto& r : rows) splits_by_vol[r.source_id].insert(r.split);
  for (const auto& [vol, splits] : splits_by_vol) CHECK(splits.size() == 1);
}

TEST_CASE("config file: flags override file values, file overrides defaults") {
  const auto dir = work_dir("config");
  const auto cfg_path = dir / "run.toml";
  {
    std::ofstream cfg(cfg_path);
    cfg << "epochs=3\nlr=0.001\n";
  }
  // config parse must succeed and the run must stop at max-steps from the
  // command line regardless of the epochs in the file
  CHECK(run("train --model cyclegan --phantom 8,32,2 --config " + cfg_path.string() +
            " --out " + (dir / "run").string() +
            " --base-filters 8 --n-blocks 1 --disc-filters 8 --max-steps 1") == 0);
  std::ifstream h(dir / "run" / "history.csv");
  std::string line;
  int rows = -1;
  while (std::getline(h, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1);
}
