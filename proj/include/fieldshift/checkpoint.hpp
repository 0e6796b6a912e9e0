#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fieldshift/bytes.hpp"
#include "fieldshift/gan.hpp"
#include "fieldshift/pgm.hpp"

namespace fieldshift {

// Checkpoint directory layout:
//   manifest.json  format_version, run_kind, step, config, network specs,
//                  adam step counts, rng states, tensor table
//   weights.bin    little-endian IEEE-754 float32, concatenated in tensor
//                  table order (parameters, optimizer slots, pool images)
//   pool/          16-bit PGM mirrors of the pool contents, for inspection
//
// The blob is the authoritative restore path; the PGM mirrors are lossy
// (16-bit) copies.

inline constexpr int kCheckpointFormatVersion = 1;

namespace detail {

class BlobWriter {
 public:
  template <typename T>
  void append(const std::string& name, const std::vector<int>& shape,
              const T* data, size_t count) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = shape;
    entry["dtype"] = "f32";
    entry["offset"] = bytes_.size();
    entry["length"] = count * 4;
    table_.push_back(entry);
    const size_t start = bytes_.size();
    bytes_.resize(start + count * 4);
    for (size_t i = 0; i < count; ++i) {
      float f = static_cast<float>(data[i]);
      uint32_t u;
      std::memcpy(&u, &f, 4);
      if (!host_little_endian()) u = swap32(u);
      std::memcpy(bytes_.data() + start + 4 * i, &u, 4);
    }
  }

  const nlohmann::json& table() const { return table_; }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot open " + path);
    out.write(reinterpret_cast<const char*>(bytes_.data()),
              static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw IoError("checkpoint: short write to " + path);
  }

 private:
  std::vector<uint8_t> bytes_;
  nlohmann::json table_ = nlohmann::json::array();
};

class BlobReader {
 public:
  BlobReader(const std::string& path, const nlohmann::json& table) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    bytes_.assign((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
    for (const auto& entry : table) {
      const std::string name = entry.at("name").get<std::string>();
      const uint64_t offset = entry.at("offset").get<uint64_t>();
      const uint64_t length = entry.at("length").get<uint64_t>();
      if (entry.at("dtype").get<std::string>() != "f32")
        throw CorruptionError("checkpoint: unknown dtype for tensor " + name);
      if (offset + length > bytes_.size())
        throw CorruptionError("checkpoint: tensor " + name +
                              " extends past the end of weights.bin");
      index_[name] = {offset, length};
    }
  }

  template <typename T>
  void read_into(const std::string& name, T* out, size_t count) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw CorruptionError("checkpoint: manifest lacks tensor " + name);
    if (it->second.second != count * 4)
      throw CorruptionError("checkpoint: tensor " + name + " length mismatch (" +
                            std::to_string(it->second.second) + " bytes vs " +
                            std::to_string(count * 4) + " expected)");
    const uint8_t* src = bytes_.data() + it->second.first;
    for (size_t i = 0; i < count; ++i) {
      uint32_t u;
      std::memcpy(&u, src + 4 * i, 4);
      if (!host_little_endian()) u = swap32(u);
      float f;
      std::memcpy(&f, &u, 4);
      out[i] = static_cast<T>(f);
    }
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

 private:
  std::vector<uint8_t> bytes_;
  std::map<std::string, std::pair<uint64_t, uint64_t>> index_;
};

}  // namespace detail

inline nlohmann::json layer_to_json(const LayerSpec& l) {
  nlohmann::json j;
  j["kind"] = layer_kind_name(l.kind);
  j["kh"] = l.kh;
  j["kw"] = l.kw;
  j["sh"] = l.sh;
  j["sw"] = l.sw;
  j["ph"] = l.ph;
  j["pw"] = l.pw;
  j["oph"] = l.oph;
  j["opw"] = l.opw;
  j["out_channels"] = l.out_channels;
  j["act"] = act_name(l.act);
  j["alpha"] = l.alpha;
  j["rate"] = l.rate;
  j["eps"] = l.eps;
  j["use_bias"] = l.use_bias;
  j["reshape"] = {l.reshape_c, l.reshape_h, l.reshape_w};
  return j;
}

inline nlohmann::json spec_to_json(const NetworkSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["input_shape"] = {spec.input_shape.c, spec.input_shape.h, spec.input_shape.w};
  j["layers"] = nlohmann::json::array();
  for (const auto& l : spec.layers) j["layers"].push_back(layer_to_json(l));
  return j;
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["lambda_cyc"] = c.lambda_cyc;
  j["lambda_identity"] = c.lambda_identity;
  j["pool_size"] = c.pool_size;
  j["seed"] = c.seed;
  j["image_size"] = c.image_size;
  j["checkpoint_every"] = c.checkpoint_every;
  j["base_filters"] = c.base_filters;
  j["n_blocks"] = c.n_blocks;
  j["disc_filters"] = c.disc_filters;
  j["latent_dim"] = c.latent_dim;
  j["max_steps"] = c.max_steps;
  return j;
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.lambda_cyc = j.at("lambda_cyc").get<double>();
  c.lambda_identity = j.at("lambda_identity").get<double>();
  c.pool_size = j.at("pool_size").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  c.image_size = j.at("image_size").get<int>();
  c.checkpoint_every = j.at("checkpoint_every").get<int>();
  c.base_filters = j.at("base_filters").get<int>();
  c.n_blocks = j.at("n_blocks").get<int>();
  c.disc_filters = j.at("disc_filters").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.max_steps = j.at("max_steps").get<int>();
  return c;
}

namespace detail {

template <typename T>
void append_network(BlobWriter& blob, const std::string& net_name,
                    const NetworkState<T>& net, const Adam<T>& adam) {
  for (const auto& p : net.params)
    blob.append(net_name + "." + p.name, p.dims(), p.data(), p.size());
  const auto& m = adam.first_moments();
  const auto& v = adam.second_moments();
  for (size_t i = 0; i < net.params.size(); ++i) {
    const auto& p = net.params[i];
    blob.append("adam." + net_name + ".m." + p.name, p.dims(), m[i].data(), m[i].size());
    blob.append("adam." + net_name + ".v." + p.name, p.dims(), v[i].data(), v[i].size());
  }
}

template <typename T>
void read_network(const BlobReader& blob, const std::string& net_name,
                  NetworkState<T>& net, Adam<T>& adam) {
  for (auto& p : net.params)
    blob.read_into(net_name + "." + p.name, p.data(), p.size());
  auto& m = adam.first_moments();
  auto& v = adam.second_moments();
  for (size_t i = 0; i < net.params.size(); ++i) {
    auto& p = net.params[i];
    blob.read_into("adam." + net_name + ".m." + p.name, m[i].data(), m[i].size());
    blob.read_into("adam." + net_name + ".v." + p.name, v[i].data(), v[i].size());
  }
}

template <typename T>
void append_pool(BlobWriter& blob, const std::string& name, const ImagePool<T>& pool,
                 int image_size) {
  int i = 0;
  for (const auto& img : pool.buffer()) {
    blob.append(name + "." + std::to_string(i), {1, 1, image_size, image_size},
                img.data(), img.size());
    ++i;
  }
}

template <typename T>
void write_pool_mirror(const std::filesystem::path& dir, const std::string& name,
                       const ImagePool<T>& pool, int image_size) {
  int i = 0;
  for (const auto& img : pool.buffer()) {
    std::vector<float> pixels(img.begin(), img.end());
    char file[64];
    std::snprintf(file, sizeof(file), "%s_%03d.pgm", name.c_str(), i++);
    write_pgm16((dir / file).string(), pixels, image_size, image_size);
  }
}

inline nlohmann::json load_manifest(const std::string& dir,
                                    const std::string& expected_kind) {
  const auto path = std::filesystem::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("load_checkpoint: cannot open " + path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("load_checkpoint: malformed manifest.json: " +
                          std::string(e.what()));
  }
  const int version = manifest.value("format_version", -1);
  if (version != kCheckpointFormatVersion)
    throw VersionError("load_checkpoint: unknown format_version " +
                       std::to_string(version));
  const std::string kind = manifest.value("run_kind", "");
  if (kind != expected_kind)
    throw ConfigError("load_checkpoint: run_kind is '" + kind + "', expected '" +
                      expected_kind + "'");
  return manifest;
}

}  // namespace detail

/// Reads just the run_kind of a checkpoint (cli dispatch).
inline std::string checkpoint_run_kind(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("checkpoint_run_kind: cannot open " + path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("checkpoint_run_kind: malformed manifest.json: " +
                          std::string(e.what()));
  }
  return manifest.value("run_kind", "");
}

template <typename T>
void save_checkpoint(const CycleGanState<T>& state, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "pool");

  detail::BlobWriter blob;
  detail::append_network(blob, "G", state.G, state.adam_G);
  detail::append_network(blob, "F", state.F, state.adam_F);
  detail::append_network(blob, "D_X", state.D_X, state.adam_DX);
  detail::append_network(blob, "D_Y", state.D_Y, state.adam_DY);
  detail::append_pool(blob, "pool_X", state.pool_X, state.config.image_size);
  detail::append_pool(blob, "pool_Y", state.pool_Y, state.config.image_size);

  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["run_kind"] = "cyclegan";
  manifest["step"] = state.step;
  manifest["config"] = config_to_json(state.config);
  manifest["networks"] = {{"G", spec_to_json(state.G.spec)},
                          {"F", spec_to_json(state.F.spec)},
                          {"D_X", spec_to_json(state.D_X.spec)},
                          {"D_Y", spec_to_json(state.D_Y.spec)}};
  manifest["adam_steps"] = {{"G", state.adam_G.step_count()},
                            {"F", state.adam_F.step_count()},
                            {"D_X", state.adam_DX.step_count()},
                            {"D_Y", state.adam_DY.step_count()}};
  manifest["pools"] = {{"X", state.pool_X.size()}, {"Y", state.pool_Y.size()}};
  manifest["rng"] = {{"train", state.rng.serialize()},
                     {"pool_X", state.pool_X.rng().serialize()},
                     {"pool_Y", state.pool_Y.rng().serialize()}};
  manifest["tensors"] = blob.table();

  blob.write((fs::path(dir) / "weights.bin").string());
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw IoError("save_checkpoint: cannot open manifest.json in " + dir);
  mf << manifest.dump(1) << '\n';

  std::ofstream rf(fs::path(dir) / "rng_state");
  rf << "train " << state.rng.serialize() << '\n'
     << "pool_X " << state.pool_X.rng().serialize() << '\n'
     << "pool_Y " << state.pool_Y.rng().serialize() << '\n';

  detail::write_pool_mirror(fs::path(dir) / "pool", "pool_x", state.pool_X,
                            state.config.image_size);
  detail::write_pool_mirror(fs::path(dir) / "pool", "pool_y", state.pool_Y,
                            state.config.image_size);
}

template <typename T>
CycleGanState<T> load_cyclegan_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  nlohmann::json manifest = detail::load_manifest(dir, "cyclegan");
  TrainConfig config = config_from_json(manifest.at("config"));
  CycleGanState<T> state = make_cyclegan_state<T>(config);
  if (manifest.at("networks").at("G") != spec_to_json(state.G.spec))
    throw CorruptionError("load_checkpoint: stored generator spec does not match "
                          "the architecture rebuilt from its config");

  detail::BlobReader blob((fs::path(dir) / "weights.bin").string(),
                          manifest.at("tensors"));
  detail::read_network(blob, "G", state.G, state.adam_G);
  detail::read_network(blob, "F", state.F, state.adam_F);
  detail::read_network(blob, "D_X", state.D_X, state.adam_DX);
  detail::read_network(blob, "D_Y", state.D_Y, state.adam_DY);

  state.step = manifest.at("step").get<long>();
  state.adam_G.set_step_count(manifest.at("adam_steps").at("G").get<long>());
  state.adam_F.set_step_count(manifest.at("adam_steps").at("F").get<long>());
  state.adam_DX.set_step_count(manifest.at("adam_steps").at("D_X").get<long>());
  state.adam_DY.set_step_count(manifest.at("adam_steps").at("D_Y").get<long>());

  const size_t nx = manifest.at("pools").at("X").get<size_t>();
  const size_t ny = manifest.at("pools").at("Y").get<size_t>();
  const size_t image_elems =
      static_cast<size_t>(config.image_size) * config.image_size;
  state.pool_X.buffer().assign(nx, std::vector<T>(image_elems));
  state.pool_Y.buffer().assign(ny, std::vector<T>(image_elems));
  for (size_t i = 0; i < nx; ++i)
    blob.read_into("pool_X." + std::to_string(i), state.pool_X.buffer()[i].data(),
                   image_elems);
  for (size_t i = 0; i < ny; ++i)
    blob.read_into("pool_Y." + std::to_string(i), state.pool_Y.buffer()[i].data(),
                   image_elems);

  state.rng = Rng::deserialize(manifest.at("rng").at("train").get<std::string>());
  state.pool_X.rng() = Rng::deserialize(manifest.at("rng").at("pool_X").get<std::string>());
  state.pool_Y.rng() = Rng::deserialize(manifest.at("rng").at("pool_Y").get<std::string>());
  return state;
}

template <typename T>
void save_checkpoint(const DcganState<T>& state, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  detail::BlobWriter blob;
  detail::append_network(blob, "G", state.G, state.adam_G);
  detail::append_network(blob, "D", state.D, state.adam_D);

  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["run_kind"] = "dcgan";
  manifest["step"] = state.step;
  manifest["domain"] = domain_name(state.domain);
  manifest["config"] = config_to_json(state.config);
  manifest["networks"] = {{"G", spec_to_json(state.G.spec)},
                          {"D", spec_to_json(state.D.spec)}};
  manifest["adam_steps"] = {{"G", state.adam_G.step_count()},
                            {"D", state.adam_D.step_count()}};
  manifest["rng"] = {{"train", state.rng.serialize()}};
  manifest["tensors"] = blob.table();

  blob.write((fs::path(dir) / "weights.bin").string());
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw IoError("save_checkpoint: cannot open manifest.json in " + dir);
  mf << manifest.dump(1) << '\n';
  std::ofstream rf(fs::path(dir) / "rng_state");
  rf << "train " << state.rng.serialize() << '\n';
}

template <typename T>
DcganState<T> load_dcgan_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  nlohmann::json manifest = detail::load_manifest(dir, "dcgan");
  TrainConfig config = config_from_json(manifest.at("config"));
  DcganState<T> state = make_dcgan_state<T>(config);
  if (manifest.at("networks").at("G") != spec_to_json(state.G.spec))
    throw CorruptionError("load_checkpoint: stored generator spec does not match "
                          "the architecture rebuilt from its config");
  detail::BlobReader blob((fs::path(dir) / "weights.bin").string(),
                          manifest.at("tensors"));
  detail::read_network(blob, "G", state.G, state.adam_G);
  detail::read_network(blob, "D", state.D, state.adam_D);
  state.step = manifest.at("step").get<long>();
  state.domain = parse_domain(manifest.value("domain", "synthetic"));
  state.adam_G.set_step_count(manifest.at("adam_steps").at("G").get<long>());
  state.adam_D.set_step_count(manifest.at("adam_steps").at("D").get<long>());
  state.rng = Rng::deserialize(manifest.at("rng").at("train").get<std::string>());
  return state;
}

}  // namespace fieldshift
