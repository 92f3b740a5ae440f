#include "semcom/checkpoint.hpp"

#include "semcom/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace semcom {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'C', 'O', 'M', 'C', 'K'};

using nlohmann::json;

json codec_to_json(const CodecConfig& c) {
  return json{{"embed_dim", c.embed_dim}, {"depths", c.depths},     {"heads", c.heads},
              {"window", c.window},       {"patch", c.patch},       {"mlp_ratio", c.mlp_ratio},
              {"k", c.k_channels},        {"n_classes", c.n_classes}, {"aggregator_activation", c.aggregator_activation}};
}

CodecConfig codec_from_json(const json& j) {
  CodecConfig c;
  c.embed_dim = j.at("embed_dim").get<int>();
  c.depths = j.at("depths").get<std::vector<int>>();
  c.heads = j.at("heads").get<std::vector<int>>();
  c.window = j.at("window").get<int>();
  c.patch = j.at("patch").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.k_channels = j.at("k").get<int>();
  c.n_classes = j.at("n_classes").get<int>();
  c.aggregator_activation = j.at("aggregator_activation").get<bool>();
  return c;
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

std::string codec_config_json(const CodecConfig& cfg) { return codec_to_json(cfg).dump(); }

CodecConfig codec_config_from_json(const std::string& s) { return codec_from_json(json::parse(s)); }

Checkpoint make_checkpoint(const SemanticCodec& model, std::uint64_t iteration, const Rng* rng, const Adam* opt) {
  Checkpoint ck;
  ck.codec = model.config();
  ck.iteration = iteration;
  if (rng) ck.rng_state = rng_state(*rng);
  for (const auto& name : model.params().names()) ck.params[name] = ag::to_tensor(model.params().get(name));
  if (opt) {
    ck.optimizer = opt->state();
    ck.optimizer_steps = opt->steps();
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  json header;
  header["version"] = kCheckpointVersion;
  header["codec"] = codec_to_json(ck.codec);
  header["iteration"] = ck.iteration;
  header["rng_state"] = ck.rng_state;
  header["optimizer_steps"] = ck.optimizer_steps;
  json index = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ck.params) {
    index.push_back({{"name", name}, {"kind", "param"}, {"shape", {t.shape.n, t.shape.h, t.shape.w, t.shape.c}},
                     {"offset", offset}});
    offset += t.shape.numel();
  }
  for (const auto& [name, m] : ck.optimizer) {
    index.push_back({{"name", name}, {"kind", "optimizer"}, {"shape", {1, 1, m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size());
  }
  header["tensors"] = index;
  const std::string h = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write checkpoint " + path.string());
    os.write(kMagic, sizeof kMagic);
    write_pod(os, kCheckpointVersion);
    write_pod(os, static_cast<std::uint64_t>(h.size()));
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto& [_, t] : ck.params) {
      os.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    for (const auto& [_, m] : ck.optimizer) {
      os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    if (!os) throw ConfigError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw DataError(path.string() + " is not a checkpoint");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  const auto hlen = read_pod<std::uint64_t>(is);
  if (!is || hlen > (1ULL << 30)) throw DataError("corrupt checkpoint header in " + path.string());
  std::string h(hlen, '\0');
  is.read(h.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw DataError("truncated checkpoint header in " + path.string());

  Checkpoint ck;
  try {
    const json header = json::parse(h);
    ck.codec = codec_from_json(header.at("codec"));
    ck.iteration = header.at("iteration").get<std::uint64_t>();
    ck.rng_state = header.at("rng_state").get<std::string>();
    ck.optimizer_steps = header.at("optimizer_steps").get<std::uint64_t>();
    for (const auto& e : header.at("tensors")) {
      const auto shape = e.at("shape").get<std::vector<long long>>();
      if (shape.size() != 4) throw DataError("bad tensor shape");
      const Shape s{static_cast<int>(shape[0]), static_cast<int>(shape[1]), static_cast<int>(shape[2]),
                    static_cast<int>(shape[3])};
      Tensor t(s);
      is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
      if (!is) throw DataError("truncated tensor data");
      const auto name = e.at("name").get<std::string>();
      if (e.at("kind").get<std::string>() == "optimizer") {
        ck.optimizer[name] = std::move(t.data);
      } else {
        ck.params[name] = std::move(t);
      }
    }
  } catch (const json::exception& ex) {
    throw DataError("corrupt checkpoint " + path.string() + ": " + ex.what());
  } catch (const DataError& ex) {
    throw DataError("corrupt checkpoint " + path.string() + ": " + ex.what());
  }
  return ck;
}

void apply_checkpoint(SemanticCodec& model, const Checkpoint& ck) {
  if (!(model.config() == ck.codec)) throw ConfigError("checkpoint codec config differs from the model");
  const auto& names = model.params().names();
  if (names.size() != ck.params.size()) throw DataError("checkpoint parameter count differs from the model");
  for (const auto& name : names) {
    auto it = ck.params.find(name);
    if (it == ck.params.end()) throw DataError("checkpoint lacks parameter " + name);
    const auto& p = model.params().get(name);
    if (!(it->second.shape == p->shape)) throw DataError("checkpoint shape mismatch for " + name);
    p->value = it->second.data;
  }
}

std::unique_ptr<SemanticCodec> codec_from_checkpoint(const Checkpoint& ck) {
  auto model = std::make_unique<SemanticCodec>(ck.codec, 0);
  apply_checkpoint(*model, ck);
  return model;
}

std::size_t transfer_init(SemanticCodec& target, const Checkpoint& source) {
  if (target.config().embed_dim != source.codec.embed_dim) {
    throw ConfigError("transfer_init: embed dim " + std::to_string(source.codec.embed_dim) + " vs " +
                      std::to_string(target.config().embed_dim));
  }
  std::size_t copied = 0;
  for (const auto& name : target.params().names()) {
    auto it = source.params.find(name);
    if (it == source.params.end()) continue;
    const auto& p = target.params().get(name);
    if (!(it->second.shape == p->shape)) continue;
    p->value = it->second.data;
    ++copied;
  }
  return copied;
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace semcom
