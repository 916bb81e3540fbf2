#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gnas/error.hpp"
#include "gnas/predictor.hpp"

namespace gnas {

namespace {

constexpr char kMagic[8] = {'N', 'A', 'S', 'P', 'R', 'E', 'D', '1'};

static_assert(sizeof(float) == 4);

void put_u64_le(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

std::uint64_t get_u64_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw FormatError("truncated weights header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void put_f32_le(std::string& buf, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float get_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

template <typename T, std::size_t N>
std::array<T, N> array_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != N) {
    throw FormatError(std::string(what) + " must be an array of " + std::to_string(N));
  }
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = j.at(i).get<T>();
  return out;
}

}  // namespace

Json to_json(const PredictorConfig& cfg) {
  Json j;
  j["gcn_dims"] = cfg.gcn_dims;
  j["mlp_dims"] = cfg.mlp_dims;
  j["devices"] = cfg.devices;
  j["num_devices"] = cfg.num_devices();
  j["leaky_slope"] = cfg.leaky_slope;
  j["encoding_version"] = cfg.encoding_version;
  j["readout"] = to_string(cfg.readout);
  j["metric"] = to_string(cfg.metric);
  return j;
}

PredictorConfig predictor_config_from_json(const Json& j) {
  try {
    PredictorConfig cfg;
    cfg.gcn_dims = array_from_json<int, 3>(j.at("gcn_dims"), "gcn_dims");
    cfg.mlp_dims = array_from_json<int, 3>(j.at("mlp_dims"), "mlp_dims");
    cfg.devices = j.at("devices").get<std::vector<std::string>>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    cfg.encoding_version = j.at("encoding_version").get<int>();
    cfg.readout = parse_readout(j.at("readout").get<std::string>());
    cfg.metric = parse_target_metric(j.at("metric").get<std::string>());
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad predictor config: ") + e.what());
  }
}

void save_weights(std::ostream& out, const ModelWeights& w, const ArtifactStamp& stamp) {
  std::string payload;
  Json directory = Json::array();
  for (const auto& [name, t] : w.params.tensors()) {
    Json entry;
    entry["name"] = name;
    entry["shape"] = Json::array({t->rows(), t->cols()});
    entry["offset"] = payload.size();
    entry["nbytes"] = static_cast<std::size_t>(t->size()) * 4;
    directory.push_back(std::move(entry));
    // Row-major payload.
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) {
        put_f32_le(payload, static_cast<float>((*t)(r, c)));
      }
    }
  }

  Json header;
  header["format"] = "NASPRED1";
  header["tool_version"] = stamp.tool_version;
  header["config_hash"] = stamp.config_hash;
  header["encoding_version"] = w.config.encoding_version;
  header["config"] = to_json(w.config);
  header["target_log_offset"] = w.target_log_offset;
  header["dtype"] = "float32_le";
  header["tensors"] = std::move(directory);
  const std::string text = header.dump();

  out.write(kMagic, sizeof(kMagic));
  put_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw FormatError("failed to write weights");
}

void save_weights(const std::string& path, const ModelWeights& w, const ArtifactStamp& stamp) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  save_weights(out, w, stamp);
}

std::pair<ModelWeights, ArtifactStamp> load_weights(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw FormatError("not a predictor weights file (bad magic)");
  }
  const std::uint64_t header_len = get_u64_le(in);
  if (header_len > (1u << 26)) throw FormatError("weights header is implausibly large");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw FormatError("truncated weights header");
  }
  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Json header;
  try {
    header = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weights header is not JSON: ") + e.what());
  }

  ModelWeights w;
  ArtifactStamp stamp;
  try {
    w.config = predictor_config_from_json(header.at("config"));
    if (header.at("encoding_version").get<int>() != w.config.encoding_version) {
      throw FormatError("weights header encoding version disagrees with its config");
    }
    w.target_log_offset = header.at("target_log_offset").get<double>();
    stamp.config_hash = header.value("config_hash", "");
    stamp.tool_version = header.value("tool_version", "");

    // Shapes come from the config; the directory must agree with them.
    ModelWeights shaped = init_model(w.config, 0);
    w.params = shaped.params;
    auto tensors = w.params.tensors();
    const auto& dir = header.at("tensors");
    if (!dir.is_array() || dir.size() != tensors.size()) {
      throw FormatError("weights tensor directory does not match the config");
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& entry = dir.at(i);
      auto& [name, t] = tensors[i];
      if (entry.at("name").get<std::string>() != name) {
        throw FormatError("unexpected tensor '" + entry.at("name").get<std::string>() + "'");
      }
      const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      if (shape.size() != 2 || shape[0] != t->rows() || shape[1] != t->cols()) {
        throw FormatError("tensor '" + name + "' has the wrong shape");
      }
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto nbytes = entry.at("nbytes").get<std::size_t>();
      if (nbytes != static_cast<std::size_t>(t->size()) * 4 || offset + nbytes > payload.size()) {
        throw FormatError("tensor '" + name + "' payload is out of bounds");
      }
      const auto* p = reinterpret_cast<const unsigned char*>(payload.data() + offset);
      for (Eigen::Index r = 0; r < t->rows(); ++r) {
        for (Eigen::Index c = 0; c < t->cols(); ++c, p += 4) {
          (*t)(r, c) = static_cast<double>(get_f32_le(p));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed weights header: ") + e.what());
  }
  return {std::move(w), std::move(stamp)};
}

std::pair<ModelWeights, ArtifactStamp> load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open weights file '" + path + "'");
  return load_weights(in);
}

}  // namespace gnas
