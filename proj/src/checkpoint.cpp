#include <fstream>
#include <json.hpp>

#include "pimc/container.hpp"
#include "pimc/encoder.hpp"
#include "pimc/errors.hpp"

namespace pimc {
namespace {

nlohmann::json config_json(const EncoderConfig& c) {
  return {{"widths", c.widths},
          {"blocks_per_stage", c.blocks_per_stage},
          {"in_channels", c.in_channels},
          {"embed_dim", c.embed_dim},
          {"input_size", c.input_size},
          {"zero_init_residual", c.zero_init_residual}};
}

EncoderConfig config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.widths = j.at("widths").get<std::vector<std::size_t>>();
  c.blocks_per_stage = j.at("blocks_per_stage").get<std::size_t>();
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.input_size = j.at("input_size").get<std::size_t>();
  c.zero_init_residual = j.value("zero_init_residual", false);
  return c;
}

}  // namespace

void save_params(const EncoderParams& params, const std::filesystem::path& path) {
  std::vector<char> blob;
  nlohmann::json index;
  index["format_version"] = 1;
  index["config"] = config_json(params.config);
  index["seed"] = params.seed;
  index["step"] = params.step;
  index["tensors"] = nlohmann::json::array();
  auto put = [&](const NamedTensor& nt, const char* kind) {
    const auto& shape = nt.value.shape();
    const auto bytes = encode_container(tensor_container(shape, nt.value.data()));
    index["tensors"].push_back(
        {{"name", nt.name}, {"kind", kind}, {"shape", shape}, {"offset", blob.size()}, {"bytes", bytes.size()}});
    blob.insert(blob.end(), bytes.begin(), bytes.end());
  };
  for (const auto& p : params.params) put(p, "param");
  for (const auto& b : params.buffers) put(b, "buffer");
  write_file_bytes(path, blob);
  const auto text = index.dump(1) + "\n";
  write_file_bytes(path.string() + ".json", text);
}

EncoderParams load_params(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path) || !std::filesystem::exists(path.string() + ".json")) {
    throw ConfigError("checkpoint not found: " + path.string() + " (expected it plus " + path.filename().string() +
                      ".json)");
  }
  nlohmann::json index;
  {
    std::ifstream in(path.string() + ".json");
    try {
      in >> index;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("checkpoint index " + path.string() + ".json: " + e.what());
    }
  }
  const auto blob = read_file_bytes(path);
  EncoderParams p;
  try {
    p.config = config_from_json(index.at("config"));
    p.seed = index.at("seed").get<std::uint64_t>();
    p.step = index.at("step").get<std::int64_t>();
    for (const auto& e : index.at("tensors")) {
      const auto offset = e.at("offset").get<std::size_t>();
      const auto bytes = e.at("bytes").get<std::size_t>();
      if (offset + bytes > blob.size()) throw CorruptionError("checkpoint " + path.string() + ": tensor beyond end of file");
      const auto ct = decode_container(std::span<const char>(blob).subspan(offset, bytes));
      const auto shape = e.at("shape").get<Shape>();
      const bool is_param = e.at("kind").get<std::string>() == "param";
      auto t = Tensor::from(shape, ct.values, is_param);
      (is_param ? p.params : p.buffers).push_back({e.at("name").get<std::string>(), t});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint index " + path.string() + ".json: " + e.what());
  }
  const auto reference = init_encoder(p.config, 0);
  if (reference.params.size() != p.params.size() || reference.buffers.size() != p.buffers.size()) {
    throw ValidationError("checkpoint " + path.string() + ": tensor set does not match its config");
  }
  for (std::size_t i = 0; i < p.params.size(); ++i) {
    if (reference.params[i].name != p.params[i].name || reference.params[i].value.shape() != p.params[i].value.shape()) {
      throw ValidationError("checkpoint " + path.string() + ": unexpected tensor " + p.params[i].name);
    }
  }
  return p;
}

}  // namespace pimc
