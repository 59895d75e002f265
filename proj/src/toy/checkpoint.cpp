#include "qlens/toy/checkpoint.hpp"

#include "qlens/error.hpp"
#include "qlens/io_util.hpp"
#include "qlens/tensor_io.hpp"

namespace qlens::toy {

namespace fs = std::filesystem;

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"layers", c.layers}, {"d_model", c.d_model}, {"heads", c.heads},     {"ffn_dim", c.ffn_dim},
          {"vocab", c.vocab},   {"context", c.context}, {"init_seed", c.init_seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.layers = j.at("layers").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.vocab = j.at("vocab").get<std::size_t>();
    c.context = j.at("context").get<std::size_t>();
    c.init_seed = j.value("init_seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("bad model config: ") + e.what());
  }
  validate(c);
  return c;
}

void save_checkpoint(const fs::path& dir, const ModelParams& params, const nlohmann::json& training) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create checkpoint directory '" + dir.string() + "'");
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& e : params.layout.entries()) {
    write_tensor(dir / (e.name + ".qtns"), params.get(e.name));
    sites.push_back({{"name", e.name}, {"shape", e.shape}, {"site", e.site}});
  }
  const nlohmann::json manifest = {{"format", "qlens-toy-checkpoint"},
                                   {"version", 1},
                                   {"config", config_to_json(params.config)},
                                   {"params", sites},
                                   {"training", training}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("bad checkpoint manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "qlens-toy-checkpoint")
    fail(ErrorKind::kInvalidArgument, "not a toy-model checkpoint: " + dir.string());
  Checkpoint ck{ModelParams(config_from_json(manifest.at("config"))), manifest};
  for (const auto& e : ck.params.layout.entries()) ck.params.set(e.name, read_tensor(dir / (e.name + ".qtns")));
  return ck;
}

}  // namespace qlens::toy
