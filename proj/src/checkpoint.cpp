#include "suture/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "suture/error.hpp"

namespace suture {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'S', 'U', 'T', 'C', 'K', 'P', 'T', '1'};

json config_to_json(const nn::ModelConfig& c) {
  return {{"depth_levels", c.depth_levels}, {"base_channels", c.base_channels},
          {"leaky_slope", c.leaky_slope},   {"input_height", c.input_height},
          {"input_width", c.input_width},   {"num_classes", c.num_classes},
          {"depth_scale_mm", c.depth_scale_mm}};
}

nn::ModelConfig config_from_json(const json& j) {
  nn::ModelConfig c;
  c.depth_levels = j.at("depth_levels").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.input_height = j.at("input_height").get<int>();
  c.input_width = j.at("input_width").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.depth_scale_mm = j.at("depth_scale_mm").get<double>();
  return c;
}

}  // namespace

Checkpoint Checkpoint::initialize(const nn::ModelConfig& config, std::uint64_t seed) {
  Checkpoint c;
  c.config = config;
  c.params = nn::init_parameters<float>(config, seed);
  c.meta.seed = seed;
  return c;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
  json header;
  header["config"] = config_to_json(ck.config);
  header["meta"] = {{"phase", ck.meta.phase},
                    {"epochs", ck.meta.epochs},
                    {"steps", ck.meta.steps},
                    {"final_loss", ck.meta.final_loss ? json(*ck.meta.final_loss) : json(nullptr)},
                    {"seed", ck.meta.seed},
                    {"history", ck.meta.history}};
  json groups = json::array();
  for (nn::Group g : nn::kAllGroups) {
    json params = json::array();
    for (const auto& p : ck.params.group(g).params)
      params.push_back({{"name", p.name}, {"shape", p.shape}, {"trainable", p.trainable},
                        {"count", p.value.size()}});
    groups.push_back({{"name", nn::group_name(g)}, {"params", params}});
  }
  header["groups"] = groups;
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint", path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (nn::Group g : nn::kAllGroups)
    for (const auto& p : ck.params.group(g).params)
      out.write(reinterpret_cast<const char*>(p.value.data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(float)));
  if (!out) throw IoError("error while writing checkpoint", path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint", path);
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0 || len > (1u << 30))
    throw IoError("not a checkpoint file", path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated checkpoint header", path);

  Checkpoint ck;
  try {
    const json header = json::parse(text);
    ck.config = config_from_json(header.at("config"));
    ck.config.validate();
    const json& m = header.at("meta");
    ck.meta.phase = m.at("phase").get<std::string>();
    ck.meta.epochs = m.at("epochs").get<int>();
    ck.meta.steps = m.at("steps").get<std::int64_t>();
    if (!m.at("final_loss").is_null()) ck.meta.final_loss = m["final_loss"].get<double>();
    ck.meta.seed = m.at("seed").get<std::uint64_t>();
    ck.meta.history = m.at("history").get<std::vector<std::string>>();

    // The stored index must match the layout implied by the config.
    ck.params = nn::init_parameters<float>(ck.config, 0);
    const json& groups = header.at("groups");
    for (nn::Group g : nn::kAllGroups) {
      const json& stored = groups.at(static_cast<int>(g)).at("params");
      auto& params = ck.params.group(g).params;
      if (stored.size() != params.size())
        throw ValidationError(std::string("parameter count mismatch in group ") + nn::group_name(g));
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (stored[i].at("name").get<std::string>() != params[i].name ||
            stored[i].at("count").get<std::size_t>() != params[i].value.size())
          throw ValidationError("parameter layout mismatch at '" + params[i].name + "'");
      }
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint header (") + e.what() + ")", path);
  }
  for (nn::Group g : nn::kAllGroups)
    for (auto& p : ck.params.group(g).params) {
      in.read(reinterpret_cast<char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(float)));
      std::fill(p.grad.begin(), p.grad.end(), 0.0f);
    }
  if (!in) throw IoError("truncated checkpoint data", path);
  return ck;
}

bool parameters_equal(const nn::ParameterGroup<float>& a, const nn::ParameterGroup<float>& b) {
  if (a.params.size() != b.params.size()) return false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    const auto& x = a.params[i].value;
    const auto& y = b.params[i].value;
    if (x.size() != y.size() ||
        std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) != 0)
      return false;
  }
  return true;
}

double max_abs_diff(const nn::ParameterGroup<float>& a, const nn::ParameterGroup<float>& b) {
  require(a.params.size() == b.params.size(), "max_abs_diff: layouts differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    const auto& x = a.params[i].value;
    const auto& y = b.params[i].value;
    require(x.size() == y.size(), "max_abs_diff: layouts differ");
    for (std::size_t k = 0; k < x.size(); ++k)
      m = std::max(m, std::abs(static_cast<double>(x[k]) - y[k]));
  }
  return m;
}

}  // namespace suture
