#include "amenable/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace amenable::nn {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

fs::path with_suffix(const fs::path& stem, const char* suffix) {
  fs::path p = stem;
  p += suffix;
  return p;
}

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ArtifactError("truncated checkpoint blob");
  return v;
}

ordered_json layer_to_json(const LayerSpec& s) {
  ordered_json j;
  j["kind"] = to_string(s.kind);
  switch (s.kind) {
    case LayerKind::kDense: j["units"] = s.units; break;
    case LayerKind::kConv2d:
      j["channels"] = s.units;
      j["kernel"] = s.kernel;
      break;
    case LayerKind::kActivation: j["activation"] = to_string(s.activation); break;
    case LayerKind::kFlatten: break;
    case LayerKind::kPool:
      j["pool"] = to_string(s.pool);
      j["factor"] = s.factor;
      break;
    case LayerKind::kUpsample: j["factor"] = s.factor; break;
    case LayerKind::kConcat: j["source"] = s.source; break;
  }
  return j;
}

LayerSpec layer_from_json(const ordered_json& j) {
  const auto kind = layer_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case LayerKind::kDense: return LayerSpec::dense(j.at("units").get<std::size_t>());
    case LayerKind::kConv2d:
      return LayerSpec::conv2d(j.at("channels").get<std::size_t>(), j.at("kernel").get<std::size_t>());
    case LayerKind::kActivation: return LayerSpec::act(activation_from_string(j.at("activation").get<std::string>()));
    case LayerKind::kFlatten: return LayerSpec::flatten();
    case LayerKind::kPool: {
      auto s = LayerSpec::max_pool(j.at("factor").get<std::size_t>());
      s.pool = pool_from_string(j.at("pool").get<std::string>());
      return s;
    }
    case LayerKind::kUpsample: return LayerSpec::upsample(j.at("factor").get<std::size_t>());
    case LayerKind::kConcat: return LayerSpec::concat(j.at("source").get<std::size_t>());
  }
  throw ArtifactError("bad layer descriptor");
}

}  // namespace

void save_checkpoint(const fs::path& stem, const Network& net, const CheckpointMeta& meta) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  ordered_json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["input_shape"] = net.input_shape();
  manifest["layers"] = ordered_json::array();
  for (const auto& l : net.layers()) manifest["layers"].push_back(layer_to_json(l));
  manifest["parameters"] = ordered_json::array();
  for (const auto& p : net.parameters())
    manifest["parameters"].push_back({{"name", p.name}, {"shape", p.value.shape()}});
  ordered_json m = ordered_json::object();
  for (const auto& [k, v] : meta.strings) m[k] = v;
  for (const auto& [k, v] : meta.numbers) m[k] = v;
  manifest["meta"] = m;
  manifest["blob"] = with_suffix(stem, ".bin").filename().string();

  std::ofstream js(with_suffix(stem, ".json"));
  if (!js) throw ArtifactError("cannot write " + with_suffix(stem, ".json").string());
  js << manifest.dump(2) << '\n';

  std::ofstream bin(with_suffix(stem, ".bin"), std::ios::binary);
  if (!bin) throw ArtifactError("cannot write " + with_suffix(stem, ".bin").string());
  for (const auto& p : net.parameters()) {
    put<std::uint32_t>(bin, static_cast<std::uint32_t>(p.name.size()));
    bin.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(bin, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) put<std::uint64_t>(bin, d);
    for (double v : p.value.values()) put<double>(bin, v);
  }
}

LoadedCheckpoint load_checkpoint(const fs::path& stem) {
  const auto json_path = with_suffix(stem, ".json");
  const auto bin_path = with_suffix(stem, ".bin");
  std::ifstream js(json_path);
  if (!js) throw ArtifactError("missing checkpoint manifest " + json_path.string());
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(js);
  } catch (const std::exception& e) {
    throw ArtifactError("malformed checkpoint manifest " + json_path.string() + ": " + e.what());
  }
  if (manifest.value("version", "") != kCheckpointVersion)
    throw ArtifactError("unsupported checkpoint version in " + json_path.string());

  LoadedCheckpoint out;
  try {
    std::vector<LayerSpec> layers;
    for (const auto& l : manifest.at("layers")) layers.push_back(layer_from_json(l));
    out.network = Network(manifest.at("input_shape").get<Shape>(), std::move(layers));
    for (const auto& [k, v] : manifest.at("meta").items()) {
      if (v.is_number()) out.meta.numbers[k] = v.get<double>();
      else if (v.is_string()) out.meta.strings[k] = v.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("malformed checkpoint manifest " + json_path.string() + ": " + e.what());
  }

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw ArtifactError("missing checkpoint blob " + bin_path.string());
  for (auto& p : out.network.parameters()) {
    const auto len = get<std::uint32_t>(bin);
    std::string name(len, '\0');
    if (!bin.read(name.data(), len)) throw ArtifactError("truncated checkpoint blob");
    if (name != p.name) throw ArtifactError("checkpoint parameter '" + name + "' where '" + p.name + "' expected");
    const auto rank = get<std::uint32_t>(bin);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(bin));
    if (shape != p.value.shape()) throw ArtifactError("checkpoint shape mismatch for " + name);
    for (auto& v : p.value.values()) v = get<double>(bin);
  }
  return out;
}

}  // namespace amenable::nn
