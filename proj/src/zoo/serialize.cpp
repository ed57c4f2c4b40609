#include "banet/zoo/serialize.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "banet/common.hpp"
#include "banet/io_util.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian");

namespace banet::zoo {

namespace {
constexpr char kMagic[8] = {'B', 'A', 'N', 'E', 'T', 'M', 'D', '1'};
}

void save_model(const Model& m, const std::string& path) {
  nlohmann::ordered_json h;
  h["schema"] = 1;
  h["variant"] = to_string(m.spec().variant);
  h["parts"] = m.spec().parts;
  h["features_per_part"] = m.spec().features_per_part;
  h["window"] = m.spec().window;
  h["hidden"] = m.spec().hidden;
  h["lstm_layers"] = m.spec().lstm_layers;
  h["classes"] = m.spec().classes;
  h["dropout"] = m.spec().dropout;
  h["conv_filters"] = m.spec().conv_filters;
  h["conv_kernel"] = m.spec().conv_kernel;
  h["pool"] = m.spec().pool;
  h["seed"] = m.seed();
  h["param_count"] = m.param_count();
  const std::string header = h.dump();

  std::string out;
  out.reserve(12 + header.size() + m.param_count() * sizeof(double));
  out.append(kMagic, sizeof(kMagic));
  const std::uint32_t hl = static_cast<std::uint32_t>(header.size());
  out.append(reinterpret_cast<const char*>(&hl), sizeof(hl));
  out.append(header);
  const auto vals = m.params().all_values();
  out.append(reinterpret_cast<const char*>(vals.data()),
             vals.size() * sizeof(double));
  atomic_write_file(path, out);
}

Model load_model(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw io_error("not a model file: " + path);
  std::uint32_t hl = 0;
  std::memcpy(&hl, bytes.data() + 8, sizeof(hl));
  if (bytes.size() < 12 + static_cast<size_t>(hl))
    throw io_error("truncated model header: " + path);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(12, hl));
  } catch (const std::exception& e) {
    throw io_error(str_cat("bad model header in ", path, ": ", e.what()));
  }
  if (h.value("schema", 0) != 1) throw io_error("unsupported model schema: " + path);

  ModelSpec spec;
  spec.variant = variant_from_string(h.at("variant").get<std::string>());
  spec.parts = h.at("parts").get<int>();
  spec.features_per_part = h.at("features_per_part").get<int>();
  spec.window = h.at("window").get<int>();
  spec.hidden = h.at("hidden").get<int>();
  spec.lstm_layers = h.at("lstm_layers").get<int>();
  spec.classes = h.at("classes").get<int>();
  spec.dropout = h.at("dropout").get<double>();
  spec.conv_filters = h.at("conv_filters").get<int>();
  spec.conv_kernel = h.at("conv_kernel").get<int>();
  spec.pool = h.at("pool").get<int>();

  Model m(spec, h.at("seed").get<std::uint64_t>());
  const size_t n = h.at("param_count").get<size_t>();
  if (n != m.param_count())
    throw io_error(str_cat("model file ", path, ": parameter count ", n,
                           " does not match architecture (", m.param_count(), ")"));
  if (bytes.size() != 12 + hl + n * sizeof(double))
    throw io_error("truncated model payload: " + path);
  auto vals = m.params().all_values();
  std::memcpy(vals.data(), bytes.data() + 12 + hl, n * sizeof(double));
  for (double x : vals)
    if (!std::isfinite(x)) throw io_error("non-finite parameter in " + path);
  return m;
}

} // namespace banet::zoo
