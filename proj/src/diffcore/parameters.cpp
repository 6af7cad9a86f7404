#include "siamgrid/diffcore/parameters.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "siamgrid/errors.hpp"

namespace siamgrid::diffcore::inline SIAMGRID_PRECISION_NS {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* k_format = "siamgrid-checkpoint-v1";

std::string file_name_for(const std::string& name) {
  std::string out = name;
  for (auto& ch : out) {
    if (ch == '/' || ch == '\\') ch = '_';
  }
  return out + ".f32";
}

// On disk tensors are always little-endian float32.
void write_le_floats(const fs::path& path, std::span<const real> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw io_error("short write to " + path.string());
}

std::vector<real> read_le_floats(const fs::path& path, std::size_t count) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot read " + path.string());
  std::vector<unsigned char> bytes(count * 4);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size()) || is.peek() != EOF) {
    throw io_error("size mismatch in " + path.string());
  }
  std::vector<real> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
    out[i] = static_cast<real>(std::bit_cast<float>(bits));
  }
  return out;
}

}  // namespace

void parameter_registry::check_unique(const std::string& name) const {
  if (contains(name)) throw contract_error("duplicate parameter name: " + name);
}

void parameter_registry::add(const std::string& name, tensor value) {
  check_unique(name);
  value.set_requires_grad(true);
  m_params.push_back({name, std::move(value)});
}

void parameter_registry::add_buffer(const std::string& name, tensor value) {
  check_unique(name);
  m_buffers.push_back({name, std::move(value)});
}

bool parameter_registry::contains(const std::string& name) const {
  auto match = [&](const parameter& p) { return p.name == name; };
  return std::any_of(m_params.begin(), m_params.end(), match) ||
         std::any_of(m_buffers.begin(), m_buffers.end(), match);
}

const tensor& parameter_registry::find(const std::string& name) const {
  for (const auto* list : {&m_params, &m_buffers}) {
    for (const auto& p : *list) {
      if (p.name == name) return p.value;
    }
  }
  throw contract_error("unknown parameter: " + name);
}

std::vector<tensor> parameter_registry::tensors() const {
  std::vector<tensor> out;
  out.reserve(m_params.size());
  for (const auto& p : m_params) out.push_back(p.value);
  return out;
}

void parameter_registry::zero_grad() {
  for (auto& p : m_params) p.value.clear_grad();
}

void parameter_registry::set_trainable(bool trainable) {
  for (auto& p : m_params) p.value.set_requires_grad(trainable);
}

void save_checkpoint(const fs::path& dir, const std::vector<parameter>& tensors) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  json manifest;
  manifest["format"] = k_format;
  manifest["tensors"] = json::array();
  for (const auto& p : tensors) {
    const auto file = file_name_for(p.name);
    write_le_floats(dir / file, p.value.data());
    manifest["tensors"].push_back(
        {{"name", p.name}, {"shape", p.value.shape()}, {"dtype", "float32"}, {"file", file}});
  }
  std::ofstream os(dir / "manifest.json");
  if (!os) throw io_error("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << '\n';
}

std::map<std::string, tensor> load_checkpoint(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw dependency_error("checkpoint manifest not found in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(is);
  } catch (const json::exception& e) {
    throw schema_error("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != k_format) throw schema_error("unknown checkpoint format in " + dir.string());
  std::map<std::string, tensor> out;
  for (const auto& entry : manifest.at("tensors")) {
    if (entry.at("dtype") != "float32") throw schema_error("unsupported dtype in checkpoint " + dir.string());
    const auto shape = entry.at("shape").get<shape_t>();
    auto data = read_le_floats(dir / entry.at("file").get<std::string>(), numel_of(shape));
    out.emplace(entry.at("name").get<std::string>(), tensor(shape, std::move(data)));
  }
  return out;
}

void save_registry(const parameter_registry& registry, const fs::path& dir) {
  std::vector<parameter> all = registry.parameters();
  all.insert(all.end(), registry.buffers().begin(), registry.buffers().end());
  save_checkpoint(dir, all);
}

void restore_registry(parameter_registry& registry, const fs::path& dir) {
  const auto loaded = load_checkpoint(dir);
  auto copy_into = [&](const parameter& p) {
    auto it = loaded.find(p.name);
    if (it == loaded.end()) throw dependency_error("checkpoint " + dir.string() + " lacks " + p.name);
    if (it->second.shape() != p.value.shape()) {
      throw dimension_error("checkpoint tensor " + p.name + " has shape " + shape_str(it->second.shape()) +
                            ", expected " + shape_str(p.value.shape()));
    }
    tensor target = p.value;
    auto dst = target.mutable_data();
    std::copy(it->second.data().begin(), it->second.data().end(), dst.begin());
  };
  for (const auto& p : registry.parameters()) copy_into(p);
  for (const auto& p : registry.buffers()) copy_into(p);
}

}  // namespace siamgrid::diffcore
