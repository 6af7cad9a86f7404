#include "siamgrid/cli/config.hpp"

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>

#include "siamgrid/errors.hpp"

#ifndef SIAMGRID_VERSION_TAG
#define SIAMGRID_VERSION_TAG "siamgrid-dev"
#endif

namespace siamgrid::cli {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out;
  for (const auto& e : errors) out += (out.empty() ? "" : "; ") + e;
  return out;
}

void overlay_file(config_document& doc, const fs::path& file, std::vector<fs::path>& stack,
                  std::vector<std::string>& errors) {
  const auto canonical = fs::weakly_canonical(file);
  for (const auto& p : stack) {
    if (p == canonical) throw config_error("config include cycle at " + file.string());
  }
  pt::ptree tree;
  try {
    pt::read_ini(file.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    if (!fs::exists(file)) throw config_error("config file not found: " + file.string());
    throw config_error("cannot parse config " + file.string() + ": " + e.message() + " (line " +
                       std::to_string(e.line()) + ")");
  }
  stack.push_back(canonical);
  // Includes first, so the including file overrides them.
  for (const auto& [key, node] : tree) {
    if (node.empty() && key == "include") overlay_file(doc, file.parent_path() / node.data(), stack, errors);
  }
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      if (key != "include") errors.push_back(file.string() + ": unknown top-level key '" + key + "'");
      continue;
    }
    auto section = doc.find(key);
    if (section == doc.end()) {
      errors.push_back(file.string() + ": unknown section [" + key + "]");
      continue;
    }
    for (const auto& [name, value] : node) {
      auto entry = section->second.find(name);
      if (entry == section->second.end()) {
        errors.push_back(file.string() + ": unknown key '" + key + "." + name + "'");
        continue;
      }
      entry->second = value.data();
    }
  }
  stack.pop_back();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// Typed readers that record a message instead of throwing, so every bad key is reported.
class reader {
public:
  explicit reader(const config_document& doc) : m_doc(doc) {}

  const std::string& raw(const std::string& section, const std::string& key) const {
    return m_doc.at(section).at(key);
  }

  double real(const std::string& s, const std::string& k) {
    const auto& v = raw(s, k);
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) fail(s, k, "expected a number");
    return out;
  }

  std::uint64_t uint(const std::string& s, const std::string& k) {
    const auto& v = raw(s, k);
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) fail(s, k, "expected a non-negative integer");
    return out;
  }

  std::optional<std::size_t> optional_uint(const std::string& s, const std::string& k) {
    if (raw(s, k).empty()) return std::nullopt;
    return uint(s, k);
  }

  bool boolean(const std::string& s, const std::string& k) {
    const auto& v = raw(s, k);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(s, k, "expected true or false");
    return false;
  }

  std::vector<double> reals(const std::string& s, const std::string& k) {
    std::vector<double> out;
    for (const auto& item : split_list(raw(s, k))) {
      double x = 0.0;
      const auto r = std::from_chars(item.data(), item.data() + item.size(), x);
      if (r.ec != std::errc() || r.ptr != item.data() + item.size()) {
        fail(s, k, "expected a comma-separated list of numbers");
        return {};
      }
      out.push_back(x);
    }
    return out;
  }

  std::vector<std::size_t> uints(const std::string& s, const std::string& k) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(raw(s, k))) {
      std::size_t x = 0;
      const auto r = std::from_chars(item.data(), item.data() + item.size(), x);
      if (r.ec != std::errc() || r.ptr != item.data() + item.size()) {
        fail(s, k, "expected a comma-separated list of integers");
        return {};
      }
      out.push_back(x);
    }
    return out;
  }

  template <class Fn>
  auto guarded(const std::string& s, const std::string& k, Fn&& fn) -> decltype(fn()) {
    try {
      return fn();
    } catch (const std::exception& e) {
      fail(s, k, e.what());
      return {};
    }
  }

  void fail(const std::string& s, const std::string& k, const std::string& why) {
    m_errors.push_back(s + "." + k + " = '" + raw(s, k) + "': " + why);
  }

  const std::vector<std::string>& errors() const { return m_errors; }

private:
  const config_document& m_doc;
  std::vector<std::string> m_errors;
};

protocols::optim_settings read_optim(reader& r, const std::string& phase, protocols::optim_settings defaults) {
  protocols::optim_settings s = defaults;
  s.base_lr = r.real("optim", phase + "_lr");
  s.weight_decay = r.real("optim", phase + "_weight_decay");
  s.batch_size = r.uint("optim", phase + "_batch");
  s.momentum = r.real("optim", "momentum");
  if (auto e = r.optional_uint("optim", phase + "_epochs")) s.epochs = *e;
  return s;
}

augment::aug_kind read_kind(reader& r, const std::string& s, const std::string& k, const std::string& text) {
  const auto kind = augment::kind_from_string(text);
  if (!kind) {
    r.fail(s, k, "unknown augmentation '" + text + "'");
    return augment::aug_kind::identity;
  }
  return *kind;
}

}  // namespace

const config_document& config_defaults() {
  static const config_document doc = {
      {"data",
       {{"source", "synthetic"},
        {"manifest", ""},
        {"image_size", "64"},
        {"n_train", "6000"},
        {"n_eval", "1000"},
        {"n_validation", "0"},
        {"labels", "4"},
        {"prevalences", "0.3,0.3,0.3,0.3"},
        {"difficulty", "0.5"},
        {"nuisance", "1"},
        {"seed", "0"},
        {"train_ids", ""},
        {"eval_ids", ""},
        {"validation_ids", ""},
        {"shift_prevalences", ""},
        {"shift_noise", "0"},
        {"fraction", "100"}}},
      {"policy",
       {{"mode", "single_branch_compose"},
        {"t1", "identity"},
        {"t2", "identity"},
        {"pipeline", ""},
        {"pool", "identity,crop_resize,distort"}}},
      {"model",
       {{"preset", "desk"},
        {"input_channels", "1"},
        {"stem_width", "16"},
        {"stem_kernel", "3"},
        {"stem_stride", "2"},
        {"stem_pool_kernel", "2"},
        {"stem_pool_stride", "2"},
        {"stage_widths", "16,32,64,128"},
        {"blocks_per_stage", "1,1,1,1"},
        {"block", "basic"},
        {"feature_dim", "128"},
        {"proj_dim", "128"},
        {"proj_hidden", "0"},
        {"projector_layers", "2"},
        {"pred_hidden", "0"}}},
      {"optim",
       {{"budget", "selection"},
        {"momentum", "0.9"},
        {"pretrain_lr", "0.05"},
        {"pretrain_weight_decay", "0.0001"},
        {"pretrain_batch", "256"},
        {"pretrain_epochs", ""},
        {"probe_lr", "30"},
        {"probe_weight_decay", "0"},
        {"probe_batch", "256"},
        {"probe_epochs", ""},
        {"finetune_lr", "0.00001"},
        {"finetune_weight_decay", "0.0001"},
        {"finetune_batch", "256"},
        {"finetune_epochs", ""},
        {"supervised_lr", "0.05"},
        {"supervised_weight_decay", "0.0001"},
        {"supervised_batch", "256"},
        {"supervised_epochs", ""}}},
      {"protocol",
       {{"phase", ""},
        {"seed", "0"},
        {"threads", "1"},
        {"threshold", "0.5"},
        {"init", "scratch"},
        {"label_map", ""},
        {"fractions", "1,10,12.5,25,50,100"},
        {"split_seed", "0"},
        {"small_external", "false"}}},
  };
  return doc;
}

config_document load_config(const std::vector<fs::path>& files) {
  config_document doc = config_defaults();
  std::vector<std::string> errors;
  for (const auto& file : files) {
    std::vector<fs::path> stack;
    overlay_file(doc, file, stack, errors);
  }
  if (!errors.empty()) throw config_error("invalid configuration: " + join_errors(errors));
  return doc;
}

void apply_override(config_document& doc, const std::string& section, const std::string& key,
                    const std::string& value) {
  auto s = doc.find(section);
  if (s == doc.end() || !s->second.contains(key)) throw config_error("unknown key '" + section + "." + key + "'");
  s->second[key] = value;
}

std::string render(const config_document& doc) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [section, keys] : doc) {
    if (!first) os << '\n';
    first = false;
    os << '[' << section << "]\n";
    for (const auto& [key, value] : keys) os << key << " = " << value << '\n';
  }
  return os.str();
}

std::string version_tag() { return SIAMGRID_VERSION_TAG; }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw io_error("SHA-256 computation failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string fingerprint(const config_document& doc, const std::map<std::string, std::string>& parents) {
  std::string text = version_tag() + "\n" + render(doc);
  for (const auto& [role, fp] : parents) text += "parent." + role + " = " + fp + "\n";
  return sha256_hex(text);
}

run_settings resolve(const config_document& doc) {
  reader r(doc);
  run_settings s;
  const bool final_budget = [&] {
    const auto& b = r.raw("optim", "budget");
    if (b != "selection" && b != "final") r.fail("optim", "budget", "expected selection or final");
    return b == "final";
  }();
  const bool small_external = r.boolean("protocol", "small_external");

  auto& d = s.data;
  d.source = r.raw("data", "source");
  if (d.source != "synthetic" && d.source != "manifest") r.fail("data", "source", "expected synthetic or manifest");
  d.manifest = r.raw("data", "manifest");
  if (d.source == "manifest" && d.manifest.empty()) r.fail("data", "manifest", "required when source = manifest");
  d.image_size = r.uint("data", "image_size");
  d.n_train = r.uint("data", "n_train");
  d.n_eval = r.uint("data", "n_eval");
  d.n_validation = r.uint("data", "n_validation");
  d.synthetic.image_size = d.image_size;
  d.synthetic.K = r.uint("data", "labels");
  d.synthetic.prevalences = r.reals("data", "prevalences");
  d.synthetic.difficulty = r.real("data", "difficulty");
  d.synthetic.nuisance = r.real("data", "nuisance");
  d.synthetic.seed = r.uint("data", "seed");
  d.train_ids = r.raw("data", "train_ids");
  d.eval_ids = r.raw("data", "eval_ids");
  d.validation_ids = r.raw("data", "validation_ids");
  d.shift_prevalences = r.reals("data", "shift_prevalences");
  d.shift_noise = r.real("data", "shift_noise");
  d.fraction = r.real("data", "fraction");
  if (!(d.fraction > 0.0 && d.fraction <= 100.0)) r.fail("data", "fraction", "expected a value in (0, 100]");
  if (d.source == "synthetic") {
    r.guarded("data", "prevalences", [&] {
      dataio::validate(d.synthetic);
      return 0;
    });
    if (d.n_train < 2) r.fail("data", "n_train", "need at least two training samples");
    if (d.n_eval < 2) r.fail("data", "n_eval", "need at least two evaluation samples");
  }

  const auto& mode = r.raw("policy", "mode");
  if (mode == "single_branch_compose") {
    const auto t1 = r.guarded("policy", "t1", [&] { return std::optional(augment::parse_spec(r.raw("policy", "t1"))); });
    const auto t2 = r.guarded("policy", "t2", [&] { return std::optional(augment::parse_spec(r.raw("policy", "t2"))); });
    if (t1 && t2) s.policy = augment::single_branch_compose(*t1, *t2);
  } else if (mode == "dual_symmetric") {
    const auto p = r.guarded("policy", "pipeline",
                             [&] { return std::optional(augment::parse_pipeline(r.raw("policy", "pipeline"))); });
    if (p) s.policy = augment::dual_symmetric(*p);
  } else {
    r.fail("policy", "mode", "expected single_branch_compose or dual_symmetric");
  }
  r.guarded("policy", "mode", [&] {
    augment::validate(s.policy);
    return 0;
  });
  for (const auto& name : split_list(r.raw("policy", "pool"))) s.pool.push_back(read_kind(r, "policy", "pool", name));
  if (s.pool.empty()) r.fail("policy", "pool", "expected at least one augmentation");

  auto& m = s.model;
  const auto& preset = r.raw("model", "preset");
  if (preset == "resnet50") {
    m.encoder = simsiam::encoder_config::resnet50();
  } else if (preset == "desk") {
    m.encoder.input_channels = r.uint("model", "input_channels");
    m.encoder.stem_width = r.uint("model", "stem_width");
    m.encoder.stem_kernel = r.uint("model", "stem_kernel");
    m.encoder.stem_stride = r.uint("model", "stem_stride");
    m.encoder.stem_pool_kernel = r.uint("model", "stem_pool_kernel");
    m.encoder.stem_pool_stride = r.uint("model", "stem_pool_stride");
    m.encoder.stage_widths = r.uints("model", "stage_widths");
    m.encoder.blocks_per_stage = r.uints("model", "blocks_per_stage");
    const auto& block = r.raw("model", "block");
    if (block == "basic" || block == "bottleneck") {
      m.encoder.block = block == "basic" ? simsiam::block_type::basic : simsiam::block_type::bottleneck;
    } else {
      r.fail("model", "block", "expected basic or bottleneck");
    }
    m.encoder.feature_dim = r.uint("model", "feature_dim");
  } else {
    r.fail("model", "preset", "expected desk or resnet50");
  }
  m.proj_dim = r.uint("model", "proj_dim");
  m.proj_hidden = r.uint("model", "proj_hidden");
  m.projector_layers = r.uint("model", "projector_layers");
  m.pred_hidden = r.uint("model", "pred_hidden");
  r.guarded("model", "feature_dim", [&] {
    simsiam::validate(m);
    return 0;
  });

  s.pretrain = read_optim(r, "pretrain", protocols::default_pretrain(final_budget));
  s.probe = read_optim(r, "probe", protocols::default_probe(final_budget));
  s.finetune = read_optim(r, "finetune", protocols::default_finetune(small_external));
  s.supervised = read_optim(r, "supervised", protocols::default_supervised(small_external));

  s.seed = r.uint("protocol", "seed");
  s.threads = r.uint("protocol", "threads");
  s.threshold = r.real("protocol", "threshold");
  if (!(s.threshold > 0.0 && s.threshold < 1.0)) r.fail("protocol", "threshold", "expected a value in (0, 1)");
  const auto& init = r.raw("protocol", "init");
  if (init == "scratch" || init == "checkpoint") {
    s.init = init == "scratch" ? protocols::init_kind::scratch : protocols::init_kind::checkpoint;
  } else {
    r.fail("protocol", "init", "expected scratch or checkpoint");
  }
  for (const auto& pair : split_list(r.raw("protocol", "label_map"))) {
    const auto colon = pair.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == pair.size()) {
      r.fail("protocol", "label_map", "expected source:target pairs");
      break;
    }
    s.label_map.emplace_back(pair.substr(0, colon), pair.substr(colon + 1));
  }
  s.fractions = r.reals("protocol", "fractions");
  s.split_seed = r.uint("protocol", "split_seed");
  const auto& phase = r.raw("protocol", "phase");
  if (!phase.empty() && !protocols::phase_from_string(phase) && phase != "sweep" && phase != "efficiency" &&
      phase != "synth") {
    r.fail("protocol", "phase", "unknown phase");
  }

  if (!r.errors().empty()) throw config_error("invalid configuration: " + join_errors(r.errors()));
  return s;
}

}  // namespace siamgrid::cli
