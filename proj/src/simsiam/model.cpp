#include "siamgrid/simsiam/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "siamgrid/augment/rng.hpp"
#include "siamgrid/errors.hpp"

namespace siamgrid::simsiam::inline SIAMGRID_PRECISION_NS {

using namespace diffcore;
using json = nlohmann::json;

namespace {

tensor init_normal(shape_t shape, double stddev, std::uint64_t seed) {
  augment::seeded_rng rng(seed);
  std::vector<real> data(numel_of(shape));
  for (auto& v : data) v = static_cast<real>(stddev * rng.normal());
  return tensor(std::move(shape), std::move(data));
}

tensor init_uniform(shape_t shape, double bound, std::uint64_t seed) {
  augment::seeded_rng rng(seed);
  std::vector<real> data(numel_of(shape));
  for (auto& v : data) v = static_cast<real>(rng.uniform(-bound, bound));
  return tensor(std::move(shape), std::move(data));
}

}  // namespace

encoder_config encoder_config::resnet50() {
  encoder_config c;
  c.stem_width = 64;
  c.stem_kernel = 7;
  c.stem_stride = 2;
  c.stem_pool_kernel = 3;
  c.stem_pool_stride = 2;
  c.stage_widths = {256, 512, 1024, 2048};
  c.blocks_per_stage = {3, 4, 6, 3};
  c.block = block_type::bottleneck;
  c.feature_dim = 2048;
  return c;
}

void validate(const encoder_config& c) {
  if (c.input_channels < 1) throw contract_error("encoder config: input_channels must be >= 1");
  if (c.stage_widths.empty()) throw contract_error("encoder config: at least one stage is required");
  if (c.stage_widths.size() != c.blocks_per_stage.size()) {
    throw contract_error("encoder config: stage_widths and blocks_per_stage differ in length");
  }
  for (std::size_t i = 0; i < c.stage_widths.size(); ++i) {
    if (c.stage_widths[i] < 1 || c.blocks_per_stage[i] < 1) {
      throw contract_error("encoder config: stage widths and block counts must be >= 1");
    }
    if (c.block == block_type::bottleneck && c.stage_widths[i] % 4 != 0) {
      throw contract_error("encoder config: bottleneck stage widths must be divisible by 4");
    }
  }
  if (c.feature_dim != c.stage_widths.back()) {
    throw contract_error("encoder config: feature_dim must equal the last stage width");
  }
  if (c.stem_width < 1 || c.stem_kernel < 1 || c.stem_stride < 1) throw contract_error("encoder config: invalid stem");
  if (c.stem_pool_kernel > 0 && c.stem_pool_stride < 1) throw contract_error("encoder config: invalid stem pool");
}

void validate(const model_config& c) {
  validate(c.encoder);
  if (c.proj_dim < 1) throw contract_error("model config: proj_dim must be >= 1");
  if (c.projector_layers < 1) throw contract_error("model config: projector_layers must be >= 1");
}

simsiam_model::simsiam_model(model_config config, std::uint64_t seed) : m_config(std::move(config)), m_seed(seed) {
  validate(m_config);
  const auto& ec = m_config.encoder;
  const int stem_pad = static_cast<int>(ec.stem_kernel / 2);
  m_stem = make_conv_bn("encoder.stem", ec.input_channels, ec.stem_width, ec.stem_kernel,
                        static_cast<int>(ec.stem_stride), stem_pad);
  std::size_t in = ec.stem_width;
  for (std::size_t s = 0; s < ec.stage_widths.size(); ++s) {
    const std::size_t out = ec.stage_widths[s];
    for (std::size_t b = 0; b < ec.blocks_per_stage[s]; ++b) {
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      const std::string name = "encoder.stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      block blk;
      if (ec.block == block_type::basic) {
        blk.main.push_back(make_conv_bn(name + ".conv1", in, out, 3, stride, 1));
        blk.main.push_back(make_conv_bn(name + ".conv2", out, out, 3, 1, 1));
      } else {
        const std::size_t mid = out / 4;
        blk.main.push_back(make_conv_bn(name + ".conv1", in, mid, 1, 1, 0));
        blk.main.push_back(make_conv_bn(name + ".conv2", mid, mid, 3, stride, 1));
        blk.main.push_back(make_conv_bn(name + ".conv3", mid, out, 1, 1, 0));
      }
      if (stride != 1 || in != out) {
        blk.has_shortcut = true;
        blk.shortcut = make_conv_bn(name + ".shortcut", in, out, 1, stride, 0);
      }
      m_blocks.push_back(std::move(blk));
      in = out;
    }
  }
  std::size_t width = ec.feature_dim;
  for (std::size_t l = 0; l < m_config.projector_layers; ++l) {
    const bool last = l + 1 == m_config.projector_layers;
    const std::size_t out = last ? m_config.proj_dim : m_config.projector_hidden();
    m_projector.push_back(make_dense_bn("projector.layer" + std::to_string(l + 1), width, out, !last));
    width = out;
  }
  const std::size_t hidden = m_config.predictor_hidden();
  m_pred_hidden = make_dense_bn("predictor.layer1", m_config.proj_dim, hidden, true);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  m_pred_weight = init_uniform({m_config.proj_dim, hidden}, bound, augment::derive_seed(m_seed, {m_init_counter++}));
  m_pred_bias = init_uniform({m_config.proj_dim}, bound, augment::derive_seed(m_seed, {m_init_counter++}));
  m_registry.add("predictor.layer2.weight", m_pred_weight);
  m_registry.add("predictor.layer2.bias", m_pred_bias);
}

simsiam_model::conv_bn simsiam_model::make_conv_bn(const std::string& name, std::size_t in, std::size_t out,
                                                   std::size_t k, int stride, int padding) {
  conv_bn layer;
  // Kaiming normal, fan-out mode
  const double stddev = std::sqrt(2.0 / static_cast<double>(out * k * k));
  layer.weight = init_normal({out, in, k, k}, stddev, augment::derive_seed(m_seed, {m_init_counter++}));
  layer.gamma = tensor::full({out}, real(1));
  layer.beta = tensor::zeros({out});
  layer.stats = batchnorm_stats::for_channels(out);
  layer.stride = stride;
  layer.padding = padding;
  m_registry.add(name + ".weight", layer.weight);
  m_registry.add(name + ".bn.gamma", layer.gamma);
  m_registry.add(name + ".bn.beta", layer.beta);
  m_registry.add_buffer(name + ".bn.running_mean", layer.stats.running_mean);
  m_registry.add_buffer(name + ".bn.running_var", layer.stats.running_var);
  return layer;
}

simsiam_model::dense_bn simsiam_model::make_dense_bn(const std::string& name, std::size_t in, std::size_t out,
                                                     bool relu_after) {
  dense_bn layer;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  layer.weight = init_uniform({out, in}, bound, augment::derive_seed(m_seed, {m_init_counter++}));
  layer.gamma = tensor::full({out}, real(1));
  layer.beta = tensor::zeros({out});
  layer.stats = batchnorm_stats::for_channels(out);
  layer.relu = relu_after;
  m_registry.add(name + ".weight", layer.weight);
  m_registry.add(name + ".bn.gamma", layer.gamma);
  m_registry.add(name + ".bn.beta", layer.beta);
  m_registry.add_buffer(name + ".bn.running_mean", layer.stats.running_mean);
  m_registry.add_buffer(name + ".bn.running_var", layer.stats.running_var);
  return layer;
}

tensor simsiam_model::apply(conv_bn& layer, const tensor& x) {
  const tensor y = conv2d(x, layer.weight, layer.stride, layer.padding);
  return batchnorm2d(y, layer.gamma, layer.beta, m_mode, layer.stats);
}

tensor simsiam_model::apply(dense_bn& layer, const tensor& x) {
  tensor y = batchnorm1d(linear(x, layer.weight), layer.gamma, layer.beta, m_mode, layer.stats);
  return layer.relu ? relu(y) : y;
}

tensor simsiam_model::features(const tensor& x) {
  if (x.rank() != 4 || x.dim(1) != m_config.encoder.input_channels) {
    throw dimension_error("encoder input must be [N, " + std::to_string(m_config.encoder.input_channels) +
                          ", H, W], got " + shape_str(x.shape()));
  }
  tensor h = relu(apply(m_stem, x));
  const auto& ec = m_config.encoder;
  if (ec.stem_pool_kernel > 0) {
    h = max_pool2d(h, static_cast<int>(ec.stem_pool_kernel), static_cast<int>(ec.stem_pool_stride));
  }
  for (auto& blk : m_blocks) {
    tensor y = h;
    for (std::size_t i = 0; i < blk.main.size(); ++i) {
      y = apply(blk.main[i], y);
      if (i + 1 < blk.main.size()) y = relu(y);
    }
    const tensor skip = blk.has_shortcut ? apply(blk.shortcut, h) : h;
    h = relu(add(y, skip));
  }
  return global_avg_pool(h);
}

tensor simsiam_model::project(const tensor& f) {
  tensor z = f;
  for (auto& layer : m_projector) z = apply(layer, z);
  return z;
}

tensor simsiam_model::predict(const tensor& z) {
  return linear(apply(m_pred_hidden, z), m_pred_weight, m_pred_bias);
}

std::vector<parameter> simsiam_model::encoder_tensors() const {
  std::vector<parameter> out;
  for (const auto& p : m_registry.parameters())
    if (p.name.rfind("encoder.", 0) == 0) out.push_back(p);
  for (const auto& p : m_registry.buffers())
    if (p.name.rfind("encoder.", 0) == 0) out.push_back(p);
  return out;
}

view_outputs forward_views(simsiam_model& model, const tensor& x1, const tensor& x2) {
  if (x1.shape() != x2.shape()) {
    throw dimension_error("forward_views: view shapes differ: " + shape_str(x1.shape()) + " vs " +
                          shape_str(x2.shape()));
  }
  view_outputs out;
  out.z1 = model.project(model.features(x1));
  out.z2 = model.project(model.features(x2));
  out.p1 = model.predict(out.z1);
  out.p2 = model.predict(out.z2);
  return out;
}

tensor simsiam_loss(const tensor& p1, const tensor& p2, const tensor& z1, const tensor& z2) {
  if (p1.rank() != 2 || p1.shape() != p2.shape() || p1.shape() != z1.shape() || p1.shape() != z2.shape()) {
    throw dimension_error("simsiam_loss: p1, p2, z1, z2 must share one [N, D] shape");
  }
  const tensor cos1 = rowwise_dot(l2_normalize(p1), l2_normalize(stop_gradient(z2)));
  const tensor cos2 = rowwise_dot(l2_normalize(p2), l2_normalize(stop_gradient(z1)));
  return add(scale(mean(cos1), -real(0.5)), scale(mean(cos2), -real(0.5)));
}

tensor encode(simsiam_model& model, const tensor& x) {
  if (model.mode() != norm_mode::eval) throw contract_error("encode: model must be in eval mode");
  diffcore::no_grad_guard guard;
  return model.features(x);
}

double collapse_metric(const tensor& z) {
  if (z.rank() != 2 || z.dim(0) < 2) throw contract_error("collapse_metric: need [N, D] with N >= 2");
  const std::size_t n = z.dim(0), d = z.dim(1);
  const auto data = z.data();
  std::vector<double> normed(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += static_cast<double>(data[i * d + j]) * data[i * d + j];
    const double norm = std::max(std::sqrt(sq), static_cast<double>(l2_epsilon));
    for (std::size_t j = 0; j < d; ++j) normed[i * d + j] = data[i * d + j] / norm;
  }
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += normed[i * d + j];
    m /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (normed[i * d + j] - m) * (normed[i * d + j] - m);
    total += std::sqrt(var / static_cast<double>(n));
  }
  return total / static_cast<double>(d);
}

probe_head::probe_head(std::size_t feature_dim, std::size_t num_labels, std::uint64_t seed) {
  if (feature_dim < 1 || num_labels < 1) throw contract_error("probe_head: dimensions must be >= 1");
  m_weight = init_normal({num_labels, feature_dim}, 0.01, augment::derive_seed(seed, {0}));
  m_bias = tensor::zeros({num_labels});
  m_registry.add("head.weight", m_weight);
  m_registry.add("head.bias", m_bias);
}

tensor probe_head::logits(const tensor& features) const {
  if (features.rank() != 2 || features.dim(1) != feature_dim()) {
    throw contract_error("probe_head: expected features of width " + std::to_string(feature_dim()) + ", got " +
                         shape_str(features.shape()));
  }
  return linear(features, m_weight, m_bias);
}

std::string to_json(const model_config& c) {
  json enc = {{"input_channels", c.encoder.input_channels},
              {"stem_width", c.encoder.stem_width},
              {"stem_kernel", c.encoder.stem_kernel},
              {"stem_stride", c.encoder.stem_stride},
              {"stem_pool_kernel", c.encoder.stem_pool_kernel},
              {"stem_pool_stride", c.encoder.stem_pool_stride},
              {"stage_widths", c.encoder.stage_widths},
              {"blocks_per_stage", c.encoder.blocks_per_stage},
              {"block", c.encoder.block == block_type::basic ? "basic" : "bottleneck"},
              {"feature_dim", c.encoder.feature_dim}};
  json j = {{"encoder", enc},
            {"proj_dim", c.proj_dim},
            {"proj_hidden", c.proj_hidden},
            {"projector_layers", c.projector_layers},
            {"pred_hidden", c.pred_hidden}};
  return j.dump(2);
}

model_config model_config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    model_config c;
    const auto& e = j.at("encoder");
    c.encoder.input_channels = e.at("input_channels").get<std::size_t>();
    c.encoder.stem_width = e.at("stem_width").get<std::size_t>();
    c.encoder.stem_kernel = e.at("stem_kernel").get<std::size_t>();
    c.encoder.stem_stride = e.at("stem_stride").get<std::size_t>();
    c.encoder.stem_pool_kernel = e.at("stem_pool_kernel").get<std::size_t>();
    c.encoder.stem_pool_stride = e.at("stem_pool_stride").get<std::size_t>();
    c.encoder.stage_widths = e.at("stage_widths").get<std::vector<std::size_t>>();
    c.encoder.blocks_per_stage = e.at("blocks_per_stage").get<std::vector<std::size_t>>();
    const auto block = e.at("block").get<std::string>();
    if (block != "basic" && block != "bottleneck") throw contract_error("unknown block type '" + block + "'");
    c.encoder.block = block == "basic" ? block_type::basic : block_type::bottleneck;
    c.encoder.feature_dim = e.at("feature_dim").get<std::size_t>();
    c.proj_dim = j.at("proj_dim").get<std::size_t>();
    c.proj_hidden = j.at("proj_hidden").get<std::size_t>();
    c.projector_layers = j.at("projector_layers").get<std::size_t>();
    c.pred_hidden = j.at("pred_hidden").get<std::size_t>();
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw contract_error(std::string("invalid model manifest: ") + e.what());
  }
}

void write_model_manifest(const std::filesystem::path& path, const model_config& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write model manifest " + path.string());
  out << to_json(config) << '\n';
}

model_config read_model_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw dependency_error("missing model manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_config_from_json(ss.str());
}

}  // namespace siamgrid::simsiam
