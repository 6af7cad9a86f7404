#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "siamgrid/diffcore/ops.hpp"
#include "siamgrid/diffcore/parameters.hpp"

namespace siamgrid::simsiam::inline SIAMGRID_PRECISION_NS {

using diffcore::norm_mode;
using diffcore::tensor;

enum class block_type { basic, bottleneck };

/**
 * Residual encoder description. stage_widths are block output widths; a
 * bottleneck block narrows to width / 4 internally. feature_dim must equal
 * the last stage width.
 */
struct encoder_config {
  std::size_t input_channels = 1;
  std::size_t stem_width = 16;
  std::size_t stem_kernel = 3;
  std::size_t stem_stride = 2;
  /// Max-pool after the stem; kernel 0 disables it.
  std::size_t stem_pool_kernel = 2;
  std::size_t stem_pool_stride = 2;
  std::vector<std::size_t> stage_widths{16, 32, 64, 128};
  std::vector<std::size_t> blocks_per_stage{1, 1, 1, 1};
  block_type block = block_type::basic;
  std::size_t feature_dim = 128;

  friend bool operator==(const encoder_config&, const encoder_config&) = default;

  /// ResNet-50 layout: 7x7 stem, bottleneck stages (3, 4, 6, 3), 2048 features.
  static encoder_config resnet50();
};

void validate(const encoder_config& config);

struct model_config {
  encoder_config encoder;
  std::size_t proj_dim = 128;
  /// Projector hidden width; 0 means proj_dim.
  std::size_t proj_hidden = 0;
  std::size_t projector_layers = 2;
  /// Predictor bottleneck width; 0 means proj_dim / 4.
  std::size_t pred_hidden = 0;

  std::size_t projector_hidden() const { return proj_hidden ? proj_hidden : proj_dim; }
  std::size_t predictor_hidden() const { return pred_hidden ? pred_hidden : std::max<std::size_t>(1, proj_dim / 4); }

  friend bool operator==(const model_config&, const model_config&) = default;
};

void validate(const model_config& config);

/**
 * Shared encoder f, projector g and predictor h. Both branches of a step run
 * through this one instance, so weight sharing is structural.
 */
class simsiam_model {
public:
  simsiam_model(model_config config, std::uint64_t seed);
  simsiam_model(const simsiam_model&) = delete;
  simsiam_model& operator=(const simsiam_model&) = delete;

  const model_config& config() const { return m_config; }
  diffcore::parameter_registry& registry() { return m_registry; }
  const diffcore::parameter_registry& registry() const { return m_registry; }

  norm_mode mode() const { return m_mode; }
  void set_mode(norm_mode mode) { m_mode = mode; }

  /// f(x) for x of shape [N, C, H, W]; returns [N, feature_dim].
  tensor features(const tensor& x);
  /// g(f)
  tensor project(const tensor& f);
  /// h(z)
  tensor predict(const tensor& z);

  /// Parameters and buffers whose names start with "encoder.".
  std::vector<diffcore::parameter> encoder_tensors() const;

private:
  struct conv_bn {
    tensor weight;
    tensor gamma, beta;
    diffcore::batchnorm_stats stats;
    int stride = 1;
    int padding = 0;
  };
  struct block {
    std::vector<conv_bn> main;
    bool has_shortcut = false;
    conv_bn shortcut;
  };
  struct dense_bn {
    tensor weight;
    tensor gamma, beta;
    diffcore::batchnorm_stats stats;
    bool relu = true;
  };

  conv_bn make_conv_bn(const std::string& name, std::size_t in, std::size_t out, std::size_t k, int stride,
                       int padding);
  dense_bn make_dense_bn(const std::string& name, std::size_t in, std::size_t out, bool relu);
  tensor apply(conv_bn& layer, const tensor& x);
  tensor apply(dense_bn& layer, const tensor& x);

  model_config m_config;
  diffcore::parameter_registry m_registry;
  norm_mode m_mode = norm_mode::train;
  std::uint64_t m_seed;
  std::uint64_t m_init_counter = 0;

  conv_bn m_stem;
  std::vector<block> m_blocks;
  std::vector<dense_bn> m_projector;
  dense_bn m_pred_hidden;
  tensor m_pred_weight, m_pred_bias;
};

struct view_outputs {
  tensor p1, p2, z1, z2;
};

/// z_i = g(f(x_i)), p_i = h(z_i); each branch is a separate batch for batchnorm.
view_outputs forward_views(simsiam_model& model, const tensor& x1, const tensor& x2);

/// -1/2 mean cos(p1, sg(z2)) - 1/2 mean cos(p2, sg(z1)).
tensor simsiam_loss(const tensor& p1, const tensor& p2, const tensor& z1, const tensor& z2);

/// f(x) of a model in eval mode, without recording; throws contract_error in train mode.
tensor encode(simsiam_model& model, const tensor& x);

/// Mean over dimensions of the batch standard deviation of l2-normalized rows.
double collapse_metric(const tensor& z);

/// Single linear layer feature_dim -> K with bias.
class probe_head {
public:
  probe_head(std::size_t feature_dim, std::size_t num_labels, std::uint64_t seed);

  std::size_t feature_dim() const { return m_weight.dim(1); }
  std::size_t num_labels() const { return m_weight.dim(0); }
  tensor logits(const tensor& features) const;

  diffcore::parameter_registry& registry() { return m_registry; }
  const diffcore::parameter_registry& registry() const { return m_registry; }

private:
  diffcore::parameter_registry m_registry;
  tensor m_weight, m_bias;
};

/// JSON description of the architecture stored next to encoder checkpoints.
void write_model_manifest(const std::filesystem::path& path, const model_config& config);
model_config read_model_manifest(const std::filesystem::path& path);
std::string to_json(const model_config& config);
model_config model_config_from_json(const std::string& text);

}  // namespace siamgrid::simsiam
