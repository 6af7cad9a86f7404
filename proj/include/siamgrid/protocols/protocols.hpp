#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "siamgrid/augment/policy.hpp"
#include "siamgrid/dataio/dataset.hpp"
#include "siamgrid/evalkit/report.hpp"
#include "siamgrid/simsiam/model.hpp"

namespace siamgrid::protocols {

enum class phase { pretrain, probe, finetune, supervised, eval };
std::string_view to_string(phase p);
std::optional<phase> phase_from_string(std::string_view name);

/// SGD settings of one phase; the applied rate is base_lr * batch_size / 256
/// with cosine decay over epochs.
struct optim_settings {
  double base_lr = 0.05;
  double weight_decay = 1e-4;
  double momentum = 0.9;
  std::size_t batch_size = 256;
  std::size_t epochs = 1;

  friend bool operator==(const optim_settings&, const optim_settings&) = default;
};

/// Defaults per phase at the selection / final budgets.
optim_settings default_pretrain(bool final_budget = false);
optim_settings default_probe(bool final_budget = false);
optim_settings default_finetune(bool small_external = false);
optim_settings default_supervised(bool small_external = false);

struct pretrain_config {
  simsiam::model_config model;
  augment::view_policy policy;
  optim_settings optim = default_pretrain();
  std::uint64_t seed = 0;
  /// Seed of the augmentation streams; defaults to `seed` when unset.
  std::optional<std::uint64_t> view_seed;
};

struct probe_config {
  optim_settings optim = default_probe();
  std::uint64_t seed = 0;
  double threshold = 0.5;
};

struct finetune_config {
  optim_settings optim = default_finetune();
  std::uint64_t seed = 0;
  double threshold = 0.5;
};

struct epoch_log {
  std::size_t epoch = 0;
  double loss = 0.0;
  double collapse_metric = 0.0;
  double lr = 0.0;
};

/// Persisted outcome of one run.
struct run_record {
  std::string phase;
  std::string fingerprint;
  std::string label;
  std::vector<epoch_log> epochs;
  bool collapsed = false;
  std::map<std::string, evalkit::metrics_report> reports;
  /// Parent role (e.g. "encoder", "head") to parent fingerprint.
  std::map<std::string, std::string> parents;
  std::vector<std::string> checkpoints;
  double wall_seconds = 0.0;
};

std::string to_json_line(const run_record& record);
run_record parse_run_record(const std::string& line);

/// Collapse is flagged when the metric stays below this for `collapse_patience` consecutive epochs.
double collapse_threshold(std::size_t proj_dim);
inline constexpr std::size_t collapse_patience = 3;

/// Probe head plus the label names it predicts, in output order.
struct labeled_head {
  std::unique_ptr<simsiam::probe_head> head;
  std::vector<std::string> label_names;
};

struct pretrain_result {
  std::unique_ptr<simsiam::simsiam_model> model;
  run_record record;
};

struct probe_result {
  labeled_head head;
  run_record record;
};

/// Named evaluation splits.
using eval_sets = std::vector<std::pair<std::string, const dataio::dataset*>>;

/**
 * SimSiam training: make_views, forward_views, simsiam_loss, backward and
 * sgd_step with cosine decay per epoch. Logs mean loss and mean
 * collapse_metric(z1) per epoch; a collapse is flagged, never fatal.
 */
pretrain_result pretrain(const pretrain_config& config, const dataio::dataset& train);

/// Frozen-encoder linear classifier trained with masked BCE on cached features.
probe_result linear_probe(simsiam::simsiam_model& encoder, const dataio::dataset& train, const eval_sets& evals,
                          const probe_config& config);

/// Trains encoder and head jointly without augmentations. A null head raises contract_error.
run_record fine_tune(simsiam::simsiam_model& model, labeled_head& head, const dataio::dataset& train,
                     const eval_sets& evals, const finetune_config& config);

enum class init_kind { scratch, checkpoint };

struct supervised_result {
  std::unique_ptr<simsiam::simsiam_model> model;
  labeled_head head;
  run_record record;
};

/// End-to-end supervised training. With init_kind::checkpoint, `init` supplies the starting encoder.
supervised_result supervised_baseline(const simsiam::model_config& model_config, init_kind init,
                                      const std::filesystem::path& init_checkpoint, const dataio::dataset& train,
                                      const eval_sets& evals, const finetune_config& config);

/// Ordered (source head label, target dataset label) pairs.
using label_map = std::vector<std::pair<std::string, std::string>>;

struct zero_shot_result {
  evalkit::metrics_report report;
  /// Target labels with no mapped source, reported as NA.
  std::vector<std::string> unmapped_labels;
};

zero_shot_result zero_shot_eval(simsiam::simsiam_model& encoder, const labeled_head& head,
                                 const dataio::dataset& external, const label_map& map, double threshold = 0.5);

/// Report of the encoder + head on one dataset, with no training.
evalkit::metrics_report evaluate(simsiam::simsiam_model& encoder, const labeled_head& head,
                                 const dataio::dataset& data, double threshold = 0.5);

struct sweep_row {
  augment::aug_kind aug1 = augment::aug_kind::identity;
  augment::aug_kind aug2 = augment::aug_kind::identity;
  evalkit::metrics_report report;
  bool collapsed = false;
  /// Set when the cell failed; the report is then empty.
  std::optional<std::string> error;

  std::string name() const;
};

struct sweep_config {
  pretrain_config pretrain;
  probe_config probe;
  /// Worker threads; 0 means hardware concurrency.
  std::size_t threads = 1;
};

/**
 * Every ordered pair (t1, t2) of `pool` trained with single_branch_compose
 * and probed on `validation`. Pairs with the same effective pipeline (after
 * dropping identity) share one run. Rows are sorted by descending macro AUROC.
 */
std::vector<sweep_row> sweep_pairwise(const std::vector<augment::aug_kind>& pool, const sweep_config& config,
                                      const dataio::dataset& train, const dataio::dataset& validation);

/// Row order: failed cells last, then descending macro AUROC, ascending ranking error, name.
bool sweep_order(const sweep_row& a, const sweep_row& b);

/// Argmax of macro AUROC; ties go to lower ranking error, then the lexicographically smaller name.
const sweep_row& select_t_theta(const std::vector<sweep_row>& rows);

/// Policy for a selected pair: branch 1 identity, branch 2 aug2 after aug1.
augment::view_policy policy_for(const sweep_row& row);

/// t_theta for symmetric dual-branch training, with the weaker crop scale [0.3, 0.9].
augment::view_policy dual_symmetric_t_theta(const sweep_row& row);

struct efficiency_point {
  double fraction = 0.0;
  std::size_t train_size = 0;
  std::vector<std::pair<std::string, evalkit::metrics_report>> reports;
};

/// One fine-tune per nested stratified fraction of `train`, each from the same checkpoints.
std::vector<efficiency_point> data_efficiency(const std::filesystem::path& encoder_checkpoint,
                                              const std::filesystem::path& head_checkpoint,
                                              const dataio::dataset& train, const std::vector<double>& fractions,
                                              const eval_sets& evals, const finetune_config& config,
                                              std::uint64_t split_seed);

/// Checkpoint layout: `model.json` plus a tensors/ directory.
void save_model(const std::filesystem::path& dir, const simsiam::simsiam_model& model);
std::unique_ptr<simsiam::simsiam_model> load_model(const std::filesystem::path& dir);

/// Head layout: `head.json` (feature_dim, label names) plus a tensors/ directory.
void save_head(const std::filesystem::path& dir, const labeled_head& head);
labeled_head load_head(const std::filesystem::path& dir);

/// [N, 1, H, W] batch of the selected images.
simsiam::tensor image_batch(const dataio::dataset& data, const std::vector<std::size_t>& indices);
simsiam::tensor image_batch(const std::vector<augment::image>& images);

/// [N, feature_dim] frozen features, computed in eval mode without gradients.
simsiam::tensor extract_features(simsiam::simsiam_model& encoder, const dataio::dataset& data,
                                 std::size_t batch_size = 256);

}  // namespace siamgrid::protocols
