#include "siamgrid/protocols/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include "siamgrid/augment/rng.hpp"
#include "siamgrid/dataio/batching.hpp"
#include "siamgrid/dataio/splits.hpp"
#include "siamgrid/diffcore/ops.hpp"
#include "siamgrid/errors.hpp"
#include "siamgrid/optim/sgd.hpp"

namespace siamgrid::protocols {

namespace fs = std::filesystem;
using json = nlohmann::json;
using augment::derive_seed;
using diffcore::no_grad_guard;
using simsiam::simsiam_model;
using simsiam::tensor;

namespace {

// Substream keys below the run seed.
enum stream : std::uint64_t { k_init = 1, k_order = 2, k_head_init = 3, k_head_order = 4 };

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

optim::cosine_schedule schedule_for(const optim_settings& s) {
  optim::cosine_schedule c;
  c.base_lr = optim::scaled_lr(s.base_lr, s.batch_size);
  c.min_lr = 0.0;
  c.total_steps = std::max<std::size_t>(1, s.epochs);
  return c;
}

optim::sgd_state sgd_for(const optim_settings& s) {
  optim::sgd_state st;
  st.momentum = s.momentum;
  st.weight_decay = s.weight_decay;
  return st;
}

void check_settings(const optim_settings& s, const char* what) {
  if (s.batch_size < 2) throw contract_error(std::string(what) + ": batch_size must be >= 2");
  if (!(s.base_lr >= 0.0) || !(s.weight_decay >= 0.0) || !(s.momentum >= 0.0 && s.momentum < 1.0)) {
    throw contract_error(std::string(what) + ": invalid optimizer settings");
  }
}

// Batches of one epoch; a trailing batch of one sample is dropped because
// batch statistics are undefined for it.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch) {
  auto batches = dataio::batch_iter(n, std::min(batch_size, n), seed, epoch);
  if (!batches.empty() && batches.back().size() < 2) batches.pop_back();
  return batches;
}

// Targets and mask for masked BCE; NA cells get mask 0.
std::pair<tensor, tensor> label_tensors(const dataio::dataset& data, const std::vector<std::size_t>& indices) {
  const std::size_t k = data.label_names.size();
  std::vector<float> y(indices.size() * k), m(indices.size() * k);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& labels = data.items[indices[r]].labels;
    for (std::size_t j = 0; j < k; ++j) {
      const bool known = labels[j] != dataio::label_na;
      y[r * k + j] = known && labels[j] == 1 ? 1.0f : 0.0f;
      m[r * k + j] = known ? 1.0f : 0.0f;
    }
  }
  return {tensor({indices.size(), k}, std::move(y)), tensor({indices.size(), k}, std::move(m))};
}

tensor gather_rows(const tensor& x, const std::vector<std::size_t>& rows) {
  const std::size_t d = x.dim(1);
  std::vector<float> out(rows.size() * d);
  const auto src = x.data();
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy_n(src.data() + rows[r] * d, d, out.data() + r * d);
  return tensor({rows.size(), d}, std::move(out));
}

void check_labels(const std::vector<std::string>& expected, const dataio::dataset& data, const char* what) {
  if (data.label_names != expected) {
    throw contract_error(std::string(what) + ": dataset labels do not match the head's labels");
  }
}

std::vector<diffcore::parameter> encoder_parameters(const simsiam_model& model) {
  std::vector<diffcore::parameter> out;
  for (const auto& p : model.registry().parameters())
    if (p.name.rfind("encoder.", 0) == 0) out.push_back(p);
  return out;
}

// Joint training of encoder and head on un-augmented images.
std::vector<epoch_log> train_jointly(simsiam_model& model, labeled_head& head, const dataio::dataset& train,
                                     const optim_settings& settings, std::uint64_t seed) {
  check_labels(head.label_names, train, "supervised training");
  auto params = encoder_parameters(model);
  for (const auto& p : head.head->registry().parameters()) params.push_back(p);
  for (auto& p : params) p.value.set_requires_grad(true);
  auto state = sgd_for(settings);
  const auto schedule = schedule_for(settings);
  std::vector<epoch_log> logs;
  model.set_mode(diffcore::norm_mode::train);
  for (std::size_t e = 0; e < settings.epochs; ++e) {
    const double lr = optim::cosine_lr(schedule, static_cast<double>(e));
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& batch : epoch_batches(train.size(), settings.batch_size, derive_seed(seed, {k_order}), e)) {
      diffcore::tape::current().clear();
      for (auto& p : params) p.value.clear_grad();
      const auto [y, m] = label_tensors(train, batch);
      const tensor loss = diffcore::bce_with_logits(head.head->logits(model.features(image_batch(train, batch))), y, m);
      diffcore::backward(loss);
      optim::sgd_step(params, state, lr);
      loss_sum += loss.item();
      ++steps;
    }
    logs.push_back({e, steps ? loss_sum / static_cast<double>(steps) : 0.0, 0.0, lr});
  }
  model.set_mode(diffcore::norm_mode::eval);
  return logs;
}

evalkit::metrics_report report_from_features(const tensor& features, const labeled_head& head,
                                             const dataio::dataset& data, double threshold) {
  evalkit::prediction_set preds;
  preds.label_names = head.label_names;
  preds.dataset_tag = data.items.empty() ? std::string() : data.items.front().dataset_tag;
  tensor logits;
  {
    no_grad_guard guard;
    logits = head.head->logits(features);
  }
  const tensor probs = diffcore::sigmoid(logits);
  const std::size_t k = head.label_names.size();
  const auto p = probs.data();
  preds.scores.resize(data.size());
  preds.labels.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    preds.scores[i].assign(p.begin() + static_cast<std::ptrdiff_t>(i * k),
                           p.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
    preds.labels[i].assign(data.items[i].labels.begin(), data.items[i].labels.end());
  }
  return evalkit::report_build(preds, threshold);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Pipeline text of branch 2 without identity steps; the sweep runs each distinct value once.
std::string effective_key(augment::aug_kind t1, augment::aug_kind t2) {
  augment::pipeline p;
  for (auto k : {t1, t2})
    if (k != augment::aug_kind::identity) p.push_back(augment::default_spec(k));
  return p.empty() ? std::string("identity") : augment::format_pipeline(p);
}

json epoch_json(const epoch_log& e) {
  return {{"epoch", e.epoch}, {"loss", e.loss}, {"collapse_metric", e.collapse_metric}, {"lr", e.lr}};
}

}  // namespace

std::string_view to_string(phase p) {
  switch (p) {
    case phase::pretrain: return "pretrain";
    case phase::probe: return "probe";
    case phase::finetune: return "finetune";
    case phase::supervised: return "supervised";
    case phase::eval: return "eval";
  }
  return "unknown";
}

std::optional<phase> phase_from_string(std::string_view name) {
  for (auto p : {phase::pretrain, phase::probe, phase::finetune, phase::supervised, phase::eval})
    if (to_string(p) == name) return p;
  return std::nullopt;
}

optim_settings default_pretrain(bool final_budget) {
  return {0.05, 1e-4, 0.9, 256, final_budget ? std::size_t{100} : std::size_t{50}};
}

optim_settings default_probe(bool final_budget) {
  return {30.0, 0.0, 0.9, 256, final_budget ? std::size_t{90} : std::size_t{40}};
}

optim_settings default_finetune(bool small_external) {
  return {1e-5, 1e-4, 0.9, 256, small_external ? std::size_t{150} : std::size_t{90}};
}

optim_settings default_supervised(bool small_external) {
  return {0.05, 1e-4, 0.9, 256, small_external ? std::size_t{150} : std::size_t{90}};
}

double collapse_threshold(std::size_t proj_dim) { return 0.05 / std::sqrt(static_cast<double>(proj_dim)); }

std::string to_json_line(const run_record& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) epochs.push_back(epoch_json(e));
  json reports = json::object();
  for (const auto& [name, rep] : r.reports) reports[name] = json::parse(evalkit::to_json_line(rep));
  json j = {{"phase", r.phase},     {"fingerprint", r.fingerprint}, {"label", r.label},
            {"epochs", epochs},     {"collapsed", r.collapsed},     {"reports", reports},
            {"parents", r.parents}, {"checkpoints", r.checkpoints}, {"wall_seconds", r.wall_seconds}};
  return j.dump();
}

run_record parse_run_record(const std::string& line) {
  try {
    const auto j = json::parse(line);
    run_record r;
    r.phase = j.at("phase").get<std::string>();
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.label = j.at("label").get<std::string>();
    for (const auto& e : j.at("epochs")) {
      r.epochs.push_back({e.at("epoch").get<std::size_t>(), e.at("loss").get<double>(),
                          e.at("collapse_metric").get<double>(), e.at("lr").get<double>()});
    }
    r.collapsed = j.at("collapsed").get<bool>();
    for (const auto& [name, rep] : j.at("reports").items()) r.reports[name] = evalkit::parse_report_line(rep.dump());
    r.parents = j.at("parents").get<std::map<std::string, std::string>>();
    r.checkpoints = j.at("checkpoints").get<std::vector<std::string>>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw schema_error(std::string("malformed run record: ") + e.what());
  }
}

tensor image_batch(const std::vector<augment::image>& images) {
  if (images.empty()) throw contract_error("image_batch: no images");
  const std::size_t h = images.front().height, w = images.front().width;
  std::vector<float> data(images.size() * h * w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height != h || images[i].width != w) throw dimension_error("image_batch: image sizes differ");
    std::copy(images[i].pixels.begin(), images[i].pixels.end(), data.begin() + static_cast<std::ptrdiff_t>(i * h * w));
  }
  return tensor({images.size(), 1, h, w}, std::move(data));
}

tensor image_batch(const dataio::dataset& data, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw contract_error("image_batch: no images");
  const auto& first = data.items.at(indices.front()).image;
  const std::size_t h = first.height, w = first.width;
  std::vector<float> out(indices.size() * h * w);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& img = data.items.at(indices[i]).image;
    if (img.height != h || img.width != w) throw dimension_error("image_batch: image sizes differ");
    std::copy(img.pixels.begin(), img.pixels.end(), out.begin() + static_cast<std::ptrdiff_t>(i * h * w));
  }
  return tensor({indices.size(), 1, h, w}, std::move(out));
}

tensor extract_features(simsiam_model& encoder, const dataio::dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw contract_error("extract_features: empty dataset");
  if (batch_size == 0) throw contract_error("extract_features: batch_size must be >= 1");
  const auto previous = encoder.mode();
  encoder.set_mode(diffcore::norm_mode::eval);
  const std::size_t d = encoder.config().encoder.feature_dim;
  std::vector<float> out(data.size() * d);
  {
    no_grad_guard guard;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
      std::vector<std::size_t> idx;
      for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
      const tensor f = simsiam::encode(encoder, image_batch(data, idx));
      std::copy(f.data().begin(), f.data().end(), out.begin() + static_cast<std::ptrdiff_t>(start * d));
    }
  }
  encoder.set_mode(previous);
  return tensor({data.size(), d}, std::move(out));
}

pretrain_result pretrain(const pretrain_config& config, const dataio::dataset& train) {
  const auto start = std::chrono::steady_clock::now();
  augment::validate(config.policy);
  check_settings(config.optim, "pretrain");
  if (train.size() < 2) throw contract_error("pretrain: need at least two training samples");

  pretrain_result result;
  result.model = std::make_unique<simsiam_model>(config.model, derive_seed(config.seed, {k_init}));
  auto& model = *result.model;
  model.set_mode(diffcore::norm_mode::train);
  const auto params = model.registry().parameters();
  auto state = sgd_for(config.optim);
  const auto schedule = schedule_for(config.optim);
  const std::uint64_t view_seed = config.view_seed.value_or(config.seed);
  const double threshold = collapse_threshold(config.model.proj_dim);

  auto& record = result.record;
  record.phase = "pretrain";
  record.label = augment::policy_label(config.policy);
  std::size_t below = 0;
  for (std::size_t e = 0; e < config.optim.epochs; ++e) {
    const double lr = optim::cosine_lr(schedule, static_cast<double>(e));
    const std::uint64_t epoch_seed = derive_seed(view_seed, {e});
    double loss_sum = 0.0, collapse_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& batch : epoch_batches(train.size(), config.optim.batch_size, derive_seed(config.seed, {k_order}), e)) {
      std::vector<augment::image> v1, v2;
      v1.reserve(batch.size());
      v2.reserve(batch.size());
      for (std::size_t i : batch) {
        auto [a, b] = augment::make_views(train.items[i].image, config.policy, epoch_seed, i);
        v1.push_back(std::move(a));
        v2.push_back(std::move(b));
      }
      diffcore::tape::current().clear();
      model.registry().zero_grad();
      const auto out = simsiam::forward_views(model, image_batch(v1), image_batch(v2));
      const tensor loss = simsiam::simsiam_loss(out.p1, out.p2, out.z1, out.z2);
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value)) throw numeric_error("pretrain: non-finite loss at epoch " + std::to_string(e));
      diffcore::backward(loss);
      optim::sgd_step(params, state, lr);
      loss_sum += loss_value;
      collapse_sum += simsiam::collapse_metric(out.z1);
      ++steps;
    }
    epoch_log log{e, 0.0, 0.0, lr};
    if (steps) {
      log.loss = loss_sum / static_cast<double>(steps);
      log.collapse_metric = collapse_sum / static_cast<double>(steps);
    }
    record.epochs.push_back(log);
    below = log.collapse_metric < threshold ? below + 1 : 0;
    if (below >= collapse_patience) record.collapsed = true;
  }
  model.set_mode(diffcore::norm_mode::eval);
  record.wall_seconds = seconds_since(start);
  return result;
}

evalkit::metrics_report evaluate(simsiam_model& encoder, const labeled_head& head, const dataio::dataset& data,
                                 double threshold) {
  if (!head.head) throw contract_error("evaluate: no classification head");
  check_labels(head.label_names, data, "evaluate");
  if (head.head->feature_dim() != encoder.config().encoder.feature_dim) {
    throw contract_error("evaluate: head expects " + std::to_string(head.head->feature_dim()) +
                         " features, encoder produces " + std::to_string(encoder.config().encoder.feature_dim));
  }
  return report_from_features(extract_features(encoder, data), head, data, threshold);
}

probe_result linear_probe(simsiam_model& encoder, const dataio::dataset& train, const eval_sets& evals,
                          const probe_config& config) {
  const auto start = std::chrono::steady_clock::now();
  check_settings(config.optim, "linear_probe");
  dataio::validate(train);
  if (train.size() < 2) throw contract_error("linear_probe: need at least two training samples");
  const std::size_t d = encoder.config().encoder.feature_dim;

  probe_result result;
  result.record.phase = "probe";
  result.head.label_names = train.label_names;
  result.head.head =
      std::make_unique<simsiam::probe_head>(d, train.label_names.size(), derive_seed(config.seed, {k_head_init}));
  auto& head = *result.head.head;
  const tensor features = extract_features(encoder, train);

  const auto params = head.registry().parameters();
  auto state = sgd_for(config.optim);
  const auto schedule = schedule_for(config.optim);
  for (std::size_t e = 0; e < config.optim.epochs; ++e) {
    const double lr = optim::cosine_lr(schedule, static_cast<double>(e));
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& batch :
         epoch_batches(train.size(), config.optim.batch_size, derive_seed(config.seed, {k_head_order}), e)) {
      diffcore::tape::current().clear();
      head.registry().zero_grad();
      const auto [y, m] = label_tensors(train, batch);
      const tensor loss = diffcore::bce_with_logits(head.logits(gather_rows(features, batch)), y, m);
      diffcore::backward(loss);
      optim::sgd_step(params, state, lr);
      loss_sum += loss.item();
      ++steps;
    }
    result.record.epochs.push_back({e, steps ? loss_sum / static_cast<double>(steps) : 0.0, 0.0, lr});
  }
  for (const auto& [name, data] : evals) result.record.reports[name] = evaluate(encoder, result.head, *data, config.threshold);
  result.record.wall_seconds = seconds_since(start);
  return result;
}

run_record fine_tune(simsiam_model& model, labeled_head& head, const dataio::dataset& train, const eval_sets& evals,
                     const finetune_config& config) {
  const auto start = std::chrono::steady_clock::now();
  if (!head.head) throw contract_error("fine_tune: a pretrained classification head is required");
  check_settings(config.optim, "fine_tune");
  if (head.head->feature_dim() != model.config().encoder.feature_dim) {
    throw contract_error("fine_tune: head and encoder feature dimensions differ");
  }
  run_record record;
  record.phase = "finetune";
  record.epochs = train_jointly(model, head, train, config.optim, config.seed);
  for (const auto& [name, data] : evals) record.reports[name] = evaluate(model, head, *data, config.threshold);
  record.wall_seconds = seconds_since(start);
  return record;
}

supervised_result supervised_baseline(const simsiam::model_config& model_config, init_kind init,
                                      const fs::path& init_checkpoint, const dataio::dataset& train,
                                      const eval_sets& evals, const finetune_config& config) {
  const auto start = std::chrono::steady_clock::now();
  check_settings(config.optim, "supervised_baseline");
  supervised_result result;
  if (init == init_kind::checkpoint) {
    result.model = load_model(init_checkpoint);
  } else {
    result.model = std::make_unique<simsiam_model>(model_config, derive_seed(config.seed, {k_init}));
  }
  result.head.label_names = train.label_names;
  result.head.head = std::make_unique<simsiam::probe_head>(result.model->config().encoder.feature_dim,
                                                           train.label_names.size(),
                                                           derive_seed(config.seed, {k_head_init}));
  result.record.phase = "supervised";
  result.record.label = init == init_kind::scratch ? "scratch" : "checkpoint";
  result.record.epochs = train_jointly(*result.model, result.head, train, config.optim, config.seed);
  for (const auto& [name, data] : evals) {
    result.record.reports[name] = evaluate(*result.model, result.head, *data, config.threshold);
  }
  result.record.wall_seconds = seconds_since(start);
  return result;
}

zero_shot_result zero_shot_eval(simsiam_model& encoder, const labeled_head& head, const dataio::dataset& external,
                                const label_map& map, double threshold) {
  if (!head.head) throw contract_error("zero_shot_eval: no classification head");
  if (map.empty()) throw contract_error("zero_shot_eval: empty label map");
  std::vector<std::size_t> source_col, target_col;
  for (const auto& [src, tgt] : map) {
    const auto s = std::find(head.label_names.begin(), head.label_names.end(), src);
    if (s == head.label_names.end()) throw contract_error("zero_shot_eval: head has no label '" + src + "'");
    const auto t = std::find(external.label_names.begin(), external.label_names.end(), tgt);
    if (t == external.label_names.end()) throw contract_error("zero_shot_eval: dataset has no label '" + tgt + "'");
    const auto si = static_cast<std::size_t>(s - head.label_names.begin());
    const auto ti = static_cast<std::size_t>(t - external.label_names.begin());
    if (std::find(source_col.begin(), source_col.end(), si) != source_col.end() ||
        std::find(target_col.begin(), target_col.end(), ti) != target_col.end()) {
      throw contract_error("zero_shot_eval: label map must be injective");
    }
    source_col.push_back(si);
    target_col.push_back(ti);
  }

  const tensor features = extract_features(encoder, external);
  tensor logits;
  {
    no_grad_guard guard;
    logits = head.head->logits(features);
  }
  const tensor probs = diffcore::sigmoid(logits);
  const std::size_t k = head.label_names.size();
  const auto p = probs.data();

  evalkit::prediction_set preds;
  preds.dataset_tag = external.items.empty() ? std::string() : external.items.front().dataset_tag;
  for (const auto& [src, tgt] : map) preds.label_names.push_back(tgt);
  preds.scores.resize(external.size());
  preds.labels.resize(external.size());
  for (std::size_t i = 0; i < external.size(); ++i) {
    for (std::size_t c = 0; c < map.size(); ++c) {
      preds.scores[i].push_back(p[i * k + source_col[c]]);
      preds.labels[i].push_back(external.items[i].labels[target_col[c]]);
    }
  }
  zero_shot_result result;
  result.report = evalkit::report_build(preds, threshold);
  for (std::size_t j = 0; j < external.label_names.size(); ++j) {
    if (std::find(target_col.begin(), target_col.end(), j) == target_col.end()) {
      result.unmapped_labels.push_back(external.label_names[j]);
    }
  }
  return result;
}

bool sweep_order(const sweep_row& a, const sweep_row& b) {
  if (a.error.has_value() != b.error.has_value()) return !a.error.has_value();
  if (!a.error) {
    if (a.report.macro_auroc != b.report.macro_auroc) return a.report.macro_auroc > b.report.macro_auroc;
    if (a.report.ranking_error != b.report.ranking_error) return a.report.ranking_error < b.report.ranking_error;
  }
  return a.name() < b.name();
}

std::string sweep_row::name() const {
  return std::string(augment::to_string(aug1)) + "+" + std::string(augment::to_string(aug2));
}

augment::view_policy policy_for(const sweep_row& row) {
  return augment::single_branch_compose(augment::default_spec(row.aug1), augment::default_spec(row.aug2));
}

augment::view_policy dual_symmetric_t_theta(const sweep_row& row) {
  augment::pipeline specs;
  for (auto k : {row.aug1, row.aug2}) {
    auto spec = augment::default_spec(k);
    if (k == augment::aug_kind::crop_resize) spec.scale = {0.3, 0.9};
    specs.push_back(spec);
  }
  return augment::dual_symmetric(specs);
}

std::vector<sweep_row> sweep_pairwise(const std::vector<augment::aug_kind>& pool, const sweep_config& config,
                                      const dataio::dataset& train, const dataio::dataset& validation) {
  if (pool.empty()) throw contract_error("sweep_pairwise: empty augmentation pool");
  std::vector<sweep_row> rows;
  std::vector<std::string> keys;
  for (auto t1 : pool) {
    for (auto t2 : pool) {
      sweep_row row;
      row.aug1 = t1;
      row.aug2 = t2;
      if (std::any_of(rows.begin(), rows.end(), [&](const sweep_row& r) { return r.aug1 == t1 && r.aug2 == t2; })) {
        continue;
      }
      rows.push_back(row);
      keys.push_back(effective_key(t1, t2));
    }
  }
  // One job per distinct effective pipeline, represented by its first row.
  std::vector<std::size_t> jobs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (std::find(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(i), keys[i]) ==
        keys.begin() + static_cast<std::ptrdiff_t>(i)) {
      jobs.push_back(i);
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      auto& row = rows[jobs[j]];
      try {
        pretrain_config pc = config.pretrain;
        pc.policy = policy_for(row);
        pc.view_seed = derive_seed(config.pretrain.view_seed.value_or(config.pretrain.seed), {fnv1a(keys[jobs[j]])});
        auto pre = pretrain(pc, train);
        auto probe = linear_probe(*pre.model, train, {{"validation", &validation}}, config.probe);
        row.report = probe.record.reports.at("validation");
        row.collapsed = pre.record.collapsed;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool_threads;
    for (std::size_t t = 0; t < threads; ++t) pool_threads.emplace_back(worker);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j : jobs) {
      if (keys[j] == keys[i] && j != i) {
        rows[i].report = rows[j].report;
        rows[i].collapsed = rows[j].collapsed;
        rows[i].error = rows[j].error;
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(), sweep_order);
  return rows;
}

const sweep_row& select_t_theta(const std::vector<sweep_row>& rows) {
  const sweep_row* best = nullptr;
  for (const auto& row : rows) {
    if (row.error) continue;
    if (!best || sweep_order(row, *best)) best = &row;
  }
  if (!best) throw contract_error("select_t_theta: no successful sweep rows");
  return *best;
}

std::vector<efficiency_point> data_efficiency(const fs::path& encoder_checkpoint, const fs::path& head_checkpoint,
                                              const dataio::dataset& train, const std::vector<double>& fractions,
                                              const eval_sets& evals, const finetune_config& config,
                                              std::uint64_t split_seed) {
  const auto splits = dataio::stratified_indices(train.label_matrix(), fractions, split_seed);
  const auto all_ids = train.ids();
  std::vector<efficiency_point> curve;
  for (double f : fractions) {
    const auto& idx = splits.at(f);
    std::vector<std::string> ids;
    ids.reserve(idx.size());
    for (std::size_t i : idx) ids.push_back(all_ids[i]);
    const auto subset = train.select(ids);
    auto model = load_model(encoder_checkpoint);
    auto head = load_head(head_checkpoint);
    const auto record = fine_tune(*model, head, subset, evals, config);
    efficiency_point point;
    point.fraction = f;
    point.train_size = subset.size();
    for (const auto& [name, data] : evals) point.reports.emplace_back(name, record.reports.at(name));
    curve.push_back(std::move(point));
  }
  return curve;
}

void save_model(const fs::path& dir, const simsiam_model& model) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  diffcore::save_registry(model.registry(), dir / "tensors");
  simsiam::write_model_manifest(dir / "model.json", model.config());
}

std::unique_ptr<simsiam_model> load_model(const fs::path& dir) {
  if (!fs::exists(dir / "model.json")) throw dependency_error("no encoder checkpoint at " + dir.string());
  auto model = std::make_unique<simsiam_model>(simsiam::read_model_manifest(dir / "model.json"), 0);
  diffcore::restore_registry(model->registry(), dir / "tensors");
  model->set_mode(diffcore::norm_mode::eval);
  return model;
}

void save_head(const fs::path& dir, const labeled_head& head) {
  if (!head.head) throw contract_error("save_head: no head");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  diffcore::save_registry(head.head->registry(), dir / "tensors");
  std::ofstream out(dir / "head.json", std::ios::trunc);
  if (!out) throw io_error("cannot write head manifest in " + dir.string());
  out << json{{"feature_dim", head.head->feature_dim()}, {"label_names", head.label_names}}.dump(2) << '\n';
}

labeled_head load_head(const fs::path& dir) {
  std::ifstream in(dir / "head.json");
  if (!in) throw dependency_error("no head checkpoint at " + dir.string());
  labeled_head head;
  try {
    const auto j = json::parse(in);
    head.label_names = j.at("label_names").get<std::vector<std::string>>();
    head.head = std::make_unique<simsiam::probe_head>(j.at("feature_dim").get<std::size_t>(), head.label_names.size(), 0);
  } catch (const json::exception& e) {
    throw schema_error("malformed head manifest in " + dir.string() + ": " + e.what());
  }
  diffcore::restore_registry(head.head->registry(), dir / "tensors");
  return head;
}

}  // namespace siamgrid::protocols
