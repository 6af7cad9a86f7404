#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "op_checks.hpp"
#include "siamgrid/dataio/splits.hpp"
#include "siamgrid/dataio/synth.hpp"
#include "siamgrid/errors.hpp"
#include "siamgrid/protocols/protocols.hpp"

using namespace siamgrid;
using namespace siamgrid::protocols;
namespace fs = std::filesystem;

namespace {

dataio::dataset small_data(std::size_t n, std::uint64_t first, double difficulty = 0.8) {
  dataio::synthetic_config c;
  c.n_samples = n;
  c.image_size = 16;
  c.first_index = first;
  c.difficulty = difficulty;
  c.seed = 3;
  return dataio::synth_generate(c);
}

pretrain_config small_pretrain(augment::view_policy policy = augment::dual_symmetric({augment::default_spec(
                                   augment::aug_kind::identity)})) {
  pretrain_config pc;
  pc.model = testing::tiny_model_config();
  pc.policy = std::move(policy);
  pc.optim = {0.05, 1e-4, 0.9, 32, 1};
  pc.seed = 1;
  return pc;
}

probe_config small_probe(std::size_t epochs = 5) {
  probe_config c;
  c.optim = {30.0, 0.0, 0.9, 32, epochs};
  c.seed = 2;
  return c;
}

std::vector<std::vector<float>> snapshot(const simsiam::simsiam_model& m) {
  std::vector<std::vector<float>> out;
  for (const auto& p : m.registry().parameters()) out.emplace_back(p.value.data().begin(), p.value.data().end());
  for (const auto& p : m.registry().buffers()) out.emplace_back(p.value.data().begin(), p.value.data().end());
  return out;
}

struct temp_dir {
  fs::path path;
  explicit temp_dir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~temp_dir() { fs::remove_all(path); }
};

sweep_row fake_row(augment::aug_kind a, augment::aug_kind b, double auroc, double rank) {
  sweep_row r;
  r.aug1 = a;
  r.aug2 = b;
  r.report.macro_auroc = auroc;
  r.report.ranking_error = rank;
  return r;
}

}  // namespace

TEST_CASE("phase defaults follow the published epoch budgets") {
  CHECK(default_pretrain(false).epochs == 50);
  CHECK(default_probe(false).epochs == 40);
  CHECK(default_pretrain(true).epochs == 100);
  CHECK(default_probe(true).epochs == 90);
  CHECK(default_finetune(false).epochs == 90);
  CHECK(default_finetune(true).epochs == 150);
  CHECK(default_supervised(true).epochs == 150);
  CHECK(default_probe().base_lr == 30.0);
  CHECK(default_probe().weight_decay == 0.0);
  CHECK(default_finetune().base_lr == 1e-5);
  CHECK(collapse_threshold(64) == doctest::Approx(0.05 / 8.0));
}

TEST_CASE("pretraining is deterministic and checkpoints round-trip") {
  const auto train = small_data(64, 0);
  const auto a = pretrain(small_pretrain(), train);
  const auto b = pretrain(small_pretrain(), train);
  REQUIRE(a.record.epochs.size() == 1);
  CHECK(a.record.epochs[0].loss == b.record.epochs[0].loss);
  CHECK(std::isfinite(a.record.epochs[0].loss));
  CHECK(a.record.epochs[0].loss > -1.0);

  temp_dir dir("siamgrid_proto_ckpt");
  save_model(dir.path / "enc", *a.model);
  auto loaded = load_model(dir.path / "enc");
  CHECK(loaded->config() == a.model->config());
  const auto f1 = extract_features(*a.model, train), f2 = extract_features(*loaded, train);
  CHECK(std::equal(f1.data().begin(), f1.data().end(), f2.data().begin()));
}

TEST_CASE("linear probe leaves the encoder bit-identical") {
  const auto train = small_data(64, 0), eval = small_data(48, 1000);
  auto pre = pretrain(small_pretrain(), train);
  const auto before = snapshot(*pre.model);
  const auto probe = linear_probe(*pre.model, train, {{"eval", &eval}}, small_probe());
  CHECK(snapshot(*pre.model) == before);
  CHECK(probe.record.reports.count("eval") == 1);
  CHECK(std::isfinite(probe.record.reports.at("eval").macro_auroc));

  // A feature-dimension mismatch is rejected.
  auto other = small_pretrain();
  other.model.encoder.stage_widths = {4, 4};
  other.model.encoder.feature_dim = 4;
  auto narrow = pretrain(other, train);
  CHECK_THROWS_AS(evaluate(*narrow.model, probe.head, eval), contract_error);
}

TEST_CASE("probe on a frozen random encoder separates easy synthetic labels") {
  const auto train = small_data(400, 0, 1.0), eval = small_data(200, 5000, 1.0);
  simsiam::simsiam_model random(testing::tiny_model_config(), 11);
  const auto probe = linear_probe(random, train, {{"eval", &eval}}, small_probe(30));
  CHECK(probe.record.reports.at("eval").macro_auroc > 0.5);
}

TEST_CASE("zero-epoch fine-tune reproduces the probe metrics exactly") {
  const auto train = small_data(64, 0), eval = small_data(48, 1000);
  auto pre = pretrain(small_pretrain(), train);
  auto probe = linear_probe(*pre.model, train, {{"eval", &eval}}, small_probe());
  finetune_config fc;
  fc.optim.epochs = 0;
  fc.optim.batch_size = 32;
  const auto rec = fine_tune(*pre.model, probe.head, train, {{"eval", &eval}}, fc);
  CHECK(rec.reports.at("eval") == probe.record.reports.at("eval"));

  labeled_head empty;
  CHECK_THROWS_AS(fine_tune(*pre.model, empty, train, {{"eval", &eval}}, fc), contract_error);
}

TEST_CASE("zero-shot evaluation restricts to mapped labels") {
  const auto train = small_data(64, 0), eval = small_data(48, 1000);
  auto pre = pretrain(small_pretrain(), train);
  auto probe = linear_probe(*pre.model, train, {{"eval", &eval}}, small_probe());
  label_map identity;
  for (const auto& n : train.label_names) identity.emplace_back(n, n);
  const auto self = zero_shot_eval(*pre.model, probe.head, eval, identity);
  CHECK(self.report.macro_auroc == probe.record.reports.at("eval").macro_auroc);
  CHECK(self.report.per_label_auroc == probe.record.reports.at("eval").per_label_auroc);
  CHECK(self.unmapped_labels.empty());

  const label_map partial{{train.label_names[0], train.label_names[0]}, {train.label_names[2], train.label_names[2]}};
  const auto two = zero_shot_eval(*pre.model, probe.head, eval, partial);
  CHECK(two.report.per_label_auroc.size() == 2);
  CHECK(two.unmapped_labels.size() == 2);

  dataio::synthetic_config sc;
  sc.n_samples = 48;
  sc.image_size = 16;
  sc.seed = 3;
  sc.first_index = 2000;
  const auto shifted = dataio::synth_generate(dataio::shifted(sc, {0.5, 0.2, 0.4, 0.1}, 0.05));
  const auto moved = zero_shot_eval(*pre.model, probe.head, shifted, identity);
  CHECK(std::isfinite(moved.report.macro_auroc));
  CHECK(std::isfinite(moved.report.hamming_loss));

  CHECK_THROWS_AS(zero_shot_eval(*pre.model, probe.head, eval, {}), contract_error);
  const label_map not_injective{{train.label_names[0], train.label_names[1]}, {train.label_names[2], train.label_names[1]}};
  CHECK_THROWS_AS(zero_shot_eval(*pre.model, probe.head, eval, not_injective), contract_error);
}

TEST_CASE("catastrophic-forgetting chain runs end to end") {
  const auto a_train = small_data(64, 0), a_eval = small_data(48, 1000);
  dataio::synthetic_config sb;
  sb.n_samples = 64;
  sb.image_size = 16;
  sb.seed = 9;
  sb.dataset_tag = "external";
  const auto b_train = dataio::synth_generate(dataio::shifted(sb, {0.4, 0.4, 0.2, 0.2}, 0.02));
  auto pre = pretrain(small_pretrain(), a_train);
  auto probe = linear_probe(*pre.model, a_train, {{"a", &a_eval}}, small_probe());
  finetune_config fc;
  fc.optim = {1e-5, 1e-4, 0.9, 32, 1};
  const auto ft = fine_tune(*pre.model, probe.head, b_train, {{"b", &b_train}}, fc);
  CHECK(std::isfinite(ft.reports.at("b").macro_auroc));
  label_map identity;
  for (const auto& n : a_train.label_names) identity.emplace_back(n, n);
  const auto back = zero_shot_eval(*pre.model, probe.head, a_eval, identity);
  CHECK(std::isfinite(back.report.macro_auroc));
}

TEST_CASE("supervised baseline trains from scratch and from a checkpoint") {
  const auto train = small_data(64, 0), eval = small_data(48, 1000);
  finetune_config fc;
  fc.optim = {0.05, 1e-4, 0.9, 32, 1};
  const auto scratch = supervised_baseline(testing::tiny_model_config(), init_kind::scratch, {}, train,
                                           {{"eval", &eval}}, fc);
  CHECK(scratch.record.epochs.size() == 1);
  CHECK(std::isfinite(scratch.record.reports.at("eval").macro_auroc));

  temp_dir dir("siamgrid_proto_sup");
  save_model(dir.path / "enc", *scratch.model);
  const auto warm = supervised_baseline(testing::tiny_model_config(), init_kind::checkpoint, dir.path / "enc", train,
                                        {{"eval", &eval}}, fc);
  CHECK(warm.record.label == "checkpoint");
  CHECK_THROWS(supervised_baseline(testing::tiny_model_config(), init_kind::checkpoint, dir.path / "missing", train,
                                   {{"eval", &eval}}, fc));
}

TEST_CASE("pairwise sweep enumerates every ordered pair") {
  const auto train = small_data(48, 0), val = small_data(32, 1000);
  sweep_config sc;
  sc.pretrain = small_pretrain();
  sc.probe = small_probe(2);
  const auto single = sweep_pairwise({augment::aug_kind::identity}, sc, train, val);
  REQUIRE(single.size() == 1);
  CHECK(single[0].name() == "identity+identity");

  const std::vector<augment::aug_kind> pool{augment::aug_kind::identity, augment::aug_kind::crop_resize,
                                            augment::aug_kind::distort};
  const auto rows = sweep_pairwise(pool, sc, train, val);
  REQUIRE(rows.size() == 9);
  std::set<std::string> names;
  for (const auto& r : rows) {
    names.insert(r.name());
    CHECK_FALSE(r.error.has_value());
  }
  CHECK(names.size() == 9);
  CHECK(std::is_sorted(rows.begin(), rows.end(), sweep_order));
  // identity+crop_resize and crop_resize+identity are the same pipeline.
  auto find = [&](const std::string& n) {
    return *std::find_if(rows.begin(), rows.end(), [&](const sweep_row& r) { return r.name() == n; });
  };
  CHECK(find("identity+crop_resize").report == find("crop_resize+identity").report);
}

TEST_CASE("t_theta selection") {
  using augment::aug_kind;
  std::vector<sweep_row> rows{fake_row(aug_kind::identity, aug_kind::identity, 0.668, 0.2),
                              fake_row(aug_kind::crop_resize, aug_kind::distort, 0.761, 0.174),
                              fake_row(aug_kind::blur, aug_kind::cutout, 0.70, 0.18)};
  CHECK(select_t_theta({rows[0]}).name() == "identity+identity");
  CHECK(select_t_theta(rows).name() == "crop_resize+distort");
  auto scaled = rows;
  for (auto& r : scaled) r.report.macro_auroc *= 0.37;
  CHECK(select_t_theta(scaled).name() == "crop_resize+distort");

  // Ties go to lower ranking error, then to the smaller name.
  auto tied = rows;
  tied[2].report.macro_auroc = 0.761;
  tied[2].report.ranking_error = 0.1;
  CHECK(select_t_theta(tied).name() == "blur+cutout");
  tied[2].report.ranking_error = 0.174;
  CHECK(select_t_theta(tied).name() == "blur+cutout");

  auto failed = rows;
  failed[1].error = "diverged";
  CHECK(select_t_theta(failed).name() == "blur+cutout");
  for (auto& r : failed) r.error = "x";
  CHECK_THROWS_AS(select_t_theta(failed), contract_error);

  const auto policy = policy_for(rows[1]);
  CHECK(policy.mode == augment::policy_mode::single_branch_compose);
  CHECK(policy.branch2.size() == 2);
  CHECK(policy.branch2[0].kind == aug_kind::crop_resize);
  const auto dual = dual_symmetric_t_theta(rows[1]);
  CHECK(dual.mode == augment::policy_mode::dual_symmetric);
  CHECK(dual.branch1[0].scale == augment::range{0.3, 0.9});
}

TEST_CASE("data efficiency covers every fraction and matches a plain fine-tune at 100%") {
  const auto train = small_data(200, 0), eval = small_data(48, 1000);
  auto pre = pretrain(small_pretrain(), train);
  auto probe = linear_probe(*pre.model, train, {{"eval", &eval}}, small_probe());
  temp_dir dir("siamgrid_proto_eff");
  save_model(dir.path / "enc", *pre.model);
  save_head(dir.path / "head", probe.head);
  finetune_config fc;
  fc.optim = {1e-5, 1e-4, 0.9, 32, 1};
  const auto curve = data_efficiency(dir.path / "enc", dir.path / "head", train, dataio::default_fractions,
                                     {{"eval", &eval}}, fc, 4);
  REQUIRE(curve.size() == 6);
  CHECK(curve.back().fraction == 100.0);
  CHECK(curve.back().train_size == 200);
  CHECK(curve.front().train_size == 2);

  auto model = load_model(dir.path / "enc");
  auto head = load_head(dir.path / "head");
  const auto plain = fine_tune(*model, head, train, {{"eval", &eval}}, fc);
  CHECK(curve.back().reports[0].second == plain.reports.at("eval"));
}

TEST_CASE("run records serialize losslessly") {
  run_record r;
  r.phase = "probe";
  r.fingerprint = "abc123";
  r.label = "crop_resize+distort";
  r.epochs = {{0, -0.5, 0.1, 0.05}, {1, -0.75, 0.09, 0.025}};
  r.collapsed = true;
  r.parents = {{"encoder", "f00"}};
  r.checkpoints = {"head"};
  r.wall_seconds = 1.25;
  evalkit::metrics_report rep;
  rep.macro_auroc = 0.7;
  rep.per_label_auroc = {{"a", 0.7}, {"b", std::nullopt}};
  r.reports["eval"] = rep;
  const auto back = parse_run_record(to_json_line(r));
  CHECK(to_json_line(back) == to_json_line(r));
  CHECK(back.reports.at("eval") == rep);
  CHECK(back.parents == r.parents);
  CHECK(back.collapsed);
}
