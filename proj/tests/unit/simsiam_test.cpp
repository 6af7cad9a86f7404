#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "op_checks.hpp"
#include "siamgrid/errors.hpp"
#include "siamgrid/simsiam/model.hpp"

using namespace siamgrid;
using namespace siamgrid::simsiam;
using diffcore::real;
using diffcore::shape_t;
using testing::random_tensor;

namespace {

// Rows of `base` scaled by per-row positive factors.
tensor scaled_rows(const tensor& base, double factor) {
  std::vector<real> v(base.data().begin(), base.data().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= static_cast<real>(factor * (1.0 + 0.5 * double(i / base.dim(1))));
  return tensor(base.shape(), std::move(v), true);
}

// Rows orthogonal to the rows of `a` (Gram-Schmidt against a random draw).
tensor orthogonal_rows(const tensor& a, augment::seeded_rng& rng) {
  const auto n = a.dim(0), d = a.dim(1);
  std::vector<real> out(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> v(d);
    double dot = 0.0, aa = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      v[j] = rng.uniform(-1, 1);
      dot += v[j] * a.at(r * d + j);
      aa += double(a.at(r * d + j)) * a.at(r * d + j);
    }
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = static_cast<real>(v[j] - dot / aa * a.at(r * d + j));
  }
  return tensor(a.shape(), std::move(out), true);
}

}  // namespace

TEST_CASE("loss of parallel, orthogonal and anti-parallel pairs") {
  augment::seeded_rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto z = random_tensor({6, 16}, rng);
    const auto p_par = scaled_rows(z, 2.0), p_anti = scaled_rows(z, -3.0);
    CHECK(std::abs(simsiam_loss(p_par, p_par, z, z).item() + 1.0) <= 1e-6);
    CHECK(std::abs(simsiam_loss(p_anti, p_anti, z, z).item() - 1.0) <= 1e-6);
    const auto p_orth = orthogonal_rows(z, rng);
    CHECK(std::abs(simsiam_loss(p_orth, p_orth, z, z).item()) <= 1e-6);
  }
}

TEST_CASE("loss is bounded and symmetric under branch swap") {
  augment::seeded_rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p1 = random_tensor({5, 8}, rng), p2 = random_tensor({5, 8}, rng);
    const auto z1 = random_tensor({5, 8}, rng), z2 = random_tensor({5, 8}, rng);
    const double a = simsiam_loss(p1, p2, z1, z2).item();
    const double b = simsiam_loss(p2, p1, z2, z1).item();
    CHECK((a >= -1.0 && a <= 1.0));
    CHECK(std::abs(a - b) <= 1e-6);
  }
}

TEST_CASE("no gradient reaches the stop-gradient targets") {
  augment::seeded_rng rng(3);
  const auto p1 = random_tensor({4, 8}, rng), p2 = random_tensor({4, 8}, rng);
  auto z1 = random_tensor({4, 8}, rng), z2 = random_tensor({4, 8}, rng);
  diffcore::backward(simsiam_loss(p1, p2, z1, z2));
  CHECK(p1.has_grad());
  for (const auto* z : {&z1, &z2}) {
    if (!z->has_grad()) continue;
    for (real g : z->grad()) CHECK(g == real(0));
  }

  // Through the full model: the projector sees gradient only via the predictor branch.
  simsiam_model model(testing::tiny_model_config(), 4);
  const auto x1 = random_tensor({4, 1, 8, 8}, rng, 0, 1, false), x2 = random_tensor({4, 1, 8, 8}, rng, 0, 1, false);
  auto out = forward_views(model, x1, x2);
  diffcore::backward(simsiam_loss(out.p1, out.p2, out.z1, out.z2));
  CHECK(model.registry().find("predictor.layer1.weight").has_grad());
}

TEST_CASE("model shapes, determinism and weight sharing") {
  const auto mc = testing::tiny_model_config();
  simsiam_model a(mc, 7), b(mc, 7), c(mc, 8);
  const auto& pa = a.registry().parameters();
  REQUIRE(pa.size() == b.registry().parameters().size());
  bool any_differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const auto& qa = pa[i].value;
    const auto& qb = b.registry().parameters()[i].value;
    const auto& qc = c.registry().parameters()[i].value;
    CHECK(std::equal(qa.data().begin(), qa.data().end(), qb.data().begin()));
    any_differs = any_differs || !std::equal(qa.data().begin(), qa.data().end(), qc.data().begin());
  }
  CHECK(any_differs);

  augment::seeded_rng rng(5);
  const auto x = random_tensor({3, 1, 8, 8}, rng, 0, 1, false);
  const auto f = a.features(x);
  CHECK(f.shape() == shape_t{3, mc.encoder.feature_dim});
  const auto z = a.project(f);
  CHECK(z.shape() == shape_t{3, mc.proj_dim});
  CHECK(a.predict(z).shape() == shape_t{3, mc.proj_dim});
  diffcore::tape::current().clear();

  // One registry serves both branches.
  const auto out = forward_views(a, x, x);
  CHECK(std::equal(out.z1.data().begin(), out.z1.data().end(), out.z2.data().begin()));
  diffcore::tape::current().clear();
  for (const auto& p : a.encoder_tensors()) CHECK(p.name.rfind("encoder.", 0) == 0);
}

TEST_CASE("encode requires eval mode and records nothing") {
  simsiam_model model(testing::tiny_model_config(), 1);
  augment::seeded_rng rng(6);
  const auto x = random_tensor({2, 1, 8, 8}, rng, 0, 1, false);
  CHECK_THROWS_AS(encode(model, x), contract_error);
  model.set_mode(norm_mode::eval);
  diffcore::tape::current().clear();
  const auto f = encode(model, x);
  CHECK(f.shape() == shape_t{2, 8});
  CHECK(diffcore::tape::current().empty());
}

TEST_CASE("collapse metric") {
  // Identical rows have zero spread.
  tensor same({4, 3}, {real(1), real(2), real(3), real(1), real(2), real(3), real(1), real(2), real(3), real(1),
                       real(2), real(3)});
  CHECK(collapse_metric(same) == doctest::Approx(0.0));
  // Random Gaussian rows spread close to 1 / sqrt(d) per dimension.
  augment::seeded_rng rng(7);
  std::vector<real> v(2000 * 64);
  for (auto& e : v) e = static_cast<real>(rng.normal());
  const double m = collapse_metric(tensor({2000, 64}, v));
  CHECK(m == doctest::Approx(1.0 / 8.0).epsilon(0.05));
}

TEST_CASE("configs validate and round-trip through JSON") {
  const auto mc = testing::tiny_model_config();
  CHECK(model_config_from_json(to_json(mc)) == mc);
  model_config big;
  big.encoder = encoder_config::resnet50();
  big.proj_dim = 2048;
  big.pred_hidden = 512;
  CHECK_NOTHROW(validate(big));
  CHECK(big.encoder.feature_dim == 2048);
  CHECK(model_config_from_json(to_json(big)) == big);

  auto bad = mc;
  bad.encoder.feature_dim = 5;
  CHECK_THROWS_AS(validate(bad), contract_error);

  const auto dir = std::filesystem::temp_directory_path() / "siamgrid_model_manifest";
  std::filesystem::create_directories(dir);
  write_model_manifest(dir / "model.json", mc);
  CHECK(read_model_manifest(dir / "model.json") == mc);
  std::filesystem::remove_all(dir);
}

TEST_CASE("probe head is a single affine layer") {
  probe_head head(8, 3, 2);
  CHECK(head.feature_dim() == 8);
  CHECK(head.num_labels() == 3);
  CHECK(head.registry().parameters().size() == 2);
  augment::seeded_rng rng(8);
  const auto f = random_tensor({5, 8}, rng, -1, 1, false);
  const auto logits = head.logits(f);
  CHECK(logits.shape() == shape_t{5, 3});
  const auto& w = head.registry().parameters()[0].value;
  const auto& b = head.registry().parameters()[1].value;
  for (std::size_t n = 0; n < 5; ++n)
    for (std::size_t k = 0; k < 3; ++k) {
      double acc = b.at(k);
      for (std::size_t i = 0; i < 8; ++i) acc += double(f.at(n * 8 + i)) * w.at(k * 8 + i);
      CHECK(double(logits.at(n * 3 + k)) == doctest::Approx(acc).epsilon(1e-5));
    }
  diffcore::tape::current().clear();
}
