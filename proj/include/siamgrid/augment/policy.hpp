#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "siamgrid/augment/kernels.hpp"

namespace siamgrid::augment {

enum class aug_kind { identity, crop_resize, rotate, cutout, distort, noise, blur, sobel };

inline constexpr aug_kind all_kinds[] = {aug_kind::identity, aug_kind::crop_resize, aug_kind::rotate,
                                         aug_kind::cutout,   aug_kind::distort,     aug_kind::noise,
                                         aug_kind::blur,     aug_kind::sobel};

std::string_view to_string(aug_kind kind);
std::optional<aug_kind> kind_from_string(std::string_view name);

/**
 * One augmentation with its parameters. Only the fields relevant to `kind`
 * are read; the others keep their defaults and are ignored by format().
 *
 *   crop_resize  scale, ratio, size (0 keeps the input size)
 *   rotate       degrees (uniform in [-degrees, degrees])
 *   cutout       scale, ratio
 *   distort      lambda
 *   noise        sigma
 *   blur         kernel, sigma
 */
struct aug_spec {
  aug_kind kind = aug_kind::identity;
  range scale{0.2, 1.0};
  range ratio{0.75, 4.0 / 3.0};
  std::size_t size = 0;
  double degrees = 30.0;
  double lambda = 0.5;
  range sigma{0.01, 0.03};
  int kernel = 23;

  friend bool operator==(const aug_spec&, const aug_spec&) = default;
};

/// Spec populated with the default parameters for `kind`.
aug_spec default_spec(aug_kind kind);

/// Throws contract_error when a parameter lies outside its legal range.
void validate(const aug_spec& spec);

/// Text form, e.g. "crop_resize(scale=0.2:1,ratio=0.75:1.3333333333333333)".
std::string format(const aug_spec& spec);
/// Parses the text form; a bare kind name yields its defaults. Throws config_error.
aug_spec parse_spec(std::string_view text);

using pipeline = std::vector<aug_spec>;

/// Comma-separated list of specs; commas inside parentheses are parameter separators.
std::string format_pipeline(const pipeline& specs);
pipeline parse_pipeline(std::string_view text);

/// Applies one spec; identity returns the input unchanged.
image apply_spec(const image& img, const aug_spec& spec, seeded_rng& rng, draw_trace* trace = nullptr);

/// Left-to-right composition; rng draws are consumed in spec order.
image apply_pipeline(const image& img, const pipeline& specs, seeded_rng& rng, draw_trace* trace = nullptr);

/// Applies `n` distinct pool entries chosen uniformly without replacement, in the sampled order.
image rand_augment(const image& img, std::size_t n, const pipeline& pool, seeded_rng& rng,
                   draw_trace* trace = nullptr);

enum class policy_mode { single_branch_compose, dual_symmetric };

std::string_view to_string(policy_mode mode);
std::optional<policy_mode> mode_from_string(std::string_view name);

struct view_policy {
  pipeline branch1{default_spec(aug_kind::identity)};
  pipeline branch2{default_spec(aug_kind::identity)};
  policy_mode mode = policy_mode::single_branch_compose;

  friend bool operator==(const view_policy&, const view_policy&) = default;
};

/// Branch 1 is [identity]; branch 2 applies t1 then t2.
view_policy single_branch_compose(const aug_spec& t1, const aug_spec& t2);
/// Both branches run the same pipeline on independent random streams.
view_policy dual_symmetric(const pipeline& specs);

/// Throws contract_error for empty branches, invalid specs, or a non-identity branch 1 in compose mode.
void validate(const view_policy& policy);

/// Short label such as "crop_resize+distort" (branch 2 kinds, identity elided when paired).
std::string policy_label(const view_policy& policy);

/**
 * Two views of one image. Branch b draws from the stream derived from
 * (seed, sample_index, b), so views of different samples and branches are
 * independent and each is reproducible in isolation.
 */
std::pair<image, image> make_views(const image& img, const view_policy& policy, std::uint64_t seed,
                                   std::uint64_t sample_index);

}  // namespace siamgrid::augment
