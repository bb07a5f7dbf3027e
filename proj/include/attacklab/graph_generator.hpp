#pragma once

#include <cstdint>

#include "attacklab/graph.hpp"

namespace attacklab {

/// Knobs for the synthetic engagement-graph generator.
///
/// Label signal is planted in the features (fake posts and bad users share a
/// mean offset of `mean_separation` from the real/good population, unit
/// variance). Structure signal comes from homophily: bad users share fake
/// posts with probability `p_homophily`, regular good users share real posts
/// with the same probability, and a small block of high-degree "influencer"
/// users shares real posts exclusively. Post popularity follows a power law
/// (preferential attachment seeded with heavy-tailed base weights), so post
/// degrees span the low/mid/high ranges used by the degree-bucket analyses
/// and user degrees cover the bot (1), cyborg (>10) and crowd-worker
/// (>20, all-real) pools.
struct GeneratorParams {
  int user_count = 0;
  int post_count = 0;
  int edge_count = 0;
  double fake_fraction = 0.5;
  double bad_user_fraction = 0.3;
  double p_homophily = 0.85;
  int feature_dim = 16;
  double mean_separation = 2.0;       // post classes, unit-variance noise
  double user_mean_separation = 0.6;  // bad vs good users
  double user_noise = 0.8;

  // Degree-shape knobs.
  double influencer_fraction = 0.09;  // capped so their edges stay under ~62% of the total
  int influencer_min_degree = 21;
  double spreader_fraction = 0.18;  // fraction of bad users given heavy base weight
  double spreader_weight = 12.0;
  double fake_popularity_exponent = 2.2;
  double real_popularity_exponent = 1.0;
  /// Plants one viral fake post with this many distinct sharers (0 = off),
  /// capped by the eligible user count. Bad users share it first.
  int viral_fake_degree = 0;

  void validate() const;
};

EngagementGraph generate_synthetic(const GeneratorParams& params, std::uint64_t seed);

}  // namespace attacklab
