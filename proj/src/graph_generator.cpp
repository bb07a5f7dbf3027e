#include "attacklab/graph_generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace attacklab {

namespace {

struct EdgeBuilder {
  int users;
  int posts;
  std::vector<std::pair<int, int>> edges;
  std::unordered_set<std::int64_t> seen;
  std::vector<int> user_degree;
  std::vector<int> post_degree;

  EdgeBuilder(int u, int p) : users(u), posts(p), user_degree(u, 0), post_degree(p, 0) {}

  bool has(int u, int v) const {
    return seen.count((static_cast<std::int64_t>(u) << 32) | static_cast<std::uint32_t>(v)) > 0;
  }
  void add(int u, int v) {
    seen.insert((static_cast<std::int64_t>(u) << 32) | static_cast<std::uint32_t>(v));
    edges.emplace_back(u, v);
    ++user_degree[u];
    ++post_degree[v];
  }
};

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[uniform_index(rng, i + 1)]);
  return idx;
}

void assign_splits(std::vector<Split>& splits, const std::vector<int>& members, Rng& rng) {
  std::vector<int> order = members;
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[i], order[uniform_index(rng, i + 1)]);
  const int n = static_cast<int>(order.size());
  const int n_train = (3 * n) / 5;
  const int n_val = n / 5;
  for (int i = 0; i < n; ++i) {
    if (i < n_train)
      splits[order[i]] = Split::Train;
    else if (i < n_train + n_val)
      splits[order[i]] = Split::Val;
    else
      splits[order[i]] = Split::Test;
  }
}

}  // namespace

void GeneratorParams::validate() const {
  if (user_count < 1 || post_count < 1 || edge_count < 0)
    throw InvalidParams("generator: counts must be positive");
  if (static_cast<long long>(edge_count) >
      static_cast<long long>(user_count) * static_cast<long long>(post_count))
    throw InvalidParams("generator: more edges requested than user-post pairs");
  auto frac = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!frac(fake_fraction) || !frac(bad_user_fraction) || !frac(p_homophily) ||
      !frac(influencer_fraction) || !frac(spreader_fraction))
    throw InvalidParams("generator: fractions must lie in [0, 1]");
  if (feature_dim < 1) throw InvalidParams("generator: feature_dim must be >= 1");
  if (mean_separation < 0.0 || user_mean_separation < 0.0 || user_noise < 0.0)
    throw InvalidParams("generator: separations and noise must be >= 0");
  if (influencer_min_degree < 1 || spreader_weight < 0.0 || fake_popularity_exponent < 0.0 ||
      real_popularity_exponent < 0.0 || viral_fake_degree < 0)
    throw InvalidParams("generator: bad degree-shape knobs");
}

EngagementGraph generate_synthetic(const GeneratorParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);
  const int U = params.user_count;
  const int V = params.post_count;
  const int E = params.edge_count;
  const int d = params.feature_dim;

  // Labels and splits (stratified per class).
  const int n_fake = static_cast<int>(std::lround(params.fake_fraction * V));
  std::vector<int> labels(V, 0);
  std::vector<int> post_order = shuffled_indices(V, rng);
  std::vector<int> fake_posts, real_posts;
  for (int i = 0; i < V; ++i) {
    if (i < n_fake) {
      labels[post_order[i]] = 1;
      fake_posts.push_back(post_order[i]);
    } else {
      real_posts.push_back(post_order[i]);
    }
  }
  std::vector<Split> splits(V, Split::Test);
  assign_splits(splits, fake_posts, rng);
  assign_splits(splits, real_posts, rng);

  // Features: planted class means separated by `mean_separation`.
  const double mu = params.mean_separation / std::sqrt(static_cast<double>(d));
  Matrix post_features = gaussian_matrix(V, d, rng);
  for (int v : fake_posts) post_features.row(v).array() += mu;

  // User roles: influencers (pristine, high degree), bad users (a slice of
  // them "spreaders" with heavy weight), the rest regular good users.
  std::vector<int> user_order = shuffled_indices(U, rng);
  const long long inf_budget = static_cast<long long>(0.62 * E);
  int n_influencers =
      std::min(static_cast<int>(params.influencer_fraction * U),
               static_cast<int>(inf_budget / std::max(1, params.influencer_min_degree)));
  n_influencers = std::min(n_influencers, U);
  std::vector<char> is_influencer(U, 0), is_bad(U, 0), is_spreader(U, 0);
  for (int i = 0; i < n_influencers; ++i) is_influencer[user_order[i]] = 1;
  const int n_bad =
      std::min(static_cast<int>(std::lround(params.bad_user_fraction * U)), U - n_influencers);
  const int n_spreaders = n_bad == 0 ? 0 : static_cast<int>(std::ceil(params.spreader_fraction * n_bad));
  for (int i = 0; i < n_bad; ++i) {
    const int u = user_order[n_influencers + i];
    is_bad[u] = 1;
    if (i < n_spreaders) is_spreader[u] = 1;
  }

  const double mu_user = params.user_mean_separation / std::sqrt(static_cast<double>(d));
  Matrix user_features = gaussian_matrix(U, d, rng, 0.0, params.user_noise);
  for (int u = 0; u < U; ++u)
    if (is_bad[u]) user_features.row(u).array() += mu_user;

  // Post popularity: power-law base weights over a per-class shuffled ranking.
  std::vector<double> post_weight(V, 0.0);
  auto rank_weights = [&](const std::vector<int>& members, double exponent) {
    std::vector<int> ranked = members;
    for (int i = static_cast<int>(ranked.size()) - 1; i > 0; --i)
      std::swap(ranked[i], ranked[uniform_index(rng, i + 1)]);
    for (size_t r = 0; r < ranked.size(); ++r)
      post_weight[ranked[r]] = std::pow(static_cast<double>(r + 1), -exponent);
  };
  rank_weights(fake_posts, params.fake_popularity_exponent);
  rank_weights(real_posts, params.real_popularity_exponent);

  EdgeBuilder builder(U, V);

  // Phase A: influencer edges, all to real posts, scheduled degrees >= the
  // crowd-worker threshold.
  long long phase_a_spent = 0;
  for (int k = 0; k < n_influencers; ++k) {
    const int u = user_order[k];
    if (phase_a_spent + params.influencer_min_degree > inf_budget) {
      is_influencer[u] = 0;  // demoted to regular good user
      continue;
    }
    int target = params.influencer_min_degree +
                 static_cast<int>(std::lround(18.0 / static_cast<double>(k + 1)));
    target = std::min<long long>(target, inf_budget - phase_a_spent);
    target = std::min(target, static_cast<int>(real_posts.size()));
    target = std::min<long long>(target, E - static_cast<long long>(builder.edges.size()));
    for (int e = 0; e < target; ++e) {
      std::vector<double> w;
      w.reserve(real_posts.size());
      for (int v : real_posts) w.push_back(builder.has(u, v) ? 0.0 : post_weight[v] + 0.05 * builder.post_degree[v]);
      if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) break;
      builder.add(u, real_posts[weighted_index(rng, w)]);
      ++phase_a_spent;
    }
  }

  // Phase A0: every post gets one on-class share (fake from a bad user, real
  // from a good user) while the edge budget allows; shared posts with zero
  // engagement do not occur in scraped engagement data.
  {
    std::vector<int> bad_users, good_users;
    for (int i = n_influencers; i < U; ++i) {
      const int u = user_order[i];
      (is_bad[u] ? bad_users : good_users).push_back(u);
    }
    for (int v : post_order) {
      if (static_cast<int>(builder.edges.size()) >= E) break;
      const auto& pool = labels[v] == 1 ? bad_users : good_users;
      if (pool.empty()) continue;
      const int u = pool[uniform_index(rng, static_cast<int>(pool.size()))];
      if (!builder.has(u, v)) builder.add(u, v);
    }
  }

  // Phase A2: one planted viral fake post, shared by distinct users (bad
  // users first, then regular good users; pristine influencers never).
  if (params.viral_fake_degree > 0 && !fake_posts.empty()) {
    int viral = -1;
    for (int v : fake_posts)
      if (viral < 0 || post_weight[v] > post_weight[viral]) viral = v;
    std::vector<int> eligible;
    for (int pass = 0; pass < 2; ++pass)
      for (int u = 0; u < U; ++u) {
        if (is_influencer[u]) continue;
        if (pass == 0 ? !is_bad[u] : is_bad[u] != 0) continue;
        if (pass == 1 && params.p_homophily == 1.0) continue;  // keep bad-only purity
        eligible.push_back(u);
      }
    long long quota = std::min<long long>(params.viral_fake_degree,
                                          E - static_cast<long long>(builder.edges.size()));
    quota = std::min<long long>(quota, static_cast<long long>(eligible.size()));
    // Shuffle within each pass block so the sharer set varies per seed.
    const int n_bad_eligible =
        static_cast<int>(std::count_if(eligible.begin(), eligible.end(),
                                       [&](int u) { return is_bad[u] != 0; }));
    for (int i = n_bad_eligible - 1; i > 0; --i)
      std::swap(eligible[i], eligible[uniform_index(rng, i + 1)]);
    for (int i = static_cast<int>(eligible.size()) - 1; i > n_bad_eligible; --i)
      std::swap(eligible[i],
                eligible[n_bad_eligible + uniform_index(rng, i - n_bad_eligible + 1)]);
    long long added = 0;
    for (int u : eligible) {
      if (added >= quota) break;
      if (builder.has(u, viral)) continue;
      builder.add(u, viral);
      ++added;
    }
  }

  // Phase B: homophily-driven preferential attachment for everyone else.
  auto draw_post = [&](int u, bool want_fake) -> int {
    const auto& members = want_fake ? fake_posts : real_posts;
    std::vector<double> w;
    w.reserve(members.size());
    double total = 0.0;
    for (int v : members) {
      const double wt = builder.has(u, v) ? 0.0 : post_weight[v] + 0.05 * builder.post_degree[v];
      w.push_back(wt);
      total += wt;
    }
    if (total <= 0.0) return -1;
    return members[weighted_index(rng, w)];
  };

  const long long remaining = E - static_cast<long long>(builder.edges.size());
  long long placed = 0;
  long long attempts = 0;
  const long long max_attempts = 200 * remaining + 1000;
  while (placed < remaining && attempts < max_attempts) {
    ++attempts;
    std::vector<double> uw(U, 0.0);
    double total = 0.0;
    for (int u = 0; u < U; ++u) {
      if (is_influencer[u]) continue;
      if (builder.user_degree[u] >= V) continue;
      uw[u] = (is_spreader[u] ? params.spreader_weight : 1.0) + builder.user_degree[u];
      total += uw[u];
    }
    if (total <= 0.0) break;
    const int u = weighted_index(rng, uw);
    const bool prefer_fake = is_bad[u] != 0;
    const bool take_preferred = bernoulli(rng, params.p_homophily);
    const bool want_fake = take_preferred ? prefer_fake : !prefer_fake;
    const int v = draw_post(u, want_fake);
    if (v < 0) continue;
    builder.add(u, v);
    ++placed;
  }

  // Deterministic fill for the rare case rejection sampling stalls. Keeps the
  // class rule exact when p_homophily is degenerate (0 or 1).
  if (placed < remaining) {
    const bool degenerate = params.p_homophily == 0.0 || params.p_homophily == 1.0;
    for (int pass = 0; pass < 2 && placed < remaining; ++pass) {
      for (int u = 0; u < U && placed < remaining; ++u) {
        if (is_influencer[u] && pass == 0) continue;  // influencers only as a last resort
        const bool prefer_fake = is_bad[u] != 0;
        auto try_class = [&](bool want_fake) {
          if (is_influencer[u] && want_fake) return;  // pristine users never share fake
          const auto& members = want_fake ? fake_posts : real_posts;
          for (int v : members) {
            if (placed >= remaining) return;
            if (!builder.has(u, v)) {
              builder.add(u, v);
              ++placed;
            }
          }
        };
        const bool preferred_fake = params.p_homophily >= 0.5 ? prefer_fake : !prefer_fake;
        try_class(preferred_fake);
        if (!degenerate) try_class(!preferred_fake);
      }
    }
    if (placed < remaining)
      throw InvalidParams("generate_synthetic: cannot place requested edges under class rules");
  }

  return EngagementGraph(std::move(user_features), std::move(post_features), std::move(labels),
                         std::move(splits), std::move(builder.edges));
}

}  // namespace attacklab
