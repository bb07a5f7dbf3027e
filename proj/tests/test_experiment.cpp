#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "attacklab/experiment.hpp"
#include "oracles.hpp"

using namespace attacklab;

namespace {

ExperimentConfig quick_config() {
  ExperimentConfig cfg = ExperimentConfig::benchmark();
  cfg.generator.user_count = 120;
  cfg.generator.post_count = 48;
  cfg.generator.edge_count = 400;
  cfg.surrogate_epochs = 60;
  cfg.pools.bot = 10;
  cfg.pools.cyborg = 2;
  cfg.pools.crowd = 2;
  cfg.attacker = AttackerKind::RdEdge;
  cfg.repetitions = 2;
  cfg.marl.episodes = 4;
  cfg.marl.batch_size = 4;
  return cfg;
}

}  // namespace

TEST_CASE("degree_buckets: boundaries, partition, recount") {
  GeneratorParams p;
  p.user_count = 500;
  p.post_count = 80;
  p.edge_count = 3000;
  p.fake_popularity_exponent = 2.6;
  p.viral_fake_degree = 115;
  EngagementGraph g = generate_synthetic(p, 42);
  std::vector<int> posts(g.post_count());
  for (int v = 0; v < g.post_count(); ++v) posts[v] = v;
  auto buckets = degree_buckets(g, posts);
  REQUIRE(buckets.size() == 3);
  size_t total = 0;
  for (int b = 0; b < 3; ++b) total += buckets[b].size();
  CHECK(total == posts.size());  // exhaustive
  for (int v : buckets[0]) CHECK(degree(g, post_ref(v)) < 10);
  for (int v : buckets[1]) {
    CHECK(degree(g, post_ref(v)) >= 10);
    CHECK(degree(g, post_ref(v)) < 100);
  }
  for (int v : buckets[2]) CHECK(degree(g, post_ref(v)) >= 100);
  // disjoint
  std::set<int> seen;
  for (int b = 0; b < 3; ++b)
    for (int v : buckets[b]) CHECK(seen.insert(v).second);

  // boundary cases: degree 9 -> low, 10 -> mid, 100 -> high
  // construct a tiny graph with exactly those degrees
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < 9; ++u) edges.push_back({u, 0});
  for (int u = 0; u < 10; ++u) edges.push_back({u, 1});
  for (int u = 0; u < 100; ++u) edges.push_back({u, 2});
  std::vector<Split> splits(3, Split::Test);
  EngagementGraph tiny(Matrix::Zero(100, 2), Matrix::Zero(3, 2), {1, 1, 1}, splits, edges);
  auto tb = degree_buckets(tiny, {0, 1, 2});
  CHECK(tb[0] == std::vector<int>{0});
  CHECK(tb[1] == std::vector<int>{1});
  CHECK(tb[2] == std::vector<int>{2});
}

TEST_CASE("select_targets honors class, split, degree and correctness filters") {
  GeneratorParams p;
  p.user_count = 150;
  p.post_count = 50;
  p.edge_count = 450;
  EngagementGraph g = generate_synthetic(p, 9);
  TrainConfig tc;
  tc.epochs = 60;
  tc.lr = 0.02;
  tc.momentum = 0.9;
  tc.seed = 4;
  GnnModel model = train_new(GnnConfig::defaults(GnnArch::Gcn), g, tc).model;

  TargetSelector sel;
  sel.label_class = 1;
  sel.split = Split::Test;
  sel.max_degree = 10;
  sel.correct_only = true;
  const auto targets = select_targets(g, model, sel);
  const auto pred = predict_all(model, g);
  for (int v : targets) {
    CHECK(g.label(v) == 1);
    CHECK(g.split(v) == Split::Test);
    CHECK(degree(g, post_ref(v)) < 10);
    CHECK(pred[v] == 1);
  }
  TargetSelector all;
  all.label_class = 0;
  all.split = std::nullopt;
  all.correct_only = false;
  const auto reals = select_targets(g, model, all);
  int want = 0;
  for (int v = 0; v < g.post_count(); ++v) want += g.label(v) == 0;
  CHECK(static_cast<int>(reals.size()) == want);
}

TEST_CASE("build_pools: disjoint, typed, budgeted") {
  GeneratorParams p;
  p.user_count = 300;
  p.post_count = 80;
  p.edge_count = 900;
  EngagementGraph g = generate_synthetic(p, 42);
  PoolConfig pools;
  pools.bot = 10;
  pools.cyborg = 8;
  pools.crowd = 3;
  auto specs = build_pools(g, pools, 7);
  REQUIRE(specs.size() == 3);
  CHECK(specs[0].type == AgentType::Bot);
  CHECK(specs[1].type == AgentType::Cyborg);
  CHECK(specs[2].type == AgentType::CrowdWorker);
  CHECK(specs[0].controlled_users.size() == 10);
  CHECK(specs[1].controlled_users.size() == 8);
  CHECK(specs[2].controlled_users.size() == 3);
  CHECK(specs[0].per_user_edge_budget == 1);
  CHECK(specs[1].per_user_edge_budget == 3);
  CHECK(specs[2].per_user_edge_budget == 5);
  std::set<int> seen;
  for (const auto& s : specs) {
    const auto criteria = AgentPoolCriteria::for_type(s.type);
    for (int u : s.controlled_users) {
      CHECK(seen.insert(u).second);  // disjoint
      CHECK(criteria.matches(g, u));
    }
  }
}

TEST_CASE("CSV rows round-trip and format") {
  std::vector<ReportRow> rows(2);
  rows[0] = {"marl", "gcn", "indirect", "fake", "all", "42", 0.3333333, 14, 123};
  rows[1] = {"marl", "gcn", "indirect", "fake", "all", "mean", 0.25, 13.5, 0};
  const std::string csv = rows_to_csv(rows);
  CHECK(csv.find("attacker,arch,mode,target_class,bucket,seed,success_rate,edges_added,wall_ms") ==
        0);
  CHECK(csv.find("0.333333") != std::string::npos);
  CHECK(csv.find("13.500000") != std::string::npos);
  CHECK(csv.find(",14,") != std::string::npos);  // integral edge counts stay integers
  auto parsed = csv_to_rows(csv);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].success_rate == doctest::Approx(0.333333));
  CHECK(parsed[1].seed == "mean");
}

TEST_CASE("config file round-trip") {
  ExperimentConfig cfg = ExperimentConfig::benchmark();
  cfg.arch = GnnArch::Gat;
  cfg.attacker = AttackerKind::RlA2;
  cfg.mode = AttackMode::Direct;
  cfg.targets.label_class = 0;
  cfg.targets.split = std::nullopt;
  cfg.targets.min_degree = 3;
  cfg.repetitions = 7;
  cfg.base_seed = 99;
  cfg.marl.gamma = 0.7;
  cfg.marl.episodes = 25;
  const std::string path = std::filesystem::temp_directory_path() / "attacklab_cfg_test.cfg";
  save_experiment_config(cfg, path);
  ExperimentConfig loaded = load_experiment_config(path);
  CHECK(loaded.arch == GnnArch::Gat);
  CHECK(loaded.attacker == AttackerKind::RlA2);
  CHECK(loaded.mode == AttackMode::Direct);
  CHECK(loaded.targets.label_class == 0);
  CHECK(!loaded.targets.split.has_value());
  CHECK(loaded.targets.min_degree == 3);
  CHECK(loaded.repetitions == 7);
  CHECK(loaded.base_seed == 99);
  CHECK(loaded.marl.gamma == 0.7);
  CHECK(loaded.marl.episodes == 25);
  CHECK(loaded.generator.user_count == cfg.generator.user_count);
  std::filesystem::remove(path);

  const std::string bad = std::filesystem::temp_directory_path() / "attacklab_bad.cfg";
  {
    std::ofstream out(bad);
    out << "[graph]\nusers=abc\n";
  }
  CHECK_THROWS_AS(load_experiment_config(bad), ParseError);
  std::filesystem::remove(bad);
}

TEST_CASE("run_experiment: row bookkeeping, mean, determinism, audit") {
  ExperimentConfig cfg = quick_config();
  ExperimentResult r1 = run_experiment(cfg);
  REQUIRE(r1.rows.size() == 3);  // 2 reps + mean
  CHECK(r1.rows[0].seed == "42");
  CHECK(r1.rows[1].seed == "43");
  CHECK(r1.rows[2].seed == "mean");
  const double mean = (r1.rows[0].success_rate + r1.rows[1].success_rate) / 2.0;
  CHECK(r1.rows[2].success_rate == doctest::Approx(mean).epsilon(1e-12));
  for (const auto& row : r1.rows) {
    CHECK(row.success_rate >= 0.0);
    CHECK(row.success_rate <= 1.0);
  }

  // byte-identical rerun (CSV and JSON)
  ExperimentResult r2 = run_experiment(cfg);
  CHECK(rows_to_csv(r1.rows) == rows_to_csv(r2.rows));
  REQUIRE(r1.logs.size() == r2.logs.size());
  for (size_t i = 0; i < r1.logs.size(); ++i)
    CHECK(r1.logs[i].json.dump() == r2.logs[i].json.dump());

  // replay audit
  for (const auto& log : r1.logs) {
    auto err = audit_campaign(r1, log, cfg.mode);
    if (err) FAIL("audit failed: ", *err);
  }
}

TEST_CASE("run_experiment: repetitions=1 yields equal run and mean rows") {
  ExperimentConfig cfg = quick_config();
  cfg.repetitions = 1;
  ExperimentResult r = run_experiment(cfg);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].success_rate == r.rows[1].success_rate);
  CHECK(r.rows[0].edges_added == r.rows[1].edges_added);
  CHECK(r.rows[1].seed == "mean");
}

TEST_CASE("run_experiment covers every attacker kind") {
  for (AttackerKind kind : {AttackerKind::RdEdge, AttackerKind::RlA1, AttackerKind::RlA3}) {
    ExperimentConfig cfg = quick_config();
    cfg.attacker = kind;
    cfg.repetitions = 1;
    ExperimentResult r = run_experiment(cfg);
    CHECK(r.rows.front().attacker == attacker_name(kind));
    for (const auto& log : r.logs) {
      auto err = audit_campaign(r, log, cfg.mode);
      if (err) FAIL("audit failed for ", attacker_name(kind), ": ", *err);
    }
  }
}

TEST_CASE("rd-node campaigns audit against the augmented graph") {
  ExperimentConfig cfg = ExperimentConfig::benchmark();
  cfg.surrogate_epochs = 60;
  cfg.attacker = AttackerKind::RdNode;
  cfg.mode = AttackMode::Direct;
  cfg.repetitions = 2;
  ExperimentResult r = run_experiment(cfg);
  for (const auto& log : r.logs) {
    CHECK(log.injected.size() == 15);
    auto err = audit_campaign(r, log, cfg.mode);
    if (err) FAIL("audit failed: ", *err);
  }
}

TEST_CASE("audit catches tampered logs") {
  ExperimentConfig cfg = quick_config();
  cfg.mode = AttackMode::Direct;
  cfg.attacker = AttackerKind::RdEdge;
  cfg.repetitions = 1;
  ExperimentResult r = run_experiment(cfg);
  REQUIRE(!r.logs.empty());
  if (r.logs[0].edges.empty()) return;  // nothing to tamper with at this seed
  CampaignLog bad = r.logs[0];
  bad.success_rate += 0.125;  // forged success rate
  CHECK(audit_campaign(r, bad, cfg.mode).has_value());
  CampaignLog dup = r.logs[0];
  dup.edges.push_back(dup.edges.front());  // duplicate edge violates legality
  CHECK(audit_campaign(r, dup, cfg.mode).has_value());
}

TEST_CASE("experiment outputs land on disk") {
  ExperimentConfig cfg = quick_config();
  cfg.repetitions = 1;
  ExperimentResult r = run_experiment(cfg);
  const std::string dir =
      (std::filesystem::temp_directory_path() / "attacklab_out_test").string();
  std::filesystem::remove_all(dir);
  write_experiment_outputs(r, dir, "probe");
  CHECK(std::filesystem::exists(dir + "/probe.csv"));
  CHECK(std::filesystem::exists(dir + "/probe_rep0.json"));
  std::ifstream csv(dir + "/probe.csv");
  std::stringstream ss;
  ss << csv.rdbuf();
  CHECK(ss.str() == rows_to_csv(r.rows));
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep_budget rows carry pool labels and stay within sizes") {
  ExperimentConfig cfg = quick_config();
  cfg.repetitions = 1;
  cfg.mode = AttackMode::Direct;
  cfg.marl.episodes = 3;
  SuiteResult suite = sweep_budget(cfg, AgentType::Bot, {2, 4});
  REQUIRE(suite.rows.size() == 4);  // (1 rep + mean) x 2 sizes
  CHECK(suite.rows[0].bucket == "pool=2");
  CHECK(suite.rows[2].bucket == "pool=4");
  CHECK(suite.rows[0].attacker == "rl-a1");
}

TEST_CASE("good_user_pool selects only sub-20% fake sharers") {
  GeneratorParams p;
  p.user_count = 200;
  p.post_count = 60;
  p.edge_count = 600;
  EngagementGraph g = generate_synthetic(p, 21);
  auto pool = good_user_pool(g, 20, 3);
  CHECK(pool.size() == 20);
  for (int u : pool) CHECK(user_fake_share_ratio(g, u) < 0.2);
  CHECK(good_user_pool(g, 20, 3) == pool);
}
