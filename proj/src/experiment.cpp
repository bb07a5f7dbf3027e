#include "attacklab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "attacklab/graph_io.hpp"

namespace attacklab {

const char* attacker_name(AttackerKind k) {
  switch (k) {
    case AttackerKind::Marl:
      return "marl";
    case AttackerKind::RdEdge:
      return "rd-edge";
    case AttackerKind::RdNode:
      return "rd-node";
    case AttackerKind::RlA1:
      return "rl-a1";
    case AttackerKind::RlA2:
      return "rl-a2";
    case AttackerKind::RlA3:
      return "rl-a3";
  }
  return "?";
}

AttackerKind parse_attacker(const std::string& name) {
  if (name == "marl") return AttackerKind::Marl;
  if (name == "rd-edge") return AttackerKind::RdEdge;
  if (name == "rd-node") return AttackerKind::RdNode;
  if (name == "rl-a1") return AttackerKind::RlA1;
  if (name == "rl-a2") return AttackerKind::RlA2;
  if (name == "rl-a3") return AttackerKind::RlA3;
  throw ConfigError("unknown attacker '" + name + "'");
}

ExperimentConfig ExperimentConfig::benchmark() {
  ExperimentConfig cfg;
  cfg.generator.user_count = 300;
  cfg.generator.post_count = 80;
  cfg.generator.edge_count = 900;
  cfg.graph_seed = 42;
  cfg.pools.bot = 60;
  cfg.pools.cyborg = 16;
  cfg.pools.crowd = 3;
  cfg.use_victim = false;
  cfg.targets.label_class = 1;
  cfg.targets.split = Split::Test;
  cfg.targets.max_degree = 10;
  cfg.targets.correct_only = true;
  cfg.marl.episodes = 60;
  cfg.marl.batch_size = 16;
  cfg.marl.replay_capacity = 2048;
  cfg.marl.epsilon_decay = 0.93;
  return cfg;
}

ExperimentConfig ExperimentConfig::degree_benchmark() {
  ExperimentConfig cfg = benchmark();
  cfg.generator.user_count = 500;
  cfg.generator.post_count = 80;
  cfg.generator.edge_count = 3000;
  cfg.generator.mean_separation = 1.4;
  cfg.generator.fake_popularity_exponent = 2.6;
  cfg.generator.viral_fake_degree = 115;
  cfg.targets.split = std::nullopt;  // bucket analysis looks at every fake post
  cfg.targets.max_degree = std::nullopt;
  cfg.attacker = AttackerKind::RlA3;
  cfg.mode = AttackMode::Direct;
  cfg.pools.bot = 0;
  cfg.pools.cyborg = 0;
  cfg.pools.crowd = 12;
  return cfg;
}

void ExperimentConfig::validate() const {
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (graph_path.empty()) generator.validate();
  if (pools.bot < 0 || pools.cyborg < 0 || pools.crowd < 0)
    throw ConfigError("pool sizes must be >= 0");
  if (pools.bot_budget < 0 || pools.cyborg_budget < 0 || pools.crowd_budget < 0)
    throw ConfigError("budgets must be >= 0");
  if (surrogate_epochs < 1 || surrogate_lr <= 0.0 || surrogate_hidden < 1 ||
      surrogate_momentum < 0.0 || surrogate_momentum >= 1.0)
    throw ConfigError("bad surrogate training settings");
  marl.validate();
}

// --- config file ------------------------------------------------------------

namespace {

std::string format_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "?";
}

Split parse_split_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + s + "'");
}

}  // namespace

void save_experiment_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_experiment_config: cannot open " + path);
  out << "[graph]\n";
  if (!cfg.graph_path.empty()) out << "path=" << cfg.graph_path << "\n";
  out << "users=" << cfg.generator.user_count << "\nposts=" << cfg.generator.post_count
      << "\nedges=" << cfg.generator.edge_count << "\nseed=" << cfg.graph_seed
      << "\nfake_fraction=" << format_g(cfg.generator.fake_fraction)
      << "\nbad_user_fraction=" << format_g(cfg.generator.bad_user_fraction)
      << "\np_homophily=" << format_g(cfg.generator.p_homophily)
      << "\nfeature_dim=" << cfg.generator.feature_dim
      << "\nmean_separation=" << format_g(cfg.generator.mean_separation) << "\n";
  out << "[surrogate]\narch=" << arch_name(cfg.arch) << "\nepochs=" << cfg.surrogate_epochs
      << "\nlr=" << format_g(cfg.surrogate_lr) << "\nmomentum=" << format_g(cfg.surrogate_momentum)
      << "\nhidden=" << cfg.surrogate_hidden << "\n";
  out << "[pools]\nbot=" << cfg.pools.bot << "\ncyborg=" << cfg.pools.cyborg
      << "\ncrowd=" << cfg.pools.crowd << "\nbot_budget=" << cfg.pools.bot_budget
      << "\ncyborg_budget=" << cfg.pools.cyborg_budget
      << "\ncrowd_budget=" << cfg.pools.crowd_budget << "\n";
  out << "[targets]\nclass=" << (cfg.targets.label_class == 1 ? "fake" : "real") << "\nsplit="
      << (cfg.targets.split ? split_name(*cfg.targets.split) : "all");
  if (cfg.targets.min_degree) out << "\nmin_degree=" << *cfg.targets.min_degree;
  if (cfg.targets.max_degree) out << "\nmax_degree=" << *cfg.targets.max_degree;
  out << "\ncorrect_only=" << (cfg.targets.correct_only ? 1 : 0) << "\n";
  out << "[attack]\nmode=" << mode_name(cfg.mode) << "\nattacker=" << attacker_name(cfg.attacker)
      << "\nrepetitions=" << cfg.repetitions << "\nseed=" << cfg.base_seed
      << "\nvictim=" << (cfg.use_victim ? 1 : 0) << "\ntimings=" << (cfg.emit_timings ? 1 : 0)
      << "\n";
  out << "[marl]\ngamma=" << format_g(cfg.marl.gamma)
      << "\nepsilon_start=" << format_g(cfg.marl.epsilon_start)
      << "\nepsilon_end=" << format_g(cfg.marl.epsilon_end)
      << "\nepsilon_decay=" << format_g(cfg.marl.epsilon_decay)
      << "\nepisodes=" << cfg.marl.episodes << "\nlr=" << format_g(cfg.marl.lr)
      << "\nreplay_capacity=" << cfg.marl.replay_capacity
      << "\nbatch_size=" << cfg.marl.batch_size << "\nqnet_hidden=" << cfg.marl.qnet_hidden_dim
      << "\nqnet_head=" << cfg.marl.qnet_head_dim
      << "\nper_agent_encoders=" << (cfg.marl.per_agent_encoders ? 1 : 0) << "\n";
  if (!out) throw Error("save_experiment_config: write failed");
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_experiment_config: cannot open " + path);
  ExperimentConfig cfg;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    size_t start = 0;
    while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
    line.erase(0, start);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (section == "graph") {
        if (key == "path")
          cfg.graph_path = value;
        else if (key == "users")
          cfg.generator.user_count = std::stoi(value);
        else if (key == "posts")
          cfg.generator.post_count = std::stoi(value);
        else if (key == "edges")
          cfg.generator.edge_count = std::stoi(value);
        else if (key == "seed")
          cfg.graph_seed = std::stoull(value);
        else if (key == "fake_fraction")
          cfg.generator.fake_fraction = std::stod(value);
        else if (key == "bad_user_fraction")
          cfg.generator.bad_user_fraction = std::stod(value);
        else if (key == "p_homophily")
          cfg.generator.p_homophily = std::stod(value);
        else if (key == "feature_dim")
          cfg.generator.feature_dim = std::stoi(value);
        else if (key == "mean_separation")
          cfg.generator.mean_separation = std::stod(value);
        else
          throw ConfigError("unknown key");
      } else if (section == "surrogate") {
        if (key == "arch")
          cfg.arch = parse_arch(value);
        else if (key == "epochs")
          cfg.surrogate_epochs = std::stoi(value);
        else if (key == "lr")
          cfg.surrogate_lr = std::stod(value);
        else if (key == "momentum")
          cfg.surrogate_momentum = std::stod(value);
        else if (key == "hidden")
          cfg.surrogate_hidden = std::stoi(value);
        else
          throw ConfigError("unknown key");
      } else if (section == "pools") {
        if (key == "bot")
          cfg.pools.bot = std::stoi(value);
        else if (key == "cyborg")
          cfg.pools.cyborg = std::stoi(value);
        else if (key == "crowd")
          cfg.pools.crowd = std::stoi(value);
        else if (key == "bot_budget")
          cfg.pools.bot_budget = std::stoi(value);
        else if (key == "cyborg_budget")
          cfg.pools.cyborg_budget = std::stoi(value);
        else if (key == "crowd_budget")
          cfg.pools.crowd_budget = std::stoi(value);
        else
          throw ConfigError("unknown key");
      } else if (section == "targets") {
        if (key == "class")
          cfg.targets.label_class = value == "fake" ? 1 : value == "real" ? 0
                                                      : throw ConfigError("class must be fake|real");
        else if (key == "split")
          cfg.targets.split = value == "all" ? std::nullopt
                                             : std::optional<Split>(parse_split_name(value));
        else if (key == "min_degree")
          cfg.targets.min_degree = std::stoi(value);
        else if (key == "max_degree")
          cfg.targets.max_degree = std::stoi(value);
        else if (key == "correct_only")
          cfg.targets.correct_only = std::stoi(value) != 0;
        else
          throw ConfigError("unknown key");
      } else if (section == "attack") {
        if (key == "mode")
          cfg.mode = parse_mode(value);
        else if (key == "attacker")
          cfg.attacker = parse_attacker(value);
        else if (key == "repetitions")
          cfg.repetitions = std::stoi(value);
        else if (key == "seed")
          cfg.base_seed = std::stoull(value);
        else if (key == "victim")
          cfg.use_victim = std::stoi(value) != 0;
        else if (key == "timings")
          cfg.emit_timings = std::stoi(value) != 0;
        else
          throw ConfigError("unknown key");
      } else if (section == "marl") {
        if (key == "gamma")
          cfg.marl.gamma = std::stod(value);
        else if (key == "epsilon_start")
          cfg.marl.epsilon_start = std::stod(value);
        else if (key == "epsilon_end")
          cfg.marl.epsilon_end = std::stod(value);
        else if (key == "epsilon_decay")
          cfg.marl.epsilon_decay = std::stod(value);
        else if (key == "episodes")
          cfg.marl.episodes = std::stoi(value);
        else if (key == "lr")
          cfg.marl.lr = std::stod(value);
        else if (key == "replay_capacity")
          cfg.marl.replay_capacity = std::stoi(value);
        else if (key == "batch_size")
          cfg.marl.batch_size = std::stoi(value);
        else if (key == "qnet_hidden")
          cfg.marl.qnet_hidden_dim = std::stoi(value);
        else if (key == "qnet_head")
          cfg.marl.qnet_head_dim = std::stoi(value);
        else if (key == "per_agent_encoders")
          cfg.marl.per_agent_encoders = std::stoi(value) != 0;
        else
          throw ConfigError("unknown key");
      } else {
        throw ConfigError("unknown section '" + section + "'");
      }
    } catch (const ConfigError& e) {
      throw ParseError(line_no, std::string(e.what()) + " ('" + key + "' in [" + section + "])");
    } catch (const std::invalid_argument&) {
      throw ParseError(line_no, "bad value for '" + key + "'");
    }
  }
  return cfg;
}

// --- rows and CSV -------------------------------------------------------------

namespace {

std::string format_number(double x) {
  if (x == std::floor(x) && std::abs(x) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(x));
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

std::string format_rate(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace

std::string rows_to_csv(const std::vector<ReportRow>& rows) {
  std::string out = "attacker,arch,mode,target_class,bucket,seed,success_rate,edges_added,wall_ms\n";
  for (const ReportRow& r : rows) {
    out += r.attacker + ',' + r.arch + ',' + r.mode + ',' + r.target_class + ',' + r.bucket + ',' +
           r.seed + ',' + format_rate(r.success_rate) + ',' + format_number(r.edges_added) + ',' +
           std::to_string(r.wall_ms) + '\n';
  }
  return out;
}

std::vector<ReportRow> csv_to_rows(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<ReportRow> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line_no == 1) continue;  // header
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw ParseError(line_no, "expected 9 CSV columns");
    ReportRow r;
    r.attacker = cells[0];
    r.arch = cells[1];
    r.mode = cells[2];
    r.target_class = cells[3];
    r.bucket = cells[4];
    r.seed = cells[5];
    r.success_rate = std::stod(cells[6]);
    r.edges_added = std::stod(cells[7]);
    r.wall_ms = std::stoll(cells[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// --- selection helpers --------------------------------------------------------

std::vector<int> select_targets(const EngagementGraph& g, const GnnModel& model,
                                const TargetSelector& sel) {
  std::vector<int> pred;
  if (sel.correct_only) pred = predict_all(model, g);
  std::vector<int> out;
  for (int v = 0; v < g.post_count(); ++v) {
    if (g.label(v) != sel.label_class) continue;
    if (sel.split && g.split(v) != *sel.split) continue;
    const int d = degree(g, post_ref(v));
    if (sel.min_degree && d < *sel.min_degree) continue;
    if (sel.max_degree && d >= *sel.max_degree) continue;
    if (sel.correct_only && pred[v] != g.label(v)) continue;
    out.push_back(v);
  }
  return out;
}

std::vector<AgentSpec> build_pools(const EngagementGraph& g, const PoolConfig& pools,
                                   std::uint64_t seed) {
  // Crowd workers first: their candidate set is the scarcest and overlaps the
  // cyborg degree rule.
  std::vector<int> crowd, cyborg, bot;
  if (pools.crowd > 0)
    crowd = select_agent_pool(g, AgentPoolCriteria::for_type(AgentType::CrowdWorker), pools.crowd,
                              seed + 2);
  if (pools.cyborg > 0)
    cyborg = select_agent_pool(g, AgentPoolCriteria::for_type(AgentType::Cyborg), pools.cyborg,
                               seed + 1, crowd);
  if (pools.bot > 0) {
    std::vector<int> taken = crowd;
    taken.insert(taken.end(), cyborg.begin(), cyborg.end());
    bot = select_agent_pool(g, AgentPoolCriteria::for_type(AgentType::Bot), pools.bot, seed, taken);
  }
  AgentSpec bot_spec = AgentSpec::make(AgentType::Bot, std::move(bot));
  bot_spec.per_user_edge_budget = pools.bot_budget;
  AgentSpec cyborg_spec = AgentSpec::make(AgentType::Cyborg, std::move(cyborg));
  cyborg_spec.per_user_edge_budget = pools.cyborg_budget;
  AgentSpec crowd_spec = AgentSpec::make(AgentType::CrowdWorker, std::move(crowd));
  crowd_spec.per_user_edge_budget = pools.crowd_budget;
  return {std::move(bot_spec), std::move(cyborg_spec), std::move(crowd_spec)};
}

std::vector<int> good_user_pool(const EngagementGraph& g, int size, std::uint64_t seed) {
  std::vector<int> candidates;
  for (int u = 0; u < g.user_count(); ++u) {
    if (g.user_neighbors(u).empty()) continue;
    if (user_fake_share_ratio(g, u) < 0.2) candidates.push_back(u);
  }
  if (static_cast<int>(candidates.size()) < size)
    throw InsufficientCandidates("good_user_pool: " + std::to_string(candidates.size()) +
                                 " candidates for pool of " + std::to_string(size));
  Rng rng(seed);
  auto pool = sample_without_replacement(std::move(candidates), size, rng);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<std::vector<int>> degree_buckets(const EngagementGraph& g,
                                             const std::vector<int>& posts) {
  std::vector<std::vector<int>> buckets(3);
  for (int v : posts) {
    const int d = degree(g, post_ref(v));
    if (d < 10)
      buckets[0].push_back(v);
    else if (d < 100)
      buckets[1].push_back(v);
    else
      buckets[2].push_back(v);
  }
  return buckets;
}

const char* bucket_label(int bucket) {
  switch (bucket) {
    case 0:
      return "[0;10)";
    case 1:
      return "[10;100)";
    case 2:
      return "[100;inf)";
  }
  return "all";
}

// --- run_experiment -----------------------------------------------------------

namespace {

nlohmann::json config_echo(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["attacker"] = attacker_name(cfg.attacker);
  j["arch"] = arch_name(cfg.arch);
  j["mode"] = mode_name(cfg.mode);
  j["graph"] = cfg.graph_path.empty()
                   ? nlohmann::json{{"users", cfg.generator.user_count},
                                    {"posts", cfg.generator.post_count},
                                    {"edges", cfg.generator.edge_count},
                                    {"seed", cfg.graph_seed}}
                   : nlohmann::json{{"path", cfg.graph_path}};
  j["pools"] = {{"bot", cfg.pools.bot},       {"cyborg", cfg.pools.cyborg},
                {"crowd", cfg.pools.crowd},   {"bot_budget", cfg.pools.bot_budget},
                {"cyborg_budget", cfg.pools.cyborg_budget},
                {"crowd_budget", cfg.pools.crowd_budget}};
  j["targets"] = {{"class", cfg.targets.label_class == 1 ? "fake" : "real"},
                  {"split", cfg.targets.split ? split_name(*cfg.targets.split) : "all"},
                  {"correct_only", cfg.targets.correct_only}};
  if (cfg.targets.min_degree) j["targets"]["min_degree"] = *cfg.targets.min_degree;
  if (cfg.targets.max_degree) j["targets"]["max_degree"] = *cfg.targets.max_degree;
  j["repetitions"] = cfg.repetitions;
  j["base_seed"] = cfg.base_seed;
  j["victim"] = cfg.use_victim;
  j["marl"] = {{"gamma", cfg.marl.gamma},
               {"episodes", cfg.marl.episodes},
               {"lr", cfg.marl.lr},
               {"batch_size", cfg.marl.batch_size},
               {"epsilon_decay", cfg.marl.epsilon_decay},
               {"qnet_hidden", cfg.marl.qnet_hidden_dim},
               {"qnet_head", cfg.marl.qnet_head_dim}};
  return j;
}

EngagementGraph graph_with_edges(const EngagementGraph& base, const std::vector<AddedEdge>& added) {
  auto edges = base.edges();
  edges.reserve(edges.size() + added.size());
  for (const AddedEdge& e : added) edges.emplace_back(e.user, e.post);
  return EngagementGraph(base.user_features, base.post_features, base.labels(), base.splits(),
                         std::move(edges));
}

std::shared_ptr<const EngagementGraph> augment_with_injected(
    const EngagementGraph& g, const std::vector<InjectedUser>& injected) {
  Matrix uf(g.user_count() + static_cast<int>(injected.size()), g.feature_dim());
  uf.topRows(g.user_count()) = g.user_features;
  for (size_t i = 0; i < injected.size(); ++i)
    uf.row(g.user_count() + static_cast<Eigen::Index>(i)) = injected[i].features;
  return std::make_shared<EngagementGraph>(std::move(uf), g.post_features, g.labels(), g.splits(),
                                           g.edges());
}

std::vector<AgentSpec> injected_specs(int base_users, const std::vector<InjectedUser>& injected) {
  std::vector<AgentSpec> specs;
  const AgentType types[] = {AgentType::Bot, AgentType::Cyborg, AgentType::CrowdWorker};
  for (AgentType t : types) {
    std::vector<int> users;
    for (size_t i = 0; i < injected.size(); ++i)
      if (injected[i].type == t) users.push_back(base_users + static_cast<int>(i));
    specs.push_back(AgentSpec::make(t, std::move(users)));
  }
  return specs;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.graph = std::make_shared<EngagementGraph>(
      cfg.graph_path.empty() ? generate_synthetic(cfg.generator, cfg.graph_seed)
                             : load_graph(cfg.graph_path));
  const EngagementGraph& g = *result.graph;

  GnnConfig model_cfg = GnnConfig::defaults(cfg.arch);
  model_cfg.hidden_dim = cfg.surrogate_hidden;
  TrainConfig tc;
  tc.epochs = cfg.surrogate_epochs;
  tc.lr = cfg.surrogate_lr;
  tc.momentum = cfg.surrogate_momentum;
  tc.seed = cfg.base_seed + 101;
  result.surrogate = train(make_gnn_model(model_cfg, g.feature_dim(), tc.seed), g, tc).model;
  if (cfg.use_victim) {
    TrainConfig vc = tc;
    vc.seed = cfg.base_seed + 202;
    result.reporting_model = train(make_gnn_model(model_cfg, g.feature_dim(), vc.seed), g, vc).model;
  } else {
    result.reporting_model = result.surrogate;
  }

  result.targets = select_targets(g, result.reporting_model, cfg.targets);
  if (result.targets.empty()) throw EmptyTargets("run_experiment: target selector matched no posts");
  result.specs = build_pools(g, cfg.pools, cfg.base_seed + 303);

  const nlohmann::json echo = config_echo(cfg);
  double sr_sum = 0.0, edges_sum = 0.0;
  long long wall_sum = 0;

  for (int r = 0; r < cfg.repetitions; ++r) {
    const std::uint64_t seed_r = cfg.base_seed + static_cast<std::uint64_t>(r);
    const auto t0 = std::chrono::steady_clock::now();

    AttackReport rep;
    std::vector<InjectedUser> injected;
    std::vector<EpisodeStats> history;
    switch (cfg.attacker) {
      case AttackerKind::Marl: {
        MarlConfig mc = cfg.marl;
        mc.seed = seed_r;
        MarlResult trained =
            train_marl(result.graph, result.specs, result.targets, result.surrogate, cfg.mode, mc);
        history = trained.history;
        rep = attack(result.graph, result.specs, result.targets, result.surrogate, cfg.mode,
                     trained.qnets);
        break;
      }
      case AttackerKind::RdEdge:
        rep = rd_edge(result.graph, result.specs, result.targets, cfg.mode, result.surrogate,
                      seed_r);
        break;
      case AttackerKind::RdNode: {
        RdNodeReport rn =
            rd_node(result.graph, result.targets, cfg.mode, result.surrogate, seed_r);
        rep = std::move(rn.report);
        injected = std::move(rn.injected);
        break;
      }
      case AttackerKind::RlA1:
      case AttackerKind::RlA2:
      case AttackerKind::RlA3: {
        const int idx = cfg.attacker == AttackerKind::RlA1   ? 0
                        : cfg.attacker == AttackerKind::RlA2 ? 1
                                                             : 2;
        MarlConfig mc = cfg.marl;
        mc.seed = seed_r;
        SingleAgentResult sr = single_agent_rl(result.graph, result.specs[idx], result.targets,
                                               result.surrogate, cfg.mode, mc);
        rep = std::move(sr.report);
        history = std::move(sr.history);
        break;
      }
    }

    // Reported success rate: replay the logged edges onto the clean graph and
    // evaluate against the reporting model.
    const EngagementGraph base_for_eval =
        injected.empty() ? g : *augment_with_injected(g, injected);
    const EngagementGraph final_graph = graph_with_edges(base_for_eval, rep.edges);
    const double reported_sr = success_rate(result.reporting_model, final_graph, result.targets);

    const auto t1 = std::chrono::steady_clock::now();
    const long long wall =
        cfg.emit_timings
            ? std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()
            : 0;

    CampaignLog log;
    log.seed = seed_r;
    log.success_rate = reported_sr;
    log.edges = rep.edges;
    log.injected = injected;
    log.json["config"] = echo;
    log.json["seed"] = seed_r;
    log.json["success_rate"] = reported_sr;
    log.json["surrogate_success_rate"] = rep.success_rate;
    log.json["targets"] = result.targets;
    nlohmann::json edges_json = nlohmann::json::array();
    for (const AddedEdge& e : rep.edges)
      edges_json.push_back({e.user, e.post, e.agent_id, e.step});
    log.json["edges"] = std::move(edges_json);
    if (!injected.empty()) {
      nlohmann::json inj = nlohmann::json::array();
      for (const InjectedUser& u : injected) {
        std::vector<double> f(u.features.data(), u.features.data() + u.features.size());
        inj.push_back({{"type", agent_type_name(u.type)}, {"features", f}});
      }
      log.json["injected_users"] = std::move(inj);
    }
    if (!history.empty()) {
      nlohmann::json eps = nlohmann::json::array();
      for (const EpisodeStats& s : history)
        eps.push_back({{"reward", s.total_reward}, {"success_rate", s.success_rate}});
      log.json["episodes"] = std::move(eps);
    }
    {
      const Matrix proba = predict_proba(result.reporting_model, final_graph);
      nlohmann::json per_target = nlohmann::json::array();
      for (size_t i = 0; i < result.targets.size(); ++i) {
        const int v = result.targets[i];
        per_target.push_back({{"post", v},
                              {"label", g.label(v)},
                              {"flipped", static_cast<bool>(rep.flipped[i])},
                              {"prob_fake", proba(v, 1)}});
      }
      log.json["per_target"] = std::move(per_target);
    }

    ReportRow row;
    row.attacker = attacker_name(cfg.attacker);
    row.arch = arch_name(cfg.arch);
    row.mode = mode_name(cfg.mode);
    row.target_class = cfg.targets.label_class == 1 ? "fake" : "real";
    row.bucket = "all";
    row.seed = std::to_string(seed_r);
    row.success_rate = reported_sr;
    row.edges_added = static_cast<double>(rep.edges.size());
    row.wall_ms = wall;

    sr_sum += reported_sr;
    edges_sum += row.edges_added;
    wall_sum += wall;
    result.rows.push_back(std::move(row));
    result.logs.push_back(std::move(log));
  }

  ReportRow mean = result.rows.front();
  mean.seed = "mean";
  mean.success_rate = sr_sum / cfg.repetitions;
  mean.edges_added = edges_sum / cfg.repetitions;
  mean.wall_ms = wall_sum / cfg.repetitions;
  result.rows.push_back(std::move(mean));
  return result;
}

std::optional<std::string> audit_campaign(const ExperimentResult& result, const CampaignLog& log,
                                          AttackMode mode) {
  try {
    std::shared_ptr<const EngagementGraph> base =
        log.injected.empty() ? result.graph
                             : augment_with_injected(*result.graph, log.injected);
    const std::vector<AgentSpec> specs =
        log.injected.empty() ? result.specs
                             : injected_specs(result.graph->user_count(), log.injected);
    CampaignContext ctx(specs, result.targets, mode);
    // apply_action revalidates budgets, duplicates and mode legality per edge.
    const GameState state = GameState::replay(base, ctx, log.edges);
    const double sr = success_rate(result.reporting_model, state, result.targets);
    if (sr != log.success_rate)
      return "replayed success rate " + std::to_string(sr) + " != logged " +
             std::to_string(log.success_rate);
    return std::nullopt;
  } catch (const std::exception& e) {
    return std::string("replay failed: ") + e.what();
  }
}

SuiteResult sweep_budget(ExperimentConfig base, AgentType agent, const std::vector<int>& sizes) {
  if (sizes.empty()) throw ConfigError("sweep_budget: no pool sizes given");
  SuiteResult out;
  for (int size : sizes) {
    ExperimentConfig cfg = base;
    cfg.pools.bot = agent == AgentType::Bot ? size : 0;
    cfg.pools.cyborg = agent == AgentType::Cyborg ? size : 0;
    cfg.pools.crowd = agent == AgentType::CrowdWorker ? size : 0;
    cfg.attacker = agent == AgentType::Bot      ? AttackerKind::RlA1
                   : agent == AgentType::Cyborg ? AttackerKind::RlA2
                                                : AttackerKind::RlA3;
    ExperimentResult run = run_experiment(cfg);
    const std::string bucket = "pool=" + std::to_string(size);
    for (ReportRow row : run.rows) {
      row.bucket = bucket;
      out.rows.push_back(std::move(row));
    }
    out.runs.push_back(std::move(run));
  }
  return out;
}

SuiteResult by_degree(ExperimentConfig base) {
  SuiteResult out;
  const std::pair<std::optional<int>, std::optional<int>> bounds[3] = {
      {std::nullopt, 10}, {10, 100}, {100, std::nullopt}};
  for (int b = 0; b < 3; ++b) {
    ExperimentConfig cfg = base;
    cfg.targets.min_degree = bounds[b].first;
    cfg.targets.max_degree = bounds[b].second;
    ExperimentResult run = run_experiment(cfg);
    for (ReportRow row : run.rows) {
      row.bucket = bucket_label(b);
      out.rows.push_back(std::move(row));
    }
    out.runs.push_back(std::move(run));
  }
  return out;
}

SuiteResult direct_vs_indirect(ExperimentConfig base, int good_pool_size) {
  SuiteResult out;
  // Build the shared graph and models once through a throwaway config so both
  // arms see identical surroundings; then run single-agent campaigns with a
  // good-user pool under each mode.
  base.validate();
  auto graph = std::make_shared<EngagementGraph>(
      base.graph_path.empty() ? generate_synthetic(base.generator, base.graph_seed)
                              : load_graph(base.graph_path));
  GnnConfig model_cfg = GnnConfig::defaults(base.arch);
  model_cfg.hidden_dim = base.surrogate_hidden;
  TrainConfig tc;
  tc.epochs = base.surrogate_epochs;
  tc.lr = base.surrogate_lr;
  tc.momentum = base.surrogate_momentum;
  tc.seed = base.base_seed + 101;
  GnnModel surrogate = train(make_gnn_model(model_cfg, graph->feature_dim(), tc.seed), *graph, tc).model;
  GnnModel reporting = surrogate;
  if (base.use_victim) {
    TrainConfig vc = tc;
    vc.seed = base.base_seed + 202;
    reporting = train(make_gnn_model(model_cfg, graph->feature_dim(), vc.seed), *graph, vc).model;
  }
  const std::vector<int> targets = select_targets(*graph, reporting, base.targets);
  if (targets.empty()) throw EmptyTargets("direct_vs_indirect: no targets");
  AgentSpec spec = AgentSpec::make(AgentType::CrowdWorker,
                                   good_user_pool(*graph, good_pool_size, base.base_seed + 303));

  for (AttackMode mode : {AttackMode::Direct, AttackMode::Indirect}) {
    double sr_sum = 0.0, edges_sum = 0.0;
    for (int r = 0; r < base.repetitions; ++r) {
      MarlConfig mc = base.marl;
      mc.seed = base.base_seed + static_cast<std::uint64_t>(r);
      SingleAgentResult res = single_agent_rl(graph, spec, targets, surrogate, mode, mc);
      const EngagementGraph final_graph = graph_with_edges(*graph, res.report.edges);
      const double sr = success_rate(reporting, final_graph, targets);
      ReportRow row;
      row.attacker = "rl-good";
      row.arch = arch_name(base.arch);
      row.mode = mode_name(mode);
      row.target_class = base.targets.label_class == 1 ? "fake" : "real";
      row.bucket = "all";
      row.seed = std::to_string(mc.seed);
      row.success_rate = sr;
      row.edges_added = static_cast<double>(res.report.edges.size());
      sr_sum += sr;
      edges_sum += row.edges_added;
      out.rows.push_back(std::move(row));
    }
    ReportRow mean = out.rows.back();
    mean.seed = "mean";
    mean.success_rate = sr_sum / base.repetitions;
    mean.edges_added = edges_sum / base.repetitions;
    out.rows.push_back(std::move(mean));
  }
  return out;
}

void write_experiment_outputs(const ExperimentResult& result, const std::string& out_dir,
                              const std::string& stem) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream csv(out_dir + "/" + stem + ".csv");
    if (!csv) throw Error("write_experiment_outputs: cannot open CSV");
    csv << rows_to_csv(result.rows);
  }
  for (size_t i = 0; i < result.logs.size(); ++i) {
    std::ofstream js(out_dir + "/" + stem + "_rep" + std::to_string(i) + ".json");
    if (!js) throw Error("write_experiment_outputs: cannot open JSON log");
    js << result.logs[i].json.dump(2) << '\n';
  }
}

}  // namespace attacklab
