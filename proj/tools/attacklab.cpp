// attacklab: synthetic engagement graphs, GNN surrogates, and structural
// attack campaigns from one binary.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "attacklab/experiment.hpp"
#include "attacklab/gnn_io.hpp"
#include "attacklab/graph_io.hpp"

using namespace attacklab;

namespace {

std::uint64_t env_seed(std::uint64_t fallback) {
  if (const char* s = std::getenv("ATTACKLAB_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError("ATTACKLAB_SEED is not a number");
    }
  }
  return fallback;
}

/// Finds "--config <path>" / "--config=<path>" ahead of the real parse so the
/// file becomes the baseline and explicit flags override it.
std::string prescan_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

void add_generator_flags(CLI::App* cmd, GeneratorParams& p) {
  cmd->add_option("--users", p.user_count, "user count");
  cmd->add_option("--posts", p.post_count, "post count");
  cmd->add_option("--edges", p.edge_count, "edge count");
  cmd->add_option("--fake-fraction", p.fake_fraction);
  cmd->add_option("--bad-user-fraction", p.bad_user_fraction);
  cmd->add_option("--p-homophily", p.p_homophily);
  cmd->add_option("--feature-dim", p.feature_dim);
  cmd->add_option("--mean-separation", p.mean_separation);
  cmd->add_option("--viral-fake-degree", p.viral_fake_degree);
}

struct ExperimentFlags {
  std::string arch;
  std::string attacker;
  std::string mode;
  std::string target_class;
  std::string target_split;
  std::string out_dir = "out";
  std::string stem = "report";
  int max_degree = -2;  // -2 = not given, -1 = clear
  int min_degree = -2;
  bool no_victim = false;
};

void add_experiment_flags(CLI::App* cmd, ExperimentConfig& cfg, ExperimentFlags& fl) {
  cmd->add_option("--config", "experiment config file ([section] key=value)");
  cmd->add_option("--graph", cfg.graph_path, "load the graph from a file instead of generating");
  add_generator_flags(cmd, cfg.generator);
  cmd->add_option("--graph-seed", cfg.graph_seed);
  cmd->add_option("--arch", fl.arch, "gcn|gat|sage");
  cmd->add_option("--epochs", cfg.surrogate_epochs);
  cmd->add_option("--lr", cfg.surrogate_lr);
  cmd->add_option("--momentum", cfg.surrogate_momentum);
  cmd->add_option("--hidden", cfg.surrogate_hidden);
  cmd->add_option("--bots", cfg.pools.bot);
  cmd->add_option("--cyborgs", cfg.pools.cyborg);
  cmd->add_option("--crowd", cfg.pools.crowd);
  cmd->add_option("--bot-budget", cfg.pools.bot_budget);
  cmd->add_option("--cyborg-budget", cfg.pools.cyborg_budget);
  cmd->add_option("--crowd-budget", cfg.pools.crowd_budget);
  cmd->add_option("--target-class", fl.target_class, "fake|real");
  cmd->add_option("--target-split", fl.target_split, "train|val|test|all");
  cmd->add_option("--target-max-degree", fl.max_degree, "exclusive upper bound, -1 clears it");
  cmd->add_option("--target-min-degree", fl.min_degree, "inclusive lower bound, -1 clears it");
  cmd->add_flag("--include-misclassified", "keep posts the model already misclassifies");
  cmd->add_option("--mode", fl.mode, "direct|indirect");
  cmd->add_option("--attacker", fl.attacker, "marl|rd-edge|rd-node|rl-a1|rl-a2|rl-a3");
  cmd->add_option("--reps", cfg.repetitions);
  cmd->add_option("--seed", cfg.base_seed, "base seed (overrides ATTACKLAB_SEED)");
  cmd->add_flag("--no-victim", fl.no_victim, "evaluate against the surrogate itself");
  cmd->add_flag("--timings", cfg.emit_timings,
                "real wall times in the CSV (not byte-reproducible)");
  cmd->add_option("--episodes", cfg.marl.episodes);
  cmd->add_option("--marl-lr", cfg.marl.lr);
  cmd->add_option("--gamma", cfg.marl.gamma);
  cmd->add_option("--batch-size", cfg.marl.batch_size);
  cmd->add_option("--epsilon-decay", cfg.marl.epsilon_decay);
  cmd->add_option("--out", fl.out_dir, "output directory");
  cmd->add_option("--stem", fl.stem, "output file stem");
}

ExperimentConfig finish_config(const CLI::App* cmd, ExperimentConfig cfg,
                               const ExperimentFlags& fl) {
  if (!fl.arch.empty()) cfg.arch = parse_arch(fl.arch);
  if (!fl.attacker.empty()) cfg.attacker = parse_attacker(fl.attacker);
  if (!fl.mode.empty()) cfg.mode = parse_mode(fl.mode);
  if (!fl.target_class.empty()) {
    if (fl.target_class != "fake" && fl.target_class != "real")
      throw ConfigError("bad --target-class '" + fl.target_class + "'");
    cfg.targets.label_class = fl.target_class == "fake" ? 1 : 0;
  }
  if (!fl.target_split.empty()) {
    if (fl.target_split == "all")
      cfg.targets.split = std::nullopt;
    else if (fl.target_split == "train")
      cfg.targets.split = Split::Train;
    else if (fl.target_split == "val")
      cfg.targets.split = Split::Val;
    else if (fl.target_split == "test")
      cfg.targets.split = Split::Test;
    else
      throw ConfigError("bad --target-split '" + fl.target_split + "'");
  }
  if (fl.max_degree != -2)
    cfg.targets.max_degree = fl.max_degree >= 0 ? std::optional<int>(fl.max_degree) : std::nullopt;
  if (fl.min_degree != -2)
    cfg.targets.min_degree = fl.min_degree >= 0 ? std::optional<int>(fl.min_degree) : std::nullopt;
  if (cmd->count("--include-misclassified")) cfg.targets.correct_only = false;
  if (fl.no_victim) cfg.use_victim = false;
  if (!cmd->count("--seed")) cfg.base_seed = env_seed(cfg.base_seed);
  return cfg;
}

void write_suite(const SuiteResult& suite, const std::string& out_dir, const std::string& stem) {
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir + "/" + stem + ".csv");
  if (!csv) throw Error("cannot open " + out_dir + "/" + stem + ".csv");
  csv << rows_to_csv(suite.rows);
  for (size_t i = 0; i < suite.runs.size(); ++i)
    for (size_t r = 0; r < suite.runs[i].logs.size(); ++r) {
      std::ofstream js(out_dir + "/" + stem + "_run" + std::to_string(i) + "_rep" +
                       std::to_string(r) + ".json");
      js << suite.runs[i].logs[r].json.dump(2) << '\n';
    }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"attacklab: structural attacks on GNN-based fake-news detectors"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate a synthetic engagement graph");
  GeneratorParams gen_params;
  gen_params.user_count = 300;
  gen_params.post_count = 80;
  gen_params.edge_count = 900;
  std::uint64_t gen_seed = 42;
  std::string gen_out = "graph.txt";
  add_generator_flags(gen, gen_params);
  gen->add_option("--seed", gen_seed);
  gen->add_option("-o,--out", gen_out, "output file");

  auto* ts = app.add_subcommand("train-surrogate", "train a detector and save a checkpoint");
  std::string ts_graph, ts_arch = "gcn", ts_out = "model.txt", ts_metrics;
  TrainConfig ts_cfg;
  ts_cfg.lr = 0.02;
  ts_cfg.momentum = 0.9;
  int ts_hidden = 32;
  ts->add_option("--graph", ts_graph, "graph file")->required();
  ts->add_option("--arch", ts_arch, "gcn|gat|sage");
  ts->add_option("--epochs", ts_cfg.epochs);
  ts->add_option("--lr", ts_cfg.lr);
  ts->add_option("--momentum", ts_cfg.momentum);
  ts->add_option("--patience", ts_cfg.early_stop_patience);
  ts->add_option("--hidden", ts_hidden);
  ts->add_option("--seed", ts_cfg.seed);
  ts->add_option("-o,--out", ts_out, "checkpoint file");
  ts->add_option("--metrics-out", ts_metrics, "write test metrics to this JSON file");

  const std::string config_path = prescan_config(argc, argv);
  ExperimentConfig base_cfg =
      config_path.empty() ? ExperimentConfig::benchmark() : load_experiment_config(config_path);

  ExperimentConfig atk_cfg = base_cfg;
  ExperimentFlags atk_flags;
  auto* atk = app.add_subcommand("attack", "run one attack campaign with repetitions");
  add_experiment_flags(atk, atk_cfg, atk_flags);

  ExperimentConfig sweep_cfg = base_cfg;
  ExperimentFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep-budget", "single-agent attacks across pool sizes");
  add_experiment_flags(sweep, sweep_cfg, sweep_flags);
  std::string sweep_agent = "crowd";
  std::vector<int> sweep_sizes = {2, 4, 8};
  sweep->add_option("--agent", sweep_agent, "bot|cyborg|crowd");
  sweep->add_option("--sizes", sweep_sizes, "pool sizes to sweep")->delimiter(',');

  ExperimentConfig deg_cfg =
      config_path.empty() ? ExperimentConfig::degree_benchmark() : base_cfg;
  ExperimentFlags deg_flags;
  auto* deg = app.add_subcommand("by-degree", "attack each news-degree bucket separately");
  add_experiment_flags(deg, deg_cfg, deg_flags);

  ExperimentConfig dvi_cfg = base_cfg;
  ExperimentFlags dvi_flags;
  auto* dvi = app.add_subcommand("direct-vs-indirect",
                                 "paired direct/indirect campaigns with good users");
  add_experiment_flags(dvi, dvi_cfg, dvi_flags);
  int dvi_pool = 25;
  dvi->add_option("--good-users", dvi_pool, "good-user pool size");

  auto* rep = app.add_subcommand("report", "merge CSVs and append per-group means");
  std::vector<std::string> rep_inputs;
  std::string rep_out = "merged.csv";
  rep->add_option("--inputs", rep_inputs, "input CSV files")->required()->expected(-1);
  rep->add_option("-o,--out", rep_out, "merged CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      EngagementGraph g = generate_synthetic(
          gen_params, gen->count("--seed") ? gen_seed : env_seed(gen_seed));
      save_graph(g, gen_out);
      std::cout << "wrote " << gen_out << " (" << g.user_count() << " users, " << g.post_count()
                << " posts, " << g.edge_count() << " edges)\n";
      return 0;
    }
    if (ts->parsed()) {
      EngagementGraph g = load_graph(ts_graph);
      GnnConfig cfg = GnnConfig::defaults(parse_arch(ts_arch));
      cfg.hidden_dim = ts_hidden;
      TrainResult result = train_new(cfg, g, ts_cfg);
      save_model(result.model, ts_out);
      const Metrics m = metrics(result.model, g, Split::Test);
      std::cout << "test accuracy " << m.accuracy << ", f1 " << m.f1 << ", best epoch "
                << result.best_epoch << "\n";
      if (!ts_metrics.empty()) {
        nlohmann::json j = {{"accuracy", m.accuracy},
                            {"f1", m.f1},
                            {"best_epoch", result.best_epoch},
                            {"epochs_run", result.history.size()}};
        std::ofstream out(ts_metrics);
        out << j.dump(2) << '\n';
      }
      return 0;
    }
    if (atk->parsed()) {
      ExperimentConfig cfg = finish_config(atk, atk_cfg, atk_flags);
      ExperimentResult result = run_experiment(cfg);
      write_experiment_outputs(result, atk_flags.out_dir, atk_flags.stem);
      std::cout << rows_to_csv(result.rows);
      return 0;
    }
    if (sweep->parsed()) {
      AgentType agent = sweep_agent == "bot"      ? AgentType::Bot
                        : sweep_agent == "cyborg" ? AgentType::Cyborg
                        : sweep_agent == "crowd"
                            ? AgentType::CrowdWorker
                            : throw ConfigError("bad --agent '" + sweep_agent + "'");
      ExperimentConfig cfg = finish_config(sweep, sweep_cfg, sweep_flags);
      SuiteResult suite = sweep_budget(cfg, agent, sweep_sizes);
      write_suite(suite, sweep_flags.out_dir, sweep_flags.stem);
      std::cout << rows_to_csv(suite.rows);
      return 0;
    }
    if (deg->parsed()) {
      ExperimentConfig cfg = finish_config(deg, deg_cfg, deg_flags);
      SuiteResult suite = by_degree(cfg);
      write_suite(suite, deg_flags.out_dir, deg_flags.stem);
      std::cout << rows_to_csv(suite.rows);
      return 0;
    }
    if (dvi->parsed()) {
      ExperimentConfig cfg = finish_config(dvi, dvi_cfg, dvi_flags);
      SuiteResult suite = direct_vs_indirect(cfg, dvi_pool);
      write_suite(suite, dvi_flags.out_dir, dvi_flags.stem);
      std::cout << rows_to_csv(suite.rows);
      return 0;
    }
    if (rep->parsed()) {
      std::vector<ReportRow> all;
      for (const std::string& path : rep_inputs) {
        std::ifstream in(path);
        if (!in) throw Error("report: cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        for (ReportRow& row : csv_to_rows(ss.str()))
          if (row.seed != "mean") all.push_back(std::move(row));
      }
      std::map<std::string, std::vector<const ReportRow*>> groups;
      for (const ReportRow& row : all)
        groups[row.attacker + '|' + row.arch + '|' + row.mode + '|' + row.target_class + '|' +
               row.bucket]
            .push_back(&row);
      std::vector<ReportRow> merged = all;
      for (const auto& [key, members] : groups) {
        ReportRow mean = *members.front();
        mean.seed = "mean";
        mean.success_rate = 0.0;
        mean.edges_added = 0.0;
        mean.wall_ms = 0;
        for (const ReportRow* r : members) {
          mean.success_rate += r->success_rate;
          mean.edges_added += r->edges_added;
          mean.wall_ms += r->wall_ms;
        }
        const auto n = static_cast<double>(members.size());
        mean.success_rate /= n;
        mean.edges_added /= n;
        mean.wall_ms = static_cast<long long>(mean.wall_ms / members.size());
        merged.push_back(std::move(mean));
      }
      std::ofstream out(rep_out);
      if (!out) throw Error("report: cannot open " + rep_out);
      out << rows_to_csv(merged);
      std::cout << "wrote " << rep_out << " (" << merged.size() << " rows)\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
