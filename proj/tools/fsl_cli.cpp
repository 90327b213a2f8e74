#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "fsl/config.hpp"
#include "fsl/harness.hpp"

// Command-line front end. Exit codes: 0 on success, 2 on configuration
// errors (bad flags, unreadable or invalid config), 3 on runtime failures.

namespace {

using namespace fsl;

struct CliArgs {
  std::string config_path;
  std::string out_path;
  std::string model_path;
  std::string data_path;
  std::string curves_path;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  std::size_t workers = 0;
  std::size_t index = 0;
};

void apply_overrides(const CLI::App* sub, const CliArgs& args, RunConfig& cfg) {
  if (sub->count("--episodes") > 0) cfg.eval.n_episodes = args.episodes;
  if (sub->count("--workers") > 0) cfg.eval.workers = args.workers;
}

int cmd_train(const CLI::App* sub, const CliArgs& args) {
  RunConfig cfg = load_run_config(args.config_path);
  apply_overrides(sub, args, cfg);
  if (!cfg.training.enabled)
    raise(errc::invalid_config, "train needs \"training\": {\"enabled\": true}");
  FeatureSet data = resolve_dataset(cfg.dataset);
  if (has_split(cfg.split)) cfg.split.validate(data.num_classes());
  TrainResult res = train_embedding(cfg, data, args.seed);
  save_model(res.model, args.out_path, config_fingerprint(cfg));
  if (!args.curves_path.empty()) save_curves(res.curves, args.curves_path);
  const EpochStats& last = res.curves.back();
  std::fprintf(stderr, "train: %zu epochs, final ce %.6f hct %.6f rot %.6f -> %s\n",
               res.curves.size(), last.loss_ce, last.loss_hct, last.loss_rot,
               args.out_path.c_str());
  return 0;
}

int cmd_embed(const CliArgs& args) {
  RunConfig cfg = load_run_config(args.config_path);
  MlpModel model = load_model(args.model_path);
  FeatureSet data =
      args.data_path.empty() ? resolve_dataset(cfg.dataset) : load_feature_set(args.data_path);
  FeatureSet embedded = embed_dataset(model, data);
  save_feature_set(embedded, args.out_path);
  std::fprintf(stderr, "embed: %zu examples, %zu -> %zu dims -> %s\n", embedded.size(),
               data.dim(), embedded.dim(), args.out_path.c_str());
  return 0;
}

int cmd_eval(const CLI::App* sub, const CliArgs& args) {
  RunConfig cfg = load_run_config(args.config_path);
  apply_overrides(sub, args, cfg);
  EvalReport rep;
  if (!args.model_path.empty()) {
    FeatureSet data = resolve_dataset(cfg.dataset);
    if (has_split(cfg.split)) cfg.split.validate(data.num_classes());
    MlpModel model = load_model(args.model_path);
    FeatureSet eval_set = embed_dataset(model, novel_subset(cfg, data));
    rep = evaluate(eval_set, build_eval_request(cfg, args.seed));
  } else {
    rep = run_eval(cfg, args.seed);
  }
  if (args.out_path.empty()) std::printf("%s\n", report_json(rep).dump(2).c_str());
  else save_report(rep, args.out_path);
  std::fprintf(stderr, "eval[%s]: %zu episodes, mean %.4f +- %.4f, %.2f s\n",
               rep.strategy.c_str(), rep.n_episodes, rep.mean_accuracy, rep.ci95_halfwidth,
               rep.wall_time_sec);
  return 0;
}

int cmd_ablate(const CLI::App* sub, const CliArgs& args) {
  RunConfig cfg = load_run_config(args.config_path);
  apply_overrides(sub, args, cfg);
  std::vector<AblationRow> rows = run_ablation(cfg, args.seed);
  save_ablation_csv(rows, args.out_path);
  for (const AblationRow& r : rows) {
    if (r.ok)
      std::fprintf(stderr, "ablate %-32s mean %.4f +- %.4f\n", r.name.c_str(),
                   r.report.mean_accuracy, r.report.ci95_halfwidth);
    else
      std::fprintf(stderr, "ablate %-32s FAILED: %s\n", r.name.c_str(), r.error.c_str());
  }
  return 0;
}

int cmd_export_traj(const CliArgs& args) {
  RunConfig cfg = load_run_config(args.config_path);
  export_episode_trajectory(cfg, args.seed, args.index, args.out_path);
  std::fprintf(stderr, "export-traj: episode %zu -> %s\n", args.index, args.out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot episodic training and evaluation toolkit"};
  app.require_subcommand(1);
  CliArgs args;

  CLI::App* train = app.add_subcommand("train", "fit an embedding on the base split");
  train->add_option("--config", args.config_path, "JSON run config")->required();
  train->add_option("--seed", args.seed, "master seed");
  train->add_option("--out", args.out_path, "model checkpoint path")->required();
  train->add_option("--curves", args.curves_path, "also write per-epoch loss CSV");
  train->add_option("--episodes", args.episodes, "override eval episode count");
  train->add_option("--workers", args.workers, "override worker count");

  CLI::App* embed = app.add_subcommand("embed", "run a model over a dataset");
  embed->add_option("--config", args.config_path, "JSON run config")->required();
  embed->add_option("--model", args.model_path, "model checkpoint")->required();
  embed->add_option("--data", args.data_path, "input dataset (default: config dataset)");
  embed->add_option("--out", args.out_path, "output feature file")->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate one configuration");
  eval->add_option("--config", args.config_path, "JSON run config")->required();
  eval->add_option("--seed", args.seed, "master seed");
  eval->add_option("--episodes", args.episodes, "override eval episode count");
  eval->add_option("--workers", args.workers, "override worker count");
  eval->add_option("--model", args.model_path, "embed through this checkpoint first");
  eval->add_option("--out", args.out_path, "report path (default: stdout)");

  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation grid");
  ablate->add_option("--config", args.config_path, "JSON run config")->required();
  ablate->add_option("--seed", args.seed, "master seed");
  ablate->add_option("--episodes", args.episodes, "override eval episode count");
  ablate->add_option("--workers", args.workers, "override worker count");
  ablate->add_option("--out", args.out_path, "table CSV path")->required();

  CLI::App* traj = app.add_subcommand("export-traj", "dump one episode's prototype path");
  traj->add_option("--config", args.config_path, "JSON run config")->required();
  traj->add_option("--seed", args.seed, "master seed");
  traj->add_option("--index", args.index, "episode index");
  traj->add_option("--out", args.out_path, "trajectory CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(train, args);
    if (embed->parsed()) return cmd_embed(args);
    if (eval->parsed()) return cmd_eval(eval, args);
    if (ablate->parsed()) return cmd_ablate(ablate, args);
    if (traj->parsed()) return cmd_export_traj(args);
  } catch (const fsl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == fsl::errc::invalid_config ? 2 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
