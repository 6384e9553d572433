#include "tats/cli.hpp"

#include "tats/error.hpp"
#include "tats/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace tats {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-agnostic VQ codec and transformer priors for long video generation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out_dir;
  bool force = false;
  bool deterministic = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Global seed (overrides the config)");
  app.add_option("--out", out_dir, "Output directory (overrides the config)");
  app.add_flag("--force", force, "Overwrite existing outputs");
  app.add_flag("--deterministic", deterministic, "Single-threaded, seeded execution");

  auto* gen_data = app.add_subcommand("gen-data", "Write the synthetic blob dataset");
  auto* train_codec = app.add_subcommand("train-codec", "Train the VQ codec with its discriminators");
  bool resume = false;
  train_codec->add_flag("--resume", resume, "Continue from the existing codec checkpoint");

  auto* train_prior = app.add_subcommand("train-prior", "Train a transformer prior on codec tokens");
  std::string kind = "ar";
  train_prior->add_option("--kind", kind, "ar | ar_sparse | interp")->check(CLI::IsMember({"ar", "ar_sparse", "interp"}));

  auto* train_classifier = app.add_subcommand("train-classifier", "Train the clip classifier used by evaluation");

  auto* generate_cmd = app.add_subcommand("generate", "Sample token sequences and decode them to videos");
  GenerateRequest gen;
  std::string mode;
  std::string cond_tokens;
  std::string gen_name;
  int64_t frames = 0;
  int64_t class_id = -1;
  generate_cmd->add_option("--frames", frames, "Frames per video");
  generate_cmd->add_option("--mode", mode, "base | hier")->check(CLI::IsMember({"base", "hier"}));
  generate_cmd->add_option("--class", class_id, "Class label to condition on");
  generate_cmd->add_option("--cond-tokens", cond_tokens, "VTOK file of condition ids to prepend");
  generate_cmd->add_option("--name", gen_name, "Output subdirectory under <out>/generate");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compute the metric report of a video directory");
  EvaluateRequest eval;
  std::string videos, report, plots;
  bool ccs = false;
  evaluate_cmd->add_option("--videos", videos, "Frame directory of videos")->required();
  evaluate_cmd->add_option("--report", report, "Report JSON path");
  evaluate_cmd->add_option("--plots", plots, "Directory for PNG curves");
  evaluate_cmd->add_flag("--ccs", ccs, "Also compute CCS/ICS/IS (needs the classifier)");

  auto* report_cmd = app.add_subcommand("report", "Overlay metric reports and summarise them");
  std::vector<std::string> reports;
  std::string report_out;
  report_cmd->add_option("--reports", reports, "Report JSON files")->required();
  report_cmd->add_option("--dir", report_out, "Output directory (default <out>/report)");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    CommandContext ctx;
    ctx.config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) ctx.config.seed = *seed;
    if (!out_dir.empty()) ctx.config.out = out_dir;
    ctx.config.validate();
    ctx.out = ctx.config.out;
    ctx.force = force;
    ctx.deterministic = deterministic;
    ctx.log = &out;
    if (deterministic) {
      torch::set_num_threads(1);
      at::globalContext().setDeterministicAlgorithms(true, false);
    }
    torch::manual_seed(derive_seed(ctx.config.seed, "torch"));

    if (gen_data->parsed()) {
      cmd_gen_data(ctx);
    } else if (train_codec->parsed()) {
      cmd_train_codec(ctx, resume);
    } else if (train_prior->parsed()) {
      cmd_train_prior(ctx, parse_prior_kind(kind));
    } else if (train_classifier->parsed()) {
      cmd_train_classifier(ctx);
    } else if (generate_cmd->parsed()) {
      if (frames > 0) gen.frames = frames;
      if (!mode.empty()) gen.mode = mode;
      if (class_id >= 0) gen.class_id = class_id;
      if (!cond_tokens.empty()) gen.cond_tokens = cond_tokens;
      if (!gen_name.empty()) gen.name = gen_name;
      cmd_generate(ctx, gen);
    } else if (evaluate_cmd->parsed()) {
      eval.videos = videos;
      if (!report.empty()) eval.report = report;
      if (!plots.empty()) eval.plots = plots;
      eval.ccs = ccs;
      auto r = cmd_evaluate(ctx, eval);
      out << r.to_json().dump() << "\n";
    } else if (report_cmd->parsed()) {
      std::vector<std::filesystem::path> paths(reports.begin(), reports.end());
      cmd_report(ctx, paths, report_out.empty() ? ctx.out / "report" : std::filesystem::path(report_out));
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace tats
