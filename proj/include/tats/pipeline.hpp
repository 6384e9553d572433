#pragma once

#include "tats/codec.hpp"
#include "tats/evaluation.hpp"
#include "tats/prior_trainer.hpp"
#include "tats/run_config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tats {

struct CommandContext {
  RunConfig config;
  std::filesystem::path out;
  bool force = false;
  bool deterministic = false;
  std::ostream* log = nullptr;
};

// Output layout under ctx.out.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path data() const { return root / "data"; }
  std::filesystem::path codec_dir() const { return root / "codec"; }
  std::filesystem::path codec_ckpt() const { return codec_dir() / "codec.ckpt"; }
  std::filesystem::path tokens_dir() const { return root / "tokens"; }
  std::filesystem::path prior_dir(PriorKind kind) const { return root / ("prior_" + to_string(kind)); }
  std::filesystem::path prior_ckpt(PriorKind kind) const { return prior_dir(kind) / "prior.ckpt"; }
  std::filesystem::path classifier_dir() const { return root / "classifier"; }
  std::filesystem::path classifier_ckpt() const { return classifier_dir() / "classifier.ckpt"; }
  std::filesystem::path generate_dir(const std::string& name) const { return root / "generate" / name; }
};

void cmd_gen_data(const CommandContext& ctx);
void cmd_train_codec(const CommandContext& ctx, bool resume);
void cmd_train_prior(const CommandContext& ctx, PriorKind kind);
void cmd_train_classifier(const CommandContext& ctx);

struct GenerateRequest {
  std::optional<int64_t> frames;
  std::optional<std::string> mode;
  std::optional<int64_t> class_id;
  std::optional<std::filesystem::path> cond_tokens;
  // Subdirectory of <out>/generate; defaults to the mode name.
  std::optional<std::string> name;
};
std::filesystem::path cmd_generate(const CommandContext& ctx, const GenerateRequest& request);

struct EvaluateRequest {
  std::filesystem::path videos;
  std::optional<std::filesystem::path> report;
  std::optional<std::filesystem::path> plots;
  bool ccs = true;
};
MetricReport cmd_evaluate(const CommandContext& ctx, const EvaluateRequest& request);

// Overlays several reports' curves and writes a summary JSON.
void cmd_report(const CommandContext& ctx, const std::vector<std::filesystem::path>& reports,
                const std::filesystem::path& out_dir);

// Helpers shared with tests.
struct VideoSet {
  torch::Tensor videos;  // N x C x T x H x W
  std::vector<int64_t> labels;
};
VideoSet load_video_set(const std::filesystem::path& dir);

// Token grids of every `window`-frame window starting at multiples of `step`
// (plus real-frame context when the codec needs it). Returns N x t x h x w
// and the source video of each window.
std::pair<torch::Tensor, std::vector<int64_t>> tokenize_windows(VideoCodec& codec, const torch::Tensor& videos,
                                                                int64_t window, int64_t step);

VideoCodec load_codec(const std::filesystem::path& ckpt_path);

}  // namespace tats
