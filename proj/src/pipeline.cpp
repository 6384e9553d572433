#include "tats/pipeline.hpp"

#include "tats/checkpoint.hpp"
#include "tats/codec_trainer.hpp"
#include "tats/error.hpp"
#include "tats/generation.hpp"
#include "tats/image_io.hpp"
#include "tats/tensor_file.hpp"
#include "tats/tokens.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;

namespace tats {

namespace {

std::ostream& logger(const CommandContext& ctx) { return ctx.log ? *ctx.log : std::cerr; }

void prepare_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw ConfigError("output " + dir.string() + " already exists; pass --force to overwrite");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_provenance(const fs::path& dir, const CommandContext& ctx) {
  write_text(dir / "config.resolved.json", to_json(ctx.config).dump(2) + "\n");
  write_text(dir / "version.txt", std::string(kToolVersion) + "\n");
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw ConfigError(what + " not found at " + path.string());
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return Json::parse(in);
}

struct PriorBundle {
  Transformer model{nullptr};
  TokenVocab vocab;
  int64_t train_slices = 0;
  int64_t anchor_interval = 0;
  int64_t slice_h = 0;
  int64_t slice_w = 0;
  bool conditional = false;
};

PriorBundle load_prior(const fs::path& path) {
  require_file(path, "prior checkpoint");
  auto ckpt = load_checkpoint(path);
  PriorBundle b;
  const auto& m = ckpt.metadata;
  b.model = Transformer(transformer_config_from_json(m.at("prior.config")));
  b.model->load(ckpt);
  b.model->eval();
  b.vocab.codebook_size = m.at("K").get<int64_t>();
  b.vocab.n_cond = m.at("n_cond").get<int64_t>();
  b.train_slices = m.at("train_slices").get<int64_t>();
  b.anchor_interval = m.at("anchor_interval").get<int64_t>();
  b.slice_h = m.at("slice_h").get<int64_t>();
  b.slice_w = m.at("slice_w").get<int64_t>();
  b.conditional = m.at("conditional").get<bool>();
  return b;
}

void write_videos(const fs::path& dir, const torch::Tensor& videos, const std::vector<int64_t>& labels,
                  bool gifs) {
  auto clips = unstack_channels_first(videos.clamp(-1.0, 1.0));
  write_frame_directory(dir / "videos", clips, labels);
  if (!gifs) return;
  fs::create_directories(dir / "gifs");
  for (size_t i = 0; i < clips.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "video_%05zu.gif", i);
    write_gif(dir / "gifs" / name, to_uint8(clips[i].frames()));
  }
}

}  // namespace

VideoSet load_video_set(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("video directory " + path.string() + " does not exist");
  // A generate output directory keeps its frames under videos/.
  const fs::path dir = fs::is_directory(path / "videos") ? path / "videos" : path;
  auto fd = read_frame_directory(dir);
  if (fd.videos.empty()) throw ConfigError("no videos under " + dir.string());
  const int64_t t = fd.videos.front().length();
  for (const auto& v : fd.videos) {
    if (v.length() != t) throw ConfigError("videos under " + dir.string() + " differ in length");
  }
  return VideoSet{stack_channels_first(fd.videos), fd.labels};
}

std::pair<torch::Tensor, std::vector<int64_t>> tokenize_windows(VideoCodec& codec, const torch::Tensor& videos,
                                                                int64_t window, int64_t step) {
  const int64_t ctx = codec.config().padding.mode == PaddingMode::kRealFrame ? codec.real_frames_required() : 0;
  const int64_t t = videos.size(2);
  std::vector<int64_t> starts;
  for (int64_t s = ctx; s + window + ctx <= t; s += step) starts.push_back(s);
  if (starts.empty()) throw ConfigError("videos are too short for " + std::to_string(window) + "-frame windows");
  std::vector<torch::Tensor> grids;
  std::vector<int64_t> sources;
  for (int64_t s : starts) {
    for (int64_t i = 0; i < videos.size(0); i += 32) {
      const int64_t n = std::min<int64_t>(32, videos.size(0) - i);
      auto batch = videos.narrow(0, i, n);
      std::optional<TemporalContext> context;
      if (ctx > 0) context = TemporalContext{batch.narrow(2, s - ctx, ctx), batch.narrow(2, s + window, ctx)};
      grids.push_back(codec.tokenize(batch.narrow(2, s, window).contiguous(), context));
      for (int64_t k = 0; k < n; ++k) sources.push_back(i + k);
    }
  }
  return {torch::cat(grids, 0), sources};
}

VideoCodec load_codec(const fs::path& ckpt_path) {
  require_file(ckpt_path, "codec checkpoint");
  auto ckpt = load_checkpoint(ckpt_path);
  VideoCodec codec(codec_config_from_json(ckpt.metadata.at("codec_config")));
  codec.load(ckpt);
  codec.train(false);
  return codec;
}

void cmd_gen_data(const CommandContext& ctx) {
  const auto& d = ctx.config.data;
  RunPaths paths{ctx.out};
  prepare_dir(paths.data(), ctx.force);
  BlobDatasetOptions opts{d.channels, d.period, d.sigma};
  auto data = make_bouncing_blob_dataset(d.n_videos, d.length, {d.height, d.width}, d.n_classes,
                                         derive_seed(ctx.config.seed, "data"), opts);
  std::vector<VideoClip> videos;
  std::vector<int64_t> labels;
  for (auto& item : data) {
    videos.push_back(item.clip);
    labels.push_back(item.class_id);
  }
  write_frame_directory(paths.data(), videos, labels);
  write_provenance(paths.data(), ctx);
  logger(ctx) << "wrote " << videos.size() << " videos to " << paths.data() << "\n";
}

void cmd_train_codec(const CommandContext& ctx, bool resume) {
  const auto& cfg = ctx.config;
  if (cfg.codec.padding.mode == PaddingMode::kRealFrame) {
    throw ConfigError("train-codec needs a padded mode (zero, replicate, reflect or circular); real_frame is an "
                      "inference-time setting");
  }
  RunPaths paths{ctx.out};
  require_file(paths.data(), "dataset");
  auto fd = read_frame_directory(paths.data());
  DatasetSpec spec;
  spec.clip_length = cfg.data.clip_length;
  spec.frame_stride = cfg.data.frame_stride;
  const int64_t span = spec.clip_length * spec.frame_stride;
  std::vector<size_t> usable;
  for (size_t i = 0; i < fd.videos.size(); ++i) {
    if (fd.videos[i].length() >= span) usable.push_back(i);
  }
  if (usable.empty()) throw ConfigError("no video is long enough for a training clip");

  auto train_cfg = cfg.adversarial;
  train_cfg.seed = derive_seed(cfg.seed, "codec") ^ cfg.adversarial.seed;
  torch::manual_seed(train_cfg.seed);
  VideoCodec codec(cfg.codec);
  DiscriminatorPair discs(cfg.discriminator);
  CodecTrainer trainer(codec, discs, train_cfg);

  std::mt19937_64 rng(derive_seed(cfg.seed, "codec-batches"));
  if (resume) {
    require_file(paths.codec_ckpt(), "codec checkpoint to resume");
    auto ckpt = load_checkpoint(paths.codec_ckpt());
    codec.load(ckpt);
    discs.load(ckpt);
    trainer.load(ckpt);
    std::istringstream state(ckpt.metadata.at("batch_rng").get<std::string>());
    state >> rng;
    logger(ctx) << "resuming codec training at step " << trainer.current_step() << "\n";
  } else {
    prepare_dir(paths.codec_dir(), ctx.force);
  }
  write_provenance(paths.codec_dir(), ctx);

  auto save = [&]() {
    Checkpoint ckpt;
    codec.save(ckpt);
    discs.save(ckpt);
    trainer.save(ckpt);
    std::ostringstream state;
    state << rng;
    ckpt.metadata["batch_rng"] = state.str();
    ckpt.metadata["seed"] = cfg.seed;
    save_checkpoint(paths.codec_ckpt(), ckpt);
  };

  std::ofstream log_file(paths.codec_dir() / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  int64_t cursor = trainer.current_step() * cfg.codec_training.batch_size * train_cfg.accumulate;
  auto next_clip = [&]() {
    const auto& video = fd.videos[usable[static_cast<size_t>(cursor % static_cast<int64_t>(usable.size()))]];
    int64_t start = 0;
    if (cfg.data.random_offsets) {
      start = std::uniform_int_distribution<int64_t>(0, video.length() - span)(rng);
    } else {
      // Deterministic sweep of non-overlapping windows.
      const int64_t n_windows = video.length() / span;
      start = ((cursor / static_cast<int64_t>(usable.size())) % n_windows) * span;
    }
    ++cursor;
    return clip_strided(video, start, spec.clip_length, spec.frame_stride);
  };

  while (trainer.current_step() < cfg.codec_training.steps) {
    std::vector<torch::Tensor> micro;
    for (int64_t a = 0; a < train_cfg.accumulate; ++a) {
      std::vector<VideoClip> clips;
      for (int64_t b = 0; b < cfg.codec_training.batch_size; ++b) clips.push_back(next_clip());
      micro.push_back(stack_channels_first(clips));
    }
    auto log = trainer.step(micro);
    log_file << log.to_json().dump() << "\n";
    if (log.step % cfg.codec_training.log_every == 0) {
      logger(ctx) << "codec step " << log.step << " l_rec " << log.l_rec << " l_commit " << log.l_commit << "\n";
    }
    if (trainer.current_step() % cfg.codec_training.checkpoint_every == 0) save();
  }
  log_file.flush();
  save();
}

void cmd_train_prior(const CommandContext& ctx, PriorKind kind) {
  const auto& cfg = ctx.config;
  RunPaths paths{ctx.out};
  auto codec = load_codec(paths.codec_ckpt());
  auto set = load_video_set(paths.data());
  const auto& cc = codec.config();
  if (cc.codebook_size != cfg.codec.codebook_size) {
    throw ConfigError("codec checkpoint has K = " + std::to_string(cc.codebook_size) + " but the config says " +
                      std::to_string(cfg.codec.codebook_size));
  }
  const int64_t t = cfg.train_slices();
  const int64_t s = cfg.prior.anchor_interval;
  const int64_t clip_frames = t * cc.temporal_rate;

  // Base AR prior: standalone clip windows. Sparse AR and interpolation
  // priors: windows s times longer, from which anchors are every s-th slice.
  const int64_t window_frames = kind == PriorKind::kAr ? clip_frames : s * clip_frames;
  const int64_t step = kind == PriorKind::kAr ? cc.temporal_rate : clip_frames;
  auto [grids, sources] = tokenize_windows(codec, set.videos, window_frames, step);
  fs::create_directories(paths.tokens_dir());
  const auto [th, tw] = std::pair{grids.size(2), grids.size(3)};

  TokenVocab vocab{cc.codebook_size, cfg.prior.conditional ? cfg.data.n_classes : 0};
  VtokMetadata meta{th * tw, vocab.size(), vocab.codebook_size, vocab.n_cond,
                    Json{{"window_frames", window_frames}, {"kind", to_string(kind)}}};
  const std::string cache_name = kind == PriorKind::kAr ? "clips.vtok" : "long_clips.vtok";
  save_vtok(paths.tokens_dir() / cache_name, grids, meta);

  TokenCorpus corpus;
  corpus.grids = kind == PriorKind::kArSparse ? sparse_slices(grids, s) : grids;
  if (cfg.prior.conditional) {
    for (auto src : sources) {
      const int64_t label = set.labels.empty() ? -1 : set.labels[static_cast<size_t>(src)];
      if (label < 0 || label >= cfg.data.n_classes) throw ConfigError("conditional prior needs labels.tsv entries");
      corpus.labels.push_back(label);
    }
  }
  const int64_t window = kind == PriorKind::kInterp ? s + 1 : t;
  if (kind == PriorKind::kInterp && s < 2) throw ConfigError("interp prior needs anchor_interval >= 2");
  if (window > corpus.grids.size(1)) throw ConfigError("token windows are shorter than the training window");

  TransformerConfig tc{cfg.prior.n_layers, cfg.prior.n_heads, cfg.prior.embed_dim, 1, vocab.size(), cfg.prior.dropout};
  tc.max_positions = 1 + window * th * tw;
  const uint64_t seed = derive_seed(cfg.seed, "prior-" + to_string(kind)) ^ cfg.prior.training.seed;
  torch::manual_seed(seed);
  Transformer model(tc);
  PriorTrainer trainer(model, cfg.prior.training);
  std::mt19937_64 rng(seed);

  prepare_dir(paths.prior_dir(kind), ctx.force);
  write_provenance(paths.prior_dir(kind), ctx);
  std::ofstream log_file(paths.prior_dir(kind) / "train_log.jsonl");
  for (int64_t i = 0; i < cfg.prior.training.steps; ++i) {
    auto batch = sample_prior_batch(kind, corpus, window, cfg.prior.training.batch_size, vocab, cfg.prior.conditional, rng);
    if (i == 0) write_text(paths.prior_dir(kind) / "mask.txt", batch.layout.dump());
    const double nll = trainer.step(batch);
    log_file << Json{{"step", i}, {"nll", nll}}.dump() << "\n";
    if (i % 100 == 0) logger(ctx) << "prior " << to_string(kind) << " step " << i << " nll " << nll << "\n";
  }

  Checkpoint ckpt;
  model->save(ckpt);
  ckpt.metadata["kind"] = to_string(kind);
  ckpt.metadata["K"] = vocab.codebook_size;
  ckpt.metadata["n_cond"] = vocab.n_cond;
  ckpt.metadata["train_slices"] = t;
  ckpt.metadata["anchor_interval"] = s;
  ckpt.metadata["slice_h"] = th;
  ckpt.metadata["slice_w"] = tw;
  ckpt.metadata["conditional"] = cfg.prior.conditional;
  ckpt.metadata["seed"] = cfg.seed;
  save_checkpoint(paths.prior_ckpt(kind), ckpt);
}

void cmd_train_classifier(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  RunPaths paths{ctx.out};
  auto set = load_video_set(paths.data());
  if (set.labels.empty()) throw ConfigError("classifier training needs labels.tsv");
  std::vector<torch::Tensor> clips;
  std::vector<int64_t> labels;
  for (int64_t start = 0; start + kEvalClipLength <= set.videos.size(2); start += kEvalClipLength / 2) {
    clips.push_back(set.videos.narrow(2, start, kEvalClipLength));
    labels.insert(labels.end(), set.labels.begin(), set.labels.end());
  }
  if (clips.empty()) throw ConfigError("videos are shorter than one 16-frame clip");
  auto all = torch::cat(clips, 0).contiguous();
  auto cc = cfg.eval.classifier;
  cc.seed = derive_seed(cfg.seed, "classifier") ^ cfg.eval.classifier.seed;
  prepare_dir(paths.classifier_dir(), ctx.force);
  write_provenance(paths.classifier_dir(), ctx);
  auto classifier = train_clip_classifier(all, labels, cc);
  const double acc = classifier.accuracy(all, labels);
  logger(ctx) << "classifier train accuracy " << acc << "\n";
  Checkpoint ckpt;
  classifier.save(ckpt);
  ckpt.metadata["train_accuracy"] = acc;
  save_checkpoint(paths.classifier_ckpt(), ckpt);
}

fs::path cmd_generate(const CommandContext& ctx, const GenerateRequest& req) {
  const auto& cfg = ctx.config;
  RunPaths paths{ctx.out};
  const std::string mode = req.mode.value_or(cfg.generate.mode);
  const int64_t frames = req.frames.value_or(cfg.generate.frames);
  if (mode != "base" && mode != "hier") throw ConfigError("--mode must be base or hier");

  auto codec = load_codec(paths.codec_ckpt());
  const int64_t dt = codec.config().temporal_rate;
  const auto base_kind = mode == "hier" ? PriorKind::kArSparse : PriorKind::kAr;
  auto ar = load_prior(paths.prior_ckpt(base_kind));
  if (frames < 1 || frames % dt != 0) {
    throw ConfigError("--frames " + std::to_string(frames) + " must be a positive multiple of d_t = " + std::to_string(dt));
  }
  if (ar.vocab.codebook_size != codec.config().codebook_size) {
    throw ConfigError("prior vocabulary does not match the codec codebook");
  }
  const int64_t slices = frames / dt;
  const int64_t n = cfg.generate.n_videos;
  TokenShape shape{ar.slice_h, ar.slice_w, ar.vocab};

  std::vector<int64_t> classes;
  torch::Tensor prefix;
  if (req.cond_tokens) {
    auto [ids, meta] = load_vtok(*req.cond_tokens);
    if (ids.dim() == 1) ids = ids.unsqueeze(0);
    if (ids.size(0) == 1) ids = ids.expand({n, ids.size(1)});
    if (ids.size(0) != n) throw ConfigError("--cond-tokens must hold 1 or n_videos rows");
    prefix = condition_prefix(ar.vocab, ids.reshape({n, -1}));
  } else if (ar.conditional) {
    for (int64_t i = 0; i < n; ++i) classes.push_back(req.class_id.value_or(i % ar.vocab.n_cond));
    for (auto c : classes) {
      if (c < 0 || c >= ar.vocab.n_cond) throw ConfigError("--class " + std::to_string(c) + " is not a trained class");
    }
    prefix = class_prefix(ar.vocab, classes);
  } else {
    if (req.class_id) throw ConfigError("--class needs a class-conditional prior checkpoint");
    prefix = sos_prefix(ar.vocab, n);
  }

  auto rngs = make_rng_streams(derive_seed(cfg.seed, "generate") ^ cfg.generate.sampler.seed, n);
  torch::Tensor tokens, anchors;
  GenerationPlan plan;
  plan.prefix = prefix;
  plan.train_slices = ar.train_slices;
  if (mode == "base") {
    TransformerPredictor predictor(ar.model);
    if (slices <= ar.train_slices) {
      tokens = generate(predictor, prefix, slices, shape, cfg.generate.sampler, rngs);
    } else {
      plan.target_slices = slices;
      tokens = generate_long(predictor, plan, shape, cfg.generate.sampler, rngs);
    }
  } else {
    auto interp = load_prior(paths.prior_ckpt(PriorKind::kInterp));
    if (interp.vocab.size() != ar.vocab.size()) throw ConfigError("interp and sparse AR priors disagree on vocabulary");
    plan.anchor_interval = ar.anchor_interval;
    plan.target_slices = slices;
    plan.hierarchical = true;
    if (slices % plan.anchor_interval != 0) {
      throw ConfigError("--frames must be a multiple of d_t * anchor_interval = " +
                        std::to_string(dt * plan.anchor_interval) + " in hier mode");
    }
    TransformerPredictor ar_pred(ar.model), interp_pred(interp.model);
    auto result = generate_hierarchical(plan, ar_pred, interp_pred, shape, cfg.generate.sampler,
                                        cfg.generate.interp_sampler, rngs);
    tokens = result.tokens;
    anchors = result.anchors;
  }

  const auto dir = paths.generate_dir(req.name.value_or(mode));
  prepare_dir(dir, ctx.force);
  write_provenance(dir, ctx);
  VtokMetadata meta{shape.slice_len(), shape.vocab.size(), shape.vocab.codebook_size, shape.vocab.n_cond,
                    Json{{"mode", mode}, {"frames", frames}, {"prefix", prefix.size(1)}}};
  save_vtok(dir / "tokens.vtok", tokens, meta);
  if (anchors.defined()) {
    meta.extra["anchor_interval"] = plan.anchor_interval;
    save_vtok(dir / "anchors.vtok", anchors, meta);
  }
  save_vten(dir / "prefix.vten", prefix);

  std::vector<torch::Tensor> decoded;
  for (int64_t i = 0; i < n; i += 16) decoded.push_back(codec.detokenize(tokens.narrow(0, i, std::min<int64_t>(16, n - i))));
  write_videos(dir, torch::cat(decoded, 0), classes, cfg.generate.write_gifs);
  logger(ctx) << "generated " << n << " videos of " << frames << " frames (" << slices << " slices) in " << dir << "\n";
  return dir;
}

MetricReport cmd_evaluate(const CommandContext& ctx, const EvaluateRequest& req) {
  const auto& cfg = ctx.config;
  RunPaths paths{ctx.out};
  auto set = load_video_set(req.videos);
  if (available_offsets(set.videos) < 1) throw ConfigError("videos are shorter than one 16-frame clip");

  std::optional<ClipClassifier> classifier;
  if (fs::exists(paths.classifier_ckpt())) classifier = ClipClassifier::load(load_checkpoint(paths.classifier_ckpt()));
  if (req.ccs && !classifier) {
    throw ConfigError("CCS/ICS requested but no classifier checkpoint at " + paths.classifier_ckpt().string() +
                      " (run train-classifier first)");
  }
  std::unique_ptr<RandomFeatureExtractor> random;
  FeatureExtractor* extractor = nullptr;
  if (cfg.eval.extractor == "classifier") {
    if (!classifier) throw ConfigError("eval.extractor = classifier but no classifier checkpoint exists");
    extractor = &*classifier;
  } else {
    random = std::make_unique<RandomFeatureExtractor>(set.videos.size(1), 16, derive_seed(cfg.seed, "extractor"));
    extractor = random.get();
  }
  EvalOptions opts;
  opts.with_classifier_metrics = req.ccs;
  opts.hist_bins = cfg.eval.hist_bins;
  RandomConvFeatures transition(set.videos.size(1), 8, 2, derive_seed(cfg.seed, "transition"));
  opts.transition_net = &transition;
  auto report = evaluate_videos(set.videos, *extractor, classifier ? &*classifier : nullptr, opts);

  if (req.report) {
    if (req.report->has_parent_path()) fs::create_directories(req.report->parent_path());
    if (fs::exists(*req.report) && !ctx.force) throw ConfigError(req.report->string() + " exists; pass --force");
    write_text(*req.report, report.to_json().dump(2) + "\n");
    write_provenance(req.report->has_parent_path() ? req.report->parent_path() : fs::path("."), ctx);
  }
  if (req.plots) {
    fs::create_directories(*req.plots);
    std::vector<double> x(report.offsets.begin(), report.offsets.end());
    write_line_plot(*req.plots / "fvd_delta.png", x, {{"fvd_delta", report.fvd_delta, {200, 40, 40}}});
    if (!report.ccs.empty()) {
      write_line_plot(*req.plots / "ccs.png", x, {{"ccs", report.ccs, {40, 40, 200}}});
      write_line_plot(*req.plots / "ics.png", x, {{"ics", report.ics, {40, 160, 40}}});
    }
  }
  return report;
}

void cmd_report(const CommandContext& ctx, const std::vector<fs::path>& reports, const fs::path& out_dir) {
  if (reports.empty()) throw ConfigError("report needs at least one --reports file");
  prepare_dir(out_dir, ctx.force);
  write_provenance(out_dir, ctx);
  static const std::array<std::array<uint8_t, 3>, 6> palette{
      {{200, 40, 40}, {40, 40, 200}, {40, 160, 40}, {200, 140, 0}, {140, 40, 160}, {0, 150, 150}}};
  std::vector<double> x;
  std::vector<PlotSeries> fvd, ccs_series;
  Json summary = Json::array();
  for (size_t i = 0; i < reports.size(); ++i) {
    auto j = read_json(reports[i]);
    auto offsets = j.at("offsets").get<std::vector<double>>();
    auto delta = j.at("fvd_delta").get<std::vector<double>>();
    if (x.empty()) x = offsets;
    if (offsets != x) throw ConfigError("reports use different offsets");
    const auto color = palette[i % palette.size()];
    fvd.push_back({reports[i].stem().string(), delta, color});
    double late = 0;
    int64_t count = 0;
    for (size_t k = 0; k < offsets.size(); ++k) {
      if (offsets[k] >= 32) {
        late += delta[k];
        ++count;
      }
    }
    Json entry{{"report", reports[i].string()}, {"mean_fvd_delta_from_32", count ? late / count : 0.0}};
    if (!j.at("ccs").empty()) {
      auto c = j.at("ccs").get<std::vector<double>>();
      ccs_series.push_back({reports[i].stem().string(), c, color});
      entry["final_ccs"] = c.back();
    }
    summary.push_back(entry);
  }
  write_line_plot(out_dir / "fvd_delta.png", x, fvd);
  if (ccs_series.size() == fvd.size()) write_line_plot(out_dir / "ccs.png", x, ccs_series);
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace tats
