#include "tats/run_config.hpp"

#include <fstream>

namespace tats {

namespace {

Json data_json(const DataConfig& d) {
  return Json{{"n_videos", d.n_videos},       {"length", d.length},         {"height", d.height},
              {"width", d.width},             {"channels", d.channels},     {"n_classes", d.n_classes},
              {"period", d.period},           {"sigma", d.sigma},           {"clip_length", d.clip_length},
              {"frame_stride", d.frame_stride}, {"random_offsets", d.random_offsets}};
}

DataConfig data_from_json(const Json& j) {
  DataConfig d;
  StrictReader r(j, "data");
  r.read("n_videos", d.n_videos)
      .read("length", d.length)
      .read("height", d.height)
      .read("width", d.width)
      .read("channels", d.channels)
      .read("n_classes", d.n_classes)
      .read("period", d.period)
      .read("sigma", d.sigma)
      .read("clip_length", d.clip_length)
      .read("frame_stride", d.frame_stride)
      .read("random_offsets", d.random_offsets);
  r.finish();
  return d;
}

Json codec_run_json(const CodecRunConfig& c) {
  return Json{{"steps", c.steps},
              {"batch_size", c.batch_size},
              {"log_every", c.log_every},
              {"checkpoint_every", c.checkpoint_every}};
}

CodecRunConfig codec_run_from_json(const Json& j) {
  CodecRunConfig c;
  StrictReader r(j, "codec_training");
  r.read("steps", c.steps)
      .read("batch_size", c.batch_size)
      .read("log_every", c.log_every)
      .read("checkpoint_every", c.checkpoint_every);
  r.finish();
  return c;
}

Json prior_json(const PriorRunConfig& p) {
  return Json{{"n_layers", p.n_layers},
              {"n_heads", p.n_heads},
              {"embed_dim", p.embed_dim},
              {"dropout", p.dropout},
              {"train_slices", p.train_slices},
              {"anchor_interval", p.anchor_interval},
              {"conditional", p.conditional},
              {"training", to_json(p.training)}};
}

PriorRunConfig prior_from_json(const Json& j) {
  PriorRunConfig p;
  StrictReader r(j, "prior");
  r.read("n_layers", p.n_layers)
      .read("n_heads", p.n_heads)
      .read("embed_dim", p.embed_dim)
      .read("dropout", p.dropout)
      .read("train_slices", p.train_slices)
      .read("anchor_interval", p.anchor_interval)
      .read("conditional", p.conditional);
  if (const auto* t = r.child("training")) p.training = prior_train_config_from_json(*t);
  r.finish();
  return p;
}

Json generate_json(const GenerateConfig& g) {
  return Json{{"n_videos", g.n_videos},          {"frames", g.frames},
              {"mode", g.mode},                  {"sampler", to_json(g.sampler)},
              {"interp_sampler", to_json(g.interp_sampler)}, {"write_gifs", g.write_gifs}};
}

GenerateConfig generate_from_json(const Json& j) {
  GenerateConfig g;
  StrictReader r(j, "generate");
  r.read("n_videos", g.n_videos).read("frames", g.frames).read("mode", g.mode).read("write_gifs", g.write_gifs);
  if (const auto* s = r.child("sampler")) g.sampler = sampler_config_from_json(*s, g.sampler);
  if (const auto* s = r.child("interp_sampler")) g.interp_sampler = sampler_config_from_json(*s, g.interp_sampler);
  r.finish();
  return g;
}

Json eval_json(const EvalConfig& e) {
  return Json{{"extractor", e.extractor},
              {"hist_bins", e.hist_bins},
              {"classifier", to_json(e.classifier)},
              {"bootstrap_replicates", e.bootstrap_replicates}};
}

EvalConfig eval_from_json(const Json& j) {
  EvalConfig e;
  StrictReader r(j, "eval");
  r.read("extractor", e.extractor).read("hist_bins", e.hist_bins).read("bootstrap_replicates", e.bootstrap_replicates);
  if (const auto* c = r.child("classifier")) e.classifier = classifier_config_from_json(*c);
  r.finish();
  return e;
}

}  // namespace

int64_t RunConfig::train_slices() const {
  return prior.train_slices > 0 ? prior.train_slices : data.clip_length / codec.temporal_rate;
}

void RunConfig::validate() const {
  codec.validate();
  if (data.n_videos < 1 || data.length < 1) throw ConfigError("data.n_videos and data.length must be >= 1");
  if (data.height % codec.spatial_rate != 0 || data.width % codec.spatial_rate != 0) {
    throw ConfigError("data.height and data.width must be divisible by codec.spatial_rate");
  }
  if (data.channels != codec.in_channels) throw ConfigError("data.channels must equal codec.in_channels");
  if (data.clip_length % codec.temporal_rate != 0) throw ConfigError("data.clip_length must be divisible by codec.temporal_rate");
  if (data.clip_length * data.frame_stride > data.length) throw ConfigError("data.length is shorter than one training clip");
  if (data.n_classes < 1) throw ConfigError("data.n_classes must be >= 1");
  if (codec_training.steps < 0 || codec_training.batch_size < 1 || codec_training.log_every < 1 ||
      codec_training.checkpoint_every < 1) {
    throw ConfigError("invalid codec_training settings");
  }
  if (prior.anchor_interval < 1) throw ConfigError("prior.anchor_interval must be >= 1");
  if (train_slices() < 1) throw ConfigError("prior.train_slices must be >= 1");
  if (generate.mode != "base" && generate.mode != "hier") throw ConfigError("generate.mode must be base or hier");
  if (generate.n_videos < 1) throw ConfigError("generate.n_videos must be >= 1");
  if (eval.extractor != "classifier" && eval.extractor != "random") {
    throw ConfigError("eval.extractor must be classifier or random");
  }
  generate.sampler.validate();
  generate.interp_sampler.validate();
  prior.training.validate();
  TransformerConfig probe{prior.n_layers, prior.n_heads, prior.embed_dim, 1, 1, prior.dropout};
  probe.validate();
}

Json to_json(const RunConfig& c) {
  Json disc{{"in_channels", c.discriminator.in_channels}, {"base_channels", c.discriminator.base_channels}};
  return Json{{"seed", c.seed},
              {"out", c.out},
              {"data", data_json(c.data)},
              {"codec", to_json(c.codec)},
              {"discriminator", disc},
              {"adversarial", to_json(c.adversarial)},
              {"codec_training", codec_run_json(c.codec_training)},
              {"prior", prior_json(c.prior)},
              {"generate", generate_json(c.generate)},
              {"eval", eval_json(c.eval)}};
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  StrictReader r(j, "config");
  r.read("seed", c.seed).read("out", c.out);
  if (const auto* d = r.child("data")) c.data = data_from_json(*d);
  if (const auto* d = r.child("codec")) c.codec = codec_config_from_json(*d);
  if (const auto* d = r.child("discriminator")) {
    StrictReader dr(*d, "discriminator");
    dr.read("in_channels", c.discriminator.in_channels).read("base_channels", c.discriminator.base_channels);
    dr.finish();
  }
  if (const auto* d = r.child("adversarial")) c.adversarial = codec_train_config_from_json(*d);
  if (const auto* d = r.child("codec_training")) c.codec_training = codec_run_from_json(*d);
  if (const auto* d = r.child("prior")) c.prior = prior_from_json(*d);
  if (const auto* d = r.child("generate")) c.generate = generate_from_json(*d);
  if (const auto* d = r.child("eval")) c.eval = eval_from_json(*d);
  r.finish();
  c.discriminator.in_channels = c.codec.in_channels;
  c.eval.classifier.in_channels = c.codec.in_channels;
  c.eval.classifier.n_classes = std::max<int64_t>(2, c.data.n_classes);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

uint64_t derive_seed(uint64_t seed, const std::string& tag) {
  // FNV-1a over the tag, mixed with the seed through splitmix64.
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  uint64_t z = seed + h + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace tats
