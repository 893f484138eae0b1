// Copyright 2026 The hsdssa Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hsdssa/backbone.hpp"

#include <map>
#include <set>

#include "hsdssa/error.hpp"
#include "hsdssa/file_util.hpp"
#include "hsdssa/random.hpp"

namespace hsdssa {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kResNet34: return "resnet34";
    case Variant::kResNet50: return "resnet50";
    case Variant::kHSResNet50: return "hs_resnet50";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "resnet34") return Variant::kResNet34;
  if (name == "resnet50") return Variant::kResNet50;
  if (name == "hs_resnet50") return Variant::kHSResNet50;
  throw ConfigError("unknown backbone variant '" + name + "'");
}

void BackboneConfig::validate() const {
  if (initial_channels == 0) throw ConfigError("backbone: initial_channels must be positive");
  if (embedding_dim == 0) throw ConfigError("backbone: embedding_dim must be positive");
  if (feature_dim == 0) throw ConfigError("backbone: feature_dim must be positive");
  for (auto b : stage_blocks) {
    if (b == 0) throw ConfigError("backbone: every stage needs at least one block");
  }
  if (hs.has_value() != (variant == Variant::kHSResNet50)) {
    throw ConfigError("backbone: hs settings must be given iff variant is hs_resnet50");
  }
  if (hs) {
    // Stage 1 has the narrowest bottleneck; validating it covers the rest.
    HSBlockParams{initial_channels, hs->t, hs->s, hs->k}.validate();
  }
  if (dssa) {
    if (dssa->after_stage < 1 || dssa->after_stage > 4) {
      throw ConfigError("backbone: dssa after_stage must be in 1..4");
    }
    if (dssa->kernel == 0 || dssa->kernel % 2 == 0) {
      throw ConfigError("backbone: dssa kernel must be odd");
    }
    if (dssa->topk && *dssa->topk == 0) throw ConfigError("backbone: dssa topk must be >= 1");
    if (!(dssa->eps > 0.0)) throw ConfigError("backbone: dssa eps must be positive");
  }
}

BackboneConfig BackboneConfig::toy(Variant variant) {
  BackboneConfig cfg;
  cfg.variant = variant;
  cfg.initial_channels = 4;
  cfg.feature_dim = 16;
  cfg.embedding_dim = 32;
  if (variant == Variant::kHSResNet50) cfg.hs = HSSettings{.s = 4, .t = 2.0, .k = 3};
  return cfg;
}

nlohmann::json BackboneConfig::to_json() const {
  nlohmann::json j = {{"variant", to_string(variant)},
                      {"initial_channels", initial_channels},
                      {"stage_blocks", stage_blocks},
                      {"embedding_dim", embedding_dim},
                      {"feature_dim", feature_dim}};
  if (hs) j["hs"] = {{"s", hs->s}, {"t", hs->t}, {"k", hs->k}};
  if (dssa) {
    j["dssa"] = {{"after_stage", dssa->after_stage},
                 {"kernel", dssa->kernel},
                 {"eps", dssa->eps},
                 {"topk", dssa->topk ? nlohmann::json(*dssa->topk) : nlohmann::json(nullptr)}};
  }
  return j;
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

}  // namespace

BackboneConfig BackboneConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"variant", "initial_channels", "stage_blocks", "hs", "dssa",
                     "embedding_dim", "feature_dim"},
                 "backbone config");
  BackboneConfig cfg;
  try {
    cfg.variant = parse_variant(j.at("variant").get<std::string>());
    cfg.initial_channels = j.value("initial_channels", cfg.initial_channels);
    if (j.contains("stage_blocks")) cfg.stage_blocks = j["stage_blocks"].get<std::array<std::size_t, 4>>();
    cfg.embedding_dim = j.value("embedding_dim", cfg.embedding_dim);
    cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
    if (j.contains("hs") && !j["hs"].is_null()) {
      const auto& h = j["hs"];
      reject_unknown(h, {"s", "t", "k"}, "hs");
      HSSettings hs;
      hs.s = h.value("s", hs.s);
      hs.t = h.value("t", hs.t);
      hs.k = h.value("k", hs.k);
      cfg.hs = hs;
    }
    if (j.contains("dssa") && !j["dssa"].is_null()) {
      const auto& d = j["dssa"];
      reject_unknown(d, {"after_stage", "kernel", "topk", "eps"}, "dssa");
      DSSASettings ds;
      ds.after_stage = d.value("after_stage", ds.after_stage);
      ds.kernel = d.value("kernel", ds.kernel);
      ds.eps = d.value("eps", ds.eps);
      if (d.contains("topk") && !d["topk"].is_null()) ds.topk = d["topk"].get<std::size_t>();
      cfg.dssa = ds;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("backbone config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Tensor ConvNorm::forward(const Tensor& x) const {
  return channel_affine(conv(x, weight, {.stride = stride, .padding = {pad}}), scale, shift);
}

namespace {

ConvNorm make_conv_norm(Rng& rng, std::size_t cin, std::size_t cout, std::size_t k,
                        std::size_t stride) {
  ConvNorm cn;
  cn.weight = rng.fan_in_uniform({cout, cin, k, k}, cin * k * k);
  cn.scale = Tensor({cout}, 1.0);
  cn.shift = Tensor({cout}, 0.0);
  cn.stride = stride;
  cn.pad = k / 2;
  return cn;
}

std::size_t downsampled(std::size_t extent) { return conv_out_extent(extent, 3, 2, 1); }

Tensor residual_forward(const BasicBlock& b, const Tensor& x) {
  Tensor out = b.second.forward(relu(b.first.forward(x)));
  return relu(add(out, b.shortcut ? b.shortcut->forward(x) : x));
}

Tensor residual_forward(const Bottleneck& b, const Tensor& x) {
  Tensor out = relu(b.reduce.forward(x));
  if (const auto* cn = std::get_if<ConvNorm>(&b.middle)) {
    out = relu(cn->forward(out));
  } else {
    const auto& hs = std::get<HSUnit>(b.middle);
    out = relu(channel_affine(hs.block.forward(out), hs.scale, hs.shift));
  }
  out = b.expand.forward(out);
  return relu(add(out, b.shortcut ? b.shortcut->forward(x) : x));
}

}  // namespace

template <typename F>
void Model::visit(F&& f) {
  auto conv_norm = [&](const std::string& p, ConvNorm& cn) {
    f(p + ".weight", cn.weight);
    f(p + ".scale", cn.scale);
    f(p + ".shift", cn.shift);
  };
  conv_norm("stem", stem_);
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const std::string prefix = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      std::visit(
          [&](auto& blk) {
            using B = std::decay_t<decltype(blk)>;
            if constexpr (std::is_same_v<B, BasicBlock>) {
              conv_norm(prefix + ".conv1", blk.first);
              conv_norm(prefix + ".conv2", blk.second);
            } else {
              conv_norm(prefix + ".reduce", blk.reduce);
              if (auto* cn = std::get_if<ConvNorm>(&blk.middle)) {
                conv_norm(prefix + ".mid", *cn);
              } else {
                auto& hs = std::get<HSUnit>(blk.middle);
                for (std::size_t j = 0; j < hs.block.filters().size(); ++j) {
                  f(prefix + ".hs.group" + std::to_string(j + 2), hs.block.mutable_filter(j));
                }
                f(prefix + ".hs.scale", hs.scale);
                f(prefix + ".hs.shift", hs.shift);
              }
              conv_norm(prefix + ".expand", blk.expand);
            }
            if (blk.shortcut) conv_norm(prefix + ".shortcut", *blk.shortcut);
          },
          stages_[s][b]);
    }
  }
  if (dssa_) {
    for (std::size_t c = 0; c < dssa_->channels; ++c) {
      f("dssa.wq." + std::to_string(c), dssa_->wq[c]);
      f("dssa.wk." + std::to_string(c), dssa_->wk[c]);
      f("dssa.wv." + std::to_string(c), dssa_->wv[c]);
    }
    f("dssa.head_gamma", dssa_->head_gamma);
    f("dssa.head_beta", dssa_->head_beta);
    f("dssa.out_gamma", dssa_->out_gamma);
    f("dssa.out_beta", dssa_->out_beta);
  }
  f("embed.weight", embed_weight_);
  f("embed.bias", embed_bias_);
}

template <typename F>
void Model::visit(F&& f) const {
  const_cast<Model*>(this)->visit([&](const std::string& name, Tensor& t) {
    f(name, static_cast<const Tensor&>(t));
  });
}

Model Model::build(const BackboneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.config_ = cfg;
  m.seed_ = seed;
  Rng rng(seed);

  const std::size_t init = cfg.initial_channels;
  const bool bottleneck = cfg.variant != Variant::kResNet34;
  m.stem_ = make_conv_norm(rng, 1, init, 3, 1);

  std::size_t in_ch = init;
  std::size_t freq = cfg.feature_dim;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t width = init << s;
    const std::size_t out_ch = bottleneck ? 4 * width : width;
    for (std::size_t b = 0; b < cfg.stage_blocks[s]; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      std::optional<ConvNorm> shortcut;
      if (stride != 1 || in_ch != out_ch) shortcut = make_conv_norm(rng, in_ch, out_ch, 1, stride);
      if (!bottleneck) {
        BasicBlock blk{make_conv_norm(rng, in_ch, width, 3, stride),
                       make_conv_norm(rng, width, width, 3, 1), std::move(shortcut)};
        m.stages_[s].emplace_back(std::move(blk));
      } else if (cfg.variant == Variant::kResNet50) {
        Bottleneck blk{make_conv_norm(rng, in_ch, width, 1, 1),
                       make_conv_norm(rng, width, width, 3, stride),
                       make_conv_norm(rng, width, out_ch, 1, 1), std::move(shortcut)};
        m.stages_[s].emplace_back(std::move(blk));
      } else {
        // The HS-block keeps spatial extent, so the stride moves to the 1x1 reduce.
        const HSBlockParams hp{width, cfg.hs->t, cfg.hs->s, cfg.hs->k};
        const std::size_t hs_ch = hp.channels();
        ConvNorm reduce = make_conv_norm(rng, in_ch, hs_ch, 1, stride);
        HSUnit unit{HSBlock::random(hp, rng), Tensor({hs_ch}, 1.0), Tensor({hs_ch}, 0.0)};
        Bottleneck blk{std::move(reduce), std::move(unit),
                       make_conv_norm(rng, hs_ch, out_ch, 1, 1), std::move(shortcut)};
        m.stages_[s].emplace_back(std::move(blk));
      }
      in_ch = out_ch;
    }
    if (s > 0) freq = downsampled(freq);
    if (cfg.dssa && cfg.dssa->after_stage == static_cast<int>(s + 1)) {
      DSSAConfig d = DSSAConfig::random(out_ch, freq, cfg.dssa->kernel, rng);
      d.topk = cfg.dssa->topk;
      d.eps = cfg.dssa->eps;
      m.dssa_ = std::move(d);
    }
  }
  const std::size_t pooled = in_ch * freq;
  m.embed_weight_ = rng.fan_in_uniform({cfg.embedding_dim, pooled}, pooled);
  m.embed_bias_ = rng.fan_in_uniform({cfg.embedding_dim}, pooled);
  return m;
}

std::array<std::pair<std::size_t, std::size_t>, 4> Model::stage_layout() const {
  std::array<std::pair<std::size_t, std::size_t>, 4> out{};
  const bool bottleneck = config_.variant != Variant::kResNet34;
  std::size_t freq = config_.feature_dim;
  for (std::size_t s = 0; s < 4; ++s) {
    if (s > 0) freq = downsampled(freq);
    const std::size_t width = config_.initial_channels << s;
    out[s] = {bottleneck ? 4 * width : width, freq};
  }
  return out;
}

DSSAConfig& Model::mutable_dssa() {
  if (!dssa_) throw ConfigError("model has no DSSA module");
  return *dssa_;
}

ForwardTrace Model::trace(const Tensor& features) const {
  if (features.rank() != 2 || features.dim(1) != config_.feature_dim) {
    throw InputError("embed: features must be [T x " + std::to_string(config_.feature_dim) +
                     "], got " + to_string(features.shape()));
  }
  if (features.dim(0) < kMinFrames) {
    throw InputError("embed: need at least " + std::to_string(kMinFrames) + " frames, got " +
                     std::to_string(features.dim(0)));
  }
  ForwardTrace tr;
  Tensor x = relu(stem_.forward(features.reshaped({1, features.dim(0), features.dim(1)})));
  for (std::size_t s = 0; s < 4; ++s) {
    for (const auto& blk : stages_[s]) {
      x = std::visit([&](const auto& b) { return residual_forward(b, x); }, blk);
    }
    if (dssa_ && config_.dssa->after_stage == static_cast<int>(s + 1)) {
      DSSAResult r = dssa_forward(*dssa_, x);
      x = r.y;
      tr.attention = std::move(r);
    }
    tr.stage_outputs.push_back(x);
  }
  tr.embedding = pool_and_project(x);
  if (!all_finite(tr.embedding)) throw NumericError("embed: non-finite embedding");
  return tr;
}

Tensor Model::pool_and_project(const Tensor& fmap) const {
  if (fmap.rank() != 3 || fmap.dim(0) * fmap.dim(2) != embed_weight_.dim(1)) {
    throw DimensionError("pool: feature map " + to_string(fmap.shape()) +
                         " does not match projection " + to_string(embed_weight_.shape()));
  }
  const std::size_t C = fmap.dim(0), T = fmap.dim(1), F = fmap.dim(2);
  Tensor pooled({C * F, 1});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t f = 0; f < F; ++f) {
      double acc = 0.0;
      for (std::size_t t = 0; t < T; ++t) acc += fmap(c, t, f);
      pooled[c * F + f] = acc / static_cast<double>(T);
    }
  }
  Tensor e = matmul(embed_weight_, pooled);
  return add(e.reshaped({config_.embedding_dim}), embed_bias_);
}

Tensor Model::embed(const Tensor& features) const { return trace(features).embedding; }

std::vector<NamedTensor> Model::parameters() const {
  std::vector<NamedTensor> out;
  visit([&](const std::string& name, const Tensor& t) { out.push_back({name, t}); });
  return out;
}

void Model::load_parameters(const std::vector<NamedTensor>& entries) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e.value;
  std::size_t used = 0;
  visit([&](const std::string& name, Tensor& t) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("model weights lack '" + name + "'");
    if (it->second->shape() != t.shape()) {
      throw FormatError("model weight '" + name + "' has shape " +
                        to_string(it->second->shape()) + ", expected " + to_string(t.shape()));
    }
    t = *it->second;
    ++used;
  });
  if (used != by_name.size()) throw FormatError("model weights contain unknown entries");
}

std::size_t Model::param_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

Model build_model(const BackboneConfig& cfg, std::uint64_t seed) { return Model::build(cfg, seed); }

Tensor embed(const Model& m, const Tensor& features) { return m.embed(features); }

void save_model(const std::filesystem::path& dir, const Model& model) {
  WeightBundle bundle;
  bundle.meta = {{"kind", "model"}, {"config", model.config().to_json()}, {"seed", model.seed()}};
  bundle.entries = model.parameters();
  save_weights(dir, bundle);
}

Model load_model(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  const auto manifest = resolve_manifest(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("format")) {
    WeightBundle bundle = load_weights(manifest);
    if (bundle.meta.value("kind", "") != "model") {
      throw FormatError(manifest.string() + ": not a model manifest");
    }
    const auto cfg = BackboneConfig::from_json(bundle.meta.at("config"));
    if (seed_override && !bundle.entries.empty()) {
      throw ConfigError("--seed conflicts with stored weights in " + manifest.string());
    }
    Model m = Model::build(cfg, seed_override.value_or(bundle.meta.value("seed", std::uint64_t{0})));
    if (!bundle.entries.empty()) m.load_parameters(bundle.entries);
    return m;
  }
  if (j.is_object() && j.contains("config")) {
    for (const auto& [key, value] : j.items()) {
      if (key != "config" && key != "seed") {
        throw ConfigError(manifest.string() + ": unknown key '" + key + "'");
      }
    }
    return Model::build(BackboneConfig::from_json(j["config"]),
                        seed_override.value_or(j.value("seed", std::uint64_t{0})));
  }
  return Model::build(BackboneConfig::from_json(j), seed_override.value_or(0));
}

}  // namespace hsdssa
