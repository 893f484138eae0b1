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

#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hsdssa/analysis.hpp"
#include "hsdssa/backbone.hpp"
#include "hsdssa/error.hpp"
#include "hsdssa/file_util.hpp"
#include "hsdssa/fmat.hpp"
#include "hsdssa/gradcheck.hpp"
#include "hsdssa/hs_block.hpp"
#include "hsdssa/metrics.hpp"

namespace hsdssa::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

struct System {
  std::string name;
  BackboneConfig config;
  std::uint64_t seed = 0;
};

std::string default_name(const BackboneConfig& cfg) {
  return to_string(cfg.variant) + (cfg.dssa ? "+dssa" : "");
}

// A single backbone config, {"config", "seed"}, or {"systems": [{"name",
// "config", "seed"}, ...]}. `seed_override` replaces every stored seed.
std::vector<System> load_systems(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  const json j = parse_json_file(path);
  std::vector<System> out;
  auto one = [&](const json& entry, bool named) {
    System s;
    for (const auto& [key, _] : entry.items()) {
      if (key != "config" && key != "seed" && !(named && key == "name")) {
        throw ConfigError(path.string() + ": unknown key '" + key + "'");
      }
    }
    s.config = BackboneConfig::from_json(entry.at("config"));
    s.seed = seed_override.value_or(entry.value("seed", std::uint64_t{0}));
    s.name = named && entry.contains("name") ? entry["name"].get<std::string>() : default_name(s.config);
    out.push_back(std::move(s));
  };
  try {
    if (j.is_object() && j.contains("systems")) {
      if (j.size() != 1) throw ConfigError(path.string() + ": only 'systems' is allowed at top level");
      for (const auto& entry : j.at("systems")) one(entry, true);
    } else if (j.is_object() && j.contains("config")) {
      one(j, false);
    } else {
      System s{"", BackboneConfig::from_json(j), seed_override.value_or(0)};
      s.name = default_name(s.config);
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (out.empty()) throw ConfigError(path.string() + ": no systems");
  return out;
}

bool is_weight_manifest(const fs::path& path) {
  const fs::path manifest = resolve_manifest(path);
  if (!fs::exists(manifest)) return false;
  const json j = parse_json_file(manifest);
  return j.is_object() && j.contains("format") && j.contains("entries") && !j["entries"].empty();
}

Model open_model(const fs::path& path, std::optional<std::uint64_t> seed) {
  if (seed && is_weight_manifest(path)) {
    throw UsageError("--seed cannot be combined with stored weights in " + path.string());
  }
  return load_model(path, seed);
}

// ---- params ---------------------------------------------------------------

void print_hs_stage(std::ostream& out, std::size_t stage, const HSBlockParams& p) {
  const auto widths = channel_widths(p.w, p.t, p.s);
  const std::uint64_t floored = hs_param_sum(p.w, p.t, p.s, p.k);
  const double real = hs_param_sum_real(p.w, p.t, p.s, p.k);
  const double closed = hs_param_closed(p.w, p.t, p.s, p.k);
  const bool agree = std::abs(real - closed) <= 1e-9 * std::max(1.0, closed);
  const bool exact = exact_halving(p.w, p.t, p.s);
  out << "  stage " << stage << " HS-block: w=" << p.w << " t=" << p.t << " s=" << p.s
      << " k=" << p.k << " C0=" << widths.front() << " widths";
  for (std::size_t c : widths) out << ' ' << c;
  out << '\n'
      << "    summation (real-valued widths): " << fixed(real, 4) << '\n'
      << "    closed form:                    " << fixed(closed, 4) << '\n'
      << "    forms agree:                    " << (agree ? "yes" : "NO") << '\n'
      << "    summation (floored widths):     " << floored
      << (exact ? "  (exact halving: equals closed form)" : "  (inexact halving: floors shrink widths)")
      << '\n'
      << "    constructed filter weights:     "
      << hs_constructed_param_count(p.w, p.t, p.s, p.k) << '\n';
}

int run_params(const std::string& config, std::optional<std::uint64_t> seed, std::ostream& out) {
  for (const System& s : load_systems(config, seed)) {
    const Model m = build_model(s.config, s.seed);
    out << s.name << ": " << count_params(m) << " parameters (variant " << to_string(s.config.variant)
        << ", initial channels " << s.config.initial_channels << ")\n";
    if (s.config.hs) {
      for (std::size_t j = 0; j < 4; ++j) {
        print_hs_stage(out, j + 1, {s.config.initial_channels << j, s.config.hs->t, s.config.hs->s,
                                    s.config.hs->k});
      }
    }
    if (m.dssa()) out << "  DSSA: " << m.dssa()->param_count() << " parameters\n";
  }
  return kExitOk;
}

// ---- forward ----------------------------------------------------------------

int run_forward(const std::string& model, const std::string& features, const std::string& out_path,
                std::optional<std::uint64_t> seed, std::ostream& out) {
  const Model m = open_model(model, seed);
  const Tensor x = read_fmat(features);
  const Tensor e = embed(m, x);
  write_fmat(out_path, e.reshaped({1, e.size()}));
  out << "wrote " << e.size() << "-dim embedding to " << out_path << '\n';
  return kExitOk;
}

// ---- score ------------------------------------------------------------------

class EmbeddingCache {
 public:
  explicit EmbeddingCache(fs::path dir) : dir_(std::move(dir)) {}

  const Tensor& get(const std::string& id) {
    auto it = cache_.find(id);
    if (it != cache_.end()) return it->second;
    fs::path path = dir_ / (id + ".fmat");
    if (!fs::exists(path)) path = dir_ / (fs::path(id).stem().string() + ".fmat");
    if (!fs::exists(path)) {
      throw InputError("no embedding for '" + id + "' in " + dir_.string() + " (tried " +
                       (dir_ / (id + ".fmat")).string() + " and " + path.string() + ")");
    }
    return cache_.emplace(id, read_fmat(path)).first->second;
  }

 private:
  fs::path dir_;
  std::map<std::string, Tensor> cache_;
};

int run_score(const std::string& enroll_dir, const std::string& test_dir, const std::string& trials_path,
              const std::string& out_path, std::ostream& out) {
  std::istringstream trials_text(read_text_file(trials_path));
  const TrialSet trials = parse_trials(trials_text);
  EmbeddingCache enroll(enroll_dir), test(test_dir);
  std::vector<ScoreLine> scores;
  for (const Trial& t : trials.entries()) {
    scores.push_back({t.enroll, t.test,
                      cosine_similarity(enroll.get(t.enroll).data(), test.get(t.test).data())});
  }
  write_file_atomic(out_path, [&](std::ostream& os) { write_scores(os, scores); });
  out << "scored " << scores.size() << " trials into " << out_path << '\n';
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

int run_eval(const std::string& scores_path, const std::string& trials_path, const std::string& det_path,
             double p_target, std::ostream& out) {
  std::istringstream trials_text(read_text_file(trials_path));
  TrialSet trials = parse_trials(trials_text);
  std::istringstream scores_text(read_text_file(scores_path));
  attach_scores(trials, parse_scores(scores_text));
  const double e = eer(trials);
  const double dcf = min_dcf(trials, p_target);
  const auto points = det_points(trials);
  write_file_atomic(det_path, [&](std::ostream& os) { write_det_csv(os, points); });
  out << "EER " << fixed(100.0 * e, 4) << "%\n"
      << "minDCF(" << p_target << ") " << fixed(dcf, 4) << '\n'
      << "trials " << trials.size() << ", DET points " << points.size() << " -> " << det_path << '\n';
  return kExitOk;
}

// ---- bench ------------------------------------------------------------------

int run_bench(const std::string& config, const BenchOptions& options, std::optional<std::uint64_t> seed,
              const std::string& json_path, const std::string& csv_path, std::ostream& out) {
  const auto systems = load_systems(config, seed);
  std::vector<Model> models;
  models.reserve(systems.size());
  for (const auto& s : systems) models.push_back(build_model(s.config, s.seed));
  std::vector<BenchSystem> entries;
  for (std::size_t i = 0; i < systems.size(); ++i) entries.push_back({&models[i], systems[i].name});
  const auto reports = bench_round_robin(entries, options);

  out << "system                 params  median_ms  mad_ms  vs_first\n";
  for (const auto& r : reports) {
    char line[160];
    std::snprintf(line, sizeof line, "%-20s %8llu %10.3f %7.3f %+8.1f%%\n", r.system_name.c_str(),
                  static_cast<unsigned long long>(r.param_count), r.timing.median_ms,
                  r.timing.median_abs_deviation_ms,
                  100.0 * (r.timing.median_ms / reports.front().timing.median_ms - 1.0));
    out << line;
  }
  out << "input " << options.frames << " frames, " << options.repetitions << " timed runs per system\n";
  if (!json_path.empty()) {
    write_file_atomic(json_path, [&](std::ostream& os) { os << report_json(reports); });
  }
  if (!csv_path.empty()) {
    write_file_atomic(csv_path, [&](std::ostream& os) { os << report_csv(reports); });
  }
  return kExitOk;
}

// ---- gradcheck --------------------------------------------------------------

int run_gradcheck(const DssaGradcheckOptions& options, std::ostream& out) {
  const auto report = run_dssa_gradcheck(options);
  for (std::size_t i = 0; i < report.instances.size(); ++i) {
    char line[200];
    std::snprintf(line, sizeof line, "instance %2zu  %-34s  rel err %.3e  (%zu components)\n", i + 1,
                  report.labels[i].c_str(), report.instances[i].max_rel_error,
                  report.instances[i].components_checked);
    out << line;
  }
  char summary[160];
  std::snprintf(summary, sizeof summary, "max relative error %.3e (tolerance %.0e) in %.2f s: %s\n",
                report.max_rel_error, options.tolerance, report.seconds,
                report.passed ? "PASS" : "FAIL");
  out << summary;
  return report.passed ? kExitOk : kExitData;
}

// ---- demo-attention ---------------------------------------------------------

int run_demo_attention(const std::string& model_path, const std::string& features,
                       std::optional<std::size_t> topk, bool dense, const std::string& out_dir,
                       std::optional<std::uint64_t> seed, std::ostream& out) {
  Model m = open_model(model_path, seed);
  if (!m.dssa()) throw ConfigError(model_path + ": model has no DSSA module");
  if (topk) m.mutable_dssa().topk = *topk;
  if (dense) m.mutable_dssa().topk.reset();
  const ForwardTrace trace = m.trace(read_fmat(features));
  const Tensor& a = trace.attention->weights;
  const std::size_t channels = a.dim(0), t = a.dim(1);
  fs::create_directories(out_dir);
  std::size_t nonzero = 0, near_zero = 0;
  double peak = 0.0;
  for (std::size_t c = 0; c < channels; ++c) {
    const Tensor ac = a.slice0(c, c + 1).reshaped({t, t});
    for (double v : ac.data()) {
      nonzero += v != 0.0;
      near_zero += v < 1e-3;
      peak = std::max(peak, v);
    }
    char name[48];
    std::snprintf(name, sizeof name, "attention_c%03zu.fmat", c);
    write_fmat(fs::path(out_dir) / name, ac);
  }
  const double total = static_cast<double>(a.size());
  out << "wrote " << channels << " attention maps of " << t << "x" << t << " to " << out_dir << '\n'
      << "top-k: " << (m.dssa()->topk ? std::to_string(*m.dssa()->topk) : std::string("off")) << '\n'
      << "nonzero weights: " << fixed(100.0 * nonzero / total, 2) << "%\n"
      << "weights below 1e-3: " << fixed(100.0 * near_zero / total, 2) << "%\n"
      << "largest weight: " << fixed(peak, 6) << '\n';
  return kExitOk;
}

// ---- init-model -------------------------------------------------------------

int run_init_model(const std::string& config, std::optional<std::uint64_t> seed,
                   const std::string& out_dir, std::ostream& out) {
  const Model m = open_model(config, seed);
  save_model(out_dir, m);
  out << "saved " << to_string(m.config().variant) << " (" << count_params(m) << " parameters, seed "
      << m.seed() << ") to " << out_dir << '\n';
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical-split speaker backbones with depthwise separable self-attention"};
  app.name("hsdssa");
  app.require_subcommand(1);

  std::string config, model, features, out_path, out_dir, enroll_dir, test_dir, trials, scores;
  std::string det_path = "det.csv", json_path, csv_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> topk;
  bool dense = false;
  double p_target = 0.01;
  BenchOptions bench;
  DssaGradcheckOptions grad;

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Weight initialization seed passed to build_model");
  };

  CLI::App* params = app.add_subcommand("params", "Print parameter counts and the HS-block parameter formula");
  params->add_option("--config", config, "System or systems JSON")->required();
  add_seed(params);

  CLI::App* forward = app.add_subcommand("forward", "Embed one FMAT feature matrix");
  forward->add_option("--model", model, "Weight manifest, directory or config JSON")->required();
  forward->add_option("--features", features, "[T x F] FMAT input")->required();
  forward->add_option("--out", out_path, "Output embedding FMAT")->required();
  add_seed(forward);

  CLI::App* score = app.add_subcommand("score", "Cosine-score trials from embedding directories");
  score->add_option("--enroll-dir", enroll_dir, "Directory of enrollment embeddings")->required();
  score->add_option("--test-dir", test_dir, "Directory of test embeddings")->required();
  score->add_option("--trials", trials, "Trial list")->required();
  score->add_option("--out", out_path, "Output score file")->required();

  CLI::App* eval = app.add_subcommand("eval", "EER, minDCF and DET points of a score file");
  eval->add_option("--scores", scores, "Score file")->required();
  eval->add_option("--trials", trials, "Trial list")->required();
  eval->add_option("--det", det_path, "DET CSV output")->capture_default_str();
  eval->add_option("--p-target", p_target, "Target prior of the DCF")->capture_default_str();

  CLI::App* bench_cmd = app.add_subcommand("bench", "Time embed for each configured system");
  bench_cmd->add_option("--config", config, "System or systems JSON")->required();
  bench_cmd->add_option("--reps", bench.repetitions, "Timed repetitions (>= 5)")->capture_default_str();
  bench_cmd->add_option("--warmup", bench.warmup, "Discarded warmup runs (>= 1)")->capture_default_str();
  bench_cmd->add_option("--frames", bench.frames, "Input frames")->capture_default_str();
  bench_cmd->add_option("--json", json_path, "Write the report as JSON");
  bench_cmd->add_option("--csv", csv_path, "Write the report as CSV");
  add_seed(bench_cmd);

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of DSSA gradients");
  gradcheck->add_option("--instances", grad.instances, "Random instances")->capture_default_str();
  gradcheck->add_option("--seed", grad.seed, "Instance seed")->capture_default_str();

  CLI::App* demo = app.add_subcommand("demo-attention", "Dump per-channel DSSA attention maps");
  demo->add_option("--model", model, "Weight manifest, directory or config JSON")->required();
  demo->add_option("--features", features, "[T x F] FMAT input")->required();
  CLI::Option* topk_opt = demo->add_option("--topk", topk, "Override the top-k of the model");
  CLI::Option* dense_opt = demo->add_flag("--dense", dense, "Disable top-k masking");
  topk_opt->excludes(dense_opt);
  demo->add_option("--out-dir", out_dir, "Directory for attention_cNNN.fmat files")->required();
  add_seed(demo);

  CLI::App* init = app.add_subcommand("init-model", "Build a model from a config and save its weights");
  init->add_option("--config", config, "Config JSON")->required();
  init->add_option("--out-dir", out_dir, "Weight directory")->required();
  add_seed(init);

  std::vector<std::string> argv_store{"hsdssa"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n(run with --help for usage)\n";
    return kExitUsage;
  }

  try {
    if (params->parsed()) return run_params(config, seed, out);
    if (forward->parsed()) return run_forward(model, features, out_path, seed, out);
    if (score->parsed()) return run_score(enroll_dir, test_dir, trials, out_path, out);
    if (eval->parsed()) return run_eval(scores, trials, det_path, p_target, out);
    if (bench_cmd->parsed()) return run_bench(config, bench, seed, json_path, csv_path, out);
    if (gradcheck->parsed()) return run_gradcheck(grad, out);
    if (demo->parsed()) return run_demo_attention(model, features, topk, dense, out_dir, seed, out);
    if (init->parsed()) return run_init_model(config, seed, out_dir, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace hsdssa::cli
