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

#include "hsdssa/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "hsdssa/error.hpp"

namespace hsdssa {

TrialSet TrialSet::from_scores(std::span<const double> target_scores,
                               std::span<const double> nontarget_scores) {
  std::vector<Trial> entries;
  for (double s : target_scores) entries.push_back({TrialLabel::kTarget, "", "", s});
  for (double s : nontarget_scores) entries.push_back({TrialLabel::kNontarget, "", "", s});
  return TrialSet(std::move(entries));
}

namespace {

std::vector<double> class_scores(const std::vector<Trial>& entries, TrialLabel label) {
  std::vector<double> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& t = entries[i];
    if (t.label != label) continue;
    if (!t.score) {
      throw InputError("trial " + std::to_string(i + 1) + " (" + t.enroll + ", " + t.test +
                       ") has no score");
    }
    if (!std::isfinite(*t.score)) {
      throw InputError("trial " + std::to_string(i + 1) + " has a non-finite score");
    }
    out.push_back(*t.score);
  }
  if (out.empty()) {
    throw InputError(label == TrialLabel::kTarget ? "trial set has no target trials"
                                                  : "trial set has no nontarget trials");
  }
  return out;
}

}  // namespace

std::vector<double> TrialSet::target_scores() const {
  return class_scores(entries_, TrialLabel::kTarget);
}

std::vector<double> TrialSet::nontarget_scores() const {
  return class_scores(entries_, TrialLabel::kNontarget);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw InputError("cosine: zero-norm vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<DetPoint> det_points(const TrialSet& trials) {
  std::vector<double> tgt = trials.target_scores();
  std::vector<double> non = trials.nontarget_scores();
  std::sort(tgt.begin(), tgt.end());
  std::sort(non.begin(), non.end());

  std::vector<double> thresholds = tgt;
  thresholds.insert(thresholds.end(), non.begin(), non.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double nt = static_cast<double>(tgt.size());
  const double nn = static_cast<double>(non.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<DetPoint> points;
  points.reserve(thresholds.size() + 2);
  points.push_back({-kInf, 1.0, 0.0});
  for (double th : thresholds) {
    const auto below_t = std::lower_bound(tgt.begin(), tgt.end(), th) - tgt.begin();
    const auto below_n = std::lower_bound(non.begin(), non.end(), th) - non.begin();
    points.push_back({th, (nn - static_cast<double>(below_n)) / nn,
                      static_cast<double>(below_t) / nt});
  }
  points.push_back({kInf, 0.0, 1.0});
  return points;
}

double eer(const TrialSet& trials) {
  const auto pts = det_points(trials);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = pts[i].far - pts[i].frr;
    if (d > 0.0) continue;
    if (d == 0.0 || i == 0) return pts[i].far;
    const DetPoint& a = pts[i - 1];
    const DetPoint& b = pts[i];
    const double da = a.far - a.frr;
    const double lambda = da / (da - d);
    return a.far + lambda * (b.far - a.far);
  }
  return pts.back().far;  // unreachable: the +inf endpoint has FAR - FRR = -1
}

double min_dcf(const TrialSet& trials, double p_target, double c_miss, double c_fa) {
  if (!(p_target > 0.0 && p_target < 1.0)) {
    throw InputError("min_dcf: p_target must lie in (0, 1)");
  }
  if (!(c_miss > 0.0 && c_fa > 0.0)) throw InputError("min_dcf: costs must be positive");
  const auto pts = det_points(trials);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    best = std::min(best, c_miss * p.frr * p_target + c_fa * p.far * (1.0 - p_target));
  }
  return best / std::min(c_miss * p_target, c_fa * (1.0 - p_target));
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(std::move(tok));
  return out;
}

}  // namespace

TrialSet parse_trials(std::istream& in) {
  std::vector<Trial> entries;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 3) {
      throw ParseError(lineno, "expected 'label enroll test', got " +
                                   std::to_string(tok.size()) + " fields");
    }
    TrialLabel label;
    if (tok[0] == "1" || tok[0] == "target") {
      label = TrialLabel::kTarget;
    } else if (tok[0] == "0" || tok[0] == "nontarget") {
      label = TrialLabel::kNontarget;
    } else {
      throw ParseError(lineno, "unknown label '" + tok[0] + "'");
    }
    entries.push_back({label, tok[1], tok[2], std::nullopt});
  }
  return TrialSet(std::move(entries));
}

std::vector<ScoreLine> parse_scores(std::istream& in) {
  std::vector<ScoreLine> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 3) {
      throw ParseError(lineno, "expected 'enroll test score', got " +
                                   std::to_string(tok.size()) + " fields");
    }
    std::size_t used = 0;
    double score = 0.0;
    try {
      score = std::stod(tok[2], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok[2].size() || !std::isfinite(score)) {
      throw ParseError(lineno, "bad score '" + tok[2] + "'");
    }
    out.push_back({tok[0], tok[1], score});
  }
  return out;
}

namespace {

// Shortest text that parses back to the same double; infinities as inf/-inf.
std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

void write_scores(std::ostream& out, const std::vector<ScoreLine>& scores) {
  for (const auto& s : scores) out << s.enroll << ' ' << s.test << ' ' << format_double(s.score) << '\n';
}

void attach_scores(TrialSet& trials, const std::vector<ScoreLine>& scores) {
  std::map<std::pair<std::string, std::string>, double> table;
  for (const auto& s : scores) {
    if (!table.emplace(std::make_pair(s.enroll, s.test), s.score).second) {
      throw InputError("duplicate score for (" + s.enroll + ", " + s.test + ")");
    }
  }
  for (auto& t : trials.entries()) {
    auto it = table.find({t.enroll, t.test});
    if (it == table.end()) {
      throw InputError("no score for trial (" + t.enroll + ", " + t.test + ")");
    }
    t.score = it->second;
  }
}

void write_det_csv(std::ostream& out, const std::vector<DetPoint>& points) {
  out << "threshold,far,frr\n";
  for (const auto& p : points) {
    out << format_double(p.threshold) << ',' << format_double(p.far) << ','
        << format_double(p.frr) << '\n';
  }
}

}  // namespace hsdssa
