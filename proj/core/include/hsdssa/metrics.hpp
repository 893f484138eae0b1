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

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hsdssa {

enum class TrialLabel { kTarget, kNontarget };

struct Trial {
  TrialLabel label = TrialLabel::kTarget;
  std::string enroll;
  std::string test;
  std::optional<double> score;
};

/// Labeled trials. Scores are attached after parsing; EER/minDCF/DET need a
/// finite score on every trial and at least one trial of each class.
class TrialSet {
 public:
  TrialSet() = default;
  explicit TrialSet(std::vector<Trial> entries) : entries_(std::move(entries)) {}

  /// Convenience for scored sets without utterance ids.
  static TrialSet from_scores(std::span<const double> target_scores,
                              std::span<const double> nontarget_scores);

  const std::vector<Trial>& entries() const noexcept { return entries_; }
  std::vector<Trial>& entries() noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Scores split by class. Throws InputError if a score is missing or
  /// non-finite, or a class is empty.
  std::vector<double> target_scores() const;
  std::vector<double> nontarget_scores() const;

 private:
  std::vector<Trial> entries_;
};

/// a.b / (|a||b|), clamped to [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct DetPoint {
  double threshold;
  double far;  // nontargets with score >= threshold
  double frr;  // targets with score < threshold
};

/// One point per distinct score in increasing order, framed by the -inf
/// (FAR 1, FRR 0) and +inf (FAR 0, FRR 1) endpoints.
std::vector<DetPoint> det_points(const TrialSet& trials);

/// Crossing of FAR and FRR, linearly interpolated between the two adjacent
/// DET points that straddle it.
double eer(const TrialSet& trials);

/// min over DET points of c_miss*FRR*p + c_fa*FAR*(1-p), divided by
/// min(c_miss*p, c_fa*(1-p)).
double min_dcf(const TrialSet& trials, double p_target = 0.01, double c_miss = 1.0,
               double c_fa = 1.0);

/// Lines "label enroll test" with label one of 1, 0, target, nontarget.
/// Blank lines are skipped; anything else malformed is a ParseError.
TrialSet parse_trials(std::istream& in);

struct ScoreLine {
  std::string enroll;
  std::string test;
  double score;
};

/// Lines "enroll test score".
std::vector<ScoreLine> parse_scores(std::istream& in);
void write_scores(std::ostream& out, const std::vector<ScoreLine>& scores);

/// Copies scores onto trials keyed by (enroll, test). Every trial must be
/// matched; duplicate score keys are an InputError.
void attach_scores(TrialSet& trials, const std::vector<ScoreLine>& scores);

/// CSV "threshold,far,frr" with a header row.
void write_det_csv(std::ostream& out, const std::vector<DetPoint>& points);

}  // namespace hsdssa
