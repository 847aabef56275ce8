// Copyright 2026 The akd Authors
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

#include <string>
#include <utility>
#include <vector>

namespace akd {

/// Detection scores (device-directed probability) with parallel binary
/// labels, 1 = device-directed.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  void add(double score, int label) {
    scores.push_back(score);
    labels.push_back(label);
  }
};

struct DetPoint {
  double threshold = 0.0;
  double far = 0.0;  // fraction of negatives accepted
  double frr = 0.0;  // fraction of positives rejected
};

struct EerResult {
  double value = 0.0;
  double threshold = 0.0;
};

/// Decision rule: accept iff score >= threshold. Returns (far, frr).
/// Requires both classes present.
std::pair<double, double> far_frr(const ScoredSet& set, double threshold);

/// Equal error rate: sweeps every distinct score plus one threshold below
/// the minimum (accept-all) and one above the maximum (reject-all), then
/// linearly interpolates the adjacent pair where far - frr changes sign.
/// Exact equality at a swept threshold returns that point directly. The
/// value depends only on score ranks, not on their scale.
EerResult eer(const ScoredSet& set);

/// One point per swept threshold, ascending; far is non-increasing and frr
/// non-decreasing along the list.
std::vector<DetPoint> det_curve(const ScoredSet& set);

/// CSV serialization: header `threshold,far,frr`, six decimal places.
std::string det_csv(const std::vector<DetPoint>& points);

/// Canonical per-invocation DET filename, e.g. "det_HAG.csv".
std::string det_filename(const std::string& invocation);

}  // namespace akd
