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

#include "akd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "akd/error.hpp"

namespace akd {

namespace {

struct Counts {
  long positives = 0;
  long negatives = 0;
};

Counts validate_set(const ScoredSet& set) {
  if (set.scores.size() != set.labels.size()) {
    throw ContractError("scored set: scores and labels must have equal length");
  }
  Counts c;
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    if (!std::isfinite(set.scores[i])) throw NumericError("scored set: non-finite score");
    if (set.labels[i] == 1) {
      ++c.positives;
    } else if (set.labels[i] == 0) {
      ++c.negatives;
    } else {
      throw ContractError("scored set: labels must be 0 or 1");
    }
  }
  if (c.positives == 0) throw UndefinedRateError("false-reject rate undefined: no positives");
  if (c.negatives == 0) throw UndefinedRateError("false-accept rate undefined: no negatives");
  return c;
}

std::pair<double, double> rates_at(const ScoredSet& set, const Counts& c, double threshold) {
  long accepted_neg = 0;
  long rejected_pos = 0;
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    const bool accept = set.scores[i] >= threshold;
    if (set.labels[i] == 1) {
      if (!accept) ++rejected_pos;
    } else if (accept) {
      ++accepted_neg;
    }
  }
  return {static_cast<double>(accepted_neg) / static_cast<double>(c.negatives),
          static_cast<double>(rejected_pos) / static_cast<double>(c.positives)};
}

std::vector<double> sweep_thresholds(const ScoredSet& set) {
  std::vector<double> t = set.scores;
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  std::vector<double> out;
  out.reserve(t.size() + 2);
  out.push_back(t.front() - 1.0);  // accept everything
  out.insert(out.end(), t.begin(), t.end());
  out.push_back(t.back() + 1.0);  // reject everything
  return out;
}

}  // namespace

std::pair<double, double> far_frr(const ScoredSet& set, double threshold) {
  const Counts c = validate_set(set);
  return rates_at(set, c, threshold);
}

std::vector<DetPoint> det_curve(const ScoredSet& set) {
  const Counts c = validate_set(set);
  std::vector<DetPoint> out;
  for (double t : sweep_thresholds(set)) {
    const auto [far, frr] = rates_at(set, c, t);
    out.push_back(DetPoint{t, far, frr});
  }
  return out;
}

EerResult eer(const ScoredSet& set) {
  const std::vector<DetPoint> curve = det_curve(set);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double diff = curve[i].far - curve[i].frr;
    if (diff == 0.0) return EerResult{curve[i].far, curve[i].threshold};
    if (diff < 0.0) {
      // far - frr is non-increasing and started positive (accept-all gives
      // +1), so the crossing lies inside the previous segment.
      const DetPoint& a = curve[i - 1];
      const DetPoint& b = curve[i];
      const double da = a.far - a.frr;
      const double db = b.far - b.frr;
      const double t = da / (da - db);
      return EerResult{a.far + t * (b.far - a.far), a.threshold + t * (b.threshold - a.threshold)};
    }
  }
  throw ContractError("eer: sweep never crossed the equal-rate line");
}

std::string det_csv(const std::vector<DetPoint>& points) {
  std::string out = "threshold,far,frr\n";
  char buf[96];
  for (const DetPoint& p : points) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n", p.threshold, p.far, p.frr);
    out += buf;
  }
  return out;
}

std::string det_filename(const std::string& invocation) {
  return "det_" + invocation + ".csv";
}

}  // namespace akd
