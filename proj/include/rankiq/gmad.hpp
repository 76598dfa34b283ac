// Group maximum-differentiation pair selection: within each defender quality
// level, pick the pair the attacker separates the most while the defender
// rates both images inside a narrow band around the level center.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "rankiq/common.hpp"

namespace rankiq {

struct GmadPair {
  int best = 0;
  int worst = 0;
  int level = 0;
};

// Defender scores are split into level_count quantile levels; the candidates
// of a level are the images whose defender score lies within band_eps of the
// level center. Levels with matching centers collapse into one; levels with
// fewer than two candidates are skipped. Ties on the attacker side resolve
// to the smallest id, so the output is invariant under strictly increasing
// transforms of the attacker scores.
inline std::vector<GmadPair> gmad_pairs(std::span<const double> attacker,
                                        std::span<const double> defender,
                                        int level_count, double band_eps) {
  require(!defender.empty(), "gmad_pairs: empty dataset");
  require(attacker.size() == defender.size(),
          "gmad_pairs: score sets must cover the same images");
  require(level_count >= 1, "gmad_pairs: level count must be >= 1");
  require(band_eps > 0.0, "gmad_pairs: band epsilon must be positive");

  std::vector<double> sorted(defender.begin(), defender.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> centers;
  for (int l = 0; l < level_count; ++l) {
    const double q = (static_cast<double>(l) + 0.5) / level_count;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    const double center = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    if (centers.empty() || center != centers.back()) centers.push_back(center);
  }

  std::vector<GmadPair> out;
  for (std::size_t l = 0; l < centers.size(); ++l) {
    int best = -1, worst = -1;
    for (std::size_t i = 0; i < defender.size(); ++i) {
      if (std::abs(defender[i] - centers[l]) > band_eps) continue;
      if (best < 0 || attacker[i] > attacker[static_cast<std::size_t>(best)]) {
        best = static_cast<int>(i);
      }
      if (worst < 0 || attacker[i] < attacker[static_cast<std::size_t>(worst)]) {
        worst = static_cast<int>(i);
      }
    }
    if (best < 0 || worst < 0 || best == worst) continue;
    out.push_back({best, worst, static_cast<int>(l)});
  }
  require(!out.empty(), "gmad_pairs: no level has at least 2 candidates");
  return out;
}

inline void save_gmad_pairs(const std::vector<GmadPair>& pairs,
                            const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << "best_id,worst_id,level\n";
  for (const auto& p : pairs) {
    out << p.best << "," << p.worst << "," << p.level << "\n";
  }
}

}  // namespace rankiq
