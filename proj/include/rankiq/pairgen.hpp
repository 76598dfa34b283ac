// Discriminable-pair and -list generation. A candidate pair becomes a DIP
// only when every oracle strictly prefers the same image; the gap T is the
// smallest per-oracle score difference and U(T) is its raised-cosine
// uncertainty. Two DIPs <i,j> and <j,k> whose uncertainties fall in the same
// bucket chain into the list <i,j,k>.
#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rankiq/dataset.hpp"

namespace rankiq {

struct Dip {
  int better = 0;  // i, the preferred image
  int worse = 0;   // j
  double gap = 0.0;
  double uncertainty = 0.0;
  double label = 1.0;  // P(better over worse); 1 for every generated pair
};

struct Dil {
  int first = 0;   // i, best quality
  int second = 0;  // j
  int third = 0;   // k, worst quality
  double uncertainty = 0.0;
};

inline constexpr double kDefaultTc = 20.0;
inline constexpr double kDefaultBucketWidth = 0.05;

// Raised-cosine uncertainty: 1 at T = 0, 0.5 at Tc/2, 0 at and beyond Tc.
inline double uncertainty(double gap, double tc) {
  require(gap >= 0.0, "uncertainty: gap T must be nonnegative");
  require(tc > 0.0, "uncertainty: Tc must be positive");
  if (gap > tc) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * gap / tc));
}

// Orients a candidate pair by unanimous oracle preference. Returns nothing
// when any oracle ties or the oracles disagree in sign; the gap is the
// smallest absolute difference across oracles. Uncertainty is left to the
// caller.
inline std::optional<Dip> orient_pair(int a, int b,
                                      const std::vector<double>& scores_a,
                                      const std::vector<double>& scores_b) {
  require(!scores_a.empty() && scores_a.size() == scores_b.size(),
          "orient_pair: missing oracle score");
  bool all_pos = true, all_neg = true;
  double min_abs = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < scores_a.size(); ++m) {
    const double d = scores_a[m] - scores_b[m];
    if (d <= 0.0) all_pos = false;
    if (d >= 0.0) all_neg = false;
    min_abs = std::min(min_abs, std::abs(d));
  }
  if (!all_pos && !all_neg) return std::nullopt;
  Dip dip;
  dip.better = all_pos ? a : b;
  dip.worse = all_pos ? b : a;
  dip.gap = min_abs;
  dip.label = 1.0;
  return dip;
}

struct DipGenConfig {
  double tc = kDefaultTc;
  double t_min = 0.0;
  std::uint64_t budget = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Decodes candidate index t into the t-th unordered pair (a < b) of m items
// in lexicographic order.
inline std::pair<std::size_t, std::size_t> decode_pair_index(std::uint64_t t,
                                                             std::size_t m) {
  // cum(a) = number of pairs whose first element is < a; invert it with a
  // floating guess corrected by exact integer comparisons.
  const auto cum = [m](std::uint64_t a) {
    return a * (2 * static_cast<std::uint64_t>(m) - a - 1) / 2;
  };
  const double mm = static_cast<double>(2 * m - 1);
  const double disc = std::max(0.0, mm * mm - 8.0 * static_cast<double>(t));
  std::uint64_t a = static_cast<std::uint64_t>(
      std::max(0.0, (mm - std::sqrt(disc)) / 2.0));
  if (a > m - 2) a = m - 2;
  while (a > 0 && cum(a) > t) --a;
  while (a + 1 <= m - 2 && cum(a + 1) <= t) ++a;
  const std::uint64_t b = a + 1 + (t - cum(a));
  return {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
}

}  // namespace detail

// Samples unordered candidate pairs over the given image ids without
// replacement (all of them when budget covers the candidate count), orients
// each, drops gaps below t_min, and attaches U(T). Deterministic per seed.
inline std::vector<Dip> generate_dips(const Dataset& dataset,
                                      const std::vector<int>& ids,
                                      const DipGenConfig& cfg) {
  require(cfg.budget >= 1, "generate_dips: budget must be >= 1");
  require(cfg.t_min >= 0.0, "generate_dips: T_min must be nonnegative");
  require(ids.size() >= 2, "generate_dips: need at least 2 records");
  require(!dataset.oracle_names.empty(), "generate_dips: dataset has no oracles");
  for (int id : ids) dataset.record(id);

  const std::uint64_t total = static_cast<std::uint64_t>(ids.size()) *
                              (ids.size() - 1) / 2;
  Rng rng(mix_seed(cfg.seed, 0xd19ULL));
  const auto picks = rng.sample_without_replacement(total, cfg.budget);

  std::vector<Dip> out;
  out.reserve(picks.size());
  for (std::uint64_t t : picks) {
    const auto [ai, bi] = detail::decode_pair_index(t, ids.size());
    const int a = ids[ai], b = ids[bi];
    auto dip = orient_pair(a, b, dataset.record(a).oracle_scores,
                           dataset.record(b).oracle_scores);
    if (!dip || dip->gap < cfg.t_min) continue;
    dip->uncertainty = uncertainty(dip->gap, cfg.tc);
    out.push_back(*dip);
  }
  return out;
}

inline std::vector<Dip> generate_dips(const Dataset& dataset, double tc,
                                      double t_min, std::uint64_t budget,
                                      std::uint64_t seed) {
  std::vector<int> ids(dataset.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return generate_dips(dataset, ids, {tc, t_min, budget, seed});
}

// Chains DIPs sharing a middle image into three-element lists. Only pairs
// whose uncertainties fall in the same bucket of the given width chain; the
// list inherits the larger of the two uncertainties.
inline std::vector<Dil> chain_dils(const std::vector<Dip>& dips,
                                   double bucket_width, std::uint64_t budget,
                                   std::uint64_t seed) {
  require(!dips.empty(), "chain_dils: no pairs to chain");
  require(bucket_width > 0.0, "chain_dils: bucket width must be positive");
  require(budget >= 1, "chain_dils: budget must be >= 1");

  const auto bucket = [bucket_width](double u) {
    return static_cast<long long>(std::floor(u / bucket_width));
  };

  // Candidates are grouped by (middle image, bucket); within one group every
  // (incoming, outgoing) combination is a candidate, ordered by input index.
  struct Group {
    std::vector<std::size_t> in;   // dips with worse == middle
    std::vector<std::size_t> out;  // dips with better == middle
  };
  std::map<std::pair<int, long long>, Group> groups;
  for (std::size_t d = 0; d < dips.size(); ++d) {
    const long long b = bucket(dips[d].uncertainty);
    groups[{dips[d].worse, b}].in.push_back(d);
    groups[{dips[d].better, b}].out.push_back(d);
  }

  std::vector<const Group*> ordered;
  std::vector<std::uint64_t> cum{0};
  for (const auto& [key, g] : groups) {
    if (g.in.empty() || g.out.empty()) continue;
    ordered.push_back(&g);
    cum.push_back(cum.back() + static_cast<std::uint64_t>(g.in.size()) *
                                   g.out.size());
  }
  const std::uint64_t total = cum.back();
  if (total == 0) return {};

  Rng rng(mix_seed(seed, 0xd11ULL));
  const auto picks = rng.sample_without_replacement(total, budget);

  std::vector<Dil> out;
  out.reserve(picks.size());
  for (std::uint64_t t : picks) {
    const auto it = std::upper_bound(cum.begin(), cum.end(), t);
    const std::size_t gi = static_cast<std::size_t>(it - cum.begin()) - 1;
    const Group& g = *ordered[gi];
    const std::uint64_t local = t - cum[gi];
    const Dip& incoming = dips[g.in[local / g.out.size()]];
    const Dip& outgoing = dips[g.out[local % g.out.size()]];
    if (incoming.better == outgoing.worse) continue;  // i, j, k must be distinct
    Dil dil;
    dil.first = incoming.better;
    dil.second = incoming.worse;
    dil.third = outgoing.worse;
    dil.uncertainty = std::max(incoming.uncertainty, outgoing.uncertainty);
    out.push_back(dil);
  }
  return out;
}

// --------------------------------------------------------------------------
// CSV formats: dips.csv `i,j,T,U,label`; dils.csv `i,j,k,U`.

inline void save_dips(const std::vector<Dip>& dips, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << "i,j,T,U,label\n";
  for (const auto& d : dips) {
    out << d.better << "," << d.worse << "," << format_double(d.gap) << ","
        << format_double(d.uncertainty) << "," << format_double(d.label)
        << "\n";
  }
}

inline std::vector<Dip> load_dips(const std::string& path) {
  const auto rows = detail::read_csv(path);
  require(rows.front() == std::vector<std::string>({"i", "j", "T", "U", "label"}),
          path + ": header must be i,j,T,U,label");
  std::vector<Dip> out;
  out.reserve(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    require(row.size() == 5, path + ": wrong column count");
    Dip d;
    d.better = static_cast<int>(parse_int(row[0], path));
    d.worse = static_cast<int>(parse_int(row[1], path));
    d.gap = parse_double(row[2], path);
    d.uncertainty = parse_double(row[3], path);
    d.label = parse_double(row[4], path);
    require(d.better != d.worse, path + ": pair with identical ids");
    require(d.gap >= 0.0, path + ": negative gap");
    require(d.uncertainty >= 0.0 && d.uncertainty <= 1.0,
            path + ": uncertainty outside [0, 1]");
    require(d.label == 0.0 || d.label == 1.0, path + ": label must be 0 or 1");
    out.push_back(d);
  }
  return out;
}

inline void save_dils(const std::vector<Dil>& dils, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << "i,j,k,U\n";
  for (const auto& d : dils) {
    out << d.first << "," << d.second << "," << d.third << ","
        << format_double(d.uncertainty) << "\n";
  }
}

inline std::vector<Dil> load_dils(const std::string& path) {
  const auto rows = detail::read_csv(path);
  require(rows.front() == std::vector<std::string>({"i", "j", "k", "U"}),
          path + ": header must be i,j,k,U");
  std::vector<Dil> out;
  out.reserve(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    require(row.size() == 4, path + ": wrong column count");
    Dil d;
    d.first = static_cast<int>(parse_int(row[0], path));
    d.second = static_cast<int>(parse_int(row[1], path));
    d.third = static_cast<int>(parse_int(row[2], path));
    d.uncertainty = parse_double(row[3], path);
    require(d.first != d.second && d.second != d.third && d.first != d.third,
            path + ": list ids must be distinct");
    require(d.uncertainty >= 0.0 && d.uncertainty <= 1.0,
            path + ": uncertainty outside [0, 1]");
    out.push_back(d);
  }
  return out;
}

}  // namespace rankiq
