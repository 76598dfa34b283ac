// Dataset model and CSV ingestion.
//
// Files:
//   features.csv  header `id,f0,f1,...`, one row per image
//   scores.csv    header `id,source_id,distortion,level,<oracle1>,...`
//   mos.csv       header `id,mos`
//
// Reals are serialized as shortest round-trip decimals, so a save/load
// cycle reproduces every record bit-exactly. Ids must be dense 0..n-1,
// each distorted record must point at a pristine source record, and each
// source must carry the full K x Q grid of distorted versions.
#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rankiq/common.hpp"

namespace rankiq {

enum class DistortionKind { kPristine, kWhiteNoise, kGaussianBlur, kExternal };

struct Distortion {
  DistortionKind kind = DistortionKind::kPristine;
  std::string tag = "PRISTINE";

  static Distortion pristine() { return {DistortionKind::kPristine, "PRISTINE"}; }
  static Distortion white_noise() { return {DistortionKind::kWhiteNoise, "WN"}; }
  static Distortion gaussian_blur() { return {DistortionKind::kGaussianBlur, "BLUR"}; }

  static Distortion from_tag(std::string_view t) {
    if (t == "PRISTINE") return pristine();
    if (t == "WN") return white_noise();
    if (t == "BLUR") return gaussian_blur();
    require(!t.empty(), "empty distortion tag");
    return {DistortionKind::kExternal, std::string(t)};
  }

  bool is_pristine() const { return kind == DistortionKind::kPristine; }
  bool operator==(const Distortion& o) const { return tag == o.tag; }
};

struct ImageRecord {
  int id = 0;
  int source_id = 0;
  Distortion distortion;
  int level = 0;
  std::vector<double> features;
  std::vector<double> oracle_scores;  // aligned with Dataset::oracle_names
  std::optional<double> mos;
};

struct Dataset {
  std::vector<ImageRecord> records;  // index == id
  std::vector<std::string> oracle_names;
  int source_count = 0;      // S
  int distortion_count = 0;  // K, distinct non-pristine tags
  int level_count = 0;       // Q

  std::size_t size() const { return records.size(); }

  const ImageRecord& record(int id) const {
    require(id >= 0 && id < static_cast<int>(records.size()),
            "unknown image id " + format_int(id));
    return records[static_cast<std::size_t>(id)];
  }

  int oracle_index(const std::string& name) const {
    for (std::size_t i = 0; i < oracle_names.size(); ++i) {
      if (oracle_names[i] == name) return static_cast<int>(i);
    }
    fail("unknown oracle '" + name + "'");
  }

  std::vector<std::string> distortion_tags() const {
    std::set<std::string> tags;
    for (const auto& r : records) {
      if (!r.distortion.is_pristine()) tags.insert(r.distortion.tag);
    }
    return {tags.begin(), tags.end()};
  }
};

// --------------------------------------------------------------------------
// CSV plumbing.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  require(!rows.empty(), "'" + path + "' is empty");
  return rows;
}

}  // namespace detail

// Checks every structural invariant and fills in S/K/Q. Records must be in
// id order on entry.
inline void validate_dataset(Dataset& ds) {
  require(!ds.records.empty(), "dataset has no records");
  const std::size_t d = ds.records.front().features.size();
  const std::size_t m = ds.oracle_names.size();
  int max_level = 0;
  std::set<std::string> tags;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const ImageRecord& r = ds.records[i];
    require(r.id == static_cast<int>(i),
            "image ids must be dense 0..n-1; found id " + format_int(r.id) +
                " at row " + format_int(static_cast<long long>(i)));
    require(r.features.size() == d,
            "feature length mismatch for id " + format_int(r.id));
    require(r.oracle_scores.size() == m,
            "oracle score count mismatch for id " + format_int(r.id));
    require((r.level == 0) == r.distortion.is_pristine(),
            "level must be 0 exactly for pristine records (id " +
                format_int(r.id) + ")");
    require(r.level >= 0, "negative distortion level (id " + format_int(r.id) + ")");
    if (r.distortion.is_pristine()) {
      require(r.source_id == r.id,
              "pristine record must be its own source (id " + format_int(r.id) + ")");
    } else {
      require(r.source_id >= 0 && r.source_id < static_cast<int>(ds.records.size()) &&
                  ds.records[static_cast<std::size_t>(r.source_id)].distortion.is_pristine(),
              "source_id of id " + format_int(r.id) +
                  " does not refer to a pristine record");
      tags.insert(r.distortion.tag);
      max_level = std::max(max_level, r.level);
    }
  }
  ds.level_count = max_level;
  ds.distortion_count = static_cast<int>(tags.size());
  ds.source_count = 0;
  for (const auto& r : ds.records) {
    if (r.distortion.is_pristine()) ++ds.source_count;
  }
  // Family completeness: every source carries one record per (tag, level).
  std::map<int, std::set<std::pair<std::string, int>>> families;
  for (const auto& r : ds.records) {
    if (r.distortion.is_pristine()) {
      families.try_emplace(r.id);
      continue;
    }
    const bool fresh =
        families[r.source_id].insert({r.distortion.tag, r.level}).second;
    require(fresh, "duplicate (distortion, level) for source " +
                       format_int(r.source_id) + ": " + r.distortion.tag +
                       " level " + format_int(r.level));
  }
  for (const auto& [src, have] : families) {
    for (const auto& tag : tags) {
      for (int level = 1; level <= ds.level_count; ++level) {
        require(have.count({tag, level}) == 1,
                "incomplete family for source " + format_int(src) +
                    ": missing " + tag + " level " + format_int(level));
      }
    }
  }
}

inline Dataset make_dataset(std::vector<ImageRecord> records,
                            std::vector<std::string> oracle_names) {
  Dataset ds;
  ds.records = std::move(records);
  ds.oracle_names = std::move(oracle_names);
  validate_dataset(ds);
  return ds;
}

inline Dataset load_dataset(const std::string& features_path,
                            const std::string& scores_path,
                            const std::string& mos_path = "") {
  // features.csv
  const auto frows = detail::read_csv(features_path);
  require(frows.front().size() >= 2 && frows.front()[0] == "id",
          features_path + ": header must be id,f0,f1,...");
  const std::size_t d = frows.front().size() - 1;
  std::map<int, std::vector<double>> features;
  for (std::size_t i = 1; i < frows.size(); ++i) {
    const auto& row = frows[i];
    require(row.size() == d + 1,
            features_path + " row " + format_int(static_cast<long long>(i)) +
                ": expected " + format_int(static_cast<long long>(d + 1)) +
                " columns, found " + format_int(static_cast<long long>(row.size())));
    const int id = static_cast<int>(parse_int(row[0], features_path));
    std::vector<double> f(d);
    for (std::size_t c = 0; c < d; ++c) f[c] = parse_double(row[c + 1], features_path);
    require(features.emplace(id, std::move(f)).second,
            features_path + ": duplicate id " + format_int(id));
  }

  // scores.csv
  const auto srows = detail::read_csv(scores_path);
  const auto& shead = srows.front();
  require(shead.size() >= 4 && shead[0] == "id" && shead[1] == "source_id" &&
              shead[2] == "distortion" && shead[3] == "level",
          scores_path + ": header must start with id,source_id,distortion,level");
  std::vector<std::string> oracle_names(shead.begin() + 4, shead.end());
  std::map<int, ImageRecord> by_id;
  for (std::size_t i = 1; i < srows.size(); ++i) {
    const auto& row = srows[i];
    require(row.size() == shead.size(),
            scores_path + " row " + format_int(static_cast<long long>(i)) +
                ": wrong column count");
    ImageRecord r;
    r.id = static_cast<int>(parse_int(row[0], scores_path));
    r.source_id = static_cast<int>(parse_int(row[1], scores_path));
    r.distortion = Distortion::from_tag(row[2]);
    r.level = static_cast<int>(parse_int(row[3], scores_path));
    r.oracle_scores.resize(oracle_names.size());
    for (std::size_t c = 0; c < oracle_names.size(); ++c) {
      r.oracle_scores[c] = parse_double(row[c + 4], scores_path);
    }
    const auto fit = features.find(r.id);
    require(fit != features.end(),
            scores_path + ": id " + format_int(r.id) + " has no feature row");
    r.features = fit->second;
    require(by_id.emplace(r.id, std::move(r)).second,
            scores_path + ": duplicate id " + format_int(r.id));
  }
  require(by_id.size() == features.size(),
          "feature ids without score rows in " + scores_path);

  // mos.csv (optional)
  if (!mos_path.empty()) {
    const auto mrows = detail::read_csv(mos_path);
    require(mrows.front().size() == 2 && mrows.front()[0] == "id" &&
                mrows.front()[1] == "mos",
            mos_path + ": header must be id,mos");
    for (std::size_t i = 1; i < mrows.size(); ++i) {
      const auto& row = mrows[i];
      require(row.size() == 2, mos_path + ": wrong column count");
      const int id = static_cast<int>(parse_int(row[0], mos_path));
      const auto it = by_id.find(id);
      require(it != by_id.end(), mos_path + ": unknown id " + format_int(id));
      require(!it->second.mos.has_value(),
              mos_path + ": duplicate id " + format_int(id));
      it->second.mos = parse_double(row[1], mos_path);
    }
  }

  Dataset ds;
  ds.oracle_names = std::move(oracle_names);
  ds.records.reserve(by_id.size());
  for (auto& [id, rec] : by_id) ds.records.push_back(std::move(rec));
  validate_dataset(ds);
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& features_path,
                         const std::string& scores_path,
                         const std::string& mos_path = "") {
  {
    std::ofstream out(features_path);
    require(out.good(), "cannot open '" + features_path + "' for writing");
    out << "id";
    for (std::size_t c = 0; c < ds.records.front().features.size(); ++c) {
      out << ",f" << c;
    }
    out << "\n";
    for (const auto& r : ds.records) {
      out << r.id;
      for (double f : r.features) out << "," << format_double(f);
      out << "\n";
    }
  }
  {
    std::ofstream out(scores_path);
    require(out.good(), "cannot open '" + scores_path + "' for writing");
    out << "id,source_id,distortion,level";
    for (const auto& name : ds.oracle_names) out << "," << name;
    out << "\n";
    for (const auto& r : ds.records) {
      out << r.id << "," << r.source_id << "," << r.distortion.tag << ","
          << r.level;
      for (double s : r.oracle_scores) out << "," << format_double(s);
      out << "\n";
    }
  }
  if (!mos_path.empty()) {
    std::ofstream out(mos_path);
    require(out.good(), "cannot open '" + mos_path + "' for writing");
    out << "id,mos\n";
    for (const auto& r : ds.records) {
      if (r.mos) out << r.id << "," << format_double(*r.mos) << "\n";
    }
  }
}

// --------------------------------------------------------------------------
// Source-level subsetting (used for held-out evaluation pools). Ids are
// re-densified; original_ids maps new id -> old id.

struct DatasetSubset {
  Dataset data;
  std::vector<int> original_ids;
};

inline DatasetSubset subset_by_sources(const Dataset& ds,
                                       const std::vector<int>& source_ids) {
  const std::set<int> keep(source_ids.begin(), source_ids.end());
  DatasetSubset out;
  std::vector<int> remap(ds.records.size(), -1);
  for (const auto& r : ds.records) {
    if (!keep.count(r.source_id)) continue;
    remap[static_cast<std::size_t>(r.id)] =
        static_cast<int>(out.original_ids.size());
    out.original_ids.push_back(r.id);
  }
  require(!out.original_ids.empty(), "source subset selects no records");
  out.data.oracle_names = ds.oracle_names;
  for (int old_id : out.original_ids) {
    ImageRecord r = ds.records[static_cast<std::size_t>(old_id)];
    r.id = remap[static_cast<std::size_t>(old_id)];
    r.source_id = remap[static_cast<std::size_t>(r.source_id)];
    out.data.records.push_back(std::move(r));
  }
  validate_dataset(out.data);
  return out;
}

}  // namespace rankiq
