#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rankiq/dataset.hpp"
#include "rankiq/evalsuite.hpp"
#include "rankiq/froracles.hpp"
#include "rankiq/gmad.hpp"
#include "rankiq/listrank.hpp"
#include "rankiq/pairgen.hpp"
#include "rankiq/pairrank.hpp"
#include "rankiq/qnet.hpp"
#include "rankiq/synth.hpp"

namespace fs = std::filesystem;

namespace rankiq::cli {
namespace {

constexpr std::uint64_t kSaltSources = 1;
constexpr std::uint64_t kSaltDistort = 2;
constexpr std::uint64_t kSaltTestSplit = 3;
constexpr std::uint64_t kSaltTrainDips = 4;
constexpr std::uint64_t kSaltEvalDips = 5;
constexpr std::uint64_t kSaltDils = 6;
constexpr std::uint64_t kSaltInitMlp = 7;
constexpr std::uint64_t kSaltTrainLinear = 8;
constexpr std::uint64_t kSaltTrainMlp = 9;
constexpr std::uint64_t kSaltSessions = 10;

constexpr double kMosPerLevel = 20.0;  // pseudo-MOS: 100 - 20 * level

double pseudo_mos(int level) { return 100.0 - kMosPerLevel * level; }

// ---------------------------------------------------------------------------
// Small CSV helpers shared by the subcommands.

// scores.csv without a matching features file: records carry empty feature
// vectors but all structural invariants still hold.
Dataset load_scores_table(const std::string& path) {
  const auto rows = detail::read_csv(path);
  const auto& head = rows.front();
  require(head.size() >= 4 && head[0] == "id" && head[1] == "source_id" &&
              head[2] == "distortion" && head[3] == "level",
          path + ": header must start with id,source_id,distortion,level");
  Dataset ds;
  ds.oracle_names.assign(head.begin() + 4, head.end());
  std::map<int, ImageRecord> by_id;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    require(row.size() == head.size(), path + ": wrong column count");
    ImageRecord r;
    r.id = static_cast<int>(parse_int(row[0], path));
    r.source_id = static_cast<int>(parse_int(row[1], path));
    r.distortion = Distortion::from_tag(row[2]);
    r.level = static_cast<int>(parse_int(row[3], path));
    for (std::size_t c = 4; c < row.size(); ++c) {
      r.oracle_scores.push_back(parse_double(row[c], path));
    }
    require(by_id.emplace(r.id, std::move(r)).second,
            path + ": duplicate id " + format_int(r.id));
  }
  for (auto& [id, rec] : by_id) ds.records.push_back(std::move(rec));
  validate_dataset(ds);
  return ds;
}

// features.csv as a bare table: id -> vector, ids dense.
std::vector<std::vector<double>> load_features_table(const std::string& path) {
  const auto rows = detail::read_csv(path);
  require(rows.front().size() >= 2 && rows.front()[0] == "id",
          path + ": header must be id,f0,f1,...");
  const std::size_t d = rows.front().size() - 1;
  std::map<int, std::vector<double>> by_id;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    require(row.size() == d + 1, path + ": wrong column count");
    const int id = static_cast<int>(parse_int(row[0], path));
    std::vector<double> f(d);
    for (std::size_t c = 0; c < d; ++c) f[c] = parse_double(row[c + 1], path);
    require(by_id.emplace(id, std::move(f)).second,
            path + ": duplicate id " + format_int(id));
  }
  std::vector<std::vector<double>> out;
  out.reserve(by_id.size());
  int expect = 0;
  for (auto& [id, f] : by_id) {
    require(id == expect++, path + ": ids must be dense 0..n-1");
    out.push_back(std::move(f));
  }
  require(!out.empty(), path + ": no rows");
  return out;
}

// id,score tables (predict output, gmad input).
std::vector<double> load_id_score_csv(const std::string& path) {
  const auto rows = detail::read_csv(path);
  require(rows.front().size() == 2 && rows.front()[0] == "id",
          path + ": header must be id,<score>");
  std::map<int, double> by_id;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    require(row.size() == 2, path + ": wrong column count");
    const int id = static_cast<int>(parse_int(row[0], path));
    require(by_id.emplace(id, parse_double(row[1], path)).second,
            path + ": duplicate id " + format_int(id));
  }
  std::vector<double> out;
  int expect = 0;
  for (const auto& [id, s] : by_id) {
    require(id == expect++, path + ": ids must be dense 0..n-1");
    out.push_back(s);
  }
  require(!out.empty(), path + ": no rows");
  return out;
}

void write_id_score_csv(const std::vector<double>& scores,
                        const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << "id,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << i << "," << format_double(scores[i]) << "\n";
  }
}

std::vector<int> parse_arch(const std::string& spec) {
  std::vector<int> dims;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    dims.push_back(static_cast<int>(parse_int(tok, "--arch")));
  }
  require(!dims.empty(), "--arch must list at least the input dimension");
  for (int d : dims) require(d > 0, "--arch dimensions must be positive");
  return dims;
}

// Linear model for a bare input dimension, MLP otherwise.
AnyModel make_model(const std::vector<int>& arch, std::uint64_t seed) {
  if (arch.size() == 1) return LinearModel(arch[0]);
  std::vector<int> dims = arch;
  dims.push_back(1);
  return qnet_init(dims, seed);
}

std::string config_digest(const TrainConfig& cfg, const std::vector<int>& arch) {
  std::string text = format_int(cfg.batch_size) + "|" +
                     format_double(cfg.momentum) + "|" +
                     format_double(cfg.weight_decay) + "|" +
                     format_double(cfg.learning_rate) + "|" +
                     format_int(cfg.epochs) + "|" +
                     format_double(cfg.validation_fraction) + "|" +
                     (cfg.shuffle ? "1" : "0");
  for (int d : arch) text += "," + format_int(d);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> predict_all(const AnyModel& model,
                                const std::vector<std::vector<double>>& features,
                                int threads) {
  std::vector<double> scores(features.size());
  // Validate dimensions before entering worker threads.
  for (const auto& f : features) {
    require(static_cast<int>(f.size()) == model_input_dim(model),
            "model input dimension " + format_int(model_input_dim(model)) +
                " does not match feature dimension " +
                format_int(static_cast<long long>(f.size())));
  }
  parallel_for(features.size(), threads, [&](std::size_t i) {
    scores[i] = model_forward(model, features[i]);
  });
  return scores;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
  int count = 20;
  int side = 64;
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 1;
};

void cmd_synth(const SynthOpts& o) {
  fs::create_directories(fs::path(o.out_dir) / "images");
  const auto sources = synth_sources(o.count, o.side, mix_seed(o.seed, kSaltSources));

  struct Row {
    int id, source_id, level;
    std::string tag, path;
  };
  const int per_source = 1 + 2 * kDistortionLevels;
  std::vector<Row> rows(static_cast<std::size_t>(o.count) * per_source);
  std::vector<std::vector<double>> features(rows.size());

  parallel_for(static_cast<std::size_t>(o.count), o.threads, [&](std::size_t s) {
    const int base = static_cast<int>(s) * per_source;
    auto emit = [&](int offset, const Distortion& dist, int level) {
      const int id = base + offset;
      const Image img =
          level == 0 ? sources[s]
                     : apply_distortion(sources[s], dist, level,
                                        mix_seed(o.seed, kSaltDistort + id));
      char name[32];
      std::snprintf(name, sizeof(name), "images/%05d.pgm", id);
      write_pgm(img, (fs::path(o.out_dir) / name).string());
      rows[static_cast<std::size_t>(id)] = {id, base, level, dist.tag, name};
      features[static_cast<std::size_t>(id)] = extract_features(img);
    };
    emit(0, Distortion::pristine(), 0);
    for (int level = 1; level <= kDistortionLevels; ++level) {
      emit(level, Distortion::white_noise(), level);
    }
    for (int level = 1; level <= kDistortionLevels; ++level) {
      emit(kDistortionLevels + level, Distortion::gaussian_blur(), level);
    }
  });

  {
    std::ofstream out(fs::path(o.out_dir) / "index.csv");
    require(out.good(), "cannot write index.csv");
    out << "id,source_id,distortion,level,path\n";
    for (const auto& r : rows) {
      out << r.id << "," << r.source_id << "," << r.tag << "," << r.level << ","
          << r.path << "\n";
    }
  }
  {
    std::ofstream out(fs::path(o.out_dir) / "features.csv");
    require(out.good(), "cannot write features.csv");
    out << "id";
    for (int c = 0; c < kFeatureDim; ++c) out << ",f" << c;
    out << "\n";
    for (std::size_t i = 0; i < features.size(); ++i) {
      out << i;
      for (double f : features[i]) out << "," << format_double(f);
      out << "\n";
    }
  }
  std::cout << "wrote " << rows.size() << " images, index.csv and features.csv to "
            << o.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// score

struct ScoreOpts {
  std::string index_path;
  std::string oracles = "psnr,ssim";
  std::string calibrate_mode = "levels";  // levels | none
  std::string out_path;
  std::string mos_out;
  int threads = 1;
};

void cmd_score(const ScoreOpts& o) {
  const auto rows = detail::read_csv(o.index_path);
  require(rows.front() == std::vector<std::string>(
                              {"id", "source_id", "distortion", "level", "path"}),
          o.index_path + ": header must be id,source_id,distortion,level,path");
  struct Entry {
    int id, source_id, level;
    Distortion dist;
    std::string path;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    require(row.size() == 5, o.index_path + ": wrong column count");
    entries.push_back({static_cast<int>(parse_int(row[0], o.index_path)),
                       static_cast<int>(parse_int(row[1], o.index_path)),
                       static_cast<int>(parse_int(row[3], o.index_path)),
                       Distortion::from_tag(row[2]), row[4]});
  }
  require(!entries.empty(), o.index_path + ": no rows");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    require(entries[i].id == static_cast<int>(i),
            o.index_path + ": ids must be dense 0..n-1");
  }

  std::vector<std::string> oracle_names;
  {
    std::stringstream ss(o.oracles);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      require(tok == "psnr" || tok == "ssim",
              "unknown oracle '" + tok + "' (built-in: psnr, ssim)");
      oracle_names.push_back(tok);
    }
    require(!oracle_names.empty(), "--oracles must name at least one oracle");
  }
  require(o.calibrate_mode == "levels" || o.calibrate_mode == "none",
          "--calibrate must be 'levels' or 'none'");

  const fs::path base = fs::path(o.index_path).parent_path();
  std::vector<Image> images(entries.size());
  parallel_for(entries.size(), o.threads, [&](std::size_t i) {
    images[i] = read_pgm((base / entries[i].path).string());
  });

  for (const auto& e : entries) {
    require(e.source_id >= 0 && e.source_id < static_cast<int>(entries.size()) &&
                entries[static_cast<std::size_t>(e.source_id)].dist.is_pristine(),
            o.index_path + ": source_id of id " + format_int(e.id) +
                " is not a pristine record");
  }
  std::vector<std::vector<double>> raw(entries.size());
  parallel_for(entries.size(), o.threads, [&](std::size_t i) {
    const auto& e = entries[i];
    const Image& ref = images[static_cast<std::size_t>(e.source_id)];
    raw[i].reserve(oracle_names.size());
    for (const auto& name : oracle_names) {
      raw[i].push_back(name == "psnr" ? psnr(ref, images[i])
                                      : ssim(ref, images[i]));
    }
  });

  // Assemble records, then calibrate each oracle onto the pseudo-MOS scale.
  std::vector<ImageRecord> records;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ImageRecord r;
    r.id = entries[i].id;
    r.source_id = entries[i].source_id;
    r.distortion = entries[i].dist;
    r.level = entries[i].level;
    r.features = {};
    r.oracle_scores = raw[i];
    records.push_back(std::move(r));
  }
  Dataset ds;
  ds.records = std::move(records);
  ds.oracle_names = oracle_names;
  validate_dataset(ds);

  if (o.calibrate_mode == "levels") {
    for (const auto& name : oracle_names) {
      const int col = ds.oracle_index(name);
      std::vector<std::pair<double, double>> anchors;
      for (const auto& r : ds.records) {
        anchors.push_back({r.oracle_scores[static_cast<std::size_t>(col)],
                           pseudo_mos(r.level)});
      }
      ds = calibrate(std::move(ds), name, anchors);
    }
  }

  {
    std::ofstream out(o.out_path);
    require(out.good(), "cannot open '" + o.out_path + "' for writing");
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
  if (!o.mos_out.empty()) {
    std::ofstream out(o.mos_out);
    require(out.good(), "cannot open '" + o.mos_out + "' for writing");
    out << "id,mos\n";
    for (const auto& r : ds.records) {
      out << r.id << "," << format_double(pseudo_mos(r.level)) << "\n";
    }
  }
  std::cout << "scored " << ds.size() << " images with "
            << ds.oracle_names.size() << " oracle(s) -> " << o.out_path << "\n";
}

// ---------------------------------------------------------------------------
// gen-pairs

struct GenPairsOpts {
  std::string scores_path;
  double tc = kDefaultTc;
  double t_min = 0.0;
  std::uint64_t budget = 0;
  std::uint64_t seed = 0;
  std::string out_path;
  bool lists = false;
  double bucket_width = kDefaultBucketWidth;
  std::uint64_t list_budget = 0;
  std::string lists_out;
};

void cmd_gen_pairs(const GenPairsOpts& o) {
  const Dataset ds = load_scores_table(o.scores_path);
  const auto dips = generate_dips(ds, o.tc, o.t_min, o.budget, o.seed);
  save_dips(dips, o.out_path);
  std::cout << "generated " << dips.size() << " pairs -> " << o.out_path << "\n";
  if (o.lists) {
    const std::uint64_t budget = o.list_budget == 0 ? o.budget : o.list_budget;
    const auto dils = chain_dils(dips, o.bucket_width, budget,
                                 mix_seed(o.seed, kSaltDils));
    require(!o.lists_out.empty(), "--lists requires --lists-out");
    save_dils(dils, o.lists_out);
    std::cout << "chained " << dils.size() << " lists -> " << o.lists_out << "\n";
  }
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string pairs_path;
  std::string lists_path;
  std::string features_path;
  std::string scores_path;
  std::string arch = "16,256,128,3";
  TrainConfig cfg;
  std::string out_path;
  std::string log_path;
  int threads = 1;
};

void cmd_train(const TrainOpts& o) {
  require(o.pairs_path.empty() != o.lists_path.empty(),
          "train needs exactly one of --pairs or --lists");
  Dataset ds = load_dataset(o.features_path, o.scores_path);
  const auto arch = parse_arch(o.arch);
  require(arch[0] == static_cast<int>(ds.records.front().features.size()),
          "--arch input dimension does not match the feature files");

  AnyModel model = make_model(arch, mix_seed(o.cfg.seed, kSaltInitMlp));

  nlohmann::json meta;
  meta["seed"] = o.cfg.seed;
  meta["config_digest"] = config_digest(o.cfg, arch);
  meta["arch"] = arch;
  meta["trained_on"] = o.pairs_path.empty() ? "lists" : "pairs";

  const auto finish = [&](auto&& result) {
    meta["best_val_loss"] = result.best_val_loss;
    meta["best_batch"] = result.best_batch;
    save_model(AnyModel(std::move(result.model)), o.out_path, meta);
    if (!o.log_path.empty()) save_train_log(result.log, o.log_path);
    std::cout << "trained on " << result.train_examples << " examples ("
              << result.val_examples << " validation), best val loss "
              << format_double(result.best_val_loss) << " at batch "
              << result.best_batch << " -> " << o.out_path << "\n";
  };

  if (!o.pairs_path.empty()) {
    const auto dips = load_dips(o.pairs_path);
    std::visit([&](auto m) { finish(train_pairwise(ds, dips, std::move(m),
                                                   o.cfg, o.threads)); },
               std::move(model));
  } else {
    const auto dils = load_dils(o.lists_path);
    std::visit([&](auto m) { finish(train_list(ds, dils, std::move(m), o.cfg,
                                               o.threads)); },
               std::move(model));
  }
}

// ---------------------------------------------------------------------------
// predict

struct PredictOpts {
  std::string model_path;
  std::string features_path;
  std::string out_path;
  int threads = 1;
};

void cmd_predict(const PredictOpts& o) {
  const AnyModel model = load_model(o.model_path);
  const auto features = load_features_table(o.features_path);
  const auto scores = predict_all(model, features, o.threads);
  write_id_score_csv(scores, o.out_path);
  std::cout << "predicted " << scores.size() << " scores -> " << o.out_path
            << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string model_path;
  std::string features_path;
  std::string scores_path;
  std::string mos_path;
  std::string pairs_path;
  int sessions = 1000;
  double split = 0.8;
  std::uint64_t seed = 0;
  std::string report_path;
  int threads = 1;
};

EvalReport evaluate_model(const Dataset& ds, const std::vector<double>& scores,
                          const std::string& pairs_path, int sessions,
                          double split, std::uint64_t seed, int threads) {
  EvalReport report;
  report.session_count = sessions;
  report.split_fraction = split;
  report.seed = seed;

  std::vector<double> pristine, distorted;
  for (const auto& r : ds.records) {
    (r.distortion.is_pristine() ? pristine : distorted)
        .push_back(scores[static_cast<std::size_t>(r.id)]);
  }
  if (!pristine.empty() && !distorted.empty()) {
    report.d = d_test(pristine, distorted);
  }
  if (!distorted.empty()) {
    report.l_s = l_test(ds, scores);
  }
  if (!pairs_path.empty()) {
    report.p = p_test(load_dips(pairs_path), scores);
  }
  const bool has_mos =
      std::any_of(ds.records.begin(), ds.records.end(),
                  [](const ImageRecord& r) { return r.mos.has_value(); });
  if (has_mos) {
    const auto sessions_out =
        session_protocol(ds, scores, sessions, split, seed, true, threads);
    report.srcc_median = sessions_out.srcc_median;
    report.plcc_median = sessions_out.plcc_median;
  }
  return report;
}

void cmd_eval(const EvalOpts& o) {
  const Dataset ds = load_dataset(o.features_path, o.scores_path, o.mos_path);
  const AnyModel model = load_model(o.model_path);
  std::vector<std::vector<double>> features;
  features.reserve(ds.size());
  for (const auto& r : ds.records) features.push_back(r.features);
  const auto scores = predict_all(model, features, o.threads);

  const EvalReport report = evaluate_model(ds, scores, o.pairs_path, o.sessions,
                                           o.split, o.seed, o.threads);
  std::ofstream out(o.report_path);
  require(out.good(), "cannot open '" + o.report_path + "' for writing");
  out << report_json(report).dump(2) << "\n";
  std::cout << "evaluation report -> " << o.report_path << "\n";
}

// ---------------------------------------------------------------------------
// gmad

struct GmadOpts {
  std::string attacker_path;
  std::string defender_path;
  int levels = 5;
  double eps = 0.5;
  std::string out_path;
};

void cmd_gmad(const GmadOpts& o) {
  const auto attacker = load_id_score_csv(o.attacker_path);
  const auto defender = load_id_score_csv(o.defender_path);
  const auto pairs = gmad_pairs(attacker, defender, o.levels, o.eps);
  save_gmad_pairs(pairs, o.out_path);
  std::cout << "selected " << pairs.size() << " pairs -> " << o.out_path << "\n";
}

// ---------------------------------------------------------------------------
// demo: the full synthetic end-to-end experiment.

struct DemoOpts {
  std::uint64_t seed = 0;
  std::string out_dir;
  int sources = 200;
  int side = 64;
  std::uint64_t budget = 120000;
  std::uint64_t eval_budget = 30000;
  std::uint64_t list_budget = 50000;
  int sessions = 200;
  double test_fraction = 0.2;
  int threads = 1;
};

void cmd_demo(const DemoOpts& o) {
  require(o.sources >= 10, "demo needs at least 10 sources");
  fs::create_directories(o.out_dir);
  const fs::path out(o.out_dir);

  // 1. Synthesize sources and their distorted versions; extract features
  //    and raw oracle scores.
  const auto sources =
      synth_sources(o.sources, o.side, mix_seed(o.seed, kSaltSources));
  const int per_source = 1 + 2 * kDistortionLevels;
  const std::size_t n = static_cast<std::size_t>(o.sources) * per_source;

  std::vector<ImageRecord> records(n);
  parallel_for(static_cast<std::size_t>(o.sources), o.threads, [&](std::size_t s) {
    const int base = static_cast<int>(s) * per_source;
    auto emit = [&](int offset, const Distortion& dist, int level) {
      const int id = base + offset;
      const Image img =
          level == 0 ? sources[s]
                     : apply_distortion(sources[s], dist, level,
                                        mix_seed(o.seed, kSaltDistort + id));
      ImageRecord r;
      r.id = id;
      r.source_id = base;
      r.distortion = dist;
      r.level = level;
      r.features = extract_features(img);
      r.oracle_scores = {psnr(sources[s], img), ssim(sources[s], img)};
      r.mos = pseudo_mos(level);
      records[static_cast<std::size_t>(id)] = std::move(r);
    };
    emit(0, Distortion::pristine(), 0);
    for (int level = 1; level <= kDistortionLevels; ++level) {
      emit(level, Distortion::white_noise(), level);
    }
    for (int level = 1; level <= kDistortionLevels; ++level) {
      emit(kDistortionLevels + level, Distortion::gaussian_blur(), level);
    }
  });
  Dataset ds = make_dataset(std::move(records), {"psnr", "ssim"});

  // 2. Calibrate both oracles onto the pseudo-MOS [0, 100] scale.
  for (const auto& name : ds.oracle_names) {
    const int col = ds.oracle_index(name);
    std::vector<std::pair<double, double>> anchors;
    anchors.reserve(ds.size());
    for (const auto& r : ds.records) {
      anchors.push_back(
          {r.oracle_scores[static_cast<std::size_t>(col)], pseudo_mos(r.level)});
    }
    ds = calibrate(std::move(ds), name, anchors);
  }
  save_dataset(ds, (out / "features.csv").string(), (out / "scores.csv").string(),
               (out / "mos.csv").string());

  // 3. Hold out test sources; the trainer splits its own validation sources
  //    from the remaining pool.
  std::vector<int> source_ids;
  for (const auto& r : ds.records) {
    if (r.distortion.is_pristine()) source_ids.push_back(r.id);
  }
  Rng split_rng(mix_seed(o.seed, kSaltTestSplit));
  split_rng.shuffle(source_ids);
  const long long n_test = std::clamp<long long>(
      std::llround(o.test_fraction * static_cast<double>(source_ids.size())), 1,
      static_cast<long long>(source_ids.size()) - 2);
  const std::vector<int> test_sources(source_ids.begin(),
                                      source_ids.begin() + n_test);
  const std::set<int> test_set(test_sources.begin(), test_sources.end());

  std::vector<int> train_ids, test_ids;
  for (const auto& r : ds.records) {
    (test_set.count(r.source_id) ? test_ids : train_ids).push_back(r.id);
  }

  // 4. Pairs and lists.
  const auto train_dips = generate_dips(
      ds, train_ids, {kDefaultTc, 0.0, o.budget, mix_seed(o.seed, kSaltTrainDips)});
  const auto eval_dips = generate_dips(
      ds, test_ids,
      {kDefaultTc, 0.0, o.eval_budget, mix_seed(o.seed, kSaltEvalDips)});
  const auto dils = chain_dils(train_dips, kDefaultBucketWidth, o.list_budget,
                               mix_seed(o.seed, kSaltDils));
  save_dips(train_dips, (out / "dips.csv").string());
  save_dips(eval_dips, (out / "eval_dips.csv").string());
  save_dils(dils, (out / "dils.csv").string());

  // 5. Train the linear and the 3-hidden-layer models, one epoch each.
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.validation_fraction = 0.1;

  TrainConfig lin_cfg = cfg;
  lin_cfg.seed = mix_seed(o.seed, kSaltTrainLinear);
  const auto lin_run =
      train_pairwise(ds, train_dips, LinearModel(kFeatureDim), lin_cfg, o.threads);

  TrainConfig mlp_cfg = cfg;
  mlp_cfg.seed = mix_seed(o.seed, kSaltTrainMlp);
  const std::vector<int> mlp_dims{kFeatureDim, 256, 128, 3, 1};
  const auto mlp_run =
      train_pairwise(ds, train_dips, qnet_init(mlp_dims, mix_seed(o.seed, kSaltInitMlp)),
                     mlp_cfg, o.threads);

  const auto save_run = [&](const auto& run, const TrainConfig& run_cfg,
                            const std::vector<int>& arch, const char* stem) {
    nlohmann::json meta;
    meta["seed"] = o.seed;
    meta["config_digest"] = config_digest(run_cfg, arch);
    meta["arch"] = arch;
    meta["trained_on"] = "pairs";
    meta["best_val_loss"] = run.best_val_loss;
    meta["best_batch"] = run.best_batch;
    save_model(AnyModel(run.model), (out / (std::string(stem) + ".json")).string(),
               meta);
    save_train_log(run.log, (out / ("train_log_" + std::string(stem).substr(6) +
                                    ".csv")).string());
  };
  save_run(lin_run, lin_cfg, {kFeatureDim}, "model_linear");
  save_run(mlp_run, mlp_cfg, mlp_dims, "model_mlp");

  // 6. Held-out-source evaluation.
  const auto sub = subset_by_sources(ds, test_sources);
  const int psnr_col = ds.oracle_index("psnr");

  std::vector<std::vector<double>> all_features;
  all_features.reserve(ds.size());
  for (const auto& r : ds.records) all_features.push_back(r.features);

  std::vector<Dip> hard_eval_dips;  // clearly discriminable held-out pairs
  for (const auto& d : eval_dips) {
    if (d.gap > kDefaultTc) hard_eval_dips.push_back(d);
  }

  nlohmann::json models_json;
  const auto evaluate = [&](const AnyModel& model) {
    const auto scores = predict_all(model, all_features, o.threads);

    std::vector<double> sub_scores, sub_psnr;
    for (int orig : sub.original_ids) {
      sub_scores.push_back(scores[static_cast<std::size_t>(orig)]);
      sub_psnr.push_back(ds.record(orig).oracle_scores[static_cast<std::size_t>(psnr_col)]);
    }

    EvalReport report;
    report.session_count = o.sessions;
    report.split_fraction = 0.8;
    report.seed = o.seed;
    std::vector<double> pristine, distorted;
    for (const auto& r : sub.data.records) {
      (r.distortion.is_pristine() ? pristine : distorted)
          .push_back(sub_scores[static_cast<std::size_t>(r.id)]);
    }
    report.d = d_test(pristine, distorted);
    report.l_s = l_test(sub.data, sub_scores);
    report.p = p_test(hard_eval_dips, scores);
    const auto sess = session_protocol(sub.data, sub_scores, o.sessions, 0.8,
                                       mix_seed(o.seed, kSaltSessions), true,
                                       o.threads);
    report.srcc_median = sess.srcc_median;
    report.plcc_median = sess.plcc_median;

    nlohmann::json j = report_json(report);
    j["p_gap_threshold"] = kDefaultTc;
    j["eval_pairs_above_threshold"] = hard_eval_dips.size();
    j["srcc_vs_calibrated_psnr"] = srcc(sub_scores, sub_psnr);
    return j;
  };
  models_json["linear"] = evaluate(AnyModel(lin_run.model));
  models_json["mlp"] = evaluate(AnyModel(mlp_run.model));

  nlohmann::json report;
  report["config"] = {{"seed", o.seed},
                      {"sources", o.sources},
                      {"side", o.side},
                      {"images", n},
                      {"budget", o.budget},
                      {"eval_budget", o.eval_budget},
                      {"list_budget", o.list_budget},
                      {"sessions", o.sessions},
                      {"test_fraction", o.test_fraction},
                      {"tc", kDefaultTc},
                      {"train_pairs", train_dips.size()},
                      {"eval_pairs", eval_dips.size()},
                      {"lists", dils.size()},
                      {"arch_mlp", mlp_dims}};
  report["models"] = std::move(models_json);
  {
    std::ofstream fout(out / "report.json");
    require(fout.good(), "cannot write report.json");
    fout << report.dump(2) << "\n";
  }
  std::cout << "demo artifacts in " << o.out_dir << "\n"
            << "  linear: P=" << report["models"]["linear"]["P"]
            << " L_s=" << report["models"]["linear"]["L_s"]
            << " SRCC(psnr)=" << report["models"]["linear"]["srcc_vs_calibrated_psnr"]
            << "\n"
            << "  mlp:    P=" << report["models"]["mlp"]["P"]
            << " L_s=" << report["models"]["mlp"]["L_s"]
            << " SRCC(psnr)=" << report["models"]["mlp"]["srcc_vs_calibrated_psnr"]
            << "\n";
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"learning-to-rank blind image quality toolkit"};
  app.require_subcommand(1);
  std::function<void()> action;

  SynthOpts synth_opts;
  auto* synth = app.add_subcommand(
      "synth", "synthesize gray sources and their distorted versions");
  synth->add_option("--count", synth_opts.count, "number of source images")
      ->capture_default_str();
  synth->add_option("--side", synth_opts.side, "image side in pixels")
      ->capture_default_str();
  synth->add_option("--seed", synth_opts.seed, "random seed")->required();
  synth->add_option("--out", synth_opts.out_dir, "output directory")->required();
  synth->add_option("--threads", synth_opts.threads, "worker threads")
      ->capture_default_str();
  synth->callback([&]() { action = [&]() { cmd_synth(synth_opts); }; });

  ScoreOpts score_opts;
  auto* score = app.add_subcommand(
      "score", "compute full-reference oracle scores for synthesized images");
  score->add_option("--index", score_opts.index_path, "index.csv from synth")
      ->required();
  score->add_option("--oracles", score_opts.oracles,
                    "comma-separated oracle list (psnr,ssim)")
      ->capture_default_str();
  score->add_option("--calibrate", score_opts.calibrate_mode,
                    "'levels' maps scores onto the level pseudo-MOS scale, "
                    "'none' emits raw scores")
      ->capture_default_str();
  score->add_option("--out", score_opts.out_path, "scores.csv to write")
      ->required();
  score->add_option("--mos-out", score_opts.mos_out,
                    "also write the pseudo-MOS table");
  score->add_option("--threads", score_opts.threads, "worker threads")
      ->capture_default_str();
  score->callback([&]() { action = [&]() { cmd_score(score_opts); }; });

  GenPairsOpts gen_opts;
  auto* gen = app.add_subcommand(
      "gen-pairs", "generate discriminable pairs (and optionally lists)");
  gen->add_option("--scores", gen_opts.scores_path, "calibrated scores.csv")
      ->required();
  gen->add_option("--tc", gen_opts.tc, "uncertainty cutoff Tc")
      ->capture_default_str();
  gen->add_option("--t-min", gen_opts.t_min, "minimum score gap to keep")
      ->capture_default_str();
  gen->add_option("--budget", gen_opts.budget, "candidate pairs to sample")
      ->required();
  gen->add_option("--seed", gen_opts.seed, "random seed")->required();
  gen->add_option("--out", gen_opts.out_path, "dips.csv to write")->required();
  gen->add_flag("--lists", gen_opts.lists, "also chain pairs into lists");
  gen->add_option("--bucket-width", gen_opts.bucket_width,
                  "uncertainty bucket width for chaining")
      ->capture_default_str();
  gen->add_option("--list-budget", gen_opts.list_budget,
                  "list candidates to sample (default: --budget)");
  gen->add_option("--lists-out", gen_opts.lists_out, "dils.csv to write");
  gen->callback([&]() { action = [&]() { cmd_gen_pairs(gen_opts); }; });

  TrainOpts train_opts;
  auto* train = app.add_subcommand("train",
                                   "train a quality model on pairs or lists");
  train->add_option("--pairs", train_opts.pairs_path, "dips.csv");
  train->add_option("--lists", train_opts.lists_path, "dils.csv");
  train->add_option("--features", train_opts.features_path, "features.csv")
      ->required();
  train->add_option("--scores", train_opts.scores_path,
                    "scores.csv (provides the source grouping for the "
                    "validation split)")
      ->required();
  train->add_option("--arch", train_opts.arch,
                    "input dim followed by hidden dims; a bare input dim "
                    "trains the bias-free linear model")
      ->capture_default_str();
  train->add_option("--batch", train_opts.cfg.batch_size, "batch size")
      ->capture_default_str();
  train->add_option("--lr", train_opts.cfg.learning_rate, "learning rate")
      ->capture_default_str();
  train->add_option("--momentum", train_opts.cfg.momentum, "momentum")
      ->capture_default_str();
  train->add_option("--wd", train_opts.cfg.weight_decay, "weight decay")
      ->capture_default_str();
  train->add_option("--epochs", train_opts.cfg.epochs, "training epochs")
      ->capture_default_str();
  train->add_option("--seed", train_opts.cfg.seed, "random seed")->required();
  train->add_option("--val-frac", train_opts.cfg.validation_fraction,
                    "fraction of sources held out for validation")
      ->capture_default_str();
  train->add_option("--out", train_opts.out_path, "model.json to write")
      ->required();
  train->add_option("--log", train_opts.log_path, "training log CSV");
  train->add_option("--threads", train_opts.threads, "worker threads")
      ->capture_default_str();
  train->callback([&]() { action = [&]() { cmd_train(train_opts); }; });

  PredictOpts predict_opts;
  auto* predict = app.add_subcommand("predict", "score images with a model");
  predict->add_option("--model", predict_opts.model_path, "model.json")
      ->required();
  predict->add_option("--features", predict_opts.features_path, "features.csv")
      ->required();
  predict->add_option("--out", predict_opts.out_path, "id,score CSV to write")
      ->required();
  predict->add_option("--threads", predict_opts.threads, "worker threads")
      ->capture_default_str();
  predict->callback([&]() { action = [&]() { cmd_predict(predict_opts); }; });

  EvalOpts eval_opts;
  auto* eval = app.add_subcommand("eval", "run the evaluation criteria");
  eval->add_option("--model", eval_opts.model_path, "model.json")->required();
  eval->add_option("--features", eval_opts.features_path, "features.csv")
      ->required();
  eval->add_option("--scores", eval_opts.scores_path, "scores.csv")->required();
  eval->add_option("--mos", eval_opts.mos_path,
                   "mos.csv (enables the session protocol)");
  eval->add_option("--pairs", eval_opts.pairs_path,
                   "evaluation dips.csv (enables the P-test)");
  eval->add_option("--sessions", eval_opts.sessions, "session count")
      ->capture_default_str();
  eval->add_option("--split", eval_opts.split, "fit fraction per session")
      ->capture_default_str();
  eval->add_option("--seed", eval_opts.seed, "random seed")->required();
  eval->add_option("--report", eval_opts.report_path, "report.json to write")
      ->required();
  eval->add_option("--threads", eval_opts.threads, "worker threads")
      ->capture_default_str();
  eval->callback([&]() { action = [&]() { cmd_eval(eval_opts); }; });

  GmadOpts gmad_opts;
  auto* gmad = app.add_subcommand(
      "gmad", "select maximum-differentiation pairs between two models");
  gmad->add_option("--attacker", gmad_opts.attacker_path, "attacker id,score CSV")
      ->required();
  gmad->add_option("--defender", gmad_opts.defender_path, "defender id,score CSV")
      ->required();
  gmad->add_option("--levels", gmad_opts.levels, "quality levels")
      ->capture_default_str();
  gmad->add_option("--eps", gmad_opts.eps, "defender band half-width")
      ->capture_default_str();
  gmad->add_option("--out", gmad_opts.out_path, "pairs CSV to write")->required();
  gmad->callback([&]() { action = [&]() { cmd_gmad(gmad_opts); }; });

  DemoOpts demo_opts;
  auto* demo = app.add_subcommand(
      "demo", "run the full synthetic end-to-end experiment");
  demo->add_option("--seed", demo_opts.seed, "random seed")->required();
  demo->add_option("--out", demo_opts.out_dir, "output directory")->required();
  demo->add_option("--sources", demo_opts.sources, "synthetic source count")
      ->capture_default_str();
  demo->add_option("--side", demo_opts.side, "image side in pixels")
      ->capture_default_str();
  demo->add_option("--budget", demo_opts.budget, "training pair budget")
      ->capture_default_str();
  demo->add_option("--eval-budget", demo_opts.eval_budget,
                   "held-out pair budget")
      ->capture_default_str();
  demo->add_option("--list-budget", demo_opts.list_budget, "list budget")
      ->capture_default_str();
  demo->add_option("--sessions", demo_opts.sessions, "evaluation sessions")
      ->capture_default_str();
  demo->add_option("--threads", demo_opts.threads, "worker threads")
      ->capture_default_str();
  demo->callback([&]() { action = [&]() { cmd_demo(demo_opts); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace rankiq::cli
