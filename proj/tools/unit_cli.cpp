// Command-line driver: ingest, encode, train, evaluate, sweep, analyze, synth.
// Settings resolve as flag > config file > built-in default.

#include "unit/analysis.hpp"
#include "unit/config.hpp"
#include "unit/dataset.hpp"
#include "unit/evaluation.hpp"
#include "unit/synthetic.hpp"
#include "unit/text_encoder.hpp"
#include "unit/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace unit;

namespace {

// Thrown for bad arguments or configuration; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;  // key=value

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "TOML-style config file");
    cmd->add_option("--seed", seed, "Global seed");
    cmd->add_option("--out", out, "Output directory");
    cmd->add_option("--set", overrides, "Override a config key, e.g. --set train.epochs=5");
  }
};

config::ExperimentConfig resolve(const CommonFlags& flags) {
  config::ExperimentConfig cfg;
  if (!flags.config_path.empty()) cfg = config::load(flags.config_path);
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got " + kv);
    std::string value = kv.substr(eq + 1);
    // Bare words are taken as strings for convenience.
    try {
      config::set_value(cfg, kv.substr(0, eq), value);
    } catch (const config::ConfigError&) {
      config::set_value(cfg, kv.substr(0, eq), "\"" + value + "\"");
    }
  }
  if (flags.seed) cfg.seed = *flags.seed;
  if (!flags.out.empty()) cfg.out = flags.out;
  cfg.train.seed = cfg.seed;
  return cfg;
}

fs::path prepare_out(const config::ExperimentConfig& cfg) {
  const fs::path out = cfg.out;
  fs::create_directories(out);
  return out;
}

fs::path data_dir(const config::ExperimentConfig& cfg) {
  if (cfg.dataset.prepared.empty()) throw UsageError("no prepared dataset: pass --data or set dataset.prepared");
  const fs::path dir = cfg.dataset.prepared;
  for (const char* f : {"catalog.json", "split.json", "popularity.json"}) {
    if (!fs::exists(dir / f)) throw UsageError("prepared dataset is missing " + (dir / f).string());
  }
  return dir;
}

struct Prepared {
  dataset::ItemCatalog catalog;
  dataset::DatasetSplit split;
  dataset::PopularityTable popularity;
  text::EmbeddingCache cache;
};

// Embeddings come from an explicit file, then <data>/embeddings.bin, then
// (hash encoder only) are computed on the fly.
text::EmbeddingCache load_embeddings(const config::ExperimentConfig& cfg, const dataset::ItemCatalog& catalog,
                                     const std::string& explicit_path) {
  const fs::path dir = cfg.dataset.prepared;
  fs::path path = explicit_path;
  if (path.empty() && fs::exists(dir / "embeddings.bin")) path = dir / "embeddings.bin";
  if (!path.empty()) {
    auto cache = text::read_cache(path);
    if (cache.n_items != catalog.size()) {
      throw UsageError("embedding cache " + path.string() + " has " + std::to_string(cache.n_items) +
                       " rows, catalog has " + std::to_string(catalog.size()));
    }
    return cache;
  }
  return text::encode_corpus(catalog, cfg.encoder_spec());
}

Prepared load_prepared(const config::ExperimentConfig& cfg, const std::string& embeddings) {
  const fs::path dir = data_dir(cfg);
  Prepared p;
  p.catalog = dataset::read_catalog(dir / "catalog.json");
  p.split = dataset::read_split(dir / "split.json");
  p.popularity = dataset::read_popularity(dir / "popularity.json");
  p.cache = load_embeddings(cfg, p.catalog, embeddings);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

struct RunResult {
  train::TrainLogRecord last;
  eval::EvalReport report;
};

RunResult run_training(const config::ExperimentConfig& cfg, const Prepared& data, const fs::path& out, bool resume) {
  fs::create_directories(out);
  const auto training_data = train::TrainingData::make(data.cache.to_matrix(), data.split, data.popularity);
  const int input_dim = static_cast<int>(data.cache.dim);
  const fs::path ckpt = out / "checkpoint.bin";
  train::TrainingState state;
  if (resume && fs::exists(ckpt)) {
    state = train::load_checkpoint(ckpt);
    train::check_compatible(state, input_dim, cfg.layer_dims, cfg.model);
  } else {
    state = train::init_state(input_dim, cfg.layer_dims, cfg.model, cfg.seed);
  }
  write_text(out / "config.toml", config::serialize(cfg));

  std::ofstream log(out / "log.jsonl", resume ? std::ios::app : std::ios::trunc);
  if (!log) throw Error("cannot write " + (out / "log.jsonl").string());
  RunResult result;
  train::fit(state, training_data, cfg.train, cfg.uniformity,
             [&](const train::TrainLogRecord& rec, const train::TrainingState&) {
               log << train::log_line(rec, cfg.train.log_wall_time) << "\n";
               log.flush();
               result.last = rec;
             });
  train::save_checkpoint(state, ckpt);

  eval::EvalOptions opts;
  opts.k = cfg.train.eval_k;
  opts.exclude_history = cfg.train.exclude_history;
  opts.sampled_candidates = cfg.train.eval_candidates;
  opts.seed = derive_seed(cfg.seed, 0x6576);
  result.report = eval::evaluate_leave_one_out(state.model, training_data.cache, data.split, opts);
  eval::write_report(result.report, out / "eval.json");
  return result;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uniformity-regularized text-based sequential recommendation"};
  app.require_subcommand(1);

  // ingest
  CommonFlags ingest_flags;
  std::string format, interactions, items, ratings, movies;
  std::optional<int> min_seq_len;
  auto* ingest = app.add_subcommand("ingest", "Build catalog, sequences, split and popularity");
  ingest_flags.attach(ingest);
  ingest->add_option("--format", format, "jsonl | movielens");
  ingest->add_option("--interactions", interactions, "Interactions JSONL");
  ingest->add_option("--items", items, "Item texts JSONL");
  ingest->add_option("--ratings", ratings, "MovieLens ratings.dat");
  ingest->add_option("--movies", movies, "MovieLens movies.dat");
  ingest->add_option("--min-seq-len", min_seq_len, "Drop users with fewer interactions");

  // encode
  CommonFlags encode_flags;
  std::string encode_data, encode_kind, encode_source;
  std::optional<int> encode_dim;
  auto* encode = app.add_subcommand("encode", "Write the frozen text-embedding cache");
  encode_flags.attach(encode);
  encode->add_option("--data", encode_data, "Prepared dataset directory");
  encode->add_option("--kind", encode_kind, "hash | external");
  encode->add_option("--dim", encode_dim, "Hash feature dimension");
  encode->add_option("--cache", encode_source, "External embedding cache to align");

  // train
  CommonFlags train_flags;
  std::string train_data, train_embeddings, strategy;
  std::optional<double> gamma;
  std::optional<int> epochs;
  bool resume = false;
  auto* train_cmd = app.add_subcommand("train", "Train projection + backbone");
  train_flags.attach(train_cmd);
  train_cmd->add_option("--data", train_data, "Prepared dataset directory");
  train_cmd->add_option("--embeddings", train_embeddings, "Embedding cache file");
  train_cmd->add_option("--strategy", strategy, "none | general | seq | pop");
  train_cmd->add_option("--gamma", gamma, "Uniformity weight");
  train_cmd->add_option("--epochs", epochs, "Number of epochs");
  train_cmd->add_flag("--resume", resume, "Continue from <out>/checkpoint.bin");

  // evaluate
  CommonFlags eval_flags;
  std::string eval_data, eval_embeddings, eval_checkpoint;
  std::optional<int> eval_k, eval_candidates;
  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-out HR@K / NDCG@K of a checkpoint");
  eval_flags.attach(evaluate);
  evaluate->add_option("--data", eval_data, "Prepared dataset directory");
  evaluate->add_option("--embeddings", eval_embeddings, "Embedding cache file");
  evaluate->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  evaluate->add_option("--k", eval_k, "Cutoff");
  evaluate->add_option("--candidates", eval_candidates, "Sampled negatives per user (0 = full catalog)");

  // sweep
  CommonFlags sweep_flags;
  std::string sweep_data, sweep_embeddings, sweep_strategy;
  std::vector<double> gammas;
  std::optional<int> sweep_epochs;
  auto* sweep = app.add_subcommand("sweep", "Train once per gamma and tabulate");
  sweep_flags.attach(sweep);
  sweep->add_option("--data", sweep_data, "Prepared dataset directory");
  sweep->add_option("--embeddings", sweep_embeddings, "Embedding cache file");
  sweep->add_option("--gammas", gammas, "Gamma values")->delimiter(',');
  sweep->add_option("--strategy", sweep_strategy, "general | seq | pop");
  sweep->add_option("--epochs", sweep_epochs, "Number of epochs");

  // analyze
  CommonFlags analyze_flags;
  std::string analyze_data, analyze_embeddings, analyze_checkpoint;
  std::optional<int> kde_grid;
  auto* analyze = app.add_subcommand("analyze", "Geometry diagnostics and 2-D KDE export");
  analyze_flags.attach(analyze);
  analyze->add_option("--data", analyze_data, "Prepared dataset directory");
  analyze->add_option("--embeddings", analyze_embeddings, "Embedding cache file");
  analyze->add_option("--checkpoint", analyze_checkpoint, "Checkpoint file (default <out>/checkpoint.bin)");
  analyze->add_option("--kde-grid", kde_grid, "KDE grid side");

  // synth
  CommonFlags synth_flags;
  synth::SyntheticSpec synth_spec;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic topic-clustered dataset as JSONL");
  synth_flags.attach(synth_cmd);
  synth_cmd->add_option("--users", synth_spec.users);
  synth_cmd->add_option("--items", synth_spec.items);
  synth_cmd->add_option("--topics", synth_spec.topics);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*ingest) {
      auto cfg = resolve(ingest_flags);
      if (!format.empty()) cfg.dataset.format = format;
      if (!interactions.empty()) cfg.dataset.interactions = interactions;
      if (!items.empty()) cfg.dataset.items = items;
      if (!ratings.empty()) cfg.dataset.ratings = ratings;
      if (!movies.empty()) cfg.dataset.movies = movies;
      if (min_seq_len) cfg.dataset.min_seq_len = *min_seq_len;
      cfg.validate();

      std::vector<dataset::Interaction> rows;
      dataset::ItemTexts texts;
      if (cfg.dataset.format == "jsonl") {
        if (cfg.dataset.interactions.empty()) throw UsageError("jsonl format requires --interactions");
        if (cfg.dataset.items.empty()) throw UsageError("jsonl format requires --items");
        rows = dataset::load_interactions_jsonl(cfg.dataset.interactions);
        texts = dataset::load_item_texts_jsonl(cfg.dataset.items);
      } else {
        if (cfg.dataset.ratings.empty() || cfg.dataset.movies.empty()) {
          throw UsageError("movielens format requires --ratings and --movies");
        }
        auto ml = dataset::load_movielens(cfg.dataset.ratings, cfg.dataset.movies);
        rows = std::move(ml.interactions);
        texts = std::move(ml.texts);
      }
      const auto built = dataset::build_sequences(rows, texts, cfg.dataset.min_seq_len);
      const auto split = dataset::leave_one_out_split(built.sequences);
      const auto pop = dataset::compute_popularity(split, built.catalog.size(), cfg.dataset.popularity_floor);
      const auto stats = dataset::dataset_stats(built.sequences, built.catalog);
      const auto out = prepare_out(cfg);
      dataset::write_catalog(built.catalog, out / "catalog.json");
      dataset::write_sequences(built.sequences, out / "sequences.json");
      dataset::write_split(split, out / "split.json");
      dataset::write_popularity(pop, out / "popularity.json");
      dataset::write_stats(stats, out / "stats.json");
      std::cout << "users " << stats.users << ", items " << stats.items << ", interactions " << stats.interactions
                << ", avg length " << fmt(stats.average_length) << ", density " << fmt(stats.density) << "\n";
    } else if (*encode) {
      auto cfg = resolve(encode_flags);
      if (!encode_data.empty()) cfg.dataset.prepared = encode_data;
      if (!encode_kind.empty()) cfg.encoder.kind = encode_kind;
      if (encode_dim) cfg.encoder.dim = *encode_dim;
      if (!encode_source.empty()) cfg.encoder.cache = encode_source;
      cfg.validate();
      const fs::path dir = data_dir(cfg);
      const auto catalog = dataset::read_catalog(dir / "catalog.json");
      const auto cache = text::encode_corpus(catalog, cfg.encoder_spec());
      const fs::path target = encode_flags.out.empty() ? dir / "embeddings.bin" : prepare_out(cfg) / "embeddings.bin";
      text::write_cache(cache, target);
      std::cout << "wrote " << cache.n_items << " x " << cache.dim << " embeddings to " << target.string() << "\n";
    } else if (*train_cmd) {
      auto cfg = resolve(train_flags);
      if (!train_data.empty()) cfg.dataset.prepared = train_data;
      if (!strategy.empty()) {
        try {
          cfg.uniformity.strategy = uni::parse_strategy(strategy);
        } catch (const Error& e) {
          throw UsageError(e.what());
        }
      }
      if (gamma) cfg.uniformity.gamma = *gamma;
      if (epochs) cfg.train.epochs = *epochs;
      cfg.validate();
      const auto data = load_prepared(cfg, train_embeddings);
      const auto result = run_training(cfg, data, prepare_out(cfg), resume);
      std::cout << "HR@" << result.report.k << " " << fmt(result.report.hr) << "  NDCG@" << result.report.k << " "
                << fmt(result.report.ndcg) << "\n";
    } else if (*evaluate) {
      auto cfg = resolve(eval_flags);
      if (!eval_data.empty()) cfg.dataset.prepared = eval_data;
      if (eval_k) cfg.train.eval_k = *eval_k;
      if (eval_candidates) cfg.train.eval_candidates = *eval_candidates;
      cfg.validate();
      if (!fs::exists(eval_checkpoint)) throw UsageError("checkpoint not found: " + eval_checkpoint);
      const auto data = load_prepared(cfg, eval_embeddings);
      auto state = train::load_checkpoint(eval_checkpoint);
      if (state.model.projection.input_dim() != static_cast<int>(data.cache.dim)) {
        throw UsageError("checkpoint expects input dim " + std::to_string(state.model.projection.input_dim()) +
                         ", embeddings have " + std::to_string(data.cache.dim));
      }
      eval::EvalOptions opts;
      opts.k = cfg.train.eval_k;
      opts.exclude_history = cfg.train.exclude_history;
      opts.sampled_candidates = cfg.train.eval_candidates;
      opts.seed = derive_seed(cfg.seed, 0x6576);
      const auto report = eval::evaluate_leave_one_out(state.model, data.cache.to_matrix(), data.split, opts);
      const auto out = prepare_out(cfg);
      eval::write_report(report, out / "eval.json");
      eval::write_ranks_csv(report, data.split, out / "ranks.csv");
      std::cout << "HR@" << report.k << " " << fmt(report.hr) << "  NDCG@" << report.k << " " << fmt(report.ndcg)
                << "\n";
    } else if (*sweep) {
      auto cfg = resolve(sweep_flags);
      if (!sweep_data.empty()) cfg.dataset.prepared = sweep_data;
      if (!gammas.empty()) cfg.sweep_gammas = gammas;
      if (sweep_epochs) cfg.train.epochs = *sweep_epochs;
      if (!sweep_strategy.empty()) {
        try {
          cfg.uniformity.strategy = uni::parse_strategy(sweep_strategy);
        } catch (const Error& e) {
          throw UsageError(e.what());
        }
      }
      if (cfg.uniformity.strategy == uni::Strategy::none) cfg.uniformity.strategy = uni::Strategy::general;
      cfg.validate();
      const auto data = load_prepared(cfg, sweep_embeddings);
      const auto out = prepare_out(cfg);
      std::ofstream csv(out / "sweep.csv");
      if (!csv) throw Error("cannot write " + (out / "sweep.csv").string());
      csv << "gamma,hr,ndcg,uniformity_metric,status\n";
      for (double g : cfg.sweep_gammas) {
        auto run_cfg = cfg;
        run_cfg.uniformity.gamma = g;
        char name[64];
        std::snprintf(name, sizeof(name), "gamma_%g", g);
        try {
          const auto r = run_training(run_cfg, data, out / name, false);
          csv << g << "," << fmt(r.report.hr) << "," << fmt(r.report.ndcg) << "," << fmt(r.last.uniformity_metric)
              << ",ok\n";
          std::cout << "gamma " << g << ": HR@" << r.report.k << " " << fmt(r.report.hr) << "  uniformity "
                    << fmt(r.last.uniformity_metric) << "\n";
        } catch (const std::exception& e) {
          std::string msg = e.what();
          for (char& c : msg) {
            if (c == ',' || c == '\n') c = ';';
          }
          csv << g << ",,,,error: " << msg << "\n";
          std::cerr << "gamma " << g << " failed: " << e.what() << "\n";
        }
        csv.flush();
      }
    } else if (*analyze) {
      auto cfg = resolve(analyze_flags);
      if (!analyze_data.empty()) cfg.dataset.prepared = analyze_data;
      if (kde_grid) cfg.analysis.kde_grid = *kde_grid;
      cfg.validate();
      const fs::path ckpt = analyze_checkpoint.empty() ? fs::path(cfg.out) / "checkpoint.bin" : fs::path(analyze_checkpoint);
      if (!fs::exists(ckpt)) throw UsageError("checkpoint not found: " + ckpt.string());
      const auto data = load_prepared(cfg, analyze_embeddings);
      auto state = train::load_checkpoint(ckpt);
      if (state.model.projection.input_dim() != static_cast<int>(data.cache.dim)) {
        throw UsageError("checkpoint expects input dim " + std::to_string(state.model.projection.input_dim()) +
                         ", embeddings have " + std::to_string(data.cache.dim));
      }
      const Mat table = state.model.item_table(data.cache.to_matrix());
      std::vector<std::vector<int>> sequences;
      for (const auto& seq : dataset::reconstruct_sequences(data.split)) sequences.push_back(seq.items);

      const auto intra = analysis::intra_sequence_ratio(table, sequences, cfg.analysis.max_pairs,
                                                        derive_seed(cfg.seed, 0x696e));
      const auto split = analysis::popularity_distance_split(table, data.popularity.counts, cfg.analysis.pop_fraction,
                                                             cfg.analysis.max_pairs, derive_seed(cfg.seed, 0x706f));
      analysis::GeometryReport report;
      report.mean_global_distance = intra.global_mean;
      report.mean_intra_sequence_distance = intra.intra_mean;
      report.ratio = intra.ratio;
      report.distance_pop = split.distance_pop;
      report.distance_cold = split.distance_cold;
      report.pop_fraction = cfg.analysis.pop_fraction;
      const auto kde = analysis::project_2d_kde(table, cfg.analysis.kde_grid, cfg.analysis.kde_bandwidth);
      const auto out = prepare_out(cfg);
      analysis::write_geometry_report(report, out / "geometry.json");
      analysis::write_kde(kde, out / "kde.json");
      std::cout << "intra-sequence ratio " << fmt(report.ratio) << ", distance_pop " << fmt(report.distance_pop)
                << ", distance_cold " << fmt(report.distance_cold) << "\n";
    } else if (*synth_cmd) {
      auto cfg = resolve(synth_flags);
      if (synth_flags.seed) synth_spec.seed = cfg.seed;
      const auto data = synth::generate(synth_spec);
      const auto out = prepare_out(cfg);
      dataset::write_interactions_jsonl(data.interactions, out / "interactions.jsonl");
      dataset::write_item_texts_jsonl(data.texts, out / "items.jsonl");
      std::cout << "wrote " << data.interactions.size() << " interactions over " << data.texts.size() << " items\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
