#include "lrvi/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "lrvi/embedding.hpp"
#include "lrvi/encoders.hpp"
#include "lrvi/evalkit.hpp"
#include "lrvi/field.hpp"
#include "lrvi/io.hpp"
#include "lrvi/solver.hpp"
#include "lrvi/synthetic.hpp"

namespace lrvi::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

Json embed_defaults() {
  return Json{
      {"out", "embed_out"},
      {"seed", 0},
      {"input",
       {{"format", "ucr"},
        {"path", ""},
        {"train", ""},
        {"test", ""},
        {"labels", ""},
        {"truth", ""},
        {"per_line", true},
        {"frequencies", "english"},
        {"cutoff", 1000},
        {"clean", true}}},
      {"encoder", "auto"},
      {"normalize", true},
      {"link", "auto"},
      {"d", 20},
      {"lambda", "search"},
      {"lambda_search", {{"strategy", "grid"}, {"points", 20}, {"objective", "auto"}, {"tol", 1e-3}}},
      {"solver", "mirror-prox"},
      {"iters", 256},
      {"kappa0", "auto"},
      {"dgf", "euclidean"},
      {"kappa_decay", 1.0},
      {"window_g", 0},
      {"eval", {{"k", 0}, {"restarts", 10}}},
  };
}

void check_known_keys(const Json& defaults, const Json& given, const std::string& where) {
  if (!given.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : given.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown config key: " + where + key);
    if (defaults.at(key).is_object()) check_known_keys(defaults.at(key), value, where + key + ".");
  }
}

std::string format_double(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_manifest(const fs::path& dir, std::string_view command, const Json& config) {
  Json m{{"command", std::string(command)}, {"version", kVersion}, {"config", config}};
  io::write_text(dir / "manifest.json", m.dump(2) + "\n");
}

void write_json(const fs::path& path, const Json& j) { io::write_text(path, j.dump(2) + "\n"); }

std::map<std::string, int> read_labels_map(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = io::split_fields(line);
    if (f.size() < 2 || (lineno == 1 && f[0] == "id")) continue;
    try {
      out[f[0]] = std::stoi(f[1]);
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": label is not an integer");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset loading

struct Dataset {
  std::optional<SequenceCollection<double>> collection;
  std::vector<bool> is_train; // empty without a train/test split
  std::optional<Eigen::MatrixXd> truth;
  std::string encoder;
};

std::string resolve_encoder(const std::string& format, const std::string& encoder) {
  if (encoder != "auto") return encoder;
  if (format == "ucr") return "signal-diff";
  if (format == "text") return "huffman";
  if (format == "fasta") return "nucleotide";
  return "none";
}

Eigen::MatrixXd encode_series(const std::vector<double>& s, const std::string& encoder,
                              bool normalize) {
  if (encoder == "signal-diff") return encoders::encode_signal_with_diff(s, normalize).channels;
  if (encoder == "signal") {
    Eigen::RowVectorXd x = Eigen::Map<const Eigen::RowVectorXd>(s.data(), static_cast<Index>(s.size()));
    if (normalize) {
      x.array() -= x.mean();
      const double sd = std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
      if (sd > 0) x /= sd;
    }
    return x;
  }
  throw ConfigError("encoder '" + encoder + "' does not apply to UCR input");
}

void attach_labels(std::vector<std::string>& ids, std::optional<std::vector<int>>& labels,
                   const std::string& labels_path) {
  if (labels_path.empty()) return;
  const auto map = read_labels_map(labels_path);
  labels.emplace();
  for (const auto& id : ids) {
    auto it = map.find(id);
    if (it == map.end()) throw ShapeError("no label for sequence " + id);
    labels->push_back(it->second);
  }
}

Dataset load_dataset(const Json& cfg) {
  const Json& in = cfg.at("input");
  const auto format = in.at("format").get<std::string>();
  Dataset ds;
  ds.encoder = resolve_encoder(format, cfg.at("encoder").get<std::string>());
  const bool normalize = cfg.at("normalize").get<bool>();
  const auto path = in.at("path").get<std::string>();
  const auto labels_path = in.at("labels").get<std::string>();

  std::vector<Eigen::MatrixXd> seqs;
  std::vector<std::string> ids;
  std::optional<std::vector<int>> labels;
  SequenceKind kind = SequenceKind::real;
  Index channels = 0;

  if (format == "ucr") {
    std::vector<std::pair<std::string, fs::path>> parts;
    const auto train = in.at("train").get<std::string>();
    const auto test = in.at("test").get<std::string>();
    if (!train.empty() || !test.empty()) {
      if (train.empty() || test.empty()) throw ConfigError("UCR input needs both train and test");
      parts = {{"train", train}, {"test", test}};
    } else {
      if (path.empty()) throw ConfigError("input.path (or input.train/test) is required");
      parts = {{"s", path}};
    }
    labels.emplace();
    for (const auto& [tag, p] : parts) {
      const auto split = io::read_ucr(p);
      for (std::size_t k = 0; k < split.series.size(); ++k) {
        seqs.push_back(encode_series(split.series[k], ds.encoder, normalize));
        ids.push_back(tag + "_" + std::to_string(k));
        labels->push_back(split.labels[k]);
        if (parts.size() == 2) ds.is_train.push_back(tag == "train");
      }
    }
    channels = seqs.front().rows();
  } else if (format == "collection") {
    if (path.empty()) throw ConfigError("input.path is required");
    if (ds.encoder != "none") throw ConfigError("collection input takes encoder none");
    std::optional<fs::path> lp;
    if (!labels_path.empty()) lp = labels_path;
    ds.collection.emplace(io::read_collection_csv(path, lp));
  } else if (format == "text") {
    if (path.empty()) throw ConfigError("input.path is required");
    if (ds.encoder != "huffman") throw ConfigError("text input takes encoder huffman");
    std::vector<std::string> docs;
    std::vector<std::string> doc_ids;
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(path))
        if (e.is_regular_file()) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        docs.push_back(io::read_text(f));
        doc_ids.push_back(f.stem().string());
      }
    } else {
      docs = io::read_corpus(path, in.at("per_line").get<bool>());
      for (std::size_t k = 0; k < docs.size(); ++k) doc_ids.push_back("doc_" + std::to_string(k));
    }
    if (in.at("clean").get<bool>())
      for (auto& d : docs) d = encoders::clean_text(d);
    const auto freq_source = in.at("frequencies").get<std::string>();
    const auto freqs = freq_source == "english"  ? encoders::english_frequencies()
                       : freq_source == "corpus" ? encoders::corpus_frequencies(docs)
                                                 : encoders::read_frequency_table(freq_source);
    const auto code = encoders::build_huffman(freqs, 4);
    const auto cutoff = in.at("cutoff").get<Index>();
    std::size_t dropped = 0;
    for (std::size_t k = 0; k < docs.size(); ++k) {
      const auto text = encoders::restrict_to_alphabet(docs[k], code);
      auto enc = text.empty() ? std::nullopt : encoders::encode_symbolic(text, code, cutoff);
      if (!enc) {
        ++dropped;
        continue;
      }
      seqs.push_back(std::move(*enc));
      ids.push_back(doc_ids[k]);
    }
    if (dropped > 0)
      std::cerr << "warning: " << dropped << " document(s) shorter than " << cutoff
                << " coded symbols were skipped\n";
    attach_labels(ids, labels, labels_path);
    kind = SequenceKind::simplex;
    channels = 4;
  } else if (format == "fasta") {
    if (path.empty()) throw ConfigError("input.path is required");
    if (ds.encoder != "nucleotide") throw ConfigError("fasta input takes encoder nucleotide");
    const auto records = io::read_fasta(path);
    bool all_labelled = !records.empty();
    for (const auto& r : records) {
      seqs.push_back(encoders::encode_nucleotides(r.sequence));
      ids.push_back(r.id);
      all_labelled = all_labelled && r.label.has_value();
    }
    if (!labels_path.empty()) {
      attach_labels(ids, labels, labels_path);
    } else if (all_labelled) {
      labels.emplace();
      for (const auto& r : records) labels->push_back(*r.label);
    }
    kind = SequenceKind::simplex;
    channels = 4;
  } else {
    throw ConfigError("unknown input.format: " + format);
  }

  if (!ds.collection) {
    if (seqs.empty()) throw ShapeError("input produced no sequences");
    ds.collection.emplace(std::move(seqs), std::move(ids), std::move(labels), channels, kind);
  }
  const auto truth_path = in.at("truth").get<std::string>();
  if (!truth_path.empty()) ds.truth = io::read_matrix_csv(truth_path);
  return ds;
}

// ---------------------------------------------------------------------------
// Solving

double parse_lambda_value(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  throw ConfigError("lambda must be a number, \"inf\" or \"search\"");
}

class Engine {
public:
  Engine(const SequenceCollection<double>& coll, const Json& cfg) : coll_(&coll) {
    spec_.order = cfg.at("d").get<Index>();
    const auto link = cfg.at("link").get<std::string>();
    spec_.link = link == "auto" ? (coll.kind() == SequenceKind::simplex ? Link::softmax : Link::identity)
                                : parse_link(link);
    spec_.seed = cfg.at("seed").get<std::uint64_t>();
    const auto g = cfg.at("window_g").get<Index>();
    if (g > 0) {
      spec_.mode = FieldMode::stochastic_subwindow;
      spec_.window = g;
    }
    field_.emplace(coll, spec_);
    solver_.mode = parse_solver_mode(cfg.at("solver").get<std::string>());
    solver_.max_iters = cfg.at("iters").get<int>();
    solver_.seed = spec_.seed;
    solver_.kappa_decay = cfg.at("kappa_decay").get<double>();
    dgf_ = parse_dgf(cfg.at("dgf").get<std::string>());
    const Json& k0 = cfg.at("kappa0");
    if (k0.is_string()) {
      if (k0.get<std::string>() != "auto") throw ConfigError("kappa0 must be a number or \"auto\"");
      solver_.kappa0 = estimate_lipschitz<double>(*field_, rows(), cols(), spec_.seed);
    } else {
      solver_.kappa0 = k0.get<double>();
    }
    solver_.validate();
  }

  Index rows() const { return field_->rows(); }
  Index cols() const { return field_->cols(); }
  const FieldSpec& spec() const { return spec_; }
  double kappa0() const { return solver_.kappa0; }

  SolverState<double> solve(double lambda) {
    SolverConfig c = solver_;
    c.lambda = lambda;
    NuclearBallGeometry<double> geom(lambda, rows(), cols(), dgf_);
    return lrvi::solve<double>(*field_, geom, c);
  }

  ParameterMatrix<double> params(double lambda) {
    return ParameterMatrix<double>(solve(lambda).aggregate, coll_->channels(), spec_.order);
  }

  ParameterMatrix<double> unconstrained() {
    if (spec_.link == Link::identity && spec_.mode == FieldMode::full_horizon)
      return eval::solve_unconstrained_ls(*coll_, spec_.order);
    return params(std::numeric_limits<double>::infinity());
  }

  /// Full-horizon loss, independent of the stochastic windows.
  double loss(const Eigen::MatrixXd& b) {
    if (!full_field_) {
      FieldSpec s = spec_;
      s.mode = FieldMode::full_horizon;
      full_field_.emplace(*coll_, s);
    }
    return full_field_->loss(b);
  }

private:
  const SequenceCollection<double>* coll_;
  FieldSpec spec_;
  SolverConfig solver_;
  DgfKind dgf_ = DgfKind::euclidean;
  std::optional<EmpiricalField<double>> field_;
  std::optional<EmpiricalField<double>> full_field_;
};

/// Rows of `estimate` comparable to `truth`: a truth matrix without the
/// leading bias entries is compared against the lag coefficients only.
Eigen::MatrixXd comparable_rows(const Eigen::MatrixXd& truth, const ParameterMatrix<double>& est) {
  if (truth.cols() != est.sequences())
    throw ShapeError("truth has " + std::to_string(truth.cols()) + " columns, expected " +
                     std::to_string(est.sequences()));
  if (truth.rows() == est.rows()) return est.data();
  if (truth.rows() == est.rows() - est.channels()) return est.data().bottomRows(truth.rows());
  throw ShapeError("truth has " + std::to_string(truth.rows()) + " rows, expected " +
                   std::to_string(est.rows()) + " or " + std::to_string(est.rows() - est.channels()));
}

std::vector<int> pick(const std::vector<int>& v, const std::vector<bool>& mask, bool want) {
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (mask[i] == want) out.push_back(v[i]);
  return out;
}

Eigen::MatrixXd pick_cols(const Eigen::MatrixXd& m, const std::vector<bool>& mask, bool want) {
  Index count = 0;
  for (bool b : mask) count += b == want;
  Eigen::MatrixXd out(m.rows(), count);
  Index j = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] == want) out.col(j++) = m.col(static_cast<Index>(i));
  return out;
}

int distinct(const std::vector<int>& v) { return static_cast<int>(std::set<int>(v.begin(), v.end()).size()); }

struct Objective {
  eval::ObjectiveKind kind;
  std::function<double(const ParameterMatrix<double>&)> fn;
};

std::optional<Objective> make_objective(const Dataset& ds, const Json& cfg) {
  const auto name = cfg.at("lambda_search").at("objective").get<std::string>();
  const auto& coll = *ds.collection;
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  eval::ObjectiveKind kind;
  if (name == "auto") {
    if (ds.truth) kind = eval::ObjectiveKind::reconstruction_error;
    else if (coll.has_labels()) kind = eval::ObjectiveKind::train_metric;
    else return std::nullopt;
  } else {
    kind = eval::parse_objective(name);
  }
  if (kind == eval::ObjectiveKind::reconstruction_error) {
    if (!ds.truth) throw ConfigError("reconstruction-error objective needs input.truth");
    const Eigen::MatrixXd truth = *ds.truth;
    return Objective{kind, [truth](const ParameterMatrix<double>& p) {
                       return eval::reconstruction_error(truth, comparable_rows(truth, p));
                     }};
  }
  if (!coll.has_labels()) throw ConfigError("train-metric objective needs labels");
  const auto labels = *coll.labels();
  if (!ds.is_train.empty()) {
    const auto mask = ds.is_train;
    return Objective{kind, [labels, mask, seed](const ParameterMatrix<double>& p) {
                       const auto e = factorize<double>(p);
                       const auto sel = eval::select_knn_k(pick_cols(e.coordinates, mask, true),
                                                           pick(labels, mask, true), seed);
                       double best = 0;
                       for (double a : sel.cv_accuracy)
                         if (std::isfinite(a)) best = std::max(best, a);
                       return -best;
                     }};
  }
  const int k = cfg.at("eval").at("k").get<int>() > 0 ? cfg.at("eval").at("k").get<int>() : distinct(labels);
  const int restarts = cfg.at("eval").at("restarts").get<int>();
  return Objective{kind, [labels, k, restarts, seed](const ParameterMatrix<double>& p) {
                     const auto e = factorize<double>(p);
                     const auto km = eval::kmeans(e.coordinates, k, seed, restarts);
                     return -eval::ari(labels, km.partition.assignments);
                   }};
}

Json evaluate_embedding(const EmbeddingResult<double>& e, const Dataset& ds, const Json& cfg) {
  const auto& coll = *ds.collection;
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  Json m{{"ari", nullptr}, {"nmi", nullptr}, {"accuracy", nullptr}, {"macro_f1", nullptr}};
  if (!coll.has_labels()) return m;
  const auto& labels = *coll.labels();
  const Eigen::MatrixXd coords =
      e.empty() ? Eigen::MatrixXd::Zero(1, e.coordinates.cols()) : e.coordinates;
  const int k = cfg.at("eval").at("k").get<int>() > 0 ? cfg.at("eval").at("k").get<int>() : distinct(labels);
  if (coords.cols() >= k) {
    const auto km = eval::kmeans(coords, k, seed, cfg.at("eval").at("restarts").get<int>());
    m["ari"] = eval::ari(labels, km.partition.assignments);
    m["nmi"] = eval::nmi(labels, km.partition.assignments);
  }
  if (!ds.is_train.empty()) {
    const auto xtr = pick_cols(coords, ds.is_train, true);
    const auto ytr = pick(labels, ds.is_train, true);
    const auto sel = eval::select_knn_k(xtr, ytr, seed);
    const auto pred = eval::knn_classify(xtr, ytr, pick_cols(coords, ds.is_train, false), sel.best_k);
    const auto scores = eval::accuracy_and_macro_f1(pick(labels, ds.is_train, false), pred);
    m["accuracy"] = scores.accuracy;
    m["macro_f1"] = scores.macro_f1;
    m["knn_k"] = sel.best_k;
  }
  return m;
}

void write_embedding(const fs::path& path, const EmbeddingResult<double>& e,
                     const SequenceCollection<double>& coll) {
  auto out = open_output(path);
  write_embedding_csv(out, e, coll.labels());
}

} // namespace

// ---------------------------------------------------------------------------

Json default_config(std::string_view command) {
  if (command == "synth")
    return Json{{"out", "synth_out"},
                {"seed", 0},
                {"d", 15},
                {"T", 250},
                {"per_class", 300},
                {"noise_var", 0.02},
                {"perturb_var", 0.02},
                {"decay", 0.9},
                {"classes",
                 Json::array({{{"baseline", "uniform"}, {"perturbation", "gaussian"}},
                              {{"baseline", "exp-decay"}, {"perturbation", "gaussian"}},
                              {{"baseline", "exp-decay"}, {"perturbation", "uniform-times-fixed-vector"}}})}};
  if (command == "embed") return embed_defaults();
  if (command == "sweep") {
    Json j = embed_defaults();
    j["out"] = "sweep_out";
    j["input"]["format"] = "collection";
    j["sweep"] = {{"points", 40}, {"spacing", "linear"}};
    return j;
  }
  if (command == "eval")
    return Json{{"out", "eval_out"}, {"seed", 0},  {"embeddings", ""}, {"split", ""},
                {"mode", "auto"},    {"k", 0},     {"restarts", 10}};
  throw ConfigError("unknown command: " + std::string(command));
}

Json resolve_config(std::string_view command, const Json& file, const Json& overrides) {
  Json config = default_config(command);
  Json given = file;
  if (given.is_object() && given.contains("command") && given.contains("config")) {
    if (given.at("command").get<std::string>() != command)
      throw ConfigError("manifest was written by '" + given.at("command").get<std::string>() +
                        "', not '" + std::string(command) + "'");
    given = given.at("config");
  }
  if (!given.is_null()) {
    check_known_keys(config, given, "");
    config.merge_patch(given);
  }
  if (!overrides.is_null()) {
    check_known_keys(config, overrides, "");
    config.merge_patch(overrides);
  }
  return config;
}

void cmd_synth(const Json& cfg) {
  const fs::path out = cfg.at("out").get<std::string>();
  std::vector<synthetic::GenClassSpec> classes;
  for (const auto& c : cfg.at("classes")) {
    synthetic::GenClassSpec s;
    s.baseline = synthetic::parse_baseline(c.at("baseline").get<std::string>());
    s.perturbation = synthetic::parse_perturbation(c.at("perturbation").get<std::string>());
    s.order = cfg.at("d").get<Index>();
    s.length = cfg.at("T").get<Index>();
    s.per_class = cfg.at("per_class").get<Index>();
    s.noise_var = cfg.at("noise_var").get<double>();
    s.perturb_var = cfg.at("perturb_var").get<double>();
    s.decay = cfg.at("decay").get<double>();
    s.validate();
    classes.push_back(s);
  }
  const auto bench = synthetic::gen_benchmark(classes, cfg.at("seed").get<std::uint64_t>());
  fs::create_directories(out);
  io::write_collection_csv(out / "dataset.csv", bench.collection);
  io::write_labels_csv(out / "labels.csv", bench.collection);
  const Index d = bench.truth.order();
  std::vector<std::string> lags;
  for (Index s = 1; s <= d; ++s) lags.push_back("lag_" + std::to_string(s));
  io::write_matrix_csv(out / "truth.csv", bench.truth.data().bottomRows(d), bench.collection.ids(), lags,
                       "lag");
  write_manifest(out, "synth", cfg);
  std::cout << "wrote " << bench.collection.size() << " sequences and a " << d << " x "
            << bench.collection.size() << " truth matrix to " << out.string() << "\n";
}

void cmd_embed(const Json& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path out = cfg.at("out").get<std::string>();
  const Dataset ds = load_dataset(cfg);
  const auto& coll = *ds.collection;
  Engine engine(coll, cfg);

  double lambda = 0;
  std::optional<ParameterMatrix<double>> params;
  std::optional<eval::LambdaSearchResult> search;
  const Json& lj = cfg.at("lambda");
  if (lj.is_string() && lj.get<std::string>() == "search") {
    const Json& ls = cfg.at("lambda_search");
    eval::LambdaSearchOptions opt;
    opt.strategy = eval::parse_strategy(ls.at("strategy").get<std::string>());
    opt.grid_points = ls.at("points").get<int>();
    opt.brent_tol = ls.at("tol").get<double>();
    const auto objective = make_objective(ds, cfg);
    if (!objective && opt.strategy != eval::SearchStrategy::bisect_rank1)
      throw ConfigError("lambda search without labels or truth needs strategy bisect");
    eval::LambdaProblem problem;
    problem.solve = [&](double l) { return engine.params(l); };
    if (objective) problem.objective = objective->fn;
    problem.unconstrained = engine.unconstrained();
    search = eval::lambda_search(problem, opt);
    lambda = search->best_lambda;
    if (search->golden_steps > 0)
      std::cerr << "note: Brent took " << search->golden_steps << " golden-section step(s)\n";
  } else {
    lambda = parse_lambda_value(lj);
  }

  const auto state = engine.solve(lambda);
  params.emplace(state.aggregate, coll.channels(), engine.spec().order);
  const auto emb = factorize<double>(*params, coll.ids());

  fs::create_directories(out);
  write_embedding(out / "embedding.csv", emb, coll);
  {
    auto h = open_output(out / "history.csv");
    write_history_csv(h, state.history);
  }
  if (!ds.is_train.empty()) io::write_split_csv(out / "split.csv", coll.ids(), ds.is_train);
  if (search) {
    auto s = open_output(out / "lambda_search.csv");
    s << "lambda,score,approx_rank\n";
    for (std::size_t k = 0; k < search->lambdas_tried.size(); ++k)
      s << format_double(search->lambdas_tried[k]) << ',' << format_double(search->scores[k]) << ','
        << search->ranks[k] << '\n';
  }

  Json metrics = evaluate_embedding(emb, ds, cfg);
  metrics["approx_rank"] = emb.approx_rank;
  metrics["lambda"] = std::isinf(lambda) ? Json("inf") : Json(lambda);
  metrics["kappa0"] = engine.kappa0();
  metrics["loss"] = engine.loss(params->data());
  if (ds.truth) metrics["reconstruction_error"] = eval::reconstruction_error(*ds.truth, comparable_rows(*ds.truth, *params));
  metrics["runtime_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out / "metrics.json", metrics);
  write_manifest(out, "embed", cfg);
  std::cout << metrics.dump() << "\n";
}

void cmd_eval(const Json& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path out = cfg.at("out").get<std::string>();
  const auto emb_path = cfg.at("embeddings").get<std::string>();
  if (emb_path.empty()) throw ConfigError("embeddings path is required");
  const auto table = io::read_embedding_csv(emb_path);
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  auto mode = cfg.at("mode").get<std::string>();
  const auto split_path = cfg.at("split").get<std::string>();
  if (mode == "auto") mode = split_path.empty() ? "clustering" : "classification";
  if (mode != "clustering" && mode != "classification") throw ConfigError("mode must be clustering or classification");
  const Eigen::MatrixXd coords = table.coordinates.rows() == 0
                                     ? Eigen::MatrixXd::Zero(1, table.coordinates.cols())
                                     : table.coordinates;
  Json metrics{{"ari", nullptr}, {"nmi", nullptr}, {"accuracy", nullptr}, {"macro_f1", nullptr},
               {"approx_rank", nullptr}, {"lambda", nullptr}};
  fs::create_directories(out);

  if (!table.labels) {
    std::cerr << "warning: embeddings carry no labels; reporting clusters only\n";
    const int k = cfg.at("k").get<int>();
    if (k <= 0) throw ConfigError("k is required when embeddings carry no labels");
    const auto km = eval::kmeans(coords, k, seed, cfg.at("restarts").get<int>());
    auto c = open_output(out / "clusters.csv");
    c << "id,cluster\n";
    for (std::size_t i = 0; i < table.ids.size(); ++i) c << table.ids[i] << ',' << km.partition.assignments[i] << '\n';
    metrics["wcss"] = km.wcss;
  } else if (mode == "clustering") {
    const auto& labels = *table.labels;
    const int k = cfg.at("k").get<int>() > 0 ? cfg.at("k").get<int>() : distinct(labels);
    const auto km = eval::kmeans(coords, k, seed, cfg.at("restarts").get<int>());
    metrics["ari"] = eval::ari(labels, km.partition.assignments);
    metrics["nmi"] = eval::nmi(labels, km.partition.assignments);
    metrics["k"] = k;
  } else {
    if (split_path.empty()) throw ConfigError("classification mode needs a split file");
    const auto split = io::read_split_csv(split_path);
    std::map<std::string, bool> by_id(split.begin(), split.end());
    std::vector<bool> mask;
    for (const auto& id : table.ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw ShapeError("split file has no entry for " + id);
      mask.push_back(it->second);
    }
    const auto& labels = *table.labels;
    const auto xtr = pick_cols(coords, mask, true);
    const auto ytr = pick(labels, mask, true);
    const auto sel = eval::select_knn_k(xtr, ytr, seed);
    const auto pred = eval::knn_classify(xtr, ytr, pick_cols(coords, mask, false), sel.best_k);
    const auto s = eval::accuracy_and_macro_f1(pick(labels, mask, false), pred);
    metrics["accuracy"] = s.accuracy;
    metrics["macro_f1"] = s.macro_f1;
    metrics["knn_k"] = sel.best_k;
  }
  metrics["runtime_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out / "metrics.json", metrics);
  write_manifest(out, "eval", cfg);
  std::cout << metrics.dump() << "\n";
}

void cmd_sweep(const Json& cfg) {
  const fs::path out = cfg.at("out").get<std::string>();
  const Dataset ds = load_dataset(cfg);
  const auto& coll = *ds.collection;
  Engine engine(coll, cfg);
  const auto unconstrained = engine.unconstrained();
  const double upper = nuclear_norm<double>(unconstrained.data());
  if (!(upper > 0)) throw NumericalError("unconstrained solution is zero");
  const int points = cfg.at("sweep").at("points").get<int>();
  const auto spacing_name = cfg.at("sweep").at("spacing").get<std::string>();
  if (spacing_name != "linear" && spacing_name != "log") throw ConfigError("sweep.spacing must be linear or log");
  const auto spacing = spacing_name == "log" ? eval::Spacing::log : eval::Spacing::linear;
  // Linear: upper/points, ..., upper. Log: three decades below upper.
  const auto grid = spacing == eval::Spacing::linear
                        ? eval::lambda_grid(upper / points, upper, points, spacing)
                        : eval::lambda_grid(upper * 1e-3, upper, points, spacing);

  const fs::path table = out / "sweep.csv";
  std::set<std::string> done;
  if (fs::exists(table)) {
    std::ifstream in(table);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto f = io::split_fields(line);
      if (!f.empty() && !f[0].empty()) done.insert(f[0]);
    }
  }
  fs::create_directories(out);
  std::ofstream rows(table, std::ios::app);
  if (!rows) throw IoError("cannot write " + table.string());
  if (done.empty() && fs::file_size(table) == 0)
    rows << "lambda,loss,reconstruction_error,approx_rank,ari,explained_variance_top2\n";

  const int k = coll.has_labels() ? (cfg.at("eval").at("k").get<int>() > 0 ? cfg.at("eval").at("k").get<int>()
                                                                           : distinct(*coll.labels()))
                                  : 0;
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  int computed = 0;
  for (double lambda : grid) {
    const auto key = format_double(lambda);
    if (done.count(key)) continue;
    const auto p = engine.params(lambda);
    const auto e = factorize<double>(p);
    rows << key << ',' << format_double(engine.loss(p.data())) << ',';
    if (ds.truth) rows << format_double(eval::reconstruction_error(*ds.truth, comparable_rows(*ds.truth, p)));
    rows << ',' << e.approx_rank << ',';
    if (k > 0 && e.rank() > 0 && static_cast<int>(coll.size()) >= k)
      rows << format_double(eval::ari(*coll.labels(), eval::kmeans(e.coordinates, k, seed,
                                                                   cfg.at("eval").at("restarts").get<int>())
                                                          .partition.assignments));
    rows << ',';
    if (e.rank() >= 2) {
      const auto pca = pca_project<double>(e.coordinates, 2);
      if (!pca.degenerate) rows << format_double(pca.explained_variance_ratio.sum());
    }
    rows << '\n';
    rows.flush();
    ++computed;
  }
  write_manifest(out, "sweep", cfg);
  std::cout << "sweep: " << computed << " new row(s), " << done.size() << " already present, upper bound "
            << format_double(upper) << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Low-rank autoregressive embeddings via monotone variational inequalities"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  struct Options {
    std::string config;
    std::optional<std::string> lambda;
    std::optional<long long> d;
    std::optional<int> iters;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> link;
    std::optional<long long> window_g;
    std::optional<std::string> out;
  };
  std::map<std::string, Options> opts;
  for (const char* name : {"synth", "embed", "eval", "sweep"}) {
    auto* sub = app.add_subcommand(name);
    auto& o = opts[name];
    sub->add_option("--config", o.config, "JSON config file (a previous manifest.json also works)");
    sub->add_option("--lambda", o.lambda, "nuclear radius, \"inf\", or \"search\"");
    sub->add_option("--d", o.d, "autoregressive order");
    sub->add_option("--iters", o.iters, "solver iterations");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--link", o.link, "identity, softmax, exponential, logistic, or auto");
    sub->add_option("--window-g", o.window_g, "stochastic sub-window length G (0 = full horizon)");
    sub->add_option("--out", o.out, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? success : config_error;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const auto& o = opts.at(command);
    Json file;
    if (!o.config.empty()) {
      std::ifstream in(o.config);
      if (!in) throw ConfigError("cannot open config " + o.config);
      file = Json::parse(in);
    }
    Json ov = Json::object();
    if (o.lambda) {
      if (*o.lambda == "inf" || *o.lambda == "search") {
        ov["lambda"] = *o.lambda;
      } else {
        try {
          ov["lambda"] = std::stod(*o.lambda);
        } catch (const std::exception&) {
          throw ConfigError("--lambda must be a number, inf, or search");
        }
      }
    }
    if (o.d) ov["d"] = *o.d;
    if (o.iters) ov["iters"] = *o.iters;
    if (o.seed) ov["seed"] = *o.seed;
    if (o.link) ov["link"] = *o.link;
    if (o.window_g) ov["window_g"] = *o.window_g;
    if (o.out) ov["out"] = *o.out;
    const Json cfg = resolve_config(command, file, ov);
    if (command == "synth") cmd_synth(cfg);
    else if (command == "embed") cmd_embed(cfg);
    else if (command == "eval") cmd_eval(cfg);
    else cmd_sweep(cfg);
    return success;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return numerical_error;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return failure;
  }
}

} // namespace lrvi::cli
