#include "texcov/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "texcov/error.hpp"
#include "texcov/parallel.hpp"
#include "texcov/svm.hpp"

namespace texcov::cli {

namespace fs = std::filesystem;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Config: return kConfigError;
    case ErrorKind::Numeric:
    case ErrorKind::NotPositiveDefinite:
    case ErrorKind::Convergence: return kNumericError;
    default: return kDataError;
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || split(trim(line), ',') != std::vector<std::string>{"id", "path", "label"})
    throw FormatError("manifest " + path.string() + " must start with the header 'id,path,label'");
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> out;
  std::set<std::string> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 3 || f[0].empty() || f[1].empty())
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'id,path,label'");
    if (!seen.insert(f[0]).second) throw FormatError(path.string() + ": duplicate image id '" + f[0] + "'");
    ManifestEntry e;
    e.id = f[0];
    e.path = fs::path(f[1]).is_absolute() ? fs::path(f[1]) : base / f[1];
    if (!f[2].empty()) {
      if (f[2] == "1" || f[2] == "+1") e.label = 1;
      else if (f[2] == "-1") e.label = -1;
      else throw FormatError(path.string() + ":" + std::to_string(lineno) + ": label must be +1, -1 or blank");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,path,label\n";
  for (const auto& e : entries) {
    out << e.id << ',' << e.path.string() << ',';
    if (e.label) out << *e.label;
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    auto& spec = cfg.spec;
    if (key == "pipeline") {
      const auto mcd = spec.mcd;
      spec = eval::default_spec(eval::parse_pipeline(val));
      spec.mcd = mcd;
    } else if (key == "kernel_ref") {
      spec.ref_mode = spd::parse_ref_mode(val);
    } else if (key == "mcd_alpha") {
      spec.mcd.alpha = to_double(key, val);
    } else if (key == "mcd_trials") {
      spec.mcd.n_trial = static_cast<int>(to_long(key, val));
    } else if (key == "mcd_csteps") {
      spec.mcd.n_cstep_initial = static_cast<int>(to_long(key, val));
    } else if (key == "mcd_best") {
      spec.mcd.n_best = static_cast<int>(to_long(key, val));
    } else if (key == "grad_scale") {
      spec.grad_scale = to_double(key, val);
    } else if (key == "marginal_side") {
      spec.marginal_side = static_cast<std::size_t>(to_long(key, val));
    } else if (key == "karcher_tol") {
      spec.karcher.tol = to_double(key, val);
    } else if (key == "karcher_max_iter") {
      spec.karcher.max_iter = static_cast<int>(to_long(key, val));
    } else if (key == "c_grid") {
      cfg.c_grid.clear();
      for (const auto& c : split(val, ',')) cfg.c_grid.push_back(to_double(key, c));
      if (cfg.c_grid.empty()) throw ConfigError("c_grid must not be empty");
      for (double c : cfg.c_grid)
        if (!(c > 0.0)) throw ConfigError("c_grid values must be positive");
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_long(key, val));
    } else if (key == "cache_dir") {
      cfg.cache_dir = val;
    } else if (key == "svm_tol") {
      cfg.svm_tol = to_double(key, val);
    } else {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  try {
    cfg.spec.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& out, const RunConfig& cfg) {
  const auto& s = cfg.spec;
  out << "pipeline = " << eval::to_string(s.kind) << '\n'
      << "kernel_ref = " << spd::to_string(s.ref_mode) << '\n'
      << "mcd_alpha = " << fmt17(s.mcd.alpha) << '\n'
      << "mcd_trials = " << s.mcd.n_trial << '\n'
      << "mcd_csteps = " << s.mcd.n_cstep_initial << '\n'
      << "mcd_best = " << s.mcd.n_best << '\n'
      << "grad_scale = " << fmt17(s.grad_scale) << '\n'
      << "marginal_side = " << s.marginal_side << '\n'
      << "karcher_tol = " << fmt17(s.karcher.tol) << '\n'
      << "karcher_max_iter = " << s.karcher.max_iter << '\n'
      << "c_grid = ";
  for (std::size_t i = 0; i < cfg.c_grid.size(); ++i) out << (i ? "," : "") << fmt17(cfg.c_grid[i]);
  out << '\n'
      << "seed = " << cfg.seed << '\n'
      << "cache_dir = " << cfg.cache_dir.string() << '\n'
      << "svm_tol = " << fmt17(cfg.svm_tol) << '\n';
}

fs::path cache_path(const RunConfig& cfg) {
  const auto& s = cfg.spec;
  std::ostringstream key;
  key << eval::to_string(s.kind);
  switch (s.kind) {
    case eval::PipelineKind::CovGrad:
      key << ' ' << fmt17(s.grad_scale) << ' ' << fmt17(s.mcd.alpha) << ' ' << s.mcd.n_trial << ' '
          << s.mcd.n_cstep_initial << ' ' << s.mcd.n_best << ' ' << cfg.seed;
      break;
    case eval::PipelineKind::CovGabor: break;
    case eval::PipelineKind::MarginalHaar: key << ' ' << s.marginal_side; break;
  }
  const auto h = eval::image_seed(0, key.str());
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return cfg.cache_dir / (std::string(eval::to_string(s.kind)) + "-" + hex);
}

namespace {

bool fresh(const fs::path& cached, const fs::path& image) {
  std::error_code ec;
  const auto tc = fs::last_write_time(cached, ec);
  if (ec) return false;
  const auto ti = fs::last_write_time(image, ec);
  return !ec && tc >= ti;
}

}  // namespace

eval::Dataset extract(const std::vector<ManifestEntry>& manifest, const RunConfig& cfg, bool force, std::ostream& log) {
  const fs::path dir = cache_path(cfg);
  fs::create_directories(dir);
  const bool spd_desc = cfg.spec.spd_descriptor();
  const fs::path marg_file = dir / "marginals.txt";

  std::map<std::string, wavelets::MarginalVector> marg_cache;
  if (!spd_desc && fs::exists(marg_file))
    for (auto& r : wavelets::read_marginal_file(marg_file)) marg_cache.emplace(r.id, r.values);

  const std::size_t n = manifest.size();
  std::vector<std::optional<eval::Descriptor>> desc(n);
  std::vector<std::string> messages(n), errors(n);
  std::vector<bool> computed(n, false);
  parallel_for(n, cfg.jobs, [&](std::size_t i) {
    const auto& e = manifest[i];
    try {
      if (spd_desc) {
        const fs::path file = dir / (e.id + ".spd");
        if (!force && fresh(file, e.path)) {
          desc[i] = spd::read_spd(file);
          messages[i] = "cache hit: " + e.id;
          return;
        }
      } else if (const auto it = marg_cache.find(e.id); !force && it != marg_cache.end() && fresh(marg_file, e.path)) {
        desc[i] = it->second;
        messages[i] = "cache hit: " + e.id;
        return;
      }
      auto spec = cfg.spec;
      spec.mcd.seed = eval::image_seed(cfg.seed, e.id);
      desc[i] = eval::run_pipeline(spec, imageio::load_image(e.path));
      computed[i] = true;
      if (spd_desc) spd::write_spd(dir / (e.id + ".spd"), std::get<spd::SpdMatrix>(*desc[i]));
      messages[i] = "extracted: " + e.id;
    } catch (const Error& err) {
      errors[i] = e.id + ": " + err.what();
      if (err.kind() != ErrorKind::Io && err.kind() != ErrorKind::Format) throw;
    }
  });

  std::size_t failures = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      log << "error: " << errors[i] << '\n';
      ++failures;
    } else {
      log << messages[i] << '\n';
    }
  }
  if (!spd_desc && std::find(computed.begin(), computed.end(), true) != computed.end()) {
    for (std::size_t i = 0; i < n; ++i)
      if (computed[i]) marg_cache.insert_or_assign(manifest[i].id, std::get<wavelets::MarginalVector>(*desc[i]));
    std::ofstream out(marg_file);
    for (const auto& [id, v] : marg_cache) wavelets::write_marginal_line(out, id, v);
    if (!out) throw IoError("failed writing " + marg_file.string());
  }
  if (failures) throw IoError(std::to_string(failures) + " of " + std::to_string(n) + " images failed to extract");

  eval::Dataset data;
  for (std::size_t i = 0; i < n; ++i) {
    data.ids.push_back(manifest[i].id);
    data.labels.push_back(manifest[i].label.value_or(0));
    data.descriptors.push_back(std::move(*desc[i]));
  }
  if (n > 0) {
    const auto first = imageio::load_image(manifest.front().path);
    data.image_size = eval::processed_size(cfg.spec, first.width(), first.height());
  }
  return data;
}

namespace {

void require_labels(const std::vector<ManifestEntry>& m, const char* cmd) {
  for (const auto& e : m)
    if (!e.label) throw ArgumentError(std::string(cmd) + " requires a labeled manifest (entry '" + e.id + "' has no label)");
}

void write_file_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool force = false;
  unsigned jobs = 1;
  std::string pipeline;
};

RunConfig resolve_config(const Globals& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (!g.pipeline.empty()) {
    const auto mcd = cfg.spec.mcd;
    cfg.spec = eval::default_spec(eval::parse_pipeline(g.pipeline));
    cfg.spec.mcd = mcd;
  }
  if (g.seed) cfg.seed = *g.seed;
  cfg.jobs = std::max(1u, g.jobs);
  cfg.spec.mcd.seed = cfg.seed;
  return cfg;
}

int cmd_synth(const fs::path& out_dir, int per_class, std::size_t side, std::uint64_t seed, std::ostream& log) {
  fs::create_directories(out_dir);
  std::vector<ManifestEntry> entries;
  for (int cls = 0; cls < 2; ++cls)
    for (int k = 0; k < per_class; ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "c%d_%03d", cls, k);
      const std::uint64_t img_seed = seed * 1000003ULL + static_cast<std::uint64_t>(cls * per_class + k);
      imageio::save_pgm(eval::synth_texture(cls, side, img_seed), out_dir / (std::string(name) + ".pgm"));
      entries.push_back({name, std::string(name) + ".pgm", cls == 0 ? -1 : 1});
    }
  write_manifest(out_dir / "manifest.csv", entries);
  log << "wrote " << entries.size() << " images and " << (out_dir / "manifest.csv").string() << '\n';
  return kOk;
}

int cmd_loo(const Globals& g, const fs::path& manifest_path, const fs::path& out_dir, std::ostream& log) {
  const auto cfg = resolve_config(g);
  const auto manifest = read_manifest(manifest_path);
  require_labels(manifest, "loo");
  const auto data = extract(manifest, cfg, g.force, log);
  eval::LooOptions opts;
  opts.jobs = cfg.jobs;
  opts.svm.tol = cfg.svm_tol;
  const auto report = eval::loo_cv(data, cfg.spec, cfg.c_grid, opts);
  fs::create_directories(out_dir);
  std::ostringstream rep, pred;
  eval::write_report(rep, cfg.spec, data, report);
  eval::write_predictions(pred, data.ids, report.fold_predictions);
  write_file_atomically(out_dir / "report.txt", rep.str());
  write_file_atomically(out_dir / "predictions.txt", pred.str());
  log << "LOO accuracy " << report.loo_accuracy << " at C=" << report.best_c << '\n';
  return kOk;
}

int cmd_train(const Globals& g, const fs::path& manifest_path, double c, const fs::path& model_dir, std::ostream& log) {
  const auto cfg = resolve_config(g);
  const auto manifest = read_manifest(manifest_path);
  require_labels(manifest, "train");
  const auto data = extract(manifest, cfg, g.force, log);
  const auto state = eval::fit_state(cfg.spec, data.descriptors);
  const svm::KernelGram kg(eval::gram(state, data.descriptors), data.labels);
  svm::TrainOptions opts;
  opts.tol = cfg.svm_tol;
  const auto model = svm::svm_train(kg, c, opts, eval::kernel_spec(state));

  fs::create_directories(model_dir);
  svm::save_model(model_dir / "model.txt", model);
  {
    std::ofstream out(model_dir / "config.txt");
    write_config(out, cfg);
  }
  {
    std::ofstream out(model_dir / "training.csv");
    out << "id,label\n";
    for (std::size_t i = 0; i < data.size(); ++i) out << data.ids[i] << ',' << data.labels[i] << '\n';
  }
  if (state.ref) {
    spd::write_spd(model_dir / "reference.spd", state.ref->matrix());
    fs::create_directories(model_dir / "train_descriptors");
    for (std::size_t i = 0; i < data.size(); ++i)
      spd::write_spd(model_dir / "train_descriptors" / (std::to_string(i) + ".spd"),
                     std::get<spd::SpdMatrix>(data.descriptors[i]));
  } else {
    wavelets::write_zscore(model_dir / "zscore.txt", *state.zscore);
    std::ofstream out(model_dir / "train_descriptors.txt");
    for (std::size_t i = 0; i < data.size(); ++i)
      wavelets::write_marginal_line(out, data.ids[i], std::get<wavelets::MarginalVector>(data.descriptors[i]));
  }
  log << "trained " << model.kernel_spec << " model with " << model.support_idx.size() << " support vectors\n";
  return kOk;
}

int cmd_predict(const Globals& g, const fs::path& model_dir, const fs::path& manifest_path, const fs::path& out_path,
                std::ostream& log) {
  RunConfig cfg = load_config(model_dir / "config.txt");
  if (!g.config.empty() || !g.pipeline.empty()) {
    const auto requested = resolve_config(g);
    if (requested.spec.kind != cfg.spec.kind || requested.spec.ref_mode != cfg.spec.ref_mode)
      throw ConfigError("model was trained with pipeline " + std::string(eval::to_string(cfg.spec.kind)) + " (" +
                        std::string(spd::to_string(cfg.spec.ref_mode)) + "), not " +
                        std::string(eval::to_string(requested.spec.kind)));
  }
  cfg.jobs = std::max(1u, g.jobs);
  const auto model = svm::load_model(model_dir / "model.txt");

  eval::FittedState state;
  state.kind = cfg.spec.kind;
  std::vector<eval::Descriptor> train;
  if (cfg.spec.spd_descriptor()) {
    state.ref.emplace(cfg.spec.ref_mode, spd::read_spd(model_dir / "reference.spd"));
    for (std::size_t i = 0; i < model.n(); ++i)
      train.emplace_back(spd::read_spd(model_dir / "train_descriptors" / (std::to_string(i) + ".spd")));
  } else {
    state.zscore = wavelets::read_zscore(model_dir / "zscore.txt");
    for (auto& r : wavelets::read_marginal_file(model_dir / "train_descriptors.txt")) train.emplace_back(r.values);
  }
  if (train.size() != model.n()) throw FormatError("model bundle holds " + std::to_string(train.size()) + " training descriptors, model expects " + std::to_string(model.n()));
  if (eval::kernel_spec(state) != model.kernel_spec) throw ConfigError("model kernel '" + model.kernel_spec + "' does not match its bundled configuration");

  const auto manifest = read_manifest(manifest_path);
  for (const auto& e : manifest)
    if (!fs::exists(e.path)) throw IoError("image for '" + e.id + "' not found: " + e.path.string());
  const auto data = extract(manifest, cfg, g.force, log);
  const Matrix rows = eval::kernel_matrix(state, data.descriptors, train);

  std::ostringstream out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double f = svm::svm_decision(model, rows.row(i));
    out << data.ids[i] << ' ' << data.labels[i] << ' ' << (f >= 0.0 ? 1 : -1) << ' ' << fmt17(f) << '\n';
  }
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_file_atomically(out_path, out.str());
  log << "wrote " << data.size() << " predictions to " << out_path.string() << '\n';
  return kOk;
}

int cmd_extract(const Globals& g, const fs::path& manifest_path, std::ostream& log) {
  const auto cfg = resolve_config(g);
  const auto data = extract(read_manifest(manifest_path), cfg, g.force, log);
  log << data.size() << " descriptors in " << cache_path(cfg).string() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Texture classification with covariance descriptors and wavelet marginals", "texcov"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run configuration file (key = value)");
  app.add_option("--seed", g.seed, "Random seed (overrides the config)");
  app.add_flag("--force", g.force, "Recompute cached descriptors");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--pipeline", g.pipeline, "cov-grad, cov-gabor or marginal-haar (overrides the config)");

  fs::path manifest, out_path, model_dir;
  double c = 1.0;
  int per_class = 20;
  std::size_t side = 256;

  auto* extract_cmd = app.add_subcommand("extract", "Compute descriptors into the cache");
  extract_cmd->add_option("--manifest", manifest, "Manifest CSV")->required();

  auto* loo_cmd = app.add_subcommand("loo", "Leave-one-out evaluation over the C grid");
  loo_cmd->add_option("--manifest", manifest, "Labeled manifest CSV")->required();
  loo_cmd->add_option("--out", out_path, "Output directory for report.txt and predictions.txt")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a model bundle");
  train_cmd->add_option("--manifest", manifest, "Labeled manifest CSV")->required();
  train_cmd->add_option("--c", c, "SVM box constraint")->required()->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", model_dir, "Model bundle directory")->required();

  auto* predict_cmd = app.add_subcommand("predict", "Apply a model bundle");
  predict_cmd->add_option("--model", model_dir, "Model bundle directory")->required();
  predict_cmd->add_option("--manifest", manifest, "Manifest CSV (labels optional)")->required();
  predict_cmd->add_option("--out", out_path, "Predictions file")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic two-class texture set");
  synth_cmd->add_option("--out", out_path, "Output directory")->required();
  synth_cmd->add_option("--per-class", per_class, "Images per class")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--side", side, "Image side (power of two >= 64)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*extract_cmd) return cmd_extract(g, manifest, err);
    if (*loo_cmd) return cmd_loo(g, manifest, out_path, err);
    if (*train_cmd) return cmd_train(g, manifest, c, model_dir, err);
    if (*predict_cmd) return cmd_predict(g, model_dir, manifest, out_path, err);
    if (*synth_cmd) return cmd_synth(out_path, per_class, side, g.seed.value_or(0), err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kConfigError;
}

}  // namespace texcov::cli
