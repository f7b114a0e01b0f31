#include "texcov/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>

#include <fftw3.h>

#include "texcov/error.hpp"
#include "texcov/parallel.hpp"

namespace texcov::eval {

Metrics confusion_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) throw ArgumentError("confusion_metrics: negative count");
  if (c.total() == 0) throw ArgumentError("confusion_metrics: all counts are zero");
  Metrics m;
  if (c.tp + c.fn > 0) m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.fp + c.tn > 0) m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.fp + c.tn);
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return m;
}

ConfusionCounts count_predictions(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw ArgumentError("count_predictions: length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool pos = truth[i] == 1, said_pos = predicted[i] == 1;
    if (pos && said_pos) ++c.tp;
    else if (pos) ++c.fn;
    else if (said_pos) ++c.fp;
    else ++c.tn;
  }
  return c;
}

namespace {

void check_dataset(const Dataset& data) {
  if (data.descriptors.size() != data.labels.size() || data.ids.size() != data.labels.size())
    throw ArgumentError("dataset: ids, labels and descriptors differ in length");
  for (int y : data.labels)
    if (y != 1 && y != -1) throw ArgumentError("dataset: labels must be +1 or -1");
}

}  // namespace

LooReport loo_cv(const Dataset& data, const PipelineSpec& spec, std::span<const double> c_grid, LooOptions opts) {
  check_dataset(data);
  const std::size_t n = data.size();
  const long pos = std::count(data.labels.begin(), data.labels.end(), 1);
  if (n < 3 || pos == 0 || pos == static_cast<long>(n))
    throw ArgumentError("loo_cv: need at least 3 samples covering both classes");
  if (c_grid.empty()) throw ArgumentError("loo_cv: empty C grid");
  for (double c : c_grid)
    if (!(c > 0.0)) throw ArgumentError("loo_cv: C values must be positive");

  // preds[fold][c_index]
  std::vector<std::vector<FoldPrediction>> preds(n, std::vector<FoldPrediction>(c_grid.size()));
  parallel_for(n, opts.jobs, [&](std::size_t fold) {
    std::vector<std::size_t> train;
    train.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i)
      if (i != fold) train.push_back(i);
    std::vector<Descriptor> train_desc;
    std::vector<int> train_y;
    for (std::size_t i : train) {
      train_desc.push_back(data.descriptors[i]);
      train_y.push_back(data.labels[i]);
    }
    const int truth = data.labels[fold];
    const bool single_class = std::all_of(train_y.begin(), train_y.end(), [&](int y) { return y == train_y.front(); });
    if (single_class) {
      for (auto& p : preds[fold]) p = {truth, -truth, 0.0, true};
      return;
    }
    const auto state = fit_state(spec, train_desc);
    const svm::KernelGram kg(gram(state, train_desc), train_y);
    const Matrix row = kernel_matrix(state, std::span(&data.descriptors[fold], 1), train_desc);
    for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
      const auto model = svm::svm_train(kg, c_grid[ci], opts.svm, kernel_spec(state));
      const double f = svm::svm_decision(model, row.row(0));
      preds[fold][ci] = {truth, f >= 0.0 ? 1 : -1, f, false};
    }
  });

  LooReport report;
  std::size_t best = 0;
  for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
    long correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += preds[i][ci].predicted == preds[i][ci].label;
    const double acc = static_cast<double>(correct) / static_cast<double>(n);
    report.per_c.push_back({c_grid[ci], acc});
    const auto& b = report.per_c[best];
    if (acc > b.accuracy || (acc == b.accuracy && c_grid[ci] < b.c)) best = ci;
  }
  report.best_c = report.per_c[best].c;
  report.loo_accuracy = report.per_c[best].accuracy;
  for (std::size_t i = 0; i < n; ++i) report.fold_predictions.push_back(preds[i][best]);

  const auto state = fit_state(spec, data.descriptors);
  const svm::KernelGram kg(gram(state, data.descriptors), data.labels);
  const auto model = svm::svm_train(kg, report.best_c, opts.svm, kernel_spec(state));
  long correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += svm::svm_predict(model, kg.k().row(i)) == data.labels[i];
  report.validation_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return report;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

void write_report(std::ostream& out, const PipelineSpec& spec, const Dataset& data, const LooReport& report) {
  const bool spd = spec.spd_descriptor();
  const char* ref = spec.ref_mode == spd::RefMode::Identity ? "identity" : "Riemannian mean";
  out << "feature           " << feature_name(spec.kind) << '\n'
      << "image size        " << data.image_size << '\n'
      << "kernel type       " << (spd ? "LogEuclidean" : "linear") << '\n'
      << "kernel parameter  " << (spd ? ref : "-") << '\n'
      << "samples           " << data.size() << '\n'
      << "validation        " << fmt("%.6f", report.validation_accuracy) << '\n'
      << "LOO accuracy      " << fmt("%.6f", report.loo_accuracy) << '\n'
      << "best C            " << fmt("%g", report.best_c) << '\n';
  std::vector<int> truth, predicted;
  for (const auto& p : report.fold_predictions) {
    truth.push_back(p.label);
    predicted.push_back(p.predicted);
  }
  const auto counts = count_predictions(truth, predicted);
  const auto m = confusion_metrics(counts);
  out << "TP FP TN FN       " << counts.tp << ' ' << counts.fp << ' ' << counts.tn << ' ' << counts.fn << '\n'
      << "Sn                " << (m.sensitivity ? fmt("%.6f", *m.sensitivity) : "undefined") << '\n'
      << "Sp                " << (m.specificity ? fmt("%.6f", *m.specificity) : "undefined") << '\n'
      << "per-C LOO accuracy\n";
  for (const auto& s : report.per_c) out << "  C=" << fmt("%-8g", s.c) << ' ' << fmt("%.6f", s.accuracy) << '\n';
}

void write_predictions(std::ostream& out, std::span<const std::string> ids, std::span<const FoldPrediction> preds) {
  if (ids.size() != preds.size()) throw ArgumentError("write_predictions: length mismatch");
  for (std::size_t i = 0; i < ids.size(); ++i)
    out << ids[i] << ' ' << preds[i].label << ' ' << preds[i].predicted << ' ' << fmt("%.17g", preds[i].decision)
        << '\n';
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

imageio::GrayImage synth_texture(int class_id, std::size_t side, std::uint64_t seed) {
  if (class_id != 0 && class_id != 1) throw ArgumentError("synth_texture: class must be 0 or 1");
  if (side < 64 || !wavelets::is_dyadic(side)) throw ArgumentError("synth_texture: side must be a power of two >= 64");
  const double exponent = class_id == 0 ? 1.5 : 2.5;
  const double stretch = class_id == 0 ? 1.0 : 1.3;

  std::mt19937_64 rng(seed * 2 + static_cast<std::uint64_t>(class_id));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = side * side;
  const std::size_t half = side / 2 + 1;
  std::vector<double> field(n);
  for (double& v : field) v = normal(rng);

  auto* spectrum = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * side * half));
  fftw_plan fwd, inv;
  {
    std::lock_guard lock(fftw_planner_mutex());
    const int s = static_cast<int>(side);
    fwd = fftw_plan_dft_r2c_2d(s, s, field.data(), spectrum, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_2d(s, s, spectrum, field.data(), FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  for (std::size_t ky = 0; ky < side; ++ky) {
    const double fy = (ky <= side / 2 ? static_cast<double>(ky) : static_cast<double>(ky) - static_cast<double>(side)) /
                      static_cast<double>(side);
    for (std::size_t kx = 0; kx < half; ++kx) {
      const double fx = stretch * static_cast<double>(kx) / static_cast<double>(side);
      const double f = std::hypot(fx, fy);
      const double amp = f > 0.0 ? std::pow(f, -exponent / 2.0) : 0.0;
      spectrum[ky * half + kx][0] *= amp;
      spectrum[ky * half + kx][1] *= amp;
    }
  }
  fftw_execute(inv);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  fftw_free(spectrum);

  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : field) v = range > 0.0 ? std::clamp((v - min) / range, 0.0, 1.0) : 0.5;
  return imageio::GrayImage(side, side, std::move(field));
}

}  // namespace texcov::eval
