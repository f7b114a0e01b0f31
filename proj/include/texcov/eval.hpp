#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "texcov/imageio.hpp"
#include "texcov/pipeline.hpp"
#include "texcov/svm.hpp"

namespace texcov::eval {

/// Positive class is label +1.
struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long total() const { return tp + fp + tn + fn; }
};

/// Sensitivity and specificity are empty when their denominator is zero.
struct Metrics {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  double accuracy = 0.0;
};

Metrics confusion_metrics(const ConfusionCounts& c);
ConfusionCounts count_predictions(std::span<const int> truth, std::span<const int> predicted);

inline const std::vector<double> kDefaultCGrid = {1, 10, 100, 1000, 10000, 100000};

struct Dataset {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<Descriptor> descriptors;
  std::string image_size;  ///< processed size for reports, e.g. "50x50"

  std::size_t size() const { return labels.size(); }
};

struct FoldPrediction {
  int label = 0;
  int predicted = 0;
  double decision = 0.0;
  /// Training set of this fold held a single class; counted as an error.
  bool failed = false;
};

struct CScore {
  double c = 0.0;
  double accuracy = 0.0;
};

struct LooReport {
  std::vector<CScore> per_c;
  double best_c = 0.0;
  double loo_accuracy = 0.0;
  std::vector<FoldPrediction> fold_predictions;  ///< at best_c
  double validation_accuracy = 0.0;
};

struct LooOptions {
  unsigned jobs = 1;
  svm::TrainOptions svm;
};

/// Leave-one-out over the C grid. Fold preprocessing (kernel reference,
/// z-score statistics) is refitted on each fold's n-1 training samples. The
/// best C maximizes LOO accuracy, ties going to the smaller C; validation
/// accuracy is the training accuracy of a model refitted on all samples at
/// the best C.
LooReport loo_cv(const Dataset& data, const PipelineSpec& spec, std::span<const double> c_grid = kDefaultCGrid,
                 LooOptions opts = {});

/// Table-style report: feature, image size, kernel type, kernel parameter,
/// validation, LOO accuracy, then one row per C.
void write_report(std::ostream& out, const PipelineSpec& spec, const Dataset& data, const LooReport& report);

/// "<image-id> <true-label> <predicted-label> <decision-value>" per line.
void write_predictions(std::ostream& out, std::span<const std::string> ids, std::span<const FoldPrediction> preds);

/// Gaussian random field with power ~ 1/f^1.5 (class 0) or 1/f^2.5 with the
/// x frequency axis stretched by 1.3 (class 1), min-max rescaled to [0,1].
imageio::GrayImage synth_texture(int class_id, std::size_t side, std::uint64_t seed);

}  // namespace texcov::eval
