#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "texcov/error.hpp"
#include "texcov/eval.hpp"
#include "texcov/pipeline.hpp"

namespace texcov::cli {

enum ExitCode : int { kOk = 0, kDataError = 1, kConfigError = 2, kNumericError = 3 };

int exit_code_for(const Error& e);

struct ManifestEntry {
  std::string id;
  std::filesystem::path path;
  std::optional<int> label;
};

/// CSV with header "id,path,label"; blank label means unlabeled. Relative
/// paths resolve against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

struct RunConfig {
  eval::PipelineSpec spec = eval::default_spec(eval::PipelineKind::MarginalHaar);
  std::vector<double> c_grid = eval::kDefaultCGrid;
  std::uint64_t seed = 0;
  std::filesystem::path cache_dir = ".texcov-cache";
  double svm_tol = 1e-3;
  unsigned jobs = 1;
};

/// Line-oriented "key = value"; '#' starts a comment. Unknown keys are
/// errors. Setting `pipeline` resets kernel_ref to that pipeline's default,
/// so it should come first.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& out, const RunConfig& cfg);

/// Directory under cache_dir keyed by every setting that affects descriptors.
std::filesystem::path cache_path(const RunConfig& cfg);

/// Computes (or loads from cache) one descriptor per manifest entry. Entry
/// failures are reported to `log` and rethrown as a single data error after
/// all entries were attempted.
eval::Dataset extract(const std::vector<ManifestEntry>& manifest, const RunConfig& cfg, bool force, std::ostream& log);

/// Entry point shared by the texcov binary and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace texcov::cli
