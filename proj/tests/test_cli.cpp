#include <doctest.h>

#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "texcov/cli.hpp"
#include "texcov/svm.hpp"

using namespace texcov;
using namespace texcov::cli;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code;
  std::string out, err;
};

RunResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

std::size_t count_substr(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

// Synthetic set plus a config that keeps the cache inside the temp dir.
struct Workspace {
  texcov::testing::TempDir dir{"cli"};
  fs::path data() const { return dir.path() / "data"; }
  fs::path manifest() const { return data() / "manifest.csv"; }
  fs::path config(const std::string& pipeline, const std::string& cache = "cache") const {
    const fs::path p = dir.path() / (pipeline + "-" + cache + ".cfg");
    std::ofstream out(p);
    out << "pipeline = " << pipeline << "\ncache_dir = " << (dir.path() / cache).string() << "\nmcd_trials = 40\n";
    return p;
  }
};

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream ok(
      "# comment\npipeline = cov-gabor\nkernel_ref = identity\nmcd_alpha = 0.75\nc_grid = 1, 10\nseed = 9\n");
  const auto cfg = parse_config(ok);
  CHECK(cfg.spec.kind == eval::PipelineKind::CovGabor);
  CHECK(cfg.spec.ref_mode == spd::RefMode::Identity);
  CHECK(cfg.spec.mcd.alpha == 0.75);
  CHECK(cfg.c_grid == std::vector<double>{1.0, 10.0});
  CHECK(cfg.seed == 9);

  std::istringstream defaults("pipeline = cov-gabor\n");
  CHECK(parse_config(defaults).spec.ref_mode == spd::RefMode::RiemannianMean);

  std::ostringstream written;
  write_config(written, cfg);
  std::istringstream back(written.str());
  const auto cfg2 = parse_config(back);
  CHECK(cfg2.spec.kind == cfg.spec.kind);
  CHECK(cfg2.spec.ref_mode == cfg.spec.ref_mode);
  CHECK(cfg2.c_grid == cfg.c_grid);
  CHECK(cfg2.seed == cfg.seed);

  for (const char* bad : {"colour = red\n", "pipeline = cov-sift\n", "mcd_alpha = 0.2\n", "seed = abc\n",
                          "c_grid = 1, -3\n", "no equals sign\n"}) {
    std::istringstream in(bad);
    CHECK_THROWS_AS(parse_config(in), ConfigError);
  }
}

TEST_CASE("unknown config key exits with the config error code") {
  texcov::testing::TempDir dir("cli-cfg");
  {
    std::ofstream(dir.path() / "bad.cfg") << "pipeline = marginal-haar\nbogus = 1\n";
    std::ofstream(dir.path() / "m.csv") << "id,path,label\n";
  }
  const auto r = run_cli({"--config", (dir.path() / "bad.cfg").string(), "extract", "--manifest",
                          (dir.path() / "m.csv").string()});
  CHECK(r.code == kConfigError);
  CHECK(r.err.find("bogus") != std::string::npos);
  CHECK(run_cli({"frobnicate"}).code == kConfigError);
}

TEST_CASE("manifest parsing") {
  texcov::testing::TempDir dir("cli-manifest");
  const auto p = dir.path() / "m.csv";
  std::ofstream(p) << "id,path,label\na,img/a.pgm,1\nb,/abs/b.pgm,-1\nc,c.pgm,\n";
  const auto m = read_manifest(p);
  REQUIRE(m.size() == 3);
  CHECK(m[0].path == dir.path() / "img/a.pgm");
  CHECK(m[0].label == 1);
  CHECK(m[1].path == fs::path("/abs/b.pgm"));
  CHECK(m[1].label == -1);
  CHECK_FALSE(m[2].label.has_value());

  std::ofstream(p) << "id,path,label\na,a.pgm,1\na,b.pgm,1\n";
  CHECK_THROWS(read_manifest(p));
  std::ofstream(p) << "id,path,label\na,a.pgm,2\n";
  CHECK_THROWS(read_manifest(p));
  std::ofstream(p) << "name,file\n";
  CHECK_THROWS(read_manifest(p));
  CHECK_THROWS_AS(read_manifest(dir.path() / "none.csv"), IoError);
}

TEST_CASE("marginal extraction writes one line per image and reuses the cache") {
  Workspace ws;
  REQUIRE(run_cli({"--seed", "3", "synth", "--out", ws.data().string(), "--per-class", "2", "--side", "64"}).code == kOk);
  CHECK(read_manifest(ws.manifest()).size() == 4);
  const auto cfg = ws.config("marginal-haar");

  const auto first = run_cli({"--config", cfg.string(), "extract", "--manifest", ws.manifest().string()});
  REQUIRE(first.code == kOk);
  CHECK(count_substr(first.err, "extracted:") == 4);
  const auto cached = load_config(cfg);
  const auto lines = lines_of(slurp(cache_path(cached) / "marginals.txt"));
  CHECK(lines.size() == 4);

  const auto second = run_cli({"--config", cfg.string(), "extract", "--manifest", ws.manifest().string()});
  REQUIRE(second.code == kOk);
  CHECK(count_substr(second.err, "cache hit:") == 4);
  CHECK(count_substr(second.err, "extracted:") == 0);

  const auto forced = run_cli({"--config", cfg.string(), "--force", "extract", "--manifest", ws.manifest().string()});
  CHECK(count_substr(forced.err, "extracted:") == 4);
}

TEST_CASE("cov-grad extraction is bit-identical across runs with the same seed") {
  Workspace ws;
  REQUIRE(run_cli({"synth", "--out", ws.data().string(), "--per-class", "1", "--side", "128"}).code == kOk);
  const auto cfg_a = ws.config("cov-grad", "cache-a");
  const auto cfg_b = ws.config("cov-grad", "cache-b");
  REQUIRE(run_cli({"--config", cfg_a.string(), "--seed", "5", "extract", "--manifest", ws.manifest().string()}).code == kOk);
  REQUIRE(run_cli({"--config", cfg_b.string(), "--seed", "5", "--jobs", "2", "extract", "--manifest",
                   ws.manifest().string()})
              .code == kOk);
  auto ca = load_config(cfg_a);
  auto cb = load_config(cfg_b);
  ca.seed = cb.seed = 5;
  for (const char* id : {"c0_000", "c1_000"}) {
    const auto a = slurp(cache_path(ca) / (std::string(id) + ".spd"));
    CHECK(!a.empty());
    CHECK(a == slurp(cache_path(cb) / (std::string(id) + ".spd")));
  }
}

TEST_CASE("loo, train and predict") {
  Workspace ws;
  REQUIRE(run_cli({"--seed", "1", "synth", "--out", ws.data().string(), "--per-class", "4", "--side", "64"}).code == kOk);
  const auto cfg = ws.config("marginal-haar");
  const auto out_dir = ws.dir.path() / "loo";
  const auto loo = run_cli({"--config", cfg.string(), "loo", "--manifest", ws.manifest().string(), "--out", out_dir.string()});
  REQUIRE(loo.code == kOk);
  const auto report = slurp(out_dir / "report.txt");
  CHECK(report.find("best C") != std::string::npos);
  CHECK(count_substr(report, "  C=") == 6);
  CHECK(lines_of(slurp(out_dir / "predictions.txt")).size() == 8);

  const auto model_dir = ws.dir.path() / "model";
  REQUIRE(run_cli({"--config", cfg.string(), "train", "--manifest", ws.manifest().string(), "--c", "10", "--out",
                   model_dir.string()})
              .code == kOk);
  const auto pred_path = ws.dir.path() / "pred.txt";
  REQUIRE(run_cli({"predict", "--model", model_dir.string(), "--manifest", ws.manifest().string(), "--out",
                   pred_path.string()})
              .code == kOk);

  // Recompute the training decisions from the library directly.
  std::ostringstream log;
  const auto rc = load_config(cfg);
  const auto data = extract(read_manifest(ws.manifest()), rc, false, log);
  const auto state = eval::fit_state(rc.spec, data.descriptors);
  const Matrix k = eval::gram(state, data.descriptors);
  const auto model = svm::load_model(model_dir / "model.txt");
  const auto preds = lines_of(slurp(pred_path));
  REQUIRE(preds.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::istringstream ls(preds[i]);
    std::string id;
    int truth = 0, predicted = 0;
    double f = 0.0;
    ls >> id >> truth >> predicted >> f;
    CHECK(id == data.ids[i]);
    CHECK(truth == data.labels[i]);
    const double expected = svm::svm_decision(model, k.row(i));
    CHECK(f == doctest::Approx(expected).epsilon(1e-9));
    CHECK(predicted == (expected >= 0.0 ? 1 : -1));
  }

  // A bundle trained for one pipeline refuses another.
  const auto mismatch = run_cli({"--pipeline", "cov-grad", "predict", "--model", model_dir.string(), "--manifest",
                                 ws.manifest().string(), "--out", (ws.dir.path() / "x.txt").string()});
  CHECK(mismatch.code == kConfigError);
  CHECK_FALSE(fs::exists(ws.dir.path() / "x.txt"));
}

TEST_CASE("predict with a missing image fails without writing output") {
  Workspace ws;
  REQUIRE(run_cli({"synth", "--out", ws.data().string(), "--per-class", "2", "--side", "64"}).code == kOk);
  const auto cfg = ws.config("marginal-haar");
  const auto model_dir = ws.dir.path() / "model";
  REQUIRE(run_cli({"--config", cfg.string(), "train", "--manifest", ws.manifest().string(), "--c", "1", "--out",
                   model_dir.string()})
              .code == kOk);
  const auto broken = ws.dir.path() / "broken.csv";
  std::ofstream(broken) << "id,path,label\nok," << (ws.data() / "c0_000.pgm").string() << ",\nghost,"
                        << (ws.data() / "missing.pgm").string() << ",\n";
  const auto out = ws.dir.path() / "pred.txt";
  const auto r = run_cli({"predict", "--model", model_dir.string(), "--manifest", broken.string(), "--out", out.string()});
  CHECK(r.code == kDataError);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("train and loo require labels") {
  Workspace ws;
  REQUIRE(run_cli({"synth", "--out", ws.data().string(), "--per-class", "2", "--side", "64"}).code == kOk);
  auto m = read_manifest(ws.manifest());
  m[1].label.reset();
  const auto unlabeled = ws.dir.path() / "unlabeled.csv";
  write_manifest(unlabeled, m);
  const auto cfg = ws.config("marginal-haar");
  const auto loo = run_cli({"--config", cfg.string(), "loo", "--manifest", unlabeled.string(), "--out",
                            (ws.dir.path() / "loo").string()});
  CHECK(loo.code == kDataError);
  CHECK_FALSE(fs::exists(ws.dir.path() / "loo" / "report.txt"));
  const auto train = run_cli({"--config", cfg.string(), "train", "--manifest", unlabeled.string(), "--c", "1", "--out",
                              (ws.dir.path() / "model").string()});
  CHECK(train.code == kDataError);
}

TEST_CASE("corrupt image reports the entry and a data error") {
  Workspace ws;
  REQUIRE(run_cli({"synth", "--out", ws.data().string(), "--per-class", "1", "--side", "64"}).code == kOk);
  std::ofstream(ws.data() / "c1_000.pgm") << "P2\n2 2\n255\n0 0 0 0\n";
  const auto r = run_cli({"--config", ws.config("marginal-haar").string(), "extract", "--manifest", ws.manifest().string()});
  CHECK(r.code == kDataError);
  CHECK(r.err.find("c1_000") != std::string::npos);
}
