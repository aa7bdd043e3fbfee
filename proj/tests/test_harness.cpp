#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "ndmd/errors.hpp"
#include "ndmd/harness.hpp"
#include "ndmd/rng.hpp"

using namespace ndmd;

namespace {

/// Scratch path that cleans itself up when the case ends.
struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("ndmd_harness_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string operator/(const std::string& name) const {
    return (dir / name).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

/// Mirror of the committed golden dataset; the builder is the source of
/// truth the file was generated from.
TrajectorySet golden_set() {
  TrajectorySet set;
  set.benchmark = "golden";
  set.dims = {4};
  set.extents = {2.0};
  set.n_train = 1;
  set.seed = 7;
  Rng rng(7);
  for (int k = 0; k < 2; ++k) {
    Trajectory traj;
    traj.dt = 0.25;
    traj.t0 = 0.5 * k;
    traj.code = {0.001 + 0.002 * k};
    traj.frames = RealMat(3, 4);
    for (double& v : traj.frames.v) v = rng.normal();
    if (k == 1) {
      traj.solid = RealMat(1, 4);
      traj.solid(0, 2) = 1.0;
    }
    set.items.push_back(std::move(traj));
  }
  return set;
}

void check_sets_equal(const TrajectorySet& a, const TrajectorySet& b) {
  CHECK(a.benchmark == b.benchmark);
  CHECK(a.dims == b.dims);
  CHECK(a.extents == b.extents);
  CHECK(a.n_train == b.n_train);
  CHECK(a.seed == b.seed);
  REQUIRE(a.items.size() == b.items.size());
  for (size_t k = 0; k < a.items.size(); ++k) {
    CHECK(a.items[k].dt == b.items[k].dt);
    CHECK(a.items[k].t0 == b.items[k].t0);
    CHECK(a.items[k].code == b.items[k].code);
    CHECK(a.items[k].frames.rows == b.items[k].frames.rows);
    CHECK(a.items[k].frames.v == b.items[k].frames.v);
    CHECK(a.items[k].solid.v == b.items[k].solid.v);
  }
}

/// Synthetic decaying-wave dataset small enough to train in milliseconds.
TrajectorySet wave_set() {
  TrajectorySet set;
  set.benchmark = "wave";
  set.dims = {8};
  set.extents = {1.0};
  set.n_train = 2;
  set.seed = 3;
  const double codes[3] = {0.1, 0.3, 0.2};
  for (int k = 0; k < 3; ++k) {
    Trajectory traj;
    traj.dt = 0.2;
    traj.code = {codes[k]};
    traj.frames = RealMat(5, 8);
    for (int t = 0; t < 5; ++t)
      for (int i = 0; i < 8; ++i) {
        const double x = i / 8.0, time = 0.2 * t;
        traj.frames(t, i) = std::exp(-0.1 * time) *
                            std::cos(2.0 * std::numbers::pi * x -
                                     (1.0 + codes[k]) * time);
      }
    set.items.push_back(std::move(traj));
  }
  return set;
}

TrainConfig wave_config() {
  TrainConfig config;
  config.pairs = 1;
  config.epochs_per_stage = 2;
  config.long_horizons = 2;
  config.seed = 3;
  config.phi_width = 6;
  config.phi_depth = 2;
  config.lam_width = 6;
  config.lam_depth = 2;
  config.omega0 = 5.0;
  return config;
}

}  // namespace

TEST_CASE("rmse is exact on the definitional cases") {
  Rng rng(11);
  RealMat truth(3, 5);
  for (double& v : truth.v) v = rng.normal();

  const RmseSeries same = rmse(truth, truth);
  for (double v : same.per_step) CHECK(v == 0.0);
  CHECK(same.mean == 0.0);

  RealMat zero(3, 5), twice(3, 5);
  for (size_t i = 0; i < truth.v.size(); ++i) twice.v[i] = 2.0 * truth.v[i];
  const RmseSeries z = rmse(zero, truth);
  const RmseSeries d = rmse(twice, truth);
  for (int t = 0; t < 3; ++t) {
    CHECK(z.per_step[t] == 1.0);
    CHECK(d.per_step[t] == 1.0);
    CHECK_FALSE(z.absolute[t]);
  }
  CHECK(z.mean == 1.0);
  CHECK(d.mean == 1.0);
}

TEST_CASE("rmse matches hand arithmetic on a 2-cell 2-step case") {
  RealMat truth(2, 2), pred(2, 2);
  truth(0, 0) = 1.0; truth(0, 1) = 2.0;
  truth(1, 0) = 3.0; truth(1, 1) = 4.0;
  pred(0, 0) = 1.5; pred(0, 1) = 2.5;
  pred(1, 0) = 2.0; pred(1, 1) = 5.0;
  const RmseSeries s = rmse(pred, truth);
  // step 0: (0.25 + 0.25) / (1 + 4); step 1: (1 + 1) / (9 + 16)
  CHECK(s.per_step[0] == 0.5 / 5.0);
  CHECK(s.per_step[1] == 2.0 / 25.0);
  CHECK(s.mean == (0.5 / 5.0 + 2.0 / 25.0) / 2.0);
}

TEST_CASE("a zero-norm step reports absolute error with a flag") {
  RealMat truth(2, 4), pred(2, 4);
  for (int i = 0; i < 4; ++i) {
    truth(0, i) = 1.0;
    pred(0, i) = 1.0;
    pred(1, i) = 0.5;  // truth row 1 stays zero
  }
  const RmseSeries s = rmse(pred, truth);
  CHECK_FALSE(s.absolute[0]);
  CHECK(s.absolute[1]);
  CHECK(s.per_step[1] == 0.25);  // mean squared error over 4 cells
}

TEST_CASE("masked cells never enter the error") {
  RealMat truth(2, 4), pred(2, 4), solid(1, 4);
  Rng rng(5);
  for (double& v : truth.v) v = rng.normal();
  pred = truth;
  solid(0, 1) = 1.0;
  pred(0, 1) = 1e9;  // garbage on the solid cell must not matter
  pred(1, 1) = -1e9;
  const RmseSeries s = rmse(pred, truth, solid);
  CHECK(s.per_step[0] == 0.0);
  CHECK(s.per_step[1] == 0.0);

  RealMat p2(1, 2), t2(1, 2);
  CHECK_THROWS_AS(rmse(p2, t2, RealMat(1, 2)), ShapeError);  // all cells solid
  CHECK_THROWS_AS(rmse(RealMat(1, 3), RealMat(2, 3)), ShapeError);
}

TEST_CASE("aggregate rmse averages trajectory means") {
  RmseSeries a, b;
  a.mean = 0.25;
  b.mean = 0.75;
  CHECK(aggregate_rmse({a, b}) == 0.5);
  CHECK_THROWS_AS(aggregate_rmse({}), Error);
}

TEST_CASE("median of odd, even, and single samples") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(median({7.0}) == 7.0);
  CHECK_THROWS_AS(median({}), Error);
}

TEST_CASE("dataset round trip is bitwise") {
  TempDir tmp;
  const TrajectorySet set = golden_set();
  const std::string path = tmp / "set.ndmd";
  save_dataset(path, set);
  check_sets_equal(load_dataset(path), set);
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
}

TEST_CASE("the committed dataset bytes are stable across builds") {
  const std::string committed = std::string(NDMD_TEST_DATA) + "/golden.ndmd";
  check_sets_equal(load_dataset(committed), golden_set());

  TempDir tmp;
  const std::string fresh = tmp / "fresh.ndmd";
  save_dataset(fresh, golden_set());
  CHECK(slurp(fresh) == slurp(committed));
}

TEST_CASE("corrupt dataset files fail with offsets") {
  TempDir tmp;
  const std::string path = tmp / "set.ndmd";
  save_dataset(path, golden_set());
  const std::string bytes = slurp(path);

  SUBCASE("bad magic points at byte 0") {
    std::string bad = bytes;
    bad[0] = 'X';
    write_text_atomic(path, bad);
    try {
      load_dataset(path);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(e.offset == 0);
    }
  }
  SUBCASE("future version asks for migration") {
    std::string bad = bytes;
    bad[4] = 9;
    write_text_atomic(path, bad);
    try {
      load_dataset(path);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(e.offset == 4);
      CHECK(std::string(e.what()).find("migration") != std::string::npos);
    }
  }
  SUBCASE("payload truncation points at the break") {
    write_text_atomic(path, bytes.substr(0, bytes.size() - 10));
    try {
      load_dataset(path);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(e.offset >= bytes.size() - 10 - 8);
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }
  SUBCASE("trailing bytes are rejected") {
    write_text_atomic(path, bytes + "junk");
    CHECK_THROWS_AS(load_dataset(path), IoError);
  }
}

TEST_CASE("checkpoint round trip reproduces the model bitwise") {
  TempDir tmp;
  const TrajectorySet data = wave_set();
  const TrainConfig config = wave_config();
  const InrModel model = train_all(data, config);
  const std::string path = tmp / "model.ndmk";
  save_checkpoint(path, Checkpoint{model, config});
  const Checkpoint back = load_checkpoint(path);

  CHECK(back.model.benchmark == model.benchmark);
  CHECK(back.model.dims == model.dims);
  CHECK(back.model.extents == model.extents);
  CHECK(back.model.dt == model.dt);
  CHECK(back.model.paired == model.paired);
  CHECK(back.model.deflated == model.deflated);
  CHECK(back.model.point_map.offset == model.point_map.offset);
  CHECK(back.model.point_map.scale == model.point_map.scale);
  CHECK(back.model.code_map.offset == model.code_map.offset);
  CHECK(back.model.code_map.scale == model.code_map.scale);
  CHECK(back.model.stage_loss == model.stage_loss);
  CHECK(back.model.diagnostics == model.diagnostics);
  REQUIRE(back.model.stages.size() == model.stages.size());
  for (size_t s = 0; s < model.stages.size(); ++s) {
    const ModePairNets &a = back.model.stages[s], &b = model.stages[s];
    CHECK(a.frozen == b.frozen);
    CHECK(a.phi_spec.param_count() == b.phi_spec.param_count());
    REQUIRE(a.phi.tensors.size() == b.phi.tensors.size());
    for (size_t t = 0; t < a.phi.tensors.size(); ++t)
      CHECK(a.phi.tensors[t].v == b.phi.tensors[t].v);
    for (size_t t = 0; t < a.lam.tensors.size(); ++t)
      CHECK(a.lam.tensors[t].v == b.lam.tensors[t].v);
  }
  CHECK(back.config.alpha == config.alpha);
  CHECK(back.config.seed == config.seed);

  // identical parameters must evaluate identically
  const RealMat pts = grid_points(model.dims, model.extents);
  const ModeBank phi_a = eval_basis(model, pts, {0.2});
  const ModeBank phi_b = eval_basis(back.model, pts, {0.2});
  CHECK(phi_a.phi.v == phi_b.phi.v);

  // a second save of the loaded model is byte-identical
  const std::string again = tmp / "again.ndmk";
  save_checkpoint(again, back);
  CHECK(slurp(again) == slurp(path));
}

TEST_CASE("corrupt checkpoints fail with offsets") {
  TempDir tmp;
  const std::string path = tmp / "model.ndmk";
  save_checkpoint(path, Checkpoint{train_all(wave_set(), wave_config()),
                                   wave_config()});
  const std::string bytes = slurp(path);

  std::string bad = bytes;
  bad[0] = 'X';
  write_text_atomic(path, bad);
  try {
    load_checkpoint(path);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(e.offset == 0);
  }

  write_text_atomic(path, bytes.substr(0, bytes.size() - 4));
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("train config survives the json round trip") {
  TrainConfig c;
  c.pairs = 5;
  c.alpha = 0.3;
  c.beta = 0.7;
  c.epochs_per_stage = 17;
  c.batch = 4;
  c.lr_phi = 2e-4;
  c.lr_lambda = 3e-3;
  c.long_horizons = 9;
  c.seed = 42;
  c.train_count = 6;
  c.ablation = Ablation::penalty_orth;
  c.penalty_weight = 0.05;
  c.autoregressive_short = true;
  c.workers = 3;
  c.phi_width = 33;
  c.lam_depth = 4;
  c.omega0 = 12.0;
  const TrainConfig back = train_config_from_json(train_config_to_json(c));
  CHECK(back.pairs == c.pairs);
  CHECK(back.alpha == c.alpha);
  CHECK(back.beta == c.beta);
  CHECK(back.epochs_per_stage == c.epochs_per_stage);
  CHECK(back.batch == c.batch);
  CHECK(back.lr_phi == c.lr_phi);
  CHECK(back.lr_lambda == c.lr_lambda);
  CHECK(back.long_horizons == c.long_horizons);
  CHECK(back.seed == c.seed);
  CHECK(back.train_count == c.train_count);
  CHECK(back.ablation == c.ablation);
  CHECK(back.penalty_weight == c.penalty_weight);
  CHECK(back.autoregressive_short == c.autoregressive_short);
  CHECK(back.workers == c.workers);
  CHECK(back.phi_width == c.phi_width);
  CHECK(back.lam_depth == c.lam_depth);
  CHECK(back.omega0 == c.omega0);
}

TEST_CASE("mode export re-imports to the printed precision") {
  TempDir tmp;
  const InrModel model = train_all(wave_set(), wave_config());
  const std::string path = tmp / "modes.csv";
  export_modes(model, {0.2}, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,re_phi_1,im_phi_1,re_phi_2,im_phi_2");

  const RealMat pts = grid_points(model.dims, model.extents);
  const ModeBank bank = eval_basis(model, pts, {0.2});
  int row = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> cells;
    size_t at = 0;
    while (at <= line.size()) {
      size_t end = line.find(',', at);
      if (end == std::string::npos) end = line.size();
      cells.push_back(std::strtod(line.substr(at, end - at).c_str(), nullptr));
      at = end + 1;
    }
    REQUIRE(cells.size() == 5);
    CHECK(cells[0] == pts(row, 0));
    for (int q = 0; q < 2; ++q) {
      CHECK(cells[1 + 2 * q] == bank.phi(row, q).real());
      CHECK(cells[2 + 2 * q] == bank.phi(row, q).imag());
    }
    ++row;
  }
  CHECK(row == pts.rows);
}

TEST_CASE("spectrum export writes one row per code") {
  TempDir tmp;
  const InrModel model = train_all(wave_set(), wave_config());
  const std::string path = tmp / "spectrum.csv";
  const std::vector<std::vector<double>> codes = {{0.1}, {0.15}, {0.2},
                                                  {0.25}, {0.3}};
  export_spectrum(model, codes, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "xi0,alpha_1,beta_1,alpha_2,beta_2");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    const Spectrum s = eval_spectrum(model, codes[rows]);
    std::vector<double> cells;
    size_t at = 0;
    while (at <= line.size()) {
      size_t end = line.find(',', at);
      if (end == std::string::npos) end = line.size();
      cells.push_back(std::strtod(line.substr(at, end - at).c_str(), nullptr));
      at = end + 1;
    }
    REQUIRE(cells.size() == 5);
    CHECK(cells[0] == codes[rows][0]);
    CHECK(cells[1] == s.omega[0].real());
    CHECK(cells[2] == s.omega[0].imag());
    CHECK(cells[3] == s.omega[1].real());
    CHECK(cells[4] == s.omega[1].imag());
    ++rows;
  }
  CHECK(rows == 5);
}

TEST_CASE("reports validate against the committed schema") {
  const nlohmann::json schema = nlohmann::json::parse(
      slurp(std::string(NDMD_REPO_ROOT) + "/schema/report.schema.json"));

  RunReport report;
  report.benchmark = "wave";
  report.param_count = 123;
  report.aggregate = 0.25;
  report.codes = {{0.2}};
  RmseSeries s;
  s.per_step = {0.2, 0.3};
  s.absolute = {false, true};
  s.mean = 0.25;
  report.series = {s};
  report.ms_per_frame = 0.5;
  report.wall_seconds = 1.5;
  report.config = train_config_to_json(wave_config());

  nlohmann::json doc = report_to_json(report);
  std::string why;
  CHECK(validate_json(doc, schema, &why));
  CHECK(doc["rmse"]["per_trajectory"][0]["absolute_steps"][0] == 1);

  nlohmann::json missing = doc;
  missing.erase("rmse");
  CHECK_FALSE(validate_json(missing, schema, &why));
  CHECK(why.find("rmse") != std::string::npos);

  nlohmann::json wrong = doc;
  wrong["param_count"] = "lots";
  CHECK_FALSE(validate_json(wrong, schema, &why));
}

TEST_CASE("schema validator covers types, required keys, and items") {
  using nlohmann::json;
  const json schema = json::parse(R"({
    "type": "object",
    "required": ["a"],
    "properties": {
      "a": {"type": "array", "items": {"type": "integer"}},
      "b": {"type": "string"}
    }
  })");
  std::string why;
  CHECK(validate_json(json::parse(R"({"a": [1, 2]})"), schema, &why));
  CHECK(validate_json(json::parse(R"({"a": [], "b": "x"})"), schema, &why));
  CHECK_FALSE(validate_json(json::parse(R"({"b": "x"})"), schema, &why));
  CHECK_FALSE(validate_json(json::parse(R"({"a": [1.5]})"), schema, &why));
  CHECK_FALSE(validate_json(json::parse(R"({"a": [1], "b": 3})"), schema, &why));
  CHECK_FALSE(validate_json(json::parse("[]"), schema, &why));
}

TEST_CASE("timing returns a usable per-frame figure") {
  const TrajectorySet data = wave_set();
  const InrModel model = train_all(data, wave_config());
  const double ms = time_per_frame(model, data.items[2], 4, 3);
  CHECK(ms > 0.0);
  CHECK(std::isfinite(ms));
  CHECK_THROWS_AS(time_per_frame(model, data.items[2], 0, 3), Error);
}

TEST_CASE("atomic writes leave no temp files behind") {
  TempDir tmp;
  const std::string path = tmp / "note.txt";
  write_text_atomic(path, "first");
  write_text_atomic(path, "second");
  CHECK(slurp(path) == "second");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
}
