#include "ndmd/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ndmd/errors.hpp"

namespace ndmd {

namespace {

using nlohmann::json;

constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

/// Bounds-checked reader over a loaded file; failures carry the offset.
struct Cursor {
  const std::string& buf;
  std::uint64_t at = 0;

  void need(std::uint64_t n, const char* what) const {
    if (at + n > buf.size())
      throw IoError(std::string("truncated file: expected ") + what, at);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    at += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    at += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path, 0);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return buf;
}

json parse_metadata(Cursor& c) {
  const std::uint64_t len = c.u64("metadata length");
  c.need(len, "metadata document");
  const std::uint64_t start = c.at;
  json meta;
  try {
    meta = json::parse(c.buf.begin() + static_cast<long>(start),
                       c.buf.begin() + static_cast<long>(start + len));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad metadata: ") + e.what(), start);
  }
  c.at += len;
  return meta;
}

void check_magic(Cursor& c, const char* magic, const char* kind) {
  c.need(4, "magic");
  if (c.buf.compare(0, 4, magic) != 0)
    throw IoError(std::string("not a ") + kind + " file (bad magic)", 0);
  c.at = 4;
}

void check_version(Cursor& c, std::uint32_t supported) {
  const std::uint64_t where = c.at;
  const std::uint32_t v = c.u32("version");
  if (v != supported)
    throw IoError("format version " + std::to_string(v) +
                      " needs migration; this build reads version " +
                      std::to_string(supported),
                  where);
}

json spec_to_json(const nn::NetworkSpec& s) {
  return json{{"input_dim", s.input_dim},
              {"hidden_width", s.hidden_width},
              {"hidden_layers", s.hidden_layers},
              {"output_dim", s.output_dim},
              {"activation", s.activation == nn::Activation::Sine ? "sine" : "elu"},
              {"omega0", s.omega0}};
}

nn::NetworkSpec spec_from_json(const json& j) {
  nn::NetworkSpec s;
  s.input_dim = j.at("input_dim").get<int>();
  s.hidden_width = j.at("hidden_width").get<int>();
  s.hidden_layers = j.at("hidden_layers").get<int>();
  s.output_dim = j.at("output_dim").get<int>();
  s.activation = j.at("activation").get<std::string>() == "sine"
                     ? nn::Activation::Sine
                     : nn::Activation::Elu;
  s.omega0 = j.at("omega0").get<double>();
  return s;
}

json axis_map_to_json(const AxisMap& m) {
  return json{{"offset", m.offset}, {"scale", m.scale}};
}

AxisMap axis_map_from_json(const json& j) {
  AxisMap m;
  m.offset = j.at("offset").get<std::vector<double>>();
  m.scale = j.at("scale").get<std::vector<double>>();
  return m;
}

/// Tensor shapes of a ParamSet for a spec, in storage order.
std::vector<std::pair<int, int>> tensor_shapes(const nn::NetworkSpec& s) {
  std::vector<std::pair<int, int>> shapes;
  for (int k = 0; k < s.stage_count(); ++k) {
    const int in = k == 0 ? s.input_dim : s.hidden_width;
    const int out = k == s.stage_count() - 1 ? s.output_dim : s.hidden_width;
    shapes.push_back({in, out});
    shapes.push_back({1, out});
  }
  return shapes;
}

const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_deflation: return "no-deflation";
    case Ablation::no_conjugate: return "no-conjugate";
    case Ablation::no_long: return "no-long";
    case Ablation::penalty_orth: return "penalty-orth";
  }
  return "none";
}

Ablation ablation_from_name(const std::string& name) {
  if (name == "none") return Ablation::none;
  if (name == "no-deflation") return Ablation::no_deflation;
  if (name == "no-conjugate") return Ablation::no_conjugate;
  if (name == "no-long") return Ablation::no_long;
  if (name == "penalty-orth") return Ablation::penalty_orth;
  throw Error("unknown ablation name: " + name);
}

/// Shortest round-trip decimal for a double, for CSV cells.
std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_text_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp, 0);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp, 0);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path, 0);
}

RmseSeries rmse(const RealMat& prediction, const RealMat& truth,
                const RealMat& solid) {
  if (prediction.rows != truth.rows || prediction.cols != truth.cols)
    throw ShapeError("rmse: prediction and truth shapes differ");
  RealMat pred = prediction, ref = truth;
  if (solid.size() != 0) {
    const std::vector<int> cells = fluid_cells(solid, truth.cols);
    pred = restrict_columns(prediction, cells);
    ref = restrict_columns(truth, cells);
  }
  if (ref.cols == 0) throw ShapeError("rmse: no unmasked cells");
  RmseSeries out;
  out.per_step.resize(ref.rows);
  out.absolute.resize(ref.rows, false);
  double acc = 0.0;
  for (int t = 0; t < ref.rows; ++t) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < ref.cols; ++i) {
      const double d = pred(t, i) - ref(t, i);
      num += d * d;
      den += ref(t, i) * ref(t, i);
    }
    if (den > 0.0) {
      out.per_step[t] = num / den;
    } else {
      out.per_step[t] = num / ref.cols;
      out.absolute[t] = true;
    }
    acc += out.per_step[t];
  }
  out.mean = acc / ref.rows;
  return out;
}

double aggregate_rmse(const std::vector<RmseSeries>& series) {
  if (series.empty()) throw Error("aggregate rmse: no trajectories");
  double acc = 0.0;
  for (const RmseSeries& s : series) acc += s.mean;
  return acc / static_cast<double>(series.size());
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median: empty sample");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double time_per_frame(const InrModel& model, const Trajectory& traj,
                      int frames, int repeats) {
  if (frames < 1) throw Error("time per frame: need at least one frame");
  if (repeats < 1) throw Error("time per frame: need at least one repeat");
  if (traj.frames.rows < 1) throw Error("time per frame: empty trajectory");
  const std::vector<int> cells = fluid_cells(traj.solid, traj.frames.cols);
  const RealMat all_pts = grid_points(model.dims, model.extents);
  RealMat pts(static_cast<int>(cells.size()), all_pts.cols);
  for (size_t i = 0; i < cells.size(); ++i)
    for (int a = 0; a < all_pts.cols; ++a)
      pts(static_cast<int>(i), a) = all_pts(cells[i], a);

  // amortized once per code, exactly as deployment uses them
  const ModeBank bank = eval_basis(model, pts, traj.code);
  const Spectrum spec = eval_spectrum(model, traj.code);
  std::vector<double> u0(cells.size());
  for (size_t i = 0; i < cells.size(); ++i) u0[i] = traj.frames(0, cells[i]);
  std::vector<double> deltas(frames);
  for (int j = 0; j < frames; ++j) deltas[j] = (j + 1) * model.dt;

  std::vector<double> per_frame_ms(repeats);
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    const ModalCoefficients z = project(bank, u0);
    const Rollout roll = rollout(bank, spec, z, deltas);
    const auto stop = std::chrono::steady_clock::now();
    (void)roll;
    const double ms =
        std::chrono::duration<double, std::milli>(stop - start).count();
    per_frame_ms[r] = ms / frames;
  }
  return median(std::move(per_frame_ms));
}

void save_dataset(const std::string& path, const TrajectorySet& set) {
  json meta;
  meta["benchmark"] = set.benchmark;
  meta["dims"] = set.dims;
  meta["extents"] = set.extents;
  meta["n_train"] = set.n_train;
  meta["seed"] = set.seed;
  meta["channels"] = 1;
  json frames = json::array(), dt = json::array(), t0 = json::array(),
       codes = json::array(), mask = json::array();
  for (const Trajectory& traj : set.items) {
    frames.push_back(traj.frames.rows);
    dt.push_back(traj.dt);
    t0.push_back(traj.t0);
    codes.push_back(traj.code);
    mask.push_back(traj.solid.size() != 0);
  }
  meta["frames"] = frames;
  meta["dt"] = dt;
  meta["t0"] = t0;
  meta["codes"] = codes;
  meta["mask"] = mask;

  long cell_count = 1;
  for (int d : set.dims) cell_count *= d;

  std::string out;
  out.reserve(64);
  out += "NDMD";
  put_u32(out, kDatasetVersion);
  const std::string doc = meta.dump();
  put_u64(out, doc.size());
  out += doc;
  for (const Trajectory& traj : set.items) {
    if (traj.frames.cols != cell_count)
      throw ShapeError("save dataset: frame width does not match the grid");
    for (double v : traj.frames.v) put_f64(out, v);
    if (traj.solid.size() != 0) {
      if (static_cast<long>(traj.solid.size()) != cell_count)
        throw ShapeError("save dataset: mask size does not match the grid");
      for (double v : traj.solid.v)
        out.push_back(v != 0.0 ? '\x01' : '\x00');
    }
  }
  write_text_atomic(path, out);
}

TrajectorySet load_dataset(const std::string& path) {
  const std::string buf = read_file(path);
  Cursor c{buf};
  check_magic(c, "NDMD", "dataset");
  check_version(c, kDatasetVersion);
  const json meta = parse_metadata(c);

  TrajectorySet set;
  try {
    set.benchmark = meta.at("benchmark").get<std::string>();
    set.dims = meta.at("dims").get<std::vector<int>>();
    set.extents = meta.at("extents").get<std::vector<double>>();
    set.n_train = meta.at("n_train").get<int>();
    set.seed = meta.at("seed").get<std::uint64_t>();
    const auto frames = meta.at("frames").get<std::vector<int>>();
    const auto dt = meta.at("dt").get<std::vector<double>>();
    const auto t0 = meta.at("t0").get<std::vector<double>>();
    const auto codes = meta.at("codes").get<std::vector<std::vector<double>>>();
    const auto mask = meta.at("mask").get<std::vector<bool>>();
    const int channels = meta.at("channels").get<int>();
    if (channels != 1)
      throw IoError("unsupported channel count " + std::to_string(channels), 16);
    if (frames.size() != codes.size() || dt.size() != codes.size() ||
        t0.size() != codes.size() || mask.size() != codes.size())
      throw IoError("metadata arrays disagree on the trajectory count", 16);

    long cell_count = 1;
    for (int d : set.dims) {
      if (d < 1) throw IoError("non-positive grid dimension", 16);
      cell_count *= d;
    }

    for (size_t k = 0; k < codes.size(); ++k) {
      Trajectory traj;
      traj.dt = dt[k];
      traj.t0 = t0[k];
      traj.code = codes[k];
      traj.frames = RealMat(frames[k], static_cast<int>(cell_count));
      for (double& v : traj.frames.v) v = c.f64("frame payload");
      if (mask[k]) {
        c.need(static_cast<std::uint64_t>(cell_count), "mask payload");
        traj.solid = RealMat(1, static_cast<int>(cell_count));
        for (long i = 0; i < cell_count; ++i)
          traj.solid.v[static_cast<size_t>(i)] =
              buf[c.at + static_cast<std::uint64_t>(i)] != '\x00' ? 1.0 : 0.0;
        c.at += static_cast<std::uint64_t>(cell_count);
      }
      set.items.push_back(std::move(traj));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("bad metadata: ") + e.what(), 16);
  }
  if (c.at != buf.size())
    throw IoError("trailing bytes after the declared payload", c.at);
  return set;
}

json train_config_to_json(const TrainConfig& config) {
  return json{{"pairs", config.pairs},
              {"alpha", config.alpha},
              {"beta", config.beta},
              {"epochs_per_stage", config.epochs_per_stage},
              {"batch", config.batch},
              {"lr_phi", config.lr_phi},
              {"lr_lambda", config.lr_lambda},
              {"lr_min", config.lr_min},
              {"long_horizons", config.long_horizons},
              {"seed", config.seed},
              {"train_count", config.train_count},
              {"ablation", ablation_name(config.ablation)},
              {"penalty_weight", config.penalty_weight},
              {"autoregressive_short", config.autoregressive_short},
              {"workers", config.workers},
              {"phi_width", config.phi_width},
              {"phi_depth", config.phi_depth},
              {"lam_width", config.lam_width},
              {"lam_depth", config.lam_depth},
              {"omega0", config.omega0}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.pairs = j.at("pairs").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.epochs_per_stage = j.at("epochs_per_stage").get<int>();
  c.batch = j.at("batch").get<int>();
  c.lr_phi = j.at("lr_phi").get<double>();
  c.lr_lambda = j.at("lr_lambda").get<double>();
  c.lr_min = j.at("lr_min").get<double>();
  c.long_horizons = j.at("long_horizons").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.train_count = j.at("train_count").get<int>();
  c.ablation = ablation_from_name(j.at("ablation").get<std::string>());
  c.penalty_weight = j.at("penalty_weight").get<double>();
  c.autoregressive_short = j.at("autoregressive_short").get<bool>();
  c.workers = j.at("workers").get<int>();
  c.phi_width = j.at("phi_width").get<int>();
  c.phi_depth = j.at("phi_depth").get<int>();
  c.lam_width = j.at("lam_width").get<int>();
  c.lam_depth = j.at("lam_depth").get<int>();
  c.omega0 = j.at("omega0").get<double>();
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const InrModel& m = checkpoint.model;
  json meta;
  meta["benchmark"] = m.benchmark;
  meta["dims"] = m.dims;
  meta["extents"] = m.extents;
  meta["dt"] = m.dt;
  meta["paired"] = m.paired;
  meta["deflated"] = m.deflated;
  meta["point_map"] = axis_map_to_json(m.point_map);
  meta["code_map"] = axis_map_to_json(m.code_map);
  meta["stage_loss"] = m.stage_loss;
  meta["diagnostics"] = m.diagnostics;
  meta["config"] = train_config_to_json(checkpoint.config);
  json stages = json::array();
  for (const ModePairNets& nets : m.stages)
    stages.push_back(json{{"phi", spec_to_json(nets.phi_spec)},
                          {"lam", spec_to_json(nets.lam_spec)},
                          {"frozen", nets.frozen}});
  meta["stages"] = stages;

  std::string out;
  out += "NDMK";
  put_u32(out, kCheckpointVersion);
  const std::string doc = meta.dump();
  put_u64(out, doc.size());
  out += doc;
  for (const ModePairNets& nets : m.stages) {
    for (const RealMat& t : nets.phi.tensors)
      for (double v : t.v) put_f64(out, v);
    for (const RealMat& t : nets.lam.tensors)
      for (double v : t.v) put_f64(out, v);
  }
  write_text_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  Cursor c{buf};
  check_magic(c, "NDMK", "checkpoint");
  check_version(c, kCheckpointVersion);
  const json meta = parse_metadata(c);

  Checkpoint ck;
  try {
    InrModel& m = ck.model;
    m.benchmark = meta.at("benchmark").get<std::string>();
    m.dims = meta.at("dims").get<std::vector<int>>();
    m.extents = meta.at("extents").get<std::vector<double>>();
    m.dt = meta.at("dt").get<double>();
    m.paired = meta.at("paired").get<bool>();
    m.deflated = meta.at("deflated").get<bool>();
    m.point_map = axis_map_from_json(meta.at("point_map"));
    m.code_map = axis_map_from_json(meta.at("code_map"));
    m.stage_loss = meta.at("stage_loss").get<std::vector<std::vector<double>>>();
    m.diagnostics = meta.at("diagnostics").get<std::vector<std::string>>();
    ck.config = train_config_from_json(meta.at("config"));
    for (const json& js : meta.at("stages")) {
      ModePairNets nets;
      nets.phi_spec = spec_from_json(js.at("phi"));
      nets.lam_spec = spec_from_json(js.at("lam"));
      nets.frozen = js.at("frozen").get<bool>();
      for (auto [in, outd] : tensor_shapes(nets.phi_spec)) {
        RealMat t(in, outd);
        for (double& v : t.v) v = c.f64("stage parameters");
        nets.phi.tensors.push_back(std::move(t));
      }
      for (auto [in, outd] : tensor_shapes(nets.lam_spec)) {
        RealMat t(in, outd);
        for (double& v : t.v) v = c.f64("stage parameters");
        nets.lam.tensors.push_back(std::move(t));
      }
      m.stages.push_back(std::move(nets));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("bad metadata: ") + e.what(), 16);
  }
  if (c.at != buf.size())
    throw IoError("trailing bytes after the declared payload", c.at);
  return ck;
}

void export_modes(const InrModel& model, const std::vector<double>& code,
                  const std::string& path) {
  const RealMat pts = grid_points(model.dims, model.extents);
  const ModeBank bank = eval_basis(model, pts, code);
  std::string out;
  for (int a = 0; a < pts.cols; ++a)
    out += (a ? ",x" : "x") + std::to_string(a);
  for (int q = 0; q < bank.phi.cols; ++q)
    out += ",re_phi_" + std::to_string(q + 1) + ",im_phi_" + std::to_string(q + 1);
  out += "\n";
  for (int i = 0; i < pts.rows; ++i) {
    for (int a = 0; a < pts.cols; ++a) {
      if (a) out += ",";
      out += fmt_g17(pts(i, a));
    }
    for (int q = 0; q < bank.phi.cols; ++q) {
      out += "," + fmt_g17(bank.phi(i, q).real());
      out += "," + fmt_g17(bank.phi(i, q).imag());
    }
    out += "\n";
  }
  write_text_atomic(path, out);
}

void export_spectrum(const InrModel& model,
                     const std::vector<std::vector<double>>& codes,
                     const std::string& path) {
  if (codes.empty()) throw Error("export spectrum: no codes given");
  std::string out;
  for (size_t a = 0; a < codes[0].size(); ++a)
    out += (a ? ",xi" : "xi") + std::to_string(a);
  for (int q = 0; q < model.mode_count(); ++q)
    out += ",alpha_" + std::to_string(q + 1) + ",beta_" + std::to_string(q + 1);
  out += "\n";
  for (const std::vector<double>& code : codes) {
    const Spectrum s = eval_spectrum(model, code);
    for (size_t a = 0; a < code.size(); ++a) {
      if (a) out += ",";
      out += fmt_g17(code[a]);
    }
    for (const cplx& w : s.omega) {
      out += "," + fmt_g17(w.real());
      out += "," + fmt_g17(w.imag());
    }
    out += "\n";
  }
  write_text_atomic(path, out);
}

json report_to_json(const RunReport& report) {
  json per_traj = json::array();
  for (size_t k = 0; k < report.series.size(); ++k) {
    json row;
    row["code"] = k < report.codes.size() ? json(report.codes[k]) : json::array();
    row["mean"] = report.series[k].mean;
    row["per_step"] = report.series[k].per_step;
    json abs_steps = json::array();
    for (size_t t = 0; t < report.series[k].absolute.size(); ++t)
      if (report.series[k].absolute[t]) abs_steps.push_back(t);
    row["absolute_steps"] = abs_steps;
    per_traj.push_back(row);
  }
  json j;
  j["benchmark"] = report.benchmark;
  j["param_count"] = report.param_count;
  j["rmse"] = json{{"aggregate", report.aggregate}, {"per_trajectory", per_traj}};
  j["timing"] = json{{"ms_per_frame", report.ms_per_frame},
                     {"wall_seconds", report.wall_seconds}};
  j["config"] = report.config;
  return j;
}

void save_report(const std::string& path, const RunReport& report) {
  write_text_atomic(path, report_to_json(report).dump(2) + "\n");
}

bool validate_json(const nlohmann::json& doc, const nlohmann::json& schema,
                   std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (schema.contains("type")) {
    const std::string type = schema.at("type").get<std::string>();
    const bool ok =
        (type == "object" && doc.is_object()) ||
        (type == "array" && doc.is_array()) ||
        (type == "string" && doc.is_string()) ||
        (type == "number" && doc.is_number()) ||
        (type == "integer" && doc.is_number_integer()) ||
        (type == "boolean" && doc.is_boolean());
    if (!ok) return fail("expected " + type + ", got " + std::string(doc.type_name()));
  }
  if (schema.contains("required"))
    for (const json& key : schema.at("required"))
      if (!doc.contains(key.get<std::string>()))
        return fail("missing required key " + key.get<std::string>());
  if (schema.contains("properties") && doc.is_object())
    for (auto it = schema.at("properties").begin();
         it != schema.at("properties").end(); ++it)
      if (doc.contains(it.key())) {
        std::string inner;
        if (!validate_json(doc.at(it.key()), it.value(), &inner))
          return fail(it.key() + ": " + inner);
      }
  if (schema.contains("items") && doc.is_array())
    for (size_t i = 0; i < doc.size(); ++i) {
      std::string inner;
      if (!validate_json(doc[i], schema.at("items"), &inner))
        return fail("[" + std::to_string(i) + "]: " + inner);
    }
  return true;
}

}  // namespace ndmd
