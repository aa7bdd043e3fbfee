#include "ndmd/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "ndmd/dmd.hpp"
#include "ndmd/errors.hpp"
#include "ndmd/harness.hpp"
#include "ndmd/inr.hpp"
#include "ndmd/kernels.hpp"
#include "ndmd/rng.hpp"
#include "ndmd/solvers.hpp"

namespace ndmd {

namespace {

int env_workers() {
  const char* raw = std::getenv("NDMD_WORKERS");
  if (!raw) return 1;
  const int n = std::atoi(raw);
  return n > 0 ? n : 1;
}

std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

long model_param_count(const InrModel& model) {
  long total = 0;
  for (const ModePairNets& nets : model.stages)
    total += nets.phi_spec.param_count() + nets.lam_spec.param_count();
  return total;
}

void check_grid(const InrModel& model, const TrajectorySet& set) {
  if (model.dims != set.dims || model.extents != set.extents)
    throw ShapeError("checkpoint grid does not match the dataset grid");
}

RealMat gather_rows(const RealMat& m, const std::vector<int>& rows) {
  RealMat out(static_cast<int>(rows.size()), m.cols);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int a = 0; a < m.cols; ++a)
      out(static_cast<int>(i), a) = m(rows[i], a);
  return out;
}

/// Project frame 0 of one trajectory, roll to every later frame, and score
/// prediction rows 1..T-1 against the stored truth on fluid cells.
RmseSeries score_trajectory(const InrModel& model, const Trajectory& traj,
                            int horizon) {
  const int steps_all = traj.frames.rows - 1;
  if (steps_all < 1) throw Error("eval: trajectory has no steps to predict");
  const int steps = horizon > 0 ? std::min(horizon, steps_all) : steps_all;

  const std::vector<int> cells = fluid_cells(traj.solid, traj.frames.cols);
  const RealMat pts =
      gather_rows(grid_points(model.dims, model.extents), cells);
  const ModeBank bank = eval_basis(model, pts, traj.code);
  const Spectrum spec = eval_spectrum(model, traj.code);

  std::vector<double> u0(cells.size());
  for (size_t i = 0; i < cells.size(); ++i) u0[i] = traj.frames(0, cells[i]);
  const ModalCoefficients z = project(bank, u0);
  std::vector<double> deltas(steps);
  for (int j = 0; j < steps; ++j) deltas[j] = (j + 1) * traj.dt;
  const Rollout roll = rollout(bank, spec, z, deltas);

  const RealMat fluid = restrict_columns(traj.frames, cells);
  RealMat truth(steps, fluid.cols);
  for (int t = 0; t < steps; ++t)
    for (int i = 0; i < fluid.cols; ++i) truth(t, i) = fluid(t + 1, i);
  return rmse(roll.frames, truth);
}

struct HeldOut {
  std::vector<RmseSeries> series;
  std::vector<std::vector<double>> codes;
  double aggregate = 0.0;
};

HeldOut evaluate_heldout(const InrModel& model, const TrajectorySet& set,
                         int horizon) {
  check_grid(model, set);
  if (set.n_train >= static_cast<int>(set.items.size()))
    throw Error("eval: the dataset has no held-out trajectories");
  HeldOut out;
  for (size_t k = set.n_train; k < set.items.size(); ++k) {
    out.series.push_back(score_trajectory(model, set.items[k], horizon));
    out.codes.push_back(set.items[k].code);
  }
  out.aggregate = aggregate_rmse(out.series);
  return out;
}

std::vector<std::pair<double, double>> parse_grid(const std::string& text) {
  std::vector<std::pair<double, double>> grid;
  size_t at = 0;
  while (at < text.size()) {
    size_t end = text.find(',', at);
    if (end == std::string::npos) end = text.size();
    const std::string cell = text.substr(at, end - at);
    const size_t colon = cell.find(':');
    if (colon == std::string::npos)
      throw Error("sweep: grid entries look like alpha:beta");
    try {
      grid.push_back({std::stod(cell.substr(0, colon)),
                      std::stod(cell.substr(colon + 1))});
    } catch (const std::exception&) {
      throw Error("sweep: cannot parse grid entry '" + cell + "'");
    }
    at = end + 1;
  }
  if (grid.empty()) throw Error("sweep: empty weight grid");
  return grid;
}

std::vector<std::vector<double>> parse_code_list(const std::string& text) {
  std::vector<std::vector<double>> codes;
  size_t at = 0;
  while (at < text.size()) {
    size_t end = text.find(';', at);
    if (end == std::string::npos) end = text.size();
    std::vector<double> code;
    size_t ca = at;
    while (ca < end) {
      size_t ce = text.find(',', ca);
      if (ce == std::string::npos || ce > end) ce = end;
      try {
        code.push_back(std::stod(text.substr(ca, ce - ca)));
      } catch (const std::exception&) {
        throw Error("cannot parse code entry '" + text.substr(ca, ce - ca) + "'");
      }
      ca = ce + 1;
    }
    if (!code.empty()) codes.push_back(std::move(code));
    at = end + 1;
  }
  if (codes.empty()) throw Error("empty code list");
  return codes;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
  std::string benchmark;
  std::string preset = "desk";
  std::string out;
  int codes = 0;
  int frames = 0;
  std::uint64_t seed = 0;
  int workers = 0;
};

void run_generate(const GenerateOpts& o) {
  static const std::map<std::string, std::string> suffix = {
      {"paper", "-paper"}, {"desk", "-mini"}, {"narrow", "-narrow"}};
  BenchmarkOverrides over;
  over.codes = o.codes;
  over.frames = o.frames;
  over.seed = o.seed;
  over.workers = o.workers > 0 ? o.workers : env_workers();
  const TrajectorySet set =
      generate_benchmark(o.benchmark + suffix.at(o.preset), over);
  save_dataset(o.out, set);
  long cells = 1;
  for (int d : set.dims) cells *= d;
  std::printf("generate: %s, %zu trajectories (%d train), %d frames x %ld cells -> %s\n",
              set.benchmark.c_str(), set.items.size(), set.n_train,
              set.items.empty() ? 0 : set.items[0].frames.rows, cells,
              o.out.c_str());
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string data;
  std::string out;
  std::string ablate = "none";
  TrainConfig config;
};

Ablation ablation_from_flag(const std::string& name) {
  if (name == "none") return Ablation::none;
  if (name == "no-deflation") return Ablation::no_deflation;
  if (name == "no-conj") return Ablation::no_conjugate;
  if (name == "no-long") return Ablation::no_long;
  if (name == "penalty-orth") return Ablation::penalty_orth;
  throw Error("unknown ablation '" + name + "'");
}

void run_train(TrainOpts& o) {
  const TrajectorySet set = load_dataset(o.data);
  o.config.ablation = ablation_from_flag(o.ablate);
  if (o.config.workers <= 0) o.config.workers = env_workers();
  o.config.validate();

  const auto start = std::chrono::steady_clock::now();
  const InrModel model = train_all(set, o.config);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  save_checkpoint(o.out, Checkpoint{model, o.config});
  std::printf("train: %d mode pairs, %ld parameters, %.1f s -> %s\n",
              model.pair_count(), model_param_count(model), wall,
              o.out.c_str());
  for (size_t s = 0; s < model.stage_loss.size(); ++s) {
    const std::vector<double>& curve = model.stage_loss[s];
    if (!curve.empty())
      std::printf("  stage %zu loss %.6g -> %.6g over %zu epochs\n", s,
                  curve.front(), curve.back(), curve.size());
  }
  for (const std::string& note : model.diagnostics)
    std::printf("  note: %s\n", note.c_str());
}

// ---------------------------------------------------------------------------
// rollout

struct RolloutOpts {
  std::string ckpt;
  std::string data;
  std::string out;
  std::vector<double> code;
  int traj = -1;
  int init_frame = 0;
  int horizon = 0;
};

void run_rollout(const RolloutOpts& o) {
  const Checkpoint ck = load_checkpoint(o.ckpt);
  const TrajectorySet set = load_dataset(o.data);
  check_grid(ck.model, set);
  if (set.items.empty()) throw Error("rollout: the dataset is empty");

  int src = o.traj;
  if (src < 0) {
    if (o.code.empty())
      throw Error("rollout: give --code or --traj to pick the initial frame");
    // nearest stored code supplies the initial condition; the bank and
    // spectrum are still evaluated at the requested code
    double best = -1.0;
    for (size_t k = 0; k < set.items.size(); ++k) {
      if (set.items[k].code.size() != o.code.size())
        throw ShapeError("rollout: --code dimension does not match the dataset");
      double d2 = 0.0;
      for (size_t a = 0; a < o.code.size(); ++a) {
        const double d = set.items[k].code[a] - o.code[a];
        d2 += d * d;
      }
      if (best < 0.0 || d2 < best) {
        best = d2;
        src = static_cast<int>(k);
      }
    }
  }
  if (src >= static_cast<int>(set.items.size()))
    throw Error("rollout: trajectory index out of range");
  const Trajectory& traj = set.items[src];
  const std::vector<double> code = o.code.empty() ? traj.code : o.code;
  if (o.init_frame < 0 || o.init_frame >= traj.frames.rows)
    throw Error("rollout: initial frame out of range");
  if (o.horizon < 1) throw Error("rollout: horizon must be positive");

  const std::vector<int> cells = fluid_cells(traj.solid, traj.frames.cols);
  const RealMat pts =
      gather_rows(grid_points(ck.model.dims, ck.model.extents), cells);
  const ModeBank bank = eval_basis(ck.model, pts, code);
  const Spectrum spec = eval_spectrum(ck.model, code);
  std::vector<double> u0(cells.size());
  for (size_t i = 0; i < cells.size(); ++i)
    u0[i] = traj.frames(o.init_frame, cells[i]);
  const ModalCoefficients z = project(bank, u0);
  std::vector<double> deltas(o.horizon);
  for (int j = 0; j < o.horizon; ++j) deltas[j] = (j + 1) * traj.dt;
  const Rollout roll = rollout(bank, spec, z, deltas);

  Trajectory out;
  out.dt = traj.dt;
  out.t0 = traj.t0 + o.init_frame * traj.dt;
  out.code = code;
  out.solid = traj.solid;
  out.frames = RealMat(o.horizon + 1, traj.frames.cols);
  for (int i = 0; i < traj.frames.cols; ++i)
    out.frames(0, i) = traj.frames(o.init_frame, i);
  for (int t = 0; t < o.horizon; ++t)
    for (size_t i = 0; i < cells.size(); ++i)
      out.frames(t + 1, cells[i]) = roll.frames(t, static_cast<int>(i));

  TrajectorySet result;
  result.benchmark = set.benchmark;
  result.dims = set.dims;
  result.extents = set.extents;
  result.n_train = 0;
  result.seed = set.seed;
  result.items.push_back(std::move(out));
  save_dataset(o.out, result);
  std::printf("rollout: trajectory %d frame %d, %d steps, max imaginary %.3g -> %s\n",
              src, o.init_frame, o.horizon, roll.max_imag, o.out.c_str());
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string ckpt;
  std::string data;
  std::string report;
  int horizon = 0;
  int repeats = 5;
};

void run_eval(const EvalOpts& o) {
  const auto start = std::chrono::steady_clock::now();
  const Checkpoint ck = load_checkpoint(o.ckpt);
  const TrajectorySet set = load_dataset(o.data);
  const HeldOut held = evaluate_heldout(ck.model, set, o.horizon);

  const Trajectory& timed = set.items[set.n_train];
  const int frames = o.horizon > 0
                         ? std::min(o.horizon, timed.frames.rows - 1)
                         : timed.frames.rows - 1;

  RunReport report;
  report.benchmark = ck.model.benchmark;
  report.param_count = model_param_count(ck.model);
  report.aggregate = held.aggregate;
  report.codes = held.codes;
  report.series = held.series;
  report.ms_per_frame = time_per_frame(ck.model, timed, frames, o.repeats);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  report.config = train_config_to_json(ck.config);
  save_report(o.report, report);
  std::printf("eval: %zu held-out trajectories, aggregate rmse %.6g, %.4g ms/frame -> %s\n",
              held.series.size(), held.aggregate, report.ms_per_frame,
              o.report.c_str());
}

// ---------------------------------------------------------------------------
// dmd baseline

struct DmdOpts {
  std::string data;
  std::string out;
  int rank = 8;
};

void run_dmd(const DmdOpts& o) {
  const TrajectorySet set = load_dataset(o.data);
  if (set.n_train < 1) throw Error("dmd: the dataset has no training split");

  const double dt = set.items[0].dt;
  long pair_rows = 0;
  for (int k = 0; k < set.n_train; ++k) {
    if (set.items[k].dt != dt)
      throw Error("dmd: pooled trajectories must share one time step");
    pair_rows += set.items[k].frames.rows - 1;
  }
  const int cells = set.items[0].frames.cols;
  RealMat x(static_cast<int>(pair_rows), cells);
  RealMat xp(static_cast<int>(pair_rows), cells);
  int at = 0;
  for (int k = 0; k < set.n_train; ++k) {
    const RealMat& f = set.items[k].frames;
    for (int t = 0; t + 1 < f.rows; ++t, ++at)
      for (int i = 0; i < cells; ++i) {
        x(at, i) = f(t, i);
        xp(at, i) = f(t + 1, i);
      }
  }
  const DmdModel model = dmd_fit_pairs(x, xp, o.rank, dt);

  // score held-out trajectories from their own first frames
  std::vector<RmseSeries> series;
  for (size_t k = set.n_train; k < set.items.size(); ++k) {
    const Trajectory& traj = set.items[k];
    std::vector<double> x0(cells);
    for (int i = 0; i < cells; ++i) x0[i] = traj.frames(0, i);
    RealMat pred(traj.frames.rows - 1, cells);
    for (int t = 1; t < traj.frames.rows; ++t) {
      const std::vector<double> u = dmd_predict(model, x0, t);
      for (int i = 0; i < cells; ++i) pred(t - 1, i) = u[i];
    }
    RealMat truth(traj.frames.rows - 1, cells);
    for (int t = 1; t < traj.frames.rows; ++t)
      for (int i = 0; i < cells; ++i) truth(t - 1, i) = traj.frames(t, i);
    series.push_back(rmse(pred, truth, traj.solid));
  }

  nlohmann::json j;
  j["rank"] = model.rank;
  j["dt"] = model.dt;
  auto clist = [](const std::vector<cplx>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const cplx& c : v) out.push_back({c.real(), c.imag()});
    return out;
  };
  j["mu"] = clist(model.mu);
  j["omega"] = clist(model.omega);
  j["amplitudes"] = clist(model.amplitudes);
  std::vector<double> re(model.modes.v.size()), im(model.modes.v.size());
  for (size_t i = 0; i < model.modes.v.size(); ++i) {
    re[i] = model.modes.v[i].real();
    im[i] = model.modes.v[i].imag();
  }
  j["modes"] = {{"rows", model.modes.rows},
                {"cols", model.modes.cols},
                {"re", re},
                {"im", im}};
  j["warnings"] = model.warnings;
  if (!series.empty()) {
    const double agg = aggregate_rmse(series);
    nlohmann::json per = nlohmann::json::array();
    for (const RmseSeries& s : series) per.push_back(s.mean);
    j["heldout"] = {{"aggregate", agg}, {"per_trajectory", per}};
    std::printf("dmd: rank %d on %ld pooled pairs, held-out rmse %.6g -> %s\n",
                model.rank, pair_rows, agg, o.out.c_str());
  } else {
    std::printf("dmd: rank %d on %ld pooled pairs -> %s\n", model.rank,
                pair_rows, o.out.c_str());
  }
  write_text_atomic(o.out, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOpts {
  std::string data;
  std::string out;
  std::string grid = "0:1,0.25:0.75,0.5:0.5,0.75:0.25,1:0";
  std::string ckpt_template;
  TrainConfig config;
};

void run_sweep(SweepOpts& o) {
  const TrajectorySet set = load_dataset(o.data);
  const auto grid = parse_grid(o.grid);
  if (o.config.workers <= 0) o.config.workers = env_workers();

  std::string csv = "alpha,beta,rmse\n";
  for (const auto& [alpha, beta] : grid) {
    TrainConfig config = o.config;
    config.alpha = alpha;
    config.beta = beta;
    config.validate();
    const InrModel model = train_all(set, config);
    const HeldOut held = evaluate_heldout(model, set, 0);
    csv += fmt_g17(alpha) + "," + fmt_g17(beta) + "," +
           fmt_g17(held.aggregate) + "\n";
    std::printf("sweep: alpha %.3g beta %.3g -> rmse %.6g\n", alpha, beta,
                held.aggregate);
    if (!o.ckpt_template.empty()) {
      std::string path = o.ckpt_template;
      const std::string tag =
          "a" + fmt_g17(alpha).substr(0, 6) + "_b" + fmt_g17(beta).substr(0, 6);
      const size_t slot = path.find("{}");
      if (slot == std::string::npos)
        throw Error("sweep: --ckpt-template needs a {} placeholder");
      path.replace(slot, 2, tag);
      save_checkpoint(path, Checkpoint{model, config});
    }
  }
  write_text_atomic(o.out, csv);
  std::printf("sweep: %zu rows -> %s\n", grid.size(), o.out.c_str());
}

// ---------------------------------------------------------------------------
// export-modes

struct ExportOpts {
  std::string ckpt;
  std::string out;
  std::string spectrum;
  std::vector<double> code;
  std::string spectrum_codes;
};

void run_export(const ExportOpts& o) {
  const Checkpoint ck = load_checkpoint(o.ckpt);
  export_modes(ck.model, o.code, o.out);
  std::printf("export-modes: %d columns -> %s\n", ck.model.mode_count(),
              o.out.c_str());
  if (!o.spectrum.empty()) {
    const std::vector<std::vector<double>> codes =
        o.spectrum_codes.empty()
            ? std::vector<std::vector<double>>{o.code}
            : parse_code_list(o.spectrum_codes);
    export_spectrum(ck.model, codes, o.spectrum);
    std::printf("export-modes: %zu spectrum rows -> %s\n", codes.size(),
                o.spectrum.c_str());
  }
}

// ---------------------------------------------------------------------------
// bench

struct BenchOpts {
  std::string ckpt;
  std::string data;
  int traj = 0;
  int frames = 100;
  int repeats = 9;
  std::uint64_t seed = 1;
};

void run_bench(const BenchOpts& o) {
  const Checkpoint ck = load_checkpoint(o.ckpt);
  Trajectory traj;
  if (!o.data.empty()) {
    const TrajectorySet set = load_dataset(o.data);
    check_grid(ck.model, set);
    if (o.traj < 0 || o.traj >= static_cast<int>(set.items.size()))
      throw Error("bench: trajectory index out of range");
    traj = set.items[o.traj];
  } else {
    // synthetic Gaussian frame at the center of the training code range
    long cells = 1;
    for (int d : ck.model.dims) cells *= d;
    traj.frames = RealMat(1, static_cast<int>(cells));
    Rng rng(o.seed);
    for (double& v : traj.frames.v) v = rng.normal();
    traj.dt = ck.model.dt;
    traj.code = ck.model.code_map.offset;
  }
  const double ms = time_per_frame(ck.model, traj, o.frames, o.repeats);
  std::printf("bench: %.4g ms/frame (%d cells, %d modes, %d frames, %d repeats, kernels %s)\n",
              ms, traj.frames.cols, ck.model.mode_count(), o.frames, o.repeats,
              kernels::isa_name(kernels::active_isa()));
}

void add_train_flags(CLI::App* cmd, TrainConfig& c) {
  cmd->add_option("--modes", c.pairs, "conjugate mode pairs P");
  cmd->add_option("--alpha", c.alpha, "short-horizon loss weight");
  cmd->add_option("--beta", c.beta, "long-horizon loss weight");
  cmd->add_option("--epochs", c.epochs_per_stage, "epochs per stage");
  cmd->add_option("--seed", c.seed, "training seed");
  cmd->add_option("--batch", c.batch, "trajectories per gradient step");
  cmd->add_option("--lr-phi", c.lr_phi, "mode net learning rate");
  cmd->add_option("--lr-lambda", c.lr_lambda, "rate net learning rate");
  cmd->add_option("--horizons", c.long_horizons, "long-loss horizon count");
  cmd->add_option("--train-count", c.train_count,
                  "trajectories used for training (-1 = dataset split)");
  cmd->add_option("--phi-width", c.phi_width, "mode net hidden width");
  cmd->add_option("--phi-depth", c.phi_depth, "mode net hidden layers");
  cmd->add_option("--lam-width", c.lam_width, "rate net hidden width");
  cmd->add_option("--lam-depth", c.lam_depth, "rate net hidden layers");
  cmd->add_option("--omega0", c.omega0, "sine layer frequency scale");
  cmd->add_option("--penalty-weight", c.penalty_weight,
                  "orthogonality penalty weight (penalty-orth only)");
  cmd->add_option("--workers", c.workers,
                  "worker threads (default NDMD_WORKERS or 1)");
  cmd->add_flag("--autoregressive", c.autoregressive_short,
                "chain one-step predictions in the short loss");
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"conditioned implicit modal operator toolkit", "ndmd"};
  app.require_subcommand(1);

  auto gen = std::make_shared<GenerateOpts>();
  CLI::App* cg = app.add_subcommand("generate", "synthesize a benchmark dataset");
  cg->add_option("--benchmark", gen->benchmark, "benchmark family")
      ->required()
      ->check(CLI::IsMember({"burgers", "double-shear", "karman", "airfoil"}));
  cg->add_option("--preset", gen->preset, "size preset")
      ->check(CLI::IsMember({"paper", "desk", "narrow"}));
  cg->add_option("--out", gen->out, "output dataset path")->required();
  cg->add_option("--codes", gen->codes, "override trajectory count");
  cg->add_option("--frames", gen->frames, "override stored frames");
  cg->add_option("--seed", gen->seed, "override generator seed");
  cg->add_option("--workers", gen->workers,
                 "worker threads (default NDMD_WORKERS or 1)");
  cg->callback([gen] { run_generate(*gen); });

  auto tr = std::make_shared<TrainOpts>();
  tr->config.workers = 0;  // 0 = fall back to NDMD_WORKERS
  CLI::App* ct = app.add_subcommand("train", "fit the factorized modal operator");
  ct->add_option("--data", tr->data, "training dataset")->required();
  ct->add_option("--out", tr->out, "output checkpoint path")->required();
  ct->add_option("--ablate", tr->ablate, "ablation variant")
      ->check(CLI::IsMember(
          {"none", "no-deflation", "no-conj", "no-long", "penalty-orth"}));
  add_train_flags(ct, tr->config);
  ct->callback([tr] { run_train(*tr); });

  auto ro = std::make_shared<RolloutOpts>();
  CLI::App* cr = app.add_subcommand(
      "rollout", "predict forward from a stored frame and save the frames");
  cr->add_option("--ckpt", ro->ckpt, "checkpoint path")->required();
  cr->add_option("--data", ro->data, "dataset holding the initial frame")
      ->required();
  cr->add_option("--code", ro->code,
                 "conditioning code (nearest stored code serves the frame)");
  cr->add_option("--traj", ro->traj, "trajectory index instead of --code");
  cr->add_option("--init-frame", ro->init_frame, "frame to start from");
  cr->add_option("--horizon", ro->horizon, "steps to predict")->required();
  cr->add_option("--out", ro->out, "output dataset path")->required();
  cr->callback([ro] { run_rollout(*ro); });

  auto ev = std::make_shared<EvalOpts>();
  CLI::App* ce = app.add_subcommand("eval", "score held-out trajectories");
  ce->add_option("--ckpt", ev->ckpt, "checkpoint path")->required();
  ce->add_option("--data", ev->data, "dataset with a held-out split")
      ->required();
  ce->add_option("--report", ev->report, "output report path")->required();
  ce->add_option("--horizon", ev->horizon, "cap predicted steps (0 = all)");
  ce->add_option("--repeats", ev->repeats, "timing repeats");
  ce->callback([ev] { run_eval(*ev); });

  auto dm = std::make_shared<DmdOpts>();
  CLI::App* cd = app.add_subcommand(
      "dmd", "pooled dynamic mode decomposition baseline");
  cd->add_option("--data", dm->data, "dataset")->required();
  cd->add_option("--rank", dm->rank, "modes to keep")->required();
  cd->add_option("--out", dm->out, "output model path (json)")->required();
  cd->callback([dm] { run_dmd(*dm); });

  auto sw = std::make_shared<SweepOpts>();
  sw->config.workers = 0;
  CLI::App* cs = app.add_subcommand(
      "sweep", "train across loss weights and tabulate held-out error");
  cs->add_option("--data", sw->data, "training dataset")->required();
  cs->add_option("--out", sw->out, "output csv path")->required();
  cs->add_option("--grid", sw->grid, "alpha:beta list");
  cs->add_option("--ckpt-template", sw->ckpt_template,
                 "checkpoint path with {} replaced per weight pair");
  add_train_flags(cs, sw->config);
  cs->callback([sw] { run_sweep(*sw); });

  auto ex = std::make_shared<ExportOpts>();
  CLI::App* cx = app.add_subcommand("export-modes",
                                    "write mode and spectrum tables as csv");
  cx->add_option("--ckpt", ex->ckpt, "checkpoint path")->required();
  cx->add_option("--code", ex->code, "conditioning code")->required();
  cx->add_option("--out", ex->out, "modes csv path")->required();
  cx->add_option("--spectrum", ex->spectrum, "spectrum csv path");
  cx->add_option("--spectrum-codes", ex->spectrum_codes,
                 "semicolon-separated codes for the spectrum table");
  cx->callback([ex] { run_export(*ex); });

  auto be = std::make_shared<BenchOpts>();
  CLI::App* cb = app.add_subcommand("bench", "measure per-frame prediction time");
  cb->add_option("--ckpt", be->ckpt, "checkpoint path")->required();
  cb->add_option("--data", be->data, "optional dataset for a real frame");
  cb->add_option("--traj", be->traj, "trajectory index within --data");
  cb->add_option("--frames", be->frames, "frames per run");
  cb->add_option("--repeats", be->repeats, "runs to take the median over");
  cb->add_option("--seed", be->seed, "seed for the synthetic frame");
  cb->callback([be] { run_bench(*be); });

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IllConditionedError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NonConvergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 0;
}

}  // namespace ndmd
