#ifndef WALKLINE_CLI_HPP
#define WALKLINE_CLI_HPP

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "walkline/walkline.hpp"
#include "walkline/run_config.hpp"

namespace walkline::cli {

enum ExitCode : int { kSuccess = 0, kVerifyFailed = 1, kInfeasible = 2, kIoError = 3 };

class ConfigError : public Error {
 public:
  using Error::Error;
};

// --- presets ---------------------------------------------------------------------------

struct PresetInfo {
  std::string name;
  std::vector<std::string> params;                ///< positional order for name(a,b,...)
  std::map<std::string, std::string> defaults;
  bool walk_side;                                 ///< defined by a kernel rather than by (V, W)
};

inline const std::vector<PresetInfo>& presets() {
  static const std::vector<PresetInfo> all{
      {"power-tail", {"delta", "gamma"}, {{"gamma", "0"}}, true},
      {"log-potential", {"delta", "wall", "hold"}, {{"wall", "REFLECT"}, {"hold", "0.5"}}, true},
      {"geometric-step", {"J", "delta", "range"}, {{"delta", "2"}, {"range", "4"}}, true},
      {"square-well", {"v0"}, {}, false},
      {"double-step", {"v0", "v1"}, {}, false},
  };
  return all;
}

inline const PresetInfo& preset_info(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  throw ConfigError("unknown preset '" + name + "'");
}

/// "name" or "name(a,b,...)" with positional parameters.
inline PresetSpec parse_preset_text(const std::string& text) {
  PresetSpec spec;
  const auto open = text.find('(');
  if (open == std::string::npos) {
    spec.name = text;
    preset_info(spec.name);
    return spec;
  }
  if (text.back() != ')') throw ConfigError("malformed preset '" + text + "'");
  spec.name = text.substr(0, open);
  const PresetInfo& info = preset_info(spec.name);
  std::stringstream args(text.substr(open + 1, text.size() - open - 2));
  std::string item;
  std::size_t i = 0;
  while (std::getline(args, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (i >= info.params.size()) throw ConfigError("too many arguments for preset " + spec.name);
    spec.params[info.params[i++]] = item;
  }
  return spec;
}

inline std::string param_text(const PresetSpec& spec, const std::string& key) {
  if (auto it = spec.params.find(key); it != spec.params.end()) return it->second;
  const PresetInfo& info = preset_info(spec.name);
  if (auto it = info.defaults.find(key); it != info.defaults.end()) return it->second;
  throw ConfigError("preset " + spec.name + " needs parameter '" + key + "'");
}

inline double param(const PresetSpec& spec, const std::string& key) {
  try {
    return parse_real(param_text(spec, key));
  } catch (const IoError&) {
    throw ConfigError("parameter '" + key + "' of preset " + spec.name + " is not a number");
  }
}

struct BuiltModel {
  std::optional<WalkKernel> kernel;
  std::optional<SosModel> sos;
  std::optional<EdgeCoupling> phi;
};

inline BuiltModel build_preset(const PresetSpec& spec, std::size_t cutoff) {
  if (spec.name.empty()) throw ConfigError("no preset given (use --preset)");
  BuiltModel b;
  if (spec.name == "power-tail") {
    b.phi = power_tail_coupling(param(spec, "delta"), param(spec, "gamma"), cutoff);
    b.kernel = kernel_from_phi(*b.phi);
    b.sos = sos_from_phi(*b.phi);
  } else if (spec.name == "log-potential") {
    const auto wall = parse_wall_mode(param_text(spec, "wall"));
    if (!wall) throw ConfigError("wall must be REFLECT or METROPOLIS_WALL");
    const auto U = log_potential(param(spec, "delta"), cutoff);
    b.kernel = *wall == WallMode::reflect ? metropolis_reflect_kernel(U, param(spec, "hold"))
                                         : metropolis_full_kernel(U, param(spec, "hold"));
    b.sos = sos_from_metropolis(U, *wall, param(spec, "hold"));
  } else if (spec.name == "geometric-step") {
    const double range = param(spec, "range");
    if (!(range >= 1.0) || range != std::floor(range)) throw ConfigError("range must be a positive integer");
    const StepDistribution base = geometric_steps(param(spec, "J"), static_cast<std::size_t>(range));
    const auto U = log_potential(param(spec, "delta"), cutoff);
    b.kernel = general_metropolis_kernel(base, U);
    b.sos = sos_from_general(base, U);
  } else if (spec.name == "square-well") {
    b.sos = square_well_model(param(spec, "v0"), cutoff);
  } else if (spec.name == "double-step") {
    b.sos = double_step_model(param(spec, "v0"), param(spec, "v1"), cutoff);
  } else {
    preset_info(spec.name);
  }
  return b;
}

// --- command context -------------------------------------------------------------------

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;
  std::shared_ptr<spdlog::logger> log;

  void emit(const std::string& text) const {
    if (cfg.out.empty() || cfg.out == "-") {
      out << text;
      out.flush();
    } else {
      write_text_file(cfg.out, text);
      log->info("wrote {}", cfg.out);
    }
  }
};

inline std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("walkline", sink);
  log->set_pattern("[%l] %v");
  const char* env = std::getenv("WALKLINE_LOG");
  log->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
  return log;
}


// --- translate -------------------------------------------------------------------------

inline int cmd_rw2sos(const Context& ctx) {
  const std::size_t M = ctx.cfg.cutoff.value_or(200);
  json doc{{"direction", "rw2sos"}};
  if (!ctx.cfg.input.empty()) {
    const WalkKernel k = kernel_from_json(read_json_file(ctx.cfg.input));
    const auto violations = validate_kernel(k);
    if (!violations.empty()) throw ConfigError("input kernel is invalid: " + violations.front().message);
    SosModel m;
    if (k.structure() == Structure::nearest_neighbor) {
      const EdgeCoupling phi = phi_from_kernel(k);
      m = sos_from_phi(phi);
      doc["phi"] = phi.phi;
    } else {
      m = w_from_detailed_balance(k);
    }
    doc["kernel"] = kernel_to_json(k);
    doc["sos"] = sos_to_json(m);
  } else {
    const BuiltModel b = build_preset(ctx.cfg.preset, M);
    if (!b.kernel) throw ConfigError("preset " + ctx.cfg.preset.name + " is not a random-walk preset; use sos2rw");
    doc["preset"] = ctx.cfg.preset.name;
    doc["kernel"] = kernel_to_json(*b.kernel);
    doc["sos"] = sos_to_json(*b.sos);
    if (b.phi) doc["phi"] = b.phi->phi;
  }
  ctx.emit(doc.dump(2) + "\n");
  return kSuccess;
}

inline SosModel sos_input(const Context& ctx, std::size_t M) {
  if (!ctx.cfg.input.empty()) return sos_from_json(read_json_file(ctx.cfg.input));
  const BuiltModel b = build_preset(ctx.cfg.preset, M);
  return *b.sos;
}

inline int cmd_sos2rw(const Context& ctx) {
  const std::size_t M = ctx.cfg.cutoff.value_or(200);
  const SosModel m = sos_input(ctx, M);
  json doc{{"direction", "sos2rw"}, {"lambda_strategy", ctx.cfg.lambda}};
  if (!ctx.cfg.preset.name.empty() && ctx.cfg.input.empty()) doc["preset"] = ctx.cfg.preset.name;
  doc["sos"] = sos_to_json(m);

  if (ctx.cfg.lambda == "auto") {
    const GroundState g = perron_ground_state(m);
    const WalkKernel k = kernel_from_sos(m, g);
    ctx.log->info("rho = {:.17g}, residual {:.3g}", g.rho, g.residual);
    doc["rho"] = g.rho;
    doc["lambda"] = std::log(g.rho);
    doc["U"] = g.U;
    doc["ground_state_residual"] = g.residual;
    doc["ground_state_scaled_residual"] = g.scaled_residual;
    if (ctx.cfg.input.empty()) {
      std::vector<std::size_t> cutoffs;
      for (std::size_t c : {M / 4, M / 2, M})
        if (c >= 2 && (cutoffs.empty() || c > cutoffs.back())) cutoffs.push_back(c);
      const RhoTrend trend = rho_trend([&](std::size_t c) { return *build_preset(ctx.cfg.preset, c).sos; }, cutoffs);
      doc["rho_trend"] = {{"M", trend.cutoffs}, {"rho", trend.rho}};
    }
    doc["kernel"] = kernel_to_json(k);
  } else {
    if (m.W.bandwidth() != 1) throw ConfigError("continued-fraction inversion needs a nearest-neighbour SOS model");
    for (std::size_t x = 0; x < m.states(); ++x) {
      if (!m.W(x, x).is_forbidden()) throw ConfigError("continued-fraction inversion needs W(X,X) forbidden");
      if (x + 1 < m.states() && (m.W(x, x + 1).is_forbidden() || m.W(x, x + 1).value() + m.step_energy != kLn2))
        throw ConfigError("continued-fraction inversion needs W(X,X+1) = ln 2");
    }
    double lambda = 0.0;
    if (ctx.cfg.lambda != "rho1") {
      try {
        lambda = parse_real(ctx.cfg.lambda);
      } catch (const IoError&) {
        throw ConfigError("--lambda must be auto, rho1 or a number");
      }
    }
    const ContinuedFraction cf = continued_fraction_invert(m.V, lambda);
    if (!cf.ok()) {
      ctx.err << "positivity failure: a_X <= 0 at X=" << *cf.failed_at << " (lambda=" << format_real(lambda) << ")\n";
      throw PositivityFailure(*cf.failed_at);
    }
    const EdgeCoupling phi = cf.coupling();
    doc["lambda"] = lambda;
    doc["rho"] = std::exp(lambda);
    doc["a"] = cf.a;
    doc["phi"] = phi.phi;
    doc["kernel"] = kernel_to_json(kernel_from_phi(phi));
  }
  ctx.emit(doc.dump(2) + "\n");
  return kSuccess;
}

// --- sampling and marginals ------------------------------------------------------------

inline TransferMatrix bridge_source(const Context& ctx, std::size_t M) {
  if (!ctx.cfg.input.empty()) {
    const json j = read_json_file(ctx.cfg.input);
    if (j.contains("rows")) return TransferMatrix(kernel_from_json(j));
    return TransferMatrix(sos_from_json(j));
  }
  const BuiltModel b = build_preset(ctx.cfg.preset, M);
  return b.kernel ? TransferMatrix(*b.kernel) : TransferMatrix(*b.sos);
}

inline int cmd_sample(const Context& ctx) {
  const std::size_t N = ctx.cfg.length.value_or(8);
  const std::size_t M = ctx.cfg.cutoff.value_or(std::max<std::size_t>(N, 2));
  const std::uint64_t seed = ctx.cfg.seed.value_or(42);
  const std::size_t count = ctx.cfg.samples.value_or(1000);
  const BridgeSampler sampler(bridge_source(ctx, M), N);
  Rng rng(seed);
  std::string text = "n,x_n,sample_id\n";
  text.reserve(text.size() + count * (N + 1) * 12);
  for (std::size_t s = 0; s < count; ++s) {
    const BridgePath p = sampler.sample(rng);
    const std::string id = std::to_string(s);
    for (std::size_t n = 0; n <= N; ++n) {
      text += std::to_string(n);
      text += ',';
      text += std::to_string(p.x[n]);
      text += ',';
      text += id;
      text += '\n';
    }
  }
  ctx.log->info("sampled {} bridges of length {} with seed {}", count, N, seed);
  ctx.emit(text);
  return kSuccess;
}

inline int cmd_marginal(const Context& ctx) {
  const std::size_t N = ctx.cfg.length.value_or(8);
  const std::size_t n = ctx.cfg.time_index.value_or(N / 2);
  const std::size_t M = ctx.cfg.cutoff.value_or(std::max<std::size_t>(N, 2));
  if (n > N) throw ConfigError("--n must not exceed --N");
  const auto p = height_marginal(bridge_source(ctx, M), N, n);
  std::ostringstream os;
  CsvWriter csv(os);
  csv.header({"x", "probability"});
  for (std::size_t x = 0; x < p.size(); ++x) csv.row({static_cast<double>(x), p[x]});
  ctx.emit(os.str());
  return kSuccess;
}

// --- scans, figures, verification ------------------------------------------------------

inline PresetFamily scan_family(const std::string& name) {
  if (name == "square-well") return PresetFamily::square_well;
  if (name == "double-step") return PresetFamily::double_step;
  if (name == "power-tail") return PresetFamily::power_tail;
  throw ConfigError("scan supports square-well, double-step and power-tail, not '" + name + "'");
}

inline int cmd_scan(const Context& ctx) {
  const PresetFamily family = scan_family(ctx.cfg.preset.name);
  std::vector<std::vector<double>> axes;
  const auto names = parameter_names(family);
  for (const auto& name : names) {
    try {
      axes.push_back(parse_range(param_text(ctx.cfg.preset, name)));
    } catch (const IoError& e) {
      throw ConfigError(std::string("axis ") + name + ": " + e.what());
    }
  }
  ScanOptions opt;
  opt.cutoff = ctx.cfg.cutoff.value_or(opt.cutoff);
  opt.jobs = ctx.cfg.jobs;
  if (!ctx.cfg.lengths.empty()) opt.lengths = ctx.cfg.lengths;
  const auto rows = phase_scan(family, cartesian_grid(axes), opt);

  std::ostringstream os;
  CsvWriter csv(os);
  std::vector<std::string> header = names;
  for (const char* c : {"closed_form_regime", "numeric_regime", "growth_ratio", "agreement"}) header.emplace_back(c);
  csv.header(header);
  for (const auto& r : rows) {
    std::vector<std::string> cells;
    for (double v : r.params) cells.push_back(format_real(v));
    cells.emplace_back(to_string(r.closed_form));
    cells.emplace_back(r.error.empty() ? std::string(to_string(r.numeric)) : "ERROR");
    cells.push_back(r.error.empty() ? format_real(r.growth_ratio) : "nan");
    cells.emplace_back(r.agreement ? "true" : "false");
    csv.row_strings(cells);
    if (!r.error.empty()) ctx.log->warn("row {}: {}", r.index, r.error);
  }
  ctx.emit(os.str());
  return kSuccess;
}

inline int cmd_fig1(const Context& ctx) {
  const std::size_t xmax = ctx.cfg.xmax;
  std::vector<std::vector<double>> columns;
  std::vector<std::string> header{"X"};
  for (double d : ctx.cfg.deltas) {
    // one extra site so that the closing height M lies beyond the emitted range
    columns.push_back(sos_from_phi(power_tail_coupling(d, 0.0, xmax + 1)).V);
    header.push_back("V_" + shortest_real(d));
  }
  std::ostringstream os;
  CsvWriter csv(os);
  csv.header(header);
  for (std::size_t x = 0; x <= xmax; ++x) {
    std::vector<double> row{static_cast<double>(x)};
    for (const auto& c : columns) row.push_back(c[x]);
    csv.row(row);
  }
  ctx.emit(os.str());
  return kSuccess;
}

inline int cmd_verify(const Context& ctx) {
  AcceptanceOptions opt;
  opt.tol = ctx.cfg.tol;
  opt.only = ctx.cfg.only;
  opt.length = ctx.cfg.length;
  if (ctx.cfg.seed) opt.seed = *ctx.cfg.seed;
  if (ctx.cfg.samples) opt.samples = *ctx.cfg.samples;
  opt.inject_fault = ctx.cfg.inject_fault;
  opt.jobs = ctx.cfg.jobs;
  std::vector<CriterionResult> results;
  try {
    results = run_acceptance(opt, [&](const CriterionResult& r) { ctx.log->info("{} done", r.name); });
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::ostringstream os;
  std::size_t passed = 0;
  for (const auto& r : results) {
    os << format_result_line(r) << '\n';
    passed += r.passed ? 1 : 0;
  }
  os << passed << "/" << results.size() << " criteria passed\n";
  ctx.emit(os.str());
  return passed == results.size() ? kSuccess : kVerifyFailed;
}

// --- argument parsing ------------------------------------------------------------------

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random walks on the half-line and SOS bridges: translations, exact bridge laws, wetting scans"};
  app.require_subcommand(0, 1);  // a --config file may name the command
  app.set_help_all_flag("--help-all", "Expand all help");

  std::string config_path, preset_text, lambda, out_path, input, wall, fault, n_list;
  std::size_t cutoff = 0, length = 0, time_index = 0, samples = 0, jobs = 1, xmax = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> named;
  std::vector<double> deltas;
  std::vector<std::string> only;
  bool dump = false;

  std::vector<std::pair<std::string, CLI::Option*>> param_opts;
  std::map<std::string, double> tol_values;
  std::vector<std::pair<const ToleranceField*, CLI::Option*>> tol_opts;

  auto* o_config = app.add_option("--config", config_path, "Load a RunConfig JSON file; flags override it");
  auto* o_dump = app.add_flag("--dump-config", dump, "Print the resolved configuration as JSON and exit");
  auto* o_preset = app.add_option("--preset", preset_text, "Preset name or name(args...)");
  auto* o_input = app.add_option("--input", input, "Model JSON file used instead of a preset");
  auto* o_M = app.add_option("--M", cutoff, "Height cutoff M");
  auto* o_seed = app.add_option("--seed", seed, "RNG seed");
  auto* o_out = app.add_option("--out", out_path, "Output file (default: stdout)");
  auto* o_jobs = app.add_option("--jobs", jobs, "Worker threads for scans")->check(CLI::PositiveNumber);
  auto* o_N = app.add_option("--N", length, "Bridge length");
  auto* o_Nlist = app.add_option("--N-list", n_list, "Comma-separated increasing even bridge lengths");
  auto* o_n = app.add_option("--n", time_index, "Time index of the marginal");
  auto* o_samples = app.add_option("--samples", samples, "Number of sampled bridges");
  auto* o_lambda = app.add_option("--lambda", lambda, "auto | rho1 | <float>");
  auto* o_xmax = app.add_option("--xmax", xmax, "Largest X emitted by fig1");
  auto* o_deltas = app.add_option("--deltas", deltas, "Tail exponents emitted by fig1")->delimiter(',');
  auto* o_only = app.add_option("--only", only, "Run only these acceptance criteria")->delimiter(',');
  auto* o_fault = app.add_option("--inject-fault", fault, "Mutation for the verify suite (sign-v)");
  for (const char* p : {"delta", "gamma", "v0", "v1", "J", "range", "wall", "hold"})
    param_opts.emplace_back(p, app.add_option(std::string("--") + p, named[p], std::string("Preset parameter ") + p));
  for (const auto& f : tolerance_fields())
    tol_opts.emplace_back(&f, app.add_option(std::string("--tol-") + f.name, tol_values[f.name],
                                             std::string("Tolerance override: ") + f.name));

  auto* translate = app.add_subcommand("translate", "Translate between a walk and an SOS model")->fallthrough();
  translate->require_subcommand(1);
  auto* rw2sos = translate->add_subcommand("rw2sos", "Random walk to SOS energies")->fallthrough();
  translate->add_subcommand("sos2rw", "SOS model to a random walk")->fallthrough();
  std::vector<std::pair<std::string, CLI::App*>> commands;
  for (const char* name : {"sample", "scan", "verify", "fig1", "marginal"}) {
    static const std::map<std::string, std::string> help{
        {"sample", "Exact bridge samples as path CSV"},
        {"scan", "Phase scan over a parameter grid"},
        {"verify", "Run the acceptance suite"},
        {"fig1", "Potential curves V(X) for several tail exponents"},
        {"marginal", "Exact height marginal of a bridge"}};
    commands.emplace_back(name, app.add_subcommand(name, help.at(name))->fallthrough());
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kIoError;
  }

  auto log = make_logger(err);
  try {
    RunConfig cfg;
    if (o_config->count()) cfg = run_config_from_json(read_json_file(config_path));
    if (translate->parsed()) {
      cfg.command = "translate";
      cfg.direction = rw2sos->parsed() ? "rw2sos" : "sos2rw";
    }
    for (const auto& [name, sub] : commands)
      if (sub->parsed()) {
        cfg.command = name;
        cfg.direction.clear();
      }
    if (o_preset->count()) cfg.preset = parse_preset_text(preset_text);
    for (const auto& [name, opt] : param_opts)
      if (opt->count()) cfg.preset.params[name] = named[name];
    if (o_input->count()) cfg.input = input;
    if (o_M->count()) cfg.cutoff = cutoff;
    if (o_seed->count()) cfg.seed = seed;
    if (o_out->count()) cfg.out = out_path;
    if (o_jobs->count()) cfg.jobs = jobs;
    if (o_N->count()) cfg.length = length;
    if (o_Nlist->count()) {
      cfg.lengths.clear();
      std::stringstream ss(n_list);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const double v = parse_real(item);
        if (!(v > 0.0) || v != std::floor(v)) throw ConfigError("--N-list entries must be positive integers");
        cfg.lengths.push_back(static_cast<std::size_t>(v));
      }
    }
    if (o_n->count()) cfg.time_index = time_index;
    if (o_samples->count()) cfg.samples = samples;
    if (o_lambda->count()) cfg.lambda = lambda;
    if (o_xmax->count()) cfg.xmax = xmax;
    if (o_deltas->count()) cfg.deltas = deltas;
    if (o_only->count()) cfg.only = only;
    if (o_fault->count()) cfg.inject_fault = fault;
    for (const auto& [field, opt] : tol_opts)
      if (opt->count()) cfg.tol.*(field->member) = tol_values[field->name];

    if (o_dump->count() && dump) {
      out << to_json(cfg).dump(2) << '\n';
      return kSuccess;
    }
    const Context ctx{cfg, out, err, log};
    log->debug("config: {}", to_json(cfg).dump());
    if (cfg.command == "translate") return cfg.direction == "rw2sos" ? cmd_rw2sos(ctx) : cmd_sos2rw(ctx);
    if (cfg.command == "sample") return cmd_sample(ctx);
    if (cfg.command == "scan") return cmd_scan(ctx);
    if (cfg.command == "verify") return cmd_verify(ctx);
    if (cfg.command == "fig1") return cmd_fig1(ctx);
    if (cfg.command == "marginal") return cmd_marginal(ctx);
    if (cfg.command.empty()) throw ConfigError("no command given (see --help)");
    throw ConfigError("unknown command '" + cfg.command + "'");
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args), out, err);
}

}  // namespace walkline::cli

#endif  // WALKLINE_CLI_HPP
