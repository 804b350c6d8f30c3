// rsp_cli: figure-data pipelines for the random singlet phase toolkit.
//
//   rsp_cli <command> [--config file.json] [--seed N] [--workers N] [--out dir]
//
// Exit codes: 0 success, 2 configuration or I/O error, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fftw3.h>
#include <json.hpp>

#include "rsp/rsp.hpp"

using nlohmann::json;
using namespace rsp;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kManifestVersion = 1;

/// One config section. Every key read is recorded with the value actually
/// used, so the manifest holds the full effective configuration.
class Section {
 public:
  Section(std::string name, json given) : name_(std::move(name)), given_(std::move(given)) {
    if (given_.is_null()) given_ = json::object();
    if (!given_.is_object()) throw InvalidParameter("config section '" + name_ + "' must be an object");
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    T v = fallback;
    if (given_.contains(key)) {
      try {
        v = given_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw InvalidParameter("config key '" + name_ + "." + key + "': " + e.what());
      }
    }
    used_[key] = v;
    return v;
  }

  bool has(const std::string& key) const { return given_.contains(key); }

  void finish() const {
    for (const auto& [key, value] : given_.items())
      if (!used_.contains(key)) throw InvalidParameter("unknown config key '" + name_ + "." + key + "'");
  }

  const json& effective() const { return used_; }

 private:
  std::string name_;
  json given_;
  json used_ = json::object();
};

struct Run {
  std::string command;
  fs::path out;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
  json outputs = json::array();
  json summary = json::object();

  void write(const std::string& name, const CsvTable& table) {
    table.write(out / name);
    outputs.push_back(name);
  }

  void manifest(const Section& s) const {
    json m;
    m["manifest_version"] = kManifestVersion;
    m["command"] = command;
    m["seed"] = seed;
    m["workers"] = workers;
    m["config"] = s.effective();
    m["outputs"] = outputs;
    m["summary"] = summary;
    auto& v = m["versions"];
    v["rsp"] = kVersion;
    v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    v["fftw"] = std::string(fftw_version);
    v["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                         std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    v["cli11"] = std::string(CLI11_VERSION);
    write_json(out / "manifest.json", m);
  }
};

LatticeParams lattice_from(Section& s, std::size_t sites, std::size_t atoms, std::uint64_t seed) {
  LatticeParams p;
  p.n_sites = s.get<std::size_t>("n_sites", sites);
  p.interaction_range = s.get<double>("interaction_range", 5.0);
  p.j0 = s.get<double>("j0", 1.0);
  if (s.has("filling_probability")) {
    if (s.has("atoms")) throw InvalidParameter("give either atoms or filling_probability, not both");
    p.filling = Bernoulli{s.get<double>("filling_probability", 0.3)};
  } else {
    p.filling = FixedCount{s.get<std::size_t>("atoms", atoms)};
  }
  p.seed = seed;
  p.validate();
  return p;
}

FlowRun flow_from(Section& s, std::size_t n_max_default) {
  FlowRun r;
  r.p_fill = s.get<double>("p_fill", r.p_fill);
  r.lm0 = s.get<double>("lm0", r.lm0);
  r.lm_final = s.get<double>("lm_final", r.lm_final);
  r.record_every = s.get<std::size_t>("record_every", r.record_every);
  r.n_max = s.get<std::size_t>("n_max", n_max_default);
  r.settings.lambda_max = s.get<double>("lambda_max", r.settings.lambda_max);
  r.settings.n_lambda = s.get<std::size_t>("n_lambda", r.settings.n_lambda);
  r.settings.dlnlm = s.get<double>("dlnlm", r.settings.dlnlm);
  const auto scheme = s.get<std::string>("scheme", "characteristics");
  if (scheme == "characteristics")
    r.settings.scheme = AdvectionScheme::SemiLagrangian;
  else if (scheme == "upwind")
    r.settings.scheme = AdvectionScheme::Upwind;
  else
    throw InvalidParameter("flow scheme must be 'characteristics' or 'upwind', got '" + scheme + "'");
  if (!(r.lm_final > r.lm0)) throw InvalidParameter("lm_final must exceed lm0");
  if (r.record_every == 0) throw InvalidParameter("record_every must be positive");
  r.settings.validate();
  return r;
}

CsvTable survival_table(const std::vector<double>& x, const std::vector<double>& y) {
  CsvTable t({"lm_over_l", "survival"});
  for (std::size_t k = 0; k < x.size(); ++k) t.add_row({x[k], y[k]});
  return t;
}

std::vector<std::string> nesting_header(std::size_t n_max) {
  std::vector<std::string> h{"lm_over_l"};
  for (std::size_t n = 0; n <= n_max; ++n) h.push_back("f" + std::to_string(n));
  return h;
}

// ---- commands -----------------------------------------------------------

void cmd_sample(Run& run, Section& s) {
  const auto lp = lattice_from(s, 100, 12, run.seed);
  const auto count = s.get<std::size_t>("realizations", 1);
  if (count == 0) throw InvalidParameter("realizations must be positive");
  s.finish();
  CsvTable t({"realization", "atom", "site"});
  std::size_t atoms = 0;
  for (std::size_t k = 0; k < count; ++k) {
    auto rng = realization_rng(run.seed, k);
    const auto chain = sample_chain(lp, rng);
    for (std::size_t a = 0; a < chain.size(); ++a)
      t.add_row({std::uint64_t{k}, std::uint64_t{a}, std::int64_t{chain.positions[a]}});
    atoms += chain.size();
  }
  run.write("chains.csv", t);
  run.summary["atoms"] = atoms;
}

McParams mc_from(Run& run, Section& s) {
  McParams p;
  p.lattice = lattice_from(s, 100, 30, run.seed);
  p.realizations = s.get<std::size_t>("realizations", p.realizations);
  p.lm_max = s.get<double>("lm_max", p.lm_max);
  p.points = s.get<std::size_t>("points", p.points);
  p.n_max = s.get<std::size_t>("n_max", p.n_max);
  p.bin_width = s.get<double>("bin_width", p.bin_width);
  p.workers = run.workers;
  s.finish();
  p.validate();
  return p;
}

void cmd_rsrg(Run& run, Section& s) {
  const auto p = mc_from(run, s);
  const auto c = rsrg_ensemble(p);
  run.write("rsrg_survival.csv", survival_table(c.lm_over_l, c.rg_survival));
  CsvTable nest(nesting_header(p.n_max));
  for (std::size_t b = 0; b < c.bin_centers.size(); ++b) {
    std::vector<CsvCell> row{c.bin_centers[b]};
    for (double f : c.nesting_fractions(b)) row.emplace_back(f);
    nest.add_row(row);
  }
  run.write("rsrg_nesting.csv", nest);
  run.summary = {{"realizations", c.realizations},
                 {"mean_atoms", c.mean_atoms},
                 {"survival_at_lm_max", c.rg_survival.back()}};
}

void cmd_norg(Run& run, Section& s) {
  const auto p = mc_from(run, s);
  const auto c = rsrg_ensemble(p);
  run.write("norg_survival.csv", survival_table(c.lm_over_l, c.norg_survival));
  run.summary = {{"realizations", c.realizations},
                 {"mean_atoms", c.mean_atoms},
                 {"asymptotic_unpaired", c.norg_survival.back()}};
}

void write_flow_diagnostics(Run& run, const std::string& name, const FlowHistory& h) {
  CsvTable t({"lm_over_l", "q0", "normalization"});
  double drift = 0.0;
  for (const auto& x : h) {
    t.add_row({x.lm_over_l, x.q0, x.normalization});
    drift = std::max(drift, std::abs(x.normalization - 1.0));
  }
  run.write(name, t);
  run.summary["normalization_drift"] = drift;
}

void cmd_flow(Run& run, Section& s) {
  const auto r = flow_from(s, 8);
  s.finish();
  const auto h = solve_flow(r);
  const auto c = unpaired_fraction(h);
  run.write("flow_survival.csv", survival_table(c.lm_over_l, c.survival));
  write_flow_diagnostics(run, "flow_diagnostics.csv", h);
  run.summary["final_survival"] = c.survival.back();
}

void cmd_jointflow(Run& run, Section& s) {
  const auto r = flow_from(s, 8);
  s.finish();
  const auto h = solve_joint_flow(r);
  const auto c = unpaired_fraction(h);
  const auto u = unnested_unpaired_fraction(h);
  run.write("jointflow_survival.csv", survival_table(c.lm_over_l, c.survival));
  run.write("jointflow_norg_survival.csv", survival_table(u.lm_over_l, u.survival));
  CsvTable nest(nesting_header(r.n_max));
  for (const auto& x : h) {
    std::vector<CsvCell> row{x.lm_over_l};
    for (double f : x.fractions) row.emplace_back(f);
    nest.add_row(row);
  }
  run.write("jointflow_nesting.csv", nest);
  write_flow_diagnostics(run, "jointflow_diagnostics.csv", h);
  run.summary["final_survival"] = c.survival.back();
  if (r.lm_final >= 10.0) run.summary["no_rg_unpaired"] = no_rg_unpaired(h);
}

std::string join_sites(const AtomChain& c) {
  std::string s;
  for (auto x : c.positions) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

std::string join_pairs(const PairingReport& r) {
  std::string s;
  for (const auto& b : r.bonds) s += (s.empty() ? "" : " ") + std::to_string(b.left) + "-" + std::to_string(b.right);
  return s;
}

void cmd_ed_compare(Run& run, Section& s) {
  const auto lp = lattice_from(s, 27, 8, run.seed);
  const auto configs = s.get<std::size_t>("configs", 500);
  const auto floor = s.get<double>("pairing_floor", kPairingFloor);
  s.finish();
  if (configs == 0) throw InvalidParameter("configs must be positive");
  struct Row {
    AtomChain chain;
    SingletPairing exact;
    PairingReport rg;
    double energy = 0.0;
  };
  const auto rows = parallel_map(configs, run.workers, [&](std::size_t k) {
    auto rng = realization_rng(run.seed, k);
    Row r;
    r.chain = sample_chain(lp, rng);
    const auto gs = ground_state(XYHamiltonian::interacting(r.chain, lp.interaction_range, lp.j0));
    r.energy = gs.energy;
    r.exact = identify_pairs(gs.state, floor);
    r.rg = run_rsrg(r.chain, lp.interaction_range);
    return r;
  });
  CsvTable t({"config", "sites", "energy", "exact_pairs", "rsrg_pairs", "complete", "match", "min_bond_fraction"});
  std::size_t complete = 0, match = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    const bool c = r.exact.complete();
    const bool m = c && same_pairing(r.exact.report, r.rg);
    complete += c;
    match += m;
    const double fmin = r.exact.bond_fraction.empty()
                            ? 0.0
                            : *std::min_element(r.exact.bond_fraction.begin(), r.exact.bond_fraction.end());
    t.add_row({std::uint64_t{k}, join_sites(r.chain), r.energy, join_pairs(r.exact.report), join_pairs(r.rg),
               std::int64_t{c}, std::int64_t{m}, fmin});
  }
  run.write("ed_compare.csv", t);
  run.summary = {{"configs", configs},
                 {"complete_rate", double(complete) / double(configs)},
                 {"match_rate", double(match) / double(configs)}};
}

const char* censoring_name(Censoring c) {
  switch (c) {
    case Censoring::None: return "none";
    case Censoring::NeverBroke: return "never_broke";
    case Censoring::AlwaysBroken: return "always_broken";
    case Censoring::BelowGrid: return "below_grid";
  }
  return "?";
}

void cmd_sweep(Run& run, Section& s) {
  const auto mode = s.get<std::string>("mode", "ensemble");
  const bool pair = mode == "pair";
  if (!pair && mode != "ensemble") throw InvalidParameter("sweep mode must be 'ensemble' or 'pair'");
  const bool full_scale = !pair && s.get<bool>("full_scale", false);

  SweepParams sp;
  sp.epsilon0 = s.get<double>("epsilon0", sp.epsilon0);
  sp.phi0 = s.get<double>("phi0", sp.phi0);
  sp.tolerance = s.get<double>("tolerance", pair ? 1e-6 : 1e-4);
  sp.max_atoms = s.get<std::size_t>("max_atoms", sp.max_atoms);
  const auto grid = log_grid(s.get<double>("omega_min", pair ? 1e-4 : 1e-3), s.get<double>("omega_max", 10.0),
                             s.get<double>("points_per_decade", pair ? 20.0 : 10.0));
  ScanOptions opt;
  opt.baseline_overlap = s.get<double>("baseline_overlap", opt.baseline_overlap);
  opt.require_baseline = s.get<bool>("require_baseline", pair);
  opt.break_threshold = s.get<double>("break_threshold", opt.break_threshold);

  std::vector<AtomChain> chains;
  if (pair) {
    sp.interaction_range = s.get<double>("interaction_range", sp.interaction_range);
    sp.j0 = s.get<double>("j0", sp.j0);
    for (auto d : s.get<std::vector<std::int64_t>>("separations", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10})) {
      if (d <= 0) throw InvalidParameter("separations must be positive");
      chains.push_back(AtomChain{{0, d}});
    }
  } else {
    const auto lp = lattice_from(s, full_scale ? 100 : 60, full_scale ? 12 : 8, run.seed);
    sp.interaction_range = lp.interaction_range;
    sp.j0 = lp.j0;
    const auto count = s.get<std::size_t>("realizations", full_scale ? 1000 : 100);
    for (std::size_t k = 0; k < count; ++k) {
      auto rng = realization_rng(run.seed, k);
      chains.push_back(sample_chain(lp, rng));
    }
  }
  s.finish();
  sp.validate();
  if (chains.empty()) throw InvalidParameter("nothing to sweep");

  const auto scans = parallel_map(chains.size(), run.workers,
                                  [&](std::size_t k) { return bond_break_scan(chains[k], grid, sp, opt); });
  CsvTable t({"seed", "realization", "bond_i", "bond_j", "j_eff", "omega_break", "censored", "baseline_ok"});
  std::vector<SweepRecord> all;
  std::size_t flagged = 0;
  for (std::size_t k = 0; k < scans.size(); ++k) {
    flagged += !scans[k].baseline_ok;
    for (const auto& r : scans[k].records) {
      t.add_row({run.seed, std::uint64_t{k}, std::uint64_t{r.i}, std::uint64_t{r.j}, r.j_eff, r.omega_break,
                 std::string(censoring_name(r.censored)), std::int64_t{scans[k].baseline_ok}});
      all.push_back(r);
    }
  }
  run.write("sweep_records.csv", t);
  run.summary["flagged_baselines"] = flagged;
  run.summary["records"] = all.size();
  // separations 1..10 cover under one decade of J, so the pair mode fits with looser guards
  LzFitOptions guard;
  if (pair) {
    guard.min_records = 5;
    guard.min_decades = 0.5;
  }
  try {
    const auto f = lz_fit(all, guard);
    run.summary["fit"] = {{"slope", f.slope},     {"intercept", f.intercept}, {"spread", f.spread},
                          {"count", f.count},     {"decades", f.decades}};
  } catch (const FitRangeError& e) {
    run.summary["fit"] = nullptr;
    run.summary["fit_error"] = e.what();
    std::cerr << "warning: " << e.what() << '\n';
  }
}

SurvivalCurve curve_from_csv(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open survival curve " + path.string());
  std::ostringstream text;
  text << f.rdbuf();
  const auto rows = parse_csv(text.str());
  if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "lm_over_l" || rows[0][1] != "survival")
    throw IoError(path.string() + ": expected header lm_over_l,survival");
  SurvivalCurve c;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    try {
      c.lm_over_l.push_back(std::stod(rows[k].at(0)));
      c.survival.push_back(std::stod(rows[k].at(1)));
    } catch (const std::exception&) {
      throw IoError(path.string() + ": bad number on line " + std::to_string(k + 1));
    }
  }
  return c;
}

void cmd_fidelity(Run& run, Section& s) {
  FidelityParams p;
  p.cooperativity = s.get<double>("cooperativity", p.cooperativity);
  p.j0 = s.get<double>("j0", p.j0);
  p.p_fill = s.get<double>("p_fill", 0.12);
  p.interaction_range = s.get<double>("interaction_range", p.interaction_range);
  p.threshold = s.get<double>("threshold", p.threshold);
  const auto grid = log_grid(s.get<double>("omega_min", 1e-6), s.get<double>("omega_max", 1.0),
                             s.get<double>("points_per_decade", 50.0));
  const auto from_csv = s.get<std::string>("survival_csv", "");
  FlowRun r;
  if (from_csv.empty()) {
    r.p_fill = p.p_fill;
    r.lm_final = s.get<double>("lm_final", 20.0);
    r.settings.n_lambda = s.get<std::size_t>("n_lambda", r.settings.n_lambda);
    r.settings.dlnlm = s.get<double>("dlnlm", r.settings.dlnlm);
  }
  s.finish();
  p.validate();

  SurvivalCurve curve;
  if (from_csv.empty()) {
    r.settings.validate();
    curve = unpaired_fraction(solve_flow(r));
  } else {
    curve = curve_from_csv(from_csv);
  }
  const auto opt = optimize_f_paired(p, curve, grid);
  CsvTable t({"omega", "p_inc", "f_unpaired", "f_paired"});
  for (const auto& x : opt.table) t.add_row({x.omega, x.p_inc, x.f_unpaired, x.f_paired});
  run.write("fidelity.csv", t);
  run.summary = {{"omega_star", opt.omega_star},
                 {"f_paired_star", opt.f_paired_star},
                 {"p_inc_star", opt.table[opt.index].p_inc},
                 {"f_unpaired_star", opt.table[opt.index].f_unpaired},
                 {"unimodality_violations", opt.unimodality_violations}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"random singlet phase toolkit"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "out";
  std::int64_t seed = -1;
  std::int64_t workers = -1;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"sample", "draw atom chains"},
      {"rsrg", "RSRG Monte Carlo survival and nesting curves"},
      {"norg", "no-RG Monte Carlo survival curve"},
      {"flow", "scalar flow equation"},
      {"jointflow", "flow equation resolved by nesting order"},
      {"ed-compare", "exact ground-state pairing against RSRG"},
      {"sweep", "bond-breaking scans of the adiabatic sweep"},
      {"fidelity", "optimize the paired fraction over the slew rate"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config or a previous manifest")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--workers", workers, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out_dir, "output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  Run run;
  run.command = app.get_subcommands().front()->get_name();
  try {
    json config = json::object();
    if (!config_path.empty()) config = read_json(config_path);
    if (!config.is_object()) throw InvalidParameter("config must be a JSON object");
    const std::string section_key = run.command == "ed-compare" ? "ed" : run.command;
    json section;
    if (config.contains("manifest_version")) {
      if (config.value("command", "") != run.command)
        throw InvalidParameter("manifest was written by '" + config.value("command", "") + "'");
      section = config.at("config");
      run.seed = config.at("seed").get<std::uint64_t>();
      run.workers = config.value("workers", std::size_t{0});
    } else {
      for (const auto& [key, value] : config.items())
        if (key != "seed" && key != "workers" && key != section_key &&
            !std::set<std::string>{"sample", "rsrg", "norg", "flow", "jointflow", "ed", "sweep", "fidelity"}.count(key))
          throw InvalidParameter("unknown config section '" + key + "'");
      run.seed = config.value("seed", std::uint64_t{1});
      run.workers = config.value("workers", std::size_t{0});
      section = config.value(section_key, json::object());
    }
    if (seed >= 0) run.seed = static_cast<std::uint64_t>(seed);
    if (workers >= 0) run.workers = static_cast<std::size_t>(workers);
    run.out = out_dir;

    Section s(section_key, section);
    std::error_code ec;
    fs::create_directories(run.out, ec);
    if (ec) throw IoError("cannot create output directory " + run.out.string() + ": " + ec.message());

    if (run.command == "sample") cmd_sample(run, s);
    else if (run.command == "rsrg") cmd_rsrg(run, s);
    else if (run.command == "norg") cmd_norg(run, s);
    else if (run.command == "flow") cmd_flow(run, s);
    else if (run.command == "jointflow") cmd_jointflow(run, s);
    else if (run.command == "ed-compare") cmd_ed_compare(run, s);
    else if (run.command == "sweep") cmd_sweep(run, s);
    else if (run.command == "fidelity") cmd_fidelity(run, s);
    run.manifest(s);
    std::cout << run.summary.dump(2) << '\n';
    return 0;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
}
