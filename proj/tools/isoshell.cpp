// isoshell: unit-cell analysis of periodic corrugated shells.
//
//   isoshell <subcommand> --config <path> [--out <dir>] [--assert-compatible] [--sweep]
//
// Subcommands: analyze-graph, analyze-surface, analyze-mesh,
// calibrate-family, solve-effective, check-constraint. Configs are JSON
// with "schema": 1 (see docs/config-schema.md); file paths inside a
// config resolve relative to the config file. Every run writes
// report.json (machine readable) and report.txt (human summary) plus
// job-specific CSV plot data into the output directory.
//
// Exit codes: 0 success, 2 validation error, 3 numerical diagnostic.

#include <isoshell/effpde.hpp>
#include <isoshell/json_io.hpp>
#include <isoshell/mesh.hpp>
#include <isoshell/monge.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace isoshell;

namespace {

struct Options {
  std::string config;
  std::string out = "out";
  bool assert_compatible = false;
  bool sweep = false;
};

struct RunResult {
  json report;
  int exit_code = 0;
};

json load_config(const fs::path& path, const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  json cfg;
  try {
    in >> cfg;
  } catch (const std::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!cfg.contains("schema") || cfg.at("schema").get<int>() != 1)
    throw ValidationError("config must declare \"schema\": 1");
  if (!cfg.contains("kind") || cfg.at("kind").get<std::string>() != kind)
    throw ValidationError("config kind does not match subcommand \"" + kind + "\"");
  return cfg;
}

UnitCell cell_from_config(const json& cfg) {
  if (!cfg.contains("cell")) throw ValidationError("config needs a \"cell\" object");
  return cell_from_json(cfg.at("cell"));
}

double rank_tol_from_config(const json& cfg) {
  const double rt = cfg.value("rank_tol", 1e-8);
  if (!(rt > 0) || rt > 1e-4) throw ValidationError("rank_tol must lie in (0, 1e-4]");
  return rt;
}

json strain_json(const EffectiveStrain& E) { return json::array({E.E11, E.E12, E.E22}); }

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json primary_mode_json(const EffectiveStrain& E) {
  json p;
  p["E"] = strain_json(E);
  const auto pr = poisson_ratio(E);
  p["nu"] = pr.nu;
  p["nu_degenerate"] = pr.degenerate;
  const double d = E.det(), tol = 1e-12 * E.norm() * E.norm();
  p["det_sign"] = d > tol ? 1 : (d < -tol ? -1 : 0);
  p["type"] = to_string(classify(E));
  return p;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// analyze-graph

struct GraphSummary {
  GraphKernel kernel;
  IsometrySpace space;
  std::optional<EffectiveStrain> primary;
  Eigen::Matrix3d q_projector = Eigen::Matrix3d::Zero();
};

GraphSummary graph_summary(const Expr& profile, const UnitCell& cell, double rank_tol) {
  GraphSummary s;
  const MongeOperator op(sample(profile, cell));
  s.kernel = periodic_kernel(op, rank_tol);
  s.space = effective_isometry_space(op, rank_tol);
  if (!s.kernel.modes.empty() && !s.kernel.modes[0].silent) s.primary = s.kernel.modes[0].E;
  for (const auto& q : s.space.basis) s.q_projector += q.vec() * q.vec().transpose();
  return s;
}

double summary_delta(const GraphSummary& a, const GraphSummary& b) {
  double d = (a.q_projector - b.q_projector).cwiseAbs().maxCoeff();
  const EffectiveStrain Ea = a.primary.value_or(EffectiveStrain{});
  const EffectiveStrain Eb = b.primary.value_or(EffectiveStrain{});
  d = std::max(d, (Ea.matrix() - Eb.matrix()).cwiseAbs().maxCoeff());
  if (a.primary && b.primary) {
    const auto pa = poisson_ratio(*a.primary), pb = poisson_ratio(*b.primary);
    if (!pa.degenerate && !pb.degenerate) d = std::max(d, std::abs(pa.nu - pb.nu));
  }
  return d;
}

json sweep_graph(const Expr& profile, const UnitCell& cell0, double rank_tol, int cap,
                 const fs::path& outdir, int& exit_code) {
  json levels = json::array();
  std::string csv = "N1,N2,E11,E12,E22,nu,qdim,delta\n";
  std::optional<GraphSummary> prev;
  bool converged = false;
  for (int N1 = cell0.N1, N2 = cell0.N2; N1 <= cap && N2 <= cap; N1 *= 2, N2 *= 2) {
    const UnitCell cell(cell0.L1, cell0.L2, N1, N2);
    GraphSummary s = graph_summary(profile, cell, rank_tol);
    const double delta = prev ? summary_delta(*prev, s) : 0.0;
    const EffectiveStrain E = s.primary.value_or(EffectiveStrain{});
    const auto pr = poisson_ratio(E);
    json lvl;
    lvl["N1"] = N1;
    lvl["N2"] = N2;
    lvl["E"] = strain_json(E);
    lvl["nu"] = pr.nu;
    lvl["qdim"] = s.space.basis.size();
    if (prev) lvl["delta"] = delta;
    levels.push_back(lvl);
    csv += std::to_string(N1) + "," + std::to_string(N2) + "," + json(E.E11).dump() + "," +
           json(E.E12).dump() + "," + json(E.E22).dump() + "," + json(pr.nu).dump() + "," +
           std::to_string(s.space.basis.size()) + "," + (prev ? json(delta).dump() : "") + "\n";
    if (prev && delta <= 1e-8) {
      converged = true;
      break;
    }
    prev = std::move(s);
  }
  write_file(outdir / "sweep.csv", csv);
  json sw;
  sw["levels"] = levels;
  sw["converged"] = converged;
  sw["csv"] = "sweep.csv";
  if (!converged) {
    sw["diagnostic"] = "resolution cap reached before E, nu and the q-basis settled to 1e-8";
    exit_code = 3;
  }
  return sw;
}

RunResult run_analyze_graph(const json& cfg, const Options& opt, const fs::path&,
                            const fs::path& outdir) {
  const Expr profile = Expr::parse(cfg.at("profile").get<std::string>());
  const UnitCell cell = cell_from_config(cfg);
  const double rank_tol = rank_tol_from_config(cfg);

  RunResult res;
  json& rep = res.report;
  rep["schema"] = 1;
  rep["kind"] = "analyze-graph";
  rep["profile"] = profile.str();
  rep["cell"] = to_json(cell);
  rep["rank_tol"] = rank_tol;

  GraphSummary s = graph_summary(profile, cell, rank_tol);
  rep["degenerate"] = s.kernel.degenerate;
  int carriers = 0, silent = 0;
  for (const auto& m : s.kernel.modes) (m.silent ? silent : carriers) += 1;
  rep["kernel"] = {{"dim", s.kernel.modes.size()}, {"carriers", carriers}, {"silent", silent}};
  rep["E_modes"] = json::array();
  for (const auto& m : s.kernel.modes)
    rep["E_modes"].push_back({{"E", strain_json(m.E)}, {"silent", m.silent}});
  rep["all_q_admissible"] = s.space.all_admissible;
  rep["q_basis"] = json::array();
  for (const auto& q : s.space.basis) rep["q_basis"].push_back({q.e, q.f, q.g});
  rep["compat"] = json::array();
  rep["residuals"] = json::array();
  rep["correctors"] = json::array();
  for (size_t i = 0; i < s.space.verification.size(); ++i) {
    const auto& v = s.space.verification[i];
    rep["compat"].push_back(v.compatibility);
    rep["residuals"].push_back(v.residual);
    const std::string name = "corrector_" + std::to_string(i) + ".json";
    write_file(outdir / name, to_json(v.ztilde).dump(2) + "\n");
    rep["correctors"].push_back(name);
  }
  if (s.primary) rep["primary"] = primary_mode_json(*s.primary);

  if (opt.sweep)
    rep["sweep"] =
        sweep_graph(profile, cell, rank_tol, cfg.value("sweep_cap", 64), outdir, res.exit_code);
  return res;
}

// ---------------------------------------------------------------------------
// analyze-surface

RunResult run_analyze_surface(const json& cfg, const Options& opt, const fs::path&,
                              const fs::path& outdir) {
  const UnitCell cell = cell_from_config(cfg);
  const double rank_tol = rank_tol_from_config(cfg);

  auto build = [&](const UnitCell& c) {
    if (cfg.contains("profile"))
      return PeriodicSurface::graph(sample(Expr::parse(cfg.at("profile").get<std::string>()), c));
    auto vec3 = [&](const char* key) {
      const auto& a = cfg.at(key);
      return Eigen::Vector3d(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
    };
    const auto& xt = cfg.at("xtilde");
    VectorField x(sample(Expr::parse(xt.at(0).get<std::string>()), c),
                  sample(Expr::parse(xt.at(1).get<std::string>()), c),
                  sample(Expr::parse(xt.at(2).get<std::string>()), c));
    return PeriodicSurface(vec3("p1"), vec3("p2"), x);
  };

  auto summarize = [&](const UnitCell& c) { return periodic_modes(DarbouxOperator(build(c)), rank_tol); };

  RunResult res;
  json& rep = res.report;
  rep["schema"] = 1;
  rep["kind"] = "analyze-surface";
  rep["cell"] = to_json(cell);
  rep["rank_tol"] = rank_tol;

  SurfaceModes modes = summarize(cell);
  rep["trivial_dim"] = modes.trivial_dim;
  rep["kernel_dim"] = modes.kernel_dim;
  int carriers = 0, silent = 0;
  std::vector<EffectiveStrain> strains;
  rep["modes"] = json::array();
  for (const auto& m : modes.modes) {
    (m.silent ? silent : carriers) += 1;
    if (!m.silent) strains.push_back(m.E);
    rep["modes"].push_back({{"E", strain_json(m.E)},
                            {"p1dot", vec3_json(m.p1dot)},
                            {"p2dot", vec3_json(m.p2dot)},
                            {"silent", m.silent}});
  }
  rep["carriers"] = carriers;
  rep["silent"] = silent;
  rep["q_basis"] = json::array();
  for (const auto& q : isometry_space_from_strains(strains, rank_tol))
    rep["q_basis"].push_back({q.e, q.f, q.g});
  if (!modes.modes.empty() && !modes.modes[0].silent)
    rep["primary"] = primary_mode_json(modes.modes[0].E);

  if (opt.sweep) {
    json levels = json::array();
    const int cap = cfg.value("sweep_cap", 64);
    std::optional<Eigen::Matrix2d> prevE;
    bool converged = false;
    std::string csv = "N1,N2,E11,E12,E22,delta\n";
    for (int N1 = cell.N1, N2 = cell.N2; N1 <= cap && N2 <= cap; N1 *= 2, N2 *= 2) {
      const SurfaceModes m = summarize(UnitCell(cell.L1, cell.L2, N1, N2));
      Eigen::Matrix2d E = Eigen::Matrix2d::Zero();
      if (!m.modes.empty() && !m.modes[0].silent) E = m.modes[0].E.matrix();
      const double delta = prevE ? (E - *prevE).cwiseAbs().maxCoeff() : 0.0;
      json lvl;
      lvl["N1"] = N1;
      lvl["N2"] = N2;
      lvl["E"] = strain_json(EffectiveStrain::from_matrix(E));
      if (prevE) lvl["delta"] = delta;
      levels.push_back(lvl);
      csv += std::to_string(N1) + "," + std::to_string(N2) + "," + json(E(0, 0)).dump() + "," +
             json(E(0, 1)).dump() + "," + json(E(1, 1)).dump() + "," +
             (prevE ? json(delta).dump() : "") + "\n";
      if (prevE && delta <= 1e-8) {
        converged = true;
        break;
      }
      prevE = E;
    }
    write_file(outdir / "sweep.csv", csv);
    rep["sweep"] = {{"levels", levels}, {"converged", converged}, {"csv", "sweep.csv"}};
    if (!converged) {
      rep["sweep"]["diagnostic"] = "resolution cap reached before the primary strain settled";
      res.exit_code = 3;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// analyze-mesh

RunResult run_analyze_mesh(const json& cfg, const Options& opt, const fs::path& cfgdir,
                           const fs::path&) {
  const fs::path mesh_path = cfgdir / cfg.at("mesh").get<std::string>();
  const double rank_tol = rank_tol_from_config(cfg);
  const PeriodicMesh mesh = PeriodicMesh::load(mesh_path.string());
  const MeshModes modes = mesh_modes(mesh, rank_tol);

  RunResult res;
  json& rep = res.report;
  rep["schema"] = 1;
  rep["kind"] = "analyze-mesh";
  rep["mesh"] = cfg.at("mesh").get<std::string>();
  rep["rank_tol"] = rank_tol;
  rep["vertices"] = mesh.vertices().size();
  rep["faces"] = mesh.num_faces();
  rep["edges"] = mesh.edges().size();
  rep["kernel_dim"] = modes.kernel_dim;
  rep["trivial_dim"] = modes.trivial_dim;
  rep["modes"] = json::array();
  for (const auto& m : modes.modes) {
    json w = json::array();
    for (const auto& wf : m.w) w.push_back(vec3_json(wf));
    rep["modes"].push_back({{"w", w},
                            {"p1dot", vec3_json(m.p1dot)},
                            {"p2dot", vec3_json(m.p2dot)},
                            {"E", strain_json(m.E)},
                            {"admissibility", m.admissibility},
                            {"closure", m.closure},
                            {"silent", m.silent}});
  }
  if (!modes.modes.empty() && !modes.modes[0].silent)
    rep["primary"] = primary_mode_json(modes.modes[0].E);
  if (opt.sweep)
    rep["sweep"] = {{"notice", "mesh jobs have fixed combinatorics; the sweep is a no-op"}};
  return res;
}

// ---------------------------------------------------------------------------
// calibrate-family

RunResult run_calibrate(const json& cfg, const Options&, const fs::path& cfgdir,
                        const fs::path& outdir) {
  DiffScheme scheme = DiffScheme::Central;
  if (cfg.value("scheme", "central") == std::string("richardson"))
    scheme = DiffScheme::Richardson;

  ModeFamily fam = [&] {
    if (cfg.contains("generator")) {
      const auto& g = cfg.at("generator");
      const std::string type = g.at("type").get<std::string>();
      const double t0 = g.at("t_min").get<double>(), t1 = g.at("t_max").get<double>();
      const int n = g.at("samples").get<int>();
      if (n < 2 || !(t1 > t0))
        throw ValidationError("generator sweep needs t_max > t_min and samples >= 2");
      std::vector<double> ts;
      for (int i = 0; i < n; ++i) ts.push_back(t0 + (t1 - t0) * i / (n - 1));
      if (type == "miura") {
        const MiuraParams p{g.value("l1", 1.0), g.value("l2", 1.0), g.value("alpha", 1.3)};
        return export_family([p](double t) { return miura_mesh(p, t); }, ts);
      }
      if (type == "eggbox") {
        const EggboxParams p{g.value("l1", 1.0), g.value("l2", 1.0), g.value("alpha", 1.2)};
        return export_family([p](double t) { return eggbox_mesh(p, t); }, ts);
      }
      throw ValidationError("unknown generator type \"" + type + "\"");
    }
    if (cfg.contains("meshes")) {
      const auto& paths = cfg.at("meshes");
      const auto& ts = cfg.at("ts");
      if (paths.size() != ts.size()) throw ValidationError("meshes and ts must have equal length");
      std::vector<double> tv;
      for (const auto& t : ts) tv.push_back(t.get<double>());
      size_t k = 0;
      return export_family(
          [&](double) {
            return PeriodicMesh::load((cfgdir / paths.at(k++).get<std::string>()).string());
          },
          tv);
    }
    throw ValidationError("calibrate-family needs a \"generator\" or a \"meshes\" list");
  }();

  const auto rows = family_calibration(fam, scheme);
  std::ostringstream csv;
  calibration_csv(rows, csv);
  write_file(outdir / "calibration.csv", csv.str());

  json table;
  table["rows"] = json::array();
  for (const auto& r : rows)
    table["rows"].push_back({{"t", r.t},
                             {"I", {r.I(0, 0), r.I(0, 1), r.I(1, 1)}},
                             {"E", {r.E(0, 0), r.E(0, 1), r.E(1, 1)}}});
  write_file(outdir / "calibration.json", table.dump(2) + "\n");

  RunResult res;
  json& rep = res.report;
  rep["schema"] = 1;
  rep["kind"] = "calibrate-family";
  rep["samples"] = fam.size();
  rep["csv"] = "calibration.csv";
  rep["table"] = "calibration.json";
  rep["rows"] = json::array();
  for (const auto& r : rows)
    rep["rows"].push_back({{"t", r.t},
                           {"I", {r.I(0, 0), r.I(0, 1), r.I(1, 1)}},
                           {"E", {r.E(0, 0), r.E(0, 1), r.E(1, 1)}},
                           {"nu", r.nu},
                           {"nu_degenerate", r.nu_degenerate},
                           {"det_sign", r.det_sign},
                           {"type", to_string(r.type)}});
  return res;
}

// ---------------------------------------------------------------------------
// solve-effective

RunResult run_solve(const json& cfg, const Options&, const fs::path& cfgdir,
                    const fs::path& outdir) {
  const auto& d = cfg.at("domain");
  const MacroGrid grid(d.at("M1").get<int>(), d.at("M2").get<int>(), d.at("H1").get<double>(),
                       d.at("H2").get<double>());

  const auto& bc_cfg = cfg.at("boundary");
  // Boundary data expressions use u, v for the macroscopic coordinates
  // U, V (the DSL has exactly two variables).
  auto make_fn = [](const json& exprs) {
    std::array<Expr, 3> e = {Expr::parse(exprs.at(0).get<std::string>()),
                             Expr::parse(exprs.at(1).get<std::string>()),
                             Expr::parse(exprs.at(2).get<std::string>())};
    return [e](double U, double V) { return Eigen::Vector3d(e[0](U, V), e[1](U, V), e[2](U, V)); };
  };
  BoundaryData bc;
  bc.value = make_fn(bc_cfg.at("value"));
  if (bc_cfg.contains("normal_derivative"))
    bc.normal_derivative = make_fn(bc_cfg.at("normal_derivative"));

  RunResult res;
  json& rep = res.report;
  rep["schema"] = 1;
  rep["kind"] = "solve-effective";
  rep["domain"] = {{"M1", grid.M1}, {"M2", grid.M2}, {"H1", grid.H1}, {"H2", grid.H2}};

  EffectiveSurface sol;
  if (cfg.contains("E")) {
    const auto& Ej = cfg.at("E");  // [E11, E12, E22]
    const EffectiveStrain E{Ej.at(0).get<double>(), Ej.at(2).get<double>(),
                            Ej.at(1).get<double>()};
    rep["E"] = strain_json(E);
    sol = solve_linear_effective(E, grid, bc);
  } else {
    std::ifstream in(cfgdir / cfg.at("table").get<std::string>());
    if (!in) throw ValidationError("cannot open calibration table");
    json tj;
    try {
      in >> tj;
    } catch (const std::exception& e) {
      throw ValidationError(std::string("calibration table is not valid JSON: ") + e.what());
    }
    std::vector<TableRow> rows;
    for (const auto& r : tj.at("rows")) {
      TableRow row;
      row.t = r.at("t").get<double>();
      row.I << r.at("I").at(0).get<double>(), r.at("I").at(1).get<double>(),
          r.at("I").at(1).get<double>(), r.at("I").at(2).get<double>();
      row.E << r.at("E").at(0).get<double>(), r.at("E").at(1).get<double>(),
          r.at("E").at(1).get<double>(), r.at("E").at(2).get<double>();
      rows.push_back(row);
    }
    const CalibrationTable table(std::move(rows));
    PicardOptions opts;
    opts.theta_init = cfg.at("theta_init").get<double>();
    opts.max_iter = cfg.value("max_iter", 50);
    opts.fp_tol = cfg.value("fp_tol", 1e-10);
    rep["table"] = cfg.at("table").get<std::string>();
    rep["theta_init"] = opts.theta_init;
    sol = picard_quasilinear(table, grid, bc, opts);
    rep["iterations"] = sol.iterations;
    rep["theta_min"] = sol.theta.minCoeff();
    rep["theta_max"] = sol.theta.maxCoeff();
    rep["misfit_max"] = sol.misfit.size() ? sol.misfit.maxCoeff() : 0.0;
  }

  rep["type"] = to_string(sol.type);
  rep["status"] = sol.status == SolveStatus::Converged
                      ? "converged"
                      : (sol.status == SolveStatus::MaxIterations ? "max-iterations"
                                                                  : "type-change");
  rep["interior_residual"] = sol.interior_residual;
  json frame = json::array();
  for (int r = 0; r < 2; ++r) frame.push_back({sol.frame(r, 0), sol.frame(r, 1)});
  rep["frame"] = frame;

  std::ostringstream csv;
  effective_surface_csv(sol, csv);
  write_file(outdir / "surface.csv", csv.str());
  rep["surface_csv"] = "surface.csv";

  json sj;
  sj["grid"] = rep["domain"];
  sj["Y"] = json::array();
  for (int i = 0; i < grid.M1; ++i)
    for (int j = 0; j < grid.M2; ++j)
      sj["Y"].push_back({sol.Y[0](i, j), sol.Y[1](i, j), sol.Y[2](i, j)});
  if (sol.has_theta()) {
    sj["theta"] = json::array();
    for (int i = 0; i < grid.M1; ++i)
      for (int j = 0; j < grid.M2; ++j) sj["theta"].push_back(sol.theta(i, j));
  }
  write_file(outdir / "surface.json", sj.dump() + "\n");
  rep["surface_json"] = "surface.json";

  if (sol.status == SolveStatus::TypeChange) res.exit_code = 3;
  if (sol.status == SolveStatus::MaxIterations && cfg.value("require_convergence", false))
    res.exit_code = 3;
  return res;
}

// ---------------------------------------------------------------------------
// check-constraint

RunResult run_check(const json& cfg, const Options& opt, const fs::path&, const fs::path&) {
  const auto& qj = cfg.at("q");
  const auto& Ej = cfg.at("E");  // [E11, E12, E22]
  const QuadraticForm q{qj.at(0).get<double>(), qj.at(1).get<double>(), qj.at(2).get<double>()};
  const EffectiveStrain E{Ej.at(0).get<double>(), Ej.at(2).get<double>(), Ej.at(1).get<double>()};
  const double residual = constraint_residual(q, E);
  const double tol = cfg.value("tol_rel", 1e-8) * std::max(E.norm() * q.norm(), 1e-300);
  const bool compatible = std::abs(residual) <= tol;

  RunResult res;
  json& rep = res.report;
  rep["schema"] = 1;
  rep["kind"] = "check-constraint";
  rep["q"] = {q.e, q.f, q.g};
  rep["E"] = strain_json(E);
  rep["residual"] = residual;
  rep["tol"] = tol;
  rep["compatible"] = compatible;
  if (!compatible && opt.assert_compatible) res.exit_code = 3;
  return res;
}

// ---------------------------------------------------------------------------
// report.txt rendering: every number is re-serialized from report.json.

std::string render_report_txt(const json& rep) {
  std::ostringstream os;
  const std::string kind = rep.at("kind").get<std::string>();
  os << "isoshell " << kind << " report\n";

  auto dump = [](const json& j) { return j.dump(); };

  if (rep.contains("profile")) os << "profile: " << rep.at("profile").get<std::string>() << "\n";
  if (rep.contains("mesh")) os << "mesh: " << rep.at("mesh").get<std::string>() << "\n";
  if (rep.contains("cell")) {
    const auto& c = rep.at("cell");
    os << "cell: L1=" << dump(c.at("L1")) << " L2=" << dump(c.at("L2"))
       << " N1=" << dump(c.at("N1")) << " N2=" << dump(c.at("N2")) << "\n";
  }
  if (rep.contains("kernel")) {
    const auto& k = rep.at("kernel");
    os << "kernel: dim=" << dump(k.at("dim")) << " carriers=" << dump(k.at("carriers"))
       << " silent=" << dump(k.at("silent")) << "\n";
  }
  if (rep.contains("kernel_dim")) os << "kernel dim: " << dump(rep.at("kernel_dim")) << "\n";
  if (rep.contains("primary")) {
    const auto& p = rep.at("primary");
    os << "primary mode:\n";
    os << "  E (E11, E12, E22) = " << dump(p.at("E")) << "\n";
    os << "  nu = " << (p.at("nu_degenerate").get<bool>() ? "degenerate" : dump(p.at("nu")))
       << "\n";
    os << "  type = " << p.at("type").get<std::string>() << "\n";
  }
  if (rep.contains("q_basis")) {
    os << "q-basis (e, f, g):\n";
    for (size_t i = 0; i < rep.at("q_basis").size(); ++i) {
      os << "  " << dump(rep.at("q_basis").at(i));
      if (rep.contains("compat") && i < rep.at("compat").size())
        os << "  compatibility=" << dump(rep.at("compat").at(i));
      os << "\n";
    }
  }
  if (rep.contains("all_q_admissible") && rep.at("all_q_admissible").get<bool>())
    os << "degenerate flat cell: every quadratic form is admissible\n";
  if (rep.contains("modes") && kind == "analyze-mesh") {
    os << "modes: " << rep.at("modes").size() << " nontrivial\n";
    for (const auto& m : rep.at("modes"))
      os << "  E=" << dump(m.at("E")) << " admissibility=" << dump(m.at("admissibility"))
         << " silent=" << dump(m.at("silent")) << "\n";
  }
  if (rep.contains("rows")) {
    os << "calibration rows: " << rep.at("rows").size() << " (see "
       << rep.at("csv").get<std::string>() << ")\n";
    const auto& first = rep.at("rows").front();
    const auto& last = rep.at("rows").back();
    os << "  t range: " << dump(first.at("t")) << " .. " << dump(last.at("t")) << "\n";
    os << "  type at ends: " << first.at("type").get<std::string>() << " / "
       << last.at("type").get<std::string>() << "\n";
  }
  if (rep.contains("residual")) {
    os << "constraint residual: " << dump(rep.at("residual")) << " (tol " << dump(rep.at("tol"))
       << ")\n";
    os << "compatible: " << dump(rep.at("compatible")) << "\n";
  }
  if (rep.contains("status")) {
    os << "type: " << rep.at("type").get<std::string>() << "\n";
    os << "status: " << rep.at("status").get<std::string>() << "\n";
    os << "interior residual: " << dump(rep.at("interior_residual")) << "\n";
    if (rep.contains("theta_min"))
      os << "theta range: " << dump(rep.at("theta_min")) << " .. " << dump(rep.at("theta_max"))
         << "\n";
  }
  if (rep.contains("sweep")) {
    const auto& sw = rep.at("sweep");
    if (sw.contains("notice"))
      os << "sweep: " << sw.at("notice").get<std::string>() << "\n";
    else
      os << "sweep: " << sw.at("levels").size()
         << " levels, converged=" << dump(sw.at("converged")) << "\n";
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unit-cell analysis of periodic corrugated shells"};
  app.require_subcommand(1);

  Options opt;
  const std::vector<std::string> kinds = {"analyze-graph",   "analyze-surface",
                                          "analyze-mesh",    "calibrate-family",
                                          "solve-effective", "check-constraint"};
  for (const auto& kind : kinds) {
    auto* sub = app.add_subcommand(kind);
    sub->add_option("--config", opt.config, "job configuration file")->required();
    sub->add_option("--out", opt.out, "output directory (default: out)");
    sub->add_flag("--assert-compatible", opt.assert_compatible,
                  "exit 3 when a checked constraint is violated");
    sub->add_flag("--sweep", opt.sweep, "double the resolution until results settle");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  const std::string kind = app.get_subcommands().front()->get_name();
  try {
    if (opt.sweep && kind != "analyze-graph" && kind != "analyze-surface" &&
        kind != "analyze-mesh")
      throw ValidationError(kind + " is not a sweepable job kind");

    const fs::path cfg_path(opt.config);
    const json cfg = load_config(cfg_path, kind);
    const fs::path cfgdir = cfg_path.has_parent_path() ? cfg_path.parent_path() : fs::path(".");
    const fs::path outdir(opt.out);
    fs::create_directories(outdir);

    RunResult res;
    if (kind == "analyze-graph")
      res = run_analyze_graph(cfg, opt, cfgdir, outdir);
    else if (kind == "analyze-surface")
      res = run_analyze_surface(cfg, opt, cfgdir, outdir);
    else if (kind == "analyze-mesh")
      res = run_analyze_mesh(cfg, opt, cfgdir, outdir);
    else if (kind == "calibrate-family")
      res = run_calibrate(cfg, opt, cfgdir, outdir);
    else if (kind == "solve-effective")
      res = run_solve(cfg, opt, cfgdir, outdir);
    else
      res = run_check(cfg, opt, cfgdir, outdir);

    write_file(outdir / "report.json", res.report.dump(2) + "\n");
    write_file(outdir / "report.txt", render_report_txt(res.report));
    if (res.exit_code != 0)
      std::cerr << kind << ": numerical diagnostic failure (see report.json)\n";
    return res.exit_code;
  } catch (const ValidationError& e) {
    std::cerr << kind << ": " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << kind << ": " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << kind << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << kind << ": unexpected error: " << e.what() << "\n";
    return 1;
  }
}
