#include <isoshell/errors.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string cli_bin() {
  const char* bin = std::getenv("ISOSHELL_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

fs::path fixtures_dir() {
  const char* dir = std::getenv("ISOSHELL_FIXTURES");
  REQUIRE(dir != nullptr);
  return dir;
}

fs::path work_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("isoshell_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& kind, const fs::path& config, const fs::path& out,
        const std::string& extra = "") {
  const std::string cmd = cli_bin() + " " + kind + " --config " + config.string() + " --out " +
                          out.string() + (extra.empty() ? "" : " " + extra) + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("analyze-graph on the bundled cos profile", "[cli]") {
  const auto out = work_dir("graph_cos");
  REQUIRE(run("analyze-graph", fixtures_dir() / "graph_cos.json", out) == 0);

  const json rep = read_json(out / "report.json");
  REQUIRE(rep.at("kind") == "analyze-graph");
  const auto& E = rep.at("primary").at("E");
  REQUIRE_THAT(E.at(0).get<double>(), Catch::Matchers::WithinAbs(-0.5, 1e-12));
  REQUIRE_THAT(E.at(1).get<double>(), Catch::Matchers::WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(E.at(2).get<double>(), Catch::Matchers::WithinAbs(0.5, 1e-12));
  REQUIRE_THAT(rep.at("primary").at("nu").get<double>(), Catch::Matchers::WithinAbs(1.0, 1e-10));
  REQUIRE(rep.at("primary").at("type") == "hyperbolic");

  // q-basis spans (1,0,1)/sqrt2 and (0,1,0); compatibilities vanish.
  REQUIRE(rep.at("q_basis").size() == 2);
  for (const auto& c : rep.at("compat")) REQUIRE(c.get<double>() <= 1e-10);
  bool has_twist = false;
  for (const auto& q : rep.at("q_basis"))
    if (std::abs(q.at(1).get<double>()) > 0.99) has_twist = true;
  REQUIRE(has_twist);

  // Corrector field files exist and every report.txt number appears in
  // report.json's serialization.
  for (const auto& name : rep.at("correctors"))
    REQUIRE(fs::exists(out / name.get<std::string>()));
  const std::string txt = read_text(out / "report.txt");
  REQUIRE(txt.find("type = hyperbolic") != std::string::npos);
  REQUIRE(txt.find(rep.at("primary").at("nu").dump()) != std::string::npos);
}

TEST_CASE("check-constraint exit codes", "[cli]") {
  const auto out = work_dir("check");
  REQUIRE(run("check-constraint", fixtures_dir() / "check_q.json", out) == 0);
  const json rep = read_json(out / "report.json");
  REQUIRE_THAT(rep.at("residual").get<double>(), Catch::Matchers::WithinAbs(-0.5, 1e-14));
  REQUIRE(rep.at("compatible") == false);

  REQUIRE(run("check-constraint", fixtures_dir() / "check_q.json", out, "--assert-compatible") ==
          3);
}

TEST_CASE("analyze-mesh on the bundled miura cell", "[cli]") {
  const auto out = work_dir("mesh_miura");
  REQUIRE(run("analyze-mesh", fixtures_dir() / "mesh_miura.json", out) == 0);
  const json rep = read_json(out / "report.json");
  REQUIRE(rep.at("kernel_dim") == 4);
  REQUIRE(rep.at("modes").size() == 1);
  REQUIRE(rep.at("primary").at("nu").get<double>() < 0.0);
  REQUIRE(rep.at("primary").at("type") == "elliptic");

  // Mesh sweep is a documented no-op.
  REQUIRE(run("analyze-mesh", fixtures_dir() / "mesh_miura.json", out, "--sweep") == 0);
  REQUIRE(read_json(out / "report.json").at("sweep").contains("notice"));
}

TEST_CASE("validation failures exit with code 2", "[cli]") {
  const auto out = work_dir("valfail");
  REQUIRE(run("analyze-graph", fixtures_dir() / "does_not_exist.json", out) == 2);
  // Config kind mismatch.
  REQUIRE(run("check-constraint", fixtures_dir() / "graph_cos.json", out) == 2);
  // Non-periodic profile.
  const fs::path bad = out / "bad.json";
  std::ofstream(bad) << R"({"schema":1,"kind":"analyze-graph","profile":"u",)"
                     << R"("cell":{"L1":6.283185307179586,"L2":6.283185307179586,"N1":16,"N2":16}})";
  REQUIRE(run("analyze-graph", bad, out / "o") == 2);
  // Sweep is undefined for check jobs.
  REQUIRE(run("check-constraint", fixtures_dir() / "check_q.json", out, "--sweep") == 2);
}

TEST_CASE("identical configs give byte-identical reports", "[cli]") {
  const auto out1 = work_dir("det1"), out2 = work_dir("det2");
  REQUIRE(run("analyze-graph", fixtures_dir() / "graph_aniso.json", out1) == 0);
  REQUIRE(run("analyze-graph", fixtures_dir() / "graph_aniso.json", out2) == 0);
  REQUIRE(read_text(out1 / "report.json") == read_text(out2 / "report.json"));
}

TEST_CASE("resolution sweep", "[cli]") {
  const auto out = work_dir("sweep");
  // Spectrally exact translation graph converges at the first comparison.
  REQUIRE(run("analyze-graph", fixtures_dir() / "sweep_cos.json", out, "--sweep") == 0);
  json rep = read_json(out / "report.json");
  REQUIRE(rep.at("sweep").at("converged") == true);
  REQUIRE(fs::exists(out / "sweep.csv"));

  // The skewed corrugation cannot settle below a cap of 16.
  REQUIRE(run("analyze-graph", fixtures_dir() / "sweep_skew_capped.json", out, "--sweep") == 3);
  rep = read_json(out / "report.json");
  REQUIRE(rep.at("sweep").at("converged") == false);
}

TEST_CASE("calibrate-family feeds solve-effective", "[cli]") {
  const auto out = work_dir("chain");
  REQUIRE(run("calibrate-family", fixtures_dir() / "calibrate_miura.json", out / "calib") == 0);
  REQUIRE(fs::exists(out / "calib" / "calibration.csv"));
  const std::string csv = read_text(out / "calib" / "calibration.csv");
  REQUIRE(csv.rfind("t,I11,I12,I22,E11,E12,E22,nu,det_sign,type\n", 0) == 0);

  // A pinned flat contour at the metric of theta = 0.7.
  const fs::path cfg = out / "solve.json";
  std::ofstream(cfg) << R"({"schema":1,"kind":"solve-effective",)"
                     << R"("domain":{"M1":17,"M2":17,"H1":0.0625,"H2":0.0625},)"
                     << R"("table":"calib/calibration.json","theta_init":0.7,"max_iter":12,)"
                     << R"("boundary":{"value":["1.529684374568977*u","1.8736907536249041*v","0"]}})";
  REQUIRE(run("solve-effective", cfg, out / "solve") == 0);
  const json rep = read_json(out / "solve" / "report.json");
  REQUIRE(rep.at("type") == "elliptic");
  REQUIRE(fs::exists(out / "solve" / "surface.csv"));
}
