#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double pi = std::numbers::pi;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "weakvar_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string("\"") + WEAKVAR_CLI_PATH + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                          "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

void write_config(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

const json kSmallGrid = {{"x_min", -16.0}, {"x_max", 16.0}, {"n", 1024}};

}  // namespace

TEST_CASE("analyze coherent state reports a constant weak variance") {
  const auto dir = scratch("analyze_coherent");
  write_config(dir / "c.json", {{"model", {{"kind", "coherent_state"}, {"omega", 1.5}, {"x0", 1.0}}},
                                {"grid", {{"x_min", -16.0}, {"x_max", 16.0}, {"n", 4096}}}});
  REQUIRE(run_cli("analyze --config " + (dir / "c.json").string() + " --out " + (dir / "run").string(), dir) == 0);
  const auto s = load_json(dir / "run_summary.json");
  const double expected = 0.75;
  CHECK(std::abs(s["V_logrho"]["min"].get<double>() - expected) < 1e-5 * expected);
  CHECK(std::abs(s["V_logrho"]["max"].get<double>() - expected) < 1e-5 * expected);
  CHECK(std::abs(s["V_weakvalues"]["max"].get<double>() - expected) < 1e-5 * expected);
  CHECK(s["sign_classes"]["negative"] == 0);
  CHECK(s["constants"]["hbar"] == 1.0);
  CHECK(fs::exists(dir / "run_fields.csv"));
  CHECK(fs::exists(dir / "run_config.json"));
  const auto header = slurp(dir / "run_fields.csv").substr(0, 120);
  CHECK(header.rfind("x,rho,S,p_weak_re,p_weak_im,V_logrho,V_conditional,V_weakvalues,Q,kT,P,riccati_residual,sign_class\n",
                     0) == 0);
}

TEST_CASE("analyze superposition finds a negative band") {
  const auto dir = scratch("analyze_cat");
  const std::string args = "analyze --set model.kind=two_gaussian_superposition --set model.separation=6 "
                           "--set model.sigma=1 --set grid.x_min=-16 --set grid.x_max=16 --set grid.n=1024 --out " +
                           (dir / "cat").string();
  REQUIRE(run_cli(args, dir) == 0);
  const auto s = load_json(dir / "cat_summary.json");
  CHECK(s["sign_classes"]["negative"].get<int>() > 0);
  CHECK(s["wigner_min"].get<double>() < 0.0);
  CHECK(s["V_logrho"]["min"].get<double>() < 0.0);
}

TEST_CASE("eta column and json format") {
  const auto dir = scratch("analyze_eta");
  const std::string base = "analyze --set model.kind=gaussian_packet --set model.sigma=1 --set model.p0=0.5 "
                           "--set grid.x_min=-16 --set grid.x_max=16 --set grid.n=512 --set eta=0.25 ";
  REQUIRE(run_cli(base + "--out " + (dir / "a").string(), dir) == 0);
  CHECK(slurp(dir / "a_fields.csv").find(",sign_class,p_weak_eta\n") != std::string::npos);
  REQUIRE(run_cli(base + "--set format=json --out " + (dir / "b").string(), dir) == 0);
  const auto f = load_json(dir / "b_fields.json");
  CHECK(f["x"].size() == 512);
  CHECK(f.contains("p_weak_eta"));
}

TEST_CASE("configuration errors exit with code 2") {
  const auto dir = scratch("errors");
  CHECK(run_cli("analyze --out " + (dir / "x").string(), dir) == 2);
  CHECK(slurp(dir / "stderr.txt").find("usage") != std::string::npos);
  CHECK(run_cli("analyze --set model.kind=no_such_state --out " + (dir / "x").string(), dir) == 2);
  CHECK(run_cli("analyze --set model.kind=plane_wave --set model.bogus=1 --out " + (dir / "x").string(), dir) == 2);
  CHECK(run_cli("analyze --set model.kind=plane_wave --set input=psi.csv --out " + (dir / "x").string(), dir) == 2);
  CHECK(run_cli("verify --set model.kind=coherent_state --set tol_route=-1 --out " + (dir / "x").string(), dir) == 2);
  CHECK(run_cli("analyze --set model.kind=coherent_state --set tolerances.tol_bogus=1 --out " + (dir / "x").string(),
                dir) == 2);
  CHECK(run_cli("analyze --set model.kind=coherent_state", dir) == 2);
  CHECK(run_cli("frobnicate --out x", dir) == 2);
  CHECK(run_cli("analyze --config " + (dir / "missing.json").string() + " --out " + (dir / "x").string(), dir) == 2);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run_cli("analyze --config " + (dir / "broken.json").string() + " --out " + (dir / "x").string(), dir) == 2);
  CHECK(run_cli("analyze --input-ish", dir) == 2);
  CHECK(run_cli("--help", dir) == 0);
}

TEST_CASE("input files resolve relative to the config") {
  const auto dir = scratch("input");
  std::ofstream csv(dir / "psi.csv");
  csv.precision(17);
  csv << "x,re_psi,im_psi\n";
  for (int j = 0; j < 512; ++j) {
    const double x = -16.0 + 32.0 * j / 511.0;
    const double a = std::pow(pi, -0.25) * std::exp(-0.5 * x * x);
    csv << x << ',' << a * std::cos(0.3 * x) << ',' << a * std::sin(0.3 * x) << '\n';
  }
  csv.close();
  write_config(dir / "c.json", {{"input", "psi.csv"}});
  REQUIRE(run_cli("budget --config " + (dir / "c.json").string() + " --out " + (dir / "in").string(), dir) == 0);
  const auto s = load_json(dir / "in_summary.json");
  CHECK(s["budget"]["total"].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(s["closed"] == true);

  std::ofstream(dir / "bad.csv") << "x,re_psi,im_psi\n0,1\n";
  write_config(dir / "b.json", {{"input", "bad.csv"}});
  CHECK(run_cli("budget --config " + (dir / "b.json").string() + " --out " + (dir / "bad").string(), dir) == 2);
  CHECK(slurp(dir / "stderr.txt").find("line 2") != std::string::npos);
}

TEST_CASE("verify passes on the coherent state and on qho n=3") {
  const auto dir = scratch("verify");
  REQUIRE(run_cli("verify --set model.kind=coherent_state --set model.omega=1 --out " + (dir / "coh").string(), dir) ==
          0);
  const auto r = load_json(dir / "coh_verify.json");
  CHECK(r["verify"]["overall"] == "pass");
  CHECK(r["verify"]["checks"].size() == 9);
  CHECK(slurp(dir / "stdout.txt").find("[PASS] route_equivalence_A_B") != std::string::npos);
  REQUIRE(run_cli("verify --set model.kind=qho_eigenstate --set model.n=3 --set grid.x_min=-16 --set grid.x_max=16 "
                  "--out " +
                      (dir / "q3").string(),
                  dir) == 0);
  CHECK(load_json(dir / "q3_verify.json")["verify"]["overall"] == "pass");
}

TEST_CASE("verify with an impossible route tolerance fails and still writes the report") {
  const auto dir = scratch("verify_fail");
  CHECK(run_cli("verify --set model.kind=coherent_state --set model.omega=1 --set tol_route=1e-15 --out " + (dir / "f").string(), dir) == 1);
  const auto r = load_json(dir / "f_verify.json");
  CHECK(r["verify"]["overall"] == "fail");
  bool route_failed = false;
  for (const auto& c : r["verify"]["checks"])
    if (c["name"] == "route_equivalence_A_C") route_failed = c["status"] == "fail";
  CHECK(route_failed);
}

TEST_CASE("outputs are byte-identical across runs") {
  const auto dir = scratch("determinism");
  const std::string args = "analyze --set model.kind=two_gaussian_superposition --set model.p0=0.7 "
                           "--set model.separation=5 --set model.sigma=1 "
                           "--set grid.x_min=-16 --set grid.x_max=16 --set grid.n=512 --out ";
  REQUIRE(run_cli(args + (dir / "a").string(), dir) == 0);
  REQUIRE(run_cli(args + (dir / "b").string(), dir) == 0);
  CHECK(slurp(dir / "a_fields.csv") == slurp(dir / "b_fields.csv"));
  CHECK(slurp(dir / "a_summary.json") == slurp(dir / "b_summary.json"));
  CHECK(slurp(dir / "a_config.json") == slurp(dir / "b_config.json"));
}

TEST_CASE("wigner and cumulants exports") {
  const auto dir = scratch("wigner");
  const std::string model = "--set model.kind=gaussian_packet --set model.sigma=1 --set model.p0=0.5 "
                            "--set grid.x_min=-16 --set grid.x_max=16 --set grid.n=256 ";
  REQUIRE(run_cli("wigner " + model + "--set wigner.stride_x=4 --set wigner.stride_p=4 --out " + (dir / "w").string(),
                  dir) == 0);
  std::ifstream in(dir / "w_wigner.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++rows;
  CHECK(rows == 1 + 64 * 128);
  const auto s = load_json(dir / "w_summary.json");
  CHECK(s["wigner"]["norm_x"].get<double>() == doctest::Approx(1.0).epsilon(1e-8));

  REQUIRE(run_cli("cumulants " + model + "--set cumulants.x=[0,0.5] --out " + (dir / "c").string(), dir) == 0);
  const auto c = load_json(dir / "c_summary.json");
  REQUIRE(c["cumulants"].size() == 4);
  for (const auto& row : c["cumulants"]) {
    CHECK(row["kappa"][0].get<double>() == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(row["kappa"][1].get<double>() == doctest::Approx(0.25).epsilon(1e-5));
  }
}

TEST_CASE("evolve coherent state follows the classical path") {
  const auto dir = scratch("evolve");
  const double A = 2.0;
  const std::size_t steps = 12800;
  write_config(dir / "e.json", {{"model", {{"kind", "coherent_state"}, {"omega", 1.0}, {"x0", A}}},
                                {"grid", kSmallGrid},
                                {"evolve",
                                 {{"potential", {{"kind", "harmonic"}, {"omega", 1.0}}},
                                  {"dt", 2 * pi / steps},
                                  {"steps", steps},
                                  {"snapshot_every", 64},
                                  {"seeds", {A}},
                                  {"verify", false}}}});
  REQUIRE(run_cli("evolve --config " + (dir / "e.json").string() + " --out " + (dir / "ev").string(), dir) == 0);
  std::ifstream in(dir / "ev_trajectories.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "seed_id,t,x,velocity");
  double dev = 0.0;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    double id, t, x, v;
    char c;
    std::istringstream(line) >> id >> c >> t >> c >> x >> c >> v;
    dev = std::max(dev, std::abs(x - A * std::cos(t)));
    ++n;
  }
  CHECK(n == steps / 64 + 1);
  CHECK(dev < 1e-4 * A);
  CHECK(fs::exists(dir / "ev_snapshots.csv"));
  CHECK_FALSE(fs::exists(dir / "ev_verify.json"));
}

TEST_CASE("evolve free Gaussian spreads and writes per-snapshot verification") {
  const auto dir = scratch("evolve_free");
  write_config(dir / "e.json", {{"model", {{"kind", "gaussian_packet"}, {"sigma", 1.0}}},
                                {"grid", {{"x_min", -32.0}, {"x_max", 32.0}, {"n", 1024}}},
                                {"tolerances", {{"tol_identity", 1e-4}, {"tol_riccati", 1e-4}}},
                                {"evolve",
                                 {{"potential", {{"kind", "none"}}},
                                  {"dt", 2e-3},
                                  {"steps", 1000},
                                  {"snapshot_every", 100},
                                  {"export_every", 5},
                                  {"seed_count", 4}}}});
  REQUIRE(run_cli("evolve --config " + (dir / "e.json").string() + " --out " + (dir / "ev").string(), dir) == 0);
  const auto s = load_json(dir / "ev_summary.json");
  const auto& snaps = s["evolve"]["snapshots"];
  REQUIRE(snaps.size() == 3);
  for (const auto& snap : snaps) {
    const double t = snap["t"].get<double>();
    CHECK(snap["var_x"].get<double>() == doctest::Approx(1.0 + t * t / 4.0).epsilon(1e-5));
  }
  CHECK(s["evolve"]["trajectories"].size() == 4);
  CHECK(load_json(dir / "ev_verify.json")["overall"] == "pass");
  CHECK(slurp(dir / "ev_snapshots.csv").rfind("t,x,rho,", 0) == 0);
}

TEST_CASE("evolve rejects a step above the stability bound") {
  const auto dir = scratch("evolve_unstable");
  write_config(dir / "e.json",
               {{"model", {{"kind", "coherent_state"}, {"omega", 1.0}}},
                {"grid", kSmallGrid},
                {"evolve", {{"potential", {{"kind", "harmonic"}, {"omega", 1.0}}}, {"dt", 0.01}, {"steps", 10}}}});
  CHECK(run_cli("evolve --config " + (dir / "e.json").string() + " --out " + (dir / "ev").string(), dir) != 0);
  CHECK(slurp(dir / "stderr.txt").find("bound") != std::string::npos);
}
