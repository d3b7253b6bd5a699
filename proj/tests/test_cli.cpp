#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "svlab/cli.hpp"
#include "svlab/errors.hpp"

using namespace svlab;
using namespace svlab::cli;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
  json line() const { return json::parse(out); }
};

/// Fresh output root per call so tests never see each other's files.
fs::path scratch(const std::string& tag) {
  static int counter = 0;
  const fs::path p = fs::temp_directory_path() /
                     ("svlab_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Run run(const fs::path& root, std::vector<std::string> args) {
  ::setenv("SVLAB_OUTPUT_ROOT", root.c_str(), 1);
  args.insert(args.begin(), "svlab-cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_command(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "timing.json")
      files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("round trip through JSON") {
    for (const auto& name : commands()) {
      const ExperimentConfig c{name, defaults_for(name)};
      CHECK(c.params.contains("output"));
      const ExperimentConfig back = json(c).get<ExperimentConfig>();
      CHECK(back == c);
    }
  }

  TEST_CASE("unknown commands and keys") {
    CHECK_THROWS_AS(defaults_for("nope"), Error);
    const json base = defaults_for("spike");
    try {
      overlay(base, {{"bogus", 1}}, "test");
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.is_config());
    }
    CHECK_THROWS_AS(overlay(base, {{"fit_lo", "ten"}}, "test"), Error);
  }

  TEST_CASE("nested overlay keeps untouched defaults") {
    const json base = defaults_for("spike");
    const json merged = overlay(base, {{"mesh", {{"r_max", 30.0}}}}, "test");
    CHECK(merged["mesh"]["r_max"] == 30.0);
    CHECK(merged["mesh"]["h_core"] == base["mesh"]["h_core"]);
  }

  TEST_CASE("hash ignores the output name only") {
    ExperimentConfig a{"radial", defaults_for("radial")}, b = a, c = a;
    b.params["output"] = "elsewhere";
    c.params["beta"] = -0.25;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash(c));
    CHECK(config_hash(a).size() == 16);
  }
}

TEST_SUITE("run_command") {
  TEST_CASE("exit codes") {
    const auto root = scratch("codes");
    const auto none = run(root, {});
    CHECK(none.code == 2);
    CHECK(json::parse(none.err)["error"] == "config-error");
    CHECK(run(root, {"spike", "--no-such-flag", "1"}).code == 2);
    CHECK(run(root, {"radial", "--beta", "0.5"}).code == 2);
    CHECK(run(root, {"spike", "--fit_lo", "abc"}).code == 2);
    const auto bad = write_file(root, "bad.json", R"({"command":"spike","bogus":1})");
    CHECK(run(root, {"spike", "--config", bad.string()}).code == 2);
    const auto mal = write_file(root, "mal.json", "{nope");
    const auto m = run(root, {"spike", "--config", mal.string()});
    CHECK(m.code == 2);
    CHECK(json::parse(m.err)["error"] == "config-error");
    const auto other = write_file(root, "other.json", R"({"command":"vortex"})");
    CHECK(run(root, {"spike", "--config", other.string()}).code == 2);
    const auto s = run(root, {"reduce", "--mode", "balance", "--beta_grid", "[0.5,1e-4,1e-5,1e-6,1e-7,1e-8]"});
    CHECK(s.code == 3);
    CHECK(json::parse(s.err)["error"] == "no-root");
  }

  TEST_CASE("spike run writes its artifacts") {
    const auto root = scratch("spike");
    const auto r = run(root, {"spike"});
    REQUIRE(r.code == 0);
    CHECK(lines(r.out).size() == 1);
    const json j = r.line();
    CHECK(j["rate"].get<double>() >= -1.001);
    CHECK(j["rate"].get<double>() <= -0.999);
    const fs::path dir = j["output_dir"].get<std::string>();
    CHECK(dir.parent_path() == root);
    CHECK(dir.filename().string() == "spike-" + j["config_hash"].get<std::string>().substr(0, 12));
    for (const char* f : {"summary.json", "config.json", "timing.json"}) CHECK(fs::exists(dir / f));
    const auto summary = json::parse(slurp(dir / "summary.json"));
    CHECK(summary["command"] == "spike");
    CHECK_FALSE(summary["outputs"].contains("wall_time_s"));
    CHECK(json::parse(slurp(dir / "timing.json")).contains("wall_time_s"));
    bool csv = false;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".csv") {
        const auto text = slurp(e.path());
        REQUIRE(text.rfind("# ", 0) == 0);
        CHECK(json::parse(text.substr(2, text.find('\n') - 2)).is_object());
        csv = true;
      }
    CHECK(csv);
  }

  TEST_CASE("flags override the config file") {
    const auto root = scratch("precedence");
    const auto cfg = write_file(root, "c.json", R"({"command":"spike","fit_lo":9.0,"output":"p"})");
    const auto r = run(root, {"spike", "--config", cfg.string(), "--fit_lo", "10"});
    REQUIRE(r.code == 0);
    const auto c = json::parse(slurp(root / "p" / "config.json"));
    CHECK(c["fit_lo"] == 10.0);
    CHECK(c["command"] == "spike");
    CHECK(c["fit_hi"] == defaults_for("spike")["fit_hi"]);
  }

  TEST_CASE("same config, same bytes") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    const std::vector<std::string> args = {"radial", "--beta", "-0.25", "--d", "2", "--output", "run"};
    const auto ra = run(a, args), rb = run(b, args);
    REQUIRE(ra.code == 0);
    REQUIRE(rb.code == 0);
    json la = ra.line(), lb = rb.line();
    la.erase("output_dir");
    lb.erase("output_dir");
    CHECK(la.dump() == lb.dump());
    const auto ta = tree(a / "run"), tb = tree(b / "run");
    CHECK(ta.size() >= 3);
    CHECK(ta == tb);
  }

  TEST_CASE("state CSV round trip and charge of a run directory") {
    const auto root = scratch("state");
    REQUIRE(run(root, {"radial", "--route", "newton", "--output", "st"}).code == 0);
    const auto text = slurp(root / "st" / "state.csv");
    const auto s = state_from_csv(text);
    CHECK(state_to_csv(s) == text);
    CHECK(s.f.degree == 1);
    const auto q = run(root, {"charge", "--state", (root / "st").string(), "--output", "q"});
    REQUIRE(q.code == 0);
    const json j = q.line();
    CHECK(std::abs(j["Q"].get<double>() - 0.5) < 1e-3);
    CHECK(j["method"] == "radial_analytic");
    CHECK(j.contains("error_estimate"));
    CHECK(j.contains("R_max"));
    CHECK_THROWS_AS(state_from_csv("# {\"kind\":\"other\"}\nr,u,f\n0,1,0\n"), Error);
  }

  TEST_CASE("planar field file feeds the charge command") {
    const auto root = scratch("field");
    const auto p = run(root, {"planar", "--h", "0.2", "--arc", "0.2", "--output", "pl"});
    REQUIRE(p.code == 0);
    CHECK(p.line()["residual"].get<double>() < 1e-9);
    const auto q = run(root, {"charge", "--state", (root / "pl").string(), "--output", "q"});
    REQUIRE(q.code == 0);
    CHECK(std::abs(q.line()["Q"].get<double>() - 0.5) < 5e-3);
    CHECK(q.line()["method"] == "quadrature_2d");
  }

  TEST_CASE("reduce root stays within the bracket") {
    const auto root = scratch("reduce");
    const auto r = run(root, {"reduce", "--h", "0.2", "--arc", "0.2"});
    REQUIRE(r.code == 0);
    const json j = r.line();
    CHECK(std::abs(j["l_beta"].get<double>() - j["lhat"].get<double>()) <= 2.0);
    CHECK(fs::exists(fs::path(j["output_dir"].get<std::string>()) / "force.csv"));
  }
}

TEST_SUITE("sweep") {
  TEST_CASE("empty grid gives a header-only table") {
    const auto root = scratch("sweep_empty");
    const auto r = run(root, {"sweep", "--target", "spike", "--output", "s"});
    CHECK(r.code == 0);
    const auto l = lines(slurp(root / "s" / "sweep.csv"));
    REQUIRE(l.size() == 2);
    CHECK(l[0].rfind("# ", 0) == 0);
    CHECK(l[1] == "index,status");
  }

  TEST_CASE("one row per combination") {
    const auto root = scratch("sweep_rows");
    const auto r = run(root, {"sweep", "--target", "radial", "--grid", R"({"beta":[-0.25,-0.5],"d":[1,2]})",
                              "--threads", "2", "--output", "s"});
    REQUIRE(r.code == 0);
    CHECK(r.line()["rows"] == 4);
    const auto l = lines(slurp(root / "s" / "sweep.csv"));
    REQUIRE(l.size() == 6);
    CHECK(l[1].rfind("index,beta,d,status,", 0) == 0);
    for (std::size_t i = 2; i < l.size(); ++i) CHECK(l[i].find(",ok,") != std::string::npos);
    for (int n = 0; n < 4; ++n) CHECK(fs::exists(root / "s" / "rows" / std::to_string(n) / "state.csv"));
  }

  TEST_CASE("failing rows set the exit code") {
    const auto root = scratch("sweep_fail");
    const auto solver = run(root, {"sweep", "--target", "reduce", "--params", R"({"mode":"balance"})", "--grid",
                                   R"({"beta_grid":[[1e-4,1e-5,1e-6,1e-7,1e-8],[0.5,1e-4,1e-5,1e-6,1e-7,1e-8]]})",
                                   "--output", "a"});
    CHECK(solver.code == 3);
    CHECK(solver.line()["failures"] == 1);
    const auto config = run(root, {"sweep", "--target", "radial", "--grid", R"({"beta":[-0.5,0.5]})", "--output", "b"});
    CHECK(config.code == 2);
    const auto l = lines(slurp(root / "b" / "sweep.csv"));
    REQUIRE(l.size() == 4);
    CHECK(l[3].find("config-error") != std::string::npos);
  }

  TEST_CASE("unknown grid axis") {
    const auto root = scratch("sweep_axis");
    CHECK(run(root, {"sweep", "--target", "spike", "--grid", R"({"nope":[1]})"}).code == 2);
  }
}
