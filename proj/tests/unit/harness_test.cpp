#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "oracles.hpp"
#include "paultrap/config.hpp"
#include "paultrap/csv.hpp"
#include "paultrap/digest.hpp"
#include "paultrap/errors.hpp"
#include "paultrap/scenario.hpp"
#include "paultrap/units.hpp"

using namespace paultrap;
using namespace paultrap::harness;
namespace fs = std::filesystem;

namespace {

const std::string config_text = R"([run]
master_seed = 11
[trap]
r0 = 3.2 mm
z0 = 10 mm
[drive]
omega_rf = 2.5 MHz
v_rf = 500 V
v_ec = 500 V
[photoionization]
rate_coefficient = 1.91e-20 m3/s/(W/cm2)^2
[rate_scan]
trials = 4
[sweep]
v_rf_step = 50 V
[loading]
samples = 11
)";

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string &name)
      : dir(fs::temp_directory_path() / ("paultrap-test-" + name + "-" + std::to_string(::getpid()))) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

fs::path write_file(const fs::path &path, const std::string &text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

std::string slurp(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("SHA-256 test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  Scratch s("sha");
  CHECK(sha256_file(write_file(s.dir / "f", "abc")) == sha256_hex("abc"));
  CHECK_THROWS_AS(sha256_file(s.dir / "missing"), Error);
}

TEST_CASE("CSV cells round-trip doubles") {
  CHECK(format_cell(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_cell(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_cell(std::int64_t{-3}) == "-3");
  CHECK(format_cell(std::uint64_t{7}) == "7");
  CHECK(format_cell(std::string("eb")) == "eb");
}

TEST_CASE("CSV writer layout and comparison") {
  Scratch s("csv");
  const Provenance prov{"abcd", 5, "0.1.0", "unit"};
  {
    CsvWriter w(s.dir / "a.csv", prov, {"x", "y"});
    w.row({1.5, std::int64_t{2}});
    w.row({2.5, std::int64_t{3}});
    CHECK_THROWS_AS(w.row({1.0}), Error);
    w.close();
  }
  const auto text = slurp(s.dir / "a.csv");
  CHECK(text == "# paultrap 0.1.0\n# preset: unit\n# config_digest: abcd\n# seed: 5\nx,y\n1.5,2\n2.5,3\n");

  write_file(s.dir / "b.csv", "# other provenance\nx,y\n1.5,2\n2.5,3\n");
  CHECK(first_difference(s.dir / "a.csv", s.dir / "b.csv").empty());
  write_file(s.dir / "c.csv", "x,y\n1.5,2\n2.5,4\n");
  CHECK(first_difference(s.dir / "a.csv", s.dir / "c.csv") == "row 2, column 2 (y): expected 3, got 4");
  write_file(s.dir / "d.csv", "x,y\n1.5,2\n");
  CHECK_FALSE(first_difference(s.dir / "a.csv", s.dir / "d.csv").empty());
}

TEST_CASE("presets") {
  CHECK(parse_preset("fig4") == Preset::fig4);
  CHECK(preset_name(Preset::fig6a) == "fig6a");
  CHECK(all_presets().size() == 10);
  CHECK_THROWS_WITH_AS(parse_preset("fig7"),
                       doctest::Contains("accepted: stability, secular"), ValidationError);
}

TEST_CASE("run record JSON") {
  RunRecord r;
  r.version = "0.1.0";
  r.preset = "secular";
  r.config_path = "/tmp/x.cfg";
  r.config_digest = "00ff";
  r.seed = 18446744073709551615ull;
  r.started = "2026-01-01T00:00:00Z";
  r.finished = "2026-01-01T00:00:01Z";
  r.outputs = {{"secular.csv", "aa"}};
  const auto back = record_from_json(record_to_json(r));
  CHECK(back.seed == r.seed);
  CHECK(back.outputs.size() == 1);
  CHECK(back.outputs[0].sha256 == "aa");
  CHECK(back.tool == "paultrap");
  CHECK_THROWS_AS(record_from_json("{\"tool\": 1}"), ValidationError);
  CHECK_THROWS_AS(record_from_json("not json"), ValidationError);
  CHECK_THROWS_AS(read_record("/nonexistent/record.json"), ValidationError);
}

TEST_CASE("output directory lock") {
  Scratch s("lock");
  {
    DirectoryLock first(s.dir);
    CHECK(fs::exists(s.dir / ".paultrap.lock"));
    CHECK_THROWS_AS(DirectoryLock(s.dir), ValidationError);
  }
  CHECK_FALSE(fs::exists(s.dir / ".paultrap.lock"));
  CHECK_NOTHROW(DirectoryLock(s.dir));
}

TEST_CASE("electron-bombardment mixture keeps the primary share") {
  trap::TrapGeometry g;
  g.kappa_axial = 1.44e-3;
  const trap::DriveSettings d{units::two_pi * 2.5e6, 500.0, 500.0};
  loading::EBSource eb;
  const auto r = eb_mixture_recipe(eb, trap::strontium88(), 200, 1e-3, g, d);
  // 18 u and 28 u cannot be trapped at 500 V; 44 u and 104 u share 34%
  REQUIRE(r.composition.size() == 3);
  CHECK(r.composition[0].count == 132);
  CHECK(r.composition[1].count == 34);
  CHECK(r.composition[2].count == 34);
  CHECK(r.initial_temperature == 1e-3);

  SUBCASE("largest remainders fill the total") {
    const auto odd = eb_mixture_recipe(eb, trap::strontium88(), 7, 1e-3, g, d);
    std::size_t total = 0;
    for (const auto &c : odd.composition)
      total += c.count;
    CHECK(total == 7);
  }
  SUBCASE("no trappable impurity leaves a pure cloud") {
    eb.impurity_species.resize(1);
    eb.impurity_species[0].weight = 1.0;
    const auto pure = eb_mixture_recipe(eb, trap::strontium88(), 50, 1e-3, g, d);
    REQUIRE(pure.composition.size() == 1);
    CHECK(pure.composition[0].count == 50);
  }
  SUBCASE("untrappable primary") {
    const trap::DriveSettings hot{units::two_pi * 2.5e6, 1200.0, 500.0};
    CHECK_THROWS_AS(eb_mixture_recipe(eb, trap::strontium88(), 50, 1e-3, g, hot), UnstableParameters);
  }
}

TEST_CASE("secular preset output") {
  Scratch s("secular");
  const auto cfg = parse_config(config_text);
  const auto record = run_scenario(cfg, Preset::secular, s.dir);
  REQUIRE(record.outputs.size() == 1);
  CHECK(record.seed == 11);
  CHECK(record.config_digest == config_digest(cfg));
  CHECK(fs::exists(s.dir / "secular_record.json"));
  const auto rows = oracle::read_csv(s.dir / "secular.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][6] == "nu_radial_hz");
  CHECK(std::stod(rows[1][8]) == doctest::Approx(20e3));
  CHECK(std::stod(rows[1][7]) == doctest::Approx(399090.856).epsilon(1e-8));
  CHECK(record.outputs[0].sha256 == sha256_file(s.dir / "secular.csv"));
}

TEST_CASE("stochastic presets are reproducible from the seed") {
  Scratch a("det-a"), b("det-b");
  const auto cfg = parse_config(config_text);
  const auto ra = run_scenario(cfg, Preset::fig5, a.dir);
  const auto rb = run_scenario(cfg, Preset::fig5, b.dir);
  REQUIRE(ra.outputs.size() == 2);
  for (std::size_t i = 0; i < ra.outputs.size(); ++i)
    CHECK(ra.outputs[i].sha256 == rb.outputs[i].sha256);

  auto other = cfg;
  other.master_seed = 12;
  Scratch c("det-c");
  const auto rc = run_scenario(other, Preset::fig5, c.dir);
  CHECK(rc.outputs[0].sha256 != ra.outputs[0].sha256);
}

TEST_CASE("replay") {
  Scratch s("replay");
  const auto cfg_path = write_file(s.dir / "run.cfg", config_text);
  const auto out = s.dir / "out";
  run_scenario(load_config(cfg_path), Preset::fig6a, out);
  const auto record = out / "fig6a_record.json";

  SUBCASE("identical outputs pass") {
    const auto report = replay(record);
    CHECK(report.passed());
    CHECK(report.files.size() == 2);
  }
  SUBCASE("a tampered file fails with its first difference") {
    auto text = slurp(out / "fig6a_curves.csv");
    const auto pos = text.find("\n80,");
    REQUIRE(pos != std::string::npos);
    text.replace(pos + 1, 2, "81");
    write_file(out / "fig6a_curves.csv", text);
    const auto report = replay(record);
    CHECK_FALSE(report.passed());
    CHECK(report.files[0].detail.find("column 1 (v_rf_v)") != std::string::npos);
    CHECK(report.files[1].pass);
  }
  SUBCASE("a changed configuration is refused before simulating") {
    write_file(cfg_path, config_text + "[spectrum]\ndwell = 1 ms\n");
    CHECK_THROWS_AS(replay(record), DigestMismatch);
  }
  SUBCASE("a seed override in the config file is replayed with the recorded seed") {
    auto text = config_text;
    text.replace(text.find("master_seed = 11"), 16, "master_seed = 12");
    const auto other = write_file(s.dir / "other.cfg", text);
    CHECK(replay(record, other).passed());
  }
}

TEST_CASE("loading presets") {
  Scratch s("loading");
  const auto cfg = parse_config(config_text);
  run_scenario(cfg, Preset::loadcurve, s.dir);
  const auto summary = oracle::read_csv(s.dir / "loadcurve_summary.csv");
  REQUIRE(summary.size() == 2);
  const double t95 = std::stod(summary[1][5]);
  CHECK(t95 > 20.0);
  CHECK(t95 < 60.0);

  run_scenario(cfg, Preset::volume, s.dir);
  const auto volume = oracle::read_csv(s.dir / "volume.csv");
  CHECK(volume.size() == 11);
  run_scenario(cfg, Preset::stability, s.dir);
  CHECK(oracle::read_csv(s.dir / "stability.csv")[1][4] == "1");
  run_scenario(cfg, Preset::ratescan, s.dir);
  CHECK(oracle::read_csv(s.dir / "ratescan.csv").size() == 8);
}

}
