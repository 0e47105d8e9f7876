#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "convpinn/runner.hpp"

using namespace convpinn;
using namespace convpinn::cliio;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& leaf) {
    const auto dir = fs::temp_directory_path() / "convpinn_runner" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

/// Drop the trailing (wall-time) column of every CSV line.
std::string strip_last_column(const std::string& csv) {
    std::istringstream is(csv);
    std::string line, out;
    while (std::getline(is, line)) {
        const auto comma = line.rfind(',');
        out += line.substr(0, comma);
        out += '\n';
    }
    return out;
}

RunConfig tiny_elliptic(const fs::path& outdir) {
    RunConfig cfg;
    cfg.problem = "elliptic";
    cfg.nh = 9;
    cfg.nw = 17;
    cfg.channels = 2;
    cfg.fd = 2;
    cfg.adam = 5;
    cfg.lr = 1e-3;
    cfg.lbfgs = 2;
    cfg.lbfgs_inner = 2;
    cfg.cadence = 1;
    cfg.outdir = outdir.string();
    return cfg;
}

} // namespace

TEST_CASE("run: artifacts land in the output directory", "[runner]") {
    const auto dir = fresh_dir("happy");
    auto out = run(tiny_elliptic(dir));
    REQUIRE(out.exit_code == kExitOk);
    REQUIRE(out.trained);
    CHECK(out.message.rfind("eps=", 0) == 0);
    CHECK(out.param_count > 0);
    CHECK(out.flops_per_forward > 0);

    for (const char* name : {"config.txt", "oracle.fgrd", "report.csv",
                             "pred.fgrd", "summary.txt", "params-adam.mrfw",
                             "params-lbfgs.mrfw"}) {
        INFO(name);
        CHECK(fs::exists(dir / name));
    }

    const Field pred = read_fgrd(dir / "pred.fgrd");
    CHECK(pred.channels == 1);
    CHECK(pred.grid.nh == 9);
    CHECK(pred.grid.nw == 17);

    const std::string summary = slurp(dir / "summary.txt");
    CHECK(summary.find("eps=") != std::string::npos);
    CHECK(summary.find("params=") != std::string::npos);
    CHECK(summary.find("R_branch2=") != std::string::npos);

    // The normalized config on disk parses back to the effective settings.
    auto cfg2 = parse_run_config_text(slurp(dir / "config.txt"));
    CHECK(cfg2.weights == "manual:1,1000");
    CHECK(cfg2.adam == 5);
}

TEST_CASE("run: refuses to overwrite without force", "[runner]") {
    const auto dir = fresh_dir("overwrite");
    REQUIRE(run(tiny_elliptic(dir)).exit_code == kExitOk);

    auto again = run(tiny_elliptic(dir));
    CHECK(again.exit_code == kExitConfig);
    CHECK(again.message.find("force") != std::string::npos);

    CHECK(run(tiny_elliptic(dir), true).exit_code == kExitOk);
}

TEST_CASE("run: config errors write nothing", "[runner]") {
    const auto dir = fresh_dir("cfgerr");
    auto cfg = tiny_elliptic(dir);
    cfg.problem = "warp-field";
    auto out = run(cfg);
    CHECK(out.exit_code == kExitConfig);
    CHECK_FALSE(out.trained);
    CHECK_FALSE(fs::exists(dir));

    auto cfg2 = tiny_elliptic(fresh_dir("cfgerr2"));
    cfg2.fd = 5;
    CHECK(run(cfg2).exit_code == kExitConfig);
    CHECK_FALSE(fs::exists(cfg2.outdir));
}

TEST_CASE("run: oracle failure exits 3 with an error note", "[runner]") {
    // The wave operator on this grid has a resonant null mode, so the
    // reference solve fails before training starts.
    const auto dir = fresh_dir("resonant");
    auto cfg = tiny_elliptic(dir);
    cfg.problem = "hyperbolic";
    cfg.nh = 17;
    cfg.nw = 33;
    auto out = run(cfg);
    CHECK(out.exit_code == kExitNumerical);
    CHECK_FALSE(out.trained);
    CHECK(fs::exists(dir / "config.txt"));
    CHECK(fs::exists(dir / "error.txt"));
    CHECK_FALSE(fs::exists(dir / "report.csv"));
}

TEST_CASE("run: divergence exits 3 but keeps partial artifacts", "[runner]") {
    const auto dir = fresh_dir("diverge");
    auto cfg = tiny_elliptic(dir);
    cfg.lr = 1e9; // blow past the divergence threshold within a few steps
    cfg.adam = 50;
    auto out = run(cfg);
    CHECK(out.exit_code == kExitNumerical);
    CHECK(out.trained);
    CHECK(out.report.diverged);
    CHECK(fs::exists(dir / "report.csv"));
    CHECK(fs::exists(dir / "error.txt"));
    CHECK(slurp(dir / "summary.txt").find("diverged=true") !=
          std::string::npos);
}

TEST_CASE("run: swirl problem trains without a reference", "[runner]") {
    const auto dir = fresh_dir("swirl");
    RunConfig cfg;
    cfg.problem = "ns-swirl";
    cfg.nh = 7;
    cfg.nw = 9;
    cfg.channels = 2;
    cfg.fd = 2;
    cfg.adam = 2;
    cfg.lbfgs = 0;
    cfg.cadence = 1;
    cfg.outdir = dir.string();
    auto out = run(cfg);
    REQUIRE(out.exit_code == kExitOk);
    CHECK(out.message == "ok");
    CHECK_FALSE(fs::exists(dir / "oracle.fgrd"));
    CHECK(read_fgrd(dir / "pred.fgrd").channels == 4);
}

TEST_CASE("run: byte-identical artifacts for a repeated seed", "[runner]") {
    const auto d1 = fresh_dir("det1");
    const auto d2 = fresh_dir("det2");
    auto c1 = tiny_elliptic(d1);
    auto c2 = tiny_elliptic(d2);
    c2.outdir = d2.string();
    REQUIRE(run(c1).exit_code == kExitOk);
    REQUIRE(run(c2).exit_code == kExitOk);

    CHECK(slurp(d1 / "pred.fgrd") == slurp(d2 / "pred.fgrd"));
    CHECK(slurp(d1 / "oracle.fgrd") == slurp(d2 / "oracle.fgrd"));
    CHECK(strip_last_column(slurp(d1 / "report.csv")) ==
          strip_last_column(slurp(d2 / "report.csv")));
}

TEST_CASE("matrix: one row per cell with eps columns", "[runner]") {
    const auto dir = fresh_dir("matrix");
    auto base = tiny_elliptic(dir / "unused");
    auto rc = matrix(base, {{"fd", {"2", "4"}}, {"channels", {"2"}}},
                     dir.string());
    REQUIRE(rc == kExitOk);

    const std::string csv = slurp(dir / "matrix.csv");
    std::istringstream is(csv);
    std::string header, r1, r2, extra;
    REQUIRE(std::getline(is, header));
    REQUIRE(std::getline(is, r1));
    REQUIRE(std::getline(is, r2));
    CHECK_FALSE(std::getline(is, extra));
    CHECK(header.rfind("fd,channels,status,eps0,backwards,wall_s", 0) == 0);
    CHECK(r1.rfind("2,2,ok,", 0) == 0);
    CHECK(r2.rfind("4,2,ok,", 0) == 0);
    CHECK(fs::exists(dir / "fd=2__channels=2" / "summary.txt"));
    CHECK(fs::exists(dir / "fd=4__channels=2" / "summary.txt"));
}

TEST_CASE("matrix: a failing cell is recorded and the sweep continues",
          "[runner]") {
    const auto dir = fresh_dir("matrix_fail");
    auto base = tiny_elliptic(dir / "unused");
    base.problem = "hyperbolic";
    // 17x33 has equal spacings on the 1x2 box, which makes the wave
    // operator singular; 9x15 does not.
    auto rc = matrix(base, {{"resolution", {"9x15", "17x33"}}}, dir.string());
    REQUIRE(rc == kExitOk);

    const std::string csv = slurp(dir / "matrix.csv");
    CHECK(csv.find("9x15,ok,") != std::string::npos);
    CHECK(csv.find("17x33,error(3):") != std::string::npos);
}

TEST_CASE("matrix: bad axes are rejected before any files appear",
          "[runner]") {
    const auto dir = fresh_dir("matrix_bad");
    auto base = tiny_elliptic(dir / "unused");
    std::string err;
    CHECK(matrix(base, {{"warp", {"1"}}}, dir.string(), 1, false, &err) ==
          kExitConfig);
    CHECK(err.find("warp") != std::string::npos);
    CHECK_FALSE(fs::exists(dir));

    CHECK(matrix(base, {}, dir.string(), 1, false, &err) == kExitConfig);
    CHECK(matrix(base, {{"fd", {}}}, dir.string(), 1, false, &err) ==
          kExitConfig);
}

TEST_CASE("matrix: parallel cells reproduce the serial result", "[runner]") {
    const auto d1 = fresh_dir("matrix_ser");
    const auto d2 = fresh_dir("matrix_par");
    auto base = tiny_elliptic(d1 / "unused");
    const std::vector<MatrixAxis> axes = {{"seed", {"0", "1", "2"}}};
    REQUIRE(matrix(base, axes, d1.string(), 1) == kExitOk);
    REQUIRE(matrix(base, axes, d2.string(), 3) == kExitOk);
    CHECK(strip_last_column(slurp(d1 / "matrix.csv")) ==
          strip_last_column(slurp(d2 / "matrix.csv")));
}
