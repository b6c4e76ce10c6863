#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "ioncav/config.hpp"
#include "ioncav/errors.hpp"
#include "ioncav/manifest.hpp"
#include "ioncav/semiclassical.hpp"
#include "ioncav/sweep.hpp"

namespace fs = std::filesystem;
using namespace ioncav;

namespace {

const std::string kBase =
    "kappa_ratio = 1\n"
    "xeq_scale = 3\n"
    "cooperativity = 2\n"
    "delta_c_ratio = 0\n";

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("ioncav_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    os << text;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(IONCAV_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, CooperativityResolvesU0) {
    const auto c = parse_config_text("kappa_ratio = 0.5\nxeq_scale = 3\ncooperativity = 2\neta_eff = 0.7\n");
    EXPECT_DOUBLE_EQ(c.base.u0, 1.0);
    EXPECT_EQ(c.resolved().at("u0_ratio"), "1");
    ASSERT_EQ(c.points().size(), 1u);
    EXPECT_NEAR(eta_eff(c.points()[0]), 0.7, 1e-14);
}

TEST(Config, PumpPairIsExclusive) {
    EXPECT_THROW(parse_config_text(kBase + "eta_eff = 0.5\neta_ratio = 1.0\n"), ConfigError);
    EXPECT_THROW(parse_config_text(kBase), ConfigError);
    try {
        parse_config_text(kBase + "eta_eff = 0.5\neta_ratio = 1.0\n");
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("eta_ratio"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("eta_eff"), std::string::npos);
    }
}

TEST(Config, CouplingPairIsExclusive) {
    EXPECT_THROW(parse_config_text("kappa_ratio = 1\nxeq_scale = 3\nu0_ratio = 2\ncooperativity = 2\neta_eff = 1\n"),
                 ConfigError);
    EXPECT_THROW(parse_config_text("kappa_ratio = 1\nxeq_scale = 3\neta_eff = 1\n"), ConfigError);
}

TEST(Config, RejectsUnknownDuplicateAndMalformed) {
    EXPECT_THROW(parse_config_text(kBase + "eta_eff = 1\nwarp = 3\n"), ConfigError);
    EXPECT_THROW(parse_config_text(kBase + "eta_eff = 1\nseed = 1\nseed = 2\n"), ConfigError);
    try {
        parse_config_text(kBase + "eta_eff = 1\nn_traj = many\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("n_traj"), std::string::npos);
    }
    EXPECT_THROW(parse_config_text("xeq_scale = 3\ncooperativity = 2\neta_eff = 1\n"), ConfigError);
    EXPECT_THROW(parse_config_text(kBase + "eta_eff = 1\nintegrator = rk4\n"), ConfigError);
    EXPECT_THROW(parse_config_text(kBase + "eta_eff = 1\nkappa_ratio = -1\n"), ConfigError);
}

TEST(Config, ValueLists) {
    EXPECT_EQ(parse_value_list("k", "0.5"), std::vector<double>{0.5});
    EXPECT_EQ(parse_value_list("k", "1, 2,3"), (std::vector<double>{1, 2, 3}));
    const auto r = parse_value_list("k", "0.5:2.0:4");
    ASSERT_EQ(r.size(), 4u);
    EXPECT_DOUBLE_EQ(r[0], 0.5);
    EXPECT_DOUBLE_EQ(r[3], 2.0);
    EXPECT_THROW(parse_value_list("k", "1:2"), ConfigError);
    EXPECT_THROW(parse_value_list("k", ""), ConfigError);
}

TEST(Config, CommentsAndWhitespace) {
    const auto c = parse_config_text("# header\n\n  kappa_ratio=1   # inline\nxeq_scale = 3\ncooperativity = 2\neta_eff = 0.5\n");
    EXPECT_DOUBLE_EQ(c.base.kappa, 1.0);
}

TEST(Config, EtaRatioPump) {
    const auto c = parse_config_text(kBase + "eta_ratio = 1.5,3\n");
    ASSERT_EQ(c.points().size(), 2u);
    EXPECT_DOUBLE_EQ(c.points()[1].eta, 3.0);
    EXPECT_NEAR(c.eta_eff_values()[1], 3.0 / 3.0, 1e-14);
}

TEST(Manifest, GitBlobHash) {
    EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
    EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Manifest, HashTracksResolvedParametersOnly) {
    const auto a = parse_config_text(kBase + "eta_eff = 0.5\n");
    const auto b = parse_config_text(kBase + "eta_eff = 0.5\nthreads = 8\n");
    const auto c = parse_config_text(kBase + "eta_eff = 0.5\nseed = 2\n");
    const auto d = parse_config_text("kappa_ratio = 1\nxeq_scale = 3\nu0_ratio = 2\ndelta_c_ratio = 0\neta_eff = 0.5\n");
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_NE(config_hash(a), config_hash(c));
    EXPECT_EQ(config_hash(a), config_hash(d));
    EXPECT_TRUE(is_scheduling_key("threads"));
    EXPECT_FALSE(is_scheduling_key("seed"));
}

TEST(Presets, AllParse) {
    int n = 0;
    for (const auto& e : fs::directory_iterator(IONCAV_PRESETS)) {
        if (e.path().extension() == ".cfg") {
            EXPECT_NO_THROW(parse_config(e.path().string())) << e.path();
            ++n;
        }
    }
    EXPECT_EQ(n, 13);
}

TEST(Presets, SteadyPresetRoundTripsThroughManifest) {
    const auto cfg = parse_config(std::string(IONCAV_PRESETS) + "/steady_xeq3.cfg");
    EXPECT_DOUBLE_EQ(cfg.base.u0, 2.0);
    EXPECT_DOUBLE_EQ(cfg.base.delta_c, 0.0);
    EXPECT_DOUBLE_EQ(cfg.base.xeq, 3.0);
    const fs::path out = scratch("roundtrip");
    run_subcommand("semiclassical", cfg, out.string());
    const auto back = parse_config((out / "manifest.json").string());
    EXPECT_EQ(back.resolved(), cfg.resolved());
    EXPECT_EQ(config_hash(back), config_hash(cfg));
}

TEST(Cli, SemiclassicalSweepWritesMarkers) {
    const fs::path out = scratch("semi");
    write(out / "c.cfg", kBase + "eta_eff = 0.5:2.0:16\n");
    ASSERT_EQ(run_cli("semiclassical --config " + (out / "c.cfg").string() + " --out " + out.string(),
                      out / "log"), 0)
        << slurp(out / "log");
    const std::string markers = slurp(out / "markers.csv");
    EXPECT_NE(markers.find("# manifest: manifest.json config_hash="), std::string::npos);
    EXPECT_NE(markers.find("# units:"), std::string::npos);
    EXPECT_NE(markers.find("0.556957"), std::string::npos) << markers;
    EXPECT_NE(markers.find("0.79056"), std::string::npos) << markers;
    const std::string branches = slurp(out / "semiclassical.csv");
    EXPECT_NE(branches.find("eta_eff,branch,x_bar"), std::string::npos);
    const std::string manifest = slurp(out / "manifest.json");
    EXPECT_NE(manifest.find("\"config_hash\""), std::string::npos);
    EXPECT_NE(manifest.find("\"wall_clock_seconds\""), std::string::npos);
}

TEST(Cli, RerunIsByteIdenticalAcrossThreadCounts) {
    const fs::path out = scratch("repro");
    write(out / "c.cfg", kBase + "gamma_ratio = 0.05\neta_eff = 0.4,0.9\nn_traj = 300\nescape_policy = condition\n");
    const std::string cfg = (out / "c.cfg").string();
    for (const std::string sub : {"sweep", "gaussian"}) {
        ASSERT_EQ(run_cli(sub + " --config " + cfg + " --out " + (out / "a").string() + " --threads 1",
                          out / "log"), 0)
            << slurp(out / "log");
        ASSERT_EQ(run_cli(sub + " --config " + cfg + " --out " + (out / "b").string() + " --threads 4",
                          out / "log"), 0)
            << slurp(out / "log");
        ASSERT_EQ(run_cli(sub + " --config " + (out / "a" / "manifest.json").string() + " --out " +
                              (out / "c").string() + " --threads 3",
                          out / "log"), 0)
            << slurp(out / "log");
        const std::string file = sub == "sweep" ? "sweep.csv" : "gaussian.csv";
        const std::string a = slurp(out / "a" / file);
        EXPECT_FALSE(a.empty());
        EXPECT_EQ(a, slurp(out / "b" / file)) << sub;
        EXPECT_EQ(a, slurp(out / "c" / file)) << sub;
    }
}

TEST(Cli, FailingPointGivesNonzeroExitAndNamesPoint) {
    const fs::path out = scratch("fail");
    write(out / "c.cfg", kBase + "gamma_ratio = 0.05\neta_eff = 0.4,0.9\nn_traj = 100\nt_cap = 1\nmin_time = 5\n");
    const int code = run_cli("sweep --config " + (out / "c.cfg").string() + " --out " + out.string(), out / "log");
    EXPECT_NE(code, 0);
    const std::string log = slurp(out / "log");
    EXPECT_NE(log.find("sweep point 0"), std::string::npos) << log;
    EXPECT_NE(log.find("NoConvergence"), std::string::npos) << log;
}

TEST(Cli, RecordErrorsWritesStatus) {
    const fs::path out = scratch("record");
    write(out / "c.cfg", kBase + "gamma_ratio = 0.05\neta_eff = 0.4\nn_traj = 100\nt_cap = 1\nmin_time = 5\nrecord_errors = true\n");
    ASSERT_EQ(run_cli("sweep --config " + (out / "c.cfg").string() + " --out " + out.string(), out / "log"), 0)
        << slurp(out / "log");
    EXPECT_NE(slurp(out / "sweep.csv").find("NoConvergence"), std::string::npos);
}

TEST(Cli, BadInvocations) {
    const fs::path out = scratch("bad");
    EXPECT_NE(run_cli("semiclassical --out " + out.string(), out / "log"), 0);
    EXPECT_NE(run_cli("nonsense --config x --out y", out / "log"), 0);
    write(out / "c.cfg", kBase + "eta_eff = 0.5\neta_ratio = 2\n");
    EXPECT_EQ(run_cli("semiclassical --config " + (out / "c.cfg").string() + " --out " + out.string(), out / "log"), 2);
    write(out / "d.cfg", kBase + "eta_eff = 0.5\n");
    EXPECT_NE(run_cli("sweep --config " + (out / "d.cfg").string() + " --out " + out.string() + " --integrator rk4",
                      out / "log"), 0);
}
