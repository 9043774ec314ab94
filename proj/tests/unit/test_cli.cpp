#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "l2r/error.hpp"
#include "l2r_cli/cli.hpp"
#include "l2r_cli/run_config.hpp"
#include "l2r_cli/svg.hpp"

using namespace l2r;
using namespace l2r::cli;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("l2r_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Tags must nest; good enough to catch unbalanced or truncated output.
bool balanced_xml(const std::string& text) {
  std::vector<std::string> stack;
  for (std::size_t i = text.find('<'); i != std::string::npos; i = text.find('<', i + 1)) {
    const auto end = text.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = text.substr(i + 1, end - i - 1);
    if (tag.empty() || tag[0] == '?' || tag[0] == '!' || tag.back() == '/') continue;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
    } else {
      stack.push_back(tag.substr(0, tag.find_first_of(" \t\n")));
    }
  }
  return stack.empty();
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, kUsage);
  EXPECT_EQ(run({"no-such-command"}).code, kUsage);
  EXPECT_EQ(run({"sample", "--bogus"}).code, kUsage);
  EXPECT_EQ(run({"chamfer", "--a", "/nonexistent/a.csv", "--b", "/nonexistent/b.csv"}).code, kUsage);
}

TEST(Cli, EndToEndPipelineIsReproducible) {
  const auto dir = scratch("e2e");
  const auto corpus = (dir / "corpus").string();
  ASSERT_EQ(run({"synth-gen", "--seed", "1", "--frames", "6", "--objects", "3", "--out", corpus}).code, kOk);
  const auto gmm = (dir / "gmm.json").string();
  const auto fit = run({"fit-gmm", "--counts", corpus + "/radar_counts.txt", "--components", "2", "--out", gmm});
  ASSERT_EQ(fit.code, kOk) << fit.err;
  EXPECT_NE(fit.out.find("log_likelihood"), std::string::npos);

  std::string first_report;
  for (int rep = 0; rep < 2; ++rep) {
    const auto out = (dir / ("sampled" + std::to_string(rep))).string();
    const auto s = run({"sample", "--input", corpus, "--gmm", gmm, "--seed", "4", "--out", out});
    ASSERT_EQ(s.code, kOk) << s.err;
    const auto report = slurp(fs::path(out) / "report.json");
    EXPECT_NE(report.find("\"version\""), std::string::npos);
    if (rep == 0) {
      first_report = report;
    } else {
      EXPECT_EQ(slurp(fs::path(out) / "frame_0003.csv"), slurp(dir / "sampled0" / "frame_0003.csv"));
    }
  }

  const auto plot = (dir / "plot.svg").string();
  const auto ch = run({"chamfer", "--a", (dir / "sampled0").string(), "--b", corpus + "/radar", "--plot", plot,
                    "--report", (dir / "chamfer.json").string()});
  ASSERT_EQ(ch.code, kOk) << ch.err;
  const auto svg = slurp(plot);
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.rfind("<?xml", 0) == 0, true);
  EXPECT_TRUE(balanced_xml(svg));
  fs::remove_all(dir);
}

TEST(Cli, GradcheckPassAndInjectedFault) {
  const auto ok = run({"gradcheck", "--seed", "0"});
  EXPECT_EQ(ok.code, kOk) << ok.err;
  EXPECT_NE(ok.out.find("total_loss"), std::string::npos);
  const auto bad = run({"gradcheck", "--seed", "0", "--inject-fault", "bcsa"});
  EXPECT_EQ(bad.code, kCheckFailed);
  EXPECT_NE(bad.out.find("bcsa"), std::string::npos);
}

TEST(Cli, ConfigFileAndOverrides) {
  const auto dir = scratch("config");
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "# comment\nseed = 3\nno_such_key = 1\n";
  }
  const auto bad = run({"gradcheck", "--config", (dir / "bad.cfg").string()});
  EXPECT_EQ(bad.code, kUsage);
  EXPECT_NE(bad.err.find("no_such_key"), std::string::npos);
  fs::remove_all(dir);
}

TEST(RunConfig, KeysAndParsing) {
  RunConfig c;
  apply_config_text(c, "seed = 9\n# note\nalpha_dist = 2.5\n\nsteps=7\n");
  EXPECT_EQ(c.sampling.seed, 9u);
  EXPECT_EQ(c.sampling.alpha_dist, 2.5);
  EXPECT_EQ(c.steps, 7u);
  EXPECT_THROW(set_key(c, "nope", "1"), ConfigError);
  try {
    apply_config_text(c, "seed = 1\nseed\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  for (const auto& k : run_config_keys()) EXPECT_NE(to_json(RunConfig{}).find("\"" + std::string(k.name) + "\""), std::string::npos) << k.name;
}

TEST(Svg, EscapesText) {
  EXPECT_EQ(xml_escape("a<b&\"c\">"), "a&lt;b&amp;&quot;c&quot;&gt;");
  const auto svg = scatter_svg({{0, 0, "x<y"}, {1, 2, "z"}}, "T & U", "x", "y");
  EXPECT_EQ(svg.find("x<y"), std::string::npos);
  EXPECT_TRUE(balanced_xml(svg));
}
