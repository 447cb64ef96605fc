#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  static fs::path dir;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / ("cfcnn-cli-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    ASSERT_EQ(run("gen-data --out " + path("blobs.txt") + " --tangent-out " + path("blobs.tan") +
                  " --count 12 --rows 6 --cols 6 --seed 5")
                  .code,
              0);
    write("fc.cfg", config("tanh", ""));
    write("reg.cfg", config("tanh", "lambda = 0.1\ntangent = " + path("blobs.tan") + "\n"));
    write("relu.cfg", config("relu", "lambda = 0.1\ntangent = " + path("blobs.tan") + "\n"));
  }

  static void TearDownTestSuite() { fs::remove_all(dir); }

  static std::string path(const std::string& name) { return (dir / name).string(); }

  static void write(const std::string& name, const std::string& text) { std::ofstream(dir / name) << text; }

  static std::string config(const std::string& activation, const std::string& extra) {
    return "eta = 0.01\niterations = 5\nseed = 3\ninit_scale = 0.3\ndata = " + path("blobs.txt") + "\n" + extra +
           "[layer]\nin_rows = 6\nin_cols = 6\nin_depth = 1\nfilter_rows = 3\nfilter_cols = 3\npool = 2\n"
           "out_depth = 2\nactivation = " + activation +
           "\n[layer]\nin_rows = 2\nin_cols = 2\nin_depth = 2\nfilter_rows = 2\nfilter_cols = 2\n"
           "out_depth = 2\nactivation = tanh\n";
  }

  static Result run(const std::string& args) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string(CFCNN_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  static std::vector<std::vector<std::string>> rows(const std::string& text) {
    std::vector<std::vector<std::string>> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
      std::istringstream ls(line);
      std::vector<std::string> fields;
      for (std::string f; ls >> f;) fields.push_back(f);
      if (!fields.empty()) out.push_back(fields);
    }
    return out;
  }
};

fs::path Cli::dir;

}  // namespace

TEST_F(Cli, TrainZeroIterationsWritesEmptyCurve) {
  const auto r = run("train " + path("fc.cfg") + " --iterations 0 --out " + path("empty.txt"));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(rows(slurp(path("empty.txt"))).empty());
}

TEST_F(Cli, TrainCurvesAreReproducible) {
  for (const std::string mode : {"single", "batch"}) {
    ASSERT_EQ(run("train " + path("reg.cfg") + " --mode " + mode + " --out " + path("c1.txt")).code, 0);
    ASSERT_EQ(run("train " + path("reg.cfg") + " --mode " + mode + " --out " + path("c2.txt")).code, 0);
    const auto a = slurp(path("c1.txt"));
    EXPECT_EQ(a, slurp(path("c2.txt")));
    const auto curve = rows(a);
    ASSERT_EQ(curve.size(), 5u);
    for (std::size_t i = 0; i < curve.size(); ++i) {
      ASSERT_EQ(curve[i].size(), 4u);
      EXPECT_EQ(curve[i][0], std::to_string(i + 1));
      EXPECT_GT(std::stod(curve[i][2]), 0.0);
    }
  }
}

TEST_F(Cli, TrainWithoutPenaltyHasZeroRColumn) {
  const auto r = run("train " + path("fc.cfg"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto curve = rows(r.out);
  ASSERT_EQ(curve.size(), 5u);
  for (const auto& row : curve) EXPECT_EQ(row[2], "0");
}

TEST_F(Cli, FlagsOverrideConfig) {
  const auto r = run("train " + path("fc.cfg") + " --iterations 2 --eta 0.02 --params-out " + path("p.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(rows(r.out).size(), 2u);
  EXPECT_EQ(slurp(path("p.txt")).rfind("cfcnn-params 2", 0), 0u);
  const auto a = run("train " + path("fc.cfg") + " --iterations 2 --eta 0.02").out;
  const auto b = run("train " + path("fc.cfg") + " --iterations 2").out;
  EXPECT_NE(a, b);
}

TEST_F(Cli, ReluWithPenaltyRejected) {
  const auto r = run("train " + path("relu.cfg"));
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
  EXPECT_EQ(run("train " + path("relu.cfg") + " --lambda 0").code, 0);
}

TEST_F(Cli, GradCheckPasses) {
  const auto r = run("grad-check " + path("reg.cfg"));
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("grad-check J PASS"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("grad-check R PASS"), std::string::npos) << r.out;
}

TEST_F(Cli, GradCheckDetectsSignFlip) {
  const auto r = run("--defect gradient-sign-flip grad-check " + path("fc.cfg"));
  EXPECT_EQ(r.code, 1) << r.out << r.err;
  EXPECT_NE(r.out.find("grad-check J FAIL"), std::string::npos) << r.out;
}

TEST_F(Cli, AdjointCheckDefaultAndDimOne) {
  for (const char* args : {"", " --dims 1"}) {
    const auto r = run(std::string("adjoint-check") + args);
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
    for (const auto& row : rows(r.out)) {
      ASSERT_EQ(row.size(), 5u);
      EXPECT_EQ(row[0], "CHECK");
    }
  }
}

TEST_F(Cli, AdjointCheckDetectsMutant) {
  const auto r = run("--defect pool-adjoint-unscaled adjoint-check --trials 10");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, UsageAndIoErrors) {
  for (const std::string& args : {"train " + path("missing.cfg"), std::string("train"), std::string("frobnicate"),
                                 std::string("adjoint-check --dims 0"), std::string("--defect nope adjoint-check"),
                                 "train " + path("fc.cfg") + " --mode sideways"}) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 2) << args;
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << args << ": " << r.err;
  }
}
