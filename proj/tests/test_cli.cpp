#include <gwcouple/cli.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace gwcouple;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({"sample"}).code, 2);
  EXPECT_EQ(run({"sample", "--p", "0.75", "--format", "xml"}).code, 2);
  EXPECT_EQ(run({"couple", "--grid", "0.75,0.5"}).code, 2);
  EXPECT_EQ(run({"verify", "nope"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, PEqualsOneRejected) {
  auto r = run({"sample", "--p", "1.0"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("p = 1"), std::string::npos);
}

TEST(Cli, SampleReproducible) {
  std::vector<std::string> args{"sample", "--p", "3/4", "--depth", "3", "--samples", "20", "--seed", "5", "--format", "json"};
  auto a = run(args), b = run(args);
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_FALSE(a.out.empty());
  args[8] = "6";
  EXPECT_NE(run(args).out, a.out);
}

TEST(Cli, ThreadCountDoesNotChangeOutput) {
  std::vector<std::string> args{"couple", "--grid", "0.5,0.75", "--depth", "2", "--samples", "200", "--threads", "1"};
  auto a = run(args);
  args.back() = "3";
  auto b = run(args);
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, CoupleJsonSummary) {
  auto r = run({"couple", "--grid", "0.5,0.75", "--depth", "1", "--samples", "300", "--emit", "0", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.is_object());
}

TEST(Cli, TransportCsv) {
  auto r = run({"transport", "--k", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "tree_k,tree_k1,weight_numerator,weight_denominator\n"
            "\"[[]]\",\"[[[]]]\",1,2\n"
            "\"[[]]\",\"[[],[]]\",1,2\n");
}

TEST(Cli, NaiveDemoText) {
  auto a = run({"demo", "naive", "--p1", "0.6", "--p2", "0.7"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("0.6 > 0.4"), std::string::npos) << a.out;
  auto b = run({"demo", "naive", "--p1", "0.6", "--p2", "0.9"});
  EXPECT_NE(b.out.find("0.6 < 0.8"), std::string::npos) << b.out;
  EXPECT_EQ(run({"demo", "naive", "--p1", "0.9", "--p2", "0.6"}).code, 2);
}

TEST(Cli, VerifyExitCodes) {
  auto r = run({"verify", "naive_demo", "identities"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("suite naive_demo"), std::string::npos);
  EXPECT_EQ(r.out, run({"verify", "naive_demo", "identities"}).out);
}

TEST(Cli, SampleDotFormat) {
  auto r = run({"sample", "--p", "0.6", "--depth", "2", "--samples", "1", "--format", "dot"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("digraph"), std::string::npos);
}
