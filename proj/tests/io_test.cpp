#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace pwq;

TEST(IO, DiffMaxRoundTrip) {
  const Instance inst = randomInstance("twopiece", {}, 3);
  const DiffMaxProgram& f = *inst.program;
  const DiffMaxProgram g = io::diffMaxFromJson(io::parseJson(io::toJson(f).dump(), "mem"));
  ASSERT_EQ(g.plus.size(), f.plus.size());
  EXPECT_EQ(g.plus[1].hessian(), f.plus[1].hessian());
  EXPECT_EQ(g.minus[0].linear(), f.minus[0].linear());
  EXPECT_EQ(g.feasible.A(), f.feasible.A());
  EXPECT_EQ(g.feasible.b(), f.feasible.b());
}

TEST(IO, DQCInfiniteBoundsAreNull) {
  const DQCProgram tr = makeTrustRegion(-Mat::Identity(1, 1), Vec::Zero(1), Mat::Identity(1, 1), 0.5);
  const io::Json j = io::toJson(tr);
  EXPECT_TRUE(j["beta1"].is_null());
  const DQCProgram back = io::dqcFromJson(j);
  EXPECT_EQ(back.beta1, -kInf);
  EXPECT_EQ(back.beta2, 0.5);
}

TEST(IO, SyntaxErrorReportsLine) {
  try {
    io::parseJson("{\n  \"plus\": [\n  1,,\n]}", "p.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "input-error");
    EXPECT_NE(std::string(e.what()).find("p.json:3:"), std::string::npos) << e.what();
  }
}

TEST(IO, SchemaErrorNamesField) {
  try {
    io::diffMaxFromJson(io::parseJson(R"({"plus": [{"Q": [[1, 2]], "q": [0]}], "minus": []})", "p"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("problem.plus[0].Q[0]"), std::string::npos) << e.what();
  }
}

TEST(IO, NumbersUseSeventeenDigits) {
  EXPECT_EQ(io::formatNumber(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(io::formatNumber(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(IO, DatasetCsv) {
  const Dataset d = io::parseDatasetCsv("# comment\nx1,x2,y\n1,2,3\n\n4,5,6\n", "d.csv");
  EXPECT_EQ(d.size(), 2);
  EXPECT_EQ(d.dim(), 2);
  EXPECT_EQ(d.x(1, 0), 4.0);
  EXPECT_EQ(d.y(1), 6.0);
  const Dataset back = io::parseDatasetCsv(io::datasetCsv(d), "mem");
  EXPECT_EQ(back.x, d.x);
  try {
    io::parseDatasetCsv("x1,y\n1,2\n3\n", "d.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("d.csv:3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(io::parseDatasetCsv("a,y\n1,2\n", "d.csv"), Error);
}

TEST(IO, RegressConfig) {
  const auto c = io::regressConfigFromJson(io::parseJson(R"({"k1": 3, "k2": 0, "starts": 7, "seed": 9})", "c"));
  EXPECT_EQ(c.k1, 3);
  EXPECT_EQ(c.k2, 0);
  EXPECT_EQ(c.starts, 7);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_THROW(io::regressConfigFromJson(io::parseJson(R"({"k1": 0})", "c")), Error);
}

TEST(IO, ValueSetCsv) {
  ValueSet vs;
  vs.add(-0.5, Vec::Constant(1, 1.0), "qp-face");
  const std::string csv = io::valueSetCsv(vs, "# h\n");
  EXPECT_EQ(csv, "# h\nvalue,branch,x1\n-0.5,qp-face,1\n");
}
