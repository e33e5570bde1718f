#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "bruteforce.hpp"
#include "pwq/io.hpp"
#include "pwq/pwq.hpp"

namespace fs = std::filesystem;
using namespace pwq;
using io::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

struct RunConfig {
  std::string out = ".";
  double tolAct = kActiveTolerance;
  double tolStat = kStationarityTolerance;
  double lambdaCap = 1e6;
  double grid = 1e-5;
  std::uint64_t seed = 0;
  int threads = 0;

  StationarityOptions stationarity() const { return {tolAct, tolStat}; }

  Json toleranceJson() const {
    return Json{{"tol_act", tolAct}, {"tol_stat", tolStat}, {"lambda_cap", lambdaCap}, {"grid", grid}, {"seed", seed}};
  }
  std::string csvHeader() const {
    std::ostringstream h;
    h << "# tol_act=" << io::formatNumber(tolAct) << " tol_stat=" << io::formatNumber(tolStat)
      << " lambda_cap=" << io::formatNumber(lambdaCap) << " grid=" << io::formatNumber(grid) << " seed=" << seed
      << "\n";
    return h.str();
  }
  std::string path(const std::string& name) const { return (fs::path(out) / name).string(); }
  int workerCount() const {
    return threads > 0 ? threads : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  }
};

bool isInputError(const std::string& code) {
  static const std::vector<std::string> codes{"input-error",      "dimension-mismatch", "invalid-argument",
                                              "invalid-program",  "point-not-in-X",     "unsupported",
                                              "too-large",        "not-convex",         "not-concave",
                                              "not-strictly-convex", "assumption-not-met", "empty-input",
                                              "empty-generators"};
  return std::find(codes.begin(), codes.end(), code) != codes.end();
}

void writeJson(const RunConfig& cfg, const std::string& name, Json j) {
  j["tolerances"] = cfg.toleranceJson();
  io::writeFile(cfg.path(name), j.dump(2) + "\n");
}

bool isZero(const QuadraticFn& q) {
  return q.hessian().cwiseAbs().maxCoeff() == 0.0 && q.linear().cwiseAbs().maxCoeff() == 0.0 && q.constant() == 0.0;
}

bool allZero(const MaxOfQuadratics& m) {
  for (int i = 0; i < m.size(); ++i)
    if (!isZero(m[i])) return false;
  return true;
}

std::string chooseMethod(const DiffMaxProgram& f) {
  const bool unconstrained = f.feasible.numInequalities() == 0 && f.feasible.numEqualities() == 0;
  if (f.plus.size() == 1 && allZero(f.minus)) return "qp";
  if (unconstrained && f.plus.size() == 2 && f.minus.size() == 1 && (isZero(f.plus[0]) || isZero(f.plus[1])))
    return "problem5";
  bool convex = true, concave = true;
  for (int i = 0; i < f.plus.size(); ++i) convex = convex && f.plus[i].isConvex();
  for (int j = 0; j < f.minus.size(); ++j) concave = concave && f.minus[j].isConcave();
  if (convex && concave) return "convex";
  if (f.plus.size() <= 2 && f.minus.size() <= 2) return "twopiece";
  throw Error("unsupported", "no enumerator applies: need a QP, max(f1, 0) - f2, convex minus concave, or at most two pieces per max");
}

ValueSet runEnumerator(const DiffMaxProgram& f, const std::string& method, const EnumerateOptions& opt) {
  if (method == "qp") return enumerateQPValues(f.plus[0], f.feasible, opt);
  if (method == "problem5") return enumerateProblem5Values(isZero(f.plus[0]) ? f.plus[1] : f.plus[0], f.minus[0], opt);
  if (method == "convex") return enumerateConvexMinusMaxConcave(f, opt);
  if (method == "twopiece") return enumerateTwoPieceDiffMax(f, opt);
  throw Error("unsupported", "unknown method '" + method + "'");
}

int cmdCheck(const RunConfig& cfg, const std::string& problem, const std::string& point) {
  const DiffMaxProgram f = io::diffMaxFromJson(io::readJsonFile(problem));
  const Vec x = io::pointFromJson(io::readJsonFile(point), f.dim());
  const StationarityCertificate c = checkDStationary(f, x, cfg.stationarity());
  Json j = io::toJson(c);
  j["point"] = io::toJson(x);
  j["value"] = io::number(evaluate(f, x));
  writeJson(cfg, "certificate.json", j);
  std::cout << toString(c.verdict) << "\n";
  return c.verdict == Verdict::kInconclusive ? kExitNumerical : kExitOk;
}

int cmdEnumerate(const RunConfig& cfg, const std::string& problem, std::string method, bool oracleRun, int starts) {
  const DiffMaxProgram f = io::diffMaxFromJson(io::readJsonFile(problem));
  if (method == "auto") method = chooseMethod(f);
  EnumerateOptions opt;
  opt.stationarity = cfg.stationarity();
  const ValueSet vs = runEnumerator(f, method, opt);
  io::writeFile(cfg.path("values.csv"), io::valueSetCsv(vs, cfg.csvHeader() + "# method=" + method + "\n"));
  Json j = io::toJson(vs);
  j["method"] = method;
  writeJson(cfg, "values.json", j);
  for (double v : vs.values()) std::cout << io::formatNumber(v) << "\n";
  int status = vs.complete() ? kExitOk : kExitNumerical;

  if (oracleRun) {
    oracle::OracleOptions o;
    o.starts = starts;
    const auto pts = oracle::bruteForceStationary(f, cfg.seed, o);
    std::ostringstream diff;
    diff << cfg.csvHeader() << "# oracle_starts=" << starts << "\n" << "oracle_value,nearest_enumerated,gap\n";
    int missing = 0;
    for (double v : oracle::distinctValues(pts)) {
      double nearest = kInf, gap = kInf;
      for (double e : vs.values())
        if (std::abs(e - v) < gap) gap = std::abs(e - v), nearest = e;
      if (gap <= 1e-5) continue;
      ++missing;
      diff << io::formatNumber(v) << "," << io::formatNumber(nearest) << "," << io::formatNumber(gap) << "\n";
    }
    io::writeFile(cfg.path("oracle_diff.csv"), diff.str());
    std::cerr << "oracle: " << pts.size() << " stationary points, " << missing << " values not enumerated\n";
    if (missing > 0) status = kExitNumerical;
  }
  return status;
}

int cmdBCheck(const RunConfig& cfg, const std::string& problem, const std::string& point) {
  const DQCProgram p = io::dqcFromJson(io::readJsonFile(problem));
  const Vec x = io::pointFromJson(io::readJsonFile(point), p.dim());
  const BCertificate c = checkBStationary(p, x, cfg.stationarity());
  Json j = io::toJson(c);
  j["point"] = io::toJson(x);
  j["value"] = io::number(p.objective(x));
  writeJson(cfg, "bcertificate.json", j);
  std::cout << toString(c.verdict) << "\n";
  return c.verdict == Verdict::kInconclusive ? kExitNumerical : kExitOk;
}

int cmdBEnumerate(const RunConfig& cfg, const std::string& problem, bool degenerate) {
  const DQCProgram p = io::dqcFromJson(io::readJsonFile(problem));
  BEnumerateOptions opt;
  opt.lambdaCap = cfg.lambdaCap;
  opt.stationarity = cfg.stationarity();
  const ValueSet vs = degenerate ? enumerateBValuesDegenerate(p, opt).values : enumerateBValues(p, opt);
  io::writeFile(cfg.path("bvalues.csv"), io::valueSetCsv(vs, cfg.csvHeader()));
  writeJson(cfg, "bvalues.json", io::toJson(vs));
  for (double v : vs.values()) std::cout << io::formatNumber(v) << "\n";
  return vs.complete() ? kExitOk : kExitNumerical;
}

int cmdRegress(RunConfig cfg, const std::string& dataPath, const std::string& configPath) {
  const Dataset data = io::parseDatasetCsv(io::readFile(dataPath), dataPath);
  io::RegressConfig rc = io::regressConfigFromJson(io::readJsonFile(configPath));
  if (const char* env = std::getenv("PWQ_SEED")) {
    char* end = nullptr;
    const unsigned long long s = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw Error("input-error", "PWQ_SEED must be a nonnegative integer");
    rc.seed = s;
  }
  cfg.seed = rc.seed;
  cfg.grid = rc.grid;
  const RegressionModel model(data.dim(), rc.k1, rc.k2);
  MMOptions mo;
  mo.maxIter = rc.maxIter;
  mo.tolStep = rc.tolStep;
  const auto starts = multistartPoints(model, data, rc.starts, rc.seed);
  std::vector<MMTrace> traces(starts.size());

  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (int w = 0; w < std::min<int>(cfg.workerCount(), static_cast<int>(starts.size())); ++w)
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < starts.size(); k = next++) traces[k] = runMM(model, data, starts[k], mo);
    });
  for (auto& t : pool) t.join();

  std::ostringstream perStart, plot, clusters;
  const std::string header = cfg.csvHeader() + "# k1=" + std::to_string(rc.k1) + " k2=" + std::to_string(rc.k2) +
                             " starts=" + std::to_string(rc.starts) + " tol_step=" + io::formatNumber(rc.tolStep) +
                             " max_iter=" + std::to_string(rc.maxIter) + "\n";
  perStart << header << "start,iterations,final_value,verdict,termination\n";
  plot << header << "start,iteration,value\n";
  std::vector<double> finals;
  bool flagged = false;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const MMTrace& t = traces[k];
    perStart << k << "," << t.iterations() << "," << io::formatNumber(t.finalValue()) << ","
             << toString(t.stationarity.verdict) << "," << t.terminationReason << "\n";
    for (std::size_t i = 0; i < t.objectiveValues.size(); ++i)
      plot << k << "," << i << "," << io::formatNumber(t.objectiveValues[i]) << "\n";
    finals.push_back(t.finalValue());
    flagged = flagged || !t.stationarity.stationary();
  }
  clusters << header << "representative,count\n";
  for (const auto& c : clusterValues(finals, rc.grid))
    clusters << io::formatNumber(c.representative) << "," << c.count << "\n";
  io::writeFile(cfg.path("starts.csv"), perStart.str());
  io::writeFile(cfg.path("clusters.csv"), clusters.str());
  io::writeFile(cfg.path("plot.csv"), plot.str());
  std::cout << clusters.str().substr(header.size());
  if (flagged) std::cerr << "some terminal points are not certified stationary; see starts.csv\n";
  return kExitOk;
}

MPCCData demoMPCC() {
  // min (x - 1)^2 / 2 + (y - 1)^2 / 2 subject to 0 <= y _|_ x + y - 1 >= 0.
  return MPCCData{QuadraticFn(Mat::Identity(2, 2), Vec::Constant(2, -1.0), 1.0),
                  Vec::Constant(1, -1.0),
                  Mat::Ones(1, 1),
                  Mat::Ones(1, 1),
                  Polyhedron::whole(2),
                  10.0,
                  1e-2};
}

int cmdDemo(const RunConfig& cfg, const std::string& name) {
  if (name == "remark3") {
    writeJson(cfg, "remark3.json", io::toJson(makeRemark3(10).program()));
    io::writeFile(cfg.path("remark3_point.json"), "{\"x\": [1]}\n");
  } else if (name == "remark12") {
    const Remark12Fn r = makeRemark12(-10.0, 10.0);
    std::ostringstream csv;
    csv << cfg.csvHeader() << "t,phi,phi1,phi2,dphi\n";
    for (int k = 0; k <= 2000; ++k) {
      const double t = std::min(-10.0 + 0.01 * k, 10.0);
      csv << io::formatNumber(t) << "," << io::formatNumber(r.phi(t)) << "," << io::formatNumber(r.phi1(t)) << ","
          << io::formatNumber(r.phi2(t)) << "," << io::formatNumber(r.dphi(t)) << "\n";
    }
    io::writeFile(cfg.path("remark12.csv"), csv.str());
  } else if (name == "mpcc") {
    const MPCCData d = demoMPCC();
    writeJson(cfg, "mpcc_min.json", io::toJson(std::get<DiffMaxProgram>(makeMPCCPenalty(d, PenaltyForm::kMinPenalty))));
    writeJson(cfg, "mpcc_quadratic.json",
              io::toJson(std::get<DiffMaxProgram>(makeMPCCPenalty(d, PenaltyForm::kQuadraticPenalty))));
    writeJson(cfg, "mpcc_regularized.json",
              io::toJson(std::get<DQCProgram>(makeMPCCPenalty(d, PenaltyForm::kRegularized))));
  } else if (name == "trustregion") {
    writeJson(cfg, "trustregion.json",
              io::toJson(makeTrustRegion(-Mat::Identity(1, 1), Vec::Zero(1), Mat::Identity(1, 1), 0.5)));
    Mat d(2, 2);
    d << 1, 0, 0, 2;
    writeJson(cfg, "sphere.json", io::toJson(makeSphereProblem(d, Vec::Zero(2), 1.0)));
  } else {
    throw Error("input-error", "unknown demo '" + name + "'");
  }
  return kExitOk;
}

int cmdGenerate(const RunConfig& cfg, const std::string& kind, const InstanceDims& dims) {
  const Instance inst = randomInstance(kind, dims, cfg.seed);
  if (inst.program)
    writeJson(cfg, "problem.json", io::toJson(*inst.program));
  else if (inst.dqc)
    writeJson(cfg, "problem.json", io::toJson(*inst.dqc));
  else
    throw Error("unsupported", "kind '" + kind + "' has no problem file format");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stationary points and values of piecewise quadratic programs"};
  app.require_subcommand(1);
  RunConfig cfg;
  app.add_option("--out", cfg.out, "output directory")->capture_default_str();
  app.add_option("--tol-act", cfg.tolAct, "active-set tolerance")->capture_default_str();
  app.add_option("--tol-stat", cfg.tolStat, "stationarity tolerance")->capture_default_str();
  app.add_option("--lambda-cap", cfg.lambdaCap, "multiplier cap for quadratic constraints")->capture_default_str();
  app.add_option("--threads", cfg.threads, "worker threads (0: all cores)")->capture_default_str();

  std::string problem, point, method = "auto", data, config, demo, kind = "problem5";
  bool oracleRun = false, degenerate = false;
  int starts = 1000;
  InstanceDims dims;

  auto* check = app.add_subcommand("check", "d-stationarity certificate at a point");
  check->add_option("--problem", problem)->required();
  check->add_option("--point", point)->required();

  auto* enumerate = app.add_subcommand("enumerate", "enumerate stationary values");
  enumerate->add_option("--problem", problem)->required();
  enumerate->add_option("--method", method)->check(CLI::IsMember({"auto", "qp", "problem5", "convex", "twopiece"}));
  enumerate->add_flag("--oracle", oracleRun, "cross-check against the multistart brute force");
  enumerate->add_option("--starts", starts, "brute-force starts")->capture_default_str();
  enumerate->add_option("--seed", cfg.seed)->capture_default_str();

  auto* bcheck = app.add_subcommand("bcheck", "B-stationarity certificate at a point");
  bcheck->add_option("--problem", problem)->required();
  bcheck->add_option("--point", point)->required();

  auto* benumerate = app.add_subcommand("benumerate", "enumerate B-stationary values");
  benumerate->add_option("--problem", problem)->required();
  benumerate->add_flag("--degenerate", degenerate, "one quadratic bound is never strict on the polyhedron");

  auto* regress = app.add_subcommand("regress", "multistart majorization-minimization regression");
  regress->add_option("--data", data)->required();
  regress->add_option("--config", config)->required();

  auto* demoCmd = app.add_subcommand("demo", "write a named instance");
  demoCmd->add_option("name", demo)->required()->check(CLI::IsMember({"remark3", "remark12", "mpcc", "trustregion"}));

  auto* generate = app.add_subcommand("generate", "write a seeded random instance");
  generate->add_option("--kind", kind)->check(CLI::IsMember({"problem5", "qp", "twopiece", "convex", "dqc"}));
  generate->add_option("--seed", cfg.seed)->capture_default_str();
  generate->add_option("--n", dims.n)->capture_default_str();
  generate->add_option("--k1", dims.k1)->capture_default_str();
  generate->add_option("--k2", dims.k2)->capture_default_str();
  generate->add_option("--m", dims.m)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    fs::create_directories(cfg.out);
    if (*check) return cmdCheck(cfg, problem, point);
    if (*enumerate) return cmdEnumerate(cfg, problem, method, oracleRun, starts);
    if (*bcheck) return cmdBCheck(cfg, problem, point);
    if (*benumerate) return cmdBEnumerate(cfg, problem, degenerate);
    if (*regress) return cmdRegress(cfg, data, config);
    if (*demoCmd) return cmdDemo(cfg, demo);
    if (*generate) return cmdGenerate(cfg, kind, dims);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return isInputError(e.code()) ? kExitInput : kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
