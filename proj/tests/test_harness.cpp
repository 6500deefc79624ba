#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "assmc/assmc2.hpp"
#include "assmc/harness.hpp"

using namespace assmc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("assmc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string field_of(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

const char* kSmall = R"({"model":{"name":"plane","dim":4,"observations":10},"algorithm":"as-smc",
  "n_active":30,"n_inactive":4,"schedule":{"type":"linear","stages":4},"repeats":2,"threads":1,"seed":5})";

}  // namespace

TEST(Config, Defaults) {
  const RunConfig c = parse_config(R"({"model":{"name":"plane"},"algorithm":"smc"})");
  EXPECT_EQ(c.model.dim, 25);
  EXPECT_EQ(c.algorithm, "smc");
  EXPECT_EQ(c.schedule.kind, ScheduleConfig::Kind::kLinear);
  EXPECT_FALSE(c.truth.has_value());
}

TEST(Config, FullParse) {
  const RunConfig c = parse_config(R"({
    "model": {"name": "banana", "dim": 6, "curved_dims": 2, "curvature": 0.1},
    "algorithm": "adaptive-as-smc", "n_active": 50, "n_inactive": 3,
    "schedule": {"type": "fixed", "temperatures": [0, 0.5, 1]},
    "gap_rule": {"type": "explained_variance", "fraction": 0.9},
    "inactive_proposal": "student-t", "student_dof": 4,
    "resample": {"scheme": "multinomial", "trigger": "always"},
    "truth": [0, 0, 0, 0, 0, 0], "seed": 9, "repeats": 3})");
  EXPECT_EQ(c.model.name, "banana");
  EXPECT_EQ(c.model.curved_dims, 2);
  EXPECT_EQ(c.schedule.temperatures, (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(c.gap_rule.kind, GapRule::Kind::kExplainedVariance);
  EXPECT_EQ(c.inactive_proposal, InactiveFamily::kStudentT);
  EXPECT_EQ(c.resample.scheme, ResampleScheme::kMultinomial);
  EXPECT_EQ(c.resample.trigger, ResampleTrigger::kAlways);
  EXPECT_EQ(c.seed, 9u);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(field_of(R"({"model":{"name":"plane","foo":1},"algorithm":"smc"})"), "model.foo");
  EXPECT_EQ(field_of(R"({"model":{"name":"plane"},"algorithm":"smc","extra":1})"), "extra");
  EXPECT_EQ(field_of(R"({"model":{"name":"plane"}})"), "algorithm");
  EXPECT_EQ(field_of(R"({"model":{"name":"plane"},"algorithm":"smc","n_active":"ten"})"), "n_active");
  EXPECT_EQ(field_of(R"({"model":{"name":"plane"},"algorithm":"smc","schedule":{"type":"fixed","temperatures":[0,0.7,0.5,1]}})"),
            "schedule.temperatures");
  EXPECT_EQ(field_of(R"({"model":{"name":"plane","dim":3},"algorithm":"smc","truth":[1,2]})"), "truth");
  EXPECT_EQ(field_of(R"({"model":{"name":"plane"},"algorithm":"mcmc"})"), "algorithm");
  EXPECT_EQ(field_of(R"({"model":{"name":"plane"},"algorithm":"smc","seed":-1})"), "seed");
}

TEST(Config, SyntaxErrorReportsLine) {
  EXPECT_EQ(field_of("{\n  \"model\": {\"name\": \"plane\"},\n  \"algorithm\": smc\n}"), "line 3");
}

TEST(Config, RoundTrip) {
  const RunConfig c = parse_config(R"({"model":{"name":"gauss-cauchy"},"algorithm":"as-smc2",
    "schedule":{"type":"pilot","target_ess_fraction":0.8},"gap_rule":{"type":"fixed","active_dim":1},
    "cost_match_particles":1000,"truth":[0,0]})");
  const Json once = config_to_json(c);
  const Json twice = config_to_json(parse_config(once.dump()));
  EXPECT_EQ(once, twice);
}

TEST(Rmse, Examples) {
  const Vector truth = Eigen::Vector2d(2, 2);
  const Vector r = rmse_per_parameter({Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 2)}, truth);
  EXPECT_DOUBLE_EQ(r(0), 1.0);
  EXPECT_DOUBLE_EQ(r(1), 0.0);
  EXPECT_THROW((void)rmse_per_parameter({}, truth), Error);
  EXPECT_THROW((void)rmse_per_parameter({Vector::Zero(3)}, truth), Error);
}

TEST(CostMatching, Examples) {
  EXPECT_EQ(cost_matched_active_particles("smc", 1000, 10, 25), 1000);
  EXPECT_EQ(cost_matched_active_particles("as-smc", 1000, 10, 25), 100);
  EXPECT_EQ(cost_matched_active_particles("adaptive-as-smc", 1000, 10, 25), 100);
  EXPECT_EQ(cost_matched_active_particles("as-smc", 10, 10, 25), 2);
  const long long n2 = cost_matched_active_particles("as-smc2", 1000, 10, 25);
  EXPECT_LE(assmc2_expected_evaluations(static_cast<int>(n2), 10, 25), 1000LL * 26);
  EXPECT_GT(assmc2_expected_evaluations(static_cast<int>(n2) + 1, 10, 25), 1000LL * 26);
  EXPECT_THROW((void)cost_matched_active_particles("as-mh", 1000, 10, 25), Error);
}

TEST(Experiment, RepeatRmseIsRootMeanSquare) {
  RunConfig c = parse_config(kSmall);
  c.truth = std::vector<double>{0.0, 0.0, 0.0, 0.0};
  const RunResult r = run_experiment(c);
  ASSERT_EQ(r.repeats.size(), 2u);
  for (const auto& rep : r.repeats) {
    ASSERT_TRUE(rep.ok);
    EXPECT_NEAR(rep.parameter_rmse, std::sqrt(rep.posterior_mean.squaredNorm() / 4.0), 1e-14);
  }
  EXPECT_EQ(r.failed, 0);
}

TEST(Experiment, RerunsAreByteIdentical) {
  const RunConfig c = parse_config(kSmall);
  const fs::path a = scratch("rerun_a");
  const fs::path b = scratch("rerun_b");
  write_run_outputs(run_experiment(c), a);
  RunConfig c2 = c;
  c2.threads = 2;
  write_run_outputs(run_experiment(c2), b);
  for (const char* f : {"logz.csv", "spectra.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  Json ja = Json::parse(slurp(a / "result.json"));
  Json jb = Json::parse(slurp(b / "result.json"));
  ja["config"].erase("threads");
  jb["config"].erase("threads");
  EXPECT_EQ(ja, jb);
  EXPECT_TRUE(fs::exists(a / "timing.json"));
}

TEST(Experiment, AsmhWritesChains) {
  RunConfig c = parse_config(kSmall);
  c.algorithm = "as-mh";
  c.asmh_iterations = 200;
  c.asmh_burn_in = 50;
  const fs::path dir = scratch("asmh");
  write_run_outputs(run_experiment(c), dir);
  const std::string chain = slurp(dir / "chain_0.csv");
  EXPECT_EQ(chain.substr(0, chain.find('\n')), "iteration,a_1,theta_1,theta_2,theta_3,theta_4,log_estimate,accepted");
  EXPECT_TRUE(fs::exists(dir / "chain_1.csv"));
}

TEST(Compare, SingleAndIdenticalFiles) {
  const RunConfig c = parse_config(kSmall);
  const fs::path dir = scratch("compare");
  write_run_outputs(run_experiment(c), dir);
  const fs::path file = dir / "result.json";
  const std::string one = compare_results({file});
  EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 2);
  const std::string two = compare_results({file, file});
  std::istringstream is(two);
  std::string header, row1, row2;
  std::getline(is, header);
  std::getline(is, row1);
  std::getline(is, row2);
  EXPECT_EQ(row1, row2);
  EXPECT_EQ(header.substr(0, 15), "file,algorithm,");
}

TEST(Compare, RejectsDifferentModels) {
  RunConfig c = parse_config(kSmall);
  c.repeats = 1;
  const fs::path a = scratch("cmp_a");
  const fs::path b = scratch("cmp_b");
  write_run_outputs(run_experiment(c), a);
  c.model.observations = 12;
  write_run_outputs(run_experiment(c), b);
  EXPECT_THROW((void)compare_results({a / "result.json", b / "result.json"}), Error);
  EXPECT_THROW((void)compare_results({}), Error);
}

TEST(Spectrum, PlaneHasOneActiveDirection) {
  RunConfig c = parse_config(kSmall);
  c.n_active = 60;
  c.out_dir = scratch("spectrum").string();
  const Basis b = spectrum_only(c);
  EXPECT_EQ(b.active_dim(), 1);
  const std::string csv = slurp(fs::path(c.out_dir) / "spectrum.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "index,eigenvalue,explained_fraction");
}
