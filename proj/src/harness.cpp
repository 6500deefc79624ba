#include "assmc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "assmc/adaptive_assmc.hpp"
#include "assmc/assmc.hpp"
#include "assmc/assmc2.hpp"
#include "assmc/baseline_smc.hpp"
#include "assmc/toymodels.hpp"

namespace assmc {
namespace {

const std::set<std::string> kAlgorithms{"smc", "as-smc", "adaptive-as-smc", "as-smc2", "as-mh"};

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where(), "expected an object");
  }

  [[nodiscard]] bool has(const std::string& key) const { return obj_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!obj_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <class T>
  T required(const std::string& key) {
    if (!obj_.contains(key)) throw ConfigError(field(key), "missing required field");
    return convert<T>(key);
  }

  ObjectReader child(const std::string& key) {
    seen_.insert(key);
    return ObjectReader(obj_.at(key), field(key));
  }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(field(item.key()), "unknown key");
    }
  }

  [[nodiscard]] std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  [[nodiscard]] std::string where() const { return path_.empty() ? "<root>" : path_; }

  template <class T>
  T convert(const std::string& key) {
    seen_.insert(key);
    const Json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(field(key), "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.template get<long long>() < 0) {
            throw ConfigError(field(key), "expected a nonnegative integer");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
      } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        if (!v.is_array()) throw ConfigError(field(key), "expected an array of numbers");
        for (const auto& e : v)
          if (!e.is_number()) throw ConfigError(field(key), "expected an array of numbers");
      }
      return v.template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::size_t line_of_byte(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

ModelConfig parse_model(ObjectReader r) {
  ModelConfig m;
  m.name = r.required<std::string>("name");
  if (m.name == "plane" || m.name == "banana") {
    m.dim = r.get<long long>("dim", 25);
    m.observations = r.get<int>("observations", 100);
    m.data_seed = r.get<std::uint64_t>("data_seed", 1);
    m.prior_variance = r.get<double>("prior_variance", kToyPriorVariance);
    if (m.name == "banana") {
      m.curved_dims = r.get<long long>("curved_dims", 3);
      m.curvature = r.get<double>("curvature", 0.001);
    }
    if (m.dim < 1) throw ConfigError(r.field("dim"), "must be positive");
    if (m.observations < 1) throw ConfigError(r.field("observations"), "must be positive");
  } else if (m.name == "gauss-cauchy") {
    m.sigma = r.get<std::vector<double>>("sigma", m.sigma);
    m.gamma = r.get<std::vector<double>>("gamma", m.gamma);
    m.prior_variance = r.get<double>("prior_variance", kToyPriorVariance);
    if (m.sigma.size() != m.gamma.size() || m.sigma.empty()) {
      throw ConfigError(r.field("sigma"), "sigma and gamma must be nonempty and of equal length");
    }
    m.dim = static_cast<Index>(m.sigma.size());
  } else {
    throw ConfigError(r.field("name"), "unknown model '" + m.name + "'");
  }
  if (!(m.prior_variance > 0.0)) throw ConfigError(r.field("prior_variance"), "must be positive");
  r.finish();
  return m;
}

ScheduleConfig parse_schedule(ObjectReader r) {
  ScheduleConfig s;
  const auto type = r.required<std::string>("type");
  if (type == "fixed") {
    s.kind = ScheduleConfig::Kind::kFixed;
    s.temperatures = r.required<std::vector<double>>("temperatures");
    try {
      (void)Tempering::annealed(s.temperatures);
    } catch (const Error& e) {
      throw ConfigError(r.field("temperatures"), e.what());
    }
  } else if (type == "linear") {
    s.kind = ScheduleConfig::Kind::kLinear;
    s.stages = r.get<int>("stages", 25);
    if (s.stages < 1) throw ConfigError(r.field("stages"), "must be positive");
  } else if (type == "pilot") {
    s.kind = ScheduleConfig::Kind::kPilot;
    s.pilot.particles = r.get<int>("particles", s.pilot.particles);
    s.pilot.target_ess_fraction = r.get<double>("target_ess_fraction", s.pilot.target_ess_fraction);
    s.pilot.moves_per_stage = r.get<int>("moves_per_stage", s.pilot.moves_per_stage);
    s.pilot.max_stages = r.get<int>("max_stages", s.pilot.max_stages);
    if (!(s.pilot.target_ess_fraction > 0.0 && s.pilot.target_ess_fraction < 1.0)) {
      throw ConfigError(r.field("target_ess_fraction"), "must lie in (0, 1)");
    }
    if (s.pilot.particles < 2) throw ConfigError(r.field("particles"), "must be at least 2");
  } else if (type == "data_blocks") {
    s.kind = ScheduleConfig::Kind::kDataBlocks;
    s.blocks = r.get<int>("blocks", 10);
    if (s.blocks < 1) throw ConfigError(r.field("blocks"), "must be positive");
  } else {
    throw ConfigError(r.field("type"), "unknown schedule type '" + type + "'");
  }
  r.finish();
  return s;
}

GapRule parse_gap_rule(ObjectReader r) {
  const auto type = r.required<std::string>("type");
  GapRule g;
  if (type == "largest_gap") {
    g = GapRule::largest_gap(r.get<double>("min_ratio", 2.0));
  } else if (type == "explained_variance") {
    g = GapRule::explained_variance(r.get<double>("fraction", 0.9));
    if (!(g.fraction > 0.0 && g.fraction <= 1.0)) throw ConfigError(r.field("fraction"), "must lie in (0, 1]");
  } else if (type == "fixed") {
    g = GapRule::fixed(r.required<long long>("active_dim"));
    if (g.fixed_dim < 1) throw ConfigError(r.field("active_dim"), "must be positive");
  } else {
    throw ConfigError(r.field("type"), "unknown gap rule '" + type + "'");
  }
  r.finish();
  return g;
}

ResamplePolicy parse_resample(ObjectReader r) {
  ResamplePolicy p;
  const auto scheme = r.get<std::string>("scheme", "stratified");
  if (scheme == "stratified") {
    p.scheme = ResampleScheme::kStratified;
  } else if (scheme == "multinomial") {
    p.scheme = ResampleScheme::kMultinomial;
  } else {
    throw ConfigError(r.field("scheme"), "expected 'stratified' or 'multinomial'");
  }
  const auto trigger = r.get<std::string>("trigger", "ess");
  if (trigger == "ess") {
    p.trigger = ResampleTrigger::kEss;
  } else if (trigger == "always") {
    p.trigger = ResampleTrigger::kAlways;
  } else {
    throw ConfigError(r.field("trigger"), "expected 'ess' or 'always'");
  }
  p.ess_fraction = r.get<double>("ess_fraction", 0.5);
  if (!(p.ess_fraction > 0.0 && p.ess_fraction <= 1.0)) throw ConfigError(r.field("ess_fraction"), "must lie in (0, 1]");
  r.finish();
  return p;
}

std::string family_name(InactiveFamily f) {
  switch (f) {
    case InactiveFamily::kPrior:
      return "prior";
    case InactiveFamily::kGaussian:
      return "gaussian";
    case InactiveFamily::kStudentT:
      return "student-t";
  }
  return "prior";
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Index j = 0; j < v.size(); ++j) out.push_back(v(j));
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("line " + std::to_string(line_of_byte(text, e.byte)), e.what());
  }
  ObjectReader r(root, "");
  RunConfig c;
  c.model = parse_model(r.child("model"));
  c.algorithm = r.required<std::string>("algorithm");
  if (!kAlgorithms.count(c.algorithm)) {
    throw ConfigError("algorithm", "unknown algorithm '" + c.algorithm +
                                       "' (expected smc, as-smc, adaptive-as-smc, as-smc2 or as-mh)");
  }
  c.n_active = r.get<int>("n_active", c.n_active);
  c.n_inactive = r.get<int>("n_inactive", c.n_inactive);
  c.moves_per_stage = r.get<int>("moves_per_stage", c.moves_per_stage);
  if (c.n_active < 1) throw ConfigError("n_active", "must be positive");
  if (c.n_inactive < 1) throw ConfigError("n_inactive", "must be positive");
  if (c.moves_per_stage < 0) throw ConfigError("moves_per_stage", "must be nonnegative");
  if (r.has("schedule")) c.schedule = parse_schedule(r.child("schedule"));
  if (r.has("gap_rule")) c.gap_rule = parse_gap_rule(r.child("gap_rule"));
  const auto family = r.get<std::string>("inactive_proposal", "prior");
  if (family == "prior") {
    c.inactive_proposal = InactiveFamily::kPrior;
  } else if (family == "gaussian") {
    c.inactive_proposal = InactiveFamily::kGaussian;
  } else if (family == "student-t") {
    c.inactive_proposal = InactiveFamily::kStudentT;
  } else {
    throw ConfigError("inactive_proposal", "expected 'prior', 'gaussian' or 'student-t'");
  }
  c.student_dof = r.get<double>("student_dof", c.student_dof);
  if (!(c.student_dof > 0.0)) throw ConfigError("student_dof", "must be positive");
  c.adapt_active_proposal = r.get<bool>("adapt_active_proposal", c.adapt_active_proposal);
  if (r.has("resample")) c.resample = parse_resample(r.child("resample"));
  c.strict_resample_move = r.get<bool>("strict_resample_move", c.strict_resample_move);
  c.freeze_basis = r.get<bool>("freeze_basis", c.freeze_basis);
  c.asmh_iterations = r.get<int>("asmh_iterations", c.asmh_iterations);
  c.asmh_burn_in = r.get<int>("asmh_burn_in", c.asmh_burn_in);
  if (c.asmh_iterations < 0) throw ConfigError("asmh_iterations", "must be nonnegative");
  if (c.asmh_burn_in < 0 || c.asmh_burn_in > c.asmh_iterations) {
    throw ConfigError("asmh_burn_in", "must lie in [0, asmh_iterations]");
  }
  if (r.has("cost_match_particles")) {
    c.cost_match_particles = r.required<long long>("cost_match_particles");
    if (*c.cost_match_particles < 1) throw ConfigError("cost_match_particles", "must be positive");
  }
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  c.repeats = r.get<int>("repeats", c.repeats);
  if (c.repeats < 1) throw ConfigError("repeats", "must be positive");
  c.threads = r.get<int>("threads", c.threads);
  if (c.threads < 0) throw ConfigError("threads", "must be nonnegative");
  if (r.has("truth")) {
    c.truth = r.required<std::vector<double>>("truth");
    if (static_cast<Index>(c.truth->size()) != c.model.dim) {
      throw ConfigError("truth", "length must equal the model dimension");
    }
  }
  c.out_dir = r.get<std::string>("out_dir", c.out_dir);
  r.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

Json config_to_json(const RunConfig& c) {
  Json model;
  model["name"] = c.model.name;
  if (c.model.name == "gauss-cauchy") {
    model["sigma"] = c.model.sigma;
    model["gamma"] = c.model.gamma;
  } else {
    model["dim"] = c.model.dim;
    model["observations"] = c.model.observations;
    model["data_seed"] = c.model.data_seed;
    if (c.model.name == "banana") {
      model["curved_dims"] = c.model.curved_dims;
      model["curvature"] = c.model.curvature;
    }
  }
  model["prior_variance"] = c.model.prior_variance;

  Json schedule;
  switch (c.schedule.kind) {
    case ScheduleConfig::Kind::kFixed:
      schedule["type"] = "fixed";
      schedule["temperatures"] = c.schedule.temperatures;
      break;
    case ScheduleConfig::Kind::kLinear:
      schedule["type"] = "linear";
      schedule["stages"] = c.schedule.stages;
      break;
    case ScheduleConfig::Kind::kPilot:
      schedule["type"] = "pilot";
      schedule["particles"] = c.schedule.pilot.particles;
      schedule["target_ess_fraction"] = c.schedule.pilot.target_ess_fraction;
      schedule["moves_per_stage"] = c.schedule.pilot.moves_per_stage;
      schedule["max_stages"] = c.schedule.pilot.max_stages;
      break;
    case ScheduleConfig::Kind::kDataBlocks:
      schedule["type"] = "data_blocks";
      schedule["blocks"] = c.schedule.blocks;
      break;
  }

  Json gap;
  switch (c.gap_rule.kind) {
    case GapRule::Kind::kLargestGap:
      gap["type"] = "largest_gap";
      gap["min_ratio"] = c.gap_rule.min_ratio;
      break;
    case GapRule::Kind::kExplainedVariance:
      gap["type"] = "explained_variance";
      gap["fraction"] = c.gap_rule.fraction;
      break;
    case GapRule::Kind::kFixed:
      gap["type"] = "fixed";
      gap["active_dim"] = c.gap_rule.fixed_dim;
      break;
  }

  Json resample;
  resample["scheme"] = c.resample.scheme == ResampleScheme::kStratified ? "stratified" : "multinomial";
  resample["trigger"] = c.resample.trigger == ResampleTrigger::kEss ? "ess" : "always";
  resample["ess_fraction"] = c.resample.ess_fraction;

  Json out;
  out["model"] = model;
  out["algorithm"] = c.algorithm;
  out["n_active"] = c.n_active;
  out["n_inactive"] = c.n_inactive;
  out["moves_per_stage"] = c.moves_per_stage;
  out["schedule"] = schedule;
  out["gap_rule"] = gap;
  out["inactive_proposal"] = family_name(c.inactive_proposal);
  out["student_dof"] = c.student_dof;
  out["adapt_active_proposal"] = c.adapt_active_proposal;
  out["resample"] = resample;
  out["strict_resample_move"] = c.strict_resample_move;
  out["freeze_basis"] = c.freeze_basis;
  out["asmh_iterations"] = c.asmh_iterations;
  out["asmh_burn_in"] = c.asmh_burn_in;
  if (c.cost_match_particles) out["cost_match_particles"] = *c.cost_match_particles;
  out["seed"] = c.seed;
  out["repeats"] = c.repeats;
  out["threads"] = c.threads;
  if (c.truth) out["truth"] = *c.truth;
  out["out_dir"] = c.out_dir;
  return out;
}

TargetModel build_model(const RunConfig& c, const Tempering& tempering) {
  const auto& m = c.model;
  std::shared_ptr<const Likelihood> lik;
  if (m.name == "plane") {
    lik = std::make_shared<PlaneModel>(
        m.dim, standard_normal_data(static_cast<std::size_t>(m.observations), m.data_seed),
        m.prior_variance);
  } else if (m.name == "banana") {
    lik = std::make_shared<BananaModel>(
        m.dim, m.curved_dims, m.curvature,
        standard_normal_data(static_cast<std::size_t>(m.observations), m.data_seed),
        m.prior_variance);
  } else if (m.name == "gauss-cauchy") {
    lik = std::make_shared<GaussCauchyModel>(
        Eigen::Map<const Vector>(m.sigma.data(), static_cast<Index>(m.sigma.size())),
        Eigen::Map<const Vector>(m.gamma.data(), static_cast<Index>(m.gamma.size())),
        m.prior_variance);
  } else {
    throw ConfigError("model.name", "unknown model '" + m.name + "'");
  }
  return TargetModel(lik, toy_prior(lik->dim(), m.prior_variance), tempering);
}

Tempering build_schedule(const RunConfig& c) {
  const auto& s = c.schedule;
  switch (s.kind) {
    case ScheduleConfig::Kind::kFixed:
      return Tempering::annealed(s.temperatures);
    case ScheduleConfig::Kind::kLinear: {
      std::vector<double> temps(static_cast<std::size_t>(s.stages) + 1);
      for (int t = 0; t <= s.stages; ++t) temps[static_cast<std::size_t>(t)] = static_cast<double>(t) / s.stages;
      temps.back() = 1.0;
      return Tempering::annealed(std::move(temps));
    }
    case ScheduleConfig::Kind::kPilot: {
      const TargetModel model = build_model(c, Tempering::one_step());
      PilotOptions options = s.pilot;
      options.threads = resolve_threads(c.threads);
      return pilot_adaptive_schedule(model, options, RngStream(c.seed));
    }
    case ScheduleConfig::Kind::kDataBlocks: {
      const TargetModel model = build_model(c, Tempering::one_step());
      return Tempering::data_blocks(model.likelihood().num_terms(), static_cast<std::size_t>(s.blocks));
    }
  }
  return Tempering::one_step();
}

SamplerOptions sampler_options(const RunConfig& c, int /*stages*/) {
  SamplerOptions o;
  o.n_active = c.n_active;
  o.n_inactive = c.n_inactive;
  o.moves_per_stage = c.moves_per_stage;
  o.resample = c.resample;
  if (c.strict_resample_move) {
    o.per_particle_ancestors = true;
    o.resample.scheme = ResampleScheme::kMultinomial;
    o.resample.trigger = ResampleTrigger::kAlways;
  }
  o.inactive_family = c.inactive_proposal;
  o.student_dof = c.student_dof;
  o.adapt_active_proposal = c.adapt_active_proposal;
  o.gap_rule = c.gap_rule;
  o.freeze_basis = c.freeze_basis;
  o.threads = 1;
  return o;
}

int cost_matched_active_particles(const std::string& algorithm, long long budget, int n_inactive,
                                  int stages) {
  if (budget < 1) throw Error("cost matching: budget must be positive");
  long long n = budget;
  if (algorithm == "as-smc" || algorithm == "adaptive-as-smc") {
    n = budget / n_inactive;
  } else if (algorithm == "as-smc2") {
    const long long baseline = budget * (1 + static_cast<long long>(stages));
    n = baseline / assmc2_expected_evaluations(1, n_inactive, stages);
  } else if (algorithm != "smc") {
    throw Error("cost matching is not defined for algorithm '" + algorithm + "'");
  }
  return static_cast<int>(std::max<long long>(n, 2));
}

Vector rmse_per_parameter(const std::vector<Vector>& estimates, const Vector& truth) {
  if (estimates.empty()) throw Error("rmse: no estimates");
  Vector acc = Vector::Zero(truth.size());
  for (const auto& e : estimates) {
    if (e.size() != truth.size()) throw Error("rmse: estimate length does not match truth");
    acc += (e - truth).cwiseAbs2();
  }
  return (acc / static_cast<double>(estimates.size())).cwiseSqrt();
}

RepeatResult run_repeat(const RunConfig& c, const TargetModel& model, int n_active, int repeat,
                        int threads) {
  RepeatResult out;
  out.repeat = repeat;
  const auto start = std::chrono::steady_clock::now();
  const RngStream stream = RngStream(c.seed).derive({0xA5A5ULL, static_cast<std::uint64_t>(repeat)});
  try {
    SamplerOptions o = sampler_options(c, model.num_stages());
    o.n_active = n_active;
    o.threads = threads;
    if (c.algorithm == "as-mh") {
      const TargetModel run_model = model.with_tempering(model.tempering());
      std::vector<GradientSample<double>> samples(static_cast<std::size_t>(n_active));
      for (std::size_t m = 0; m < samples.size(); ++m) {
        Engine rng = stream.derive({0, m}).derive(Purpose::kBasis).engine();
        samples[m].point = run_model.sample_prior(rng);
        samples[m].gradient = run_model.full_score(samples[m].point);
        samples[m].weight = 1.0 / n_active;
      }
      Basis basis = split_basis(eigendecompose(estimate_as_matrix(samples)), c.gap_rule);
      if (basis.inactive_dim() == 0) basis = Basis::identity(model.dim(), basis.spectrum);
      out.spectra.push_back(basis.spectrum);
      AsmhOptions ao;
      ao.iterations = c.asmh_iterations;
      ao.n_inactive = c.n_inactive;
      AsmhChain chain = run_asmh(ao, run_model, basis, stream);
      const Index kept = chain.theta.cols() - 1 - c.asmh_burn_in;
      out.posterior_mean = kept > 0 ? Vector(chain.theta.rightCols(kept).rowwise().mean())
                                    : Vector(chain.theta.col(chain.theta.cols() - 1));
      out.posterior_mean_all = out.posterior_mean;
      out.acceptance_rate = chain.acceptance_rate;
      out.likelihood_evaluations = run_model.evaluations();
      out.chain = std::move(chain);
    } else {
      SamplerResult r;
      if (c.algorithm == "smc") {
        r = run_standard_smc(o, model, stream);
      } else if (c.algorithm == "as-smc") {
        r = run_assmc(o, model, stream);
      } else if (c.algorithm == "adaptive-as-smc") {
        r = run_adaptive_assmc(o, model, stream);
      } else {
        r = run_assmc2(o, model, stream);
      }
      out.posterior_mean = r.posterior_mean;
      out.posterior_mean_all = r.posterior_mean_all;
      out.log_evidence = r.log_evidence;
      out.log_evidence_trace = r.log_evidence_trace;
      out.spectra = r.spectra;
      out.likelihood_evaluations = r.likelihood_evaluations;
      double acc = 0.0;
      for (const auto& s : r.stages) acc += s.acceptance_rate;
      out.acceptance_rate = r.stages.empty() ? 0.0 : acc / static_cast<double>(r.stages.size());
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

RunResult run_experiment(const RunConfig& c) {
  RunResult result;
  result.config = c;
  result.schedule = build_schedule(c);
  const TargetModel model = build_model(c, result.schedule);
  result.n_active = c.cost_match_particles
                        ? cost_matched_active_particles(c.algorithm, *c.cost_match_particles,
                                                        c.n_inactive, model.num_stages())
                        : c.n_active;
  result.truth = c.truth ? Vector(Eigen::Map<const Vector>(c.truth->data(), model.dim()))
                         : Vector(Vector::Zero(model.dim()));

  const int threads = resolve_threads(c.threads);
  result.repeats.resize(static_cast<std::size_t>(c.repeats));
  if (c.repeats == 1) {
    result.repeats[0] = run_repeat(c, model, result.n_active, 0, threads);
  } else {
    parallel_for(result.repeats.size(), threads, [&](std::size_t r) {
      result.repeats[r] = run_repeat(c, model, result.n_active, static_cast<int>(r), 1);
    });
  }

  std::vector<Vector> estimates;
  for (auto& r : result.repeats) {
    if (!r.ok) {
      ++result.failed;
      continue;
    }
    r.parameter_rmse = std::sqrt((r.posterior_mean - result.truth).squaredNorm() /
                                 static_cast<double>(result.truth.size()));
    estimates.push_back(r.posterior_mean);
  }
  if (result.failed > 0) {
    std::cerr << "warning: " << result.failed << " of " << c.repeats
              << " repeats failed; aggregates use the successful repeats\n";
  }
  if (!estimates.empty()) {
    result.rmse_per_parameter = rmse_per_parameter(estimates, result.truth);
    result.mean_rmse = result.rmse_per_parameter.mean();
  }
  return result;
}

Json result_to_json(const RunResult& res) {
  Json out;
  out["algorithm"] = res.config.algorithm;
  out["model"] = config_to_json(res.config)["model"];
  out["config"] = config_to_json(res.config);
  Json schedule;
  if (res.schedule.kind() == Tempering::Kind::kAnnealed) {
    schedule["type"] = "annealed";
    schedule["temperatures"] = res.schedule.temperatures();
  } else {
    schedule["type"] = "data_blocks";
    schedule["block_bounds"] = res.schedule.block_bounds();
  }
  out["schedule"] = schedule;
  out["n_active"] = res.n_active;
  out["n_inactive"] = res.config.n_inactive;
  out["truth"] = vector_json(res.truth);
  Json repeats = Json::array();
  double evals = 0.0;
  int ok = 0;
  for (const auto& r : res.repeats) {
    Json j;
    j["repeat"] = r.repeat;
    j["status"] = r.ok ? "ok" : "failed";
    if (!r.ok) {
      j["error"] = r.error;
    } else {
      j["posterior_mean"] = vector_json(r.posterior_mean);
      j["posterior_mean_all"] = vector_json(r.posterior_mean_all);
      if (res.config.algorithm != "as-mh") j["log_evidence"] = r.log_evidence;
      j["likelihood_evaluations"] = r.likelihood_evaluations;
      j["acceptance_rate"] = r.acceptance_rate;
      j["parameter_rmse"] = r.parameter_rmse;
      if (!r.spectra.empty()) j["active_dim_initial"] = r.spectra.front().dim();
      evals += static_cast<double>(r.likelihood_evaluations);
      ++ok;
    }
    repeats.push_back(j);
  }
  out["repeats"] = repeats;
  Json agg;
  agg["successful_repeats"] = ok;
  agg["failed_repeats"] = res.failed;
  agg["rmse_per_parameter"] = vector_json(res.rmse_per_parameter);
  agg["mean_rmse"] = res.mean_rmse;
  agg["mean_likelihood_evaluations"] = ok > 0 ? evals / ok : 0.0;
  out["aggregate"] = agg;
  return out;
}

void write_run_outputs(const RunResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "result.json");
    f << result_to_json(res).dump(2) << '\n';
  }
  {
    Json timing;
    Json per = Json::array();
    for (const auto& r : res.repeats) per.push_back(r.wall_seconds);
    timing["wall_seconds"] = per;
    std::ofstream f(dir / "timing.json");
    f << timing.dump(2) << '\n';
  }
  {
    std::ofstream f(dir / "logz.csv");
    f << "repeat,stage,log_z\n";
    f.precision(17);
    for (const auto& r : res.repeats) {
      for (std::size_t t = 0; t < r.log_evidence_trace.size(); ++t) {
        f << r.repeat << ',' << t << ',' << r.log_evidence_trace[t] << '\n';
      }
    }
  }
  {
    std::ofstream f(dir / "spectra.csv");
    f << "repeat,stage,index,eigenvalue,explained_fraction\n";
    f.precision(17);
    for (const auto& r : res.repeats) {
      for (std::size_t s = 0; s < r.spectra.size(); ++s) {
        const Vector frac = explained_fractions(r.spectra[s]);
        for (Index j = 0; j < r.spectra[s].dim(); ++j) {
          f << r.repeat << ',' << s << ',' << (j + 1) << ',' << r.spectra[s].eigenvalues(j) << ','
            << frac(j) << '\n';
        }
      }
    }
  }
  for (const auto& r : res.repeats) {
    if (!r.chain) continue;
    std::ofstream f(dir / ("chain_" + std::to_string(r.repeat) + ".csv"));
    write_chain_csv(f, *r.chain);
  }
}

Basis spectrum_only(const RunConfig& c) {
  const TargetModel model = build_model(c, Tempering::one_step());
  const RngStream stream = RngStream(c.seed).derive(Purpose::kBasis);
  std::vector<GradientSample<double>> samples(static_cast<std::size_t>(c.n_active));
  for (std::size_t m = 0; m < samples.size(); ++m) {
    Engine rng = stream.derive(static_cast<std::uint64_t>(m)).engine();
    samples[m].point = model.sample_prior(rng);
    samples[m].gradient = model.full_score(samples[m].point);
    samples[m].weight = 1.0 / c.n_active;
  }
  const Spectrum<double> spectrum = eigendecompose(estimate_as_matrix(samples));
  const Basis basis = split_basis(spectrum, c.gap_rule);
  std::filesystem::create_directories(c.out_dir);
  std::ofstream f(std::filesystem::path(c.out_dir) / "spectrum.csv");
  f << "index,eigenvalue,explained_fraction\n";
  f.precision(17);
  const Vector frac = explained_fractions(spectrum);
  for (Index j = 0; j < spectrum.dim(); ++j) {
    f << (j + 1) << ',' << spectrum.eigenvalues(j) << ',' << frac(j) << '\n';
  }
  return basis;
}

std::string compare_results(const std::vector<std::filesystem::path>& files) {
  if (files.empty()) throw Error("compare: no result files given");
  std::ostringstream os;
  os << "file,algorithm,repeats,n_active,n_inactive,mean_likelihood_evaluations,"
        "rmse_min,rmse_q1,rmse_median,rmse_q3,rmse_max,rmse_mean\n";
  os.precision(10);
  Json reference_model;
  Json reference_truth;
  for (std::size_t k = 0; k < files.size(); ++k) {
    std::ifstream in(files[k]);
    if (!in) throw Error("compare: cannot open " + files[k].string());
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error("compare: " + files[k].string() + ": " + e.what());
    }
    if (!j.contains("model") || !j.contains("truth") || !j.contains("aggregate")) {
      throw Error("compare: " + files[k].string() + " is not a result file");
    }
    if (k == 0) {
      reference_model = j["model"];
      reference_truth = j["truth"];
    } else if (j["model"] != reference_model || j["truth"] != reference_truth) {
      throw Error("compare: " + files[k].string() + " uses a different model or truth");
    }
    const auto rmse = j["aggregate"]["rmse_per_parameter"].get<std::vector<double>>();
    double mean = 0.0;
    for (double v : rmse) mean += v;
    mean = rmse.empty() ? std::nan("") : mean / static_cast<double>(rmse.size());
    os << files[k].string() << ',' << j["algorithm"].get<std::string>() << ','
       << j["aggregate"]["successful_repeats"].get<int>() << ',' << j["n_active"].get<int>() << ','
       << j["n_inactive"].get<int>() << ',' << j["aggregate"]["mean_likelihood_evaluations"].get<double>()
       << ',' << quantile(rmse, 0.0) << ',' << quantile(rmse, 0.25) << ',' << quantile(rmse, 0.5) << ','
       << quantile(rmse, 0.75) << ',' << quantile(rmse, 1.0) << ',' << mean << '\n';
  }
  return os.str();
}

}  // namespace assmc
