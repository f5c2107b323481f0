#include "voql/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "voql/baselines.hpp"
#include "voql/serialization.hpp"

namespace voql {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Walks a config document, reporting errors with the line of the offending key.
class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string source, const json& overrides)
      : text_(text), source_(std::move(source)), overrides_(overrides) {}

  [[noreturn]] void error(const std::vector<std::string>& path, const std::string& msg) const {
    std::string where;
    for (const auto& p : path) where += (where.empty() ? "" : ".") + p;
    if (from_overrides(path)) {
      throw Error(ErrorCode::kInvalidArgument, "command line: " + where + ": " + msg);
    }
    throw Error(ErrorCode::kInvalidArgument,
                source_ + ":" + std::to_string(line_of(path)) + ": " + where + ": " + msg);
  }

  // Rejects keys of `obj` outside `allowed`.
  void check_keys(const json& obj, const std::vector<std::string>& path,
                  const std::set<std::string>& allowed) const {
    if (!obj.is_object()) error(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!allowed.count(it.key())) {
        auto p = path;
        p.push_back(it.key());
        error(p, "unknown key");
      }
    }
  }

  template <typename T>
  void read(const json& obj, const std::vector<std::string>& parent, const std::string& key,
            T& out) const {
    if (!obj.contains(key)) return;
    auto path = parent;
    path.push_back(key);
    const json& v = obj.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) error(path, "expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) error(path, "expected a string");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) error(path, "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
            error(path, "expected a non-negative integer");
          }
        }
      } else {
        if (!v.is_number()) error(path, "expected a number");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      error(path, e.what());
    }
  }

 private:
  bool from_overrides(const std::vector<std::string>& path) const {
    const json* node = &overrides_;
    for (const auto& p : path) {
      if (!node->is_object() || !node->contains(p)) return false;
      node = &node->at(p);
    }
    return true;
  }

  int line_of(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    for (const auto& p : path) {
      const std::size_t next = text_.find("\"" + p + "\"", pos);
      if (next == std::string::npos) break;
      pos = next;
    }
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + pos, '\n'));
  }

  const std::string& text_;
  std::string source_;
  const json& overrides_;
};

void validate(const ExperimentConfig& c, const ConfigReader& r) {
  const std::set<std::string> env_kinds = {"linear", "tabular", "file"};
  if (!env_kinds.count(c.env.kind)) r.error({"env", "kind"}, "expected linear, tabular or file");
  if (c.env.kind == "file" && c.env.path.empty()) r.error({"env", "path"}, "required for kind file");
  if (c.env.kind == "file" && !fs::exists(c.env.path)) {
    r.error({"env", "path"}, "file '" + c.env.path + "' does not exist");
  }
  if (c.env.H < 1) r.error({"env", "H"}, "must be >= 1");
  if (c.env.nx < 1 || c.env.na < 1) r.error({"env"}, "nx and na must be >= 1");
  if (c.env.d < 1) r.error({"env", "d"}, "must be >= 1");
  if (c.env.grid < 0.0) r.error({"env", "grid"}, "must be >= 0");
  if (c.env.reward_model != "deterministic" && c.env.reward_model != "bernoulli") {
    r.error({"env", "reward_model"}, "expected deterministic or bernoulli");
  }
  const std::set<std::string> class_kinds = {"auto", "linear", "grid"};
  if (!class_kinds.count(c.classes.kind)) r.error({"classes", "kind"}, "expected auto, linear or grid");
  if (c.classes.grid_step <= 0.0) r.error({"classes", "grid_step"}, "must be positive");
  if (c.classes.L <= 0.0) r.error({"classes", "L"}, "must be positive");
  if (c.classes.eps_c == 0.0) r.error({"classes", "eps_c"}, "must be positive (or omitted)");
  if (c.classes.materialize_limit < 1) r.error({"classes", "materialize_limit"}, "must be >= 1");
  const std::set<std::string> algos = {"voql", "lsvi-ucb", "uniform-random"};
  if (!algos.count(c.algo)) r.error({"algo"}, "expected voql, lsvi-ucb or uniform-random");
  const std::set<std::string> oracles = {"vs", "elliptical", "subsample"};
  if (!oracles.count(c.oracle)) r.error({"oracle"}, "expected vs, elliptical or subsample");
  if (c.episodes < 1) r.error({"episodes"}, "T must be >= 1");
  if (c.seeds.empty()) r.error({"seeds"}, "need at least one seed");
  if (c.c_scale < 0.0) r.error({"params", "c_scale"}, "must be >= 0");
  if (c.C_sens <= 0.0) r.error({"params", "C_sens"}, "must be positive");
  if (c.u_init < 0.0) r.error({"params", "u_init"}, "must be >= 0");
  if (c.lambda <= 0.0) r.error({"params", "lambda"}, "must be positive");
  if (c.delta >= 1.0) r.error({"params", "delta"}, "must lie in (0, 1)");
  if (c.dsq_form != "surrogate" && c.dsq_form != "exact") {
    r.error({"options", "dsq_form"}, "expected surrogate or exact");
  }
  if (c.second_target != "optimistic" && c.second_target != "over-optimistic") {
    r.error({"options", "second_target"}, "expected optimistic or over-optimistic");
  }
  if (c.audit_z_points < 1 || c.audit_s_samples < 0) r.error({"options"}, "invalid audit grid");
  if (c.workers < 0) r.error({"workers"}, "must be >= 0");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "cannot create output directory '" + dir + "'");
  }
  const fs::path probe = fs::path(dir) / ".write_probe";
  write_text_file(probe.string(), "");
  fs::remove(probe, ec);
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

SeedResult run_seed(const EpisodicMdp& mdp, const ClassBundle* classes, const VoqlParams* params,
                    const ExperimentConfig& config, std::uint64_t seed) {
  SeedResult out;
  out.seed = seed;
  const int T = config.episodes;
  if (config.algo == "uniform-random") {
    UniformRandom algo(mdp, seed);
    out.records = algo.run(T);
  } else if (config.algo == "lsvi-ucb") {
    LsviOptions opt;
    opt.lambda = config.lambda;
    const double delta = config.delta > 0.0 ? config.delta
                                            : 1.0 / (T + mdp.horizon() * mdp.horizon() + 12.0);
    opt.beta = lsvi_default_beta(mdp.linear().dim, mdp.horizon(), T, delta, config.c_scale);
    LsviUcb algo(mdp, opt, seed);
    out.records = algo.run(T);
  } else {
    VoqlOptions opt = build_options(config);
    VoqlLearner learner(mdp, classes->value, classes->second, *params, opt, seed);
    for (int t = 1; t <= T; ++t) {
      try {
        out.records.push_back(learner.run_episode());
      } catch (const Error& e) {
        throw Error(e.code(), "episode " + std::to_string(t) + " (seed " + std::to_string(seed) +
                                  "): " + e.what());
      }
    }
    out.switched_episodes = learner.switched_episodes();
    out.raw_consistency_violations = learner.total_raw_consistency_violations();
    if (config.check_invariants) out.logs = learner.logs();
  }
  for (const auto& r : out.records) {
    out.online_violations += r.violations;
    out.max_distinct_subsample = std::max(out.max_distinct_subsample, r.distinct_subsample);
  }
  return out;
}

RunContext run_context(const VoqlParams& params) {
  RunContext ctx;
  ctx.H = params.H();
  ctx.alpha = params.alpha();
  ctx.lambda = params.lambda();
  ctx.L = params.L();
  ctx.eps = params.eps();
  return ctx;
}

AuditGrid audit_grid(const ExperimentConfig& config, std::uint64_t seed) {
  AuditGrid grid;
  grid.z_points = config.audit_z_points;
  grid.s_samples = config.audit_s_samples;
  grid.seed = derive_seed(seed, 17);
  return grid;
}

LinearDsqForm dsq_form(const ExperimentConfig& config) {
  return config.dsq_form == "exact" ? LinearDsqForm::kExact : LinearDsqForm::kSurrogate;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source,
                              const json& overrides) {
  json doc = parse_json_text(text, source);
  if (!doc.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, source + ":1: the config must be a JSON object");
  }
  if (!overrides.is_null()) doc.merge_patch(overrides);
  // A seed flag replaces any seed list from the file.
  if (overrides.contains("seed")) doc.erase("seeds");
  const ConfigReader r(text, source, overrides);
  r.check_keys(doc, {},
               {"env", "classes", "algo", "oracle", "episodes", "seed", "seeds", "params",
                "options", "check_invariants", "strict", "out", "workers"});
  ExperimentConfig c;
  if (doc.contains("env")) {
    const json& e = doc["env"];
    r.check_keys(e, {"env"},
                 {"kind", "d", "H", "nx", "na", "seed", "path", "grid", "reward_every_level",
                  "reward_model", "embed_linear"});
    r.read(e, {"env"}, "kind", c.env.kind);
    r.read(e, {"env"}, "d", c.env.d);
    r.read(e, {"env"}, "H", c.env.H);
    r.read(e, {"env"}, "nx", c.env.nx);
    r.read(e, {"env"}, "na", c.env.na);
    r.read(e, {"env"}, "seed", c.env.seed);
    r.read(e, {"env"}, "path", c.env.path);
    r.read(e, {"env"}, "grid", c.env.grid);
    r.read(e, {"env"}, "reward_every_level", c.env.reward_every_level);
    r.read(e, {"env"}, "reward_model", c.env.reward_model);
    r.read(e, {"env"}, "embed_linear", c.env.embed_linear);
    if (!c.env.path.empty() && fs::path(c.env.path).is_relative() &&
        !(overrides.contains("env") && overrides["env"].contains("path"))) {
      const fs::path base = fs::path(source).parent_path();
      if (!base.empty()) c.env.path = (base / c.env.path).lexically_normal().string();
    }
  }
  if (doc.contains("classes")) {
    const json& k = doc["classes"];
    r.check_keys(k, {"classes"}, {"kind", "grid_step", "eps_c", "L", "materialize_limit"});
    r.read(k, {"classes"}, "kind", c.classes.kind);
    r.read(k, {"classes"}, "grid_step", c.classes.grid_step);
    r.read(k, {"classes"}, "eps_c", c.classes.eps_c);
    r.read(k, {"classes"}, "L", c.classes.L);
    r.read(k, {"classes"}, "materialize_limit", c.classes.materialize_limit);
  }
  r.read(doc, {}, "algo", c.algo);
  r.read(doc, {}, "oracle", c.oracle);
  r.read(doc, {}, "episodes", c.episodes);
  if (doc.contains("seeds")) {
    if (!doc["seeds"].is_array()) r.error({"seeds"}, "expected an array of integers");
    c.seeds.clear();
    for (const auto& s : doc["seeds"]) {
      if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<long long>() < 0)) {
        r.error({"seeds"}, "expected non-negative integers");
      }
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  } else if (doc.contains("seed")) {
    std::uint64_t s = 0;
    r.read(doc, {}, "seed", s);
    c.seeds = {s};
  }
  if (doc.contains("params")) {
    const json& p = doc["params"];
    r.check_keys(p, {"params"},
                 {"c_scale", "C_u", "u_init", "C_sens", "delta", "alpha", "lambda", "eps",
                  "eps_b"});
    r.read(p, {"params"}, "c_scale", c.c_scale);
    r.read(p, {"params"}, "C_u", c.C_u);
    r.read(p, {"params"}, "u_init", c.u_init);
    r.read(p, {"params"}, "C_sens", c.C_sens);
    r.read(p, {"params"}, "delta", c.delta);
    r.read(p, {"params"}, "alpha", c.alpha);
    r.read(p, {"params"}, "lambda", c.lambda);
    r.read(p, {"params"}, "eps", c.eps);
    r.read(p, {"params"}, "eps_b", c.eps_b);
  }
  if (doc.contains("options")) {
    const json& o = doc["options"];
    r.check_keys(o, {"options"},
                 {"dsq_form", "second_target", "envelope", "audit_z_points", "audit_s_samples"});
    r.read(o, {"options"}, "dsq_form", c.dsq_form);
    r.read(o, {"options"}, "second_target", c.second_target);
    r.read(o, {"options"}, "envelope", c.envelope);
    r.read(o, {"options"}, "audit_z_points", c.audit_z_points);
    r.read(o, {"options"}, "audit_s_samples", c.audit_s_samples);
  }
  r.read(doc, {}, "check_invariants", c.check_invariants);
  r.read(doc, {}, "strict", c.strict);
  r.read(doc, {}, "out", c.out);
  r.read(doc, {}, "workers", c.workers);
  validate(c, r);
  return c;
}

ExperimentConfig load_config(const std::string& path, const json& overrides) {
  std::ifstream probe(path);
  if (!probe) throw Error(ErrorCode::kIo, "cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << probe.rdbuf();
  return parse_config(buf.str(), path, overrides);
}

json config_to_json(const ExperimentConfig& c) {
  json env = {{"kind", c.env.kind},
              {"d", c.env.d},
              {"H", c.env.H},
              {"nx", c.env.nx},
              {"na", c.env.na},
              {"seed", c.env.seed},
              {"grid", c.env.grid},
              {"reward_every_level", c.env.reward_every_level},
              {"reward_model", c.env.reward_model},
              {"embed_linear", c.env.embed_linear}};
  if (!c.env.path.empty()) env["path"] = c.env.path;
  return {{"env", env},
          {"classes",
           {{"kind", c.classes.kind},
            {"grid_step", c.classes.grid_step},
            {"eps_c", c.classes.eps_c},
            {"L", c.classes.L},
            {"materialize_limit", c.classes.materialize_limit}}},
          {"algo", c.algo},
          {"oracle", c.oracle},
          {"episodes", c.episodes},
          {"seeds", c.seeds},
          {"params",
           {{"c_scale", c.c_scale},
            {"C_u", c.C_u},
            {"u_init", c.u_init},
            {"C_sens", c.C_sens},
            {"delta", c.delta},
            {"alpha", c.alpha},
            {"lambda", c.lambda},
            {"eps", c.eps},
            {"eps_b", c.eps_b}}},
          {"options",
           {{"dsq_form", c.dsq_form},
            {"second_target", c.second_target},
            {"envelope", c.envelope},
            {"audit_z_points", c.audit_z_points},
            {"audit_s_samples", c.audit_s_samples}}},
          {"check_invariants", c.check_invariants},
          {"strict", c.strict},
          {"out", c.out},
          {"workers", c.workers}};
}

EpisodicMdp build_instance(const ExperimentConfig& config) {
  const EnvSpec& e = config.env;
  if (e.kind == "file") {
    EpisodicMdp mdp = load_instance(e.path);
    return e.embed_linear && !mdp.has_features() ? embed_tabular_as_linear(mdp) : mdp;
  }
  if (e.kind == "linear") return gen_linear_mdp(e.d, e.H, e.nx, e.na, e.seed);
  TabularOptions opt;
  opt.horizon = e.H;
  opt.num_states = e.nx;
  opt.num_actions = e.na;
  opt.seed = e.seed;
  opt.grid = e.grid;
  opt.reward_every_level = e.reward_every_level;
  opt.reward_model = e.reward_model == "bernoulli" ? RewardModel::kBernoulli
                                                   : RewardModel::kDeterministic;
  EpisodicMdp mdp = gen_tabular_mdp(opt);
  return e.embed_linear ? embed_tabular_as_linear(mdp) : mdp;
}

json ClassBundle::descriptor() const {
  json levels = json::array();
  for (std::size_t h = 0; h < value.size(); ++h) {
    json lvl = {{"value_log_size", value[h].log_size()},
                {"value_enumerable", value[h].enumerable()},
                {"value_range", value[h].range()},
                {"second_log_size", second[h].log_size()},
                {"second_range", second[h].range()}};
    if (value[h].kind() == ClassKind::kLinear) {
      lvl["radius"] = value[h].radius();
      lvl["second_radius"] = second[h].radius();
      lvl["spacing"] = value[h].spacing();
    }
    levels.push_back(std::move(lvl));
  }
  return {{"kind", kind}, {"eps_c", eps_c}, {"levels", levels}};
}

ClassBundle build_classes(const EpisodicMdp& mdp, const ExperimentConfig& config) {
  ClassBundle out;
  std::string kind = config.classes.kind;
  if (kind == "auto") kind = mdp.has_features() ? "linear" : "grid";
  if (kind == "linear" && !mdp.has_features()) {
    fail("classes: kind linear requires an instance with features");
  }
  out.kind = kind;
  const double L = config.classes.L;
  const int nX = mdp.num_states();
  const int nA = mdp.num_actions();
  if (kind == "linear") {
    out.eps_c = config.classes.eps_c > 0.0
                    ? config.classes.eps_c
                    : std::sqrt(config.lambda / (8.0 * config.episodes));
    CoverOptions opt;
    opt.materialize_limit = config.classes.materialize_limit;
    const auto& lin = mdp.linear();
    for (int h = 0; h < mdp.horizon(); ++h) {
      // Values r + f with f in [0, L] stay below L; their squares below L^2,
      // reached by weights of twice the radius.
      out.value.push_back(FunctionClass::linear_cover(nX, nA, lin.features[h], lin.norm_bound[h],
                                                      out.eps_c, L, opt));
      out.second.push_back(FunctionClass::linear_cover(
          nX, nA, lin.features[h], 2.0 * lin.norm_bound[h], out.eps_c, L * L, opt));
    }
  } else {
    const double step = config.classes.grid_step;
    for (int h = 0; h < mdp.horizon(); ++h) {
      out.value.push_back(FunctionClass::grid(nX, nA, step, L));
      out.second.push_back(FunctionClass::grid(nX, nA, step, L * L));
    }
  }
  return out;
}

VoqlOptions build_options(const ExperimentConfig& config) {
  VoqlOptions opt;
  opt.oracle = parse_oracle_kind(config.oracle);
  opt.dsq_form = dsq_form(config);
  opt.second_target = config.second_target == "over-optimistic"
                          ? SecondMomentTarget::kOverOptimistic
                          : SecondMomentTarget::kOptimistic;
  opt.envelope = config.envelope;
  opt.C_sens = config.C_sens;
  opt.record_log = config.check_invariants;
  opt.check_invariants = config.check_invariants;
  return opt;
}

VoqlParams build_params(const EpisodicMdp& mdp, const ClassBundle& classes,
                        const ExperimentConfig& config) {
  const OracleKind oracle = parse_oracle_kind(config.oracle);
  const bool linear = classes.kind == "linear";
  if (oracle == OracleKind::kElliptical && !linear) {
    fail("oracle elliptical requires a linear function class (instance features)");
  }
  if (oracle != OracleKind::kElliptical) {
    for (const auto& cls : classes.value) {
      if (!cls.enumerable()) {
        fail("oracle " + config.oracle +
             " requires an enumerable class; the linear cover is too large (raise eps_c or use "
             "the elliptical oracle)");
      }
    }
  }
  ParamsConfig pc;
  pc.T = config.episodes;
  pc.H = mdp.horizon();
  pc.delta = config.delta;
  pc.alpha = config.alpha;
  pc.lambda = config.lambda;
  pc.c_scale = config.c_scale;
  pc.C_u = config.C_u;
  pc.u_init = config.u_init;
  pc.L = config.classes.L;
  pc.eps = config.eps >= 0.0 ? config.eps : (linear ? classes.eps_c : 0.0);
  pc.eps_b = config.eps_b >= 0.0
                 ? config.eps_b
                 : (oracle == OracleKind::kElliptical ? classes.eps_c : 0.0);
  double log_N = 0.0;
  for (const auto& cls : classes.value) log_N = std::max(log_N, cls.log_size());
  pc.log_N = log_N;
  const VoqlParams probe(pc);
  if (linear) {
    double radius = 0.0;
    for (const auto& cls : classes.value) radius = std::max(radius, cls.radius());
    pc.d_alpha = eluder_estimate_linear(mdp.linear().dim, radius, pc.T, probe.alpha(), pc.lambda);
  } else {
    pc.d_alpha = eluder_estimate_finite(log_N, mdp.num_pairs(), pc.L, pc.T, probe.alpha(),
                                        pc.lambda);
  }
  switch (oracle) {
    case OracleKind::kVersionSpace:
      pc.log_Nb = log_bonus_class_vs(log_N);
      return VoqlParams(pc);
    case OracleKind::kSubsample:
      pc.log_Nb = log_bonus_class_subsample(pc.d_alpha, pc.T, log_N, probe.delta(),
                                            mdp.num_pairs());
      return VoqlParams(pc);
    case OracleKind::kElliptical:
      break;
  }
  return resolve_elliptical_params(pc, mdp.linear().dim, classes.eps_c);
}

std::optional<double> power_law_exponent(const std::vector<double>& cum_regret) {
  const int T = static_cast<int>(cum_regret.size());
  if (T < 2) return std::nullopt;
  const double lo = std::max(1.0, T / 10.0);
  std::set<int> ts;
  constexpr int kPoints = 50;
  for (int k = 0; k < kPoints; ++k) {
    const double frac = static_cast<double>(k) / (kPoints - 1);
    const double t = std::exp(std::log(lo) + frac * (std::log(static_cast<double>(T)) - std::log(lo)));
    ts.insert(std::clamp(static_cast<int>(std::lround(t)), 1, T));
  }
  std::vector<double> xs, ys;
  for (int t : ts) {
    if (cum_regret[t - 1] <= 0.0) continue;
    xs.push_back(std::log(static_cast<double>(t)));
    ys.push_back(std::log(cum_regret[t - 1]));
  }
  if (xs.size() < 2) return std::nullopt;
  const double mx = mean_of(xs), my = mean_of(ys);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx <= 0.0) return std::nullopt;
  return sxy / sxx;
}

std::string regret_csv(const std::vector<RegretRecord>& records) {
  std::string out = "episode,return,v1_exact,inst_regret,cum_regret,h_t,mean_sigma_bar,violations\n";
  for (const auto& r : records) {
    out += std::to_string(r.episode) + "," + fmt(r.realized_return) + "," + fmt(r.v1_exact) + "," +
           fmt(r.inst_regret) + "," + fmt(r.cum_regret) + "," + std::to_string(r.h_t) + "," +
           fmt(r.mean_sigma_bar) + "," + std::to_string(r.violations) + "\n";
  }
  return out;
}

json summary_to_json(const ExperimentResult& result) {
  const ExperimentConfig& c = result.config;
  const int T = c.episodes;
  json s;
  s["format"] = "voql-summary";
  s["version"] = 1;
  s["algo"] = c.algo;
  s["oracle"] = c.algo == "voql" ? json(c.oracle) : json(nullptr);
  s["episodes"] = T;
  std::vector<std::uint64_t> seeds;
  for (const auto& sr : result.seeds) seeds.push_back(sr.seed);
  s["seeds"] = seeds;

  json checkpoints = json::array();
  std::set<int> marks = {std::max(1, T / 4), std::max(1, T / 2), T};
  for (int t : marks) {
    std::vector<double> vals;
    for (const auto& sr : result.seeds) vals.push_back(sr.records[t - 1].cum_regret);
    checkpoints.push_back({{"episode", t}, {"mean", mean_of(vals)}, {"std", sample_std(vals)}});
  }
  s["checkpoints"] = checkpoints;

  std::vector<double> mean_curve(T, 0.0);
  json per_seed = json::array();
  for (const auto& sr : result.seeds) {
    std::vector<double> curve(T);
    for (int t = 0; t < T; ++t) {
      curve[t] = sr.records[t].cum_regret;
      mean_curve[t] += curve[t] / result.seeds.size();
    }
    const auto e = power_law_exponent(curve);
    per_seed.push_back({{"seed", sr.seed},
                        {"final_cum_regret", curve.back()},
                        {"exponent", e ? json(*e) : json(nullptr)},
                        {"switched_episodes", sr.switched_episodes},
                        {"online_violations", sr.online_violations},
                        {"raw_consistency_violations", sr.raw_consistency_violations},
                        {"max_distinct_subsample",
                         sr.max_distinct_subsample >= 0 ? json(sr.max_distinct_subsample)
                                                        : json(nullptr)}});
  }
  const auto e = power_law_exponent(mean_curve);
  s["exponent"] = e ? json(*e) : json(nullptr);
  s["fit_window"] = {std::max(1, T / 10), T};
  s["per_seed"] = per_seed;

  long long online = 0, raw = 0;
  int max_switched = 0;
  for (const auto& sr : result.seeds) {
    online += sr.online_violations;
    raw += sr.raw_consistency_violations;
    max_switched = std::max(max_switched, sr.switched_episodes);
  }
  s["max_switched_episodes"] = max_switched;
  json violations = {{"online", online}, {"raw_consistency", raw}};
  if (c.check_invariants && c.algo == "voql") {
    json audits = json::object();
    for (const auto& sr : result.seeds) {
      if (!sr.verify) continue;
      for (const auto& rep : sr.verify->reports) {
        json& a = audits[rep.name];
        if (a.is_null()) a = {{"total", 0}, {"violations", 0}};
        a["total"] = a["total"].get<long long>() + rep.total;
        a["violations"] = a["violations"].get<long long>() + rep.violations;
      }
    }
    for (auto& [name, a] : audits.items()) {
      const long long total = a["total"].get<long long>();
      a["rate"] = total == 0 ? 0.0 : static_cast<double>(a["violations"].get<long long>()) / total;
    }
    violations["audits"] = audits;
  }
  violations["breach"] = result.breach;
  s["violations"] = violations;
  s["params"] = result.params;
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult result;
  result.config = config;
  const EpisodicMdp mdp = build_instance(config);
  if (config.algo == "lsvi-ucb" && !mdp.has_features()) {
    fail("algo lsvi-ucb requires an instance with linear features (set env.embed_linear)");
  }
  std::optional<ClassBundle> classes;
  std::optional<VoqlParams> params;
  if (config.algo == "voql") {
    classes = build_classes(mdp, config);
    params = build_params(mdp, *classes, config);
    result.params = params->to_json();
  }
  if (!config.out.empty()) ensure_directory(config.out);

  const int n = static_cast<int>(config.seeds.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = std::clamp(config.workers > 0 ? config.workers : static_cast<int>(hw), 1, n);
  result.seeds.resize(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        SeedResult sr = run_seed(mdp, classes ? &*classes : nullptr, params ? &*params : nullptr,
                                 config, config.seeds[i]);
        if (config.check_invariants && config.algo == "voql") {
          sr.verify = verify_run(sr.logs, mdp, classes->value, run_context(*params),
                                 dsq_form(config), params->delta(), audit_grid(config, sr.seed));
        }
        result.seeds[i] = std::move(sr);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (const auto& sr : result.seeds) {
    if (sr.verify && sr.verify->breach) result.breach = true;
  }
  result.summary = summary_to_json(result);

  if (!config.out.empty()) {
    const fs::path dir(config.out);
    for (const auto& sr : result.seeds) {
      write_text_file((dir / ("regret_" + std::to_string(sr.seed) + ".csv")).string(),
                      regret_csv(sr.records));
      if (config.check_invariants && config.algo == "voql") {
        write_text_file((dir / ("runlog_" + std::to_string(sr.seed) + ".json")).string(),
                        episode_logs_to_json(sr.logs).dump() + "\n");
      }
    }
    json instance = instance_to_json(mdp);
    if (classes) instance["function_classes"] = classes->descriptor();
    write_text_file((dir / "instance.json").string(), instance.dump(1) + "\n");
    json resolved = config_to_json(config);
    // The copied instance makes the output directory self-contained.
    resolved["env"] = {{"kind", "file"}, {"path", "instance.json"}};
    write_text_file((dir / "config.json").string(), resolved.dump(2) + "\n");
    write_text_file((dir / "summary.json").string(), result.summary.dump(2) + "\n");
    if (config.check_invariants && config.algo == "voql") {
      json report = json::object();
      for (const auto& sr : result.seeds) report[std::to_string(sr.seed)] = sr.verify->to_json();
      report["breach"] = result.breach;
      write_text_file((dir / "verify_report.json").string(), report.dump(2) + "\n");
    }
  }
  return result;
}

VerifyDirResult verify_run_directory(const std::string& dir) {
  const fs::path root(dir);
  const fs::path cfg_path = root / "config.json";
  if (!fs::exists(cfg_path)) throw Error(ErrorCode::kIo, "no config.json in '" + dir + "'");
  ExperimentConfig config = load_config(cfg_path.string());
  if (config.algo != "voql") fail("verify: the run in '" + dir + "' is not a voql run");
  const EpisodicMdp mdp = build_instance(config);
  const ClassBundle classes = build_classes(mdp, config);
  const VoqlParams params = build_params(mdp, classes, config);
  VerifyDirResult out;
  out.report = json::object();
  int found = 0;
  for (std::uint64_t seed : config.seeds) {
    const fs::path log_path = root / ("runlog_" + std::to_string(seed) + ".json");
    if (!fs::exists(log_path)) continue;
    ++found;
    const auto logs =
        episode_logs_from_json(read_json_file(log_path.string()), mdp.num_states(), mdp.num_actions());
    const VerifySummary summary = verify_run(logs, mdp, classes.value, run_context(params),
                                             dsq_form(config), params.delta(),
                                             audit_grid(config, seed));
    out.report[std::to_string(seed)] = summary.to_json();
    out.breach = out.breach || summary.breach;
  }
  if (found == 0) {
    throw Error(ErrorCode::kIo, "verify: no runlog_<seed>.json in '" + dir +
                                    "' (rerun with --check-invariants)");
  }
  out.report["breach"] = out.breach;
  write_text_file((root / "verify_report.json").string(), out.report.dump(2) + "\n");
  return out;
}

}  // namespace voql
