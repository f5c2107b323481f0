#include "voql/verify.hpp"

#include <cmath>

namespace voql {
namespace {

constexpr double kTol = 1e-9;
constexpr std::size_t kMaxSamples = 20;

std::vector<double> zeros_or_values(const std::vector<QFunction>& f, int h, int num_states) {
  if (h >= static_cast<int>(f.size())) return std::vector<double>(num_states, 0.0);
  return f[h].state_values();
}

std::vector<PairIndex> sample_pairs(int num_pairs, int wanted, Rng& rng) {
  std::vector<PairIndex> all(num_pairs);
  for (int z = 0; z < num_pairs; ++z) all[z] = z;
  if (num_pairs <= wanted) return all;
  std::shuffle(all.begin(), all.end(), rng.engine());
  all.resize(wanted);
  std::sort(all.begin(), all.end());
  return all;
}

nlohmann::json tables_to_json(const std::vector<QFunction>& tables) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& q : tables) {
    out.push_back(std::vector<double>(q.values().begin(), q.values().end()));
  }
  return out;
}

std::vector<QFunction> tables_from_json(const nlohmann::json& j, int nX, int nA) {
  std::vector<QFunction> out;
  for (const auto& row : j) out.emplace_back(nX, nA, row.get<std::vector<double>>());
  return out;
}

}  // namespace

bool ViolationReport::compare(double lhs, double rhs, double tol, const nlohmann::json& where) {
  nlohmann::json w = where;
  w["lhs"] = lhs;
  w["rhs"] = rhs;
  return record(lhs - rhs <= tol, lhs - rhs, w);
}

bool ViolationReport::record(bool ok, double slack, const nlohmann::json& where) {
  ++total;
  worst_slack = std::max(worst_slack, slack);
  if (ok) return true;
  ++violations;
  if (samples.size() < kMaxSamples) samples.push_back(where);
  return false;
}

nlohmann::json ViolationReport::to_json() const {
  nlohmann::json j = {{"check", name},
                      {"total", total},
                      {"violations", violations},
                      {"rate", rate()},
                      {"samples", samples}};
  j["worst_slack"] = total == 0 ? nlohmann::json(nullptr) : nlohmann::json(worst_slack);
  if (!note.empty()) j["note"] = note;
  return j;
}

ViolationReport check_monotonicity(const std::vector<EpisodeLog>& logs, const EpisodicMdp& mdp,
                                   const OptimalSolution& opt, const AuditGrid& grid) {
  ViolationReport rep;
  rep.name = "monotonicity";
  const int H = mdp.horizon();
  const int nX = mdp.num_states();
  Rng rng(derive_seed(grid.seed, 11));
  std::vector<std::vector<PairIndex>> pairs(H);
  for (int h = 0; h < H; ++h) pairs[h] = sample_pairs(mdp.num_pairs(), grid.z_points, rng);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    require(logs[i].t == static_cast<int>(i) + 1, "monotonicity: logs must cover t = 1, 2, ...");
    require(!logs[i].f1.empty(), "monotonicity: log is missing value tables");
  }
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const EpisodeLog& lt = logs[i];
    const int t = lt.t;
    std::vector<int> ss{t};
    for (int k = 0; k < grid.s_samples; ++k) {
      const double s = std::exp(rng.uniform() * std::log(static_cast<double>(t)));
      ss.push_back(std::clamp(static_cast<int>(std::floor(s)), 1, t));
    }
    for (int h = 0; h < H; ++h) {
      const auto cont = zeros_or_values(lt.f1, h + 1, nX);
      for (PairIndex z : pairs[h]) {
        const double backup = true_conditional(mdp, cont, h, z).mean;
        const double q = opt.q[h][z];
        for (int s : ss) {
          const EpisodeLog& ls = logs[s - 1];
          const nlohmann::json where = {{"t", t}, {"s", s}, {"h", h + 1}, {"z", z}};
          auto tagged = [&](const char* which) {
            nlohmann::json w = where;
            w["inequality"] = which;
            return w;
          };
          rep.compare(ls.fm2[h][z], q, kTol, tagged("f_s,-2 <= Q*"));
          rep.compare(q, lt.f1[h][z], kTol, tagged("Q* <= f_t,1"));
          rep.compare(lt.f1[h][z], ls.f2[h][z], kTol, tagged("f_t,1 <= f_s,2"));
          rep.compare(backup, ls.f2[h][z], kTol, tagged("T f_t,1 <= f_s,2"));
        }
      }
    }
  }
  return rep;
}

double class_distance(const FunctionClass& cls, const std::vector<double>& target) {
  if (cls.enumerable()) {
    double best = kInf;
    for (std::int64_t m = 0; m < cls.size() && best > 0.0; ++m) {
      double worst = 0.0;
      for (PairIndex z = 0; z < cls.num_pairs() && worst < best; ++z) {
        worst = std::max(worst, std::abs(cls.value(m, z) - target[z]));
      }
      best = std::min(best, worst);
    }
    return best;
  }
  // Implicit covers: the snapped least-squares weights give an upper bound.
  const Eigen::Map<const Eigen::VectorXd> g(target.data(), static_cast<Eigen::Index>(target.size()));
  const Eigen::VectorXd w = cls.features().colPivHouseholderQr().solve(g);
  const QFunction f = cls.evaluate_weights(cls.snap(w));
  double worst = 0.0;
  for (PairIndex z = 0; z < cls.num_pairs(); ++z) worst = std::max(worst, std::abs(f[z] - target[z]));
  return worst;
}

ViolationReport check_completeness(const std::vector<EpisodeLog>& logs, const EpisodicMdp& mdp,
                                   const std::vector<FunctionClass>& value_classes,
                                   const RunContext& ctx, int max_episodes) {
  ViolationReport rep;
  rep.name = "completeness";
  require(static_cast<int>(value_classes.size()) == mdp.horizon(),
          "completeness: one value class per level is required");
  const int H = mdp.horizon();
  const int nX = mdp.num_states();
  // Episode 1 has no backward pass, so its tables are defaults.
  std::vector<std::size_t> picked;
  const std::size_t fitted = logs.size() > 1 ? logs.size() - 1 : 0;
  const std::size_t wanted = std::min<std::size_t>(fitted, std::max(max_episodes, 1));
  for (std::size_t k = 0; k < wanted; ++k) {
    const std::size_t i = 1 + (wanted == 1 ? fitted - 1 : k * (fitted - 1) / (wanted - 1));
    if (picked.empty() || picked.back() != i) picked.push_back(i);
  }
  for (std::size_t i : picked) {
    const EpisodeLog& log = logs[i];
    for (int h = 0; h < H; ++h) {
      const auto cont = zeros_or_values(log.f1, h + 1, nX);
      std::vector<double> target(mdp.num_pairs());
      for (PairIndex z = 0; z < mdp.num_pairs(); ++z) {
        target[z] = true_conditional(mdp, cont, h, z).mean;
      }
      const double dist = class_distance(value_classes[h], target);
      rep.compare(dist, ctx.eps, kTol, {{"t", log.t}, {"h", h + 1}});
    }
  }
  return rep;
}

ViolationReport check_variance_lower(const std::vector<EpisodeLog>& logs, const EpisodicMdp& mdp,
                                     const OptimalSolution& opt) {
  ViolationReport rep;
  rep.name = "variance_lower";
  for (const auto& log : logs) {
    for (const auto& v : log.visits) {
      const double truth = true_conditional(mdp, opt.v[v.h + 1], v.h, v.z).variance;
      rep.compare(truth, v.sigma_sq, kTol, {{"t", log.t}, {"h", v.h + 1}, {"z", v.z}});
    }
  }
  return rep;
}

ViolationReport check_variance_upper(const std::vector<EpisodeLog>& logs, const EpisodicMdp& mdp,
                                     const RunContext& ctx) {
  ViolationReport rep;
  rep.name = "variance_upper";
  const double L = ctx.L;
  for (const auto& log : logs) {
    for (const auto& v : log.visits) {
      const auto cont = zeros_or_values(log.f1, v.h + 1, mdp.num_states());
      const double truth = true_conditional(mdp, cont, v.h, v.z).variance;
      const double width = std::sqrt(v.dsq_unit) *
                           (2.0 * std::sqrt(v.beta_bar * v.beta_bar + ctx.lambda) +
                            4.0 * L * std::sqrt(v.beta2 * v.beta2 + ctx.lambda));
      const double bound =
          truth + 4.0 * v.gap + 4.0 * std::min(1.0, width) + 4.0 * (2.0 + L) * ctx.eps;
      rep.compare(v.sigma_sq, bound, kTol, {{"t", log.t}, {"h", v.h + 1}, {"z", v.z}});
    }
  }
  return rep;
}

ViolationReport check_sigma_bar_replay(const std::vector<EpisodeLog>& logs,
                                       const std::vector<FunctionClass>& value_classes,
                                       const RunContext& ctx, LinearDsqForm form) {
  ViolationReport rep;
  rep.name = "sigma_bar_replay";
  std::vector<std::unique_ptr<UncertaintyContext>> unit, bar;
  for (const auto& cls : value_classes) {
    unit.push_back(make_uncertainty(cls, ctx.lambda, form));
    bar.push_back(make_uncertainty(cls, ctx.lambda, form));
  }
  for (const auto& log : logs) {
    for (const auto& v : log.visits) {
      require(v.h >= 0 && v.h < static_cast<int>(value_classes.size()),
              "replay: visit level out of range");
      const double dsq_unit = unit[v.h]->dsq(v.z);
      const double dsq_bar = bar[v.h]->dsq(v.z);
      const double sigma_sq =
          log.t == 1 ? 4.0
                     : variance_estimate(v.ghat, v.fhat_m2, dsq_unit, v.beta_bar, v.beta2,
                                         ctx.lambda, ctx.L, ctx.eps);
      const double sigma_bar =
          sigma_bar_rule(std::sqrt(sigma_sq), ctx.alpha, v.iota, v.gap, v.upsilon, dsq_bar);
      const bool exact = dsq_unit == v.dsq_unit && dsq_bar == v.dsq_bar &&
                         sigma_sq == v.sigma_sq && sigma_bar == v.sigma_bar;
      rep.record(exact, std::abs(sigma_bar - v.sigma_bar),
                 {{"t", log.t}, {"h", v.h + 1}, {"z", v.z}, {"replayed", sigma_bar},
                  {"logged", v.sigma_bar}});
      unit[v.h]->append(v.z, 1.0);
      bar[v.h]->append(v.z, v.sigma_bar);
    }
  }
  return rep;
}

ViolationReport check_ranges(const std::vector<EpisodeLog>& logs, const RunContext& ctx) {
  ViolationReport rep;
  rep.name = "ranges";
  auto within = [&](const std::vector<QFunction>& tables, double lo, double hi, int t,
                    const char* which) {
    for (std::size_t h = 0; h < tables.size(); ++h) {
      for (int z = 0; z < tables[h].num_pairs(); ++z) {
        const nlohmann::json where = {{"t", t}, {"h", h + 1}, {"z", z}, {"table", which}};
        rep.compare(lo, tables[h][z], 0.0, where);
        rep.compare(tables[h][z], hi, 0.0, where);
      }
    }
  };
  for (const auto& log : logs) {
    within(log.f1, 0.0, 1.0, log.t, "f1");
    within(log.f2, 0.0, 2.0, log.t, "f2");
    within(log.fm2, 0.0, ctx.L, log.t, "f-2");
    rep.compare(1.0, log.switch_level, 0.0, {{"t", log.t}, {"switch_level", log.switch_level}});
    rep.compare(log.switch_level, ctx.H + 1.0, 0.0,
                {{"t", log.t}, {"switch_level", log.switch_level}});
    for (const auto& v : log.visits) {
      const nlohmann::json where = {{"t", log.t}, {"h", v.h + 1}, {"z", v.z}};
      rep.compare(ctx.alpha, v.sigma_bar, 0.0, where);
      rep.compare(0.0, v.sigma_sq, 0.0, where);
      rep.compare(v.sigma_sq, 4.0, 0.0, where);
    }
  }
  return rep;
}

ViolationReport check_consistency(const std::vector<QFunction>& sequence,
                                  const std::string& name) {
  ViolationReport rep;
  rep.name = name;
  for (std::size_t i = 1; i < sequence.size(); ++i) {
    for (int z = 0; z < sequence[i].num_pairs(); ++z) {
      rep.compare(sequence[i][z], sequence[i - 1][z], 0.0, {{"step", i}, {"z", z}});
    }
  }
  return rep;
}

ViolationReport check_run_consistency(const std::vector<EpisodeLog>& logs) {
  ViolationReport rep;
  rep.name = "bonus_consistency";
  for (std::size_t i = 2; i < logs.size(); ++i) {
    const auto& cur = logs[i];
    const auto& prev = logs[i - 1];
    for (std::size_t h = 0; h < cur.b1.size(); ++h) {
      for (int z = 0; z < cur.b1[h].num_pairs(); ++z) {
        const nlohmann::json where = {{"t", cur.t}, {"h", h + 1}, {"z", z}};
        rep.compare(cur.b1[h][z], prev.b1[h][z], 0.0, where);
        rep.compare(cur.b2[h][z], prev.b2[h][z], 0.0, where);
      }
    }
  }
  return rep;
}

void check_bonus_contract(ViolationReport& dominance, ViolationReport& cap,
                          const BonusFn& bonus, const FunctionClass& cls,
                          std::span<const double> center, std::span<const double> weight,
                          double beta, const UncertaintyContext& uncertainty, double C,
                          double eps_b, double lambda) {
  const BonusFn exact = vs_bonus(cls, center, weight, beta);
  const double scale = std::sqrt(beta * beta + lambda);
  for (int z = 0; z < cls.num_pairs(); ++z) {
    const nlohmann::json where = {{"z", z}, {"beta", beta}};
    dominance.compare(exact(z), bonus(z), kTol, where);
    const double bound = C * (std::sqrt(uncertainty.dsq(z)) * scale + eps_b * beta);
    cap.compare(bonus(z), bound, kTol, where);
  }
}

void check_subsample(ViolationReport& sandwich, ViolationReport& size, const SubsampledSet& set,
                     const FunctionClass& cls, std::span<const double> center,
                     std::span<const double> full_weight, double beta, int size_bound) {
  const BonusFn lower = vs_bonus(cls, center, full_weight, beta);
  const BonusFn upper = vs_bonus(cls, center, full_weight, 100.0 * beta);
  const BonusFn sub = subsample_bonus(set, cls, center, beta);
  for (int z = 0; z < cls.num_pairs(); ++z) {
    sandwich.compare(lower(z), sub(z), kTol, {{"z", z}, {"leg", "lower"}});
    sandwich.compare(sub(z), upper(z), kTol, {{"z", z}, {"leg", "upper"}});
  }
  size.compare(set.distinct_count(), size_bound, 0.0, {{"bound", size_bound}});
}

nlohmann::json VerifySummary::to_json() const {
  nlohmann::json j;
  j["breach"] = breach;
  j["reports"] = nlohmann::json::array();
  for (const auto& r : reports) j["reports"].push_back(r.to_json());
  return j;
}

VerifySummary verify_run(const std::vector<EpisodeLog>& logs, const EpisodicMdp& mdp,
                         const std::vector<FunctionClass>& value_classes, const RunContext& ctx,
                         LinearDsqForm form, double delta, const AuditGrid& grid) {
  const OptimalSolution opt = solve_optimal(mdp);
  VerifySummary out;
  const double budget = std::max(delta, 0.05);
  auto add_budgeted = [&](ViolationReport r) {
    r.note = "budget rate " + std::to_string(budget);
    out.breach = out.breach || r.rate() > budget;
    out.reports.push_back(std::move(r));
  };
  add_budgeted(check_monotonicity(logs, mdp, opt, grid));
  add_budgeted(check_variance_lower(logs, mdp, opt));
  add_budgeted(check_variance_upper(logs, mdp, ctx));
  for (auto r : {check_sigma_bar_replay(logs, value_classes, ctx, form), check_ranges(logs, ctx)}) {
    r.note = "must be exact";
    out.breach = out.breach || r.violations > 0;
    out.reports.push_back(std::move(r));
  }
  ViolationReport consistency = check_run_consistency(logs);
  consistency.note = "informational";
  out.reports.push_back(std::move(consistency));
  ViolationReport completeness = check_completeness(logs, mdp, value_classes, ctx);
  completeness.note = "informational; worst_slack + eps is the largest realized distance";
  out.reports.push_back(std::move(completeness));
  return out;
}

nlohmann::json episode_logs_to_json(const std::vector<EpisodeLog>& logs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& log : logs) {
    nlohmann::json j;
    j["t"] = log.t;
    j["u"] = log.u;
    j["switch_level"] = log.switch_level;
    j["beta1"] = log.beta1;
    j["beta2"] = log.beta2;
    j["raw_consistency_violations"] = log.raw_consistency_violations;
    j["f1"] = tables_to_json(log.f1);
    j["f2"] = tables_to_json(log.f2);
    j["fm2"] = tables_to_json(log.fm2);
    j["fhat1"] = tables_to_json(log.fhat1);
    j["fhat2"] = tables_to_json(log.fhat2);
    j["fhat_m2"] = tables_to_json(log.fhat_m2);
    j["ghat"] = tables_to_json(log.ghat);
    j["b1"] = tables_to_json(log.b1);
    j["b2"] = tables_to_json(log.b2);
    nlohmann::json visits = nlohmann::json::array();
    for (const auto& v : log.visits) {
      visits.push_back({{"h", v.h},
                        {"z", v.z},
                        {"reward", v.reward},
                        {"next_state", v.next_state},
                        {"sigma_sq", v.sigma_sq},
                        {"sigma_bar", v.sigma_bar},
                        {"dsq_unit", v.dsq_unit},
                        {"dsq_bar", v.dsq_bar},
                        {"gap", v.gap},
                        {"ghat", v.ghat},
                        {"fhat_m2", v.fhat_m2},
                        {"beta2", v.beta2},
                        {"beta_bar", v.beta_bar},
                        {"iota", v.iota},
                        {"upsilon", v.upsilon}});
    }
    j["visits"] = std::move(visits);
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<EpisodeLog> episode_logs_from_json(const nlohmann::json& doc, int nX, int nA) {
  std::vector<EpisodeLog> logs;
  try {
    for (const auto& j : doc) {
      EpisodeLog log;
      log.t = j.at("t").get<int>();
      log.u = j.at("u").get<double>();
      log.switch_level = j.at("switch_level").get<int>();
      log.beta1 = j.at("beta1").get<double>();
      log.beta2 = j.at("beta2").get<double>();
      log.raw_consistency_violations = j.at("raw_consistency_violations").get<int>();
      log.f1 = tables_from_json(j.at("f1"), nX, nA);
      log.f2 = tables_from_json(j.at("f2"), nX, nA);
      log.fm2 = tables_from_json(j.at("fm2"), nX, nA);
      log.fhat1 = tables_from_json(j.at("fhat1"), nX, nA);
      log.fhat2 = tables_from_json(j.at("fhat2"), nX, nA);
      log.fhat_m2 = tables_from_json(j.at("fhat_m2"), nX, nA);
      log.ghat = tables_from_json(j.at("ghat"), nX, nA);
      log.b1 = tables_from_json(j.at("b1"), nX, nA);
      log.b2 = tables_from_json(j.at("b2"), nX, nA);
      for (const auto& vj : j.at("visits")) {
        VisitRecord v;
        v.h = vj.at("h").get<int>();
        v.z = vj.at("z").get<int>();
        v.reward = vj.at("reward").get<double>();
        v.next_state = vj.at("next_state").get<int>();
        v.sigma_sq = vj.at("sigma_sq").get<double>();
        v.sigma_bar = vj.at("sigma_bar").get<double>();
        v.dsq_unit = vj.at("dsq_unit").get<double>();
        v.dsq_bar = vj.at("dsq_bar").get<double>();
        v.gap = vj.at("gap").get<double>();
        v.ghat = vj.at("ghat").get<double>();
        v.fhat_m2 = vj.at("fhat_m2").get<double>();
        v.beta2 = vj.at("beta2").get<double>();
        v.beta_bar = vj.at("beta_bar").get<double>();
        v.iota = vj.at("iota").get<double>();
        v.upsilon = vj.at("upsilon").get<double>();
        log.visits.push_back(v);
      }
      logs.push_back(std::move(log));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("run log: ") + e.what());
  }
  return logs;
}

}  // namespace voql
