#include "voql/serialization.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace voql {
namespace {

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::kParse, what); }

const nlohmann::json& field(const nlohmann::json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(key)) parse_fail(ctx + ": missing field '" + key + "'");
  return obj.at(key);
}

template <typename T>
T get_as(const nlohmann::json& v, const std::string& ctx) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    parse_fail(ctx + ": " + e.what());
  }
}

Eigen::MatrixXd rows_to_matrix(const nlohmann::json& rows, int cols, const std::string& ctx) {
  const auto data = get_as<std::vector<std::vector<double>>>(rows, ctx);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(data.size()), cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (static_cast<int>(data[i].size()) != cols) parse_fail(ctx + ": ragged matrix row");
    for (int j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), j) = data[i][j];
  }
  return m;
}

std::vector<std::vector<double>> matrix_to_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  }
  return rows;
}

}  // namespace

nlohmann::json instance_to_json(const EpisodicMdp& mdp) {
  nlohmann::json doc;
  doc["format"] = "voql-instance";
  doc["version"] = 1;
  doc["horizon"] = mdp.horizon();
  doc["num_states"] = mdp.num_states();
  doc["num_actions"] = mdp.num_actions();
  doc["seed"] = mdp.seed();
  doc["reward_model"] =
      mdp.reward_model() == RewardModel::kBernoulli ? "bernoulli" : "deterministic";
  doc["initial"] = mdp.initial();
  if (mdp.has_features()) doc["feature_dim"] = mdp.linear().dim;
  nlohmann::json levels = nlohmann::json::array();
  for (int h = 0; h < mdp.horizon(); ++h) {
    nlohmann::json lvl;
    std::vector<std::vector<double>> rows;
    for (PairIndex z = 0; z < mdp.num_pairs(); ++z) {
      const auto row = mdp.transition(h, z);
      rows.emplace_back(row.begin(), row.end());
    }
    lvl["transitions"] = rows;
    lvl["rewards"] = mdp.level(h).rewards;
    if (mdp.has_features()) {
      const auto& lin = mdp.linear();
      lvl["features"] = matrix_to_rows(lin.features[h]);
      lvl["measures"] = matrix_to_rows(lin.measures[h]);
      const auto& th = lin.reward_weights[h];
      lvl["theta"] = std::vector<double>(th.data(), th.data() + th.size());
      lvl["norm_bound"] = lin.norm_bound[h];
    }
    levels.push_back(std::move(lvl));
  }
  doc["levels"] = std::move(levels);
  return doc;
}

EpisodicMdp instance_from_json(const nlohmann::json& doc) {
  const std::string ctx = "instance";
  if (get_as<std::string>(field(doc, "format", ctx), ctx) != "voql-instance") {
    parse_fail("instance: unexpected format tag");
  }
  const int H = get_as<int>(field(doc, "horizon", ctx), ctx);
  const int nX = get_as<int>(field(doc, "num_states", ctx), ctx);
  const int nA = get_as<int>(field(doc, "num_actions", ctx), ctx);
  const auto seed = doc.contains("seed") ? get_as<std::uint64_t>(doc["seed"], ctx) : 0;
  const std::string model =
      doc.contains("reward_model") ? get_as<std::string>(doc["reward_model"], ctx) : "deterministic";
  if (model != "deterministic" && model != "bernoulli") {
    parse_fail("instance: unknown reward_model '" + model + "'");
  }
  auto initial = get_as<std::vector<double>>(field(doc, "initial", ctx), ctx);
  const auto& levels_json = field(doc, "levels", ctx);
  if (!levels_json.is_array() || static_cast<int>(levels_json.size()) != H) {
    parse_fail("instance: 'levels' must hold one entry per level");
  }
  const bool has_features = doc.contains("feature_dim");
  const int d = has_features ? get_as<int>(doc["feature_dim"], ctx) : 0;
  std::vector<MdpLevel> levels(H);
  LinearStructure lin;
  lin.dim = d;
  for (int h = 0; h < H; ++h) {
    const std::string lctx = "instance level " + std::to_string(h + 1);
    const auto& lj = levels_json[h];
    const auto rows = get_as<std::vector<std::vector<double>>>(field(lj, "transitions", lctx), lctx);
    if (static_cast<int>(rows.size()) != nX * nA) parse_fail(lctx + ": wrong transition count");
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != nX) parse_fail(lctx + ": ragged transition row");
      levels[h].transitions.insert(levels[h].transitions.end(), row.begin(), row.end());
    }
    levels[h].rewards = get_as<std::vector<double>>(field(lj, "rewards", lctx), lctx);
    if (has_features) {
      lin.features.push_back(rows_to_matrix(field(lj, "features", lctx), d, lctx));
      lin.measures.push_back(rows_to_matrix(field(lj, "measures", lctx), nX, lctx));
      const auto th = get_as<std::vector<double>>(field(lj, "theta", lctx), lctx);
      lin.reward_weights.push_back(Eigen::Map<const Eigen::VectorXd>(th.data(), th.size()));
      lin.norm_bound.push_back(get_as<double>(field(lj, "norm_bound", lctx), lctx));
    }
  }
  std::optional<LinearStructure> linear;
  if (has_features) linear = std::move(lin);
  return EpisodicMdp(nX, nA, std::move(levels), std::move(initial),
                     model == "bernoulli" ? RewardModel::kBernoulli : RewardModel::kDeterministic,
                     std::move(linear), seed);
}

nlohmann::json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    parse_fail(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
               ": invalid JSON (" + e.what() + ")");
  }
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str(), path);
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path + "'");
}

void save_instance(const EpisodicMdp& mdp, const std::string& path) {
  write_text_file(path, instance_to_json(mdp).dump(1) + "\n");
}

EpisodicMdp load_instance(const std::string& path) {
  return instance_from_json(read_json_file(path));
}

}  // namespace voql
