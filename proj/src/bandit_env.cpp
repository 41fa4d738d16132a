#include "nbandit/bandit_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace nbandit {
namespace {

constexpr double kUnitTol = 1e-9;

void check_unit(const Eigen::VectorXd& x) {
  if (std::abs(x.norm() - 1.0) > kUnitTol) throw std::logic_error("environment produced a non-unit context");
}

Eigen::VectorXd random_unit(int d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(d);
  double n = 0.0;
  while (n == 0.0) {
    for (int i = 0; i < d; ++i) v[i] = normal(rng);
    n = v.norm();
  }
  return v / n;
}

std::vector<std::string> split_fields(const std::string& line, bool comma) {
  std::vector<std::string> out;
  if (comma) {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      const auto b = field.find_first_not_of(" \t\r");
      const auto e = field.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
  } else {
    std::istringstream ss(line);
    std::string field;
    while (ss >> field) out.push_back(field);
  }
  return out;
}

struct RawTable {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

RawTable read_mushroom(std::istream& in, bool comma, const std::string& name) {
  constexpr std::size_t kColumns = 23;
  constexpr std::size_t kVeilType = 16;  // column index, label is column 0
  std::vector<std::vector<std::string>> raw;
  std::vector<int> labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_fields(line, comma);
    if (fields.size() != kColumns)
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": expected 23 columns, found " +
                               std::to_string(fields.size()));
    if (fields[0] == "e")
      labels.push_back(1);
    else if (fields[0] == "p")
      labels.push_back(2);
    else
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": unknown label '" + fields[0] + "'");
    fields.erase(fields.begin() + kVeilType);
    fields.erase(fields.begin());
    raw.push_back(std::move(fields));
  }
  const std::size_t attrs = kColumns - 2;
  std::vector<std::map<std::string, int>> codes(attrs);
  for (std::size_t c = 0; c < attrs; ++c) {
    std::set<std::string> cats;
    for (const auto& r : raw) cats.insert(r[c]);
    int idx = 0;
    for (const auto& cat : cats) codes[c][cat] = idx++;
  }
  RawTable table;
  table.labels = std::move(labels);
  for (const auto& r : raw) {
    std::vector<double> row(attrs);
    for (std::size_t c = 0; c < attrs; ++c) row[c] = codes[c].at(r[c]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

RawTable read_statlog(std::istream& in, bool comma, const std::string& name) {
  constexpr std::size_t kColumns = 10;
  RawTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line, comma);
    if (fields.size() != kColumns)
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": expected 10 columns, found " +
                               std::to_string(fields.size()));
    int cls = 0;
    std::vector<double> row;
    try {
      cls = std::stoi(fields.back());
      for (std::size_t c = 1; c + 1 < kColumns; ++c) row.push_back(std::stod(fields[c]));
    } catch (const std::exception&) {
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    if (cls < 1 || cls > 7) throw std::runtime_error(name + ":" + std::to_string(lineno) + ": class out of range");
    if (cls == 4) continue;
    table.labels.push_back(cls == 1 ? 1 : 2);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace

RewardKind parse_reward_kind(const std::string& name) {
  if (name == "h1") return RewardKind::h1;
  if (name == "h2") return RewardKind::h2;
  if (name == "h3") return RewardKind::h3;
  if (name == "classification") return RewardKind::classification;
  throw std::invalid_argument("unknown reward kind '" + name + "'");
}

std::string to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::h1: return "h1";
    case RewardKind::h2: return "h2";
    case RewardKind::h3: return "h3";
    case RewardKind::classification: return "classification";
  }
  return "?";
}

void RewardModel::validate() const {
  if (!(noise >= 0.0)) throw std::invalid_argument("reward model: noise must be >= 0");
  switch (kind) {
    case RewardKind::h1:
    case RewardKind::h2:
      if (a.size() == 0 || std::abs(a.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("reward model: h1/h2 need a unit vector a");
      break;
    case RewardKind::h3:
      if (A.size() == 0 || A.rows() != A.cols()) throw std::invalid_argument("reward model: h3 needs a square A");
      break;
    case RewardKind::classification:
      if (block_dim < 1) throw std::invalid_argument("reward model: classification needs block_dim >= 1");
      break;
  }
}

double reward(const RewardModel& model, const Eigen::VectorXd& x) {
  switch (model.kind) {
    case RewardKind::h1: {
      if (x.size() != model.a.size()) throw std::invalid_argument("reward: dimension mismatch");
      const double u = model.a.dot(x);
      return model.scale * 4.0 * u * u;
    }
    case RewardKind::h2: {
      if (x.size() != model.a.size()) throw std::invalid_argument("reward: dimension mismatch");
      const double u = std::sin(model.a.dot(x));
      return model.scale * 4.0 * u * u;
    }
    case RewardKind::h3:
      if (x.size() != model.A.cols()) throw std::invalid_argument("reward: dimension mismatch");
      return model.scale * (model.A * x).norm();
    case RewardKind::classification: {
      if (model.block_dim < 1 || x.size() % model.block_dim != 0)
        throw std::invalid_argument("reward: context is not a block embedding");
      const auto nb = x.size() / model.block_dim;
      Eigen::Index best = 0;
      double best_norm = -1.0;
      for (Eigen::Index b = 0; b < nb; ++b) {
        const double n = x.segment(b * model.block_dim, model.block_dim).squaredNorm();
        if (n > best_norm) {
          best_norm = n;
          best = b;
        }
      }
      return best == model.label ? 1.0 : 0.0;
    }
  }
  throw std::logic_error("reward: unhandled kind");
}

double observe(const RewardModel& model, const Eigen::VectorXd& x, Rng& rng) {
  const double mean = reward(model, x);
  if (model.noise == 0.0) return mean;
  std::normal_distribution<double> normal(0.0, model.noise);
  return mean + normal(rng);
}

ContextSet sample_contexts(int d, int k, Rng& rng) {
  if (d < 1 || k < 1) throw std::invalid_argument("sample_contexts: d and K must be >= 1");
  ContextSet out;
  out.vectors.reserve(k);
  for (int a = 0; a < k; ++a) out.vectors.push_back(random_unit(d, rng));
  return out;
}

RewardModel make_synthetic_model(RewardKind kind, int d, double noise, Rng& rng) {
  RewardModel model;
  model.kind = kind;
  model.noise = noise;
  switch (kind) {
    case RewardKind::h1:
    case RewardKind::h2:
      model.a = random_unit(d, rng);
      break;
    case RewardKind::h3: {
      std::normal_distribution<double> normal(0.0, 0.5);  // variance 0.25
      model.A.resize(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) model.A(i, j) = normal(rng);
      break;
    }
    case RewardKind::classification:
      throw std::invalid_argument("make_synthetic_model: classification is not synthetic");
  }
  return model;
}

Eigen::VectorXd block_embed(const Eigen::VectorXd& x, int block, int num_blocks) {
  if (block < 0 || block >= num_blocks) throw std::out_of_range("block_embed: block out of range");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size() * num_blocks);
  out.segment(block * x.size(), x.size()) = x;
  return out;
}

RegretTrace regret_update(RegretTrace trace, const Round& round) {
  if (round.regret < 0.0) throw std::invalid_argument("regret_update: negative instantaneous regret");
  trace.cumulative.push_back(trace.total() + round.regret);
  return trace;
}

double Environment::regret_of(int action) const {
  double best = mean_reward(0);
  for (int a = 1; a < num_actions(); ++a) best = std::max(best, mean_reward(a));
  return best - mean_reward(action);
}

SyntheticEnv::SyntheticEnv(RewardModel model, int d, int k, std::uint64_t seed)
    : model_(std::move(model)),
      d_(d),
      k_(k),
      context_rng_(derive_seed(seed, streams::kContexts)),
      noise_rng_(derive_seed(seed, streams::kNoise)) {
  model_.validate();
  if (model_.kind == RewardKind::classification)
    throw std::invalid_argument("SyntheticEnv: classification rewards need ClassificationEnv");
  if (d < 1 || k < 1) throw std::invalid_argument("SyntheticEnv: d and K must be >= 1");
}

const ContextSet& SyntheticEnv::next_contexts() {
  const int t = current_.round + 1;
  current_ = sample_contexts(d_, k_, context_rng_);
  current_.round = t;
  means_.clear();
  for (const auto& x : current_.vectors) {
    check_unit(x);
    means_.push_back(reward(model_, x));
  }
  return current_;
}

double SyntheticEnv::mean_reward(int action) const { return means_.at(static_cast<std::size_t>(action)); }

double SyntheticEnv::pull(int action) {
  const double mean = mean_reward(action);
  if (model_.noise == 0.0) return mean;
  std::normal_distribution<double> normal(0.0, model_.noise);
  return mean + normal(noise_rng_);
}

ClassificationEnv::ClassificationEnv(Dataset data, double noise, std::uint64_t seed)
    : data_(std::move(data)),
      block_dim_(0),
      shuffle_rng_(derive_seed(seed, streams::kShuffle)),
      noise_rng_(derive_seed(seed, streams::kNoise)) {
  if (data_.features.empty()) throw std::invalid_argument("classification env: empty dataset");
  if (data_.features.size() != data_.labels.size())
    throw std::invalid_argument("classification env: features and labels differ in length");
  if (data_.num_classes < 1) throw std::invalid_argument("classification env: need at least one class");
  block_dim_ = static_cast<int>(data_.features.front().size());
  for (std::size_t i = 0; i < data_.features.size(); ++i) {
    if (data_.features[i].size() != block_dim_)
      throw std::invalid_argument("classification env: ragged feature rows");
    if (data_.labels[i] < 1 || data_.labels[i] > data_.num_classes)
      throw std::out_of_range("classification env: label " + std::to_string(data_.labels[i]) + " out of range");
    if (std::abs(data_.features[i].norm() - 1.0) > kUnitTol)
      throw std::invalid_argument("classification env: feature rows must be unit-normalised");
  }
  model_.kind = RewardKind::classification;
  model_.block_dim = block_dim_;
  model_.noise = noise;
  model_.validate();
  order_.resize(data_.features.size());
  reshuffle();
}

void ClassificationEnv::reshuffle() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  std::shuffle(order_.begin(), order_.end(), shuffle_rng_);
  cursor_ = 0;
}

const ContextSet& ClassificationEnv::next_contexts() {
  if (cursor_ == order_.size()) reshuffle();
  const std::size_t row = order_[cursor_++];
  const int t = current_.round + 1;
  current_.vectors.clear();
  for (int k = 0; k < data_.num_classes; ++k) {
    current_.vectors.push_back(block_embed(data_.features[row], k, data_.num_classes));
    check_unit(current_.vectors.back());
  }
  current_.round = t;
  model_.label = data_.labels[row] - 1;
  return current_;
}

double ClassificationEnv::mean_reward(int action) const {
  return reward(model_, current_.vectors.at(static_cast<std::size_t>(action)));
}

double ClassificationEnv::pull(int action) {
  return observe(model_, current_.vectors.at(static_cast<std::size_t>(action)), noise_rng_);
}

std::unique_ptr<ClassificationEnv> classification_to_bandit(Dataset data, double noise, std::uint64_t seed) {
  return std::make_unique<ClassificationEnv>(std::move(data), noise, seed);
}

UciKind parse_uci_kind(const std::string& name) {
  if (name == "mushroom") return UciKind::mushroom;
  if (name == "statlog" || name == "shuttle") return UciKind::statlog;
  throw std::invalid_argument("unknown dataset kind '" + name + "' (expected mushroom or statlog)");
}

Dataset load_uci(const std::filesystem::path& path, UciKind kind, int per_class, std::uint64_t seed) {
  if (per_class < 1) throw std::invalid_argument("load_uci: per_class must be >= 1");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string first;
  while (std::getline(in, first) && first.find_first_not_of(" \t\r") == std::string::npos) {
  }
  const bool comma = first.find(',') != std::string::npos;
  in.clear();
  in.seekg(0);
  const std::string name = path.string();
  RawTable table = kind == UciKind::mushroom ? read_mushroom(in, comma, name) : read_statlog(in, comma, name);
  if (table.rows.empty()) throw std::runtime_error(name + ": no data rows");

  const std::size_t cols = table.rows.front().size();
  std::vector<double> lo(cols, std::numeric_limits<double>::infinity());
  std::vector<double> hi(cols, -std::numeric_limits<double>::infinity());
  for (const auto& r : table.rows)
    for (std::size_t c = 0; c < cols; ++c) {
      lo[c] = std::min(lo[c], r[c]);
      hi[c] = std::max(hi[c], r[c]);
    }

  Dataset out;
  out.num_classes = 2;
  Rng rng(derive_seed(seed, streams::kShuffle));
  std::vector<std::size_t> chosen;
  for (int cls = 1; cls <= out.num_classes; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < table.labels.size(); ++i)
      if (table.labels[i] == cls) idx.push_back(i);
    if (static_cast<int>(idx.size()) < per_class)
      throw std::runtime_error(name + ": class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                               " rows, fewer than the requested " + std::to_string(per_class));
    std::shuffle(idx.begin(), idx.end(), rng);
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + per_class);
  }
  std::sort(chosen.begin(), chosen.end());
  for (const std::size_t i : chosen) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      const double span = hi[c] - lo[c];
      x[static_cast<Eigen::Index>(c)] = span > 0.0 ? (table.rows[i][c] - lo[c]) / span : 0.0;
    }
    const double n = x.norm();
    if (n == 0.0) throw std::runtime_error(name + ": row " + std::to_string(i + 1) + " scales to the zero vector");
    out.features.push_back(x / n);
    out.labels.push_back(table.labels[i]);
  }
  return out;
}

}  // namespace nbandit
