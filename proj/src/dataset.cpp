#include "imboost/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "imboost/errors.hpp"

namespace imboost {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(trim(cell));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

NormStats NormStats::from_rows(const Eigen::MatrixXd& rows) {
  NormStats s;
  s.min = rows.colwise().minCoeff().transpose();
  s.max = rows.colwise().maxCoeff().transpose();
  return s;
}

Eigen::MatrixXd NormStats::transform(const Eigen::MatrixXd& rows) const {
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const double range = max(j) - min(j);
    if (range > 0.0)
      out.col(j) = (rows.col(j).array() - min(j)) / range;
    else
      out.col(j).setZero();
  }
  return out;
}

Eigen::MatrixXd Dataset::gather(const std::vector<std::size_t>& idx) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), features.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

std::vector<int> Dataset::gather_labels(const std::vector<std::size_t>& idx) const {
  if (!labels) return {};
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back((*labels)[i]);
  return out;
}

Dataset parse_csv(const std::string& text, const std::optional<std::string>& label_column) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV: a header row is required");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_line(line);

  std::optional<std::size_t> label_pos;
  if (label_column) {
    auto it = std::find(header.begin(), header.end(), *label_column);
    if (it == header.end()) throw ParseError("label column '" + *label_column + "' not in header");
    label_pos = static_cast<std::size_t>(it - header.begin());
  }

  Dataset data;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (!label_pos || j != *label_pos) data.feature_names.push_back(header[j]);
  const std::size_t p = data.feature_names.size();
  if (p == 0) throw ParseError("CSV has no feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty() || line[0] == '#') continue;
    ++row;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                       " cells, found " + std::to_string(cells.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double v = 0.0;
      if (!parse_double(cells[j], v))
        throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(j + 1) +
                         ": non-numeric or missing value '" + cells[j] + "'");
      if (label_pos && j == *label_pos) {
        if (v != 0.0 && v != 1.0)
          throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(j + 1) +
                           ": label must be 0 or 1, got '" + cells[j] + "'");
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(row);
  data.features = Eigen::Map<const RowMatrix>(values.data(), n, static_cast<Eigen::Index>(p));
  data.raw_features = data.features;
  if (label_pos) data.labels = std::move(labels);
  return data;
}

Dataset load_csv(const std::string& path, const std::optional<std::string>& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  Dataset data = parse_csv(buffer.str(), label_column);
  const auto slash = path.find_last_of('/');
  data.name = path.substr(slash == std::string::npos ? 0 : slash + 1);
  if (auto dot = data.name.rfind('.'); dot != std::string::npos) data.name.resize(dot);
  return data;
}

void write_csv(const Dataset& data, const std::string& path, const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  const Eigen::MatrixXd& m = data.raw_features.size() ? data.raw_features : data.features;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (j) out << ',';
    out << (static_cast<std::size_t>(j) < data.feature_names.size() ? data.feature_names[j]
                                                                     : "x" + std::to_string(j));
  }
  if (data.labels) out << ',' << label_column;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    if (data.labels) out << ',' << (*data.labels)[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

Dataset split_and_normalize(Dataset data, double test_fraction, std::uint64_t seed) {
  const std::size_t n = data.rows();
  if (n < 4) throw std::invalid_argument("at least 4 rows are needed to split");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  if (data.raw_features.size() == 0) data.raw_features = data.features;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_train =
      static_cast<std::size_t>(std::ceil((1.0 - test_fraction) * static_cast<double>(n) - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  data.train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  data.test_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  Eigen::MatrixXd train_raw(static_cast<Eigen::Index>(n_train), data.raw_features.cols());
  for (std::size_t i = 0; i < n_train; ++i)
    train_raw.row(static_cast<Eigen::Index>(i)) =
        data.raw_features.row(static_cast<Eigen::Index>(data.train_idx[i]));
  data.norm = NormStats::from_rows(train_raw);
  data.features = data.norm->transform(data.raw_features);
  for (auto i : data.test_idx)
    data.features.row(static_cast<Eigen::Index>(i)) =
        data.features.row(static_cast<Eigen::Index>(i)).cwiseMax(-0.5).cwiseMin(1.5);
  return data;
}

SyntheticSpec SyntheticSpec::parse(const std::string& text) {
  SyntheticSpec spec;
  if (text.empty() || text == "default") return spec;
  if (text == "ambiguous") {
    spec.overlap = 0.9;
    return spec;
  }
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      if (item == "ambiguous") spec.overlap = 0.9;
      else if (item != "default") throw std::invalid_argument("bad synthetic spec item '" + item + "'");
      continue;
    }
    const std::string key = trim(item.substr(0, eq));
    const std::string value = trim(item.substr(eq + 1));
    if (key == "n") spec.n = std::stoul(value);
    else if (key == "p_o") spec.outlier_fraction = std::stod(value);
    else if (key == "overlap") spec.overlap = std::stod(value);
    else if (key == "inlier_kind") spec.inlier_kind = value;
    else if (key == "outlier_kind") spec.outlier_kind = value;
    else if (key == "seed") spec.seed = std::stoull(value);
    else throw std::invalid_argument("unknown synthetic spec key '" + key + "'");
  }
  return spec;
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (!(spec.outlier_fraction > 0.0 && spec.outlier_fraction < 0.5))
    throw std::invalid_argument("p_o must lie in (0, 0.5)");
  if (!(spec.overlap >= 0.0 && spec.overlap <= 1.0))
    throw std::invalid_argument("overlap must lie in [0, 1]");
  if (spec.inlier_kind != "gmm2" && spec.inlier_kind != "gaussian")
    throw std::invalid_argument("inlier_kind must be gmm2 or gaussian");
  if (spec.outlier_kind != "uniform" && spec.outlier_kind != "cluster")
    throw std::invalid_argument("outlier_kind must be uniform or cluster");

  const auto n_out = static_cast<std::size_t>(
      std::ceil(spec.outlier_fraction * static_cast<double>(spec.n) - 1e-9));
  const std::size_t n_in = spec.n - n_out;
  constexpr double kSigma = 0.5;
  std::vector<Eigen::Vector2d> centres;
  if (spec.inlier_kind == "gmm2")
    centres = {Eigen::Vector2d(-1.5, 0.0), Eigen::Vector2d(1.5, 0.5)};
  else
    centres = {Eigen::Vector2d(0.0, 0.0)};

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(spec.n), 2);
  std::vector<int> labels(spec.n, 0);
  for (std::size_t i = 0; i < n_in; ++i) {
    const auto& c = centres[i % centres.size()];
    x(static_cast<Eigen::Index>(i), 0) = c.x() + kSigma * normal(rng);
    x(static_cast<Eigen::Index>(i), 1) = c.y() + kSigma * normal(rng);
  }
  Eigen::Vector2d lo = x.topRows(static_cast<Eigen::Index>(n_in)).colwise().minCoeff().transpose();
  Eigen::Vector2d hi = x.topRows(static_cast<Eigen::Index>(n_in)).colwise().maxCoeff().transpose();
  const Eigen::Vector2d centre = 0.5 * (lo + hi);
  const Eigen::Vector2d half = 0.75 * (hi - lo);  // box expanded 1.5x
  lo = centre - half;
  hi = centre + half;

  // Outliers closer than this many sigmas to an inlier centre are redrawn.
  const double exclusion = 3.0 * (1.0 - spec.overlap) * kSigma;
  auto far_enough = [&](const Eigen::Vector2d& p) {
    for (const auto& c : centres)
      if ((p - c).norm() < exclusion) return false;
    return true;
  };
  std::uniform_real_distribution<double> ux(lo.x(), hi.x());
  std::uniform_real_distribution<double> uy(lo.y(), hi.y());
  const Eigen::Vector2d cluster_centre(0.0, 2.0);
  for (std::size_t i = n_in; i < spec.n; ++i) {
    Eigen::Vector2d p;
    do {
      if (spec.outlier_kind == "uniform")
        p = Eigen::Vector2d(ux(rng), uy(rng));
      else
        p = cluster_centre + Eigen::Vector2d(0.3 * normal(rng), 0.3 * normal(rng));
    } while (!far_enough(p));
    x.row(static_cast<Eigen::Index>(i)) = p.transpose();
    labels[i] = 1;
  }

  // Interleave so row order carries no label information.
  std::vector<std::size_t> order(spec.n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Dataset data;
  data.features.resize(x.rows(), 2);
  std::vector<int> shuffled(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    data.features.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[i]));
    shuffled[i] = labels[order[i]];
  }
  data.raw_features = data.features;
  data.labels = std::move(shuffled);
  data.feature_names = {"x0", "x1"};
  data.name = "synthetic";
  return data;
}

}  // namespace imboost
