#include "crygcn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "crygcn/error.hpp"
#include "crygcn/rng.hpp"

namespace crygcn {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::ParseError, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::IoError, "write failed for '" + path.string() + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Non-empty lines; trailing blank lines are dropped, interior blank lines kept
// so that row numbers in errors match the file.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(trim(text.substr(start, end - start)));
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(',', start);
    if (end == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, end - start)));
    start = end + 1;
  }
  return cells;
}

bool parse_double(std::string_view cell, double& value) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc()) fail(ErrorKind::Internal, "cannot format number");
  return std::string(buf, ptr);
}

std::string where(std::size_t row, std::size_t col) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col);
}

}  // namespace

// ---------------------------------------------------------------------------
// FeatureMatrix / LabelVector

FeatureMatrix::FeatureMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1)
    fail(ErrorKind::EmptyInput, "feature matrix must have at least one row and one column");
  for (Eigen::Index i = 0; i < values_.rows(); ++i)
    for (Eigen::Index j = 0; j < values_.cols(); ++j)
      if (!std::isfinite(values_(i, j)))
        fail(ErrorKind::ParseError, "non-finite feature at " +
                                        where(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> indices) const {
  Matrix out(static_cast<Eigen::Index>(indices.size()), values_.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows()) fail(ErrorKind::InvalidSplit, "node index out of range");
    out.row(static_cast<Eigen::Index>(r)) = values_.row(static_cast<Eigen::Index>(indices[r]));
  }
  return FeatureMatrix(std::move(out));
}

LabelVector::LabelVector(std::vector<int> labels, std::vector<std::string> class_names)
    : labels_(std::move(labels)), class_names_(std::move(class_names)) {
  if (labels_.empty()) fail(ErrorKind::EmptyInput, "label vector is empty");
  if (class_names_.size() < 2)
    fail(ErrorKind::DegenerateLabels, "at least two classes are required");
  std::vector<std::size_t> counts(class_names_.size(), 0);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    int y = labels_[i];
    if (y < 0 || y >= class_count())
      fail(ErrorKind::ParseError, "label of node " + std::to_string(i) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0) fail(ErrorKind::DegenerateLabels, "class '" + class_names_[c] + "' is empty");
}

std::vector<std::size_t> LabelVector::class_counts() const {
  std::vector<std::size_t> counts(class_names_.size(), 0);
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

LabelVector LabelVector::subset(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= labels_.size()) fail(ErrorKind::InvalidSplit, "node index out of range");
    out.push_back(labels_[i]);
  }
  return LabelVector(Unchecked{}, std::move(out), class_names_);
}

LabelMask LabelMask::from_bools(std::vector<bool> mask) {
  LabelMask m;
  m.labeled_count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  m.fraction = mask.empty() ? 0.0 : static_cast<double>(m.labeled_count) / static_cast<double>(mask.size());
  m.mask = std::move(mask);
  return m;
}

std::vector<std::size_t> LabelMask::labeled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> LabelMask::unlabeled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> SplitPlan::fold_members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> SplitPlan::complement(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// CSV I/O

FeatureMatrix parse_features(const std::string& text) {
  auto lines = split_lines(text);
  if (lines.empty()) fail(ErrorKind::EmptyInput, "feature file is empty");

  std::vector<double> values;
  std::size_t width = 0;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    if (lines[r].empty()) fail(ErrorKind::ParseError, "blank line at row " + std::to_string(r));
    auto cells = split_cells(lines[r]);
    if (r == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      fail(ErrorKind::ParseError, "ragged row " + std::to_string(r) + ": expected " +
                                      std::to_string(width) + " columns, found " +
                                      std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        if (r == 0)
          fail(ErrorKind::ParseError, "header row detected (non-numeric cell '" +
                                          std::string(cells[c]) + "' at " + where(r, c) +
                                          "); feature files must not have a header");
        fail(ErrorKind::ParseError, "non-numeric cell '" + std::string(cells[c]) + "' at " + where(r, c));
      }
      if (!std::isfinite(v)) fail(ErrorKind::ParseError, "non-finite value at " + where(r, c));
      values.push_back(v);
    }
  }
  Matrix m(static_cast<Eigen::Index>(lines.size()), static_cast<Eigen::Index>(width));
  std::copy(values.begin(), values.end(), m.data());
  return FeatureMatrix(std::move(m));
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  return parse_features(read_file(path));
}

std::string format_features(const FeatureMatrix& features) {
  const Matrix& m = features.values();
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 24);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out.push_back(',');
      out += format_double(m(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

void save_features(const FeatureMatrix& features, const std::filesystem::path& path) {
  write_file(path, format_features(features));
}

LabelVector parse_labels(const std::string& text) {
  auto lines = split_lines(text);
  if (lines.empty()) fail(ErrorKind::EmptyInput, "label file is empty");

  std::vector<int> labels;
  std::vector<std::string> names;
  std::unordered_map<std::string, int> ids;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    auto comma = lines[r].find(',');
    if (comma == std::string_view::npos)
      fail(ErrorKind::ParseError, "row " + std::to_string(r) + ": expected 'index,class_name'");
    auto index_text = trim(lines[r].substr(0, comma));
    auto name = std::string(trim(lines[r].substr(comma + 1)));
    long long index = -1;
    auto [ptr, ec] = std::from_chars(index_text.data(), index_text.data() + index_text.size(), index);
    if (ec != std::errc() || ptr != index_text.data() + index_text.size())
      fail(ErrorKind::ParseError, "row " + std::to_string(r) + ": bad index '" + std::string(index_text) + "'");
    if (index != static_cast<long long>(r)) {
      if (index < static_cast<long long>(r))
        fail(ErrorKind::ParseError, "row " + std::to_string(r) + ": duplicate or out-of-order index " +
                                        std::to_string(index));
      fail(ErrorKind::ParseError, "row " + std::to_string(r) + ": missing index " + std::to_string(r));
    }
    if (name.empty()) fail(ErrorKind::ParseError, "row " + std::to_string(r) + ": empty class name");
    auto [it, inserted] = ids.try_emplace(name, static_cast<int>(names.size()));
    if (inserted) names.push_back(name);
    labels.push_back(it->second);
  }
  if (names.size() < 2)
    fail(ErrorKind::DegenerateLabels, "labels contain a single class '" + names.front() + "'");
  return LabelVector(std::move(labels), std::move(names));
}

LabelVector load_labels(const std::filesystem::path& path) { return parse_labels(read_file(path)); }

std::string format_labels(const LabelVector& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(i);
    out.push_back(',');
    out += labels.class_names()[static_cast<std::size_t>(labels[i])];
    out.push_back('\n');
  }
  return out;
}

void save_labels(const LabelVector& labels, const std::filesystem::path& path) {
  write_file(path, format_labels(labels));
}

// ---------------------------------------------------------------------------
// Splits

namespace {

std::vector<std::vector<std::size_t>> members_by_class(const LabelVector& labels) {
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(labels.class_count()));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  return members;
}

}  // namespace

SplitPlan make_folds(const LabelVector& labels, int fold_count, std::uint64_t seed) {
  if (fold_count < 2) fail(ErrorKind::InvalidConfig, "fold_count must be >= 2");
  auto members = members_by_class(labels);
  for (std::size_t c = 0; c < members.size(); ++c)
    if (members[c].size() < static_cast<std::size_t>(fold_count))
      fail(ErrorKind::InsufficientClassSize,
           "class '" + labels.class_names()[c] + "' has " + std::to_string(members[c].size()) +
               " members, fewer than fold_count " + std::to_string(fold_count));

  SplitPlan plan;
  plan.fold_count = fold_count;
  plan.seed = seed;
  plan.assignments.assign(labels.size(), -1);
  Rng rng(derive_seed(seed, "folds"));
  // The dealing position carries over between classes so that fold sizes stay
  // balanced overall, not just per class.
  std::size_t next = 0;
  for (auto& group : members) {
    std::shuffle(group.begin(), group.end(), rng);
    for (std::size_t node : group) {
      plan.assignments[node] = static_cast<int>(next % static_cast<std::size_t>(fold_count));
      ++next;
    }
  }
  return plan;
}

LabelMask make_label_mask(const LabelVector& labels, double labeled_fraction, std::uint64_t seed) {
  if (!(labeled_fraction > 0.0 && labeled_fraction < 1.0))
    fail(ErrorKind::InvalidConfig, "labeled_fraction must lie in (0, 1)");
  auto members = members_by_class(labels);
  std::vector<bool> mask(labels.size(), false);
  Rng rng(derive_seed(seed, "mask"));
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& group = members[c];
    if (group.size() < 2)
      fail(ErrorKind::InsufficientClassSize,
           "class '" + labels.class_names()[c] + "' needs at least 2 members to be split");
    std::size_t take = static_cast<std::size_t>(std::llround(labeled_fraction * static_cast<double>(group.size())));
    take = std::max<std::size_t>(take, 1);
    std::shuffle(group.begin(), group.end(), rng);
    for (std::size_t i = 0; i < take; ++i) mask[group[i]] = true;
  }
  LabelMask out = LabelMask::from_bools(std::move(mask));
  out.seed = seed;
  out.fraction = labeled_fraction;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

Dataset synth_blobs(const BlobSpec& spec) {
  if (spec.classes < 2) fail(ErrorKind::InvalidConfig, "classes must be >= 2");
  if (spec.per_class < 1) fail(ErrorKind::InvalidConfig, "per_class must be >= 1");
  if (spec.dims < 1) fail(ErrorKind::InvalidConfig, "dims must be >= 1");
  if (spec.dims < spec.classes)
    fail(ErrorKind::InvalidConfig, "dims (" + std::to_string(spec.dims) + ") must be >= classes (" +
                                       std::to_string(spec.classes) + ")");
  if (!(spec.center_distance > 0.0)) fail(ErrorKind::InvalidConfig, "center_distance must be > 0");
  if (!(spec.noise_std > 0.0)) fail(ErrorKind::InvalidConfig, "noise_std must be > 0");

  const auto n = static_cast<Eigen::Index>(spec.classes) * spec.per_class;
  Matrix x(n, spec.dims);
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<std::string> names;
  Rng rng(derive_seed(spec.seed, "blobs"));
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  Eigen::Index row = 0;
  for (int c = 0; c < spec.classes; ++c) {
    names.push_back("class" + std::to_string(c));
    for (int s = 0; s < spec.per_class; ++s, ++row) {
      for (int t = 0; t < spec.dims; ++t) x(row, t) = noise(rng);
      x(row, c) += spec.center_distance;
      labels[static_cast<std::size_t>(row)] = c;
    }
  }
  return Dataset{FeatureMatrix(std::move(x)), LabelVector(std::move(labels), std::move(names))};
}

FeatureMatrix standardize(const FeatureMatrix& features) {
  Matrix x = features.values();
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double mean = x.col(j).sum() / n;
    x.col(j).array() -= mean;
    double sd = std::sqrt(x.col(j).squaredNorm() / n);
    if (sd > 0.0) x.col(j) /= sd;
  }
  return FeatureMatrix(std::move(x));
}

}  // namespace crygcn
