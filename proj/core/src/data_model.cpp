#include "ipad/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ipad {

std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SeedSpec child(const SeedSpec& parent, std::uint64_t purpose) noexcept {
  return SeedSpec{mix64(mix64(parent.master_seed) ^ parent.stream_id), purpose};
}

Engine make_engine(const SeedSpec& seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed.master_seed),
                    static_cast<std::uint32_t>(seed.master_seed >> 32),
                    static_cast<std::uint32_t>(seed.stream_id),
                    static_cast<std::uint32_t>(seed.stream_id >> 32)};
  return Engine(seq);
}

Dataset::Dataset(Matrix x, Vector y, std::vector<std::string> column_names,
                 std::string response_name)
    : x_(std::move(x)), y_(std::move(y)), names_(std::move(column_names)),
      response_name_(std::move(response_name)) {
  if (x_.rows() < 2) throw ValidationError("dataset needs at least 2 rows");
  if (x_.cols() < 1) throw ValidationError("dataset needs at least 1 covariate");
  if (y_.size() != x_.rows())
    throw ValidationError("response length " + std::to_string(y_.size()) +
                          " does not match " + std::to_string(x_.rows()) + " rows");
  if (static_cast<Eigen::Index>(names_.size()) != x_.cols())
    throw ValidationError("column_names has wrong length");
  if (!x_.allFinite() || !y_.allFinite())
    throw ValidationError("dataset contains non-finite entries");
  std::set<std::string> seen;
  for (const auto& nm : names_)
    if (!seen.insert(nm).second) throw ValidationError("duplicate column name '" + nm + "'");
}

namespace {

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && ws(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(s[i])) ++i;
  return s.substr(i);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_real(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  return ec == std::errc() && ptr == e && std::isfinite(v);
}

}  // namespace

CsvTable read_csv_table(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open CSV file '" + path.string() + "'");

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (first && has_header) {
      header = std::move(cells);
      first = false;
      continue;
    }
    first = false;
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw ValidationError("CSV file '" + path.string() + "' has no data rows");

  const std::size_t width = has_header ? header.size() : rows.front().size();
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].size() != width)
      throw ValidationError("ragged CSV: row " + std::to_string(i + 1) + " has " +
                            std::to_string(rows[i].size()) + " cells, expected " +
                            std::to_string(width));

  // A first column headed "date" or not parsing on the first data row is a date column.
  double probe = 0.0;
  std::string first_name = has_header ? header[0] : std::string();
  std::transform(first_name.begin(), first_name.end(), first_name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  const bool date_col =
      width > 1 && (first_name == "date" ||
                    (!rows.front()[0].empty() && !parse_real(rows.front()[0], probe)));
  const std::size_t offset = date_col ? 1 : 0;

  CsvTable t;
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - offset));
  for (std::size_t j = offset; j < width; ++j)
    t.names.push_back(has_header ? header[j] : "V" + std::to_string(j - offset + 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (date_col) t.row_labels.push_back(rows[i][0]);
    for (std::size_t j = offset; j < width; ++j) {
      double v = 0.0;
      if (!parse_real(rows[i][j], v)) {
        const std::string what = rows[i][j].empty() ? "empty cell" : "non-numeric cell '" + rows[i][j] + "'";
        throw ValidationError(what + " at row " + std::to_string(i + 1) + ", column " +
                              std::to_string(j + 1) +
                              (has_header ? " ('" + header[j] + "')" : std::string()));
      }
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - offset)) = v;
    }
  }
  return t;
}

Dataset load_csv(const std::filesystem::path& path, bool has_header,
                 const ColumnRef& response_column) {
  if (!std::filesystem::exists(path))
    throw ValidationError("CSV file '" + path.string() + "' does not exist");
  CsvTable t = read_csv_table(path, has_header);

  Eigen::Index resp = -1;
  if (const auto* name = std::get_if<std::string>(&response_column)) {
    auto it = std::find(t.names.begin(), t.names.end(), *name);
    if (it == t.names.end()) throw ValidationError("response column '" + *name + "' not found");
    resp = it - t.names.begin();
  } else {
    const auto idx = std::get<std::size_t>(response_column);
    if (idx >= t.names.size())
      throw ValidationError("response column index " + std::to_string(idx) + " out of range");
    resp = static_cast<Eigen::Index>(idx);
  }

  const Eigen::Index n = t.values.rows();
  const Eigen::Index m = t.values.cols();
  Matrix x(n, m - 1);
  std::vector<std::string> names;
  for (Eigen::Index j = 0, k = 0; j < m; ++j) {
    if (j == resp) continue;
    x.col(k++) = t.values.col(j);
    names.push_back(t.names[static_cast<std::size_t>(j)]);
  }
  return Dataset(std::move(x), t.values.col(resp), std::move(names),
                 t.names[static_cast<std::size_t>(resp)]);
}

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << d.response_name();
  for (const auto& nm : d.column_names()) out << ',' << nm;
  out << '\n';
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    out << format_real(d.y()(i));
    for (Eigen::Index j = 0; j < d.p(); ++j) out << ',' << format_real(d.x()(i, j));
    out << '\n';
  }
}

Vector rescale_in_place(Matrix& x) {
  Vector norms = x.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!(norms(j) > 0.0))
      throw ValidationError("column " + std::to_string(j) + " has zero norm");
    x.col(j) /= norms(j);
  }
  return norms;
}

std::pair<Dataset, StandardizationRecord> rescale_columns(const Dataset& d) {
  Matrix x = d.x();
  StandardizationRecord rec;
  rec.original_norms = rescale_in_place(x);
  rec.column_means = Vector::Zero(d.p());
  return {Dataset(std::move(x), d.y(), d.column_names(), d.response_name()), std::move(rec)};
}

Dataset center_columns(const Dataset& d) {
  Matrix x = d.x().rowwise() - d.x().colwise().mean();
  Vector y = d.y().array() - d.y().mean();
  return Dataset(std::move(x), std::move(y), d.column_names(), d.response_name());
}

std::pair<Dataset, StandardizationRecord> standardize(const Dataset& d) {
  auto [scaled, rec] = rescale_columns(center_columns(d));
  rec.centered = true;
  rec.column_means = d.x().colwise().mean().transpose();
  rec.response_mean = d.y().mean();
  return {std::move(scaled), std::move(rec)};
}

Dataset restore(const Dataset& d, const StandardizationRecord& rec) {
  if (rec.original_norms.size() != d.p())
    throw ValidationError("standardization record does not match dataset width");
  Matrix x = d.x() * rec.original_norms.asDiagonal();
  Vector y = d.y();
  if (rec.centered) {
    x.rowwise() += rec.column_means.transpose();
    y.array() += rec.response_mean;
  }
  return Dataset(std::move(x), std::move(y), d.column_names(), d.response_name());
}

}  // namespace ipad
