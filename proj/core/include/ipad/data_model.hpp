#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace ipad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Bad user input or violated precondition. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure inside a numerical routine (non-finite data, rank deficiency, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

/// Identifies one reproducible random stream.
///
/// The generator for a SeedSpec is an mt19937_64 seeded through std::seed_seq
/// with the four 32-bit halves (master lo, master hi, stream lo, stream hi).
/// Equal pairs give equal streams; distinct pairs give distinct seed_seq
/// inputs. Nested streams are built with child(), which folds the parent pair
/// into a new master via the splitmix64 finalizer and uses the purpose tag as
/// the stream id.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

using Engine = std::mt19937_64;

/// splitmix64 finalizer (Steele, Lea & Flood). Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Sub-stream of `parent` dedicated to `purpose`.
SeedSpec child(const SeedSpec& parent, std::uint64_t purpose) noexcept;

Engine make_engine(const SeedSpec& seed);

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Response plus n x p design with named columns. Immutable after construction.
class Dataset {
 public:
  Dataset(Matrix x, Vector y, std::vector<std::string> column_names,
          std::string response_name = "y");

  const Matrix& x() const noexcept { return x_; }
  const Vector& y() const noexcept { return y_; }
  const std::vector<std::string>& column_names() const noexcept { return names_; }
  const std::string& response_name() const noexcept { return response_name_; }
  Eigen::Index n() const noexcept { return x_.rows(); }
  Eigen::Index p() const noexcept { return x_.cols(); }

 private:
  Matrix x_;
  Vector y_;
  std::vector<std::string> names_;
  std::string response_name_;
};

/// State needed to undo center_columns / rescale_columns.
struct StandardizationRecord {
  Vector original_norms;  // length p, norms at the time of rescaling
  bool centered = false;
  Vector column_means;    // length p when centered, else zeros
  double response_mean = 0.0;
};

/// Response column selector: a header name or a 0-based index among the
/// numeric columns (the date column, when present, is not counted).
using ColumnRef = std::variant<std::string, std::size_t>;

/// Numeric table read from CSV. A leading non-numeric column (dates) is dropped.
struct CsvTable {
  Matrix values;
  std::vector<std::string> names;
  std::vector<std::string> row_labels;  // date strings; empty when no date column
};

CsvTable read_csv_table(const std::filesystem::path& path, bool has_header);

Dataset load_csv(const std::filesystem::path& path, bool has_header,
                 const ColumnRef& response_column);

/// Writes response first, then the x columns, each value round-trip exact.
void save_csv(const Dataset& d, const std::filesystem::path& path);

std::pair<Dataset, StandardizationRecord> rescale_columns(const Dataset& d);
Dataset center_columns(const Dataset& d);

/// center_columns followed by rescale_columns, with the means recorded.
std::pair<Dataset, StandardizationRecord> standardize(const Dataset& d);

/// Inverse of standardize / rescale_columns.
Dataset restore(const Dataset& d, const StandardizationRecord& rec);

/// Divides each column of `x` by its Euclidean norm in place; returns the norms.
Vector rescale_in_place(Matrix& x);

/// Shortest decimal that parses back to the identical double.
std::string format_real(double v);

}  // namespace ipad
