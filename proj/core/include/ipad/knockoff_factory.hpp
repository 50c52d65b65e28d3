#pragma once

#include <filesystem>
#include <string_view>

#include "ipad/data_model.hpp"

namespace ipad {

enum class KnockoffSource { oracle, empirical };

std::string_view to_string(KnockoffSource s) noexcept;

/// Knockoff copy x_tilde = C + Z with Z_ij i.i.d. N(0, sigma2_used) drawn from `seed`.
struct KnockoffMatrix {
  Matrix x_tilde;
  KnockoffSource source = KnockoffSource::empirical;
  SeedSpec seed;
  double sigma2_used = 0.0;
};

/// Empirical knockoffs from an estimated common component. Consumes only
/// (c, sigma2, seed); the result is bit-identical for identical inputs.
KnockoffMatrix generate(const Matrix& c, double sigma2, const SeedSpec& seed);

/// Oracle knockoffs from the true common component and error variance.
KnockoffMatrix generate_oracle(const Matrix& c0, double sigma2_0, const SeedSpec& seed);

/// [x, x_tilde]: column j is x_j, column p + j is the knockoff of x_j.
Matrix augment(const Matrix& x, const KnockoffMatrix& k);

/// Writes the matrix as CSV and a JSON header (source, seed, sigma2_used).
void save_knockoff(const KnockoffMatrix& k, const std::filesystem::path& csv_path,
                   const std::filesystem::path& json_path);

}  // namespace ipad
