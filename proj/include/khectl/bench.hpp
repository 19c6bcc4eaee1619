#pragma once

// Key-length sweep of the per-step cryptographic workload: 14 Enc of the
// stacked signal, 84 Eval over the grid, and Dec+ (84 Dec plus decoding and
// row sums).

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "khectl/codec.hpp"
#include "khectl/matrix.hpp"
#include "khectl/numtheory.hpp"

namespace khectl::bench {

struct TimingStats {
  double mean_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
};

struct BenchRow {
  unsigned bits = 0;
  std::size_t trials = 0;
  TimingStats enc, eval, dec_plus, total;
  // single-operation means: enc / 14, eval / 84, dec_plus / 84
  double enc_op_ms = 0.0;
  double eval_op_ms = 0.0;
  double dec_op_ms = 0.0;
  codec::QuantizationGains gains;  // gains used at this length
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::size_t warmup = 0;
  unsigned threads = 1;
};

struct BenchOptions {
  std::size_t warmup = 10;
  unsigned threads = 1;
  double signal_range = 10.0;
  codec::QuantizationGains preferred;  // used unchanged whenever they fit
};

/// Largest decimal gains, in the ratio of `preferred`, for which every
/// parameter-signal product fits below q/2. Throws OverflowError when even
/// unit gains overflow.
codec::QuantizationGains feasible_gains(const GroupParams& gp, const Matrix& phi,
                                        double signal_range,
                                        const codec::QuantizationGains& preferred);

/// "lo:hi:step" (inclusive) or a single length.
std::vector<unsigned> parse_bits_range(std::string_view text);

/// Throws std::invalid_argument for trials == 0 or bits below 16.
BenchReport run_bench(std::span<const unsigned> bits_list, std::size_t trials, RandomSource& rng,
                      const BenchOptions& options = {});

/// Columns: bits,trials,enc_mean_ms,enc_min_ms,enc_max_ms,eval_mean_ms,...,
/// total_max_ms,enc_op_ms,eval_op_ms,dec_op_ms,gamma_phi,gamma_xi
void write_csv(const BenchReport& report, std::ostream& os);
void write_table(const BenchReport& report, std::ostream& os);

}  // namespace khectl::bench
