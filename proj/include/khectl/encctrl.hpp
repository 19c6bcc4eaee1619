#pragma once

// Encrypted controller: psi = Phi * xi evaluated as a grid of ciphertext
// products. The controller node only multiplies (Eval); decryption, decoding
// and the row sums that complete the matrix-vector product run at the plant
// side (Dec+).
//
// Indices are 1-based throughout: i = 1..rows, j = 1..cols and channel
// theta = 1 (sign) or 2 (magnitude). Grid storage is row-major with i outer,
// j inner and theta innermost.

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "khectl/codec.hpp"
#include "khectl/khe.hpp"
#include "khectl/matrix.hpp"

namespace khectl::encctrl {

using codec::QuantizationGains;
using khe::Ciphertext;

struct CellIndex {
  std::size_t i = 0;  // 0 for state cells, which have no row
  std::size_t j = 0;
  int theta = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

struct EncryptedParameters {
  std::size_t rows = 0;
  std::size_t cols = 0;
  QuantizationGains gains;
  std::vector<Ciphertext> cells;

  Ciphertext& at(std::size_t i, std::size_t j, int theta);
  const Ciphertext& at(std::size_t i, std::size_t j, int theta) const;
};

struct EncryptedState {
  std::size_t cols = 0;
  std::vector<Ciphertext> cells;

  Ciphertext& at(std::size_t j, int theta);
  const Ciphertext& at(std::size_t j, int theta) const;
};

/// Per-column ceiling on the signal magnitude so that every product
/// magnitude stays within q/2 (the decode plausibility bound).
struct OverflowGuard {
  std::vector<BigInt> max_signal_magnitude;  // index j-1

  /// Throws OverflowError naming the offending j.
  void check(const GroupParams& gp, double gain_xi, std::span<const double> xi) const;
};

OverflowGuard make_overflow_guard(const GroupParams& gp, const Matrix& phi,
                                  const QuantizationGains& gains);

/// Encrypts both channels of Ecd_{gamma_phi}(Phi(i,j)) for every entry.
/// Rejects the configuration when round_pos(gamma_phi |Phi_ij|) times the
/// quantized `signal_range` exceeds q/2.
EncryptedParameters encrypt_parameters(const khe::PublicKey& pk, const Matrix& phi,
                                       const QuantizationGains& gains, RandomSource& rng,
                                       double signal_range);

EncryptedState encrypt_state(const khe::PublicKey& pk, std::span<const double> xi,
                             const QuantizationGains& gains, RandomSource& rng,
                             const OverflowGuard* guard = nullptr);

struct EvalOptions {
  unsigned threads = 1;
  /// Also compute unverified products for rejected cells (used only when
  /// the receiver is configured to ignore detections).
  bool keep_unchecked = false;
};

struct EvalOutcome {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::optional<Ciphertext>> cells;      // nullopt = error symbol
  std::vector<CellIndex> detected;                   // row-major order
  std::vector<std::optional<Ciphertext>> unchecked;  // empty unless requested

  std::size_t flat(std::size_t i, std::size_t j, int theta) const;
};

EvalOutcome eval_grid(const khe::PublicKey& pk, const khe::HomomorphicKey& skh,
                      const EncryptedParameters& params, const EncryptedState& state,
                      RandomSource& rng, const EvalOptions& options = {});

struct DecodedStep {
  Vector psi;

  double u() const { return psi.back(); }
  Vector next_state() const { return Vector(psi.begin(), psi.end() - 1); }
};

struct DetectionReport {
  std::vector<CellIndex> cells;
};

using DecPlusResult = std::variant<DecodedStep, DetectionReport>;

/// Decrypts, decodes with gain gamma_phi*gamma_xi and sums each row. Any
/// error symbol aborts the whole step with a report of every offending cell.
DecPlusResult dec_plus(const khe::DecryptionKey& skd, const EvalOutcome& outcome,
                       const QuantizationGains& gains);

/// Same reduction with all checks skipped: rejected cells are read from
/// outcome.unchecked. Throws std::logic_error if one is missing.
DecodedStep dec_plus_unchecked(const khe::DecryptionKey& skd, const EvalOutcome& outcome,
                               const QuantizationGains& gains);

/// psi computed in the clear from the quantized integers; bit-identical to
/// dec_plus(eval_grid(encrypt...)) whenever no cell is rejected.
Vector quantized_oracle(const GroupParams& gp, const Matrix& phi, std::span<const double> xi,
                        const QuantizationGains& gains);

}  // namespace khectl::encctrl
