#include "khectl/encctrl.hpp"

#include <cmath>
#include <future>
#include <sstream>
#include <stdexcept>

#include "khectl/errors.hpp"

namespace khectl::encctrl {

namespace {

std::size_t param_flat(std::size_t cols, std::size_t i, std::size_t j, int theta) {
  return ((i - 1) * cols + (j - 1)) * 2 + static_cast<std::size_t>(theta - 1);
}

void check_param_index(std::size_t rows, std::size_t cols, std::size_t i, std::size_t j,
                       int theta) {
  if (i < 1 || i > rows || j < 1 || j > cols || theta < 1 || theta > 2) {
    std::ostringstream msg;
    msg << "cell (" << i << "," << j << "," << theta << ") outside " << rows << "x" << cols
        << "x2 grid";
    throw std::out_of_range(msg.str());
  }
}

BigInt product_bound(const GroupParams& gp) { return codec::default_magnitude_bound(gp); }

}  // namespace

Ciphertext& EncryptedParameters::at(std::size_t i, std::size_t j, int theta) {
  check_param_index(rows, cols, i, j, theta);
  return cells[param_flat(cols, i, j, theta)];
}

const Ciphertext& EncryptedParameters::at(std::size_t i, std::size_t j, int theta) const {
  check_param_index(rows, cols, i, j, theta);
  return cells[param_flat(cols, i, j, theta)];
}

Ciphertext& EncryptedState::at(std::size_t j, int theta) {
  check_param_index(1, cols, 1, j, theta);
  return cells[(j - 1) * 2 + static_cast<std::size_t>(theta - 1)];
}

const Ciphertext& EncryptedState::at(std::size_t j, int theta) const {
  check_param_index(1, cols, 1, j, theta);
  return cells[(j - 1) * 2 + static_cast<std::size_t>(theta - 1)];
}

std::size_t EvalOutcome::flat(std::size_t i, std::size_t j, int theta) const {
  check_param_index(rows, cols, i, j, theta);
  return param_flat(cols, i, j, theta);
}

void OverflowGuard::check(const GroupParams& gp, double gain_xi,
                          std::span<const double> xi) const {
  if (xi.size() != max_signal_magnitude.size()) {
    throw std::invalid_argument("signal length does not match the overflow guard");
  }
  for (std::size_t j = 0; j < xi.size(); ++j) {
    const BigInt z = codec::quantize(gp, gain_xi, xi[j]).magnitude;
    if (z > max_signal_magnitude[j]) {
      std::ostringstream msg;
      msg << "signal xi_" << (j + 1) << " = " << xi[j] << " overflows the group: quantized "
          << "magnitude " << z.get_str() << " exceeds the column limit "
          << max_signal_magnitude[j].get_str();
      throw OverflowError(msg.str());
    }
  }
}

OverflowGuard make_overflow_guard(const GroupParams& gp, const Matrix& phi,
                                  const QuantizationGains& gains) {
  OverflowGuard guard;
  const BigInt bound = product_bound(gp);
  for (std::size_t j = 0; j < phi.cols(); ++j) {
    BigInt col_max = 1;
    for (std::size_t i = 0; i < phi.rows(); ++i) {
      const BigInt z = codec::quantize(gp, gains.phi, phi(i, j)).magnitude;
      if (z > col_max) col_max = z;
    }
    guard.max_signal_magnitude.push_back(bound / col_max);
  }
  return guard;
}

EncryptedParameters encrypt_parameters(const khe::PublicKey& pk, const Matrix& phi,
                                       const QuantizationGains& gains, RandomSource& rng,
                                       double signal_range) {
  const auto& gp = pk.group;
  const BigInt bound = product_bound(gp);
  const BigInt z_signal = round_pos(gains.xi * std::fabs(signal_range));

  EncryptedParameters out;
  out.rows = phi.rows();
  out.cols = phi.cols();
  out.gains = gains;
  out.cells.reserve(out.rows * out.cols * 2);
  for (std::size_t i = 0; i < phi.rows(); ++i) {
    for (std::size_t j = 0; j < phi.cols(); ++j) {
      codec::Quantized qv;
      try {
        qv = codec::quantize(gp, gains.phi, phi(i, j));
      } catch (const OverflowError& e) {
        std::ostringstream msg;
        msg << "parameter (" << (i + 1) << "," << (j + 1) << "): " << e.what();
        throw OverflowError(msg.str());
      }
      if (qv.magnitude * z_signal > bound) {
        std::ostringstream msg;
        msg << "parameter (" << (i + 1) << "," << (j + 1) << ") = " << phi(i, j)
            << " times signal range " << signal_range << " overflows q/2 at gains ("
            << gains.phi << ", " << gains.xi << ")";
        throw OverflowError(msg.str());
      }
      const auto pair = codec::embed(gp, qv);
      out.cells.push_back(khe::enc(pk, pair.sign_ch, rng));
      out.cells.push_back(khe::enc(pk, pair.mag_ch, rng));
    }
  }
  return out;
}

EncryptedState encrypt_state(const khe::PublicKey& pk, std::span<const double> xi,
                             const QuantizationGains& gains, RandomSource& rng,
                             const OverflowGuard* guard) {
  if (guard) guard->check(pk.group, gains.xi, xi);
  EncryptedState out;
  out.cols = xi.size();
  out.cells.reserve(xi.size() * 2);
  for (double v : xi) {
    const auto pair = codec::encode(pk.group, gains.xi, v);
    out.cells.push_back(khe::enc(pk, pair.sign_ch, rng));
    out.cells.push_back(khe::enc(pk, pair.mag_ch, rng));
  }
  return out;
}

EvalOutcome eval_grid(const khe::PublicKey& pk, const khe::HomomorphicKey& skh,
                      const EncryptedParameters& params, const EncryptedState& state,
                      RandomSource& rng, const EvalOptions& options) {
  if (params.cols != state.cols) {
    throw std::invalid_argument("parameter grid and state have different column counts");
  }
  EvalOutcome out;
  out.rows = params.rows;
  out.cols = params.cols;
  const std::size_t n = params.cells.size();
  out.cells.resize(n);
  if (options.keep_unchecked) out.unchecked.resize(n);

  // One stream per cell, drawn up front, so results do not depend on the
  // thread count.
  std::vector<RandomSource> streams;
  streams.reserve(n);
  for (std::size_t k = 0; k < n; ++k) streams.push_back(rng.fork());

  const auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t j0 = (k / 2) % params.cols;
      const Ciphertext& sc = state.cells[j0 * 2 + (k % 2)];
      out.cells[k] = khe::eval(pk, skh, params.cells[k], sc, streams[k]);
      if (!out.cells[k] && options.keep_unchecked) {
        out.unchecked[k] = khe::unchecked_eval(pk, params.cells[k], sc, streams[k]);
      }
    }
  };

  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1) {
    run_range(0, n);
  } else {
    std::vector<std::future<void>> jobs;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t begin = 0; begin < n; begin += chunk) {
      jobs.push_back(std::async(std::launch::async, run_range, begin, std::min(n, begin + chunk)));
    }
    for (auto& job : jobs) job.get();
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (!out.cells[k]) {
      out.detected.push_back(CellIndex{k / 2 / params.cols + 1, (k / 2) % params.cols + 1,
                                       static_cast<int>(k % 2) + 1});
    }
  }
  return out;
}

namespace {

template <typename DecryptCell>
Vector reduce_rows(const GroupParams& gp, const EvalOutcome& outcome,
                   const QuantizationGains& gains, DecryptCell&& decrypt) {
  const double gain = codec::encode_product_gain(gains.phi, gains.xi);
  Vector psi(outcome.rows, 0.0);
  for (std::size_t i = 1; i <= outcome.rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 1; j <= outcome.cols; ++j) {
      const codec::EncodedPair pair{decrypt(outcome.flat(i, j, 1)),
                                    decrypt(outcome.flat(i, j, 2))};
      acc += codec::decode(gp, gain, pair);
    }
    psi[i - 1] = acc;
  }
  return psi;
}

}  // namespace

DecPlusResult dec_plus(const khe::DecryptionKey& skd, const EvalOutcome& outcome,
                       const QuantizationGains& gains) {
  if (!outcome.detected.empty()) return DetectionReport{outcome.detected};

  std::vector<BigInt> plain(outcome.cells.size());
  DetectionReport report;
  for (std::size_t k = 0; k < outcome.cells.size(); ++k) {
    std::optional<BigInt> m;
    if (outcome.cells[k]) m = khe::dec(skd, *outcome.cells[k]);
    if (!m) {
      report.cells.push_back(CellIndex{k / 2 / outcome.cols + 1, (k / 2) % outcome.cols + 1,
                                       static_cast<int>(k % 2) + 1});
      continue;
    }
    plain[k] = std::move(*m);
  }
  if (!report.cells.empty()) return report;

  return DecodedStep{
      reduce_rows(skd.group, outcome, gains, [&](std::size_t k) { return plain[k]; })};
}

DecodedStep dec_plus_unchecked(const khe::DecryptionKey& skd, const EvalOutcome& outcome,
                               const QuantizationGains& gains) {
  const auto cell = [&](std::size_t k) -> const Ciphertext& {
    if (outcome.cells[k]) return *outcome.cells[k];
    if (k < outcome.unchecked.size() && outcome.unchecked[k]) return *outcome.unchecked[k];
    throw std::logic_error("rejected cell has no unchecked product");
  };
  return DecodedStep{reduce_rows(skd.group, outcome, gains, [&](std::size_t k) {
    return khe::unchecked_dec(skd, cell(k));
  })};
}

Vector quantized_oracle(const GroupParams& gp, const Matrix& phi, std::span<const double> xi,
                        const QuantizationGains& gains) {
  if (phi.cols() != xi.size()) throw std::invalid_argument("quantized_oracle: size mismatch");
  const auto magnitude = [&](double gain, double v) {
    BigInt z = round_pos(gain * std::fabs(v));
    if (z >= gp.q) throw OverflowError("quantized magnitude does not fit below q");
    return z;
  };
  const double gain = gains.phi * gains.xi;
  const BigInt bound = gp.q / 2;

  std::vector<BigInt> z_xi;
  for (double v : xi) z_xi.push_back(magnitude(gains.xi, v));

  Vector psi(phi.rows(), 0.0);
  for (std::size_t i = 0; i < phi.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < phi.cols(); ++j) {
      const BigInt prod = magnitude(gains.phi, phi(i, j)) * z_xi[j];
      if (prod > bound) throw OverflowError("quantized product exceeds q/2");
      const bool negative = (phi(i, j) < 0) != (xi[j] < 0);
      const double mag = to_double(prod) / gain;
      acc += negative ? -mag : mag;
    }
    psi[i] = acc;
  }
  return psi;
}

}  // namespace khectl::encctrl
