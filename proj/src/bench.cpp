#include "khectl/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

#include "khectl/control.hpp"
#include "khectl/encctrl.hpp"
#include "khectl/errors.hpp"
#include "khectl/khe.hpp"

namespace khectl::bench {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

struct Accumulator {
  double sum = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;

  void add(double v) {
    lo = n ? std::min(lo, v) : v;
    hi = n ? std::max(hi, v) : v;
    sum += v;
    ++n;
  }
  TimingStats stats() const {
    // clamp keeps min <= mean <= max despite summation rounding
    const double mean = std::clamp(sum / static_cast<double>(n), lo, hi);
    return TimingStats{mean, lo, hi};
  }
};

double floor_pow10(double v) { return std::pow(10.0, std::floor(std::log10(v))); }

// Representative mid-run signal: small state entries, r = 0.05, y = 0.03.
std::vector<double> sample_signal(std::size_t cols) {
  std::vector<double> xi(cols);
  for (std::size_t j = 0; j + 2 < cols; ++j) xi[j] = 1e-3 * static_cast<double>(j + 1);
  if (cols >= 2) {
    xi[cols - 2] = 0.05;
    xi[cols - 1] = 0.03;
  }
  return xi;
}

}  // namespace

codec::QuantizationGains feasible_gains(const GroupParams& gp, const Matrix& phi,
                                        double signal_range,
                                        const codec::QuantizationGains& preferred) {
  double phi_max = 0.0;
  for (double v : phi.data()) phi_max = std::max(phi_max, std::fabs(v));
  phi_max = std::max(phi_max, 1.0);
  const double bound = to_double(gp.q / 2);
  // product of the gains allowed, with a factor-2 margin for rounding
  const double budget = bound / (2.0 * phi_max * std::max(signal_range, 1.0));
  if (preferred.phi * preferred.xi <= budget) return preferred;
  if (budget < 1.0) {
    throw OverflowError("a " + std::to_string(gp.bits) + "-bit group cannot hold the products");
  }
  const double shrink = std::sqrt(budget / (preferred.phi * preferred.xi));
  codec::QuantizationGains g{floor_pow10(std::max(1.0, preferred.phi * shrink)),
                             floor_pow10(std::max(1.0, preferred.xi * shrink))};
  while (g.phi * g.xi > budget) {
    if (g.xi >= g.phi && g.xi > 1.0) g.xi /= 10.0;
    else if (g.phi > 1.0) g.phi /= 10.0;
    else break;
  }
  return g;
}

std::vector<unsigned> parse_bits_range(std::string_view text) {
  std::vector<unsigned> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(':', start);
    const auto tok = text.substr(start, pos == std::string_view::npos ? text.npos : pos - start);
    unsigned v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw std::invalid_argument("bits range '" + std::string(text) + "' must be lo:hi:step");
    }
    parts.push_back(v);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3 || parts[2] == 0 || parts[0] > parts[1]) {
    throw std::invalid_argument("bits range '" + std::string(text) + "' must be lo:hi:step");
  }
  std::vector<unsigned> out;
  for (unsigned b = parts[0]; b <= parts[1]; b += parts[2]) out.push_back(b);
  return out;
}

BenchReport run_bench(std::span<const unsigned> bits_list, std::size_t trials, RandomSource& rng,
                      const BenchOptions& options) {
  if (trials == 0) throw std::invalid_argument("bench needs at least one trial");
  for (unsigned b : bits_list) {
    if (b < kMinSafePrimeBits) {
      throw std::invalid_argument("key length " + std::to_string(b) + " is below 16 bits");
    }
  }
  const Matrix phi =
      control::assemble_dob_pid(control::reference_plant(), control::reference_gains()).phi;
  const auto xi = sample_signal(phi.cols());

  BenchReport report;
  report.warmup = options.warmup;
  report.threads = std::max(1u, options.threads);
  for (unsigned bits : bits_list) {
    const auto keys = khe::gen(bits, rng);
    const auto& gp = keys.pk.group;
    const auto gains = feasible_gains(gp, phi, options.signal_range, options.preferred);
    const auto params = encctrl::encrypt_parameters(keys.pk, phi, gains, rng, options.signal_range);
    const encctrl::EvalOptions eval_opts{report.threads, false};

    Accumulator enc, eval, dec, total;
    for (std::size_t k = 0; k < options.warmup + trials; ++k) {
      const auto t0 = Clock::now();
      const auto state = encctrl::encrypt_state(keys.pk, xi, gains, rng);
      const auto t1 = Clock::now();
      const auto outcome = encctrl::eval_grid(keys.pk, keys.skh, params, state, rng, eval_opts);
      const auto t2 = Clock::now();
      const auto result = encctrl::dec_plus(keys.skd, outcome, gains);
      const auto t3 = Clock::now();
      if (!std::holds_alternative<encctrl::DecodedStep>(result)) {
        throw std::runtime_error("honest benchmark step was rejected");
      }
      if (k < options.warmup) continue;
      enc.add(elapsed_ms(t0, t1));
      eval.add(elapsed_ms(t1, t2));
      dec.add(elapsed_ms(t2, t3));
      total.add(elapsed_ms(t0, t3));
    }

    BenchRow row;
    row.bits = bits;
    row.trials = trials;
    row.enc = enc.stats();
    row.eval = eval.stats();
    row.dec_plus = dec.stats();
    row.total = total.stats();
    const double cells = static_cast<double>(params.cells.size());
    row.enc_op_ms = row.enc.mean_ms / static_cast<double>(2 * phi.cols());
    row.eval_op_ms = row.eval.mean_ms / cells;
    row.dec_op_ms = row.dec_plus.mean_ms / cells;
    row.gains = gains;
    report.rows.push_back(row);
  }
  return report;
}

void write_csv(const BenchReport& report, std::ostream& os) {
  os << "bits,trials,enc_mean_ms,enc_min_ms,enc_max_ms,eval_mean_ms,eval_min_ms,eval_max_ms,"
        "dec_plus_mean_ms,dec_plus_min_ms,dec_plus_max_ms,total_mean_ms,total_min_ms,"
        "total_max_ms,enc_op_ms,eval_op_ms,dec_op_ms,gamma_phi,gamma_xi\n";
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  for (const auto& r : report.rows) {
    os << r.bits << ',' << r.trials;
    for (const TimingStats* s : {&r.enc, &r.eval, &r.dec_plus, &r.total}) {
      os << ',' << num(s->mean_ms) << ',' << num(s->min_ms) << ',' << num(s->max_ms);
    }
    os << ',' << num(r.enc_op_ms) << ',' << num(r.eval_op_ms) << ',' << num(r.dec_op_ms) << ','
       << num(r.gains.phi) << ',' << num(r.gains.xi) << '\n';
  }
}

void write_table(const BenchReport& report, std::ostream& os) {
  char line[256];
  std::snprintf(line, sizeof line, "%5s %7s %10s %10s %10s %10s %10s %10s  %s\n", "bits",
                "trials", "enc ms", "eval ms", "dec+ ms", "total ms", "min ms", "max ms",
                "gains (phi, xi)");
  os << line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%5u %7zu %10.4f %10.4f %10.4f %10.4f %10.4f %10.4f  %.0e, %.0e\n",
                  r.bits, r.trials, r.enc.mean_ms, r.eval.mean_ms, r.dec_plus.mean_ms,
                  r.total.mean_ms, r.total.min_ms, r.total.max_ms, r.gains.phi, r.gains.xi);
    os << line;
  }
  os << "per operation (ms):\n";
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%5u  enc %.4f  eval %.4f  dec+ %.4f\n", r.bits, r.enc_op_ms,
                  r.eval_op_ms, r.dec_op_ms);
    os << line;
  }
  os << "warmup " << report.warmup << ", threads " << report.threads << "\n";
}

}  // namespace khectl::bench
