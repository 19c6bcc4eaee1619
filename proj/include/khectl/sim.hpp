#pragma once

// Closed-loop runner: a plant node (holds sk_d, measures y, encrypts xi,
// runs Dec+ and the fail-safe) and a controller node (holds pk and sk_h
// only, evaluates the grid) exchanging one request/response per step.
//
// Plant update: x_p(t+1) = A_p x_p(t) + B_p u(t) - B_p d(t).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "khectl/control.hpp"
#include "khectl/encctrl.hpp"
#include "khectl/khe.hpp"
#include "khectl/transport.hpp"

namespace khectl::sim {

enum class Mode {
  Plaintext,  // psi = Phi * xi in floating point
  Quantized,  // quantized_oracle, no encryption
  Encrypted,
};

enum class Transport {
  InProcess,
  SocketPair,  // controller node on a thread behind a local socket pair
  Remote,      // controller node reached through SimConfig::remote
};

struct ReferenceSchedule {
  /// (start time in seconds, value), ascending; value holds until the next
  /// breakpoint. Before the first breakpoint the reference is 0.
  std::vector<std::pair<double, double>> breakpoints;

  /// 0 -> 0.05 -> 0.10 -> 0.05 -> 0 m, switching every 2 s.
  static ReferenceSchedule paper();
  double at_time(double seconds) const;
};

double reference(std::size_t t, const ReferenceSchedule& schedule, double sample_period);

struct ParameterTarget {
  std::size_t i = 0, j = 0;
  int theta = 2;
};

struct SignalTarget {
  std::size_t j = 0;
  int theta = 2;
};

struct AttackSpec {
  std::variant<ParameterTarget, SignalTarget> target;
  std::uint64_t lambda = 1;
  std::size_t start = 0;  // first attacked step
  std::size_t end = 0;    // one past the last attacked step

  bool active(std::size_t t) const { return t >= start && t < end; }
  /// Throws std::invalid_argument for lambda = 0, an empty window or indices
  /// outside a rows x cols grid.
  void validate(std::size_t rows, std::size_t cols, std::size_t steps) const;
  std::string describe() const;

  /// Phi(6,1) magnitude channel scaled by 12 during [5 s, 10 s).
  static AttackSpec case1(double sample_period);
  /// Phi(5,5) magnitude channel scaled by 2 during [5 s, 10 s).
  static AttackSpec case2(double sample_period);
};

encctrl::EncryptedParameters inject_attack(const GroupParams& gp,
                                           const encctrl::EncryptedParameters& params,
                                           const AttackSpec& spec, std::size_t t);
encctrl::EncryptedState inject_attack(const GroupParams& gp, const encctrl::EncryptedState& state,
                                      const AttackSpec& spec, std::size_t t);

struct SimConfig {
  Mode mode = Mode::Encrypted;
  std::size_t steps = 1000;
  ReferenceSchedule reference = ReferenceSchedule::paper();
  double disturbance = 0.2;  // A
  std::size_t disturbance_start = 0;
  std::optional<AttackSpec> attack;
  bool ignore_detection = false;
  std::optional<std::uint64_t> seed;  // unset: cryptographic randomness
  std::optional<double> divergence_bound = 10.0;  // |y| in m
  codec::QuantizationGains gains;
  double signal_range = 10.0;
  unsigned threads = 1;
  Transport transport = Transport::InProcess;
  transport::Channel* remote = nullptr;  // required for Transport::Remote
  std::ostream* grid_dump = nullptr;
};

struct StepRecord {
  std::size_t t = 0;
  double r = 0.0;
  double y = 0.0;
  double u = 0.0;        // applied input
  double u_check = 0.0;  // decoded controller output; NaN when fail-safe
  double u_plain = 0.0;  // controller_step(Phi, xi) on the same xi
  double d = 0.0;
  double d_hat = 0.0;    // NaN without an observer
  double e = 0.0;
  std::vector<encctrl::CellIndex> detected;
  bool fail_safe = false;
};

struct LoopTrace {
  double sample_period = 0.0;
  std::vector<StepRecord> steps;
  /// First step whose measured |y| exceeded the divergence bound.
  std::optional<std::size_t> diverged_at;
};

struct ClosedLoopSystem {
  control::PlantModel plant;
  control::ControllerRealization controller;
};

ClosedLoopSystem make_system(const control::PlantModel& plant, const control::GainSet& gains,
                             control::ControllerKind kind);

/// The controller node. It never holds sk_d.
class ControllerNode {
 public:
  ControllerNode(khe::PublicKey pk, khe::HomomorphicKey skh, RandomSource rng,
                 encctrl::EvalOptions options, std::optional<AttackSpec> attack = std::nullopt);

  void install(encctrl::EncryptedParameters params);
  encctrl::EvalOutcome step(std::size_t t, const encctrl::EncryptedState& state);

  /// Answers PARAMS / STATE messages until BYE. Returns the steps served.
  std::size_t serve(transport::Channel& channel);

 private:
  khe::PublicKey pk_;
  khe::HomomorphicKey skh_;
  RandomSource rng_;
  encctrl::EvalOptions options_;
  std::optional<AttackSpec> attack_;
  std::optional<encctrl::EncryptedParameters> params_;
};

/// Requires keys for Mode::Encrypted and Mode::Quantized (the latter only
/// uses the group). Throws OverflowError / std::invalid_argument on
/// configuration faults; detections are recorded, never thrown.
LoopTrace run_loop(const SimConfig& cfg, const ClosedLoopSystem& system,
                   const khe::KeyTriple* keys = nullptr);

/// Plant-side keys. skh may be absent when the controller node is remote.
struct PlantKeys {
  khe::PublicKey pk;
  khe::DecryptionKey skd;
  std::optional<khe::HomomorphicKey> skh;
};
LoopTrace run_loop(const SimConfig& cfg, const ClosedLoopSystem& system, const PlantKeys* keys);

/// Mean |r - y| over steps [t0, t1). Throws std::out_of_range when the
/// window is empty or extends past the trace.
double metric_rho(const LoopTrace& trace, std::size_t t0 = 200, std::size_t t1 = 1000);

struct TraceSummary {
  std::optional<double> rho;
  double max_quantization_error = 0.0;  // max |u_check - u_plain|
  std::size_t detection_steps = 0;
  std::optional<std::size_t> first_detection;
  std::set<encctrl::CellIndex> detected_cells;
  std::vector<std::pair<std::size_t, std::size_t>> fail_safe_intervals;  // [a, b)
  std::optional<std::size_t> diverged_at;
};

TraceSummary summarize(const LoopTrace& trace, std::size_t t0 = 200, std::size_t t1 = 1000);

/// Header: t,r,y,u,u_check,d,d_hat,e,detected,fail_safe
void export_csv(const LoopTrace& trace, std::ostream& os);
void export_csv(const LoopTrace& trace, const std::filesystem::path& path);

std::string format_cell(const encctrl::CellIndex& c);  // "i:j:theta"

}  // namespace khectl::sim
