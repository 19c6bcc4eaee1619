#include "khectl/sim.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "khectl/errors.hpp"
#include "khectl/wire.hpp"

namespace khectl::sim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t steps_at(double seconds, double ts) {
  return static_cast<std::size_t>(std::llround(seconds / ts));
}

// Effect of scaling a channel by lambda once the pair is decoded: the
// magnitude channel multiplies the value, the sign channel multiplies the
// symbol zeta, whose residuosity mod 3 is the decoded sign.
double plaintext_scale(std::uint64_t lambda, int theta) {
  if (theta == 2) return static_cast<double>(lambda);
  switch (lambda % 3) {
    case 1: return 1.0;
    case 2: return -1.0;
    default: throw DomainError("sign channel scaled by a multiple of 3 cannot be decoded");
  }
}

std::string format_number(double v) {
  if (std::isnan(v)) return {};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---- reference --------------------------------------------------------------

ReferenceSchedule ReferenceSchedule::paper() {
  return ReferenceSchedule{{{0.0, 0.0}, {2.0, 0.05}, {4.0, 0.10}, {6.0, 0.05}, {8.0, 0.0}}};
}

double ReferenceSchedule::at_time(double seconds) const {
  double value = 0.0;
  for (const auto& [start, v] : breakpoints) {
    if (seconds + 1e-12 < start) break;
    value = v;
  }
  return value;
}

double reference(std::size_t t, const ReferenceSchedule& schedule, double sample_period) {
  // Compare in whole steps so that 2.0 s maps to step 200 exactly.
  double value = 0.0;
  for (const auto& [start, v] : schedule.breakpoints) {
    if (t < steps_at(start, sample_period)) break;
    value = v;
  }
  return value;
}

// ---- attacks ----------------------------------------------------------------

void AttackSpec::validate(std::size_t rows, std::size_t cols, std::size_t steps) const {
  if (lambda == 0) throw std::invalid_argument("attack scale lambda must be at least 1");
  if (start >= end) throw std::invalid_argument("attack window is empty");
  if (end > steps) {
    throw std::invalid_argument("attack window ends at step " + std::to_string(end) +
                                " beyond the horizon of " + std::to_string(steps));
  }
  std::visit(
      [&](const auto& tgt) {
        using T = std::decay_t<decltype(tgt)>;
        if (tgt.theta != 1 && tgt.theta != 2) {
          throw std::invalid_argument("attack channel theta must be 1 or 2");
        }
        if constexpr (std::is_same_v<T, ParameterTarget>) {
          if (tgt.i < 1 || tgt.i > rows || tgt.j < 1 || tgt.j > cols) {
            throw std::invalid_argument("attack target (" + std::to_string(tgt.i) + "," +
                                        std::to_string(tgt.j) + ") outside the " +
                                        std::to_string(rows) + "x" + std::to_string(cols) +
                                        " parameter grid");
          }
        } else {
          if (tgt.j < 1 || tgt.j > cols) {
            throw std::invalid_argument("attack target signal " + std::to_string(tgt.j) +
                                        " outside 1.." + std::to_string(cols));
          }
        }
      },
      target);
}

std::string AttackSpec::describe() const {
  std::ostringstream os;
  if (const auto* p = std::get_if<ParameterTarget>(&target)) {
    os << "parameter " << p->i << ":" << p->j << ":" << p->theta;
  } else {
    const auto& s = std::get<SignalTarget>(target);
    os << "signal " << s.j << ":" << s.theta;
  }
  os << " lambda=" << lambda << " steps [" << start << ", " << end << ")";
  return os.str();
}

AttackSpec AttackSpec::case1(double sample_period) {
  return AttackSpec{ParameterTarget{6, 1, 2}, 12, steps_at(5.0, sample_period),
                    steps_at(10.0, sample_period)};
}

AttackSpec AttackSpec::case2(double sample_period) {
  return AttackSpec{ParameterTarget{5, 5, 2}, 2, steps_at(5.0, sample_period),
                    steps_at(10.0, sample_period)};
}

encctrl::EncryptedParameters inject_attack(const GroupParams& gp,
                                           const encctrl::EncryptedParameters& params,
                                           const AttackSpec& spec, std::size_t t) {
  encctrl::EncryptedParameters out = params;
  const auto* tgt = std::get_if<ParameterTarget>(&spec.target);
  if (!tgt || !spec.active(t)) return out;
  auto& cell = out.at(tgt->i, tgt->j, tgt->theta);
  cell = khe::tamper(gp, cell, BigInt(static_cast<unsigned long>(spec.lambda)));
  return out;
}

encctrl::EncryptedState inject_attack(const GroupParams& gp, const encctrl::EncryptedState& state,
                                      const AttackSpec& spec, std::size_t t) {
  encctrl::EncryptedState out = state;
  const auto* tgt = std::get_if<SignalTarget>(&spec.target);
  if (!tgt || !spec.active(t)) return out;
  auto& cell = out.at(tgt->j, tgt->theta);
  cell = khe::tamper(gp, cell, BigInt(static_cast<unsigned long>(spec.lambda)));
  return out;
}

// ---- system -----------------------------------------------------------------

ClosedLoopSystem make_system(const control::PlantModel& plant, const control::GainSet& gains,
                             control::ControllerKind kind) {
  plant.validate();
  ClosedLoopSystem sys;
  sys.plant = plant;
  sys.controller = kind == control::ControllerKind::DobPid
                       ? control::assemble_dob_pid(plant, gains)
                       : control::assemble_pid_only(gains, plant.sample_period);
  return sys;
}

// ---- controller node --------------------------------------------------------

ControllerNode::ControllerNode(khe::PublicKey pk, khe::HomomorphicKey skh, RandomSource rng,
                               encctrl::EvalOptions options, std::optional<AttackSpec> attack)
    : pk_(std::move(pk)),
      skh_(std::move(skh)),
      rng_(std::move(rng)),
      options_(options),
      attack_(std::move(attack)) {}

void ControllerNode::install(encctrl::EncryptedParameters params) { params_ = std::move(params); }

encctrl::EvalOutcome ControllerNode::step(std::size_t t, const encctrl::EncryptedState& state) {
  if (!params_) throw std::logic_error("controller node has no parameters installed");
  if (attack_ && attack_->active(t)) {
    const auto& gp = pk_.group;
    if (std::holds_alternative<ParameterTarget>(attack_->target)) {
      return encctrl::eval_grid(pk_, skh_, inject_attack(gp, *params_, *attack_, t), state, rng_,
                                options_);
    }
    return encctrl::eval_grid(pk_, skh_, *params_, inject_attack(gp, state, *attack_, t), rng_,
                              options_);
  }
  return encctrl::eval_grid(pk_, skh_, *params_, state, rng_, options_);
}

std::size_t ControllerNode::serve(transport::Channel& channel) {
  const auto& gp = pk_.group;
  std::size_t served = 0;
  for (;;) {
    const std::string msg = channel.receive();
    const auto kind = wire::message_kind(msg);
    if (kind == "PARAMS") {
      install(wire::decode_params_message(gp, msg));
    } else if (kind == "STATE") {
      auto [t, state] = wire::decode_state_message(gp, msg);
      channel.send(wire::encode_outcome_message(gp, t, step(t, state)));
      ++served;
    } else if (kind == wire::kByeMessage) {
      return served;
    } else {
      throw FormatError("controller node: unexpected message '" + std::string(kind) + "'");
    }
  }
}

// ---- loop -------------------------------------------------------------------

namespace {

// Plant side of a message channel to a controller node.
class ChannelSession {
 public:
  ChannelSession(transport::Channel& channel, const GroupParams& gp,
                 const encctrl::EncryptedParameters& params)
      : channel_(channel), gp_(gp) {
    channel_.send(wire::encode_params_message(gp_, params));
  }

  encctrl::EvalOutcome exchange(std::size_t t, const encctrl::EncryptedState& s) {
    channel_.send(wire::encode_state_message(gp_, t, s));
    auto [echo, outcome] = wire::decode_outcome_message(gp_, channel_.receive());
    if (echo != t) throw FormatError("controller node answered for the wrong step");
    return std::move(outcome);
  }

  void bye() { channel_.send(wire::kByeMessage); }

 private:
  transport::Channel& channel_;
  GroupParams gp_;
};

// Controller node served on a thread behind a socket pair. Closing the plant
// end on unwind makes the node's receive fail, so join never hangs.
class LocalNodeThread {
 public:
  explicit LocalNodeThread(ControllerNode& node) {
    auto [plant_end, node_end] = transport::socket_pair();
    plant_ = std::move(plant_end);
    node_end_ = std::move(node_end);
    thread_ = std::thread([this, &node] {
      try {
        node.serve(*node_end_);
      } catch (...) {
        error_ = std::current_exception();
      }
    });
  }

  ~LocalNodeThread() {
    plant_.reset();
    if (thread_.joinable()) thread_.join();
  }

  transport::Channel& channel() { return *plant_; }

  void join() {
    thread_.join();
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::unique_ptr<transport::SocketChannel> plant_;
  std::unique_ptr<transport::SocketChannel> node_end_;
  std::thread thread_;
  std::exception_ptr error_;
};

}  // namespace

LoopTrace run_loop(const SimConfig& cfg, const ClosedLoopSystem& system,
                   const khe::KeyTriple* keys) {
  if (!keys) return run_loop(cfg, system, static_cast<const PlantKeys*>(nullptr));
  const PlantKeys pkeys{keys->pk, keys->skd, keys->skh};
  return run_loop(cfg, system, &pkeys);
}

LoopTrace run_loop(const SimConfig& cfg, const ClosedLoopSystem& system, const PlantKeys* keys) {
  const auto& plant = system.plant;
  const auto& cr = system.controller;
  const Matrix& phi = cr.phi;
  const std::size_t n = cr.states();
  if (cfg.steps == 0) throw std::invalid_argument("simulation needs at least one step");
  if (phi.rows() != n + 1 || phi.cols() != n + 2) {
    throw std::invalid_argument("controller Phi must be (n+1)x(n+2)");
  }
  if (plant.A.rows() != 2 || plant.C.cols() != 2) {
    throw std::invalid_argument("plant must have two states");
  }
  if (cfg.attack) cfg.attack->validate(phi.rows(), phi.cols(), cfg.steps);
  if (cfg.mode != Mode::Plaintext && !keys) {
    throw std::invalid_argument("quantized and encrypted modes need keys");
  }

  RandomSource master =
      cfg.seed ? RandomSource::seeded(*cfg.seed) : RandomSource::cryptographic();
  RandomSource plant_rng = master.fork();
  RandomSource node_rng = master.fork();

  std::optional<GroupParams> gp;
  std::optional<encctrl::OverflowGuard> guard;
  if (keys) {
    gp = keys->pk.group;
    guard = encctrl::make_overflow_guard(*gp, phi, cfg.gains);
  }

  std::optional<ControllerNode> node;
  std::optional<LocalNodeThread> node_thread;
  std::optional<ChannelSession> session;
  std::function<encctrl::EvalOutcome(std::size_t, const encctrl::EncryptedState&)> exchange;
  if (cfg.mode == Mode::Encrypted) {
    auto params = encctrl::encrypt_parameters(keys->pk, phi, cfg.gains, plant_rng, cfg.signal_range);
    transport::Channel* channel = nullptr;
    if (cfg.transport == Transport::Remote) {
      if (!cfg.remote) throw std::invalid_argument("remote transport needs a channel");
      channel = cfg.remote;
    } else {
      if (!keys->skh) throw std::invalid_argument("a local controller node needs sk_h");
      node.emplace(keys->pk, *keys->skh, std::move(node_rng),
                   encctrl::EvalOptions{cfg.threads, cfg.ignore_detection}, cfg.attack);
      if (cfg.transport == Transport::SocketPair) {
        node_thread.emplace(*node);
        channel = &node_thread->channel();
      }
    }
    if (channel) {
      session.emplace(*channel, *gp, params);
      exchange = [&](std::size_t t, const encctrl::EncryptedState& s) {
        return session->exchange(t, s);
      };
    } else {
      node->install(std::move(params));
      exchange = [&](std::size_t t, const encctrl::EncryptedState& s) { return node->step(t, s); };
    }
  }

  // Unprotected analogue of the attack for the plaintext and quantized modes.
  const auto attacked = [&](std::size_t t, Matrix& phi_t, Vector& xi_t) {
    if (!cfg.attack || !cfg.attack->active(t)) return;
    const auto& a = *cfg.attack;
    if (const auto* p = std::get_if<ParameterTarget>(&a.target)) {
      phi_t(p->i - 1, p->j - 1) *= plaintext_scale(a.lambda, p->theta);
    } else {
      const auto& s = std::get<SignalTarget>(a.target);
      xi_t[s.j - 1] *= plaintext_scale(a.lambda, s.theta);
    }
  };

  LoopTrace trace;
  trace.sample_period = plant.sample_period;
  trace.steps.reserve(cfg.steps);
  const auto d_index = cr.disturbance_index();

  Vector xp(2, 0.0);
  Vector xc(n, 0.0);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const double y = (plant.C * xp)[0];
    if (cfg.divergence_bound && !(std::fabs(y) <= *cfg.divergence_bound)) {
      trace.diverged_at = t;
      break;
    }
    StepRecord rec;
    rec.t = t;
    rec.r = reference(t, cfg.reference, plant.sample_period);
    rec.y = y;
    rec.e = rec.r - y;
    rec.d = t >= cfg.disturbance_start ? cfg.disturbance : 0.0;
    rec.d_hat = d_index ? xc[*d_index] : kNaN;

    Vector xi = xc;
    xi.push_back(rec.r);
    xi.push_back(y);
    rec.u_plain = control::controller_step(phi, xi).back();

    std::optional<Vector> psi;
    switch (cfg.mode) {
      case Mode::Plaintext: {
        Matrix phi_t = phi;
        Vector xi_t = xi;
        attacked(t, phi_t, xi_t);
        psi = control::controller_step(phi_t, xi_t);
        break;
      }
      case Mode::Quantized: {
        guard->check(*gp, cfg.gains.xi, xi);
        Matrix phi_t = phi;
        Vector xi_t = xi;
        attacked(t, phi_t, xi_t);
        psi = encctrl::quantized_oracle(*gp, phi_t, xi_t, cfg.gains);
        break;
      }
      case Mode::Encrypted: {
        const auto state = encctrl::encrypt_state(keys->pk, xi, cfg.gains, plant_rng, &*guard);
        const auto outcome = exchange(t, state);
        if (cfg.grid_dump) wire::write_grid_dump(*cfg.grid_dump, *gp, t, outcome);
        auto result = encctrl::dec_plus(keys->skd, outcome, cfg.gains);
        if (auto* step = std::get_if<encctrl::DecodedStep>(&result)) {
          psi = std::move(step->psi);
        } else {
          rec.detected = std::get<encctrl::DetectionReport>(result).cells;
          if (cfg.ignore_detection) {
            psi = encctrl::dec_plus_unchecked(keys->skd, outcome, cfg.gains).psi;
          }
        }
        break;
      }
    }

    if (psi) {
      rec.u_check = psi->back();
      rec.u = rec.u_check;
      xc.assign(psi->begin(), psi->end() - 1);
    } else {
      rec.fail_safe = true;
      rec.u = 0.0;
      rec.u_check = kNaN;
    }

    const Vector ax = plant.A * xp;
    for (std::size_t k = 0; k < 2; ++k) xp[k] = ax[k] + plant.B(k, 0) * (rec.u - rec.d);
    trace.steps.push_back(std::move(rec));
  }

  if (session) session->bye();
  if (node_thread) node_thread->join();
  return trace;
}

// ---- metrics / export -------------------------------------------------------

double metric_rho(const LoopTrace& trace, std::size_t t0, std::size_t t1) {
  if (t0 >= t1) throw std::out_of_range("metric window is empty");
  if (t1 > trace.steps.size()) {
    throw std::out_of_range("metric window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                            ") exceeds a trace of " + std::to_string(trace.steps.size()) +
                            " steps");
  }
  double sum = 0.0;
  for (std::size_t t = t0; t < t1; ++t) sum += std::fabs(trace.steps[t].r - trace.steps[t].y);
  return sum / static_cast<double>(t1 - t0);
}

TraceSummary summarize(const LoopTrace& trace, std::size_t t0, std::size_t t1) {
  TraceSummary s;
  if (t0 < t1 && t1 <= trace.steps.size()) s.rho = metric_rho(trace, t0, t1);
  s.diverged_at = trace.diverged_at;
  std::optional<std::size_t> open;
  for (const auto& rec : trace.steps) {
    if (!std::isnan(rec.u_check)) {
      s.max_quantization_error =
          std::max(s.max_quantization_error, std::fabs(rec.u_check - rec.u_plain));
    }
    if (!rec.detected.empty()) {
      ++s.detection_steps;
      if (!s.first_detection) s.first_detection = rec.t;
      s.detected_cells.insert(rec.detected.begin(), rec.detected.end());
    }
    if (rec.fail_safe && !open) open = rec.t;
    if (!rec.fail_safe && open) {
      s.fail_safe_intervals.emplace_back(*open, rec.t);
      open.reset();
    }
  }
  if (open) s.fail_safe_intervals.emplace_back(*open, trace.steps.back().t + 1);
  return s;
}

std::string format_cell(const encctrl::CellIndex& c) {
  return std::to_string(c.i) + ":" + std::to_string(c.j) + ":" + std::to_string(c.theta);
}

void export_csv(const LoopTrace& trace, std::ostream& os) {
  os << "t,r,y,u,u_check,d,d_hat,e,detected,fail_safe\n";
  for (const auto& rec : trace.steps) {
    std::string detected;
    for (const auto& c : rec.detected) {
      if (!detected.empty()) detected += ';';
      detected += format_cell(c);
    }
    os << rec.t << ',' << format_number(rec.r) << ',' << format_number(rec.y) << ','
       << format_number(rec.u) << ',' << format_number(rec.u_check) << ','
       << format_number(rec.d) << ',' << format_number(rec.d_hat) << ','
       << format_number(rec.e) << ',' << detected << ',' << (rec.fail_safe ? 1 : 0) << '\n';
  }
}

void export_csv(const LoopTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  export_csv(trace, out);
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace khectl::sim
