// khectl: key generation, closed-loop runs, attack scenarios, timing sweeps
// and closed-loop spectrum analysis for the encrypted DOB-PID controller.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "khectl/bench.hpp"
#include "khectl/config.hpp"
#include "khectl/control.hpp"
#include "khectl/errors.hpp"
#include "khectl/khe.hpp"
#include "khectl/sim.hpp"
#include "khectl/transport.hpp"
#include "khectl/wire.hpp"

using namespace khectl;

namespace {

// Keeps seeded key generation and seeded loop randomness on separate streams.
constexpr std::uint64_t kKeygenSalt = 0x6b657967656e5f31ULL;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

struct AttackFlags {
  std::optional<int> case_no;
  std::string target;
  std::string signal;
  std::optional<std::uint64_t> lambda;
  std::string window;
  bool ignore_detection = false;
};

struct RunFlags {
  std::string mode;
  std::string keys;
  std::string out;
  std::string controller;
  std::optional<std::size_t> steps;
  std::string transport;
  std::string connect;
  std::optional<unsigned> threads;
  std::optional<unsigned> bits;
  std::string dump_grid;
  std::string plot_script;
};

config::AppConfig load_config(const Common& c) {
  std::optional<std::filesystem::path> path;
  if (!c.config.empty()) path = c.config;
  else path = config::env_config_path();
  config::AppConfig cfg = path ? config::load(*path) : config::defaults();
  config::apply_overrides(cfg, c.overrides);
  if (c.seed) cfg.sim.seed = *c.seed;
  return cfg;
}

void add_attack_flags(CLI::App* cmd, AttackFlags& f) {
  cmd->add_option("--case", f.case_no, "preset scenario: 1 (Phi 6,1 x12) or 2 (Phi 5,5 x2)")
      ->check(CLI::IsMember({1, 2}));
  cmd->add_option("--target", f.target, "parameter cell i,j,theta (1-based)");
  cmd->add_option("--signal", f.signal, "signal cell j,theta (1-based)");
  cmd->add_option("--lambda", f.lambda, "integer scale applied to the cell");
  cmd->add_option("--window", f.window, "attack window start:end in seconds");
  cmd->add_flag("--ignore-detection", f.ignore_detection,
                "apply unchecked results instead of the fail-safe");
}

// Folds attack flags into the config, leaving it untouched when none given.
void apply_attack_flags(config::AppConfig& cfg, const AttackFlags& f) {
  const double ts = cfg.plant().sample_period;
  const int given = (f.case_no ? 1 : 0) + (!f.target.empty() ? 1 : 0) + (!f.signal.empty() ? 1 : 0);
  if (given > 1) throw config::ConfigError("use only one of --case, --target and --signal");
  std::optional<sim::AttackSpec> spec = cfg.sim.attack;
  if (f.case_no) {
    spec = *f.case_no == 1 ? sim::AttackSpec::case1(ts) : sim::AttackSpec::case2(ts);
  } else if (!f.target.empty()) {
    spec = config::parse_attack_target("param:" + f.target);
    spec->start = 0;
    spec->end = 0;
  } else if (!f.signal.empty()) {
    spec = config::parse_attack_target("signal:" + f.signal);
  }
  if ((f.lambda || !f.window.empty()) && !spec) {
    throw config::ConfigError("--lambda/--window need an attack target");
  }
  if (spec) {
    if (f.lambda) spec->lambda = *f.lambda;
    if (!f.window.empty()) {
      const auto [a, b] = config::parse_window(f.window);
      spec->start = static_cast<std::size_t>(std::llround(a / ts));
      spec->end = static_cast<std::size_t>(std::llround(b / ts));
    }
    if (spec->start >= spec->end) throw config::ConfigError("attack needs --window start:end");
    if (spec->lambda == 0 || (given && !f.case_no && !f.lambda)) {
      if (!f.lambda) throw config::ConfigError("attack needs --lambda");
    }
  }
  cfg.sim.attack = spec;
  if (f.ignore_detection) cfg.sim.ignore_detection = true;
}

void apply_run_flags(config::AppConfig& cfg, const RunFlags& f) {
  if (!f.mode.empty()) config::apply_override(cfg, "sim.mode=" + f.mode);
  if (!f.controller.empty()) config::apply_override(cfg, "sim.controller=" + f.controller);
  if (f.steps) config::apply_override(cfg, "sim.steps=" + std::to_string(*f.steps));
  if (!f.transport.empty()) config::apply_override(cfg, "sim.transport=" + f.transport);
  if (f.threads) config::apply_override(cfg, "sim.threads=" + std::to_string(*f.threads));
  if (f.bits) config::apply_override(cfg, "crypto.bits=" + std::to_string(*f.bits));
}

sim::PlantKeys obtain_keys(const config::AppConfig& cfg, const std::string& path) {
  if (!path.empty()) {
    auto kf = wire::load_keys(path);
    if (!kf.skd) throw FormatError(path + ": the plant side needs sk_d");
    return sim::PlantKeys{kf.pk, *kf.skd, kf.skh};
  }
  auto rng = cfg.sim.seed ? RandomSource::seeded(*cfg.sim.seed ^ kKeygenSalt)
                          : RandomSource::cryptographic();
  std::cerr << "note: no --keys given, generating a " << cfg.bits << "-bit key triple\n";
  auto keys = khe::gen(cfg.bits, rng);
  return sim::PlantKeys{keys.pk, keys.skd, keys.skh};
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw config::ConfigError("expected host:port, got '" + s + "'");
  const int port = std::stoi(s.substr(colon + 1));
  if (port < 0 || port > 65535) throw config::ConfigError("port out of range in '" + s + "'");
  return {s.substr(0, colon), static_cast<std::uint16_t>(port)};
}

const char* mode_name(sim::Mode m) {
  switch (m) {
    case sim::Mode::Plaintext: return "plain";
    case sim::Mode::Quantized: return "quantized";
    case sim::Mode::Encrypted: return "encrypted";
  }
  return "?";
}

void write_plot_script(const std::filesystem::path& path, const std::string& csv) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "# companion plot for a khectl trace; needs pandas and matplotlib\n"
         "import sys\n"
         "import pandas as pd\n"
         "import matplotlib.pyplot as plt\n\n"
         "csv = sys.argv[1] if len(sys.argv) > 1 else '" << csv << "'\n"
         "df = pd.read_csv(csv, keep_default_na=False, na_values=[''])\n"
         "ts = 0.01\n"
         "t = df['t'] * ts\n"
         "fig, ax = plt.subplots(4, 1, sharex=True, figsize=(8, 9))\n"
         "ax[0].plot(t, df['r'], 'k--', label='r')\n"
         "ax[0].plot(t, df['y'], label='y')\n"
         "ax[0].set_ylabel('position [m]')\n"
         "ax[0].legend()\n"
         "ax[1].plot(t, df['u'], label='u applied')\n"
         "ax[1].plot(t, df['u_check'], ':', label='u decoded')\n"
         "ax[1].set_ylabel('input [A]')\n"
         "ax[1].legend()\n"
         "ax[2].plot(t, df['d'], 'k--', label='d')\n"
         "ax[2].plot(t, df['d_hat'], label='d estimate')\n"
         "ax[2].legend()\n"
         "ax[3].step(t, df['fail_safe'], where='post', label='fail-safe')\n"
         "ax[3].step(t, df['detected'].astype(str).str.len() > 0, where='post', label='detected')\n"
         "ax[3].set_xlabel('time [s]')\n"
         "ax[3].legend()\n"
         "fig.tight_layout()\n"
         "fig.savefig(csv.rsplit('.', 1)[0] + '.png', dpi=150)\n";
}

int cmd_keygen(const Common& common, unsigned bits, const std::string& out, bool split) {
  auto rng = common.seed ? RandomSource::seeded(*common.seed) : RandomSource::cryptographic();
  const auto keys = khe::gen(bits, rng);
  wire::save_keys(out, keys);
  std::cout << "p: " << keys.pk.group.bits << " bits\n"
            << "public key fingerprint: " << wire::fingerprint(keys.pk) << "\n"
            << "homomorphic key fingerprint: " << wire::fingerprint(keys.pk, keys.skh) << "\n"
            << "wrote " << out << "\n";
  if (split) {
    wire::save_keys(out + ".plant.json", keys, wire::KeyParts::Plant);
    wire::save_keys(out + ".controller.json", keys, wire::KeyParts::Controller);
    std::cout << "wrote " << out << ".plant.json (pk, sk_d) and " << out
              << ".controller.json (pk, sk_h)\n";
  }
  return 0;
}

int cmd_run(config::AppConfig cfg, const RunFlags& f, bool attack_report) {
  apply_run_flags(cfg, f);
  const auto system = sim::make_system(cfg.plant(), cfg.gains, cfg.controller);
  for (const auto& w : control::design_warnings(system.plant, cfg.gains)) {
    std::cerr << "warning: " << w << "\n";
  }
  std::optional<sim::PlantKeys> keys;
  if (cfg.sim.mode != sim::Mode::Plaintext) keys = obtain_keys(cfg, f.keys);

  std::ofstream dump;
  if (!f.dump_grid.empty()) {
    if (cfg.sim.mode != sim::Mode::Encrypted) {
      throw config::ConfigError("--dump-grid needs encrypted mode");
    }
    dump.open(f.dump_grid);
    if (!dump) throw std::runtime_error("cannot open " + f.dump_grid + " for writing");
    wire::write_grid_dump_header(dump);
    cfg.sim.grid_dump = &dump;
  }
  std::unique_ptr<transport::SocketChannel> remote;
  if (!f.connect.empty()) {
    const auto [host, port] = split_host_port(f.connect);
    remote = transport::tcp_connect(host, port);
    cfg.sim.transport = sim::Transport::Remote;
    cfg.sim.remote = remote.get();
    if (keys && keys->skh) {
      std::cerr << "note: the key file holds sk_h, which the plant side does not need\n";
    }
    if (cfg.sim.attack) {
      std::cerr << "note: attacks are injected at the controller node; run the node with the "
                   "attack flags\n";
    }
  }

  const auto trace = sim::run_loop(cfg.sim, system, keys ? &*keys : nullptr);
  if (!f.out.empty()) sim::export_csv(trace, std::filesystem::path(f.out));
  if (!f.plot_script.empty()) write_plot_script(f.plot_script, f.out.empty() ? "trace.csv" : f.out);

  const double ts = trace.sample_period;
  const auto s = sim::summarize(trace);
  std::printf("mode %s, controller %s, %zu steps (%.2f s)\n", mode_name(cfg.sim.mode),
              cfg.controller == control::ControllerKind::DobPid ? "dob-pid" : "pid",
              trace.steps.size(), static_cast<double>(trace.steps.size()) * ts);
  if (s.rho) std::printf("rho(e) over [2 s, 10 s): %.6e\n", *s.rho);
  else std::printf("rho(e): n/a (trace shorter than the metric window)\n");
  std::printf("max |u_check - u_plain|: %.3e\n", s.max_quantization_error);
  std::printf("detections: %zu steps\n", s.detection_steps);

  if (attack_report) {
    if (cfg.sim.attack) std::printf("attack: %s\n", cfg.sim.attack->describe().c_str());
    if (s.detected_cells.empty()) {
      std::printf("detected cells: none\n");
    } else {
      std::string cells;
      for (const auto& c : s.detected_cells) cells += (cells.empty() ? "" : ", ") + sim::format_cell(c);
      std::printf("detected cells: %s (first at step %zu, %.2f s)\n", cells.c_str(),
                  *s.first_detection, static_cast<double>(*s.first_detection) * ts);
    }
    if (s.fail_safe_intervals.empty()) std::printf("fail-safe intervals: none\n");
    for (const auto& [a, b] : s.fail_safe_intervals) {
      std::printf("fail-safe interval: steps [%zu, %zu) = [%.2f s, %.2f s)\n", a, b,
                  static_cast<double>(a) * ts, static_cast<double>(b) * ts);
    }
  }
  if (s.diverged_at) {
    std::printf("divergence: |y| exceeded %.3g m at step %zu (%.2f s)\n", *cfg.sim.divergence_bound,
                *s.diverged_at, static_cast<double>(*s.diverged_at) * ts);
  } else if (attack_report) {
    std::printf("divergence: none within the horizon\n");
  }
  if (!f.out.empty()) std::printf("wrote %s\n", f.out.c_str());
  return 0;
}

int cmd_bench(const Common& common, const std::string& bits_text, std::size_t trials,
              std::size_t warmup, unsigned threads, const std::string& out) {
  if (trials == 0) throw config::ConfigError("--trials must be at least 1");
  const auto bits = bench::parse_bits_range(bits_text);
  auto rng = common.seed ? RandomSource::seeded(*common.seed) : RandomSource::cryptographic();
  bench::BenchOptions opts;
  opts.warmup = warmup;
  opts.threads = threads;
  const auto report = bench::run_bench(bits, trials, rng, opts);
  bench::write_table(report, std::cout);
  for (const auto& r : report.rows) {
    if (r.bits == 120) {
      std::printf("120-bit total %.3f ms; published hardware reference 6.806 ms (not a target)\n",
                  r.total.mean_ms);
    }
  }
  if (!out.empty()) {
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot open " + out + " for writing");
    bench::write_csv(report, os);
    std::printf("wrote %s\n", out.c_str());
  }
  return 0;
}

int cmd_analyze(const config::AppConfig& cfg, const AttackFlags& f, const std::string& convention) {
  const auto plant = cfg.plant();
  plant.validate();
  auto system = sim::make_system(plant, cfg.gains, cfg.controller);
  auto cr = system.controller;
  std::string label = "nominal";
  config::AppConfig attacked = cfg;
  attacked.sim.attack.reset();
  AttackFlags flags = f;
  if (!flags.window.empty() || flags.case_no || !flags.target.empty()) {
    if (flags.window.empty() && !flags.case_no) flags.window = "0:1";
    apply_attack_flags(attacked, flags);
  }
  if (attacked.sim.attack) {
    const auto* p = std::get_if<sim::ParameterTarget>(&attacked.sim.attack->target);
    if (!p) throw config::ConfigError("spectrum analysis needs a parameter attack");
    double scale = static_cast<double>(attacked.sim.attack->lambda);
    if (p->theta == 1) scale = attacked.sim.attack->lambda % 3 == 2 ? -1.0 : 1.0;
    cr = control::apply_parameter_attack(cr, p->i, p->j, scale);
    label = "Phi(" + std::to_string(p->i) + "," + std::to_string(p->j) + ") x " +
            std::to_string(attacked.sim.attack->lambda);
  }
  for (const auto& w : control::design_warnings(plant, cfg.gains)) std::cerr << "warning: " << w << "\n";

  const auto show = [&](control::LoopConvention conv, const char* name) {
    const auto mags = control::eig_magnitudes(control::closed_loop_matrix(plant, cr, conv));
    std::printf("%s, %s convention |eig|:", label.c_str(), name);
    for (double m : mags) std::printf(" %.4f", m);
    std::printf("\n  spectral radius %.4f (%s)\n", mags.front(),
                mags.front() < 1.0 ? "stable" : "not stable");
  };
  if (convention == "published" || convention == "both") {
    show(control::LoopConvention::Published, "published");
  }
  if (convention == "physical" || convention == "both") {
    show(control::LoopConvention::Physical, "physical");
  }
  return 0;
}

int cmd_serve(const Common& common, config::AppConfig cfg, const std::string& keys_path,
              const std::string& listen, unsigned threads, const AttackFlags& f) {
  apply_attack_flags(cfg, f);
  const auto kf = wire::load_keys(keys_path);
  if (!kf.skh) throw FormatError(keys_path + ": the controller node needs sk_h");
  if (kf.skd) std::cerr << "warning: " << keys_path << " also holds sk_d; the node ignores it\n";
  const auto [host, port] = split_host_port(listen);
  transport::TcpListener listener(port, host);
  std::printf("controller node listening on %s:%u\n", host.c_str(), listener.port());
  std::fflush(stdout);
  auto channel = listener.accept();
  auto rng = common.seed ? RandomSource::seeded(*common.seed) : RandomSource::cryptographic();
  sim::ControllerNode node(kf.pk, *kf.skh, std::move(rng),
                           encctrl::EvalOptions{threads, cfg.sim.ignore_detection}, cfg.sim.attack);
  const auto served = node.serve(*channel);
  std::printf("served %zu steps\n", served);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Encrypted DOB-PID control with keyed-homomorphic encryption"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config, "INI config (default: $KHECTL_CONFIG, else built-in)");
  app.add_option("--set", common.overrides, "override, e.g. sim.steps=500 (repeatable)");
  app.add_option("--seed", common.seed, "deterministic randomness (testing only)");

  auto* keygen = app.add_subcommand("keygen", "generate a key triple");
  unsigned kg_bits = 120;
  std::string kg_out;
  bool kg_split = false;
  keygen->add_option("--bits", kg_bits, "safe-prime length")->capture_default_str();
  keygen->add_option("--out", kg_out, "key file (JSON)")->required();
  keygen->add_flag("--split", kg_split, "also write plant-side and controller-side key files");

  RunFlags run_flags;
  const auto add_run_flags = [](CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--mode", f.mode, "plain | quantized | encrypted")
        ->check(CLI::IsMember({"plain", "plaintext", "quantized", "encrypted"}));
    cmd->add_option("--keys", f.keys, "key file; generated on the fly when omitted");
    cmd->add_option("--out", f.out, "trace CSV");
    cmd->add_option("--controller", f.controller, "dob | pid")->check(CLI::IsMember({"dob", "pid"}));
    cmd->add_option("--steps", f.steps, "number of sampling periods");
    cmd->add_option("--transport", f.transport, "inproc | socket")
        ->check(CLI::IsMember({"inproc", "socket"}));
    cmd->add_option("--connect", f.connect, "remote controller node host:port");
    cmd->add_option("--threads", f.threads, "Eval worker threads");
    cmd->add_option("--bits", f.bits, "key length for generated keys");
    cmd->add_option("--dump-grid", f.dump_grid, "write every Eval outcome cell to this CSV");
    cmd->add_option("--plot-script", f.plot_script, "write a matplotlib script for the trace");
  };
  auto* run = app.add_subcommand("run", "closed-loop simulation");
  add_run_flags(run, run_flags);

  auto* attack = app.add_subcommand("attack", "closed-loop simulation under a falsification attack");
  RunFlags attack_run_flags;
  AttackFlags attack_flags;
  add_run_flags(attack, attack_run_flags);
  add_attack_flags(attack, attack_flags);

  auto* bench_cmd = app.add_subcommand("bench", "key-length timing sweep");
  std::string bench_bits = "40:200:20";
  std::size_t bench_trials = 1000;
  std::size_t bench_warmup = 10;
  unsigned bench_threads = 1;
  std::string bench_out;
  bench_cmd->add_option("--bits", bench_bits, "lo:hi:step or a single length")->capture_default_str();
  bench_cmd->add_option("--trials", bench_trials, "timed steps per length")->capture_default_str();
  bench_cmd->add_option("--warmup", bench_warmup, "untimed steps per length")->capture_default_str();
  bench_cmd->add_option("--threads", bench_threads, "Eval worker threads")->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "report CSV");

  auto* analyze = app.add_subcommand("analyze-eigs", "closed-loop eigenvalue magnitudes");
  AttackFlags analyze_flags;
  std::optional<int> attack_case;
  std::string convention = "both";
  analyze->add_option("--attack-case", attack_case, "1 or 2")->check(CLI::IsMember({1, 2}));
  analyze->add_option("--target", analyze_flags.target, "parameter cell i,j,theta");
  analyze->add_option("--lambda", analyze_flags.lambda, "scale for --target");
  analyze->add_option("--convention", convention, "published | physical | both")
      ->check(CLI::IsMember({"published", "physical", "both"}))
      ->capture_default_str();

  auto* serve = app.add_subcommand("serve", "run a controller node over TCP");
  std::string serve_keys;
  std::string serve_listen = "127.0.0.1:5077";
  unsigned serve_threads = 1;
  AttackFlags serve_flags;
  serve->add_option("--keys", serve_keys, "key file with pk and sk_h")->required();
  serve->add_option("--listen", serve_listen, "host:port (port 0 picks one)")->capture_default_str();
  serve->add_option("--threads", serve_threads, "Eval worker threads")->capture_default_str();
  add_attack_flags(serve, serve_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*keygen) return cmd_keygen(common, kg_bits, kg_out, kg_split);
    if (*run) return cmd_run(load_config(common), run_flags, false);
    if (*attack) {
      auto cfg = load_config(common);
      apply_attack_flags(cfg, attack_flags);
      if (!cfg.sim.attack) throw config::ConfigError("attack needs --case, --target or --signal");
      return cmd_run(std::move(cfg), attack_run_flags, true);
    }
    if (*bench_cmd) {
      return cmd_bench(common, bench_bits, bench_trials, bench_warmup, bench_threads, bench_out);
    }
    if (*analyze) {
      analyze_flags.case_no = attack_case;
      return cmd_analyze(load_config(common), analyze_flags, convention);
    }
    if (*serve) {
      return cmd_serve(common, load_config(common), serve_keys, serve_listen, serve_threads,
                       serve_flags);
    }
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::overflow_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
