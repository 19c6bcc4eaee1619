#include "khectl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace khectl::config {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_real(std::string_view text, const std::string& what) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(what + ": expected a finite number, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_unsigned(std::string_view text, const std::string& what) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError(what + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(std::string_view text, const std::string& what) {
  std::string s = trim(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ConfigError(what + ": expected true or false, got '" + s + "'");
}

Matrix to_matrix(std::string_view text, const std::string& what) {
  std::vector<std::vector<double>> rows;
  for (const auto& row : split(text, ';')) {
    std::vector<double> values;
    std::string cells(row);
    std::replace(cells.begin(), cells.end(), ',', ' ');
    std::istringstream is(cells);
    std::string tok;
    while (is >> tok) values.push_back(to_real(tok, what));
    if (values.empty()) throw ConfigError(what + ": empty matrix row");
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw ConfigError(what + ": rows have different lengths");
    }
    rows.push_back(std::move(values));
  }
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_matrix(const Matrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (i) out += "; ";
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      out += fmt(m(i, j));
    }
  }
  return out;
}

std::size_t seconds_to_steps(double seconds, double ts) {
  if (seconds < 0) throw ConfigError("times must be non-negative");
  return static_cast<std::size_t>(std::llround(seconds / ts));
}

// Attack fields are staged until the end so that window (seconds) and Ts can
// come in any order.
struct AttackDraft {
  std::optional<sim::AttackSpec> target;
  std::optional<std::uint64_t> lambda;
  std::optional<std::pair<double, double>> window;
  bool cleared = false;
};

struct Staging {
  AppConfig cfg;
  AttackDraft attack;
  std::optional<double> disturbance_start_s;
};

using Setter = std::function<void(Staging&, const std::string& value, const std::string& what)>;

const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"plant",
       {
           {"k", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.plant_spec.k = to_real(v, w);
            }},
           {"a", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.plant_spec.a = to_real(v, w);
            }},
           {"Ts", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.plant_spec.sample_period = to_real(v, w);
            }},
           {"A", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.plant_spec.A = to_matrix(v, w);
            }},
           {"B", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.plant_spec.B = to_matrix(v, w);
            }},
           {"C", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.plant_spec.C = to_matrix(v, w);
            }},
       }},
      {"gains",
       {
           {"Kp", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.gains.kp = to_real(v, w);
            }},
           {"Ki", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.gains.ki = to_real(v, w);
            }},
           {"Kd", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.gains.kd = to_real(v, w);
            }},
           {"Lx1", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.gains.lx[0] = to_real(v, w);
            }},
           {"Lx2", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.gains.lx[1] = to_real(v, w);
            }},
           {"Ld", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.gains.ld = to_real(v, w);
            }},
       }},
      {"codec",
       {
           {"gamma_phi", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.sim.gains.phi = to_real(v, w);
              if (!(s.cfg.sim.gains.phi > 0)) throw ConfigError(w + ": gain must be positive");
            }},
           {"gamma_xi", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.sim.gains.xi = to_real(v, w);
              if (!(s.cfg.sim.gains.xi > 0)) throw ConfigError(w + ": gain must be positive");
            }},
           {"signal_range", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.sim.signal_range = to_real(v, w);
              if (!(s.cfg.sim.signal_range > 0)) throw ConfigError(w + ": must be positive");
            }},
       }},
      {"crypto",
       {
           {"bits", [](Staging& s, const std::string& v, const std::string& w) {
              const auto b = to_unsigned(v, w);
              if (b < kMinSafePrimeBits || b > 4096) {
                throw ConfigError(w + ": key length must be within 16..4096 bits");
              }
              s.cfg.bits = static_cast<unsigned>(b);
            }},
       }},
      {"sim",
       {
           {"mode", [](Staging& s, const std::string& v, const std::string& w) {
              const std::string m = trim(v);
              if (m == "plain" || m == "plaintext") s.cfg.sim.mode = sim::Mode::Plaintext;
              else if (m == "quantized") s.cfg.sim.mode = sim::Mode::Quantized;
              else if (m == "encrypted") s.cfg.sim.mode = sim::Mode::Encrypted;
              else throw ConfigError(w + ": expected plain, quantized or encrypted, got '" + m + "'");
            }},
           {"controller", [](Staging& s, const std::string& v, const std::string& w) {
              const std::string m = trim(v);
              if (m == "dob") s.cfg.controller = control::ControllerKind::DobPid;
              else if (m == "pid") s.cfg.controller = control::ControllerKind::Pid;
              else throw ConfigError(w + ": expected dob or pid, got '" + m + "'");
            }},
           {"steps", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.sim.steps = to_unsigned(v, w);
              if (s.cfg.sim.steps == 0) throw ConfigError(w + ": must be at least 1");
            }},
           {"reference", [](Staging& s, const std::string& v, const std::string&) {
              s.cfg.sim.reference = parse_schedule(v);
            }},
           {"disturbance", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.sim.disturbance = to_real(v, w);
            }},
           {"disturbance_start_s", [](Staging& s, const std::string& v, const std::string& w) {
              s.disturbance_start_s = to_real(v, w);
            }},
           {"seed", [](Staging& s, const std::string& v, const std::string& w) {
              if (trim(v) == "random") s.cfg.sim.seed.reset();
              else s.cfg.sim.seed = to_unsigned(v, w);
            }},
           {"divergence_bound", [](Staging& s, const std::string& v, const std::string& w) {
              if (trim(v) == "none") s.cfg.sim.divergence_bound.reset();
              else s.cfg.sim.divergence_bound = to_real(v, w);
            }},
           {"threads", [](Staging& s, const std::string& v, const std::string& w) {
              const auto n = to_unsigned(v, w);
              if (n == 0 || n > 256) throw ConfigError(w + ": must be within 1..256");
              s.cfg.sim.threads = static_cast<unsigned>(n);
            }},
           {"transport", [](Staging& s, const std::string& v, const std::string& w) {
              const std::string m = trim(v);
              if (m == "inproc") s.cfg.sim.transport = sim::Transport::InProcess;
              else if (m == "socket") s.cfg.sim.transport = sim::Transport::SocketPair;
              else throw ConfigError(w + ": expected inproc or socket, got '" + m + "'");
            }},
       }},
      {"attack",
       {
           {"target", [](Staging& s, const std::string& v, const std::string&) {
              if (trim(v) == "none") {
                s.attack = AttackDraft{};
                s.attack.cleared = true;
                return;
              }
              s.attack.target = parse_attack_target(v);
              s.attack.cleared = false;
            }},
           {"case", [](Staging& s, const std::string& v, const std::string& w) {
              const auto c = to_unsigned(v, w);
              if (c != 1 && c != 2) throw ConfigError(w + ": expected 1 or 2");
              const auto spec = c == 1 ? sim::AttackSpec::case1(1.0) : sim::AttackSpec::case2(1.0);
              s.attack.target = spec;
              s.attack.lambda = spec.lambda;
              s.attack.window = {5.0, 10.0};
              s.attack.cleared = false;
            }},
           {"lambda", [](Staging& s, const std::string& v, const std::string& w) {
              s.attack.lambda = to_unsigned(v, w);
              if (*s.attack.lambda == 0) throw ConfigError(w + ": must be at least 1");
            }},
           {"window_s", [](Staging& s, const std::string& v, const std::string&) {
              s.attack.window = parse_window(v);
            }},
           {"ignore_detection", [](Staging& s, const std::string& v, const std::string& w) {
              s.cfg.sim.ignore_detection = to_bool(v, w);
            }},
       }},
  };
  return table;
}

std::string allowed_keys(const std::map<std::string, Setter>& keys) {
  std::string out;
  for (const auto& [k, _] : keys) out += (out.empty() ? "" : ", ") + k;
  return out;
}

void assign(Staging& s, const std::string& section, const std::string& key,
            const std::string& value, const std::string& source) {
  const auto& table = schema();
  const auto sec = table.find(section);
  if (sec == table.end()) {
    std::string names;
    for (const auto& [k, _] : table) names += (names.empty() ? "" : ", ") + k;
    throw ConfigError(source + ": unknown section [" + section + "] (expected one of: " + names +
                      ")");
  }
  const auto it = sec->second.find(key);
  if (it == sec->second.end()) {
    throw ConfigError(source + ": unknown key '" + key + "' in [" + section +
                      "] (expected one of: " + allowed_keys(sec->second) + ")");
  }
  it->second(s, value, source + ": " + section + "." + key);
}

// Folds staged values into the config; called after every batch of edits.
AppConfig finalize(Staging s) {
  AppConfig& cfg = s.cfg;
  const double ts = cfg.plant_spec.sample_period;
  if (!(ts > 0)) throw ConfigError("plant.Ts must be positive");
  if (s.disturbance_start_s) cfg.sim.disturbance_start = seconds_to_steps(*s.disturbance_start_s, ts);
  if (s.attack.cleared) {
    cfg.sim.attack.reset();
  } else if (s.attack.target) {
    sim::AttackSpec spec = *s.attack.target;
    spec.lambda = s.attack.lambda.value_or(spec.lambda);
    if (!s.attack.window) throw ConfigError("attack.window_s is required with attack.target");
    spec.start = seconds_to_steps(s.attack.window->first, ts);
    spec.end = seconds_to_steps(s.attack.window->second, ts);
    cfg.sim.attack = spec;
  } else if (s.attack.lambda || s.attack.window) {
    if (!cfg.sim.attack) throw ConfigError("attack.lambda/window_s given without attack.target");
    if (s.attack.lambda) cfg.sim.attack->lambda = *s.attack.lambda;
    if (s.attack.window) {
      cfg.sim.attack->start = seconds_to_steps(s.attack.window->first, ts);
      cfg.sim.attack->end = seconds_to_steps(s.attack.window->second, ts);
    }
  }
  cfg.plant();  // surfaces plant inconsistencies early
  return cfg;
}

}  // namespace

control::PlantModel AppConfig::plant() const {
  const auto& ps = plant_spec;
  const bool continuous = ps.k || ps.a;
  const bool discrete = ps.A || ps.B || ps.C;
  if (continuous && discrete) {
    throw ConfigError("[plant]: give either k and a, or A, B and C, not both");
  }
  if (continuous) {
    if (!ps.k || !ps.a) throw ConfigError("[plant]: k and a must be given together");
    try {
      return control::discretize_plant(*ps.k, *ps.a, ps.sample_period);
    } catch (const std::domain_error& e) {
      throw ConfigError(std::string("[plant]: ") + e.what());
    }
  }
  if (discrete) {
    if (!ps.A || !ps.B || !ps.C) throw ConfigError("[plant]: A, B and C must be given together");
    control::PlantModel p{*ps.A, *ps.B, *ps.C, ps.sample_period};
    if (p.A.rows() != 2 || p.A.cols() != 2 || p.B.rows() != 2 || p.B.cols() != 1 ||
        p.C.rows() != 1 || p.C.cols() != 2) {
      throw ConfigError("[plant]: A must be 2x2, B 2x1 and C 1x2");
    }
    return p;
  }
  control::PlantModel p = control::reference_plant();
  if (ps.sample_period != p.sample_period) {
    throw ConfigError("[plant]: a non-default Ts needs k and a (or explicit A, B, C)");
  }
  return p;
}

AppConfig defaults() { return AppConfig{}; }

AppConfig parse(std::string_view text, const std::string& source) {
  pt::ptree tree;
  std::istringstream is{std::string(text)};
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  Staging s;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError(source + ": key '" + section + "' outside any [section]");
    }
    for (const auto& [key, node] : body) assign(s, section, key, node.data(), source);
  }
  return finalize(std::move(s));
}

AppConfig load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void apply_overrides(AppConfig& cfg, std::span<const std::string> assignments) {
  Staging s;
  s.cfg = cfg;
  for (const auto& a : assignments) {
    const std::string_view assignment(a);
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
      throw ConfigError("override '" + a + "' must look like section.key=value");
    }
    const std::string section = trim(assignment.substr(0, dot));
    const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
    assign(s, section, key, std::string(assignment.substr(eq + 1)), "override");
  }
  cfg = finalize(std::move(s));
}

void apply_override(AppConfig& cfg, std::string_view assignment) {
  const std::string one(assignment);
  apply_overrides(cfg, std::span<const std::string>(&one, 1));
}

std::optional<std::filesystem::path> env_config_path() {
  const char* v = std::getenv("KHECTL_CONFIG");
  if (!v || !*v) return std::nullopt;
  return std::filesystem::path(v);
}

sim::AttackSpec parse_attack_target(std::string_view text) {
  const std::string s = trim(text);
  const auto colon = s.find(':');
  const std::string kind = s.substr(0, colon);
  if (colon == std::string::npos) {
    throw ConfigError("attack target '" + s + "' must be param:i,j,theta or signal:j,theta");
  }
  const auto parts = split(std::string_view(s).substr(colon + 1), ',');
  const auto idx = [&](std::size_t k) {
    return static_cast<std::size_t>(to_unsigned(parts[k], "attack target index"));
  };
  sim::AttackSpec spec;
  if (kind == "param" && parts.size() == 3) {
    spec.target = sim::ParameterTarget{idx(0), idx(1), static_cast<int>(idx(2))};
  } else if (kind == "signal" && parts.size() == 2) {
    spec.target = sim::SignalTarget{idx(0), static_cast<int>(idx(1))};
  } else {
    throw ConfigError("attack target '" + s + "' must be param:i,j,theta or signal:j,theta");
  }
  return spec;
}

std::pair<double, double> parse_window(std::string_view text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2) throw ConfigError("window '" + trim(text) + "' must be start:end");
  const double a = to_real(parts[0], "window start");
  const double b = to_real(parts[1], "window end");
  if (!(a >= 0 && b > a)) throw ConfigError("window '" + trim(text) + "' needs 0 <= start < end");
  return {a, b};
}

sim::ReferenceSchedule parse_schedule(std::string_view text) {
  sim::ReferenceSchedule out;
  for (const auto& item : split(text, ',')) {
    const auto tv = split(item, ':');
    if (tv.size() != 2) throw ConfigError("reference entry '" + item + "' must be time:value");
    const double t = to_real(tv[0], "reference time");
    if (!out.breakpoints.empty() && t <= out.breakpoints.back().first) {
      throw ConfigError("reference times must increase");
    }
    out.breakpoints.emplace_back(t, to_real(tv[1], "reference value"));
  }
  return out;
}

std::string dump(const AppConfig& cfg) {
  std::ostringstream os;
  const auto plant = cfg.plant();
  os << "[plant]\n";
  if (cfg.plant_spec.k) {
    os << "k = " << fmt(*cfg.plant_spec.k) << "\na = " << fmt(*cfg.plant_spec.a) << "\n";
  } else {
    os << "A = " << fmt_matrix(plant.A) << "\nB = " << fmt_matrix(plant.B)
       << "\nC = " << fmt_matrix(plant.C) << "\n";
  }
  os << "Ts = " << fmt(plant.sample_period) << "\n\n";
  const auto& g = cfg.gains;
  os << "[gains]\nKp = " << fmt(g.kp) << "\nKi = " << fmt(g.ki) << "\nKd = " << fmt(g.kd)
     << "\nLx1 = " << fmt(g.lx[0]) << "\nLx2 = " << fmt(g.lx[1]) << "\nLd = " << fmt(g.ld)
     << "\n\n";
  os << "[codec]\ngamma_phi = " << fmt(cfg.sim.gains.phi) << "\ngamma_xi = " << fmt(cfg.sim.gains.xi)
     << "\nsignal_range = " << fmt(cfg.sim.signal_range) << "\n\n";
  os << "[crypto]\nbits = " << cfg.bits << "\n\n";
  const auto& s = cfg.sim;
  os << "[sim]\nmode = "
     << (s.mode == sim::Mode::Plaintext ? "plain"
                                         : s.mode == sim::Mode::Quantized ? "quantized" : "encrypted")
     << "\ncontroller = " << (cfg.controller == control::ControllerKind::DobPid ? "dob" : "pid")
     << "\nsteps = " << s.steps << "\nreference = ";
  for (std::size_t k = 0; k < s.reference.breakpoints.size(); ++k) {
    os << (k ? ", " : "") << fmt(s.reference.breakpoints[k].first) << ":"
       << fmt(s.reference.breakpoints[k].second);
  }
  os << "\ndisturbance = " << fmt(s.disturbance)
     << "\ndisturbance_start_s = " << fmt(static_cast<double>(s.disturbance_start) * plant.sample_period)
     << "\nseed = " << (s.seed ? std::to_string(*s.seed) : "random")
     << "\ndivergence_bound = " << (s.divergence_bound ? fmt(*s.divergence_bound) : "none")
     << "\nthreads = " << s.threads
     << "\ntransport = " << (s.transport == sim::Transport::SocketPair ? "socket" : "inproc")
     << "\n\n[attack]\n";
  if (s.attack) {
    const auto& a = *s.attack;
    if (const auto* p = std::get_if<sim::ParameterTarget>(&a.target)) {
      os << "target = param:" << p->i << "," << p->j << "," << p->theta << "\n";
    } else {
      const auto& t = std::get<sim::SignalTarget>(a.target);
      os << "target = signal:" << t.j << "," << t.theta << "\n";
    }
    os << "lambda = " << a.lambda << "\nwindow_s = "
       << fmt(static_cast<double>(a.start) * plant.sample_period) << ":"
       << fmt(static_cast<double>(a.end) * plant.sample_period) << "\n";
  } else {
    os << "target = none\n";
  }
  os << "ignore_detection = " << (s.ignore_detection ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace khectl::config
