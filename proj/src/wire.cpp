#include "khectl/wire.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "khectl/errors.hpp"

namespace khectl::wire {

namespace {

using nlohmann::json;

constexpr std::string_view kKeyFormat = "khectl-keys/1";
constexpr char kHexDigits[] = "0123456789abcdef";

std::vector<std::string_view> split_ws(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != '\r') ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

std::size_t parse_count(std::string_view tok, const char* what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw FormatError(std::string("bad ") + what + ": '" + std::string(tok) + "'");
  }
  return v;
}

double parse_real(std::string_view tok, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw FormatError(std::string("bad ") + what + ": '" + std::string(tok) + "'");
  }
  return v;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void expect_header(const std::vector<std::string_view>& head, std::string_view kind,
                   std::size_t fields) {
  if (head.empty() || head[0] != kind || head.size() != fields) {
    throw FormatError("expected a " + std::string(kind) + " header with " +
                      std::to_string(fields - 1) + " fields");
  }
}

std::string digest_hex(std::span<const std::uint8_t> bytes) {
  std::string out;
  for (auto b : bytes) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0xf]);
  }
  return out;
}

// Integers travel as JSON strings: bare lowercase hex on write; an optional
// 0x prefix, or a dec: prefix for decimal, is accepted on read.
std::string big_to_json(const BigInt& v) { return v.get_str(16); }

BigInt big_from_json(const json& obj, const char* key) {
  if (!obj.contains(key)) throw FormatError(std::string("key file: missing field '") + key + "'");
  const auto& node = obj.at(key);
  if (!node.is_string()) {
    throw FormatError(std::string("key file: field '") + key + "' must be a string");
  }
  std::string s = node.get<std::string>();
  int base = 16;
  if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0) {
    s = s.substr(2);
  } else if (s.rfind("dec:", 0) == 0) {
    s = s.substr(4);
    base = 10;
  }
  BigInt v;
  if (s.empty() || v.set_str(s, base) != 0 || v < 0) {
    throw FormatError(std::string("key file: field '") + key + "' is not a valid integer");
  }
  return v;
}

std::string sha256_prefix(const std::string& canonical) {
  std::uint8_t md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_Digest(canonical.data(), canonical.size(), md, &len, EVP_sha256(), nullptr);
  return digest_hex(std::span<const std::uint8_t>(md, 8));
}

}  // namespace

std::string to_hex(const BigInt& v, std::size_t width_bytes) {
  return digest_hex(khe::fixed_width_bytes(v, width_bytes));
}

BigInt from_hex(std::string_view text, std::size_t width_bytes) {
  if (text.size() != 2 * width_bytes) {
    throw FormatError("hex field has " + std::to_string(text.size()) + " digits, expected " +
                      std::to_string(2 * width_bytes));
  }
  for (char ch : text) {
    if (!((ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f'))) {
      throw FormatError("hex field contains '" + std::string(1, ch) + "'");
    }
  }
  BigInt v;
  v.set_str(std::string(text), 16);
  return v;
}

std::string encode_ciphertext(const GroupParams& gp, const khe::Ciphertext& c) {
  const std::size_t w = gp.element_bytes();
  std::string out;
  out.reserve(8 * w + 68);
  out += to_hex(c.x0, w);
  out += ' ';
  out += to_hex(c.x1, w);
  out += ' ';
  out += to_hex(c.epsilon, w);
  out += ' ';
  out += to_hex(c.pi_hat, w);
  out += ' ';
  out += digest_hex(c.eta);
  return out;
}

khe::Ciphertext decode_ciphertext(const GroupParams& gp, std::string_view text) {
  const auto f = split_ws(text);
  if (f.size() != 5) {
    throw FormatError("ciphertext needs 5 fields, got " + std::to_string(f.size()));
  }
  const std::size_t w = gp.element_bytes();
  khe::Ciphertext c;
  c.x0 = from_hex(f[0], w);
  c.x1 = from_hex(f[1], w);
  c.epsilon = from_hex(f[2], w);
  c.pi_hat = from_hex(f[3], w);
  // membership is left to Dec/Eval so that falsified cells surface as detections
  for (const BigInt* v : {&c.x0, &c.x1, &c.epsilon, &c.pi_hat}) {
    if (*v < 1 || *v >= gp.p) throw FormatError("ciphertext component outside [1, p)");
  }
  const BigInt eta = from_hex(f[4], c.eta.size());
  const auto bytes = khe::fixed_width_bytes(eta, c.eta.size());
  std::copy(bytes.begin(), bytes.end(), c.eta.begin());
  return c;
}

// ---- keys -----------------------------------------------------------------

khe::KeyTriple KeyFile::triple() const {
  if (!skd || !skh) throw FormatError("key file lacks the decryption or homomorphic key");
  return khe::KeyTriple{pk, *skd, *skh};
}

std::string write_key_file(const khe::KeyTriple& keys, KeyParts parts) {
  const auto& gp = keys.pk.group;
  json j;
  j["format"] = kKeyFormat;
  j["bits"] = gp.bits;
  j["p"] = big_to_json(gp.p);
  j["pk"] = {{"g0", big_to_json(keys.pk.g0)},
             {"g1", big_to_json(keys.pk.g1)},
             {"s", big_to_json(keys.pk.s)},
             {"s_hat", big_to_json(keys.pk.s_hat)},
             {"s_tilde0", big_to_json(keys.pk.s_tilde0)},
             {"s_tilde1", big_to_json(keys.pk.s_tilde1)}};
  const json skh = {{"k_tilde00", big_to_json(keys.skh.k_tilde00)},
                    {"k_tilde01", big_to_json(keys.skh.k_tilde01)},
                    {"k_tilde10", big_to_json(keys.skh.k_tilde10)},
                    {"k_tilde11", big_to_json(keys.skh.k_tilde11)}};
  if (parts != KeyParts::Controller) {
    j["skd"] = {{"k0", big_to_json(keys.skd.k0)},
                {"k1", big_to_json(keys.skd.k1)},
                {"k_hat0", big_to_json(keys.skd.k_hat0)},
                {"k_hat1", big_to_json(keys.skd.k_hat1)},
                {"tilde", skh}};
  }
  if (parts != KeyParts::Plant) j["skh"] = skh;
  return j.dump(2) + "\n";
}

KeyFile read_key_file(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("key file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", std::string{}) != kKeyFormat) {
    throw FormatError("key file: expected format '" + std::string(kKeyFormat) + "'");
  }
  const BigInt p = big_from_json(j, "p");
  GroupParams gp;
  try {
    gp = GroupParams::from_safe_prime(p);
  } catch (const std::exception& e) {
    throw FormatError(std::string("key file: ") + e.what());
  }
  if (j.contains("bits") && j.at("bits").get<unsigned>() != gp.bits) {
    throw FormatError("key file: 'bits' does not match p");
  }

  if (!j.contains("pk")) throw FormatError("key file: missing 'pk'");
  const json& jp = j.at("pk");
  KeyFile kf;
  kf.pk = khe::PublicKey{gp,
                         big_from_json(jp, "g0"),
                         big_from_json(jp, "g1"),
                         big_from_json(jp, "s"),
                         big_from_json(jp, "s_hat"),
                         big_from_json(jp, "s_tilde0"),
                         big_from_json(jp, "s_tilde1")};
  for (const BigInt* v : {&kf.pk.g0, &kf.pk.g1, &kf.pk.s, &kf.pk.s_hat, &kf.pk.s_tilde0,
                          &kf.pk.s_tilde1}) {
    if (!in_group(gp, *v)) throw FormatError("key file: public element outside the group");
  }
  if (kf.pk.g0 == 1 || kf.pk.g1 == 1) throw FormatError("key file: degenerate generator");

  const auto read_tilde = [&](const json& node) {
    khe::HomomorphicKey h{gp, big_from_json(node, "k_tilde00"), big_from_json(node, "k_tilde01"),
                          big_from_json(node, "k_tilde10"), big_from_json(node, "k_tilde11")};
    return h;
  };
  if (j.contains("skd")) {
    const json& jd = j.at("skd");
    if (!jd.contains("tilde")) throw FormatError("key file: missing 'skd.tilde'");
    kf.skd = khe::DecryptionKey{gp,
                                big_from_json(jd, "k0"),
                                big_from_json(jd, "k1"),
                                big_from_json(jd, "k_hat0"),
                                big_from_json(jd, "k_hat1"),
                                read_tilde(jd.at("tilde"))};
    if (!khe::keys_consistent(kf.pk, *kf.skd)) {
      throw FormatError("key file: decryption key does not match the public key");
    }
  }
  if (j.contains("skh")) {
    kf.skh = read_tilde(j.at("skh"));
    if (!khe::keys_consistent(kf.pk, *kf.skh)) {
      throw FormatError("key file: homomorphic key does not match the public key");
    }
  }
  return kf;
}

void save_keys(const std::filesystem::path& path, const khe::KeyTriple& keys, KeyParts parts) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << write_key_file(keys, parts);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

KeyFile load_keys(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open key file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return read_key_file(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string fingerprint(const khe::PublicKey& pk) {
  const std::size_t w = pk.group.element_bytes();
  std::string canon = to_hex(pk.group.p, w);
  for (const BigInt* v : {&pk.g0, &pk.g1, &pk.s, &pk.s_hat, &pk.s_tilde0, &pk.s_tilde1}) {
    canon += to_hex(*v, w);
  }
  return sha256_prefix(canon);
}

std::string fingerprint(const khe::PublicKey& pk, const khe::HomomorphicKey& skh) {
  const std::size_t w = pk.group.element_bytes();
  std::string canon = "skh" + fingerprint(pk);
  for (const BigInt* v : {&skh.k_tilde00, &skh.k_tilde01, &skh.k_tilde10, &skh.k_tilde11}) {
    canon += to_hex(*v, w);
  }
  return sha256_prefix(canon);
}

// ---- messages -----------------------------------------------------------

std::string_view message_kind(std::string_view text) {
  const auto end = text.find_first_of(" \n");
  return text.substr(0, end);
}

std::string encode_params_message(const GroupParams& gp, const encctrl::EncryptedParameters& p) {
  std::string out = "PARAMS " + std::to_string(p.rows) + " " + std::to_string(p.cols) + " " +
                    format_real(p.gains.phi) + " " + format_real(p.gains.xi) + "\n";
  for (const auto& c : p.cells) out += encode_ciphertext(gp, c) + "\n";
  return out;
}

encctrl::EncryptedParameters decode_params_message(const GroupParams& gp, std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError("empty PARAMS message");
  const auto head = split_ws(lines[0]);
  expect_header(head, "PARAMS", 5);
  encctrl::EncryptedParameters p;
  p.rows = parse_count(head[1], "row count");
  p.cols = parse_count(head[2], "column count");
  p.gains.phi = parse_real(head[3], "gamma_phi");
  p.gains.xi = parse_real(head[4], "gamma_xi");
  if (lines.size() != 1 + p.rows * p.cols * 2) {
    throw FormatError("PARAMS message has " + std::to_string(lines.size() - 1) +
                      " cells, expected " + std::to_string(p.rows * p.cols * 2));
  }
  for (std::size_t k = 1; k < lines.size(); ++k) p.cells.push_back(decode_ciphertext(gp, lines[k]));
  return p;
}

std::string encode_state_message(const GroupParams& gp, std::size_t t,
                                 const encctrl::EncryptedState& s) {
  std::string out = "STATE " + std::to_string(t) + " " + std::to_string(s.cols) + "\n";
  for (const auto& c : s.cells) out += encode_ciphertext(gp, c) + "\n";
  return out;
}

std::pair<std::size_t, encctrl::EncryptedState> decode_state_message(const GroupParams& gp,
                                                                     std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError("empty STATE message");
  const auto head = split_ws(lines[0]);
  expect_header(head, "STATE", 3);
  const std::size_t t = parse_count(head[1], "step");
  encctrl::EncryptedState s;
  s.cols = parse_count(head[2], "column count");
  if (lines.size() != 1 + s.cols * 2) throw FormatError("STATE message has the wrong cell count");
  for (std::size_t k = 1; k < lines.size(); ++k) s.cells.push_back(decode_ciphertext(gp, lines[k]));
  return {t, std::move(s)};
}

std::string encode_outcome_message(const GroupParams& gp, std::size_t t,
                                   const encctrl::EvalOutcome& e) {
  const bool with_unchecked = !e.unchecked.empty();
  std::string out = "OUTCOME " + std::to_string(t) + " " + std::to_string(e.rows) + " " +
                    std::to_string(e.cols) + " " + (with_unchecked ? "1" : "0") + "\n";
  for (std::size_t k = 0; k < e.cells.size(); ++k) {
    if (e.cells[k]) {
      out += encode_ciphertext(gp, *e.cells[k]);
    } else {
      out += "bot";
      if (with_unchecked && e.unchecked[k]) out += " " + encode_ciphertext(gp, *e.unchecked[k]);
    }
    out += "\n";
  }
  return out;
}

std::pair<std::size_t, encctrl::EvalOutcome> decode_outcome_message(const GroupParams& gp,
                                                                   std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError("empty OUTCOME message");
  const auto head = split_ws(lines[0]);
  expect_header(head, "OUTCOME", 5);
  const std::size_t t = parse_count(head[1], "step");
  encctrl::EvalOutcome e;
  e.rows = parse_count(head[2], "row count");
  e.cols = parse_count(head[3], "column count");
  const bool with_unchecked = head[4] == "1";
  const std::size_t n = e.rows * e.cols * 2;
  if (lines.size() != 1 + n) throw FormatError("OUTCOME message has the wrong cell count");
  e.cells.resize(n);
  if (with_unchecked) e.unchecked.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::string_view line = lines[k + 1];
    if (line.substr(0, 3) == "bot") {
      const auto rest = line.substr(3);
      if (with_unchecked && !split_ws(rest).empty()) {
        e.unchecked[k] = decode_ciphertext(gp, rest);
      }
      e.detected.push_back(encctrl::CellIndex{k / 2 / e.cols + 1, (k / 2) % e.cols + 1,
                                              static_cast<int>(k % 2) + 1});
    } else {
      e.cells[k] = decode_ciphertext(gp, line);
    }
  }
  return {t, std::move(e)};
}

// ---- framing ------------------------------------------------------------

std::string frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw FormatError("message exceeds the frame limit");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((n >> (8 * b)) & 0xff));
  out.append(payload);
  return out;
}

std::optional<std::string> unframe(std::string& buffer) {
  if (buffer.size() < 4) return std::nullopt;
  std::uint32_t n = 0;
  for (int b = 0; b < 4; ++b) {
    n |= static_cast<std::uint32_t>(static_cast<unsigned char>(buffer[b])) << (8 * b);
  }
  if (n > kMaxFrameBytes) throw FormatError("incoming frame of " + std::to_string(n) + " bytes");
  if (buffer.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string payload = buffer.substr(4, n);
  buffer.erase(0, 4 + static_cast<std::size_t>(n));
  return payload;
}

// ---- dump ---------------------------------------------------------------

void write_grid_dump_header(std::ostream& os) {
  os << "t,i,j,theta,status,x0,x1,epsilon,pi_hat,eta\n";
}

void write_grid_dump(std::ostream& os, const GroupParams& gp, std::size_t t,
                     const encctrl::EvalOutcome& e) {
  for (std::size_t i = 1; i <= e.rows; ++i) {
    for (std::size_t j = 1; j <= e.cols; ++j) {
      for (int theta = 1; theta <= 2; ++theta) {
        const auto& cell = e.cells[e.flat(i, j, theta)];
        os << t << ',' << i << ',' << j << ',' << theta << ',';
        if (!cell) {
          os << "bot,,,,,\n";
          continue;
        }
        std::string fields = encode_ciphertext(gp, *cell);
        std::replace(fields.begin(), fields.end(), ' ', ',');
        os << "ok," << fields << '\n';
      }
    }
  }
}

}  // namespace khectl::wire
