#pragma once

// Text wire forms for keys, ciphertexts and the per-step messages exchanged
// between the plant node and the controller node. Formats are described in
// docs/formats.md.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "khectl/encctrl.hpp"
#include "khectl/khe.hpp"

namespace khectl::wire {

/// Lowercase, zero-padded to exactly `width_bytes` bytes.
std::string to_hex(const BigInt& v, std::size_t width_bytes);
/// Strict: exactly 2*width_bytes hex digits. Throws FormatError.
BigInt from_hex(std::string_view text, std::size_t width_bytes);

/// "x0 x1 epsilon pi_hat eta", group elements ceil(bits/8) bytes wide,
/// eta 32 bytes.
std::string encode_ciphertext(const GroupParams& gp, const khe::Ciphertext& c);
khe::Ciphertext decode_ciphertext(const GroupParams& gp, std::string_view text);

// ---- key files ----------------------------------------------------------

struct KeyFile {
  khe::PublicKey pk;
  std::optional<khe::DecryptionKey> skd;
  std::optional<khe::HomomorphicKey> skh;

  khe::KeyTriple triple() const;  // throws FormatError if a part is missing
};

enum class KeyParts { All, Plant, Controller };

std::string write_key_file(const khe::KeyTriple& keys, KeyParts parts = KeyParts::All);
/// Parses and validates: p must be a safe prime, every public element must
/// lie in the group and every secret part must match the public key.
KeyFile read_key_file(std::string_view json_text);

void save_keys(const std::filesystem::path& path, const khe::KeyTriple& keys,
               KeyParts parts = KeyParts::All);
KeyFile load_keys(const std::filesystem::path& path);

/// First 8 bytes of SHA-256 over the canonical public-key encoding, in hex.
std::string fingerprint(const khe::PublicKey& pk);
std::string fingerprint(const khe::PublicKey& pk, const khe::HomomorphicKey& skh);

// ---- node messages ------------------------------------------------------

std::string encode_params_message(const GroupParams& gp, const encctrl::EncryptedParameters& p);
encctrl::EncryptedParameters decode_params_message(const GroupParams& gp, std::string_view text);

std::string encode_state_message(const GroupParams& gp, std::size_t t,
                                 const encctrl::EncryptedState& s);
std::pair<std::size_t, encctrl::EncryptedState> decode_state_message(const GroupParams& gp,
                                                                     std::string_view text);

std::string encode_outcome_message(const GroupParams& gp, std::size_t t,
                                   const encctrl::EvalOutcome& e);
std::pair<std::size_t, encctrl::EvalOutcome> decode_outcome_message(const GroupParams& gp,
                                                                   std::string_view text);

inline constexpr std::string_view kByeMessage = "BYE";

/// First whitespace-delimited token of a message.
std::string_view message_kind(std::string_view text);

// ---- framing ------------------------------------------------------------

inline constexpr std::size_t kMaxFrameBytes = 64u << 20;

/// 4-byte little-endian length prefix followed by the payload.
std::string frame(std::string_view payload);
/// Removes and returns one complete payload from the front of `buffer`, or
/// nullopt if more bytes are needed. Throws FormatError on oversize frames.
std::optional<std::string> unframe(std::string& buffer);

// ---- ciphertext grid dump -----------------------------------------------

void write_grid_dump_header(std::ostream& os);
/// One line per cell: t,i,j,theta,status,x0,x1,epsilon,pi_hat,eta where
/// status is "ok" or "bot" (hex fields empty for bot).
void write_grid_dump(std::ostream& os, const GroupParams& gp, std::size_t t,
                     const encctrl::EvalOutcome& e);

}  // namespace khectl::wire
