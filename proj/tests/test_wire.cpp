#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "khectl/control.hpp"
#include "khectl/errors.hpp"
#include "khectl/transport.hpp"
#include "khectl/wire.hpp"

using namespace khectl;

namespace {

const khe::KeyTriple& keys() {
  static const khe::KeyTriple k = [] {
    auto rng = RandomSource::seeded(71);
    return khe::gen(120, rng);
  }();
  return k;
}

}  // namespace

TEST(Hex, FixedWidthStrict) {
  EXPECT_EQ(wire::to_hex(BigInt(255), 3), "0000ff");
  EXPECT_EQ(wire::from_hex("0000ff", 3), 255);
  EXPECT_THROW(wire::from_hex("00ff", 3), FormatError);
  EXPECT_THROW(wire::from_hex("0000fg", 3), FormatError);
  EXPECT_THROW(wire::from_hex("0000FF", 3), FormatError);
}

TEST(Ciphertext, Roundtrip) {
  auto rng = RandomSource::seeded(72);
  const auto& gp = keys().pk.group;
  const auto c = khe::enc(keys().pk, sample_group_element(gp, rng), rng);
  const auto text = wire::encode_ciphertext(gp, c);
  EXPECT_EQ(text.size(), 4 * (2 * gp.element_bytes() + 1) + 64);
  EXPECT_EQ(wire::decode_ciphertext(gp, text), c);
  EXPECT_THROW(wire::decode_ciphertext(gp, text.substr(0, text.size() - 2)), FormatError);
}

TEST(Ciphertext, ComponentsMustBeUnitsModP) {
  const auto gp = GroupParams::from_safe_prime(23);
  const std::string eta(64, '0');
  EXPECT_NO_THROW(wire::decode_ciphertext(gp, "02 03 04 06 " + eta));
  EXPECT_NO_THROW(wire::decode_ciphertext(gp, "05 03 04 06 " + eta));
  EXPECT_THROW(wire::decode_ciphertext(gp, "17 03 04 06 " + eta), FormatError);
  EXPECT_THROW(wire::decode_ciphertext(gp, "02 00 04 06 " + eta), FormatError);
}

TEST(KeyFile, RoundtripAndSplit) {
  const auto text = wire::write_key_file(keys());
  const auto kf = wire::read_key_file(text);
  EXPECT_EQ(kf.pk, keys().pk);
  EXPECT_EQ(kf.skd, keys().skd);
  EXPECT_EQ(kf.skh, keys().skh);

  const auto plant = wire::read_key_file(wire::write_key_file(keys(), wire::KeyParts::Plant));
  EXPECT_TRUE(plant.skd);
  EXPECT_FALSE(plant.skh);
  EXPECT_THROW(plant.triple(), FormatError);
  const auto ctl = wire::read_key_file(wire::write_key_file(keys(), wire::KeyParts::Controller));
  EXPECT_FALSE(ctl.skd);
  EXPECT_TRUE(ctl.skh);
}

TEST(KeyFile, Validation) {
  auto text = wire::write_key_file(keys());
  EXPECT_THROW(wire::read_key_file("{"), FormatError);
  EXPECT_THROW(wire::read_key_file("{\"format\": \"other\"}"), FormatError);
  auto j = nlohmann::json::parse(text);
  j["skh"]["k_tilde00"] = "dec:5";
  EXPECT_THROW(wire::read_key_file(j.dump()), FormatError);
  j = nlohmann::json::parse(text);
  j["p"] = "0x" + j["p"].get<std::string>();
  EXPECT_NO_THROW(wire::read_key_file(j.dump()));
  j["p"] = "dec:29";
  EXPECT_THROW(wire::read_key_file(j.dump()), FormatError);
}

TEST(KeyFile, Fingerprints) {
  const auto a = wire::fingerprint(keys().pk);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(a, wire::fingerprint(keys().pk));
  EXPECT_NE(a, wire::fingerprint(keys().pk, keys().skh));
}

TEST(Messages, RoundtripAllKinds) {
  auto rng = RandomSource::seeded(73);
  const auto& pk = keys().pk;
  const auto& gp = pk.group;
  const auto phi = control::assemble_dob_pid(control::reference_plant(), control::reference_gains()).phi;
  auto params = encctrl::encrypt_parameters(pk, phi, {}, rng, 10);
  const auto back = wire::decode_params_message(gp, wire::encode_params_message(gp, params));
  EXPECT_EQ(back.cells, params.cells);
  EXPECT_EQ(back.rows, 6u);
  EXPECT_EQ(back.gains.phi, 1e15);

  const Vector xi{0, 0, 0, 0, 0, 0.05, 0.01};
  const auto state = encctrl::encrypt_state(pk, xi, {}, rng);
  const auto [t, s2] = wire::decode_state_message(gp, wire::encode_state_message(gp, 42, state));
  EXPECT_EQ(t, 42u);
  EXPECT_EQ(s2.cells, state.cells);

  params.at(6, 1, 2) = khe::tamper(gp, params.at(6, 1, 2), 12);
  const auto out = encctrl::eval_grid(pk, keys().skh, params, state, rng, {1, true});
  const auto msg = wire::encode_outcome_message(gp, 7, out);
  EXPECT_EQ(wire::message_kind(msg), "OUTCOME");
  const auto [t2, o2] = wire::decode_outcome_message(gp, msg);
  EXPECT_EQ(t2, 7u);
  EXPECT_EQ(o2.cells, out.cells);
  EXPECT_EQ(o2.detected, out.detected);
  EXPECT_EQ(o2.unchecked, out.unchecked);
  EXPECT_THROW(wire::decode_state_message(gp, "STATE 1 7\n"), FormatError);
}

TEST(Framing, SplitsAndCaps) {
  std::string buf = wire::frame("hello") + wire::frame("") + wire::frame("x");
  buf.pop_back();
  EXPECT_EQ(wire::unframe(buf), "hello");
  EXPECT_EQ(wire::unframe(buf), "");
  EXPECT_FALSE(wire::unframe(buf));
  buf += "x";
  EXPECT_EQ(wire::unframe(buf), "x");
  std::string huge("\xff\xff\xff\x7f", 4);
  EXPECT_THROW(wire::unframe(huge), FormatError);
}

TEST(Transport, SocketPairCarriesFrames) {
  auto [a, b] = transport::socket_pair();
  a->send("PARAMS 1 1 1 1");
  a->send(std::string(100000, 'z'));
  EXPECT_EQ(b->receive(), "PARAMS 1 1 1 1");
  EXPECT_EQ(b->receive().size(), 100000u);
}

TEST(GridDump, Layout) {
  auto rng = RandomSource::seeded(74);
  const auto& pk = keys().pk;
  const auto phi = control::assemble_dob_pid(control::reference_plant(), control::reference_gains()).phi;
  auto params = encctrl::encrypt_parameters(pk, phi, {}, rng, 10);
  params.at(5, 5, 2) = khe::tamper(pk.group, params.at(5, 5, 2), 2);
  const auto out = encctrl::eval_grid(pk, keys().skh, params,
                                      encctrl::encrypt_state(pk, Vector(7, 0.0), {}, rng), rng);
  std::ostringstream os;
  wire::write_grid_dump_header(os);
  wire::write_grid_dump(os, pk.group, 3, out);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,i,j,theta,status,x0,x1,epsilon,pi_hat,eta");
  int rows = 0, bots = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (line.rfind("3,5,5,2,bot,", 0) == 0) ++bots;
  }
  EXPECT_EQ(rows, 84);
  EXPECT_EQ(bots, 1);
}
