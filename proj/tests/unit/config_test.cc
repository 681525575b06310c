#include <gtest/gtest.h>

#include "primematch/config.h"

using namespace primematch;

namespace {

std::string error_of(const std::string& json) {
  try {
    validate_config(parse_config_json(json));
  } catch (const ParameterError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, Defaults) {
  Config c = parse_config_json("{}");
  EXPECT_EQ(c.n, 31u);
  EXPECT_EQ(c.mode, SecurityMode::Malicious);
  EXPECT_NO_THROW(validate_config(c));
}

TEST(Config, ParsesEveryField) {
  Config c = parse_config_json(R"({"group":"ristretto255","functionality":"queue","mode":"semi-honest","n":15,
    "symbols":["A","B"],"seed":"ab01","auction":4,"listen":"0.0.0.0:9000","connect":"10.0.0.1:9000","id":7,
    "timeout_ms":500,"registration_window_ms":900,"expected_clients":5,"psk":"00ff","metrics_port":9100,
    "rounds":2,"interval_ms":10,"max_frame":65536})");
  EXPECT_EQ(c.functionality, Functionality::Queue);
  EXPECT_EQ(c.mode, SecurityMode::SemiHonest);
  EXPECT_EQ(c.n, 15u);
  EXPECT_EQ(c.symbols, (std::vector<std::string>{"A", "B"}));
  ASSERT_TRUE(c.seed);
  EXPECT_EQ((*c.seed)[0], 0xab);
  EXPECT_EQ((*c.seed)[1], 0x01);
  EXPECT_EQ((*c.seed)[2], 0x00);
  EXPECT_EQ(c.id, 7u);
  EXPECT_EQ(c.psk, (Bytes{0x00, 0xff}));
  EXPECT_EQ(c.metrics_port, 9100);
  EXPECT_NO_THROW(validate_config(c));
  auto p = auction_params(c);
  EXPECT_EQ(p.universe.size(), 2u);
  EXPECT_EQ(p.auction, 4u);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(error_of(R"({"n": 16})").find("config field 'n'"), std::string::npos);
  EXPECT_NE(error_of(R"({"n": 127})").find("config field 'n'"), std::string::npos);
  EXPECT_NE(error_of(R"({"n": -1})").find("config field 'n'"), std::string::npos);
  EXPECT_NE(error_of(R"({"mode": "paranoid"})").find("config field 'mode'"), std::string::npos);
  EXPECT_NE(error_of(R"({"functionality": 3})").find("config field 'functionality'"), std::string::npos);
  EXPECT_NE(error_of(R"({"seed": "xyz1"})").find("config field 'seed'"), std::string::npos);
  EXPECT_NE(error_of(R"({"listen": "nohost"})").find("config field 'listen'"), std::string::npos);
  EXPECT_NE(error_of(R"({"timeout_ms": 0})").find("config field 'timeout_ms'"), std::string::npos);
  EXPECT_NE(error_of(R"({"group": "p256"})").find("config field 'group'"), std::string::npos);
  EXPECT_NE(error_of(R"({"id": 0})").find("config field 'id'"), std::string::npos);
  EXPECT_NE(error_of(R"({"colour": 1})").find("config field 'colour'"), std::string::npos);
  EXPECT_NE(error_of(R"({"functionality":"range-c2c","mode":"malicious"})").find("config field 'mode'"),
            std::string::npos);
  EXPECT_NE(error_of("[1]").find("JSON object"), std::string::npos);
  EXPECT_NE(error_of("{").find("not valid JSON"), std::string::npos);
}

TEST(Config, WidthsOfTheRightShape) {
  for (unsigned n : {1u, 3u, 7u, 15u, 31u, 63u}) {
    Config c;
    c.n = n;
    EXPECT_NO_THROW(validate_config(c)) << n;
  }
  for (unsigned n : {0u, 2u, 8u, 30u, 32u, 64u}) {
    Config c;
    c.n = n;
    EXPECT_THROW(validate_config(c), ParameterError) << n;
  }
}

TEST(Config, Addresses) {
  EXPECT_EQ(parse_address("127.0.0.1:80"), (std::pair<std::string, uint16_t>{"127.0.0.1", 80}));
  EXPECT_THROW(parse_address("host:99999"), ParameterError);
  EXPECT_THROW(parse_address(":1"), ParameterError);
}
