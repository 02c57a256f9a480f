#pragma once

#include "tsrisk/case.hpp"
#include "tsrisk/case_io.hpp"

namespace tsrisk::test {

inline const PowerSystemCase& ieee39() {
  static const PowerSystemCase c = load_case(TSRISK_TEST_CASE);
  return c;
}

/// Two buses joined by one line; bus 1 is the slack.
inline PowerSystemCase two_bus(double r, double x) {
  PowerSystemCase c;
  c.name = "two-bus";
  Bus b1;
  b1.id = 1;
  b1.kind = BusKind::Slack;
  Bus b2;
  b2.id = 2;
  c.buses = {b1, b2};
  Branch br;
  br.id = 1;
  br.from_bus = 1;
  br.to_bus = 2;
  br.r = r;
  br.x = x;
  c.branches = {br};
  c.reindex();
  return c;
}

}  // namespace tsrisk::test
