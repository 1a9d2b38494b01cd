#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mdc/network.hpp"
#include "mdc/network_io.hpp"

namespace mdc {

// readable gtest failure output
inline void PrintTo(DataflowNetwork const& n, std::ostream* os) { *os << serialize_network(n, NetworkFormat::json); }

} // namespace mdc

namespace testing_helpers {

inline mdc::Actor unary(std::string name, std::string type, int width = 8) {
  mdc::Actor a;
  a.instance = std::move(name);
  a.type = std::move(type);
  a.ports = {{"i", mdc::Direction::in, width, false}, {"o", mdc::Direction::out, width, false}};
  return a;
}

/// Builder for small hand-written networks of unary actors.
struct NetBuilder {
  mdc::DataflowNetwork net;

  explicit NetBuilder(std::string name) { net.name = std::move(name); }

  NetBuilder& in(std::string port, int width = 8) {
    net.ports.push_back({std::move(port), mdc::Direction::in, width, false});
    return *this;
  }
  NetBuilder& out(std::string port, int width = 8) {
    net.ports.push_back({std::move(port), mdc::Direction::out, width, false});
    return *this;
  }
  NetBuilder& actor(std::string name, std::string type, int width = 8) {
    net.actors.push_back(unary(std::move(name), std::move(type), width));
    return *this;
  }
  NetBuilder& actor(mdc::Actor a) {
    net.actors.push_back(std::move(a));
    return *this;
  }
  /// "X" means X.o as a source / X.i as a sink; a bare port name is used when
  /// no actor of that name exists; "X.p" is explicit.
  NetBuilder& wire(std::string const& from, std::string const& to, unsigned depth = 1) {
    net.channels.push_back({endpoint(from, true), endpoint(to, false), depth});
    return *this;
  }
  /// Chain of wires through the given elements.
  NetBuilder& path(std::vector<std::string> const& elems, unsigned depth = 1) {
    for (std::size_t i = 0; i + 1 < elems.size(); ++i) {
      wire(elems[i], elems[i + 1], depth);
    }
    return *this;
  }

  mdc::DataflowNetwork build() const { return net; }

private:
  mdc::Endpoint endpoint(std::string const& s, bool source) const {
    if (s.find('.') != std::string::npos) {
      return mdc::parse_endpoint(s);
    }
    if (net.find_actor(s)) {
      return {s, source ? "o" : "i"};
    }
    return {"", s};
  }
};

} // namespace testing_helpers
