#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace mdc {

enum class Direction { in, out };

inline std::string_view to_string(Direction d) { return d == Direction::in ? "in" : "out"; }

enum class ActorKind { atomic, hierarchical, sbox1x2, sbox2x1, fanout };

inline std::string_view to_string(ActorKind k) {
  switch (k) {
  case ActorKind::atomic:
    return "atomic";
  case ActorKind::hierarchical:
    return "hierarchical";
  case ActorKind::sbox1x2:
    return "sbox1x2";
  case ActorKind::sbox2x1:
    return "sbox2x1";
  case ActorKind::fanout:
    return "fanout";
  }
  return "atomic";
}

inline bool is_sbox(ActorKind k) { return k == ActorKind::sbox1x2 || k == ActorKind::sbox2x1; }

/// A port of an actor or of the network boundary. `open` marks a port that
/// is intentionally left unconnected.
struct PortDecl {
  std::string name;
  Direction direction = Direction::in;
  int width = 0;
  bool open = false;

  bool operator==(PortDecl const&) const = default;
};

/// Name, direction and width; the `open` flag is not part of a port's identity.
inline bool same_signature(PortDecl const& a, PortDecl const& b) {
  return a.name == b.name && a.direction == b.direction && a.width == b.width;
}

struct DataflowNetwork;

struct Actor {
  std::string instance;
  std::string type;
  ActorKind kind = ActorKind::atomic;
  std::vector<PortDecl> ports;
  std::map<std::string, std::string> parameters;
  std::shared_ptr<DataflowNetwork const> subnetwork;

  PortDecl const* find_port(std::string_view name) const {
    auto it = std::find_if(ports.begin(), ports.end(), [&](PortDecl const& p) { return p.name == name; });
    return it == ports.end() ? nullptr : &*it;
  }
  PortDecl* find_port(std::string_view name) {
    auto it = std::find_if(ports.begin(), ports.end(), [&](PortDecl const& p) { return p.name == name; });
    return it == ports.end() ? nullptr : &*it;
  }
};

bool operator==(Actor const& a, Actor const& b);

/// Channel endpoint. An empty actor name denotes a network boundary port.
struct Endpoint {
  std::string actor;
  std::string port;

  bool is_network_port() const { return actor.empty(); }

  std::string str() const { return actor.empty() ? port : actor + "." + port; }

  auto operator<=>(Endpoint const&) const = default;
};

/// Inverse of Endpoint::str().
inline Endpoint parse_endpoint(std::string_view text) {
  auto dot = text.find('.');
  if (dot == std::string_view::npos) {
    return Endpoint{"", std::string(text)};
  }
  return Endpoint{std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

struct Channel {
  Endpoint source;
  Endpoint sink;
  /// FIFO depth in tokens; 0 is a combinatorial wire.
  unsigned depth = 1;

  bool operator==(Channel const&) const = default;
};

inline constexpr unsigned default_fifo_depth = 1;

struct DataflowNetwork {
  std::string name;
  std::vector<PortDecl> ports;
  std::vector<Actor> actors;
  std::vector<Channel> channels;

  Actor const* find_actor(std::string_view instance) const {
    auto it = std::find_if(actors.begin(), actors.end(), [&](Actor const& a) { return a.instance == instance; });
    return it == actors.end() ? nullptr : &*it;
  }
  Actor* find_actor(std::string_view instance) {
    auto it = std::find_if(actors.begin(), actors.end(), [&](Actor const& a) { return a.instance == instance; });
    return it == actors.end() ? nullptr : &*it;
  }

  PortDecl const* find_port(std::string_view port) const {
    auto it = std::find_if(ports.begin(), ports.end(), [&](PortDecl const& p) { return p.name == port; });
    return it == ports.end() ? nullptr : &*it;
  }

  /// Port declaration an endpoint refers to, or nullptr.
  PortDecl const* resolve(Endpoint const& e) const {
    if (e.is_network_port()) {
      return find_port(e.port);
    }
    auto const* a = find_actor(e.actor);
    return a ? a->find_port(e.port) : nullptr;
  }

  bool is_flat() const {
    return std::none_of(actors.begin(), actors.end(),
                        [](Actor const& a) { return a.kind == ActorKind::hierarchical; });
  }

  std::size_t input_port_count() const {
    return static_cast<std::size_t>(
        std::count_if(ports.begin(), ports.end(), [](PortDecl const& p) { return p.direction == Direction::in; }));
  }
  std::size_t output_port_count() const { return ports.size() - input_port_count(); }

  bool operator==(DataflowNetwork const&) const = default;
};

inline bool operator==(Actor const& a, Actor const& b) {
  if (a.instance != b.instance || a.type != b.type || a.kind != b.kind || a.ports != b.ports ||
      a.parameters != b.parameters) {
    return false;
  }
  if (!a.subnetwork || !b.subnetwork) {
    return !a.subnetwork && !b.subnetwork;
  }
  return a.subnetwork == b.subnetwork || *a.subnetwork == *b.subnetwork;
}

/// Identity used for sharing: component type, parameters and ordered port signature.
struct ActorKey {
  std::string type;
  std::map<std::string, std::string> parameters;
  std::vector<PortDecl> signature;

  auto operator<=>(ActorKey const&) const = default;
};

inline ActorKey actor_key(Actor const& a) {
  ActorKey k{a.type, a.parameters, {}};
  for (auto const& p : a.ports) {
    k.signature.push_back(PortDecl{p.name, p.direction, p.width, false});
  }
  return k;
}

// ---------------------------------------------------------------------------
// SBox construction

namespace sbox_port {
inline constexpr std::string_view in = "in";
inline constexpr std::string_view in0 = "in0";
inline constexpr std::string_view in1 = "in1";
inline constexpr std::string_view out = "out";
inline constexpr std::string_view out0 = "out0";
inline constexpr std::string_view out1 = "out1";
inline constexpr std::string_view sel = "sel";
} // namespace sbox_port

inline Actor make_sbox(ActorKind kind, std::string instance, int width) {
  Actor a;
  a.instance = std::move(instance);
  a.kind = kind;
  if (kind == ActorKind::sbox2x1) {
    a.type = "sbox2x1";
    a.ports = {{std::string(sbox_port::in0), Direction::in, width, false},
               {std::string(sbox_port::in1), Direction::in, width, false},
               {std::string(sbox_port::out), Direction::out, width, false},
               {std::string(sbox_port::sel), Direction::in, 1, true}};
  } else {
    a.type = "sbox1x2";
    a.ports = {{std::string(sbox_port::in), Direction::in, width, false},
               {std::string(sbox_port::out0), Direction::out, width, false},
               {std::string(sbox_port::out1), Direction::out, width, false},
               {std::string(sbox_port::sel), Direction::in, 1, true}};
  }
  return a;
}

/// Data width of an SBox (width of its non-selector ports).
inline int sbox_width(Actor const& a) { return a.ports.empty() ? 0 : a.ports.front().width; }

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
  std::string code;
  std::string message;
  std::vector<std::string> elements;

  bool operator==(Diagnostic const&) const = default;
};

namespace detail {

inline bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) {
    return false;
  }
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

inline void check_sbox_shape(Actor const& a, std::vector<Diagnostic>& out) {
  auto expect = [&](std::string_view port, Direction dir) {
    auto const* p = a.find_port(port);
    if (!p || p->direction != dir) {
      out.push_back({"sbox-shape", "SBox '" + a.instance + "' lacks " + std::string(to_string(dir)) + " port '" +
                                       std::string(port) + "'",
                     {a.instance}});
    }
  };
  if (a.ports.size() != 4) {
    out.push_back({"sbox-shape", "SBox '" + a.instance + "' must have exactly 4 ports", {a.instance}});
  }
  if (a.kind == ActorKind::sbox2x1) {
    expect(sbox_port::in0, Direction::in);
    expect(sbox_port::in1, Direction::in);
    expect(sbox_port::out, Direction::out);
  } else {
    expect(sbox_port::in, Direction::in);
    expect(sbox_port::out0, Direction::out);
    expect(sbox_port::out1, Direction::out);
  }
  expect(sbox_port::sel, Direction::in);
}

} // namespace detail

/// Checks every structural invariant of a network. Returns one diagnostic per
/// violation; an empty result means the network is well formed.
inline std::vector<Diagnostic> validate(DataflowNetwork const& net) {
  std::vector<Diagnostic> out;

  std::map<std::string, int> actor_names;
  for (auto const& a : net.actors) {
    if (++actor_names[a.instance] == 2) {
      out.push_back({"duplicate-actor", "duplicate actor instance '" + a.instance + "'", {a.instance}});
    }
    if (!detail::is_identifier(a.instance)) {
      out.push_back({"bad-name", "actor instance '" + a.instance + "' is not an identifier", {a.instance}});
    }
    std::set<std::string> port_names;
    for (auto const& p : a.ports) {
      if (!port_names.insert(p.name).second) {
        out.push_back({"duplicate-port", "actor '" + a.instance + "' declares port '" + p.name + "' twice",
                       {a.instance + "." + p.name}});
      }
      if (p.width <= 0) {
        out.push_back({"bad-width", "port '" + a.instance + "." + p.name + "' has non-positive width",
                       {a.instance + "." + p.name}});
      }
    }
    if (a.kind == ActorKind::hierarchical && !a.subnetwork) {
      out.push_back({"missing-subnetwork", "hierarchical actor '" + a.instance + "' has no sub-network", {a.instance}});
    }
    if (a.kind != ActorKind::hierarchical && a.subnetwork) {
      out.push_back({"unexpected-subnetwork", "non-hierarchical actor '" + a.instance + "' carries a sub-network",
                     {a.instance}});
    }
    if (a.kind == ActorKind::hierarchical && a.subnetwork) {
      for (auto const& p : a.ports) {
        auto const* inner = a.subnetwork->find_port(p.name);
        if (!inner || !same_signature(*inner, p)) {
          out.push_back({"boundary-mismatch",
                         "port '" + a.instance + "." + p.name + "' has no matching sub-network boundary port",
                         {a.instance + "." + p.name}});
        }
      }
    }
    if (is_sbox(a.kind)) {
      detail::check_sbox_shape(a, out);
    }
  }

  std::set<std::string> net_ports;
  for (auto const& p : net.ports) {
    if (!net_ports.insert(p.name).second) {
      out.push_back({"duplicate-port", "network port '" + p.name + "' declared twice", {p.name}});
    }
    if (p.width <= 0) {
      out.push_back({"bad-width", "network port '" + p.name + "' has non-positive width", {p.name}});
    }
  }

  std::map<Endpoint, int> uses;
  for (auto const& ch : net.channels) {
    auto const* src = net.resolve(ch.source);
    auto const* dst = net.resolve(ch.sink);
    if (!src) {
      out.push_back({"dangling-channel", "channel source '" + ch.source.str() + "' does not exist",
                     {ch.source.str(), ch.sink.str()}});
    }
    if (!dst) {
      out.push_back({"dangling-channel", "channel sink '" + ch.sink.str() + "' does not exist",
                     {ch.sink.str(), ch.source.str()}});
    }
    if (src) {
      // a source is an actor output or a network input
      bool ok = ch.source.is_network_port() ? src->direction == Direction::in : src->direction == Direction::out;
      if (!ok) {
        out.push_back({"bad-direction", "channel source '" + ch.source.str() + "' cannot drive a channel",
                       {ch.source.str()}});
      }
    }
    if (dst) {
      bool ok = ch.sink.is_network_port() ? dst->direction == Direction::out : dst->direction == Direction::in;
      if (!ok) {
        out.push_back({"bad-direction", "channel sink '" + ch.sink.str() + "' cannot receive a channel",
                       {ch.sink.str()}});
      }
    }
    if (src && dst && src->width != dst->width) {
      out.push_back({"width-mismatch",
                     "channel " + ch.source.str() + " (" + std::to_string(src->width) + " bits) -> " + ch.sink.str() +
                         " (" + std::to_string(dst->width) + " bits) has mismatched widths",
                     {ch.source.str(), ch.sink.str()}});
    }
    if (++uses[ch.source] == 2) {
      out.push_back({"multiple-channels", "port '" + ch.source.str() + "' drives more than one channel",
                     {ch.source.str()}});
    }
    if (++uses[ch.sink] == 2) {
      out.push_back({"multiple-channels", "port '" + ch.sink.str() + "' has more than one incoming channel",
                     {ch.sink.str()}});
    }
  }

  auto check_connected = [&](Endpoint const& e, PortDecl const& p) {
    if (!p.open && uses.find(e) == uses.end()) {
      out.push_back({"dangling-port", "port '" + e.str() + "' is neither connected nor marked open", {e.str()}});
    }
  };
  for (auto const& p : net.ports) {
    check_connected(Endpoint{"", p.name}, p);
  }
  for (auto const& a : net.actors) {
    for (auto const& p : a.ports) {
      check_connected(Endpoint{a.instance, p.name}, p);
    }
  }
  return out;
}

/// Throws semantic_error naming the first violation, if any.
inline void require_valid(DataflowNetwork const& net) {
  auto diags = validate(net);
  if (!diags.empty()) {
    auto const& d = diags.front();
    throw semantic_error("network '" + net.name + "': " + d.message, d.elements.empty() ? "" : d.elements.front());
  }
}

} // namespace mdc
