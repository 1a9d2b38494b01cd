#pragma once

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "error.hpp"
#include "network_io.hpp"

namespace mdc {

/// Handshake role of one signal of a port.
enum class SignalRole { data, valid, ready, ack };

/// Forward signals travel with the data, backward ones against it.
enum class SignalFlow { forward, backward };

struct ProtocolSignal {
  SignalRole role = SignalRole::data;
  /// Role as written in the protocol file; used as the wire-name suffix.
  std::string label;
  /// Formal name of the signal on a port, with "{port}" standing for the port name.
  std::string pattern;
  /// 0 means "as wide as the port".
  int width = 0;
  SignalFlow flow = SignalFlow::forward;

  /// "full" is the active-high spelling of "ready".
  bool inverted() const { return role == SignalRole::ready && label == "full"; }

  std::string name_for(std::string_view port) const {
    std::string out = pattern;
    auto at = out.find("{port}");
    return out.replace(at, 6, port);
  }

  int width_for(int port_width) const { return width == 0 ? port_width : width; }

  /// Inverse of name_for; nullopt when `formal` does not fit the pattern.
  std::optional<std::string> port_of(std::string_view formal) const {
    auto at = pattern.find("{port}");
    std::string_view pre = std::string_view(pattern).substr(0, at);
    std::string_view post = std::string_view(pattern).substr(at + 6);
    if (formal.size() <= pre.size() + post.size() || formal.substr(0, pre.size()) != pre ||
        formal.substr(formal.size() - post.size()) != post) {
      return std::nullopt;
    }
    return std::string(formal.substr(pre.size(), formal.size() - pre.size() - post.size()));
  }

  bool operator==(ProtocolSignal const&) const = default;
};

struct ProtocolSpec {
  std::string name;
  std::string handshake;
  std::string clock = "clk";
  std::string reset = "rst";
  bool reset_active_low = false;
  std::vector<ProtocolSignal> signals;

  ProtocolSignal const* find(SignalRole r) const {
    auto it = std::find_if(signals.begin(), signals.end(), [&](ProtocolSignal const& s) { return s.role == r; });
    return it == signals.end() ? nullptr : &*it;
  }
  bool has(SignalRole r) const { return find(r) != nullptr; }
  ProtocolSignal const& data() const { return *find(SignalRole::data); }

  bool operator==(ProtocolSpec const&) const = default;
};

/// data, valid, ack, full: the handshake used by RVC-CAL generated hardware.
inline ProtocolSpec default_protocol() {
  ProtocolSpec p;
  p.name = "rvc";
  p.handshake = "rvc";
  p.signals = {
      {SignalRole::data, "data", "{port}_data", 0, SignalFlow::forward},
      {SignalRole::valid, "valid", "{port}_valid", 1, SignalFlow::forward},
      {SignalRole::ack, "ack", "{port}_ack", 1, SignalFlow::backward},
      {SignalRole::ready, "full", "{port}_full", 1, SignalFlow::backward},
  };
  return p;
}

inline std::vector<std::string> validate(ProtocolSpec const& p) {
  std::vector<std::string> out;
  std::size_t data = 0;
  for (std::size_t i = 0; i < p.signals.size(); ++i) {
    auto const& s = p.signals[i];
    data += s.role == SignalRole::data;
    if (s.pattern.find("{port}") == std::string::npos) {
      out.push_back("signal '" + s.label + "' pattern '" + s.pattern + "' lacks {port}");
    }
    if (s.width < 0) {
      out.push_back("signal '" + s.label + "' has a negative width");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (p.signals[j].role == s.role) {
        out.push_back("role '" + s.label + "' is named more than once");
      }
      if (p.signals[j].pattern == s.pattern) {
        out.push_back("signal pattern '" + s.pattern + "' is used twice");
      }
      if (p.signals[j].label == s.label) {
        out.push_back("label '" + s.label + "' is used twice");
      }
    }
  }
  if (data != 1) {
    out.push_back("protocol must have exactly one data signal, found " + std::to_string(data));
  }
  if (p.clock.empty() || p.reset.empty() || p.clock == p.reset) {
    out.push_back("clock and reset need distinct non-empty names");
  }
  return out;
}

namespace detail {

inline SignalRole parse_role(std::string const& label) {
  if (label == "data") {
    return SignalRole::data;
  }
  if (label == "valid" || label == "push" || label == "send") {
    return SignalRole::valid;
  }
  if (label == "ready" || label == "full") {
    return SignalRole::ready;
  }
  if (label == "ack") {
    return SignalRole::ack;
  }
  throw semantic_error("unknown signal role '" + label + "'", label);
}

inline SignalFlow default_flow(SignalRole r) {
  return r == SignalRole::data || r == SignalRole::valid ? SignalFlow::forward : SignalFlow::backward;
}

} // namespace detail

/// Reads a protocol description:
///   <protocol name=".." handshake="..">
///     <clock name="clk"/> <reset name="rst" active="high"/>
///     <signal role="data" name="{port}_data" width="port" direction="forward"/> ...
inline ProtocolSpec parse_protocol(std::string_view text) {
  detail::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::read_xml(in, tree);
  } catch (boost::property_tree::xml_parser_error const& e) {
    throw parse_error("XML syntax error: " + e.message(), e.line());
  }
  auto root = tree.get_child_optional("protocol");
  if (!root) {
    throw parse_error("document has no <protocol> root element", 0);
  }
  ProtocolSpec p;
  p.name = detail::xml_attr_or(*root, "name", "custom");
  p.handshake = detail::xml_attr_or(*root, "handshake", p.name);
  for (auto const& [tag, node] : *root) {
    if (tag == "clock") {
      p.clock = detail::xml_attr(node, "name", "clock");
    } else if (tag == "reset") {
      p.reset = detail::xml_attr(node, "name", "reset");
      auto active = detail::xml_attr_or(node, "active", "high");
      if (active != "high" && active != "low") {
        throw semantic_error("reset polarity must be 'high' or 'low'", "reset");
      }
      p.reset_active_low = active == "low";
    } else if (tag == "signal") {
      ProtocolSignal s;
      s.label = detail::xml_attr(node, "role", "signal");
      s.role = detail::parse_role(s.label);
      s.pattern = detail::xml_attr(node, "name", "signal " + s.label);
      auto width = detail::xml_attr_or(node, "width", s.role == SignalRole::data ? "port" : "1");
      s.width = width == "port" ? 0 : detail::xml_int(width, "signal " + s.label);
      if (s.width == 0 && width != "port") {
        throw semantic_error("signal '" + s.label + "' width must be positive or 'port'", s.label);
      }
      auto dir = detail::xml_attr_or(node, "direction", "");
      if (dir.empty()) {
        s.flow = detail::default_flow(s.role);
      } else if (dir == "forward" || dir == "backward") {
        s.flow = dir == "forward" ? SignalFlow::forward : SignalFlow::backward;
      } else {
        throw semantic_error("signal '" + s.label + "' direction must be forward or backward", s.label);
      }
      p.signals.push_back(std::move(s));
    }
  }
  if (auto problems = validate(p); !problems.empty()) {
    throw semantic_error("invalid protocol: " + problems.front(), p.name);
  }
  return p;
}

inline std::string serialize_protocol(ProtocolSpec const& p) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<protocol name=\"" << p.name << "\" handshake=\"" << p.handshake << "\">\n";
  os << "  <clock name=\"" << p.clock << "\"/>\n";
  os << "  <reset name=\"" << p.reset << "\" active=\"" << (p.reset_active_low ? "low" : "high") << "\"/>\n";
  for (auto const& s : p.signals) {
    os << "  <signal role=\"" << s.label << "\" name=\"" << s.pattern << "\" width=\""
       << (s.width == 0 ? std::string("port") : std::to_string(s.width)) << "\" direction=\""
       << (s.flow == SignalFlow::forward ? "forward" : "backward") << "\"/>\n";
  }
  os << "</protocol>\n";
  return os.str();
}

inline ProtocolSpec load_protocol(std::filesystem::path const& path) { return parse_protocol(read_text_file(path)); }

} // namespace mdc
