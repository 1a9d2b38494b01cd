#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include "error.hpp"
#include "network.hpp"

namespace mdc {

enum class NetworkFormat { xdf, json };

namespace detail {

using json = nlohmann::ordered_json;
using boost::property_tree::ptree;

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline Direction parse_direction(std::string const& s, std::string const& where) {
  if (s == "in" || s == "Input" || s == "input") {
    return Direction::in;
  }
  if (s == "out" || s == "Output" || s == "output") {
    return Direction::out;
  }
  throw parse_error(where + ": unknown port direction '" + s + "'", 0);
}

inline ActorKind parse_kind(std::string const& s, std::string const& where) {
  for (auto k : {ActorKind::atomic, ActorKind::hierarchical, ActorKind::sbox1x2, ActorKind::sbox2x1,
                 ActorKind::fanout}) {
    if (to_string(k) == s) {
      return k;
    }
  }
  throw parse_error(where + ": unknown actor kind '" + s + "'", 0);
}

// --- JSON -----------------------------------------------------------------

template <typename T>
T json_field(json const& j, char const* key, std::string const& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw parse_error(where + ": missing field '" + key + "'", 0);
  }
  try {
    return j.at(key).get<T>();
  } catch (nlohmann::json::exception const&) {
    throw parse_error(where + ": field '" + std::string(key) + "' has the wrong type", 0);
  }
}

inline PortDecl port_from_json(json const& j, std::string const& where) {
  PortDecl p;
  p.name = json_field<std::string>(j, "name", where);
  p.direction = parse_direction(json_field<std::string>(j, "direction", where + "/" + p.name), where + "/" + p.name);
  p.width = json_field<int>(j, "width", where + "/" + p.name);
  p.open = j.value("open", false);
  return p;
}

inline json port_to_json(PortDecl const& p) {
  json j;
  j["name"] = p.name;
  j["direction"] = std::string(to_string(p.direction));
  j["width"] = p.width;
  if (p.open) {
    j["open"] = true;
  }
  return j;
}

DataflowNetwork network_from_json(json const& j, std::string const& where);

inline Actor actor_from_json(json const& j, std::string const& where) {
  Actor a;
  a.instance = json_field<std::string>(j, "name", where);
  std::string here = where + "/" + a.instance;
  a.type = j.value("type", a.instance);
  if (j.contains("network")) {
    auto sub = network_from_json(j.at("network"), here);
    a.kind = ActorKind::hierarchical;
    if (!j.contains("ports")) {
      a.ports = sub.ports;
      for (auto& p : a.ports) {
        p.open = false;
      }
    }
    a.subnetwork = std::make_shared<DataflowNetwork const>(std::move(sub));
  }
  if (j.contains("kind")) {
    a.kind = parse_kind(json_field<std::string>(j, "kind", here), here);
  }
  if (j.contains("ports")) {
    for (auto const& p : j.at("ports")) {
      a.ports.push_back(port_from_json(p, here));
    }
  }
  if (j.contains("parameters")) {
    for (auto const& [k, v] : j.at("parameters").items()) {
      a.parameters[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  return a;
}

inline DataflowNetwork network_from_json(json const& j, std::string const& where) {
  DataflowNetwork net;
  net.name = json_field<std::string>(j, "name", where);
  std::string here = where.empty() ? net.name : where + "/" + net.name;
  if (j.contains("ports")) {
    for (auto const& p : j.at("ports")) {
      net.ports.push_back(port_from_json(p, here));
    }
  }
  if (j.contains("actors")) {
    for (auto const& a : j.at("actors")) {
      net.actors.push_back(actor_from_json(a, here));
    }
  }
  if (j.contains("channels")) {
    for (auto const& c : j.at("channels")) {
      Channel ch;
      ch.source = parse_endpoint(json_field<std::string>(c, "source", here + "/channel"));
      ch.sink = parse_endpoint(json_field<std::string>(c, "sink", here + "/channel"));
      auto depth = c.value("depth", static_cast<long long>(default_fifo_depth));
      if (depth < 0) {
        throw parse_error(here + ": channel " + ch.source.str() + " -> " + ch.sink.str() + " has negative depth", 0);
      }
      ch.depth = static_cast<unsigned>(depth);
      net.channels.push_back(std::move(ch));
    }
  }
  return net;
}

inline json network_to_json(DataflowNetwork const& net) {
  json j;
  j["name"] = net.name;
  j["ports"] = json::array();
  for (auto const& p : net.ports) {
    j["ports"].push_back(port_to_json(p));
  }
  j["actors"] = json::array();
  for (auto const& a : net.actors) {
    json ja;
    ja["name"] = a.instance;
    ja["type"] = a.type;
    ja["kind"] = std::string(to_string(a.kind));
    ja["ports"] = json::array();
    for (auto const& p : a.ports) {
      ja["ports"].push_back(port_to_json(p));
    }
    if (!a.parameters.empty()) {
      ja["parameters"] = json::object();
      for (auto const& [k, v] : a.parameters) {
        ja["parameters"][k] = v;
      }
    }
    if (a.subnetwork) {
      ja["network"] = network_to_json(*a.subnetwork);
    }
    j["actors"].push_back(std::move(ja));
  }
  j["channels"] = json::array();
  for (auto const& c : net.channels) {
    j["channels"].push_back(json{{"source", c.source.str()}, {"sink", c.sink.str()}, {"depth", c.depth}});
  }
  return j;
}

// --- XDF subset -----------------------------------------------------------

inline std::optional<std::string> xml_optional(ptree const& node, std::string const& path) {
  if (auto v = node.get_optional<std::string>(path)) {
    return *v;
  }
  return std::nullopt;
}

inline std::string xml_attr(ptree const& node, char const* key, std::string const& where) {
  auto v = xml_optional(node, std::string("<xmlattr>.") + key);
  if (!v) {
    throw parse_error(where + ": missing attribute '" + key + "'", 0);
  }
  return *v;
}

inline std::string xml_attr_or(ptree const& node, char const* key, std::string fallback) {
  return node.get<std::string>(std::string("<xmlattr>.") + key, std::move(fallback));
}

/// Literal value of an <Expr> child, or nullopt.
inline std::optional<std::string> xml_expr_literal(ptree const& node) {
  for (auto const& [tag, child] : node) {
    if (tag == "Expr") {
      return xml_optional(child, "<xmlattr>.value");
    }
  }
  return std::nullopt;
}

inline int xml_int(std::string const& text, std::string const& where) {
  try {
    std::size_t used = 0;
    int v = std::stoi(text, &used);
    if (used != text.size()) {
      throw std::invalid_argument(text);
    }
    return v;
  } catch (std::exception const&) {
    throw parse_error(where + ": '" + text + "' is not an integer", 0);
  }
}

inline PortDecl port_from_xdf(ptree const& node, std::string const& where) {
  PortDecl p;
  p.name = xml_attr(node, "name", where);
  std::string here = where + "/" + p.name;
  p.direction = parse_direction(xml_attr(node, "kind", here), here);
  auto size = xml_optional(node, "<xmlattr>.size");
  if (!size) {
    // <Type name="int"><Entry kind="Expr" name="size"><Expr ... value="16"/></Entry></Type>
    if (auto type = node.get_child_optional("Type")) {
      for (auto const& [tag, entry] : *type) {
        if (tag == "Entry" && entry.get<std::string>("<xmlattr>.name", "") == "size") {
          size = xml_expr_literal(entry);
        }
      }
    }
  }
  if (!size) {
    throw parse_error(here + ": port has no size", 0);
  }
  p.width = xml_int(*size, here);
  p.open = xml_attr_or(node, "open", "false") == "true";
  return p;
}

DataflowNetwork network_from_xdf(ptree const& node, std::string const& where);

inline Actor actor_from_xdf(ptree const& node, std::string const& where) {
  Actor a;
  a.instance = xml_attr(node, "id", where);
  std::string here = where + "/" + a.instance;
  bool ports_declared = false;
  for (auto const& [tag, child] : node) {
    if (tag == "Class") {
      a.type = xml_attr(child, "name", here);
    } else if (tag == "Port") {
      a.ports.push_back(port_from_xdf(child, here));
      ports_declared = true;
    } else if (tag == "Parameter") {
      auto name = xml_attr(child, "name", here);
      auto value = xml_optional(child, "<xmlattr>.value");
      if (!value) {
        value = xml_expr_literal(child);
      }
      if (!value) {
        throw parse_error(here + ": parameter '" + name + "' has no value", 0);
      }
      a.parameters[name] = *value;
    } else if (tag == "XDF") {
      auto sub = network_from_xdf(child, here);
      a.kind = ActorKind::hierarchical;
      a.subnetwork = std::make_shared<DataflowNetwork const>(std::move(sub));
    }
  }
  if (a.type.empty()) {
    a.type = a.instance;
  }
  if (a.subnetwork && !ports_declared) {
    a.ports = a.subnetwork->ports;
    for (auto& p : a.ports) {
      p.open = false;
    }
  }
  if (auto kind = xml_optional(node, "<xmlattr>.kind")) {
    a.kind = parse_kind(*kind, here);
  }
  return a;
}

inline DataflowNetwork network_from_xdf(ptree const& node, std::string const& where) {
  DataflowNetwork net;
  net.name = xml_attr(node, "name", where);
  std::string here = where.empty() ? net.name : where + "/" + net.name;
  for (auto const& [tag, child] : node) {
    if (tag == "Port") {
      net.ports.push_back(port_from_xdf(child, here));
    } else if (tag == "Instance") {
      net.actors.push_back(actor_from_xdf(child, here));
    } else if (tag == "Connection") {
      Channel ch;
      ch.source = Endpoint{xml_attr_or(child, "src", ""), xml_attr(child, "src-port", here + "/Connection")};
      ch.sink = Endpoint{xml_attr_or(child, "dst", ""), xml_attr(child, "dst-port", here + "/Connection")};
      std::optional<std::string> depth = xml_optional(child, "<xmlattr>.depth");
      for (auto const& [atag, attr] : child) {
        if (atag == "Attribute" && attr.get<std::string>("<xmlattr>.name", "") == "bufferSize") {
          depth = xml_expr_literal(attr);
        }
      }
      if (depth) {
        int d = xml_int(*depth, here + "/Connection");
        if (d < 0) {
          throw parse_error(here + ": channel " + ch.source.str() + " -> " + ch.sink.str() + " has negative depth", 0);
        }
        ch.depth = static_cast<unsigned>(d);
      }
      net.channels.push_back(std::move(ch));
    }
  }
  return net;
}

inline void xml_escape_into(std::ostream& os, std::string_view s) {
  for (char c : s) {
    switch (c) {
    case '&':
      os << "&amp;";
      break;
    case '<':
      os << "&lt;";
      break;
    case '>':
      os << "&gt;";
      break;
    case '"':
      os << "&quot;";
      break;
    default:
      os << c;
    }
  }
}

inline void port_to_xdf(std::ostream& os, PortDecl const& p, std::string const& indent) {
  os << indent << "<Port kind=\"" << (p.direction == Direction::in ? "Input" : "Output") << "\" name=\"";
  xml_escape_into(os, p.name);
  os << "\" size=\"" << p.width << "\"";
  if (p.open) {
    os << " open=\"true\"";
  }
  os << "/>\n";
}

inline void network_to_xdf(std::ostream& os, DataflowNetwork const& net, std::string const& indent) {
  os << indent << "<XDF name=\"";
  xml_escape_into(os, net.name);
  os << "\">\n";
  std::string in = indent + "  ";
  for (auto const& p : net.ports) {
    port_to_xdf(os, p, in);
  }
  for (auto const& a : net.actors) {
    os << in << "<Instance id=\"";
    xml_escape_into(os, a.instance);
    os << "\" kind=\"" << to_string(a.kind) << "\">\n";
    os << in << "  <Class name=\"";
    xml_escape_into(os, a.type);
    os << "\"/>\n";
    for (auto const& [k, v] : a.parameters) {
      os << in << "  <Parameter name=\"";
      xml_escape_into(os, k);
      os << "\" value=\"";
      xml_escape_into(os, v);
      os << "\"/>\n";
    }
    for (auto const& p : a.ports) {
      port_to_xdf(os, p, in + "  ");
    }
    if (a.subnetwork) {
      network_to_xdf(os, *a.subnetwork, in + "  ");
    }
    os << in << "</Instance>\n";
  }
  for (auto const& c : net.channels) {
    os << in << "<Connection src=\"";
    xml_escape_into(os, c.source.actor);
    os << "\" src-port=\"";
    xml_escape_into(os, c.source.port);
    os << "\" dst=\"";
    xml_escape_into(os, c.sink.actor);
    os << "\" dst-port=\"";
    xml_escape_into(os, c.sink.port);
    os << "\" depth=\"" << c.depth << "\"/>\n";
  }
  os << indent << "</XDF>\n";
}

inline void require_valid_deep(DataflowNetwork const& net) {
  for (auto const& a : net.actors) {
    if (a.subnetwork) {
      require_valid_deep(*a.subnetwork);
    }
  }
  require_valid(net);
}

} // namespace detail

/// Parses and validates a network document. Throws parse_error for malformed
/// text and semantic_error for structural violations.
inline DataflowNetwork parse_network(std::string_view source, NetworkFormat format) {
  DataflowNetwork net;
  if (format == NetworkFormat::json) {
    detail::json j;
    try {
      j = detail::json::parse(source);
    } catch (nlohmann::json::parse_error const& e) {
      auto [line, col] = detail::line_column(source, e.byte == 0 ? 0 : e.byte - 1);
      throw parse_error(std::string("JSON syntax error: ") + e.what(), line, col);
    }
    net = detail::network_from_json(j, "");
  } else {
    detail::ptree tree;
    std::istringstream in{std::string(source)};
    try {
      boost::property_tree::read_xml(in, tree);
    } catch (boost::property_tree::xml_parser_error const& e) {
      throw parse_error("XML syntax error: " + e.message(), e.line());
    }
    auto root = tree.get_child_optional("XDF");
    if (!root) {
      throw parse_error("document has no <XDF> root element", 0);
    }
    net = detail::network_from_xdf(*root, "");
  }
  detail::require_valid_deep(net);
  return net;
}

inline std::string serialize_network(DataflowNetwork const& net, NetworkFormat format) {
  if (format == NetworkFormat::json) {
    return detail::network_to_json(net).dump(2) + "\n";
  }
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  detail::network_to_xdf(os, net, "");
  return os.str();
}

inline NetworkFormat format_for_path(std::filesystem::path const& path) {
  auto ext = path.extension().string();
  if (ext == ".json") {
    return NetworkFormat::json;
  }
  if (ext == ".xdf" || ext == ".xml") {
    return NetworkFormat::xdf;
  }
  throw error("cannot infer network format from '" + path.string() + "' (expected .xdf or .df.json)");
}

inline std::string read_text_file(std::filesystem::path const& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw error("cannot open '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline DataflowNetwork load_network(std::filesystem::path const& path) {
  return parse_network(read_text_file(path), format_for_path(path));
}

} // namespace mdc
