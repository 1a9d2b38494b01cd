#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "config_set.hpp"
#include "error.hpp"
#include "network.hpp"
#include "network_io.hpp"

namespace mdc {

/// A merged network: one physical substrate serving every input configuration.
/// Provenance records which configurations each element serves.
struct MultiDataflow {
  DataflowNetwork base;
  std::vector<std::string> config_names;
  std::map<std::string, ConfigSet> actor_provenance;
  std::map<std::string, ConfigSet> port_provenance;
  /// Parallel to base.channels.
  std::vector<ConfigSet> channel_provenance;

  std::size_t config_count() const { return config_names.size(); }

  ConfigSet provenance(Endpoint const& e) const {
    auto const& map = e.is_network_port() ? port_provenance : actor_provenance;
    auto it = map.find(e.is_network_port() ? e.port : e.actor);
    return it == map.end() ? ConfigSet{} : it->second;
  }

  /// SBox instances in insertion order.
  std::vector<std::string> sboxes() const {
    std::vector<std::string> out;
    for (auto const& a : base.actors) {
      if (is_sbox(a.kind)) {
        out.push_back(a.instance);
      }
    }
    return out;
  }

  std::size_t sbox_count() const { return sboxes().size(); }

  bool operator==(MultiDataflow const&) const = default;
};

struct ConfigRow {
  std::string name;
  int network_id = 0;
  /// SBox instance -> selector bit.
  std::map<std::string, int> selectors;

  bool operator==(ConfigRow const&) const = default;
};

/// Per-configuration selector assignment for every SBox.
struct ConfigurationTable {
  std::vector<ConfigRow> rows;

  int selector(std::size_t config, std::string const& sbox) const {
    auto const& sel = rows.at(config).selectors;
    auto it = sel.find(sbox);
    if (it == sel.end()) {
      throw error("configuration table has no selector for '" + sbox + "' in row '" + rows.at(config).name + "'");
    }
    return it->second;
  }

  bool operator==(ConfigurationTable const&) const = default;
};

struct MergeResult {
  MultiDataflow mdf;
  ConfigurationTable ctab;

  bool operator==(MergeResult const&) const = default;
};

/// Wraps a single flattened network as a one-configuration MultiDataflow.
inline MergeResult lift(DataflowNetwork const& net) {
  MultiDataflow m;
  m.base = net;
  m.config_names = {net.name};
  for (auto const& a : net.actors) {
    m.actor_provenance[a.instance] = ConfigSet::single(0);
  }
  for (auto const& p : net.ports) {
    m.port_provenance[p.name] = ConfigSet::single(0);
  }
  m.channel_provenance.assign(net.channels.size(), ConfigSet::single(0));
  ConfigurationTable t;
  t.rows.push_back(ConfigRow{net.name, 0, {}});
  return {m, t};
}

/// Structural checks on a merged network and its table. Empty result = valid.
inline std::vector<Diagnostic> validate(MultiDataflow const& m, ConfigurationTable const& ctab) {
  std::vector<Diagnostic> out = validate(m.base);
  if (m.channel_provenance.size() != m.base.channels.size()) {
    out.push_back({"provenance", "channel provenance does not cover every channel", {}});
  }
  auto n = m.config_count();
  for (auto const& a : m.base.actors) {
    auto prov = m.provenance(Endpoint{a.instance, ""});
    if (prov.empty()) {
      out.push_back({"provenance", "actor '" + a.instance + "' serves no configuration", {a.instance}});
    }
    if (!prov.is_subset_of(ConfigSet::all(n))) {
      out.push_back({"provenance", "actor '" + a.instance + "' refers to an unknown configuration", {a.instance}});
    }
    if (is_sbox(a.kind) && prov.size() < 2) {
      out.push_back({"provenance", "SBox '" + a.instance + "' serves fewer than two configurations", {a.instance}});
    }
  }
  if (ctab.rows.size() != n) {
    out.push_back({"ctab", "configuration table has " + std::to_string(ctab.rows.size()) + " rows for " +
                               std::to_string(n) + " configurations",
                   {}});
  }
  auto sboxes = m.sboxes();
  for (std::size_t c = 0; c < ctab.rows.size(); ++c) {
    auto const& row = ctab.rows[c];
    if (row.network_id != static_cast<int>(c)) {
      out.push_back({"ctab", "row '" + row.name + "' has network id " + std::to_string(row.network_id) +
                                 ", expected " + std::to_string(c),
                     {row.name}});
    }
    if (c < n && row.name != m.config_names[c]) {
      out.push_back({"ctab", "row " + std::to_string(c) + " is named '" + row.name + "'", {row.name}});
    }
    for (auto const& s : sboxes) {
      auto it = row.selectors.find(s);
      if (it == row.selectors.end()) {
        out.push_back({"ctab", "row '" + row.name + "' has no selector for '" + s + "'", {row.name, s}});
      } else if (it->second != 0 && it->second != 1) {
        out.push_back({"ctab", "selector of '" + s + "' in row '" + row.name + "' is not a bit", {row.name, s}});
      }
    }
    if (row.selectors.size() != sboxes.size()) {
      out.push_back({"ctab", "row '" + row.name + "' carries selectors for unknown SBoxes", {row.name}});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization (*.mdf.json, *.ctab.json)

namespace detail {

inline json config_set_to_json(ConfigSet s) {
  json arr = json::array();
  for (auto c : s.indices()) {
    arr.push_back(c);
  }
  return arr;
}

inline ConfigSet config_set_from_json(json const& j, std::string const& where) {
  if (!j.is_array()) {
    throw parse_error(where + ": configuration list must be an array", 0);
  }
  ConfigSet s;
  for (auto const& v : j) {
    auto c = v.get<long long>();
    if (c < 0 || c >= static_cast<long long>(max_configurations)) {
      throw parse_error(where + ": configuration index out of range", 0);
    }
    s.insert(static_cast<std::size_t>(c));
  }
  return s;
}

inline json parse_json_text(std::string_view text) {
  try {
    return json::parse(text);
  } catch (nlohmann::json::parse_error const& e) {
    auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw parse_error(std::string("JSON syntax error: ") + e.what(), line, col);
  }
}

} // namespace detail

inline std::string serialize_multi_dataflow(MultiDataflow const& m) {
  using detail::json;
  json net = detail::network_to_json(m.base);
  for (auto& p : net["ports"]) {
    p["configurations"] = detail::config_set_to_json(m.port_provenance.at(p["name"].get<std::string>()));
  }
  for (auto& a : net["actors"]) {
    a["configurations"] = detail::config_set_to_json(m.actor_provenance.at(a["name"].get<std::string>()));
  }
  for (std::size_t i = 0; i < m.channel_provenance.size(); ++i) {
    net["channels"][i]["configurations"] = detail::config_set_to_json(m.channel_provenance[i]);
  }
  json j;
  j["format"] = "mdf";
  j["version"] = 1;
  j["configurations"] = m.config_names;
  j["network"] = std::move(net);
  return j.dump(2) + "\n";
}

inline MultiDataflow parse_multi_dataflow(std::string_view text) {
  using detail::json;
  json j = detail::parse_json_text(text);
  MultiDataflow m;
  m.config_names = detail::json_field<std::vector<std::string>>(j, "configurations", "mdf");
  if (!j.contains("network")) {
    throw parse_error("mdf: missing field 'network'", 0);
  }
  auto const& net = j.at("network");
  m.base = detail::network_from_json(net, "");
  for (auto const& p : net.value("ports", json::array())) {
    m.port_provenance[p.at("name").get<std::string>()] =
        detail::config_set_from_json(p.value("configurations", json::array()), "mdf port");
  }
  for (auto const& a : net.value("actors", json::array())) {
    m.actor_provenance[a.at("name").get<std::string>()] =
        detail::config_set_from_json(a.value("configurations", json::array()), "mdf actor");
  }
  for (auto const& c : net.value("channels", json::array())) {
    m.channel_provenance.push_back(detail::config_set_from_json(c.value("configurations", json::array()), "mdf channel"));
  }
  return m;
}

inline std::string serialize_ctab(ConfigurationTable const& t) {
  using detail::json;
  json j;
  j["format"] = "ctab";
  j["version"] = 1;
  j["rows"] = json::array();
  for (auto const& r : t.rows) {
    json row;
    row["name"] = r.name;
    row["network_id"] = r.network_id;
    row["selectors"] = json::object();
    for (auto const& [s, v] : r.selectors) {
      row["selectors"][s] = v;
    }
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

inline ConfigurationTable parse_ctab(std::string_view text) {
  using detail::json;
  json j = detail::parse_json_text(text);
  ConfigurationTable t;
  if (!j.contains("rows")) {
    throw parse_error("ctab: missing field 'rows'", 0);
  }
  for (auto const& r : j.at("rows")) {
    ConfigRow row;
    row.name = detail::json_field<std::string>(r, "name", "ctab row");
    row.network_id = detail::json_field<int>(r, "network_id", "ctab row " + row.name);
    json const selectors = r.value("selectors", json::object());
    for (auto const& [s, v] : selectors.items()) {
      row.selectors[s] = v.get<int>();
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

} // namespace mdc
