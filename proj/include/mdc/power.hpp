#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "config_set.hpp"
#include "error.hpp"
#include "multi_dataflow.hpp"

namespace mdc {

enum class GatingMode { clock, power };

inline std::string_view to_string(GatingMode m) { return m == GatingMode::clock ? "clock" : "power"; }

inline GatingMode parse_gating_mode(std::string_view s) {
  if (s == "clock") {
    return GatingMode::clock;
  }
  if (s == "power") {
    return GatingMode::power;
  }
  throw error("unknown gating mode '" + std::string(s) + "' (expected clock or power)");
}

enum class GatingTarget { asic, fpga };

inline std::string_view to_string(GatingTarget t) { return t == GatingTarget::asic ? "asic" : "fpga"; }

inline GatingTarget parse_gating_target(std::string_view s) {
  if (s == "asic") {
    return GatingTarget::asic;
  }
  if (s == "fpga") {
    return GatingTarget::fpga;
  }
  throw error("unknown gating target '" + std::string(s) + "' (expected asic or fpga)");
}

/// Global clock buffers on a Zynq-7000 device.
inline constexpr std::size_t default_bufg_budget = 32;

struct LogicRegion {
  std::string id;
  /// Instance names, sorted.
  std::vector<std::string> members;
  ConfigSet signature;

  bool operator==(LogicRegion const&) const = default;
};

/// Regions are ordered by id. The always-on region, when present, holds the
/// elements active in every configuration and is never gated.
struct LogicRegionPartition {
  GatingMode mode = GatingMode::clock;
  std::vector<std::string> config_names;
  std::vector<LogicRegion> regions;

  std::size_t config_count() const { return config_names.size(); }

  static bool is_always_on(LogicRegion const& r) { return r.id == always_on_id; }
  static constexpr char const* always_on_id = "always_on";

  LogicRegion const* always_on() const {
    for (auto const& r : regions) {
      if (is_always_on(r)) {
        return &r;
      }
    }
    return nullptr;
  }

  std::vector<LogicRegion const*> gateable() const {
    std::vector<LogicRegion const*> out;
    for (auto const& r : regions) {
      if (!is_always_on(r)) {
        out.push_back(&r);
      }
    }
    return out;
  }

  /// Region holding `element`, or nullptr.
  LogicRegion const* region_of(std::string const& element) const {
    for (auto const& r : regions) {
      if (std::binary_search(r.members.begin(), r.members.end(), element)) {
        return &r;
      }
    }
    return nullptr;
  }

  bool operator==(LogicRegionPartition const&) const = default;
};

namespace detail {

inline std::string region_id(ConfigSet sig, std::size_t n) { return "lr_" + sig.to_string(n); }

inline void sort_regions(std::vector<LogicRegion>& regions) {
  for (auto& r : regions) {
    std::sort(r.members.begin(), r.members.end());
  }
  std::sort(regions.begin(), regions.end(), [](auto const& a, auto const& b) { return a.id < b.id; });
}

} // namespace detail

/// Activity signature of an element: its provenance, except that a fanout
/// follows the channel that feeds it.
inline ConfigSet activity_signature(MultiDataflow const& m, Actor const& a) {
  if (a.kind == ActorKind::fanout) {
    for (std::size_t i = 0; i < m.base.channels.size(); ++i) {
      if (m.base.channels[i].sink.actor == a.instance && i < m.channel_provenance.size()) {
        return m.channel_provenance[i];
      }
    }
  }
  return m.provenance({a.instance, ""});
}

/// Actors grouped by identical activity signature; SBoxes take part only in
/// power mode.
inline LogicRegionPartition identify_logic_regions(MultiDataflow const& m, GatingMode mode) {
  LogicRegionPartition p;
  p.mode = mode;
  p.config_names = m.config_names;
  std::map<std::uint64_t, LogicRegion> by_sig;
  for (auto const& a : m.base.actors) {
    if (mode == GatingMode::clock && is_sbox(a.kind)) {
      continue;
    }
    auto sig = activity_signature(m, a);
    if (sig.empty()) {
      throw error("element '" + a.instance + "' is active in no configuration");
    }
    auto& r = by_sig[sig.bits()];
    r.signature = sig;
    r.id = sig == ConfigSet::all(m.config_count()) ? LogicRegionPartition::always_on_id
                                                   : detail::region_id(sig, m.config_count());
    r.members.push_back(a.instance);
  }
  for (auto& [_, r] : by_sig) {
    p.regions.push_back(std::move(r));
  }
  detail::sort_regions(p.regions);
  return p;
}

/// Activity added by merging regions x and y: each member turns on in the
/// configurations only the other region needed.
inline std::size_t merge_waste(LogicRegion const& x, LogicRegion const& y) {
  return x.members.size() * (y.signature - x.signature).size() + y.members.size() * (x.signature - y.signature).size();
}

/// Greedy reduction until at most `budget` regions are gateable. Each step
/// merges the pair with least waste, then least Hamming distance, then by id.
/// A merged region absorbs any other gateable region with the same signature.
inline LogicRegionPartition reduce_regions(LogicRegionPartition p, std::size_t budget) {
  if (budget == 0) {
    throw error("gating budget must be at least 1");
  }
  std::size_t n = p.config_count();
  auto gateable_count = [&] {
    return static_cast<std::size_t>(std::count_if(p.regions.begin(), p.regions.end(),
                                                   [&](LogicRegion const& r) { return !p.is_always_on(r); }));
  };
  while (gateable_count() > budget) {
    std::optional<std::tuple<std::size_t, std::size_t, std::string, std::string>> best;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < p.regions.size(); ++i) {
      for (std::size_t j = i + 1; j < p.regions.size(); ++j) {
        auto const& x = p.regions[i];
        auto const& y = p.regions[j];
        if (p.is_always_on(x) || p.is_always_on(y)) {
          continue;
        }
        auto key = std::make_tuple(merge_waste(x, y), hamming_distance(x.signature, y.signature), x.id, y.id);
        if (!best || key < *best) {
          best = key;
          bi = i;
          bj = j;
        }
      }
    }
    LogicRegion merged;
    merged.signature = p.regions[bi].signature | p.regions[bj].signature;
    merged.id = detail::region_id(merged.signature, n);
    merged.members = p.regions[bi].members;
    merged.members.insert(merged.members.end(), p.regions[bj].members.begin(), p.regions[bj].members.end());
    std::vector<LogicRegion> rest;
    for (std::size_t k = 0; k < p.regions.size(); ++k) {
      if (k == bi || k == bj) {
        continue;
      }
      if (p.regions[k].signature == merged.signature && !p.is_always_on(p.regions[k])) {
        merged.members.insert(merged.members.end(), p.regions[k].members.begin(), p.regions[k].members.end());
      } else {
        rest.push_back(std::move(p.regions[k]));
      }
    }
    rest.push_back(std::move(merged));
    p.regions = std::move(rest);
    detail::sort_regions(p.regions);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Clock gating

struct GatingCell {
  std::string region;
  /// Verilog instance name of the cell.
  std::string instance;
  /// Gated clock net.
  std::string clock;
  /// Enable net.
  std::string enable;
  /// Configurations whose select lines are ORed into the enable.
  ConfigSet configurations;

  bool operator==(GatingCell const&) const = default;
};

struct ClockGatingPlan {
  GatingTarget target = GatingTarget::asic;
  std::vector<std::string> config_names;
  std::vector<GatingCell> cells;
  /// Instance -> gated clock net; ungated instances are absent.
  std::map<std::string, std::string> clock_of;

  bool operator==(ClockGatingPlan const&) const = default;
};

/// Configuration select line of configuration c.
inline std::string config_select(std::size_t c) { return "cfg_" + std::to_string(c); }

/// "cfg_0 | cfg_2"
inline std::string enable_expression(ConfigSet s) {
  std::string out;
  for (auto c : s.indices()) {
    out += (out.empty() ? "" : " | ") + config_select(c);
  }
  return out;
}

/// One AND cell (asic) or BUFGCE (fpga) per gateable region; the always-on
/// region stays on the free-running clock. An fpga plan must fit the budget.
inline ClockGatingPlan plan_clock_gating(LogicRegionPartition const& p, GatingTarget target,
                                         std::size_t bufg_budget = default_bufg_budget) {
  if (p.mode != GatingMode::clock) {
    throw error("clock gating needs a clock-mode region partition");
  }
  auto gateable = p.gateable();
  if (target == GatingTarget::fpga && gateable.size() > bufg_budget) {
    throw error("fpga clock gating needs " + std::to_string(gateable.size()) + " BUFG cells but the budget is " +
                std::to_string(bufg_budget) + "; reduce the regions first");
  }
  ClockGatingPlan plan;
  plan.target = target;
  plan.config_names = p.config_names;
  for (auto const* r : gateable) {
    GatingCell c;
    c.region = r->id;
    c.instance = (target == GatingTarget::asic ? "cg_and_" : "cg_bufg_") + r->id;
    c.clock = "gclk_" + r->id;
    c.enable = "en_" + r->id;
    c.configurations = r->signature;
    for (auto const& m : r->members) {
      plan.clock_of[m] = c.clock;
    }
    plan.cells.push_back(std::move(c));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Power intent (CPF-like subset)

struct PowerDomain {
  std::string name;
  bool is_default = false;
  std::vector<std::string> instances;
  /// Configurations in which the domain is powered; empty for the default domain.
  ConfigSet active;

  bool operator==(PowerDomain const&) const = default;
};

struct PowerIntent {
  std::string design;
  std::vector<PowerDomain> domains;

  bool operator==(PowerIntent const&) const = default;
};

inline std::string domain_name(LogicRegion const& r) { return "PD_" + r.id; }

/// One domain per region. Switchable domains shut off when none of their
/// configurations is selected; the always-on domain is the default.
inline std::string emit_power_intent(LogicRegionPartition const& p, std::string const& design) {
  if (p.mode != GatingMode::power) {
    throw error("power intent needs a power-mode region partition");
  }
  std::ostringstream os;
  os << "# power intent for " << design << "\n";
  os << "# configurations:";
  for (std::size_t c = 0; c < p.config_count(); ++c) {
    os << " " << config_select(c) << "=" << p.config_names[c];
  }
  os << "\n";
  os << "set_cpf_version 1.1\n";
  os << "set_design " << design << "\n";
  auto instances = [](std::vector<std::string> const& ms) {
    std::string s;
    for (auto const& m : ms) {
      s += (s.empty() ? "" : " ") + m;
    }
    return s;
  };
  auto const* on = p.always_on();
  os << "create_power_domain -name PD_always_on -default";
  if (on && !on->members.empty()) {
    os << " -instances {" << instances(on->members) << "}";
  }
  os << "\n";
  for (auto const* r : p.gateable()) {
    os << "# isolation: outputs of " << domain_name(*r) << " clamp low while it is off\n";
    os << "create_power_domain -name " << domain_name(*r) << " -instances {" << instances(r->members)
       << "} -shutoff_condition {!(" << enable_expression(r->signature) << ")}\n";
  }
  os << "end_design\n";
  return os.str();
}

/// Reader for the subset written by emit_power_intent.
inline PowerIntent parse_power_intent(std::string_view text) {
  PowerIntent pi;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  static std::regex const domain_re(
      R"(^create_power_domain -name (\S+)( -default)?(?: -instances \{([^}]*)\})?(?: -shutoff_condition \{!\(([^)]*)\)\})?\s*$)");
  static std::regex const select_re(R"(^cfg_(\d+)$)");
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (ended) {
      throw parse_error("text after end_design", lineno);
    }
    std::smatch m;
    if (line.rfind("set_cpf_version ", 0) == 0) {
      continue;
    }
    if (line.rfind("set_design ", 0) == 0) {
      pi.design = line.substr(11);
      continue;
    }
    if (line == "end_design") {
      ended = true;
      continue;
    }
    if (!std::regex_match(line, m, domain_re)) {
      throw parse_error("unrecognised power intent command: " + line, lineno);
    }
    PowerDomain d;
    d.name = m[1];
    d.is_default = m[2].matched;
    std::istringstream names{std::string(m[3])};
    for (std::string n; names >> n;) {
      d.instances.push_back(n);
    }
    if (m[4].matched) {
      std::string expr = m[4];
      std::size_t start = 0;
      while (start <= expr.size()) {
        auto bar = expr.find('|', start);
        auto term = expr.substr(start, bar == std::string::npos ? std::string::npos : bar - start);
        term.erase(0, term.find_first_not_of(' '));
        term.erase(term.find_last_not_of(' ') + 1);
        std::smatch sm;
        if (!std::regex_match(term, sm, select_re)) {
          throw parse_error("bad shutoff term '" + term + "'", lineno);
        }
        d.active.insert(std::stoul(sm[1]));
        if (bar == std::string::npos) {
          break;
        }
        start = bar + 1;
      }
    } else if (!d.is_default) {
      throw parse_error("domain " + d.name + " is neither default nor switchable", lineno);
    }
    pi.domains.push_back(std::move(d));
  }
  if (!ended) {
    throw parse_error("missing end_design", lineno);
  }
  if (std::count_if(pi.domains.begin(), pi.domains.end(), [](auto const& d) { return d.is_default; }) != 1) {
    throw parse_error("power intent needs exactly one default domain", 0);
  }
  return pi;
}

// ---------------------------------------------------------------------------
// Partition dump

inline std::string serialize_logic_regions(LogicRegionPartition const& p, ClockGatingPlan const* plan = nullptr) {
  using detail::json;
  json j;
  j["format"] = "lr";
  j["version"] = 1;
  j["mode"] = to_string(p.mode);
  j["configurations"] = p.config_names;
  j["regions"] = json::array();
  for (auto const& r : p.regions) {
    j["regions"].push_back({{"id", r.id},
                            {"signature", r.signature.to_string(p.config_count())},
                            {"always_on", p.is_always_on(r)},
                            {"members", r.members}});
  }
  if (plan) {
    json g;
    g["target"] = to_string(plan->target);
    g["cells"] = json::array();
    for (auto const& c : plan->cells) {
      g["cells"].push_back({{"region", c.region},
                            {"instance", c.instance},
                            {"clock", c.clock},
                            {"enable", c.enable},
                            {"expression", enable_expression(c.configurations)}});
    }
    j["gating"] = std::move(g);
  }
  return j.dump(2) + "\n";
}

inline LogicRegionPartition parse_logic_regions(std::string_view text) {
  using detail::json;
  json j = detail::parse_json_text(text);
  LogicRegionPartition p;
  p.mode = parse_gating_mode(detail::json_field<std::string>(j, "mode", "lr"));
  p.config_names = detail::json_field<std::vector<std::string>>(j, "configurations", "lr");
  if (!j.contains("regions")) {
    throw parse_error("lr: missing field 'regions'", 0);
  }
  for (auto const& r : j.at("regions")) {
    LogicRegion region;
    region.id = detail::json_field<std::string>(r, "id", "lr region");
    auto bits = detail::json_field<std::string>(r, "signature", "lr region " + region.id);
    if (bits.size() != p.config_count()) {
      throw semantic_error("lr region " + region.id + ": signature width differs from configuration count", region.id);
    }
    for (std::size_t c = 0; c < bits.size(); ++c) {
      if (bits[c] == '1') {
        region.signature.insert(c);
      } else if (bits[c] != '0') {
        throw semantic_error("lr region " + region.id + ": signature is not a bit string", region.id);
      }
    }
    region.members = detail::json_field<std::vector<std::string>>(r, "members", "lr region " + region.id);
    p.regions.push_back(std::move(region));
  }
  detail::sort_regions(p.regions);
  return p;
}

} // namespace mdc
