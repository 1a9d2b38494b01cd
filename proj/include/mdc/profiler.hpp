#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <exception>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "error.hpp"
#include "merge.hpp"
#include "multi_dataflow.hpp"
#include "network.hpp"

namespace mdc {

/// Back-annotated cost of one library component. Power is split into its
/// static and dynamic parts; times are in ns.
struct ComponentCost {
  double area = 0;
  double p_static = 0;
  double p_dynamic = 0;
  double cp = 0;

  bool operator==(ComponentCost const&) const = default;
};

struct Annotations {
  std::map<std::string, ComponentCost> components;

  ComponentCost const& at(std::string const& type) const {
    auto it = components.find(type);
    if (it == components.end()) {
      throw profile_error("no annotation for component type '" + type + "'");
    }
    return it->second;
  }

  bool operator==(Annotations const&) const = default;
};

/// Annotation key of an actor. SBoxes are keyed per data width.
inline std::string annotation_key(Actor const& a) {
  if (is_sbox(a.kind)) {
    return a.type + "_" + std::to_string(sbox_width(a));
  }
  return a.type;
}

struct TechRow {
  int b = 0;
  double f = 0;
  double g = 0;

  bool operator==(TechRow const&) const = default;
};

/// Cascade-delay coefficients per bus width, exact-match lookup.
struct TechnologyModel {
  std::vector<TechRow> rows;

  TechRow const& at(int b) const {
    auto it = std::find_if(rows.begin(), rows.end(), [&](TechRow const& r) { return r.b == b; });
    if (it == rows.end()) {
      throw profile_error("technology table has no row for bit width " + std::to_string(b));
    }
    return *it;
  }

  bool operator==(TechnologyModel const&) const = default;
};

// ---------------------------------------------------------------------------
// File formats

namespace detail {

inline double non_negative(json const& j, char const* key, std::string const& where) {
  auto v = json_field<double>(j, key, where);
  if (!std::isfinite(v) || v < 0) {
    throw semantic_error(where + ": '" + key + "' must be a finite value >= 0", where);
  }
  return v;
}

} // namespace detail

/// {"format":"ann","components":{"<type>":{"a":..,"p_static":..,"p_dynamic":..,"cp":..}}}
inline Annotations parse_annotations(std::string_view text) {
  using detail::json;
  json j = detail::parse_json_text(text);
  if (!j.is_object() || !j.contains("components") || !j.at("components").is_object()) {
    throw parse_error("annotations: missing object 'components'", 0);
  }
  Annotations ann;
  for (auto const& [type, v] : j.at("components").items()) {
    ComponentCost c;
    c.area = detail::non_negative(v, "a", type);
    c.p_static = detail::non_negative(v, "p_static", type);
    c.p_dynamic = detail::non_negative(v, "p_dynamic", type);
    c.cp = detail::non_negative(v, "cp", type);
    ann.components[type] = c;
  }
  return ann;
}

inline std::string serialize_annotations(Annotations const& ann) {
  using detail::json;
  json j;
  j["format"] = "ann";
  j["version"] = 1;
  j["components"] = json::object();
  for (auto const& [type, c] : ann.components) {
    j["components"][type] = {{"a", c.area}, {"p_static", c.p_static}, {"p_dynamic", c.p_dynamic}, {"cp", c.cp}};
  }
  return j.dump(2) + "\n";
}

/// {"format":"tech","rows":[{"b":16,"f":..,"g":..}]}
inline TechnologyModel parse_technology(std::string_view text) {
  using detail::json;
  json j = detail::parse_json_text(text);
  if (!j.is_object() || !j.contains("rows") || !j.at("rows").is_array()) {
    throw parse_error("technology: missing array 'rows'", 0);
  }
  TechnologyModel t;
  for (auto const& r : j.at("rows")) {
    TechRow row;
    row.b = detail::json_field<int>(r, "b", "technology row");
    std::string where = "technology row b=" + std::to_string(row.b);
    if (row.b <= 0) {
      throw semantic_error(where + ": bit width must be positive", where);
    }
    row.f = detail::non_negative(r, "f", where);
    row.g = detail::json_field<double>(r, "g", where);
    if (!std::isfinite(row.g)) {
      throw semantic_error(where + ": 'g' must be finite", where);
    }
    for (auto const& seen : t.rows) {
      if (seen.b == row.b) {
        throw semantic_error("technology table repeats bit width " + std::to_string(row.b), where);
      }
    }
    t.rows.push_back(row);
  }
  return t;
}

inline std::string serialize_technology(TechnologyModel const& t) {
  using detail::json;
  json j;
  j["format"] = "tech";
  j["version"] = 1;
  j["rows"] = json::array();
  for (auto const& r : t.rows) {
    j["rows"].push_back({{"b", r.b}, {"f", r.f}, {"g", r.g}});
  }
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Cost model

inline double cost_area(MultiDataflow const& m, Annotations const& ann) {
  double sum = 0;
  for (auto const& a : m.base.actors) {
    sum += ann.at(annotation_key(a)).area;
  }
  return sum;
}

inline double cost_area(DataflowNetwork const& n, Annotations const& ann) { return cost_area(lift(n).mdf, ann); }

struct PowerBreakdown {
  double p_static = 0;
  double p_dynamic = 0;
  double total = 0;

  bool operator==(PowerBreakdown const&) const = default;
};

inline PowerBreakdown cost_power(MultiDataflow const& m, Annotations const& ann) {
  PowerBreakdown p;
  for (auto const& a : m.base.actors) {
    auto const& c = ann.at(annotation_key(a));
    p.p_static += c.p_static;
    p.p_dynamic += c.p_dynamic;
  }
  p.total = p.p_static + p.p_dynamic;
  return p;
}

/// Vertices on the longest path made only of SBoxes joined by depth-0 channels.
inline std::size_t longest_sbox_cascade(MultiDataflow const& m) {
  auto const& net = m.base;
  std::map<std::string, std::vector<std::string>> next;
  std::map<std::string, bool> sbox;
  for (auto const& a : net.actors) {
    if (is_sbox(a.kind)) {
      sbox[a.instance] = true;
      next[a.instance];
    }
  }
  for (auto const& ch : net.channels) {
    if (ch.depth == 0 && sbox.count(ch.source.actor) && sbox.count(ch.sink.actor)) {
      next[ch.source.actor].push_back(ch.sink.actor);
    }
  }
  std::map<std::string, std::size_t> memo;
  std::map<std::string, bool> on_stack;
  std::function<std::size_t(std::string const&)> longest = [&](std::string const& s) -> std::size_t {
    if (auto it = memo.find(s); it != memo.end()) {
      return it->second;
    }
    if (on_stack[s]) {
      throw profile_error("combinational loop through SBox '" + s + "'");
    }
    on_stack[s] = true;
    std::size_t best = 0;
    for (auto const& n : next[s]) {
      best = std::max(best, longest(n));
    }
    on_stack[s] = false;
    return memo[s] = best + 1;
  };
  std::size_t out = 0;
  for (auto const& [s, _] : next) {
    out = std::max(out, longest(s));
  }
  return out;
}

/// Widest SBox data width; 0 without SBoxes.
inline int sbox_bus_width(MultiDataflow const& m) {
  int b = 0;
  for (auto const& a : m.base.actors) {
    if (is_sbox(a.kind)) {
      b = std::max(b, sbox_width(a));
    }
  }
  return b;
}

struct CriticalPath {
  double cp_static = 0;
  double cp_seq = 0;
  std::size_t cascade = 0;
  double cp = 0;
  /// MHz for cp in ns.
  double frequency = 0;
};

/// max(max CP_i, f(b) ln(N_S) + g(b)); the cascade term is 0 without SBoxes.
inline CriticalPath cost_critical_path(std::size_t cascade, int b, std::vector<double> const& input_cps,
                                       TechnologyModel const& tech) {
  CriticalPath r;
  r.cascade = cascade;
  for (double c : input_cps) {
    r.cp_static = std::max(r.cp_static, c);
  }
  if (cascade >= 1) {
    auto const& row = tech.at(b);
    r.cp_seq = row.f * std::log(static_cast<double>(cascade)) + row.g;
  }
  r.cp = std::max(r.cp_static, r.cp_seq);
  if (!(r.cp > 0)) {
    throw profile_error("critical path is not positive; annotate cp of at least one component");
  }
  r.frequency = 1000.0 / r.cp;
  return r;
}

inline CriticalPath cost_critical_path(MultiDataflow const& m, std::vector<double> const& input_cps,
                                       TechnologyModel const& tech) {
  return cost_critical_path(longest_sbox_cascade(m), sbox_bus_width(m), input_cps, tech);
}

/// Slowest component of an input network.
inline double network_critical_path(DataflowNetwork const& n, Annotations const& ann) {
  double cp = 0;
  for (auto const& a : n.actors) {
    cp = std::max(cp, ann.at(annotation_key(a)).cp);
  }
  return cp;
}

// ---------------------------------------------------------------------------
// Partitions

/// Every set partition of {0..n-1}, groups ordered by their smallest element.
/// Enumerated through restricted growth strings, so the order is fixed.
inline std::vector<std::vector<std::vector<std::size_t>>> set_partitions(std::size_t n) {
  std::vector<std::vector<std::vector<std::size_t>>> out;
  if (n == 0) {
    out.emplace_back();
    return out;
  }
  std::vector<std::size_t> rgs(n, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
    if (i == n) {
      std::vector<std::vector<std::size_t>> p(used);
      for (std::size_t k = 0; k < n; ++k) {
        p[rgs[k]].push_back(k);
      }
      out.push_back(std::move(p));
      return;
    }
    for (std::size_t g = 0; g <= used; ++g) {
      rgs[i] = g;
      rec(i + 1, std::max(used, g + 1));
    }
  };
  rgs[0] = 0;
  rec(1, 1);
  return out;
}

enum class SortKey { area, power, freq };

inline std::string_view to_string(SortKey k) {
  switch (k) {
  case SortKey::area:
    return "area";
  case SortKey::power:
    return "power";
  case SortKey::freq:
    return "freq";
  }
  return "area";
}

inline SortKey parse_sort_key(std::string_view s) {
  if (s == "area") {
    return SortKey::area;
  }
  if (s == "power") {
    return SortKey::power;
  }
  if (s == "freq") {
    return SortKey::freq;
  }
  throw error("unknown sort key '" + std::string(s) + "' (expected area, power or freq)");
}

struct ExploreLimits {
  std::size_t max_networks = 6;
  /// Groups up to this size try every merge order.
  std::size_t order_exhaustion = 4;
  bool override_limit = false;
  SortKey key = SortKey::area;
  /// 0 picks the hardware concurrency.
  unsigned threads = 0;
};

struct GroupCost {
  /// Merge order, as indices into the explored list.
  std::vector<std::size_t> order;
  std::vector<std::string> names;
  std::size_t actors = 0;
  std::size_t sboxes = 0;
  double area = 0;
  PowerBreakdown power;
  CriticalPath timing;
};

struct MergeCandidate {
  std::vector<GroupCost> groups;
  std::string partition;
  double area = 0;
  PowerBreakdown power;
  double critical_path = 0;
  double frequency = 0;
  bool pareto = false;
};

namespace detail {

/// Lexicographic cost tuple for `key`; smaller is better.
inline std::array<double, 3> rank_tuple(SortKey key, double area, double power, double freq) {
  switch (key) {
  case SortKey::power:
    return {power, area, -freq};
  case SortKey::freq:
    return {-freq, area, power};
  case SortKey::area:
    break;
  }
  return {area, power, -freq};
}

/// "{a,b},{c}": names sorted inside groups, groups sorted.
inline std::string canonical_partition(std::vector<std::vector<std::string>> groups) {
  for (auto& g : groups) {
    std::sort(g.begin(), g.end());
  }
  std::sort(groups.begin(), groups.end());
  std::string s;
  for (auto const& g : groups) {
    if (!s.empty()) {
      s += ",";
    }
    s += "{";
    for (std::size_t i = 0; i < g.size(); ++i) {
      s += (i ? "," : "") + g[i];
    }
    s += "}";
  }
  return s;
}

inline std::string join_names(std::vector<std::string> const& names) {
  std::string s;
  for (auto const& n : names) {
    s += (s.empty() ? "" : ",") + n;
  }
  return s;
}

inline GroupCost cost_group(std::vector<DataflowNetwork> const& nets, std::vector<std::size_t> const& order,
                            Annotations const& ann, TechnologyModel const& tech, MergePolicy policy) {
  std::vector<DataflowNetwork> group;
  std::vector<double> cps;
  GroupCost g;
  g.order = order;
  for (auto i : order) {
    group.push_back(nets[i]);
    g.names.push_back(nets[i].name);
    cps.push_back(network_critical_path(nets[i], ann));
  }
  policy.order = MergeOrder::given;
  auto merged = merge_all(group, policy);
  g.sboxes = merged.mdf.sbox_count();
  g.actors = merged.mdf.base.actors.size() - g.sboxes;
  g.area = cost_area(merged.mdf, ann);
  g.power = cost_power(merged.mdf, ann);
  g.timing = cost_critical_path(merged.mdf, cps, tech);
  return g;
}

/// Best merge order of one group of networks.
inline GroupCost best_group(std::vector<DataflowNetwork> const& nets, std::vector<std::size_t> members,
                            Annotations const& ann, TechnologyModel const& tech, MergePolicy const& policy,
                            ExploreLimits const& limits) {
  if (members.size() > limits.order_exhaustion) {
    std::sort(members.begin(), members.end(), [&](auto x, auto y) { return nets[x].name < nets[y].name; });
    return cost_group(nets, members, ann, tech, policy);
  }
  std::sort(members.begin(), members.end());
  std::optional<GroupCost> best;
  do {
    auto g = cost_group(nets, members, ann, tech, policy);
    if (!best) {
      best = std::move(g);
      continue;
    }
    auto a = rank_tuple(limits.key, g.area, g.power.total, g.timing.frequency);
    auto b = rank_tuple(limits.key, best->area, best->power.total, best->timing.frequency);
    if (a < b || (a == b && join_names(g.names) < join_names(best->names))) {
      best = std::move(g);
    }
  } while (std::next_permutation(members.begin(), members.end()));
  return *best;
}

} // namespace detail

/// Costs every set partition of `nets` (flat, uniquely named) and returns the
/// candidates best first. Groups run side by side: areas and powers add up,
/// the slowest group sets the frequency.
inline std::vector<MergeCandidate> explore(std::vector<DataflowNetwork> const& nets, Annotations const& ann,
                                           TechnologyModel const& tech, MergePolicy const& policy = {},
                                           ExploreLimits const& limits = {}) {
  std::size_t n = nets.size();
  if (n == 0) {
    throw profile_error("nothing to explore: no input networks");
  }
  if (n > limits.max_networks && !limits.override_limit) {
    throw profile_error("exploring " + std::to_string(n) + " networks exceeds the limit of " +
                        std::to_string(limits.max_networks) + "; raise the limit explicitly to continue");
  }
  if (n > 20) {
    throw profile_error("exploration beyond 20 networks is not supported");
  }

  // every non-empty subset is a potential group; cost each once, in parallel
  std::size_t subsets = (std::size_t{1} << n) - 1;
  std::vector<std::optional<GroupCost>> cache(subsets + 1);
  std::vector<std::exception_ptr> failures(subsets + 1);
  std::atomic<std::size_t> next{1};
  auto worker = [&] {
    for (std::size_t mask = next++; mask <= subsets; mask = next++) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask >> i & 1u) {
          members.push_back(i);
        }
      }
      try {
        cache[mask] = detail::best_group(nets, members, ann, tech, policy, limits);
      } catch (...) {
        failures[mask] = std::current_exception();
      }
    }
  };
  unsigned threads = limits.threads ? limits.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, subsets));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& t : pool) {
    t.join();
  }
  for (auto const& f : failures) {
    if (f) {
      std::rethrow_exception(f);
    }
  }

  std::vector<MergeCandidate> out;
  for (auto const& partition : set_partitions(n)) {
    MergeCandidate c;
    std::vector<std::vector<std::string>> names;
    c.frequency = std::numeric_limits<double>::infinity();
    for (auto const& group : partition) {
      std::size_t mask = 0;
      for (auto i : group) {
        mask |= std::size_t{1} << i;
      }
      auto const& g = *cache[mask];
      c.area += g.area;
      c.power.p_static += g.power.p_static;
      c.power.p_dynamic += g.power.p_dynamic;
      c.power.total += g.power.total;
      c.critical_path = std::max(c.critical_path, g.timing.cp);
      c.frequency = std::min(c.frequency, g.timing.frequency);
      names.push_back(g.names);
      c.groups.push_back(g);
    }
    c.partition = detail::canonical_partition(names);
    out.push_back(std::move(c));
  }

  for (auto& c : out) {
    c.pareto = std::none_of(out.begin(), out.end(), [&](MergeCandidate const& o) {
      bool no_worse = o.area <= c.area && o.power.total <= c.power.total && o.frequency >= c.frequency;
      bool better = o.area < c.area || o.power.total < c.power.total || o.frequency > c.frequency;
      return no_worse && better;
    });
  }
  std::sort(out.begin(), out.end(), [&](MergeCandidate const& a, MergeCandidate const& b) {
    auto ta = detail::rank_tuple(limits.key, a.area, a.power.total, a.frequency);
    auto tb = detail::rank_tuple(limits.key, b.area, b.power.total, b.frequency);
    return ta != tb ? ta < tb : a.partition < b.partition;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string serialize_dse(std::vector<MergeCandidate> const& cands, SortKey key) {
  using detail::json;
  auto power = [](PowerBreakdown const& p) {
    return json{{"static", p.p_static}, {"dynamic", p.p_dynamic}, {"total", p.total}};
  };
  json j;
  j["format"] = "dse";
  j["version"] = 1;
  j["sort_key"] = to_string(key);
  j["candidates"] = json::array();
  std::size_t rank = 1;
  for (auto const& c : cands) {
    json jc;
    jc["rank"] = rank++;
    jc["partition"] = c.partition;
    jc["pareto"] = c.pareto;
    jc["area"] = c.area;
    jc["power"] = power(c.power);
    jc["critical_path"] = c.critical_path;
    jc["frequency"] = c.frequency;
    jc["groups"] = json::array();
    for (auto const& g : c.groups) {
      json jg;
      jg["merge_order"] = g.names;
      jg["actors"] = g.actors;
      jg["sboxes"] = g.sboxes;
      jg["cascade"] = g.timing.cascade;
      jg["area"] = g.area;
      jg["power"] = power(g.power);
      jg["cp_static"] = g.timing.cp_static;
      jg["cp_cascade"] = g.timing.cp_seq;
      jg["critical_path"] = g.timing.cp;
      jg["frequency"] = g.timing.frequency;
      jc["groups"].push_back(std::move(jg));
    }
    j["candidates"].push_back(std::move(jc));
  }
  return j.dump(2) + "\n";
}

/// Fixed-width summary, one candidate per line; '*' marks the Pareto front.
inline std::string format_dse_table(std::vector<MergeCandidate> const& cands) {
  std::size_t width = 9;
  for (auto const& c : cands) {
    width = std::max(width, c.partition.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(5) << "rank" << std::setw(static_cast<int>(width) + 2) << "partition" << std::right
     << std::setw(12) << "area" << std::setw(12) << "power_mW" << std::setw(12) << "freq_MHz" << std::setw(8)
     << "sboxes" << "  pareto\n";
  std::size_t rank = 1;
  for (auto const& c : cands) {
    std::size_t sboxes = 0;
    for (auto const& g : c.groups) {
      sboxes += g.sboxes;
    }
    os << std::left << std::setw(5) << rank++ << std::setw(static_cast<int>(width) + 2) << c.partition << std::right
       << std::fixed << std::setprecision(3) << std::setw(12) << c.area << std::setw(12) << c.power.total
       << std::setw(12) << c.frequency << std::setw(8) << sboxes << "  " << (c.pareto ? "*" : "") << "\n";
  }
  return os.str();
}

} // namespace mdc
