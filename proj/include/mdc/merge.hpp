#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "config_set.hpp"
#include "error.hpp"
#include "logical_view.hpp"
#include "multi_dataflow.hpp"
#include "network.hpp"

namespace mdc {

enum class MergeAlgorithm { heuristic, moreano };
enum class MergeOrder { given, canonical };
/// Only one rule exists: component type, parameters and ordered port signature.
enum class ActorEquality { type_and_signature };

inline std::string_view to_string(MergeAlgorithm a) { return a == MergeAlgorithm::heuristic ? "heuristic" : "moreano"; }
inline std::string_view to_string(MergeOrder o) { return o == MergeOrder::given ? "given" : "canonical"; }

inline MergeAlgorithm parse_merge_algorithm(std::string_view s) {
  if (s == "heuristic") {
    return MergeAlgorithm::heuristic;
  }
  if (s == "moreano") {
    return MergeAlgorithm::moreano;
  }
  throw error("unknown merge algorithm '" + std::string(s) + "'");
}

inline MergeOrder parse_merge_order(std::string_view s) {
  if (s == "given") {
    return MergeOrder::given;
  }
  if (s == "canonical") {
    return MergeOrder::canonical;
  }
  throw error("unknown merge order '" + std::string(s) + "'");
}

struct MergePolicy {
  MergeAlgorithm algorithm = MergeAlgorithm::heuristic;
  ActorEquality actor_equality = ActorEquality::type_and_signature;
  MergeOrder order = MergeOrder::given;
  /// Vertex weights for the clique search, by component type. Missing types weigh 1.
  std::map<std::string, double> actor_weights;
};

/// Actor and edge correspondence between an existing network `a` and a newcomer `b`.
struct Correspondence {
  /// b instance -> a instance
  std::map<std::string, std::string> actors;
  /// (index into a's logical edges, index into b's channels)
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  double score = 0.0;
};

namespace detail {

inline std::map<std::string, ActorKey> shareable_keys(DataflowNetwork const& net) {
  std::map<std::string, ActorKey> out;
  for (auto const& a : net.actors) {
    if (!is_sbox(a.kind)) {
      out.emplace(a.instance, actor_key(a));
    }
  }
  return out;
}

/// Incremental injective b->a actor mapping restricted to equal keys.
struct ActorMatching {
  std::map<std::string, ActorKey> const& a_keys;
  std::map<std::string, ActorKey> const& b_keys;
  std::map<std::string, std::string> b2a;
  std::map<std::string, std::string> a2b;

  bool can_match(std::string const& xb, std::string const& xa) const {
    if (b2a.count(xb) || a2b.count(xa)) {
      return false;
    }
    auto ia = a_keys.find(xa);
    auto ib = b_keys.find(xb);
    return ia != a_keys.end() && ib != b_keys.end() && ia->second == ib->second;
  }

  void match(std::string const& xb, std::string const& xa) {
    b2a[xb] = xa;
    a2b[xa] = xb;
  }

  /// Pairs leftover b actors with the first unmatched equal-key a actor, both in name order.
  template <typename OnMatch>
  void complete(OnMatch&& on_match) {
    for (auto const& [xb, kb] : b_keys) {
      if (b2a.count(xb)) {
        continue;
      }
      for (auto const& [xa, ka] : a_keys) {
        if (!a2b.count(xa) && ka == kb) {
          match(xb, xa);
          on_match(xb);
          break;
        }
      }
    }
  }
};

inline double vertex_weight(std::map<std::string, double> const& weights, std::string const& type) {
  auto it = weights.find(type);
  return it == weights.end() ? 1.0 : it->second;
}

/// Greedy maximum-weight clique over the compatibility graph of (a edge, b edge) pairs.
inline Correspondence moreano_clique(DataflowNetwork const& a, std::vector<Route> const& a_edges,
                                     DataflowNetwork const& b, std::map<std::string, double> const& weights) {
  auto a_keys = shareable_keys(a);
  auto b_keys = shareable_keys(b);

  auto side_ok = [&](Endpoint const& ea, Endpoint const& eb) {
    if (eb.is_network_port() || ea.is_network_port()) {
      return eb.is_network_port() && ea.is_network_port() && ea.port == eb.port;
    }
    if (ea.port != eb.port) {
      return false;
    }
    auto ia = a_keys.find(ea.actor);
    auto ib = b_keys.find(eb.actor);
    return ia != a_keys.end() && ib != b_keys.end() && ia->second == ib->second;
  };

  struct Candidate {
    std::size_t ea, eb;
    std::string order;
  };
  std::vector<Candidate> candidates;
  for (std::size_t j = 0; j < b.channels.size(); ++j) {
    auto const& cb = b.channels[j];
    for (std::size_t i = 0; i < a_edges.size(); ++i) {
      auto const& ra = a_edges[i];
      if (ra.depth == cb.depth && side_ok(ra.source, cb.source) && side_ok(ra.sink, cb.sink)) {
        candidates.push_back({i, j, cb.source.str() + "->" + cb.sink.str() + "|" + ra.str()});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](Candidate const& x, Candidate const& y) { return x.order < y.order; });

  Correspondence out;
  std::map<std::string, std::string> b2a, a2b;
  std::vector<bool> used(candidates.size(), false);
  std::set<std::size_t> used_a, used_b;

  // Actors newly mapped by a candidate, or nullopt when it conflicts with the clique.
  auto implied = [&](Candidate const& c) -> std::optional<std::vector<std::pair<std::string, std::string>>> {
    std::vector<std::pair<std::string, std::string>> fresh;
    auto const& ra = a_edges[c.ea];
    auto const& cb = b.channels[c.eb];
    for (auto const& [ea, eb] : {std::pair{ra.source, cb.source}, std::pair{ra.sink, cb.sink}}) {
      if (eb.is_network_port()) {
        continue;
      }
      auto ib = b2a.find(eb.actor);
      auto ia = a2b.find(ea.actor);
      if (ib != b2a.end() || ia != a2b.end()) {
        if (ib == b2a.end() || ib->second != ea.actor) {
          return std::nullopt;
        }
        continue;
      }
      bool dup = false;
      for (auto const& [fb, fa] : fresh) {
        if (fb == eb.actor || fa == ea.actor) {
          if (fb != eb.actor || fa != ea.actor) {
            return std::nullopt;
          }
          dup = true;
        }
      }
      if (!dup) {
        fresh.emplace_back(eb.actor, ea.actor);
      }
    }
    return fresh;
  };

  for (;;) {
    std::optional<std::size_t> best;
    double best_gain = 0.0;
    std::vector<std::pair<std::string, std::string>> best_fresh;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      auto const& c = candidates[i];
      if (used[i] || used_a.count(c.ea) || used_b.count(c.eb)) {
        continue;
      }
      auto fresh = implied(c);
      if (!fresh) {
        continue;
      }
      double gain = 1.0;
      for (auto const& [fb, fa] : *fresh) {
        gain += vertex_weight(weights, b.find_actor(fb)->type);
      }
      if (!best || gain > best_gain) {
        best = i;
        best_gain = gain;
        best_fresh = std::move(*fresh);
      }
    }
    if (!best) {
      break;
    }
    auto const& c = candidates[*best];
    used[*best] = true;
    used_a.insert(c.ea);
    used_b.insert(c.eb);
    for (auto const& [fb, fa] : best_fresh) {
      b2a[fb] = fa;
      a2b[fa] = fb;
    }
    out.edges.emplace_back(c.ea, c.eb);
    out.score += best_gain;
  }
  out.actors = std::move(b2a);
  return out;
}

/// Seeded growth: start from shared network ports, extend along b's channels
/// through a's routes, then pair leftovers by name and grow again.
inline std::map<std::string, std::string> heuristic_correspondence(DataflowNetwork const& a, ChannelIndex const& idx,
                                                                   DataflowNetwork const& b) {
  auto a_keys = shareable_keys(a);
  auto b_keys = shareable_keys(b);
  ActorMatching mm{a_keys, b_keys, {}, {}};
  ChannelIndex bidx(b);
  std::deque<std::string> queue;

  // Route candidates for b endpoint `other` reached from a-side routes; picks
  // equal depth first, then the smallest a instance name.
  auto pick = [&](std::vector<Route> const& routes, bool forward, Channel const& cb) -> std::optional<std::string> {
    auto const& other = forward ? cb.sink : cb.source;
    std::optional<std::pair<bool, std::string>> best;
    for (auto const& r : routes) {
      auto const& ea = forward ? r.sink : r.source;
      if (ea.is_network_port() || ea.port != other.port || !mm.can_match(other.actor, ea.actor)) {
        continue;
      }
      std::pair<bool, std::string> rank{r.depth != cb.depth, ea.actor};
      if (!best || rank < *best) {
        best = rank;
      }
    }
    if (!best) {
      return std::nullopt;
    }
    return best->second;
  };

  auto seed = [&](Channel const& cb, Endpoint const& a_start, bool forward) {
    auto const& other = forward ? cb.sink : cb.source;
    if (other.is_network_port() || mm.b2a.count(other.actor)) {
      return;
    }
    auto routes = forward ? idx.routes_from(a_start) : idx.routes_to(a_start);
    if (auto xa = pick(routes, forward, cb)) {
      mm.match(other.actor, *xa);
      queue.push_back(other.actor);
    }
  };

  auto grow = [&] {
    while (!queue.empty()) {
      auto xb = queue.front();
      queue.pop_front();
      auto const& xa = mm.b2a.at(xb);
      for (auto const& p : b.find_actor(xb)->ports) {
        Endpoint eb{xb, p.name};
        Endpoint ea{xa, p.name};
        if (p.direction == Direction::out) {
          if (auto ch = bidx.from(eb)) {
            seed(b.channels[*ch], ea, true);
          }
        } else if (auto ch = bidx.into(eb)) {
          seed(b.channels[*ch], ea, false);
        }
      }
    }
  };

  for (auto const& p : b.ports) {
    if (!a.find_port(p.name)) {
      continue;
    }
    Endpoint e{"", p.name};
    if (p.direction == Direction::in) {
      if (auto ch = bidx.from(e)) {
        seed(b.channels[*ch], e, true);
      }
    } else if (auto ch = bidx.into(e)) {
      seed(b.channels[*ch], e, false);
    }
  }
  grow();
  mm.complete([&](std::string const& xb) {
    queue.push_back(xb);
    grow();
  });
  return mm.b2a;
}

inline std::string unique_instance(DataflowNetwork const& net, std::string const& base, std::size_t config) {
  if (!net.find_actor(base)) {
    return base;
  }
  std::string candidate = base + "_" + std::to_string(config);
  for (int n = 2; net.find_actor(candidate); ++n) {
    candidate = base + "_" + std::to_string(config) + "_" + std::to_string(n);
  }
  return candidate;
}

inline std::string next_sbox_name(DataflowNetwork const& net) {
  std::size_t counter = 0;
  for (auto const& a : net.actors) {
    if (is_sbox(a.kind)) {
      ++counter;
    }
  }
  while (net.find_actor("sbox_" + std::to_string(counter))) {
    ++counter;
  }
  return "sbox_" + std::to_string(counter);
}

} // namespace detail

/// Clique-based correspondence between two flat networks (vertex and edge pairs).
inline Correspondence build_moreano_mapping(DataflowNetwork const& a, DataflowNetwork const& b,
                                            std::map<std::string, double> const& weights = {}) {
  ChannelIndex idx(a);
  return detail::moreano_clique(a, idx.logical_edges(), b, weights);
}

/// Moves FIFO depth off SBox-internal segments: a 1x2's incoming depth goes to
/// each outgoing channel, a 2x1's outgoing depth to each incoming channel.
/// Path depth sums are unchanged.
inline MultiDataflow place_fifos(MultiDataflow m) {
  auto& net = m.base;
  ChannelIndex idx(net);
  // topological order over SBox-to-SBox channels, ties by declaration order
  std::vector<std::string> order;
  {
    std::map<std::string, int> indegree;
    std::vector<std::string> sboxes = m.sboxes();
    for (auto const& s : sboxes) {
      indegree[s] = 0;
    }
    for (auto const& ch : net.channels) {
      if (idx.is_sbox_endpoint(ch.source) && idx.is_sbox_endpoint(ch.sink)) {
        ++indegree[ch.sink.actor];
      }
    }
    std::set<std::string> done;
    while (order.size() < sboxes.size()) {
      bool progressed = false;
      for (auto const& s : sboxes) {
        if (done.count(s) || indegree[s] != 0) {
          continue;
        }
        order.push_back(s);
        done.insert(s);
        progressed = true;
        for (auto const& ch : net.channels) {
          if (ch.source.actor == s && idx.is_sbox_endpoint(ch.sink)) {
            --indegree[ch.sink.actor];
          }
        }
        break;
      }
      if (!progressed) {
        for (auto const& s : sboxes) {
          if (!done.count(s)) {
            order.push_back(s);
            done.insert(s);
          }
        }
      }
    }
  }
  auto push = [&](std::optional<std::size_t> from, std::vector<std::optional<std::size_t>> to) {
    if (!from || net.channels[*from].depth == 0) {
      return;
    }
    unsigned d = net.channels[*from].depth;
    bool moved = false;
    for (auto t : to) {
      if (t) {
        net.channels[*t].depth += d;
        moved = true;
      }
    }
    if (moved) {
      net.channels[*from].depth = 0;
    }
  };
  for (auto const& s : order) {
    if (idx.kind_of(Endpoint{s, ""}) == ActorKind::sbox1x2) {
      push(idx.into(Endpoint{s, std::string(sbox_port::in)}),
           {idx.from(Endpoint{s, std::string(sbox_port::out0)}), idx.from(Endpoint{s, std::string(sbox_port::out1)})});
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (idx.kind_of(Endpoint{*it, ""}) == ActorKind::sbox2x1) {
      push(idx.from(Endpoint{*it, std::string(sbox_port::out)}),
           {idx.into(Endpoint{*it, std::string(sbox_port::in0)}), idx.into(Endpoint{*it, std::string(sbox_port::in1)})});
    }
  }
  return m;
}

/// Folds flat network `b` into `a` as a new configuration.
inline MergeResult merge_pair(MergeResult const& a, DataflowNetwork const& b, MergePolicy const& policy = {}) {
  if (!b.is_flat()) {
    throw merge_error("network '" + b.name + "' must be flattened before merging");
  }
  require_valid(b);
  MergeResult out = a;
  auto& m = out.mdf;
  auto& base = m.base;
  std::size_t const k = m.config_count();
  if (k >= max_configurations) {
    throw merge_error("at most " + std::to_string(max_configurations) + " networks can be merged");
  }
  if (std::find(m.config_names.begin(), m.config_names.end(), b.name) != m.config_names.end()) {
    throw merge_error("network name '" + b.name + "' is used by more than one input");
  }
  ConfigSet const K = ConfigSet::single(k);
  m.config_names.push_back(b.name);

  // Network ports are shared by name.
  for (auto const& p : b.ports) {
    auto it = std::find_if(base.ports.begin(), base.ports.end(), [&](PortDecl const& q) { return q.name == p.name; });
    if (it != base.ports.end()) {
      if (it->direction != p.direction || it->width != p.width) {
        throw merge_error("network port '" + p.name + "' of '" + b.name + "' (" + std::string(to_string(p.direction)) +
                          ", " + std::to_string(p.width) + " bits) conflicts with an earlier input (" +
                          std::string(to_string(it->direction)) + ", " + std::to_string(it->width) + " bits)");
      }
      it->open = it->open && p.open;
    } else {
      base.ports.push_back(p);
    }
    m.port_provenance[p.name] |= K;
  }

  std::map<std::string, std::string> phi;
  {
    ChannelIndex idx(base);
    if (policy.algorithm == MergeAlgorithm::heuristic) {
      phi = detail::heuristic_correspondence(base, idx, b);
    } else {
      phi = detail::moreano_clique(base, idx.logical_edges(), b, policy.actor_weights).actors;
      auto a_keys = detail::shareable_keys(base);
      auto b_keys = detail::shareable_keys(b);
      detail::ActorMatching mm{a_keys, b_keys, phi, {}};
      for (auto const& [xb, xa] : phi) {
        mm.a2b[xa] = xb;
      }
      mm.complete([](std::string const&) {});
      phi = mm.b2a;
    }
  }

  std::map<std::string, std::string> name_of;
  for (auto const& actor : b.actors) {
    if (auto it = phi.find(actor.instance); it != phi.end()) {
      name_of[actor.instance] = it->second;
      auto* shared = base.find_actor(it->second);
      for (auto& p : shared->ports) {
        p.open = p.open && actor.find_port(p.name)->open;
      }
    } else {
      Actor copy = actor;
      copy.instance = detail::unique_instance(base, actor.instance, k);
      name_of[actor.instance] = copy.instance;
      base.actors.push_back(std::move(copy));
    }
    m.actor_provenance[name_of[actor.instance]] |= K;
  }
  auto map_endpoint = [&](Endpoint const& e) { return e.is_network_port() ? e : Endpoint{name_of.at(e.actor), e.port}; };

  std::map<std::string, int> row_k;
  for (auto const& ch : b.channels) {
    Endpoint p = map_endpoint(ch.source);
    Endpoint q = map_endpoint(ch.sink);
    ChannelIndex idx(base);

    bool reused = false;
    for (auto const& r : idx.routes_from(p)) {
      if (r.sink == q && r.depth == ch.depth) {
        for (auto c : r.channels) {
          m.channel_provenance[c] |= K;
        }
        for (auto const& [s, v] : r.selectors) {
          m.actor_provenance[s] |= K;
          row_k[s] = v;
        }
        reused = true;
        break;
      }
    }
    if (reused) {
      continue;
    }

    int width = base.resolve(p)->width;
    Endpoint src_end = p;
    Endpoint dst_end = q;
    if (auto c = idx.from(p)) {
      auto name = detail::next_sbox_name(base);
      base.actors.push_back(make_sbox(ActorKind::sbox1x2, name, width));
      ConfigSet prov = m.channel_provenance[*c] | K;
      base.channels[*c].source = Endpoint{name, std::string(sbox_port::out0)};
      base.channels.push_back(Channel{p, Endpoint{name, std::string(sbox_port::in)}, 0});
      m.channel_provenance.push_back(prov);
      m.actor_provenance[name] = prov;
      row_k[name] = 1;
      src_end = Endpoint{name, std::string(sbox_port::out1)};
    }
    if (auto c = idx.into(q)) {
      auto name = detail::next_sbox_name(base);
      base.actors.push_back(make_sbox(ActorKind::sbox2x1, name, width));
      ConfigSet prov = m.channel_provenance[*c] | K;
      base.channels[*c].sink = Endpoint{name, std::string(sbox_port::in0)};
      base.channels.push_back(Channel{Endpoint{name, std::string(sbox_port::out)}, q, 0});
      m.channel_provenance.push_back(prov);
      m.actor_provenance[name] = prov;
      row_k[name] = 1;
      dst_end = Endpoint{name, std::string(sbox_port::in1)};
    }
    base.channels.push_back(Channel{src_end, dst_end, ch.depth});
    m.channel_provenance.push_back(K);
  }

  auto sboxes = m.sboxes();
  for (auto& row : out.ctab.rows) {
    for (auto const& s : sboxes) {
      row.selectors.emplace(s, 0);
    }
  }
  ConfigRow row{b.name, static_cast<int>(k), {}};
  for (auto const& s : sboxes) {
    auto it = row_k.find(s);
    row.selectors[s] = it == row_k.end() ? 0 : it->second;
  }
  out.ctab.rows.push_back(std::move(row));
  return out;
}

/// Input networks in the order they will be folded.
inline std::vector<DataflowNetwork> merge_sequence(std::vector<DataflowNetwork> nets, MergeOrder order) {
  if (order == MergeOrder::canonical) {
    std::stable_sort(nets.begin(), nets.end(),
                     [](DataflowNetwork const& x, DataflowNetwork const& y) { return x.name < y.name; });
  }
  return nets;
}

/// Left fold of merge_pair over the inputs. Configuration indices follow the merge order.
inline MergeResult merge_all(std::vector<DataflowNetwork> const& nets, MergePolicy const& policy = {}) {
  if (nets.empty()) {
    throw merge_error("nothing to merge");
  }
  if (nets.size() > max_configurations) {
    throw merge_error("at most " + std::to_string(max_configurations) + " networks can be merged");
  }
  auto seq = merge_sequence(nets, policy.order);
  std::set<std::string> names;
  for (auto const& n : seq) {
    if (!n.is_flat()) {
      throw merge_error("network '" + n.name + "' must be flattened before merging");
    }
    if (!names.insert(n.name).second) {
      throw merge_error("network name '" + n.name + "' is used by more than one input");
    }
  }
  require_valid(seq.front());
  MergeResult r = lift(seq.front());
  for (std::size_t i = 1; i < seq.size(); ++i) {
    r = merge_pair(r, seq[i], policy);
  }
  r.mdf = place_fifos(std::move(r.mdf));
  return r;
}

} // namespace mdc
