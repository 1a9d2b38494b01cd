#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "error.hpp"
#include "logical_view.hpp"
#include "multi_dataflow.hpp"
#include "network.hpp"

namespace mdc {

/// A merged network that does not resolve to a well-formed configuration.
class extraction_error : public error {
public:
  extraction_error(std::string const& what, std::string sbox) : error(what), sbox_(std::move(sbox)) {}
  std::string const& sbox() const noexcept { return sbox_; }

private:
  std::string sbox_;
};

/// The network configuration `c` of a merged network behaves as: elements
/// serving `c` only, each SBox collapsed into a wire according to row `c`.
inline DataflowNetwork extract_configuration(MultiDataflow const& m, ConfigurationTable const& ctab, std::size_t c) {
  if (c >= m.config_count()) {
    throw error("configuration index " + std::to_string(c) + " out of range");
  }
  auto const& net = m.base;
  ChannelIndex idx(net);
  DataflowNetwork out;
  out.name = m.config_names[c];
  for (auto const& p : net.ports) {
    if (m.provenance(Endpoint{"", p.name}).contains(c)) {
      out.ports.push_back(p);
    }
  }
  for (auto const& a : net.actors) {
    if (!is_sbox(a.kind) && m.provenance(Endpoint{a.instance, ""}).contains(c)) {
      out.actors.push_back(a);
    }
  }

  auto active = [&](std::size_t ch) { return m.channel_provenance[ch].contains(c); };
  for (std::size_t i = 0; i < net.channels.size(); ++i) {
    auto const& start = net.channels[i];
    if (!active(i) || idx.is_sbox_endpoint(start.source)) {
      continue;
    }
    if (!start.source.is_network_port() && !m.provenance(Endpoint{start.source.actor, ""}).contains(c)) {
      throw extraction_error("channel " + start.source.str() + " -> " + start.sink.str() +
                                 " serves a configuration its source does not",
                             "");
    }
    Channel joined{start.source, start.sink, start.depth};
    std::size_t hops = 0;
    while (idx.is_sbox_endpoint(joined.sink)) {
      auto const& s = joined.sink.actor;
      if (++hops > net.channels.size()) {
        throw extraction_error("SBox loop through '" + s + "'", s);
      }
      int sel = ctab.selector(c, s);
      std::string next_port;
      if (idx.kind_of(joined.sink) == ActorKind::sbox1x2) {
        next_port = std::string(sel ? sbox_port::out1 : sbox_port::out0);
      } else {
        auto wanted = sel ? sbox_port::in1 : sbox_port::in0;
        if (joined.sink.port != wanted) {
          throw extraction_error("path " + start.source.str() + " reaches unselected input '" + joined.sink.port +
                                     "' of SBox '" + s + "' in configuration '" + out.name + "'",
                                 s);
        }
        next_port = std::string(sbox_port::out);
      }
      auto next = idx.from(Endpoint{s, next_port});
      if (!next || !active(*next)) {
        throw extraction_error("path " + start.source.str() + " dangles at '" + s + "." + next_port +
                                   "' in configuration '" + out.name + "'",
                               s);
      }
      joined.depth += net.channels[*next].depth;
      joined.sink = net.channels[*next].sink;
    }
    if (!joined.sink.is_network_port() && !m.provenance(Endpoint{joined.sink.actor, ""}).contains(c)) {
      throw extraction_error("path " + start.source.str() + " ends at '" + joined.sink.str() +
                                 "', which does not serve configuration '" + out.name + "'",
                             "");
    }
    out.channels.push_back(std::move(joined));
  }

  std::set<Endpoint> used;
  for (auto const& ch : out.channels) {
    used.insert(ch.source);
    used.insert(ch.sink);
  }
  for (auto& p : out.ports) {
    p.open = !used.count(Endpoint{"", p.name});
  }
  for (auto& a : out.actors) {
    for (auto& p : a.ports) {
      p.open = !used.count(Endpoint{a.instance, p.name});
    }
  }
  auto diags = validate(out);
  if (!diags.empty()) {
    throw extraction_error("configuration '" + out.name + "' is malformed: " + diags.front().message, "");
  }
  return out;
}

struct IsomorphismResult {
  bool isomorphic = false;
  /// Vertex mapping a -> b. Network ports appear as "port:<name>".
  std::map<std::string, std::string> witness;

  explicit operator bool() const { return isomorphic; }
};

namespace detail {

struct LabeledGraph {
  struct Arc {
    std::string local_port;
    std::string remote_port;
    bool outgoing;
    unsigned depth;
    std::size_t neighbor;
  };
  std::vector<std::string> names;
  std::vector<std::string> labels;
  /// Arcs keyed by local port name; ports carry at most one channel.
  std::vector<std::map<std::string, Arc>> arcs;
  std::size_t channel_count = 0;
};

inline std::string key_label(ActorKey const& k) {
  std::string s = "T:" + k.type + "|";
  for (auto const& [pk, pv] : k.parameters) {
    s += pk + "=" + pv + ";";
  }
  s += "|";
  for (auto const& p : k.signature) {
    s += p.name + ":" + std::string(to_string(p.direction)) + ":" + std::to_string(p.width) + ";";
  }
  return s;
}

inline LabeledGraph labeled_graph(DataflowNetwork const& net) {
  LabeledGraph g;
  std::map<Endpoint, std::size_t> vertex_of;
  for (auto const& p : net.ports) {
    vertex_of[Endpoint{"", p.name}] = g.names.size();
    g.names.push_back("port:" + p.name);
    g.labels.push_back("P:" + p.name + ":" + std::string(to_string(p.direction)) + ":" + std::to_string(p.width));
  }
  std::map<std::string, std::size_t> actor_vertex;
  for (auto const& a : net.actors) {
    actor_vertex[a.instance] = g.names.size();
    g.names.push_back(a.instance);
    g.labels.push_back(key_label(actor_key(a)) + "|" + std::string(to_string(a.kind)));
  }
  g.arcs.resize(g.names.size());
  auto vertex = [&](Endpoint const& e) {
    return e.is_network_port() ? vertex_of.at(e) : actor_vertex.at(e.actor);
  };
  for (auto const& ch : net.channels) {
    auto s = vertex(ch.source);
    auto t = vertex(ch.sink);
    // network ports have a single implicit port named ""
    std::string sp = ch.source.is_network_port() ? "" : ch.source.port;
    std::string tp = ch.sink.is_network_port() ? "" : ch.sink.port;
    g.arcs[s][">" + sp] = {sp, tp, true, ch.depth, t};
    g.arcs[t]["<" + tp] = {tp, sp, false, ch.depth, s};
    ++g.channel_count;
  }
  return g;
}

/// Colour refinement to a fixpoint; colours are comparable across graphs
/// because both are refined against one shared palette.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> refine_colours(LabeledGraph const& a,
                                                                                    LabeledGraph const& b) {
  std::map<std::string, std::size_t> palette;
  auto colour_of = [&](std::string const& sig) {
    return palette.emplace(sig, palette.size()).first->second;
  };
  std::vector<std::size_t> ca(a.names.size()), cb(b.names.size());
  for (std::size_t i = 0; i < ca.size(); ++i) {
    ca[i] = colour_of(a.labels[i]);
  }
  for (std::size_t i = 0; i < cb.size(); ++i) {
    cb[i] = colour_of(b.labels[i]);
  }
  auto classes = [](std::vector<std::size_t> const& x, std::vector<std::size_t> const& y) {
    std::set<std::size_t> s(x.begin(), x.end());
    s.insert(y.begin(), y.end());
    return s.size();
  };
  std::size_t count = classes(ca, cb);
  for (std::size_t round = 0; round <= a.names.size() + b.names.size(); ++round) {
    palette.clear();
    auto step = [&](LabeledGraph const& g, std::vector<std::size_t> const& cur) {
      std::vector<std::size_t> next(cur.size());
      for (std::size_t v = 0; v < cur.size(); ++v) {
        std::string sig = std::to_string(cur[v]) + "#";
        for (auto const& [key, arc] : g.arcs[v]) {
          sig += key + "/" + arc.remote_port + "/" + std::to_string(arc.depth) + "/" + std::to_string(cur[arc.neighbor]) +
                 ";";
        }
        next[v] = colour_of(sig);
      }
      return next;
    };
    auto na = step(a, ca);
    auto nb = step(b, cb);
    ca = std::move(na);
    cb = std::move(nb);
    auto n = classes(ca, cb);
    if (n == count) {
      break;
    }
    count = n;
  }
  return {ca, cb};
}

} // namespace detail

/// Isomorphism preserving actor keys, network port identity, port-level wiring
/// and FIFO depths.
inline IsomorphismResult isomorphic_labeled(DataflowNetwork const& a, DataflowNetwork const& b) {
  auto ga = detail::labeled_graph(a);
  auto gb = detail::labeled_graph(b);
  if (ga.names.size() != gb.names.size() || ga.channel_count != gb.channel_count) {
    return {};
  }
  auto [ca, cb] = detail::refine_colours(ga, gb);
  {
    auto sa = ca, sb = cb;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) {
      return {};
    }
  }

  std::size_t const n = ga.names.size();
  std::vector<std::optional<std::size_t>> fwd(n), bwd(n);

  // Mapping one vertex forces its whole connected component because each
  // port carries at most one channel. Returns false on conflict, undoing nothing.
  auto propagate = [&](std::size_t va, std::size_t vb, std::vector<std::size_t>& assigned) {
    std::deque<std::pair<std::size_t, std::size_t>> work{{va, vb}};
    while (!work.empty()) {
      auto [x, y] = work.front();
      work.pop_front();
      if (fwd[x] || bwd[y]) {
        if (fwd[x] != y || bwd[y] != x) {
          return false;
        }
        continue;
      }
      if (ca[x] != cb[y] || ga.arcs[x].size() != gb.arcs[y].size()) {
        return false;
      }
      fwd[x] = y;
      bwd[y] = x;
      assigned.push_back(x);
      for (auto const& [key, arc] : ga.arcs[x]) {
        auto it = gb.arcs[y].find(key);
        if (it == gb.arcs[y].end() || it->second.remote_port != arc.remote_port || it->second.depth != arc.depth) {
          return false;
        }
        work.emplace_back(arc.neighbor, it->second.neighbor);
      }
    }
    return true;
  };

  for (std::size_t root = 0; root < n; ++root) {
    if (fwd[root]) {
      continue;
    }
    bool placed = false;
    for (std::size_t cand = 0; cand < n && !placed; ++cand) {
      if (bwd[cand] || cb[cand] != ca[root]) {
        continue;
      }
      std::vector<std::size_t> assigned;
      if (propagate(root, cand, assigned)) {
        placed = true;
      } else {
        for (auto x : assigned) {
          bwd[*fwd[x]] = std::nullopt;
          fwd[x] = std::nullopt;
        }
      }
    }
    if (!placed) {
      return {};
    }
  }
  IsomorphismResult r;
  r.isomorphic = true;
  for (std::size_t v = 0; v < n; ++v) {
    r.witness[ga.names[v]] = gb.names[*fwd[v]];
  }
  return r;
}

struct SelectorFlip {
  std::string config;
  std::string sbox;
  /// true when the flip broke extraction or isomorphism.
  bool sensitive = false;
  std::string effect;
};

struct SensitivityReport {
  std::vector<SelectorFlip> flips;

  std::vector<SelectorFlip> insensitive() const {
    std::vector<SelectorFlip> out;
    std::copy_if(flips.begin(), flips.end(), std::back_inserter(out), [](SelectorFlip const& f) { return !f.sensitive; });
    return out;
  }
};

inline constexpr std::size_t sensitivity_sbox_limit = 16;

/// Flips each selector bit that matters to a configuration and checks that the
/// configuration changes.
inline SensitivityReport selector_sensitivity(MultiDataflow const& m, ConfigurationTable const& ctab) {
  auto sboxes = m.sboxes();
  if (sboxes.size() > sensitivity_sbox_limit) {
    throw error("selector sensitivity is limited to " + std::to_string(sensitivity_sbox_limit) + " SBoxes, got " +
                std::to_string(sboxes.size()));
  }
  SensitivityReport report;
  for (std::size_t c = 0; c < m.config_count(); ++c) {
    auto reference = extract_configuration(m, ctab, c);
    for (auto const& s : sboxes) {
      if (!m.provenance(Endpoint{s, ""}).contains(c)) {
        continue;
      }
      ConfigurationTable flipped = ctab;
      auto& bit = flipped.rows[c].selectors.at(s);
      bit ^= 1;
      SelectorFlip f{m.config_names[c], s, true, ""};
      try {
        auto changed = extract_configuration(m, flipped, c);
        if (isomorphic_labeled(changed, reference)) {
          f.sensitive = false;
          f.effect = "no observable change";
        } else {
          f.effect = "configuration differs";
        }
      } catch (extraction_error const& e) {
        f.effect = e.what();
      }
      report.flips.push_back(std::move(f));
    }
  }
  return report;
}

} // namespace mdc
