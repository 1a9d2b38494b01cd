#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "error.hpp"
#include "network.hpp"

namespace mdc {

/// Recursive sub-network inclusion detected while flattening.
class hierarchy_cycle_error : public error {
public:
  explicit hierarchy_cycle_error(std::vector<std::string> chain)
      : error(describe(chain)), chain_(std::move(chain)) {}

  std::vector<std::string> const& chain() const noexcept { return chain_; }

private:
  static std::string describe(std::vector<std::string> const& chain) {
    std::string s = "recursive hierarchy: ";
    for (std::size_t i = 0; i < chain.size(); ++i) {
      s += (i ? " -> " : "") + chain[i];
    }
    return s;
  }
  std::vector<std::string> chain_;
};

namespace detail {

struct FlattenFrame {
  DataflowNetwork const* net;
  std::string label;
};

inline DataflowNetwork flatten_impl(DataflowNetwork const& net, std::vector<FlattenFrame>& stack) {
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (stack[i].net == &net) {
      std::vector<std::string> chain;
      for (std::size_t j = i; j < stack.size(); ++j) {
        chain.push_back(stack[j].label);
      }
      chain.push_back(net.name);
      throw hierarchy_cycle_error(std::move(chain));
    }
  }
  stack.push_back({&net, net.name});

  DataflowNetwork out;
  out.name = net.name;
  out.ports = net.ports;

  // Boundary ports of an exploded actor H keep the endpoint (H, p) on both
  // sides: the outer channel ends (or starts) there, and the inner channel
  // that touched sub-network port p is re-keyed to start (or end) there.
  std::set<std::string> exploded;
  std::vector<Channel> segments;
  std::set<std::string> names;

  for (auto const& a : net.actors) {
    if (a.kind != ActorKind::hierarchical) {
      out.actors.push_back(a);
      names.insert(a.instance);
    }
  }
  for (auto const& a : net.actors) {
    if (a.kind != ActorKind::hierarchical) {
      continue;
    }
    if (!a.subnetwork) {
      throw semantic_error("hierarchical actor '" + a.instance + "' has no sub-network", a.instance);
    }
    exploded.insert(a.instance);
    auto inner = flatten_impl(*a.subnetwork, stack);
    auto mangle = [&](std::string const& child) { return a.instance + "_" + child; };
    for (auto child : inner.actors) {
      child.instance = mangle(child.instance);
      if (!names.insert(child.instance).second) {
        throw semantic_error("flattening '" + a.instance + "' produces duplicate instance name '" + child.instance +
                                 "'",
                             child.instance);
      }
      out.actors.push_back(std::move(child));
    }
    for (auto ch : inner.channels) {
      ch.source = ch.source.is_network_port() ? Endpoint{a.instance, ch.source.port}
                                              : Endpoint{mangle(ch.source.actor), ch.source.port};
      ch.sink = ch.sink.is_network_port() ? Endpoint{a.instance, ch.sink.port}
                                          : Endpoint{mangle(ch.sink.actor), ch.sink.port};
      segments.push_back(std::move(ch));
    }
  }
  for (auto const& ch : net.channels) {
    segments.push_back(ch);
  }

  auto is_boundary = [&](Endpoint const& e) { return !e.is_network_port() && exploded.count(e.actor) > 0; };

  std::map<Endpoint, std::size_t> by_source;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    by_source.emplace(segments[i].source, i);
  }

  std::set<Endpoint> stranded;
  for (auto const& seg : segments) {
    if (is_boundary(seg.source)) {
      continue;
    }
    Channel joined = seg;
    bool complete = true;
    std::size_t hops = 0;
    while (is_boundary(joined.sink)) {
      auto it = by_source.find(joined.sink);
      if (it == by_source.end() || ++hops > segments.size()) {
        complete = false;
        break;
      }
      joined.depth += segments[it->second].depth;
      joined.sink = segments[it->second].sink;
    }
    if (complete) {
      out.channels.push_back(std::move(joined));
    } else {
      stranded.insert(seg.source);
    }
  }
  // Sinks reached only from an unconnected boundary port.
  std::set<Endpoint> reached;
  for (auto const& ch : out.channels) {
    reached.insert(ch.sink);
  }
  for (auto const& seg : segments) {
    if (is_boundary(seg.source) && !is_boundary(seg.sink) && !reached.count(seg.sink)) {
      stranded.insert(seg.sink);
    }
  }
  for (auto const& e : stranded) {
    if (e.is_network_port()) {
      for (auto& p : out.ports) {
        if (p.name == e.port) {
          p.open = true;
        }
      }
      continue;
    }
    if (auto* actor = out.find_actor(e.actor)) {
      if (auto* p = actor->find_port(e.port)) {
        p->open = true;
      }
    }
  }

  stack.pop_back();
  return out;
}

} // namespace detail

/// Explodes hierarchical actors recursively. Children are renamed
/// `<parent>_<child>`; boundary ports are spliced into direct channels whose
/// depth is the sum of the joined segments.
inline DataflowNetwork flatten(DataflowNetwork const& net) {
  std::vector<detail::FlattenFrame> stack;
  auto out = detail::flatten_impl(net, stack);
  require_valid(out);
  return out;
}

} // namespace mdc
