#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "network.hpp"

namespace mdc {

/// A connection between two non-SBox endpoints, possibly passing through SBoxes.
struct Route {
  Endpoint source;
  Endpoint sink;
  /// Sum of the FIFO depths along the route.
  unsigned depth = 0;
  /// Channel indices in source-to-sink order.
  std::vector<std::size_t> channels;
  /// Selector value each traversed SBox needs for this route.
  std::vector<std::pair<std::string, int>> selectors;

  std::string str() const { return source.str() + "->" + sink.str(); }
};

/// Endpoint lookup over a network's channels plus route enumeration through SBoxes.
/// Holds a pointer to the network; rebuild after structural edits.
class ChannelIndex {
public:
  explicit ChannelIndex(DataflowNetwork const& net) : net_(&net) {
    for (std::size_t i = 0; i < net.channels.size(); ++i) {
      by_source_.emplace(net.channels[i].source, i);
      by_sink_.emplace(net.channels[i].sink, i);
    }
    for (auto const& a : net.actors) {
      kinds_.emplace(a.instance, a.kind);
    }
  }

  std::optional<std::size_t> from(Endpoint const& e) const {
    auto it = by_source_.find(e);
    return it == by_source_.end() ? std::nullopt : std::optional(it->second);
  }

  std::optional<std::size_t> into(Endpoint const& e) const {
    auto it = by_sink_.find(e);
    return it == by_sink_.end() ? std::nullopt : std::optional(it->second);
  }

  ActorKind kind_of(Endpoint const& e) const {
    if (e.is_network_port()) {
      return ActorKind::atomic;
    }
    auto it = kinds_.find(e.actor);
    return it == kinds_.end() ? ActorKind::atomic : it->second;
  }

  bool is_sbox_endpoint(Endpoint const& e) const { return is_sbox(kind_of(e)); }

  /// All routes leaving `source`, expanding every 1x2 branch.
  std::vector<Route> routes_from(Endpoint const& source) const {
    std::vector<Route> out;
    if (auto ch = from(source)) {
      Route r;
      r.source = source;
      walk_forward(*ch, r, out, 0);
    }
    return out;
  }

  /// All routes arriving at `sink`, expanding every 2x1 branch.
  std::vector<Route> routes_to(Endpoint const& sink) const {
    std::vector<Route> out;
    if (auto ch = into(sink)) {
      Route r;
      r.sink = sink;
      walk_backward(*ch, r, out, 0);
    }
    for (auto& r : out) {
      std::reverse(r.channels.begin(), r.channels.end());
      std::reverse(r.selectors.begin(), r.selectors.end());
    }
    return out;
  }

  /// Every route starting at a non-SBox source, in channel order.
  std::vector<Route> logical_edges() const {
    std::vector<Route> out;
    for (auto const& ch : net_->channels) {
      if (!is_sbox_endpoint(ch.source)) {
        auto rs = routes_from(ch.source);
        out.insert(out.end(), rs.begin(), rs.end());
      }
    }
    return out;
  }

private:
  void walk_forward(std::size_t ch, Route r, std::vector<Route>& out, std::size_t hops) const {
    auto const& c = net_->channels[ch];
    r.channels.push_back(ch);
    r.depth += c.depth;
    auto kind = kind_of(c.sink);
    if (!is_sbox(kind) || hops > net_->channels.size()) {
      r.sink = c.sink;
      out.push_back(std::move(r));
      return;
    }
    if (kind == ActorKind::sbox1x2) {
      for (int sel : {0, 1}) {
        auto port = std::string(sel == 0 ? sbox_port::out0 : sbox_port::out1);
        if (auto next = from(Endpoint{c.sink.actor, port})) {
          Route branch = r;
          branch.selectors.emplace_back(c.sink.actor, sel);
          walk_forward(*next, std::move(branch), out, hops + 1);
        }
      }
      return;
    }
    if (auto next = from(Endpoint{c.sink.actor, std::string(sbox_port::out)})) {
      r.selectors.emplace_back(c.sink.actor, c.sink.port == sbox_port::in1 ? 1 : 0);
      walk_forward(*next, std::move(r), out, hops + 1);
    }
  }

  void walk_backward(std::size_t ch, Route r, std::vector<Route>& out, std::size_t hops) const {
    auto const& c = net_->channels[ch];
    r.channels.push_back(ch);
    r.depth += c.depth;
    auto kind = kind_of(c.source);
    if (!is_sbox(kind) || hops > net_->channels.size()) {
      r.source = c.source;
      out.push_back(std::move(r));
      return;
    }
    if (kind == ActorKind::sbox2x1) {
      for (int sel : {0, 1}) {
        auto port = std::string(sel == 0 ? sbox_port::in0 : sbox_port::in1);
        if (auto prev = into(Endpoint{c.source.actor, port})) {
          Route branch = r;
          branch.selectors.emplace_back(c.source.actor, sel);
          walk_backward(*prev, std::move(branch), out, hops + 1);
        }
      }
      return;
    }
    if (auto prev = into(Endpoint{c.source.actor, std::string(sbox_port::in)})) {
      r.selectors.emplace_back(c.source.actor, c.source.port == sbox_port::out1 ? 1 : 0);
      walk_backward(*prev, std::move(r), out, hops + 1);
    }
  }

  DataflowNetwork const* net_;
  std::map<Endpoint, std::size_t> by_source_;
  std::map<Endpoint, std::size_t> by_sink_;
  std::map<std::string, ActorKind> kinds_;
};

} // namespace mdc
