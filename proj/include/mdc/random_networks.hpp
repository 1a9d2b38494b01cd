#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "network.hpp"

namespace mdc {

struct RandomNetworkOptions {
  std::size_t min_actors = 3;
  std::size_t max_actors = 30;
  /// Probability that an actor draws its type from the shared pool.
  double shared_ratio = 0.5;
  std::size_t shared_types = 6;
  double feedback_probability = 0.05;
  double zero_depth_probability = 0.1;
  double hierarchy_probability = 0.3;
  double fanout_probability = 0.05;
};

namespace detail {

struct TypeShape {
  std::vector<PortDecl> ports;
};

/// Port shape of a component type is a pure function of its name.
inline TypeShape shape_for(std::string const& type) {
  std::seed_seq seq(type.begin(), type.end());
  std::mt19937 rng(seq);
  static constexpr int widths[] = {8, 16, 32};
  int width = widths[rng() % 3];
  std::size_t ins = 1 + rng() % 2;
  std::size_t outs = 1 + rng() % 2;
  TypeShape s;
  for (std::size_t i = 0; i < ins; ++i) {
    s.ports.push_back({"i" + std::to_string(i), Direction::in, (i == 1 && rng() % 2) ? 8 : width, false});
  }
  for (std::size_t i = 0; i < outs; ++i) {
    s.ports.push_back({"o" + std::to_string(i), Direction::out, (i == 1 && rng() % 2) ? 8 : width, false});
  }
  return s;
}

/// Wraps actors [first, last) of a flat network into one hierarchical actor.
inline DataflowNetwork wrap_range(DataflowNetwork const& net, std::size_t first, std::size_t last, std::string const& name) {
  std::set<std::string> inside;
  for (std::size_t i = first; i < last; ++i) {
    inside.insert(net.actors[i].instance);
  }
  auto is_inside = [&](Endpoint const& e) { return !e.is_network_port() && inside.count(e.actor); };

  DataflowNetwork sub;
  sub.name = name + "_net";
  DataflowNetwork out;
  out.name = net.name;
  out.ports = net.ports;
  Actor h;
  h.instance = name;
  h.type = name + "_net";
  h.kind = ActorKind::hierarchical;
  for (std::size_t i = 0; i < net.actors.size(); ++i) {
    if (i >= first && i < last) {
      sub.actors.push_back(net.actors[i]);
    } else {
      out.actors.push_back(net.actors[i]);
    }
  }
  std::size_t boundary = 0;
  for (auto const& ch : net.channels) {
    bool si = is_inside(ch.source);
    bool ti = is_inside(ch.sink);
    if (si && ti) {
      sub.channels.push_back(ch);
    } else if (!si && !ti) {
      out.channels.push_back(ch);
    } else {
      int width = net.resolve(ch.source)->width;
      std::string port = "b" + std::to_string(boundary++);
      Direction d = ti ? Direction::in : Direction::out;
      sub.ports.push_back({port, d, width, false});
      h.ports.push_back({port, d, width, false});
      if (ti) {
        out.channels.push_back({ch.source, Endpoint{name, port}, ch.depth});
        sub.channels.push_back({Endpoint{"", port}, ch.sink, 0});
      } else {
        sub.channels.push_back({ch.source, Endpoint{"", port}, 0});
        out.channels.push_back({Endpoint{name, port}, ch.sink, ch.depth});
      }
    }
  }
  h.subnetwork = std::make_shared<DataflowNetwork const>(std::move(sub));
  out.actors.push_back(std::move(h));
  return out;
}

} // namespace detail

/// Random valid network. With probability `shared_ratio` an actor takes one of
/// `shared_types` common type names; otherwise its type is private to this network.
inline DataflowNetwork random_network(std::string const& name, std::mt19937_64& rng, RandomNetworkOptions const& opt) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> count(opt.min_actors, opt.max_actors);
  DataflowNetwork net;
  net.name = name;
  std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) {
    Actor a;
    a.instance = "a" + std::to_string(i);
    if (coin(rng) < opt.shared_ratio) {
      a.type = "S" + std::to_string(rng() % std::max<std::size_t>(1, opt.shared_types));
    } else {
      a.type = name + "_U" + std::to_string(i);
    }
    a.ports = detail::shape_for(a.type).ports;
    net.actors.push_back(std::move(a));
  }

  // Outputs still free to drive a channel, per actor index.
  std::vector<std::pair<std::size_t, std::string>> free_outputs;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto const& p : net.actors[i].ports) {
      if (p.direction == Direction::out) {
        free_outputs.emplace_back(i, p.name);
      }
    }
  }
  std::map<std::string, int> port_counter;
  auto add_port = [&](Direction d, int width) {
    std::string base = std::string(d == Direction::in ? "in" : "out") + "_w" + std::to_string(width);
    std::string pname = base + "_" + std::to_string(port_counter[base]++);
    net.ports.push_back({pname, d, width, false});
    return pname;
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (auto const& p : net.actors[i].ports) {
      if (p.direction != Direction::in) {
        continue;
      }
      unsigned depth = coin(rng) < opt.zero_depth_probability ? 0u : static_cast<unsigned>(1 + rng() % 4);
      bool feedback = coin(rng) < opt.feedback_probability;
      std::vector<std::size_t> choices;
      for (std::size_t f = 0; f < free_outputs.size(); ++f) {
        auto const& [j, port] = free_outputs[f];
        if (net.actors[j].find_port(port)->width == p.width && (j < i || (feedback && j != i))) {
          choices.push_back(f);
        }
      }
      Endpoint sink{net.actors[i].instance, p.name};
      if (!choices.empty() && coin(rng) < 0.85) {
        auto f = choices[rng() % choices.size()];
        auto [j, port] = free_outputs[f];
        free_outputs.erase(free_outputs.begin() + static_cast<std::ptrdiff_t>(f));
        net.channels.push_back({Endpoint{net.actors[j].instance, port}, sink, depth});
      } else {
        net.channels.push_back({Endpoint{"", add_port(Direction::in, p.width)}, sink, depth});
      }
    }
  }
  for (auto const& [j, port] : free_outputs) {
    auto& a = net.actors[j];
    if (coin(rng) < 0.8) {
      unsigned depth = static_cast<unsigned>(1 + rng() % 4);
      auto pname = add_port(Direction::out, a.find_port(port)->width);
      net.channels.push_back({Endpoint{a.instance, port}, Endpoint{"", pname}, depth});
    } else {
      a.find_port(port)->open = true;
    }
  }

  // Occasionally split a channel through a fanout actor with an open second leg.
  if (!net.channels.empty() && coin(rng) < opt.fanout_probability * static_cast<double>(n)) {
    auto idx = rng() % net.channels.size();
    auto ch = net.channels[idx];
    int width = net.resolve(ch.source)->width;
    Actor f;
    f.instance = "fan" + std::to_string(idx);
    f.type = "fanout_w" + std::to_string(width);
    f.kind = ActorKind::fanout;
    f.ports = {{"in", Direction::in, width, false}, {"out0", Direction::out, width, false},
               {"out1", Direction::out, width, false}};
    net.channels[idx].sink = Endpoint{f.instance, "in"};
    net.channels.push_back({Endpoint{f.instance, "out0"}, ch.sink, 1});
    auto pname = add_port(Direction::out, width);
    net.channels.push_back({Endpoint{f.instance, "out1"}, Endpoint{"", pname}, 1});
    net.actors.push_back(std::move(f));
  }

  if (net.actors.size() >= 3 && coin(rng) < opt.hierarchy_probability) {
    std::size_t len = 2 + rng() % (net.actors.size() / 2);
    std::size_t first = rng() % (net.actors.size() - len + 1);
    net = detail::wrap_range(net, first, first + len, "h");
  }
  return net;
}

/// A set of networks with distinct names "n0", "n1", ...
inline std::vector<DataflowNetwork> random_network_set(std::size_t count, std::mt19937_64& rng,
                                                       RandomNetworkOptions const& opt) {
  std::vector<DataflowNetwork> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(random_network("n" + std::to_string(i), rng, opt));
  }
  return out;
}

} // namespace mdc
