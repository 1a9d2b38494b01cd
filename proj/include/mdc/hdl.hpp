#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "multi_dataflow.hpp"
#include "power.hpp"
#include "protocol.hpp"
#include "verilog.hpp"

namespace mdc {

struct TopPort {
  std::string name;
  Direction direction = Direction::in;
  int width = 1;

  bool operator==(TopPort const&) const = default;
};

struct NetWire {
  std::string name;
  int width = 1;

  bool operator==(NetWire const&) const = default;
};

struct ContinuousAssign {
  std::string lhs;
  std::string rhs;

  bool operator==(ContinuousAssign const&) const = default;
};

struct PortBinding {
  std::string formal;
  std::string actual;

  bool operator==(PortBinding const&) const = default;
};

struct NetlistInstance {
  std::string module;
  std::string name;
  /// Parameter name -> Verilog literal.
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<PortBinding> bindings;

  std::string const* actual_of(std::string_view formal) const {
    for (auto const& b : bindings) {
      if (b.formal == formal) {
        return &b.actual;
      }
    }
    return nullptr;
  }

  bool operator==(NetlistInstance const&) const = default;
};

/// Black-box declaration of a library component as seen from the netlist.
struct ModuleStub {
  std::string module;
  std::vector<std::string> parameters;
  std::vector<TopPort> ports;

  bool operator==(ModuleStub const&) const = default;
};

struct NetlistPlan {
  std::string top = "multi_dataflow";
  ProtocolSpec protocol;
  std::vector<std::string> config_names;
  /// ceil(log2 N); 0 for a single configuration.
  int id_width = 0;
  std::vector<TopPort> ports;
  std::vector<NetWire> wires;
  std::vector<ContinuousAssign> assigns;
  std::vector<NetlistInstance> instances;
  ConfigurationTable lut;
  /// SBox instances in selector order.
  std::vector<std::string> lut_outputs;
  std::vector<ModuleStub> stubs;
  bool uses_sbox1x2 = false;
  bool uses_sbox2x1 = false;
  bool uses_fifo = false;
  std::optional<ClockGatingPlan> gating;

  NetlistInstance const* find_instance(std::string_view name) const {
    for (auto const& i : instances) {
      if (i.name == name) {
        return &i;
      }
    }
    return nullptr;
  }

  bool operator==(NetlistPlan const&) const = default;
};

namespace hdl {

inline constexpr std::string_view lut_module = "config_lut";
inline constexpr std::string_view lut_instance = "u_config_lut";
inline constexpr std::string_view fifo_module = "fifo_wrapper";
inline constexpr std::string_view sbox1x2_module = "sbox_1x2";
inline constexpr std::string_view sbox2x1_module = "sbox_2x1";
inline constexpr std::string_view gate_module = "cg_and";
inline constexpr std::string_view bufg_module = "BUFGCE";
inline constexpr std::string_view config_id = "config_id";

inline int id_width(std::size_t configs) {
  return configs <= 1 ? 0 : static_cast<int>(std::bit_width(configs - 1));
}

/// "sbox_2" before "sbox_10": digit runs compare by value.
inline bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ie = i;
      std::size_t je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) {
        ++ie;
      }
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) {
        ++je;
      }
      auto na = a.substr(i, ie - i);
      auto nb = b.substr(j, je - j);
      while (na.size() > 1 && na[0] == '0') {
        na.remove_prefix(1);
      }
      while (nb.size() > 1 && nb[0] == '0') {
        nb.remove_prefix(1);
      }
      if (na.size() != nb.size()) {
        return na.size() < nb.size();
      }
      if (na != nb) {
        return na < nb;
      }
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) {
        return a[i] < b[j];
      }
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

/// Selector outputs of a table, in SBox creation order.
inline std::vector<std::string> selector_order(ConfigurationTable const& ctab) {
  std::set<std::string> names;
  for (auto const& r : ctab.rows) {
    for (auto const& [s, v] : r.selectors) {
      names.insert(s);
    }
  }
  std::vector<std::string> out(names.begin(), names.end());
  std::sort(out.begin(), out.end(), [](auto const& x, auto const& y) { return natural_less(x, y); });
  return out;
}

inline std::string range(int width) { return width == 1 ? "" : "[" + std::to_string(width - 1) + ":0] "; }

inline std::string fill(int width, bool one) {
  std::string bit = one ? "1'b1" : "1'b0";
  return width == 1 ? bit : "{" + std::to_string(width) + "{" + bit + "}}";
}

/// Value a backward signal holds while its port is not selected: "full"
/// reads as blocked, everything else as inactive.
inline bool blocked_value(ProtocolSignal const& s) { return s.inverted(); }

/// Value a sink that always accepts drives on a backward signal.
inline bool accepting_value(ProtocolSignal const& s) { return !s.inverted(); }

inline std::string parameter_literal(std::string const& v) {
  static auto const is_number = [](std::string const& s) {
    if (s.empty()) {
      return false;
    }
    std::size_t i = s[0] == '-' ? 1 : 0;
    if (i == s.size()) {
      return false;
    }
    bool quote = false;
    for (; i < s.size(); ++i) {
      char c = s[i];
      if (c == '\'') {
        if (quote) {
          return false;
        }
        quote = true;
      } else if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) {
        return false;
      } else if (!quote && !std::isdigit(static_cast<unsigned char>(c))) {
        return false;
      }
    }
    return true;
  };
  if (is_number(v)) {
    return v;
  }
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') {
      out += '\\';
    }
    out += c;
  }
  return out + "\"";
}

inline std::string endpoint_token(Endpoint const& e) { return e.is_network_port() ? e.port : e.actor + "_" + e.port; }

inline std::string wire_name(std::string const& src_tok, std::string const& dst_tok, ProtocolSignal const& s) {
  return "w_" + src_tok + "_" + dst_tok + "_" + s.label;
}

/// Direction of one signal of a port, seen from the port's owner.
inline Direction signal_direction(Direction port, ProtocolSignal const& s) {
  bool fwd = s.flow == SignalFlow::forward;
  return (port == Direction::out) == fwd ? Direction::out : Direction::in;
}

class NameTable {
public:
  void add(std::string const& name, std::string const& what) {
    if (!vlog::is_identifier(name)) {
      throw hdl_error(what + " '" + name + "' is not a legal Verilog identifier");
    }
    auto [it, fresh] = used_.emplace(name, what);
    if (!fresh) {
      throw hdl_error(what + " '" + name + "' collides with " + it->second + " of the same name");
    }
  }

private:
  std::map<std::string, std::string> used_;
};

} // namespace hdl

/// Builds the structural netlist of a merged network. Throws hdl_error on
/// illegal identifiers, name clashes, a protocol the network cannot use, or
/// one component type instantiated with different port signatures.
inline NetlistPlan plan_netlist(MultiDataflow const& m, ConfigurationTable const& ctab,
                                ProtocolSpec const& protocol = default_protocol(),
                                ClockGatingPlan const* gating = nullptr, std::string top = "multi_dataflow") {
  using namespace hdl;
  if (auto diags = validate(m, ctab); !diags.empty()) {
    throw hdl_error("cannot emit an invalid merged network: " + diags.front().message);
  }
  if (auto issues = validate(protocol); !issues.empty()) {
    throw hdl_error("protocol '" + protocol.name + "': " + issues.front());
  }
  auto const& net = m.base;

  NetlistPlan plan;
  plan.top = std::move(top);
  plan.protocol = protocol;
  plan.config_names = m.config_names;
  plan.id_width = id_width(m.config_count());
  plan.lut = ctab;
  plan.lut_outputs = selector_order(ctab);
  if (gating) {
    plan.gating = *gating;
  }

  std::set<std::string> reserved_modules = {plan.top,
                                            std::string(lut_module),
                                            std::string(fifo_module),
                                            std::string(sbox1x2_module),
                                            std::string(sbox2x1_module),
                                            std::string(gate_module),
                                            std::string(bufg_module)};
  if (!vlog::is_identifier(plan.top)) {
    throw hdl_error("top module name '" + plan.top + "' is not a legal Verilog identifier");
  }

  NameTable names;
  // top ports
  names.add(protocol.clock, "clock port");
  plan.ports.push_back({protocol.clock, Direction::in, 1});
  names.add(protocol.reset, "reset port");
  plan.ports.push_back({protocol.reset, Direction::in, 1});
  if (plan.id_width > 0) {
    names.add(std::string(config_id), "configuration port");
    plan.ports.push_back({std::string(config_id), Direction::in, plan.id_width});
  }
  for (auto const& p : net.ports) {
    for (auto const& s : protocol.signals) {
      auto n = s.name_for(p.name);
      names.add(n, "signal of network port '" + p.name + "'");
      plan.ports.push_back({n, signal_direction(p.direction, s), s.width_for(p.width)});
    }
  }

  // library component signatures
  std::map<std::string, std::size_t> stub_of;
  for (auto const& a : net.actors) {
    if (is_sbox(a.kind)) {
      continue;
    }
    if (reserved_modules.count(a.type)) {
      throw hdl_error("component type '" + a.type + "' of '" + a.instance + "' clashes with a generated module");
    }
    if (!vlog::is_identifier(a.type)) {
      throw hdl_error("component type '" + a.type + "' of '" + a.instance + "' is not a legal Verilog identifier");
    }
    ModuleStub stub;
    stub.module = a.type;
    stub.ports.push_back({protocol.clock, Direction::in, 1});
    stub.ports.push_back({protocol.reset, Direction::in, 1});
    std::set<std::string> formals = {protocol.clock, protocol.reset};
    for (auto const& p : a.ports) {
      for (auto const& s : protocol.signals) {
        auto f = s.name_for(p.name);
        if (!vlog::is_identifier(f)) {
          throw hdl_error("signal '" + f + "' of '" + a.instance + "' is not a legal Verilog identifier");
        }
        if (!formals.insert(f).second) {
          throw hdl_error("signal '" + f + "' of component '" + a.type + "' is produced by two ports");
        }
        stub.ports.push_back({f, signal_direction(p.direction, s), s.width_for(p.width)});
      }
    }
    for (auto const& [k, v] : a.parameters) {
      if (!vlog::is_identifier(k)) {
        throw hdl_error("parameter '" + k + "' of '" + a.instance + "' is not a legal Verilog identifier");
      }
      stub.parameters.push_back(k);
    }
    auto it = stub_of.find(a.type);
    if (it == stub_of.end()) {
      stub_of.emplace(a.type, plan.stubs.size());
      plan.stubs.push_back(std::move(stub));
      continue;
    }
    auto& known = plan.stubs[it->second];
    if (known.ports != stub.ports) {
      throw hdl_error("component type '" + a.type + "' is instantiated with two different port signatures (see '" +
                      a.instance + "')");
    }
    for (auto const& k : stub.parameters) {
      if (std::find(known.parameters.begin(), known.parameters.end(), k) == known.parameters.end()) {
        known.parameters.push_back(k);
      }
    }
  }
  for (auto& s : plan.stubs) {
    std::sort(s.parameters.begin(), s.parameters.end());
  }

  // instance names
  for (auto const& a : net.actors) {
    names.add(a.instance, "actor instance");
  }
  for (std::size_t i = 0; i < net.channels.size(); ++i) {
    if (net.channels[i].depth > 0) {
      names.add("fifo_" + std::to_string(i), "FIFO instance");
    }
  }
  if (!plan.lut_outputs.empty()) {
    names.add(std::string(lut_instance), "LUT instance");
  }

  // gating nets come first so every later assign can be checked against them
  if (gating) {
    if (gating->config_names != m.config_names) {
      throw hdl_error("clock-gating plan was made for different configurations");
    }
    for (std::size_t c = 0; c < m.config_count(); ++c) {
      auto n = config_select(c);
      names.add(n, "configuration select");
      plan.wires.push_back({n, 1});
      plan.assigns.push_back(
          {n, plan.id_width == 0 ? "1'b1"
                                 : std::string(config_id) + " == " + std::to_string(plan.id_width) + "'d" +
                                       std::to_string(c)});
    }
    for (auto const& cell : gating->cells) {
      names.add(cell.enable, "gating enable");
      names.add(cell.clock, "gated clock");
      names.add(cell.instance, "gating cell");
      plan.wires.push_back({cell.enable, 1});
      plan.wires.push_back({cell.clock, 1});
      plan.assigns.push_back({cell.enable, enable_expression(cell.configurations)});
    }
    for (auto const& [inst, clk] : gating->clock_of) {
      auto const* a = net.find_actor(inst);
      if (a == nullptr) {
        throw hdl_error("clock-gating plan names unknown instance '" + inst + "'");
      }
    }
  }
  for (auto const& s : plan.lut_outputs) {
    auto n = "sel_" + s;
    names.add(n, "selector wire");
    plan.wires.push_back({n, 1});
  }

  // channel wiring
  std::map<std::pair<std::string, std::string>, std::string> bound;  // (instance, formal) -> net
  std::vector<NetlistInstance> fifos;
  auto hop = [&](Endpoint const& src, Endpoint const& dst, std::string const& src_tok, std::string const& dst_tok,
                 int width) {
    for (auto const& s : protocol.signals) {
      auto w = wire_name(src_tok, dst_tok, s);
      names.add(w, "channel wire");
      plan.wires.push_back({w, s.width_for(width)});
      bool fwd = s.flow == SignalFlow::forward;
      if (src.is_network_port()) {
        auto p = s.name_for(src.port);
        plan.assigns.push_back(fwd ? ContinuousAssign{w, p} : ContinuousAssign{p, w});
      } else {
        bound[{src.actor, s.name_for(src.port)}] = w;
      }
      if (dst.is_network_port()) {
        auto p = s.name_for(dst.port);
        plan.assigns.push_back(fwd ? ContinuousAssign{p, w} : ContinuousAssign{w, p});
      } else {
        bound[{dst.actor, s.name_for(dst.port)}] = w;
      }
    }
  };
  std::set<Endpoint> connected;
  for (std::size_t i = 0; i < net.channels.size(); ++i) {
    auto const& ch = net.channels[i];
    int width = net.resolve(ch.source)->width;
    connected.insert(ch.source);
    connected.insert(ch.sink);
    if (ch.depth == 0) {
      hop(ch.source, ch.sink, endpoint_token(ch.source), endpoint_token(ch.sink), width);
      continue;
    }
    if (!protocol.has(SignalRole::valid)) {
      throw hdl_error("channel " + ch.source.str() + " -> " + ch.sink.str() + " needs a FIFO but protocol '" +
                      protocol.name + "' has no valid role");
    }
    auto fifo = "fifo_" + std::to_string(i);
    Endpoint fin{fifo, "in"};
    Endpoint fout{fifo, "out"};
    hop(ch.source, fin, endpoint_token(ch.source), fifo + "_in", width);
    hop(fout, ch.sink, fifo + "_out", endpoint_token(ch.sink), width);
    NetlistInstance f;
    f.module = std::string(fifo_module);
    f.name = fifo;
    f.parameters = {{"WIDTH", std::to_string(width)}, {"DEPTH", std::to_string(ch.depth)}};
    f.bindings = {{protocol.clock, protocol.clock}, {protocol.reset, protocol.reset}};
    for (auto const* port : {"in", "out"}) {
      for (auto const& s : protocol.signals) {
        auto formal = s.name_for(port);
        f.bindings.push_back({formal, bound.at({fifo, formal})});
      }
    }
    fifos.push_back(std::move(f));
    plan.uses_fifo = true;
  }

  // unconnected network ports: drive the outputs they own with idle values
  for (auto const& p : net.ports) {
    if (connected.count(Endpoint{"", p.name})) {
      continue;
    }
    for (auto const& s : protocol.signals) {
      bool fwd = s.flow == SignalFlow::forward;
      if (p.direction == Direction::in && !fwd) {
        plan.assigns.push_back({s.name_for(p.name), fill(s.width_for(p.width), blocked_value(s))});
      } else if (p.direction == Direction::out && fwd) {
        plan.assigns.push_back({s.name_for(p.name), fill(s.width_for(p.width), false)});
      }
    }
  }

  // actor instances
  for (auto const& a : net.actors) {
    NetlistInstance inst;
    inst.name = a.instance;
    if (is_sbox(a.kind)) {
      bool one_to_two = a.kind == ActorKind::sbox1x2;
      inst.module = std::string(one_to_two ? sbox1x2_module : sbox2x1_module);
      (one_to_two ? plan.uses_sbox1x2 : plan.uses_sbox2x1) = true;
      inst.parameters = {{"WIDTH", std::to_string(sbox_width(a))}};
    } else {
      inst.module = a.type;
      for (auto const& [k, v] : a.parameters) {
        inst.parameters.push_back({k, parameter_literal(v)});
      }
      std::string clk = protocol.clock;
      if (gating) {
        if (auto it = gating->clock_of.find(a.instance); it != gating->clock_of.end()) {
          clk = it->second;
        }
      }
      inst.bindings.push_back({protocol.clock, clk});
      inst.bindings.push_back({protocol.reset, protocol.reset});
    }
    for (auto const& p : a.ports) {
      if (is_sbox(a.kind) && p.name == sbox_port::sel) {
        inst.bindings.push_back({"sel", "sel_" + a.instance});
        continue;
      }
      Endpoint e{a.instance, p.name};
      for (auto const& s : protocol.signals) {
        auto formal = s.name_for(p.name);
        if (auto it = bound.find({a.instance, formal}); it != bound.end()) {
          inst.bindings.push_back({formal, it->second});
          continue;
        }
        // open port: a private net, tied when the port reads it
        auto w = "w_" + endpoint_token(e) + "_open_" + s.label;
        names.add(w, "open-port wire");
        int width = s.width_for(p.width);
        plan.wires.push_back({w, width});
        if (signal_direction(p.direction, s) == Direction::in) {
          bool fwd = s.flow == SignalFlow::forward;
          plan.assigns.push_back({w, fill(width, fwd ? false : accepting_value(s))});
        }
        inst.bindings.push_back({formal, w});
      }
    }
    plan.instances.push_back(std::move(inst));
  }
  for (auto& f : fifos) {
    plan.instances.push_back(std::move(f));
  }

  if (!plan.lut_outputs.empty()) {
    NetlistInstance lut;
    lut.module = std::string(lut_module);
    lut.name = std::string(lut_instance);
    if (plan.id_width > 0) {
      lut.bindings.push_back({"id", std::string(config_id)});
    }
    for (auto const& s : plan.lut_outputs) {
      lut.bindings.push_back({"sel_" + s, "sel_" + s});
    }
    plan.instances.push_back(std::move(lut));
  }

  if (gating) {
    for (auto const& cell : gating->cells) {
      NetlistInstance g;
      g.name = cell.instance;
      if (gating->target == GatingTarget::asic) {
        g.module = std::string(gate_module);
        g.bindings = {{"clk", protocol.clock}, {"en", cell.enable}, {"gclk", cell.clock}};
      } else {
        g.module = std::string(bufg_module);
        g.bindings = {{"I", protocol.clock}, {"CE", cell.enable}, {"O", cell.clock}};
      }
      plan.instances.push_back(std::move(g));
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Emission

namespace hdl {

inline std::string signal_range(ProtocolSignal const& s) {
  if (s.width == 0) {
    return "[WIDTH-1:0] ";
  }
  return range(s.width);
}

inline std::string signal_fill(ProtocolSignal const& s, bool one) {
  if (s.width == 0) {
    return std::string("{WIDTH{") + (one ? "1'b1" : "1'b0") + "}}";
  }
  return fill(s.width, one);
}

inline std::string port_line(Direction d, std::string const& rng, std::string const& name) {
  return std::string(d == Direction::in ? "input wire " : "output wire ") + rng + name;
}

inline std::string join_ports(std::vector<std::string> const& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += "  " + lines[i] + (i + 1 < lines.size() ? ",\n" : "\n");
  }
  return out;
}

/// Port lines of a template port, e.g. in_data / in_valid / in_ack / in_full.
inline void template_port(std::vector<std::string>& lines, ProtocolSpec const& p, std::string const& port,
                          Direction dir) {
  for (auto const& s : p.signals) {
    lines.push_back(port_line(signal_direction(dir, s), signal_range(s), s.name_for(port)));
  }
}

inline std::string reset_condition(ProtocolSpec const& p) { return p.reset_active_low ? "!" + p.reset : p.reset; }

inline std::string emit_sbox1x2(ProtocolSpec const& p) {
  std::vector<std::string> ports;
  template_port(ports, p, "in", Direction::in);
  template_port(ports, p, "out0", Direction::out);
  template_port(ports, p, "out1", Direction::out);
  ports.push_back("input wire sel");
  std::string out = "// 1-to-2 switch: sel = 0 routes to out0, sel = 1 to out1.\n";
  out += "module " + std::string(sbox1x2_module) + " #(\n  parameter WIDTH = 8\n) (\n" + join_ports(ports) + ");\n";
  for (auto const& s : p.signals) {
    auto in = s.name_for("in");
    auto o0 = s.name_for("out0");
    auto o1 = s.name_for("out1");
    if (s.flow == SignalFlow::forward) {
      auto idle = signal_fill(s, false);
      out += "  assign " + o0 + " = sel ? " + idle + " : " + in + ";\n";
      out += "  assign " + o1 + " = sel ? " + in + " : " + idle + ";\n";
    } else {
      out += "  assign " + in + " = sel ? " + o1 + " : " + o0 + ";\n";
    }
  }
  return out + "endmodule\n";
}

inline std::string emit_sbox2x1(ProtocolSpec const& p) {
  std::vector<std::string> ports;
  template_port(ports, p, "in0", Direction::in);
  template_port(ports, p, "in1", Direction::in);
  template_port(ports, p, "out", Direction::out);
  ports.push_back("input wire sel");
  std::string out = "// 2-to-1 switch: sel = 0 forwards in0, sel = 1 forwards in1.\n";
  out += "module " + std::string(sbox2x1_module) + " #(\n  parameter WIDTH = 8\n) (\n" + join_ports(ports) + ");\n";
  for (auto const& s : p.signals) {
    auto i0 = s.name_for("in0");
    auto i1 = s.name_for("in1");
    auto o = s.name_for("out");
    if (s.flow == SignalFlow::forward) {
      out += "  assign " + o + " = sel ? " + i1 + " : " + i0 + ";\n";
    } else {
      auto blocked = signal_fill(s, blocked_value(s));
      out += "  assign " + i0 + " = sel ? " + blocked + " : " + o + ";\n";
      out += "  assign " + i1 + " = sel ? " + o + " : " + blocked + ";\n";
    }
  }
  return out + "endmodule\n";
}

inline std::string emit_fifo(ProtocolSpec const& p) {
  std::vector<std::string> ports = {"input wire " + p.clock, "input wire " + p.reset};
  template_port(ports, p, "in", Direction::in);
  template_port(ports, p, "out", Direction::out);
  std::string out = "// Channel buffer of DEPTH tokens.\n";
  out += "module " + std::string(fifo_module) + " #(\n  parameter WIDTH = 8,\n  parameter DEPTH = 1\n) (\n" +
         join_ports(ports) + ");\n";
  out += "  localparam AW = DEPTH > 1 ? $clog2(DEPTH) : 1;\n";
  out += "  reg [WIDTH-1:0] mem [0:DEPTH-1];\n";
  out += "  reg [AW-1:0] wr_ptr;\n  reg [AW-1:0] rd_ptr;\n  reg [AW:0] count;\n";
  out += "  wire push;\n  wire pop;\n";

  auto const* valid = p.find(SignalRole::valid);
  auto const* ack = p.find(SignalRole::ack);
  auto const* ready = p.find(SignalRole::ready);
  out += "  assign push = " + valid->name_for("in") + " && count != DEPTH;\n";
  std::string taken = "1'b1";
  if (ack) {
    taken = ack->name_for("out");
  } else if (ready) {
    taken = (ready->inverted() ? "!" : "") + ready->name_for("out");
  }
  out += "  assign pop = count != 0 && " + taken + ";\n";
  for (auto const& s : p.signals) {
    switch (s.role) {
    case SignalRole::data:
      out += "  assign " + s.name_for("out") + " = mem[rd_ptr];\n";
      break;
    case SignalRole::valid:
      out += "  assign " + s.name_for("out") + " = count != 0;\n";
      break;
    case SignalRole::ack:
      out += "  assign " + s.name_for("in") + " = push;\n";
      break;
    case SignalRole::ready:
      out += "  assign " + s.name_for("in") + (s.inverted() ? " = count == DEPTH;\n" : " = count != DEPTH;\n");
      break;
    }
  }
  out += "  always @(posedge " + p.clock + ") begin\n";
  out += "    if (" + reset_condition(p) + ") begin\n";
  out += "      wr_ptr <= 0;\n      rd_ptr <= 0;\n      count <= 0;\n";
  out += "    end else begin\n";
  out += "      if (push) begin\n";
  out += "        mem[wr_ptr] <= " + p.data().name_for("in") + ";\n";
  out += "        wr_ptr <= wr_ptr == DEPTH - 1 ? 0 : wr_ptr + 1;\n";
  out += "      end\n";
  out += "      if (pop) begin\n";
  out += "        rd_ptr <= rd_ptr == DEPTH - 1 ? 0 : rd_ptr + 1;\n";
  out += "      end\n";
  out += "      count <= count + push - pop;\n";
  out += "    end\n  end\nendmodule\n";
  return out;
}

inline std::string emit_clock_gate() {
  return "// Clock gate for one logic region.\n"
         "module " +
         std::string(gate_module) +
         " (\n  input wire clk,\n  input wire en,\n  output wire gclk\n);\n"
         "  reg en_latched;\n"
         "  always @(*) begin\n"
         "    if (!clk) begin\n"
         "      en_latched = en;\n"
         "    end\n"
         "  end\n"
         "  assign gclk = clk & en_latched;\n"
         "endmodule\n";
}

inline std::string emit_stubs(std::vector<ModuleStub> const& stubs) {
  std::string out = "// Interfaces of the library components; bodies come from the component library.\n";
  for (auto const& s : stubs) {
    out += "\n(* black_box *)\nmodule " + s.module;
    if (!s.parameters.empty()) {
      out += " #(\n";
      for (std::size_t i = 0; i < s.parameters.size(); ++i) {
        out += "  parameter " + s.parameters[i] + " = 0" + (i + 1 < s.parameters.size() ? ",\n" : "\n");
      }
      out += ")";
    }
    std::vector<std::string> lines;
    for (auto const& p : s.ports) {
      lines.push_back(port_line(p.direction, range(p.width), p.name));
    }
    out += " (\n" + join_ports(lines) + ");\nendmodule\n";
  }
  return out;
}

inline std::string emit_instance(NetlistInstance const& inst) {
  std::string out = "  " + inst.module;
  if (!inst.parameters.empty()) {
    out += " #(";
    for (std::size_t i = 0; i < inst.parameters.size(); ++i) {
      out += (i ? ", ." : ".") + inst.parameters[i].first + "(" + inst.parameters[i].second + ")";
    }
    out += ")";
  }
  out += " " + inst.name + " (\n";
  for (std::size_t i = 0; i < inst.bindings.size(); ++i) {
    out += "    ." + inst.bindings[i].formal + "(" + inst.bindings[i].actual + ")" +
           (i + 1 < inst.bindings.size() ? ",\n" : "\n");
  }
  return out + "  );\n";
}

inline std::string emit_top(NetlistPlan const& plan) {
  std::string out = "// Merged datapath serving:";
  for (std::size_t c = 0; c < plan.config_names.size(); ++c) {
    out += " " + std::to_string(c) + "=" + plan.config_names[c];
  }
  out += "\nmodule " + plan.top + " (\n";
  std::vector<std::string> lines;
  for (auto const& p : plan.ports) {
    lines.push_back(port_line(p.direction, range(p.width), p.name));
  }
  out += join_ports(lines) + ");\n";
  if (!plan.wires.empty()) {
    out += "\n";
  }
  for (auto const& w : plan.wires) {
    out += "  wire " + range(w.width) + w.name + ";\n";
  }
  if (!plan.assigns.empty()) {
    out += "\n";
  }
  for (auto const& a : plan.assigns) {
    out += "  assign " + a.lhs + " = " + a.rhs + ";\n";
  }
  for (auto const& i : plan.instances) {
    out += "\n" + emit_instance(i);
  }
  return out + "endmodule\n";
}

} // namespace hdl

/// Selector LUT module: one case arm per configuration table row.
inline std::string emit_lut_contents(ConfigurationTable const& ctab, std::string const& module = "config_lut") {
  auto outputs = hdl::selector_order(ctab);
  int w = hdl::id_width(ctab.rows.size());
  if (outputs.empty()) {
    return "// Single datapath: no selectors to drive.\nmodule " + module + ";\nendmodule\n";
  }
  std::vector<std::string> ports;
  if (w > 0) {
    ports.push_back("input wire " + hdl::range(w) + "id");
  }
  for (auto const& s : outputs) {
    ports.push_back("output reg sel_" + s);
  }
  std::string out = "// Configuration identifier to SBox selector mapping.\n";
  out += "module " + module + " (\n" + hdl::join_ports(ports) + ");\n";
  out += "  always @(*) begin\n";
  if (w == 0) {
    out += "    begin  // " + ctab.rows.front().name + "\n";
    for (auto const& s : outputs) {
      out += "      sel_" + s + " = 1'b" + std::to_string(ctab.selector(0, s)) + ";\n";
    }
    return out + "    end\n  end\nendmodule\n";
  }
  out += "    case (id)\n";
  for (std::size_t c = 0; c < ctab.rows.size(); ++c) {
    auto const& row = ctab.rows[c];
    out += "      " + std::to_string(w) + "'d" + std::to_string(row.network_id) + ": begin  // " + row.name + "\n";
    for (auto const& s : outputs) {
      out += "        sel_" + s + " = 1'b" + std::to_string(ctab.selector(c, s)) + ";\n";
    }
    out += "      end\n";
  }
  out += "      default: begin  // identifier outside the table: all selectors low\n";
  for (auto const& s : outputs) {
    out += "        sel_" + s + " = 1'b0;\n";
  }
  out += "      end\n    endcase\n  end\nendmodule\n";
  return out;
}

/// File name -> Verilog text for every module the plan needs.
inline std::map<std::string, std::string> emit_verilog(NetlistPlan const& plan) {
  std::map<std::string, std::string> files;
  files["top.v"] = hdl::emit_top(plan);
  if (!plan.lut_outputs.empty()) {
    files["config_lut.v"] = emit_lut_contents(plan.lut, std::string(hdl::lut_module));
  }
  if (plan.uses_sbox1x2) {
    files["sbox_1x2.v"] = hdl::emit_sbox1x2(plan.protocol);
  }
  if (plan.uses_sbox2x1) {
    files["sbox_2x1.v"] = hdl::emit_sbox2x1(plan.protocol);
  }
  if (plan.uses_fifo) {
    files["fifo_wrapper.v"] = hdl::emit_fifo(plan.protocol);
  }
  if (!plan.stubs.empty()) {
    files["component_stubs.v"] = hdl::emit_stubs(plan.stubs);
  }
  if (plan.gating && plan.gating->target == GatingTarget::asic && !plan.gating->cells.empty()) {
    files["clock_gate.v"] = hdl::emit_clock_gate();
  }
  return files;
}

// ---------------------------------------------------------------------------
// Reverse reading

/// Actor adjacency recovered from emitted text.
struct RecoveredNetlist {
  /// instance -> module
  std::map<std::string, std::string> instances;
  std::vector<Channel> channels;
};

/// Rebuilds instances and channels from the emitted files. FIFO wrappers
/// collapse back into channels of their DEPTH; other hops have depth 0.
inline RecoveredNetlist read_netlist(std::map<std::string, std::string> const& files, ProtocolSpec const& protocol,
                                     std::string const& top = "multi_dataflow") {
  std::map<std::string, vlog::ModuleV> modules;
  for (auto const& [name, text] : files) {
    for (auto& mod : vlog::parse_verilog(text).modules) {
      modules[mod.name] = std::move(mod);
    }
  }
  auto it = modules.find(top);
  if (it == modules.end()) {
    throw hdl_error("no top module '" + top + "' in the netlist");
  }
  auto const& data = protocol.data();
  auto const& top_mod = it->second;

  RecoveredNetlist out;
  std::map<std::string, Endpoint> source_of;
  std::map<std::string, Endpoint> sink_of;
  std::map<std::string, unsigned> fifo_depth;
  auto single = [](vlog::Tokens const& t) { return t.size() == 1 ? t.front().text : std::string(); };
  for (auto const& item : top_mod.items) {
    if (auto const* a = std::get_if<vlog::AssignV>(&item)) {
      auto lhs = single(a->lhs);
      auto rhs = single(a->rhs);
      if (auto p = data.port_of(rhs); p && top_mod.find_port(rhs)) {
        source_of[lhs] = Endpoint{"", *p};
      } else if (auto q = data.port_of(lhs); q && top_mod.find_port(lhs)) {
        sink_of[rhs] = Endpoint{"", *q};
      }
    } else if (auto const* inst = std::get_if<vlog::InstanceV>(&item)) {
      out.instances[inst->name] = inst->module;
      auto mod = modules.find(inst->module);
      if (inst->module == hdl::fifo_module) {
        for (auto const& pb : inst->parameters) {
          if (pb.formal == "DEPTH") {
            fifo_depth[inst->name] = static_cast<unsigned>(std::stoul(single(pb.actual)));
          }
        }
      }
      for (auto const& b : inst->bindings) {
        auto port = data.port_of(b.formal);
        if (!port || mod == modules.end()) {
          continue;
        }
        auto const* decl = mod->second.find_port(b.formal);
        if (!decl) {
          continue;
        }
        auto net = single(b.actual);
        Endpoint e{inst->name, *port};
        (decl->direction == Direction::out ? source_of : sink_of)[net] = e;
      }
    }
  }
  std::map<std::string, Endpoint> fifo_in;  // fifo -> upstream source
  std::vector<std::pair<Endpoint, Endpoint>> hops;
  for (auto const& [net, src] : source_of) {
    auto s = sink_of.find(net);
    if (s != sink_of.end()) {
      hops.emplace_back(src, s->second);
    }
  }
  for (auto const& [src, dst] : hops) {
    if (fifo_depth.count(dst.actor)) {
      fifo_in[dst.actor] = src;
    }
  }
  for (auto const& [src, dst] : hops) {
    if (fifo_depth.count(dst.actor)) {
      continue;
    }
    if (fifo_depth.count(src.actor)) {
      auto up = fifo_in.find(src.actor);
      if (up == fifo_in.end()) {
        throw hdl_error("FIFO '" + src.actor + "' has no upstream connection");
      }
      out.channels.push_back({up->second, dst, fifo_depth.at(src.actor)});
    } else {
      out.channels.push_back({src, dst, 0});
    }
  }
  for (auto const& [f, d] : fifo_depth) {
    out.instances.erase(f);
  }
  return out;
}

} // namespace mdc
