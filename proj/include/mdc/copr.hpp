#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "hdl.hpp"
#include "multi_dataflow.hpp"
#include "network_io.hpp"
#include "protocol.hpp"

namespace mdc {

enum class Processor { microblaze, arm };
enum class Coupling { mm, stream };
/// Data ports move token streams; parameter ports are single values written
/// through the register interface.
enum class PortRole { data, parameter };

inline std::string_view to_string(Processor p) { return p == Processor::arm ? "arm" : "microblaze"; }
inline std::string_view to_string(Coupling c) { return c == Coupling::mm ? "mm" : "stream"; }
inline std::string_view to_string(PortRole r) { return r == PortRole::data ? "data" : "parameter"; }

inline Processor parse_processor(std::string_view s) {
  if (s == "arm") {
    return Processor::arm;
  }
  if (s == "microblaze") {
    return Processor::microblaze;
  }
  throw error("unknown processor '" + std::string(s) + "' (expected arm or microblaze)");
}

inline Coupling parse_coupling(std::string_view s) {
  if (s == "mm") {
    return Coupling::mm;
  }
  if (s == "stream") {
    return Coupling::stream;
  }
  throw error("unknown coupling '" + std::string(s) + "' (expected mm or stream)");
}

inline PortRole parse_port_role(std::string_view s) {
  if (s == "data") {
    return PortRole::data;
  }
  if (s == "parameter") {
    return PortRole::parameter;
  }
  throw error("unknown port role '" + std::string(s) + "' (expected data or parameter)");
}

inline constexpr std::string_view default_part = "xc7z020clg400-1";
inline constexpr std::string_view default_board = "digilentinc.com:arty-z7-20:part0:1.0";
inline constexpr std::size_t default_mem_words_per_port = 256;

struct DeploymentConfig {
  Processor processor = Processor::arm;
  Coupling coupling = Coupling::mm;
  bool dma = false;
  std::string part = std::string(default_part);
  std::string board = std::string(default_board);
  /// Network port -> role; ports not listed are data ports.
  std::map<std::string, PortRole> port_roles;
  /// Local-memory capacity of each mm port, in 32-bit words (power of two).
  std::size_t mem_words_per_port = default_mem_words_per_port;

  bool operator==(DeploymentConfig const&) const = default;
};

// ---------------------------------------------------------------------------
// Additional IPs

struct IpRequirement {
  std::string ip;
  std::size_t count = 0;

  bool operator==(IpRequirement const&) const = default;
};

/// Glue IPs a deployment needs besides processor and coprocessor, for the
/// given number of input and output data ports.
inline std::vector<IpRequirement> additional_ips(DeploymentConfig const& cfg, std::size_t inputs, std::size_t outputs) {
  std::size_t per_port = inputs + outputs;
  std::size_t per_couple = (per_port + 1) / 2;
  std::vector<IpRequirement> out = {{"AXI4 Interconnect", 1}};
  if (cfg.coupling == Coupling::mm) {
    if (cfg.dma) {
      out.push_back({"AXI DMA", 1});
    }
    return out;
  }
  if (cfg.processor == Processor::microblaze) {
    out.push_back({"AXI4-Stream Data FIFO", per_port});
    if (cfg.dma) {
      out.push_back({"AXI CDMA", per_port});
    }
    return out;
  }
  if (!cfg.dma) {
    out.push_back({"AXI-Stream FIFO", per_couple});
  } else {
    out.push_back({"AXI4-Stream Data FIFO", per_port});
    out.push_back({"AXI CDMA", per_couple});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Template interface layer plan

struct TilRegister {
  enum class Kind { control, size, parameter };

  std::size_t index = 0;
  Kind kind = Kind::control;
  /// Port the register belongs to; empty for the control register.
  std::string port;

  bool operator==(TilRegister const&) const = default;
};

struct TilPort {
  std::string name;
  Direction direction = Direction::in;
  int width = 0;
  PortRole role = PortRole::data;
  /// Size register (data ports) or value register (parameter ports).
  std::optional<std::size_t> reg;
  /// mm data ports: local-memory segment, 0-based in declaration order.
  std::optional<std::size_t> segment;
  std::size_t mem_offset = 0;
  /// stream data ports: index of the DMA engine or FIFO serving the port.
  std::optional<std::size_t> link;
  bool counter = false;

  bool operator==(TilPort const&) const = default;
};

struct TilPlan {
  Coupling variant = Coupling::mm;
  std::vector<TilRegister> registers;
  /// Network ports in declaration order.
  std::vector<TilPort> ports;
  std::size_t mem_words_per_port = default_mem_words_per_port;
  std::size_t segment_bytes = 0;
  std::size_t links = 0;
  std::size_t data_inputs = 0;
  std::size_t data_outputs = 0;
  std::vector<std::string> config_names;
  int id_width = 0;

  std::string ip_name() const { return variant == Coupling::mm ? "mm_accelerator" : "s_accelerator"; }

  std::size_t counters() const {
    return static_cast<std::size_t>(std::count_if(ports.begin(), ports.end(), [](TilPort const& p) { return p.counter; }));
  }
  std::size_t segments() const {
    return static_cast<std::size_t>(
        std::count_if(ports.begin(), ports.end(), [](TilPort const& p) { return p.segment.has_value(); }));
  }
  TilPort const* find_port(std::string_view name) const {
    for (auto const& p : ports) {
      if (p.name == name) {
        return &p;
      }
    }
    return nullptr;
  }

  bool operator==(TilPlan const&) const = default;
};

/// Register bank, memory map and per-port infrastructure of the wrapper.
/// mm: register 0 is control, register i holds the size (or value) of port
/// i-1 in declaration order, one memory segment per data port. stream:
/// register 0 is control, then output sizes, then parameter values.
inline TilPlan plan_til(MultiDataflow const& m, DeploymentConfig const& cfg) {
  auto const& ports = m.base.ports;
  if (ports.empty()) {
    throw copr_error("network '" + m.base.name + "' has no I/O ports to connect to a processor");
  }
  for (auto const& [name, role] : cfg.port_roles) {
    if (!m.base.find_port(name)) {
      throw copr_error("port role given for unknown port '" + name + "'");
    }
  }
  auto const words = cfg.mem_words_per_port;
  if (words < 2 || !std::has_single_bit(words)) {
    throw copr_error("local memory per port must be a power of two of at least 2 words, got " + std::to_string(words));
  }

  TilPlan plan;
  plan.variant = cfg.coupling;
  plan.mem_words_per_port = words;
  plan.segment_bytes = words * 4;
  plan.config_names = m.config_names;
  plan.id_width = hdl::id_width(m.config_count());
  plan.registers.push_back({0, TilRegister::Kind::control, ""});

  for (auto const& p : ports) {
    TilPort tp;
    tp.name = p.name;
    tp.direction = p.direction;
    tp.width = p.width;
    if (auto it = cfg.port_roles.find(p.name); it != cfg.port_roles.end()) {
      tp.role = it->second;
    }
    if (tp.role == PortRole::parameter && p.direction == Direction::out) {
      throw copr_error("output port '" + p.name + "' cannot be a parameter port");
    }
    if (p.width > 32) {
      throw copr_error("port '" + p.name + "' is " + std::to_string(p.width) + " bits wide; the 32-bit bus carries at most 32");
    }
    if (tp.role == PortRole::data) {
      (p.direction == Direction::in ? plan.data_inputs : plan.data_outputs) += 1;
    }
    plan.ports.push_back(std::move(tp));
  }
  if (plan.data_inputs == 0 || plan.data_outputs == 0) {
    throw copr_error("network '" + m.base.name + "' needs at least one input and one output data port");
  }

  auto add_register = [&](TilPort& p, TilRegister::Kind kind) {
    p.reg = plan.registers.size();
    plan.registers.push_back({plan.registers.size(), kind, p.name});
  };
  auto kind_of = [](TilPort const& p) {
    return p.role == PortRole::parameter ? TilRegister::Kind::parameter : TilRegister::Kind::size;
  };
  if (cfg.coupling == Coupling::mm) {
    std::size_t segment = 0;
    for (auto& p : plan.ports) {
      add_register(p, kind_of(p));
      if (p.role == PortRole::data) {
        p.segment = segment;
        p.mem_offset = segment * plan.segment_bytes;
        ++segment;
      }
    }
    return plan;
  }
  for (auto& p : plan.ports) {
    if (p.role == PortRole::data && p.direction == Direction::out) {
      add_register(p, TilRegister::Kind::size);
      p.counter = true;
    }
  }
  for (auto& p : plan.ports) {
    if (p.role == PortRole::parameter) {
      add_register(p, TilRegister::Kind::parameter);
    }
  }
  // ARM reaches streams through engines serving a couple of ports each.
  std::size_t q = 0;
  for (auto& p : plan.ports) {
    if (p.role == PortRole::data) {
      p.link = cfg.processor == Processor::arm ? q / 2 : q;
      ++q;
    }
  }
  plan.links = cfg.processor == Processor::arm ? (q + 1) / 2 : q;
  return plan;
}

// ---------------------------------------------------------------------------
// Wrapper HDL

namespace copr {

inline std::string upper(std::string s) {
  for (auto& c : s) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return s;
}

inline std::string hex(unsigned long long v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llX", v);
  return buf;
}

inline std::string hex8(unsigned long long v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%08llX", v);
  return buf;
}

inline int log2(std::size_t v) { return static_cast<int>(std::bit_width(v) - 1); }

inline std::string rng(int width) { return hdl::range(width); }

inline std::string ports_block(std::vector<std::string> const& lines) { return hdl::join_ports(lines); }

inline void require_handshake(ProtocolSpec const& p) {
  if (!p.has(SignalRole::valid)) {
    throw copr_error("protocol '" + p.name + "' has no valid role; the interface layer needs one");
  }
  for (auto const& s : p.signals) {
    if (s.role != SignalRole::data && s.width_for(1) != 1) {
      throw copr_error("protocol '" + p.name + "' signal '" + s.label + "' must be 1 bit wide");
    }
  }
}

/// Core-side condition under which a token offered on `port` is taken.
inline std::string accepted(ProtocolSpec const& p, std::string const& port) {
  if (auto const* ack = p.find(SignalRole::ack)) {
    return ack->name_for(port);
  }
  if (auto const* ready = p.find(SignalRole::ready)) {
    return (ready->inverted() ? "!" : "") + ready->name_for(port);
  }
  return "1'b1";
}

inline std::string axi_lite_ports(std::string const& prefix) {
  return "input wire [31:0] " + prefix + "awaddr,\n  input wire " + prefix + "awvalid,\n  output wire " + prefix +
         "awready,\n  input wire [31:0] " + prefix + "wdata,\n  input wire [3:0] " + prefix + "wstrb,\n  input wire " +
         prefix + "wvalid,\n  output wire " + prefix + "wready,\n  output wire [1:0] " + prefix +
         "bresp,\n  output wire " + prefix + "bvalid,\n  input wire " + prefix + "bready,\n  input wire [31:0] " +
         prefix + "araddr,\n  input wire " + prefix + "arvalid,\n  output wire " + prefix +
         "arready,\n  output wire [31:0] " + prefix + "rdata,\n  output wire [1:0] " + prefix +
         "rresp,\n  output wire " + prefix + "rvalid,\n  input wire " + prefix + "rready";
}

inline std::vector<std::string> axi_lite_signals() {
  return {"awaddr", "awvalid", "awready", "wdata",   "wstrb", "wvalid", "wready", "bresp",
          "bvalid", "bready",  "araddr",  "arvalid", "arready", "rdata", "rresp",  "rvalid", "rready"};
}

inline std::vector<std::string> axi_full_signals() {
  return {"awaddr", "awlen",   "awsize", "awburst", "awvalid", "awready", "wdata",  "wstrb",  "wlast",
          "wvalid", "wready",  "bresp",  "bvalid",  "bready",  "araddr",  "arlen",  "arsize", "arburst",
          "arvalid", "arready", "rdata", "rresp",   "rlast",   "rvalid",  "rready"};
}

inline std::string axi_full_ports(std::string const& prefix) {
  return "input wire [31:0] " + prefix + "awaddr,\n  input wire [7:0] " + prefix + "awlen,\n  input wire [2:0] " +
         prefix + "awsize,\n  input wire [1:0] " + prefix + "awburst,\n  input wire " + prefix +
         "awvalid,\n  output wire " + prefix + "awready,\n  input wire [31:0] " + prefix +
         "wdata,\n  input wire [3:0] " + prefix + "wstrb,\n  input wire " + prefix + "wlast,\n  input wire " + prefix +
         "wvalid,\n  output wire " + prefix + "wready,\n  output wire [1:0] " + prefix + "bresp,\n  output wire " +
         prefix + "bvalid,\n  input wire " + prefix + "bready,\n  input wire [31:0] " + prefix +
         "araddr,\n  input wire [7:0] " + prefix + "arlen,\n  input wire [2:0] " + prefix +
         "arsize,\n  input wire [1:0] " + prefix + "arburst,\n  input wire " + prefix + "arvalid,\n  output wire " +
         prefix + "arready,\n  output wire [31:0] " + prefix + "rdata,\n  output wire [1:0] " + prefix +
         "rresp,\n  output wire " + prefix + "rlast,\n  output wire " + prefix + "rvalid,\n  input wire " + prefix +
         "rready";
}

inline std::string emit_config_regs(TilPlan const& plan) {
  std::size_t n = plan.registers.size();
  int ab = std::max(1, static_cast<int>(std::bit_width(n - 1)));
  std::string out = "// AXI4-Lite configuration register bank; register 0 reads back the done flag in bit 1.\n";
  out += "module config_regs (\n  input wire clk,\n  input wire resetn,\n  " + axi_lite_ports("s_axi_") +
         ",\n  input wire done";
  for (std::size_t i = 0; i < n; ++i) {
    out += ",\n  output wire [31:0] reg_" + std::to_string(i);
  }
  out += "\n);\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += "  reg [31:0] reg_" + std::to_string(i) + "_q;\n";
  }
  auto idx = [&](std::size_t i) { return std::to_string(ab) + "'d" + std::to_string(i); };
  out += "  reg bvalid_q;\n  reg rvalid_q;\n  reg [31:0] rdata_q;\n  wire wr_en;\n";
  out += "  wire " + rng(ab) + "wr_idx;\n  wire " + rng(ab) + "rd_idx;\n";
  out += "  assign wr_en = s_axi_awvalid && s_axi_wvalid && !bvalid_q;\n";
  out += "  assign s_axi_awready = wr_en;\n  assign s_axi_wready = wr_en;\n";
  out += "  assign s_axi_bresp = 2'b00;\n  assign s_axi_bvalid = bvalid_q;\n";
  out += "  assign s_axi_arready = !rvalid_q;\n  assign s_axi_rdata = rdata_q;\n";
  out += "  assign s_axi_rresp = 2'b00;\n  assign s_axi_rvalid = rvalid_q;\n";
  out += "  assign wr_idx = s_axi_awaddr[" + std::to_string(ab + 1) + ":2];\n";
  out += "  assign rd_idx = s_axi_araddr[" + std::to_string(ab + 1) + ":2];\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += "  assign reg_" + std::to_string(i) + " = reg_" + std::to_string(i) + "_q;\n";
  }
  out += "  always @(posedge clk) begin\n    if (!resetn) begin\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += "      reg_" + std::to_string(i) + "_q <= 32'd0;\n";
  }
  out += "      bvalid_q <= 1'b0;\n    end else begin\n      if (wr_en) begin\n        case (wr_idx)\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += "          " + idx(i) + ": reg_" + std::to_string(i) + "_q <= s_axi_wdata;\n";
  }
  out += "          default: begin\n          end\n        endcase\n      end\n";
  out += "      if (wr_en) begin\n        bvalid_q <= 1'b1;\n      end else if (s_axi_bready) begin\n"
         "        bvalid_q <= 1'b0;\n      end\n    end\n  end\n";
  out += "  always @(posedge clk) begin\n    if (!resetn) begin\n      rvalid_q <= 1'b0;\n      rdata_q <= 32'd0;\n"
         "    end else if (s_axi_arvalid && !rvalid_q) begin\n      rvalid_q <= 1'b1;\n      case (rd_idx)\n";
  out += "        " + idx(0) + ": rdata_q <= {reg_0_q[31:2], done, reg_0_q[0]};\n";
  for (std::size_t i = 1; i < n; ++i) {
    out += "        " + idx(i) + ": rdata_q <= reg_" + std::to_string(i) + "_q;\n";
  }
  out += "        default: rdata_q <= 32'd0;\n      endcase\n    end else if (s_axi_rready) begin\n"
         "      rvalid_q <= 1'b0;\n    end\n  end\nendmodule\n";
  return out;
}

inline std::string emit_axi_mem_slave(int abits) {
  auto a = std::to_string(abits);
  auto hi = std::to_string(abits + 1);
  std::string out = "// AXI4 slave giving word access to the local memories (INCR bursts).\n";
  out += "module axi_mem_slave (\n  input wire clk,\n  input wire resetn,\n  " + axi_full_ports("s_axi_") + ",\n";
  out += "  output wire mem_we,\n  output wire " + rng(abits) + "mem_waddr,\n  output wire [31:0] mem_wdata,\n";
  out += "  output wire " + rng(abits) + "mem_raddr,\n  input wire [31:0] mem_rdata\n);\n";
  out += "  reg wactive_q;\n  reg bvalid_q;\n  reg " + rng(abits) + "waddr_q;\n";
  out += "  reg ractive_q;\n  reg " + rng(abits) + "raddr_q;\n  reg [7:0] rcount_q;\n";
  out += R"(  assign s_axi_awready = !wactive_q && !bvalid_q;
  assign s_axi_wready = wactive_q;
  assign s_axi_bresp = 2'b00;
  assign s_axi_bvalid = bvalid_q;
  assign mem_we = wactive_q && s_axi_wvalid;
  assign mem_waddr = waddr_q;
  assign mem_wdata = s_axi_wdata;
  assign s_axi_arready = !ractive_q;
  assign s_axi_rvalid = ractive_q;
  assign s_axi_rdata = mem_rdata;
  assign s_axi_rresp = 2'b00;
  assign s_axi_rlast = rcount_q == 8'd0;
  assign mem_raddr = raddr_q;
  always @(posedge clk) begin
    if (!resetn) begin
      wactive_q <= 1'b0;
      bvalid_q <= 1'b0;
      waddr_q <= 0;
    end else begin
      if (s_axi_awvalid && !wactive_q && !bvalid_q) begin
        wactive_q <= 1'b1;
        waddr_q <= s_axi_awaddr[)" +
         hi + R"(:2];
      end else if (wactive_q && s_axi_wvalid) begin
        waddr_q <= waddr_q + 1;
        if (s_axi_wlast) begin
          wactive_q <= 1'b0;
          bvalid_q <= 1'b1;
        end
      end else if (bvalid_q && s_axi_bready) begin
        bvalid_q <= 1'b0;
      end
    end
  end
  always @(posedge clk) begin
    if (!resetn) begin
      ractive_q <= 1'b0;
      raddr_q <= 0;
      rcount_q <= 8'd0;
    end else if (s_axi_arvalid && !ractive_q) begin
      ractive_q <= 1'b1;
      raddr_q <= s_axi_araddr[)" +
         hi + R"(:2];
      rcount_q <= s_axi_arlen;
    end else if (ractive_q && s_axi_rready) begin
      raddr_q <= raddr_q + 1;
      rcount_q <= rcount_q - 8'd1;
      if (rcount_q == 8'd0) begin
        ractive_q <= 1'b0;
      end
    end
  end
endmodule
)";
  (void)a;
  return out;
}

inline std::string emit_local_mem(std::size_t words) {
  int ob = log2(words);
  std::string out = "// Dual-port local memory of one port: bus side and core side.\n";
  out += "module local_mem (\n  input wire clk,\n  input wire a_we,\n  input wire " + rng(ob) +
         "a_waddr,\n  input wire [31:0] a_wdata,\n  input wire " + rng(ob) +
         "a_raddr,\n  output wire [31:0] a_rdata,\n  input wire b_we,\n  input wire " + rng(ob) +
         "b_addr,\n  input wire [31:0] b_wdata,\n  output wire [31:0] b_rdata\n);\n";
  out += "  reg [31:0] mem [0:" + std::to_string(words - 1) + "];\n";
  out += R"(  assign a_rdata = mem[a_raddr];
  assign b_rdata = mem[b_addr];
  always @(posedge clk) begin
    if (a_we) begin
      mem[a_waddr] <= a_wdata;
    end
    if (b_we) begin
      mem[b_addr] <= b_wdata;
    end
  end
endmodule
)";
  return out;
}

inline std::string emit_front_end(ProtocolSpec const& p, std::size_t words) {
  int ob = log2(words);
  std::vector<std::string> ports = {"input wire clk",          "input wire resetn",
                                    "input wire enable",       "input wire [31:0] size",
                                    "output wire " + rng(ob) + "mem_addr", "input wire [31:0] mem_rdata"};
  hdl::template_port(ports, p, "tok", Direction::out);
  std::string out = "// Streams a port's local-memory segment into the core.\n";
  out += "module front_end #(\n  parameter WIDTH = 32\n) (\n" + ports_block(ports) + ");\n";
  out += "  reg [31:0] sent_q;\n  wire pending;\n  wire take;\n";
  out += "  assign pending = enable && sent_q < size;\n";
  out += "  assign mem_addr = sent_q[" + std::to_string(ob - 1) + ":0];\n";
  auto const* ready = p.find(SignalRole::ready);
  for (auto const& s : p.signals) {
    if (s.role == SignalRole::data) {
      out += "  assign " + s.name_for("tok") + " = mem_rdata[WIDTH-1:0];\n";
    } else if (s.role == SignalRole::valid) {
      std::string gate;
      if (ready && !p.has(SignalRole::ack)) {
        gate = "";
      } else if (ready) {
        gate = std::string(" && ") + (ready->inverted() ? "!" : "") + ready->name_for("tok");
      }
      out += "  assign " + s.name_for("tok") + " = pending" + gate + ";\n";
    }
  }
  out += "  assign take = " + p.find(SignalRole::valid)->name_for("tok") + " && " + accepted(p, "tok") + ";\n";
  out += R"(  always @(posedge clk) begin
    if (!resetn || !enable) begin
      sent_q <= 32'd0;
    end else if (take) begin
      sent_q <= sent_q + 32'd1;
    end
  end
endmodule
)";
  return out;
}

inline std::string emit_back_end(ProtocolSpec const& p, std::size_t words) {
  int ob = log2(words);
  std::vector<std::string> ports = {"input wire clk",
                                    "input wire resetn",
                                    "input wire enable",
                                    "input wire [31:0] size",
                                    "output wire mem_we",
                                    "output wire " + rng(ob) + "mem_addr",
                                    "output wire [31:0] mem_wdata",
                                    "output wire done"};
  hdl::template_port(ports, p, "tok", Direction::in);
  std::string out = "// Stores a core output stream into its local-memory segment.\n";
  out += "module back_end #(\n  parameter WIDTH = 32\n) (\n" + ports_block(ports) + ");\n";
  out += "  reg [31:0] recv_q;\n  wire room;\n  wire take;\n";
  out += "  assign room = enable && recv_q < size;\n";
  out += "  assign take = " + p.find(SignalRole::valid)->name_for("tok") + " && room;\n";
  out += "  assign mem_we = take;\n";
  out += "  assign mem_addr = recv_q[" + std::to_string(ob - 1) + ":0];\n";
  out += "  assign mem_wdata = " + p.data().name_for("tok") + ";\n";
  out += "  assign done = enable && recv_q >= size;\n";
  for (auto const& s : p.signals) {
    if (s.role == SignalRole::ack) {
      out += "  assign " + s.name_for("tok") + " = take;\n";
    } else if (s.role == SignalRole::ready) {
      out += "  assign " + s.name_for("tok") + (s.inverted() ? " = !room;\n" : " = room;\n");
    }
  }
  out += R"(  always @(posedge clk) begin
    if (!resetn || !enable) begin
      recv_q <= 32'd0;
    end else if (take) begin
      recv_q <= recv_q + 32'd1;
    end
  end
endmodule
)";
  return out;
}

inline std::string emit_out_counter() {
  return R"(// Counts the beats of an output stream and flags the last one.
module out_counter (
  input wire clk,
  input wire resetn,
  input wire enable,
  input wire [31:0] size,
  input wire beat,
  output wire last
);
  reg [31:0] count_q;
  assign last = count_q + 32'd1 == size;
  always @(posedge clk) begin
    if (!resetn || !enable) begin
      count_q <= 32'd0;
    end else if (beat) begin
      count_q <= count_q + 32'd1;
    end
  end
endmodule
)";
}

/// Wire carrying signal `s` of core port `port` inside the wrapper.
inline std::string core_net(std::string const& port, ProtocolSignal const& s) { return "c_" + port + "_" + s.label; }

struct WrapperBody {
  std::vector<std::string> decls;
  std::vector<std::string> assigns;
  std::vector<std::string> instances;

  void wire(int width, std::string const& name) { decls.push_back("  wire " + rng(width) + name + ";\n"); }
  void assign(std::string const& lhs, std::string const& rhs) {
    assigns.push_back("  assign " + lhs + " = " + rhs + ";\n");
  }
  void instance(NetlistInstance const& i) { instances.push_back(hdl::emit_instance(i)); }

  std::string str() const {
    std::string out;
    for (auto const& d : decls) {
      out += d;
    }
    for (auto const& a : assigns) {
      out += a;
    }
    for (auto const& i : instances) {
      out += "\n" + i;
    }
    return out;
  }
};

inline NetlistInstance regs_instance(TilPlan const& plan, std::string const& done) {
  NetlistInstance r;
  r.module = "config_regs";
  r.name = "u_regs";
  r.bindings = {{"clk", "s00_axi_aclk"}, {"resetn", "s00_axi_aresetn"}};
  for (auto const& s : axi_lite_signals()) {
    r.bindings.push_back({"s_axi_" + s, "s00_axi_" + s});
  }
  r.bindings.push_back({"done", done});
  for (std::size_t i = 0; i < plan.registers.size(); ++i) {
    r.bindings.push_back({"reg_" + std::to_string(i), "reg_" + std::to_string(i)});
  }
  return r;
}

/// Control wiring shared by both wrappers: register outputs, run flag,
/// configuration identifier and core reset.
inline void common_body(WrapperBody& b, TilPlan const& plan, ProtocolSpec const& proto) {
  for (std::size_t i = 0; i < plan.registers.size(); ++i) {
    b.wire(32, "reg_" + std::to_string(i));
  }
  b.wire(1, "run");
  b.wire(1, "core_rst");
  b.assign("run", "reg_0[0]");
  b.assign("core_rst", proto.reset_active_low ? "s00_axi_aresetn" : "!s00_axi_aresetn");
  if (plan.id_width > 0) {
    b.wire(8, "kernel");
    b.wire(plan.id_width, "core_id");
    b.assign("kernel", "reg_0[31:24] - 8'd1");
    b.assign("core_id", "kernel[" + std::to_string(plan.id_width - 1) + ":0]");
  }
}

inline NetlistInstance core_instance(TilPlan const& plan, NetlistPlan const& core) {
  NetlistInstance c;
  c.module = core.top;
  c.name = "u_core";
  auto const& proto = core.protocol;
  c.bindings = {{proto.clock, "s00_axi_aclk"}, {proto.reset, "core_rst"}};
  if (plan.id_width > 0) {
    c.bindings.push_back({std::string(hdl::config_id), "core_id"});
  }
  for (auto const& p : plan.ports) {
    for (auto const& s : proto.signals) {
      c.bindings.push_back({s.name_for(p.name), core_net(p.name, s)});
    }
  }
  return c;
}

/// Core port fed from a register: the value is always offered while running.
inline void parameter_port(WrapperBody& b, TilPort const& p, ProtocolSpec const& proto) {
  for (auto const& s : proto.signals) {
    if (s.role == SignalRole::data) {
      b.assign(core_net(p.name, s), "reg_" + std::to_string(*p.reg) + "[" + std::to_string(p.width - 1) + ":0]");
    } else if (s.role == SignalRole::valid) {
      b.assign(core_net(p.name, s), "run");
    }
  }
}

inline void declare_core_nets(WrapperBody& b, TilPlan const& plan, ProtocolSpec const& proto) {
  for (auto const& p : plan.ports) {
    for (auto const& s : proto.signals) {
      b.wire(s.width_for(p.width), core_net(p.name, s));
    }
  }
}

inline std::string emit_mm_wrapper(TilPlan const& plan, NetlistPlan const& core) {
  auto const& proto = core.protocol;
  int ob = log2(plan.mem_words_per_port);
  std::size_t nseg = plan.segments();
  int sb = nseg <= 1 ? 0 : static_cast<int>(std::bit_width(nseg - 1));
  int abits = ob + sb;

  WrapperBody b;
  common_body(b, plan, proto);
  declare_core_nets(b, plan, proto);
  b.wire(1, "done");
  b.wire(1, "bus_we");
  b.wire(abits, "bus_waddr");
  b.wire(32, "bus_wdata");
  b.wire(abits, "bus_raddr");
  b.wire(32, "bus_rdata");

  NetlistInstance bus;
  bus.module = "axi_mem_slave";
  bus.name = "u_mem_bus";
  bus.bindings = {{"clk", "s00_axi_aclk"}, {"resetn", "s00_axi_aresetn"}};
  for (auto const& s : axi_full_signals()) {
    bus.bindings.push_back({"s_axi_" + s, "s01_axi_" + s});
  }
  bus.bindings.insert(bus.bindings.end(), {{"mem_we", "bus_we"},
                                           {"mem_waddr", "bus_waddr"},
                                           {"mem_wdata", "bus_wdata"},
                                           {"mem_raddr", "bus_raddr"},
                                           {"mem_rdata", "bus_rdata"}});

  auto seg_tag = [&](std::size_t s) { return std::to_string(sb) + "'d" + std::to_string(s); };
  auto low = "[" + std::to_string(ob - 1) + ":0]";
  auto high = sb == 0 ? std::string() : "[" + std::to_string(abits - 1) + ":" + std::to_string(ob) + "]";
  std::string read_mux = "32'd0";
  std::vector<std::string> dones;
  std::vector<NetlistInstance> mems;
  std::vector<NetlistInstance> ends;
  for (auto it = plan.ports.rbegin(); it != plan.ports.rend(); ++it) {
    if (it->segment) {
      auto m = "mem_" + std::to_string(*it->segment);
      read_mux = sb == 0 ? m + "_a_rdata"
                         : "bus_raddr" + high + " == " + seg_tag(*it->segment) + " ? " + m + "_a_rdata : " + read_mux;
    }
  }
  for (auto const& p : plan.ports) {
    if (p.role == PortRole::parameter) {
      parameter_port(b, p, proto);
      continue;
    }
    auto m = "mem_" + std::to_string(*p.segment);
    b.wire(1, m + "_a_we");
    b.wire(32, m + "_a_rdata");
    b.wire(1, m + "_b_we");
    b.wire(ob, m + "_b_addr");
    b.wire(32, m + "_b_wdata");
    b.wire(32, m + "_b_rdata");
    b.assign(m + "_a_we", sb == 0 ? "bus_we" : "bus_we && bus_waddr" + high + " == " + seg_tag(*p.segment));
    NetlistInstance mem;
    mem.module = "local_mem";
    mem.name = m;
    mem.bindings = {{"clk", "s00_axi_aclk"},        {"a_we", m + "_a_we"},         {"a_waddr", "bus_waddr" + low},
                    {"a_wdata", "bus_wdata"},        {"a_raddr", "bus_raddr" + low}, {"a_rdata", m + "_a_rdata"},
                    {"b_we", m + "_b_we"},           {"b_addr", m + "_b_addr"},      {"b_wdata", m + "_b_wdata"},
                    {"b_rdata", m + "_b_rdata"}};
    mems.push_back(std::move(mem));

    NetlistInstance e;
    e.parameters = {{"WIDTH", std::to_string(p.width)}};
    e.bindings = {{"clk", "s00_axi_aclk"},
                  {"resetn", "s00_axi_aresetn"},
                  {"enable", "run"},
                  {"size", "reg_" + std::to_string(*p.reg)}};
    if (p.direction == Direction::in) {
      e.module = "front_end";
      e.name = "fe_" + p.name;
      b.assign(m + "_b_we", "1'b0");
      b.assign(m + "_b_wdata", "32'd0");
      e.bindings.push_back({"mem_addr", m + "_b_addr"});
      e.bindings.push_back({"mem_rdata", m + "_b_rdata"});
    } else {
      e.module = "back_end";
      e.name = "be_" + p.name;
      auto d = "done_" + p.name;
      b.wire(1, d);
      dones.push_back(d);
      e.bindings.push_back({"mem_we", m + "_b_we"});
      e.bindings.push_back({"mem_addr", m + "_b_addr"});
      e.bindings.push_back({"mem_wdata", m + "_b_wdata"});
      e.bindings.push_back({"done", d});
    }
    for (auto const& s : proto.signals) {
      e.bindings.push_back({s.name_for("tok"), core_net(p.name, s)});
    }
    ends.push_back(std::move(e));
  }
  b.assign("bus_rdata", read_mux);
  std::string all_done;
  for (auto const& d : dones) {
    all_done += (all_done.empty() ? "" : " && ") + d;
  }
  b.assign("done", all_done);

  b.instance(regs_instance(plan, "done"));
  b.instance(bus);
  for (auto const& m : mems) {
    b.instance(m);
  }
  for (auto const& e : ends) {
    b.instance(e);
  }
  b.instance(core_instance(plan, core));

  std::string out = "// Memory-mapped interface layer around the reconfigurable core.\n";
  out += "module mm_accelerator (\n  input wire s00_axi_aclk,\n  input wire s00_axi_aresetn,\n  " +
         axi_lite_ports("s00_axi_") + ",\n  " + axi_full_ports("s01_axi_") + "\n);\n";
  return out + b.str() + "endmodule\n";
}

inline std::string emit_stream_wrapper(TilPlan const& plan, NetlistPlan const& core) {
  auto const& proto = core.protocol;
  WrapperBody b;
  common_body(b, plan, proto);
  declare_core_nets(b, plan, proto);
  std::vector<std::string> ports = {"input wire s00_axi_aclk", "input wire s00_axi_aresetn", axi_lite_ports("s00_axi_")};
  std::vector<NetlistInstance> counters;
  for (auto const& p : plan.ports) {
    if (p.role == PortRole::parameter) {
      parameter_port(b, p, proto);
      continue;
    }
    if (p.direction == Direction::in) {
      auto ax = "s_axis_" + p.name + "_";
      ports.push_back("input wire [31:0] " + ax + "tdata");
      ports.push_back("input wire " + ax + "tvalid");
      ports.push_back("output wire " + ax + "tready");
      for (auto const& s : proto.signals) {
        if (s.role == SignalRole::data) {
          b.assign(core_net(p.name, s), ax + "tdata[" + std::to_string(p.width - 1) + ":0]");
        } else if (s.role == SignalRole::valid) {
          b.assign(core_net(p.name, s), ax + "tvalid && run");
        }
      }
      std::string accept = "1'b1";
      if (auto const* ack = proto.find(SignalRole::ack)) {
        accept = core_net(p.name, *ack);
      } else if (auto const* ready = proto.find(SignalRole::ready)) {
        accept = (ready->inverted() ? "!" : "") + core_net(p.name, *ready);
      }
      b.assign(ax + "tready", "run && " + accept);
      continue;
    }
    auto ax = "m_axis_" + p.name + "_";
    ports.push_back("output wire [31:0] " + ax + "tdata");
    ports.push_back("output wire " + ax + "tvalid");
    ports.push_back("input wire " + ax + "tready");
    ports.push_back("output wire " + ax + "tlast");
    auto beat = "beat_" + p.name;
    auto last = "last_" + p.name;
    b.wire(1, beat);
    b.wire(1, last);
    for (auto const& s : proto.signals) {
      switch (s.role) {
      case SignalRole::data:
        b.assign(ax + "tdata", core_net(p.name, s));
        break;
      case SignalRole::valid:
        b.assign(ax + "tvalid", core_net(p.name, s) + " && run");
        break;
      case SignalRole::ack:
        b.assign(core_net(p.name, s), beat);
        break;
      case SignalRole::ready:
        b.assign(core_net(p.name, s), s.inverted() ? "!(run && " + ax + "tready)" : "run && " + ax + "tready");
        break;
      }
    }
    b.assign(beat, ax + "tvalid && " + ax + "tready");
    b.assign(ax + "tlast", last);
    NetlistInstance c;
    c.module = "out_counter";
    c.name = "cnt_" + p.name;
    c.bindings = {{"clk", "s00_axi_aclk"}, {"resetn", "s00_axi_aresetn"},          {"enable", "run"},
                  {"size", "reg_" + std::to_string(*p.reg)}, {"beat", beat}, {"last", last}};
    counters.push_back(std::move(c));
  }
  b.instance(regs_instance(plan, "1'b0"));
  for (auto const& c : counters) {
    b.instance(c);
  }
  b.instance(core_instance(plan, core));

  std::string out = "// Stream interface layer around the reconfigurable core.\n";
  out += "module s_accelerator (\n" + ports_block(ports) + ");\n";
  return out + b.str() + "endmodule\n";
}

} // namespace copr

/// Interface-layer HDL plus the core netlist, file name -> text.
inline std::map<std::string, std::string> emit_til_hdl(TilPlan const& plan, NetlistPlan const& core) {
  copr::require_handshake(core.protocol);
  auto files = emit_verilog(core);
  files["config_regs.v"] = copr::emit_config_regs(plan);
  if (plan.variant == Coupling::mm) {
    int ob = copr::log2(plan.mem_words_per_port);
    std::size_t nseg = plan.segments();
    int sb = nseg <= 1 ? 0 : static_cast<int>(std::bit_width(nseg - 1));
    files["axi_mem_slave.v"] = copr::emit_axi_mem_slave(ob + sb);
    files["local_mem.v"] = copr::emit_local_mem(plan.mem_words_per_port);
    files["front_end.v"] = copr::emit_front_end(core.protocol, plan.mem_words_per_port);
    files["back_end.v"] = copr::emit_back_end(core.protocol, plan.mem_words_per_port);
    files["mm_accelerator.v"] = copr::emit_mm_wrapper(plan, core);
  } else {
    files["out_counter.v"] = copr::emit_out_counter();
    files["s_accelerator.v"] = copr::emit_stream_wrapper(plan, core);
  }
  return files;
}

// ---------------------------------------------------------------------------
// Drivers

namespace copr {

inline void require_c_identifier(std::string const& s, std::string const& what) {
  if (!vlog::is_identifier(s)) {
    throw copr_error(what + " '" + s + "' cannot be used in a C identifier");
  }
}

/// Control word that starts configuration `network_id`: kernel field in
/// bits [31:24] (0 means idle), start in bit 0.
inline unsigned long long start_word(int network_id) { return (static_cast<unsigned long long>(network_id) + 1) << 24 | 1; }

inline std::string cfg_macro(TilPlan const& plan) { return "XPAR_" + upper(plan.ip_name()) + "_0_CFG_BASEADDR"; }
inline std::string mem_macro(TilPlan const& plan) { return "XPAR_" + upper(plan.ip_name()) + "_0_MEM_BASEADDR"; }
inline std::string mem_offset_macro(TilPlan const& plan, std::size_t segment) {
  return upper(plan.ip_name()) + "_MEM_" + std::to_string(segment + 1) + "_OFFSET";
}
inline std::string cdma_macro() { return "XPAR_AXI_CDMA_0_BASEADDR"; }
inline std::string dma_macro(std::size_t i) { return "XPAR_AXI_DMA_" + std::to_string(i) + "_BASEADDR"; }
inline std::string fifo_macro(std::size_t i) { return "XPAR_AXI_FIFO_MM_S_" + std::to_string(i) + "_BASEADDR"; }

/// Ports configuration c uses, in declaration order.
inline std::vector<TilPort const*> ports_of(TilPlan const& plan, MultiDataflow const& m, std::size_t c) {
  std::vector<TilPort const*> out;
  for (auto const& p : plan.ports) {
    if (m.provenance(Endpoint{"", p.name}).contains(c)) {
      out.push_back(&p);
    }
  }
  return out;
}

inline std::string function_name(TilPlan const& plan, std::string const& config) {
  return plan.ip_name() + "_" + config;
}

/// Parameter list: two arguments per port, in reverse declaration order.
inline std::string signature(std::vector<TilPort const*> const& ports) {
  std::string out = "(\n";
  for (std::size_t i = ports.size(); i-- > 0;) {
    auto const& n = ports[i]->name;
    out += "  // port " + n + "\n  int size_" + n + ", int* data_" + n + (i ? ",\n" : "\n");
  }
  return out + ")";
}

inline std::string reg_write(std::string const& base, std::string const& offset, std::string const& value,
                             std::string const& comment) {
  return "  *((volatile int*) " + base + " + (" + offset + ">>2)) = " + value + ";" +
         (comment.empty() ? "" : " // " + comment) + "\n";
}

inline std::string reg_poll(std::string const& base, std::string const& offset) {
  return "  while ((*((volatile int*) " + base + " + (" + offset + ">>2)) & 0x2) != 0x2);\n";
}

inline std::string cdma_copy(std::string const& src, std::string const& dst, std::string const& bytes) {
  auto base = cdma_macro();
  return reg_write(base, "0x04", "0x00000002", "verify idle") + reg_write(base, "0x18", src, "src") +
         reg_write(base, "0x20", dst, "dst") + reg_write(base, "0x28", bytes, "size [B]") + reg_poll(base, "0x04");
}

inline std::string mem_address(TilPlan const& plan, TilPort const& p) {
  return "(int) (" + mem_macro(plan) + " + " + mem_offset_macro(plan, *p.segment) + ")";
}

inline std::string mm_body(TilPlan const& plan, MultiDataflow const& m, std::size_t c, DeploymentConfig const& cfg) {
  auto ports = ports_of(plan, m, c);
  bool loops = !cfg.dma && std::any_of(ports.begin(), ports.end(), [](auto const* p) { return p->role == PortRole::data; });
  std::string out = "  volatile int* config = (volatile int*) " + cfg_macro(plan) + ";\n";
  if (loops) {
    out += "  int i;\n";
  }
  out += "\n  // configure I/O\n";
  for (auto const& p : plan.ports) {
    bool used = std::find(ports.begin(), ports.end(), &p) != ports.end();
    auto reg = std::to_string(*p.reg);
    if (!used) {
      out += "  *(config + " + reg + ") = 0; // port " + p.name + " idle\n";
    } else if (p.role == PortRole::parameter) {
      out += "  *(config + " + reg + ") = size_" + p.name + " > 0 ? data_" + p.name + "[0] : 0;\n";
    } else {
      out += "  *(config + " + reg + ") = size_" + p.name + ";\n";
    }
  }
  for (auto const* p : ports) {
    if (p->role != PortRole::data || p->direction != Direction::in) {
      continue;
    }
    out += "\n  // send data port " + p->name + "\n";
    if (cfg.dma) {
      out += cdma_copy("(int) (uintptr_t) data_" + p->name, mem_address(plan, *p), "size_" + p->name + "*4");
    } else {
      out += "  for (i = 0; i < size_" + p->name + "; i++) {\n    *((volatile int*) (" + mem_macro(plan) + " + " +
             mem_offset_macro(plan, *p->segment) + ") + i) = data_" + p->name + "[i];\n  }\n";
    }
  }
  out += "\n  // start execution\n  *(config) = " + hex(start_word(static_cast<int>(c))) + ";\n";
  out += "\n  // wait for done\n  while ((*(config) & 0x2) != 0x2);\n";
  for (auto const* p : ports) {
    if (p->role != PortRole::data || p->direction != Direction::out) {
      continue;
    }
    out += "\n  // receive data port " + p->name + "\n";
    if (cfg.dma) {
      out += cdma_copy(mem_address(plan, *p), "(int) (uintptr_t) data_" + p->name, "size_" + p->name + "*4");
    } else {
      out += "  for (i = 0; i < size_" + p->name + "; i++) {\n    data_" + p->name + "[i] = *((volatile int*) (" +
             mem_macro(plan) + " + " + mem_offset_macro(plan, *p->segment) + ") + i);\n  }\n";
    }
  }
  out += "\n  // release the coprocessor\n  *(config) = 0x0;\n  return 0;\n";
  return out;
}

inline std::string stream_body(TilPlan const& plan, MultiDataflow const& m, std::size_t c,
                               DeploymentConfig const& cfg) {
  auto ports = ports_of(plan, m, c);
  bool loops = !cfg.dma && std::any_of(ports.begin(), ports.end(), [](auto const* p) { return p->role == PortRole::data; });
  auto base = cfg_macro(plan);
  std::string out = "  volatile int* config = (volatile int*) " + base + ";\n";
  if (loops) {
    out += "  int i;\n";
  }
  out += "\n  // configure I/O\n";
  for (auto const& p : plan.ports) {
    if (!p.reg) {
      continue;
    }
    bool used = std::find(ports.begin(), ports.end(), &p) != ports.end();
    auto target = "*((volatile int*) (" + base + " + " + std::to_string(*p.reg) + "*4))";
    if (!used) {
      out += "  " + target + " = 0; // port " + p.name + " idle\n";
    } else if (p.role == PortRole::parameter) {
      out += "  " + target + " = size_" + p.name + " > 0 ? data_" + p.name + "[0] : 0;\n";
    } else {
      out += "  " + target + " = size_" + p.name + ";\n";
    }
  }
  out += "\n  // start execution\n  *(config) = " + hex(start_word(static_cast<int>(c))) + ";\n";
  for (auto const* p : ports) {
    if (p->role != PortRole::data || p->direction != Direction::in) {
      continue;
    }
    out += "\n  // send data port " + p->name + "\n";
    if (cfg.dma) {
      auto d = dma_macro(*p->link);
      out += reg_write(d, "0x00", "0x00000001", "start") + reg_write(d, "0x04", "0x00000000", "reset idle") +
             reg_write(d, "0x18", "(int) (uintptr_t) data_" + p->name, "src") +
             reg_write(d, "0x28", "size_" + p->name + "*4", "size [B]") + reg_poll(d, "0x04");
    } else {
      auto f = fifo_macro(*p->link);
      out += "  for (i = 0; i < size_" + p->name + "; i++) {\n" + "  " +
             reg_write(f, "0x10", "data_" + p->name + "[i]", "TDFD") + "  }\n" +
             reg_write(f, "0x14", "size_" + p->name + "*4", "TLR [B]");
    }
  }
  for (auto const* p : ports) {
    if (p->role != PortRole::data || p->direction != Direction::out) {
      continue;
    }
    out += "\n  // receive data port " + p->name + "\n";
    if (cfg.dma) {
      auto d = dma_macro(*p->link);
      out += reg_write(d, "0x30", "0x00000001", "start") + reg_write(d, "0x34", "0x00000000", "reset idle") +
             reg_write(d, "0x48", "(int) (uintptr_t) data_" + p->name, "dst") +
             reg_write(d, "0x58", "size_" + p->name + "*4", "size [B]") + reg_poll(d, "0x34");
    } else {
      auto f = fifo_macro(*p->link);
      out += "  for (i = 0; i < size_" + p->name + "; i++) {\n    while (*((volatile int*) " + f +
             " + (0x1C>>2)) == 0); // RDFO\n    data_" + p->name + "[i] = *((volatile int*) " + f +
             " + (0x20>>2)); // RDFD\n  }\n";
    }
  }
  out += "\n  // release the coprocessor\n  *(config) = 0x0;\n  return 0;\n";
  return out;
}

inline std::string define_default(std::string const& macro, unsigned long long value) {
  return "#ifndef " + macro + "\n#define " + macro + " ((uintptr_t) " + hex8(value) + "U)\n#endif\n";
}

} // namespace copr

/// File name -> text of the C driver (header and source).
inline std::map<std::string, std::string> emit_drivers(TilPlan const& plan, DeploymentConfig const& cfg,
                                                       MultiDataflow const& m, ConfigurationTable const& ctab) {
  using namespace copr;
  auto ip = plan.ip_name();
  auto guard = upper(ip) + "_H";
  for (auto const& p : plan.ports) {
    require_c_identifier(p.name, "port name");
  }
  for (auto const& n : m.config_names) {
    require_c_identifier(n, "configuration name");
  }
  if (ctab.rows.size() != m.config_count()) {
    throw copr_error("configuration table does not match the merged network");
  }

  std::string h = "// Driver of the " + ip + " coprocessor: one function per configuration.\n";
  h += "#ifndef " + guard + "\n#define " + guard + "\n\n#include <stdint.h>\n\n";
  h += "// Base addresses; define them before including this header to relocate.\n";
  h += define_default(cfg_macro(plan), 0x43C00000ULL);
  if (plan.variant == Coupling::mm) {
    h += define_default(mem_macro(plan), 0x76000000ULL);
    if (cfg.dma) {
      h += define_default(cdma_macro(), 0x7E200000ULL);
    }
    h += "\n// Local memory segment of each data port, in bytes from the memory base.\n";
    for (auto const& p : plan.ports) {
      if (p.segment) {
        h += "#define " + mem_offset_macro(plan, *p.segment) + " " + hex8(p.mem_offset) + "U // " + p.name + "\n";
      }
    }
  } else {
    for (std::size_t i = 0; i < plan.links; ++i) {
      auto macro = cfg.dma ? dma_macro(i) : fifo_macro(i);
      h += define_default(macro, (cfg.dma ? 0x40400000ULL : 0x43C10000ULL) + 0x10000ULL * i);
    }
  }
  h += "\n";
  std::string c = "#include \"" + ip + ".h\"\n";
  for (std::size_t k = 0; k < m.config_count(); ++k) {
    auto ports = ports_of(plan, m, k);
    auto sig = "int " + function_name(plan, m.config_names[k]) + signature(ports);
    h += sig + ";\n\n";
    c += "\n" + sig + " {\n";
    c += plan.variant == Coupling::mm ? mm_body(plan, m, k, cfg) : stream_body(plan, m, k, cfg);
    c += "}\n";
  }
  h += "#endif\n";
  return {{ip + ".h", h}, {ip + ".c", c}};
}

// ---------------------------------------------------------------------------
// Scripts

struct GlueCell {
  std::string vlnv;
  std::string instance;
  /// Interface the processor drives through the interconnect.
  std::string control;
  /// CONFIG properties, in order.
  std::vector<std::pair<std::string, std::string>> properties;

  bool operator==(GlueCell const&) const = default;
};

/// Engines the drivers talk to: one central DMA for mm+dma, one AXI DMA or
/// AXI-Stream FIFO per stream link otherwise.
inline std::vector<GlueCell> glue_cells(TilPlan const& plan, DeploymentConfig const& cfg) {
  std::vector<GlueCell> out;
  if (plan.variant == Coupling::mm) {
    if (cfg.dma) {
      out.push_back({"xilinx.com:ip:axi_cdma:4.1", "axi_cdma_0", "S_AXI_LITE", {{"CONFIG.C_INCLUDE_SG", "0"}}});
    }
    return out;
  }
  for (std::size_t i = 0; i < plan.links; ++i) {
    if (cfg.dma) {
      out.push_back({"xilinx.com:ip:axi_dma:7.1", "axi_dma_" + std::to_string(i), "S_AXI_LITE",
                     {{"CONFIG.c_include_sg", "0"}}});
    } else {
      out.push_back({"xilinx.com:ip:axi_fifo_mm_s:4.2", "axi_fifo_mm_s_" + std::to_string(i), "S_AXI", {}});
    }
  }
  return out;
}

struct ScriptPair {
  std::string ip_packaging;
  std::string system_integration;
};

/// Vivado scripts that package the coprocessor as an IP and build the
/// processor-coprocessor block design.
inline ScriptPair emit_scripts(TilPlan const& plan, DeploymentConfig const& cfg,
                               std::vector<std::string> const& hdl_files) {
  auto ip = plan.ip_name();
  ScriptPair s;
  std::string settings = "# FPGA device\nset partname \"" + cfg.part + "\"\nset boardpart \"" + cfg.board + "\"\n";

  auto& p = s.ip_packaging;
  p = "###########################\n# IP Settings\n###########################\n\n";
  p += "set iproot [file normalize [file join [file dirname [info script]] ..]]\n";
  p += "set ipdir [file join $iproot ip]\n";
  p += "set hdl_files_path [list";
  for (auto const& f : hdl_files) {
    p += " \\\n  [file join $iproot hdl " + f + "]";
  }
  p += "]\n\n" + settings;
  p += "\n# Design name\nset ip_name \"" + ip + "\"\nset design $ip_name\n\n";
  p += "###########################\n# Create IP\n###########################\n\n";
  p += "create_project -force $design $ipdir -part $partname\n";
  p += "set_property board_part $boardpart [current_project]\n";
  p += "set_property target_language Verilog [current_project]\n\n";
  p += "add_files $hdl_files_path\nimport_files -force\n\n";
  p += "set files [glob -nocomplain -tails -directory $iproot/hdl/lib/caph/ *]\n";
  p += "foreach f $files {\n  set name $f\n  set_property library caph [get_files $iproot/hdl/lib/caph/$f]\n}\n\n";
  p += "set_property top $ip_name [current_fileset]\n\n";
  p += "ipx::package_project -root_dir $ipdir -vendor user.org \\\n  -library user -taxonomy AXI_Peripheral\n\n";
  p += "ipx::add_address_block s00_axi_reg \\\n  [ipx::get_memory_maps s00_axi -of_objects [ipx::current_core]]\n";
  if (plan.variant == Coupling::mm) {
    p += "ipx::add_address_block s01_axi_mem \\\n  [ipx::get_memory_maps s01_axi -of_objects [ipx::current_core]]\n";
  }
  p += "\nfile copy -force $iproot/drivers $ipdir\nset drivers_dir drivers\n";
  p += "ipx::add_file_group -type software_driver {} [ipx::current_core]\n\n";
  p += "set_property core_revision 3 [ipx::current_core]\n";
  p += "ipx::create_xgui_files [ipx::current_core]\n";
  p += "ipx::update_checksums [ipx::current_core]\n";
  p += "ipx::save_core [ipx::current_core]\n";
  p += "set_property ip_repo_paths $ipdir [current_project]\n";
  p += "update_ip_catalog\nclose_project\n";

  auto& t = s.system_integration;
  bool arm = cfg.processor == Processor::arm;
  std::string cpu = arm ? "processing_system7_0" : "microblaze_0";
  std::string master = arm ? "/processing_system7_0/M_AXI_GP0" : "/microblaze_0 (Periph)";
  t = "###########################\n# Settings\n###########################\n\n";
  t += "set iproot [file normalize [file join [file dirname [info script]] ..]]\n";
  t += "set ipdir [file join $iproot ip]\n";
  t += "set projdir [file join $iproot system]\n\n" + settings;
  t += "\n# Design name\nset design system\nset bd_design \"design_1\"\n";
  t += "set ip_name \"" + ip + "\"\nset ip_version \"1.0\"\n\n";
  t += "###########################\n# Create Project\n###########################\n";
  t += "create_project -force $design $projdir -part $partname\n";
  t += "set_property board_part $boardpart [current_project]\n";
  t += "set_property target_language Verilog [current_project]\n";
  t += "set_property ip_repo_paths $ipdir [current_project]\n";
  t += "update_ip_catalog -rebuild -scan_changes\n";
  t += "###########################\n# create block design\ncreate_bd_design $bd_design\n\n";
  if (arm) {
    t += "# Zynq PS\ncreate_bd_cell -type ip \\\n  -vlnv xilinx.com:ip:processing_system7:5.5 processing_system7_0\n";
  } else {
    t += "# MicroBlaze\ncreate_bd_cell -type ip \\\n  -vlnv xilinx.com:ip:microblaze:11.0 microblaze_0\n";
  }
  auto automate = [&](std::string const& pin) {
    return "apply_bd_automation -rule xilinx.com:bd_rule:axi4 \\\n  -config {Master \"" + master +
           "\" Clk \"Auto\"} [get_bd_intf_pins " + pin + "]\n";
  };
  t += "\n# accelerator IP\ncreate_bd_cell -type ip -vlnv user.org:user:$ip_name:$ip_version $ip_name\\_0\n\n";
  t += automate("$ip_name\\_0/s00_axi");
  if (plan.variant == Coupling::mm) {
    t += automate("$ip_name\\_0/s01_axi");
  }
  for (auto const& g : glue_cells(plan, cfg)) {
    t += "\n# " + g.instance + "\ncreate_bd_cell -type ip -vlnv " + g.vlnv + " " + g.instance + "\n";
    if (!g.properties.empty()) {
      t += "set_property -dict [list";
      for (auto const& [k, v] : g.properties) {
        t += " " + k + " {" + v + "}";
      }
      t += "] [get_bd_cells " + g.instance + "]\n";
    }
    t += "\n" + automate(g.instance + "/" + g.control);
  }
  if (plan.variant == Coupling::stream) {
    t += "\n# stream links (engine -> coprocessor port)\n";
    for (auto const& port : plan.ports) {
      if (!port.link) {
        continue;
      }
      auto engine = (cfg.dma ? "axi_dma_" : "axi_fifo_mm_s_") + std::to_string(*port.link);
      bool in = port.direction == Direction::in;
      t += "#   " + engine + (in ? (cfg.dma ? "/M_AXIS_MM2S" : "/AXI_STR_TXD") : (cfg.dma ? "/S_AXIS_S2MM" : "/AXI_STR_RXD")) +
           (in ? " -> " : " <- ") + "$ip_name\\_0/" + (in ? "s_axis_" : "m_axis_") + port.name + "\n";
    }
  }
  t += "\nmake_wrapper -files [get_files $projdir/$design.srcs/sources_1/bd/$bd_design/$bd_design.bd] -top\n";
  t += "add_files -norecurse $projdir/$design.gen/sources_1/bd/$bd_design/hdl/$bd_design\\_wrapper.v\n";
  return s;
}

// ---------------------------------------------------------------------------
// Whole deployment

/// Every generated file, keyed by path relative to the copr output directory.
inline std::map<std::string, std::string> emit_coprocessor(MultiDataflow const& m, ConfigurationTable const& ctab,
                                                           DeploymentConfig const& cfg,
                                                           ProtocolSpec const& protocol = default_protocol(),
                                                           ClockGatingPlan const* gating = nullptr) {
  auto plan = plan_til(m, cfg);
  auto core = plan_netlist(m, ctab, protocol, gating);
  auto hdl_files = emit_til_hdl(plan, core);
  auto drivers = emit_drivers(plan, cfg, m, ctab);
  std::vector<std::string> hdl_names;
  for (auto const& [n, text] : hdl_files) {
    hdl_names.push_back(n);
  }
  auto scripts = emit_scripts(plan, cfg, hdl_names);

  std::map<std::string, std::string> out;
  for (auto const& [n, text] : hdl_files) {
    out["hdl/" + n] = text;
  }
  for (auto const& [n, text] : drivers) {
    out["drivers/" + n] = text;
  }
  out["scripts/generate_ip.tcl"] = scripts.ip_packaging;
  out["scripts/generate_top.tcl"] = scripts.system_integration;

  detail::json j;
  j["format"] = "copr-manifest";
  j["version"] = 1;
  j["ip"] = plan.ip_name();
  j["processor"] = to_string(cfg.processor);
  j["coupling"] = to_string(cfg.coupling);
  j["dma"] = cfg.dma;
  j["part"] = cfg.part;
  j["board"] = cfg.board;
  j["io"] = {{"inputs", plan.data_inputs}, {"outputs", plan.data_outputs}};
  auto ips = detail::json::array();
  for (auto const& r : additional_ips(cfg, plan.data_inputs, plan.data_outputs)) {
    ips.push_back({{"ip", r.ip}, {"count", r.count}});
  }
  j["additional_ips"] = ips;
  auto glue = detail::json::array();
  for (auto const& g : glue_cells(plan, cfg)) {
    glue.push_back({{"vlnv", g.vlnv}, {"instance", g.instance}});
  }
  j["script_glue"] = glue;
  auto regs = detail::json::array();
  for (auto const& r : plan.registers) {
    static char const* const kinds[] = {"control", "size", "parameter"};
    detail::json e = {{"index", r.index}, {"kind", kinds[static_cast<int>(r.kind)]}};
    if (!r.port.empty()) {
      e["port"] = r.port;
    }
    regs.push_back(e);
  }
  j["registers"] = regs;
  auto ports = detail::json::array();
  for (auto const& p : plan.ports) {
    detail::json e = {{"name", p.name}, {"direction", to_string(p.direction)}, {"width", p.width},
                      {"role", to_string(p.role)}};
    if (p.reg) {
      e["register"] = *p.reg;
    }
    if (p.segment) {
      e["memory_offset"] = p.mem_offset;
      e["memory_words"] = plan.mem_words_per_port;
    }
    if (p.link) {
      e["link"] = *p.link;
    }
    if (p.counter) {
      e["counter"] = true;
    }
    ports.push_back(e);
  }
  j["ports"] = ports;
  auto configs = detail::json::array();
  for (std::size_t c = 0; c < m.config_count(); ++c) {
    configs.push_back({{"name", m.config_names[c]},
                       {"kernel_id", c + 1},
                       {"function", copr::function_name(plan, m.config_names[c])}});
  }
  j["configurations"] = configs;
  auto files = detail::json::array();
  for (auto const& [n, text] : out) {
    files.push_back(n);
  }
  j["files"] = files;
  out["manifest.json"] = j.dump(2) + "\n";
  return out;
}

} // namespace mdc
