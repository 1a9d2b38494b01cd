#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "mdc/copr.hpp"
#include "mdc/flatten.hpp"
#include "mdc/lint.hpp"
#include "mdc/merge.hpp"

using namespace mdc;
using testing_helpers::NetBuilder;

namespace fs = std::filesystem;

namespace {

DataflowNetwork roberts_net(std::string const& name = "roberts") {
  return flatten(load_network(std::string(MDC_SAMPLES_DIR) + "/roberts/" + name + ".xdf"));
}

MergeResult roberts() { return lift(roberts_net()); }

MergeResult edge_pair() { return merge_all({roberts_net("roberts"), roberts_net("sobel")}); }

DeploymentConfig config(Processor p, Coupling c, bool dma) {
  DeploymentConfig cfg;
  cfg.processor = p;
  cfg.coupling = c;
  cfg.dma = dma;
  return cfg;
}

std::vector<DeploymentConfig> all_configs() {
  std::vector<DeploymentConfig> out;
  for (auto p : {Processor::microblaze, Processor::arm}) {
    for (auto c : {Coupling::mm, Coupling::stream}) {
      for (bool d : {false, true}) {
        out.push_back(config(p, c, d));
      }
    }
  }
  return out;
}

std::string label(DeploymentConfig const& c) {
  return std::string(to_string(c.processor)) + "/" + std::string(to_string(c.coupling)) + (c.dma ? "/dma" : "");
}

std::string diagnostics(std::vector<LintDiagnostic> const& d) {
  std::string s;
  for (auto const& x : d) {
    s += x.str() + "\n";
  }
  return s;
}

std::size_t count(std::string const& text, std::string const& needle) {
  std::size_t n = 0;
  for (auto at = text.find(needle); at != std::string::npos; at = text.find(needle, at + needle.size())) {
    ++n;
  }
  return n;
}

/// Whitespace-separated tokens with C++-style comments kept, for layout-free comparison.
std::vector<std::string> words(std::string const& s) {
  std::vector<std::string> out;
  std::string w;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!w.empty()) {
        out.push_back(w);
      }
      w.clear();
    } else if (ch == '(' || ch == ')' || ch == ',') {
      if (!w.empty()) {
        out.push_back(w);
      }
      w.clear();
      out.push_back(std::string(1, ch));
    } else {
      w += ch;
    }
  }
  if (!w.empty()) {
    out.push_back(w);
  }
  return out;
}

/// Prototype of `fn` as written in the header, from the name to the closing parenthesis.
std::string prototype(std::string const& header, std::string const& fn) {
  auto at = header.find("int " + fn + "(");
  if (at == std::string::npos) {
    return {};
  }
  return header.substr(at, header.find(')', at) - at + 1);
}

/// Parameter names of every function in a driver header, via a regex independent of the emitter.
std::map<std::string, std::vector<std::string>> parameters(std::string const& header) {
  std::map<std::string, std::vector<std::string>> out;
  std::regex fn(R"(int (\w+)\(([^)]*)\);)");
  std::regex param(R"(int\*? (\w+))");
  for (std::sregex_iterator it(header.begin(), header.end(), fn), end; it != end; ++it) {
    std::string body = (*it)[2];
    auto& v = out[(*it)[1]];
    for (std::sregex_iterator p(body.begin(), body.end(), param); p != end; ++p) {
      v.push_back((*p)[1]);
    }
  }
  return out;
}

bool have_cc() { return std::system("cc --version > /dev/null 2>&1") == 0; }

/// Compiles and links a driver against a harness that maps every base
/// address onto a static array.
std::string compile_driver(std::map<std::string, std::string> const& files, std::string const& ip,
                           std::string const& tag) {
  auto dir = fs::temp_directory_path() / ("mdc_copr_cc_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto write = [&](std::string const& name, std::string const& text) { std::ofstream(dir / name) << text; };
  write(ip + ".h", files.at("drivers/" + ip + ".h"));
  write(ip + ".c", files.at("drivers/" + ip + ".c"));

  std::string upper_ip = ip == "mm_accelerator" ? "MM_ACCELERATOR" : "S_ACCELERATOR";
  std::string harness = "#include <stdint.h>\nextern int mock_space[1 << 16];\n";
  harness += "#define XPAR_" + upper_ip + "_0_CFG_BASEADDR ((uintptr_t) &mock_space[0])\n";
  harness += "#define XPAR_" + upper_ip + "_0_MEM_BASEADDR ((uintptr_t) &mock_space[256])\n";
  harness += "#define XPAR_AXI_CDMA_0_BASEADDR ((uintptr_t) &mock_space[128])\n";
  for (int i = 0; i < 8; ++i) {
    auto n = std::to_string(i);
    harness += "#define XPAR_AXI_DMA_" + n + "_BASEADDR ((uintptr_t) &mock_space[" + std::to_string(16 + 16 * i) + "])\n";
    harness += "#define XPAR_AXI_FIFO_MM_S_" + n + "_BASEADDR ((uintptr_t) &mock_space[" +
               std::to_string(144 + 16 * i) + "])\n";
  }
  write("mock.h", harness);

  std::string main = "#include \"mock.h\"\n#include \"" + ip + ".h\"\n#include <stdio.h>\nint mock_space[1 << 16];\nint main(void) {\n";
  for (auto const& [fn, params] : parameters(files.at("drivers/" + ip + ".h"))) {
    main += "  printf(\"%p\\n\", (void*) &" + fn + ");\n";
  }
  main += "  return 0;\n}\n";
  write("main.c", main);

  auto cmd = "cd " + dir.string() +
             " && cc -std=c99 -Wall -Werror -include mock.h -o driver main.c " + ip + ".c > cc.log 2>&1";
  int rc = std::system(cmd.c_str());
  std::ifstream log(dir / "cc.log");
  std::stringstream ss;
  ss << log.rdbuf();
  return rc == 0 ? std::string() : "cc failed:\n" + ss.str();
}

} // namespace

// ---------------------------------------------------------------------------

TEST(Plan, MemoryMappedRegisterPerPortInDeclarationOrder) {
  auto r = roberts();
  auto plan = plan_til(r.mdf, config(Processor::arm, Coupling::mm, false));
  ASSERT_EQ(plan.registers.size(), 4u);
  EXPECT_EQ(plan.registers[0].kind, TilRegister::Kind::control);
  std::vector<std::string> order;
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_EQ(plan.registers[i].kind, TilRegister::Kind::size);
    order.push_back(plan.registers[i].port);
  }
  EXPECT_EQ(order, (std::vector<std::string>{"in_size", "in_pel", "out_pel"}));
  EXPECT_EQ(plan.find_port("in_pel")->segment, 1u);
  EXPECT_EQ(plan.find_port("out_pel")->mem_offset, 2u * 256 * 4);
  EXPECT_EQ(plan.data_inputs, 2u);
  EXPECT_EQ(plan.data_outputs, 1u);
  EXPECT_EQ(plan.ip_name(), "mm_accelerator");
}

TEST(Plan, StreamHasOutputSizesAndCounters) {
  auto r = roberts();
  auto arm = plan_til(r.mdf, config(Processor::arm, Coupling::stream, false));
  ASSERT_EQ(arm.registers.size(), 2u);
  EXPECT_EQ(arm.registers[1].port, "out_pel");
  EXPECT_EQ(arm.counters(), 1u);
  EXPECT_TRUE(arm.find_port("out_pel")->counter);
  EXPECT_FALSE(arm.find_port("in_pel")->counter);
  EXPECT_EQ(arm.segments(), 0u);
  // ARM: one engine per couple of ports
  EXPECT_EQ(arm.find_port("in_size")->link, 0u);
  EXPECT_EQ(arm.find_port("in_pel")->link, 0u);
  EXPECT_EQ(arm.find_port("out_pel")->link, 1u);
  EXPECT_EQ(arm.links, 2u);

  auto mb = plan_til(r.mdf, config(Processor::microblaze, Coupling::stream, false));
  EXPECT_EQ(mb.find_port("out_pel")->link, 2u);
  EXPECT_EQ(mb.links, 3u);
}

TEST(Plan, ParameterPortsGoThroughRegisters) {
  auto r = roberts();
  auto cfg = config(Processor::arm, Coupling::mm, false);
  cfg.port_roles["in_size"] = PortRole::parameter;
  auto mm = plan_til(r.mdf, cfg);
  EXPECT_EQ(mm.registers[1].kind, TilRegister::Kind::parameter);
  EXPECT_FALSE(mm.find_port("in_size")->segment);
  EXPECT_EQ(mm.find_port("in_pel")->segment, 0u);
  EXPECT_EQ(mm.data_inputs, 1u);

  cfg.coupling = Coupling::stream;
  auto s = plan_til(r.mdf, cfg);
  ASSERT_EQ(s.registers.size(), 3u);
  EXPECT_EQ(s.registers[1].port, "out_pel");
  EXPECT_EQ(s.registers[2].port, "in_size");
  EXPECT_EQ(s.registers[2].kind, TilRegister::Kind::parameter);
  EXPECT_FALSE(s.find_port("in_size")->link);
  EXPECT_EQ(s.links, 1u);
}

TEST(Plan, MinimalOneInOneOut) {
  auto net = NetBuilder("copy").in("x").out("y").actor("A", "TA").path({"x", "A", "y"}).build();
  auto r = lift(net);
  for (auto const& cfg : all_configs()) {
    auto plan = plan_til(r.mdf, cfg);
    EXPECT_EQ(plan.data_inputs, 1u) << label(cfg);
    EXPECT_EQ(plan.data_outputs, 1u) << label(cfg);
    EXPECT_EQ(plan.id_width, 0) << label(cfg);
  }
}

TEST(Plan, Rejections) {
  auto r = roberts();
  auto expect_throw = [&](DeploymentConfig const& cfg, std::string const& what) {
    EXPECT_THROW(plan_til(r.mdf, cfg), copr_error) << what;
  };
  auto cfg = config(Processor::arm, Coupling::mm, false);
  auto bad = cfg;
  bad.port_roles["nope"] = PortRole::parameter;
  expect_throw(bad, "unknown port");
  bad = cfg;
  bad.port_roles["out_pel"] = PortRole::parameter;
  expect_throw(bad, "parameter output");
  bad = cfg;
  bad.mem_words_per_port = 300;
  expect_throw(bad, "not a power of two");
  bad.mem_words_per_port = 1;
  expect_throw(bad, "too small");
  bad = cfg;
  bad.port_roles = {{"in_size", PortRole::parameter}, {"in_pel", PortRole::parameter}};
  expect_throw(bad, "no input data port");

  auto wide = NetBuilder("w").in("x", 64).out("y", 64).actor("A", "TA", 64).path({"x", "A", "y"}).build();
  EXPECT_THROW(plan_til(lift(wide).mdf, cfg), copr_error);
}

// ---------------------------------------------------------------------------

TEST(AdditionalIps, EveryDeploymentScenario) {
  using V = std::vector<IpRequirement>;
  IpRequirement const ic{"AXI4 Interconnect", 1};
  std::size_t in = 3;
  std::size_t out = 2;
  struct Row {
    Processor p;
    Coupling c;
    bool dma;
    V expected;
  };
  std::vector<Row> rows = {
      {Processor::microblaze, Coupling::mm, false, {ic}},
      {Processor::microblaze, Coupling::mm, true, {ic, {"AXI DMA", 1}}},
      {Processor::microblaze, Coupling::stream, false, {ic, {"AXI4-Stream Data FIFO", 5}}},
      {Processor::microblaze, Coupling::stream, true, {ic, {"AXI4-Stream Data FIFO", 5}, {"AXI CDMA", 5}}},
      {Processor::arm, Coupling::mm, false, {ic}},
      {Processor::arm, Coupling::mm, true, {ic, {"AXI DMA", 1}}},
      {Processor::arm, Coupling::stream, false, {ic, {"AXI-Stream FIFO", 3}}},
      {Processor::arm, Coupling::stream, true, {ic, {"AXI4-Stream Data FIFO", 5}, {"AXI CDMA", 3}}},
  };
  for (auto const& row : rows) {
    auto cfg = config(row.p, row.c, row.dma);
    EXPECT_EQ(additional_ips(cfg, in, out), row.expected) << label(cfg);
  }
}

TEST(AdditionalIps, SmallCases) {
  IpRequirement const ic{"AXI4 Interconnect", 1};
  EXPECT_EQ(additional_ips(config(Processor::microblaze, Coupling::mm, false), 1, 1), std::vector<IpRequirement>{ic});
  EXPECT_EQ(additional_ips(config(Processor::arm, Coupling::stream, false), 2, 2),
            (std::vector<IpRequirement>{ic, {"AXI-Stream FIFO", 2}}));
  EXPECT_EQ(additional_ips(config(Processor::microblaze, Coupling::stream, true), 1, 1),
            (std::vector<IpRequirement>{ic, {"AXI4-Stream Data FIFO", 2}, {"AXI CDMA", 2}}));
}

// ---------------------------------------------------------------------------

TEST(Drivers, PrototypeListsPortsInReverseOrder) {
  auto r = roberts();
  std::string expected = R"(int mm_accelerator_roberts(
// port out_pel
int size_out_pel, int* data_out_pel,
// port in_pel
int size_in_pel, int* data_in_pel,
// port in_size
int size_in_size, int* data_in_size
))";
  auto mm = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::mm, true));
  EXPECT_EQ(words(prototype(mm.at("drivers/mm_accelerator.h"), "mm_accelerator_roberts")), words(expected));

  auto s = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::stream, true));
  auto sp = words(prototype(s.at("drivers/s_accelerator.h"), "s_accelerator_roberts"));
  auto mp = words(expected);
  ASSERT_FALSE(sp.empty());
  EXPECT_EQ(sp[1], "s_accelerator_roberts");
  sp.erase(sp.begin() + 1);
  mp.erase(mp.begin() + 1);
  EXPECT_EQ(sp, mp);
}

TEST(Drivers, TwoParametersPerPortAndIdenticalAcrossCouplings) {
  auto r = edge_pair();
  for (auto proc : {Processor::arm, Processor::microblaze}) {
    auto mm = parameters(emit_coprocessor(r.mdf, r.ctab, config(proc, Coupling::mm, false)).at("drivers/mm_accelerator.h"));
    auto s = parameters(emit_coprocessor(r.mdf, r.ctab, config(proc, Coupling::stream, true)).at("drivers/s_accelerator.h"));
    ASSERT_EQ(mm.size(), 2u);
    ASSERT_EQ(s.size(), 2u);
    for (std::size_t c = 0; c < 2; ++c) {
      auto const& name = r.mdf.config_names[c];
      auto const& pm = mm.at("mm_accelerator_" + name);
      auto const& ps = s.at("s_accelerator_" + name);
      EXPECT_EQ(pm.size(), 2u * 3);
      EXPECT_EQ(pm, ps);
    }
  }
}

TEST(Drivers, SixPortsGiveTwelveParameters) {
  NetBuilder b("wide");
  for (int i = 0; i < 3; ++i) {
    auto n = std::to_string(i);
    b.in("i" + n).out("o" + n).actor("A" + n, "TA").path({"i" + n, "A" + n, "o" + n});
  }
  auto r = lift(b.build());
  auto files = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::mm, false));
  auto ps = parameters(files.at("drivers/mm_accelerator.h"));
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps.begin()->second,
            (std::vector<std::string>{"size_o2", "data_o2", "size_i2", "data_i2", "size_o1", "data_o1", "size_i1",
                                      "data_i1", "size_o0", "data_o0", "size_i0", "data_i0"}));
}

TEST(Drivers, CentralDmaSequence) {
  auto r = roberts();
  auto c = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::mm, true)).at("drivers/mm_accelerator.c");
  EXPECT_NE(c.find("*((volatile int*) XPAR_AXI_CDMA_0_BASEADDR + (0x04>>2)) = 0x00000002; // verify idle"),
            std::string::npos);
  EXPECT_NE(c.find("+ (0x18>>2)) = (int) (uintptr_t) data_in_size; // src"), std::string::npos);
  EXPECT_NE(c.find("= (int) (XPAR_MM_ACCELERATOR_0_MEM_BASEADDR + MM_ACCELERATOR_MEM_1_OFFSET); // dst"),
            std::string::npos);
  EXPECT_NE(c.find("+ (0x28>>2)) = size_in_size*4; // size [B]"), std::string::npos);
  EXPECT_NE(c.find("= (int) (XPAR_MM_ACCELERATOR_0_MEM_BASEADDR + MM_ACCELERATOR_MEM_3_OFFSET); // src"),
            std::string::npos);
  // two sends and one receive, each polling for idle
  EXPECT_EQ(count(c, "& 0x2) != 0x2);"), 3u + 1u);
}

TEST(Drivers, PlainLoopsTouchNoDmaEngine) {
  auto r = roberts();
  auto mm = emit_coprocessor(r.mdf, r.ctab, config(Processor::microblaze, Coupling::mm, false));
  EXPECT_EQ(mm.at("drivers/mm_accelerator.c").find("DMA"), std::string::npos);
  EXPECT_EQ(mm.at("drivers/mm_accelerator.h").find("DMA"), std::string::npos);
  EXPECT_NE(mm.at("drivers/mm_accelerator.c").find("for (i = 0; i < size_in_pel; i++)"), std::string::npos);
  auto s = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::stream, false));
  EXPECT_EQ(s.at("drivers/s_accelerator.c").find("DMA"), std::string::npos);
  EXPECT_NE(s.at("drivers/s_accelerator.c").find("XPAR_AXI_FIFO_MM_S_1_BASEADDR"), std::string::npos);
}

TEST(Drivers, RegisterWritesMatchThePlan) {
  auto r = edge_pair();
  for (auto const& cfg : all_configs()) {
    auto files = emit_coprocessor(r.mdf, r.ctab, cfg);
    auto plan = plan_til(r.mdf, cfg);
    auto const& c = files.at("drivers/" + plan.ip_name() + ".c");
    std::regex write(cfg.coupling == Coupling::mm ? R"(\*\(config \+ (\d+)\) = size_(\w+)[ ;])"
                                                  : R"(CFG_BASEADDR \+ (\d+)\*4\)\) = size_(\w+)[ ;])");
    std::set<std::pair<std::size_t, std::string>> seen;
    for (std::sregex_iterator it(c.begin(), c.end(), write), end; it != end; ++it) {
      seen.emplace(std::stoul((*it)[1]), (*it)[2]);
    }
    std::set<std::pair<std::size_t, std::string>> expected;
    for (auto const& reg : plan.registers) {
      if (reg.kind != TilRegister::Kind::control) {
        expected.emplace(reg.index, reg.port);
      }
    }
    EXPECT_EQ(seen, expected) << label(cfg);
  }
}

TEST(Drivers, StartWordCarriesKernelId) {
  auto r = edge_pair();
  auto c = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::mm, false)).at("drivers/mm_accelerator.c");
  EXPECT_EQ(count(c, "*(config) = 0x1000001;"), 1u);
  EXPECT_EQ(count(c, "*(config) = 0x2000001;"), 1u);
  EXPECT_EQ(count(c, "*(config) = 0x0;"), 2u);
}

TEST(Drivers, UnusedPortsAreZeroedPerConfiguration) {
  auto a = NetBuilder("a").in("x").out("ya").actor("A", "TA").path({"x", "A", "ya"}).build();
  auto b = NetBuilder("b").in("x").out("yb").actor("B", "TB").path({"x", "B", "yb"}).build();
  auto r = merge_all({a, b});
  auto c = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::mm, false)).at("drivers/mm_accelerator.c");
  EXPECT_EQ(count(c, "= 0; // port yb idle"), 1u);
  EXPECT_EQ(count(c, "= 0; // port ya idle"), 1u);
}

TEST(Drivers, ParameterPortWritesValue) {
  auto r = roberts();
  auto cfg = config(Processor::arm, Coupling::stream, false);
  cfg.port_roles["in_size"] = PortRole::parameter;
  auto c = emit_coprocessor(r.mdf, r.ctab, cfg).at("drivers/s_accelerator.c");
  EXPECT_NE(c.find("CFG_BASEADDR + 2*4)) = size_in_size > 0 ? data_in_size[0] : 0;"), std::string::npos);
  EXPECT_EQ(c.find("send data port in_size"), std::string::npos);
}

TEST(Drivers, RejectsNamesThatAreNotCIdentifiers) {
  auto net = NetBuilder("x-y").in("x").out("y").actor("A", "TA").path({"x", "A", "y"}).build();
  auto r = lift(net);
  EXPECT_THROW(emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::mm, false)), copr_error);
}

TEST(Drivers, CompileAgainstMockHarness) {
  if (!have_cc()) {
    GTEST_SKIP() << "no C compiler";
  }
  auto r = edge_pair();
  int i = 0;
  for (auto const& cfg : all_configs()) {
    auto files = emit_coprocessor(r.mdf, r.ctab, cfg);
    auto ip = plan_til(r.mdf, cfg).ip_name();
    EXPECT_EQ(compile_driver(files, ip, "t" + std::to_string(i++)), "") << label(cfg);
  }
}

// ---------------------------------------------------------------------------

TEST(Scripts, GlueFollowsDeployment) {
  auto r = roberts();
  auto top = [&](DeploymentConfig const& cfg) { return emit_coprocessor(r.mdf, r.ctab, cfg).at("scripts/generate_top.tcl"); };

  auto arm_dma = top(config(Processor::arm, Coupling::mm, true));
  EXPECT_NE(arm_dma.find("processing_system7:5.5 processing_system7_0"), std::string::npos);
  EXPECT_NE(arm_dma.find("create_bd_cell -type ip -vlnv xilinx.com:ip:axi_cdma:4.1 axi_cdma_0"), std::string::npos);
  EXPECT_NE(arm_dma.find("set_property -dict [list CONFIG.C_INCLUDE_SG {0}] [get_bd_cells axi_cdma_0]"),
            std::string::npos);
  EXPECT_NE(arm_dma.find("[get_bd_intf_pins axi_cdma_0/S_AXI_LITE]"), std::string::npos);

  auto mb = top(config(Processor::microblaze, Coupling::mm, false));
  EXPECT_NE(mb.find("microblaze_0"), std::string::npos);
  EXPECT_EQ(count(mb, "create_bd_cell"), 2u);
  EXPECT_EQ(count(mb, "apply_bd_automation"), 2u);

  auto fifo = top(config(Processor::arm, Coupling::stream, false));
  EXPECT_EQ(count(fifo, "axi_fifo_mm_s:4.2"), 2u);
  EXPECT_EQ(count(fifo, "s01_axi"), 0u);
  auto dma = top(config(Processor::microblaze, Coupling::stream, true));
  EXPECT_EQ(count(dma, "axi_dma:7.1"), 3u);
}

TEST(Scripts, IpPackaging) {
  auto r = roberts();
  auto files = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::mm, false));
  auto const& ip = files.at("scripts/generate_ip.tcl");
  for (auto const* needle :
       {"set partname \"xc7z020clg400-1\"", "set boardpart \"digilentinc.com:arty-z7-20:part0:1.0\"",
        "set ip_name \"mm_accelerator\"", "create_project -force $design $ipdir -part $partname",
        "set_property top $ip_name [current_fileset]", "ipx::add_address_block s01_axi_mem", "ipx::save_core",
        "update_ip_catalog"}) {
    EXPECT_NE(ip.find(needle), std::string::npos) << needle;
  }
  // every HDL file is packaged
  for (auto const& [name, text] : files) {
    if (name.rfind("hdl/", 0) == 0) {
      EXPECT_NE(ip.find(" " + name.substr(4) + "]"), std::string::npos) << name;
    }
  }
  auto s = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::stream, false)).at("scripts/generate_ip.tcl");
  EXPECT_EQ(s.find("s01_axi_mem"), std::string::npos);
  EXPECT_NE(s.find("set ip_name \"s_accelerator\""), std::string::npos);
}

TEST(Scripts, BoardAndPartOverrides) {
  auto r = roberts();
  auto cfg = config(Processor::arm, Coupling::mm, false);
  cfg.part = "xc7z010clg400-1";
  cfg.board = "digilentinc.com:zybo:part0:1.0";
  auto files = emit_coprocessor(r.mdf, r.ctab, cfg);
  for (auto const* f : {"scripts/generate_ip.tcl", "scripts/generate_top.tcl"}) {
    EXPECT_NE(files.at(f).find("set partname \"xc7z010clg400-1\""), std::string::npos);
    EXPECT_NE(files.at(f).find("set boardpart \"digilentinc.com:zybo:part0:1.0\""), std::string::npos);
  }
}

TEST(Scripts, Golden) {
  auto r = roberts();
  auto files = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::mm, true));
  fs::path dir = fs::path(MDC_GOLDEN_DIR) / "copr_arm_mm_dma";
  for (auto const* name : {"generate_ip.tcl", "generate_top.tcl"}) {
    auto const& text = files.at(std::string("scripts/") + name);
    if (std::getenv("MDC_UPDATE_GOLDEN")) {
      fs::create_directories(dir);
      std::ofstream(dir / name) << text;
    }
    std::ifstream in(dir / name);
    ASSERT_TRUE(in) << "missing golden " << name;
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(text, ss.str()) << name;
  }
}

// ---------------------------------------------------------------------------

TEST(Til, LintCleanForEveryDeployment) {
  auto r = edge_pair();
  for (auto const& cfg : all_configs()) {
    auto files = emit_coprocessor(r.mdf, r.ctab, cfg);
    std::map<std::string, std::string> hdl;
    for (auto const& [name, text] : files) {
      if (name.rfind("hdl/", 0) == 0) {
        hdl[name] = text;
      }
    }
    EXPECT_EQ(diagnostics(lint_netlist(hdl)), "") << label(cfg);
  }
}

TEST(Til, LintCleanWithParameterPortsAndCustomProtocol) {
  auto proto = parse_protocol(R"(<protocol name="vr" handshake="valid-ready">
  <clock name="aclk"/>
  <reset name="aresetn" active="low"/>
  <signal role="data" name="{port}_tdata" width="port"/>
  <signal role="valid" name="{port}_tvalid" width="1"/>
  <signal role="ready" name="{port}_tready" width="1" direction="backward"/>
</protocol>)");
  auto r = edge_pair();
  for (auto cfg : all_configs()) {
    cfg.port_roles["in_size"] = PortRole::parameter;
    auto files = emit_coprocessor(r.mdf, r.ctab, cfg, proto);
    std::map<std::string, std::string> hdl;
    for (auto const& [name, text] : files) {
      if (name.rfind("hdl/", 0) == 0) {
        hdl[name] = text;
      }
    }
    EXPECT_EQ(diagnostics(lint_netlist(hdl)), "") << label(cfg);
  }
}

TEST(Til, WrapperInstancesCoreAndInfrastructure) {
  auto r = roberts();
  auto mm = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::mm, false));
  auto const& w = mm.at("hdl/mm_accelerator.v");
  EXPECT_EQ(count(w, "  local_mem "), 3u);
  EXPECT_EQ(count(w, "  front_end #("), 2u);
  EXPECT_EQ(count(w, "  back_end #("), 1u);
  EXPECT_EQ(count(w, "  multi_dataflow u_core ("), 1u);
  EXPECT_NE(mm.at("hdl/local_mem.v").find("reg [31:0] mem [0:255];"), std::string::npos);

  auto s = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::stream, false));
  auto const& sw = s.at("hdl/s_accelerator.v");
  EXPECT_EQ(count(sw, "  out_counter "), 1u);
  EXPECT_NE(sw.find("output wire m_axis_out_pel_tlast"), std::string::npos);
  EXPECT_NE(sw.find("input wire [31:0] s_axis_in_size_tdata"), std::string::npos);
  EXPECT_EQ(s.count("hdl/local_mem.v"), 0u);
}

TEST(Til, KernelIdSelectsConfiguration) {
  auto r = edge_pair();
  auto w = emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::mm, false)).at("hdl/mm_accelerator.v");
  EXPECT_NE(w.find("assign kernel = reg_0[31:24] - 8'd1;"), std::string::npos);
  EXPECT_NE(w.find(".config_id(core_id)"), std::string::npos);
}

TEST(Til, RequiresValidRole) {
  ProtocolSpec p;
  p.name = "bare";
  p.signals = {{SignalRole::data, "data", "{port}_data", 0, SignalFlow::forward}};
  auto net = NetBuilder("n").in("x").out("y").actor("A", "TA").path({"x", "A", "y"}, 0).build();
  auto r = lift(net);
  EXPECT_THROW(emit_coprocessor(r.mdf, r.ctab, config(Processor::arm, Coupling::mm, false), p), copr_error);
}

// ---------------------------------------------------------------------------

TEST(Manifest, DescribesDeployment) {
  auto r = edge_pair();
  auto cfg = config(Processor::arm, Coupling::stream, true);
  auto files = emit_coprocessor(r.mdf, r.ctab, cfg);
  auto j = nlohmann::json::parse(files.at("manifest.json"));
  EXPECT_EQ(j["format"], "copr-manifest");
  EXPECT_EQ(j["coupling"], "stream");
  EXPECT_EQ(j["io"]["inputs"], 2);
  EXPECT_EQ(j["io"]["outputs"], 1);
  ASSERT_EQ(j["additional_ips"].size(), 3u);
  EXPECT_EQ(j["additional_ips"][1]["ip"], "AXI4-Stream Data FIFO");
  EXPECT_EQ(j["additional_ips"][1]["count"], 3);
  EXPECT_EQ(j["additional_ips"][2]["count"], 2);
  ASSERT_EQ(j["configurations"].size(), 2u);
  EXPECT_EQ(j["configurations"][1]["kernel_id"], 2);
  std::set<std::string> listed;
  for (auto const& f : j["files"]) {
    listed.insert(f.get<std::string>());
  }
  for (auto const& [name, text] : files) {
    if (name != "manifest.json") {
      EXPECT_TRUE(listed.count(name)) << name;
    }
  }
}

TEST(Emit, Deterministic) {
  for (auto const& cfg : all_configs()) {
    auto a = edge_pair();
    auto b = edge_pair();
    EXPECT_EQ(emit_coprocessor(a.mdf, a.ctab, cfg), emit_coprocessor(b.mdf, b.ctab, cfg)) << label(cfg);
  }
}
