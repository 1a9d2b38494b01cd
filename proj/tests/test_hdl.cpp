#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "helpers.hpp"
#include "mdc/flatten.hpp"
#include "mdc/hdl.hpp"
#include "mdc/lint.hpp"
#include "mdc/merge.hpp"
#include "mdc/power.hpp"
#include "mdc/random_networks.hpp"

using namespace mdc;
using testing_helpers::NetBuilder;

namespace {

DataflowNetwork sample(std::string const& name) {
  return flatten(load_network(std::string(MDC_SAMPLES_DIR) + "/trio/" + name + ".xdf"));
}

MergeResult trio() { return merge_all({sample("alpha"), sample("gamma"), sample("beta")}); }

/// A in both configurations, B only in 0, C only in 1.
MergeResult two_config() {
  auto a = NetBuilder("a").in("in").out("ob").actor("A", "TA").actor("B", "TB").path({"in", "A", "B", "ob"}).build();
  auto b = NetBuilder("b").in("in").out("oc").actor("A", "TA").actor("C", "TC").path({"in", "A", "C", "oc"}).build();
  return merge_all({a, b});
}

std::map<std::string, std::string> emit(MergeResult const& r, ProtocolSpec const& p = default_protocol(),
                                        ClockGatingPlan const* g = nullptr) {
  return emit_verilog(plan_netlist(r.mdf, r.ctab, p, g));
}

std::string diagnostics(std::vector<LintDiagnostic> const& d) {
  std::string s;
  for (auto const& x : d) {
    s += x.str() + "\n";
  }
  return s;
}

/// Independent reader of LUT text: "K'dN: begin // name" then "sel_x = 1'bV;".
ConfigurationTable read_lut(std::string const& text) {
  ConfigurationTable t;
  std::regex arm(R"(^\s*\d+'d(\d+): begin\s*// (\S+)\s*$)");
  std::regex sel(R"(^\s*sel_(\w+) = 1'b([01]);\s*$)");
  std::istringstream in(text);
  std::string line;
  bool in_default = false;
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_match(line, m, arm)) {
      t.rows.push_back(ConfigRow{m[2], std::stoi(m[1]), {}});
      in_default = false;
    } else if (line.find("default:") != std::string::npos) {
      in_default = true;
    } else if (!in_default && !t.rows.empty() && std::regex_match(line, m, sel)) {
      t.rows.back().selectors[m[1]] = std::stoi(m[2]);
    }
  }
  return t;
}

std::multiset<std::tuple<std::string, std::string, unsigned>> channel_set(std::vector<Channel> const& cs) {
  std::multiset<std::tuple<std::string, std::string, unsigned>> out;
  for (auto const& c : cs) {
    out.emplace(c.source.str(), c.sink.str(), c.depth);
  }
  return out;
}

std::size_t count(std::string const& text, std::string const& needle) {
  std::size_t n = 0;
  for (auto at = text.find(needle); at != std::string::npos; at = text.find(needle, at + 1)) {
    ++n;
  }
  return n;
}

} // namespace

TEST(Plan, SingleActorHasNoLut) {
  auto net = NetBuilder("one").in("x").out("y").actor("A", "TA").path({"x", "A", "y"}, 0).build();
  auto r = lift(net);
  auto plan = plan_netlist(r.mdf, r.ctab);
  ASSERT_EQ(plan.instances.size(), 1u);
  EXPECT_EQ(plan.instances[0].name, "A");
  EXPECT_EQ(plan.id_width, 0);
  auto files = emit_verilog(plan);
  EXPECT_FALSE(files.count("config_lut.v"));
  EXPECT_EQ(files.count("top.v"), 1u);
  EXPECT_EQ(diagnostics(lint_netlist(files)), "");
}

TEST(Plan, TrioLutShape) {
  auto r = trio();
  auto plan = plan_netlist(r.mdf, r.ctab);
  EXPECT_EQ(plan.id_width, 2);
  EXPECT_EQ(plan.lut_outputs.size(), 3u);
  auto const* lut = plan.find_instance("u_config_lut");
  ASSERT_NE(lut, nullptr);
  EXPECT_EQ(lut->bindings.size(), 4u);  // id + 3 selectors
  auto files = emit_verilog(plan);
  auto const& text = files.at("config_lut.v");
  EXPECT_NE(text.find("input wire [1:0] id"), std::string::npos);
  EXPECT_EQ(count(text, "output reg sel_"), 3u);
  EXPECT_EQ(count(text, ": begin  //"), 4u);  // 3 arms + default
  EXPECT_EQ(read_lut(text), r.ctab);
}

TEST(Plan, OneInstancePerActorAndFifo) {
  auto r = trio();
  auto plan = plan_netlist(r.mdf, r.ctab);
  std::size_t fifos = 0;
  for (auto const& c : r.mdf.base.channels) {
    fifos += c.depth > 0;
  }
  EXPECT_EQ(plan.instances.size(), r.mdf.base.actors.size() + fifos + 1);
  for (auto const& a : r.mdf.base.actors) {
    EXPECT_NE(plan.find_instance(a.instance), nullptr) << a.instance;
  }
}

TEST(Plan, DeepChannelGetsFifoWithDepth) {
  auto net = NetBuilder("n").in("x").out("y").actor("A", "TA").build();
  net.channels.push_back({{"", "x"}, {"A", "i"}, 4});
  net.channels.push_back({{"A", "o"}, {"", "y"}, 0});
  auto r = lift(net);
  auto plan = plan_netlist(r.mdf, r.ctab);
  std::vector<NetlistInstance const*> fifos;
  for (auto const& i : plan.instances) {
    if (i.module == "fifo_wrapper") {
      fifos.push_back(&i);
    }
  }
  ASSERT_EQ(fifos.size(), 1u);
  auto params = fifos[0]->parameters;
  EXPECT_NE(std::find(params.begin(), params.end(), std::pair<std::string, std::string>{"DEPTH", "4"}), params.end());
  EXPECT_NE(std::find(params.begin(), params.end(), std::pair<std::string, std::string>{"WIDTH", "8"}), params.end());
  EXPECT_EQ(diagnostics(lint_netlist(emit_verilog(plan))), "");
}

TEST(Plan, WireNamesFollowSignalRoles) {
  auto net = NetBuilder("n").in("x").out("y").actor("A", "TA").path({"x", "A", "y"}, 0).build();
  auto r = lift(net);
  auto plan = plan_netlist(r.mdf, r.ctab);
  std::set<std::string> names;
  for (auto const& w : plan.wires) {
    names.insert(w.name);
  }
  for (auto const* role : {"data", "valid", "ack", "full"}) {
    EXPECT_TRUE(names.count(std::string("w_x_A_i_") + role)) << role;
    EXPECT_TRUE(names.count(std::string("w_A_o_y_") + role)) << role;
  }
}

TEST(Plan, ProtocolWithoutValidCannotBufferChannels) {
  auto p = default_protocol();
  p.signals.erase(p.signals.begin() + 1);  // valid
  auto net = NetBuilder("n").in("x").out("y").actor("A", "TA").path({"x", "A", "y"}, 1).build();
  auto r = lift(net);
  EXPECT_THROW(plan_netlist(r.mdf, r.ctab, p), hdl_error);
  auto flat = NetBuilder("n").in("x").out("y").actor("A", "TA").path({"x", "A", "y"}, 0).build();
  auto rf = lift(flat);
  EXPECT_NO_THROW(plan_netlist(rf.mdf, rf.ctab, p));
}

TEST(Plan, RejectsIllegalNames) {
  auto net = NetBuilder("n").in("x").out("y").actor("A", "TA").path({"x", "A", "y"}, 0).build();
  auto r = lift(net);
  r.mdf.base.actors[0].type = "module";
  EXPECT_THROW(plan_netlist(r.mdf, r.ctab), hdl_error);
  r.mdf.base.actors[0].type = "TA";
  EXPECT_THROW(plan_netlist(r.mdf, r.ctab, default_protocol(), nullptr, "1top"), hdl_error);
  r.mdf.base.actors[0].type = "fifo_wrapper";
  EXPECT_THROW(plan_netlist(r.mdf, r.ctab), hdl_error);
}

TEST(Plan, RejectsSameTypeWithTwoSignatures) {
  auto net = NetBuilder("n").in("x").out("y").actor("A", "T").actor("B", "T", 16).build();
  net.ports[1].width = 16;
  net.channels.push_back({{"", "x"}, {"A", "i"}, 0});
  net.actors[1].ports[0].open = true;
  net.actors[0].ports[1].open = true;
  net.channels.push_back({{"B", "o"}, {"", "y"}, 0});
  auto r = lift(net);
  EXPECT_THROW(plan_netlist(r.mdf, r.ctab), hdl_error);
}

TEST(Emit, GoldenTwoConfigurationMerge) {
  auto r = two_config();
  auto files = emit(r);
  EXPECT_EQ(files, emit(r));
  namespace fs = std::filesystem;
  fs::path dir = fs::path(MDC_GOLDEN_DIR) / "hdl_two_config";
  if (std::getenv("MDC_UPDATE_GOLDEN")) {
    fs::create_directories(dir);
    for (auto const& [name, text] : files) {
      std::ofstream(dir / name, std::ios::binary) << text;
    }
  }
  std::set<std::string> on_disk;
  for (auto const& e : fs::directory_iterator(dir)) {
    on_disk.insert(e.path().filename().string());
  }
  std::set<std::string> emitted;
  for (auto const& [name, text] : files) {
    emitted.insert(name);
    EXPECT_EQ(read_text_file((dir / name).string()), text) << name;
  }
  EXPECT_EQ(on_disk, emitted);
}

TEST(Emit, EverySelectorDrivenOnceByLut) {
  auto r = trio();
  auto plan = plan_netlist(r.mdf, r.ctab);
  for (auto const& s : plan.lut_outputs) {
    int drivers = 0;
    for (auto const& a : plan.assigns) {
      drivers += a.lhs == "sel_" + s;
    }
    for (auto const& i : plan.instances) {
      if (i.module == "config_lut") {
        drivers += i.actual_of("sel_" + s) != nullptr;
      }
    }
    EXPECT_EQ(drivers, 1) << s;
    auto const* sb = plan.find_instance(s);
    ASSERT_NE(sb, nullptr);
    ASSERT_NE(sb->actual_of("sel"), nullptr);
    EXPECT_EQ(*sb->actual_of("sel"), "sel_" + s);
  }
}

TEST(Emit, OnlyUsedTemplates) {
  auto files = emit(two_config());
  EXPECT_TRUE(files.count("sbox_1x2.v"));
  EXPECT_FALSE(files.count("sbox_2x1.v"));
  EXPECT_TRUE(files.count("fifo_wrapper.v"));
  EXPECT_FALSE(files.count("clock_gate.v"));
  auto both = emit(trio());
  EXPECT_TRUE(both.count("sbox_1x2.v"));
  EXPECT_TRUE(both.count("sbox_2x1.v"));
}

TEST(Emit, LintCleanOnBackendOutput) {
  EXPECT_EQ(diagnostics(lint_netlist(emit(trio()))), "");
  EXPECT_EQ(diagnostics(lint_netlist(emit(two_config()))), "");
}

TEST(Emit, GatedNetlistsLintClean) {
  auto r = trio();
  auto p = identify_logic_regions(r.mdf, GatingMode::clock);
  for (auto target : {GatingTarget::asic, GatingTarget::fpga}) {
    auto plan = plan_clock_gating(p, target);
    auto files = emit(r, default_protocol(), &plan);
    EXPECT_EQ(diagnostics(lint_netlist(files)), "") << to_string(target);
    EXPECT_EQ(files.count("clock_gate.v"), target == GatingTarget::asic ? 1u : 0u);
    auto const& top = files.at("top.v");
    EXPECT_EQ(count(top, target == GatingTarget::asic ? "  cg_and " : "  BUFGCE "), plan.cells.size());
    for (auto const& [inst, clk] : plan.clock_of) {
      EXPECT_NE(top.find(".clk(" + clk + ")"), std::string::npos) << inst;
    }
  }
}

TEST(Emit, CustomProtocolNamesSignals) {
  auto text = R"(<protocol name="vr" handshake="valid-ready">
  <clock name="aclk"/>
  <reset name="aresetn" active="low"/>
  <signal role="data" name="{port}_tdata" width="port"/>
  <signal role="valid" name="{port}_tvalid" width="1"/>
  <signal role="ready" name="{port}_tready" width="1" direction="backward"/>
</protocol>)";
  auto proto = parse_protocol(text);
  auto r = two_config();
  auto files = emit(r, proto);
  EXPECT_EQ(diagnostics(lint_netlist(files)), "");
  auto const& top = files.at("top.v");
  EXPECT_NE(top.find("input wire aclk"), std::string::npos);
  EXPECT_NE(top.find("in_tdata"), std::string::npos);
  EXPECT_EQ(top.find("_ack"), std::string::npos);
  EXPECT_NE(files.at("fifo_wrapper.v").find("if (!aresetn)"), std::string::npos);
}

TEST(Emit, ParametersBecomeOverrides) {
  auto net = NetBuilder("n").in("x").out("y").actor("A", "TA").path({"x", "A", "y"}, 0).build();
  net.actors[0].parameters = {{"GAIN", "3"}, {"MODE", "fast"}};
  auto r = lift(net);
  auto files = emit_verilog(plan_netlist(r.mdf, r.ctab));
  EXPECT_NE(files.at("top.v").find("TA #(.GAIN(3), .MODE(\"fast\")) A ("), std::string::npos);
  EXPECT_EQ(diagnostics(lint_netlist(files)), "");
}

TEST(Lut, DegenerateWithoutSelectors) {
  ConfigurationTable t;
  t.rows.push_back({"only", 0, {}});
  auto text = emit_lut_contents(t);
  EXPECT_EQ(text.find("output"), std::string::npos);
  EXPECT_EQ(diagnostics(lint_netlist({{"config_lut.v", text}})), "");
}

TEST(Lut, RandomTablesRoundTrip) {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 100; ++round) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(2, 9)(rng);
    std::size_t s = std::uniform_int_distribution<std::size_t>(1, 14)(rng);
    ConfigurationTable t;
    for (std::size_t c = 0; c < n; ++c) {
      ConfigRow row{"cfg" + std::to_string(c), static_cast<int>(c), {}};
      for (std::size_t k = 0; k < s; ++k) {
        row.selectors["sbox_" + std::to_string(k)] = static_cast<int>(rng() & 1);
      }
      t.rows.push_back(row);
    }
    auto text = emit_lut_contents(t);
    EXPECT_EQ(read_lut(text), t);
    EXPECT_EQ(diagnostics(lint_netlist({{"config_lut.v", text}})), "");
    // selectors listed in creation order
    if (s > 10) {
      EXPECT_LT(text.find("sel_sbox_2 = "), text.find("sel_sbox_10 = "));
    }
  }
}

TEST(Reverse, RecoversChannelsAndInstances) {
  for (auto const& r : {trio(), two_config()}) {
    auto files = emit(r);
    auto got = read_netlist(files, default_protocol());
    EXPECT_EQ(channel_set(got.channels), channel_set(r.mdf.base.channels));
    std::set<std::string> actors;
    for (auto const& a : r.mdf.base.actors) {
      actors.insert(a.instance);
    }
    std::set<std::string> instances;
    for (auto const& [n, mod] : got.instances) {
      instances.insert(n);
    }
    instances.erase("u_config_lut");
    EXPECT_EQ(instances, actors);
  }
}

TEST(Random, MergedNetworksEmitLintCleanAndReadBack) {
  std::mt19937_64 rng(97);
  RandomNetworkOptions opt;
  opt.min_actors = 3;
  opt.max_actors = 14;
  for (int round = 0; round < 60; ++round) {
    opt.shared_ratio = (round % 5) / 4.0;
    auto raw = random_network_set(std::uniform_int_distribution<std::size_t>(2, 4)(rng), rng, opt);
    std::vector<DataflowNetwork> nets;
    for (auto const& n : raw) {
      nets.push_back(flatten(n));
    }
    auto r = merge_all(nets);
    auto files = emit(r);
    ASSERT_EQ(diagnostics(lint_netlist(files)), "") << "round " << round;
    auto got = read_netlist(files, default_protocol());
    EXPECT_EQ(channel_set(got.channels), channel_set(r.mdf.base.channels)) << "round " << round;
  }
}

TEST(Lint, DuplicateDriverIsOneDiagnostic) {
  auto files = emit(two_config());
  auto& top = files.at("top.v");
  auto at = top.find("  assign ");
  ASSERT_NE(at, std::string::npos);
  auto end = top.find('\n', at);
  auto line = top.substr(at, end - at + 1);
  top.insert(end + 1, line);
  auto d = lint_netlist(files);
  ASSERT_EQ(d.size(), 1u) << diagnostics(d);
  EXPECT_NE(d[0].message.find("2 drivers"), std::string::npos);
}

TEST(Lint, StructuralFaults) {
  auto one = [](std::string const& text) { return lint_netlist({{"t.v", text}}); };
  EXPECT_EQ(one("module a (input wire x, output wire y);\n  assign y = x;\n").size(), 1u);
  EXPECT_EQ(one("endmodule\n").size(), 1u);
  EXPECT_EQ(one("module a (output wire y);\n  assign y = z;\nendmodule\n").size(), 1u);
  EXPECT_EQ(one("module a (output wire y);\n  assign y = z;\n  wire z;\n  assign z = 1'b0;\nendmodule\n").size(), 1u);
  EXPECT_EQ(one("module a (output wire y);\n  wire z;\n  assign y = z;\nendmodule\n").size(), 1u);
  EXPECT_EQ(one("module a (output wire y);\nendmodule\n").size(), 1u);
  auto sub = "module b (input wire i, output wire o);\n  assign o = i;\nendmodule\n";
  EXPECT_EQ(one(std::string(sub) + "module a (input wire x, output wire y);\n  b u (.i(x));\n  assign y = x;\nendmodule\n")
                .size(),
            1u);
  EXPECT_EQ(one(std::string(sub) + "module a (input wire x, output wire y);\n  b u (.i(x), .o(y), .q(x));\nendmodule\n")
                .size(),
            1u);
  EXPECT_EQ(one(std::string(sub) + "module a (input wire x, output wire y);\n  b u (.i(), .o(y));\nendmodule\n").size(),
            1u);
  EXPECT_EQ(one("module a (input wire x, output wire y);\n  c u (.i(x), .o(y));\nendmodule\n").size(), 1u);
  EXPECT_EQ(one(std::string(sub) + "module a (input wire x, output wire y);\n  b u (.i(x), .o(y));\nendmodule\n"),
            std::vector<LintDiagnostic>{});
}
