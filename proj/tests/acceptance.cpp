// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "mdc/copr.hpp"
#include "mdc/flatten.hpp"
#include "mdc/merge.hpp"
#include "mdc/power.hpp"
#include "mdc/profiler.hpp"
#include "mdc/random_networks.hpp"
#include "mdc/verifier.hpp"

using namespace mdc;
using testing_helpers::NetBuilder;
namespace fs = std::filesystem;

namespace {

std::string const samples = MDC_SAMPLES_DIR;

/// Collects violations of one criterion; the first few are printed.
struct Check {
  std::vector<std::string> failures;
  std::string summary;

  void fail(std::string msg) { failures.push_back(std::move(msg)); }
  void expect(bool ok, std::string const& msg) {
    if (!ok) {
      fail(msg);
    }
  }
};

std::vector<DataflowNetwork> flat_set(std::size_t n, std::mt19937_64& rng, RandomNetworkOptions const& opt) {
  std::vector<DataflowNetwork> out;
  for (auto const& net : random_network_set(n, rng, opt)) {
    out.push_back(flatten(net));
  }
  return out;
}

DataflowNetwork trio(std::string const& name) { return flatten(load_network(samples + "/trio/" + name + ".xdf")); }

/// in_k -> P_k -> X -> Q_k -> out_k for k < n; X is shared by every network.
std::vector<DataflowNetwork> star(std::size_t n) {
  std::vector<DataflowNetwork> out;
  for (std::size_t k = 0; k < n; ++k) {
    auto s = std::to_string(k);
    out.push_back(NetBuilder("n" + s)
                      .in("in" + s)
                      .out("out" + s)
                      .actor("P" + s, "TP" + s)
                      .actor("X", "TX")
                      .actor("Q" + s, "TQ" + s)
                      .path({"in" + s, "P" + s, "X", "Q" + s, "out" + s})
                      .build());
  }
  return out;
}

// ---------------------------------------------------------------------------

void oracle_equivalence(Check& c) {
  auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  RandomNetworkOptions opt;
  opt.min_actors = 3;
  opt.max_actors = 30;
  std::size_t const sets = 500;
  std::size_t configs = 0;
  for (auto algo : {MergeAlgorithm::heuristic, MergeAlgorithm::moreano}) {
    MergePolicy policy;
    policy.algorithm = algo;
    for (std::size_t i = 0; i < sets; ++i) {
      opt.shared_ratio = static_cast<double>(i) / static_cast<double>(sets - 1);
      auto n = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
      auto nets = flat_set(n, rng, opt);
      try {
        auto r = merge_all(nets, policy);
        for (std::size_t k = 0; k < nets.size(); ++k) {
          ++configs;
          auto e = extract_configuration(r.mdf, r.ctab, k);
          c.expect(isomorphic_labeled(e, nets[k]).isomorphic, std::string(to_string(algo)) + " set " +
                                                                  std::to_string(i) + " config " + nets[k].name);
        }
      } catch (std::exception const& e) {
        c.fail(std::string(to_string(algo)) + " set " + std::to_string(i) + ": " + e.what());
      }
    }
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 120.0, "took " + std::to_string(secs) + " s");
  std::ostringstream s;
  s << 2 * sets << " sets, " << configs << " configurations, " << secs << " s";
  c.summary = s.str();
}

void trio_regression(Check& c) {
  auto alpha = trio("alpha");
  auto beta = trio("beta");
  auto gamma = trio("gamma");
  for (auto algo : {MergeAlgorithm::heuristic, MergeAlgorithm::moreano}) {
    MergePolicy policy;
    policy.algorithm = algo;
    std::string tag(to_string(algo));
    auto first = merge_pair(lift(alpha), gamma, policy);
    c.expect(first.mdf.sbox_count() == 2, tag + ": " + std::to_string(first.mdf.sbox_count()) + " SBoxes after alpha+gamma");
    auto second = merge_pair(first, beta, policy);
    c.expect(second.mdf.sbox_count() == 3, tag + ": " + std::to_string(second.mdf.sbox_count()) + " SBoxes after beta");
    c.expect(second.ctab.rows.size() == 3, tag + ": " + std::to_string(second.ctab.rows.size()) + " table rows");
  }
  c.summary = "2 then 3 SBoxes, 3 table rows (both algorithms)";
}

void cascade_bound(Check& c) {
  for (std::size_t n = 2; n <= 6; ++n) {
    auto got = longest_sbox_cascade(merge_all(star(n)).mdf);
    c.expect(got == n - 1, "N=" + std::to_string(n) + " cascade " + std::to_string(got));
  }
  c.summary = "N=2..6";
}

// Independent cost evaluation.

std::string oracle_key(Actor const& a) {
  if (a.kind == ActorKind::sbox1x2 || a.kind == ActorKind::sbox2x1) {
    int w = 0;
    for (auto const& p : a.ports) {
      w = std::max(w, p.width);
    }
    return std::string(a.kind == ActorKind::sbox1x2 ? "sbox1x2_" : "sbox2x1_") + std::to_string(w);
  }
  return a.type;
}

/// Longest path counted in vertices over SBox-to-SBox depth-0 channels, by
/// repeated relaxation.
std::size_t oracle_cascade(DataflowNetwork const& net) {
  std::map<std::string, std::size_t> len;
  for (auto const& a : net.actors) {
    if (a.kind == ActorKind::sbox1x2 || a.kind == ActorKind::sbox2x1) {
      len[a.instance] = 1;
    }
  }
  for (std::size_t round = 0; round <= len.size(); ++round) {
    bool changed = false;
    for (auto const& ch : net.channels) {
      if (ch.depth != 0 || !len.count(ch.source.actor) || !len.count(ch.sink.actor)) {
        continue;
      }
      if (len[ch.sink.actor] < len[ch.source.actor] + 1) {
        len[ch.sink.actor] = len[ch.source.actor] + 1;
        changed = true;
      }
    }
    if (!changed) {
      break;
    }
  }
  std::size_t best = 0;
  for (auto const& [_, l] : len) {
    best = std::max(best, l);
  }
  return best;
}

void cost_exactness(Check& c) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> d(0.001, 100.0);
  RandomNetworkOptions opt;
  opt.max_actors = 20;
  TechnologyModel tech;
  std::map<int, std::pair<double, double>> fg;
  std::size_t cases = 0;
  std::size_t with_sboxes = 0;
  while (cases < 100) {
    opt.shared_ratio = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    auto nets = flat_set(std::uniform_int_distribution<std::size_t>(1, 4)(rng), rng, opt);
    auto m = merge_all(nets).mdf;
    Annotations ann;
    for (auto const& a : m.base.actors) {
      auto key = oracle_key(a);
      if (!ann.components.count(key)) {
        ann.components[key] = {d(rng), d(rng), d(rng), d(rng)};
      }
      if (a.kind == ActorKind::sbox1x2 || a.kind == ActorKind::sbox2x1) {
        int w = std::stoi(key.substr(key.find('_') + 1));
        if (!fg.count(w)) {
          fg[w] = {d(rng), d(rng) - 50};
          tech.rows.push_back({w, fg[w].first, fg[w].second});
        }
      }
    }
    ++cases;
    std::string tag = "case " + std::to_string(cases);

    // same fold order as the model: declaration order of the base actors
    double area = 0, ps = 0, pd = 0;
    for (auto const& a : m.base.actors) {
      auto const& k = ann.components.at(oracle_key(a));
      area = area + k.area;
      ps = ps + k.p_static;
      pd = pd + k.p_dynamic;
    }
    auto p = cost_power(m, ann);
    c.expect(cost_area(m, ann) == area, tag + ": area");
    c.expect(p.p_static == ps && p.p_dynamic == pd && p.total == ps + pd, tag + ": power");

    std::vector<double> cps;
    double cp_static = 0;
    for (auto const& n : nets) {
      double x = 0;
      for (auto const& a : n.actors) {
        x = std::max(x, ann.components.at(oracle_key(a)).cp);
      }
      cps.push_back(x);
      cp_static = std::max(cp_static, x);
    }
    std::size_t ns = oracle_cascade(m.base);
    int b = 0;
    for (auto const& a : m.base.actors) {
      if (a.kind == ActorKind::sbox1x2 || a.kind == ActorKind::sbox2x1) {
        b = std::max(b, std::stoi(oracle_key(a).substr(8)));
      }
    }
    double seq = ns == 0 ? 0.0 : fg.at(b).first * std::log(static_cast<double>(ns)) + fg.at(b).second;
    double expected = std::max(cp_static, seq);
    with_sboxes += ns > 0;
    try {
      double got = cost_critical_path(m, cps, tech).cp;
      c.expect(std::abs(got - expected) <= 1e-12 * std::abs(expected), tag + ": critical path");
    } catch (std::exception const& e) {
      c.fail(tag + ": " + e.what());
    }
  }
  c.summary = std::to_string(cases) + " networks, " + std::to_string(with_sboxes) + " with SBox cascades";
}

std::size_t bell(std::size_t n) {
  // Bell triangle
  std::vector<std::size_t> row{1};
  for (std::size_t i = 1; i < n; ++i) {
    std::vector<std::size_t> next{row.back()};
    for (auto v : row) {
      next.push_back(next.back() + v);
    }
    row = next;
  }
  return row.back();
}

void profiler_enumeration(Check& c) {
  TechnologyModel tech;
  for (int w : {1, 8, 16, 32}) {
    tech.rows.push_back({w, 0.05 * w, 0.5});
  }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.1, 10.0);
  std::string counts;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto nets = star(n);
    Annotations ann;
    for (auto const& net : nets) {
      for (auto const& a : net.actors) {
        ann.components[a.type] = {d(rng), d(rng), d(rng), d(rng)};
      }
    }
    for (int w : {1, 8, 16, 32}) {
      ann.components["sbox1x2_" + std::to_string(w)] = {d(rng), d(rng), d(rng), d(rng)};
      ann.components["sbox2x1_" + std::to_string(w)] = {d(rng), d(rng), d(rng), d(rng)};
    }
    auto cands = explore(nets, ann, tech);
    counts += (counts.empty() ? "" : ", ") + std::to_string(cands.size());
    c.expect(cands.size() == bell(n), "N=" + std::to_string(n) + ": " + std::to_string(cands.size()) + " candidates");
    auto base = std::find_if(cands.begin(), cands.end(), [&](MergeCandidate const& x) { return x.groups.size() == n; });
    if (base == cands.end()) {
      c.fail("N=" + std::to_string(n) + ": no baseline partition");
      continue;
    }
    for (auto const& g : base->groups) {
      c.expect(g.sboxes == 0 && g.timing.cascade == 0, "N=" + std::to_string(n) + ": baseline group has SBoxes");
    }
  }
  c.summary = "candidates " + counts;
}

void logic_regions(Check& c) {
  std::mt19937_64 rng(99);
  RandomNetworkOptions opt;
  opt.max_actors = 20;
  std::size_t reductions = 0;
  for (int round = 0; round < 200; ++round) {
    opt.shared_ratio = (round % 11) / 10.0;
    auto nets = flat_set(std::uniform_int_distribution<std::size_t>(2, 5)(rng), rng, opt);
    auto m = merge_all(nets).mdf;
    std::string tag = "merge " + std::to_string(round);
    for (auto mode : {GatingMode::clock, GatingMode::power}) {
      auto eligible = [&](Actor const& a) {
        return mode == GatingMode::power || (a.kind != ActorKind::sbox1x2 && a.kind != ActorKind::sbox2x1);
      };
      auto safe = [&](LogicRegionPartition const& p) {
        for (auto const& a : m.base.actors) {
          if (!eligible(a)) {
            continue;
          }
          auto const* r = p.region_of(a.instance);
          if (!r || !activity_signature(m, a).is_subset_of(r->signature)) {
            return false;
          }
        }
        return true;
      };
      auto p = identify_logic_regions(m, mode);
      std::map<std::string, int> seen;
      for (auto const& r : p.regions) {
        for (auto const& name : r.members) {
          ++seen[name];
          auto const* a = m.base.find_actor(name);
          c.expect(a && activity_signature(m, *a) == r.signature, tag + ": mixed signature in " + r.id);
        }
      }
      for (auto const& a : m.base.actors) {
        if (eligible(a)) {
          c.expect(seen[a.instance] == 1, tag + ": " + a.instance + " in " + std::to_string(seen[a.instance]) + " regions");
        } else {
          c.expect(!seen.count(a.instance), tag + ": ineligible " + a.instance + " placed");
        }
      }
      for (std::size_t budget = 1; budget <= p.regions.size(); ++budget) {
        auto q = reduce_regions(p, budget);
        ++reductions;
        c.expect(q.gateable().size() <= budget, tag + ": budget " + std::to_string(budget) + " exceeded");
        c.expect(safe(q), tag + ": unsafe after reduction to " + std::to_string(budget));
      }
    }
  }
  c.summary = "200 merges, " + std::to_string(reductions) + " reductions";
}

void table1(Check& c) {
  using V = std::vector<IpRequirement>;
  IpRequirement const ic{"AXI4 Interconnect", 1};
  std::size_t const in = 4, out = 1;
  std::size_t const couples = (in + out + 1) / 2;
  struct Row {
    Processor p;
    Coupling k;
    bool dma;
    V expected;
  };
  std::vector<Row> rows = {
      {Processor::microblaze, Coupling::mm, false, {ic}},
      {Processor::microblaze, Coupling::mm, true, {ic, {"AXI DMA", 1}}},
      {Processor::microblaze, Coupling::stream, false, {ic, {"AXI4-Stream Data FIFO", in + out}}},
      {Processor::microblaze, Coupling::stream, true, {ic, {"AXI4-Stream Data FIFO", in + out}, {"AXI CDMA", in + out}}},
      {Processor::arm, Coupling::mm, false, {ic}},
      {Processor::arm, Coupling::mm, true, {ic, {"AXI DMA", 1}}},
      {Processor::arm, Coupling::stream, false, {ic, {"AXI-Stream FIFO", couples}}},
      {Processor::arm, Coupling::stream, true, {ic, {"AXI4-Stream Data FIFO", in + out}, {"AXI CDMA", couples}}},
  };
  for (auto const& row : rows) {
    DeploymentConfig cfg;
    cfg.processor = row.p;
    cfg.coupling = row.k;
    cfg.dma = row.dma;
    c.expect(additional_ips(cfg, in, out) == row.expected,
             std::string(to_string(row.p)) + "/" + std::string(to_string(row.k)) + (row.dma ? "/dma" : ""));
  }
  c.summary = "8 rows";
}

/// Parameter names per function, read from a driver header.
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

std::string compile_driver(std::map<std::string, std::string> const& files, std::string const& ip,
                           std::string const& tag) {
  auto dir = fs::temp_directory_path() / ("mdc_accept_cc_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto write = [&](std::string const& name, std::string const& text) { std::ofstream(dir / name) << text; };
  write(ip + ".h", files.at("drivers/" + ip + ".h"));
  write(ip + ".c", files.at("drivers/" + ip + ".c"));
  std::string upper;
  for (char ch : ip) {
    upper += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  std::string mock = "#include <stdint.h>\nextern int mock_space[1 << 16];\n";
  mock += "#define XPAR_" + upper + "_0_CFG_BASEADDR ((uintptr_t) &mock_space[0])\n";
  mock += "#define XPAR_" + upper + "_0_MEM_BASEADDR ((uintptr_t) &mock_space[4096])\n";
  mock += "#define XPAR_AXI_CDMA_0_BASEADDR ((uintptr_t) &mock_space[128])\n";
  for (int i = 0; i < 16; ++i) {
    auto n = std::to_string(i);
    mock += "#define XPAR_AXI_DMA_" + n + "_BASEADDR ((uintptr_t) &mock_space[" + std::to_string(256 + 16 * i) + "])\n";
    mock += "#define XPAR_AXI_FIFO_MM_S_" + n + "_BASEADDR ((uintptr_t) &mock_space[" + std::to_string(768 + 16 * i) +
            "])\n";
  }
  write("mock.h", mock);
  std::string main = "#include \"mock.h\"\n#include \"" + ip + ".h\"\n#include <stdio.h>\nint mock_space[1 << 16];\n"
                     "int main(void) {\n";
  for (auto const& [fn, _] : parameters(files.at("drivers/" + ip + ".h"))) {
    main += "  printf(\"%p\\n\", (void*) &" + fn + ");\n";
  }
  main += "  return 0;\n}\n";
  write("main.c", main);
  auto cmd = "cd " + dir.string() + " && cc -std=c99 -Wall -Werror -include mock.h -o driver main.c " + ip +
             ".c > cc.log 2>&1";
  if (std::system(cmd.c_str()) == 0) {
    return {};
  }
  std::stringstream ss;
  ss << std::ifstream(dir / "cc.log").rdbuf();
  return ss.str();
}

void driver_shape(Check& c) {
  auto roberts = flatten(load_network(samples + "/roberts/roberts.xdf"));
  auto sobel = flatten(load_network(samples + "/roberts/sobel.xdf"));
  NetBuilder wide("wide");
  for (int i = 0; i < 3; ++i) {
    auto s = std::to_string(i);
    wide.in("i" + s).out("o" + s).actor("A" + s, "TA").path({"i" + s, "A" + s, "o" + s});
  }
  std::vector<std::pair<MergeResult, std::size_t>> designs = {
      {lift(roberts), 3}, {merge_all({roberts, sobel}), 3}, {lift(wide.build()), 6}};
  std::size_t compiled = 0;
  int tag = 0;
  for (auto const& [r, k] : designs) {
    for (auto proc : {Processor::microblaze, Processor::arm}) {
      std::map<Coupling, std::map<std::string, std::vector<std::string>>> sigs;
      for (auto coupling : {Coupling::mm, Coupling::stream}) {
        for (bool dma : {false, true}) {
          DeploymentConfig cfg;
          cfg.processor = proc;
          cfg.coupling = coupling;
          cfg.dma = dma;
          std::string label = r.mdf.config_names.front() + " " + std::string(to_string(proc)) + "/" +
                              std::string(to_string(coupling)) + (dma ? "/dma" : "");
          auto files = emit_coprocessor(r.mdf, r.ctab, cfg);
          auto ip = plan_til(r.mdf, cfg).ip_name();
          auto ps = parameters(files.at("drivers/" + ip + ".h"));
          c.expect(ps.size() == r.mdf.config_count(), label + ": one function per configuration");
          std::map<std::string, std::vector<std::string>> by_config;
          for (auto const& [fn, params] : ps) {
            c.expect(params.size() == 2 * k, label + ": " + fn + " has " + std::to_string(params.size()) + " parameters");
            by_config[fn.substr(fn.find('_', fn.find("accelerator")) + 1)] = params;
          }
          if (sigs.count(coupling)) {
            c.expect(sigs[coupling] == by_config, label + ": signature depends on dma");
          }
          sigs[coupling] = by_config;
          auto err = compile_driver(files, ip, std::to_string(tag++));
          c.expect(err.empty(), label + ": " + err);
          ++compiled;
        }
      }
      c.expect(sigs[Coupling::mm] == sigs[Coupling::stream], "mm and stream signatures differ");
    }
  }
  c.summary = std::to_string(compiled) + " drivers compiled";
}

std::map<std::string, std::string> read_tree(fs::path const& root) {
  std::map<std::string, std::string> out;
  for (auto const& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      std::stringstream ss;
      ss << std::ifstream(e.path(), std::ios::binary).rdbuf();
      out[fs::relative(e.path(), root).generic_string()] = ss.str();
    }
  }
  return out;
}

void determinism(Check& c) {
  auto base = fs::temp_directory_path() / "mdc_accept_determinism";
  fs::remove_all(base);
  struct Run {
    std::string name;
    std::string args;
  };
  std::vector<Run> runs = {
      {"roberts", "--ann " + samples + "/roberts/roberts.ann.json --tech " + samples +
                      "/roberts/roberts.tech.json --power-mode clock --target fpga --processor arm --coupling mm "
                      "--dma " + samples + "/roberts/roberts.xdf " + samples + "/roberts/sobel.xdf"},
      {"trio", "--ann " + samples + "/trio/trio.ann.json --tech " + samples +
                   "/trio/trio.tech.json --power-mode power --processor microblaze --coupling stream " + samples +
                   "/trio/alpha.xdf " + samples + "/trio/beta.xdf " + samples + "/trio/gamma.xdf"},
  };
  std::size_t files = 0;
  for (auto const& run : runs) {
    std::vector<std::map<std::string, std::string>> trees;
    for (int i = 0; i < 2; ++i) {
      auto dir = base / (run.name + std::to_string(i));
      auto cmd = std::string(MDC_BINARY) + " all -o " + dir.string() + " " + run.args + " > " +
                 (base / (run.name + ".log")).string() + " 2>&1";
      fs::create_directories(base);
      int rc = std::system(cmd.c_str());
      c.expect(rc == 0, run.name + ": exit status " + std::to_string(rc));
      trees.push_back(fs::exists(dir) ? read_tree(dir) : std::map<std::string, std::string>{});
    }
    c.expect(!trees[0].empty(), run.name + ": no output");
    c.expect(trees[0] == trees[1], run.name + ": output trees differ");
    files += trees[0].size();
  }
  c.summary = std::to_string(files) + " files compared";
}

} // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    std::function<void(Check&)> run;
  };
  std::vector<Criterion> criteria = {
      {1, "oracle equivalence", oracle_equivalence}, {2, "three-network regression", trio_regression},
      {3, "cascade bound", cascade_bound},           {4, "cost model exactness", cost_exactness},
      {5, "profiler enumeration", profiler_enumeration}, {6, "logic regions", logic_regions},
      {7, "deployment ip matrix", table1},           {8, "driver shape", driver_shape},
      {9, "determinism", determinism},
  };
  int failed = 0;
  for (auto const& cr : criteria) {
    Check c;
    try {
      cr.run(c);
    } catch (std::exception const& e) {
      c.fail(std::string("exception: ") + e.what());
    }
    bool ok = c.failures.empty();
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << cr.id << " (" << cr.name << ")";
    if (!c.summary.empty()) {
      std::cout << ": " << c.summary;
    }
    std::cout << "\n";
    for (std::size_t i = 0; i < c.failures.size() && i < 5; ++i) {
      std::cout << "    " << c.failures[i] << "\n";
    }
    if (c.failures.size() > 5) {
      std::cout << "    ... " << c.failures.size() - 5 << " more\n";
    }
    std::cout.flush();
  }
  return failed == 0 ? 0 : 1;
}
