#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lint.hpp"
#include "pipeline.hpp"

namespace mdc {

struct CliSettings {
  std::string out_dir = "out";
  std::vector<std::string> inputs;
  std::string algorithm = "heuristic";
  std::string order = "given";
  std::string ann;
  std::string tech;
  std::string sort = "area";
  std::size_t max_networks = ExploreLimits{}.max_networks;
  bool override_limit = false;
  unsigned threads = 0;
  std::string power_mode = "none";
  std::size_t gating_budget = 0;
  std::string target = "asic";
  std::string protocol;
  std::string processor = "arm";
  std::string coupling = "mm";
  bool dma = false;
  std::string part = std::string(default_part);
  std::string board = std::string(default_board);
  std::size_t mem_words_per_port = default_mem_words_per_port;
  std::vector<std::string> param_ports;
  std::uint64_t seed = 1;
  std::size_t random_sets = 0;
};

namespace cli_detail {

class UsageError : public error {
public:
  using error::error;
};

inline PipelineOptions pipeline_options(CliSettings const& s) {
  PipelineOptions o;
  o.policy.algorithm = parse_merge_algorithm(s.algorithm);
  o.policy.order = parse_merge_order(s.order);
  if (!s.ann.empty()) {
    o.annotations = parse_annotations(read_text_file(s.ann));
    for (auto const& [type, cost] : o.annotations->components) {
      o.policy.actor_weights[type] = cost.area;
    }
  }
  if (!s.tech.empty()) {
    o.technology = parse_technology(read_text_file(s.tech));
  }
  o.limits.key = parse_sort_key(s.sort);
  o.limits.max_networks = s.max_networks;
  o.limits.override_limit = s.override_limit;
  o.limits.threads = s.threads;
  if (s.power_mode != "none") {
    o.power_mode = parse_gating_mode(s.power_mode);
  }
  o.gating_budget = s.gating_budget;
  o.target = parse_gating_target(s.target);
  if (!s.protocol.empty()) {
    o.protocol = load_protocol(s.protocol);
  }
  o.deployment.processor = parse_processor(s.processor);
  o.deployment.coupling = parse_coupling(s.coupling);
  o.deployment.dma = s.dma;
  o.deployment.part = s.part;
  o.deployment.board = s.board;
  o.deployment.mem_words_per_port = s.mem_words_per_port;
  for (auto const& p : s.param_ports) {
    o.deployment.port_roles[p] = PortRole::parameter;
  }
  return o;
}

struct Runner {
  CliSettings const& settings;
  PipelineOptions options;
  std::ostream& out;
  std::ostream& log;
  Artifacts files;

  void save() {
    write_artifacts(settings.out_dir, files);
    for (auto const& [name, text] : files) {
      log << "wrote " << (std::filesystem::path(settings.out_dir) / name).string() << "\n";
    }
  }

  PipelineInput inputs() const {
    if (settings.inputs.empty()) {
      throw UsageError("no input files given");
    }
    return load_inputs(settings.inputs);
  }

  MergeResult merged(PipelineInput const& in) {
    auto r = merged_of(in, options);
    log << "merged " << r.mdf.config_count() << " configuration(s): " << r.mdf.base.actors.size() << " actors, "
        << r.mdf.sboxes().size() << " SBoxes\n";
    return r;
  }

  int merge() {
    auto r = merged(inputs());
    add_artifacts(files, merge_artifacts(r));
    save();
    return 0;
  }

  int profile() {
    if (!options.annotations || !options.technology) {
      throw UsageError("profile needs --ann and --tech");
    }
    auto p = profile_step(inputs(), options);
    out << format_dse_table(p.candidates);
    add_artifacts(files, p.files);
    save();
    return 0;
  }

  int power(bool explicit_mode) {
    if (!options.power_mode) {
      if (explicit_mode) {
        throw UsageError("power needs --power-mode clock or power");
      }
      options.power_mode = GatingMode::clock;
    }
    auto r = merged(inputs());
    auto p = power_step(r, options);
    log << p.regions.regions.size() << " logic region(s)";
    if (p.gating) {
      log << ", " << p.gating->cells.size() << " gating cell(s)";
    }
    log << "\n";
    add_artifacts(files, p.files);
    save();
    return 0;
  }

  int emit_hdl() {
    auto r = merged(inputs());
    auto p = power_step(r, options);
    add_artifacts(files, hdl_step(r, options, p.gating ? &*p.gating : nullptr));
    save();
    return 0;
  }

  int emit_copr() {
    auto r = merged(inputs());
    auto p = power_step(r, options);
    add_artifacts(files, copr_step(r, options, p.gating ? &*p.gating : nullptr));
    save();
    return 0;
  }

  VerificationReport verification(PipelineInput const& in, MergeResult const& r, Artifacts const& hdl) {
    auto rep = in.networks.empty() ? VerificationReport{} : verify_merge(in.networks, r);
    std::map<std::string, std::string> sources;
    for (auto const& [name, text] : hdl) {
      if (name.ends_with(".v")) {
        sources[name] = text;
      }
    }
    for (auto const& d : lint_netlist(sources)) {
      rep.lint.push_back(d.str());
    }
    return rep;
  }

  int report(VerificationReport const& rep) {
    for (auto const& c : rep.configurations) {
      out << (c.isomorphic ? "ok   " : "FAIL ") << c.config << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
    }
    for (auto const& f : rep.insensitive) {
      out << "FAIL selector of " << f.sbox << " has no effect on " << f.config << "\n";
    }
    for (auto const& l : rep.lint) {
      out << "FAIL lint " << l << "\n";
    }
    return rep.ok() ? 0 : 1;
  }

  int verify() {
    if (settings.random_sets > 0) {
      auto r = verify_random(settings.random_sets, settings.seed, options.policy);
      out << r.sets << " random set(s), " << r.configurations << " configuration(s), " << r.failures.size()
          << " failure(s)\n";
      for (auto const& f : r.failures) {
        out << "FAIL " << f << "\n";
      }
      files["verify.json"] = serialize_random_verification(r, settings.seed);
      save();
      return r.failures.empty() ? 0 : 1;
    }
    auto in = inputs();
    auto r = merged(in);
    auto rep = verification(in, r, hdl_step(r, options, nullptr));
    files["verify.json"] = serialize_verification(rep);
    save();
    return report(rep);
  }

  int all() {
    auto in = inputs();
    auto r = merged(in);
    add_artifacts(files, merge_artifacts(r));
    if (options.annotations && options.technology && !in.networks.empty()) {
      auto p = profile_step(in, options);
      out << format_dse_table(p.candidates);
      add_artifacts(files, p.files);
    } else {
      log << "profiling skipped (needs --ann, --tech and source networks)\n";
    }
    auto p = power_step(r, options);
    add_artifacts(files, p.files);
    auto hdl = hdl_step(r, options, p.gating ? &*p.gating : nullptr);
    add_artifacts(files, hdl);
    add_artifacts(files, copr_step(r, options, p.gating ? &*p.gating : nullptr));
    auto rep = verification(in, r, hdl);
    files["verify.json"] = serialize_verification(rep);
    save();
    return report(rep);
  }
};

} // namespace cli_detail

/// Runs the command line `args` (without the program name). Exit status: 0
/// success, 1 diagnostics, 2 usage error.
inline int run_cli(std::vector<std::string> const& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CliSettings s;
  CLI::App app{"Multi-dataflow composer: merge dataflow networks into one reconfigurable datapath", "mdc"};
  app.set_config("--project", "", "Project file of key = value lines; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);

  auto one_of = [](std::initializer_list<std::string> xs) { return CLI::IsMember(std::vector<std::string>(xs)); };
  app.add_option("-o,--out", s.out_dir, "Output directory")->capture_default_str();
  app.add_option("--input", s.inputs, "Input files (also accepted as positional arguments)")->check(CLI::ExistingFile);
  app.add_option("--algorithm", s.algorithm, "Merging algorithm")->check(one_of({"heuristic", "moreano"}))->capture_default_str();
  app.add_option("--order", s.order, "Merging order")->check(one_of({"given", "canonical"}))->capture_default_str();
  app.add_option("--ann", s.ann, "Component annotations (*.ann.json)")->check(CLI::ExistingFile);
  app.add_option("--tech", s.tech, "Technology model (*.tech.json)")->check(CLI::ExistingFile);
  app.add_option("--sort", s.sort, "Ranking key")->check(one_of({"area", "power", "freq"}))->capture_default_str();
  app.add_option("--max-networks", s.max_networks, "Exploration limit")->capture_default_str();
  app.add_flag("--override-limit", s.override_limit, "Explore beyond --max-networks");
  app.add_option("--threads", s.threads, "Profiler workers, 0 = all cores")->capture_default_str();
  auto* power_mode = app.add_option("--power-mode", s.power_mode, "Power management")
                         ->check(one_of({"none", "clock", "power"}))
                         ->capture_default_str();
  app.add_option("--gating-budget", s.gating_budget, "Maximum gateable regions, 0 = no reduction (asic)")
      ->capture_default_str();
  app.add_option("--target", s.target, "Clock gating cells")->check(one_of({"asic", "fpga"}))->capture_default_str();
  app.add_option("--protocol", s.protocol, "Handshake protocol description")->check(CLI::ExistingFile);
  app.add_option("--processor", s.processor, "Host processor")->check(one_of({"arm", "microblaze"}))->capture_default_str();
  app.add_option("--coupling", s.coupling, "Coprocessor coupling")->check(one_of({"mm", "stream"}))->capture_default_str();
  app.add_flag("--dma", s.dma, "Move data with DMA engines");
  app.add_option("--part", s.part, "FPGA part")->capture_default_str();
  app.add_option("--board", s.board, "Board part")->capture_default_str();
  app.add_option("--mem-words-per-port", s.mem_words_per_port, "Local memory per mm port, in words")
      ->capture_default_str();
  app.add_option("--param-ports", s.param_ports, "Input ports written through registers (comma separated)")
      ->delimiter(',')
      ->allow_extra_args(false);
  app.add_option("--seed", s.seed, "Seed for randomized checks")->capture_default_str();

  std::vector<std::string> positional;
  auto sub = [&](char const* name, char const* help) {
    auto* c = app.add_subcommand(name, help);
    c->fallthrough();
    c->add_option("inputs", positional, "Networks (*.xdf, *.json) or a merged pair (*.mdf.json, *.ctab.json)")
        ->check(CLI::ExistingFile);
    return c;
  };
  auto* merge = sub("merge", "Merge networks into out/multi.mdf.json and out/ctab.ctab.json");
  auto* profile = sub("profile", "Rank every merging configuration (out/profile.dse.json)");
  auto* power = sub("power", "Logic regions and gating (out/power.lr.json, out/power.cpf)");
  auto* hdl = sub("emit-hdl", "Structural Verilog of the merged datapath (out/hdl/)");
  auto* copr = sub("emit-copr", "Processor-coprocessor deployment (out/copr/)");
  auto* verify = sub("verify", "Check that every configuration survives the merge (out/verify.json)");
  verify->add_option("--random", s.random_sets, "Verify this many random network sets instead of inputs");
  auto* all = sub("all", "Merge, profile, power, HDL and coprocessor in one run");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (CLI::CallForHelp const&) {
    out << app.help();
    return 0;
  } catch (CLI::CallForAllHelp const&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (CLI::ParseError const& e) {
    err << "mdc: " << e.what() << "\n" << app.help();
    return 2;
  }
  s.inputs.insert(s.inputs.end(), positional.begin(), positional.end());

  try {
    cli_detail::Runner run{s, cli_detail::pipeline_options(s), out, err, {}};
    if (merge->parsed()) {
      return run.merge();
    }
    if (profile->parsed()) {
      return run.profile();
    }
    if (power->parsed()) {
      return run.power(power_mode->count() > 0);
    }
    if (hdl->parsed()) {
      return run.emit_hdl();
    }
    if (copr->parsed()) {
      return run.emit_copr();
    }
    if (verify->parsed()) {
      return run.verify();
    }
    if (all->parsed()) {
      return run.all();
    }
  } catch (cli_detail::UsageError const& e) {
    err << "mdc: " << e.what() << "\n";
    return 2;
  } catch (std::exception const& e) {
    err << "mdc: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

} // namespace mdc
