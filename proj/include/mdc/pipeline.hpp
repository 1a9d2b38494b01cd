#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "copr.hpp"
#include "flatten.hpp"
#include "hdl.hpp"
#include "merge.hpp"
#include "network_io.hpp"
#include "power.hpp"
#include "profiler.hpp"
#include "protocol.hpp"
#include "random_networks.hpp"
#include "verifier.hpp"

namespace mdc {

/// Generated files, keyed by path relative to the output directory.
using Artifacts = std::map<std::string, std::string>;

inline void write_artifacts(std::filesystem::path const& dir, Artifacts const& files) {
  for (auto const& [name, text] : files) {
    auto path = dir / name;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
      throw error("cannot write " + path.string());
    }
  }
}

inline void add_artifacts(Artifacts& into, Artifacts const& from, std::string const& prefix = "") {
  for (auto const& [name, text] : from) {
    into[prefix + name] = text;
  }
}

struct PipelineOptions {
  MergePolicy policy;
  std::optional<Annotations> annotations;
  std::optional<TechnologyModel> technology;
  ExploreLimits limits;
  std::optional<GatingMode> power_mode;
  /// Gateable regions allowed after reduction; 0 keeps every region (asic) or
  /// uses the device budget (fpga).
  std::size_t gating_budget = 0;
  GatingTarget target = GatingTarget::asic;
  ProtocolSpec protocol = default_protocol();
  DeploymentConfig deployment;
};

/// Inputs of a run: the flattened source networks, or a previously merged
/// network with its table.
struct PipelineInput {
  std::vector<DataflowNetwork> networks;
  std::optional<MergeResult> merged;
};

inline PipelineInput load_inputs(std::vector<std::string> const& paths) {
  PipelineInput in;
  std::optional<MultiDataflow> mdf;
  std::optional<ConfigurationTable> ctab;
  for (auto const& p : paths) {
    if (p.ends_with(".mdf.json")) {
      mdf = parse_multi_dataflow(read_text_file(p));
    } else if (p.ends_with(".ctab.json")) {
      ctab = parse_ctab(read_text_file(p));
    } else {
      in.networks.push_back(flatten(load_network(p)));
    }
  }
  if (mdf || ctab) {
    if (!mdf || !ctab || !in.networks.empty()) {
      throw error("a merged input is exactly one .mdf.json file and one .ctab.json file");
    }
    auto diags = validate(*mdf, *ctab);
    if (!diags.empty()) {
      auto const& d = diags.front();
      throw semantic_error("merged input: " + d.message, d.elements.empty() ? "" : d.elements.front());
    }
    in.merged = MergeResult{std::move(*mdf), std::move(*ctab)};
  } else if (in.networks.empty()) {
    throw error("no input networks");
  }
  std::set<std::string> names;
  for (auto const& n : in.networks) {
    if (!names.insert(n.name).second) {
      throw error("two input networks are named '" + n.name + "'");
    }
  }
  return in;
}

inline MergeResult merged_of(PipelineInput const& in, PipelineOptions const& opt) {
  if (in.merged) {
    return *in.merged;
  }
  return merge_all(in.networks, opt.policy);
}

inline Artifacts merge_artifacts(MergeResult const& r) {
  return {{"multi.mdf.json", serialize_multi_dataflow(r.mdf)}, {"ctab.ctab.json", serialize_ctab(r.ctab)}};
}

struct ProfileOutcome {
  std::vector<MergeCandidate> candidates;
  Artifacts files;
};

inline ProfileOutcome profile_step(PipelineInput const& in, PipelineOptions const& opt) {
  if (!opt.annotations || !opt.technology) {
    throw error("profiling needs both an annotation file and a technology file");
  }
  if (in.networks.empty()) {
    throw error("profiling needs the source networks, not a merged network");
  }
  ProfileOutcome out;
  out.candidates = explore(in.networks, *opt.annotations, *opt.technology, opt.policy, opt.limits);
  out.files["profile.dse.json"] = serialize_dse(out.candidates, opt.limits.key);
  return out;
}

struct PowerOutcome {
  LogicRegionPartition regions;
  std::optional<ClockGatingPlan> gating;
  Artifacts files;
};

inline PowerOutcome power_step(MergeResult const& r, PipelineOptions const& opt) {
  PowerOutcome out;
  if (!opt.power_mode) {
    return out;
  }
  out.regions = identify_logic_regions(r.mdf, *opt.power_mode);
  std::size_t budget = opt.gating_budget;
  if (budget == 0 && opt.target == GatingTarget::fpga) {
    budget = default_bufg_budget;
  }
  if (budget > 0) {
    out.regions = reduce_regions(out.regions, budget);
  }
  if (*opt.power_mode == GatingMode::clock) {
    out.gating = plan_clock_gating(out.regions, opt.target, budget == 0 ? default_bufg_budget : budget);
    out.files["power.lr.json"] = serialize_logic_regions(out.regions, &*out.gating);
  } else {
    out.files["power.lr.json"] = serialize_logic_regions(out.regions);
    out.files["power.cpf"] = emit_power_intent(out.regions, "multi_dataflow");
  }
  return out;
}

inline Artifacts hdl_step(MergeResult const& r, PipelineOptions const& opt, ClockGatingPlan const* gating) {
  Artifacts out;
  add_artifacts(out, emit_verilog(plan_netlist(r.mdf, r.ctab, opt.protocol, gating)), "hdl/");
  return out;
}

inline Artifacts copr_step(MergeResult const& r, PipelineOptions const& opt, ClockGatingPlan const* gating) {
  Artifacts out;
  add_artifacts(out, emit_coprocessor(r.mdf, r.ctab, opt.deployment, opt.protocol, gating), "copr/");
  return out;
}

// ---------------------------------------------------------------------------
// Verification

struct ConfigurationCheck {
  std::string config;
  bool isomorphic = false;
  std::string detail;
};

struct VerificationReport {
  std::vector<ConfigurationCheck> configurations;
  bool sensitivity_checked = false;
  std::vector<SelectorFlip> insensitive;
  std::vector<std::string> lint;

  bool ok() const {
    return insensitive.empty() && lint.empty() &&
           std::all_of(configurations.begin(), configurations.end(), [](auto const& c) { return c.isomorphic; });
  }
};

/// Extracts every configuration of `r` and compares it with its source
/// network; flips selector bits on small merges.
inline VerificationReport verify_merge(std::vector<DataflowNetwork> const& sources, MergeResult const& r) {
  VerificationReport rep;
  for (std::size_t c = 0; c < r.mdf.config_count(); ++c) {
    ConfigurationCheck check;
    check.config = r.mdf.config_names[c];
    auto src = std::find_if(sources.begin(), sources.end(),
                            [&](DataflowNetwork const& n) { return n.name == check.config; });
    if (src == sources.end()) {
      check.detail = "no source network named '" + check.config + "'";
    } else {
      try {
        check.isomorphic = isomorphic_labeled(extract_configuration(r.mdf, r.ctab, c), *src).isomorphic;
        if (!check.isomorphic) {
          check.detail = "extracted configuration differs from its source network";
        }
      } catch (error const& e) {
        check.detail = e.what();
      }
    }
    rep.configurations.push_back(std::move(check));
  }
  if (r.mdf.sboxes().size() <= sensitivity_sbox_limit) {
    rep.sensitivity_checked = true;
    rep.insensitive = selector_sensitivity(r.mdf, r.ctab).insensitive();
  }
  return rep;
}

struct RandomVerification {
  std::size_t sets = 0;
  std::size_t configurations = 0;
  std::vector<std::string> failures;
};

/// Merges `sets` random network sets (2 to 5 networks each) and checks every
/// extracted configuration against its source.
inline RandomVerification verify_random(std::size_t sets, std::uint64_t seed, MergePolicy const& policy = {}) {
  RandomVerification out;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < sets; ++i) {
    RandomNetworkOptions opt;
    opt.shared_ratio = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    auto n = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
    std::vector<DataflowNetwork> flat;
    for (auto const& net : random_network_set(n, rng, opt)) {
      flat.push_back(flatten(net));
    }
    ++out.sets;
    try {
      auto r = merge_all(flat, policy);
      for (std::size_t c = 0; c < r.mdf.config_count(); ++c) {
        ++out.configurations;
        if (!isomorphic_labeled(extract_configuration(r.mdf, r.ctab, c), flat[c]).isomorphic) {
          out.failures.push_back("set " + std::to_string(i) + " configuration " + r.mdf.config_names[c]);
        }
      }
    } catch (error const& e) {
      out.failures.push_back("set " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

inline std::string serialize_verification(VerificationReport const& rep) {
  using detail::json;
  json j;
  j["format"] = "verify";
  j["version"] = 1;
  j["ok"] = rep.ok();
  j["configurations"] = json::array();
  for (auto const& c : rep.configurations) {
    json e = {{"name", c.config}, {"isomorphic", c.isomorphic}};
    if (!c.detail.empty()) {
      e["detail"] = c.detail;
    }
    j["configurations"].push_back(e);
  }
  j["selector_sensitivity"] = {{"checked", rep.sensitivity_checked}, {"insensitive", json::array()}};
  for (auto const& f : rep.insensitive) {
    j["selector_sensitivity"]["insensitive"].push_back({{"config", f.config}, {"sbox", f.sbox}});
  }
  j["lint"] = rep.lint;
  return j.dump(2) + "\n";
}

inline std::string serialize_random_verification(RandomVerification const& r, std::uint64_t seed) {
  detail::json j;
  j["format"] = "verify-random";
  j["version"] = 1;
  j["seed"] = seed;
  j["sets"] = r.sets;
  j["configurations"] = r.configurations;
  j["ok"] = r.failures.empty();
  j["failures"] = r.failures;
  return j.dump(2) + "\n";
}

} // namespace mdc
