#pragma once

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "verilog.hpp"

namespace mdc {

struct LintDiagnostic {
  std::string file;
  std::size_t line = 0;
  std::string message;

  std::string str() const { return file + ":" + std::to_string(line) + ": " + message; }

  bool operator==(LintDiagnostic const&) const = default;
};

namespace lint_detail {

struct Signature {
  std::map<std::string, Direction> ports;
  std::set<std::string> parameters;
};

inline std::map<std::string, Signature> primitives() {
  return {{"BUFGCE", {{{"I", Direction::in}, {"CE", Direction::in}, {"O", Direction::out}}, {}}},
          {"BUFG", {{{"I", Direction::in}, {"O", Direction::out}}, {}}}};
}

/// Names assigned inside an always/initial body: an identifier that starts a
/// statement and is followed, after any index, by '=' or '<='.
inline std::set<std::string> behavioural_targets(vlog::Tokens const& body) {
  std::set<std::string> out;
  static std::set<std::string> const starters = {"begin", ";", "else", ")", ":", "end"};
  for (std::size_t i = 0; i < body.size(); ++i) {
    auto const& t = body[i];
    if (t.kind != vlog::Token::ident || vlog::is_keyword(t.text)) {
      continue;
    }
    if (i > 0 && !starters.count(body[i - 1].text)) {
      continue;
    }
    std::size_t j = i + 1;
    int depth = 0;
    while (j < body.size() && (body[j].is("[") || depth > 0)) {
      depth += body[j].is("[") ? 1 : body[j].is("]") ? -1 : 0;
      ++j;
    }
    if (j < body.size() && (body[j].is("=") || body[j].is("<="))) {
      out.insert(t.text);
    }
  }
  return out;
}

} // namespace lint_detail

/// Structural checks over a set of Verilog files (name -> text): module
/// balance, declaration before use, one driver per net, complete and known
/// instance bindings, and nets that are read but never driven.
inline std::vector<LintDiagnostic> lint_netlist(std::map<std::string, std::string> const& files) {
  std::vector<LintDiagnostic> out;
  std::map<std::string, vlog::SourceV> parsed;
  auto signatures = lint_detail::primitives();
  std::set<std::string> defined;

  for (auto const& [file, text] : files) {
    vlog::SourceV src;
    try {
      src = vlog::parse_verilog(text);
    } catch (parse_error const& e) {
      out.push_back({file, e.line(), e.what()});
      continue;
    }
    for (auto const& e : src.errors) {
      out.push_back({file, e.line, e.message});
    }
    for (auto const& m : src.modules) {
      if (!defined.insert(m.name).second) {
        out.push_back({file, m.line, "module " + m.name + " is defined twice"});
        continue;
      }
      lint_detail::Signature sig;
      for (auto const& p : m.ports) {
        sig.ports[p.name] = p.direction;
      }
      for (auto const& p : m.parameters) {
        sig.parameters.insert(p.name);
      }
      for (auto const& item : m.items) {
        if (auto const* d = std::get_if<vlog::DeclV>(&item); d && d->kind == "parameter") {
          sig.parameters.insert(d->name);
        }
      }
      signatures[m.name] = std::move(sig);
    }
    parsed.emplace(file, std::move(src));
  }

  for (auto const& [file, src] : parsed) {
    for (auto const& m : src.modules) {
      std::set<std::string> declared;
      std::map<std::string, std::size_t> decl_line;
      std::set<std::string> nets;  // things that need exactly one driver
      std::map<std::string, int> drivers;
      std::map<std::string, std::size_t> read_at;
      std::set<std::string> reported_undeclared;
      std::set<std::string> opaque;

      auto declare = [&](std::string const& n, std::size_t line) {
        if (!declared.insert(n).second) {
          out.push_back({file, line, "'" + n + "' is declared twice in module " + m.name});
        }
        decl_line[n] = line;
      };
      auto use = [&](std::string const& n, std::size_t line) {
        if (!declared.count(n)) {
          if (reported_undeclared.insert(n).second) {
            out.push_back({file, line, "'" + n + "' is used before it is declared in module " + m.name});
          }
          return false;
        }
        read_at.emplace(n, line);
        return true;
      };
      auto use_all = [&](vlog::Tokens const& expr, std::size_t line) {
        for (auto const& n : vlog::identifiers(expr)) {
          use(n, line);
        }
      };
      auto drive = [&](std::string const& n, std::size_t line) {
        if (!declared.count(n)) {
          if (reported_undeclared.insert(n).second) {
            out.push_back({file, line, "'" + n + "' is driven before it is declared in module " + m.name});
          }
          return;
        }
        ++drivers[n];
      };

      for (auto const& p : m.parameters) {
        use_all(p.expr, p.line);
        declare(p.name, p.line);
      }
      for (auto const& p : m.ports) {
        declare(p.name, p.line);
        nets.insert(p.name);
        if (p.direction == Direction::in) {
          ++drivers[p.name];
        }
      }

      for (auto const& item : m.items) {
        if (auto const* d = std::get_if<vlog::DeclV>(&item)) {
          use_all(d->expr, d->line);
          declare(d->name, d->line);
          if (d->kind == "wire" || d->kind == "reg") {
            nets.insert(d->name);
            if (d->has_initializer) {
              ++drivers[d->name];
            }
          }
        } else if (auto const* a = std::get_if<vlog::AssignV>(&item)) {
          for (auto const& n : vlog::target_names(a->lhs)) {
            drive(n, a->line);
          }
          // index expressions on the left are reads
          int bracket = 0;
          for (auto const& t : a->lhs) {
            bracket += t.is("[") ? 1 : t.is("]") ? -1 : 0;
            if (bracket > 0 && t.kind == vlog::Token::ident && !vlog::is_keyword(t.text)) {
              use(t.text, a->line);
            }
          }
          use_all(a->rhs, a->line);
        } else if (auto const* al = std::get_if<vlog::AlwaysV>(&item)) {
          auto targets = lint_detail::behavioural_targets(al->body);
          for (auto const& n : targets) {
            drive(n, al->line);
          }
          for (auto const& n : vlog::identifiers(al->body)) {
            if (!targets.count(n)) {
              use(n, al->line);
            } else if (!declared.count(n)) {
              // already reported by drive()
            } else {
              read_at.emplace(n, al->line);
            }
          }
        } else if (auto const* inst = std::get_if<vlog::InstanceV>(&item)) {
          auto sig = signatures.find(inst->module);
          if (sig == signatures.end()) {
            out.push_back({file, inst->line, "instance " + inst->name + " of unknown module " + inst->module});
          }
          if (inst->positional) {
            out.push_back({file, inst->line, "instance " + inst->name + " uses positional connections"});
          }
          if (declared.count(inst->name)) {
            out.push_back({file, inst->line, "instance name " + inst->name + " clashes with a declared name"});
          }
          for (auto const& pb : inst->parameters) {
            use_all(pb.actual, inst->line);
            if (sig != signatures.end() && !sig->second.parameters.count(pb.formal)) {
              out.push_back({file, inst->line,
                             "instance " + inst->name + " sets unknown parameter " + pb.formal + " of " + inst->module});
            }
          }
          std::set<std::string> seen;
          for (auto const& b : inst->bindings) {
            if (!seen.insert(b.formal).second) {
              out.push_back({file, inst->line, "instance " + inst->name + " binds port " + b.formal + " twice"});
            }
            if (b.actual.empty()) {
              out.push_back({file, inst->line, "port " + b.formal + " of instance " + inst->name + " is unbound"});
              continue;
            }
            if (sig == signatures.end()) {
              // direction unknown: the net may be read or driven here
              for (auto const& n : vlog::identifiers(b.actual)) {
                if (use(n, inst->line)) {
                  opaque.insert(n);
                }
              }
              continue;
            }
            auto port = sig->second.ports.find(b.formal);
            if (port == sig->second.ports.end()) {
              out.push_back({file, inst->line, "instance " + inst->name + " binds unknown port " + b.formal + " of " +
                                                   inst->module});
              use_all(b.actual, inst->line);
            } else if (port->second == Direction::out) {
              for (auto const& n : vlog::target_names(b.actual)) {
                drive(n, inst->line);
              }
            } else {
              use_all(b.actual, inst->line);
            }
          }
          if (sig != signatures.end()) {
            for (auto const& [formal, dir] : sig->second.ports) {
              if (!seen.count(formal)) {
                out.push_back({file, inst->line, "port " + formal + " of instance " + inst->name + " is unbound"});
              }
            }
          }
        }
      }

      for (auto const& n : nets) {
        int d = drivers.count(n) ? drivers.at(n) : 0;
        if (d == 0 && opaque.count(n)) {
          continue;
        }
        auto const* port = m.find_port(n);
        if (d > 1) {
          out.push_back({file, decl_line[n], "'" + n + "' has " + std::to_string(d) + " drivers in module " + m.name});
        } else if (d == 0 && port && port->direction == Direction::out && !m.black_box) {
          out.push_back({file, decl_line[n], "output '" + n + "' of module " + m.name + " is never driven"});
        } else if (d == 0 && !port && read_at.count(n)) {
          out.push_back({file, read_at[n], "'" + n + "' is read but never driven in module " + m.name});
        }
      }
    }
  }
  return out;
}

} // namespace mdc
