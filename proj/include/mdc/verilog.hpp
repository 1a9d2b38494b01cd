#pragma once

#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "error.hpp"
#include "network.hpp"

/// Reader for the structural Verilog-2001 subset the back-ends emit: ANSI
/// module headers, net/variable declarations, parameters, continuous assigns,
/// always blocks (kept as token runs) and named-port instances.
namespace mdc::vlog {

inline std::set<std::string, std::less<>> const& keywords() {
  static std::set<std::string, std::less<>> const k = {
      "always", "and", "assign", "begin", "buf", "case", "casex", "casez", "default", "else", "end",
      "endcase", "endfunction", "endgenerate", "endmodule", "endtask", "for", "function", "generate", "genvar",
      "if", "initial", "inout", "input", "integer", "localparam", "module", "nand", "negedge", "nor", "not",
      "or", "output", "parameter", "posedge", "real", "reg", "signed", "task", "time", "tri", "wire", "while",
      "xnor", "xor"};
  return k;
}

inline bool is_keyword(std::string_view s) { return keywords().count(s) != 0; }

inline bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) {
    return false;
  }
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) {
      return false;
    }
  }
  return !is_keyword(s);
}

struct Token {
  enum Kind { ident, number, string, system, op, attribute } kind = op;
  std::string text;
  std::size_t line = 0;

  bool is(std::string_view t) const { return text == t && kind != string; }
};

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t line = 1;
  std::size_t i = 0;
  auto peek = [&](std::size_t k) { return i + k < src.size() ? src[i + k] : '\0'; };
  while (i < src.size()) {
    char c = src[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '/' && peek(1) == '/') {
      while (i < src.size() && src[i] != '\n') {
        ++i;
      }
    } else if (c == '/' && peek(1) == '*') {
      std::size_t start = line;
      i += 2;
      while (i < src.size() && !(src[i] == '*' && peek(1) == '/')) {
        line += src[i] == '\n';
        ++i;
      }
      if (i >= src.size()) {
        throw parse_error("unterminated block comment", start);
      }
      i += 2;
    } else if (c == '(' && peek(1) == '*' && peek(2) != ')') {
      std::size_t start = line;
      std::size_t j = i + 2;
      while (j < src.size() && !(src[j] == '*' && j + 1 < src.size() && src[j + 1] == ')')) {
        line += src[j] == '\n';
        ++j;
      }
      if (j >= src.size()) {
        throw parse_error("unterminated attribute", start);
      }
      out.push_back({Token::attribute, std::string(src.substr(i + 2, j - i - 2)), start});
      i = j + 2;
    } else if (c == '"') {
      std::size_t j = i + 1;
      while (j < src.size() && src[j] != '"') {
        j += src[j] == '\\' ? 2 : 1;
      }
      if (j >= src.size()) {
        throw parse_error("unterminated string literal", line);
      }
      out.push_back({Token::string, std::string(src.substr(i, j + 1 - i)), line});
      i = j + 1;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
      std::size_t j = i + 1;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' || src[j] == '$')) {
        ++j;
      }
      out.push_back({c == '$' ? Token::system : Token::ident, std::string(src.substr(i, j - i)), line});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '\'' && std::isalpha(static_cast<unsigned char>(peek(1))))) {
      // 8, 8'hFF, 'b0, 2'd3
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' || src[j] == '\'')) {
        ++j;
      }
      out.push_back({Token::number, std::string(src.substr(i, j - i)), line});
      i = j;
    } else {
      static char const* const two[] = {"<=", ">=", "==", "!=", "&&", "||", "<<", ">>", "**"};
      std::string t(1, c);
      for (auto const* op : two) {
        if (c == op[0] && peek(1) == op[1]) {
          t = op;
          break;
        }
      }
      if ((t == "==" || t == "!=") && peek(2) == '=') {
        t += '=';
      }
      out.push_back({Token::op, t, line});
      i += t.size();
    }
  }
  return out;
}

using Tokens = std::vector<Token>;

struct PortV {
  std::string name;
  Direction direction = Direction::in;
  bool is_reg = false;
  bool inout = false;
  std::size_t line = 0;
};

struct DeclV {
  std::string name;
  /// wire, reg, integer, genvar, parameter, localparam
  std::string kind;
  bool has_initializer = false;
  Tokens expr;
  std::size_t line = 0;
};

struct AssignV {
  Tokens lhs;
  Tokens rhs;
  std::size_t line = 0;
};

struct AlwaysV {
  Tokens body;
  std::size_t line = 0;
};

struct BindingV {
  std::string formal;
  Tokens actual;
};

struct InstanceV {
  std::string module;
  std::string name;
  std::vector<BindingV> parameters;
  std::vector<BindingV> bindings;
  bool positional = false;
  std::size_t line = 0;
};

using ItemV = std::variant<DeclV, AssignV, AlwaysV, InstanceV>;

struct ModuleV {
  std::string name;
  std::size_t line = 0;
  std::vector<DeclV> parameters;
  std::vector<PortV> ports;
  std::vector<ItemV> items;
  bool closed = false;
  /// Interface-only declaration of an externally supplied module.
  bool black_box = false;

  PortV const* find_port(std::string_view n) const {
    for (auto const& p : ports) {
      if (p.name == n) {
        return &p;
      }
    }
    return nullptr;
  }
};

/// Structural problem found while reading, with its line.
struct StructureError {
  std::size_t line = 0;
  std::string message;
};

struct SourceV {
  std::vector<ModuleV> modules;
  std::vector<StructureError> errors;
};

namespace detail {

class Reader {
public:
  explicit Reader(Tokens toks) : t_(std::move(toks)) {}

  SourceV run() {
    SourceV out;
    bool black_box = false;
    while (!done()) {
      if (peek().kind == Token::attribute) {
        black_box = black_box || peek().text.find("black_box") != std::string::npos;
        ++i_;
      } else if (peek().is("module")) {
        out.modules.push_back(module(out.errors));
        out.modules.back().black_box = black_box;
        black_box = false;
      } else if (peek().is("endmodule")) {
        out.errors.push_back({peek().line, "endmodule without a module"});
        ++i_;
      } else {
        out.errors.push_back({peek().line, "unexpected '" + peek().text + "' outside a module"});
        ++i_;
      }
    }
    return out;
  }

private:
  bool done() const { return i_ >= t_.size(); }
  Token const& peek(std::size_t k = 0) const {
    static Token const eof{Token::op, "", 0};
    return i_ + k < t_.size() ? t_[i_ + k] : eof;
  }
  std::size_t line() const { return done() ? (t_.empty() ? 0 : t_.back().line) : peek().line; }
  Token next() { return done() ? peek() : t_[i_++]; }
  bool accept(std::string_view s) {
    if (peek().is(s)) {
      ++i_;
      return true;
    }
    return false;
  }

  /// Tokens up to (not including) one of `stops` at nesting depth 0.
  Tokens until(std::initializer_list<std::string_view> stops) {
    Tokens out;
    int depth = 0;
    while (!done()) {
      auto const& tk = peek();
      if (depth == 0) {
        for (auto s : stops) {
          if (tk.is(s)) {
            return out;
          }
        }
        if (tk.is("endmodule") || tk.is("module")) {
          return out;
        }
      }
      if (tk.is("(") || tk.is("[") || tk.is("{")) {
        ++depth;
      } else if (tk.is(")") || tk.is("]") || tk.is("}")) {
        if (depth == 0) {
          return out;
        }
        --depth;
      }
      out.push_back(next());
    }
    return out;
  }

  void skip_range() {
    while (peek().is("[")) {
      ++i_;
      until({"]"});
      accept("]");
    }
  }

  void skip_to_semicolon() {
    until({";"});
    accept(";");
  }

  ModuleV module(std::vector<StructureError>& errors) {
    ModuleV m;
    m.line = next().line;
    if (peek().kind != Token::ident) {
      errors.push_back({m.line, "module without a name"});
    } else {
      m.name = next().text;
    }
    if (accept("#")) {
      accept("(");
      while (!done() && !peek().is(")")) {
        accept("parameter");
        if (peek().is("integer")) {
          ++i_;
        }
        skip_range();
        DeclV d;
        d.kind = "parameter";
        d.line = peek().line;
        d.name = next().text;
        if (accept("=")) {
          d.expr = until({",", ")"});
          d.has_initializer = true;
        }
        m.parameters.push_back(std::move(d));
        if (!accept(",")) {
          break;
        }
      }
      accept(")");
    }
    if (accept("(")) {
      Direction dir = Direction::in;
      bool inout = false;
      bool is_reg = false;
      while (!done() && !peek().is(")")) {
        if (peek().is("input") || peek().is("output") || peek().is("inout")) {
          inout = peek().is("inout");
          dir = peek().is("output") ? Direction::out : Direction::in;
          is_reg = false;
          ++i_;
          if (accept("reg")) {
            is_reg = true;
          } else {
            accept("wire");
          }
          accept("signed");
          skip_range();
        }
        if (peek().kind != Token::ident) {
          errors.push_back({line(), "bad port list near '" + peek().text + "'"});
          until({")"});
          break;
        }
        m.ports.push_back({next().text, dir, is_reg, inout, peek().line});
        if (!accept(",")) {
          break;
        }
      }
      if (!accept(")")) {
        errors.push_back({line(), "unterminated port list of module " + m.name});
      }
    }
    if (!accept(";")) {
      errors.push_back({line(), "missing ';' after header of module " + m.name});
    }
    while (!done()) {
      auto const& tk = peek();
      if (tk.is("endmodule")) {
        ++i_;
        m.closed = true;
        return m;
      }
      if (tk.is("module")) {
        errors.push_back({tk.line, "module " + m.name + " is not closed before the next module"});
        return m;
      }
      item(m, errors);
    }
    errors.push_back({line(), "module " + m.name + " is not closed by endmodule"});
    return m;
  }

  void declaration(ModuleV& m, std::string const& kind) {
    accept("signed");
    skip_range();
    while (!done()) {
      if (peek().kind != Token::ident) {
        break;
      }
      DeclV d;
      d.kind = kind;
      d.line = peek().line;
      d.name = next().text;
      skip_range();
      if (accept("=")) {
        d.has_initializer = true;
        d.expr = until({",", ";"});
      }
      m.items.push_back(std::move(d));
      if (!accept(",")) {
        break;
      }
    }
    accept(";");
  }

  /// One behavioural statement, including nested begin/end and a trailing else.
  void statement(Tokens& body) {
    if (peek().is("begin")) {
      int depth = 0;
      while (!done()) {
        auto tk = next();
        body.push_back(tk);
        if (tk.is("begin")) {
          ++depth;
        } else if (tk.is("end") && --depth == 0) {
          break;
        }
      }
    } else {
      while (!done() && !peek().is(";") && !peek().is("endmodule")) {
        body.push_back(next());
      }
      if (accept(";")) {
        body.push_back({Token::op, ";", 0});
      }
    }
    if (peek().is("else")) {
      body.push_back(next());
      statement(body);
    }
  }

  void item(ModuleV& m, std::vector<StructureError>& errors) {
    auto tk = peek();
    if (tk.kind == Token::attribute) {
      ++i_;
    } else if (tk.is("wire") || tk.is("reg") || tk.is("integer") || tk.is("genvar")) {
      ++i_;
      declaration(m, tk.text);
    } else if (tk.is("parameter") || tk.is("localparam")) {
      ++i_;
      if (peek().is("integer")) {
        ++i_;
      }
      declaration(m, tk.text);
    } else if (tk.is("input") || tk.is("output") || tk.is("inout")) {
      errors.push_back({tk.line, "non-ANSI port declaration is outside the supported subset"});
      skip_to_semicolon();
    } else if (tk.is("assign")) {
      ++i_;
      AssignV a;
      a.line = tk.line;
      a.lhs = until({"="});
      if (!accept("=")) {
        errors.push_back({tk.line, "assign without '='"});
      }
      a.rhs = until({";"});
      accept(";");
      m.items.push_back(std::move(a));
    } else if (tk.is("always") || tk.is("initial")) {
      ++i_;
      AlwaysV a;
      a.line = tk.line;
      if (accept("@")) {
        if (accept("(")) {
          a.body.push_back({Token::op, "(", tk.line});
          auto sens = until({")"});
          a.body.insert(a.body.end(), sens.begin(), sens.end());
          accept(")");
          a.body.push_back({Token::op, ")", tk.line});
        } else {
          accept("*");
        }
      }
      statement(a.body);
      m.items.push_back(std::move(a));
    } else if (tk.kind == Token::ident && !is_keyword(tk.text) &&
               (peek(1).is("#") || (peek(1).kind == Token::ident && peek(2).is("(")))) {
      m.items.push_back(instance(errors));
    } else {
      errors.push_back({tk.line, "unexpected '" + tk.text + "' in module " + m.name});
      if (tk.is(";")) {
        ++i_;
      } else {
        skip_to_semicolon();
      }
    }
  }

  std::vector<BindingV> named_list(std::vector<StructureError>& errors, bool& positional) {
    std::vector<BindingV> out;
    accept("(");
    while (!done() && !peek().is(")")) {
      if (accept(".")) {
        BindingV b;
        b.formal = next().text;
        if (accept("(")) {
          b.actual = until({")"});
          accept(")");
        }
        out.push_back(std::move(b));
      } else {
        positional = true;
        until({",", ")"});
      }
      if (!accept(",")) {
        break;
      }
    }
    if (!accept(")")) {
      errors.push_back({line(), "unterminated connection list"});
    }
    return out;
  }

  InstanceV instance(std::vector<StructureError>& errors) {
    InstanceV inst;
    inst.line = peek().line;
    inst.module = next().text;
    bool ignored = false;
    if (accept("#")) {
      inst.parameters = named_list(errors, ignored);
    }
    inst.name = next().text;
    inst.bindings = named_list(errors, inst.positional);
    if (!accept(";")) {
      errors.push_back({line(), "missing ';' after instance " + inst.name});
    }
    return inst;
  }

  Tokens t_;
  std::size_t i_ = 0;
};

} // namespace detail

inline SourceV parse_verilog(std::string_view text) { return detail::Reader(tokenize(text)).run(); }

/// Identifiers referenced by an expression, skipping keywords and system calls.
inline std::vector<std::string> identifiers(Tokens const& expr) {
  std::vector<std::string> out;
  for (auto const& t : expr) {
    if (t.kind == Token::ident && !is_keyword(t.text)) {
      out.push_back(t.text);
    }
  }
  return out;
}

/// Names written by an assignment target: identifiers outside index brackets.
inline std::vector<std::string> target_names(Tokens const& lhs) {
  std::vector<std::string> out;
  int bracket = 0;
  for (auto const& t : lhs) {
    if (t.is("[")) {
      ++bracket;
    } else if (t.is("]")) {
      --bracket;
    } else if (bracket == 0 && t.kind == Token::ident && !is_keyword(t.text)) {
      out.push_back(t.text);
    }
  }
  return out;
}

inline std::string join(Tokens const& ts) {
  std::string s;
  for (auto const& t : ts) {
    s += t.text;
  }
  return s;
}

} // namespace mdc::vlog
