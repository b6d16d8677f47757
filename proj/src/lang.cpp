#include "coldl/lang.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

namespace coldl {

bool Atom::is_ground() const {
  return std::all_of(terms.begin(), terms.end(), [](const Term& t) { return t.is_constant(); });
}

// ---------------------------------------------------------------------------
// Program

PredId Program::intern_predicate(std::string_view name, std::size_t arity) {
  if (auto id = find_predicate(name)) {
    const auto& p = preds_[*id];
    if (p.arity != arity) {
      throw ArityError("predicate '" + p.name + "' used with arity " + std::to_string(arity) +
                       " but first declared with arity " + std::to_string(p.arity));
    }
    return *id;
  }
  preds_.push_back(Predicate{std::string(name), arity, PredicateClass::edb});
  return static_cast<PredId>(preds_.size() - 1);
}

std::optional<PredId> Program::find_predicate(std::string_view name) const {
  for (std::size_t i = 0; i < preds_.size(); ++i)
    if (preds_[i].name == name) return static_cast<PredId>(i);
  return std::nullopt;
}

void Program::add_rule(Rule rule) {
  auto check_arity = [&](const Atom& a) {
    const auto& p = preds_.at(a.pred);
    if (a.terms.size() != p.arity)
      throw ArityError("predicate '" + p.name + "' expects " + std::to_string(p.arity) + " arguments, got " +
                       std::to_string(a.terms.size()));
  };
  check_arity(rule.head);
  std::set<std::string> body_vars;
  for (const auto& b : rule.body) {
    check_arity(b);
    for (const auto& t : b.terms)
      if (t.is_variable()) body_vars.insert(t.name());
  }
  for (const auto& t : rule.head.terms) {
    if (t.is_variable() && !body_vars.count(t.name()))
      throw SafetyError("unsafe rule for '" + preds_[rule.head.pred].name + "': head variable " + t.name() +
                        " does not occur in the body");
  }
  preds_[rule.head.pred].cls = PredicateClass::idb;
  rules_.push_back(std::move(rule));
}

void Program::canonicalize() {
  for (auto& r : rules_) {
    std::vector<Atom> source;
    source.reserve(r.body.size());
    if (r.source_order.empty()) {
      source = r.body;
    } else {
      for (std::size_t i = 0; i < r.body.size(); ++i) source.push_back(r.body[r.source_order[i]]);
    }
    std::vector<std::size_t> order(source.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_partition(order.begin(), order.end(), [&](std::size_t i) { return !is_idb(source[i].pred); });
    r.body.clear();
    r.source_order.assign(source.size(), 0);
    for (std::size_t c = 0; c < order.size(); ++c) {
      r.body.push_back(source[order[c]]);
      r.source_order[order[c]] = c;
    }
  }
}

// ---------------------------------------------------------------------------
// Lexer / parser

namespace {

enum class Tok { ident, variable, string, iri, lparen, rparen, comma, dot, implies, end };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line;
  std::size_t column;
};

bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    skip_space();
    const std::size_t line = line_, col = col_;
    if (pos_ >= text_.size()) return {Tok::end, "", line, col};
    const char c = text_[pos_];
    switch (c) {
      case '(': advance(); return {Tok::lparen, "(", line, col};
      case ')': advance(); return {Tok::rparen, ")", line, col};
      case ',': advance(); return {Tok::comma, ",", line, col};
      case '.': advance(); return {Tok::dot, ".", line, col};
      default: break;
    }
    if (c == ':' && peek(1) == '-') {
      advance();
      advance();
      return {Tok::implies, ":-", line, col};
    }
    if (c == '"') return lex_string(line, col);
    if (c == '<') {
      std::string s;
      while (pos_ < text_.size() && text_[pos_] != '>') {
        if (text_[pos_] == '\n') throw ParseError("unterminated IRI", line, col);
        s += text_[pos_];
        advance();
      }
      if (pos_ >= text_.size()) throw ParseError("unterminated IRI", line, col);
      s += '>';
      advance();
      return {Tok::iri, s, line, col};
    }
    if (c == '?') {
      advance();
      std::string s = "?" + lex_word();
      if (s.size() == 1) throw ParseError("expected variable name after '?'", line, col);
      return {Tok::variable, s, line, col};
    }
    if (is_ident_char(static_cast<unsigned char>(c))) {
      std::string s = lex_word();
      const auto first = static_cast<unsigned char>(s[0]);
      const bool var = std::isupper(first) || first == '_';
      return {var ? Tok::variable : Tok::ident, s, line, col};
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line, col);
  }

 private:
  char peek(std::size_t off) const { return pos_ + off < text_.size() ? text_[pos_ + off] : '\0'; }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string lex_word() {
    std::string s;
    while (pos_ < text_.size()) {
      const auto c = static_cast<unsigned char>(text_[pos_]);
      // ':' belongs to names like owl:inverseOf, but not to the ':-' arrow.
      if (is_ident_char(c) || (c == ':' && peek(1) != '-' && is_ident_char(static_cast<unsigned char>(peek(1))))) {
        s += static_cast<char>(c);
        advance();
      } else {
        break;
      }
    }
    return s;
  }

  Token lex_string(std::size_t line, std::size_t col) {
    advance();
    std::string s;
    while (true) {
      if (pos_ >= text_.size()) throw ParseError("unterminated string", line, col);
      const char c = text_[pos_];
      if (c == '"') {
        advance();
        break;
      }
      if (c == '\\') {
        advance();
        if (pos_ >= text_.size()) throw ParseError("unterminated string", line, col);
        const char e = text_[pos_];
        s += e == 'n' ? '\n' : e == 't' ? '\t' : e;
      } else {
        s += c;
      }
      advance();
    }
    return {Tok::string, s, line, col};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Parser {
 public:
  Parser(std::string_view text, Program& program, Dictionary& dict) : lex_(text), prog_(program), dict_(dict) {
    tok_ = lex_.next();
  }

  void parse_program() {
    while (tok_.kind != Tok::end) parse_statement();
    for (const auto& f : prog_.facts) {
      if (prog_.is_idb(f.pred))
        throw InputError("fact for IDB predicate '" + prog_.predicate(f.pred).name +
                         "' is not allowed; IDB predicates must not appear in the database");
    }
    prog_.canonicalize();
  }

  Atom parse_single_atom() {
    Atom a = parse_atom();
    if (tok_.kind == Tok::dot) shift();
    expect(Tok::end, "end of input");
    return a;
  }

 private:
  void shift() { tok_ = lex_.next(); }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, tok_.line, tok_.column); }

  void expect(Tok kind, const char* what) {
    if (tok_.kind != kind) fail(std::string("expected ") + what + (tok_.text.empty() ? "" : ", got '" + tok_.text + "'"));
    shift();
  }

  void parse_statement() {
    anon_ = 0;
    Rule rule;
    rule.head = parse_atom();
    if (tok_.kind == Tok::dot) {
      shift();
      if (!rule.head.is_ground()) {
        throw SafetyError("unsafe rule for '" + prog_.predicate(rule.head.pred).name +
                          "': a statement without body must be a ground fact");
      }
      prog_.facts.push_back(std::move(rule.head));
      return;
    }
    expect(Tok::implies, "':-' or '.'");
    rule.body.push_back(parse_atom());
    while (tok_.kind == Tok::comma) {
      shift();
      rule.body.push_back(parse_atom());
    }
    expect(Tok::dot, "',' or '.'");
    prog_.add_rule(std::move(rule));
  }

  Atom parse_atom() {
    if (tok_.kind != Tok::ident && tok_.kind != Tok::variable) fail("expected predicate name");
    if (tok_.text[0] == '?' || tok_.text[0] == '_') fail("invalid predicate name '" + tok_.text + "'");
    const std::string name = tok_.text;
    shift();
    std::vector<Term> terms;
    if (tok_.kind == Tok::lparen) {
      shift();
      if (tok_.kind != Tok::rparen) {
        terms.push_back(parse_term());
        while (tok_.kind == Tok::comma) {
          shift();
          terms.push_back(parse_term());
        }
      }
      expect(Tok::rparen, "',' or ')'");
    }
    Atom a;
    a.pred = prog_.intern_predicate(name, terms.size());
    a.terms = std::move(terms);
    return a;
  }

  Term parse_term() {
    Token t = tok_;
    switch (t.kind) {
      case Tok::variable:
        shift();
        if (t.text == "_") return Term::variable("_" + std::to_string(++anon_));
        return Term::variable(t.text);
      case Tok::ident:
      case Tok::string:
      case Tok::iri:
        shift();
        return Term::constant(dict_.intern(t.text));
      default:
        fail("expected a term");
    }
  }

  Lexer lex_;
  Token tok_;
  Program& prog_;
  Dictionary& dict_;
  int anon_ = 0;
};

bool is_bare_constant(const std::string& s) {
  if (s.empty()) return false;
  const auto first = static_cast<unsigned char>(s[0]);
  if (!(std::islower(first) || std::isdigit(first) || first >= 0x80)) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (is_ident_char(c)) continue;
    if (c == ':' && i + 1 < s.size() && s[i + 1] != '-' && is_ident_char(static_cast<unsigned char>(s[i + 1])))
      continue;
    return false;
  }
  return true;
}

bool is_iri(const std::string& s) {
  return s.size() >= 2 && s.front() == '<' && s.back() == '>' && s.find('>') == s.size() - 1 &&
         s.find('\n') == std::string::npos;
}

}  // namespace

Program parse_program(std::string_view text, Dictionary& dict) {
  Program p;
  Parser(text, p, dict).parse_program();
  return p;
}

Atom parse_atom(std::string_view text, Program& program, Dictionary& dict) {
  return Parser(text, program, dict).parse_single_atom();
}

// ---------------------------------------------------------------------------
// Printing

std::string to_string(const Term& t, const Dictionary& dict) {
  if (t.is_variable()) return t.name();
  const std::string& s = dict.lookup(t.id());
  if (is_bare_constant(s) || is_iri(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

std::string to_string(const Atom& a, const Program& p, const Dictionary& dict) {
  std::string out = p.predicate(a.pred).name;
  if (a.terms.empty()) return out;
  out += '(';
  for (std::size_t i = 0; i < a.terms.size(); ++i) {
    if (i) out += ',';
    out += to_string(a.terms[i], dict);
  }
  return out + ')';
}

std::string to_string(const Rule& r, const Program& p, const Dictionary& dict) {
  std::string out = to_string(r.head, p, dict) + " :- ";
  for (std::size_t i = 0; i < r.body.size(); ++i) {
    if (i) out += ", ";
    const std::size_t idx = r.source_order.empty() ? i : r.source_order[i];
    out += to_string(r.body[idx], p, dict);
  }
  return out + " .";
}

std::string to_string(const Program& p, const Dictionary& dict) {
  std::string out;
  for (const auto& r : p.rules()) out += to_string(r, p, dict) + "\n";
  for (const auto& f : p.facts) out += to_string(f, p, dict) + " .\n";
  return out;
}

// ---------------------------------------------------------------------------
// Substitutions, unification, resolution

std::set<std::string> variables(const Atom& a) {
  std::set<std::string> out;
  for (const auto& t : a.terms)
    if (t.is_variable()) out.insert(t.name());
  return out;
}

std::set<std::string> variables(const Rule& r) {
  auto out = variables(r.head);
  for (const auto& b : r.body) out.merge(variables(b));
  return out;
}

namespace {

Term walk(Term t, const Substitution& s) {
  while (t.is_variable()) {
    auto it = s.find(t.name());
    if (it == s.end()) break;
    t = it->second;
  }
  return t;
}

}  // namespace

std::optional<Substitution> unify(const Atom& a, const Atom& b) {
  if (a.pred != b.pred || a.terms.size() != b.terms.size()) return std::nullopt;
  Substitution s;
  for (std::size_t i = 0; i < a.terms.size(); ++i) {
    const Term x = walk(a.terms[i], s);
    const Term y = walk(b.terms[i], s);
    if (x == y) continue;
    if (x.is_variable()) {
      s.insert_or_assign(x.name(), y);
    } else if (y.is_variable()) {
      s.insert_or_assign(y.name(), x);
    } else {
      return std::nullopt;
    }
  }
  for (auto& [var, term] : s) term = walk(term, s);
  return s;
}

Term apply_subst(const Term& t, const Substitution& s) {
  if (t.is_variable()) {
    if (auto it = s.find(t.name()); it != s.end()) return it->second;
  }
  return t;
}

Atom apply_subst(const Atom& a, const Substitution& s) {
  Atom out{a.pred, {}};
  out.terms.reserve(a.terms.size());
  for (const auto& t : a.terms) out.terms.push_back(apply_subst(t, s));
  return out;
}

Rule apply_subst(const Rule& r, const Substitution& s) {
  Rule out;
  out.head = apply_subst(r.head, s);
  out.body.reserve(r.body.size());
  for (const auto& b : r.body) out.body.push_back(apply_subst(b, s));
  out.source_order = r.source_order;
  return out;
}

Rule rename_apart(const Rule& r, const std::set<std::string>& avoid) {
  std::set<std::string> taken = avoid;
  Substitution ren;
  for (const auto& v : variables(r)) {
    std::string cand = v + "'";
    while (taken.count(cand)) cand += "'";
    taken.insert(cand);
    ren.emplace(v, Term::variable(cand));
  }
  return apply_subst(r, ren);
}

std::optional<Rule> resolve(const Rule& r, std::size_t k, const Rule& producer) {
  if (k >= r.body.size()) return std::nullopt;
  const Rule renamed = rename_apart(producer, variables(r));
  auto mgu = unify(renamed.head, r.body[k]);
  if (!mgu) return std::nullopt;
  Rule out;
  out.head = apply_subst(r.head, *mgu);
  for (std::size_t i = 0; i < r.body.size(); ++i) {
    if (i == k) {
      for (const auto& b : renamed.body) out.body.push_back(apply_subst(b, *mgu));
    } else {
      out.body.push_back(apply_subst(r.body[i], *mgu));
    }
  }
  return out;
}

bool is_trivially_redundant(const Rule& r) {
  return std::find(r.body.begin(), r.body.end(), r.head) != r.body.end();
}

namespace {

// Extends theta so that pattern·theta == target; target terms are rigid.
bool match_atom(const Atom& pattern, const Atom& target, Substitution& theta) {
  if (pattern.pred != target.pred || pattern.terms.size() != target.terms.size()) return false;
  for (std::size_t i = 0; i < pattern.terms.size(); ++i) {
    const Term& p = pattern.terms[i];
    const Term& t = target.terms[i];
    if (p.is_constant()) {
      if (!(p == t)) return false;
      continue;
    }
    auto [it, inserted] = theta.try_emplace(p.name(), t);
    if (!inserted && !(it->second == t)) return false;
  }
  return true;
}

bool match_body(const std::vector<Atom>& pattern, std::size_t i, const std::vector<Atom>& target,
                const Substitution& theta) {
  if (i == pattern.size()) return true;
  for (const auto& t : target) {
    Substitution next = theta;
    if (match_atom(pattern[i], t, next) && match_body(pattern, i + 1, target, next)) return true;
  }
  return false;
}

}  // namespace

bool subsumes(const Rule& general, const Rule& specific) {
  Substitution theta;
  if (!match_atom(general.head, specific.head, theta)) return false;
  return match_body(general.body, 0, specific.body, theta);
}

bool atom_subsumes(const Atom& general, const Atom& specific) {
  Substitution theta;
  return match_atom(general, specific, theta);
}

bool is_variant(const Atom& a, const Atom& b) { return atom_subsumes(a, b) && atom_subsumes(b, a); }

}  // namespace coldl
