#include "meu/formats.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "meu/errors.hpp"

namespace meu {

namespace {

struct Token {
  std::string text;
  std::size_t line;
  std::size_t column;  // 1-based token index within the line
};

std::vector<Token> tokenize(std::string_view text, bool comments) {
  std::vector<Token> out;
  std::size_t line = 1, column = 0, i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '\n') {
      ++line;
      column = 0;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (comments && c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) &&
             !(comments && text[j] == '#'))
        ++j;
      out.push_back({std::string(text.substr(i, j - i)), line, ++column});
      i = j;
    }
  }
  return out;
}

class TokenStream {
 public:
  explicit TokenStream(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  bool done() const { return pos_ >= tokens_.size(); }

  const Token& peek(const char* what) const {
    if (done()) fail_at_end(what);
    return tokens_[pos_];
  }

  const Token& next(const char* what) {
    const Token& t = peek(what);
    ++pos_;
    return t;
  }

  long long integer(const char* what) {
    const Token& t = next(what);
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(t.text.c_str(), &end, 10);
    if (errno != 0 || end == t.text.c_str() || *end != '\0')
      throw ParseError("expected integer " + std::string(what) + ", got '" + t.text + "'",
                       t.line, t.column);
    return v;
  }

  long long count(const char* what) {
    const Token& t = peek(what);
    long long v = integer(what);
    if (v < 0)
      throw ParseError(std::string(what) + " must be nonnegative", t.line, t.column);
    return v;
  }

  double real(const char* what) {
    const Token& t = next(what);
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(t.text.c_str(), &end);
    if (end == t.text.c_str() || *end != '\0' || std::isnan(v) || std::isinf(v))
      throw ParseError("expected real " + std::string(what) + ", got '" + t.text + "'",
                       t.line, t.column);
    return v;
  }

  void keyword(const std::string& word) {
    const Token& t = next(word.c_str());
    if (t.text != word)
      throw ParseError("expected '" + word + "', got '" + t.text + "'", t.line, t.column);
  }

  [[noreturn]] void fail(const std::string& msg) const {
    if (done()) fail_at_end(msg.c_str());
    throw ParseError(msg, tokens_[pos_].line, tokens_[pos_].column);
  }

  [[noreturn]] void fail_at(const Token& t, const std::string& msg) const {
    throw ParseError(msg, t.line, t.column);
  }

 private:
  [[noreturn]] void fail_at_end(const char* what) const {
    std::size_t line = tokens_.empty() ? 1 : tokens_.back().line;
    std::size_t col = tokens_.empty() ? 0 : tokens_.back().column + 1;
    throw ParseError(std::string("unexpected end of input, expected ") + what, line, col);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

std::size_t product_of(const std::vector<int>& cards, const std::vector<int>& scope) {
  std::size_t n = 1;
  for (int v : scope) n *= static_cast<std::size_t>(cards[static_cast<std::size_t>(v)]);
  return n;
}

void append_reals(std::string& out, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_real(v[i]);
  }
}

std::vector<int> read_var_list(TokenStream& ts, std::size_t n, std::size_t nvars,
                               const char* what) {
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Token& t = ts.peek(what);
    long long v = ts.integer(what);
    if (v < 0 || static_cast<std::size_t>(v) >= nvars)
      ts.fail_at(t, "variable index " + std::to_string(v) + " out of range");
    if (std::find(out.begin(), out.end(), static_cast<int>(v)) != out.end())
      ts.fail_at(t, "variable " + std::to_string(v) + " repeated");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

}  // namespace

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// UAI

UaiNetwork parse_uai(std::string_view text) {
  TokenStream ts(tokenize(text, false));
  ts.keyword("BAYES");
  UaiNetwork net;
  const long long n = ts.count("variable count");
  for (long long i = 0; i < n; ++i) {
    const Token& t = ts.peek("cardinality");
    long long c = ts.integer("cardinality");
    if (c < 1) ts.fail_at(t, "cardinality must be positive");
    net.cards.push_back(static_cast<int>(c));
  }
  const long long m = ts.count("factor count");
  for (long long f = 0; f < m; ++f) {
    const Token& t = ts.peek("scope size");
    long long k = ts.count("scope size");
    if (k < 1) ts.fail_at(t, "factor " + std::to_string(f) + " has an empty scope");
    net.scopes.push_back(read_var_list(ts, static_cast<std::size_t>(k), net.cards.size(),
                                       "scope variable"));
  }
  for (long long f = 0; f < m; ++f) {
    const Token& t = ts.peek("table size");
    long long size = ts.count("table size");
    std::size_t expect = product_of(net.cards, net.scopes[static_cast<std::size_t>(f)]);
    if (static_cast<std::size_t>(size) != expect)
      ts.fail_at(t, "factor " + std::to_string(f) + " declares " + std::to_string(size) +
                        " entries but its scope has " + std::to_string(expect));
    std::vector<double> table;
    for (long long i = 0; i < size; ++i) {
      const Token& v = ts.peek("table entry");
      double x = ts.real("table entry");
      if (x < 0.0) ts.fail_at(v, "negative table entry in factor " + std::to_string(f));
      table.push_back(x);
    }
    net.tables.push_back(std::move(table));
  }
  if (!ts.done()) ts.fail("trailing tokens after the last table");
  return net;
}

std::string write_uai(const UaiNetwork& net) {
  std::string out = "BAYES\n" + std::to_string(net.cards.size()) + "\n";
  for (std::size_t i = 0; i < net.cards.size(); ++i)
    out += (i ? " " : "") + std::to_string(net.cards[i]);
  out += "\n" + std::to_string(net.scopes.size()) + "\n";
  for (const auto& s : net.scopes) {
    out += std::to_string(s.size());
    for (int v : s) out += " " + std::to_string(v);
    out += "\n";
  }
  for (const auto& t : net.tables) {
    out += "\n" + std::to_string(t.size()) + "\n";
    append_reals(out, t);
    out += "\n";
  }
  return out;
}

InfluenceDiagram bn_to_id(const UaiNetwork& bn, double decision_fraction,
                          std::uint64_t seed, UtilityMode mode) {
  const std::size_t n = bn.cards.size();
  if (bn.scopes.size() != n)
    throw InvalidModelError("not a Bayes net: " + std::to_string(bn.scopes.size()) +
                            " factors for " + std::to_string(n) + " variables");
  if (!(decision_fraction >= 0.0 && decision_fraction < 1.0))
    throw InvalidModelError("decision fraction must lie in [0, 1)");
  std::vector<int> cpt_of(n, -1);
  std::vector<bool> has_child(n, false);
  for (std::size_t f = 0; f < n; ++f) {
    int child = bn.scopes[f].back();
    if (cpt_of[static_cast<std::size_t>(child)] >= 0)
      throw InvalidModelError("not a Bayes net: variable " + std::to_string(child) +
                              " has two CPTs");
    cpt_of[static_cast<std::size_t>(child)] = static_cast<int>(f);
    for (std::size_t i = 0; i + 1 < bn.scopes[f].size(); ++i)
      has_child[static_cast<std::size_t>(bn.scopes[f][i])] = true;
  }

  std::mt19937_64 rng(seed);
  std::vector<int> leaves, inner;
  for (std::size_t v = 0; v < n; ++v)
    (has_child[v] ? inner : leaves).push_back(static_cast<int>(v));

  std::vector<int> clamp(n, -1);
  for (int leaf : leaves) {
    std::uniform_int_distribution<int> pick(0, bn.cards[static_cast<std::size_t>(leaf)] - 1);
    clamp[static_cast<std::size_t>(leaf)] = pick(rng);
  }
  std::vector<int> shuffled = inner;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto n_dec = static_cast<std::size_t>(
      std::llround(decision_fraction * static_cast<double>(inner.size())));
  std::set<int> decisions(shuffled.begin(), shuffled.begin() + static_cast<long>(n_dec));

  std::vector<int> renum(n, -1);
  for (std::size_t i = 0; i < inner.size(); ++i)
    renum[static_cast<std::size_t>(inner[i])] = static_cast<int>(i);

  std::vector<Variable> vars;
  std::vector<Table> cpts;
  for (int v : inner) {
    const auto& scope = bn.scopes[static_cast<std::size_t>(cpt_of[static_cast<std::size_t>(v)])];
    const auto& table = bn.tables[static_cast<std::size_t>(cpt_of[static_cast<std::size_t>(v)])];
    Variable var{renum[static_cast<std::size_t>(v)], bn.cards[static_cast<std::size_t>(v)],
                 decisions.count(v) ? VarKind::decision : VarKind::chance, {}};
    for (std::size_t i = 0; i + 1 < scope.size(); ++i)
      var.parents.push_back(renum[static_cast<std::size_t>(scope[i])]);
    Table t;
    if (var.kind == VarKind::chance) {
      t.scope = var.parents;
      t.scope.push_back(var.id);
      t.values = table;
      // UAI files carry rounded decimals; renormalize each row
      const std::size_t k = static_cast<std::size_t>(var.cardinality);
      for (std::size_t r = 0; r < t.values.size() / k; ++r) {
        double sum = 0.0;
        for (std::size_t x = 0; x < k; ++x) sum += t.values[r * k + x];
        for (std::size_t x = 0; x < k; ++x)
          t.values[r * k + x] = sum > 0.0 ? t.values[r * k + x] / sum : 1.0 / static_cast<double>(k);
      }
    }
    vars.push_back(var);
    cpts.push_back(std::move(t));
  }

  std::vector<Table> utilities;
  for (int leaf : leaves) {
    const auto& scope = bn.scopes[static_cast<std::size_t>(cpt_of[static_cast<std::size_t>(leaf)])];
    const auto& table = bn.tables[static_cast<std::size_t>(cpt_of[static_cast<std::size_t>(leaf)])];
    const std::size_t k = static_cast<std::size_t>(bn.cards[static_cast<std::size_t>(leaf)]);
    Table u;
    for (std::size_t i = 0; i + 1 < scope.size(); ++i)
      u.scope.push_back(renum[static_cast<std::size_t>(scope[i])]);
    for (std::size_t r = 0; r < table.size() / k; ++r)
      u.values.push_back(table[r * k + static_cast<std::size_t>(clamp[static_cast<std::size_t>(leaf)])]);
    utilities.push_back(std::move(u));
  }
  return InfluenceDiagram(std::move(vars), std::move(cpts), std::move(utilities), mode);
}

// ---------------------------------------------------------------------------
// ID text format

InfluenceDiagram parse_id(std::string_view text) {
  TokenStream ts(tokenize(text, true));
  ts.keyword("MODE");
  UtilityMode mode;
  {
    const Token& t = ts.next("utility mode");
    if (t.text == "ADD")
      mode = UtilityMode::additive;
    else if (t.text == "MUL")
      mode = UtilityMode::multiplicative;
    else
      ts.fail_at(t, "utility mode must be ADD or MUL, got '" + t.text + "'");
  }
  ts.keyword("VARS");
  const auto n = static_cast<std::size_t>(ts.count("variable count"));
  std::vector<Variable> vars(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Token& t = ts.peek("cardinality");
    long long c = ts.integer("cardinality");
    if (c < 1) ts.fail_at(t, "cardinality must be positive");
    vars[i] = Variable{static_cast<int>(i), static_cast<int>(c), VarKind::chance, {}};
  }
  std::vector<int> cards;
  for (const auto& v : vars) cards.push_back(v.cardinality);

  ts.keyword("DECISIONS");
  const auto nd = static_cast<std::size_t>(ts.count("decision count"));
  for (std::size_t i = 0; i < nd; ++i) {
    const Token& t = ts.peek("decision id");
    auto ids = read_var_list(ts, 1, n, "decision id");
    auto& v = vars[static_cast<std::size_t>(ids[0])];
    if (v.kind == VarKind::decision) ts.fail_at(t, "decision listed twice");
    v.kind = VarKind::decision;
    v.parents = read_var_list(ts, static_cast<std::size_t>(ts.count("parent count")), n,
                              "parent id");
  }

  ts.keyword("CPTS");
  const auto nc = static_cast<std::size_t>(ts.count("CPT count"));
  std::vector<Table> cpts(n);
  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < nc; ++i) {
    const Token& t = ts.peek("CPT variable");
    const int id = read_var_list(ts, 1, n, "CPT variable")[0];
    auto& v = vars[static_cast<std::size_t>(id)];
    if (v.kind == VarKind::decision)
      ts.fail_at(t, "decision variable " + std::to_string(id) + " cannot carry a CPT");
    if (seen[static_cast<std::size_t>(id)]) ts.fail_at(t, "second CPT for variable " + std::to_string(id));
    seen[static_cast<std::size_t>(id)] = true;
    v.parents = read_var_list(ts, static_cast<std::size_t>(ts.count("parent count")), n,
                              "parent id");
    Table tb{v.parents, {}};
    tb.scope.push_back(id);
    const Token& st = ts.peek("table size");
    const auto size = static_cast<std::size_t>(ts.count("table size"));
    if (size != product_of(cards, tb.scope))
      ts.fail_at(st, "CPT of variable " + std::to_string(id) + " has the wrong size");
    for (std::size_t k = 0; k < size; ++k) tb.values.push_back(ts.real("CPT entry"));
    cpts[static_cast<std::size_t>(id)] = std::move(tb);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (vars[i].kind == VarKind::chance && !seen[i])
      ts.fail("chance variable " + std::to_string(i) + " has no CPT");

  ts.keyword("UTILS");
  const auto nu = static_cast<std::size_t>(ts.count("utility count"));
  std::vector<Table> utils;
  for (std::size_t i = 0; i < nu; ++i) {
    Table tb;
    tb.scope = read_var_list(ts, static_cast<std::size_t>(ts.count("utility scope size")), n,
                             "utility variable");
    const Token& st = ts.peek("table size");
    const auto size = static_cast<std::size_t>(ts.count("table size"));
    if (size != product_of(cards, tb.scope))
      ts.fail_at(st, "utility " + std::to_string(i) + " has the wrong size");
    for (std::size_t k = 0; k < size; ++k) tb.values.push_back(ts.real("utility entry"));
    utils.push_back(std::move(tb));
  }
  if (!ts.done()) ts.fail("trailing tokens after the utilities");
  return InfluenceDiagram(std::move(vars), std::move(cpts), std::move(utils), mode);
}

std::string write_id(const InfluenceDiagram& id) {
  std::string out = "# influence diagram\nMODE ";
  out += id.mode() == UtilityMode::additive ? "ADD" : "MUL";
  out += "\nVARS " + std::to_string(id.num_vars()) + "\n";
  for (std::size_t i = 0; i < id.num_vars(); ++i)
    out += (i ? " " : "") + std::to_string(id.card(static_cast<int>(i)));
  out += "\n";
  auto decisions = id.decisions();
  out += "DECISIONS " + std::to_string(decisions.size()) + "\n";
  for (int d : decisions) {
    out += std::to_string(d) + " " + std::to_string(id.parents(d).size());
    for (int p : id.parents(d)) out += " " + std::to_string(p);
    out += "\n";
  }
  auto chance = id.chance_nodes();
  out += "CPTS " + std::to_string(chance.size()) + "\n";
  for (int c : chance) {
    out += std::to_string(c) + " " + std::to_string(id.parents(c).size());
    for (int p : id.parents(c)) out += " " + std::to_string(p);
    out += " " + std::to_string(id.cpt(c).values.size()) + " ";
    append_reals(out, id.cpt(c).values);
    out += "\n";
  }
  out += "UTILS " + std::to_string(id.utilities().size()) + "\n";
  for (const auto& u : id.utilities()) {
    out += std::to_string(u.scope.size());
    for (int v : u.scope) out += " " + std::to_string(v);
    out += " " + std::to_string(u.values.size()) + " ";
    append_reals(out, u.values);
    out += "\n";
  }
  return out;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

InfluenceDiagram read_id_file(const std::string& path) { return parse_id(slurp(path)); }
UaiNetwork read_uai_file(const std::string& path) { return parse_uai(slurp(path)); }

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Traces

void write_trace(const std::vector<TraceRow>& rows, std::ostream& out) {
  if (rows.empty()) throw Error("refusing to write an empty trace");
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    out << r.algorithm << ',' << r.junction << ',' << r.seed << ',' << r.iter << ','
        << format_real(r.temp_or_w) << ',' << format_real(r.rounded_eu) << ','
        << format_real(r.soft_eu) << ',' << format_real(r.residual) << ','
        << format_real(r.ms) << '\n';
  }
}

void write_trace(const std::vector<TraceRow>& rows, const std::string& path) {
  if (rows.empty()) throw Error("refusing to write an empty trace");
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_trace(rows, out);
  if (!out) throw Error("failed writing " + path);
}

}  // namespace meu
