#include "cfps/logic.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace cfps {

std::string to_string(FactId f) { return "[F" + std::to_string(f.index) + "]"; }

std::string_view to_string(TruthValue v) {
  switch (v) {
    case TruthValue::True: return "True";
    case TruthValue::False: return "False";
    case TruthValue::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::string to_string(const Literal& lit) {
  return to_string(lit.fact) + (lit.value ? "=True" : "=False");
}

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

namespace {

enum class Tok { Atom, LParen, RParen, And, Or, Xor, Arrow, Equals, Word, End };

struct Token {
  Tok kind;
  std::size_t pos;  // 0-based
  FactId fact{};
  std::string_view text;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      if (i_ >= text_.size()) {
        out.push_back({Tok::End, text_.size(), {}, {}});
        return out;
      }
      const char c = text_[i_];
      if (c == '(') {
        out.push_back({Tok::LParen, i_++, {}, "("});
      } else if (c == ')') {
        out.push_back({Tok::RParen, i_++, {}, ")"});
      } else if (c == '[') {
        out.push_back(atom());
      } else if (c == '-' && i_ + 1 < text_.size() && text_[i_ + 1] == '>') {
        out.push_back({Tok::Arrow, i_, {}, "->"});
        i_ += 2;
      } else if (c == '=') {
        out.push_back({Tok::Equals, i_++, {}, "="});
      } else if (std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = i_;
        while (i_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[i_]))) ++i_;
        const std::string_view w = text_.substr(start, i_ - start);
        Tok kind = Tok::Word;
        if (w == "and") kind = Tok::And;
        else if (w == "or") kind = Tok::Or;
        else if (w == "xor") kind = Tok::Xor;
        out.push_back({kind, start, {}, w});
      } else {
        throw ParseError("unknown token '" + std::string(1, c) + "'", i_ + 1);
      }
    }
  }

 private:
  void skip_space() {
    while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) ++i_;
  }

  // `[F12]` or the doubled alias `[[F12]]`.
  Token atom() {
    const std::size_t start = i_;
    const bool doubled = i_ + 1 < text_.size() && text_[i_ + 1] == '[';
    std::size_t j = i_ + (doubled ? 2 : 1);
    if (j >= text_.size() || text_[j] != 'F') throw ParseError("malformed fact symbol", start + 1);
    ++j;
    const std::size_t digits = j;
    while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) ++j;
    if (j == digits) throw ParseError("malformed fact symbol", start + 1);
    std::uint32_t index = 0;
    const auto res = std::from_chars(text_.data() + digits, text_.data() + j, index);
    if (res.ec != std::errc{}) throw ParseError("fact index out of range", start + 1);
    for (int k = 0; k < (doubled ? 2 : 1); ++k) {
      if (j >= text_.size() || text_[j] != ']') throw ParseError("unterminated fact symbol", j + 1);
      ++j;
    }
    i_ = j;
    return {Tok::Atom, start, FactId{index}, text_.substr(start, j - start)};
  }

  std::string_view text_;
  std::size_t i_ = 0;
};

// Recursive descent over [begin, end) of the token vector. Precedence,
// tightest first: parentheses, xor, and, or. All binary operators are
// left-associative.
class ExprParser {
 public:
  ExprParser(const std::vector<Token>& toks, std::size_t begin, std::size_t end, std::size_t text_len)
      : toks_(toks), i_(begin), end_(end), text_len_(text_len) {}

  Expr parse_all() {
    if (i_ >= end_) throw ParseError("empty expression", pos_at(i_));
    Expr e = parse_or();
    if (i_ < end_) throw ParseError("unexpected '" + std::string(toks_[i_].text) + "'", pos_at(i_));
    return e;
  }

 private:
  std::size_t pos_at(std::size_t idx) const {
    return (idx < end_ ? toks_[idx].pos : (idx < toks_.size() ? toks_[idx].pos : text_len_)) + 1;
  }
  bool at(Tok k) const { return i_ < end_ && toks_[i_].kind == k; }

  Expr parse_or() {
    Expr e = parse_and();
    while (at(Tok::Or)) {
      ++i_;
      e = Expr::make_or(e, parse_and());
    }
    return e;
  }
  Expr parse_and() {
    Expr e = parse_xor();
    while (at(Tok::And)) {
      ++i_;
      e = Expr::make_and(e, parse_xor());
    }
    return e;
  }
  Expr parse_xor() {
    Expr e = parse_primary();
    while (at(Tok::Xor)) {
      ++i_;
      e = Expr::make_xor(e, parse_primary());
    }
    return e;
  }
  Expr parse_primary() {
    if (i_ >= end_) throw ParseError("unexpected end of input", pos_at(i_));
    const Token& t = toks_[i_];
    if (t.kind == Tok::Atom) {
      ++i_;
      return Expr::atom(t.fact);
    }
    if (t.kind == Tok::LParen) {
      ++i_;
      Expr inner = parse_or();
      if (!at(Tok::RParen)) {
        if (i_ >= end_) throw ParseError("unbalanced parenthesis", pos_at(i_));
        throw ParseError("expected ')'", pos_at(i_));
      }
      ++i_;
      return inner;
    }
    throw ParseError("unexpected '" + std::string(t.text) + "'", pos_at(i_));
  }

  const std::vector<Token>& toks_;
  std::size_t i_, end_, text_len_;
};

bool is_atom_pair(const Expr& e, ExprKind k) {
  return e.kind() == k && e.lhs().is_atom() && e.rhs().is_atom();
}

std::string_view op_word(ExprKind k) {
  switch (k) {
    case ExprKind::And: return "and";
    case ExprKind::Or: return "or";
    case ExprKind::Xor: return "xor";
    case ExprKind::Atom: break;
  }
  return "";
}

}  // namespace

// ---------------------------------------------------------------------------

Expr Expr::atom(FactId f) { return Expr(ExprKind::Atom, f, nullptr, nullptr); }
Expr Expr::make_and(Expr l, Expr r) {
  return Expr(ExprKind::And, {}, std::make_shared<const Expr>(std::move(l)), std::make_shared<const Expr>(std::move(r)));
}
Expr Expr::make_or(Expr l, Expr r) {
  return Expr(ExprKind::Or, {}, std::make_shared<const Expr>(std::move(l)), std::make_shared<const Expr>(std::move(r)));
}
Expr Expr::make_xor(Expr l, Expr r) {
  return Expr(ExprKind::Xor, {}, std::make_shared<const Expr>(std::move(l)), std::make_shared<const Expr>(std::move(r)));
}

FactId Expr::fact() const {
  if (!is_atom()) throw std::logic_error("Expr::fact on compound expression");
  return fact_;
}
const Expr& Expr::lhs() const {
  if (is_atom()) throw std::logic_error("Expr::lhs on atom");
  return *lhs_;
}
const Expr& Expr::rhs() const {
  if (is_atom()) throw std::logic_error("Expr::rhs on atom");
  return *rhs_;
}

std::vector<FactId> Expr::atoms() const {
  if (is_atom()) return {fact_};
  auto out = lhs_->atoms();
  const auto r = rhs_->atoms();
  out.insert(out.end(), r.begin(), r.end());
  return out;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.kind_ != b.kind_) return false;
  if (a.is_atom()) return a.fact_ == b.fact_;
  return *a.lhs_ == *b.lhs_ && *a.rhs_ == *b.rhs_;
}

Expr parse_expr(std::string_view text) {
  const auto toks = Lexer(text).run();
  for (const auto& t : toks) {
    if (t.kind == Tok::Arrow || t.kind == Tok::Equals || t.kind == Tok::Word)
      throw ParseError("unexpected '" + std::string(t.text) + "'", t.pos + 1);
  }
  return ExprParser(toks, 0, toks.size() - 1, text.size()).parse_all();
}

std::string render_expr(const Expr& e) {
  if (e.is_atom()) return to_string(e.fact());
  return "(" + render_expr(e.lhs()) + " " + std::string(op_word(e.kind())) + " " + render_expr(e.rhs()) + ")";
}

// ---------------------------------------------------------------------------

std::string_view to_string(RuleTemplate t) {
  switch (t) {
    case RuleTemplate::Impl: return "IMPL";
    case RuleTemplate::AndAnte: return "AND_ANTE";
    case RuleTemplate::AndCons: return "AND_CONS";
    case RuleTemplate::OrAnte: return "OR_ANTE";
    case RuleTemplate::OrCons: return "OR_CONS";
    case RuleTemplate::XorAnte: return "XOR_ANTE";
    case RuleTemplate::XorBare: return "XOR_BARE";
  }
  return "?";
}

std::optional<RuleTemplate> template_from_string(std::string_view name) {
  for (RuleTemplate t : kAllTemplates)
    if (to_string(t) == name) return t;
  return std::nullopt;
}

int slot_count(RuleTemplate t) {
  return (t == RuleTemplate::Impl || t == RuleTemplate::XorBare) ? 2 : 3;
}

Rule::Rule(RuleTemplate t, FactId a, FactId b) : templ_(t), slots_{a, b, FactId{}} {
  if (slot_count(t) != 2) throw std::invalid_argument("template needs three slots");
  if (a == b) throw std::invalid_argument("rule slots must bind distinct facts");
}

Rule::Rule(RuleTemplate t, FactId a, FactId b, FactId c) : templ_(t), slots_{a, b, c} {
  if (slot_count(t) != 3) throw std::invalid_argument("template needs two slots");
  if (a == b || a == c || b == c) throw std::invalid_argument("rule slots must bind distinct facts");
}

std::vector<FactId> Rule::facts() const {
  return {slots_.begin(), slots_.begin() + arity()};
}

bool Rule::mentions(FactId f) const { return slot_of(f).has_value(); }

std::optional<Slot> Rule::slot_of(FactId f) const {
  for (int i = 0; i < arity(); ++i)
    if (slots_[i] == f) return static_cast<Slot>(i);
  return std::nullopt;
}

Expr Rule::antecedent() const {
  const auto A = Expr::atom(slots_[0]), B = Expr::atom(slots_[1]);
  switch (templ_) {
    case RuleTemplate::Impl:
    case RuleTemplate::AndCons:
    case RuleTemplate::OrCons: return A;
    case RuleTemplate::AndAnte: return Expr::make_and(A, B);
    case RuleTemplate::OrAnte: return Expr::make_or(A, B);
    case RuleTemplate::XorAnte: return Expr::make_xor(A, B);
    case RuleTemplate::XorBare: break;
  }
  throw std::logic_error("xor constraint has no antecedent");
}

Expr Rule::consequent() const {
  const auto B = Expr::atom(slots_[1]), C = Expr::atom(slots_[2]);
  switch (templ_) {
    case RuleTemplate::Impl: return B;
    case RuleTemplate::AndAnte:
    case RuleTemplate::OrAnte:
    case RuleTemplate::XorAnte: return C;
    case RuleTemplate::AndCons: return Expr::make_and(B, C);
    case RuleTemplate::OrCons: return Expr::make_or(B, C);
    case RuleTemplate::XorBare: break;
  }
  throw std::logic_error("xor constraint has no consequent");
}

Rule parse_rule(std::string_view text) {
  const auto toks = Lexer(text).run();
  std::vector<std::size_t> arrows;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind == Tok::Arrow) arrows.push_back(i);
    if (toks[i].kind == Tok::Equals || toks[i].kind == Tok::Word)
      throw ParseError("unexpected '" + std::string(toks[i].text) + "'", toks[i].pos + 1);
  }
  if (arrows.size() > 1) throw ParseError("unsupported rule shape: nested implication", toks[arrows[1]].pos + 1);

  auto bind = [](auto&&... args) {
    try {
      return Rule(args...);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), 1);
    }
  };

  if (arrows.empty()) {
    const Expr e = ExprParser(toks, 0, toks.size() - 1, text.size()).parse_all();
    if (is_atom_pair(e, ExprKind::Xor)) return bind(RuleTemplate::XorBare, e.lhs().fact(), e.rhs().fact());
    throw ParseError("unsupported rule shape", 1);
  }

  const std::size_t arrow = arrows.front();
  const Expr ante = ExprParser(toks, 0, arrow, text.size()).parse_all();
  const Expr cons = ExprParser(toks, arrow + 1, toks.size() - 1, text.size()).parse_all();

  if (ante.is_atom() && cons.is_atom()) return bind(RuleTemplate::Impl, ante.fact(), cons.fact());
  if (cons.is_atom()) {
    const FactId c = cons.fact();
    if (is_atom_pair(ante, ExprKind::And)) return bind(RuleTemplate::AndAnte, ante.lhs().fact(), ante.rhs().fact(), c);
    if (is_atom_pair(ante, ExprKind::Or)) return bind(RuleTemplate::OrAnte, ante.lhs().fact(), ante.rhs().fact(), c);
    if (is_atom_pair(ante, ExprKind::Xor)) return bind(RuleTemplate::XorAnte, ante.lhs().fact(), ante.rhs().fact(), c);
  } else if (ante.is_atom()) {
    const FactId a = ante.fact();
    if (is_atom_pair(cons, ExprKind::And)) return bind(RuleTemplate::AndCons, a, cons.lhs().fact(), cons.rhs().fact());
    if (is_atom_pair(cons, ExprKind::Or)) return bind(RuleTemplate::OrCons, a, cons.lhs().fact(), cons.rhs().fact());
  }
  throw ParseError("unsupported rule shape", 1);
}

std::string render_rule(const Rule& r) {
  if (r.templ() == RuleTemplate::XorBare)
    return to_string(r.slot(Slot::A)) + " xor " + to_string(r.slot(Slot::B));
  return render_expr(r.antecedent()) + " -> " + render_expr(r.consequent());
}

Literal parse_literal(std::string_view text) {
  const auto toks = Lexer(text).run();
  if (toks.size() != 4 || toks[0].kind != Tok::Atom || toks[1].kind != Tok::Equals || toks[2].kind != Tok::Word)
    throw ParseError("malformed literal", toks.empty() ? 1 : toks[0].pos + 1);
  if (toks[2].text == "True") return {toks[0].fact, true};
  if (toks[2].text == "False") return {toks[0].fact, false};
  throw ParseError("literal value must be True or False", toks[2].pos + 1);
}

// ---------------------------------------------------------------------------

State::State(const std::vector<Literal>& lits) {
  for (const auto& l : lits) assign(l);
}

TruthValue State::get(FactId f) const {
  const auto it = values_.find(f);
  return it == values_.end() ? TruthValue::Unknown : truth(it->second);
}

void State::assign(const Literal& lit) {
  const auto [it, inserted] = values_.emplace(lit.fact, lit.value);
  if (!inserted && it->second != lit.value)
    throw std::logic_error("state conflict: " + to_string(lit) + " contradicts the existing value");
}

void State::overwrite(const Literal& lit) { values_[lit.fact] = lit.value; }

void State::erase(FactId f) { values_.erase(f); }

std::vector<Literal> State::literals() const {
  std::vector<Literal> out;
  out.reserve(values_.size());
  for (const auto& [f, v] : values_) out.push_back({f, v});
  return out;
}

TruthValue eval_expr(const Expr& e, const State& s) {
  if (e.is_atom()) return s.get(e.fact());
  const TruthValue a = eval_expr(e.lhs(), s), b = eval_expr(e.rhs(), s);
  switch (e.kind()) {
    case ExprKind::And: return std::min(a, b);
    case ExprKind::Or: return std::max(a, b);
    case ExprKind::Xor:
      if (a == TruthValue::Unknown || b == TruthValue::Unknown) return TruthValue::Unknown;
      return truth(a != b);
    case ExprKind::Atom: break;
  }
  return TruthValue::Unknown;
}

TruthValue eval_rule(const Rule& r, const State& s) {
  if (r.templ() == RuleTemplate::XorBare)
    return eval_expr(Expr::make_xor(Expr::atom(r.slot(Slot::A)), Expr::atom(r.slot(Slot::B))), s);
  // a -> c  ==  (not a) or c
  return std::max(negate(eval_expr(r.antecedent(), s)), eval_expr(r.consequent(), s));
}

}  // namespace cfps
