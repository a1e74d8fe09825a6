// Fact / expression / rule language: AST, canonical text syntax, and
// three-valued (Kleene) evaluation over partial states.
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cfps {

/// A fact symbol, rendered as `[F<index>]`.
struct FactId {
  std::uint32_t index = 0;

  friend auto operator<=>(const FactId&, const FactId&) = default;
};

std::string to_string(FactId f);

enum class TruthValue : std::uint8_t { False = 0, Unknown = 1, True = 2 };

constexpr TruthValue truth(bool b) { return b ? TruthValue::True : TruthValue::False; }
constexpr TruthValue negate(TruthValue v) {
  return v == TruthValue::Unknown ? v : (v == TruthValue::True ? TruthValue::False : TruthValue::True);
}
std::string_view to_string(TruthValue v);

/// A fact paired with a definite truth value.
struct Literal {
  FactId fact;
  bool value = true;

  Literal negated() const { return {fact, !value}; }
  friend auto operator<=>(const Literal&, const Literal&) = default;
};

/// `[F3]=True`
std::string to_string(const Literal& lit);
Literal parse_literal(std::string_view text);

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset);
  /// 1-based byte position of the offending token (length + 1 at end of input).
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

enum class ExprKind : std::uint8_t { Atom, And, Or, Xor };

/// Immutable expression tree; children are shared.
class Expr {
 public:
  static Expr atom(FactId f);
  static Expr make_and(Expr lhs, Expr rhs);
  static Expr make_or(Expr lhs, Expr rhs);
  static Expr make_xor(Expr lhs, Expr rhs);

  ExprKind kind() const { return kind_; }
  bool is_atom() const { return kind_ == ExprKind::Atom; }
  FactId fact() const;  // atoms only
  const Expr& lhs() const;
  const Expr& rhs() const;

  /// Facts in left-to-right order, with repetition.
  std::vector<FactId> atoms() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  Expr(ExprKind k, FactId f, std::shared_ptr<const Expr> l, std::shared_ptr<const Expr> r)
      : kind_(k), fact_(f), lhs_(std::move(l)), rhs_(std::move(r)) {}

  ExprKind kind_;
  FactId fact_;
  std::shared_ptr<const Expr> lhs_, rhs_;
};

Expr parse_expr(std::string_view text);
std::string render_expr(const Expr& e);

enum class RuleTemplate : std::uint8_t {
  Impl,     // A -> B
  AndAnte,  // (A and B) -> C
  AndCons,  // A -> (B and C)
  OrAnte,   // (A or B) -> C
  OrCons,   // A -> (B or C)
  XorAnte,  // (A xor B) -> C
  XorBare,  // A xor B
};

inline constexpr std::array<RuleTemplate, 7> kAllTemplates = {
    RuleTemplate::Impl,   RuleTemplate::AndAnte, RuleTemplate::AndCons, RuleTemplate::OrAnte,
    RuleTemplate::OrCons, RuleTemplate::XorAnte, RuleTemplate::XorBare};

std::string_view to_string(RuleTemplate t);
std::optional<RuleTemplate> template_from_string(std::string_view name);
/// 2 for Impl and XorBare, 3 otherwise.
int slot_count(RuleTemplate t);

/// Template slot names; A, B, C in reading order of the canonical text.
enum class Slot : std::uint8_t { A = 0, B = 1, C = 2 };

/// A rule is one of the seven template shapes with its slots bound to distinct facts.
class Rule {
 public:
  Rule(RuleTemplate t, FactId a, FactId b);
  Rule(RuleTemplate t, FactId a, FactId b, FactId c);

  RuleTemplate templ() const { return templ_; }
  bool is_implication() const { return templ_ != RuleTemplate::XorBare; }
  FactId slot(Slot s) const { return slots_[static_cast<std::size_t>(s)]; }
  int arity() const { return slot_count(templ_); }
  std::vector<FactId> facts() const;
  bool mentions(FactId f) const;
  std::optional<Slot> slot_of(FactId f) const;

  /// Implication rules only.
  Expr antecedent() const;
  Expr consequent() const;

  friend bool operator==(const Rule&, const Rule&) = default;

 private:
  RuleTemplate templ_;
  std::array<FactId, 3> slots_{};
};

Rule parse_rule(std::string_view text);
std::string render_rule(const Rule& r);

/// Partial assignment. Unassigned facts read as Unknown.
class State {
 public:
  State() = default;
  explicit State(const std::vector<Literal>& lits);

  TruthValue get(FactId f) const;
  bool known(FactId f) const { return get(f) != TruthValue::Unknown; }
  bool holds(const Literal& lit) const { return get(lit.fact) == truth(lit.value); }

  /// Throws std::logic_error if `lit.fact` already holds the opposite value.
  void assign(const Literal& lit);
  /// Replaces any existing value. Reserved for counterfactual recomputation.
  void overwrite(const Literal& lit);
  void erase(FactId f);

  std::size_t size() const { return values_.size(); }
  const std::map<FactId, bool>& values() const { return values_; }
  std::vector<Literal> literals() const;

  friend bool operator==(const State&, const State&) = default;

 private:
  std::map<FactId, bool> values_;
};

/// Kleene: And = min, Or = max, Xor unknown unless both sides known.
TruthValue eval_expr(const Expr& e, const State& s);
/// Implication: unknown-aware material implication; XorConstraint: Kleene xor.
TruthValue eval_rule(const Rule& r, const State& s);

}  // namespace cfps
