#pragma once

// Expression DSL: immutable expression trees over named real symbols, with
// parsing, exact structural differentiation, evaluation, and probabilistic
// zero-testing.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace liesup {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct ParseError : std::runtime_error {
  ParseError(const std::string& message, std::size_t offset);
  std::size_t offset;
};

struct UndeclaredSymbolError : ParseError {
  UndeclaredSymbolError(const std::string& symbol, std::size_t offset);
  std::string symbol;
};

struct UnboundSymbolError : std::runtime_error {
  explicit UnboundSymbolError(const std::string& symbol);
  std::string symbol;
};

// ---------------------------------------------------------------------------
// Exact rationals (used for literals and pow exponents)
// ---------------------------------------------------------------------------

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;  // always > 0, gcd(|num|, den) == 1
};

// Returns nullopt on zero denominator or overflow during normalization.
std::optional<Rational> make_rational(std::int64_t num, std::int64_t den);
std::optional<Rational> rat_add(Rational a, Rational b);
std::optional<Rational> rat_sub(Rational a, Rational b);
std::optional<Rational> rat_mul(Rational a, Rational b);
std::optional<Rational> rat_div(Rational a, Rational b);
bool operator==(Rational a, Rational b);
double to_double(Rational r);
std::string to_string(Rational r);

// ---------------------------------------------------------------------------
// Symbols
// ---------------------------------------------------------------------------

enum class Role {
  Time,        // the independent variable, canonically "t"
  Coordinate,  // base coordinates x^i
  Velocity,    // first derivatives v^i
  Jet,         // higher derivatives y^(j)i
  Constant,    // superposition constants k_1..k_p
  Parameter,   // fixed numeric parameters (b0, c, ...)
  Auxiliary,   // named sub-expressions / auxiliary unknowns
};

class SymbolTable {
 public:
  // Declares a symbol; re-declaring with the same role is a no-op.
  // Throws std::invalid_argument when re-declared with a different role or
  // when a second Time symbol is introduced.
  std::size_t declare(const std::string& name, Role role);

  bool contains(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  Role role(std::string_view name) const;  // throws if absent
  std::size_t size() const { return symbols_.size(); }
  const std::string& name(std::size_t i) const { return symbols_[i].first; }
  Role role_at(std::size_t i) const { return symbols_[i].second; }
  std::optional<std::string> time_symbol() const;
  std::vector<std::string> names_with_role(Role role) const;
  std::vector<std::string> all_names() const;

 private:
  std::vector<std::pair<std::string, Role>> symbols_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class UnaryOp { Neg, Sqrt, Exp, Ln, Sin, Cos, Abs, Sign };
enum class BinaryOp { Add, Sub, Mul, Div };

class Expr {
 public:
  enum class Kind { Number, RationalConst, Symbol, Unary, Binary, Power };

  Expr();  // the literal 0

  static Expr number(double value);
  static Expr rational(Rational r);
  static Expr integer(std::int64_t n);
  static Expr symbol(std::string name);
  static Expr unary(UnaryOp op, Expr operand);
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);
  static Expr pow(Expr base, Rational exponent);

  Kind kind() const;
  double number_value() const;
  Rational rational_value() const;
  const std::string& symbol_name() const;
  UnaryOp unary_op() const;
  BinaryOp binary_op() const;
  const Expr& operand() const;  // unary operand or power base
  const Expr& lhs() const;
  const Expr& rhs() const;
  Rational exponent() const;

  // True when this node is a numeric literal (Number or RationalConst) whose
  // value equals v exactly.
  bool is_literal(double v) const;
  // Numeric literal of either flavor.
  std::optional<double> literal_value() const;

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator-(Expr a);
Expr sqrt(Expr a);
Expr exp(Expr a);
Expr ln(Expr a);
Expr sin(Expr a);
Expr cos(Expr a);
Expr abs(Expr a);
Expr sign(Expr a);
Expr pow(Expr base, std::int64_t exponent);

using Env = std::unordered_map<std::string, double>;

// Evaluates e at the given point. Domain violations (ln of non-positive,
// division by zero, sqrt of negative, ...) yield NaN or +-inf, never throw.
// Unbound symbols throw UnboundSymbolError.
double evaluate(const Expr& e, const Env& point);

// A rough positive magnitude of e at the point, used as the relative scale in
// zero-testing: sums absolute values through additions/subtractions so that
// cancellation does not hide the natural size of the expression.
double magnitude(const Expr& e, const Env& point);

// Exact structural derivative. d|u| = sign(u) du, d sign(u) = 0.
Expr differentiate(const Expr& e, std::string_view symbol);

Expr substitute(const Expr& e, std::string_view symbol, const Expr& replacement);
Expr substitute(const Expr& e, const std::map<std::string, Expr>& replacements);
Expr rename_symbols(const Expr& e,
                    const std::function<std::string(const std::string&)>& fn);

std::string to_string(const Expr& e);
void collect_symbols(const Expr& e, std::set<std::string>& out);
std::vector<std::string> free_symbols(const Expr& e);
bool depends_on(const Expr& e, std::string_view symbol);

// Parses an infix expression. Grammar (precedence low to high): + - ; * / ;
// unary - ; ^ (right associative; exponent must be an integer or a
// parenthesized rational). Functions: sqrt exp ln sin cos abs sign.
// Identifiers of the form stem_(digits), e.g. x_(1), lex as one token.
// Implicit multiplication is not allowed. Every identifier must be declared
// in `symbols`.
Expr parse_expression(std::string_view source, const SymbolTable& symbols);

// ---------------------------------------------------------------------------
// Sampling boxes and probabilistic zero-testing
// ---------------------------------------------------------------------------

struct Interval {
  double lo = 0.3;
  double hi = 2.0;
};

// Per-symbol sampling intervals; symbols not present use kDefaultInterval.
using Box = std::map<std::string, Interval>;
inline constexpr Interval kDefaultInterval{0.3, 2.0};
Interval box_interval(const Box& box, const std::string& symbol);

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed);
  double uniform(double lo, double hi);
  std::uint64_t next_seed();
  Env sample_point(std::span<const std::string> symbols, const Box& box);

 private:
  std::uint64_t state_;  // splitmix64; stable across platforms
};

struct ZeroTestOptions {
  int trials = 32;
  double atol = 1e-9;
  double rtol = 1e-9;
  std::uint64_t seed = 20120917;
  int max_resamples = 512;
};

struct ZeroVerdict {
  enum class Kind { Zero, Nonzero, Inconclusive };
  Kind kind = Kind::Inconclusive;
  double worst_ratio = 0.0;  // max |e(p)| / (atol + rtol * scale(p))
  double worst_value = 0.0;
  Env witness;               // point achieving worst_ratio (Nonzero)
  int finite_evaluations = 0;

  bool is_zero() const { return kind == Kind::Zero; }
};

ZeroVerdict probably_zero(std::span<const Expr> exprs,
                          std::span<const std::string> symbols, const Box& box,
                          const ZeroTestOptions& options = {});
ZeroVerdict probably_zero(const Expr& e, std::span<const std::string> symbols,
                          const Box& box, const ZeroTestOptions& options = {});
// Convenience: symbols = union of free symbols of the expressions.
ZeroVerdict probably_zero(std::span<const Expr> exprs, const Box& box,
                          const ZeroTestOptions& options = {});

}  // namespace liesup
