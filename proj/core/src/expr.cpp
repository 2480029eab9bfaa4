#include "liesup/expr.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace liesup {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

ParseError::ParseError(const std::string& message, std::size_t off)
    : std::runtime_error(message + " (offset " + std::to_string(off) + ")"),
      offset(off) {}

UndeclaredSymbolError::UndeclaredSymbolError(const std::string& sym,
                                             std::size_t off)
    : ParseError("undeclared symbol '" + sym + "'", off), symbol(sym) {}

UnboundSymbolError::UnboundSymbolError(const std::string& sym)
    : std::runtime_error("unbound symbol '" + sym + "'"), symbol(sym) {}

// ---------------------------------------------------------------------------
// Rational
// ---------------------------------------------------------------------------

namespace {

bool mul_overflows(std::int64_t a, std::int64_t b, std::int64_t* out) {
  return __builtin_mul_overflow(a, b, out);
}
bool add_overflows(std::int64_t a, std::int64_t b, std::int64_t* out) {
  return __builtin_add_overflow(a, b, out);
}

}  // namespace

std::optional<Rational> make_rational(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  if (num == std::numeric_limits<std::int64_t>::min() ||
      den == std::numeric_limits<std::int64_t>::min())
    return std::nullopt;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g == 0) g = 1;
  return Rational{num / g, den / g};
}

std::optional<Rational> rat_add(Rational a, Rational b) {
  std::int64_t ad, bc, num, den;
  if (mul_overflows(a.num, b.den, &ad)) return std::nullopt;
  if (mul_overflows(b.num, a.den, &bc)) return std::nullopt;
  if (add_overflows(ad, bc, &num)) return std::nullopt;
  if (mul_overflows(a.den, b.den, &den)) return std::nullopt;
  return make_rational(num, den);
}

std::optional<Rational> rat_sub(Rational a, Rational b) {
  return rat_add(a, Rational{-b.num, b.den});
}

std::optional<Rational> rat_mul(Rational a, Rational b) {
  std::int64_t num, den;
  if (mul_overflows(a.num, b.num, &num)) return std::nullopt;
  if (mul_overflows(a.den, b.den, &den)) return std::nullopt;
  return make_rational(num, den);
}

std::optional<Rational> rat_div(Rational a, Rational b) {
  if (b.num == 0) return std::nullopt;
  return rat_mul(a, Rational{b.den, b.num});
}

bool operator==(Rational a, Rational b) {
  return a.num == b.num && a.den == b.den;
}

double to_double(Rational r) {
  return static_cast<double>(r.num) / static_cast<double>(r.den);
}

std::string to_string(Rational r) {
  if (r.den == 1) return std::to_string(r.num);
  return std::to_string(r.num) + "/" + std::to_string(r.den);
}

// ---------------------------------------------------------------------------
// SymbolTable
// ---------------------------------------------------------------------------

std::size_t SymbolTable::declare(const std::string& name, Role role) {
  auto it = index_.find(name);
  if (it != index_.end()) {
    if (symbols_[it->second].second != role)
      throw std::invalid_argument("symbol '" + name +
                                  "' re-declared with a different role");
    return it->second;
  }
  if (role == Role::Time && time_symbol().has_value())
    throw std::invalid_argument("a time symbol is already declared");
  symbols_.emplace_back(name, role);
  index_.emplace(name, symbols_.size() - 1);
  return symbols_.size() - 1;
}

bool SymbolTable::contains(std::string_view name) const {
  return index_.find(name) != index_.end();
}

std::optional<std::size_t> SymbolTable::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Role SymbolTable::role(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("unknown symbol '" + std::string(name) + "'");
  return symbols_[it->second].second;
}

std::optional<std::string> SymbolTable::time_symbol() const {
  for (const auto& [name, role] : symbols_)
    if (role == Role::Time) return name;
  return std::nullopt;
}

std::vector<std::string> SymbolTable::names_with_role(Role role) const {
  std::vector<std::string> out;
  for (const auto& [name, r] : symbols_)
    if (r == role) out.push_back(name);
  return out;
}

std::vector<std::string> SymbolTable::all_names() const {
  std::vector<std::string> out;
  out.reserve(symbols_.size());
  for (const auto& [name, r] : symbols_) out.push_back(name);
  return out;
}

// ---------------------------------------------------------------------------
// Expr nodes
// ---------------------------------------------------------------------------

struct Expr::Node {
  Kind kind;
  double number = 0.0;
  Rational rat{0, 1};
  std::string symbol;
  UnaryOp uop = UnaryOp::Neg;
  BinaryOp bop = BinaryOp::Add;
  // Children start as null handles (not zero literals) so that constructing
  // a leaf node does not recurse into the default Expr constructor.
  Expr a{std::shared_ptr<const Node>{}};  // unary operand / lhs / power base
  Expr b{std::shared_ptr<const Node>{}};  // binary rhs
  Rational exponent{1, 1};

  explicit Node(Kind k) : kind(k) {}
};

Expr::Expr() : node_(std::make_shared<const Node>([] {
                 Node n(Kind::RationalConst);
                 n.rat = Rational{0, 1};
                 return n;
               }())) {}

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::number(double value) {
  Node n(Kind::Number);
  n.number = value;
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::rational(Rational r) {
  Node n(Kind::RationalConst);
  n.rat = r;
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::integer(std::int64_t v) { return rational(Rational{v, 1}); }

Expr Expr::symbol(std::string name) {
  Node n(Kind::Symbol);
  n.symbol = std::move(name);
  return Expr(std::make_shared<const Node>(std::move(n)));
}

std::optional<double> Expr::literal_value() const {
  if (node_->kind == Kind::Number) return node_->number;
  if (node_->kind == Kind::RationalConst) return to_double(node_->rat);
  return std::nullopt;
}

bool Expr::is_literal(double v) const {
  auto lv = literal_value();
  return lv.has_value() && *lv == v;
}

Expr Expr::unary(UnaryOp op, Expr operand) {
  // Constant folding for negation only; transcendental literals are kept
  // symbolic so printing stays faithful.
  if (op == UnaryOp::Neg) {
    if (operand.kind() == Kind::RationalConst) {
      Rational r = operand.rational_value();
      return Expr::rational(Rational{-r.num, r.den});
    }
    if (operand.kind() == Kind::Number)
      return Expr::number(-operand.number_value());
    if (operand.kind() == Kind::Unary && operand.unary_op() == UnaryOp::Neg)
      return operand.operand();
  }
  Node n(Kind::Unary);
  n.uop = op;
  n.a = std::move(operand);
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
  const bool lr = lhs.kind() == Kind::RationalConst;
  const bool rr = rhs.kind() == Kind::RationalConst;
  if (lr && rr) {
    std::optional<Rational> folded;
    switch (op) {
      case BinaryOp::Add: folded = rat_add(lhs.rational_value(), rhs.rational_value()); break;
      case BinaryOp::Sub: folded = rat_sub(lhs.rational_value(), rhs.rational_value()); break;
      case BinaryOp::Mul: folded = rat_mul(lhs.rational_value(), rhs.rational_value()); break;
      case BinaryOp::Div: folded = rat_div(lhs.rational_value(), rhs.rational_value()); break;
    }
    if (folded) return Expr::rational(*folded);
  }
  auto lv = lhs.literal_value();
  auto rv = rhs.literal_value();
  if (lv && rv && (lhs.kind() == Kind::Number || rhs.kind() == Kind::Number)) {
    switch (op) {
      case BinaryOp::Add: return Expr::number(*lv + *rv);
      case BinaryOp::Sub: return Expr::number(*lv - *rv);
      case BinaryOp::Mul: return Expr::number(*lv * *rv);
      case BinaryOp::Div:
        if (*rv != 0.0) return Expr::number(*lv / *rv);
        break;
    }
  }
  // Light neutral-element folding.
  switch (op) {
    case BinaryOp::Add:
      if (lhs.is_literal(0)) return rhs;
      if (rhs.is_literal(0)) return lhs;
      break;
    case BinaryOp::Sub:
      if (rhs.is_literal(0)) return lhs;
      if (lhs.is_literal(0)) return Expr::unary(UnaryOp::Neg, rhs);
      break;
    case BinaryOp::Mul:
      if (lhs.is_literal(0) || rhs.is_literal(0)) return Expr::integer(0);
      if (lhs.is_literal(1)) return rhs;
      if (rhs.is_literal(1)) return lhs;
      break;
    case BinaryOp::Div:
      if (rhs.is_literal(1)) return lhs;
      break;
  }
  Node n(Kind::Binary);
  n.bop = op;
  n.a = std::move(lhs);
  n.b = std::move(rhs);
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::pow(Expr base, Rational e) {
  if (e == Rational{1, 1}) return base;
  if (e == Rational{0, 1}) return Expr::integer(1);
  if (base.kind() == Kind::RationalConst && e.den == 1 && e.num >= 0 &&
      e.num <= 16) {
    Rational acc{1, 1};
    bool ok = true;
    for (std::int64_t i = 0; i < e.num; ++i) {
      auto next = rat_mul(acc, base.rational_value());
      if (!next) { ok = false; break; }
      acc = *next;
    }
    if (ok) return Expr::rational(acc);
  }
  Node n(Kind::Power);
  n.a = std::move(base);
  n.exponent = e;
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr::Kind Expr::kind() const { return node_->kind; }
double Expr::number_value() const { return node_->number; }
Rational Expr::rational_value() const { return node_->rat; }
const std::string& Expr::symbol_name() const { return node_->symbol; }
UnaryOp Expr::unary_op() const { return node_->uop; }
BinaryOp Expr::binary_op() const { return node_->bop; }
const Expr& Expr::operand() const { return node_->a; }
const Expr& Expr::lhs() const { return node_->a; }
const Expr& Expr::rhs() const { return node_->b; }
Rational Expr::exponent() const { return node_->exponent; }

Expr operator+(Expr a, Expr b) { return Expr::binary(BinaryOp::Add, std::move(a), std::move(b)); }
Expr operator-(Expr a, Expr b) { return Expr::binary(BinaryOp::Sub, std::move(a), std::move(b)); }
Expr operator*(Expr a, Expr b) { return Expr::binary(BinaryOp::Mul, std::move(a), std::move(b)); }
Expr operator/(Expr a, Expr b) { return Expr::binary(BinaryOp::Div, std::move(a), std::move(b)); }
Expr operator-(Expr a) { return Expr::unary(UnaryOp::Neg, std::move(a)); }
Expr sqrt(Expr a) { return Expr::unary(UnaryOp::Sqrt, std::move(a)); }
Expr exp(Expr a) { return Expr::unary(UnaryOp::Exp, std::move(a)); }
Expr ln(Expr a) { return Expr::unary(UnaryOp::Ln, std::move(a)); }
Expr sin(Expr a) { return Expr::unary(UnaryOp::Sin, std::move(a)); }
Expr cos(Expr a) { return Expr::unary(UnaryOp::Cos, std::move(a)); }
Expr abs(Expr a) { return Expr::unary(UnaryOp::Abs, std::move(a)); }
Expr sign(Expr a) { return Expr::unary(UnaryOp::Sign, std::move(a)); }
Expr pow(Expr base, std::int64_t exponent) {
  return Expr::pow(std::move(base), Rational{exponent, 1});
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

double ipow(double x, std::int64_t n) {
  if (n < 0) return 1.0 / ipow(x, -n);
  double result = 1.0, base = x;
  while (n > 0) {
    if (n & 1) result *= base;
    base *= base;
    n >>= 1;
  }
  return result;
}

double eval_pow(double base, Rational e) {
  if (e.den == 1) return ipow(base, e.num);
  if (base < 0.0) return kNan;
  return std::pow(base, to_double(e));
}

}  // namespace

double evaluate(const Expr& e, const Env& point) {
  switch (e.kind()) {
    case Expr::Kind::Number: return e.number_value();
    case Expr::Kind::RationalConst: return to_double(e.rational_value());
    case Expr::Kind::Symbol: {
      auto it = point.find(e.symbol_name());
      if (it == point.end()) throw UnboundSymbolError(e.symbol_name());
      return it->second;
    }
    case Expr::Kind::Unary: {
      double v = evaluate(e.operand(), point);
      switch (e.unary_op()) {
        case UnaryOp::Neg: return -v;
        case UnaryOp::Sqrt: return v < 0.0 ? kNan : std::sqrt(v);
        case UnaryOp::Exp: return std::exp(v);
        case UnaryOp::Ln: return v <= 0.0 ? kNan : std::log(v);
        case UnaryOp::Sin: return std::sin(v);
        case UnaryOp::Cos: return std::cos(v);
        case UnaryOp::Abs: return std::fabs(v);
        case UnaryOp::Sign: return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      }
      return kNan;
    }
    case Expr::Kind::Binary: {
      double a = evaluate(e.lhs(), point);
      double b = evaluate(e.rhs(), point);
      switch (e.binary_op()) {
        case BinaryOp::Add: return a + b;
        case BinaryOp::Sub: return a - b;
        case BinaryOp::Mul: return a * b;
        case BinaryOp::Div: return a / b;
      }
      return kNan;
    }
    case Expr::Kind::Power:
      return eval_pow(evaluate(e.operand(), point), e.exponent());
  }
  return kNan;
}

double magnitude(const Expr& e, const Env& point) {
  switch (e.kind()) {
    case Expr::Kind::Number: return std::fabs(e.number_value());
    case Expr::Kind::RationalConst:
      return std::fabs(to_double(e.rational_value()));
    case Expr::Kind::Symbol: {
      auto it = point.find(e.symbol_name());
      if (it == point.end()) throw UnboundSymbolError(e.symbol_name());
      return std::fabs(it->second);
    }
    case Expr::Kind::Unary: {
      double m = magnitude(e.operand(), point);
      switch (e.unary_op()) {
        case UnaryOp::Neg: return m;
        case UnaryOp::Sqrt: return std::sqrt(m);
        case UnaryOp::Exp: return std::exp(m);
        case UnaryOp::Ln: return std::max(1.0, std::fabs(std::log(m)));
        case UnaryOp::Sin:
        case UnaryOp::Cos:
        case UnaryOp::Sign: return 1.0;
        case UnaryOp::Abs: return m;
      }
      return kNan;
    }
    case Expr::Kind::Binary: {
      double a = magnitude(e.lhs(), point);
      double b = magnitude(e.rhs(), point);
      switch (e.binary_op()) {
        case BinaryOp::Add:
        case BinaryOp::Sub: return a + b;
        case BinaryOp::Mul: return a * b;
        case BinaryOp::Div: return a / b;
      }
      return kNan;
    }
    case Expr::Kind::Power:
      return eval_pow(magnitude(e.operand(), point), e.exponent());
  }
  return kNan;
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

Expr differentiate(const Expr& e, std::string_view symbol) {
  switch (e.kind()) {
    case Expr::Kind::Number:
    case Expr::Kind::RationalConst:
      return Expr::integer(0);
    case Expr::Kind::Symbol:
      return e.symbol_name() == symbol ? Expr::integer(1) : Expr::integer(0);
    case Expr::Kind::Unary: {
      const Expr& u = e.operand();
      Expr du = differentiate(u, symbol);
      if (du.is_literal(0)) return Expr::integer(0);
      switch (e.unary_op()) {
        case UnaryOp::Neg: return -du;
        case UnaryOp::Sqrt: return du / (Expr::integer(2) * sqrt(u));
        case UnaryOp::Exp: return exp(u) * du;
        case UnaryOp::Ln: return du / u;
        case UnaryOp::Sin: return cos(u) * du;
        case UnaryOp::Cos: return -(sin(u) * du);
        case UnaryOp::Abs: return sign(u) * du;
        case UnaryOp::Sign: return Expr::integer(0);
      }
      return Expr::integer(0);
    }
    case Expr::Kind::Binary: {
      const Expr& a = e.lhs();
      const Expr& b = e.rhs();
      Expr da = differentiate(a, symbol);
      Expr db = differentiate(b, symbol);
      switch (e.binary_op()) {
        case BinaryOp::Add: return da + db;
        case BinaryOp::Sub: return da - db;
        case BinaryOp::Mul: return da * b + a * db;
        case BinaryOp::Div:
          if (db.is_literal(0)) return da / b;
          return (da * b - a * db) / (b * b);
      }
      return Expr::integer(0);
    }
    case Expr::Kind::Power: {
      const Expr& base = e.operand();
      Rational r = e.exponent();
      Expr db = differentiate(base, symbol);
      if (db.is_literal(0)) return Expr::integer(0);
      auto rm1 = rat_sub(r, Rational{1, 1});
      if (!rm1) throw std::overflow_error("exponent overflow in derivative");
      return Expr::rational(r) * Expr::pow(base, *rm1) * db;
    }
  }
  return Expr::integer(0);
}

// ---------------------------------------------------------------------------
// Substitution, renaming, traversal
// ---------------------------------------------------------------------------

Expr substitute(const Expr& e, const std::map<std::string, Expr>& repl) {
  switch (e.kind()) {
    case Expr::Kind::Number:
    case Expr::Kind::RationalConst:
      return e;
    case Expr::Kind::Symbol: {
      auto it = repl.find(e.symbol_name());
      return it == repl.end() ? e : it->second;
    }
    case Expr::Kind::Unary:
      return Expr::unary(e.unary_op(), substitute(e.operand(), repl));
    case Expr::Kind::Binary:
      return Expr::binary(e.binary_op(), substitute(e.lhs(), repl),
                          substitute(e.rhs(), repl));
    case Expr::Kind::Power:
      return Expr::pow(substitute(e.operand(), repl), e.exponent());
  }
  return e;
}

Expr substitute(const Expr& e, std::string_view symbol,
                const Expr& replacement) {
  std::map<std::string, Expr> repl;
  repl.emplace(std::string(symbol), replacement);
  return substitute(e, repl);
}

Expr rename_symbols(const Expr& e,
                    const std::function<std::string(const std::string&)>& fn) {
  switch (e.kind()) {
    case Expr::Kind::Number:
    case Expr::Kind::RationalConst:
      return e;
    case Expr::Kind::Symbol:
      return Expr::symbol(fn(e.symbol_name()));
    case Expr::Kind::Unary:
      return Expr::unary(e.unary_op(), rename_symbols(e.operand(), fn));
    case Expr::Kind::Binary:
      return Expr::binary(e.binary_op(), rename_symbols(e.lhs(), fn),
                          rename_symbols(e.rhs(), fn));
    case Expr::Kind::Power:
      return Expr::pow(rename_symbols(e.operand(), fn), e.exponent());
  }
  return e;
}

void collect_symbols(const Expr& e, std::set<std::string>& out) {
  switch (e.kind()) {
    case Expr::Kind::Symbol: out.insert(e.symbol_name()); break;
    case Expr::Kind::Unary:
    case Expr::Kind::Power: collect_symbols(e.operand(), out); break;
    case Expr::Kind::Binary:
      collect_symbols(e.lhs(), out);
      collect_symbols(e.rhs(), out);
      break;
    default: break;
  }
}

std::vector<std::string> free_symbols(const Expr& e) {
  std::set<std::string> s;
  collect_symbols(e, s);
  return {s.begin(), s.end()};
}

bool depends_on(const Expr& e, std::string_view symbol) {
  switch (e.kind()) {
    case Expr::Kind::Symbol: return e.symbol_name() == symbol;
    case Expr::Kind::Unary:
    case Expr::Kind::Power: return depends_on(e.operand(), symbol);
    case Expr::Kind::Binary:
      return depends_on(e.lhs(), symbol) || depends_on(e.rhs(), symbol);
    default: return false;
  }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

// Precedence levels: 1 add/sub, 2 mul/div, 3 unary minus, 4 power, 5 atom.
int precedence(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Number:
      return e.number_value() < 0 ? 3 : 5;
    case Expr::Kind::RationalConst: {
      Rational r = e.rational_value();
      if (r.num < 0) return 3;
      return r.den == 1 ? 5 : 2;
    }
    case Expr::Kind::Symbol: return 5;
    case Expr::Kind::Unary:
      return e.unary_op() == UnaryOp::Neg ? 3 : 5;
    case Expr::Kind::Binary:
      return (e.binary_op() == BinaryOp::Add || e.binary_op() == BinaryOp::Sub)
                 ? 1 : 2;
    case Expr::Kind::Power: return 4;
  }
  return 5;
}

void print(const Expr& e, std::ostringstream& out, int parent_prec) {
  int prec = precedence(e);
  bool parens = prec < parent_prec;
  if (parens) out << '(';
  switch (e.kind()) {
    case Expr::Kind::Number: {
      std::ostringstream tmp;
      tmp.precision(17);
      tmp << e.number_value();
      out << tmp.str();
      break;
    }
    case Expr::Kind::RationalConst:
      out << to_string(e.rational_value());
      break;
    case Expr::Kind::Symbol:
      out << e.symbol_name();
      break;
    case Expr::Kind::Unary: {
      static const char* names[] = {"-",   "sqrt", "exp", "ln",
                                    "sin", "cos",  "abs", "sign"};
      if (e.unary_op() == UnaryOp::Neg) {
        out << '-';
        print(e.operand(), out, 4);  // bind tighter than mul for -a*b clarity
      } else {
        out << names[static_cast<int>(e.unary_op())] << '(';
        print(e.operand(), out, 0);
        out << ')';
      }
      break;
    }
    case Expr::Kind::Binary: {
      BinaryOp op = e.binary_op();
      const char* sym = op == BinaryOp::Add   ? "+"
                        : op == BinaryOp::Sub ? "-"
                        : op == BinaryOp::Mul ? "*"
                                              : "/";
      print(e.lhs(), out, prec);
      out << sym;
      // Left-associative: right child needs strictly higher precedence for
      // sub/div, and for add/mul same level is fine except sub/div semantics.
      int rhs_prec = (op == BinaryOp::Sub || op == BinaryOp::Div) ? prec + 1
                                                                  : prec;
      print(e.rhs(), out, rhs_prec);
      break;
    }
    case Expr::Kind::Power: {
      print(e.operand(), out, 5);  // any compound base gets parentheses
      out << '^';
      Rational r = e.exponent();
      if (r.den == 1 && r.num >= 0) {
        out << r.num;
      } else {
        out << '(' << to_string(r) << ')';
      }
      break;
    }
  }
  if (parens) out << ')';
}

}  // namespace

std::string to_string(const Expr& e) {
  std::ostringstream out;
  print(e, out, 0);
  return out.str();
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct Token {
  enum class Kind { Number, Integer, Identifier, Op, LParen, RParen, End };
  Kind kind;
  std::size_t offset;
  double number = 0.0;
  std::int64_t integer = 0;
  std::string text;  // identifier or single-char op
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    std::size_t start = pos_;
    if (pos_ >= src_.size()) return {Token::Kind::End, start};
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return lex_number(start);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
      return lex_identifier(start);
    if (c == '(') { ++pos_; return {Token::Kind::LParen, start}; }
    if (c == ')') { ++pos_; return {Token::Kind::RParen, start}; }
    if (c == '+' || c == '-' || c == '*' || c == '/' || c == '^') {
      ++pos_;
      Token t{Token::Kind::Op, start};
      t.text = std::string(1, c);
      return t;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", start);
  }

 private:
  Token lex_number(std::size_t start) {
    std::size_t i = pos_;
    bool has_dot = false, has_exp = false;
    while (i < src_.size()) {
      char c = src_[i];
      if (std::isdigit(static_cast<unsigned char>(c))) { ++i; continue; }
      if (c == '.' && !has_dot && !has_exp) { has_dot = true; ++i; continue; }
      if ((c == 'e' || c == 'E') && !has_exp && i > pos_ &&
          std::isdigit(static_cast<unsigned char>(src_[i - 1]))) {
        has_exp = true;
        ++i;
        if (i < src_.size() && (src_[i] == '+' || src_[i] == '-')) ++i;
        continue;
      }
      break;
    }
    std::string text(src_.substr(pos_, i - pos_));
    pos_ = i;
    if (!has_dot && !has_exp) {
      try {
        Token t{Token::Kind::Integer, start};
        t.integer = std::stoll(text);
        t.number = static_cast<double>(t.integer);
        return t;
      } catch (const std::out_of_range&) {
        // fall through to double
      }
    }
    Token t{Token::Kind::Number, start};
    try {
      t.number = std::stod(text);
    } catch (const std::exception&) {
      throw ParseError("malformed number '" + text + "'", start);
    }
    return t;
  }

  Token lex_identifier(std::size_t start) {
    std::size_t i = pos_;
    while (i < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[i])) || src_[i] == '_'))
      ++i;
    // Absorb a trailing copy tag: stem ending in '_' followed by (digits),
    // so x_(1) is a single identifier token.
    if (i < src_.size() && src_[i] == '(' && i > pos_ && src_[i - 1] == '_') {
      std::size_t j = i + 1;
      while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
      if (j > i + 1 && j < src_.size() && src_[j] == ')') i = j + 1;
    }
    Token t{Token::Kind::Identifier, start};
    t.text = std::string(src_.substr(pos_, i - pos_));
    pos_ = i;
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

const std::map<std::string, UnaryOp, std::less<>>& function_names() {
  static const std::map<std::string, UnaryOp, std::less<>> fns = {
      {"sqrt", UnaryOp::Sqrt}, {"exp", UnaryOp::Exp}, {"ln", UnaryOp::Ln},
      {"log", UnaryOp::Ln},    {"sin", UnaryOp::Sin}, {"cos", UnaryOp::Cos},
      {"abs", UnaryOp::Abs},   {"sign", UnaryOp::Sign}};
  return fns;
}

class Parser {
 public:
  Parser(std::string_view src, const SymbolTable& symbols)
      : lexer_(src), symbols_(symbols) {
    advance();
  }

  Expr parse() {
    Expr e = parse_sum();
    expect_end();
    return e;
  }

 private:
  void advance() { tok_ = lexer_.next(); }

  bool is_op(const char* s) const {
    return tok_.kind == Token::Kind::Op && tok_.text == s;
  }

  void expect_end() {
    if (tok_.kind != Token::Kind::End)
      throw ParseError("unexpected trailing input", tok_.offset);
  }

  Expr parse_sum() {
    Expr e = parse_term();
    while (is_op("+") || is_op("-")) {
      bool plus = tok_.text == "+";
      advance();
      Expr rhs = parse_term();
      e = plus ? e + rhs : e - rhs;
    }
    return e;
  }

  Expr parse_term() {
    Expr e = parse_factor();
    while (is_op("*") || is_op("/")) {
      bool mul = tok_.text == "*";
      advance();
      Expr rhs = parse_factor();
      e = mul ? e * rhs : e / rhs;
    }
    return e;
  }

  Expr parse_factor() {
    if (is_op("-")) {
      advance();
      return -parse_factor();
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    if (is_op("^")) {
      advance();
      Rational e = parse_exponent();
      return Expr::pow(base, e);
    }
    return base;
  }

  Rational parse_exponent() {
    bool neg = false;
    if (is_op("-")) {
      neg = true;
      advance();
    }
    if (tok_.kind == Token::Kind::Integer) {
      std::int64_t v = tok_.integer;
      advance();
      return Rational{neg ? -v : v, 1};
    }
    if (tok_.kind == Token::Kind::LParen) {
      std::size_t open = tok_.offset;
      advance();
      bool inner_neg = false;
      if (is_op("-")) {
        inner_neg = true;
        advance();
      }
      if (tok_.kind != Token::Kind::Integer)
        throw ParseError("exponent must be an integer or rational", tok_.offset);
      std::int64_t num = tok_.integer;
      advance();
      std::int64_t den = 1;
      if (is_op("/")) {
        advance();
        if (tok_.kind != Token::Kind::Integer)
          throw ParseError("rational exponent denominator must be an integer",
                           tok_.offset);
        den = tok_.integer;
        advance();
      }
      if (tok_.kind != Token::Kind::RParen)
        throw ParseError("expected ')' closing exponent", open);
      advance();
      auto r = make_rational((neg != inner_neg) ? -num : num, den);
      if (!r) throw ParseError("invalid rational exponent", open);
      return *r;
    }
    if (tok_.kind == Token::Kind::Number)
      throw ParseError("floating-point exponents are not allowed", tok_.offset);
    throw ParseError("expected exponent", tok_.offset);
  }

  Expr parse_atom() {
    switch (tok_.kind) {
      case Token::Kind::Integer: {
        Expr e = Expr::integer(tok_.integer);
        advance();
        return e;
      }
      case Token::Kind::Number: {
        Expr e = Expr::number(tok_.number);
        advance();
        return e;
      }
      case Token::Kind::Identifier: {
        std::string name = tok_.text;
        std::size_t off = tok_.offset;
        advance();
        auto fn = function_names().find(name);
        if (fn != function_names().end() && tok_.kind == Token::Kind::LParen) {
          advance();
          Expr arg = parse_sum();
          if (tok_.kind != Token::Kind::RParen)
            throw ParseError("expected ')' closing call to " + name,
                             tok_.offset);
          advance();
          return Expr::unary(fn->second, arg);
        }
        if (!symbols_.contains(name)) throw UndeclaredSymbolError(name, off);
        if (tok_.kind == Token::Kind::LParen)
          throw ParseError("'" + name +
                               "' is not a function (implicit multiplication "
                               "is not allowed)",
                           off);
        return Expr::symbol(name);
      }
      case Token::Kind::LParen: {
        advance();
        Expr e = parse_sum();
        if (tok_.kind != Token::Kind::RParen)
          throw ParseError("expected ')'", tok_.offset);
        advance();
        return e;
      }
      case Token::Kind::RParen:
        throw ParseError("unexpected ')'", tok_.offset);
      case Token::Kind::Op:
        throw ParseError("unexpected operator '" + tok_.text + "'",
                         tok_.offset);
      case Token::Kind::End:
        throw ParseError("unexpected end of input", tok_.offset);
    }
    throw ParseError("unexpected token", tok_.offset);
  }

  Lexer lexer_;
  const SymbolTable& symbols_;
  Token tok_;
};

}  // namespace

Expr parse_expression(std::string_view source, const SymbolTable& symbols) {
  return Parser(source, symbols).parse();
}

// ---------------------------------------------------------------------------
// Sampling and zero-testing
// ---------------------------------------------------------------------------

Interval box_interval(const Box& box, const std::string& symbol) {
  auto it = box.find(symbol);
  return it == box.end() ? kDefaultInterval : it->second;
}

Sampler::Sampler(std::uint64_t seed) : state_(seed) {}

std::uint64_t Sampler::next_seed() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Sampler::uniform(double lo, double hi) {
  double u = static_cast<double>(next_seed() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

Env Sampler::sample_point(std::span<const std::string> symbols,
                          const Box& box) {
  Env env;
  for (const auto& s : symbols) {
    Interval iv = box_interval(box, s);
    env[s] = uniform(iv.lo, iv.hi);
  }
  return env;
}

ZeroVerdict probably_zero(std::span<const Expr> exprs,
                          std::span<const std::string> symbols, const Box& box,
                          const ZeroTestOptions& options) {
  ZeroVerdict verdict;
  Sampler sampler(options.seed);
  int finite = 0, attempts = 0;
  while (finite < options.trials && attempts < options.trials + options.max_resamples) {
    ++attempts;
    Env point = sampler.sample_point(symbols, box);
    bool all_finite = true;
    double ratio = 0.0, value = 0.0;
    for (const Expr& e : exprs) {
      double v = evaluate(e, point);
      double scale = magnitude(e, point);
      if (!std::isfinite(v) || !std::isfinite(scale)) {
        all_finite = false;
        break;
      }
      double r = std::fabs(v) / (options.atol + options.rtol * scale);
      if (r > ratio) {
        ratio = r;
        value = v;
      }
    }
    if (!all_finite) continue;
    ++finite;
    if (ratio > verdict.worst_ratio) {
      verdict.worst_ratio = ratio;
      verdict.worst_value = value;
      verdict.witness = point;
    }
    if (ratio > 1.0) {
      verdict.kind = ZeroVerdict::Kind::Nonzero;
      verdict.finite_evaluations = finite;
      return verdict;
    }
  }
  verdict.finite_evaluations = finite;
  verdict.kind = finite >= options.trials ? ZeroVerdict::Kind::Zero
                                          : ZeroVerdict::Kind::Inconclusive;
  return verdict;
}

ZeroVerdict probably_zero(const Expr& e, std::span<const std::string> symbols,
                          const Box& box, const ZeroTestOptions& options) {
  return probably_zero(std::span<const Expr>(&e, 1), symbols, box, options);
}

ZeroVerdict probably_zero(std::span<const Expr> exprs, const Box& box,
                          const ZeroTestOptions& options) {
  std::set<std::string> all;
  for (const Expr& e : exprs) collect_symbols(e, all);
  std::vector<std::string> symbols(all.begin(), all.end());
  return probably_zero(exprs, symbols, box, options);
}

}  // namespace liesup
