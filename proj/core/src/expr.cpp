#include "corral/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace corral {

namespace {

const char* binary_op_token(BinaryOp op) {
  switch (op) {
    case BinaryOp::Or: return "||";
    case BinaryOp::And: return "&&";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
  }
  return "?";
}

// Higher binds tighter. Comparisons sit between arithmetic and logic.
int binary_precedence(BinaryOp op) {
  switch (op) {
    case BinaryOp::Or: return 1;
    case BinaryOp::And: return 2;
    case BinaryOp::Eq:
    case BinaryOp::Ne:
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge: return 3;
    case BinaryOp::Add:
    case BinaryOp::Sub: return 4;
    case BinaryOp::Mul:
    case BinaryOp::Div: return 5;
  }
  return 0;
}

constexpr int kUnaryPrecedence = 6;

int node_precedence(const ExprNode& n) {
  if (std::holds_alternative<ExprNode::Binary>(n.node)) {
    return binary_precedence(std::get<ExprNode::Binary>(n.node).op);
  }
  if (std::holds_alternative<ExprNode::Unary>(n.node)) {
    return kUnaryPrecedence;
  }
  return 7;  // literals / attribute references never need parens
}

void print_node(const ExprPtr& node, std::string& out);

void print_child(const ExprPtr& child, int parent_prec, bool is_right,
                 std::string& out) {
  int child_prec = node_precedence(*child);
  // All binary operators here are left-associative, so a right child at equal
  // precedence needs parens to survive a reparse.
  bool parens = child_prec < parent_prec || (is_right && child_prec == parent_prec);
  if (parens) out.push_back('(');
  print_node(child, out);
  if (parens) out.push_back(')');
}

std::string escape_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

void print_node(const ExprPtr& node, std::string& out) {
  const ExprNode& n = *node;
  if (const auto* lit = std::get_if<AttrValue>(&n.node)) {
    out += attr_value_to_string(*lit);
  } else if (const auto* ref = std::get_if<ExprNode::AttrRef>(&n.node)) {
    out += ref->scope == AttrScope::Job ? "job." : "machine.";
    out += ref->name;
  } else if (const auto* un = std::get_if<ExprNode::Unary>(&n.node)) {
    out.push_back(un->op == UnaryOp::Not ? '!' : '-');
    int child_prec = node_precedence(*un->operand);
    bool parens = child_prec < kUnaryPrecedence;
    if (parens) out.push_back('(');
    print_node(un->operand, out);
    if (parens) out.push_back(')');
  } else {
    const auto& bin = std::get<ExprNode::Binary>(n.node);
    int prec = binary_precedence(bin.op);
    print_child(bin.lhs, prec, false, out);
    out.push_back(' ');
    out += binary_op_token(bin.op);
    out.push_back(' ');
    print_child(bin.rhs, prec, true, out);
  }
}

// --- Parser -----------------------------------------------------------------

struct Token {
  enum Kind { End, Integer, Real, String, Ident, Op } kind = End;
  std::string text;
  std::int64_t int_value = 0;
  double real_value = 0;
  size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Result<Token> next() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      ++pos_;
    }
    Token t;
    t.pos = pos_;
    if (pos_ >= src_.size()) {
      t.kind = Token::End;
      return t;
    }
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) return lex_number(t);
    if (c == '"') return lex_string(t);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      t.kind = Token::Ident;
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    static const char* two_char[] = {"||", "&&", "==", "!=", "<=", ">="};
    for (const char* op : two_char) {
      if (src_.substr(pos_, 2) == op) {
        t.kind = Token::Op;
        t.text = op;
        pos_ += 2;
        return t;
      }
    }
    if (std::string_view("!<>+-*/().").find(c) != std::string_view::npos) {
      t.kind = Token::Op;
      t.text = std::string(1, c);
      ++pos_;
      return t;
    }
    return syntax_error("unexpected character", pos_);
  }

  static Error syntax_error_at(const std::string& what, size_t pos) {
    return make_error(Errc::syntax_error,
                      what + " at position " + std::to_string(pos));
  }

 private:
  Result<Token> lex_number(Token t) {
    size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    bool is_real = false;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      is_real = true;
      ++pos_;
      if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        return syntax_error("expected digits after decimal point", pos_);
      }
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      is_real = true;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        return syntax_error("expected digits in exponent", pos_);
      }
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    std::string text(src_.substr(start, pos_ - start));
    if (is_real) {
      t.kind = Token::Real;
      t.real_value = std::strtod(text.c_str(), nullptr);
    } else {
      t.kind = Token::Integer;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), t.int_value);
      if (ec != std::errc()) {
        return syntax_error("integer literal out of range", start);
      }
    }
    t.text = std::move(text);
    return t;
  }

  Result<Token> lex_string(Token t) {
    size_t start = pos_;
    ++pos_;  // opening quote
    std::string value;
    while (pos_ < src_.size() && src_[pos_] != '"') {
      char c = src_[pos_];
      if (c == '\\') {
        ++pos_;
        if (pos_ >= src_.size()) break;
        switch (src_[pos_]) {
          case '"': value.push_back('"'); break;
          case '\\': value.push_back('\\'); break;
          case 'n': value.push_back('\n'); break;
          case 't': value.push_back('\t'); break;
          default:
            return syntax_error("unknown escape sequence", pos_);
        }
      } else {
        value.push_back(c);
      }
      ++pos_;
    }
    if (pos_ >= src_.size()) {
      return syntax_error("unterminated string literal", start);
    }
    ++pos_;  // closing quote
    t.kind = Token::String;
    t.text = std::move(value);
    return t;
  }

  Result<Token> syntax_error(const std::string& what, size_t pos) {
    return syntax_error_at(what, pos);
  }

  std::string_view src_;
  size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lexer_(src) {}

  Result<ExprPtr> parse() {
    if (auto r = advance(); !r.ok()) return r.error();
    auto expr = parse_or();
    if (!expr.ok()) return expr;
    if (cur_.kind != Token::End) {
      return Lexer::syntax_error_at("unexpected trailing input", cur_.pos);
    }
    return expr;
  }

 private:
  Result<void> advance() {
    auto t = lexer_.next();
    if (!t.ok()) return t.error();
    cur_ = t.take();
    return {};
  }

  bool at_op(std::string_view text) const {
    return cur_.kind == Token::Op && cur_.text == text;
  }

  Result<ExprPtr> parse_or() { return parse_binary_level(1); }

  // Precedence-climbing over the table in binary_precedence().
  Result<ExprPtr> parse_binary_level(int min_prec) {
    if (min_prec > 5) return parse_unary();
    auto lhs = parse_binary_level(min_prec + 1);
    if (!lhs.ok()) return lhs;
    ExprPtr node = lhs.take();
    for (;;) {
      BinaryOp op;
      if (!match_op_at(min_prec, &op)) break;
      if (auto r = advance(); !r.ok()) return r.error();
      auto rhs = parse_binary_level(min_prec + 1);
      if (!rhs.ok()) return rhs;
      node = std::make_shared<const ExprNode>(
          ExprNode{ExprNode::Binary{op, node, rhs.take()}});
    }
    return node;
  }

  bool match_op_at(int prec, BinaryOp* op) const {
    if (cur_.kind != Token::Op) return false;
    static const std::pair<const char*, BinaryOp> table[] = {
        {"||", BinaryOp::Or}, {"&&", BinaryOp::And}, {"==", BinaryOp::Eq},
        {"!=", BinaryOp::Ne}, {"<=", BinaryOp::Le},  {">=", BinaryOp::Ge},
        {"<", BinaryOp::Lt},  {">", BinaryOp::Gt},   {"+", BinaryOp::Add},
        {"-", BinaryOp::Sub}, {"*", BinaryOp::Mul},  {"/", BinaryOp::Div}};
    for (const auto& [text, candidate] : table) {
      if (cur_.text == text && binary_precedence(candidate) == prec) {
        *op = candidate;
        return true;
      }
    }
    return false;
  }

  Result<ExprPtr> parse_unary() {
    if (at_op("!") || at_op("-")) {
      UnaryOp op = at_op("!") ? UnaryOp::Not : UnaryOp::Negate;
      if (auto r = advance(); !r.ok()) return r.error();
      auto operand = parse_unary();
      if (!operand.ok()) return operand;
      return std::make_shared<const ExprNode>(
          ExprNode{ExprNode::Unary{op, operand.take()}});
    }
    return parse_primary();
  }

  Result<ExprPtr> parse_primary() {
    switch (cur_.kind) {
      case Token::Integer: {
        auto node = std::make_shared<const ExprNode>(ExprNode{AttrValue{cur_.int_value}});
        if (auto r = advance(); !r.ok()) return r.error();
        return ExprPtr(node);
      }
      case Token::Real: {
        auto node = std::make_shared<const ExprNode>(ExprNode{AttrValue{cur_.real_value}});
        if (auto r = advance(); !r.ok()) return r.error();
        return ExprPtr(node);
      }
      case Token::String: {
        auto node = std::make_shared<const ExprNode>(ExprNode{AttrValue{cur_.text}});
        if (auto r = advance(); !r.ok()) return r.error();
        return ExprPtr(node);
      }
      case Token::Ident:
        return parse_ident();
      case Token::Op:
        if (cur_.text == "(") {
          if (auto r = advance(); !r.ok()) return r.error();
          auto inner = parse_or();
          if (!inner.ok()) return inner;
          if (!at_op(")")) {
            return Lexer::syntax_error_at("expected ')'", cur_.pos);
          }
          if (auto r = advance(); !r.ok()) return r.error();
          return inner;
        }
        break;
      case Token::End:
        return Lexer::syntax_error_at("unexpected end of input", cur_.pos);
    }
    return Lexer::syntax_error_at("expected literal, attribute or '('", cur_.pos);
  }

  Result<ExprPtr> parse_ident() {
    std::string word = cur_.text;
    size_t word_pos = cur_.pos;
    if (auto r = advance(); !r.ok()) return r.error();
    if (word == "true" || word == "false") {
      return std::make_shared<const ExprNode>(ExprNode{AttrValue{word == "true"}});
    }
    if (word != "job" && word != "machine") {
      return Lexer::syntax_error_at("unknown identifier '" + word +
                                        "' (expected job.<attr>, machine.<attr>, true or false)",
                                    word_pos);
    }
    if (!at_op(".")) {
      return Lexer::syntax_error_at("expected '.' after scope '" + word + "'", cur_.pos);
    }
    if (auto r = advance(); !r.ok()) return r.error();
    if (cur_.kind != Token::Ident) {
      return Lexer::syntax_error_at("expected attribute name", cur_.pos);
    }
    ExprNode::AttrRef ref{word == "job" ? AttrScope::Job : AttrScope::Machine, cur_.text};
    if (auto r = advance(); !r.ok()) return r.error();
    return std::make_shared<const ExprNode>(ExprNode{std::move(ref)});
  }

  Lexer lexer_;
  Token cur_;
};

// --- Evaluation -------------------------------------------------------------

// K3 logic view of a value: 1 true, 0 false, -1 undefined-or-nonbool.
int logic3(const EvalValue& v) {
  if (!v.is_boolean()) return -1;
  return v.as_boolean() ? 1 : 0;
}

EvalValue eval_logical(BinaryOp op, const EvalValue& lhs, const EvalValue& rhs) {
  int a = logic3(lhs), b = logic3(rhs);
  if (op == BinaryOp::And) {
    if (a == 0 || b == 0) return EvalValue(false);
    if (a == 1 && b == 1) return EvalValue(true);
    return EvalValue::undefined();
  }
  if (a == 1 || b == 1) return EvalValue(true);
  if (a == 0 && b == 0) return EvalValue(false);
  return EvalValue::undefined();
}

EvalValue eval_comparison(BinaryOp op, const EvalValue& lhs, const EvalValue& rhs) {
  if (lhs.is_numeric() && rhs.is_numeric()) {
    // Integer pairs compare exactly; mixed pairs coerce to real.
    if (lhs.is_integer() && rhs.is_integer()) {
      std::int64_t a = lhs.as_integer(), b = rhs.as_integer();
      switch (op) {
        case BinaryOp::Eq: return EvalValue(a == b);
        case BinaryOp::Ne: return EvalValue(a != b);
        case BinaryOp::Lt: return EvalValue(a < b);
        case BinaryOp::Le: return EvalValue(a <= b);
        case BinaryOp::Gt: return EvalValue(a > b);
        case BinaryOp::Ge: return EvalValue(a >= b);
        default: break;
      }
    }
    double a = lhs.numeric(), b = rhs.numeric();
    switch (op) {
      case BinaryOp::Eq: return EvalValue(a == b);
      case BinaryOp::Ne: return EvalValue(a != b);
      case BinaryOp::Lt: return EvalValue(a < b);
      case BinaryOp::Le: return EvalValue(a <= b);
      case BinaryOp::Gt: return EvalValue(a > b);
      case BinaryOp::Ge: return EvalValue(a >= b);
      default: break;
    }
  }
  // Strings support exact equality only (case-sensitive).
  if (lhs.is_string() && rhs.is_string()) {
    if (op == BinaryOp::Eq) return EvalValue(lhs.as_string() == rhs.as_string());
    if (op == BinaryOp::Ne) return EvalValue(lhs.as_string() != rhs.as_string());
  }
  if (lhs.is_boolean() && rhs.is_boolean()) {
    if (op == BinaryOp::Eq) return EvalValue(lhs.as_boolean() == rhs.as_boolean());
    if (op == BinaryOp::Ne) return EvalValue(lhs.as_boolean() != rhs.as_boolean());
  }
  return EvalValue::undefined();
}

EvalValue eval_arithmetic(BinaryOp op, const EvalValue& lhs, const EvalValue& rhs) {
  if (!lhs.is_numeric() || !rhs.is_numeric()) return EvalValue::undefined();
  if (lhs.is_integer() && rhs.is_integer()) {
    std::int64_t a = lhs.as_integer(), b = rhs.as_integer(), out = 0;
    switch (op) {
      case BinaryOp::Add:
        if (__builtin_add_overflow(a, b, &out)) return EvalValue::undefined();
        return EvalValue(out);
      case BinaryOp::Sub:
        if (__builtin_sub_overflow(a, b, &out)) return EvalValue::undefined();
        return EvalValue(out);
      case BinaryOp::Mul:
        if (__builtin_mul_overflow(a, b, &out)) return EvalValue::undefined();
        return EvalValue(out);
      case BinaryOp::Div:
        if (b == 0) return EvalValue::undefined();
        if (a == INT64_MIN && b == -1) return EvalValue::undefined();
        return EvalValue(a / b);
      default: break;
    }
  }
  double a = lhs.numeric(), b = rhs.numeric(), out = 0;
  switch (op) {
    case BinaryOp::Add: out = a + b; break;
    case BinaryOp::Sub: out = a - b; break;
    case BinaryOp::Mul: out = a * b; break;
    case BinaryOp::Div:
      if (b == 0) return EvalValue::undefined();
      out = a / b;
      break;
    default: return EvalValue::undefined();
  }
  if (!std::isfinite(out)) return EvalValue::undefined();
  return EvalValue(out);
}

}  // namespace

EvalValue::EvalValue(const AttrValue& attr) {
  std::visit([this](const auto& v) { v_ = v; }, attr);
}

double EvalValue::rank_weight() const {
  if (is_integer()) return static_cast<double>(as_integer());
  if (is_real()) return as_real();
  if (is_boolean()) return as_boolean() ? 1.0 : 0.0;
  return 0.0;
}

std::string EvalValue::to_string() const {
  if (is_undefined()) return "undefined";
  if (is_integer()) return std::to_string(as_integer());
  if (is_real()) return attr_value_to_string(AttrValue{as_real()});
  if (is_boolean()) return as_boolean() ? "true" : "false";
  return escape_string(as_string());
}

std::string attr_value_to_string(const AttrValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) {
    std::ostringstream os;
    os.precision(17);
    os << *d;
    std::string s = os.str();
    // Keep reals syntactically real so the round trip preserves the type.
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
      s += ".0";
    }
    return s;
  }
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return escape_string(std::get<std::string>(v));
}

std::string print_expression(const ExprPtr& node) {
  std::string out;
  print_node(node, out);
  return out;
}

EvalValue evaluate_node(const ExprPtr& node, const AttrMap& job_attrs,
                        const AttrMap& machine_attrs) {
  const ExprNode& n = *node;
  if (const auto* lit = std::get_if<AttrValue>(&n.node)) {
    return EvalValue(*lit);
  }
  if (const auto* ref = std::get_if<ExprNode::AttrRef>(&n.node)) {
    const AttrMap& attrs = ref->scope == AttrScope::Job ? job_attrs : machine_attrs;
    auto it = attrs.find(ref->name);
    if (it == attrs.end()) return EvalValue::undefined();
    return EvalValue(it->second);
  }
  if (const auto* un = std::get_if<ExprNode::Unary>(&n.node)) {
    EvalValue v = evaluate_node(un->operand, job_attrs, machine_attrs);
    if (un->op == UnaryOp::Not) {
      if (!v.is_boolean()) return EvalValue::undefined();
      return EvalValue(!v.as_boolean());
    }
    if (v.is_integer()) {
      if (v.as_integer() == INT64_MIN) return EvalValue::undefined();
      return EvalValue(-v.as_integer());
    }
    if (v.is_real()) return EvalValue(-v.as_real());
    return EvalValue::undefined();
  }
  const auto& bin = std::get<ExprNode::Binary>(n.node);
  EvalValue lhs = evaluate_node(bin.lhs, job_attrs, machine_attrs);
  EvalValue rhs = evaluate_node(bin.rhs, job_attrs, machine_attrs);
  switch (bin.op) {
    case BinaryOp::Or:
    case BinaryOp::And:
      return eval_logical(bin.op, lhs, rhs);
    case BinaryOp::Eq:
    case BinaryOp::Ne:
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge:
      if (lhs.is_undefined() || rhs.is_undefined()) return EvalValue::undefined();
      return eval_comparison(bin.op, lhs, rhs);
    default:
      if (lhs.is_undefined() || rhs.is_undefined()) return EvalValue::undefined();
      return eval_arithmetic(bin.op, lhs, rhs);
  }
}

Expression::Expression() {
  static const Expression kTrue = literal_true();
  root_ = kTrue.root_;
  text_ = kTrue.text_;
}

Expression Expression::literal_true() {
  auto node = std::make_shared<const ExprNode>(ExprNode{AttrValue{true}});
  return Expression(node, "true");
}

Result<Expression> Expression::parse(std::string_view text) {
  Parser parser(text);
  auto root = parser.parse();
  if (!root.ok()) return root.error();
  ExprPtr node = root.take();
  std::string canonical = print_expression(node);
  return Expression(std::move(node), std::move(canonical));
}

EvalValue Expression::evaluate(const AttrMap& job_attrs,
                               const AttrMap& machine_attrs) const {
  return evaluate_node(root_, job_attrs, machine_attrs);
}

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::key_conflict: return "key-conflict";
    case Errc::invariant_violation: return "invariant-violation";
    case Errc::corrupt_journal: return "corrupt-journal";
    case Errc::io_error: return "io-error";
    case Errc::syntax_error: return "syntax-error";
    case Errc::not_found: return "not-found";
    case Errc::already_terminal: return "already-terminal";
    case Errc::validation: return "validation-error";
    case Errc::bad_filter: return "bad-filter";
    case Errc::illegal_transition: return "illegal-transition";
    case Errc::unavailable: return "service-unavailable";
  }
  return "unknown";
}

std::string Error::to_string() const {
  return std::string(errc_name(code)) + ": " + message;
}

}  // namespace corral
