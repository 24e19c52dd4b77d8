#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>

#include "corral/result.hpp"

namespace corral {

// Scalar attribute value as stored on jobs and machines. No nested structures.
using AttrValue = std::variant<std::int64_t, double, bool, std::string>;
using AttrMap = std::map<std::string, AttrValue>;

// Result of evaluating an expression. UNDEFINED absorbs missing attributes,
// type mismatches, and arithmetic errors (division by zero, overflow).
class EvalValue {
 public:
  struct Undefined {
    bool operator==(const Undefined&) const = default;
  };

  EvalValue() : v_(Undefined{}) {}
  EvalValue(std::int64_t i) : v_(i) {}
  EvalValue(double d) : v_(d) {}
  EvalValue(bool b) : v_(b) {}
  EvalValue(std::string s) : v_(std::move(s)) {}
  EvalValue(const AttrValue& attr);

  static EvalValue undefined() { return EvalValue(); }

  bool is_undefined() const { return std::holds_alternative<Undefined>(v_); }
  bool is_integer() const { return std::holds_alternative<std::int64_t>(v_); }
  bool is_real() const { return std::holds_alternative<double>(v_); }
  bool is_boolean() const { return std::holds_alternative<bool>(v_); }
  bool is_string() const { return std::holds_alternative<std::string>(v_); }
  bool is_numeric() const { return is_integer() || is_real(); }

  std::int64_t as_integer() const { return std::get<std::int64_t>(v_); }
  double as_real() const { return std::get<double>(v_); }
  bool as_boolean() const { return std::get<bool>(v_); }
  const std::string& as_string() const { return std::get<std::string>(v_); }

  // Numeric view for mixed-type comparison/arithmetic.
  double numeric() const {
    return is_integer() ? static_cast<double>(as_integer()) : as_real();
  }

  // TRUE exactly when the value is boolean true. Used for requirements.
  bool is_true() const { return is_boolean() && as_boolean(); }
  bool is_false() const { return is_boolean() && !as_boolean(); }

  // Rank coercion: numerics as-is, booleans 1/0, everything else 0.
  double rank_weight() const;

  bool operator==(const EvalValue&) const = default;

  std::string to_string() const;

 private:
  std::variant<Undefined, std::int64_t, double, bool, std::string> v_;
};

enum class UnaryOp { Not, Negate };
enum class BinaryOp { Or, And, Eq, Ne, Lt, Le, Gt, Ge, Add, Sub, Mul, Div };
enum class AttrScope { Job, Machine };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  struct AttrRef {
    AttrScope scope;
    std::string name;
  };
  struct Unary {
    UnaryOp op;
    ExprPtr operand;
  };
  struct Binary {
    BinaryOp op;
    ExprPtr lhs;
    ExprPtr rhs;
  };

  std::variant<AttrValue, AttrRef, Unary, Binary> node;
};

// An immutable attribute expression over `job.<name>` / `machine.<name>`
// references, evaluated with three-valued logic.
//
// Grammar (precedence low to high):
//   or    := and ('||' and)*
//   and   := cmp ('&&' cmp)*
//   cmp   := add (('=='|'!='|'<'|'<='|'>'|'>=') add)*
//   add   := mul (('+'|'-') mul)*
//   mul   := unary (('*'|'/') unary)*
//   unary := ('!'|'-') unary | primary
//   primary := integer | real | 'true' | 'false' | string | attr | '(' or ')'
//   attr  := ('job'|'machine') '.' identifier
class Expression {
 public:
  // Default-constructed expression is the literal `true`.
  Expression();

  static Result<Expression> parse(std::string_view text);
  static Expression literal_true();

  // Canonical printed form; parse(text()) reproduces the same tree.
  const std::string& text() const { return text_; }
  const ExprPtr& root() const { return root_; }

  EvalValue evaluate(const AttrMap& job_attrs, const AttrMap& machine_attrs) const;

  bool operator==(const Expression& other) const { return text_ == other.text_; }

 private:
  Expression(ExprPtr root, std::string text)
      : root_(std::move(root)), text_(std::move(text)) {}

  ExprPtr root_;
  std::string text_;
};

// Canonical rendering of an AST (minimal parentheses).
std::string print_expression(const ExprPtr& node);

// Evaluation entry point on a raw AST node.
EvalValue evaluate_node(const ExprPtr& node, const AttrMap& job_attrs,
                        const AttrMap& machine_attrs);

std::string attr_value_to_string(const AttrValue& v);

}  // namespace corral
