#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uacl/sim.hpp"

namespace uacl {

// Aggregate-level reward primitives. Deliberately no per-index access: every
// primitive is total over any valid state and shape-agnostic across stages.
enum class Primitive {
  SumConnected,         // sum_ij x_ij(t)
  Persistence,          // sum_ij x_ij(t) * x_ij(t-1)
  SumQoe,               // sum_ij Q_ij(t)
  MeanQoe,              // sum_qoe / M
  ConnectedUeFraction,  // (#UEs with >= 1 connection) / M
  MeanSinrDb,           // mean of 10*log10(sinr) over connected pairs, 0 if none
};

const char* primitive_name(Primitive p);
std::optional<Primitive> primitive_from_name(std::string_view name);
const std::vector<Primitive>& all_primitives();

double eval_primitive(Primitive p, const NetworkState& state);

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  enum class Kind { Constant, Primitive, Add, Sub, Mul, Div, Neg, Paren };
  Kind kind;
  double value = 0.0;               // Constant
  uacl::Primitive prim{};           // Primitive
  ExprPtr lhs;                      // binary ops; Neg/Paren operand
  ExprPtr rhs;                      // binary ops only
};

struct EvalStats {
  int div_by_zero = 0;
};

// Immutable reward expression. Parse once, evaluate anywhere; evaluation is
// pure and total (division by ~0 yields 0, counted in EvalStats and warned
// on stderr when no stats sink is given).
class RewardExpr {
 public:
  RewardExpr() = default;

  double eval(const NetworkState& state, EvalStats* stats = nullptr) const;
  std::string str() const;
  bool empty() const { return root_ == nullptr; }
  const ExprPtr& root() const { return root_; }

  friend bool operator==(const RewardExpr& a, const RewardExpr& b);

  static RewardExpr from_root(ExprPtr root) {
    RewardExpr e;
    e.root_ = std::move(root);
    return e;
  }

 private:
  ExprPtr root_;
};

// Recursive-descent parse of:
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := NUMBER | IDENT '(' ')' | '(' expr ')' | '-' factor
// Input capped at 1024 bytes and nesting depth 32 (LLM output is untrusted).
// Throws ParseError with a byte offset on any malformed input.
RewardExpr parse_reward(std::string_view text);

std::string to_string(const RewardExpr& expr);

}  // namespace uacl
