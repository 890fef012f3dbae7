#include "uacl/reward_dsl.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <utility>

#include "uacl/errors.hpp"

namespace uacl {

namespace {

constexpr std::size_t kMaxLen = 1024;
constexpr int kMaxDepth = 32;

struct NameEntry {
  Primitive prim;
  const char* name;
};

constexpr NameEntry kNames[] = {
    {Primitive::SumConnected, "sum_connected"},
    {Primitive::Persistence, "persistence"},
    {Primitive::SumQoe, "sum_qoe"},
    {Primitive::MeanQoe, "mean_qoe"},
    {Primitive::ConnectedUeFraction, "connected_ue_fraction"},
    {Primitive::MeanSinrDb, "mean_sinr_db"},
};

}  // namespace

const char* primitive_name(Primitive p) {
  for (const auto& e : kNames)
    if (e.prim == p) return e.name;
  return "?";
}

std::optional<Primitive> primitive_from_name(std::string_view name) {
  for (const auto& e : kNames)
    if (name == e.name) return e.prim;
  return std::nullopt;
}

const std::vector<Primitive>& all_primitives() {
  static const std::vector<Primitive> prims = [] {
    std::vector<Primitive> v;
    for (const auto& e : kNames) v.push_back(e.prim);
    return v;
  }();
  return prims;
}

double eval_primitive(Primitive p, const NetworkState& state) {
  int m = state.num_ues();
  int n = state.num_bs();
  switch (p) {
    case Primitive::SumConnected: {
      double s = 0.0;
      for (auto b : state.assoc.data) s += b;
      return s;
    }
    case Primitive::Persistence: {
      double s = 0.0;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          s += state.assoc(i, j) * state.prev_assoc(i, j);
      return s;
    }
    case Primitive::SumQoe: {
      double s = 0.0;
      for (double q : state.qoe.data) s += q;
      return s;
    }
    case Primitive::MeanQoe: {
      double s = 0.0;
      for (double q : state.qoe.data) s += q;
      return s / m;
    }
    case Primitive::ConnectedUeFraction:
      return fraction_connected(state);
    case Primitive::MeanSinrDb: {
      double s = 0.0;
      int count = 0;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          if (state.assoc(i, j)) {
            double lin = std::max(state.sinr(i, j), 1e-30);
            s += 10.0 * std::log10(lin);
            ++count;
          }
      return count ? s / count : 0.0;
    }
  }
  return 0.0;
}

namespace {

double eval_node(const ExprNode& node, const NetworkState& state,
                 EvalStats* stats) {
  switch (node.kind) {
    case ExprNode::Kind::Constant:
      return node.value;
    case ExprNode::Kind::Primitive:
      return eval_primitive(node.prim, state);
    case ExprNode::Kind::Add:
      return eval_node(*node.lhs, state, stats) +
             eval_node(*node.rhs, state, stats);
    case ExprNode::Kind::Sub:
      return eval_node(*node.lhs, state, stats) -
             eval_node(*node.rhs, state, stats);
    case ExprNode::Kind::Mul:
      return eval_node(*node.lhs, state, stats) *
             eval_node(*node.rhs, state, stats);
    case ExprNode::Kind::Div: {
      double num = eval_node(*node.lhs, state, stats);
      double den = eval_node(*node.rhs, state, stats);
      if (std::fabs(den) < 1e-12) {
        if (stats)
          stats->div_by_zero += 1;
        else
          std::fprintf(stderr,
                       "uacl: reward expression divided by ~0, yielding 0\n");
        return 0.0;
      }
      return num / den;
    }
    case ExprNode::Kind::Neg:
      return -eval_node(*node.lhs, state, stats);
    case ExprNode::Kind::Paren:
      return eval_node(*node.lhs, state, stats);
  }
  return 0.0;
}

bool node_equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprNode::Kind::Constant:
      return a->value == b->value;
    case ExprNode::Kind::Primitive:
      return a->prim == b->prim;
    case ExprNode::Kind::Neg:
    case ExprNode::Kind::Paren:
      return node_equal(a->lhs, b->lhs);
    default:
      return node_equal(a->lhs, b->lhs) && node_equal(a->rhs, b->rhs);
  }
}

void print_node(const ExprNode& node, std::string& out) {
  switch (node.kind) {
    case ExprNode::Kind::Constant: {
      char buf[32];
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), node.value);
      out.append(buf, p);
      break;
    }
    case ExprNode::Kind::Primitive:
      out += primitive_name(node.prim);
      out += "()";
      break;
    case ExprNode::Kind::Add:
      print_node(*node.lhs, out);
      out += " + ";
      print_node(*node.rhs, out);
      break;
    case ExprNode::Kind::Sub:
      print_node(*node.lhs, out);
      out += " - ";
      print_node(*node.rhs, out);
      break;
    case ExprNode::Kind::Mul:
      print_node(*node.lhs, out);
      out += " * ";
      print_node(*node.rhs, out);
      break;
    case ExprNode::Kind::Div:
      print_node(*node.lhs, out);
      out += " / ";
      print_node(*node.rhs, out);
      break;
    case ExprNode::Kind::Neg:
      out += '-';
      print_node(*node.lhs, out);
      break;
    case ExprNode::Kind::Paren:
      out += '(';
      print_node(*node.lhs, out);
      out += ')';
      break;
  }
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  RewardExpr run() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError(pos_, "empty input");
    ExprPtr root = expr(0);
    skip_ws();
    if (pos_ < text_.size())
      throw ParseError(pos_, "trailing input after expression");
    return RewardExpr::from_root(std::move(root));
  }

 private:
  ExprPtr expr(int depth) {
    check_depth(depth);
    ExprPtr lhs = term(depth + 1);
    for (;;) {
      skip_ws();
      if (peek() == '+' || peek() == '-') {
        char op = text_[pos_++];
        ExprPtr rhs = term(depth + 1);
        auto node = std::make_shared<ExprNode>();
        node->kind =
            op == '+' ? ExprNode::Kind::Add : ExprNode::Kind::Sub;
        node->lhs = std::move(lhs);
        node->rhs = std::move(rhs);
        lhs = std::move(node);
      } else {
        return lhs;
      }
    }
  }

  ExprPtr term(int depth) {
    check_depth(depth);
    ExprPtr lhs = factor(depth + 1);
    for (;;) {
      skip_ws();
      if (peek() == '*' || peek() == '/') {
        char op = text_[pos_++];
        ExprPtr rhs = factor(depth + 1);
        auto node = std::make_shared<ExprNode>();
        node->kind =
            op == '*' ? ExprNode::Kind::Mul : ExprNode::Kind::Div;
        node->lhs = std::move(lhs);
        node->rhs = std::move(rhs);
        lhs = std::move(node);
      } else {
        return lhs;
      }
    }
  }

  ExprPtr factor(int depth) {
    check_depth(depth);
    skip_ws();
    char c = peek();
    if (c == '-') {
      ++pos_;
      auto node = std::make_shared<ExprNode>();
      node->kind = ExprNode::Kind::Neg;
      node->lhs = factor(depth + 1);
      return node;
    }
    if (c == '(') {
      ++pos_;
      auto node = std::make_shared<ExprNode>();
      node->kind = ExprNode::Kind::Paren;
      node->lhs = expr(depth + 1);
      skip_ws();
      if (peek() != ')') throw ParseError(pos_, "expected ')'");
      ++pos_;
      return node;
    }
    if (c >= '0' && c <= '9') return number();
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_')
      return primitive_call();
    throw ParseError(pos_, pos_ >= text_.size()
                               ? "unexpected end of input"
                               : "unexpected character");
  }

  ExprPtr number() {
    std::size_t start = pos_;
    while (is_digit(peek())) ++pos_;
    if (peek() == '.') {
      ++pos_;
      while (is_digit(peek())) ++pos_;
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t mark = pos_;
      ++pos_;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (!is_digit(peek())) {
        pos_ = mark;  // 'e' belongs to something else; let the caller choke
      } else {
        while (is_digit(peek())) ++pos_;
      }
    }
    double value = 0.0;
    auto [p, ec] = std::from_chars(text_.data() + start, text_.data() + pos_,
                                   value);
    if (ec != std::errc{} || p != text_.data() + pos_)
      throw ParseError(start, "malformed number");
    auto node = std::make_shared<ExprNode>();
    node->kind = ExprNode::Kind::Constant;
    node->value = value;
    return node;
  }

  ExprPtr primitive_call() {
    std::size_t start = pos_;
    while (is_ident_char(peek())) ++pos_;
    std::string_view name = text_.substr(start, pos_ - start);
    auto prim = primitive_from_name(name);
    if (!prim)
      throw ParseError(start,
                       "unknown primitive \"" + std::string(name) + "\"");
    skip_ws();
    if (peek() != '(') throw ParseError(pos_, "expected '(' after primitive");
    ++pos_;
    skip_ws();
    if (peek() != ')')
      throw ParseError(pos_, "primitives take no arguments; expected ')'");
    ++pos_;
    auto node = std::make_shared<ExprNode>();
    node->kind = ExprNode::Kind::Primitive;
    node->prim = *prim;
    return node;
  }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || is_digit(c) ||
           c == '_';
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
            text_[pos_] == '\r'))
      ++pos_;
  }

  void check_depth(int depth) const {
    if (depth > kMaxDepth) throw ParseError(pos_, "expression nested too deep");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

double RewardExpr::eval(const NetworkState& state, EvalStats* stats) const {
  if (!root_) throw InvariantError("eval of an empty reward expression");
  return eval_node(*root_, state, stats);
}

std::string RewardExpr::str() const {
  std::string out;
  if (root_) print_node(*root_, out);
  return out;
}

bool operator==(const RewardExpr& a, const RewardExpr& b) {
  return node_equal(a.root_, b.root_);
}

RewardExpr parse_reward(std::string_view text) {
  if (text.empty()) throw ParseError(0, "empty input");
  if (text.size() > kMaxLen)
    throw ParseError(kMaxLen, "expression longer than 1024 bytes");
  return Parser(text).run();
}

std::string to_string(const RewardExpr& expr) { return expr.str(); }

}  // namespace uacl
