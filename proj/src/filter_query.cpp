// Copyright (C) 2026 The Filtra Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#include "filtra/filter_query.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>

#include "filtra/error.hpp"

namespace filtra {

FilterExpr FilterExpr::make_leaf(std::uint64_t feature_id, std::uint64_t value) {
  FilterExpr e;
  e.kind = Kind::kLeaf;
  e.leaf = {feature_id, value};
  return e;
}

FilterExpr FilterExpr::make_and(std::vector<FilterExpr> children) {
  FilterExpr e;
  e.kind = Kind::kAnd;
  e.children = std::move(children);
  return e;
}

FilterExpr FilterExpr::make_or(std::vector<FilterExpr> children) {
  FilterExpr e;
  e.kind = Kind::kOr;
  e.children = std::move(children);
  return e;
}

FilterExpr FilterExpr::make_not(FilterExpr child) {
  FilterExpr e;
  e.kind = Kind::kNot;
  e.children.push_back(std::move(child));
  return e;
}

bool FilterExpr::contains_not() const {
  if (kind == Kind::kNot) return true;
  return std::any_of(children.begin(), children.end(), [](const FilterExpr& c) { return c.contains_not(); });
}

namespace {

struct Token {
  enum class Type { kIdent, kString, kNumber, kEq, kLParen, kRParen, kAnd, kOr, kNot, kEnd };
  Type type = Type::kEnd;
  std::string text;
  std::size_t pos = 0;
};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
         });
}

Error syntax_error(std::size_t pos, const std::string& what) {
  return Error(ErrorCode::kSyntaxError, "at " + std::to_string(pos) + ": " + what, {static_cast<std::int64_t>(pos)});
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto is_ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-'; };
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (c == '=') {
      t.type = Token::Type::kEq;
      ++i;
    } else if (c == '(') {
      t.type = Token::Type::kLParen;
      ++i;
    } else if (c == ')') {
      t.type = Token::Type::kRParen;
      ++i;
    } else if (c == '"') {
      t.type = Token::Type::kString;
      ++i;
      bool closed = false;
      while (i < s.size()) {
        if (s[i] == '\\' && i + 1 < s.size()) {
          t.text.push_back(s[i + 1]);
          i += 2;
        } else if (s[i] == '"') {
          ++i;
          closed = true;
          break;
        } else {
          t.text.push_back(s[i++]);
        }
      }
      if (!closed) throw syntax_error(t.pos, "unterminated string");
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      t.type = Token::Type::kNumber;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) t.text.push_back(s[i++]);
    } else if (is_ident_start(c)) {
      while (i < s.size() && is_ident(s[i])) t.text.push_back(s[i++]);
      if (iequals(t.text, "AND")) {
        t.type = Token::Type::kAnd;
      } else if (iequals(t.text, "OR")) {
        t.type = Token::Type::kOr;
      } else if (iequals(t.text, "NOT")) {
        t.type = Token::Type::kNot;
      } else {
        t.type = Token::Type::kIdent;
      }
    } else {
      throw syntax_error(i, std::string("unexpected character '") + c + "'");
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.type = Token::Type::kEnd;
  end.pos = s.size();
  out.push_back(end);
  return out;
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, const FeatureSchema& schema) : tokens_(std::move(tokens)), schema_(schema) {}

  FilterExpr parse() {
    FilterExpr e = expr();
    if (peek().type != Token::Type::kEnd) throw syntax_error(peek().pos, "trailing input");
    return e;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() { return tokens_[pos_++]; }

  FilterExpr expr() {
    std::vector<FilterExpr> terms;
    terms.push_back(or_term());
    while (peek().type == Token::Type::kAnd) {
      next();
      terms.push_back(or_term());
    }
    return terms.size() == 1 ? std::move(terms[0]) : FilterExpr::make_and(std::move(terms));
  }

  FilterExpr or_term() {
    std::vector<FilterExpr> factors;
    factors.push_back(factor());
    while (peek().type == Token::Type::kOr) {
      next();
      factors.push_back(factor());
    }
    return factors.size() == 1 ? std::move(factors[0]) : FilterExpr::make_or(std::move(factors));
  }

  FilterExpr factor() {
    if (peek().type == Token::Type::kNot) {
      next();
      return FilterExpr::make_not(primary());
    }
    return primary();
  }

  FilterExpr primary() {
    if (peek().type == Token::Type::kLParen) {
      next();
      FilterExpr e = expr();
      if (peek().type != Token::Type::kRParen) throw syntax_error(peek().pos, "expected ')'");
      next();
      return e;
    }
    return leaf();
  }

  FilterExpr leaf() {
    const Token& name = next();
    if (name.type != Token::Type::kIdent) throw syntax_error(name.pos, "expected feature name");
    const auto fid = schema_.feature_id(name.text);
    if (!fid) throw Error(ErrorCode::kUnknownFeature, name.text, {static_cast<std::int64_t>(name.pos)});
    if (next().type != Token::Type::kEq) throw syntax_error(tokens_[pos_ - 1].pos, "expected '='");
    const Token& val = next();
    if (val.type == Token::Type::kNumber) {
      std::uint64_t v = 0;
      const auto res = std::from_chars(val.text.data(), val.text.data() + val.text.size(), v);
      if (res.ec != std::errc{}) throw syntax_error(val.pos, "value out of range");
      return FilterExpr::make_leaf(*fid, v);
    }
    if (val.type == Token::Type::kString) {
      const auto v = schema_.value_id(*fid, val.text);
      if (!v) throw Error(ErrorCode::kUnknownValue, name.text + "=\"" + val.text + "\"", {static_cast<std::int64_t>(val.pos)});
      return FilterExpr::make_leaf(*fid, *v);
    }
    throw syntax_error(val.pos, "expected value");
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const FeatureSchema& schema_;
};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void print(const FilterExpr& e, const FeatureSchema& schema, std::string& out) {
  using Kind = FilterExpr::Kind;
  auto child = [&](const FilterExpr& c, bool parens) {
    if (parens) out.push_back('(');
    print(c, schema, out);
    if (parens) out.push_back(')');
  };
  switch (e.kind) {
    case Kind::kLeaf: {
      const auto name = schema.names.find(e.leaf.feature_id);
      if (name == schema.names.end()) {
        throw Error(ErrorCode::kUnknownFeature, "feature " + std::to_string(e.leaf.feature_id) + " has no name");
      }
      out += name->second;
      out += " = ";
      const auto text = schema.value_text(e.leaf.feature_id, e.leaf.value);
      out += text ? quote(*text) : std::to_string(e.leaf.value);
      break;
    }
    case Kind::kAnd:
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += " AND ";
        child(e.children[i], e.children[i].kind == Kind::kAnd);
      }
      break;
    case Kind::kOr:
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += " OR ";
        child(e.children[i], e.children[i].kind == Kind::kAnd || e.children[i].kind == Kind::kOr);
      }
      break;
    case Kind::kNot:
      out += "NOT ";
      child(e.children[0], e.children[0].kind != Kind::kLeaf);
      break;
  }
}

void emit(const FilterExpr& e, const BloomParams& params, std::map<FeatureValue, std::uint32_t>& leaf_ids,
          CompiledFilter& cf) {
  using Kind = FilterExpr::Kind;
  using Code = FilterOp::Code;
  switch (e.kind) {
    case Kind::kLeaf: {
      auto [it, inserted] = leaf_ids.try_emplace(e.leaf, static_cast<std::uint32_t>(cf.leaves.size()));
      if (inserted) cf.leaves.push_back({e.leaf, hash_positions(e.leaf.feature_id, e.leaf.value, params)});
      cf.ops.push_back({Code::kPushLeaf, it->second});
      break;
    }
    case Kind::kAnd:
    case Kind::kOr: {
      if (e.children.empty()) throw Error(ErrorCode::kInvalidSpec, "empty AND/OR");
      const Code code = e.kind == Kind::kAnd ? Code::kAnd : Code::kOr;
      emit(e.children[0], params, leaf_ids, cf);
      for (std::size_t i = 1; i < e.children.size(); ++i) {
        emit(e.children[i], params, leaf_ids, cf);
        cf.ops.push_back({code, 0});
      }
      break;
    }
    case Kind::kNot:
      if (e.children.size() != 1) throw Error(ErrorCode::kInvalidSpec, "NOT takes one child");
      emit(e.children[0], params, leaf_ids, cf);
      cf.ops.push_back({Code::kNot, 0});
      break;
  }
}

}  // namespace

FilterExpr parse_filter(std::string_view text, const FeatureSchema& schema) {
  return Parser(tokenize(text), schema).parse();
}

std::string to_string(const FilterExpr& expr, const FeatureSchema& schema) {
  std::string out;
  print(expr, schema, out);
  return out;
}

std::optional<std::size_t> check_stack_balance(std::span<const FilterOp> ops, std::size_t n_leaves) {
  std::size_t depth = 0;
  std::size_t peak = 0;
  for (const auto& op : ops) {
    switch (op.code) {
      case FilterOp::Code::kPushLeaf:
        if (op.leaf >= n_leaves) return std::nullopt;
        ++depth;
        break;
      case FilterOp::Code::kAnd:
      case FilterOp::Code::kOr:
        if (depth < 2) return std::nullopt;
        --depth;
        break;
      case FilterOp::Code::kNot:
        if (depth < 1) return std::nullopt;
        break;
    }
    peak = std::max(peak, depth);
  }
  if (depth != 1) return std::nullopt;
  return peak;
}

CompiledFilter compile_filter(const FilterExpr& expr, const BloomParams& params) {
  CompiledFilter cf;
  std::map<FeatureValue, std::uint32_t> leaf_ids;
  emit(expr, params, leaf_ids, cf);
  cf.max_stack_depth = check_stack_balance(cf.ops, cf.leaves.size()).value();
  return cf;
}

Bitmask eval_compiled(const CompiledFilter& cf, const BloomIndex& index, const Bitmask& valid,
                      std::span<const WordRange> ranges, FilterEvalStats* stats, kernels::Exec exec) {
  std::size_t total_words = 0;
  for (const auto& r : ranges) total_words += r.end - r.begin;

  // Compact scratch: word j of a stack mask is global word word_of[j].
  std::vector<std::uint64_t> valid_c;
  valid_c.reserve(total_words);
  for (const auto& r : ranges) valid_c.insert(valid_c.end(), valid.words().begin() + static_cast<std::ptrdiff_t>(r.begin),
                                              valid.words().begin() + static_cast<std::ptrdiff_t>(r.end));

  std::vector<std::vector<std::uint64_t>> stack;
  std::vector<std::vector<std::uint64_t>> pool;
  auto acquire = [&]() {
    if (!pool.empty()) {
      auto m = std::move(pool.back());
      pool.pop_back();
      return m;
    }
    return std::vector<std::uint64_t>(total_words);
  };

  std::size_t words_read = 0;
  std::size_t peak_live = 0;
  for (const auto& op : cf.ops) {
    switch (op.code) {
      case FilterOp::Code::kPushLeaf: {
        auto m = acquire();
        const auto& bits = cf.leaves[op.leaf].bloom.set_bits;
        std::size_t off = 0;
        for (const auto& r : ranges) {
          kernels::and_planes(index.planes.data(), index.words_per_plane, bits, r.begin, r.end, m.data() + off, exec);
          off += r.end - r.begin;
        }
        words_read += bits.size() * total_words;
        stack.push_back(std::move(m));
        break;
      }
      case FilterOp::Code::kAnd:
      case FilterOp::Code::kOr: {
        auto rhs = std::move(stack.back());
        stack.pop_back();
        auto& lhs = stack.back();
        if (op.code == FilterOp::Code::kAnd) {
          for (std::size_t j = 0; j < total_words; ++j) lhs[j] &= rhs[j];
        } else {
          for (std::size_t j = 0; j < total_words; ++j) lhs[j] |= rhs[j];
        }
        pool.push_back(std::move(rhs));
        break;
      }
      case FilterOp::Code::kNot: {
        auto& top = stack.back();
        for (std::size_t j = 0; j < total_words; ++j) top[j] = ~top[j] & valid_c[j];
        break;
      }
    }
    peak_live = std::max(peak_live, stack.size());
  }

  Bitmask out(valid.size());
  auto words = out.words();
  const auto& result = stack.back();
  std::size_t off = 0;
  for (const auto& r : ranges) {
    for (std::size_t w = r.begin; w < r.end; ++w, ++off) words[w] = result[off] & valid_c[off];
  }
  if (stats) {
    stats->evaluated_slots = total_words * 64;
    stats->plane_words_read = words_read;
    stats->scratch_words = peak_live * total_words;
  }
  return out;
}

Bitmask eval_compiled(const CompiledFilter& cf, const BloomIndex& index, const Bitmask& valid, FilterEvalStats* stats) {
  const WordRange all{0, index.words_per_plane};
  return eval_compiled(cf, index, valid, std::span(&all, 1), stats);
}

}  // namespace filtra
