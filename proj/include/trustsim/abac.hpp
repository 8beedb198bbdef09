#pragma once

// Attribute-based access control evaluated through an encryption backend.
//
// Pipeline: decision = decrypt(eval(policy, encrypt(attributes))). The default
// backend is a simulated scheme: payloads are blinded with a keyed per-message
// stream and evaluated by an internal plaintext engine. It reproduces the
// pipeline's semantics, not its cryptographic strength.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trustsim/random.hpp"

namespace trustsim::abac {

class PolicyError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

namespace role_code {
inline constexpr std::int64_t kObserver  = 0;
inline constexpr std::int64_t kValidator = 1;
inline constexpr std::int64_t kDelegate  = 2;
}  // namespace role_code

struct AttributeDecl
{
  std::string  name;
  std::int64_t min;
  std::int64_t max;
};

/// Declared attribute names and their admissible integer ranges.
class AttributeSchema
{
public:
  AttributeSchema() = default;
  explicit AttributeSchema(std::vector<AttributeDecl> decls) : decls_{std::move(decls)} {}

  static AttributeSchema standard()
  {
    return AttributeSchema{{
        {"trust", 0, 100},
        {"role", 0, 7},
        {"clearance", 0, 10},
        {"permissions", 0, 255},
    }};
  }

  AttributeDecl const *find(std::string_view name) const noexcept
  {
    auto it = std::find_if(decls_.begin(), decls_.end(), [&](auto const &d) { return d.name == name; });
    return it == decls_.end() ? nullptr : &*it;
  }

  std::vector<AttributeDecl> const &decls() const noexcept { return decls_; }

private:
  std::vector<AttributeDecl> decls_;
};

/// Named integer attributes; names are unique (set() overwrites).
class AttributeSet
{
public:
  AttributeSet() = default;
  AttributeSet(std::initializer_list<std::pair<std::string, std::int64_t>> init)
  {
    for (auto const &[k, v] : init)
    {
      set(k, v);
    }
  }

  AttributeSet &set(std::string const &name, std::int64_t value)
  {
    auto it = std::lower_bound(items_.begin(), items_.end(), name,
                               [](auto const &item, std::string const &n) { return item.first < n; });
    if (it != items_.end() && it->first == name)
    {
      it->second = value;
    }
    else
    {
      items_.insert(it, {name, value});
    }
    return *this;
  }

  std::optional<std::int64_t> get(std::string_view name) const
  {
    auto it = std::lower_bound(items_.begin(), items_.end(), name,
                               [](auto const &item, std::string_view n) { return item.first < n; });
    if (it != items_.end() && it->first == name)
    {
      return it->second;
    }
    return std::nullopt;
  }

  bool        empty() const noexcept { return items_.empty(); }
  std::size_t size() const noexcept { return items_.size(); }

  std::vector<std::pair<std::string, std::int64_t>> const &items() const noexcept { return items_; }

  /// Throws PolicyError when empty, undeclared or out of range.
  void validate(AttributeSchema const &schema) const
  {
    if (items_.empty())
    {
      throw PolicyError("attribute set is empty");
    }
    for (auto const &[name, value] : items_)
    {
      auto const *decl = schema.find(name);
      if (decl == nullptr)
      {
        throw PolicyError("undeclared attribute '" + name + "'");
      }
      if (value < decl->min || value > decl->max)
      {
        throw PolicyError("attribute '" + name + "' out of range");
      }
    }
  }

  friend bool operator==(AttributeSet const &, AttributeSet const &) = default;

private:
  std::vector<std::pair<std::string, std::int64_t>> items_;
};

/// Trust in (0,1) mapped onto [0,100]; floor keeps "trust >= 45" equivalent to tau >= 0.45.
inline std::int64_t quantize_trust(double tau) noexcept
{
  double const q = std::floor(tau * 100.0 + 1e-9);
  return static_cast<std::int64_t>(std::clamp(q, 0.0, 100.0));
}

// ---------------------------------------------------------------------------
// Policy expression trees

enum class Compare
{
  Ge,
  Gt,
  Le,
  Lt,
  Eq
};

struct PolicyNode
{
  enum class Kind
  {
    Leaf,
    And,
    Or
  };

  Kind                    kind{Kind::Leaf};
  std::string             attribute;
  Compare                 op{Compare::Eq};
  std::int64_t            value{0};
  std::vector<PolicyNode> children;

  static PolicyNode leaf(std::string attr, Compare op, std::int64_t v)
  {
    PolicyNode n;
    n.kind      = Kind::Leaf;
    n.attribute = std::move(attr);
    n.op        = op;
    n.value     = v;
    return n;
  }

  static PolicyNode both(PolicyNode a, PolicyNode b)
  {
    PolicyNode n;
    n.kind = Kind::And;
    n.children.push_back(std::move(a));
    n.children.push_back(std::move(b));
    return n;
  }

  static PolicyNode either(PolicyNode a, PolicyNode b)
  {
    PolicyNode n;
    n.kind = Kind::Or;
    n.children.push_back(std::move(a));
    n.children.push_back(std::move(b));
    return n;
  }

  std::size_t depth() const
  {
    std::size_t d = 0;
    for (auto const &c : children)
    {
      d = std::max(d, c.depth());
    }
    return d + 1;
  }
};

inline bool compare(std::int64_t lhs, Compare op, std::int64_t rhs) noexcept
{
  switch (op)
  {
  case Compare::Ge:
    return lhs >= rhs;
  case Compare::Gt:
    return lhs > rhs;
  case Compare::Le:
    return lhs <= rhs;
  case Compare::Lt:
    return lhs < rhs;
  case Compare::Eq:
    return lhs == rhs;
  }
  return false;
}

inline std::string_view to_string(Compare op) noexcept
{
  switch (op)
  {
  case Compare::Ge:
    return ">=";
  case Compare::Gt:
    return ">";
  case Compare::Le:
    return "<=";
  case Compare::Lt:
    return "<";
  case Compare::Eq:
    return "==";
  }
  return "?";
}

class Policy
{
public:
  explicit Policy(PolicyNode root) : root_{std::move(root)} {}

  PolicyNode const &root() const noexcept { return root_; }

  /// Every leaf must name an attribute declared in `schema`.
  void check(AttributeSchema const &schema) const { check_node(root_, schema); }

  std::string to_string() const
  {
    std::string out;
    render(root_, out);
    return out;
  }

private:
  static void check_node(PolicyNode const &n, AttributeSchema const &schema)
  {
    if (n.kind == PolicyNode::Kind::Leaf)
    {
      if (schema.find(n.attribute) == nullptr)
      {
        throw PolicyError("policy references undeclared attribute '" + n.attribute + "'");
      }
      return;
    }
    if (n.children.size() != 2)
    {
      throw PolicyError("AND/OR nodes take exactly two operands");
    }
    for (auto const &c : n.children)
    {
      check_node(c, schema);
    }
  }

  static void render(PolicyNode const &n, std::string &out)
  {
    if (n.kind == PolicyNode::Kind::Leaf)
    {
      out += "(" + n.attribute + " " + std::string{abac::to_string(n.op)} + " " + std::to_string(n.value) + ")";
      return;
    }
    out += "(";
    render(n.children[0], out);
    out += n.kind == PolicyNode::Kind::And ? " & " : " | ";
    render(n.children[1], out);
    out += ")";
  }

  PolicyNode root_;
};

namespace detail {

inline bool eval_node(PolicyNode const &n, AttributeSet const &attrs)
{
  switch (n.kind)
  {
  case PolicyNode::Kind::Leaf: {
    auto const v = attrs.get(n.attribute);
    if (!v)
    {
      throw PolicyError("unknown attribute '" + n.attribute + "'");
    }
    return compare(*v, n.op, n.value);
  }
  case PolicyNode::Kind::And:
    // Both operands are always evaluated so unknown attributes surface on either side.
    {
      bool const a = eval_node(n.children[0], attrs);
      bool const b = eval_node(n.children[1], attrs);
      return a && b;
    }
  case PolicyNode::Kind::Or: {
    bool const a = eval_node(n.children[0], attrs);
    bool const b = eval_node(n.children[1], attrs);
    return a || b;
  }
  }
  return false;
}

// Recursive-descent parser for:
//   expr    := term   ( ('|' | '||' | 'or')  term   )*
//   term    := factor ( ('&' | '&&' | 'and') factor )*
//   factor  := '(' expr ')' | IDENT CMP value
//   CMP     := '>=' | '>' | '<=' | '<' | '=='
//   value   := INTEGER | OBSERVER | VALIDATOR | DELEGATE
class Parser
{
public:
  explicit Parser(std::string_view text) : s_{text} {}

  PolicyNode parse()
  {
    auto n = expr();
    skip_ws();
    if (pos_ != s_.size())
    {
      fail("unexpected trailing input");
    }
    return n;
  }

private:
  [[noreturn]] void fail(std::string const &what) const
  {
    throw PolicyError("policy parse error at column " + std::to_string(pos_ + 1) + ": " + what);
  }

  void skip_ws()
  {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
    {
      ++pos_;
    }
  }

  bool eat(std::string_view tok)
  {
    skip_ws();
    if (s_.substr(pos_, tok.size()) == tok)
    {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  bool eat_word(std::string_view word)
  {
    skip_ws();
    if (s_.substr(pos_, word.size()) == word)
    {
      std::size_t const end = pos_ + word.size();
      if (end == s_.size() || !(std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
      {
        pos_ = end;
        return true;
      }
    }
    return false;
  }

  PolicyNode expr()
  {
    auto lhs = term();
    while (eat("||") || eat("|") || eat_word("or"))
    {
      lhs = PolicyNode::either(std::move(lhs), term());
    }
    return lhs;
  }

  PolicyNode term()
  {
    auto lhs = factor();
    while (eat("&&") || eat("&") || eat_word("and"))
    {
      lhs = PolicyNode::both(std::move(lhs), factor());
    }
    return lhs;
  }

  PolicyNode factor()
  {
    if (eat("("))
    {
      auto n = expr();
      if (!eat(")"))
      {
        fail("expected ')'");
      }
      return n;
    }
    std::string name = identifier();
    if (name.empty())
    {
      fail("expected attribute name or '('");
    }
    Compare op;
    if (eat(">="))
      op = Compare::Ge;
    else if (eat("<="))
      op = Compare::Le;
    else if (eat("=="))
      op = Compare::Eq;
    else if (eat(">"))
      op = Compare::Gt;
    else if (eat("<"))
      op = Compare::Lt;
    else
      fail("expected comparison operator");
    return PolicyNode::leaf(std::move(name), op, value());
  }

  std::string identifier()
  {
    skip_ws();
    std::size_t const start = pos_;
    if (pos_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
    {
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      {
        ++pos_;
      }
    }
    return std::string{s_.substr(start, pos_ - start)};
  }

  std::int64_t value()
  {
    skip_ws();
    std::size_t const start = pos_;
    if (pos_ < s_.size() && (s_[pos_] == '-' || std::isdigit(static_cast<unsigned char>(s_[pos_]))))
    {
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
      {
        ++pos_;
      }
      auto const digits = std::string{s_.substr(start, pos_ - start)};
      if (digits == "-")
      {
        fail("expected integer");
      }
      return std::stoll(digits);
    }
    auto const word = identifier();
    if (word == "OBSERVER")
      return role_code::kObserver;
    if (word == "VALIDATOR")
      return role_code::kValidator;
    if (word == "DELEGATE")
      return role_code::kDelegate;
    fail("expected integer or role constant");
  }

  std::string_view s_;
  std::size_t      pos_{0};
};

}  // namespace detail

inline Policy parse_policy(std::string_view text)
{
  return Policy{detail::Parser{text}.parse()};
}

/// Policy file: the expression may span lines; '#' starts a comment.
inline Policy load_policy_file(std::string const &path)
{
  std::ifstream in{path};
  if (!in)
  {
    throw PolicyError("cannot open policy file '" + path + "'");
  }
  std::string text, line;
  while (std::getline(in, line))
  {
    if (auto const hash = line.find('#'); hash != std::string::npos)
    {
      line.erase(hash);
    }
    text += line;
    text += ' ';
  }
  return parse_policy(text);
}

/// Deployment default: trust >= 45 and role in {VALIDATOR, DELEGATE}.
inline Policy default_policy()
{
  return parse_policy("(trust >= 45) & ((role == VALIDATOR) | (role == DELEGATE))");
}

inline bool eval_policy_plain(Policy const &policy, AttributeSet const &attrs)
{
  return detail::eval_node(policy.root(), attrs);
}

// ---------------------------------------------------------------------------
// Encrypted evaluation

enum class BackendTag : std::uint32_t
{
  Simulated = 1,
  AdditiveInteger = 2,  // reserved
};

struct Ciphertext
{
  enum class Content : std::uint32_t
  {
    Attributes,
    Decision
  };

  BackendTag                 backend{BackendTag::Simulated};
  Content                    content{Content::Attributes};
  std::vector<std::string>   labels;   // public attribute names, one per slot
  std::vector<std::uint64_t> payload;  // opaque to everything but the backend
};

class EncryptionBackend
{
public:
  virtual ~EncryptionBackend() = default;

  virtual BackendTag tag() const noexcept                                 = 0;
  virtual Ciphertext encrypt(AttributeSet const &attrs)                   = 0;
  virtual Ciphertext eval(Policy const &policy, Ciphertext const &ct)     = 0;
  virtual bool       decrypt_decision(Ciphertext const &ct) const         = 0;
  virtual AttributeSet decrypt_attributes(Ciphertext const &ct) const     = 0;  // test hook
};

/// Randomized additive blinding under a keyed stream; evaluation unblinds internally.
class SimulatedBackend final : public EncryptionBackend
{
public:
  explicit SimulatedBackend(std::uint64_t key, AttributeSchema schema = AttributeSchema::standard())
    : key_{splitmix64(key ^ 0xabcdef0123456789ULL)}, schema_{std::move(schema)}, nonce_rng_{key}
  {}

  BackendTag tag() const noexcept override { return BackendTag::Simulated; }

  AttributeSchema const &schema() const noexcept { return schema_; }

  Ciphertext encrypt(AttributeSet const &attrs) override
  {
    attrs.validate(schema_);
    Ciphertext ct;
    ct.backend = tag();
    ct.content = Ciphertext::Content::Attributes;
    std::uint64_t const nonce = nonce_rng_.next_u64();
    ct.payload.push_back(nonce);
    std::uint64_t slot = 0;
    for (auto const &[name, value] : attrs.items())
    {
      ct.labels.push_back(name);
      ct.payload.push_back(static_cast<std::uint64_t>(value) + pad(nonce, slot++));
    }
    return ct;
  }

  Ciphertext eval(Policy const &policy, Ciphertext const &ct) override
  {
    require(ct, Ciphertext::Content::Attributes);
    bool const decision = eval_policy_plain(policy, unblind(ct));
    Ciphertext out;
    out.backend               = tag();
    out.content               = Ciphertext::Content::Decision;
    std::uint64_t const nonce = nonce_rng_.next_u64();
    out.payload               = {nonce, (decision ? 1ULL : 0ULL) + pad(nonce, kDecisionSlot)};
    return out;
  }

  bool decrypt_decision(Ciphertext const &ct) const override
  {
    require(ct, Ciphertext::Content::Decision);
    std::uint64_t const bit = ct.payload.at(1) - pad(ct.payload.at(0), kDecisionSlot);
    if (bit > 1)
    {
      throw PolicyError("corrupt decision ciphertext");
    }
    return bit == 1;
  }

  AttributeSet decrypt_attributes(Ciphertext const &ct) const override
  {
    require(ct, Ciphertext::Content::Attributes);
    return unblind(ct);
  }

private:
  static constexpr std::uint64_t kDecisionSlot = 0xffffffffULL;

  std::uint64_t pad(std::uint64_t nonce, std::uint64_t slot) const noexcept
  {
    return splitmix64(key_ ^ splitmix64(nonce + 0x9e37 * (slot + 1)));
  }

  void require(Ciphertext const &ct, Ciphertext::Content content) const
  {
    if (ct.backend != tag())
    {
      throw PolicyError("ciphertext belongs to another backend");
    }
    if (ct.content != content || ct.payload.empty())
    {
      throw PolicyError("ciphertext has unexpected content");
    }
  }

  AttributeSet unblind(Ciphertext const &ct) const
  {
    if (ct.payload.size() != ct.labels.size() + 1)
    {
      throw PolicyError("malformed attribute ciphertext");
    }
    AttributeSet  attrs;
    std::uint64_t nonce = ct.payload[0];
    for (std::size_t i = 0; i < ct.labels.size(); ++i)
    {
      attrs.set(ct.labels[i], static_cast<std::int64_t>(ct.payload[i + 1] - pad(nonce, i)));
    }
    return attrs;
  }

  std::uint64_t   key_;
  AttributeSchema schema_;
  Rng             nonce_rng_;
};

inline Ciphertext encrypt_attributes(AttributeSet const &attrs, EncryptionBackend &backend)
{
  return backend.encrypt(attrs);
}

inline Ciphertext eval_policy_encrypted(Policy const &policy, Ciphertext const &ct, EncryptionBackend &backend)
{
  return backend.eval(policy, ct);
}

/// Access gate used by the simulator: full encrypt/eval/decrypt per request.
class AccessGate
{
public:
  AccessGate(Policy policy, std::unique_ptr<EncryptionBackend> backend)
    : policy_{std::move(policy)}, backend_{std::move(backend)}
  {}

  Policy const &policy() const noexcept { return policy_; }

  bool decide(AttributeSet const &attrs)
  {
    auto const ct = encrypt_attributes(attrs, *backend_);
    return backend_->decrypt_decision(eval_policy_encrypted(policy_, ct, *backend_));
  }

private:
  Policy                             policy_;
  std::unique_ptr<EncryptionBackend> backend_;
};

}  // namespace trustsim::abac
