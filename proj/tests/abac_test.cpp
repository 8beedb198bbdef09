#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "trustsim/abac.hpp"
#include "trustsim/random.hpp"

using namespace trustsim;
using namespace trustsim::abac;

namespace {

AttributeSet node_attrs(std::int64_t trust, std::int64_t role)
{
  AttributeSet a;
  a.set("trust", trust).set("role", role).set("clearance", 3).set("permissions", 255);
  return a;
}

PolicyNode random_tree(Rng &rng, int depth)
{
  static char const *const names[] = {"trust", "role", "clearance", "permissions"};
  static std::int64_t const hi[]   = {100, 7, 10, 255};
  if (depth == 0 || rng.bernoulli(0.3))
  {
    std::size_t const a = rng.index(4);
    return PolicyNode::leaf(names[a], static_cast<Compare>(rng.index(5)),
                            static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(hi[a]) + 1)));
  }
  auto l = random_tree(rng, depth - 1);
  auto r = random_tree(rng, depth - 1);
  return rng.bernoulli(0.5) ? PolicyNode::both(std::move(l), std::move(r)) : PolicyNode::either(std::move(l), std::move(r));
}

AttributeSet random_attrs(Rng &rng)
{
  AttributeSet a;
  a.set("trust", static_cast<std::int64_t>(rng.index(101)))
      .set("role", static_cast<std::int64_t>(rng.index(8)))
      .set("clearance", static_cast<std::int64_t>(rng.index(11)))
      .set("permissions", static_cast<std::int64_t>(rng.index(256)));
  return a;
}

}  // namespace

TEST(Encrypt, RoundTripRecoversAttributes)
{
  SimulatedBackend be{17};
  auto const       a = node_attrs(50, role_code::kValidator);
  EXPECT_EQ(be.decrypt_attributes(encrypt_attributes(a, be)), a);
}

TEST(Encrypt, EmptySetRejected)
{
  SimulatedBackend be{17};
  EXPECT_THROW(encrypt_attributes(AttributeSet{}, be), PolicyError);
}

TEST(Encrypt, OutOfRangeRejected)
{
  SimulatedBackend be{17};
  EXPECT_THROW(encrypt_attributes(node_attrs(101, 1), be), PolicyError);
  AttributeSet undeclared;
  undeclared.set("altitude", 3);
  EXPECT_THROW(encrypt_attributes(undeclared, be), PolicyError);
}

TEST(Encrypt, RepeatedEncryptionsDiffer)
{
  SimulatedBackend be{17};
  auto const       a  = node_attrs(50, role_code::kValidator);
  auto const       c1 = encrypt_attributes(a, be);
  auto const       c2 = encrypt_attributes(a, be);
  EXPECT_NE(c1.payload, c2.payload);
  // Blinded slots never expose the plaintext values directly.
  for (std::size_t i = 1; i < c1.payload.size(); ++i)
  {
    EXPECT_GT(c1.payload[i], 255u);
  }
}

TEST(EvalEncrypted, TrustAndRoleAccept)
{
  SimulatedBackend be{5};
  auto const       p  = parse_policy("trust >= 45 & role == VALIDATOR");
  auto const       ct = eval_policy_encrypted(p, encrypt_attributes(node_attrs(50, role_code::kValidator), be), be);
  EXPECT_TRUE(be.decrypt_decision(ct));
}

TEST(EvalEncrypted, ClearanceReject)
{
  SimulatedBackend be{5};
  AttributeSet     a;
  a.set("clearance", 2);
  auto const ct = eval_policy_encrypted(parse_policy("clearance >= 3"), encrypt_attributes(a, be), be);
  EXPECT_FALSE(be.decrypt_decision(ct));
}

TEST(EvalEncrypted, UnknownAttributeErrors)
{
  SimulatedBackend be{5};
  AttributeSet     a;
  a.set("clearance", 2);
  EXPECT_THROW(eval_policy_encrypted(parse_policy("trust >= 3"), encrypt_attributes(a, be), be), PolicyError);
}

TEST(EvalEncrypted, ParityWithPlaintextOnRandomPairs)
{
  Rng              rng{2718};
  SimulatedBackend be{99};
  int              agree = 0;
  for (int i = 0; i < 1000; ++i)
  {
    Policy const p{random_tree(rng, 4)};
    auto const   a = random_attrs(rng);
    bool const   plain = eval_policy_plain(p, a);
    bool const   enc   = be.decrypt_decision(eval_policy_encrypted(p, encrypt_attributes(a, be), be));
    agree += plain == enc ? 1 : 0;
  }
  EXPECT_EQ(agree, 1000);
}

TEST(EvalPlain, Connectives)
{
  auto const a = node_attrs(60, role_code::kDelegate);
  EXPECT_TRUE(eval_policy_plain(parse_policy("trust > 50 and role == DELEGATE"), a));
  EXPECT_TRUE(eval_policy_plain(parse_policy("trust < 10 || clearance <= 3"), a));
  EXPECT_FALSE(eval_policy_plain(parse_policy("permissions < 255"), a));
}

TEST(Parser, PrecedenceAndParentheses)
{
  auto const a = node_attrs(10, role_code::kObserver);
  // '&' binds tighter than '|'
  EXPECT_TRUE(eval_policy_plain(parse_policy("clearance == 3 | trust >= 45 & role == 1"), a));
  EXPECT_FALSE(eval_policy_plain(parse_policy("(clearance == 3 | trust >= 45) & role == 1"), a));
}

TEST(Parser, RejectsMalformedText)
{
  EXPECT_THROW(parse_policy(""), PolicyError);
  EXPECT_THROW(parse_policy("trust >="), PolicyError);
  EXPECT_THROW(parse_policy("(trust >= 3"), PolicyError);
  EXPECT_THROW(parse_policy("trust ~ 3"), PolicyError);
  EXPECT_THROW(parse_policy("trust >= 3 extra"), PolicyError);
}

TEST(Parser, RenderedPolicyParsesBackToSameDecisions)
{
  Rng rng{8};
  for (int i = 0; i < 200; ++i)
  {
    Policy const p{random_tree(rng, 3)};
    Policy const q = parse_policy(p.to_string());
    auto const   a = random_attrs(rng);
    EXPECT_EQ(eval_policy_plain(p, a), eval_policy_plain(q, a)) << p.to_string();
  }
}

TEST(Policy, CheckRejectsUndeclaredAttribute)
{
  EXPECT_THROW(parse_policy("altitude >= 3").check(AttributeSchema::standard()), PolicyError);
  EXPECT_NO_THROW(default_policy().check(AttributeSchema::standard()));
  EXPECT_GE(default_policy().root().depth(), 1u);
}

TEST(PolicyFile, CommentsAndLineBreaks)
{
  std::string const path = ::testing::TempDir() + "policy.txt";
  {
    std::ofstream f{path};
    f << "# gate for committee members\n(trust >= 45) &\n  (role == 2)  # delegates only\n";
  }
  auto const p = load_policy_file(path);
  EXPECT_TRUE(eval_policy_plain(p, node_attrs(45, role_code::kDelegate)));
  EXPECT_FALSE(eval_policy_plain(p, node_attrs(45, role_code::kValidator)));
  std::remove(path.c_str());
  EXPECT_THROW(load_policy_file(path), PolicyError);
}

TEST(QuantizeTrust, FloorAndClamp)
{
  EXPECT_EQ(quantize_trust(0.45), 45);
  EXPECT_EQ(quantize_trust(0.449999), 44);
  EXPECT_EQ(quantize_trust(1.0), 100);
  EXPECT_EQ(quantize_trust(0.0), 0);
}

TEST(AccessGate, DefaultPolicyMatchesThreshold)
{
  AccessGate gate{default_policy(), std::make_unique<SimulatedBackend>(3)};
  EXPECT_TRUE(gate.decide(node_attrs(quantize_trust(0.45), role_code::kValidator)));
  EXPECT_FALSE(gate.decide(node_attrs(quantize_trust(0.4499), role_code::kValidator)));
  EXPECT_FALSE(gate.decide(node_attrs(90, role_code::kObserver)));
  EXPECT_TRUE(gate.decide(node_attrs(90, role_code::kDelegate)));
}

TEST(Ciphertext, ForeignOrTamperedRejected)
{
  SimulatedBackend be{1};
  auto             ct = encrypt_attributes(node_attrs(50, 1), be);
  EXPECT_THROW(be.decrypt_decision(ct), PolicyError);
  auto dec = eval_policy_encrypted(default_policy(), ct, be);
  dec.payload[1] += 7;
  EXPECT_THROW(be.decrypt_decision(dec), PolicyError);
  ct.backend = BackendTag::AdditiveInteger;
  EXPECT_THROW(eval_policy_encrypted(default_policy(), ct, be), PolicyError);
}
