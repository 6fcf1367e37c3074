#include <gwcouple/trees.hpp>

#include <gtest/gtest.h>

#include <set>

using namespace gwcouple;

namespace {

OrderedTree T(std::initializer_list<VertexAddress> vs) { return OrderedTree::from_addresses(std::set<VertexAddress>(vs)); }

// Containment oracle by plain set inclusion.
bool set_subset(const OrderedTree& a, const OrderedTree& b) {
  auto sa = a.address_set(), sb = b.address_set();
  return std::includes(sb.begin(), sb.end(), sa.begin(), sa.end());
}

}  // namespace

TEST(Address, Parent) {
  EXPECT_EQ(parent(VertexAddress{3, 1}), (VertexAddress{3}));
  EXPECT_EQ(parent(VertexAddress{1}), VertexAddress::root());
  EXPECT_EQ(parent(VertexAddress{2, 5, 1}), (VertexAddress{2, 5}));
  EXPECT_THROW(parent(VertexAddress::root()), std::domain_error);
}

TEST(Address, ElderSibling) {
  EXPECT_EQ(elder_sibling(VertexAddress{3}), (VertexAddress{2}));
  EXPECT_FALSE(elder_sibling(VertexAddress{2, 1}).has_value());
  EXPECT_EQ(elder_sibling(VertexAddress{1, 4}), (VertexAddress{1, 3}));
  EXPECT_THROW(elder_sibling(VertexAddress::root()), std::domain_error);
}

TEST(Address, ZeroComponentRejected) { EXPECT_THROW(VertexAddress({1, 0}), std::invalid_argument); }

TEST(Address, Concat) {
  EXPECT_EQ(concat(VertexAddress{1, 2}, VertexAddress{3}), (VertexAddress{1, 2, 3}));
  EXPECT_EQ(concat(VertexAddress::root(), VertexAddress{3}), (VertexAddress{3}));
  EXPECT_EQ(concat(VertexAddress{3}, VertexAddress::root()), (VertexAddress{3}));
}

TEST(Tree, FromAddressesChecksClass) {
  EXPECT_THROW(T({{}, {2}}), std::invalid_argument);     // elder sibling (1) missing
  EXPECT_THROW(T({{}, {1, 1}}), std::invalid_argument);  // parent (1) missing
  EXPECT_THROW(OrderedTree::from_addresses({VertexAddress{1}}), std::invalid_argument);
  EXPECT_EQ(T({{}, {1}, {2}, {1, 1}}).degree_vector(), (DegreeSeq{2, 1, 0, 0}));
}

TEST(Tree, AddressesRoundTrip) {
  for (const auto& t : enumerate_trees(6)) EXPECT_EQ(OrderedTree::from_addresses(t.address_set()), t);
}

TEST(Tree, FindAndHeight) {
  auto t = decode("[[[]],[]]");
  EXPECT_EQ(t.height(), 2U);
  EXPECT_EQ(t.find(VertexAddress{2}).value(), 3U);
  EXPECT_EQ(t.find(VertexAddress{1, 1}).value(), 2U);
  EXPECT_FALSE(t.has_vertex(VertexAddress{2, 1}));
  EXPECT_FALSE(t.has_vertex(VertexAddress{3}));
}

TEST(Containment, Examples) {
  const auto a = T({{}, {1}});
  const auto b = T({{}, {1}, {2}});
  const auto c = T({{}, {1}, {1, 1}});
  EXPECT_TRUE(subset_of(a, b));
  EXPECT_FALSE(subset_of(b, c));
  EXPECT_TRUE(subset_of(b, b));
  auto r = check_subset(b, c);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_EQ(*r.witness, (VertexAddress{2}));
}

TEST(Containment, AgreesWithSetInclusion) {
  std::vector<OrderedTree> all;
  for (unsigned k = 1; k <= 6; ++k)
    for (auto& t : enumerate_trees(k)) all.push_back(t);
  for (const auto& a : all)
    for (const auto& b : all) {
      auto r = check_subset(a, b);
      ASSERT_EQ(r.contained, set_subset(a, b)) << encode(a) << " " << encode(b);
      if (!r.contained) {
        ASSERT_TRUE(r.witness.has_value());
        EXPECT_TRUE(a.has_vertex(*r.witness));
        EXPECT_FALSE(b.has_vertex(*r.witness));
      }
    }
}

TEST(Subtree, Examples) {
  EXPECT_EQ(subtree(T({{}, {1}, {1, 1}}), VertexAddress{1}).value(), T({{}, {1}}));
  EXPECT_FALSE(subtree(T({{}, {1}}), VertexAddress{2}).has_value());
  const auto t = decode("[[],[[],[]]]");
  EXPECT_EQ(subtree(t, VertexAddress::root()).value(), t);
  EXPECT_EQ(encode(subtree(t, VertexAddress{2}).value()), "[[],[]]");
}

TEST(Enumerate, SmallSizes) {
  auto three = enumerate_trees(3);
  ASSERT_EQ(three.size(), 2U);
  EXPECT_EQ(three[0], T({{}, {1}, {1, 1}}));
  EXPECT_EQ(three[1], T({{}, {1}, {2}}));
  auto one = enumerate_trees(1);
  ASSERT_EQ(one.size(), 1U);
  EXPECT_EQ(one[0], OrderedTree());
  EXPECT_EQ(enumerate_trees(4).size(), 5U);
}

TEST(Enumerate, DistinctSortedAndValid) {
  auto ts = enumerate_trees(8);
  EXPECT_EQ(ts.size(), 429U);
  EXPECT_TRUE(std::is_sorted(ts.begin(), ts.end()));
  EXPECT_EQ(std::adjacent_find(ts.begin(), ts.end()), ts.end());
  for (const auto& t : ts) EXPECT_EQ(t.size(), 8U);
}

TEST(Enumerate, CapEnforced) { EXPECT_THROW(enumerate_trees(13, 12), std::length_error); }

TEST(Codec, Examples) {
  EXPECT_EQ(encode(OrderedTree()), "[]");
  EXPECT_EQ(encode(T({{}, {1}, {2}})), "[[],[]]");
  EXPECT_EQ(decode("[[[]]]"), T({{}, {1}, {1, 1}}));
  EXPECT_EQ(decode(" [ [] , [[]] ] "), decode("[[],[[]]]"));
}

TEST(Codec, RoundTrip) {
  for (unsigned k = 1; k <= 7; ++k)
    for (const auto& t : enumerate_trees(k)) EXPECT_EQ(decode(encode(t)), t);
}

TEST(Codec, ErrorsCarryPosition) {
  for (std::string_view bad : {"", "[", "[]]", "[[],]", "x", "[][]", "[,[]]"}) {
    EXPECT_THROW(decode(bad), ParseError) << bad;
  }
  try {
    decode("[[],]");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position, 4U);
  }
  EXPECT_THROW(decode("[[]*]"), ParseError);
}

TEST(Codec, TruncatedRoundTrip) {
  auto t = decode_truncated("[[]*,[]]", 1);
  EXPECT_EQ(t.frontier_count(), 1U);
  EXPECT_EQ(t.frontier_addresses().front(), (VertexAddress{1}));
  EXPECT_EQ(encode(t), "[[]*,[]]");
  EXPECT_THROW(decode_truncated("[[]*,[[]]]", 2), std::invalid_argument);  // frontier off the horizon
}

TEST(Truncation, DropsDeepVertices) {
  auto t = TruncatedTree::from_tree(decode("[[[[]]],[]]"), 1);
  EXPECT_EQ(encode(t), "[[],[]]");
  EXPECT_EQ(TruncatedTree::from_tree(decode("[[[[]]],[]]"), 0).size(), 1U);
}

TEST(Truncation, ContainmentOfTruncated) {
  auto a = decode_truncated("[[]*]", 1);
  auto b = decode_truncated("[[]*,[]]", 1);
  EXPECT_TRUE(subset_of(a, b));
  EXPECT_FALSE(subset_of(b, a));
}

TEST(Merge, UnionContainsBoth) {
  auto a = decode_truncated("[[[]],[]]", 2);
  auto b = decode_truncated("[[],[[]],[]]", 2);
  auto m = merge_union(a, b);
  EXPECT_TRUE(subset_of(a, m.tree));
  EXPECT_TRUE(subset_of(b, m.tree));
  EXPECT_EQ(encode(m.tree), "[[[]],[[]],[]]");
}

TEST(Dot, OneEdgePerVertex) {
  auto dot = to_dot(decode("[[],[[]]]"));
  EXPECT_NE(dot.find("\"o\" -> \"(2)\""), std::string::npos);
  EXPECT_NE(dot.find("\"(2)\" -> \"(2,1)\""), std::string::npos);
  EXPECT_EQ(std::count(dot.begin(), dot.end(), '>'), 3);
}
