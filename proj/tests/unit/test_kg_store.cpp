#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"

using namespace grf;

namespace {

RelationMap small_map() {
  RelationMap m;
  m.add("IsA", "isa");
  m.add("MadeOf", "madeof");
  m.add("HasA", "partof", true);
  m.add("PartOf", "partof");
  m.add("FormOf", "DROP");
  return m;
}

IngestResult ingest_text(const std::string& text, const RelationMap& map = small_map(), IngestOptions opt = {}) {
  std::istringstream in(text);
  return ingest(in, map, opt);
}

bool stored(const KnowledgeGraph& kg, const std::string& h, const std::string& r, const std::string& t) {
  const auto rid = kg.relations().find(r);
  if (!rid || !kg.find(h) || !kg.find(t)) return false;
  for (const auto& e : kg.neighbors(*kg.find(h)))
    if (e.relation == *rid && e.tail == *kg.find(t)) return true;
  return false;
}

}  // namespace

TEST(Relations, InverseIsAnInvolution) {
  RelationVocab v({"isa", "madeof"});
  for (std::size_t f = 0; f < v.size(); ++f) {
    auto r = v.from_flat(f);
    EXPECT_EQ(r.inverse().inverse(), r);
    EXPECT_NE(r.inverse(), r);
    EXPECT_EQ(v.flat(r), f);
  }
  EXPECT_EQ(v.name(RelationId{1, true}), "madeof_inv");
  EXPECT_EQ(v.find("madeof_inv"), (RelationId{1, true}));
}

TEST(Ingest, ForwardTripleGetsReversedTwin) {
  auto res = ingest_text("volcano\tMadeOf\tlava\n");
  EXPECT_TRUE(stored(res.graph, "volcano", "madeof", "lava"));
  EXPECT_TRUE(stored(res.graph, "lava", "madeof_inv", "volcano"));
  EXPECT_EQ(res.graph.num_triples(), 2u);
}

TEST(Ingest, IdentityGroupingResolvesRelation) {
  auto res = ingest_text("cat\tIsA\tanimal\n");
  auto rid = res.graph.relations().find("isa");
  ASSERT_TRUE(rid);
  EXPECT_FALSE(rid->is_inverse);
  EXPECT_TRUE(stored(res.graph, "cat", "isa", "animal"));
}

TEST(Ingest, ConceptNetRowsFilterLanguageAndMultiWord) {
  const std::string text =
      "/a/1\t/r/IsA\t/c/en/ice_cream\t/c/en/food\t{\"weight\": 2.0}\n"
      "/a/2\t/r/IsA\t/c/fr/chat\t/c/en/animal\t{}\n"
      "/a/3\t/r/IsA\t/c/en/cat/n\t/c/en/animal\t{\"weight\": 1.5}\n";
  auto res = ingest_text(text);
  EXPECT_FALSE(res.graph.contains("ice_cream"));
  EXPECT_FALSE(res.graph.contains("chat"));
  EXPECT_EQ(res.report.multi_word, 1u);
  EXPECT_EQ(res.report.non_english, 1u);
  ASSERT_TRUE(stored(res.graph, "cat", "isa", "animal"));
  EXPECT_FLOAT_EQ(res.graph.neighbors(res.graph.find("cat").value())[0].weight, 1.5f);
}

TEST(Ingest, UnknownRelationIsHardErrorNamingIt) {
  try {
    ingest_text("a\tIsA\tb\nc\tMysteryRel\td\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownRelation);
    EXPECT_NE(std::string(e.what()).find("MysteryRel"), std::string::npos);
  }
}

TEST(Ingest, MalformedLinesGoToSkipReport) {
  auto res = ingest_text("a\tIsA\tb\nonly-one-field\nc\tIsA\td\tnotanumber\ne\tIsA\tf\n");
  EXPECT_EQ(res.report.skip_report(), "2\texpected 3-4 tab-separated fields or a ConceptNet assertion row\n3\tbad weight\n");
  EXPECT_TRUE(stored(res.graph, "e", "isa", "f"));
}

TEST(Ingest, DuplicatesMergeKeepingMaxWeight) {
  auto res = ingest_text("a\tIsA\tb\t0.5\na\tIsA\tb\t3\na\tIsA\tb\t1\n");
  EXPECT_EQ(res.graph.num_triples(), 2u);
  EXPECT_FLOAT_EQ(res.graph.neighbors(res.graph.find("a").value())[0].weight, 3.0f);
}

TEST(Ingest, StopWordsSelfLoopsAndDroppedRelations) {
  IngestOptions opt;
  opt.stopwords = WordSet{"the"};
  auto res = ingest_text("the\tIsA\tb\na\tIsA\ta\na\tFormOf\tb\nx\tIsA\ty\n", small_map(), opt);
  EXPECT_EQ(res.report.stop_word, 1u);
  EXPECT_EQ(res.report.self_loop, 1u);
  EXPECT_EQ(res.report.dropped_relation, 1u);
  EXPECT_EQ(res.graph.num_concepts(), 2u);
}

TEST(Ingest, ReverseEntrySwapsDirection) {
  auto res = ingest_text("car\tHasA\twheel\n");
  EXPECT_TRUE(stored(res.graph, "wheel", "partof", "car"));
  EXPECT_TRUE(stored(res.graph, "car", "partof_inv", "wheel"));
}

TEST(Ingest, LemmatizesConcepts) {
  IngestOptions opt;
  opt.lemmatizer.add("volcanoes", "volcano");
  auto res = ingest_text("volcanoes\tMadeOf\tlava\n", small_map(), opt);
  EXPECT_TRUE(res.graph.contains("volcano"));
  EXPECT_FALSE(res.graph.contains("volcanoes"));
}

TEST(Neighbors, SingleTripleBothDirections) {
  auto kg = fx::make_kg({"r"}, {{"a", "r", "b", 1.0f}});
  auto na = kg.neighbors(fx::id(kg, "a"));
  ASSERT_EQ(na.size(), 1u);
  EXPECT_EQ(na[0].relation, (RelationId{0, false}));
  EXPECT_EQ(na[0].tail, fx::id(kg, "b"));
  auto nb = kg.neighbors(fx::id(kg, "b"));
  ASSERT_EQ(nb.size(), 1u);
  EXPECT_EQ(nb[0].relation, (RelationId{0, true}));
  EXPECT_EQ(nb[0].tail, fx::id(kg, "a"));
}

TEST(Neighbors, EmptyGraphAndInvalidId) {
  KnowledgeGraph kg;
  EXPECT_EQ(kg.num_concepts(), 0u);
  try {
    kg.neighbors(ConceptId{0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidId);
  }
  auto one = fx::make_kg({"r"}, {{"a", "r", "b", 1.0f}});
  EXPECT_THROW(one.neighbors(ConceptId{7}), Error);
}

TEST(Neighbors, SortedByRelationThenTail) {
  auto kg = fx::make_kg({"r1", "r2"}, {{"a", "r2", "b", 1}, {"a", "r1", "d", 1}, {"a", "r1", "c", 1}, {"e", "r1", "a", 1}});
  auto n = kg.neighbors(fx::id(kg, "a"));
  for (std::size_t i = 1; i < n.size(); ++i) {
    auto fl = [&](const Edge& e) { return std::make_pair(kg.relations().flat(e.relation), e.tail); };
    EXPECT_LT(fl(n[i - 1]), fl(n[i]));
  }
  EXPECT_EQ(n.size(), 4u);
}

TEST(Graph, ReversalClosureAndDoubleCount) {
  auto kg = fx::make_kg({"r1", "r2"}, {{"a", "r1", "b", 1}, {"b", "r2", "c", 1}, {"c", "r1", "a", 1}, {"a", "r2", "c", 2}});
  EXPECT_EQ(kg.num_triples(), 8u);
  for (const auto& t : kg.triples()) {
    bool twin = false;
    for (const auto& e : kg.neighbors(t.tail)) twin = twin || (e.relation == t.relation.inverse() && e.tail == t.head);
    EXPECT_TRUE(twin);
  }
}

TEST(Graph, SaveLoadRoundTrip) {
  auto kg = fx::make_kg({"r1", "r2"}, {{"a", "r1", "b", 0.5f}, {"b", "r2", "c", 1}, {"c", "r1", "a", 2}});
  auto back = KnowledgeGraph::deserialize(kg.serialize());
  EXPECT_EQ(back, kg);
  EXPECT_EQ(back.serialize(), kg.serialize());
}

TEST(Graph, LoadEmptyFileFails) {
  try {
    KnowledgeGraph::deserialize("");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
}

TEST(Graph, FlippedMagicIsVersionError) {
  auto bytes = fx::make_kg({"r"}, {{"a", "r", "b", 1}}).serialize();
  bytes[0] ^= 0x20;
  try {
    KnowledgeGraph::deserialize(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Version);
  }
}

TEST(Graph, TruncatedFileReportsOffset) {
  auto bytes = fx::make_kg({"r"}, {{"a", "r", "b", 1}, {"b", "r", "c", 1}}).serialize();
  bytes.resize(bytes.size() - 3);
  try {
    KnowledgeGraph::deserialize(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
}

TEST(Graph, IngestIsDeterministicAndOrderIndependent) {
  const std::string a = "b\tIsA\tc\na\tMadeOf\tb\nc\tPartOf\ta\n";
  const std::string b = "c\tPartOf\ta\nb\tIsA\tc\na\tMadeOf\tb\n";
  EXPECT_EQ(ingest_text(a).graph.serialize(), ingest_text(a).graph.serialize());
  EXPECT_EQ(ingest_text(a).graph.serialize(), ingest_text(b).graph.serialize());
}

TEST(DefaultTables, MatchShippedDataFiles) {
  EXPECT_EQ(io::read_file(GRF_DATA_DIR "/relation_map.tsv"), kDefaultRelationMap);
  EXPECT_EQ(io::read_file(GRF_DATA_DIR "/stopwords_en.txt"), kDefaultStopwords);
  EXPECT_EQ(io::read_file(GRF_DATA_DIR "/lemmas_en.tsv"), kDefaultLemmas);
}

TEST(DefaultTables, SeventeenGroups) {
  EXPECT_EQ(default_relation_map().groups().size(), 17u);
  EXPECT_TRUE(default_stopwords().contains("the"));
}
