#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "rrgru/corpus.hpp"
#include "test_util.hpp"

using namespace rrgru;

namespace {

const char* kPhone =
    "1\t\"The <e1>phone</e1> went into the <e2>washer</e2>.\"\n"
    "Entity-Destination(e1,e2)\n"
    "Comment:\n"
    "\n";

std::vector<RawExample> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_semeval(in, "mem");
}

std::vector<std::string> words(const TokenizedExample& ex, const Vocabulary& v) {
  std::vector<std::string> out;
  for (auto id : ex.token_ids) out.push_back(v.token(id));
  return out;
}

TokenizedExample synthetic(long id, std::size_t len, std::mt19937_64& rng) {
  TokenizedExample ex;
  ex.id = id;
  std::uniform_int_distribution<std::size_t> tok(5, 40), lab(0, LabelSet::kLabels - 1);
  for (std::size_t i = 0; i < len; ++i) ex.token_ids.push_back(tok(rng));
  ex.p_e1 = 0;
  ex.p_e2 = len - 1;
  ex.label = lab(rng);
  return ex;
}

}  // namespace

TEST(Parse, PhoneWasherSentence) {
  const auto raw = parse(kPhone);
  ASSERT_EQ(raw.size(), 1u);
  EXPECT_EQ(raw[0].id, 1);
  EXPECT_EQ(raw[0].label, LabelSet::parse("Entity-Destination(e1,e2)"));
  Vocabulary v;
  const auto ex = tokenize(raw[0], v, false);
  EXPECT_EQ(words(ex, v), (std::vector<std::string>{"the", "<e1>", "phone", "</e1>", "went",
                                                    "into", "the", "<e2>", "washer", "</e2>",
                                                    "."}));
  EXPECT_EQ(ex.p_e1, 2u);
  EXPECT_EQ(ex.p_e2, 8u);
  EXPECT_EQ(ex.token_ids[1], Vocabulary::kE1OpenId);
  EXPECT_EQ(ex.token_ids[9], Vocabulary::kE2CloseId);
}

TEST(Parse, ExampleFileFromTestData) {
  const auto raw = parse_semeval(std::string(RRGRU_TEST_DATA) + "/smoke_train.txt");
  EXPECT_EQ(raw.size(), 24u);
  std::set<long> ids;
  for (const auto& r : raw) ids.insert(r.id);
  EXPECT_EQ(ids.size(), raw.size());
}

TEST(Parse, MissingRelationLineReportsLine) {
  const std::string text =
      "1\t\"The <e1>phone</e1> went into the <e2>washer</e2>.\"\n"
      "Comment:\n"
      "\n";
  try {
    parse(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("mem:2"), std::string::npos);
  }
}

TEST(Parse, UnknownRelationIsLabelError) {
  const std::string text =
      "1\t\"The <e1>phone</e1> went into the <e2>washer</e2>.\"\n"
      "Part-Of(e1,e2)\n"
      "Comment:\n"
      "\n";
  try {
    parse(text);
    FAIL() << "expected LabelError";
  } catch (const LabelError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("Part-Of(e1,e2)"), std::string::npos);
  }
}

TEST(Parse, MalformedMarkupRejected) {
  EXPECT_THROW(parse("1\t\"The phone went into the <e2>washer</e2>.\"\nOther\nComment:\n\n"),
               ParseError);
  EXPECT_THROW(parse("1\t\"<e1>a <e2>b</e1> c</e2>\"\nOther\nComment:\n\n"), ParseError);
  EXPECT_THROW(parse("x\t\"<e1>a</e1> <e2>b</e2>\"\nOther\nComment:\n\n"), ParseError);
}

TEST(Parse, CrLfLineEndings) {
  const auto raw = parse("7\t\"<e1>a</e1> of <e2>b</e2>\"\r\nOther\r\nComment: x\r\n\r\n");
  ASSERT_EQ(raw.size(), 1u);
  EXPECT_EQ(raw[0].label, LabelSet::kOther);
}

TEST(Tokenize, MultiwordNominalPointsAtFirstWord) {
  RawExample raw{3, "The <e1>New York</e1> office hired an <e2>engineer</e2>.", LabelSet::kOther};
  Vocabulary v;
  const auto ex = tokenize(raw, v, false);
  EXPECT_EQ(v.token(ex.token_ids[ex.p_e1]), "new");
  EXPECT_EQ(v.token(ex.token_ids[ex.p_e1 + 1]), "york");
  EXPECT_EQ(v.token(ex.token_ids[ex.p_e2]), "engineer");
}

TEST(Tokenize, FrozenVocabularyMapsUnseenToUnk) {
  Vocabulary v;
  tokenize(parse(kPhone)[0], v, false);
  const auto before = v.size();
  RawExample raw{2, "The <e1>zyzzy</e1> went into the <e2>washer</e2>.", LabelSet::kOther};
  const auto ex = tokenize(raw, v, true);
  EXPECT_EQ(ex.token_ids[ex.p_e1], Vocabulary::kUnkId);
  EXPECT_EQ(v.size(), before);
  const Vocabulary& frozen = v;
  EXPECT_EQ(tokenize(raw, frozen), ex);
}

TEST(Tokenize, IndicatorsBracketNominals) {
  const auto raw = parse_semeval(std::string(RRGRU_TEST_DATA) + "/smoke_train.txt");
  Vocabulary v;
  for (const auto& r : raw) {
    const auto ex = tokenize(r, v, false);
    ASSERT_GE(ex.p_e1, 1u);
    ASSERT_GE(ex.p_e2, 1u);
    EXPECT_EQ(ex.token_ids[ex.p_e1 - 1], Vocabulary::kE1OpenId) << r.id;
    EXPECT_EQ(ex.token_ids[ex.p_e2 - 1], Vocabulary::kE2OpenId) << r.id;
    EXPECT_NE(ex.token_ids[ex.p_e1], Vocabulary::kE1CloseId) << r.id;
    EXPECT_LT(ex.p_e1, ex.length());
    EXPECT_LT(ex.p_e2, ex.length());
  }
}

TEST(Vocabulary, SaveLoadPreservesIdsAndHash) {
  TempDir tmp;
  Vocabulary v;
  for (auto w : {"a", "b", "c"}) v.add(w);
  v.save(tmp.file("vocab.txt"));
  const auto w = Vocabulary::load(tmp.file("vocab.txt"));
  EXPECT_EQ(w.tokens(), v.tokens());
  EXPECT_EQ(w.hash(), v.hash());
  Vocabulary other;
  for (auto x : {"b", "a", "c"}) other.add(x);
  EXPECT_NE(other.hash(), v.hash());
}

TEST(Labels, RoundTripAllNineteen) {
  std::set<std::string> names;
  for (LabelId id = 0; id < LabelSet::kLabels; ++id) {
    const auto name = LabelSet::name(id);
    names.insert(name);
    EXPECT_EQ(LabelSet::parse(name), id);
    if (id != LabelSet::kOther) {
      EXPECT_EQ(LabelSet::directional(LabelSet::relation_of(id), LabelSet::direction_of(id)), id);
    }
  }
  EXPECT_EQ(names.size(), 19u);
  EXPECT_EQ(LabelSet::name(LabelSet::kOther), "Other");
  EXPECT_THROW(LabelSet::parse("Cause-Effect"), LabelError);
  EXPECT_THROW(LabelSet::name(19), LabelError);
}

TEST(Embeddings, CopiesFileVectorsAndFillsTheRest) {
  TempDir tmp;
  Vocabulary v;
  v.add("phone");
  v.add("washer");
  v.add("rare");
  write_file(tmp.file("emb.txt"),
             "phone 0.1 0.2 0.3\n"
             "unused 9 9 9\n"
             "washer -1 0 1\n");
  const auto m = load_embeddings(tmp.file("emb.txt"), v, 4);
  EXPECT_EQ(m.dim, 3u);
  EXPECT_EQ(m.covered, 2u);
  const auto phone = v.id_or_unk("phone"), washer = v.id_or_unk("washer");
  EXPECT_EQ(m.at(0, phone), 0.1);
  EXPECT_EQ(m.at(2, phone), 0.3);
  EXPECT_EQ(m.at(0, washer), -1.0);
  const auto rare = v.id_or_unk("rare");
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LE(std::abs(m.at(i, rare)), 0.25);
    EXPECT_LE(std::abs(m.at(i, Vocabulary::kUnkId)), 0.25);
  }
  // Same seed, same fill.
  EXPECT_EQ(load_embeddings(tmp.file("emb.txt"), v, 4).data, m.data);
}

TEST(Embeddings, WrongDimensionNamesLine) {
  TempDir tmp;
  std::string text = "a";
  for (int i = 0; i < 100; ++i) text += " 0.5";
  text += "\nb";
  for (int i = 0; i < 99; ++i) text += " 0.5";
  text += "\n";
  write_file(tmp.file("emb.txt"), text);
  Vocabulary v;
  try {
    load_embeddings(tmp.file("emb.txt"), v, 1);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Embeddings, RandomWithinBound) {
  const auto m = random_embeddings(50, 200, 9);
  for (double x : m.data) EXPECT_LE(std::abs(x), 0.25);
  EXPECT_EQ(m.covered, 0u);
  EXPECT_EQ(random_embeddings(50, 200, 9).data, m.data);
  EXPECT_NE(random_embeddings(50, 200, 10).data, m.data);
}

TEST(KFold, TenSingletons) {
  std::mt19937_64 rng(1);
  std::vector<TokenizedExample> data;
  for (long i = 0; i < 10; ++i) data.push_back(synthetic(i, 4, rng));
  const auto folds = kfold_split(data, 10, 3);
  ASSERT_EQ(folds.size(), 10u);
  std::set<long> seen;
  for (const auto& f : folds) {
    ASSERT_EQ(f.valid.size(), 1u);
    EXPECT_EQ(f.train.size(), 9u);
    seen.insert(f.valid[0].id);
  }
  EXPECT_EQ(seen.size(), 10u);
}

TEST(KFold, PartitionOfEightThousand) {
  std::mt19937_64 rng(2);
  std::vector<TokenizedExample> data;
  for (long i = 0; i < 8000; ++i) data.push_back(synthetic(i, 3, rng));
  const auto folds = kfold_split(data, 10, 5);
  std::set<long> all;
  for (const auto& f : folds) {
    EXPECT_EQ(f.valid.size(), 800u);
    EXPECT_EQ(f.train.size(), 7200u);
    std::set<long> valid;
    for (const auto& e : f.valid) valid.insert(e.id);
    for (const auto& e : f.train) EXPECT_EQ(valid.count(e.id), 0u);
    all.insert(valid.begin(), valid.end());
  }
  EXPECT_EQ(all.size(), 8000u);
  const auto again = kfold_split(data, 10, 5);
  for (std::size_t f = 0; f < folds.size(); ++f) EXPECT_EQ(again[f].valid, folds[f].valid);
  EXPECT_NE(kfold_split(data, 10, 6)[0].valid, folds[0].valid);
}

TEST(KFold, UnevenSizesDifferByAtMostOne) {
  std::mt19937_64 rng(3);
  std::vector<TokenizedExample> data;
  for (long i = 0; i < 23; ++i) data.push_back(synthetic(i, 3, rng));
  std::size_t lo = 100, hi = 0;
  for (const auto& f : kfold_split(data, 5, 1)) {
    lo = std::min(lo, f.valid.size());
    hi = std::max(hi, f.valid.size());
  }
  EXPECT_LE(hi - lo, 1u);
  EXPECT_THROW(kfold_split(data, 1, 1), ContractError);
  EXPECT_THROW(kfold_split(data, 24, 1), ContractError);
}

TEST(Cache, RoundTrip) {
  std::mt19937_64 rng(4);
  std::vector<TokenizedExample> data;
  for (long i = 0; i < 30; ++i) data.push_back(synthetic(i + 100, 2 + i % 7, rng));
  std::stringstream buf;
  write_cache(buf, data);
  EXPECT_EQ(read_cache(buf, 41), data);
}

TEST(Cache, RejectsOutOfVocabularyIds) {
  std::stringstream buf("1\t1 2 50\t0\t2\t3\n");
  EXPECT_THROW(read_cache(buf, 10), FormatError);
}
