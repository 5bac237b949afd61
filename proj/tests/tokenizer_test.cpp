#include <gtest/gtest.h>

#include <filesystem>

#include "htrkit/rng.hpp"
#include "htrkit/tokenizer.hpp"
#include "test_util.hpp"

using namespace htrkit;
using namespace htrkit::tokenizer;

namespace {

std::string merge_str(const BpeModel& m, std::size_t i) {
  return m.token(m.merges()[i].left) + "+" + m.token(m.merges()[i].right);
}

}  // namespace

// "abab" x2: (a,b) occurs 4 times, (b,a) twice.
TEST(TrainBpe, FirstMergeIsMostFrequentPair) {
  const std::vector<std::string> corpus{"abab", "abab"};
  const auto m = train_bpe(corpus, 7, Mode::kChar);
  ASSERT_EQ(m.merges().size(), 1u);
  EXPECT_EQ(merge_str(m, 0), "a+b");
  EXPECT_EQ(m.size(), 7u);
  EXPECT_EQ(encode(m, "abab").size(), 2u);
}

// 8 a's: (a,a)x7 -> aa aa aa aa: (aa,aa)x3 -> aaaa aaaa: (aaaa,aaaa)x1 stops.
TEST(TrainBpe, RepeatedCodepointChainsMerges) {
  const std::vector<std::string> corpus{"aaaaaaaa"};
  const auto m = train_bpe(corpus, 100, Mode::kChar);
  ASSERT_EQ(m.merges().size(), 2u);
  EXPECT_EQ(merge_str(m, 0), "a+a");
  EXPECT_EQ(merge_str(m, 1), "aa+aa");
  EXPECT_EQ(m.size(), kNumSpecials + 1 + 2);
  EXPECT_EQ(encode(m, "aaaaaaaa").size(), 2u);
  EXPECT_EQ(encode(m, "aaaaa").size(), 2u);  // aaaa + a
}

TEST(TrainBpe, BoundaryVocabGivesPureCharacterModel) {
  const std::vector<std::string> corpus{"abab", "abab"};
  const auto m = train_bpe(corpus, kNumSpecials + 2, Mode::kChar);
  EXPECT_TRUE(m.merges().empty());
  EXPECT_EQ(encode(m, "abab").size(), 4u);
}

TEST(TrainBpe, TiesBrokenLexicographically) {
  const std::vector<std::string> corpus{"cd", "ab", "cd", "ab"};
  const auto m = train_bpe(corpus, 100, Mode::kChar);
  ASSERT_EQ(m.merges().size(), 2u);
  EXPECT_EQ(merge_str(m, 0), "a+b");
  EXPECT_EQ(merge_str(m, 1), "c+d");
}

TEST(TrainBpe, Errors) {
  EXPECT_THROW(train_bpe(std::span<const std::string>{}, 500, Mode::kByte), ValidationError);
  const std::vector<std::string> corpus{"abc"};
  EXPECT_THROW(train_bpe(corpus, 6, Mode::kChar), ValidationError);
  EXPECT_THROW(train_bpe(corpus, 259, Mode::kByte), ValidationError);
}

TEST(Encode, CharModeUnknownBecomesUnk) {
  const std::vector<std::string> corpus{"ab"};
  const auto m = train_bpe(corpus, kNumSpecials + 2, Mode::kChar);
  const auto ids = encode(m, "abc");
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(m.token(ids[0]), "a");
  EXPECT_EQ(m.token(ids[1]), "b");
  EXPECT_EQ(ids[2], kUnk);
}

TEST(Decode, EmptyAndSpecials) {
  const std::vector<std::string> corpus{"ab"};
  const auto m = train_bpe(corpus, 300, Mode::kByte);
  EXPECT_EQ(decode(m, std::vector<TokenId>{}), "");
  EXPECT_EQ(decode(m, std::vector<TokenId>{kBos, kPad, kUnk, kEos}), "");
}

TEST(Decode, ByteModeRoundTripDevanagari) {
  const std::vector<std::string> corpus{"कखग कखग", "कख"};
  const auto m = train_bpe(corpus, 300, Mode::kByte);
  EXPECT_EQ(decode(m, encode(m, "कखग")), "कखग");
  EXPECT_LT(encode(m, "कखग").size(), 9u);
}

TEST(Decode, ByteModeInvalidUtf8Replaced) {
  const std::vector<std::string> corpus{"क"};
  const auto m = train_bpe(corpus, 260, Mode::kByte);
  // First byte of a 3-byte sequence only.
  const auto ids = encode(m, "क");
  EXPECT_EQ(decode(m, std::span<const TokenId>(ids.data(), 1)), "\xEF\xBF\xBD");
}

TEST(TokenizerProperties, ByteRoundTripOnRandomUnicode) {
  Rng rng(21);
  std::vector<std::string> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back(test_util::random_unicode(rng, 30));
  const auto m = train_bpe(corpus, 400, Mode::kByte);
  for (int i = 0; i < 2000; ++i) {
    const std::string s = test_util::random_unicode(rng, 40);
    ASSERT_EQ(decode(m, encode(m, s)), s);
  }
}

TEST(TokenizerProperties, DeterministicMergeList) {
  Rng rng(8);
  std::vector<std::string> corpus;
  for (int i = 0; i < 100; ++i) corpus.push_back(test_util::random_unicode(rng, 30));
  const auto a = train_bpe(corpus, 350, Mode::kByte);
  const auto b = train_bpe(corpus, 350, Mode::kByte);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(TokenizerProperties, MoreMergesNeverLengthenTrainingLines) {
  const std::vector<std::string> corpus{"कखगकखग घ", "कख गघ कख", "abcabc ab", "कखग", "abab abab"};
  std::vector<std::size_t> prev(corpus.size(), SIZE_MAX);
  for (std::size_t v = 260; v <= 300; v += 5) {
    const auto m = train_bpe(corpus, v, Mode::kByte);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const std::size_t len = encode(m, corpus[i]).size();
      EXPECT_LE(len, prev[i]);
      prev[i] = len;
    }
  }
}

TEST(TokenizerProperties, VocabSizeIsMinOfRequestedAndReachable) {
  const std::vector<std::string> corpus{"abab", "abab"};
  // Reachable: (a,b), then (ab,ab) x2 -> abab; then nothing occurs twice.
  const auto m = train_bpe(corpus, 1000, Mode::kChar);
  EXPECT_EQ(m.size(), kNumSpecials + 2 + 2);
  EXPECT_EQ(m.requested_size(), 1000u);
  const auto small = train_bpe(corpus, 7, Mode::kChar);
  EXPECT_EQ(small.size(), 7u);
}

TEST(ModelFile, RoundTrip) {
  const std::vector<std::string> corpus{"कखग कखग", "कख", "abab"};
  const auto m = train_bpe(corpus, 30, Mode::kChar);
  const auto path = std::filesystem::temp_directory_path() / "htrkit_bpe_roundtrip.json";
  save_model(path, m);
  const auto loaded = load_model(path);
  EXPECT_EQ(loaded.merges(), m.merges());
  EXPECT_EQ(loaded.size(), m.size());
  EXPECT_EQ(encode(loaded, "कखग abab"), encode(m, "कखग abab"));
  std::filesystem::remove(path);
}

TEST(ModelFile, RejectsMalformed) {
  nlohmann::json j = to_json(train_bpe(std::vector<std::string>{"ab"}, 10, Mode::kChar));
  j["merges"] = {{0, 1}};
  EXPECT_THROW(model_from_json(j), ValidationError);
  j = to_json(train_bpe(std::vector<std::string>{"ab"}, 10, Mode::kChar));
  j["mode"] = "word";
  EXPECT_THROW(model_from_json(j), ValidationError);
}
