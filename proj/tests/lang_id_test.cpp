#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "mtbias/lang_id.hpp"
#include "test_util.hpp"

using namespace mtbias;

namespace {

std::vector<std::string> corpus_of(SplitMix64& rng, int which, size_t n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) out.push_back(testutil::synth_sentence(rng, which));
  return out;
}

TranslationRecord record_for(const std::string& tgt, const std::string& ref,
                             const std::string& base, const std::string& comp) {
  TranslationRecord r;
  r.src_lang = "src";
  r.tgt_lang = tgt;
  r.source = "irrelevant";
  r.reference = ref;
  r.hyp_base = base;
  r.hyp_comp = comp;
  r.pair_id = "src-" + tgt;
  return r;
}

}  // namespace

TEST(TrainProfiles, TopUnigramOfRepeatedLetter) {
  std::map<std::string, std::vector<std::string>> corpora{{"x", {"aaaa"}},
                                                          {"y", {"bbbb"}}};
  auto profiles = train_profiles(corpora, 10);
  ASSERT_EQ(profiles.size(), 2u);
  // "_aaaa_" holds four 'a' and two '_': 'a' ranks first.
  EXPECT_EQ(profiles[0].lang, "x");
  EXPECT_EQ(profiles[0].ranked_ngrams[0], U"a");
}

TEST(TrainProfiles, IdenticalCorporaGiveIdenticalProfiles) {
  SplitMix64 rng(5);
  std::vector<std::string> corpus = corpus_of(rng, 0, 30);
  std::map<std::string, std::vector<std::string>> corpora{{"p", corpus}, {"q", corpus}};
  auto profiles = train_profiles(corpora, 100);
  EXPECT_EQ(profiles[0].ranked_ngrams, profiles[1].ranked_ngrams);
}

TEST(TrainProfiles, TopUnigramsMatchIndependentCount) {
  std::map<std::string, std::vector<std::string>> corpora{
      {"en", {"the quick brown fox jumps over the lazy dog",
              "never gonna give you up never gonna let you down"}},
      {"de", {"der schnelle braune fuchs springt ueber den faulen hund",
              "die wuerde des menschen ist unantastbar"}}};
  auto profiles = train_profiles(corpora, 400);

  for (const auto& [lang, texts] : corpora) {
    // Independent unigram count over padded lowercase words.
    std::map<char, long long> counts;
    for (const std::string& text : texts) {
      std::string word;
      auto flush = [&]() {
        if (word.empty()) return;
        ++counts['_'];
        for (char c : word) ++counts[c];
        ++counts['_'];
        word.clear();
      };
      for (char c : text) {
        if (c == ' ') flush();
        else word.push_back(c);
      }
      flush();
    }
    std::vector<std::pair<char, long long>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });

    const LanguageProfile* profile = nullptr;
    for (const auto& p : profiles)
      if (p.lang == lang) profile = &p;
    ASSERT_NE(profile, nullptr);
    std::vector<char> profile_unigrams;
    for (const auto& gram : profile->ranked_ngrams)
      if (gram.size() == 1 && profile_unigrams.size() < 5)
        profile_unigrams.push_back(static_cast<char>(gram[0]));
    for (size_t i = 0; i < 5; ++i)
      EXPECT_EQ(profile_unigrams[i], ranked[i].first) << lang << " rank " << i;
  }
}

TEST(TrainProfiles, LowercasesAndFoldsDigits) {
  std::map<std::string, std::vector<std::string>> corpora{{"x", {"AB12 ab34"}},
                                                          {"y", {"zz zz"}}};
  auto profiles = train_profiles(corpora, 50);
  const auto& grams = profiles[0].ranked_ngrams;
  // "ab00" twice: '0' appears 4 times and outranks 'a'.
  auto rank_of = [&](const std::u32string& g) {
    return std::find(grams.begin(), grams.end(), g) - grams.begin();
  };
  EXPECT_LT(rank_of(U"0"), rank_of(U"a"));
  EXPECT_EQ(std::find(grams.begin(), grams.end(), U"A"), grams.end());
}

TEST(TrainProfiles, ErrorCases) {
  std::map<std::string, std::vector<std::string>> one{{"x", {"abc"}}};
  EXPECT_THROW(train_profiles(one), error);
  std::map<std::string, std::vector<std::string>> empty_corpus{{"x", {"abc"}}, {"y", {}}};
  EXPECT_THROW(train_profiles(empty_corpus), error);
  std::map<std::string, std::vector<std::string>> two{{"x", {"abc"}}, {"y", {"def"}}};
  EXPECT_THROW(train_profiles(two, 0), error);
}

TEST(Identify, TrainingTextIdentifiesAsItsLanguage) {
  SplitMix64 rng(9);
  std::vector<std::string> a = corpus_of(rng, 0, 40);
  std::vector<std::string> b = corpus_of(rng, 1, 40);
  auto profiles = train_profiles({{"aa", a}, {"bb", b}}, 300);
  std::string a_text;
  for (const auto& s : a) a_text += s + " ";
  EXPECT_EQ(identify(profiles, a_text).lang, "aa");
}

TEST(Identify, SingleProfileAlwaysWins) {
  LanguageProfile p{"only", {U"a", U"b"}, 10};
  EXPECT_EQ(identify({p}, "completely unrelated").lang, "only");
}

TEST(Identify, OrderOfProfilesDoesNotMatter) {
  SplitMix64 rng(13);
  auto profiles = train_profiles(
      {{"aa", corpus_of(rng, 0, 30)}, {"bb", corpus_of(rng, 1, 30)}}, 200);
  std::string text = testutil::synth_sentence(rng, 1);
  auto fwd = identify(profiles, text);
  std::vector<LanguageProfile> reversed(profiles.rbegin(), profiles.rend());
  auto rev = identify(reversed, text);
  EXPECT_EQ(fwd.lang, rev.lang);
  EXPECT_EQ(fwd.distance, rev.distance);
}

TEST(Identify, EmptyTextFails) {
  LanguageProfile p{"x", {U"a"}, 10};
  EXPECT_THROW(identify({p}, ""), error);
  EXPECT_THROW(identify({p}, "   "), error);
  EXPECT_THROW(identify({}, "abc"), error);
}

TEST(Identify, HeldOutAccuracyAtLeast95Percent) {
  SplitMix64 train_rng(101);
  auto profiles = train_profiles(
      {{"aa", corpus_of(train_rng, 0, 200)}, {"bb", corpus_of(train_rng, 1, 200)}}, 300);
  SplitMix64 test_rng(202);  // held out
  int correct = 0, total = 0;
  for (int which = 0; which < 2; ++which) {
    for (int i = 0; i < 50; ++i) {
      std::string sentence = testutil::synth_sentence(test_rng, which);
      std::string expected = which == 0 ? "aa" : "bb";
      correct += identify(profiles, sentence).lang == expected;
      ++total;
    }
  }
  EXPECT_GE(correct, 95) << "accuracy " << (100.0 * correct / total) << "%";
}

TEST(OffTarget, PerfectHypothesesScoreZero) {
  SplitMix64 rng(17);
  auto profiles = train_profiles(
      {{"aa", corpus_of(rng, 0, 100)}, {"bb", corpus_of(rng, 1, 100)}}, 300);
  std::vector<TranslationRecord> records;
  for (int i = 0; i < 30; ++i) {
    std::string ref = testutil::synth_sentence(rng, 0);
    records.push_back(record_for("aa", ref, ref, ref));
  }
  OffTargetResult r = off_target_rate(records, profiles, HypSide::comp);
  EXPECT_DOUBLE_EQ(r.rate, 0.0);
  EXPECT_GT(r.evaluated, 0u);
}

TEST(OffTarget, WrongLanguageHypothesesScoreOne) {
  SplitMix64 rng(19);
  auto profiles = train_profiles(
      {{"aa", corpus_of(rng, 0, 100)}, {"bb", corpus_of(rng, 1, 100)}}, 300);
  std::vector<TranslationRecord> records;
  for (int i = 0; i < 30; ++i)
    records.push_back(record_for("aa", testutil::synth_sentence(rng, 0),
                                 testutil::synth_sentence(rng, 0),
                                 testutil::synth_sentence(rng, 1)));
  OffTargetResult r = off_target_rate(records, profiles, HypSide::comp);
  EXPECT_DOUBLE_EQ(r.rate, 1.0);
}

TEST(OffTarget, RecoversInjectedThirtyPercent) {
  SplitMix64 rng(23);
  auto profiles = train_profiles(
      {{"aa", corpus_of(rng, 0, 200)}, {"bb", corpus_of(rng, 1, 200)}}, 300);
  std::vector<TranslationRecord> records;
  for (int i = 0; i < 100; ++i) {
    bool off = i % 10 < 3;  // 30 of 100 injected off-target
    std::string ref = testutil::synth_sentence(rng, 0);
    std::string hyp = off ? testutil::synth_sentence(rng, 1) : testutil::synth_sentence(rng, 0);
    records.push_back(record_for("aa", ref, ref, hyp));
  }
  OffTargetResult r = off_target_rate(records, profiles, HypSide::comp);
  EXPECT_NEAR(r.rate, 0.30, 0.05);
}

TEST(OffTarget, MismatchedReferencesAreExcluded) {
  SplitMix64 rng(29);
  auto profiles = train_profiles(
      {{"aa", corpus_of(rng, 0, 100)}, {"bb", corpus_of(rng, 1, 100)}}, 300);
  std::vector<TranslationRecord> records;
  // Reference text is language bb but tagged aa: excluded, off-target or not.
  for (int i = 0; i < 5; ++i)
    records.push_back(record_for("aa", testutil::synth_sentence(rng, 1),
                                 testutil::synth_sentence(rng, 0),
                                 testutil::synth_sentence(rng, 1)));
  records.push_back(record_for("aa", testutil::synth_sentence(rng, 0),
                               testutil::synth_sentence(rng, 0),
                               testutil::synth_sentence(rng, 0)));
  OffTargetResult r = off_target_rate(records, profiles, HypSide::comp);
  EXPECT_EQ(r.evaluated, 1u);
  EXPECT_DOUBLE_EQ(r.rate, 0.0);
  EXPECT_LE(r.evaluated, records.size());
}

TEST(OffTarget, InjectionOnlyRaisesRate) {
  SplitMix64 rng(31);
  auto profiles = train_profiles(
      {{"aa", corpus_of(rng, 0, 150)}, {"bb", corpus_of(rng, 1, 150)}}, 300);
  std::vector<TranslationRecord> clean;
  for (int i = 0; i < 40; ++i) {
    std::string ref = testutil::synth_sentence(rng, 0);
    clean.push_back(record_for("aa", ref, ref, testutil::synth_sentence(rng, 0)));
  }
  std::vector<TranslationRecord> corrupted = clean;
  for (int i = 0; i < 10; ++i) {
    std::string ref = testutil::synth_sentence(rng, 0);
    corrupted.push_back(record_for("aa", ref, ref, testutil::synth_sentence(rng, 1)));
  }
  EXPECT_LE(off_target_rate(clean, profiles, HypSide::comp).rate,
            off_target_rate(corrupted, profiles, HypSide::comp).rate);
}

TEST(OffTarget, MissingProfileFails) {
  SplitMix64 rng(37);
  auto profiles = train_profiles(
      {{"aa", corpus_of(rng, 0, 50)}, {"bb", corpus_of(rng, 1, 50)}}, 100);
  std::vector<TranslationRecord> records{record_for("cc", "ref text", "hyp", "hyp")};
  EXPECT_THROW(off_target_rate(records, profiles, HypSide::comp), error);
}
