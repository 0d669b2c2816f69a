// Copyright 2026 The vqar Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <set>
#include <string>

#include "support.hpp"
#include "vqar/corpus.hpp"

namespace vqar {
namespace {

TEST(InferQuestionType, Templates) {
  EXPECT_EQ(infer_question_type("What is the provenance of the vase?"), QuestionType::Provenance);
  EXPECT_EQ(infer_question_type("WHAT IS THE DATE OF THE VASE?"), QuestionType::Date);
  EXPECT_EQ(infer_question_type("What is the shape name of the vase?"), QuestionType::Shape);
  EXPECT_EQ(infer_question_type("Who is it attributed to?"), QuestionType::Attribution);
  EXPECT_EQ(infer_question_type("Describe this object."), QuestionType::General);
  EXPECT_EQ(infer_question_type(""), QuestionType::General);
}

TEST(TypeNames, RoundTripAndAliases) {
  for (auto t : kAllQuestionTypes) EXPECT_EQ(type_from_name(type_name(t)), t);
  EXPECT_EQ(type_from_name("Attribute"), QuestionType::Attribution);
  EXPECT_EQ(type_from_name("SHAPE NAME"), QuestionType::Shape);
  EXPECT_THROW(type_from_name("colour"), InputError);
}

TEST(ExtractAnswerCore, Templates) {
  EXPECT_EQ(extract_answer_core("The fabric of the vase is ATHENIAN."), "ATHENIAN");
  EXPECT_EQ(extract_answer_core("ATHENIAN"), "ATHENIAN");
  EXPECT_EQ(extract_answer_core("The date of the vase is -450 to -400."), "-450 to -400");
  EXPECT_EQ(extract_answer_core("the vase is ATTRIBUTED to Codrus P"), "Codrus P");
  EXPECT_EQ(extract_answer_core("  The technique of the vase is RED-FIGURE.  "), "RED-FIGURE");
  // A typed call only strips the matching attribute phrase.
  EXPECT_EQ(extract_answer_core("The fabric of the vase is X.", QuestionType::Technique),
            "The fabric of the vase is X");
  EXPECT_EQ(extract_answer_core("The shape name of the vase is CUP B.", QuestionType::Shape), "CUP B");
  EXPECT_EQ(extract_answer_core("the of the vase is x"), "the of the vase is x");
}

TEST(ParseCorpus, SampleTechnique) {
  auto raw = fixture::record("1", "a.jpg", {{"What is the technique of the vase?",
                                             "The technique of the vase is RED-FIGURE."}});
  auto c = parse_corpus(json::array({raw}).dump());
  ASSERT_EQ(c.records.size(), 1u);
  ASSERT_EQ(c.records[0].qa_pairs.size(), 1u);
  EXPECT_EQ(c.records[0].qa_pairs[0].question_type, QuestionType::Technique);
}

TEST(ParseCorpus, EmptyArray) { EXPECT_TRUE(parse_corpus("[]").records.empty()); }

TEST(ParseCorpus, FullExchangeAndAlternatives) {
  auto c = parse_corpus(fixture::sample_corpus());
  ASSERT_EQ(c.question_count(), 8u);
  const auto& qa = c.records[0].qa_pairs;
  EXPECT_EQ(qa[5].question_type, QuestionType::Attribution);
  ASSERT_EQ(qa[5].alternatives.size(), 2u);
  EXPECT_EQ(qa[5].alternatives[1], "CODRUS P by UNKNOWN.");
  EXPECT_EQ(qa[7].question_type, QuestionType::General);
  for (const auto& p : qa) EXPECT_EQ(text::join(p.alternatives, " | "), text::trim(p.reference_answer));
}

TEST(ParseCorpus, RejectsTwoHumanTurns) {
  json rec = {{"id", "bad7"},
              {"image", "x.jpg"},
              {"conversations",
               {{{"from", "human"}, {"value", "What is the fabric of the vase?"}},
                {{"from", "human"}, {"value", "What is the date of the vase?"}}}}};
  try {
    parse_corpus(json::array({rec}).dump());
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.record_id(), "bad7");
  }
}

TEST(ParseCorpus, MalformedJsonReportsOffset) {
  try {
    parse_corpus("[{\"id\": 1,,}]");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.offset(), 0u);
  }
}

TEST(LoadCorpus, IssuesAreLineAnchored) {
  std::string raw = "[\n" + fixture::record("a", "a.jpg", {{"q fabric", "x"}}).dump() + ",\n" +
                    fixture::record("a", "b.jpg", {{"q fabric", "y"}}).dump() + ",\n" +
                    fixture::record("c", "c.jpg", {{"What now?", "z"}}).dump() + "\n]";
  auto load = load_corpus(raw);
  EXPECT_FALSE(load.ok());
  ASSERT_EQ(load.issues.size(), 2u);
  EXPECT_EQ(load.issues[0].line, 3u);
  EXPECT_EQ(load.issues[0].record_id, "a");
  EXPECT_NE(load.issues[0].to_string().find("duplicate record id 'a'"), std::string::npos);
  EXPECT_EQ(load.issues[1].severity, CorpusIssue::Severity::Warning);
  EXPECT_EQ(load.issues[1].line, 4u);
  EXPECT_EQ(load.corpus.records.size(), 2u);
}

TEST(LoadCorpus, NumericIdsBecomeStrings) {
  auto rec = fixture::record("x", "i", {{"What is the date?", "500 BC"}});
  rec["id"] = 42;
  auto c = parse_corpus(json::array({rec}).dump());
  ASSERT_EQ(c.records.size(), 1u);
  EXPECT_EQ(c.records[0].id, "42");
}

TEST(Serialize, RoundTrip) {
  auto c = parse_corpus(fixture::manifest(5));
  auto again = parse_corpus(serialize_corpus(c));
  EXPECT_EQ(c.records, again.records);
}

TEST(SplitCorpus, SizesMatchTableThree) {
  Corpus c;
  for (int i = 0; i < 11693; ++i) c.records.push_back({std::to_string(i), "", {}});
  auto s = split_corpus(c, 0.2, 1);
  EXPECT_EQ(s.train.records.size(), 9354u);
  EXPECT_EQ(s.test.records.size(), 2339u);
}

TEST(SplitCorpus, PartitionAndDeterminism) {
  Corpus c;
  for (int i = 0; i < 57; ++i) c.records.push_back({"id" + std::to_string(i), "", {}});
  auto a = split_corpus(c, 0.3, 99), b = split_corpus(c, 0.3, 99), other = split_corpus(c, 0.3, 100);
  EXPECT_EQ(a.manifest(), b.manifest());
  EXPECT_NE(a.manifest()["test_ids"], other.manifest()["test_ids"]);
  std::set<std::string> all;
  for (const auto& r : a.train.records) all.insert(r.id);
  for (const auto& r : a.test.records) EXPECT_TRUE(all.insert(r.id).second);
  EXPECT_EQ(all.size(), 57u);
  EXPECT_EQ(a.train.split_label, SplitLabel::Train);
  EXPECT_EQ(a.test.split_label, SplitLabel::Test);
}

TEST(SplitCorpus, SmallestAndInvalid) {
  Corpus c;
  c.records = {{"a", "", {}}, {"b", "", {}}};
  auto s = split_corpus(c, 0.5, 3);
  EXPECT_EQ(s.train.records.size(), 1u);
  EXPECT_EQ(s.test.records.size(), 1u);
  EXPECT_THROW(split_corpus(c, 0.0, 3), ConfigError);
  EXPECT_THROW(split_corpus(c, 1.0, 3), ConfigError);
  Corpus one;
  one.records = {{"a", "", {}}};
  EXPECT_THROW(split_corpus(one, 0.5, 3), InputError);
}

TEST(Predictions, ParseAndErrors) {
  auto p = parse_predictions(
      "{\"id\":\"a\",\"question_type\":\"fabric\",\"prediction\":\"X\"}\n\n"
      "{\"id\":7,\"question_type\":\"Date\",\"prediction\":\"500 BC\"}\n");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[1].id, "7");
  EXPECT_EQ(p[1].question_type, QuestionType::Date);
  EXPECT_EQ(parse_predictions(serialize_predictions(p)), p);
  EXPECT_THROW(parse_predictions("{\"id\":\"a\",\"question_type\":\"fabric\",\"prediction\":\"X\"}\n"
                                 "{\"id\":\"a\",\"question_type\":\"fabric\",\"prediction\":\"Y\"}"),
               SchemaError);
  EXPECT_THROW(parse_predictions("{\"id\":\"a\",\"question_type\":\"colour\",\"prediction\":\"X\"}"),
               SchemaError);
  EXPECT_THROW(parse_predictions("{oops"), ParseError);
}

TEST(Summary, CountsPerType) {
  auto s = summarize(parse_corpus(fixture::manifest(3)));
  EXPECT_EQ(s.records, 3u);
  EXPECT_EQ(s.questions, 24u);
  EXPECT_EQ(s.per_type.at(QuestionType::Decoration), 3u);
}

}  // namespace
}  // namespace vqar
