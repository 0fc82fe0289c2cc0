#include "fedpat/encode.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <initializer_list>
#include <random>
#include <sstream>

namespace {

using fedpat::AttrKind;
using fedpat::RawLogRecord;
using fedpat::Schema;
using fedpat::normalize_text;

RawLogRecord rec(std::map<std::string, std::string> attrs) {
  RawLogRecord r;
  r.attributes = std::move(attrs);
  return r;
}

Schema schema_of(std::initializer_list<const char*> lines) {
  Schema s;
  for (const char* line : lines) s.push_back(*fedpat::parse_schema_line(line));
  return s;
}

TEST(NormalizeText, NumberAndHexRuns) {
  EXPECT_EQ(normalize_text("GET /page?id=12345"), "get /page?id=<NUM>");
  EXPECT_EQ(normalize_text("error 404 on 8080"), "error <NUM> on <NUM>");
  EXPECT_EQ(normalize_text("session deadbeef42 opened"),
            "session <HEX> opened");
  EXPECT_EQ(normalize_text("AB12CD34"), "<HEX>");  // digit+letter mix, len 8
  EXPECT_EQ(normalize_text("a1b"), "a1b");  // mixed but shorter than 4
  EXPECT_EQ(normalize_text("cafe"), "cafe");  // letters only stay words
  EXPECT_EQ(normalize_text("7"), "<NUM>");    // any all-digit run
}

TEST(NormalizeText, CaseAndWhitespace) {
  EXPECT_EQ(normalize_text("  Mixed   CASE\ttext \n"), "mixed case text");
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text("   "), "");
}

TEST(Encode, OneHotNominal) {
  const Schema schema = schema_of({"HTTP_method phase1"});
  const std::vector<RawLogRecord> records = {
      rec({{"HTTP_method", "GET"}}),
      rec({{"HTTP_method", "POST"}}),
      rec({{"HTTP_method", "GET"}}),
  };
  const auto fm = fedpat::encode(records, schema);
  ASSERT_EQ(fm.data.cols(), 2u);  // GET, POST in lexicographic order
  EXPECT_EQ(fm.columns[0].value, "GET");
  EXPECT_EQ(fm.columns[1].value, "POST");
  EXPECT_DOUBLE_EQ(fm.data(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(fm.data(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(fm.data(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(fm.data(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(fm.data(2, 0), 1.0);
  EXPECT_EQ(fedpat::column_name(fm.columns[0]), "HTTP_method=GET");
}

TEST(Encode, OrdinalNumericOrder) {
  const Schema schema = schema_of({"~ObjectSize phase1"});
  const std::vector<RawLogRecord> records = {
      rec({{"ObjectSize", "10"}}),
      rec({{"ObjectSize", "2"}}),
      rec({{"ObjectSize", "2"}}),
  };
  const auto fm = fedpat::encode(records, schema);
  ASSERT_EQ(fm.data.cols(), 1u);
  // "2" codes to 0, "10" codes to 1 (numeric, not lexicographic), then
  // min-max scaling keeps {0,1}.
  EXPECT_DOUBLE_EQ(fm.data(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(fm.data(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(fm.data(2, 0), 0.0);
  ASSERT_EQ(fm.columns[0].dictionary.size(), 2u);
  EXPECT_EQ(fm.columns[0].dictionary[0], "2");
  EXPECT_EQ(fm.columns[0].dictionary[1], "10");
}

TEST(Encode, TextNormalizedBeforeDictionary) {
  const Schema schema = schema_of({"@Message phase1"});
  const std::vector<RawLogRecord> records = {
      rec({{"Message", "error 404 in request 17"}}),
      rec({{"Message", "ERROR 500 in request 9"}}),
      rec({{"Message", "totally different"}}),
  };
  const auto fm = fedpat::encode(records, schema);
  ASSERT_EQ(fm.data.cols(), 1u);
  // The two error lines normalize to the same token string.
  EXPECT_DOUBLE_EQ(fm.data(0, 0), fm.data(1, 0));
  EXPECT_NE(fm.data(0, 0), fm.data(2, 0));
  EXPECT_EQ(fm.columns[0].dictionary.size(), 2u);
}

TEST(Encode, MinMaxScalingAndConstantColumn) {
  const Schema schema = schema_of({"~Port phase1", "~Fixed phase1"});
  const std::vector<RawLogRecord> records = {
      rec({{"Port", "1"}, {"Fixed", "5"}}),
      rec({{"Port", "3"}, {"Fixed", "5"}}),
      rec({{"Port", "2"}, {"Fixed", "5"}}),
  };
  const auto fm = fedpat::encode(records, schema);
  ASSERT_EQ(fm.data.cols(), 2u);
  EXPECT_DOUBLE_EQ(fm.data(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(fm.data(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(fm.data(2, 0), 0.5);
  // Constant column: all zeros.
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(fm.data(i, 1), 0.0);
  // min/max recorded before scaling (codes 0..2 for Port, single code for
  // Fixed).
  EXPECT_DOUBLE_EQ(fm.columns[0].min, 0.0);
  EXPECT_DOUBLE_EQ(fm.columns[0].max, 2.0);
  EXPECT_DOUBLE_EQ(fm.columns[1].min, 0.0);
  EXPECT_DOUBLE_EQ(fm.columns[1].max, 0.0);
}

TEST(Encode, UsesAllAttributesWhenNoneFlagged) {
  const Schema schema = schema_of({"A", "B"});
  const std::vector<RawLogRecord> records = {
      rec({{"A", "x"}, {"B", "1"}}),
      rec({{"A", "y"}, {"B", "2"}}),
  };
  const auto fm = fedpat::encode(records, schema);
  // A one-hot (2 categories) + B one-hot (2 categories).
  EXPECT_EQ(fm.data.cols(), 4u);
}

TEST(Encode, MissingAttributeBecomesEmptyCategory) {
  const Schema schema = schema_of({"StatusCode phase1"});
  const std::vector<RawLogRecord> records = {
      rec({{"StatusCode", "200"}}),
      rec({}),
  };
  const auto fm = fedpat::encode(records, schema);
  ASSERT_EQ(fm.data.cols(), 2u);  // "" and "200"
  EXPECT_EQ(fm.columns[0].value, "");
  EXPECT_DOUBLE_EQ(fm.data(1, 0), 1.0);
}

TEST(Encode, CodesIndependentOfRecordOrder) {
  const Schema schema = schema_of({"@Msg phase1", "Status phase1"});
  std::vector<RawLogRecord> records;
  const char* msgs[] = {"alpha one", "beta two", "gamma three", "delta four"};
  const char* sts[] = {"200", "404", "500"};
  for (int i = 0; i < 24; ++i) {
    records.push_back(
        rec({{"Msg", msgs[i % 4]}, {"Status", sts[i % 3]}}));
  }
  const auto base = fedpat::encode(records, schema);

  std::mt19937 g(99);
  for (int trial = 0; trial < 5; ++trial) {
    auto shuffled = records;
    std::vector<std::size_t> perm(records.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), g);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      shuffled[i] = records[perm[i]];
    }
    const auto fm = fedpat::encode(shuffled, schema);
    ASSERT_EQ(fm.data.cols(), base.data.cols());
    // Row i of the shuffle equals row perm[i] of the base: same dictionary,
    // so identical records encode identically regardless of position.
    for (std::size_t i = 0; i < perm.size(); ++i) {
      for (std::size_t j = 0; j < base.data.cols(); ++j) {
        EXPECT_DOUBLE_EQ(fm.data(i, j), base.data(perm[i], j));
      }
    }
    EXPECT_EQ(fedpat::columns_digest(fm.columns),
              fedpat::columns_digest(base.columns));
  }
}

TEST(ColumnsDigest, SensitiveToLayout) {
  const Schema schema = schema_of({"A phase1"});
  const std::vector<RawLogRecord> r1 = {rec({{"A", "x"}}), rec({{"A", "y"}})};
  const std::vector<RawLogRecord> r2 = {rec({{"A", "x"}}), rec({{"A", "z"}})};
  const auto d1 = fedpat::columns_digest(fedpat::encode(r1, schema).columns);
  const auto d2 = fedpat::columns_digest(fedpat::encode(r2, schema).columns);
  EXPECT_NE(d1, d2);
  EXPECT_EQ(d1.size(), 16u);  // 64-bit hex
}

TEST(FeaturesCsv, HeaderAndValues) {
  const Schema schema = schema_of({"M phase1"});
  const std::vector<RawLogRecord> records = {rec({{"M", "a"}}),
                                             rec({{"M", "b"}})};
  const auto fm = fedpat::encode(records, schema);
  std::ostringstream os;
  fedpat::write_features_csv(os, fm);
  const auto text = os.str();
  EXPECT_NE(text.find("M=a,M=b"), std::string::npos);
  EXPECT_NE(text.find("1,0"), std::string::npos);
}

}  // namespace
