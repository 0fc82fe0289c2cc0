#include "fedpat/presentation.hpp"

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "support/testutil.hpp"

namespace {

using fedpat::ChronRecord;
using fedpat::FeatureMap;
using fedpat::Pattern;
using fedpat::PresentationRow;
using fedpat::RankedPattern;
using fedpat::RawLogRecord;
using fedpat::RecordIndex;
using fedpat::ReportFormat;
using fedpat::Transaction;

// Small fixture: two web hits and one login, grouped into two transactions.
struct Toy {
  std::vector<RawLogRecord> records;
  std::vector<ChronRecord> chron;
  std::vector<Transaction> txns;
  FeatureMap fmap;
  RecordIndex index;

  Toy() {
    RawLogRecord a;
    a.source_file = "a.log";
    a.original_index = 0;
    a.timestamp = 1110879000;  // 2005-03-15 09:30:00
    a.log_type = "http";
    a.attributes = {{"ClientIP", "10.0.0.1"},
                    {"HTTP_method", "GET"},
                    {"ClientRequestLine", "GET /index.html"}};
    RawLogRecord b;
    b.source_file = "a.log";
    b.original_index = 1;
    b.timestamp = 1110879005;
    b.log_type = "http";
    b.attributes = {{"ClientIP", "10.0.0.2"}};  // no method, no request
    RawLogRecord c;
    c.source_file = "s.log";
    c.original_index = 0;
    c.timestamp = 1110879010;
    c.log_type = "syslog";
    c.attributes = {{"User", "root"},
                    {"Operation", "session opened"},
                    {"Source", "10.9.9.9"}};
    records = {a, b, c};

    for (const auto& r : records) {
      ChronRecord cr;
      cr.datetime = r.timestamp;
      cr.log_type = r.log_type;
      cr.pid = r.pid.value_or(1);
      cr.source_file = r.source_file;
      cr.original_index = r.original_index;
      cr.phase1_label = (r.log_type == "http") ? "E2" : "S0";
      chron.push_back(cr);
    }

    txns.push_back(Transaction{0, {"E2"}, {{"a.log", 0}, {"a.log", 1}}});
    txns.push_back(Transaction{1, {"S0"}, {{"s.log", 0}}});

    fmap.by_log_type["http"] = {
        {"ClientIP", {"SrcIP"}},
        {"HTTP_method", {"Medium"}},
        {"ClientRequestLine", {"Message"}},
    };
    fmap.by_log_type["syslog"] = {
        {"User", {"User", "Target"}},  // one attribute can fill two fields
        {"Operation", {"Message"}},
        {"Source", {"SrcIP"}},
    };

    index.add_records(records);
    index.add_chron(chron);
  }

  RankedPattern ranked_for(int instance, std::vector<std::string> labels,
                           int rank = 1) const {
    RankedPattern r;
    r.rank = rank;
    r.pattern.labels = std::move(labels);
    r.pattern.instances = {instance};
    r.score = 4.0;
    return r;
  }
};

TEST(RenderPattern, FillsAutomaticAndMappedFields) {
  const Toy toy;
  const auto rows = fedpat::render_pattern(toy.ranked_for(0, {"E2"}),
                                           toy.txns, toy.index, toy.fmap);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].date, "2005-03-15");
  EXPECT_EQ(rows[0].time, "09:30:00");
  EXPECT_EQ(rows[0].label, "E2");
  EXPECT_EQ(rows[0].medium, "GET");
  EXPECT_EQ(rows[0].message, "GET /index.html");
  EXPECT_EQ(rows[0].src_ip, "10.0.0.1");
  // Fields with no mapped attribute stay "-".
  EXPECT_EQ(rows[0].message2, "-");
  EXPECT_EQ(rows[0].dest_ip, "-");
  EXPECT_EQ(rows[0].user, "-");
  EXPECT_EQ(rows[0].target, "-");
  // Second member lacks the method/request attributes entirely.
  EXPECT_EQ(rows[1].time, "09:30:05");
  EXPECT_EQ(rows[1].src_ip, "10.0.0.2");
  EXPECT_EQ(rows[1].medium, "-");
  EXPECT_EQ(rows[1].message, "-");
}

TEST(RenderPattern, OneAttributeCanFillTwoFields) {
  const Toy toy;
  const auto rows = fedpat::render_pattern(toy.ranked_for(1, {"S0"}),
                                           toy.txns, toy.index, toy.fmap);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].user, "root");
  EXPECT_EQ(rows[0].target, "root");
  EXPECT_EQ(rows[0].message, "session opened");
  EXPECT_EQ(rows[0].src_ip, "10.9.9.9");
  EXPECT_EQ(rows[0].label, "S0");
}

TEST(RenderPattern, ErrorsOnInconsistentInputs) {
  const Toy toy;
  // Unknown transaction id.
  EXPECT_THROW(fedpat::render_pattern(toy.ranked_for(9, {"E2"}), toy.txns,
                                      toy.index, toy.fmap),
               fedpat::InputError);
  // Member record absent from the index.
  RecordIndex empty_index;
  EXPECT_THROW(fedpat::render_pattern(toy.ranked_for(0, {"E2"}), toy.txns,
                                      empty_index, toy.fmap),
               fedpat::InputError);
  // Missing per-log-type mapping.
  FeatureMap partial;
  partial.by_log_type["syslog"] = {};
  EXPECT_THROW(fedpat::render_pattern(toy.ranked_for(0, {"E2"}), toy.txns,
                                      toy.index, partial),
               fedpat::InputError);
}

TEST(FeatureMapFile, ParsesStringsAndLists) {
  testutil::ScopedTempDir td;
  testutil::write_file(td.file("fmap.json"), R"({
    "http": {"ClientIP": "SrcIP", "HTTP_method": "Medium"},
    "syslog": {"User": ["User", "Target"]}
  })");
  const auto fmap = fedpat::load_feature_map(td.file("fmap.json"));
  ASSERT_EQ(fmap.by_log_type.size(), 2u);
  EXPECT_EQ(fmap.by_log_type.at("http").at("ClientIP"),
            (std::vector<std::string>{"SrcIP"}));
  EXPECT_EQ(fmap.by_log_type.at("syslog").at("User"),
            (std::vector<std::string>{"User", "Target"}));
}

TEST(FeatureMapFile, RejectsBadTargets) {
  testutil::ScopedTempDir td;
  testutil::write_file(td.file("unknown.json"),
                       R"({"http": {"A": "NoSuchField"}})");
  EXPECT_THROW(fedpat::load_feature_map(td.file("unknown.json")),
               fedpat::InputError);
  // Date, Time and Label are filled automatically.
  for (const char* reserved : {"Date", "Time", "Label"}) {
    testutil::write_file(td.file("reserved.json"),
                         std::string(R"({"http": {"A": ")") + reserved +
                             R"("}})");
    EXPECT_THROW(fedpat::load_feature_map(td.file("reserved.json")),
                 fedpat::InputError)
        << reserved;
  }
  // Two attributes cannot fight over one field.
  testutil::write_file(td.file("dup.json"),
                       R"({"http": {"A": "SrcIP", "B": "SrcIP"}})");
  EXPECT_THROW(fedpat::load_feature_map(td.file("dup.json")),
               fedpat::InputError);
  testutil::write_file(td.file("notobj.json"), R"(["x"])");
  EXPECT_THROW(fedpat::load_feature_map(td.file("notobj.json")),
               fedpat::InputError);
  EXPECT_THROW(fedpat::load_feature_map(td.file("absent.json")),
               fedpat::InputError);
}

TEST(FeatureMapFromSchemas, CollectsAnnotatedTargets) {
  testutil::ScopedTempDir td;
  testutil::write_file(td.file("web.schema"),
                       "$ClientIP ->SrcIP\n"
                       "HTTP_method phase1 ->Medium\n"
                       "@Referrer\n");
  const auto schema = fedpat::load_schema(td.file("web.schema"));
  const auto fmap = fedpat::feature_map_from_schemas({{"http", schema}});
  const auto& m = fmap.by_log_type.at("http");
  ASSERT_EQ(m.size(), 2u);  // Referrer has no target
  EXPECT_EQ(m.at("ClientIP"), (std::vector<std::string>{"SrcIP"}));
  EXPECT_EQ(m.at("HTTP_method"), (std::vector<std::string>{"Medium"}));
}

TEST(RankingIndex, WritesTheExpectedColumns) {
  RankedPattern r;
  r.rank = 1;
  r.pattern.labels = {"E1", "S2"};
  r.pattern.instances = {3, 7};
  r.score = 512.5;
  std::ostringstream os;
  fedpat::write_ranking_index(os, {r});
  const std::string text = os.str();
  EXPECT_NE(text.find("rank,labels,supports,num_instances,score,log10_score"),
            std::string::npos);
  EXPECT_NE(text.find("1,E1 S2,3 7,2,512.5,2.710"), std::string::npos);
}

TEST(RankingIndex, Roundtrip) {
  std::vector<RankedPattern> ranked;
  for (int i = 0; i < 3; ++i) {
    RankedPattern r;
    r.rank = i + 1;
    r.pattern.labels = {"L" + std::to_string(i), "M" + std::to_string(i)};
    r.pattern.instances = {i, i + 10};
    r.score = 100.0 / (i + 1);
    ranked.push_back(r);
  }
  testutil::ScopedTempDir td;
  {
    std::ofstream os(td.file("ranking.csv"), std::ios::binary);
    fedpat::write_ranking_index(os, ranked);
  }
  const auto back = fedpat::read_ranking_index(td.file("ranking.csv"));
  ASSERT_EQ(back.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].rank, ranked[i].rank);
    EXPECT_EQ(back[i].pattern.labels, ranked[i].pattern.labels);
    EXPECT_EQ(back[i].pattern.instances, ranked[i].pattern.instances);
    EXPECT_NEAR(back[i].score, ranked[i].score, 1e-3 * ranked[i].score);
  }
}

TEST(RankingIndex, RejectsForeignFiles) {
  testutil::ScopedTempDir td;
  testutil::write_file(td.file("foreign.csv"), "a,b\r\n1,2\r\n");
  EXPECT_THROW(fedpat::read_ranking_index(td.file("foreign.csv")),
               fedpat::InputError);
}

TEST(ReportFormat, FromString) {
  EXPECT_EQ(fedpat::report_format_from_string("csv"), ReportFormat::Csv);
  EXPECT_EQ(fedpat::report_format_from_string("markdown"),
            ReportFormat::Markdown);
  EXPECT_EQ(fedpat::report_format_from_string("md"), ReportFormat::Markdown);
  EXPECT_EQ(fedpat::report_format_from_string("html"), ReportFormat::Html);
  EXPECT_THROW(fedpat::report_format_from_string("pdf"), fedpat::InputError);
}

TEST(Report, CsvCarriesIndexAndRows) {
  const Toy toy;
  const auto ranked = fedpat::rank_patterns(
      fedpat::extract_patterns(toy.txns), toy.txns.size());
  std::vector<std::vector<PresentationRow>> rendered;
  for (const auto& r : ranked) {
    rendered.push_back(
        fedpat::render_pattern(r, toy.txns, toy.index, toy.fmap));
  }
  const std::string report =
      fedpat::render_report(ranked, rendered, ReportFormat::Csv);
  // Index header, blank separator, then the 11-column row table.
  EXPECT_NE(report.find("rank,labels,supports,num_instances,score"),
            std::string::npos);
  EXPECT_NE(
      report.find("rank,Date,Time,Medium,Message,Message2,SrcIP,DestIP,"
                  "User,Target,Label"),
      std::string::npos);
  EXPECT_NE(report.find("2005-03-15,09:30:00"), std::string::npos);
  EXPECT_NE(report.find("10.0.0.1"), std::string::npos);
  // The index section re-parses from the same file.
  testutil::ScopedTempDir td;
  fedpat::emit_report(td.file("report.csv"), ranked, rendered,
                      ReportFormat::Csv);
  const auto back = fedpat::read_ranking_index(td.file("report.csv"));
  ASSERT_EQ(back.size(), ranked.size());
  EXPECT_EQ(back[0].pattern.labels, ranked[0].pattern.labels);
}

TEST(Report, MarkdownHasIndexAndTenFieldTables) {
  const Toy toy;
  const auto ranked = fedpat::rank_patterns(
      fedpat::extract_patterns(toy.txns), toy.txns.size());
  std::vector<std::vector<PresentationRow>> rendered;
  for (const auto& r : ranked) {
    rendered.push_back(
        fedpat::render_pattern(r, toy.txns, toy.index, toy.fmap));
  }
  const std::string md =
      fedpat::render_report(ranked, rendered, ReportFormat::Markdown);
  EXPECT_NE(md.find("| Rank | Pattern | Supports | Score | log10(s) |"),
            std::string::npos);
  EXPECT_NE(md.find("| Date | Time | Medium | Message | Message2 | SrcIP "
                    "| DestIP | User | Target | Label |"),
            std::string::npos);
  EXPECT_NE(md.find("## Rank 1:"), std::string::npos);
}

TEST(Report, HtmlEscapesCells) {
  Toy toy;
  toy.records[0].attributes["ClientRequestLine"] = "GET /<script>&x";
  toy.index = RecordIndex();  // rebuild over the mutated records
  toy.index.add_records(toy.records);
  toy.index.add_chron(toy.chron);
  const auto ranked = fedpat::rank_patterns(
      fedpat::extract_patterns(toy.txns), toy.txns.size());
  std::vector<std::vector<PresentationRow>> rendered;
  for (const auto& r : ranked) {
    rendered.push_back(
        fedpat::render_pattern(r, toy.txns, toy.index, toy.fmap));
  }
  const std::string html =
      fedpat::render_report(ranked, rendered, ReportFormat::Html);
  EXPECT_NE(html.find("GET /&lt;script&gt;&amp;x"), std::string::npos);
  EXPECT_EQ(html.find("<script>"), std::string::npos);
  EXPECT_NE(html.find("<title>Pattern report</title>"), std::string::npos);
}

TEST(Report, ValidatesAlignment) {
  RankedPattern r;
  r.rank = 1;
  r.pattern.labels = {"X"};
  r.pattern.instances = {0};
  r.score = 1.0;
  EXPECT_THROW(fedpat::render_report({}, {}, ReportFormat::Csv),
               fedpat::InputError);
  EXPECT_THROW(fedpat::render_report({r}, {}, ReportFormat::Csv),
               fedpat::InputError);
}

}  // namespace
