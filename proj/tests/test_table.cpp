#include <gtest/gtest.h>

#include <random>

#include "prism/csv.hpp"
#include "prism/table.hpp"
#include "support/fixtures.hpp"

using namespace prism;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::Internal;
}

std::vector<std::vector<std::string>> read_all(std::string_view text) {
  csv::Reader reader(text);
  std::vector<std::vector<std::string>> out;
  csv::Record rec;
  while (reader.next(rec)) out.push_back(rec);
  return out;
}

}  // namespace

TEST(Csv, QuotesEscapesAndLineEndings) {
  auto rows = read_all("\xEF\xBB\xBF" "a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n\n\"multi\nline\",\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"x,1", "say \"hi\""}));
  EXPECT_EQ(rows[2], (std::vector<std::string>{"multi\nline", ""}));
}

TEST(Csv, UnterminatedQuoteIsMalformed) {
  EXPECT_EQ(code_of([] { read_all("a\n\"open\n"); }), ErrorCode::MalformedCsv);
}

TEST(Csv, WriterRoundTrip) {
  std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", "line\nbreak", ""};
  std::string out;
  csv::append_record(out, std::vector<std::string_view>(fields.begin(), fields.end()));
  auto rows = read_all(out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0], fields);
}

TEST(Ingest, ThreeRowExampleSchema) {
  auto t = ingest_table("id,split,score\na,train,0.5\nb,train,1\nc,train,2.25\n");
  EXPECT_EQ(t.row_count(), 3u);
  ASSERT_EQ(t.column_count(), 3u);
  EXPECT_EQ(t.column("id").kind(), ColumnKind::id);
  EXPECT_EQ(t.column("split").kind(), ColumnKind::categorical);
  EXPECT_EQ(t.column("score").kind(), ColumnKind::numeric);
  EXPECT_EQ(t.column("score").number(2), 2.25);
  EXPECT_EQ(t.id(1), "b");
}

TEST(Ingest, InferenceThresholds) {
  // 4 distinct of 8 values: ratio 0.5 -> categorical. 5 of 8 -> text.
  std::string src = "key,cat,txt,num\n";
  const char* cats[] = {"a", "b", "c", "d", "a", "b", "c", "d"};
  const char* txts[] = {"a", "b", "c", "d", "e", "a", "b", "c"};
  for (int i = 0; i < 8; ++i) {
    src += "k" + std::to_string(i) + "," + cats[i] + "," + txts[i] + "," + std::to_string(i) + ".5\n";
  }
  auto t = ingest_table(src);
  EXPECT_EQ(t.column("key").kind(), ColumnKind::id);  // first column fallback
  EXPECT_EQ(t.column("cat").kind(), ColumnKind::categorical);
  EXPECT_EQ(t.column("txt").kind(), ColumnKind::text);
  EXPECT_EQ(t.column("num").kind(), ColumnKind::numeric);
}

TEST(Ingest, DistinctCountCapMakesText) {
  std::string src = "id,v\n";
  for (int i = 0; i < 3000; ++i) src += "r" + std::to_string(i) + ",v" + std::to_string(i % 1001) + "\n";
  EXPECT_EQ(ingest_table(src).column("v").kind(), ColumnKind::text);
  InferenceOptions relaxed;
  relaxed.max_distinct = 2000;
  EXPECT_EQ(ingest_table(src, {}, relaxed).column("v").kind(), ColumnKind::categorical);
}

TEST(Ingest, NamedColumnsAndHints) {
  auto t = ingest_table("x,label,pred,code\n1,a,a,7\n2,b,a,8\n", {{"code", ColumnKind::categorical}});
  EXPECT_EQ(t.column("x").kind(), ColumnKind::id);
  EXPECT_EQ(t.column("label").kind(), ColumnKind::label);
  EXPECT_EQ(t.column("pred").kind(), ColumnKind::prediction);
  EXPECT_EQ(t.column("code").kind(), ColumnKind::categorical);
  EXPECT_EQ(t.column("code").text(0), "7");
}

TEST(Ingest, EmptyFieldsAreNull) {
  auto t = ingest_table("id,score,tag\na,,x\nb,2,\nc,3,x\nd,4,x\n");
  EXPECT_TRUE(t.column("score").is_null(0));
  EXPECT_TRUE(t.column("tag").is_null(1));
  EXPECT_TRUE(t.column("score").spec().nullable);
  EXPECT_EQ(t.column("score").null_count(), 1u);
}

TEST(Ingest, Errors) {
  EXPECT_EQ(code_of([] { ingest_table(""); }), ErrorCode::EmptySource);
  EXPECT_EQ(code_of([] { ingest_table("id,split\n"); }), ErrorCode::EmptySource);
  EXPECT_EQ(code_of([] { ingest_table("id,v\na,1\n,2\n"); }), ErrorCode::MissingId);
  EXPECT_EQ(code_of([] { ingest_table("id,v\na,1\nb\n"); }), ErrorCode::RaggedRow);
  EXPECT_EQ(code_of([] { ingest_table("id,v\na,x\n", {{"v", ColumnKind::numeric}}); }), ErrorCode::TypeMismatch);
  EXPECT_EQ(code_of([] { ingest_table("id,v\na,x\n", {{"w", ColumnKind::numeric}}); }), ErrorCode::UnknownColumn);
  EXPECT_EQ(code_of([] { ingest_table("id,id\na,b\n"); }), ErrorCode::SchemaError);
}

TEST(Ingest, DuplicateIdMessageNamesValue) {
  try {
    ingest_table("id,v\na,1\nb,2\na,3\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
    EXPECT_NE(std::string(e.what()).find("\"a\""), std::string::npos) << e.what();
  }
}

TEST(Ingest, RaggedRowMessageNamesRow) {
  try {
    ingest_table("id,v\na,1\nb,2\nc,3,4\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RaggedRow);
    EXPECT_NE(std::string(e.what()).find("row 3 (line 4)"), std::string::npos) << e.what();
  }
}

TEST(Table, RowLookupAndChecksum) {
  auto t = ingest_table("id,v\nb,1\na,2\n");
  EXPECT_EQ(t.row_of("a"), 1u);
  EXPECT_FALSE(t.row_of("zz"));
  EXPECT_EQ(t.rows_for_ids(std::vector<std::string>{"a", "b"}), (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(code_of([&] { t.rows_for_ids(std::vector<std::string>{"q"}); }), ErrorCode::UnknownId);
  // FNV-1a 64 over "b" then "a".
  EXPECT_EQ(t.id_checksum(), encoding::hex64(encoding::fnv1a64("ba")));
}

TEST(Table, ConstructorValidatesInvariants) {
  auto id = [](std::vector<std::optional<std::string>> v) {
    return Column::strings({"id", ColumnKind::id, false}, v);
  };
  auto cat = [](std::string name, ColumnKind kind, std::size_t n) {
    return Column::strings({std::move(name), kind, false}, std::vector<std::optional<std::string>>(n, "x"));
  };
  EXPECT_EQ(code_of([&] { MetadataTable({cat("a", ColumnKind::categorical, 2)}); }), ErrorCode::MissingId);
  EXPECT_EQ(code_of([&] { MetadataTable({id({"a", "b"}), cat("c", ColumnKind::categorical, 3)}); }),
            ErrorCode::SchemaError);
  EXPECT_EQ(code_of([&] { MetadataTable({id({"a", "b"}), cat("l", ColumnKind::label, 2), cat("m", ColumnKind::label, 2)}); }),
            ErrorCode::SchemaError);
  EXPECT_NO_THROW(MetadataTable({id({"a", "b"}), cat("l", ColumnKind::label, 2), cat("p", ColumnKind::prediction, 2)}));
}

// ingest -> write -> re-ingest gives an equal table (schema, order, values).
TEST(TableProperty, CsvRoundTripIsIdentity) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    auto raw = prism::testing::random_table(rng, 1 + rng() % 300);
    auto t = raw.ingest();
    auto again = ingest_table(write_table_csv(t), hints_from_schema(t.schema()));
    ASSERT_EQ(t, again) << "trial " << trial;
    ASSERT_EQ(t.row_count(), raw.rows.size());
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
      for (std::size_t c = 0; c < raw.header.size(); ++c) {
        const auto& col = t.column(raw.header[c]);
        ASSERT_EQ(col.is_null(r), !raw.rows[r][c].has_value());
        if (raw.rows[r][c] && !col.is_numeric()) {
          ASSERT_EQ(col.text(r), *raw.rows[r][c]);
        }
      }
    }
  }
}

TEST(TableProperty, NumericValuesSurviveRoundTripBitExactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e9, 1e9);
  std::string src = "id,x\n";
  std::vector<double> values;
  for (int i = 0; i < 500; ++i) {
    double v = u(rng) / std::pow(10.0, static_cast<int>(rng() % 12));
    values.push_back(v);
    src += "r" + std::to_string(i) + "," + encoding::format_double(v) + "\n";
  }
  auto t = ingest_table(src);
  auto again = ingest_table(write_table_csv(t), hints_from_schema(t.schema()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    ASSERT_EQ(t.column("x").number(i), values[i]);
    ASSERT_EQ(again.column("x").number(i), values[i]);
  }
}
