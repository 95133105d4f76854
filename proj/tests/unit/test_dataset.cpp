#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "sfm/dataset.hpp"
#include "sfm/rng.hpp"

using namespace sfm;

namespace {

FeatureSchema schema_of(std::vector<ColumnSpec> cols) {
  FeatureSchema s;
  s.columns = std::move(cols);
  return s;
}

RawDataset parse(const std::string& text, const FeatureSchema& schema) {
  std::istringstream in(text);
  return load_csv(in, schema);
}

const FeatureSchema kMixed = schema_of({{"age", ColumnKind::continuous}, {"stage", ColumnKind::categorical}});

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("blank cells are flagged missing") {
    const RawDataset ds = parse("age,stage,time,event\n1,A,2.5,1\n,B,3,0\n3,NA,4,1\n", kMixed);
    CHECK(ds.size() == 3);
    CHECK(ds.columns[0].missing() == 1);
    CHECK(ds.columns[1].missing() == 1);
    CHECK(ds.missing() == 2);
    CHECK(ds.t == std::vector<double>{2.5, 3, 4});
    CHECK(ds.y == std::vector<int>{1, 0, 1});
  }

  TEST_CASE("bad event value names the line") {
    try {
      parse("age,stage,time,event\n1,A,2,1\n2,B,3,2\n", kMixed);
      FAIL("expected a row error");
    } catch (const RowError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  TEST_CASE("empty data section and missing columns") {
    CHECK_THROWS_WITH(parse("age,stage,time,event\n", kMixed), doctest::Contains("no observations"));
    CHECK_THROWS_AS(parse("age,time,event\n1,2,1\n", kMixed), SchemaError);
    CHECK_THROWS_AS(parse("age,stage,time,event\nx,A,2,1\n", kMixed), RowError);
    CHECK_THROWS_AS(parse("age,stage,time,event\n1,A,-2,1\n", kMixed), RowError);
  }

  TEST_CASE("schema validation") {
    FeatureSchema s = schema_of({{"a", ColumnKind::continuous}, {"a", ColumnKind::categorical}});
    CHECK_THROWS_AS(s.validate(), SchemaError);
    s = schema_of({{"time", ColumnKind::continuous}});
    CHECK_THROWS_AS(s.validate(), SchemaError);
    s = schema_of({});
    s.event_column = "time";
    CHECK_THROWS_AS(s.validate(), SchemaError);
  }

  TEST_CASE("median and mode imputation") {
    const RawDataset ds = parse("age,stage,time,event\n1,A,1,1\n,A,2,1\n3,,3,0\n4,B,4,1\n", kMixed);
    const RawDataset out = impute(ds);
    CHECK(out.missing() == 0);
    CHECK(*out.columns[0].numeric[1] == 3.0);  // median of {1, 3, 4}
    CHECK(*out.columns[1].labels[2] == "A");
  }

  TEST_CASE("imputation reference columns") {
    const FeatureSchema s = schema_of({{"x", ColumnKind::continuous}});
    const RawDataset a = impute(parse("x,time,event\n1,1,1\n,2,1\n3,3,1\n", s));
    CHECK(*a.columns[0].numeric[1] == 2.0);
    const FeatureSchema c = schema_of({{"g", ColumnKind::categorical}});
    const RawDataset b = impute(parse("g,time,event\nA,1,1\nA,1,1\n,1,1\nB,1,1\n", c));
    CHECK(*b.columns[0].labels[2] == "A");
  }

  TEST_CASE("imputation is idempotent and the identity without gaps") {
    const RawDataset ds = parse("age,stage,time,event\n1,A,1,1\n,A,2,1\n3,,3,0\n4,B,4,1\n", kMixed);
    const RawDataset once = impute(ds);
    const RawDataset twice = impute(once);
    CHECK(twice.columns[0].numeric == once.columns[0].numeric);
    CHECK(twice.columns[1].labels == once.columns[1].labels);
    CHECK(impute(once, fit_impute(ds)).columns[0].numeric == once.columns[0].numeric);
  }

  TEST_CASE("entirely missing column cannot be imputed") {
    const FeatureSchema s = schema_of({{"x", ColumnKind::continuous}});
    CHECK_THROWS(fit_impute(parse("x,time,event\n,1,1\nNA,2,0\n", s)));
  }

  TEST_CASE("one-hot and z-score encoding") {
    const FeatureSchema s = schema_of({{"g", ColumnKind::categorical}, {"x", ColumnKind::continuous}});
    const RawDataset raw = parse("g,x,time,event\nA,0,1,1\nB,10,2,1\nC,0,3,0\nB,10,4,1\n", s);
    const EncodeStats stats = fit_encode(raw);
    const SurvDataset enc = encode(raw, stats);
    CHECK(enc.width() == 4);
    CHECK(enc.feature_names == std::vector<std::string>{"g=A", "g=B", "g=C", "x"});
    CHECK(enc.X(1, 0) == 0.0);
    CHECK(enc.X(1, 1) == 1.0);
    CHECK(enc.X(1, 2) == 0.0);
    CHECK(enc.X(0, 3) == -1.0);
    CHECK(enc.X(1, 3) == 1.0);
    CHECK(stats.width(s) == 4);
  }

  TEST_CASE("constant column is centred with a warning; unseen levels encode as zeros") {
    const FeatureSchema s = schema_of({{"g", ColumnKind::categorical}, {"x", ColumnKind::continuous}});
    const RawDataset train = parse("g,x,time,event\nA,7,1,1\nB,7,2,1\n", s);
    const EncodeStats stats = fit_encode(train);
    CHECK(stats.warnings.size() == 1);
    const SurvDataset enc = encode(train, stats);
    CHECK(enc.X(0, 2) == 0.0);
    const RawDataset test = parse("g,x,time,event\nZ,9,1,1\n", s);
    const SurvDataset t = encode(test, stats);
    CHECK(t.X(0, 0) == 0.0);
    CHECK(t.X(0, 1) == 0.0);
    CHECK(t.X(0, 2) == 2.0);
  }

  TEST_CASE("statistics come from the fitted split only") {
    const RawDataset train = parse("age,stage,time,event\n1,A,1,1\n3,B,2,1\n", kMixed);
    const RawDataset other = parse("age,stage,time,event\n100,,1,1\n,C,2,1\n", kMixed);
    const Preprocessor pre = Preprocessor::fit(train);
    const SurvDataset before = pre.apply(train);
    const SurvDataset applied = pre.apply(other);
    CHECK(pre.apply(train).X == before.X);
    CHECK(applied.X(1, 0) == 0.0);  // imputed with the training median 2
    CHECK(applied.width() == before.width());
  }

  TEST_CASE("stratified split sizes and event proportions") {
    Rng rng(1);
    std::vector<int> y(1000, 0);
    for (std::size_t i = 0; i < 300; ++i) y[i] = 1;
    rng.shuffle(y);
    const SplitIndices idx = stratified_split(y, SplitSpec{});
    CHECK(idx.train.size() == 800);
    CHECK(idx.valid.size() == 100);
    CHECK(idx.test.size() == 100);
    for (const auto* part : {&idx.train, &idx.valid, &idx.test}) {
      double events = 0;
      for (std::size_t i : *part) events += y[i];
      const double frac = events / part->size();
      CHECK(frac >= 0.28);
      CHECK(frac <= 0.32);
    }
    std::vector<std::size_t> all;
    for (const auto* part : {&idx.train, &idx.valid, &idx.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(1000);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(all == expected);
  }

  TEST_CASE("split is deterministic in its seed and rejects empty parts") {
    std::vector<int> y(50, 1);
    for (std::size_t i = 0; i < 20; ++i) y[i] = 0;
    SplitSpec spec;
    spec.seed = 4;
    const SplitIndices a = stratified_split(y, spec), b = stratified_split(y, spec);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    spec.seed = 5;
    CHECK(stratified_split(y, spec).train != a.train);
    const std::vector<int> tiny{1, 0, 1};
    CHECK_THROWS_AS(stratified_split(tiny, SplitSpec{}), std::invalid_argument);
  }

  TEST_CASE("csv round trip through write_csv") {
    SurvDataset ds;
    ds.X = Matrix{{0.1, -2.0}, {1.0 / 3.0, 5.0}};
    ds.t = {1.25, 2.0 / 7.0};
    ds.y = {1, 0};
    ds.feature_names = {"a", "b"};
    ds.schema = schema_of({{"a", ColumnKind::continuous}, {"b", ColumnKind::continuous}});
    const auto path = std::filesystem::temp_directory_path() / "sfm_dataset_roundtrip.csv";
    write_csv(path, ds);
    const RawDataset back = load_csv(path, ds.schema);
    CHECK(back.t == ds.t);
    CHECK(back.y == ds.y);
    CHECK(*back.columns[0].numeric[1] == 1.0 / 3.0);
    std::filesystem::remove(path);
  }
}
