#include <doctest.h>

#include <fstream>
#include <set>

#include "helpers.hpp"
#include "nrelaggs/csv.hpp"
#include "nrelaggs/errors.hpp"
#include "nrelaggs/schema.hpp"

using namespace nrelaggs;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::ok;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("nrelaggs_test_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    void write(const std::string& file, const std::string& text) const { std::ofstream(path / file) << text; }
};

const char* two_table_schema = R"({
  "tables": [
    {"name": "p", "file": "p.csv", "columns": [{"name": "id", "kind": "key"}, {"name": "y", "kind": "categorical"}]},
    {"name": "c", "file": "c.csv", "columns": [{"name": "id", "kind": "key"},
                                               {"name": "p_id", "kind": "foreign_key", "references": "p"},
                                               {"name": "v", "kind": "numeric"}]}
  ],
  "target_table": "p",
  "target_attribute": "y"
})";

}  // namespace

TEST_CASE("csv parsing handles quotes, escaped quotes and embedded newlines") {
    const auto rows = csv::parse("a,b,c\n\"x,1\",\"say \"\"hi\"\"\",\"two\nlines\"\r\n,,\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1] == std::vector<std::string>{"x,1", "say \"hi\"", "two\nlines"});
    CHECK(rows[2] == std::vector<std::string>{"", "", ""});
}

TEST_CASE("csv records round-trip through format_record and parse") {
    std::mt19937_64 rng(5);
    const std::string alphabet = "ab,\"\n x";
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> record(1 + rng() % 4);
        for (auto& field : record)
            for (std::size_t i = rng() % 6; i > 0; --i) field.push_back(alphabet[rng() % alphabet.size()]);
        if (record.size() == 1 && record[0].empty()) record[0] = "z";
        const auto parsed = csv::parse(csv::format_record(record) + "\n");
        REQUIRE(parsed.size() == 1);
        CHECK(parsed[0] == record);
    }
}

TEST_CASE("Trains loads with the published table sizes") {
    const auto db = testing::load_data("trains");
    const auto cars = db.table_index("cars");
    const auto trains = db.table_index("trains");
    CHECK(db.table(cars).columns.size() == 10);
    CHECK(db.rows(cars).size() == 63);
    CHECK(db.table(trains).columns.size() == 2);
    CHECK(db.rows(trains).size() == 20);
    const auto dist = class_distribution(db);
    CHECK(dist == std::map<std::string, std::size_t>{{"east", 10}, {"west", 10}});
}

TEST_CASE("Mutagenesis 188 class distribution and table sizes") {
    const auto db = testing::load_data("mutagenesis188");
    CHECK(class_distribution(db) == std::map<std::string, std::size_t>{{"0", 63}, {"1", 125}});
    CHECK(db.rows(db.table_index("atoms")).size() == 4893);
    std::size_t total = 0;
    for (const auto& [label, n] : class_distribution(db)) total += n;
    CHECK(total == db.rows(db.target_table()).size());
}

TEST_CASE("single-table database is valid and has no join children") {
    SchemaDescriptor schema;
    schema.tables.push_back({"t", "t.csv",
                             {testing::column("id", ColumnKind::key), testing::column("y", ColumnKind::categorical)}});
    schema.target_table = "t";
    schema.target_attribute = "y";
    const auto db = RelationalDatabase::from_rows(schema, {{{"1", "a"}, {"2", "b"}}});
    CHECK(db.join_children("t").empty());
    CHECK(db.foreign_keys().empty());

    const auto empty = RelationalDatabase::from_rows(schema, {{}});
    CHECK(class_distribution(empty).empty());
}

TEST_CASE("join_children follows declaration order and rejects unknown tables") {
    const auto db = testing::load_fixture("movielens");
    CHECK(db.join_children("movies") == std::vector<std::string>{"movies2actors", "movies2directors", "u2base"});
    CHECK(code_of([&] { db.join_children("nope"); }) == ErrorCode::unknown_table);
}

TEST_CASE("schema descriptor round-trips through serialize") {
    for (const auto* name : {"trains", "mutagenesis188"}) {
        const auto schema = SchemaDescriptor::read_file(testing::data_dir(name) / "schema.json");
        CHECK(SchemaDescriptor::parse(schema.serialize()) == schema);
    }
    const auto ml = SchemaDescriptor::read_file(testing::fixture_dir("movielens") / "schema.json");
    CHECK(SchemaDescriptor::parse(ml.serialize()) == ml);
}

TEST_CASE("every reachable table has exactly one simple path from the target") {
    for (auto db : {testing::load_fixture("movielens"), testing::load_data("trains"),
                    testing::load_data("mutagenesis188")}) {
        const auto target = db.target_table();
        std::vector<std::size_t> paths(db.table_count(), 0);
        std::vector<bool> on_path(db.table_count(), false);
        auto walk = [&](auto&& self, std::size_t t) -> void {
            ++paths[t];
            on_path[t] = true;
            for (auto n : db.neighbors(t))
                if (!on_path[n]) self(self, n);
            on_path[t] = false;
        };
        walk(walk, target);
        for (std::size_t t = 0; t < db.table_count(); ++t) CHECK(paths[t] == 1);
    }
}

TEST_CASE("loading errors") {
    SUBCASE("missing table file") {
        TempDir dir("missing");
        dir.write("schema.json", two_table_schema);
        dir.write("p.csv", "id,y\n1,a\n2,b\n");
        CHECK(code_of([&] { RelationalDatabase::load(dir.path / "schema.json", dir.path); }) ==
              ErrorCode::missing_table_file);
    }
    SUBCASE("header mismatch") {
        TempDir dir("header");
        dir.write("schema.json", two_table_schema);
        dir.write("p.csv", "id,y\n1,a\n2,b\n");
        dir.write("c.csv", "id,v,p_id\nc1,1,1\n");
        CHECK(code_of([&] { RelationalDatabase::load(dir.path / "schema.json", dir.path); }) ==
              ErrorCode::header_mismatch);
    }
    SUBCASE("dangling foreign key") {
        TempDir dir("dangling");
        dir.write("schema.json", two_table_schema);
        dir.write("p.csv", "id,y\n1,a\n2,b\n");
        dir.write("c.csv", "id,p_id,v\nc1,1,1\nc2,9,2\n");
        CHECK(code_of([&] { RelationalDatabase::load(dir.path / "schema.json", dir.path); }) ==
              ErrorCode::dangling_foreign_key);
    }
    SUBCASE("null foreign key is allowed") {
        TempDir dir("nullfk");
        dir.write("schema.json", two_table_schema);
        dir.write("p.csv", "id,y\n1,a\n2,b\n");
        dir.write("c.csv", "id,p_id,v\nc1,1,1\nc2,,2\n");
        const auto db = RelationalDatabase::load(dir.path / "schema.json", dir.path);
        CHECK(db.rows(db.table_index("c")).size() == 2);
    }
    SUBCASE("numeric target") {
        TempDir dir("numeric_target");
        std::string schema = two_table_schema;
        schema.replace(schema.find("\"categorical\""), 13, "\"numeric\"");
        dir.write("schema.json", schema);
        dir.write("p.csv", "id,y\n1,0\n2,1\n");
        dir.write("c.csv", "id,p_id,v\n");
        CHECK(code_of([&] { RelationalDatabase::load(dir.path / "schema.json", dir.path); }) ==
              ErrorCode::target_not_categorical);
    }
    SUBCASE("cyclic join graph") {
        SchemaDescriptor schema;
        using testing::column;
        schema.tables.push_back({"t", "t.csv", {column("id", ColumnKind::key), column("y", ColumnKind::categorical)}});
        schema.tables.push_back({"a", "a.csv", {column("id", ColumnKind::key), column("t_id", ColumnKind::foreign_key, "t")}});
        schema.tables.push_back({"l", "l.csv",
                                 {column("id", ColumnKind::key), column("t_id", ColumnKind::foreign_key, "t"),
                                  column("a_id", ColumnKind::foreign_key, "a")}});
        schema.target_table = "t";
        schema.target_attribute = "y";
        CHECK(code_of([&] {
                  RelationalDatabase::from_rows(schema, {{{"1", "x"}, {"2", "y"}}, {{"a1", "1"}}, {{"l1", "1", "a1"}}});
              }) == ErrorCode::cyclic_join_graph);
    }
}
