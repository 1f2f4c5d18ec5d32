#include <doctest.h>

#include "sbnet/data_io.hpp"
#include "sbnet/errors.hpp"
#include "sbnet/simgen.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

using namespace sbnet;
using namespace sbnet::testing;

namespace {

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& text, const std::string& part) {
    return text.find(part) != std::string::npos;
}

std::string ihdp_row(double t, double yf, double mu0, double mu1, double x0) {
    std::ostringstream s;
    s << t << ',' << yf << ',' << 0.0 << ',' << mu0 << ',' << mu1;
    for (std::size_t j = 0; j < kIhdpCovariates; ++j) s << ',' << x0 + static_cast<double>(j);
    return s.str();
}

}  // namespace

TEST_CASE("read_csv") {
    std::istringstream ok(" a , \"b\" ,c\n1,2,3\n\n4, 5.5 ,-6e-1\n");
    const auto t = read_csv(ok, "ok");
    CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1] == std::vector<double>{4, 5.5, -0.6});
    CHECK(t.find("c") == 2);
    CHECK(t.find("z") == CsvTable::npos);

    std::istringstream headerless("1,2\n3,4\n");
    const auto h = read_csv(headerless, "h", false);
    CHECK(h.header == std::vector<std::string>{"c1", "c2"});
    CHECK(h.rows.size() == 2);

    auto parse = [](const std::string& text) {
        return error_of([&] {
            std::istringstream in(text);
            read_csv(in, "f.csv");
        });
    };
    auto msg = parse("a,b\n1,2\n3,\n");
    CHECK(contains(msg, "f.csv: line 3, column 'b'"));
    CHECK(contains(msg, "blank"));
    msg = parse("a,b\n1,x\n");
    CHECK(contains(msg, "line 2, column 'b'"));
    CHECK(contains(msg, "not a number"));
    CHECK(contains(parse("a,b\n1,nan\n"), "line 2, column 'b'"));
    CHECK(contains(parse("a,b\n1,inf\n"), "line 2"));
    CHECK(contains(parse("a,b\n1,2,3\n"), "line 2"));
    CHECK(contains(parse("a,b\n1\n"), "line 2"));
    CHECK(contains(parse(""), "empty"));
    CHECK(contains(parse("a,b\n"), "no data rows"));
}

TEST_CASE("simulation dataset csv round trip") {
    const Dataset d = gen_dataset(SimCase::case1, 50, 3);
    std::stringstream io;
    write_dataset_csv(io, d);
    std::string header;
    std::getline(io, header);
    CHECK(header == "x1,x2,x3,x4,x5,x6,x7,t,y");
    io.seekg(0);
    const Dataset back = read_dataset_csv(io, "roundtrip");
    CHECK(back.x == d.x);
    CHECK(back.t == d.t);
    CHECK(back.y == d.y);

    const auto dir = scratch_dir("data-io");
    save_dataset_csv(dir / "d.csv", d);
    CHECK(load_dataset_csv(dir / "d.csv").y == d.y);
    CHECK_THROWS_AS(load_dataset_csv(dir / "missing.csv"), DataError);

    std::istringstream no_t("x1,y\n1,2\n");
    CHECK(contains(error_of([&] { read_dataset_csv(no_t, "s"); }), "missing column 't'"));
    std::istringstream bad_t("x1,t,y\n1,0,2\n1,2,2\n");
    CHECK(contains(error_of([&] { read_dataset_csv(bad_t, "s"); }), "line 3"));
}

TEST_CASE("IHDP reader") {
    std::string headerless = ihdp_row(1, 5.0, 1.0, 5.0, 0.0) + "\n" + ihdp_row(0, 2.0, 2.0, 4.0, 1.0) +
                             "\n" + ihdp_row(0, 3.0, 0.0, 4.0, 2.0) + "\n";
    std::istringstream in(headerless);
    const Dataset d = read_ihdp(in);
    CHECK(d.n() == 3);
    CHECK(d.k() == kIhdpCovariates);
    CHECK(d.t == std::vector<double>{1, 0, 0});
    CHECK(d.y == std::vector<double>{5, 2, 3});
    CHECK(d.x(1, 0) == 1.0);
    CHECK(d.x(2, 24) == 26.0);
    REQUIRE(d.true_ate.has_value());
    CHECK(*d.true_ate == doctest::Approx(13.0 / 3.0 - 1.0));

    std::string header = "treatment,y_factual,y_cfactual,mu0,mu1";
    for (std::size_t j = 1; j <= kIhdpCovariates; ++j) header += ",x" + std::to_string(j);
    std::istringstream named(header + "\n" + headerless);
    const Dataset n = read_ihdp(named);
    CHECK(n.x == d.x);
    CHECK(*n.true_ate == *d.true_ate);

    std::istringstream narrow("1,2,3\n0,1,2\n");
    CHECK(contains(error_of([&] { read_ihdp(narrow); }), "30 columns"));
    std::istringstream nonbinary(ihdp_row(1, 1, 1, 1, 0) + "\n" + ihdp_row(2, 1, 1, 1, 0) + "\n");
    const auto msg = error_of([&] { read_ihdp(nonbinary); });
    CHECK(contains(msg, "line 2"));
    CHECK(contains(msg, "treatment"));
}

TEST_CASE("college reader") {
    std::istringstream in(
        "id,lwage,educ,exper,black,south,married,smsa,nearc4,IQ\n"
        "1,6.3,16,5,0,1,1,1,1,100\n"
        "2,5.9,12,9,1,0,0,1,0,95\n"
        "3,6.1,13,7,0,0,1,0,1,110\n");
    std::vector<std::string> ignored;
    const Dataset d = read_college(in, "card", &ignored);
    CHECK(d.t == std::vector<double>{1, 0, 1});
    CHECK(d.y == std::vector<double>{6.3, 5.9, 6.1});
    CHECK(d.k() == college_covariates().size());
    CHECK(d.x(1, 0) == 9.0);
    CHECK(d.x(0, 5) == 1.0);
    CHECK(d.covariate_names == college_covariates());
    CHECK(ignored == std::vector<std::string>{"id", "IQ"});
    CHECK_FALSE(d.true_ate.has_value());

    std::istringstream missing("lwage,educ\n6,12\n");
    CHECK(contains(error_of([&] { read_college(missing); }), "missing column 'exper'"));
}

TEST_CASE("split") {
    const Dataset d = gen_dataset(SimCase::case1, 1000, 4);
    const auto s = split(d, 0.8, 17);
    CHECK(s.train.n() == 800);
    CHECK(s.test.n() == 200);
    CHECK(s.train.has_both_arms());
    CHECK(s.train.true_ate == d.true_ate);
    std::set<std::size_t> rows(s.train_rows.begin(), s.train_rows.end());
    rows.insert(s.test_rows.begin(), s.test_rows.end());
    CHECK(rows.size() == 1000);
    CHECK(*rows.rbegin() == 999);
    for (std::size_t i = 0; i < 800; i += 97) CHECK(s.train.y[i] == d.y[s.train_rows[i]]);

    const auto again = split(d, 0.8, 17);
    CHECK(again.train_rows == s.train_rows);
    CHECK(split(d, 0.8, 18).train_rows != s.train_rows);

    // ceil rounding: 0.7 * 11 -> 8 train rows.
    CHECK(split(d.subset(s.train_rows).subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}),
                0.7, 1)
              .train.n() == 8);

    CHECK_THROWS_AS(split(d, 0.0, 1), InvalidArgument);
    CHECK_THROWS_AS(split(d, 1.0, 1), InvalidArgument);
    CHECK_THROWS_AS(split(d, 0.9999, 1), InvalidArgument);
    Dataset single = d;
    std::fill(single.t.begin(), single.t.end(), 1.0);
    CHECK_THROWS_AS(split(single, 0.8, 1), DataError);
}

TEST_CASE("split reshuffles until training holds both arms") {
    // One treated unit out of 10, train fraction 0.5: many shuffles leave it
    // in the test part, yet the training part always contains it.
    Dataset d;
    RngStream rng(5);
    d.x = random_matrix(rng, 10, 2);
    d.t.assign(10, 0.0);
    d.t[3] = 1.0;
    d.y = random_vector(rng, 10);
    for (std::uint64_t seed = 0; seed < 40; ++seed) CHECK(split(d, 0.5, seed).train.has_both_arms());
}

TEST_CASE("standardize") {
    RngStream rng(6);
    Dataset train;
    train.x = random_matrix(rng, 200, 3, -5, 9);
    for (std::size_t i = 0; i < 200; ++i) train.x(i, 2) = 4.0;  // constant column
    train.t = random_treatment(rng, 200);
    train.y = random_vector(rng, 200);
    Dataset test = train.subset(std::vector<std::size_t>{0, 5, 9});
    test.x(0, 0) = 100.0;

    const auto s = standardize(train, test);
    for (std::size_t j = 0; j < 2; ++j) {
        const auto c = s.train.x.col(j);
        CHECK(std::abs(mean(c)) < 1e-12);
        // Population standard deviation.
        CHECK(std::abs(sample_variance(c) * 199.0 / 200.0 - 1.0) < 1e-12);
    }
    CHECK(s.transform.scale[2] == 1.0);
    CHECK(s.train.x.col(2) == std::vector<double>(200, 0.0));
    CHECK(s.train.t == train.t);
    CHECK(s.train.y == train.y);
    CHECK(s.test.x(0, 0) == doctest::Approx((100.0 - s.transform.mean[0]) / s.transform.scale[0]));
    CHECK(max_abs_diff(s.transform.inverse(s.transform.apply(test.x)), test.x) < 1e-12);

    CHECK_THROWS_AS(s.transform.apply(Matrix(2, 4)), DimensionError);
    Dataset wide = test;
    wide.x = Matrix(3, 4);
    CHECK_THROWS_AS(standardize(train, wide), DimensionError);
}
