#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "arbr/pca.hpp"

using namespace arbr;
using namespace arbr::pca;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(n, d);
    for (double& x : m.v) x = rng.normal();
    return m;
}

Matrix random_symmetric(std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            const double x = rng.uniform(-2, 2);
            m(i, j) = x;
            m(j, i) = x;
        }
    return m;
}

}  // namespace

TEST_CASE("covariance basics", "[pca]") {
    SECTION("identical rows give the zero matrix") {
        Matrix m(2, 3);
        for (std::size_t j = 0; j < 3; ++j) { m(0, j) = 1.5; m(1, j) = 1.5; }
        const auto c = covariance(m);
        for (double x : c.v) CHECK(x == 0.0);
    }
    SECTION("population variance of 1,2,3") {
        Matrix m(3, 1);
        m(0, 0) = 1; m(1, 0) = 2; m(2, 0) = 3;
        const auto c = covariance(m);
        CHECK(c(0, 0) == Catch::Approx(2.0 / 3.0).margin(1e-15));
    }
    SECTION("symmetric by construction") {
        const auto m = random_matrix(20, 6, 4);
        const auto c = covariance(m);
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 6; ++j) CHECK(c(i, j) == c(j, i));
    }
    SECTION("needs two rows") {
        CHECK_THROWS_AS(covariance(Matrix(1, 3)), Error);
    }
}

TEST_CASE("eig_symmetric on known matrices", "[pca]") {
    SECTION("already diagonal") {
        Matrix m(2, 2);
        m(0, 0) = 3; m(1, 1) = 1;
        const auto r = eig_symmetric(m);
        CHECK(r.values[0] == Catch::Approx(3.0).margin(1e-12));
        CHECK(r.values[1] == Catch::Approx(1.0).margin(1e-12));
        CHECK(std::abs(r.vectors(0, 0)) == Catch::Approx(1.0).margin(1e-12));
        CHECK(std::abs(r.vectors(1, 1)) == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("[[2,1],[1,2]] has eigenvalues 3 and 1") {
        Matrix m(2, 2);
        m(0, 0) = 2; m(0, 1) = 1; m(1, 0) = 1; m(1, 1) = 2;
        const auto r = eig_symmetric(m);
        CHECK(r.values[0] == Catch::Approx(3.0).margin(1e-12));
        CHECK(r.values[1] == Catch::Approx(1.0).margin(1e-12));
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        CHECK(std::abs(r.vectors(0, 0)) == Catch::Approx(inv_sqrt2).margin(1e-10));
        CHECK(std::abs(r.vectors(1, 0)) == Catch::Approx(inv_sqrt2).margin(1e-10));
        // second vector proportional to (1,-1)
        CHECK(r.vectors(0, 1) * r.vectors(1, 1) < 0.0);
    }
    SECTION("rejects non-symmetric input") {
        Matrix m(2, 2);
        m(0, 1) = 1e-3;
        CHECK_THROWS_AS(eig_symmetric(m), Error);
    }
}

TEST_CASE("eig_symmetric reconstruction on random matrices", "[pca]") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const auto m = random_symmetric(5, seed);
        const auto r = eig_symmetric(m);
        // descending eigenvalues
        for (std::size_t i = 0; i + 1 < 5; ++i) CHECK(r.values[i] >= r.values[i + 1]);
        // residual and reconstruction
        for (std::size_t j = 0; j < 5; ++j) {
            for (std::size_t i = 0; i < 5; ++i) {
                double av = 0.0;
                for (std::size_t k = 0; k < 5; ++k) av += m(i, k) * r.vectors(k, j);
                CHECK(av == Catch::Approx(r.values[j] * r.vectors(i, j)).margin(1e-9));
            }
        }
        Matrix recon(5, 5);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t k = 0; k < 5; ++k) {
                double s = 0.0;
                for (std::size_t j = 0; j < 5; ++j)
                    s += r.vectors(i, j) * r.values[j] * r.vectors(k, j);
                recon(i, k) = s;
            }
        for (std::size_t i = 0; i < 25; ++i)
            CHECK(recon.v[i] == Catch::Approx(m.v[i]).margin(1e-8));
        // orthonormal columns
        for (std::size_t a = 0; a < 5; ++a)
            for (std::size_t b = 0; b < 5; ++b) {
                double dot = 0.0;
                for (std::size_t i = 0; i < 5; ++i) dot += r.vectors(i, a) * r.vectors(i, b);
                CHECK(dot == Catch::Approx(a == b ? 1.0 : 0.0).margin(1e-10));
            }
    }
}

TEST_CASE("fit reduces 24 columns to 20", "[pca]") {
    const auto rows = random_matrix(60, 24, 9);
    const auto model = fit_rows(rows, 20);
    CHECK(model.k == 20);
    CHECK(model.d == 24);
    CHECK(model.eigenvalues.size() == 20);
    for (std::size_t i = 0; i + 1 < 20; ++i)
        CHECK(model.eigenvalues[i] >= model.eigenvalues[i + 1]);
    for (double lam : model.eigenvalues) CHECK(lam >= 0.0);
    // sign rule: the largest-magnitude entry of each component is positive
    for (std::size_t c = 0; c < model.k; ++c) {
        double best = 0.0;
        for (std::size_t j = 0; j < model.d; ++j)
            if (std::abs(model.components(c, j)) > std::abs(best)) best = model.components(c, j);
        CHECK(best > 0.0);
    }
    CHECK_THROWS_AS(fit_rows(rows, 25), Error);
}

TEST_CASE("rank-1 data yields a single explanatory component", "[pca]") {
    Matrix rows(30, 2);
    Rng rng(12);
    for (std::size_t i = 0; i < 30; ++i) {
        const double x = rng.uniform(-5, 5);
        rows(i, 0) = x;
        rows(i, 1) = x;  // y = x
    }
    const auto model = fit_rows(rows, 1);
    const auto evr = explained_variance_ratio(model);
    REQUIRE(evr.size() == 1);
    CHECK(evr[0] == Catch::Approx(1.0).margin(1e-10));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(model.components(0, 0) == Catch::Approx(inv_sqrt2).margin(1e-8));
    CHECK(model.components(0, 1) == Catch::Approx(inv_sqrt2).margin(1e-8));
}

TEST_CASE("explained variance ratios", "[pca]") {
    SECTION("isotropic 2-D splits evenly") {
        Matrix rows(4, 2);
        rows(0, 0) = 1; rows(0, 1) = 0;
        rows(1, 0) = -1; rows(1, 1) = 0;
        rows(2, 0) = 0; rows(2, 1) = 1;
        rows(3, 0) = 0; rows(3, 1) = -1;
        const auto model = fit_rows(rows, 2);
        const auto evr = explained_variance_ratio(model);
        CHECK(evr[0] == Catch::Approx(0.5).margin(1e-12));
        CHECK(evr[1] == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("ratios sum to one at k = d and below one otherwise") {
        const auto rows = random_matrix(50, 6, 77);
        const auto full = fit_rows(rows, 6);
        const auto evr = explained_variance_ratio(full);
        double s = 0.0;
        for (double r : evr) s += r;
        CHECK(s == Catch::Approx(1.0).margin(1e-9));
        for (std::size_t i = 0; i + 1 < evr.size(); ++i) CHECK(evr[i] >= evr[i + 1]);

        const auto partial = fit_rows(rows, 3);
        const auto pevr = explained_variance_ratio(partial);
        double ps = 0.0;
        for (double r : pevr) ps += r;
        CHECK(ps <= 1.0 + 1e-12);
    }
    SECTION("zero variance is degenerate") {
        Matrix rows(3, 2);  // all zeros
        const auto model = fit_rows(rows, 2);
        CHECK_THROWS_AS(explained_variance_ratio(model), Error);
    }
}

TEST_CASE("explained variance of full model equals total variance", "[pca]") {
    const auto rows = random_matrix(50, 6, 31);
    const auto model = fit_rows(rows, 6);
    const auto cov = covariance(rows);
    double trace = 0.0;
    for (std::size_t j = 0; j < 6; ++j) trace += cov(j, j);
    double lam_sum = 0.0;
    for (double lam : model.eigenvalues) lam_sum += lam;
    CHECK(lam_sum == Catch::Approx(trace).margin(1e-8));
    CHECK(model.total_variance == Catch::Approx(trace).margin(1e-8));
}

TEST_CASE("transform centers, decorrelates and preserves eigen-variances", "[pca]") {
    const auto rows = random_matrix(80, 5, 101);
    const auto model = fit_rows(rows, 5);

    SECTION("mean row maps to zero") {
        std::vector<double> mean_row = model.mean;
        std::vector<double> out(model.k);
        transform_row(model, mean_row, out);
        for (double x : out) CHECK(x == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("projected covariance is diagonal with eigenvalue entries") {
        const auto proj = transform(model, rows);
        const auto pc = covariance(proj);
        for (std::size_t a = 0; a < 5; ++a)
            for (std::size_t b = 0; b < 5; ++b) {
                if (a == b) CHECK(pc(a, b) == Catch::Approx(model.eigenvalues[a]).margin(1e-8));
                else CHECK(pc(a, b) == Catch::Approx(0.0).margin(1e-8));
            }
    }
    SECTION("width mismatch") {
        CHECK_THROWS_AS(transform(model, Matrix(3, 4)), Error);
    }
}

TEST_CASE("fit is invariant to row order and deterministic", "[pca]") {
    const auto rows = random_matrix(40, 4, 202);
    Matrix shuffled = rows;
    Rng rng(5);
    for (std::size_t i = shuffled.rows; i-- > 1;) {
        const std::size_t j = rng.uniform_int(i + 1);
        for (std::size_t c = 0; c < shuffled.cols; ++c)
            std::swap(shuffled(i, c), shuffled(j, c));
    }
    const auto m1 = fit_rows(rows, 4);
    const auto m2 = fit_rows(shuffled, 4);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(m1.eigenvalues[i] == Catch::Approx(m2.eigenvalues[i]).margin(1e-9));
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(m1.components(c, j) == Catch::Approx(m2.components(c, j)).margin(1e-7));

    // bit-identical across repeated fits of the same rows
    const auto m3 = fit_rows(rows, 4);
    CHECK(m1.components.v == m3.components.v);
    CHECK(m1.eigenvalues == m3.eigenvalues);
}

TEST_CASE("reconstruction error is monotone non-increasing in k", "[pca]") {
    const auto rows = random_matrix(60, 6, 303);
    double prev_err = 1e300;
    for (std::size_t k = 1; k <= 6; ++k) {
        const auto model = fit_rows(rows, k);
        const auto proj = transform(model, rows);
        double err = 0.0;
        for (std::size_t i = 0; i < rows.rows; ++i) {
            for (std::size_t j = 0; j < rows.cols; ++j) {
                double recon = model.mean[j];
                for (std::size_t c = 0; c < k; ++c) recon += proj(i, c) * model.components(c, j);
                err += (rows(i, j) - recon) * (rows(i, j) - recon);
            }
        }
        err /= static_cast<double>(rows.rows * rows.cols);
        CHECK(err <= prev_err + 1e-12);
        prev_err = err;
    }
}

TEST_CASE("pca model serializes to versioned JSON", "[pca]") {
    const auto rows = random_matrix(20, 3, 404);
    const auto model = fit_rows(rows, 2);
    const std::string js = to_json(model).dump();
    CHECK(js.find("\"version\": 1") != std::string::npos);
    CHECK(js.find("\"components\"") != std::string::npos);
    CHECK(js.find("\"eigenvalues\"") != std::string::npos);
    // serialization is deterministic
    CHECK(js == to_json(model).dump());
}
