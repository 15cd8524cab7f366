#include <cstring>
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dvrm/gemm.hpp"
#include "dvrm/rng.hpp"

namespace {

template <typename T>
void naive_gemm(std::size_t m, std::size_t n, std::size_t k,
                const std::vector<T>& a, std::size_t lda,
                const std::vector<T>& b, std::size_t ldb,
                std::vector<T>& c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = accumulate ? static_cast<double>(c[i * ldc + j]) : 0.0;
            for (std::size_t t = 0; t < k; ++t)
                s += static_cast<double>(a[i * lda + t]) * static_cast<double>(b[t * ldb + j]);
            c[i * ldc + j] = static_cast<T>(s);
        }
}

template <typename T>
void check_shape(std::size_t m, std::size_t n, std::size_t k, bool accumulate,
                 double tol, dvrm::Rng& rng) {
    std::vector<T> a(m * k), b(k * n), c(m * n), ref(m * n);
    for (auto& v : a) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    for (auto& v : b) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    for (std::size_t i = 0; i < c.size(); ++i) {
        c[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
        ref[i] = c[i];
    }
    dvrm::gemm<T>(m, n, k, a.data(), k, b.data(), n, c.data(), n, accumulate);
    naive_gemm<T>(m, n, k, a, k, b, n, ref, n, accumulate);
    double worst = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
        worst = std::max(worst, std::abs(double(c[i]) - double(ref[i])));
    CHECK(worst < tol);
}

} // namespace

TEST_CASE("gemm matches naive reference across shapes and edge sizes") {
    dvrm::Rng rng(7);
    // shapes chosen to hit the 6x64 bulk kernel, row edges, col edges, and K blocking
    const std::size_t shapes[][3] = {
        {1, 1, 1},   {6, 64, 16},  {6, 64, 300}, {7, 65, 5},   {5, 63, 257},
        {20, 841, 64}, {16, 841, 80}, {13, 9, 11}, {32, 128, 700}, {2, 841, 32},
    };
    for (auto& s : shapes) {
        for (bool acc : {false, true}) {
            check_shape<float>(s[0], s[1], s[2], acc, 2e-3, rng);
            check_shape<double>(s[0], s[1], s[2], acc, 1e-11, rng);
        }
    }
}

TEST_CASE("gemm with leading dimensions larger than row width") {
    dvrm::Rng rng(8);
    std::size_t m = 9, n = 70, k = 33, lda = 40, ldb = 80, ldc = 90;
    std::vector<float> a(m * lda), b(k * ldb), c(m * ldc, 0.f), ref;
    for (auto& v : a) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (auto& v : b) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    ref = c;
    dvrm::gemm<float>(m, n, k, a.data(), lda, b.data(), ldb, c.data(), ldc, false);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (std::size_t t = 0; t < k; ++t) s += double(a[i * lda + t]) * double(b[t * ldb + j]);
            ref[i * ldc + j] = static_cast<float>(s);
        }
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-4));
}

TEST_CASE("gemm zero-k with accumulate=false clears the output region") {
    std::vector<float> c(12, 5.f);
    dvrm::gemm<float>(3, 4, 0, nullptr, 1, nullptr, 1, c.data(), 4, false);
    for (float v : c) CHECK(v == 0.f);
}

TEST_CASE("gemm_nt and gemm_tn match transposed naive products") {
    dvrm::Rng rng(11);
    const std::size_t shapes[][3] = {
        {1, 1, 1}, {4, 4, 16}, {5, 7, 33}, {32, 96, 841}, {13, 64, 100}, {6, 64, 50},
    };
    for (auto& s : shapes) {
        std::size_t m = s[0], n = s[1], k = s[2];
        std::vector<float> a(m * k), b(n * k), at(k * m), bt(k * n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < k; ++t) {
                a[i * k + t] = static_cast<float>(rng.uniform(-1.0, 1.0));
                at[t * m + i] = a[i * k + t];
            }
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t t = 0; t < k; ++t) {
                b[j * k + t] = static_cast<float>(rng.uniform(-1.0, 1.0));
                bt[t * n + j] = b[j * k + t];
            }
        std::vector<float> c_nt(m * n, 1.f), c_tn(m * n, 1.f), ref(m * n, 1.f);
        dvrm::gemm_nt<float>(m, n, k, a.data(), k, b.data(), k, c_nt.data(), n, true);
        dvrm::gemm_tn<float>(m, n, k, at.data(), m, bt.data(), n, c_tn.data(), n, true);
        naive_gemm<float>(m, n, k, a, k, bt, n, ref, n, true);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(c_nt[i] == doctest::Approx(ref[i]).epsilon(5e-4));
            CHECK(c_tn[i] == doctest::Approx(ref[i]).epsilon(5e-4));
        }

        std::vector<double> ad(a.begin(), a.end()), btd(bt.begin(), bt.end());
        std::vector<double> bd(b.begin(), b.end()), atd(at.begin(), at.end());
        std::vector<double> cd_nt(m * n, 1.0), cd_tn(m * n, 1.0), refd(m * n, 1.0);
        dvrm::gemm_nt<double>(m, n, k, ad.data(), k, bd.data(), k, cd_nt.data(), n, true);
        dvrm::gemm_tn<double>(m, n, k, atd.data(), m, btd.data(), n, cd_tn.data(), n, true);
        naive_gemm<double>(m, n, k, ad, k, btd, n, refd, n, true);
        for (std::size_t i = 0; i < refd.size(); ++i) {
            CHECK(cd_nt[i] == doctest::Approx(refd[i]).epsilon(1e-12));
            CHECK(cd_tn[i] == doctest::Approx(refd[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("gemm is bit-reproducible for identical inputs") {
    dvrm::Rng rng(9);
    std::size_t m = 14, n = 130, k = 97;
    std::vector<float> a(m * k), b(k * n), c1(m * n, 0.f), c2(m * n, 0.f);
    for (auto& v : a) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (auto& v : b) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    dvrm::gemm<float>(m, n, k, a.data(), k, b.data(), n, c1.data(), n, false);
    dvrm::gemm<float>(m, n, k, a.data(), k, b.data(), n, c2.data(), n, false);
    CHECK(std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(float)) == 0);
}