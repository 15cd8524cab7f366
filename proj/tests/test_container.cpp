#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "dvrm/container.hpp"
#include "dvrm/pgm.hpp"
#include "dvrm/rng.hpp"

using namespace dvrm;

namespace {

std::string tmp_path(const char* stem) {
    return std::string("/tmp/dvrm_test_") + stem;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

Container sample_container() {
    Container c;
    c.meta["combo"] = "0-1";
    c.meta["seed"] = "42";
    Rng rng(9);
    std::vector<float> a(24);
    for (auto& v : a) v = (float)rng.normal();
    std::vector<double> b(10);
    for (auto& v : b) v = rng.normal();
    c.add_f32("weights", {2, 3, 4}, a);
    c.add_f64("labels", {10}, b);
    return c;
}

} // namespace

TEST_CASE("container round-trips byte-for-byte") {
    auto c = sample_container();
    auto p1 = tmp_path("box_a.bin"), p2 = tmp_path("box_b.bin");
    write_container(p1, c);

    auto r = read_container(p1);
    CHECK(r.meta == c.meta);
    REQUIRE(r.arrays.size() == 2);
    CHECK(r.arrays[0].name == "weights");
    CHECK(r.arrays[0].dtype == "f32");
    CHECK(r.arrays[0].shape == Shape{2, 3, 4});
    CHECK(r.arrays[0].f32 == c.arrays[0].f32);
    CHECK(r.arrays[1].f64 == c.arrays[1].f64);

    write_container(p2, r);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("container starts with the magic and accessors behave") {
    auto c = sample_container();
    auto p = tmp_path("box_magic.bin");
    write_container(p, c);
    auto bytes = slurp(p);
    CHECK(bytes.substr(0, 8) == "DVRMBOX1");

    auto r = read_container(p);
    CHECK(r.has("weights"));
    CHECK_FALSE(r.has("nope"));
    CHECK_THROWS_AS(r.get("nope"), DataError);
    auto widened = r.values("weights");
    CHECK(widened.size() == 24);
    CHECK(widened[3] == doctest::Approx((double)r.arrays[0].f32[3]));
    std::remove(p.c_str());
}

TEST_CASE("container rejects duplicate names and shape mismatches") {
    Container c;
    c.add_f32("x", {2}, {1.f, 2.f});
    CHECK_THROWS_AS(c.add_f32("x", {2}, {1.f, 2.f}), ParamError);
    CHECK_THROWS_AS(c.add_f64("y", {3}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("corrupt containers are rejected with diagnostics") {
    auto c = sample_container();
    auto p = tmp_path("box_corrupt.bin");
    write_container(p, c);
    auto good = slurp(p);

    auto write_bytes = [&](const std::string& b) {
        std::ofstream f(p, std::ios::binary);
        f.write(b.data(), (std::streamsize)b.size());
    };

    // bad magic
    auto bad = good;
    bad[0] = 'X';
    write_bytes(bad);
    CHECK_THROWS_WITH_AS(read_container(p), doctest::Contains("bad magic"), DataError);

    // truncated payload
    write_bytes(good.substr(0, good.size() - 7));
    CHECK_THROWS_WITH_AS(read_container(p), doctest::Contains("payload"), DataError);

    // truncated header
    write_bytes(good.substr(0, 20));
    CHECK_THROWS_AS(read_container(p), DataError);

    // garbage header text
    bad = good;
    for (std::size_t i = 16; i < 24; ++i) bad[i] = '@';
    write_bytes(bad);
    CHECK_THROWS_WITH_AS(read_container(p), doctest::Contains("malformed header"), DataError);

    // trailing junk
    write_bytes(good + "zzz");
    CHECK_THROWS_WITH_AS(read_container(p), doctest::Contains("trailing"), DataError);

    // too short for any header
    write_bytes("DVRM");
    CHECK_THROWS_WITH_AS(read_container(p), doctest::Contains("truncated"), DataError);

    CHECK_THROWS_AS(read_container("/tmp/dvrm_box_does_not_exist.bin"), DataError);
    std::remove(p.c_str());
}

TEST_CASE("pgm round-trip quantizes to 8 bits") {
    Rng rng(10);
    Image im(28, 28);
    for (auto& p : im.pix) p = rng.uniform();
    auto path = tmp_path("img.pgm");
    write_pgm(path, im);

    auto r = read_pgm(path);
    REQUIRE(r.h == 28);
    REQUIRE(r.w == 28);
    for (std::size_t i = 0; i < im.size(); ++i) {
        double want = std::lround(im.pix[i] * 255.0) / 255.0;
        CHECK(r.pix[i] == doctest::Approx(want).epsilon(1e-12));
    }

    // rewrite of the quantized image is byte-identical
    auto path2 = tmp_path("img2.pgm");
    write_pgm(path2, r);
    CHECK(slurp(path) == slurp(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("pgm rejects junk") {
    auto path = tmp_path("img_bad.pgm");
    {
        std::ofstream f(path, std::ios::binary);
        f << "P2\n2 2\n255\n0 0 0 0\n";
    }
    CHECK_THROWS_WITH_AS(read_pgm(path), doctest::Contains("not a binary PGM"), DataError);
    {
        std::ofstream f(path, std::ios::binary);
        f << "P5\n4 4\n255\nab";
    }
    CHECK_THROWS_WITH_AS(read_pgm(path), doctest::Contains("truncated"), DataError);
    std::remove(path.c_str());
}
