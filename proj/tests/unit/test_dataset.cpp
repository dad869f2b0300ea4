#include <doctest.h>

#include <filesystem>

#include <nlohmann/json.hpp>

#include "ellipsedet/dataset.hpp"
#include "ellipsedet/errors.hpp"
#include "support/tempdir.hpp"

using namespace ellipsedet;
namespace fs = std::filesystem;

TEST_SUITE("dataset") {
  TEST_CASE("fnv1a reference vectors") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
  }

  TEST_CASE("pgm round trip on the 8-bit lattice") {
    oracle::TempDir dir;
    Image img(7, 5);
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 7; ++x) img.at(x, y) = static_cast<float>((x * 37 + y * 11) % 256) / 255.0F;
    }
    write_pgm(dir / "a.pgm", img);
    const Image back = read_pgm(dir / "a.pgm");
    REQUIRE(back.width == 7);
    REQUIRE(back.height == 5);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      CHECK(back.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-6));
    }
    const std::string bytes = oracle::slurp(dir / "a.pgm");
    CHECK(bytes.rfind("P5", 0) == 0);
    CHECK(bytes.size() >= 35);
  }

  TEST_CASE("malformed images raise data errors") {
    oracle::TempDir dir;
    CHECK_THROWS_AS(read_pgm(dir / "missing.pgm"), DataError);
    oracle::spit(dir / "bad.pgm", "P2\n2 2\n255\n0 0 0 0\n");
    CHECK_THROWS_AS(read_pgm(dir / "bad.pgm"), DataError);
    oracle::spit(dir / "short.pgm", std::string("P5\n4 4\n255\n") + "abc");
    CHECK_THROWS_AS(read_pgm(dir / "short.pgm"), DataError);
  }

  TEST_CASE("annotation round trip is exact") {
    oracle::TempDir dir;
    std::vector<DatasetEntry> entries(2);
    entries[0].image = "train/000000.pgm";
    entries[0].objects = {{kThorax, Ellipse::make(100.125, 80.5, 70.1234567890123, 55.5, 0.1),
                           std::nullopt},
                          {kHeart, Ellipse::make(110.0, 85.0, 30.0, 22.0, -1.2), 0.75}};
    entries[1].image = "train/000001.pgm";
    write_annotations(dir / "x.json", entries);
    const auto back = read_annotations(dir / "x.json");
    REQUIRE(back.size() == 2);
    CHECK(back[0].image == entries[0].image);
    REQUIRE(back[0].objects.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      const Ellipse& a = entries[0].objects[i].ellipse;
      const Ellipse& b = back[0].objects[i].ellipse;
      CHECK(a.cx == b.cx);
      CHECK(a.cy == b.cy);
      CHECK(a.a == b.a);
      CHECK(a.b == b.b);
      CHECK(a.theta == b.theta);
    }
    CHECK_FALSE(back[0].objects[0].score.has_value());
    CHECK(back[0].objects[1].score.value() == 0.75);
    CHECK(back[1].objects.empty());
  }

  TEST_CASE("bad annotation files raise data errors") {
    oracle::TempDir dir;
    CHECK_THROWS_AS(read_annotations(dir / "none.json"), DataError);
    oracle::spit(dir / "syntax.json", "[{\"image\": ");
    CHECK_THROWS_AS(read_annotations(dir / "syntax.json"), DataError);
    oracle::spit(dir / "field.json", R"([{"image": "a.pgm", "objects": [{"class": 0}]}])");
    CHECK_THROWS_AS(read_annotations(dir / "field.json"), DataError);
    oracle::spit(dir / "invalid.json",
                 R"([{"image": "a.pgm", "objects": [{"class": 0, "cx": 1, "cy": 1, "a": 1, "b": 2, "theta": 0}]}])");
    CHECK_THROWS_AS(read_annotations(dir / "invalid.json"), DataError);
  }

  TEST_CASE("generation is byte-identical and split as configured") {
    oracle::TempDir one;
    oracle::TempDir two;
    GenConfig cfg;
    cfg.count = 20;
    cfg.master_seed = 42;
    const GeneratedCounts c1 = generate_dataset(one.path(), cfg);
    cfg.threads = 3;
    const GeneratedCounts c2 = generate_dataset(two.path(), cfg);
    CHECK(c1.train == 16);
    CHECK(c1.test == 4);
    CHECK(c2.train == 16);
    for (const char* f : {"train.json", "test.json"}) {
      CHECK(oracle::slurp(one / f) == oracle::slurp(two / f));
    }
    int images = 0;
    for (const auto& entry : fs::recursive_directory_iterator(one.path())) {
      if (entry.path().extension() != ".pgm") continue;
      ++images;
      const fs::path rel = fs::relative(entry.path(), one.path());
      REQUIRE(oracle::slurp(entry.path()) == oracle::slurp(two.path() / rel));
    }
    CHECK(images == 20);

    const auto manifest = nlohmann::json::parse(oracle::slurp(one / "manifest.json"));
    CHECK(manifest.at("train").get<int>() == 16);
    CHECK(manifest.at("test").get<int>() == 4);
    CHECK(manifest.at("config_hash").get<std::string>() == fnv1a_hex(cfg.canonical_string()));

    const Split train = load_split(one.path(), "train");
    CHECK(train.images.size() == 16);
    CHECK(train.images[0].width == 256);
    CHECK(train.entries[0].objects.size() == 2);
  }

  TEST_CASE("the default configuration splits 400 / 100") {
    GenConfig cfg;
    CHECK(cfg.count == 500);
    CHECK(std::lround(cfg.count * cfg.train_fraction) == 400);
  }

  TEST_CASE("different seeds differ and the hash tracks the config") {
    GenConfig a;
    GenConfig b;
    b.master_seed = 8;
    CHECK(fnv1a_hex(a.canonical_string()) != fnv1a_hex(b.canonical_string()));
    b = a;
    b.threads = 4;
    CHECK(a.canonical_string() == b.canonical_string());
  }

  TEST_CASE("generation argument errors") {
    oracle::TempDir dir;
    GenConfig cfg;
    cfg.count = 1;
    CHECK_THROWS_AS(generate_dataset(dir.path(), cfg), InvalidArgument);
    cfg.count = 10;
    cfg.train_fraction = 1.0;
    CHECK_THROWS_AS(generate_dataset(dir.path(), cfg), InvalidArgument);
    CHECK_THROWS_AS(load_split(dir.path(), "train"), DataError);
  }
}
