#include <cstring>
#include <random>
#include <set>

#include "doctest.h"
#include "exvqa/checkpoint.hpp"
#include "exvqa/dataset.hpp"
#include "exvqa/error.hpp"
#include "test_util.hpp"

using namespace exvqa;
using namespace exvqa::data;
using exvqa::testing::TempDir;

namespace {

std::string line(const std::string& id, const std::string& extra = "", int captions = 5) {
  std::string caps;
  for (int i = 0; i < captions; ++i) caps += (i ? ",\"" : "\"") + std::string("A caption ") + std::to_string(i) + "\"";
  return R"({"id":")" + id + R"(","image":"img/)" + id + R"(.ppm","question":"Is he SURFING?","answer":"Yes","explanation":"he is riding a wave","captions":[)" +
         caps + "]" + extra + "}\n";
}

}  // namespace

TEST_CASE("load_dataset reads a well-formed file in line order") {
  TempDir dir;
  auto path = dir.write("d.jsonl", line("a") + line("b") + "\n" + line("c"));
  auto v = load_dataset(path);
  REQUIRE(v.size() == 3);
  CHECK(v[0].id == "a");
  CHECK(v[1].id == "b");
  CHECK(v[2].id == "c");
  CHECK(v[0].question == "is he surfing ?");
  CHECK(v[0].answer == "yes");
  CHECK(v[0].captions.size() == 5);
  CHECK(v[0].image == dir.path() / "img/a.ppm");
  CHECK(v[0].ground_truth() == "is he surfing ? yes because he is riding a wave");
  CHECK(v[0].target() == "yes because he is riding a wave");
}

TEST_CASE("load_dataset errors name the offending line") {
  TempDir dir;
  std::string bad = line("b");
  bad.replace(bad.find(R"("explanation")"), std::strlen(R"("explanation")"), R"("explan")");
  auto path = dir.write("d.jsonl", line("a") + bad + line("c"));
  try {
    load_dataset(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("explanation") != std::string::npos);
  }
}

TEST_CASE("load_dataset rejects duplicates, bad JSON and empty fields") {
  TempDir dir;
  CHECK_THROWS_AS(load_dataset(dir.write("dup.jsonl", line("a") + line("a"))), DataError);
  CHECK_THROWS_AS(load_dataset(dir.write("json.jsonl", line("a") + "{not json\n")), FormatError);
  CHECK_THROWS_AS(load_dataset(dir.write("nocap.jsonl", line("a", "", 0))), DataError);
  std::string empty_expl = line("a");
  empty_expl.replace(empty_expl.find("he is riding a wave"), 19, "  ");
  CHECK_THROWS_AS(load_dataset(dir.write("e.jsonl", empty_expl)), DataError);
  CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), IoError);
}

TEST_CASE("load_dataset accepts a caption count other than L") {
  TempDir dir;
  auto v = load_dataset(dir.write("d.jsonl", line("a", "", 2)));
  REQUIRE(v.size() == 1);
  CHECK(v[0].captions.size() == 2);
}

TEST_CASE("optional fields are parsed") {
  TempDir dir;
  auto v = load_dataset(dir.write(
      "d.jsonl", line("a", R"(,"answers":["Yes","yes","No"],"explanations":["the wave is big"],"split":"train")")));
  REQUIRE(v.size() == 1);
  CHECK(v[0].answers == std::vector<std::string>{"yes", "yes", "no"});
  CHECK(v[0].split == "train");
  CHECK(v[0].reference_targets().size() == 2);
}

TEST_CASE("split_dataset divides the eval pool 3:4") {
  auto make = [](std::size_t n, std::size_t n_train) {
    std::vector<Instance> v(n + n_train);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i].id = "i" + std::to_string(i);
      if (i < n_train) v[i].split = "train";
    }
    return v;
  };
  auto seven = make(7, 0);
  auto s = split_dataset(seven, {}, 1);
  CHECK(s.val.size() == 3);
  CHECK(s.test.size() == 4);
  CHECK(s.train.empty());

  auto big = make(3500, 100);
  s = split_dataset(big, {}, 9);
  CHECK(s.train.size() == 100);
  CHECK(s.val.size() == 1500);
  CHECK(s.test.size() == 2000);

  std::set<std::string> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == big.size());

  auto again = split_dataset(big, {}, 9);
  CHECK(again.val == s.val);
  CHECK(again.test == s.test);
  CHECK(split_dataset(big, {}, 10).val != s.val);

  auto six = make(6, 3);
  CHECK_THROWS_AS(split_dataset(six, {}, 1), DataError);
}

TEST_CASE("load_image decodes P6 with nearest-neighbour resize") {
  TempDir dir;
  std::string one = "P6\n1 1\n255\n";
  one += std::string("\xff\x00\x00", 3);
  auto img = load_image(dir.write("one.ppm", one));
  REQUIRE(img.dims() == Shape{224, 224, 3});
  bool all_red = true;
  for (std::size_t i = 0; i < 224 * 224; ++i)
    all_red = all_red && img[i * 3] == 1.0f && img[i * 3 + 1] == 0.0f && img[i * 3 + 2] == 0.0f;
  CHECK(all_red);

  std::mt19937 rng(3);
  std::string full = "P6\n# comment\n224 224\n255\n";
  std::string payload(224 * 224 * 3, '\0');
  for (char& c : payload) c = static_cast<char>(rng() & 0xff);
  auto big = load_image(dir.write("full.ppm", full + payload));
  bool exact = true;
  for (std::size_t i = 0; i < payload.size(); ++i)
    exact = exact && big[i] == static_cast<float>(static_cast<unsigned char>(payload[i])) / 255.0f;
  CHECK(exact);

  // 2x2 source upsampled: each quadrant takes its source pixel.
  std::string quad = "P6 2 2 255\n";
  quad += std::string("\x00\x00\x00\xff\xff\xff\x10\x10\x10\x20\x20\x20", 12);
  auto q = load_image(dir.write("quad.ppm", quad), 4);
  CHECK(q[(0 * 4 + 1) * 3] == 0.0f);
  CHECK(q[(0 * 4 + 2) * 3] == 1.0f);
  CHECK(q[(3 * 4 + 0) * 3] == doctest::Approx(16.0 / 255.0));
  CHECK(q[(3 * 4 + 3) * 3] == doctest::Approx(32.0 / 255.0));
}

TEST_CASE("load_image rejects other formats and truncation") {
  TempDir dir;
  CHECK_THROWS_AS(load_image(dir.write("p3.ppm", "P3\n1 1\n255\n255 0 0\n")), FormatError);
  CHECK_THROWS_AS(load_image(dir.write("short.ppm", "P6\n2 2\n255\n\x01\x02\x03")), FormatError);
  CHECK_THROWS_AS(load_image(dir.write("maxval.ppm", "P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06")), FormatError);
  CHECK_THROWS_AS(load_image(dir / "none.ppm"), IoError);
}

TEST_CASE("encode_ppm and decode_ppm roundtrip") {
  auto img = Tensor::zeros({224, 224, 3});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(i % 256) / 255.0f;
  auto back = decode_ppm(encode_ppm(img));
  CHECK(back.same_values(img));
}

TEST_CASE("tensor table layout") {
  std::vector<io::NamedTensor> t{{"w", Tensor::from({1, 2}, {1.0f, -2.5f})}};
  auto bytes = io::encode_tensor_table(t);
  // 8 magic + 4 version + 4 count + (4 + 1 name + 4 rank + 8 dims + 8 data) + 8 checksum
  REQUIRE(bytes.size() == 8 + 4 + 4 + 4 + 1 + 4 + 8 + 8 + 8);
  CHECK(std::memcmp(bytes.data(), "EXVQA1\0", 8) == 0);
  CHECK(bytes[8] == 1);
  CHECK(bytes[9] == 0);
  CHECK(bytes[12] == 1);
  CHECK(bytes[16] == 1);
  CHECK(bytes[20] == 'w');
  // -2.5f = 0xC0200000, little-endian
  CHECK(bytes[37] == 0x00);
  CHECK(bytes[39] == 0x20);
  CHECK(bytes[40] == 0xC0);
}

TEST_CASE("checkpoint roundtrip is bit-identical including RNG state") {
  TempDir dir;
  Rng rng(77);
  Tensor a = testing::random_tensor({3, 4}, 1), b = testing::random_tensor({5}, 2);
  ParamList params{{"a", &a}, {"b", &b}};
  for (int i = 0; i < 10; ++i) rng();
  auto ckpt = io::make_checkpoint(params, R"({"seed":77})", rng);
  io::save_checkpoint(ckpt, dir / "m.ckpt");
  auto bytes1 = io::read_file(dir / "m.ckpt");
  io::save_checkpoint(ckpt, dir / "m2.ckpt");
  CHECK(io::read_file(dir / "m2.ckpt") == bytes1);

  auto loaded = io::load_checkpoint(dir / "m.ckpt");
  CHECK(loaded.config_json == R"({"seed":77})");
  Tensor a2 = Tensor::zeros({3, 4}), b2 = Tensor::zeros({5});
  ParamList params2{{"a", &a2}, {"b", &b2}};
  io::restore_params(loaded, params2);
  CHECK(std::memcmp(a2.data().data(), a.data().data(), a.size() * 4) == 0);
  CHECK(std::memcmp(b2.data().data(), b.data().data(), b.size() * 4) == 0);
  Rng rng2 = io::restore_rng(loaded);
  CHECK(rng2 == rng);
  CHECK(rng2() == rng());

  Tensor wrong = Tensor::zeros({4, 3});
  ParamList bad{{"a", &wrong}, {"b", &b2}};
  CHECK_THROWS_AS(io::restore_params(loaded, bad), DimensionError);
  ParamList missing{{"a", &a2}};
  CHECK_THROWS_AS(io::restore_params(loaded, missing), FormatError);
}

TEST_CASE("checkpoint corruption yields distinct errors") {
  TempDir dir;
  Tensor a = testing::random_tensor({2, 2}, 5);
  ParamList params{{"a", &a}};
  io::save_checkpoint(io::make_checkpoint(params, "{}", Rng(1)), dir / "m.ckpt");
  auto bytes = io::read_file(dir / "m.ckpt");

  auto flipped = bytes;
  flipped.back() ^= 0x01;
  io::write_file(dir / "c.ckpt", flipped);
  CHECK_THROWS_AS(io::load_checkpoint(dir / "c.ckpt"), ChecksumError);

  auto payload = bytes;
  payload[30] ^= 0x40;
  io::write_file(dir / "p.ckpt", payload);
  CHECK_THROWS_AS(io::load_checkpoint(dir / "p.ckpt"), ChecksumError);

  std::vector<io::NamedTensor> t{{"a", a}};
  io::write_file(dir / "v.ckpt", io::encode_tensor_table(t, 99));
  CHECK_THROWS_AS(io::load_checkpoint(dir / "v.ckpt"), VersionError);

  auto magic = bytes;
  magic[0] = 'X';
  io::write_file(dir / "m2.ckpt", magic);
  CHECK_THROWS_AS(io::load_checkpoint(dir / "m2.ckpt"), MagicError);

  io::write_file(dir / "t.ckpt", std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 12));
  CHECK_THROWS_AS(io::load_checkpoint(dir / "t.ckpt"), FormatError);

  CHECK(error_code_name(ChecksumError("x").code()) != error_code_name(VersionError("x").code()));
  CHECK(error_code_name(MagicError("x").code()) != error_code_name(VersionError("x").code()));
}

TEST_CASE("byte tensors roundtrip arbitrary text") {
  for (std::string s : {std::string(), std::string("abc"), std::string("\x00\xff\n", 3)})
    CHECK(io::tensor_to_bytes(io::bytes_to_tensor(s)) == s);
}
