#include "exvqa/toy.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <string>

#include <json.hpp>

#include "exvqa/dataset.hpp"
#include "exvqa/tensor_file.hpp"

namespace exvqa::toy {

namespace {

struct Color {
  const char* name;
  float r, g, b;
};

struct Object {
  const char* name;
  const char* fact;       // completes "... and <fact>"
  const char* knowledge;  // knowledge base passage
};

constexpr std::array<Color, 4> kColors{{{"red", 0.85f, 0.1f, 0.1f},
                                        {"green", 0.1f, 0.8f, 0.15f},
                                        {"blue", 0.1f, 0.2f, 0.85f},
                                        {"yellow", 0.9f, 0.85f, 0.1f}}};

constexpr std::array<Object, 4> kObjects{{{"ball", "it bounces", "a ball is a round toy and it bounces"},
                                          {"cup", "it holds tea", "a cup is a small bowl and it holds tea"},
                                          {"kite", "it flies high", "a kite is a light frame and it flies high"},
                                          {"hat", "it covers heads", "a hat is clothing and it covers heads"}}};

}  // namespace

ToyFiles write_memorization_set(const std::filesystem::path& dir, std::uint64_t seed, std::size_t image_size) {
  using nlohmann::json;
  std::filesystem::create_directories(dir / "images");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(-0.05f, 0.05f);

  std::string dataset;
  std::size_t n = 0;
  for (const auto& obj : kObjects) {
    for (const auto& col : kColors) {
      const std::string id = "toy" + std::to_string(n++);
      Tensor img = Tensor::zeros({image_size, image_size, 3});
      for (std::size_t p = 0; p < image_size * image_size; ++p) {
        img[p * 3 + 0] = std::clamp(col.r + noise(rng), 0.0f, 1.0f);
        img[p * 3 + 1] = std::clamp(col.g + noise(rng), 0.0f, 1.0f);
        img[p * 3 + 2] = std::clamp(col.b + noise(rng), 0.0f, 1.0f);
      }
      const std::string image = "images/" + id + ".ppm";
      io::write_file(dir / image, data::encode_ppm(img));

      const std::string o = obj.name;
      json line = {{"id", id},
                   {"image", image},
                   {"question", "What is in the picture?"},
                   {"answer", std::string(col.name) + " " + o},
                   {"explanation", "the " + o + " is " + col.name + " and " + obj.fact},
                   {"captions",
                    {"a " + o + " on a table", "a photo of a " + o, "there is a " + o + " here",
                     "a close up of one " + o, "an object that is a " + o}}};
      dataset += line.dump() + "\n";
    }
  }
  std::string knowledge;
  for (const auto& obj : kObjects)
    knowledge += json{{"id", std::string("k_") + obj.name}, {"text", obj.knowledge}}.dump() + "\n";

  ToyFiles files{dir, dir / "dataset.jsonl", dir / "knowledge.jsonl"};
  io::write_text_file(files.dataset, dataset);
  io::write_text_file(files.knowledge, knowledge);
  return files;
}

}  // namespace exvqa::toy
