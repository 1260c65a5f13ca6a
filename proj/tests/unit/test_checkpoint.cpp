#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "amenable/nn/checkpoint.hpp"

namespace amenable::nn {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("amenable_ckpt_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Network sample_net() {
  Network net({1, 4, 4}, {LayerSpec::conv2d(2), LayerSpec::relu(), LayerSpec::max_pool(), LayerSpec::flatten(),
                          LayerSpec::dense(1)});
  Rng rng = make_rng(3, "ckpt");
  net.initialize(rng);
  return net;
}

TEST(Checkpoint, RoundTripIsExact) {
  const fs::path dir = scratch("roundtrip");
  const Network net = sample_net();
  CheckpointMeta meta;
  meta.strings["role"] = "task_specific";
  meta.numbers["phi"] = 0.9;
  save_checkpoint(dir / "controller", net, meta);
  const auto loaded = load_checkpoint(dir / "controller");
  EXPECT_EQ(loaded.network, net);
  EXPECT_EQ(loaded.meta, meta);
}

TEST(Checkpoint, BlobLayout) {
  const fs::path dir = scratch("layout");
  Network net({1}, {LayerSpec::dense(1)});
  net.parameters()[0].value[0] = 2.5;
  net.parameters()[1].value[0] = -1.0;
  save_checkpoint(dir / "n", net);
  std::ifstream is(dir / "n.bin", std::ios::binary);
  auto u32 = [&] {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  const std::uint32_t len = u32();
  std::string name(len, '\0');
  is.read(name.data(), len);
  EXPECT_EQ(name, "0.weight");
  EXPECT_EQ(u32(), 2u);
  std::uint64_t dims[2];
  is.read(reinterpret_cast<char*>(dims), 16);
  EXPECT_EQ(dims[0], 1u);
  EXPECT_EQ(dims[1], 1u);
  double w = 0;
  is.read(reinterpret_cast<char*>(&w), 8);
  EXPECT_EQ(w, 2.5);
}

TEST(Checkpoint, MissingFilesAreArtifactErrors) {
  const fs::path dir = scratch("missing");
  EXPECT_THROW(load_checkpoint(dir / "nothing"), ArtifactError);
}

TEST(Checkpoint, WrongVersionRejected) {
  const fs::path dir = scratch("version");
  save_checkpoint(dir / "n", sample_net());
  std::ifstream is(dir / "n.json");
  std::string text((std::istreambuf_iterator<char>(is)), {});
  const auto pos = text.find("ckpt-v1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 7, "ckpt-v9");
  std::ofstream(dir / "n.json") << text;
  EXPECT_THROW(load_checkpoint(dir / "n"), ArtifactError);
}

TEST(Checkpoint, SavingTwiceIsByteIdentical) {
  const fs::path a = scratch("bytes_a"), b = scratch("bytes_b");
  save_checkpoint(a / "n", sample_net());
  save_checkpoint(b / "n", sample_net());
  for (const char* ext : {".json", ".bin"}) {
    std::ifstream fa(a / (std::string("n") + ext), std::ios::binary), fb(b / (std::string("n") + ext), std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_EQ(sa, sb) << ext;
  }
}

}  // namespace
}  // namespace amenable::nn
