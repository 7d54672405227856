#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "dnirb/checkpoint.hpp"
#include "dnirb/errors.hpp"
#include "test_util.hpp"

namespace dnirb {
namespace {

namespace fs = std::filesystem;

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dnirb_ckpt_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

bool bitwise_equal(const NetworkParams& a, const NetworkParams& b) {
  std::vector<const ConvParams*> la, lb;
  for_each_layer(a, [&](const std::string&, const ConvParams& c) { la.push_back(&c); });
  for_each_layer(b, [&](const std::string&, const ConvParams& c) { lb.push_back(&c); });
  if (la.size() != lb.size()) return false;
  for (std::size_t i = 0; i < la.size(); ++i) {
    const auto wa = la[i]->weights.data(), wb = lb[i]->weights.data();
    if (wa.size() != wb.size() ||
        std::memcmp(wa.data(), wb.data(), wa.size_bytes()) != 0 ||
        std::memcmp(la[i]->bias.data(), lb[i]->bias.data(), la[i]->bias.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  for (bool branch_relu : {false, true}) {
    NetworkParams net = init_params(NetworkConfig{2, branch_relu}, 17);
    net.head.bias[0] = 0.1 + 1e-17;  // not representable in decimal round trips
    const fs::path p = dir_ / "net.ckpt";
    save_checkpoint(net, p);
    const NetworkParams back = load_checkpoint(p);
    EXPECT_EQ(back.config, net.config);
    EXPECT_TRUE(bitwise_equal(back, net));
    const Tensor y = testing::random_tensor(Shape{1, 1, 16, 12}, 4, 0.0, 1.0);
    const Tensor a = denoise(y, net), b = denoise(y, back);
    EXPECT_EQ(std::memcmp(a.raw(), b.raw(), a.size() * sizeof(double)), 0);
  }
}

TEST_F(CheckpointTest, EncodingIsDeterministic) {
  const NetworkParams net = init_params(NetworkConfig{1, false}, 3);
  EXPECT_EQ(encode_checkpoint(net), encode_checkpoint(net));
}

TEST_F(CheckpointTest, ManifestCountsMatchClosedForm) {
  for (std::size_t n : {1, 2, 4, 8, 16}) {
    const fs::path p = dir_ / ("n" + std::to_string(n) + ".ckpt");
    save_checkpoint(NetworkParams(NetworkConfig{n, false}), p);
    const CheckpointInfo info = read_checkpoint_info(p);
    EXPECT_EQ(info.config.blocks, n);
    EXPECT_EQ(info.parameter_count(), expected_param_count(n)) << "N=" << n;
    EXPECT_EQ(info.entries.size(), 2 * (3 + 5 * n));
    EXPECT_EQ(info.payload_bytes, 8 * info.parameter_count());
  }
  const fs::path p = dir_ / "n4.ckpt";
  EXPECT_EQ(read_checkpoint_info(p).parameter_count(), 168321u);
  std::uint64_t block0 = 0;
  for (const ManifestEntry& e : read_checkpoint_info(p).entries) {
    if (e.name.rfind("blocks.0.", 0) == 0) block0 += e.elements;
  }
  EXPECT_EQ(block0, 31904u);
}

TEST_F(CheckpointTest, ManifestOffsetsAreContiguous) {
  std::vector<std::uint8_t> bytes = encode_checkpoint(NetworkParams(NetworkConfig{1, false}));
  CheckpointInfo info;
  decode_checkpoint(bytes, &info);
  std::uint64_t offset = 0;
  for (const ManifestEntry& e : info.entries) {
    EXPECT_EQ(e.byte_offset, offset) << e.name;
    EXPECT_EQ(e.elements, e.shape.numel());
    offset += 8 * e.elements;
  }
  EXPECT_EQ(info.entries.front().name, "stem1.weight");
  EXPECT_EQ(info.entries.back().name, "head.bias");
}

TEST_F(CheckpointTest, CorruptedPayloadByteFailsChecksum) {
  std::vector<std::uint8_t> bytes = encode_checkpoint(init_params(NetworkConfig{1, false}, 1));
  bytes[bytes.size() - 100] ^= 0x01;
  EXPECT_THROW(decode_checkpoint(bytes), ChecksumError);
}

TEST_F(CheckpointTest, TruncatedFileIsReported) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(NetworkParams(NetworkConfig{1, false}));
  for (std::size_t keep : {std::size_t{0}, std::size_t{5}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(keep));
    EXPECT_THROW(decode_checkpoint(cut), CheckpointTruncatedError) << keep;
  }
}

TEST_F(CheckpointTest, BadMagicAndVersion) {
  std::vector<std::uint8_t> bytes = encode_checkpoint(NetworkParams(NetworkConfig{1, false}));
  std::vector<std::uint8_t> magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), CheckpointFormatError);
  bytes[8] = 2;  // version field follows the 8-byte magic
  EXPECT_THROW(decode_checkpoint(bytes), CheckpointVersionError);
}

TEST_F(CheckpointTest, HyperparameterMismatch) {
  const fs::path p = dir_ / "n2.ckpt";
  save_checkpoint(NetworkParams(NetworkConfig{2, false}), p);
  EXPECT_NO_THROW(load_checkpoint(p, NetworkConfig{2, false}));
  EXPECT_THROW(load_checkpoint(p, NetworkConfig{4, false}), HyperparameterMismatchError);
  EXPECT_THROW(load_checkpoint(p, NetworkConfig{2, true}), HyperparameterMismatchError);
}

TEST_F(CheckpointTest, MissingFileIsDataError) {
  EXPECT_THROW(load_checkpoint(dir_ / "absent.ckpt"), DataError);
}

TEST(Crc32Test, KnownVector) {
  const char* s = "123456789";
  EXPECT_EQ(crc32_of(reinterpret_cast<const std::uint8_t*>(s), 9), 0xCBF43926u);
}

}  // namespace
}  // namespace dnirb
