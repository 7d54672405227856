#include "dnirb/checkpoint.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dnirb/errors.hpp"

namespace dnirb {
namespace {

constexpr std::array<std::uint8_t, 8> kMagic = {'D', 'N', 'I', 'R', 'B', 'C', 'K', 0};
constexpr std::uint32_t kFlagBranchRelu = 1u;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const std::uint8_t* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointTruncatedError(std::string("checkpoint truncated while reading ") +
                                     what);
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32(const char* what) {
    const std::uint8_t* p = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }
  std::uint64_t u64(const char* what) {
    const std::uint8_t* p = take(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

double read_f64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return std::bit_cast<double>(v);
}

// Flattened view of every parameter tensor in checkpoint order.
struct Slot {
  std::string name;
  Shape shape;
  double* data;
  std::size_t size;
};

std::vector<Slot> slots_of(NetworkParams& params) {
  std::vector<Slot> slots;
  for_each_layer(params, [&](const std::string& name, ConvParams& conv) {
    slots.push_back({name + ".weight", conv.weights.shape(), conv.weights.raw(),
                     conv.weights.size()});
    slots.push_back({name + ".bias", Shape{conv.bias.size(), 1, 1, 1},
                     conv.bias.data(), conv.bias.size()});
  });
  return slots;
}

}  // namespace

std::uint64_t CheckpointInfo::parameter_count() const {
  std::uint64_t total = 0;
  for (const auto& e : entries) total += e.elements;
  return total;
}

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for large payloads.
  while (size > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_checkpoint(const NetworkParams& params) {
  NetworkParams copy = params;
  const std::vector<Slot> slots = slots_of(copy);

  Writer w;
  w.raw(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.config.blocks));
  w.u32(static_cast<std::uint32_t>(kFeatureChannels));
  w.u32(static_cast<std::uint32_t>(kBottleneckChannels));
  w.u32(1);  // input channels
  w.u32(params.config.branch_output_relu ? kFlagBranchRelu : 0u);
  w.u32(static_cast<std::uint32_t>(slots.size()));
  std::uint64_t offset = 0;
  for (const Slot& s : slots) {
    w.u32(static_cast<std::uint32_t>(s.name.size()));
    w.raw(reinterpret_cast<const std::uint8_t*>(s.name.data()), s.name.size());
    w.u32(static_cast<std::uint32_t>(s.shape.n));
    w.u32(static_cast<std::uint32_t>(s.shape.c));
    w.u32(static_cast<std::uint32_t>(s.shape.h));
    w.u32(static_cast<std::uint32_t>(s.shape.w));
    w.u64(offset);
    w.u64(s.size);
    offset += s.size * sizeof(double);
  }
  w.u64(offset);
  const std::size_t payload_start = w.bytes().size();
  for (const Slot& s : slots) {
    for (std::size_t i = 0; i < s.size; ++i) w.f64(s.data[i]);
  }
  const std::uint32_t crc =
      crc32_of(w.bytes().data() + payload_start, w.bytes().size() - payload_start);
  w.u32(crc);
  return std::move(w.bytes());
}

NetworkParams decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                                CheckpointInfo* info_out) {
  Reader r(bytes);
  const std::uint8_t* magic = r.take(kMagic.size(), "magic");
  if (std::memcmp(magic, kMagic.data(), kMagic.size()) != 0) {
    throw CheckpointFormatError("not a DnIRB checkpoint (bad magic)");
  }
  CheckpointInfo info;
  info.version = r.u32("version");
  if (info.version != kCheckpointVersion) {
    throw CheckpointVersionError("unsupported checkpoint version " +
                                 std::to_string(info.version) + " (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  info.config.blocks = r.u32("block count");
  info.feature_channels = r.u32("feature channels");
  info.bottleneck_channels = r.u32("bottleneck channels");
  info.input_channels = r.u32("input channels");
  const std::uint32_t flags = r.u32("flags");
  info.config.branch_output_relu = (flags & kFlagBranchRelu) != 0;
  if (info.config.blocks < 1 || info.feature_channels != kFeatureChannels ||
      info.bottleneck_channels != kBottleneckChannels || info.input_channels != 1 ||
      (flags & ~kFlagBranchRelu) != 0) {
    throw CheckpointFormatError("checkpoint hyperparameters are not supported by "
                                "this build");
  }

  const std::uint32_t count = r.u32("entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    ManifestEntry e;
    const std::uint32_t len = r.u32("entry name length");
    const std::uint8_t* name = r.take(len, "entry name");
    e.name.assign(reinterpret_cast<const char*>(name), len);
    e.shape.n = r.u32("entry shape");
    e.shape.c = r.u32("entry shape");
    e.shape.h = r.u32("entry shape");
    e.shape.w = r.u32("entry shape");
    e.byte_offset = r.u64("entry offset");
    e.elements = r.u64("entry size");
    info.entries.push_back(std::move(e));
  }
  info.payload_bytes = r.u64("payload size");
  const std::uint8_t* payload = r.take(info.payload_bytes, "payload");
  info.checksum = r.u32("checksum");
  if (r.remaining() != 0) {
    throw CheckpointFormatError("trailing bytes after checkpoint checksum");
  }
  if (crc32_of(payload, info.payload_bytes) != info.checksum) {
    throw ChecksumError("checkpoint payload checksum mismatch");
  }

  NetworkParams params(info.config);
  std::vector<Slot> slots = slots_of(params);
  if (slots.size() != info.entries.size()) {
    throw CheckpointFormatError("checkpoint manifest has " +
                                std::to_string(info.entries.size()) +
                                " entries, expected " + std::to_string(slots.size()));
  }
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const ManifestEntry& e = info.entries[i];
    const Slot& s = slots[i];
    if (e.name != s.name || e.shape != s.shape || e.elements != s.size ||
        e.byte_offset != offset) {
      throw CheckpointFormatError("checkpoint manifest entry '" + e.name +
                                  "' does not match the expected layout");
    }
    offset += s.size * sizeof(double);
  }
  if (offset != info.payload_bytes) {
    throw CheckpointFormatError("checkpoint payload size does not match manifest");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::uint8_t* p = payload + info.entries[i].byte_offset;
    for (std::size_t j = 0; j < slots[i].size; ++j) {
      slots[i].data[j] = read_f64(p + j * sizeof(double));
    }
  }
  if (info_out) *info_out = std::move(info);
  return params;
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

NetworkParams load_checkpoint(const std::filesystem::path& path,
                              const std::optional<NetworkConfig>& expected) {
  NetworkParams params = decode_checkpoint(read_file(path));
  if (expected && !(params.config == *expected)) {
    throw HyperparameterMismatchError(
        "checkpoint " + path.string() + " has " +
        std::to_string(params.config.blocks) + " blocks (branch_output_relu=" +
        std::to_string(params.config.branch_output_relu) + "), requested " +
        std::to_string(expected->blocks) + " (branch_output_relu=" +
        std::to_string(expected->branch_output_relu) + ")");
  }
  return params;
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  CheckpointInfo info;
  decode_checkpoint(read_file(path), &info);
  return info;
}

}  // namespace dnirb
