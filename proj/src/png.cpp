#include <zlib.h>

#include <array>
#include <cstring>
#include <fstream>

#include "auheat/errors.hpp"
#include "auheat/image.hpp"

namespace auheat {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const std::uint32_t crc = crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32(out, crc);
}

constexpr std::array<std::uint8_t, 8> kPngSig = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

std::vector<std::uint8_t> encode_png(const Image8& img) {
  if (img.width <= 0 || img.height <= 0) throw ValidationError("encode_png: empty image");
  const size_t stride = static_cast<size_t>(img.width) * 3;
  // Filter type 0 (None) per scanline; zlib does the compression work.
  std::vector<std::uint8_t> raw((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw[y * (stride + 1)] = 0;
    std::memcpy(raw.data() + y * (stride + 1) + 1, img.pixels.data() + y * stride, stride);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw RuntimeFailure("encode_png: zlib compression failed");
  comp.resize(comp_len);

  std::vector<std::uint8_t> out(kPngSig.begin(), kPngSig.end());
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", comp);
  put_chunk(out, "IEND", {});
  return out;
}

Image8 decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || !std::equal(kPngSig.begin(), kPngSig.end(), bytes.begin()))
    throw ValidationError("decode_png: not a PNG file");
  size_t pos = 8;
  int width = 0, height = 0, bit_depth = 0, color_type = 0, interlace = 0;
  std::vector<std::uint8_t> idat;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = get_u32(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) throw ValidationError("decode_png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const std::uint8_t* data = bytes.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = static_cast<int>(get_u32(data));
      height = static_cast<int>(get_u32(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      interlace = data[12];
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (width <= 0 || height <= 0) throw ValidationError("decode_png: missing IHDR");
  if (bit_depth != 8 || color_type != 2 || interlace != 0)
    throw ValidationError("decode_png: only 8-bit RGB non-interlaced PNGs are supported");

  const size_t stride = static_cast<size_t>(width) * 3;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK || raw_len != raw.size())
    throw ValidationError("decode_png: corrupt image data");

  Image8 img(width, height);
  std::vector<std::uint8_t> prev(stride, 0);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* line = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* out = img.pixels.data() + y * stride;
    switch (filter) {
      case 0:
        std::memcpy(out, line, stride);
        break;
      case 1:  // Sub
        for (size_t x = 0; x < stride; ++x) out[x] = static_cast<std::uint8_t>(line[x] + (x >= 3 ? out[x - 3] : 0));
        break;
      case 2:  // Up
        for (size_t x = 0; x < stride; ++x) out[x] = static_cast<std::uint8_t>(line[x] + prev[x]);
        break;
      case 3:  // Average
        for (size_t x = 0; x < stride; ++x) {
          const int a = x >= 3 ? out[x - 3] : 0;
          out[x] = static_cast<std::uint8_t>(line[x] + ((a + prev[x]) >> 1));
        }
        break;
      case 4:  // Paeth
        for (size_t x = 0; x < stride; ++x) {
          const int a = x >= 3 ? out[x - 3] : 0;
          const int b = prev[x];
          const int c = x >= 3 ? prev[x - 3] : 0;
          const int p = a + b - c;
          const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
          const int pred = (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
          out[x] = static_cast<std::uint8_t>(line[x] + pred);
        }
        break;
      default:
        throw ValidationError("decode_png: unknown filter type");
    }
    std::memcpy(prev.data(), out, stride);
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image8& img) {
  const auto bytes = encode_png(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeFailure("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw RuntimeFailure("write failed: " + path.string());
}

Image8 read_png(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open image: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

}  // namespace auheat
