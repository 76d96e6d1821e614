#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

#include <jpeglib.h>
#include <png.h>
#include <tiffio.h>

#include "samba/image.hpp"

namespace samba {

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPng, 8) == 0) return ImageFormat::Png;
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return ImageFormat::Jpeg;
  }
  if (bytes.size() >= 4 && ((bytes[0] == 'I' && bytes[1] == 'I' && bytes[2] == 42 && bytes[3] == 0) ||
                            (bytes[0] == 'M' && bytes[1] == 'M' && bytes[2] == 0 && bytes[3] == 42))) {
    return ImageFormat::Tiff;
  }
  return ImageFormat::Auto;
}

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::MalformedFile, what);
}

// ---------------------------------------------------------------- PNG

struct PngReadSource {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t len) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->offset + len > src->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(out, src->bytes.data() + src->offset, len);
  src->offset += len;
}

void png_quiet_warning(png_structp, png_const_charp) {}

RawPage decode_png(std::span<const std::uint8_t> bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           png_quiet_warning);
  if (!png) malformed("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    malformed("libpng init failed");
  }

  PngReadSource source{bytes};
  RawPage page;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  int stored_channels = 0;
  int bit_depth = 0;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    malformed("corrupt PNG stream");
  }

  png_set_read_fn(png, &source, png_read_from_span);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  bit_depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  stored_channels = png_get_channels(png, info);
  page.width = static_cast<int>(png_get_image_width(png, info));
  page.height = static_cast<int>(png_get_image_height(png, info));
  page.channels = stored_channels;
  page.sample = bit_depth == 16 ? RawPage::Sample::U16 : RawPage::Sample::U8;

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  buffer.resize(row_bytes * page.height);
  rows.resize(page.height);
  for (int y = 0; y < page.height; ++y) rows[y] = buffer.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (stored_channels != 1 && stored_channels != 3) {
    throw Error(ErrorCode::UnsupportedChannelCount, "unsupported PNG channel layout");
  }
  const std::size_t n = static_cast<std::size_t>(page.width) * page.height * page.channels;
  page.values.resize(n);
  if (bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      page.values[i] = static_cast<double>((buffer[2 * i] << 8) | buffer[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) page.values[i] = buffer[i];
  }
  return page;
}

struct PngWriteSink {
  std::vector<std::uint8_t> bytes;
};

void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* sink = static_cast<PngWriteSink*>(png_get_io_ptr(png));
  sink->bytes.insert(sink->bytes.end(), data, data + len);
}

void png_flush_noop(png_structp) {}

// ---------------------------------------------------------------- JPEG

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

void jpeg_quiet_message(j_common_ptr) {}

RawPage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  RawPage page;
  std::vector<JSAMPLE> row;

  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.output_message = jpeg_quiet_message;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    malformed("corrupt JPEG stream");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::UnsupportedChannelCount, "CMYK JPEG is not supported");
  }
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  page.width = static_cast<int>(cinfo.output_width);
  page.height = static_cast<int>(cinfo.output_height);
  page.channels = cinfo.output_components;
  page.sample = RawPage::Sample::U8;
  page.values.reserve(static_cast<std::size_t>(page.width) * page.height * page.channels);
  row.resize(static_cast<std::size_t>(page.width) * page.channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW ptr = row.data();
    jpeg_read_scanlines(&cinfo, &ptr, 1);
    for (JSAMPLE v : row) page.values.push_back(v);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return page;
}

// ---------------------------------------------------------------- TIFF

struct TiffMemory {
  std::span<const std::uint8_t> bytes;
  toff_t offset = 0;
};

tsize_t tiff_read(thandle_t h, tdata_t buf, tsize_t size) {
  auto* mem = static_cast<TiffMemory*>(h);
  if (mem->offset >= mem->bytes.size()) return 0;
  const auto n = std::min<toff_t>(static_cast<toff_t>(size), mem->bytes.size() - mem->offset);
  std::memcpy(buf, mem->bytes.data() + mem->offset, n);
  mem->offset += n;
  return static_cast<tsize_t>(n);
}

tsize_t tiff_write(thandle_t, tdata_t, tsize_t) { return 0; }

toff_t tiff_seek(thandle_t h, toff_t off, int whence) {
  auto* mem = static_cast<TiffMemory*>(h);
  toff_t base = 0;
  if (whence == SEEK_CUR) base = mem->offset;
  if (whence == SEEK_END) base = mem->bytes.size();
  mem->offset = base + off;
  return mem->offset;
}

int tiff_close(thandle_t) { return 0; }
toff_t tiff_size(thandle_t h) { return static_cast<TiffMemory*>(h)->bytes.size(); }
int tiff_map(thandle_t, tdata_t*, toff_t*) { return 0; }
void tiff_unmap(thandle_t, tdata_t, toff_t) {}

struct TiffCloser {
  void operator()(TIFF* t) const { TIFFClose(t); }
};

double tiff_sample(const std::uint8_t* p, int bits, bool is_float) {
  if (is_float) {
    float f;
    std::memcpy(&f, p, sizeof f);
    return f;
  }
  if (bits == 16) {
    std::uint16_t v;
    std::memcpy(&v, p, sizeof v);
    return v;
  }
  return *p;
}

RawPage decode_tiff_directory(TIFF* tif) {
  std::uint32_t width = 0, height = 0;
  std::uint16_t spp = 1, bits = 8, format = SAMPLEFORMAT_UINT, planar = PLANARCONFIG_CONTIG;
  std::uint16_t photometric = PHOTOMETRIC_MINISBLACK;
  if (!TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &width) ||
      !TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &height)) {
    malformed("TIFF page lacks dimensions");
  }
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLEFORMAT, &format);
  TIFFGetFieldDefaulted(tif, TIFFTAG_PLANARCONFIG, &planar);
  TIFFGetField(tif, TIFFTAG_PHOTOMETRIC, &photometric);

  const bool is_float = format == SAMPLEFORMAT_IEEEFP;
  const bool ok_int = format == SAMPLEFORMAT_UINT && (bits == 8 || bits == 16);
  const bool ok_float = is_float && bits == 32;
  if (!ok_int && !ok_float) {
    throw Error(ErrorCode::UnsupportedDepth,
                "unsupported TIFF sample format: " + std::to_string(bits) + "-bit");
  }
  if (width == 0 || height == 0) malformed("TIFF page has zero size");
  if (spp < 1 || spp > 4) {
    throw Error(ErrorCode::UnsupportedChannelCount, "unsupported TIFF samples per pixel");
  }
  if (photometric == PHOTOMETRIC_SEPARATED || photometric == PHOTOMETRIC_YCBCR) {
    throw Error(ErrorCode::UnsupportedChannelCount, "unsupported TIFF photometric");
  }

  const int bytes_per_sample = bits / 8;
  // Read all samples into an interleaved buffer of spp samples per pixel.
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height * spp * bytes_per_sample);
  auto put = [&](std::uint32_t x, std::uint32_t y, int s, const std::uint8_t* src) {
    std::memcpy(&pixels[((static_cast<std::size_t>(y) * width + x) * spp + s) * bytes_per_sample],
                src, bytes_per_sample);
  };
  const int planes = planar == PLANARCONFIG_SEPARATE ? spp : 1;
  const int per_chunk_spp = planar == PLANARCONFIG_SEPARATE ? 1 : spp;

  if (TIFFIsTiled(tif)) {
    std::uint32_t tw = 0, th = 0;
    TIFFGetField(tif, TIFFTAG_TILEWIDTH, &tw);
    TIFFGetField(tif, TIFFTAG_TILELENGTH, &th);
    if (tw == 0 || th == 0) malformed("TIFF tile size missing");
    std::vector<std::uint8_t> tile(TIFFTileSize(tif));
    for (int plane = 0; plane < planes; ++plane) {
      for (std::uint32_t ty = 0; ty < height; ty += th) {
        for (std::uint32_t tx = 0; tx < width; tx += tw) {
          if (TIFFReadTile(tif, tile.data(), tx, ty, 0, static_cast<tsample_t>(plane)) < 0) {
            malformed("TIFF tile read failed");
          }
          for (std::uint32_t y = ty; y < std::min(height, ty + th); ++y) {
            for (std::uint32_t x = tx; x < std::min(width, tx + tw); ++x) {
              for (int s = 0; s < per_chunk_spp; ++s) {
                const std::size_t off =
                    ((static_cast<std::size_t>(y - ty) * tw + (x - tx)) * per_chunk_spp + s) *
                    bytes_per_sample;
                put(x, y, planes > 1 ? plane : s, &tile[off]);
              }
            }
          }
        }
      }
    }
  } else {
    std::vector<std::uint8_t> line(TIFFScanlineSize(tif));
    for (int plane = 0; plane < planes; ++plane) {
      for (std::uint32_t y = 0; y < height; ++y) {
        if (TIFFReadScanline(tif, line.data(), y, static_cast<tsample_t>(plane)) < 0) {
          malformed("TIFF scanline read failed");
        }
        for (std::uint32_t x = 0; x < width; ++x) {
          for (int s = 0; s < per_chunk_spp; ++s) {
            put(x, y, planes > 1 ? plane : s,
                &line[(static_cast<std::size_t>(x) * per_chunk_spp + s) * bytes_per_sample]);
          }
        }
      }
    }
  }

  RawPage page;
  page.width = static_cast<int>(width);
  page.height = static_cast<int>(height);
  page.sample = is_float ? RawPage::Sample::F32
                         : (bits == 16 ? RawPage::Sample::U16 : RawPage::Sample::U8);
  const std::size_t n_pixels = static_cast<std::size_t>(width) * height;

  if (photometric == PHOTOMETRIC_PALETTE) {
    if (spp != 1 || is_float) malformed("invalid TIFF palette image");
    std::uint16_t *r = nullptr, *g = nullptr, *b = nullptr;
    if (!TIFFGetField(tif, TIFFTAG_COLORMAP, &r, &g, &b)) malformed("TIFF palette missing");
    const std::size_t n_entries = std::size_t{1} << bits;
    page.channels = 3;
    page.sample = RawPage::Sample::U16;
    page.values.resize(n_pixels * 3);
    for (std::size_t i = 0; i < n_pixels; ++i) {
      const auto idx = static_cast<std::size_t>(
          tiff_sample(&pixels[i * bytes_per_sample], bits, false));
      if (idx >= n_entries) malformed("TIFF palette index out of range");
      page.values[3 * i] = r[idx];
      page.values[3 * i + 1] = g[idx];
      page.values[3 * i + 2] = b[idx];
    }
    return page;
  }

  // Gray (+alpha) or RGB (+alpha): keep 1 or 3 colour samples.
  page.channels = spp >= 3 ? 3 : 1;
  page.values.resize(n_pixels * page.channels);
  const double full_scale = bits == 16 ? 65535.0 : 255.0;
  for (std::size_t i = 0; i < n_pixels; ++i) {
    for (int c = 0; c < page.channels; ++c) {
      double v = tiff_sample(&pixels[(i * spp + c) * bytes_per_sample], bits, is_float);
      if (photometric == PHOTOMETRIC_MINISWHITE && !is_float) v = full_scale - v;
      page.values[i * page.channels + c] = v;
    }
  }
  return page;
}

std::vector<RawPage> decode_tiff(std::span<const std::uint8_t> bytes) {
  TIFFSetWarningHandler(nullptr);
  TIFFSetErrorHandler(nullptr);
  TiffMemory mem{bytes};
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFClientOpen("memory", "rm", &mem, tiff_read, tiff_write,
                                                       tiff_seek, tiff_close, tiff_size, tiff_map,
                                                       tiff_unmap));
  if (!tif) malformed("not a readable TIFF");
  std::vector<RawPage> pages;
  do {
    pages.push_back(decode_tiff_directory(tif.get()));
  } while (TIFFReadDirectory(tif.get()));

  for (const auto& p : pages) {
    if (p.width != pages.front().width || p.height != pages.front().height ||
        p.channels != pages.front().channels) {
      throw Error(ErrorCode::InconsistentStack, "TIFF pages differ in dimensions");
    }
  }
  return pages;
}

}  // namespace

std::vector<RawPage> decode_raw(std::span<const std::uint8_t> bytes, ImageFormat hint) {
  ImageFormat format = hint == ImageFormat::Auto ? sniff_format(bytes) : hint;
  switch (format) {
    case ImageFormat::Png: return {decode_png(bytes)};
    case ImageFormat::Jpeg: return {decode_jpeg(bytes)};
    case ImageFormat::Tiff: return decode_tiff(bytes);
    case ImageFormat::Auto: break;
  }
  malformed("unrecognized image format");
}

namespace {

// Keeps setjmp in a frame without C++ objects; returns false on libpng error.
bool png_write_gray8(png_structp png, png_infop info, PngWriteSink* sink, png_bytep* rows,
                     png_uint_32 width, png_uint_32 height) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_write_fn(png, sink, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ClassPlane& values) {
  const auto width = static_cast<png_uint_32>(values.cols());
  const auto height = static_cast<png_uint_32>(values.rows());
  PngWriteSink sink;
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(values.data() + static_cast<std::size_t>(y) * width);
  }

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            png_quiet_warning);
  if (!png) throw std::runtime_error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  const bool ok = info && png_write_gray8(png, info, &sink, rows.data(), width, height);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw std::runtime_error("PNG encoding failed");
  return std::move(sink.bytes);
}

}  // namespace samba
